//! Policy statement grammar.
//!
//! ```text
//! policy    := verb app scope [priority INT] [between pairs | between all hosts]
//!              [via waypoints] [ratelimit INT unit]
//! verb      := route | alert
//! scope     := in NAME | from NAME to NAME
//! pairs     := (NAME,NAME) {, (NAME,NAME)}
//! waypoints := NAME[:INT] {, NAME[:INT]}
//! unit      := mbps | gbps
//! ```
//!
//! Keywords and application names are case-insensitive; region, host and
//! device names are kept verbatim.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::{
    AddressSpace, ApplicationRegistry, HostPair, HostSpace, NetworkOperation, OperationKind, Policy, Span,
    TrafficCondition, Waypoint, DEFAULT_PRIORITY,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {position}: expected {}{}", expected.join(" | "), found.as_ref().map(|f| alloc::format!(", found `{f}`")).unwrap_or_default())]
pub struct ParseError {
    /// Byte offset into the statement.
    pub position: usize,
    pub expected: Vec<&'static str>,
    /// The offending token, `None` at end of input.
    pub found: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemanticError {
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("unknown application `{0}`")]
    UnknownApplication(String),
    #[error("source region `{src_region}` and destination region `{dst_region}` do not match the operation scope")]
    RegionMismatch { src_region: String, dst_region: String },
    #[error("priority must be at least 1")]
    ZeroPriority,
    #[error("rate {0} bps is not a positive whole number of Mbps")]
    BadRate(u64),
    #[error("at most one rate limit per policy")]
    DuplicateRateLimit,
    #[error("alert policies cannot carry a rate limit")]
    AlertWithRateLimit,
    #[error("rate-limited routing needs exactly one rate limit")]
    MissingRateLimit,
    #[error("address space has no host pairs")]
    EmptyAddressSpace,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TokenKind<'a> {
    Word(&'a str),
    LParen,
    RParen,
    Comma,
    Colon,
}

#[derive(Clone, Copy, Debug)]
struct Token<'a> {
    kind: TokenKind<'a>,
    at: usize,
}

impl Token<'_> {
    fn text(&self) -> String {
        match self.kind {
            TokenKind::Word(w) => w.to_string(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
            TokenKind::Comma => ",".into(),
            TokenKind::Colon => ":".into(),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')
}

fn lex(input: &str) -> Result<Vec<Token<'_>>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(at, c)) = chars.peek() {
        let kind = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            ':' => TokenKind::Colon,
            c if is_word_char(c) => {
                let mut end = at;
                while let Some(&(i, c)) = chars.peek() {
                    if !is_word_char(c) {
                        break;
                    }
                    end = i + c.len_utf8();
                    chars.next();
                }
                tokens.push(Token { kind: TokenKind::Word(&input[at..end]), at });
                continue;
            }
            other => {
                return Err(ParseError {
                    position: at,
                    expected: vec!["name", "(", ")", ",", ":"],
                    found: Some(other.to_string()),
                })
            }
        };
        chars.next();
        tokens.push(Token { kind, at });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        let tok = self.peek();
        ParseError {
            position: tok.map_or(self.end, |t| t.at),
            expected: expected.to_vec(),
            found: tok.map(|t| t.text()),
        }
    }

    fn peek_keyword(&self, keyword: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Word(w), .. }) if w.eq_ignore_ascii_case(keyword))
    }

    fn keyword(&mut self, keyword: &'static str) -> Result<(), ParseError> {
        if self.peek_keyword(keyword) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&[keyword]))
        }
    }

    fn word(&mut self, what: &'static str) -> Result<&'a str, ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Word(w), .. }) => {
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn punct(&mut self, kind: TokenKind<'static>, what: &'static str) -> Result<(), ParseError> {
        match self.peek() {
            Some(tok) if tok.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn eat(&mut self, kind: TokenKind<'static>) -> bool {
        match self.peek() {
            Some(tok) if tok.kind == kind => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn integer<T: core::str::FromStr>(&mut self) -> Result<T, ParseError> {
        let save = self.pos;
        let w = self.word("integer")?;
        if w.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(v) = w.parse() {
                return Ok(v);
            }
        }
        self.pos = save;
        Err(self.error(&["integer"]))
    }

    fn pair(&mut self) -> Result<HostPair, ParseError> {
        self.punct(TokenKind::LParen, "(")?;
        let a = self.word("host name")?;
        self.punct(TokenKind::Comma, ",")?;
        let b = self.word("host name")?;
        self.punct(TokenKind::RParen, ")")?;
        Ok(HostPair::new(a, b))
    }

    fn waypoint(&mut self) -> Result<Waypoint, ParseError> {
        let device = self.word("device name")?;
        let port = if self.eat(TokenKind::Colon) { Some(self.integer()?) } else { None };
        Ok(Waypoint::new(device, port))
    }

    /// `INT unit` with or without whitespace between the two.
    fn rate(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        let w = self.word("rate")?;
        let digits = w.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            self.pos = start;
            return Err(self.error(&["integer"]));
        }
        let value: u64 = match w[..digits].parse() {
            Ok(v) => v,
            Err(_) => {
                self.pos = start;
                return Err(self.error(&["integer"]));
            }
        };
        let unit_at = self.pos;
        let unit = if digits == w.len() { self.word("mbps | gbps")? } else { &w[digits..] };
        let scale = if unit.eq_ignore_ascii_case("mbps") {
            1_000_000
        } else if unit.eq_ignore_ascii_case("gbps") {
            1_000_000_000
        } else {
            self.pos = if digits == w.len() { unit_at } else { start };
            return Err(self.error(&["mbps", "gbps"]));
        };
        value.checked_mul(scale).ok_or_else(|| {
            self.pos = start;
            self.error(&["integer"])
        })
    }
}

const CLAUSES: [&str; 4] = ["priority", "between", "via", "ratelimit"];

/// Parses a statement against the built-in application registry.
pub fn parse_policy(text: &str) -> Result<Policy, PolicyError> {
    parse_policy_with(text, &ApplicationRegistry::default())
}

pub fn parse_policy_with(text: &str, registry: &ApplicationRegistry) -> Result<Policy, PolicyError> {
    let mut p = Parser { tokens: lex(text)?, pos: 0, end: text.len() };

    let verb = p.word("route | alert").map_err(|mut e| {
        e.expected = vec!["route", "alert"];
        e
    })?;
    let kind = if verb.eq_ignore_ascii_case("route") {
        OperationKind::Route
    } else if verb.eq_ignore_ascii_case("alert") {
        OperationKind::Alert
    } else {
        return Err(SemanticError::UnknownOperation(verb.to_string()).into());
    };

    let app = p.word("application")?;
    let profile = registry.profile(app).ok_or_else(|| SemanticError::UnknownApplication(app.to_string()))?;

    let (span, source, destination) = if p.peek_keyword("in") {
        p.pos += 1;
        let region = p.word("region name")?;
        (Span::Intra, region, region)
    } else if p.peek_keyword("from") {
        p.pos += 1;
        let source = p.word("region name")?;
        p.keyword("to")?;
        let destination = p.word("region name")?;
        (Span::Inter, source, destination)
    } else {
        return Err(p.error(&["in", "from"]).into());
    };

    // Index into CLAUSES of the first clause that may still follow.
    let mut stage = 0;
    let mut priority = DEFAULT_PRIORITY;
    if p.peek_keyword("priority") {
        p.pos += 1;
        priority = p.integer()?;
        stage = 1;
    }

    let mut hosts = HostSpace::AllHosts;
    if p.peek_keyword("between") {
        p.pos += 1;
        if p.peek_keyword("all") {
            p.pos += 1;
            p.keyword("hosts")?;
        } else {
            let mut pairs = BTreeSet::new();
            pairs.insert(p.pair()?);
            while p.eat(TokenKind::Comma) {
                pairs.insert(p.pair()?);
            }
            hosts = HostSpace::Pairs(pairs);
        }
        stage = 2;
    }

    let mut waypoints = Vec::new();
    if p.peek_keyword("via") {
        p.pos += 1;
        waypoints.push(p.waypoint()?);
        while p.eat(TokenKind::Comma) {
            waypoints.push(p.waypoint()?);
        }
        stage = 3;
    }

    let mut traffic_conditions = Vec::new();
    if p.peek_keyword("ratelimit") {
        p.pos += 1;
        traffic_conditions.push(TrafficCondition::RateLimitPerFlow { bps: p.rate()? });
        stage = 4;
    }

    if p.peek().is_some() {
        let mut expected: Vec<&'static str> = CLAUSES[stage..].to_vec();
        expected.push("end of statement");
        return Err(p.error(&expected).into());
    }

    if kind == OperationKind::Alert && !traffic_conditions.is_empty() {
        return Err(SemanticError::AlertWithRateLimit.into());
    }
    let operation = NetworkOperation::new(kind, span, !traffic_conditions.is_empty());
    let policy = Policy {
        operation,
        profile,
        priority,
        source_region: source.to_string(),
        destination_region: destination.to_string(),
        address_space: AddressSpace { hosts, waypoints },
        traffic_conditions,
    };
    policy.validate()?;
    Ok(policy)
}

/// `200mbps`, `1gbps`; rates are whole megabits.
pub(crate) fn render_rate(bps: u64) -> String {
    if bps.is_multiple_of(1_000_000_000) {
        alloc::format!("{}gbps", bps / 1_000_000_000)
    } else {
        alloc::format!("{}mbps", bps / 1_000_000)
    }
}

/// Canonical statement for `policy`; reparses to an equal value.
pub fn render_policy(policy: &Policy) -> String {
    let mut out = String::new();
    out.push_str(match policy.operation.kind() {
        OperationKind::Route => "route",
        OperationKind::Alert => "alert",
    });
    out.push(' ');
    out.push_str(&policy.profile.application);
    match policy.operation.span() {
        Span::Intra => {
            let _ = write!(out, " in {}", policy.source_region);
        }
        Span::Inter => {
            let _ = write!(out, " from {} to {}", policy.source_region, policy.destination_region);
        }
    }
    if policy.priority != DEFAULT_PRIORITY {
        let _ = write!(out, " priority {}", policy.priority);
    }
    if let HostSpace::Pairs(pairs) = &policy.address_space.hosts {
        out.push_str(" between ");
        for (i, pair) in pairs.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{pair}");
        }
    }
    if !policy.address_space.waypoints.is_empty() {
        out.push_str(" via ");
        for (i, wp) in policy.address_space.waypoints.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{wp}");
        }
    }
    if let Some(bps) = policy.rate_limit() {
        let _ = write!(out, " ratelimit {}", render_rate(bps));
    }
    out
}
