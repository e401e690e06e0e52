use std::io::{self, Write};

use osdf_core::sim::LoggedEvent;

/// One JSON object per line, in sequence order.
pub fn write_jsonl(log: &[LoggedEvent], out: &mut dyn Write) -> io::Result<()> {
    for event in log {
        serde_json::to_writer(&mut *out, event)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(log: &[LoggedEvent]) -> String {
    let mut buf = Vec::new();
    write_jsonl(log, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
