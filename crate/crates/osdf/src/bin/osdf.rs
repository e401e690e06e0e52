use std::io::{self, Write};
use std::process::ExitCode;

/// Discards output once the reader has gone away (`osdf ... | head`).
struct Stdout<W> {
    inner: W,
    closed: bool,
}

impl<W: Write> Write for Stdout<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        if self.closed {
            return Ok(buf.len());
        }
        match self.inner.write(buf) {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {
                self.closed = true;
                Ok(buf.len())
            }
            other => other,
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self.inner.flush() {
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
            other => other,
        }
    }
}

fn main() -> ExitCode {
    let mut out = Stdout { inner: io::stdout().lock(), closed: false };
    let code = osdf::cli::run(std::env::args_os(), &mut out, &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
