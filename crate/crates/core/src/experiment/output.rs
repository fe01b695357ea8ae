use std::io::Write;

use serde::Serialize;

use crate::error::Result;

pub const VERSION: &str = concat!("pilotgrid ", env!("CARGO_PKG_VERSION"));

/// `#`-prefixed preamble: version, seed, then each `echo` line.
pub fn write_header<W: Write>(out: &mut W, seed: u64, echo: &str) -> Result<()> {
    writeln!(out, "# {VERSION}")?;
    writeln!(out, "# seed = {seed}")?;
    for line in echo.lines().filter(|l| !l.trim().is_empty()) {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Header preamble followed by one CSV record per row.
pub fn write_csv<W: Write, R: Serialize>(mut out: W, seed: u64, echo: &str, rows: &[R]) -> Result<()> {
    write_header(&mut out, seed, echo)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Mirror<'a, B: Serialize> {
    version: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a B,
}

pub fn write_json<W: Write, B: Serialize>(mut out: W, seed: u64, body: &B) -> Result<()> {
    serde_json::to_writer_pretty(
        &mut out,
        &Mirror {
            version: VERSION,
            seed,
            body,
        },
    )?;
    writeln!(out)?;
    Ok(())
}
