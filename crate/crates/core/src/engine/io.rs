use std::io::{Read, Write};

use serde::Serialize;

use crate::config::SimConfig;
use crate::{Error, Result};

use super::{RunSummary, TickResult};

pub const RESULTS_HEADER: [&str; 9] = [
    "t",
    "vehicle_id",
    "serving_station",
    "snr_db",
    "rb_share",
    "rate_bps",
    "packages_generated",
    "bits_sent",
    "queue_bytes",
];

pub fn write_results_csv<W: Write>(results: &[TickResult], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    writer.write_record(RESULTS_HEADER).map_err(io)?;
    for r in results {
        writer.serialize(r).map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<TickResult>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::parse(
            "line 1",
            format!("expected header `{}`", RESULTS_HEADER.join(",")),
        ));
    }
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::parse(format!("line {line}"), e.to_string())
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    run: &'a RunSummary,
    config: &'a SimConfig,
}

/// `summary.json`: run metadata and totals plus the full config echo.
pub fn write_summary_json<W: Write>(
    summary: &RunSummary,
    config: &SimConfig,
    mut out: W,
) -> Result<()> {
    serde_json::to_writer_pretty(
        &mut out,
        &SummaryFile {
            run: summary,
            config,
        },
    )
    .map_err(|e| Error::Io(e.into()))?;
    out.write_all(b"\n")?;
    Ok(())
}
