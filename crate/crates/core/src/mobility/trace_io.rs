use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::{Error, Result, VehicleId};

use super::{TraceSample, VehicleTrace};

pub const TRACE_CSV_HEADER: [&str; 5] = ["vehicle_id", "t", "x", "y", "speed"];

/// Collects samples in arbitrary order and enforces the 1 Hz trace contract.
#[derive(Default)]
struct TraceBuilder {
    by_vehicle: BTreeMap<VehicleId, BTreeMap<u32, TraceSample>>,
}

impl TraceBuilder {
    fn insert(&mut self, vehicle: VehicleId, sample: TraceSample, location: &str) -> Result<()> {
        if !(sample.x.is_finite() && sample.y.is_finite()) {
            return Err(Error::Validation(format!(
                "{location}: non-finite position"
            )));
        }
        if !(sample.speed.is_finite() && sample.speed >= 0.0) {
            return Err(Error::Validation(format!(
                "{location}: speed must be finite and non-negative, got {}",
                sample.speed
            )));
        }
        let samples = self.by_vehicle.entry(vehicle.clone()).or_default();
        if samples.contains_key(&sample.t) {
            return Err(Error::Validation(format!(
                "{location}: duplicate sample for vehicle {vehicle} at t = {}",
                sample.t
            )));
        }
        samples.insert(sample.t, sample);
        Ok(())
    }

    fn finish(self) -> Result<Vec<VehicleTrace>> {
        self.by_vehicle
            .into_iter()
            .map(|(vehicle_id, samples)| {
                let samples: Vec<TraceSample> = samples.into_values().collect();
                if let Some(w) = samples.windows(2).find(|w| w[1].t != w[0].t + 1) {
                    return Err(Error::Validation(format!(
                        "vehicle {vehicle_id}: samples at t = {} and t = {} are not 1 s apart",
                        w[0].t, w[1].t
                    )));
                }
                Ok(VehicleTrace {
                    vehicle_id,
                    samples,
                })
            })
            .collect()
    }
}

/// Parse a `vehicle_id,t,x,y,speed` CSV. Rows may come in any order.
pub fn parse_trace_csv<R: Read>(input: R) -> Result<Vec<VehicleTrace>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .clone();
    if header.iter().map(str::trim).ne(TRACE_CSV_HEADER) {
        return Err(Error::parse(
            "line 1",
            format!("expected header `{}`", TRACE_CSV_HEADER.join(",")),
        ));
    }

    let mut builder = TraceBuilder::default();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("line {line}"), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let location = format!("line {line}");
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let number = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                Error::parse(
                    &location,
                    format!("{} is not a number: {:?}", TRACE_CSV_HEADER[i], field(i)),
                )
            })
        };
        if field(0).is_empty() {
            return Err(Error::parse(&location, "empty vehicle_id"));
        }
        let t = field(1)
            .parse::<u32>()
            .map_err(|_| Error::parse(&location, format!("t is not a tick: {:?}", field(1))))?;
        let sample = TraceSample {
            t,
            x: number(2)?,
            y: number(3)?,
            speed: number(4)?,
        };
        builder.insert(VehicleId::new(field(0)), sample, &location)?;
    }
    builder.finish()
}

/// Write traces in the format read by [`parse_trace_csv`], one row per sample,
/// ordered by vehicle then tick.
pub fn emit_trace_csv<W: Write>(traces: &[VehicleTrace], out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    writer.write_record(TRACE_CSV_HEADER).map_err(io)?;
    for trace in traces {
        for s in &trace.samples {
            writer
                .write_record([
                    trace.vehicle_id.as_str(),
                    &s.t.to_string(),
                    &s.x.to_string(),
                    &s.y.to_string(),
                    &s.speed.to_string(),
                ])
                .map_err(io)?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn attribute(element: &BytesStart<'_>, name: &str, path: &str) -> Result<String> {
    for attr in element.attributes() {
        let attr = attr.map_err(|e| Error::parse(path, e.to_string()))?;
        if attr.key.as_ref() == name.as_bytes() {
            let value = attr
                .unescape_value()
                .map_err(|e| Error::parse(path, e.to_string()))?;
            return Ok(value.into_owned());
        }
    }
    Err(Error::parse(path, format!("missing attribute `{name}`")))
}

fn numeric_attribute(element: &BytesStart<'_>, name: &str, path: &str) -> Result<f64> {
    let raw = attribute(element, name, path)?;
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, format!("attribute `{name}` is not a number: {raw:?}")))
}

/// Parse the SUMO floating-car-data export subset:
/// `<timestep time="T"><vehicle id x y speed/>...</timestep>`.
///
/// Other elements and attributes are ignored. Timesteps must fall on whole
/// seconds.
pub fn parse_fcd_xml<R: BufRead>(input: R) -> Result<Vec<VehicleTrace>> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    // (element name, sibling index) from the root down
    let mut stack: Vec<(String, usize)> = Vec::new();
    let mut sibling_counts: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new()];
    let mut current_tick: Option<u32> = None;
    let mut builder = TraceBuilder::default();

    loop {
        let event = reader.read_event_into(&mut buf).map_err(|e| {
            Error::parse(format!("byte {}", reader.buffer_position()), e.to_string())
        })?;
        let (element, is_empty) = match &event {
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(_) => {
                if let Some((name, _)) = stack.pop() {
                    sibling_counts.pop();
                    if name == "timestep" {
                        current_tick = None;
                    }
                }
                buf.clear();
                continue;
            }
            Event::Eof => break,
            _ => {
                buf.clear();
                continue;
            }
        };

        let name = String::from_utf8_lossy(element.name().as_ref()).into_owned();
        let counts = sibling_counts.last_mut().expect("root sibling map");
        let index = {
            let n = counts.entry(name.clone()).or_insert(0);
            *n += 1;
            *n
        };
        let path = stack
            .iter()
            .map(|(n, i)| format!("{n}[{i}]"))
            .chain(std::iter::once(format!("{name}[{index}]")))
            .collect::<Vec<_>>()
            .join("/");

        match name.as_str() {
            "timestep" => {
                let time = numeric_attribute(element, "time", &path)?;
                if !(time >= 0.0 && time.fract() == 0.0 && time <= f64::from(u32::MAX)) {
                    return Err(Error::Validation(format!(
                        "{path}: time {time} is not a whole-second tick"
                    )));
                }
                current_tick = Some(time as u32);
            }
            "vehicle" => {
                if let Some(t) = current_tick {
                    let id = attribute(element, "id", &path)?;
                    let sample = TraceSample {
                        t,
                        x: numeric_attribute(element, "x", &path)?,
                        y: numeric_attribute(element, "y", &path)?,
                        speed: numeric_attribute(element, "speed", &path)?,
                    };
                    builder.insert(VehicleId::new(id), sample, &path)?;
                }
            }
            _ => {}
        }

        if !is_empty {
            stack.push((name, index));
            sibling_counts.push(BTreeMap::new());
        }
        buf.clear();
    }
    builder.finish()
}
