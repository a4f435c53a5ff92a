use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use cvimsim::analysis::{self, Pooling, StatsReport};
use cvimsim::config::SimConfig;
use cvimsim::mobility::{self, VehicleTrace};
use cvimsim::{cvim, engine, radio, Error};

use crate::ConfigArgs;

enum Class {
    Config,
    Data,
    Internal,
}

/// An error together with the exit code class it maps to.
pub struct Failure {
    pub error: anyhow::Error,
    class: Class,
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self.class {
            Class::Config => 2,
            Class::Data => 3,
            Class::Internal => 4,
        }
    }

    fn config(error: anyhow::Error) -> Self {
        Failure {
            error,
            class: Class::Config,
        }
    }

    fn data(error: anyhow::Error) -> Self {
        Failure {
            error,
            class: Class::Data,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let class = match e.root() {
            Error::Config(_) => Class::Config,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Lookup(_)
            | Error::Infeasible(_)
            | Error::Io(_) => Class::Data,
            Error::Overlap { .. } | Error::AtTick { .. } => Class::Internal,
        };
        Failure {
            error: e.into(),
            class,
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Attach a path to a library error without losing its class.
fn at<T>(path: &Path, r: cvimsim::Result<T>) -> Outcome<T> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.error = f.error.context(format!("{}", path.display()));
        f
    })
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Outcome<T> {
    r.with_context(|| format!("{}", path.display()))
        .map_err(Failure::data)
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        io(parent, fs::create_dir_all(parent))?;
    }
    io(path, File::create(path)).map(BufWriter::new)
}

fn finish(path: &Path, mut out: BufWriter<File>) -> Outcome {
    io(path, out.flush())
}

/// Preset, then config file, then `--set` overrides, then `--seed`.
pub fn load_config(args: &ConfigArgs) -> Outcome<SimConfig> {
    let mut cfg = SimConfig::preset(&args.scenario)?;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::config)?;
        at(path, cfg.apply_text(&text))?;
    }
    for assignment in &args.overrides {
        cfg.apply_override(assignment)?;
    }
    if let Some(seed) = args.seed {
        cfg.road.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn gen_traces(cfg: &SimConfig, out: &Path) -> Outcome {
    let traces = mobility::generate_traces(&cfg.road, &cfg.krauss)?;
    let mut file = create(out)?;
    at(out, mobility::emit_trace_csv(&traces, &mut file))?;
    finish(out, file)?;
    let samples: usize = traces.iter().map(|t| t.samples.len()).sum();
    eprintln!(
        "wrote {} vehicles, {samples} samples to {}",
        traces.len(),
        out.display()
    );
    Ok(())
}

fn read_traces(path: &Path) -> Outcome<Vec<VehicleTrace>> {
    let file = io(path, File::open(path))?;
    let is_xml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("xml"));
    let parsed = if is_xml {
        mobility::parse_fcd_xml(BufReader::new(file))
    } else {
        mobility::parse_trace_csv(BufReader::new(file))
    };
    at(path, parsed)
}

pub fn simulate(cfg: &SimConfig, traces: &Path, stations: &Path, out_dir: &Path) -> Outcome {
    let traces = read_traces(traces)?;
    let station_file = io(stations, File::open(stations))?;
    let stations_list = at(
        stations,
        radio::parse_station_csv(BufReader::new(station_file)),
    )?;
    let run = engine::run(cfg, &traces, &stations_list)?;

    let results_path = out_dir.join("results.csv");
    let mut out = create(&results_path)?;
    at(
        &results_path,
        engine::write_results_csv(&run.results, &mut out),
    )?;
    finish(&results_path, out)?;

    let summary_path = out_dir.join("summary.json");
    let mut out = create(&summary_path)?;
    at(
        &summary_path,
        engine::write_summary_json(&run.summary, cfg, &mut out),
    )?;
    finish(&summary_path, out)?;

    let s = &run.summary;
    eprintln!(
        "{}: {} vehicles, {} vehicle-ticks, {} packages generated, {} sent, {} undelivered",
        s.scenario_label,
        s.vehicles,
        s.vehicle_ticks,
        s.packages_generated,
        s.packages_sent,
        s.undelivered_packages
    );
    Ok(())
}

/// Label from a sibling summary.json, else the parent directory name.
fn infer_label(results: &Path, index: usize) -> String {
    let dir = results.parent().unwrap_or(Path::new(""));
    let from_summary = fs::read_to_string(dir.join("summary.json"))
        .ok()
        .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).ok())
        .and_then(|v| v["run"]["scenario_label"].as_str().map(str::to_owned));
    from_summary
        .or_else(|| dir.file_name().and_then(|n| n.to_str()).map(str::to_owned))
        .unwrap_or_else(|| format!("run{}", index + 1))
}

fn unique_labels(inputs: &[PathBuf], explicit: &[String]) -> Outcome<Vec<String>> {
    if !explicit.is_empty() && explicit.len() != inputs.len() {
        return Err(Failure::config(anyhow!(
            "{} --label values given for {} results files",
            explicit.len(),
            inputs.len()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut labels = Vec::with_capacity(inputs.len());
    for (i, path) in inputs.iter().enumerate() {
        let base = explicit
            .get(i)
            .cloned()
            .unwrap_or_else(|| infer_label(path, i));
        let mut label = base.clone();
        let mut n = 2;
        while !seen.insert(label.clone()) {
            label = format!("{base}_{n}");
            n += 1;
        }
        labels.push(label);
    }
    Ok(labels)
}

pub fn analyze(inputs: &[PathBuf], out_dir: &Path, explicit: &[String], pooling: &str) -> Outcome {
    let pooling: Pooling = pooling.parse()?;
    let labels = unique_labels(inputs, explicit)?;
    let mut scenarios = Vec::with_capacity(inputs.len());
    for (path, label) in inputs.iter().zip(&labels) {
        let file = io(path, File::open(path))?;
        let results = at(path, engine::read_results_csv(BufReader::new(file)))?;
        if results.is_empty() {
            return Err(Failure::data(anyhow!(
                "{}: results file has no rows",
                path.display()
            )));
        }
        let rates = analysis::pooled_rates(&results, pooling);
        scenarios.push(at(
            path,
            analysis::rate_stats_from(rates.iter().copied(), label),
        )?);

        // a single input writes its tables next to stats.json
        let dir = if inputs.len() == 1 {
            out_dir.to_path_buf()
        } else {
            out_dir.join(label)
        };
        let cdf_path = dir.join("cdf.csv");
        let cdf = at(path, analysis::cdf_from(rates))?;
        let mut out = create(&cdf_path)?;
        at(&cdf_path, analysis::write_cdf_csv(&cdf, &mut out))?;
        finish(&cdf_path, out)?;

        let cells_path = dir.join("cell_packages.csv");
        let cells = at(path, cvim::count_packages_per_cell(&results))?;
        let mut out = create(&cells_path)?;
        at(
            &cells_path,
            analysis::write_cell_packages_csv(&cells, &mut out),
        )?;
        finish(&cells_path, out)?;
    }

    let report = StatsReport::new(scenarios);
    let stats_path = out_dir.join("stats.json");
    let mut out = create(&stats_path)?;
    at(&stats_path, report.write_json(&mut out))?;
    finish(&stats_path, out)?;
    for s in &report.scenarios {
        eprintln!(
            "{}: mean {:.1} bit/s over {} samples",
            s.scenario_label, s.mean_rate, s.sample_count
        );
    }
    Ok(())
}

pub fn plan(cfg: &SimConfig, rate: f64, snr: f64, speed: f64) -> Outcome {
    let plan = analysis::plan_rb(rate, snr, speed, &cfg.linkrate)?;
    let json = serde_json::to_string_pretty(&plan).map_err(|e| Failure {
        error: e.into(),
        class: Class::Internal,
    })?;
    println!("{json}");
    Ok(())
}
