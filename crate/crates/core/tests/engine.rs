use std::collections::BTreeMap;

use cvimsim::config::SimConfig;
use cvimsim::engine::{self, TickResult};
use cvimsim::linkrate::RateModel;
use cvimsim::mobility::{generate_traces, TraceSample, VehicleTrace};
use cvimsim::radio::BaseStation;
use cvimsim::scheduler::ScheduleMode;
use cvimsim::{StationId, VehicleId};

fn strip_stations() -> Vec<BaseStation> {
    (0..5)
        .map(|i| BaseStation::new(format!("bs{}", i + 1), 1000.0 + 2000.0 * f64::from(i), 20.0))
        .collect()
}

fn short_run(config: &SimConfig) -> (Vec<VehicleTrace>, engine::SimulationRun) {
    let traces = generate_traces(&config.road, &config.krauss).unwrap();
    let run = engine::run(config, &traces, &strip_stations()).unwrap();
    (traces, run)
}

fn congested(mode: ScheduleMode) -> SimConfig {
    let mut cfg = SimConfig::traffic_jam();
    cfg.road.duration = 240;
    cfg.cell.n_rb = 1;
    cfg.scheduler = mode;
    cfg.cvim.n_extra = 120;
    cfg
}

#[test]
fn shares_are_conserved_in_every_cell() {
    for mode in [ScheduleMode::Fractional, ScheduleMode::Integer] {
        let (_, run) = short_run(&congested(mode));
        let mut per_cell: BTreeMap<(u32, &StationId), f64> = BTreeMap::new();
        for r in &run.results {
            *per_cell.entry((r.t, &r.serving_station)).or_default() += r.rb_share;
        }
        assert!(!per_cell.is_empty());
        for (key, total) in per_cell {
            assert!((total - 1.0).abs() < 1e-9, "{mode:?} {key:?}: {total}");
        }
    }
}

#[test]
fn rate_is_share_times_rb_rate_and_bounds_transmission() {
    let cfg = congested(ScheduleMode::Fractional);
    let (traces, run) = short_run(&cfg);
    let speeds: BTreeMap<(&VehicleId, u32), f64> = traces
        .iter()
        .flat_map(|tr| {
            tr.samples
                .iter()
                .map(move |s| ((&tr.vehicle_id, s.t), s.speed))
        })
        .collect();
    for r in &run.results {
        let expected = r.rb_share
            * cfg
                .linkrate
                .rb_rate(r.snr_db, speeds[&(&r.vehicle_id, r.t)]);
        assert!((r.rate_bps - expected).abs() <= 1e-9 * expected.max(1.0));
        assert!(r.bits_sent as f64 <= r.rate_bps);
    }
}

#[test]
fn queues_conserve_bytes_without_fragmenting() {
    let cfg = congested(ScheduleMode::Integer);
    let package_bytes =
        cfg.cvim.header_bytes + cfg.cvim.record_bytes * (3 + u64::from(cfg.cvim.n_extra));
    let (_, run) = short_run(&cfg);

    let mut by_vehicle: BTreeMap<&VehicleId, Vec<&TickResult>> = BTreeMap::new();
    for r in &run.results {
        by_vehicle.entry(&r.vehicle_id).or_default().push(r);
    }
    let mut leftover = 0;
    for rows in by_vehicle.values() {
        let mut queued = 0u64;
        for r in rows {
            assert_eq!(
                r.bits_sent % (8 * package_bytes),
                0,
                "fragmented send at t={}",
                r.t
            );
            queued = queued + r.packages_generated * package_bytes - r.bits_sent / 8;
            assert_eq!(queued, r.queue_bytes, "{} at t={}", r.vehicle_id, r.t);
        }
        leftover += queued;
    }
    let s = &run.summary;
    assert!(s.undelivered_packages > 0, "scenario should leave backlog");
    assert_eq!(leftover, s.undelivered_bytes);
    assert_eq!(
        s.packages_generated,
        s.packages_sent + s.undelivered_packages
    );
    assert_eq!(
        s.packages_generated * package_bytes * 8,
        s.bits_sent + s.undelivered_bytes * 8
    );
}

#[test]
fn empty_cell_gives_a_rate_spike() {
    let at = |id: &str, t0: u32, xs: &[f64]| VehicleTrace {
        vehicle_id: id.into(),
        samples: xs
            .iter()
            .enumerate()
            .map(|(i, &x)| TraceSample {
                t: t0 + i as u32,
                x,
                y: 0.0,
                speed: 0.0,
            })
            .collect(),
    };
    // six parked vehicles crowd cell A; the probe drives on into cell B
    let mut traces: Vec<VehicleTrace> = (0..6)
        .map(|i| at(&format!("parked{i}"), 0, &[50.0; 20]))
        .collect();
    let probe_path: Vec<f64> = (0..20).map(|i| 40.0 + 100.0 * f64::from(i)).collect();
    traces.push(at("probe", 0, &probe_path));
    let stations = [
        BaseStation::new("a", 0.0, 10.0),
        BaseStation::new("b", 1500.0, 10.0),
    ];
    let run = engine::run(&SimConfig::default(), &traces, &stations).unwrap();

    let series = engine::vehicle_timeseries(&run.results, &"probe".into()).unwrap();
    assert_eq!(series.len(), 20);
    let cell_of: BTreeMap<u32, &StationId> = run
        .results
        .iter()
        .filter(|r| r.vehicle_id.as_str() == "probe")
        .map(|r| (r.t, &r.serving_station))
        .collect();
    let crowded_peak = series
        .iter()
        .filter(|(t, ..)| cell_of[t].as_str() == "a")
        .map(|s| s.2)
        .fold(0.0, f64::max);
    let alone_peak = series
        .iter()
        .filter(|(t, ..)| cell_of[t].as_str() == "b")
        .map(|s| s.2)
        .fold(0.0, f64::max);
    assert!(
        alone_peak > 3.0 * crowded_peak,
        "{alone_peak} vs {crowded_peak}"
    );
}

#[test]
fn traversal_packages_equal_residence_ticks() {
    let (_, run) = short_run(&SimConfig {
        road: cvimsim::mobility::RoadSpec {
            duration: 300,
            ..Default::default()
        },
        ..SimConfig::default()
    });
    let traversals = cvimsim::cvim::traversals(&run.results);
    assert!(!traversals.is_empty());
    for tr in &traversals {
        assert_eq!(
            tr.packages,
            u64::from(tr.ticks),
            "{} in {}",
            tr.vehicle_id,
            tr.station_id
        );
    }
}
