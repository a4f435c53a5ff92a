use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::{Result, VehicleId};

use super::krauss::{krauss_step, net_gap, safe_speed};
use super::{KraussParams, RoadSpec, Topology, TraceSample, VehicleKinematicState, VehicleTrace};

/// Simulator tick.
const DT: f64 = 1.0;
const SPEED_FACTOR_MIN: f64 = 0.7;
const SPEED_FACTOR_MAX: f64 = 1.3;
/// Stream reserved for the arrival process; vehicle `i` uses stream `i + 1`.
const ARRIVAL_STREAM: u64 = 0;

struct Vehicle {
    state: VehicleKinematicState,
    rng: ChaCha8Rng,
    trace: usize,
}

fn vehicle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng
}

fn vehicle_id(index: u64) -> VehicleId {
    VehicleId::new(format!("veh{index:06}"))
}

fn spawn(
    index: u64,
    position: f64,
    speed: f64,
    road: &RoadSpec,
    params: &KraussParams,
    trace: usize,
) -> Vehicle {
    let mut rng = vehicle_rng(road.seed, index);
    let z: f64 = StandardNormal.sample(&mut rng);
    let factor = (1.0 + params.speed_dev * z).clamp(SPEED_FACTOR_MIN, SPEED_FACTOR_MAX);
    Vehicle {
        state: VehicleKinematicState {
            vehicle_id: vehicle_id(index),
            position,
            speed: speed.min(params.v_max * factor),
            desired_speed_factor: factor,
        },
        rng,
        trace,
    }
}

/// Generate 1 Hz trajectories on a synthetic single-lane road.
///
/// Output is sorted by vehicle id and fully determined by `road.seed`.
pub fn generate_traces(road: &RoadSpec, params: &KraussParams) -> Result<Vec<VehicleTrace>> {
    road.validate()?;
    params.validate()?;
    let mut traces = match road.topology {
        Topology::Strip => run_strip(road, params)?,
        Topology::Ring => run_ring(road, params)?,
    };
    traces.retain(|tr| !tr.samples.is_empty());
    traces.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id));
    Ok(traces)
}

fn run_strip(road: &RoadSpec, params: &KraussParams) -> Result<Vec<VehicleTrace>> {
    let mut traces: Vec<VehicleTrace> = Vec::new();
    // front of the platoon first
    let mut on_road: VecDeque<Vehicle> = VecDeque::new();
    let mut waiting: VecDeque<u64> = VecDeque::new();

    let mut arrivals = ChaCha8Rng::seed_from_u64(road.seed);
    arrivals.set_stream(ARRIVAL_STREAM);
    let inter_arrival = Exp::new(road.inflow / 3600.0).expect("inflow validated positive");
    let mut next_arrival = inter_arrival.sample(&mut arrivals);
    let mut arrived = 0u64;

    for t in 0..road.duration {
        while next_arrival <= f64::from(t) {
            waiting.push_back(arrived);
            arrived += 1;
            next_arrival += inter_arrival.sample(&mut arrivals);
        }

        if let Some(&index) = waiting.front() {
            let entry = VehicleKinematicState {
                vehicle_id: vehicle_id(index),
                position: 0.0,
                speed: 0.0,
                desired_speed_factor: 1.0,
            };
            let insert_speed = match on_road.back() {
                None => Some(f64::INFINITY),
                Some(last) => {
                    let gap = net_gap(&entry, &last.state, params);
                    (gap >= 0.0).then(|| {
                        safe_speed(gap, last.state.speed, last.state.speed, params).max(0.0)
                    })
                }
            };
            if let Some(speed) = insert_speed {
                waiting.pop_front();
                traces.push(VehicleTrace {
                    vehicle_id: vehicle_id(index),
                    samples: Vec::new(),
                });
                on_road.push_back(spawn(index, 0.0, speed, road, params, traces.len() - 1));
            }
        }

        for v in &on_road {
            traces[v.trace].samples.push(TraceSample {
                t,
                x: v.state.position,
                y: 0.0,
                speed: v.state.speed,
            });
        }

        let leaders: Vec<Option<Leader>> = (0..on_road.len())
            .map(|i| i.checked_sub(1).map(|index| Leader { index, offset: 0.0 }))
            .collect();
        step_all(on_road.make_contiguous(), &leaders, params)?;
        while on_road
            .front()
            .is_some_and(|v| v.state.position > road.length)
        {
            on_road.pop_front();
        }
    }
    Ok(traces)
}

fn run_ring(road: &RoadSpec, params: &KraussParams) -> Result<Vec<VehicleTrace>> {
    let count = road.inflow as u64;
    let spacing = road.length / count as f64;
    let radius = road.length / TAU;
    // ascending position; the leader of vehicle i is i + 1, wrapping around
    let mut vehicles: Vec<Vehicle> = (0..count)
        .map(|i| spawn(i, i as f64 * spacing, 0.0, road, params, i as usize))
        .collect();
    let mut traces: Vec<VehicleTrace> = vehicles
        .iter()
        .map(|v| VehicleTrace {
            vehicle_id: v.state.vehicle_id.clone(),
            samples: Vec::new(),
        })
        .collect();

    for t in 0..road.duration {
        for v in &vehicles {
            let angle = TAU * v.state.position / road.length;
            traces[v.trace].samples.push(TraceSample {
                t,
                x: radius * angle.cos(),
                y: radius * angle.sin(),
                speed: v.state.speed,
            });
        }
        let n = vehicles.len();
        let leaders: Vec<Option<Leader>> = (0..n)
            .map(|i| {
                (n > 1).then(|| {
                    let index = (i + 1) % n;
                    let wraps = vehicles[index].state.position <= vehicles[i].state.position;
                    Leader {
                        index,
                        offset: if wraps { road.length } else { 0.0 },
                    }
                })
            })
            .collect();
        step_all(&mut vehicles, &leaders, params)?;
        // rotate so that ascending position order survives the wrap
        for v in &mut vehicles {
            v.state.position = v.state.position.rem_euclid(road.length);
        }
        if let Some(first) = vehicles
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.state.position.total_cmp(&b.1.state.position))
            .map(|(i, _)| i)
        {
            vehicles.rotate_left(first);
        }
    }
    Ok(traces)
}

/// Index of a vehicle's leader plus the offset that linearizes its
/// position ahead of the follower (the ring length on wrap-around).
struct Leader {
    index: usize,
    offset: f64,
}

/// Synchronous Krauss update of every vehicle against the leaders' states
/// at the start of the tick, followed by an emergency-braking pass that keeps
/// every post-step net gap non-negative.
fn step_all(
    vehicles: &mut [Vehicle],
    leaders: &[Option<Leader>],
    params: &KraussParams,
) -> Result<()> {
    let old: Vec<VehicleKinematicState> = vehicles.iter().map(|v| v.state.clone()).collect();
    for (i, v) in vehicles.iter_mut().enumerate() {
        let leader = leaders[i].as_ref().map(|l| {
            let mut state = old[l.index].clone();
            state.position += l.offset;
            state
        });
        let draw: f64 = v.rng.gen();
        v.state = krauss_step(&old[i], leader.as_ref(), params, DT, draw)?;
    }

    // Speeds only decrease here, so relaxing terminates; n + 1 passes bound
    // the longest leader chain. A strip (leader = i - 1) settles in one pass.
    let n = vehicles.len();
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            let Some(leader) = &leaders[i] else { continue };
            let leader_end = vehicles[leader.index].state.position + leader.offset;
            let max_travel = leader_end - params.veh_length - params.min_gap - old[i].position;
            if vehicles[i].state.speed * DT > max_travel {
                let speed = (max_travel / DT).max(0.0);
                vehicles[i].state.speed = speed;
                vehicles[i].state.position = old[i].position + speed * DT;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}
