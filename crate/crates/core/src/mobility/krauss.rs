use crate::{Error, Result};

use super::{KraussParams, VehicleKinematicState};

/// Tolerance for rounding noise when checking gaps.
const GAP_EPS: f64 = 1e-9;

/// Net gap between the follower's front and the leader's rear, minus the
/// minimum gap. Negative means the pair is closer than allowed.
pub(crate) fn net_gap(
    follower: &VehicleKinematicState,
    leader: &VehicleKinematicState,
    params: &KraussParams,
) -> f64 {
    leader.position - follower.position - params.veh_length - params.min_gap
}

/// Largest speed that lets the follower stop behind a leader braking at
/// `b_max`, given the current net gap.
pub(crate) fn safe_speed(gap: f64, leader_speed: f64, speed: f64, params: &KraussParams) -> f64 {
    let braking_time = (leader_speed + speed) / (2.0 * params.b_max);
    leader_speed + (gap - leader_speed * params.tau) / (braking_time + params.tau)
}

/// Advance one vehicle by `dt` seconds under the Krauss model.
///
/// `rng_draw` is the uniform [0, 1) imperfection draw. The leader, if any,
/// must already be linearized ahead of the follower (add the ring length
/// when wrapping).
pub fn krauss_step(
    follower: &VehicleKinematicState,
    leader: Option<&VehicleKinematicState>,
    params: &KraussParams,
    dt: f64,
    rng_draw: f64,
) -> Result<VehicleKinematicState> {
    let v = follower.speed;
    let mut v_des = (params.v_max * follower.desired_speed_factor).min(v + params.a_max * dt);
    if let Some(leader) = leader {
        let gap = net_gap(follower, leader, params);
        if gap < -GAP_EPS {
            return Err(Error::Overlap {
                follower: follower.vehicle_id.to_string(),
                leader: leader.vehicle_id.to_string(),
                gap,
            });
        }
        v_des = v_des.min(safe_speed(gap.max(0.0), leader.speed, v, params));
    }
    let speed = (v_des - params.sigma * params.a_max * dt * rng_draw).max(0.0);
    Ok(VehicleKinematicState {
        vehicle_id: follower.vehicle_id.clone(),
        position: follower.position + speed * dt,
        speed,
        desired_speed_factor: follower.desired_speed_factor,
    })
}
