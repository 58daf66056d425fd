use super::{
    Action, EgoState, LanePosition, SurroundingVehicle, WorldError, ACCEL_DELTA_KMH,
    COLLISION_DISTANCE_M, DECEL_DELTA_KMH, LANE_WIDTH_M, V_MAX_KMH,
};
use crate::scalar::{kmh_to_mps, Scalar};

/// Lane occupied by something at lateral offset `rel_x` from an ego in `ego_lane`.
pub fn lane_of<T: Scalar>(ego_lane: LanePosition, rel_x: T) -> Result<LanePosition, WorldError> {
    let w = T::lit(LANE_WIDTH_M);
    let off_road = || WorldError::OffRoad {
        rel_x: rel_x.as_f64(),
    };
    if !rel_x.is_finite() || rel_x.abs() > w * T::lit(1.5) {
        return Err(off_road());
    }
    if rel_x.abs() < w / T::lit(2.0) {
        return Ok(ego_lane);
    }
    let neighbor = if rel_x > T::zero() {
        ego_lane.right_neighbor()
    } else {
        ego_lane.left_neighbor()
    };
    neighbor.ok_or_else(off_road)
}

/// Absolute lane of a vehicle. Vehicles that fail validation are treated as off-road.
pub fn vehicle_lane<T: Scalar>(
    ego: &EgoState<T>,
    vehicle: &SurroundingVehicle<T>,
) -> Option<LanePosition> {
    lane_of(ego.lane, vehicle.rel_x).ok()
}

/// Advances the world by one tick under the commanded ego action.
///
/// The ego speed changes first; odometer and relative positions then use the
/// updated speed. Lane changes land at the tick boundary; a change off the road
/// leaves the ego where it is.
pub fn step_kinematics<T: Scalar>(
    ego: &EgoState<T>,
    vehicles: &[SurroundingVehicle<T>],
    commanded: Action,
    dt: T,
) -> (EgoState<T>, Vec<SurroundingVehicle<T>>) {
    assert!(dt > T::zero(), "tick length must be positive");
    let delta = match commanded {
        Action::Accelerate => T::lit(ACCEL_DELTA_KMH),
        Action::Decelerate => -T::lit(DECEL_DELTA_KMH),
        _ => T::zero(),
    };
    let speed = (ego.speed_kmh + delta)
        .max(T::zero())
        .min(T::lit(V_MAX_KMH));

    let (lane, shift) = match ego.lane.after(commanded) {
        Some(lane) if lane != ego.lane => {
            let w = T::lit(LANE_WIDTH_M);
            // moving the ego left moves everything else right in its frame
            let shift = if commanded == Action::ChangeLaneLeft {
                w
            } else {
                -w
            };
            (lane, shift)
        }
        _ => (ego.lane, T::zero()),
    };

    let next_ego = EgoState {
        lane,
        speed_kmh: speed,
        odometer_m: ego.odometer_m + kmh_to_mps(speed) * dt,
    };
    let next_vehicles = vehicles
        .iter()
        .map(|v| SurroundingVehicle {
            category: v.category.clone(),
            rel_x: v.rel_x + shift,
            rel_y: v.rel_y + kmh_to_mps(v.speed_kmh - speed) * dt,
            speed_kmh: v.speed_kmh,
        })
        .collect();
    (next_ego, next_vehicles)
}

/// Nearest same-lane vehicle strictly ahead, with its gap in meters.
pub fn gap_ahead<'a, T: Scalar>(
    ego: &EgoState<T>,
    vehicles: &'a [SurroundingVehicle<T>],
) -> Option<(&'a SurroundingVehicle<T>, T)> {
    vehicles
        .iter()
        .filter(|v| v.rel_y > T::zero() && vehicle_lane(ego, v) == Some(ego.lane))
        .min_by(|a, b| a.rel_y.partial_cmp(&b.rel_y).expect("finite positions"))
        .map(|v| (v, v.rel_y))
}

/// Seconds until the ego reaches `vehicle` at current speeds, if closing.
pub fn time_to_collision<T: Scalar>(
    ego: &EgoState<T>,
    vehicle: &SurroundingVehicle<T>,
) -> Option<T> {
    if vehicle.rel_y <= T::zero() || vehicle_lane(ego, vehicle) != Some(ego.lane) {
        return None;
    }
    let closing = kmh_to_mps(ego.speed_kmh - vehicle.speed_kmh);
    (closing > T::zero()).then(|| vehicle.rel_y / closing)
}

pub fn is_collision<T: Scalar>(ego: &EgoState<T>, vehicle: &SurroundingVehicle<T>) -> bool {
    vehicle_lane(ego, vehicle) == Some(ego.lane)
        && vehicle.rel_y.abs() < T::lit(COLLISION_DISTANCE_M)
}

/// A same-lane vehicle that swapped sides with the ego during one tick, which
/// the sampled distance check alone would miss at large closing speeds.
pub fn passed_through<T: Scalar>(
    ego: &EgoState<T>,
    before: &SurroundingVehicle<T>,
    after: &SurroundingVehicle<T>,
) -> bool {
    let zero = T::zero();
    let crossed =
        (before.rel_y > zero && after.rel_y < zero) || (before.rel_y < zero && after.rel_y > zero);
    crossed && vehicle_lane(ego, after) == Some(ego.lane)
}
