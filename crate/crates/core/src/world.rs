//! Geometry and kinematics of the simulated arena: agent poses, spherical
//! obstacles, line-of-sight tests, boresight tracking with a slew limit,
//! semi-implicit Euler motion and the speed-dependent safe-distance policy.

use crate::linkmodels::LinkGeometry;
use crate::real::Real;
use nalgebra::Vector3;

/// Validation or geometry failure in the world layer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("boresight must be a unit vector")]
    NonUnitBoresight,
    #[error("pose fields must be finite")]
    NonFinitePose,
    #[error("obstacle radius must be finite and positive")]
    InvalidObstacle,
    #[error("safety policy fields must be finite and non-negative")]
    InvalidSafetyPolicy,
    #[error("transmitter and receiver positions coincide")]
    DegenerateGeometry,
    #[error("time step must be finite and positive")]
    NonPositiveTimeStep,
}

fn finite_vec<T: Real>(v: &Vector3<T>) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Position, velocity and aim direction of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    /// Position in metres.
    pub position: Vector3<T>,
    /// Velocity in metres per second.
    pub velocity: Vector3<T>,
    /// Unit aim direction of the agent's transducer.
    boresight: Vector3<T>,
}

impl<T: Real> Pose<T> {
    /// Builds a pose; `boresight` must already be unit length (tolerance
    /// `1e-9` or 8 machine epsilons, whichever is larger) and is stored
    /// renormalized so downstream angle math sees an exact unit vector.
    pub fn new(
        position: Vector3<T>,
        velocity: Vector3<T>,
        boresight: Vector3<T>,
    ) -> Result<Self, WorldError> {
        if !(finite_vec(&position) && finite_vec(&velocity) && finite_vec(&boresight)) {
            return Err(WorldError::NonFinitePose);
        }
        let norm = boresight.norm();
        let tol = T::lit(1e-9).max(T::default_epsilon() * T::lit(8.0));
        if (norm - T::one()).abs() > tol {
            return Err(WorldError::NonUnitBoresight);
        }
        Ok(Self {
            position,
            velocity,
            boresight: boresight / norm,
        })
    }

    pub fn boresight(&self) -> Vector3<T> {
        self.boresight
    }

    /// Speed in metres per second.
    pub fn speed(&self) -> T {
        self.velocity.norm()
    }

    /// Replaces the velocity, keeping position and boresight.
    pub fn with_velocity(mut self, velocity: Vector3<T>) -> Self {
        self.velocity = velocity;
        self
    }
}

/// Stationary spherical obstacle that blocks line-of-sight paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle<T: Real> {
    pub center: Vector3<T>,
    pub radius: T,
}

impl<T: Real> Obstacle<T> {
    pub fn new(center: Vector3<T>, radius: T) -> Result<Self, WorldError> {
        if !(finite_vec(&center) && radius.is_finite() && radius > T::zero()) {
            return Err(WorldError::InvalidObstacle);
        }
        Ok(Self { center, radius })
    }
}

/// Speed-dependent separation requirement: `base_distance + time_headway *
/// relative_speed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyPolicy<T: Real> {
    /// Minimum separation at rest in metres (>= 0).
    pub base_distance: T,
    /// Extra separation per unit of relative speed, in seconds (>= 0).
    pub time_headway: T,
}

impl<T: Real> SafetyPolicy<T> {
    pub fn new(base_distance: T, time_headway: T) -> Result<Self, WorldError> {
        let ok = |v: T| v.is_finite() && v >= T::zero();
        if !(ok(base_distance) && ok(time_headway)) {
            return Err(WorldError::InvalidSafetyPolicy);
        }
        Ok(Self {
            base_distance,
            time_headway,
        })
    }

    /// Defaults: 2 m base separation, 1.5 s headway.
    pub fn standard() -> Self {
        Self {
            base_distance: T::lit(2.0),
            time_headway: T::lit(1.5),
        }
    }

    /// Required separation for a pair closing at `relative_speed` (m/s, >= 0).
    pub fn safe_distance(&self, relative_speed: T) -> T {
        debug_assert!(relative_speed >= T::zero());
        self.base_distance + self.time_headway * relative_speed
    }
}

/// Angle between two non-zero vectors, radians in `[0, pi]`.
pub fn angle_between<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> T {
    let cos = a.dot(b) / (a.norm() * b.norm());
    cos.clamp(-T::one(), T::one()).acos()
}

/// Distance from point `p` to the segment `a`–`b`.
fn point_segment_distance<T: Real>(p: &Vector3<T>, a: &Vector3<T>, b: &Vector3<T>) -> T {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq == T::zero() {
        return (p - a).norm();
    }
    let t = (p - a).dot(&ab) / len_sq;
    let t = t.clamp(T::zero(), T::one());
    (p - (a + ab * t)).norm()
}

/// True when the open segment between the endpoints misses every obstacle
/// interior (touching a sphere surface still counts as clear).
pub fn line_of_sight_clear<T: Real>(
    from: &Vector3<T>,
    to: &Vector3<T>,
    obstacles: &[Obstacle<T>],
) -> bool {
    obstacles
        .iter()
        .all(|o| point_segment_distance(&o.center, from, to) >= o.radius)
}

/// Relative link geometry of a transmitter/receiver pair: separation,
/// incidence and irradiance angles measured from the respective boresights,
/// and the obstacle line-of-sight verdict.
pub fn link_geometry<T: Real>(
    tx: &Pose<T>,
    rx: &Pose<T>,
    obstacles: &[Obstacle<T>],
) -> Result<LinkGeometry<T>, WorldError> {
    let delta = rx.position - tx.position;
    let distance = delta.norm();
    if !(distance.is_finite() && distance > T::zero()) {
        return Err(WorldError::DegenerateGeometry);
    }
    let irradiance = angle_between(&tx.boresight, &delta);
    let incidence = angle_between(&rx.boresight, &(-delta));
    let los = line_of_sight_clear(&tx.position, &rx.position, obstacles);
    LinkGeometry::new(distance, incidence, irradiance, los)
        .map_err(|_| WorldError::DegenerateGeometry)
}

/// Rotates `v` by `angle` around the unit axis `axis` (Rodrigues formula).
fn rotate_about<T: Real>(v: &Vector3<T>, axis: &Vector3<T>, angle: T) -> Vector3<T> {
    let (sin, cos) = (angle.sin(), angle.cos());
    v * cos + axis.cross(v) * sin + axis * (axis.dot(v) * (T::one() - cos))
}

/// Turns the transmitter boresight toward the target position, rotating at
/// most `max_step` radians. Position and velocity are unchanged. The
/// boresight-to-target angle never increases.
pub fn track_target<T: Real>(
    tx: &Pose<T>,
    target: &Vector3<T>,
    max_step: T,
) -> Result<Pose<T>, WorldError> {
    if !finite_vec(target) || !(max_step.is_finite() && max_step >= T::zero()) {
        return Err(WorldError::DegenerateGeometry);
    }
    let delta = target - tx.position;
    let dist = delta.norm();
    if dist == T::zero() {
        return Err(WorldError::DegenerateGeometry);
    }
    let dir = delta / dist;
    let angle = angle_between(&tx.boresight, &dir);
    if angle <= max_step {
        return Ok(Pose {
            boresight: dir,
            ..*tx
        });
    }
    let mut axis = tx.boresight.cross(&dir);
    let axis_norm = axis.norm();
    if axis_norm == T::zero() {
        // Anti-parallel: any perpendicular axis works; pick deterministically.
        let trial = if tx.boresight.x.abs() < T::lit(0.9) {
            Vector3::new(T::one(), T::zero(), T::zero())
        } else {
            Vector3::new(T::zero(), T::one(), T::zero())
        };
        axis = tx.boresight.cross(&trial).normalize();
    } else {
        axis /= axis_norm;
    }
    let rotated = rotate_about(&tx.boresight, &axis, max_step).normalize();
    Ok(Pose {
        boresight: rotated,
        ..*tx
    })
}

/// Advances a pose one step of semi-implicit Euler: the velocity is updated
/// first, then the position moves with the new velocity. The boresight is
/// unchanged.
pub fn integrate_motion<T: Real>(
    pose: &Pose<T>,
    acceleration: &Vector3<T>,
    dt: T,
) -> Result<Pose<T>, WorldError> {
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(WorldError::NonPositiveTimeStep);
    }
    if !finite_vec(acceleration) {
        return Err(WorldError::NonFinitePose);
    }
    let velocity = pose.velocity + acceleration * dt;
    let position = pose.position + velocity * dt;
    Ok(Pose {
        position,
        velocity,
        boresight: pose.boresight,
    })
}
