//! Distributed formation keeping: a second-order consensus controller in
//! which every member accelerates against its displacement and velocity
//! disagreements with its graph neighbours, driving the group toward a
//! rigid offset pattern around the swarm centroid.

use crate::real::Real;
use crate::world::Pose;
use nalgebra::Vector3;
use std::collections::BTreeMap;

/// Formation description or evaluation failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormationError {
    #[error("formation needs at least one member")]
    NoMembers,
    #[error("member id must not be empty")]
    EmptyMemberId,
    #[error("member {0} listed more than once")]
    DuplicateMember(String),
    #[error("offset count {offsets} does not match member count {members}")]
    OffsetCountMismatch { offsets: usize, members: usize },
    #[error("offsets must be finite")]
    NonFiniteOffset,
    #[error("offsets must sum to zero (pattern is centroid-relative)")]
    OffsetsNotCentred,
    #[error("edge ({0}, {1}) is out of range")]
    EdgeOutOfRange(usize, usize),
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) listed more than once")]
    DuplicateEdge(usize, usize),
    #[error("communication graph is not connected")]
    Disconnected,
    #[error("{name} must be finite and positive")]
    NonPositiveParameter { name: &'static str },
    #[error("no pose supplied for member {0}")]
    MissingPose(String),
}

/// A validated formation: member ids, centroid-relative target offsets, an
/// undirected connected communication graph, controller gains, and an
/// acceleration ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec<T: Real> {
    members: Vec<String>,
    offsets: Vec<Vector3<T>>,
    edges: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
    gain_p: T,
    gain_d: T,
    max_accel: T,
}

impl<T: Real> FormationSpec<T> {
    /// Validates and builds a formation. Offsets are positions relative to
    /// the formation centroid and must sum to zero; edges are undirected
    /// member-index pairs forming a connected graph.
    pub fn new(
        members: Vec<String>,
        offsets: Vec<Vector3<T>>,
        edges: Vec<(usize, usize)>,
        gain_p: T,
        gain_d: T,
        max_accel: T,
    ) -> Result<Self, FormationError> {
        if members.is_empty() {
            return Err(FormationError::NoMembers);
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &members {
            if id.is_empty() {
                return Err(FormationError::EmptyMemberId);
            }
            if !seen.insert(id.clone()) {
                return Err(FormationError::DuplicateMember(id.clone()));
            }
        }
        if offsets.len() != members.len() {
            return Err(FormationError::OffsetCountMismatch {
                offsets: offsets.len(),
                members: members.len(),
            });
        }
        let mut sum = Vector3::zeros();
        let mut scale = T::one();
        for offset in &offsets {
            if !(offset.x.is_finite() && offset.y.is_finite() && offset.z.is_finite()) {
                return Err(FormationError::NonFiniteOffset);
            }
            sum += offset;
            scale = scale.max(offset.norm());
        }
        let tolerance = T::lit(1e-9) * scale;
        if sum.norm() > tolerance {
            return Err(FormationError::OffsetsNotCentred);
        }
        let n = members.len();
        let mut normalized = std::collections::BTreeSet::new();
        let mut neighbours = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(FormationError::EdgeOutOfRange(a, b));
            }
            if a == b {
                return Err(FormationError::SelfLoop(a));
            }
            let key = (a.min(b), a.max(b));
            if !normalized.insert(key) {
                return Err(FormationError::DuplicateEdge(key.0, key.1));
            }
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
        for list in &mut neighbours {
            list.sort_unstable();
        }
        // Connectivity check (breadth-first from member 0).
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        visited[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &neighbours[i] {
                if !visited[j] {
                    visited[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        if reached != n {
            return Err(FormationError::Disconnected);
        }
        for (name, value) in [
            ("gain_p", gain_p),
            ("gain_d", gain_d),
            ("max_accel", max_accel),
        ] {
            if !(value.is_finite() && value > T::zero()) {
                return Err(FormationError::NonPositiveParameter { name });
            }
        }
        Ok(Self {
            members,
            offsets,
            edges: edges
                .iter()
                .map(|&(a, b)| (a.min(b), a.max(b)))
                .collect(),
            neighbours,
            gain_p,
            gain_d,
            max_accel,
        })
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn offsets(&self) -> &[Vector3<T>] {
        &self.offsets
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn gain_p(&self) -> T {
        self.gain_p
    }

    pub fn gain_d(&self) -> T {
        self.gain_d
    }

    pub fn max_accel(&self) -> T {
        self.max_accel
    }

    pub fn member_index(&self, id: &str) -> Option<usize> {
        self.members.iter().position(|m| m == id)
    }

    /// Target offset of a member relative to the formation centroid.
    pub fn offset_of(&self, id: &str) -> Option<&Vector3<T>> {
        self.member_index(id).map(|i| &self.offsets[i])
    }
}

/// Computes one acceleration command per member:
///
/// `u_i = -gain_p * sum_j ((p_i - p_j) - (o_i - o_j))
///        -gain_d * sum_j (v_i - v_j)`
///
/// summed over graph neighbours `j`, with the command norm clipped to
/// `max_accel`. Every member must have a pose in `poses`.
pub fn formation_control<T: Real>(
    spec: &FormationSpec<T>,
    poses: &BTreeMap<String, Pose<T>>,
) -> Result<BTreeMap<String, Vector3<T>>, FormationError> {
    let mut states = Vec::with_capacity(spec.members.len());
    for id in &spec.members {
        let pose = poses
            .get(id)
            .ok_or_else(|| FormationError::MissingPose(id.clone()))?;
        states.push((pose.position, pose.velocity));
    }
    let mut commands = BTreeMap::new();
    for (i, id) in spec.members.iter().enumerate() {
        let (p_i, v_i) = states[i];
        let o_i = spec.offsets[i];
        let mut command = Vector3::zeros();
        for &j in &spec.neighbours[i] {
            let (p_j, v_j) = states[j];
            let o_j = spec.offsets[j];
            command -= ((p_i - p_j) - (o_i - o_j)) * spec.gain_p;
            command -= (v_i - v_j) * spec.gain_d;
        }
        let norm = command.norm();
        if norm > spec.max_accel {
            command *= spec.max_accel / norm;
        }
        commands.insert(id.clone(), command);
    }
    Ok(commands)
}

/// Worst member deviation from the target pattern: with `c` the current
/// centroid of the members, returns `max_i |(p_i - c) - o_i|` in metres.
pub fn formation_error<T: Real>(
    spec: &FormationSpec<T>,
    positions: &BTreeMap<String, Vector3<T>>,
) -> Result<T, FormationError> {
    let mut points = Vec::with_capacity(spec.members.len());
    for id in &spec.members {
        let p = positions
            .get(id)
            .ok_or_else(|| FormationError::MissingPose(id.clone()))?;
        points.push(*p);
    }
    let mut centroid = Vector3::zeros();
    for p in &points {
        centroid += p;
    }
    centroid /= T::from_usize(points.len()).expect("member count fits scalar");
    let mut worst = T::zero();
    for (p, offset) in points.iter().zip(spec.offsets.iter()) {
        worst = worst.max(((p - centroid) - offset).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::integrate_motion;
    use approx::assert_relative_eq;

    type V = Vector3<f64>;

    fn square_spec(gain_p: f64, gain_d: f64, max_accel: f64) -> FormationSpec<f64> {
        FormationSpec::new(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![
                V::new(1.0, 1.0, 0.0),
                V::new(-1.0, 1.0, 0.0),
                V::new(-1.0, -1.0, 0.0),
                V::new(1.0, -1.0, 0.0),
            ],
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
            gain_p,
            gain_d,
            max_accel,
        )
        .unwrap()
    }

    fn pose_at(p: V, v: V) -> Pose<f64> {
        Pose::new(p, v, V::new(1.0, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn validation_rejects_malformed_specs() {
        let ids = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let two = vec![V::new(1.0, 0.0, 0.0), V::new(-1.0, 0.0, 0.0)];
        assert_eq!(
            FormationSpec::<f64>::new(vec![], vec![], vec![], 1.0, 1.0, 1.0),
            Err(FormationError::NoMembers)
        );
        assert_eq!(
            FormationSpec::new(ids(&["a", "a"]), two.clone(), vec![(0, 1)], 1.0, 1.0, 1.0),
            Err(FormationError::DuplicateMember("a".into()))
        );
        assert_eq!(
            FormationSpec::new(
                ids(&["a", "b"]),
                vec![V::new(1.0, 0.0, 0.0), V::new(-0.5, 0.0, 0.0)],
                vec![(0, 1)],
                1.0,
                1.0,
                1.0
            ),
            Err(FormationError::OffsetsNotCentred)
        );
        assert_eq!(
            FormationSpec::new(ids(&["a", "b"]), two.clone(), vec![(0, 2)], 1.0, 1.0, 1.0),
            Err(FormationError::EdgeOutOfRange(0, 2))
        );
        assert_eq!(
            FormationSpec::new(ids(&["a", "b"]), two.clone(), vec![(1, 1)], 1.0, 1.0, 1.0),
            Err(FormationError::SelfLoop(1))
        );
        assert_eq!(
            FormationSpec::new(
                ids(&["a", "b"]),
                two.clone(),
                vec![(0, 1), (1, 0)],
                1.0,
                1.0,
                1.0
            ),
            Err(FormationError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            FormationSpec::new(ids(&["a", "b"]), two.clone(), vec![], 1.0, 1.0, 1.0),
            Err(FormationError::Disconnected)
        );
        assert_eq!(
            FormationSpec::new(ids(&["a", "b"]), two.clone(), vec![(0, 1)], 0.0, 1.0, 1.0),
            Err(FormationError::NonPositiveParameter { name: "gain_p" })
        );
        assert_eq!(
            FormationSpec::new(ids(&["a", "b"]), two, vec![(0, 1)], 1.0, 1.0, -2.0),
            Err(FormationError::NonPositiveParameter { name: "max_accel" })
        );
    }

    #[test]
    fn formation_at_target_with_common_velocity_commands_nothing() {
        let spec = square_spec(1.0, 2.0, 5.0);
        let drift = V::new(0.3, -0.2, 0.1);
        let mut poses = BTreeMap::new();
        for (id, offset) in spec.members().iter().zip(spec.offsets()) {
            poses.insert(id.clone(), pose_at(*offset, drift));
        }
        let commands = formation_control(&spec, &poses).unwrap();
        for command in commands.values() {
            assert_eq!(*command, V::zeros());
        }
    }

    #[test]
    fn command_norm_is_clipped() {
        let spec = square_spec(1.0, 2.0, 5.0);
        let mut poses = BTreeMap::new();
        for (i, id) in spec.members().iter().enumerate() {
            let p = if i == 0 {
                V::new(1e6, 0.0, 0.0)
            } else {
                spec.offsets()[i]
            };
            poses.insert(id.clone(), pose_at(p, V::zeros()));
        }
        let commands = formation_control(&spec, &poses).unwrap();
        assert_relative_eq!(commands["a"].norm(), 5.0, max_relative = 1e-12);
        assert!(commands["b"].norm() <= 5.0 + 1e-12);
    }

    #[test]
    fn missing_pose_is_reported() {
        let spec = square_spec(1.0, 2.0, 5.0);
        let poses = BTreeMap::new();
        assert_eq!(
            formation_control(&spec, &poses),
            Err(FormationError::MissingPose("a".into()))
        );
    }

    #[test]
    fn two_member_pair_converges_like_a_damped_spring() {
        // Relative coordinate r = p_a - p_b obeys
        // r'' = -2 gain_p (r - (o_a - o_b)) - 2 gain_d r'.
        let spec = FormationSpec::new(
            vec!["a".into(), "b".into()],
            vec![V::new(1.0, 0.0, 0.0), V::new(-1.0, 0.0, 0.0)],
            vec![(0, 1)],
            1.0,
            2.0,
            50.0,
        )
        .unwrap();
        let dt = 0.01;
        let mut poses = BTreeMap::from([
            ("a".to_string(), pose_at(V::new(5.0, 0.0, 0.0), V::zeros())),
            ("b".to_string(), pose_at(V::new(-5.0, 0.0, 0.0), V::zeros())),
        ]);
        for _ in 0..3000 {
            let commands = formation_control(&spec, &poses).unwrap();
            for (id, pose) in poses.iter_mut() {
                *pose = integrate_motion(pose, &commands[id], dt).unwrap();
            }
        }
        // Overdamped pair (natural frequency sqrt(2), damping ratio sqrt(2)):
        // 30 s is dozens of time constants, so the gap settles to 2 m.
        let gap = poses["a"].position - poses["b"].position;
        assert_relative_eq!(gap.x, 2.0, max_relative = 1e-6);
        assert!(poses["a"].velocity.norm() < 1e-6);
        // The uncoupled centroid never moves.
        let centroid = (poses["a"].position + poses["b"].position) / 2.0;
        assert!(centroid.norm() < 1e-12);
    }

    #[test]
    fn square_formation_converges_from_perturbed_start() {
        let spec = square_spec(1.0, 2.0, 5.0);
        let dt = 0.05;
        let starts = [
            V::new(1.7, 0.4, 0.2),
            V::new(-0.3, 1.6, -0.1),
            V::new(-1.8, -0.9, 0.0),
            V::new(0.4, -1.1, -0.1),
        ];
        let mut poses: BTreeMap<String, Pose<f64>> = spec
            .members()
            .iter()
            .zip(starts)
            .map(|(id, p)| (id.clone(), pose_at(p, V::zeros())))
            .collect();
        let mut errors = Vec::new();
        for step in 0..1200 {
            let commands = formation_control(&spec, &poses).unwrap();
            for (id, pose) in poses.iter_mut() {
                *pose = integrate_motion(pose, &commands[id], dt).unwrap();
            }
            if (step + 1) % 200 == 0 {
                let positions = poses
                    .iter()
                    .map(|(id, pose)| (id.clone(), pose.position))
                    .collect();
                errors.push(formation_error(&spec, &positions).unwrap());
            }
        }
        assert!(
            errors.last().unwrap() < &1e-6,
            "final error {:?}",
            errors.last()
        );
        assert!(
            errors.windows(2).all(|w| w[1] <= w[0]),
            "errors not monotone: {errors:?}"
        );
    }

    #[test]
    fn commands_are_translation_invariant() {
        let spec = square_spec(1.0, 2.0, 5.0);
        let starts = [
            V::new(1.7, 0.4, 0.2),
            V::new(-0.3, 1.6, -0.1),
            V::new(-1.8, -0.9, 0.0),
            V::new(0.4, -1.1, -0.1),
        ];
        let build = |shift: V| -> BTreeMap<String, Pose<f64>> {
            spec.members()
                .iter()
                .zip(starts)
                .map(|(id, p)| (id.clone(), pose_at(p + shift, V::zeros())))
                .collect()
        };
        let base = formation_control(&spec, &build(V::zeros())).unwrap();
        let shifted = formation_control(&spec, &build(V::new(100.0, -50.0, 10.0))).unwrap();
        for id in spec.members() {
            assert_relative_eq!(base[id].x, shifted[id].x, epsilon = 1e-9);
            assert_relative_eq!(base[id].y, shifted[id].y, epsilon = 1e-9);
            assert_relative_eq!(base[id].z, shifted[id].z, epsilon = 1e-9);
        }
    }

    #[test]
    fn formation_error_reports_worst_member() {
        let spec = square_spec(1.0, 2.0, 5.0);
        let mut positions: BTreeMap<String, V> = spec
            .members()
            .iter()
            .zip(spec.offsets())
            .map(|(id, o)| (id.clone(), *o))
            .collect();
        assert_eq!(formation_error(&spec, &positions).unwrap(), 0.0);
        // Moving one member also moves the centroid by a quarter of the
        // displacement; the mover's deviation is three quarters of it.
        positions.insert("a".into(), spec.offsets()[0] + V::new(0.4, 0.0, 0.0));
        assert_relative_eq!(
            formation_error(&spec, &positions).unwrap(),
            0.3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_precision_formation_behaves() {
        let spec = FormationSpec::<f32>::new(
            vec!["a".into(), "b".into()],
            vec![
                Vector3::new(1.0f32, 0.0, 0.0),
                Vector3::new(-1.0f32, 0.0, 0.0),
            ],
            vec![(0, 1)],
            1.0,
            2.0,
            5.0,
        )
        .unwrap();
        let poses = BTreeMap::from([
            (
                "a".to_string(),
                Pose::new(
                    Vector3::new(3.0f32, 0.0, 0.0),
                    Vector3::zeros(),
                    Vector3::new(1.0, 0.0, 0.0),
                )
                .unwrap(),
            ),
            (
                "b".to_string(),
                Pose::new(
                    Vector3::new(-3.0f32, 0.0, 0.0),
                    Vector3::zeros(),
                    Vector3::new(1.0, 0.0, 0.0),
                )
                .unwrap(),
            ),
        ]);
        let commands = formation_control(&spec, &poses).unwrap();
        assert!(commands["a"].x < 0.0);
        assert!(commands["b"].x > 0.0);
    }
}
