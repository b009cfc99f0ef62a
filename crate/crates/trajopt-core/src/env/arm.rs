//! Planar 4-link arm with a single circular obstacle.
//!
//! The arm moves in a horizontal plane (no gravity), driven directly by
//! joint torques. Point masses sit at the end of each link. Contact with the
//! obstacle is inelastic: a repulsive inverse-square force acts at the
//! nearest point of the arm whenever that point approaches the obstacle,
//! and never injects energy.

use nalgebra::{DMatrix, DVector, Matrix2x4, Matrix4, Vector2, Vector4};

use super::{ControlAffineModel, EnvModel};
use crate::error::{Error, Result};

/// A circular obstacle.
#[derive(Clone, Copy, Debug)]
pub struct Obstacle {
    pub center: Vector2<f64>,
    pub radius: f64,
}

/// Weights of the arm's running and terminal costs.
///
/// Running cost: `torque_weight ||a||^2 dt + velocity_weight ||qdot||^2 dt +
/// posture_weight ||q_{2:4}||^2 dt` (posture penalises joints 2-4).
/// Terminal cost: `terminal_log_weight * log(||d|| + terminal_log_offset) +
/// terminal_quad_weight ||d||^2` with `d` the end-effector-to-goal vector.
/// The logarithmic term is negative once `||d|| < 1 - offset`; it is kept
/// exactly as stated.
#[derive(Clone, Copy, Debug)]
pub struct ArmCostParams {
    pub torque_weight: f64,
    pub velocity_weight: f64,
    pub posture_weight: f64,
    pub terminal_log_weight: f64,
    pub terminal_log_offset: f64,
    pub terminal_quad_weight: f64,
}

impl Default for ArmCostParams {
    fn default() -> Self {
        ArmCostParams {
            torque_weight: 0.1,
            velocity_weight: 10.0,
            posture_weight: 1.0,
            terminal_log_weight: 300.0,
            terminal_log_offset: 0.1,
            terminal_quad_weight: 10.0,
        }
    }
}

/// Nearest-point contact state: the force on the arm, the position Jacobian
/// at the contact point, and which link carries it.
#[derive(Clone, Debug)]
pub struct ContactInfo {
    pub force: Vector2<f64>,
    pub jacobian: Matrix2x4<f64>,
    pub link: usize,
    pub point: Vector2<f64>,
    /// Signed gap between the arm point and the obstacle surface.
    pub separation: f64,
}

/// Clamp applied to the contact distance before the inverse-square division.
const CONTACT_DIST_CLAMP: f64 = 1e-3;
/// Central-difference step for the mass-matrix derivative.
const CORIOLIS_FD_STEP: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ArmEnv {
    pub link_lengths: [f64; 4],
    pub link_masses: [f64; 4],
    pub obstacle: Obstacle,
    pub goal: Vector2<f64>,
    pub dt: f64,
    pub horizon: usize,
    pub cost: ArmCostParams,
    pub initial_angles: Vector4<f64>,
    pub initial_velocities: Vector4<f64>,
}

impl ArmEnv {
    /// Unit links and masses, `dt = 0.1`, horizon 25, obstacle between the
    /// initial sweep and the goal.
    pub fn paper_default() -> Self {
        ArmEnv {
            link_lengths: [1.0; 4],
            link_masses: [1.0; 4],
            obstacle: Obstacle {
                center: Vector2::new(2.0, 1.2),
                radius: 0.5,
            },
            goal: Vector2::new(-2.5, 1.5),
            dt: 0.1,
            horizon: 25,
            cost: ArmCostParams::default(),
            initial_angles: Vector4::zeros(),
            initial_velocities: Vector4::zeros(),
        }
    }

    /// Joint positions `p_1..p_4`; absolute link angles accumulate the joint
    /// angles.
    pub fn kinematics(&self, q: &Vector4<f64>) -> [Vector2<f64>; 4] {
        let mut theta = 0.0;
        let mut pos = Vector2::zeros();
        let mut out = [Vector2::zeros(); 4];
        for i in 0..4 {
            theta += q[i];
            pos += self.link_lengths[i] * Vector2::new(theta.cos(), theta.sin());
            out[i] = pos;
        }
        out
    }

    pub fn end_effector(&self, q: &Vector4<f64>) -> Vector2<f64> {
        self.kinematics(q)[3]
    }

    /// Position Jacobians of all four joint positions with respect to `q`.
    pub fn jacobians(&self, q: &Vector4<f64>) -> [Matrix2x4<f64>; 4] {
        // dp_i/dq_j = sum_{k=j..i} l_k (-sin θ_k, cos θ_k) for j <= i.
        let mut theta = 0.0;
        let mut tangents = [Vector2::zeros(); 4];
        for k in 0..4 {
            theta += q[k];
            tangents[k] = self.link_lengths[k] * Vector2::new(-theta.sin(), theta.cos());
        }
        let mut out = [Matrix2x4::zeros(); 4];
        for i in 0..4 {
            for j in 0..=i {
                let mut col = Vector2::zeros();
                for t in tangents.iter().take(i + 1).skip(j) {
                    col += t;
                }
                out[i].set_column(j, &col);
            }
        }
        out
    }

    /// Joint-space mass matrix `M(q) = Σ_i m_i J_iᵀ J_i`.
    pub fn mass_matrix(&self, q: &Vector4<f64>) -> Matrix4<f64> {
        let jacobians = self.jacobians(q);
        let mut m = Matrix4::zeros();
        for (j, &mass) in jacobians.iter().zip(&self.link_masses) {
            m += mass * j.transpose() * j;
        }
        m
    }

    /// Coriolis/centrifugal bias `C(q, qdot) qdot`, assembled from Christoffel
    /// symbols of the mass matrix with central finite differences.
    pub fn coriolis_bias(&self, q: &Vector4<f64>, qdot: &Vector4<f64>) -> Vector4<f64> {
        let h = CORIOLIS_FD_STEP;
        let mut dm = [Matrix4::zeros(); 4];
        for k in 0..4 {
            let mut qp = *q;
            let mut qm = *q;
            qp[k] += h;
            qm[k] -= h;
            dm[k] = (self.mass_matrix(&qp) - self.mass_matrix(&qm)) / (2.0 * h);
        }
        let mut bias = Vector4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let mut cij = 0.0;
                for k in 0..4 {
                    cij += 0.5 * (dm[k][(i, j)] + dm[j][(i, k)] - dm[i][(j, k)]) * qdot[k];
                }
                bias[i] += cij * qdot[j];
            }
        }
        bias
    }

    /// Contact force at the arm point nearest to the obstacle.
    ///
    /// `d_c` points from the obstacle surface to the nearest arm point. The
    /// force `d_c / ||d_c||^3` acts only while that point approaches the
    /// obstacle (`d_cᵀ J_c qdot <= 0`; the gate is closed at exactly zero
    /// approach velocity so a resting contact still repels). The distance is
    /// clamped below at 1e-3 before the division.
    pub fn contact_force(&self, q: &Vector4<f64>, qdot: &Vector4<f64>) -> ContactInfo {
        let joints = self.kinematics(q);
        let jacobians = self.jacobians(q);
        let center = self.obstacle.center;

        // Nearest point over the four link segments (p_0 = origin).
        let mut best: Option<(f64, usize, f64, Vector2<f64>)> = None;
        let mut start = Vector2::zeros();
        for (i, end) in joints.iter().enumerate() {
            let seg = end - start;
            let len2 = seg.norm_squared();
            let t = if len2 > 0.0 {
                ((center - start).dot(&seg) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let point = start + t * seg;
            let dist = (point - center).norm();
            if best.map_or(true, |(d, _, _, _)| dist < d) {
                best = Some((dist, i, t, point));
            }
            start = *end;
        }
        let (dist_center, link, t, point) = best.expect("four segments scanned");

        // Jacobian of the contact point: interpolate the joint Jacobians
        // (the base is fixed, so J_0 = 0).
        let j_prev = if link == 0 {
            Matrix2x4::zeros()
        } else {
            jacobians[link - 1]
        };
        let jacobian = j_prev * (1.0 - t) + jacobians[link] * t;

        let direction = if dist_center > 1e-12 {
            (point - center) / dist_center
        } else {
            Vector2::new(1.0, 0.0)
        };
        let separation = dist_center - self.obstacle.radius;
        let d_c = direction * separation;

        let approach = d_c.dot(&(jacobian * qdot));
        let force = if approach <= 0.0 {
            let norm = d_c.norm().max(CONTACT_DIST_CLAMP);
            d_c / (norm * norm * norm)
        } else {
            Vector2::zeros()
        };

        ContactInfo {
            force,
            jacobian,
            link: link + 1,
            point,
            separation,
        }
    }

    /// Joint acceleration `M(q)⁻¹ (a + J_cᵀ F_c - C(q, qdot) qdot)`.
    fn acceleration(&self, q: &Vector4<f64>, qdot: &Vector4<f64>, torque: &Vector4<f64>) -> Result<Vector4<f64>> {
        let contact = self.contact_force(q, qdot);
        let generalized = torque + contact.jacobian.transpose() * contact.force
            - self.coriolis_bias(q, qdot);
        let chol = nalgebra::Cholesky::new(self.mass_matrix(q))
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(chol.solve(&generalized))
    }

    /// Semi-implicit Euler step on `(q, qdot)`.
    pub fn step_arm(
        &self,
        q: &Vector4<f64>,
        qdot: &Vector4<f64>,
        torque: &Vector4<f64>,
    ) -> Result<(Vector4<f64>, Vector4<f64>)> {
        let qddot = self.acceleration(q, qdot, torque)?;
        let qdot_next = qdot + qddot * self.dt;
        let q_next = q + qdot_next * self.dt;
        Ok((q_next, qdot_next))
    }

    pub fn kinetic_energy(&self, q: &Vector4<f64>, qdot: &Vector4<f64>) -> f64 {
        0.5 * (self.mass_matrix(q) * qdot).dot(qdot)
    }

    fn unpack(state: &DVector<f64>) -> (Vector4<f64>, Vector4<f64>) {
        (
            Vector4::from_fn(|i, _| state[i]),
            Vector4::from_fn(|i, _| state[4 + i]),
        )
    }

    fn pack(q: &Vector4<f64>, qdot: &Vector4<f64>) -> DVector<f64> {
        let mut s = DVector::zeros(8);
        for i in 0..4 {
            s[i] = q[i];
            s[4 + i] = qdot[i];
        }
        s
    }

    /// Distance between the end effector and the goal for a packed state.
    pub fn goal_distance(&self, state: &DVector<f64>) -> f64 {
        let (q, _) = ArmEnv::unpack(state);
        (self.end_effector(&q) - self.goal).norm()
    }
}

impl EnvModel for ArmEnv {
    fn state_dim(&self) -> usize {
        8
    }

    fn action_dim(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> DVector<f64> {
        ArmEnv::pack(&self.initial_angles, &self.initial_velocities)
    }

    fn step(&self, n: usize, state: &DVector<f64>, action: &DVector<f64>) -> Result<DVector<f64>> {
        let (q, qdot) = ArmEnv::unpack(state);
        let torque = Vector4::from_fn(|i, _| action[i]);
        let (q_next, qdot_next) = self.step_arm(&q, &qdot, &torque)?;
        if !(q_next.iter().all(|v| v.is_finite()) && qdot_next.iter().all(|v| v.is_finite())) {
            return Err(Error::DynamicsBlowUp { step: n });
        }
        Ok(ArmEnv::pack(&q_next, &qdot_next))
    }

    fn running_cost(&self, _n: usize, state: &DVector<f64>, action: &DVector<f64>) -> f64 {
        let (q, qdot) = ArmEnv::unpack(state);
        let posture = q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
        self.dt
            * (self.cost.torque_weight * action.norm_squared()
                + self.cost.velocity_weight * qdot.norm_squared()
                + self.cost.posture_weight * posture)
    }

    fn terminal_cost(&self, state: &DVector<f64>) -> f64 {
        let d = self.goal_distance(state);
        self.cost.terminal_log_weight * (d + self.cost.terminal_log_offset).ln()
            + self.cost.terminal_quad_weight * d * d
    }
}

/// Control-affine view of the arm for the path-integral baseline: the torque
/// channel enters through `B(s) = [0; M(q)⁻¹]` and only the state-dependent
/// cost terms are exposed (the quadratic action penalty is supplied by the
/// algorithm). The terminal cost is divided by `dt` so the baseline's
/// `c_N(s) δt` recovers the arm's terminal cost.
pub struct ArmAffineAdapter<'a> {
    pub env: &'a ArmEnv,
}

impl ControlAffineModel for ArmAffineAdapter<'_> {
    fn state_dim(&self) -> usize {
        8
    }

    fn action_dim(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize {
        self.env.horizon
    }

    fn dt(&self) -> f64 {
        self.env.dt
    }

    fn initial_state(&self) -> DVector<f64> {
        self.env.initial_state()
    }

    fn drift(&self, _n: usize, state: &DVector<f64>) -> DVector<f64> {
        let (q, qdot) = ArmEnv::unpack(state);
        let contact = self.env.contact_force(&q, &qdot);
        let passive = contact.jacobian.transpose() * contact.force
            - self.env.coriolis_bias(&q, &qdot);
        let accel = nalgebra::Cholesky::new(self.env.mass_matrix(&q))
            .map(|c| c.solve(&passive))
            .unwrap_or_else(Vector4::zeros);
        let mut out = DVector::zeros(8);
        for i in 0..4 {
            out[i] = qdot[i];
            out[4 + i] = accel[i];
        }
        out
    }

    fn input_matrix(&self, _n: usize, state: &DVector<f64>) -> DMatrix<f64> {
        let (q, _) = ArmEnv::unpack(state);
        let inv = nalgebra::Cholesky::new(self.env.mass_matrix(&q))
            .map(|c| c.inverse())
            .unwrap_or_else(Matrix4::zeros);
        let mut b = DMatrix::zeros(8, 4);
        for i in 0..4 {
            for j in 0..4 {
                b[(4 + i, j)] = inv[(i, j)];
            }
        }
        b
    }

    fn state_cost(&self, _n: usize, state: &DVector<f64>) -> f64 {
        let (q, qdot) = ArmEnv::unpack(state);
        let posture = q[1] * q[1] + q[2] * q[2] + q[3] * q[3];
        self.env.cost.velocity_weight * qdot.norm_squared()
            + self.env.cost.posture_weight * posture
    }

    fn terminal_state_cost(&self, state: &DVector<f64>) -> f64 {
        self.env.terminal_cost(state) / self.env.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn env() -> ArmEnv {
        ArmEnv::paper_default()
    }

    /// Obstacle so remote its inverse-square force is below float noise.
    fn env_no_obstacle() -> ArmEnv {
        let mut e = env();
        e.obstacle.center = Vector2::new(1e8, 1e8);
        e
    }

    fn random_q(rng: &mut RngStream) -> Vector4<f64> {
        Vector4::from_fn(|_, _| rng.standard_normal() * 1.5)
    }

    #[test]
    fn straight_arm_reaches_four_along_x() {
        let p = env().end_effector(&Vector4::zeros());
        assert_relative_eq!(p.x, 4.0, max_relative = 1e-14);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rigid_rotation_by_quarter_turn() {
        let p = env().end_effector(&Vector4::new(FRAC_PI_2, 0.0, 0.0, 0.0));
        assert!((p - Vector2::new(0.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn reach_is_bounded_by_total_length() {
        let e = env();
        let mut rng = RngStream::from_seed(1);
        for _ in 0..200 {
            let q = random_q(&mut rng);
            assert!(e.end_effector(&q).norm() <= 4.0 + 1e-12);
        }
    }

    #[test]
    fn jacobians_match_finite_differences_of_kinematics() {
        let e = env();
        let mut rng = RngStream::from_seed(2);
        let h = 1e-6;
        for _ in 0..20 {
            let q = random_q(&mut rng);
            let jac = e.jacobians(&q);
            for i in 0..4 {
                for j in 0..4 {
                    let mut qp = q;
                    let mut qm = q;
                    qp[j] += h;
                    qm[j] -= h;
                    let fd = (e.kinematics(&qp)[i] - e.kinematics(&qm)[i]) / (2.0 * h);
                    let col = jac[i].column(j);
                    let scale = fd.norm().max(1.0);
                    assert!(
                        (Vector2::new(col[0], col[1]) - fd).norm() / scale < 1e-6,
                        "joint {i} coord {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn single_link_reduction_has_point_inertia() {
        let mut e = env();
        e.link_masses = [1.0, 0.0, 0.0, 0.0];
        let m = e.mass_matrix(&Vector4::new(0.3, -0.7, 0.2, 0.1));
        assert_relative_eq!(m[(0, 0)], 1.0, max_relative = 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 0) {
                    assert!(m[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mass_matrix_is_symmetric() {
        let e = env();
        let mut rng = RngStream::from_seed(3);
        for _ in 0..50 {
            let m = e.mass_matrix(&random_q(&mut rng));
            assert!((m - m.transpose()).abs().max() < 1e-12);
        }
    }

    /// Kinetic-energy oracle: 1/2 qdotᵀ M qdot must equal Σ 1/2 m_i |pdot_i|^2
    /// with the point velocities obtained by finite differences of the
    /// kinematics alone.
    #[test]
    fn mass_matrix_matches_kinetic_energy_oracle() {
        let e = env();
        let mut rng = RngStream::from_seed(4);
        let h = 1e-6;
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let qdot = random_q(&mut rng);
            let through_mass = e.kinetic_energy(&q, &qdot);

            let plus = e.kinematics(&(q + qdot * h));
            let minus = e.kinematics(&(q - qdot * h));
            let mut oracle = 0.0;
            for i in 0..4 {
                let v = (plus[i] - minus[i]) / (2.0 * h);
                oracle += 0.5 * e.link_masses[i] * v.norm_squared();
            }
            assert_relative_eq!(through_mass, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn mass_matrix_is_positive_definite() {
        let e = env();
        let mut rng = RngStream::from_seed(5);
        for _ in 0..1000 {
            let m = e.mass_matrix(&random_q(&mut rng));
            assert!(nalgebra::Cholesky::new(m).is_some());
        }
    }

    #[test]
    fn receding_contact_has_no_force() {
        let mut e = env();
        // Obstacle straight above the second joint, arm swinging away.
        e.obstacle = Obstacle {
            center: Vector2::new(2.0, 1.0),
            radius: 0.3,
        };
        let q = Vector4::zeros();
        // Positive joint rates move every point upward (+y) away from below,
        // but here the obstacle is above: moving up approaches. Use negative
        // rates to recede.
        let receding = Vector4::new(-1.0, -0.5, -0.2, -0.1);
        let info = e.contact_force(&q, &receding);
        assert_eq!(info.force, Vector2::zeros());
    }

    #[test]
    fn stationary_contact_repels_inverse_square() {
        let mut e = env();
        e.obstacle = Obstacle {
            center: Vector2::new(2.0, 2.0),
            radius: 0.5,
        };
        // Straight arm along x: nearest point (2, 0), gap 2 - 0.5 = 1.5.
        let info = e.contact_force(&Vector4::zeros(), &Vector4::zeros());
        assert_relative_eq!(info.force.norm(), 1.0 / (1.5 * 1.5), max_relative = 1e-12);
        // Repulsion points from the obstacle toward the arm point.
        assert!(info.force.y < 0.0);
    }

    #[test]
    fn contact_at_distance_two_has_force_quarter() {
        let mut e = env();
        e.obstacle = Obstacle {
            center: Vector2::new(2.0, 2.5),
            radius: 0.5,
        };
        // Gap = 2.5 - 0.5 = 2; approaching because the arm point moves up.
        let q = Vector4::zeros();
        let qdot = Vector4::new(1.0, 0.0, 0.0, 0.0);
        let info = e.contact_force(&q, &qdot);
        assert_relative_eq!(info.force.norm(), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn contact_power_is_never_positive() {
        let e = env();
        let mut rng = RngStream::from_seed(6);
        let mut active = 0;
        for _ in 0..2000 {
            let q = random_q(&mut rng);
            let qdot = random_q(&mut rng) * 2.0;
            let info = e.contact_force(&q, &qdot);
            if info.force != Vector2::zeros() {
                active += 1;
                let point_velocity = info.jacobian * qdot;
                assert!(info.force.dot(&point_velocity) <= 0.0);
            }
        }
        assert!(active > 0, "no contact configurations sampled");
    }

    #[test]
    fn equilibrium_without_torque_or_motion() {
        let e = env_no_obstacle();
        let s = e.initial_state();
        let next = e.step(0, &s, &DVector::zeros(4)).unwrap();
        assert!((next - s).amax() < 1e-14);
    }

    #[test]
    fn free_motion_conserves_energy_at_fine_step() {
        let mut e = env_no_obstacle();
        e.dt = 1e-4;
        let mut rng = RngStream::from_seed(7);
        for _ in 0..10 {
            let q = random_q(&mut rng);
            let qdot = random_q(&mut rng);
            let before = e.kinetic_energy(&q, &qdot);
            let (q2, qd2) = e.step_arm(&q, &qdot, &Vector4::zeros()).unwrap();
            let after = e.kinetic_energy(&q2, &qd2);
            assert!(
                (after - before).abs() / before.abs().max(1e-9) < 1e-6,
                "drift {} -> {}",
                before,
                after
            );
        }
    }

    #[test]
    fn stepping_is_bit_deterministic() {
        let e = env();
        let s = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1, 0.0, 0.2]);
        let a = DVector::from_vec(vec![0.3, 0.1, -0.2, 0.05]);
        let s1 = e.step(0, &s, &a).unwrap();
        let s2 = e.step(0, &s, &a).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn running_cost_zero_only_at_rest() {
        let e = env();
        let rest = DVector::zeros(8);
        assert_eq!(e.running_cost(0, &rest, &DVector::zeros(4)), 0.0);

        let mut bent = DVector::zeros(8);
        bent[1] = 0.1; // q_2 nonzero: posture cost fires
        assert!(e.running_cost(0, &bent, &DVector::zeros(4)) > 0.0);

        let mut moving = DVector::zeros(8);
        moving[4] = 0.1;
        assert!(e.running_cost(0, &moving, &DVector::zeros(4)) > 0.0);
    }

    #[test]
    fn single_torque_running_cost() {
        let e = env();
        let s = DVector::zeros(8);
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(e.running_cost(0, &s, &a), 0.01, max_relative = 1e-14);
    }

    #[test]
    fn terminal_cost_at_goal_is_log_of_offset() {
        let mut e = env();
        let q = Vector4::new(0.4, -0.3, 0.2, 0.5);
        e.goal = e.end_effector(&q);
        let mut s = DVector::zeros(8);
        for i in 0..4 {
            s[i] = q[i];
        }
        let expected = 300.0 * 0.1f64.ln();
        assert_relative_eq!(e.terminal_cost(&s), expected, max_relative = 1e-12);
        assert!(e.terminal_cost(&s) < 0.0);
    }
}
