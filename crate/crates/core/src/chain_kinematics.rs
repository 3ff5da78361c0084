//! Kinematics and statics of the serial chain described by [`DesignParams`].
//!
//! Frame convention: the first joint sits at the origin `O` with the world
//! orientation. Joint `j` rotates about its local x/y/z axis (Roll/Pitch/Yaw)
//! and is followed by a link of length `L_j` along its local +z, so the zero
//! posture is a vertical straight line.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::design_space::DesignParams;
use crate::error::{Error, Result};

/// Symmetric joint range, radians.
pub const JOINT_LIMIT: f64 = 2.4;

/// Joint angles in radians, each within `[-JOINT_LIMIT, JOINT_LIMIT]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointState(Vec<f64>);

impl JointState {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = q
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() <= JOINT_LIMIT))
        {
            return Err(Error::JointOutOfRange { index, value });
        }
        Ok(Self(q))
    }

    pub fn zeros(dof: usize) -> Self {
        Self(vec![0.0; dof])
    }

    /// Projects every angle into the joint range.
    pub fn projected(q: Vec<f64>) -> Self {
        Self(
            q.into_iter()
                .map(|v| v.clamp(-JOINT_LIMIT, JOINT_LIMIT))
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Uniform-rod link mass model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GravityModel {
    /// m/s², acting along world -z.
    pub g: f64,
    /// kg per meter of link.
    pub linear_density: f64,
    /// Center of mass position along each link, as a fraction of its length.
    pub com_fraction: f64,
}

impl Default for GravityModel {
    fn default() -> Self {
        Self {
            g: 9.81,
            linear_density: 1.0,
            com_fraction: 0.5,
        }
    }
}

impl GravityModel {
    pub fn check(&self) -> Result<()> {
        if !(self.linear_density > 0.0) || !(0.0..=1.0).contains(&self.com_fraction) {
            return Err(Error::Config(
                "gravity model needs linear_density > 0 and com_fraction in [0, 1]".into(),
            ));
        }
        if !self.g.is_finite() {
            return Err(Error::Config("gravity must be finite".into()));
        }
        Ok(())
    }
}

/// World-frame geometry of the chain at one posture.
#[derive(Clone, Debug)]
pub struct ChainPose {
    /// Position of joint `j` (the start of link `j`).
    pub joint_positions: Vec<Vector3<f64>>,
    /// World rotation axis of joint `j`.
    pub joint_axes: Vec<Vector3<f64>>,
    pub end_effector: Vector3<f64>,
}

impl ChainPose {
    /// End point of link `i`.
    pub fn link_end(&self, i: usize) -> Vector3<f64> {
        self.joint_positions
            .get(i + 1)
            .copied()
            .unwrap_or(self.end_effector)
    }
}

fn check_dims(params: &DesignParams, q: &[f64]) -> Result<()> {
    let d = params.dof();
    if q.len() != d || params.lengths.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.len(),
        });
    }
    Ok(())
}

pub fn forward_kinematics(params: &DesignParams, q: &[f64]) -> Result<ChainPose> {
    check_dims(params, q)?;
    let d = params.dof();
    let mut rot = Rotation3::identity();
    let mut pos = Vector3::from(params.origin);
    let mut joint_positions = Vec::with_capacity(d);
    let mut joint_axes = Vec::with_capacity(d);
    for ((joint, &len), &angle) in params.joints.iter().zip(&params.lengths).zip(q) {
        let local = Vector3::from(joint.local_axis());
        joint_positions.push(pos);
        joint_axes.push(rot * local);
        rot *= Rotation3::from_axis_angle(&Unit::new_unchecked(local), angle);
        pos += rot * Vector3::new(0.0, 0.0, len);
    }
    Ok(ChainPose {
        joint_positions,
        joint_axes,
        end_effector: pos,
    })
}

/// Column `j` is `axis_j × (p_ee − p_j)`.
fn jacobian_columns(pose: &ChainPose) -> Vec<Vector3<f64>> {
    pose.joint_axes
        .iter()
        .zip(&pose.joint_positions)
        .map(|(axis, p)| axis.cross(&(pose.end_effector - p)))
        .collect()
}

/// 3×D position Jacobian, m/rad. Returned as one 3-vector per joint.
pub fn position_jacobian(params: &DesignParams, q: &[f64]) -> Result<Vec<Vector3<f64>>> {
    Ok(jacobian_columns(&forward_kinematics(params, q)?))
}

fn link_coms(params: &DesignParams, pose: &ChainPose, gravity: &GravityModel) -> Vec<Vector3<f64>> {
    (0..params.dof())
        .map(|i| {
            let start = pose.joint_positions[i];
            start + gravity.com_fraction * (pose.link_end(i) - start)
        })
        .collect()
}

/// Gravitational potential energy `Σ m_i g z_com_i`.
pub fn potential_energy(params: &DesignParams, q: &[f64], gravity: &GravityModel) -> Result<f64> {
    let pose = forward_kinematics(params, q)?;
    Ok(link_coms(params, &pose, gravity)
        .iter()
        .zip(&params.lengths)
        .map(|(com, &len)| gravity.linear_density * len * gravity.g * com.z)
        .sum())
}

fn torque_from_pose(params: &DesignParams, pose: &ChainPose, gravity: &GravityModel) -> Vec<f64> {
    let coms = link_coms(params, pose, gravity);
    let weights: Vec<f64> = params
        .lengths
        .iter()
        .map(|&len| gravity.linear_density * len * gravity.g)
        .collect();
    (0..params.dof())
        .map(|j| {
            let axis = pose.joint_axes[j];
            let pj = pose.joint_positions[j];
            // dz_com_i/dq_j = (axis_j × (com_i − p_j))_z for every link i at or beyond j.
            (j..params.dof())
                .map(|i| weights[i] * axis.cross(&(coms[i] - pj)).z)
                .sum()
        })
        .collect()
}

/// Static joint torques `∂U/∂q_j` that hold the arm against gravity.
pub fn gravity_torque(params: &DesignParams, q: &[f64], gravity: &GravityModel) -> Result<Vec<f64>> {
    let pose = forward_kinematics(params, q)?;
    Ok(torque_from_pose(params, &pose, gravity))
}

/// Damped-least-squares IK settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkConfig {
    pub damping: f64,
    pub max_iterations: usize,
    /// Meters.
    pub tolerance: f64,
    /// Largest allowed |Δq_j| per iteration, radians.
    pub max_step: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            damping: 0.05,
            max_iterations: 300,
            tolerance: 1e-4,
            max_step: 0.2,
        }
    }
}

impl IkConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.damping >= 0.0) || !(self.tolerance >= 0.0) || !(self.max_step > 0.0) {
            return Err(Error::Config(
                "ik needs damping >= 0, tolerance >= 0 and max_step > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: JointState,
    /// End-effector position at `q`.
    pub reached: [f64; 3],
    /// Gravity-compensation torque at `q`, N·m.
    pub torque: Vec<f64>,
    /// Distance from `reached` to the target.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Position-only IK from the zero posture.
///
/// Unreachable targets are not an error; the best iterate found is returned
/// with `converged == false`.
pub fn solve_ik(
    params: &DesignParams,
    target: [f64; 3],
    gravity: &GravityModel,
    cfg: &IkConfig,
) -> Result<IkSolution> {
    let d = params.dof();
    let target = Vector3::from(target);
    let mut q = vec![0.0; d];
    let mut pose = forward_kinematics(params, &q)?;
    let mut residual = (target - pose.end_effector).norm();

    let mut best_q = q.clone();
    let mut best_pose = pose.clone();
    let mut best_residual = residual;
    let mut iterations = 0;
    let damping2 = cfg.damping * cfg.damping;

    while residual > cfg.tolerance && iterations < cfg.max_iterations {
        iterations += 1;
        let err = target - pose.end_effector;
        let cols = jacobian_columns(&pose);
        // Joints resting on a limit and pushed further outward are frozen so
        // the remaining joints take up the motion.
        let mut frozen = vec![false; d];
        let dq = loop {
            let mut jjt = Matrix3::identity() * damping2;
            for (c, _) in cols.iter().zip(&frozen).filter(|(_, f)| !**f) {
                jjt += c * c.transpose();
            }
            // Singular only when damping is zero and J has deficient rank.
            let Some(w) = jjt.cholesky().map(|ch| ch.solve(&err)) else {
                break None;
            };
            let dq: Vec<f64> = cols
                .iter()
                .zip(&frozen)
                .map(|(c, f)| if *f { 0.0 } else { c.dot(&w) })
                .collect();
            let mut changed = false;
            for j in 0..d {
                let outward = (q[j] >= JOINT_LIMIT && dq[j] > 0.0) || (q[j] <= -JOINT_LIMIT && dq[j] < 0.0);
                if outward && !frozen[j] {
                    frozen[j] = true;
                    changed = true;
                }
            }
            if !changed {
                break Some(dq);
            }
        };
        let Some(mut dq) = dq else {
            break;
        };
        let largest = dq.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if largest > cfg.max_step {
            let s = cfg.max_step / largest;
            dq.iter_mut().for_each(|v| *v *= s);
        }
        for (qj, dqj) in q.iter_mut().zip(&dq) {
            *qj = (*qj + dqj).clamp(-JOINT_LIMIT, JOINT_LIMIT);
        }
        pose = forward_kinematics(params, &q)?;
        residual = (target - pose.end_effector).norm();
        if residual < best_residual {
            best_residual = residual;
            best_q.clone_from(&q);
            best_pose = pose.clone();
        }
    }

    let torque = torque_from_pose(params, &best_pose, gravity);
    Ok(IkSolution {
        q: JointState::projected(best_q),
        reached: best_pose.end_effector.into(),
        torque,
        residual: best_residual,
        converged: best_residual <= cfg.tolerance,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design_space::{JointType, SpaceConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn single(joint: JointType, len: f64) -> DesignParams {
        DesignParams {
            origin: [0.0; 3],
            joints: vec![joint],
            lengths: vec![len],
        }
    }

    fn random_q(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-JOINT_LIMIT..=JOINT_LIMIT)).collect()
    }

    #[test]
    fn zero_pose_is_vertical() {
        let p = DesignParams {
            origin: [0.0; 3],
            joints: vec![JointType::Yaw, JointType::Pitch, JointType::Roll, JointType::Pitch],
            lengths: vec![0.1; 4],
        };
        let ee = forward_kinematics(&p, &[0.0; 4]).unwrap().end_effector;
        assert!((ee - Vector3::new(0.0, 0.0, 0.4)).norm() < 1e-15);
    }

    #[test]
    fn zero_pose_translates_with_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
        p.origin = [0.3, -0.1, 0.5];
        let ee = forward_kinematics(&p, &[0.0; 4]).unwrap().end_effector;
        let expected = Vector3::new(0.3, -0.1, 0.5 + p.total_length());
        assert!((ee - expected).norm() < 1e-12);
    }

    #[test]
    fn pitch_quarter_turn_points_along_x() {
        let ee = forward_kinematics(&single(JointType::Pitch, 0.2), &[FRAC_PI_2])
            .unwrap()
            .end_effector;
        assert!((ee - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = single(JointType::Pitch, 0.2);
        assert!(matches!(
            forward_kinematics(&p, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(gravity_torque(&p, &[], &GravityModel::default()).is_err());
        assert!(position_jacobian(&p, &[0.0; 3]).is_err());
    }

    #[test]
    fn jacobian_single_joint_cases() {
        let col = position_jacobian(&single(JointType::Pitch, 0.2), &[0.0]).unwrap()[0];
        assert!((col - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-15);
        let col = position_jacobian(&single(JointType::Yaw, 0.2), &[0.0]).unwrap()[0];
        assert_eq!(col, Vector3::zeros());
    }

    #[test]
    fn zero_pose_has_zero_torque() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
            let t = gravity_torque(&p, &[0.0; 4], &GravityModel::default()).unwrap();
            assert!(t.iter().all(|v| v.abs() < 1e-12), "{t:?}");
        }
    }

    #[test]
    fn horizontal_rod_torque() {
        let t = gravity_torque(&single(JointType::Pitch, 0.2), &[FRAC_PI_2], &GravityModel::default())
            .unwrap();
        assert!((t[0].abs() - 0.2 * 9.81 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn base_yaw_leaves_ee_unchanged_at_zero_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
        p.joints[0] = JointType::Yaw;
        let base = forward_kinematics(&p, &[0.0; 4]).unwrap().end_effector;
        for a in [-2.4, -1.0, 0.7, 2.4] {
            let ee = forward_kinematics(&p, &[a, 0.0, 0.0, 0.0]).unwrap().end_effector;
            assert!((ee - base).norm() < 1e-12);
        }
    }

    #[test]
    fn reach_never_exceeds_total_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
            let q = random_q(&mut rng, 4);
            let ee = forward_kinematics(&p, &q).unwrap().end_effector;
            assert!((ee - Vector3::from(p.origin)).norm() <= p.total_length() + 1e-12);
        }
    }

    #[test]
    fn ik_at_zero_pose_target_takes_no_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
        let target = forward_kinematics(&p, &[0.0; 4]).unwrap().end_effector;
        let sol = solve_ik(&p, target.into(), &GravityModel::default(), &IkConfig::default()).unwrap();
        assert_eq!(sol.residual, 0.0);
        assert_eq!(sol.q.as_slice(), &[0.0; 4]);
        assert!(sol.iterations <= 1);
        assert!(sol.converged);
    }

    #[test]
    fn ik_unreachable_target_reports_best_effort() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
        let cfg = IkConfig::default();
        let target = [p.origin[0] + 2.0, p.origin[1], p.origin[2]];
        let sol = solve_ik(&p, target, &GravityModel::default(), &cfg).unwrap();
        assert!(!sol.converged);
        assert!(sol.residual >= 2.0 - p.total_length() - cfg.tolerance);
        let initial = (Vector3::from(target)
            - forward_kinematics(&p, &[0.0; 4]).unwrap().end_effector)
            .norm();
        assert!(sol.residual <= initial);
    }

    #[test]
    fn ik_solution_fields_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let gravity = GravityModel::default();
        for _ in 0..50 {
            let p = DesignParams::random_sample(&mut rng, &SpaceConfig::default());
            let target = [
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.0..0.8),
            ];
            let sol = solve_ik(&p, target, &gravity, &IkConfig::default()).unwrap();
            assert!(sol.q.as_slice().iter().all(|v| v.abs() <= JOINT_LIMIT));
            let ee = forward_kinematics(&p, sol.q.as_slice()).unwrap().end_effector;
            assert_eq!(<[f64; 3]>::from(ee), sol.reached);
            assert_eq!((ee - Vector3::from(target)).norm(), sol.residual);
            assert_eq!(sol.torque, gravity_torque(&p, sol.q.as_slice(), &gravity).unwrap());
        }
    }

    #[test]
    fn joint_state_rejects_out_of_range() {
        assert!(JointState::new(vec![0.0, 2.5]).is_err());
        assert!(JointState::new(vec![f64::NAN]).is_err());
        assert!(JointState::new(vec![-2.4, 2.4]).is_ok());
        assert_eq!(JointState::projected(vec![3.0, -9.0]).as_slice(), &[2.4, -2.4]);
    }
}
