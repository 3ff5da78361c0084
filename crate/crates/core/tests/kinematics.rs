mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robodesign_core::chain_kinematics::{
    forward_kinematics, gravity_torque, position_jacobian, solve_ik,
};
use robodesign_core::{DesignParams, GravityModel, IkConfig, JointType, JOINT_LIMIT};

const EPS: f64 = 1e-6;

#[test]
fn forward_kinematics_matches_homogeneous_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dof in 1..=6 {
        for _ in 0..50 {
            let p = common::random_design(&mut rng, dof);
            let q = common::random_posture(&mut rng, dof);
            let ours = forward_kinematics(&p, &q).unwrap().end_effector;
            let oracle = common::tip(&p, &q);
            assert!((ours - oracle).norm() < 1e-12, "{p:?} {q:?}");
        }
    }
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let p = common::random_design(&mut rng, 4);
        let q = common::random_posture(&mut rng, 4);
        let cols = position_jacobian(&p, &q).unwrap();
        for (j, col) in cols.iter().enumerate() {
            let (mut hi, mut lo) = (q.clone(), q.clone());
            hi[j] += EPS;
            lo[j] -= EPS;
            let fd = (common::tip(&p, &hi) - common::tip(&p, &lo)) / (2.0 * EPS);
            assert!((col - fd).amax() < 1e-6, "column {j}: {col:?} vs {fd:?}");
        }
    }
}

#[test]
fn torque_matches_potential_energy_gradient() {
    let g = GravityModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let p = common::random_design(&mut rng, 4);
        let q = common::random_posture(&mut rng, 4);
        let tau = gravity_torque(&p, &q, &g).unwrap();
        let u = |q: &[f64]| common::potential(&p, q, g.g, g.linear_density, g.com_fraction);
        let fd: Vec<f64> = (0..4)
            .map(|j| {
                let (mut hi, mut lo) = (q.clone(), q.clone());
                hi[j] += EPS;
                lo[j] -= EPS;
                (u(&hi) - u(&lo)) / (2.0 * EPS)
            })
            .collect();
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = tau.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-5 * scale.max(1e-9), "{tau:?} vs {fd:?}");
    }
}

#[test]
fn torque_respects_model_parameters() {
    let p = DesignParams {
        origin: [0.0; 3],
        joints: vec![JointType::Pitch, JointType::Pitch],
        lengths: vec![0.2, 0.1],
    };
    let q = [1.0, -0.4];
    let base = gravity_torque(&p, &q, &GravityModel::default()).unwrap();
    let heavy = GravityModel {
        linear_density: 3.0,
        ..GravityModel::default()
    };
    let scaled = gravity_torque(&p, &q, &heavy).unwrap();
    for (a, b) in base.iter().zip(&scaled) {
        assert!((3.0 * a - b).abs() < 1e-12);
    }
}

#[test]
fn ik_recovers_reachable_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (cfg, g) = (IkConfig::default(), GravityModel::default());
    let mut ok = 0;
    for _ in 0..100 {
        let p = common::random_design(&mut rng, 4);
        let q = common::random_posture(&mut rng, 4);
        let t = common::tip(&p, &q);
        let sol = solve_ik(&p, [t.x, t.y, t.z], &g, &cfg).unwrap();
        if sol.residual < 1e-3 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100 solved");
}

fn design_strategy() -> impl Strategy<Value = (DesignParams, Vec<f64>)> {
    (1usize..=5).prop_flat_map(|d| {
        (
            prop::array::uniform3(-1.0f64..=1.0),
            prop::collection::vec(0usize..3, d),
            prop::collection::vec(0.03f64..=0.3, d),
            prop::collection::vec(-JOINT_LIMIT..=JOINT_LIMIT, d),
        )
            .prop_map(|(origin, j, lengths, q)| {
                let joints = j.into_iter().map(|k| JointType::ALL[k]).collect();
                (DesignParams { origin, joints, lengths }, q)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tip_never_leaves_reach_sphere((p, q) in design_strategy()) {
        let ee = forward_kinematics(&p, &q).unwrap().end_effector;
        let o = nalgebra::Vector3::from(p.origin);
        prop_assert!((ee - o).norm() <= p.total_length() + 1e-12);
    }

    #[test]
    fn base_yaw_leaves_straight_chain_tip_fixed((p, q) in design_strategy(), a in -2.4f64..2.4) {
        let _ = q;
        let mut p = p;
        p.joints[0] = JointType::Yaw;
        let mut rotated = vec![0.0; p.dof()];
        rotated[0] = a;
        let zero = forward_kinematics(&p, &vec![0.0; p.dof()]).unwrap().end_effector;
        let moved = forward_kinematics(&p, &rotated).unwrap().end_effector;
        prop_assert!((zero - moved).norm() < 1e-12);
    }

    #[test]
    fn ik_output_is_in_range_and_no_worse_than_start(
        (p, q) in design_strategy(),
        target in prop::array::uniform3(-1.5f64..1.5),
    ) {
        let _ = q;
        let sol = solve_ik(&p, target, &GravityModel::default(), &IkConfig::default()).unwrap();
        prop_assert!(sol.q.as_slice().iter().all(|v| v.abs() <= JOINT_LIMIT));
        let start = forward_kinematics(&p, &vec![0.0; p.dof()]).unwrap().end_effector;
        let initial = (start - nalgebra::Vector3::from(target)).norm();
        prop_assert!(sol.residual <= initial + 1e-12);
        let reached = forward_kinematics(&p, sol.q.as_slice()).unwrap().end_effector;
        prop_assert!((reached - nalgebra::Vector3::from(sol.reached)).norm() < 1e-12);
        let o = nalgebra::Vector3::from(p.origin);
        let gap = (nalgebra::Vector3::from(target) - o).norm() - p.total_length();
        prop_assert!(sol.residual >= gap - 1e-9);
    }
}
