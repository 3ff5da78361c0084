mod common;

use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robodesign_core::chain_kinematics::forward_kinematics;
use robodesign_core::{DesignParams, JointType, SpaceConfig, JOINT_LIMIT};

fn parse_triple(s: &str) -> Vector3<f64> {
    let v: Vec<f64> = s.split_whitespace().map(|x| x.parse().unwrap()).collect();
    Vector3::new(v[0], v[1], v[2])
}

/// Walks the URDF from `world` to `end_effector`, applying each joint's
/// origin and, for revolute joints, a rotation about its axis.
fn urdf_tip(xml: &str, q: &[f64]) -> Vector3<f64> {
    let doc = roxmltree::Document::parse(xml).expect("well-formed XML");
    let joints: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("joint")).collect();
    let mut link = "world".to_string();
    let mut rot = Rotation3::identity();
    let mut pos = Vector3::zeros();
    let mut k = 0;
    while link != "end_effector" {
        let j = joints
            .iter()
            .find(|j| {
                j.children()
                    .find(|c| c.has_tag_name("parent"))
                    .and_then(|c| c.attribute("link"))
                    == Some(link.as_str())
            })
            .expect("chain continues");
        let origin = j.children().find(|c| c.has_tag_name("origin")).unwrap();
        assert_eq!(origin.attribute("rpy"), Some("0 0 0"));
        pos += rot * parse_triple(origin.attribute("xyz").unwrap());
        if j.attribute("type") == Some("revolute") {
            let axis = parse_triple(
                j.children()
                    .find(|c| c.has_tag_name("axis"))
                    .unwrap()
                    .attribute("xyz")
                    .unwrap(),
            );
            rot *= Rotation3::from_axis_angle(&Unit::new_normalize(axis), q[k]);
            k += 1;
        }
        link = j
            .children()
            .find(|c| c.has_tag_name("child"))
            .unwrap()
            .attribute("link")
            .unwrap()
            .to_string();
    }
    assert_eq!(k, q.len());
    pos
}

#[test]
fn urdf_chain_reproduces_forward_kinematics() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for dof in 1..=6 {
        for _ in 0..20 {
            let p = common::random_design(&mut rng, dof);
            let xml = p.emit_urdf(&SpaceConfig::with_dof(dof)).unwrap();
            let zero = vec![0.0; dof];
            let q = common::random_posture(&mut rng, dof);
            for posture in [&zero, &q] {
                let fk = forward_kinematics(&p, posture).unwrap().end_effector;
                assert!((urdf_tip(&xml, posture) - fk).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn urdf_structure() {
    let p = DesignParams {
        origin: [0.0; 3],
        joints: vec![JointType::Yaw, JointType::Pitch, JointType::Roll, JointType::Pitch],
        lengths: vec![0.25, 0.2, 0.2, 0.15],
    };
    let xml = p.emit_urdf(&SpaceConfig::default()).unwrap();
    assert_eq!(xml, p.emit_urdf(&SpaceConfig::default()).unwrap());
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let revolute: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("joint") && n.attribute("type") == Some("revolute"))
        .collect();
    assert_eq!(revolute.len(), 4);
    let axes: Vec<&str> = revolute
        .iter()
        .map(|j| j.children().find(|c| c.has_tag_name("axis")).unwrap().attribute("xyz").unwrap())
        .collect();
    assert_eq!(axes, ["0 0 1", "0 1 0", "1 0 0", "0 1 0"]);
    for j in &revolute {
        let limit = j.children().find(|c| c.has_tag_name("limit")).unwrap();
        assert_eq!(limit.attribute("lower").unwrap().parse::<f64>().unwrap(), -JOINT_LIMIT);
        assert_eq!(limit.attribute("upper").unwrap().parse::<f64>().unwrap(), JOINT_LIMIT);
    }
    let masses: Vec<f64> = doc
        .descendants()
        .filter(|n| n.has_tag_name("mass"))
        .map(|n| n.attribute("value").unwrap().parse().unwrap())
        .collect();
    assert_eq!(masses, p.lengths);
}

#[test]
fn urdf_rejects_invalid_design() {
    let p = DesignParams {
        origin: [1.5, 0.0, 0.0],
        joints: vec![JointType::Yaw],
        lengths: vec![0.1],
    };
    assert!(p.emit_urdf(&SpaceConfig::with_dof(1)).is_err());
}

#[test]
fn random_samples_validate_and_cover_joint_types() {
    let s = SpaceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut counts = [0usize; 3];
    let n = 10_000;
    for _ in 0..n {
        let p = DesignParams::random_sample(&mut rng, &s);
        assert!(p.validate(&s).is_empty());
        counts[common::axis_index(p.joints[0])] += 1;
    }
    let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 / 3.0).abs() < 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn vector_length_is_checked() {
    let s = SpaceConfig::default();
    assert_eq!(s.vector_len(), 11);
    assert!(DesignParams::from_vector(&[0.0; 10], &s).is_err());
    assert!(DesignParams::from_vector(&[0.0; 12], &s).is_err());
}

#[test]
fn params_toml_round_trip() {
    let text = "origin = [0.0, 0.1, -0.2]\njoints = [\"Y\", \"P\", \"R\", \"P\"]\nlengths = [0.1, 0.2, 0.3, 0.1]\n";
    let p = DesignParams::from_toml_str(text).unwrap();
    assert_eq!(p.joint_string(), "Y-P-R-P");
    assert!(DesignParams::from_toml_str("origin = [0, 0, 0]\njoints = [\"Y\"]\nlengths = []").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vector_round_trip(seed in any::<u64>(), dof in 1usize..=8) {
        let s = SpaceConfig::with_dof(dof);
        let p = DesignParams::random_sample(&mut ChaCha8Rng::seed_from_u64(seed), &s);
        let v = p.to_vector();
        prop_assert_eq!(v.len(), 2 * dof + 3);
        let back = DesignParams::from_vector(&v, &s).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_vector(), v);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>()) {
        let s = SpaceConfig::default();
        let a = DesignParams::random_sample(&mut ChaCha8Rng::seed_from_u64(seed), &s);
        let b = DesignParams::random_sample(&mut ChaCha8Rng::seed_from_u64(seed), &s);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn out_of_bounds_values_are_named(x in 1.0001f64..5.0, k in 0usize..4) {
        let s = SpaceConfig::default();
        let mut p = DesignParams::random_sample(&mut ChaCha8Rng::seed_from_u64(k as u64), &s);
        p.lengths[k] = x;
        let field = format!("lengths[{}]", k);
        let v = p.validate(&s);
        prop_assert!(v.iter().any(|v| v.field == field));
        p.lengths[k] = 0.1;
        p.origin[2] = -x;
        let v = p.validate(&s);
        prop_assert!(v.iter().any(|v| v.field == "origin.z"));
    }
}
