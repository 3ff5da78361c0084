//! Reference implementations used as test oracles. They rebuild the chain
//! with 4×4 homogeneous transforms instead of reusing library code.
#![allow(dead_code)]

use nalgebra::{Matrix4, Vector3, Vector4};
use rand::Rng;
use robodesign_core::{DesignParams, JointType, SpaceConfig};

fn translation(x: f64, y: f64, z: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(0, 3)] = x;
    m[(1, 3)] = y;
    m[(2, 3)] = z;
    m
}

/// Elementary rotation about x, y or z written out by hand.
fn rotation(axis: usize, a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    let mut m = Matrix4::identity();
    let (i, j) = match axis {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    m[(i, i)] = c;
    m[(j, j)] = c;
    m[(i, j)] = -s;
    m[(j, i)] = s;
    m
}

pub fn axis_index(j: JointType) -> usize {
    match j {
        JointType::Roll => 0,
        JointType::Pitch => 1,
        JointType::Yaw => 2,
    }
}

/// World frames of every joint (before its rotation is applied) plus the tip.
pub fn frames(p: &DesignParams, q: &[f64]) -> (Vec<Matrix4<f64>>, Matrix4<f64>) {
    let mut t = translation(p.origin[0], p.origin[1], p.origin[2]);
    let mut out = Vec::new();
    for ((j, &len), &a) in p.joints.iter().zip(&p.lengths).zip(q) {
        out.push(t);
        t = t * rotation(axis_index(*j), a) * translation(0.0, 0.0, len);
    }
    (out, t)
}

fn point(m: &Matrix4<f64>, local: Vector4<f64>) -> Vector3<f64> {
    let v = m * local;
    Vector3::new(v.x, v.y, v.z)
}

pub fn tip(p: &DesignParams, q: &[f64]) -> Vector3<f64> {
    let (_, t) = frames(p, q);
    point(&t, Vector4::new(0.0, 0.0, 0.0, 1.0))
}

/// Potential energy of uniform rods with the given density and COM fraction.
pub fn potential(p: &DesignParams, q: &[f64], g: f64, density: f64, com: f64) -> f64 {
    let (fs, _) = frames(p, q);
    fs.iter()
        .zip(&p.joints)
        .zip(&p.lengths)
        .zip(q)
        .map(|(((f, j), &len), &a)| {
            let rotated = f * rotation(axis_index(*j), a);
            let c = point(&rotated, Vector4::new(0.0, 0.0, com * len, 1.0));
            density * len * g * c.z
        })
        .sum()
}

pub fn random_design<R: Rng>(rng: &mut R, dof: usize) -> DesignParams {
    let s = SpaceConfig::with_dof(dof);
    DesignParams {
        origin: std::array::from_fn(|_| rng.random_range(-1.0..=1.0)),
        joints: (0..dof)
            .map(|_| JointType::ALL[rng.random_range(0..3)])
            .collect(),
        lengths: (0..dof)
            .map(|_| rng.random_range(s.length_bounds.lo..=s.length_bounds.hi))
            .collect(),
    }
}

pub fn random_posture<R: Rng>(rng: &mut R, dof: usize) -> Vec<f64> {
    (0..dof).map(|_| rng.random_range(-2.4..=2.4)).collect()
}
