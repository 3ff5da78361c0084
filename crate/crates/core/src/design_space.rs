//! Design-parameter space of a serial arm: base origin, joint types and link
//! lengths, plus the flat `2D+3` encoding used by the samplers and URDF export.

use std::fmt;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain_kinematics::{GravityModel, JOINT_LIMIT};
use crate::error::{Error, Result};

/// Revolute joint type. Roll, Pitch and Yaw rotate about the joint's local
/// x, y and z axes respectively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JointType {
    #[serde(rename = "R", alias = "Roll")]
    Roll,
    #[serde(rename = "P", alias = "Pitch")]
    Pitch,
    #[serde(rename = "Y", alias = "Yaw")]
    Yaw,
}

impl JointType {
    pub const ALL: [JointType; 3] = [JointType::Roll, JointType::Pitch, JointType::Yaw];

    /// Code used in the flat parameter vector.
    pub fn code(self) -> u8 {
        match self {
            JointType::Roll => 0,
            JointType::Pitch => 1,
            JointType::Yaw => 2,
        }
    }

    pub fn from_code(code: f64) -> Result<Self> {
        match code {
            c if c == 0.0 => Ok(JointType::Roll),
            c if c == 1.0 => Ok(JointType::Pitch),
            c if c == 2.0 => Ok(JointType::Yaw),
            c => Err(Error::InvalidTypeCode(c)),
        }
    }

    pub fn letter(self) -> char {
        match self {
            JointType::Roll => 'R',
            JointType::Pitch => 'P',
            JointType::Yaw => 'Y',
        }
    }

    /// Accepts single letters (`R`, `p`) and full names (`Yaw`), case-insensitive.
    pub fn from_token(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "r" | "roll" => Some(JointType::Roll),
            "p" | "pitch" => Some(JointType::Pitch),
            "y" | "yaw" => Some(JointType::Yaw),
            _ => None,
        }
    }

    /// Rotation axis in the joint's local frame.
    pub fn local_axis(self) -> [f64; 3] {
        match self {
            JointType::Roll => [1.0, 0.0, 0.0],
            JointType::Pitch => [0.0, 1.0, 0.0],
            JointType::Yaw => [0.0, 0.0, 1.0],
        }
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi
    }
}

/// Shape and bounds of the design space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub dof: usize,
    pub origin_bounds: [Bounds; 3],
    pub length_bounds: Bounds,
    /// Joint types the samplers may choose from.
    pub joint_types: Vec<JointType>,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self::with_dof(4)
    }
}

impl SpaceConfig {
    pub fn with_dof(dof: usize) -> Self {
        Self {
            dof,
            origin_bounds: [Bounds::new(-1.0, 1.0); 3],
            length_bounds: Bounds::new(0.03, 0.3),
            joint_types: JointType::ALL.to_vec(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.dof == 0 {
            return Err(Error::Config("joint count must be at least 1".into()));
        }
        if !self.origin_bounds.iter().all(Bounds::is_valid) || !self.length_bounds.is_valid() {
            return Err(Error::Config("bounds must be nonempty finite intervals".into()));
        }
        if self.length_bounds.lo <= 0.0 {
            return Err(Error::Config("link lengths must be positive".into()));
        }
        if self.joint_types.is_empty() {
            return Err(Error::Config("joint-type alphabet is empty".into()));
        }
        Ok(())
    }

    /// Length of the flat parameter vector, `2D+3`.
    pub fn vector_len(&self) -> usize {
        2 * self.dof + 3
    }
}

/// One candidate robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub origin: [f64; 3],
    pub joints: Vec<JointType>,
    pub lengths: Vec<f64>,
}

/// A single bound or shape violation, naming the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

impl DesignParams {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Every violation of `cfg`. An empty list means the design is valid.
    pub fn validate(&self, cfg: &SpaceConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field: String, message: String| out.push(Violation { field, message });

        for (k, (&o, b)) in self.origin.iter().zip(&cfg.origin_bounds).enumerate() {
            if !o.is_finite() || !b.contains(o) {
                push(
                    format!("origin.{}", AXIS_NAMES[k]),
                    format!("{o} outside [{}, {}]", b.lo, b.hi),
                );
            }
        }
        if self.joints.len() != cfg.dof {
            push(
                "joints".into(),
                format!("has {} entries, expected {}", self.joints.len(), cfg.dof),
            );
        }
        if self.lengths.len() != cfg.dof {
            push(
                "lengths".into(),
                format!("has {} entries, expected {}", self.lengths.len(), cfg.dof),
            );
        }
        for (k, j) in self.joints.iter().enumerate() {
            if !cfg.joint_types.contains(j) {
                push(format!("joints[{k}]"), format!("type {j} not in the allowed alphabet"));
            }
        }
        let lb = cfg.length_bounds;
        for (k, &l) in self.lengths.iter().enumerate() {
            if !l.is_finite() || !lb.contains(l) {
                push(format!("lengths[{k}]"), format!("{l} outside [{}, {}]", lb.lo, lb.hi));
            }
        }
        out
    }

    pub fn ensure_valid(&self, cfg: &SpaceConfig) -> Result<()> {
        let v = self.validate(cfg);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    /// Flat encoding `[O(3), M(D) as type codes, L(D)]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dof() + 3);
        v.extend_from_slice(&self.origin);
        v.extend(self.joints.iter().map(|j| f64::from(j.code())));
        v.extend_from_slice(&self.lengths);
        v
    }

    /// Inverse of [`DesignParams::to_vector`]. Checks shape and type codes only;
    /// call [`DesignParams::validate`] for bounds.
    pub fn from_vector(vec: &[f64], cfg: &SpaceConfig) -> Result<Self> {
        let d = cfg.dof;
        if vec.len() != cfg.vector_len() {
            return Err(Error::VectorLength {
                expected: cfg.vector_len(),
                got: vec.len(),
                dof: d,
            });
        }
        let joints = vec[3..3 + d]
            .iter()
            .map(|&c| JointType::from_code(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            origin: [vec[0], vec[1], vec[2]],
            joints,
            lengths: vec[3 + d..].to_vec(),
        })
    }

    /// Uniform draw over every continuous interval and the joint-type alphabet.
    pub fn random_sample<R: Rng + ?Sized>(rng: &mut R, cfg: &SpaceConfig) -> Self {
        let origin = [
            sample_uniform(rng, cfg.origin_bounds[0]),
            sample_uniform(rng, cfg.origin_bounds[1]),
            sample_uniform(rng, cfg.origin_bounds[2]),
        ];
        let joints = (0..cfg.dof)
            .map(|_| cfg.joint_types[rng.random_range(0..cfg.joint_types.len())])
            .collect();
        let lengths = (0..cfg.dof)
            .map(|_| sample_uniform(rng, cfg.length_bounds))
            .collect();
        Self {
            origin,
            joints,
            lengths,
        }
    }

    /// Parses a TOML table with `origin`, `joints` and `lengths` keys. Shape
    /// is checked here; bounds are left to [`DesignParams::validate`].
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if p.joints.len() != p.lengths.len() {
            return Err(Error::Parse(format!(
                "joints has {} entries but lengths has {}",
                p.joints.len(),
                p.lengths.len()
            )));
        }
        Ok(p)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Joint sequence as letters, e.g. `Y-P-R-P`.
    pub fn joint_string(&self) -> String {
        self.joints
            .iter()
            .map(|j| j.letter().to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    /// URDF 1.0 document for this design with the default gravity model.
    pub fn emit_urdf(&self, cfg: &SpaceConfig) -> Result<String> {
        self.emit_urdf_with(cfg, &GravityModel::default())
    }

    pub fn emit_urdf_with(&self, cfg: &SpaceConfig, gravity: &GravityModel) -> Result<String> {
        self.ensure_valid(cfg)?;
        Ok(write_urdf(self, gravity))
    }
}

fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, b: Bounds) -> f64 {
    rng.random_range(b.lo..=b.hi)
}

pub(crate) const URDF_LINK_RADIUS: f64 = 0.02;

fn write_urdf(p: &DesignParams, gravity: &GravityModel) -> String {
    let mut s = String::new();
    let [ox, oy, oz] = p.origin;
    let _ = writeln!(s, r#"<?xml version="1.0"?>"#);
    let _ = writeln!(s, r#"<robot name="arm_{}">"#, p.joint_string().replace('-', ""));
    let _ = writeln!(s, r#"  <link name="world"/>"#);
    let _ = writeln!(s, r#"  <link name="base_link"/>"#);
    let _ = writeln!(s, r#"  <joint name="world_to_base" type="fixed">"#);
    let _ = writeln!(s, r#"    <parent link="world"/>"#);
    let _ = writeln!(s, r#"    <child link="base_link"/>"#);
    let _ = writeln!(s, r#"    <origin xyz="{ox} {oy} {oz}" rpy="0 0 0"/>"#);
    let _ = writeln!(s, r#"  </joint>"#);

    let mut parent = "base_link".to_string();
    let mut offset = 0.0;
    for (j, (joint, &len)) in p.joints.iter().zip(&p.lengths).enumerate() {
        let idx = j + 1;
        let link = format!("link{idx}");
        let [ax, ay, az] = joint.local_axis();
        let mass = gravity.linear_density * len;
        let com = gravity.com_fraction * len;
        let _ = writeln!(s, r#"  <joint name="joint{idx}" type="revolute">"#);
        let _ = writeln!(s, r#"    <parent link="{parent}"/>"#);
        let _ = writeln!(s, r#"    <child link="{link}"/>"#);
        let _ = writeln!(s, r#"    <origin xyz="0 0 {offset}" rpy="0 0 0"/>"#);
        let _ = writeln!(s, r#"    <axis xyz="{ax} {ay} {az}"/>"#);
        let _ = writeln!(
            s,
            r#"    <limit lower="{}" upper="{}" effort="100" velocity="1"/>"#,
            -JOINT_LIMIT, JOINT_LIMIT
        );
        let _ = writeln!(s, r#"  </joint>"#);
        let _ = writeln!(s, r#"  <link name="{link}">"#);
        let _ = writeln!(s, r#"    <inertial>"#);
        let _ = writeln!(s, r#"      <origin xyz="0 0 {com}" rpy="0 0 0"/>"#);
        let _ = writeln!(s, r#"      <mass value="{mass}"/>"#);
        // Thin rod about its center of mass.
        let i_perp = mass * len * len / 12.0;
        let _ = writeln!(
            s,
            r#"      <inertia ixx="{i_perp}" ixy="0" ixz="0" iyy="{i_perp}" iyz="0" izz="0"/>"#
        );
        let _ = writeln!(s, r#"    </inertial>"#);
        let _ = writeln!(s, r#"    <visual>"#);
        let _ = writeln!(s, r#"      <origin xyz="0 0 {}" rpy="0 0 0"/>"#, 0.5 * len);
        let _ = writeln!(s, r#"      <geometry>"#);
        let _ = writeln!(
            s,
            r#"        <cylinder radius="{URDF_LINK_RADIUS}" length="{len}"/>"#
        );
        let _ = writeln!(s, r#"      </geometry>"#);
        let _ = writeln!(s, r#"    </visual>"#);
        let _ = writeln!(s, r#"  </link>"#);
        parent = link;
        offset = len;
    }
    let _ = writeln!(s, r#"  <link name="end_effector"/>"#);
    let _ = writeln!(s, r#"  <joint name="end_effector_joint" type="fixed">"#);
    let _ = writeln!(s, r#"    <parent link="{parent}"/>"#);
    let _ = writeln!(s, r#"    <child link="end_effector"/>"#);
    let _ = writeln!(s, r#"    <origin xyz="0 0 {offset}" rpy="0 0 0"/>"#);
    let _ = writeln!(s, r#"  </joint>"#);
    let _ = writeln!(s, "</robot>");
    s
}
