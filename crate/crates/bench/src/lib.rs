//! Fixtures shared by the criterion benchmarks.

use robodesign_core::{DesignParams, JointType, TargetSet};

pub fn five_targets() -> TargetSet {
    TargetSet::new(
        "bench",
        vec![
            [0.25, 0.1, 0.35],
            [0.25, -0.1, 0.35],
            [-0.2, 0.15, 0.4],
            [-0.2, -0.15, 0.4],
            [0.0, 0.0, 0.55],
        ],
    )
    .expect("static targets")
}

pub fn ypr_p_arm() -> DesignParams {
    DesignParams {
        origin: [0.0, 0.0, 0.0],
        joints: vec![JointType::Yaw, JointType::Pitch, JointType::Roll, JointType::Pitch],
        lengths: vec![0.2, 0.2, 0.2, 0.15],
    }
}
