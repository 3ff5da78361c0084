use std::sync::OnceLock;

use regex::Regex;

use crate::design_space::{DesignParams, JointType, SpaceConfig};

fn bracket_groups() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").expect("static regex"))
}

fn items(group: &str) -> Vec<&str> {
    group
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '\'' || c == '"' || c == '`').trim())
        .filter(|s| !s.is_empty())
        .collect()
}

fn numbers(group: &str, expected: usize, what: &str) -> Result<Vec<f64>, String> {
    let values = items(group)
        .into_iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{what}: '{s}' is not a finite number"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(format!("{what}: expected {expected} values, got {}", values.len()));
    }
    Ok(values)
}

/// Extracts a design from the last three `[...]` groups of `text`: origin
/// numbers, joint letters (R/P/Y or full names) and link lengths. Numbers are
/// clamped into the bounds of `space`.
pub fn parse_design(text: &str, space: &SpaceConfig) -> Result<DesignParams, String> {
    let groups: Vec<&str> = bracket_groups()
        .captures_iter(text)
        .map(|c| c.get(1).map_or("", |m| m.as_str()))
        .collect();
    if groups.len() < 3 {
        return Err(format!("expected three bracketed lists, found {}", groups.len()));
    }
    let [origin, joints, lengths] = [
        groups[groups.len() - 3],
        groups[groups.len() - 2],
        groups[groups.len() - 1],
    ];

    let o = numbers(origin, 3, "origin")?;
    let joint_items = items(joints);
    if joint_items.len() != space.dof {
        return Err(format!(
            "joints: expected {} entries, got {}",
            space.dof,
            joint_items.len()
        ));
    }
    let joints = joint_items
        .iter()
        .map(|s| {
            JointType::from_token(s)
                .filter(|j| space.joint_types.contains(j))
                .ok_or_else(|| format!("joints: '{s}' is not an allowed joint type"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let l = numbers(lengths, space.dof, "lengths")?;

    Ok(DesignParams {
        origin: [
            space.origin_bounds[0].clamp(o[0]),
            space.origin_bounds[1].clamp(o[1]),
            space.origin_bounds[2].clamp(o[2]),
        ],
        joints,
        lengths: l.into_iter().map(|v| space.length_bounds.clamp(v)).collect(),
    })
}
