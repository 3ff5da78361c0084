//! Pareto dominance, front extraction and two-objective hypervolume.
//! Both objectives are minimized.

use serde::{Deserialize, Serialize};

use crate::evaluation::ObjectiveValues;

/// `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: &ObjectiveValues, b: &ObjectiveValues) -> bool {
    a.e_pos <= b.e_pos && a.e_torque <= b.e_torque && (a.e_pos < b.e_pos || a.e_torque < b.e_torque)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub objectives: ObjectiveValues,
    pub trial_id: usize,
}

impl FrontPoint {
    pub fn new(trial_id: usize, objectives: ObjectiveValues) -> Self {
        Self {
            objectives,
            trial_id,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefPoint(pub [f64; 2]);

impl Default for RefPoint {
    fn default() -> Self {
        RefPoint([5.0, 5.0])
    }
}

/// Points not dominated by any other point, in input order. Duplicates of a
/// nondominated pair are all kept.
pub fn pareto_front(points: &[FrontPoint]) -> Vec<FrontPoint> {
    let mut sorted: Vec<usize> = (0..points.len()).collect();
    sorted.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a].objectives, &points[b].objectives);
        pa.e_pos
            .total_cmp(&pb.e_pos)
            .then(pa.e_torque.total_cmp(&pb.e_torque))
    });
    // After sorting by (e_pos, e_torque) a point is dominated iff some earlier
    // point with a different pair has e_torque <= its own.
    let mut keep = vec![false; points.len()];
    let mut best_torque = f64::INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let head = points[sorted[i]].objectives;
        let mut j = i;
        while j < sorted.len() && points[sorted[j]].objectives == head {
            j += 1;
        }
        if head.e_torque < best_torque {
            for &k in &sorted[i..j] {
                keep[k] = true;
            }
            best_torque = head.e_torque;
        }
        i = j;
    }
    points
        .iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(*p))
        .collect()
}

/// Area dominated by `points` and bounded by `reference`. Points that are not
/// strictly better than the reference in both objectives contribute nothing.
pub fn hypervolume_2d(points: &[FrontPoint], reference: RefPoint) -> f64 {
    let [r0, r1] = reference.0;
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .map(|p| p.objectives.as_array())
        .filter(|p| p[0] < r0 && p[1] < r1)
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = r1;
    for [x, y] in pts {
        if y < ceiling {
            area += (r0 - x) * (ceiling - y);
            ceiling = y;
        }
    }
    area
}

/// Nondomination rank of every point: 0 for the Pareto front, 1 for the
/// front of the remainder, and so on.
pub fn nondomination_ranks(objs: &[ObjectiveValues]) -> Vec<usize> {
    let n = objs.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&objs[i], &objs[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        r += 1;
    }
    rank
}

/// Exclusive hypervolume contribution of each point: `HV(all) − HV(all \ {i})`.
pub fn hypervolume_contributions(objs: &[ObjectiveValues], reference: RefPoint) -> Vec<f64> {
    let pts: Vec<FrontPoint> = objs
        .iter()
        .enumerate()
        .map(|(i, o)| FrontPoint::new(i, *o))
        .collect();
    let total = hypervolume_2d(&pts, reference);
    (0..pts.len())
        .map(|i| {
            let rest: Vec<FrontPoint> = pts
                .iter()
                .enumerate()
                .filter_map(|(k, p)| (k != i).then_some(*p))
                .collect();
            (total - hypervolume_2d(&rest, reference)).max(0.0)
        })
        .collect()
}

/// Running nondominated set, updated one point at a time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    members: Vec<FrontPoint>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns whether the point entered the archive.
    pub fn insert(&mut self, point: FrontPoint) -> bool {
        if self
            .members
            .iter()
            .any(|m| dominates(&m.objectives, &point.objectives))
        {
            return false;
        }
        self.members
            .retain(|m| !dominates(&point.objectives, &m.objectives));
        self.members.push(point);
        true
    }

    /// Members ordered by trial id.
    pub fn members(&self) -> Vec<FrontPoint> {
        let mut m = self.members.clone();
        m.sort_by_key(|p| p.trial_id);
        m
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn hypervolume(&self, reference: RefPoint) -> f64 {
        hypervolume_2d(&self.members(), reference)
    }
}
