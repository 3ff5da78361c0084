//! Multi-objective Tree-structured Parzen Estimator over the mixed design space.
//!
//! Past trials are split into a "good" and a "bad" group by nondomination rank.
//! Each of the `2D+3` dimensions gets an independent Parzen estimator per group
//! (truncated Gaussian kernels for the continuous slots, smoothed category
//! frequencies for the joint types). Candidates are drawn from the good-group
//! model and the one with the highest density ratio `l(x)/g(x)` is returned.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf_inv, erfc};

use crate::design_space::{Bounds, DesignParams, JointType, SpaceConfig};
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationReport, ObjectiveValues};
use crate::pareto_metrics::{hypervolume_contributions, nondomination_ranks, RefPoint};

/// Which sampler produced a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Random,
    #[serde(rename = "BBO")]
    Bbo,
    #[serde(rename = "LLM")]
    Llm,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Source::Random => "Random",
            Source::Bbo => "BBO",
            Source::Llm => "LLM",
        })
    }
}

/// One evaluated design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: usize,
    pub source: Source,
    /// Set when an LLM slot failed and a BBO suggestion took its place.
    pub fallback: bool,
    pub params: DesignParams,
    pub objectives: ObjectiveValues,
    pub report: EvaluationReport,
}

/// Anything the sampler can learn from: a design and its objective values.
pub trait Observation {
    fn params(&self) -> &DesignParams;
    fn objectives(&self) -> ObjectiveValues;
}

impl Observation for TrialRecord {
    fn params(&self) -> &DesignParams {
        &self.params
    }
    fn objectives(&self) -> ObjectiveValues {
        self.objectives
    }
}

impl Observation for (DesignParams, ObjectiveValues) {
    fn params(&self) -> &DesignParams {
        &self.0
    }
    fn objectives(&self) -> ObjectiveValues {
        self.1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    /// Fraction of trials placed in the good group.
    pub gamma: f64,
    pub n_candidates: usize,
    /// Weight of the prior kernel / pseudo-count spread over categories.
    pub prior_weight: f64,
    /// Below this many trials, `suggest` samples uniformly.
    pub n_startup: usize,
    pub bandwidth_factor: f64,
    /// Lower bound on the kernel bandwidth as a fraction of the bound width.
    pub min_bandwidth_fraction: f64,
    pub reference: RefPoint,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_candidates: 24,
            prior_weight: 1.0,
            n_startup: 10,
            bandwidth_factor: 1.06,
            min_bandwidth_fraction: 1e-3,
            reference: RefPoint::default(),
        }
    }
}

impl TpeConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("tpe gamma must lie in (0, 1)".into()));
        }
        if self.n_candidates == 0 {
            return Err(Error::Config("tpe n_candidates must be at least 1".into()));
        }
        if !(self.prior_weight > 0.0) || !(self.min_bandwidth_fraction > 0.0) {
            return Err(Error::Config(
                "tpe prior_weight and min_bandwidth_fraction must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Number of good trials for `n` observations: `⌈γ·n⌉`.
pub fn good_count(n: usize, gamma: f64) -> usize {
    // The small offset keeps products like 0.3·10 from rounding up to 4.
    (((gamma * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Splits trials into (good, bad) index sets.
///
/// Whole nondomination ranks are taken in ascending order. The rank that
/// crosses the `⌈γ·n⌉` boundary is filled by descending hypervolume
/// contribution to that rank's front w.r.t. `reference`; equal contributions
/// (typically points beyond the reference) fall back to the contribution
/// w.r.t. a reference just past the worst observed values, then to trial order.
pub fn split_observations<T: Observation>(
    trials: &[T],
    gamma: f64,
    reference: RefPoint,
) -> (Vec<usize>, Vec<usize>) {
    let n = trials.len();
    let k = good_count(n, gamma);
    let objs: Vec<ObjectiveValues> = trials.iter().map(Observation::objectives).collect();
    let ranks = nondomination_ranks(&objs);
    let nadir = nadir_reference(&objs);

    let mut good = Vec::with_capacity(k);
    let mut rank = 0;
    while good.len() < k {
        let front: Vec<usize> = (0..n).filter(|&i| ranks[i] == rank).collect();
        if good.len() + front.len() <= k {
            good.extend(front);
        } else {
            let front_objs: Vec<ObjectiveValues> = front.iter().map(|&i| objs[i]).collect();
            let primary = hypervolume_contributions(&front_objs, reference);
            let secondary = hypervolume_contributions(&front_objs, nadir);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| {
                primary[b]
                    .total_cmp(&primary[a])
                    .then(secondary[b].total_cmp(&secondary[a]))
                    .then(a.cmp(&b))
            });
            let need = k - good.len();
            good.extend(order.into_iter().take(need).map(|i| front[i]));
        }
        rank += 1;
    }
    good.sort_unstable();
    let mut is_good = vec![false; n];
    for &i in &good {
        is_good[i] = true;
    }
    let bad = (0..n).filter(|&i| !is_good[i]).collect();
    (good, bad)
}

fn nadir_reference(objs: &[ObjectiveValues]) -> RefPoint {
    let finite_max = |f: fn(&ObjectiveValues) -> f64| {
        objs.iter()
            .map(f)
            .filter(|v| v.is_finite())
            .fold(0.0_f64, f64::max)
    };
    let a = finite_max(|o| o.e_pos);
    let b = finite_max(|o| o.e_torque);
    RefPoint([a * 1.1 + 1e-9, b * 1.1 + 1e-9])
}

/// Mixture of Gaussian kernels truncated to `bounds`.
#[derive(Clone, Debug)]
struct ParzenContinuous {
    bounds: Bounds,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    weights: Vec<f64>,
    /// Normalizing mass of each kernel inside the bounds.
    masses: Vec<f64>,
    total_weight: f64,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_inv_cdf(p: f64) -> f64 {
    SQRT_2 * erf_inv(2.0 * p - 1.0)
}

impl ParzenContinuous {
    fn fit(values: &[f64], kernel_weights: &[f64], bounds: Bounds, cfg: &TpeConfig) -> Self {
        let width = bounds.width();
        let mut mus = Vec::with_capacity(values.len() + 1);
        let mut sigmas = Vec::with_capacity(values.len() + 1);
        let mut weights = Vec::with_capacity(values.len() + 1);
        if !values.is_empty() {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let n = values.len() as f64;
            let h = ((hi - lo) * cfg.bandwidth_factor * n.powf(-0.2))
                .max(cfg.min_bandwidth_fraction * width);
            for (&v, &w) in values.iter().zip(kernel_weights) {
                mus.push(bounds.clamp(v));
                sigmas.push(h);
                weights.push(w);
            }
        }
        mus.push(bounds.mid());
        sigmas.push(width);
        weights.push(cfg.prior_weight);

        let masses = mus
            .iter()
            .zip(&sigmas)
            .map(|(&mu, &s)| {
                std_normal_cdf((bounds.hi - mu) / s) - std_normal_cdf((bounds.lo - mu) / s)
            })
            .collect();
        let total_weight = weights.iter().sum();
        Self {
            bounds,
            mus,
            sigmas,
            weights,
            masses,
            total_weight,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = pick_weighted(rng, &self.weights, self.total_weight);
        let (mu, s) = (self.mus[k], self.sigmas[k]);
        let a = std_normal_cdf((self.bounds.lo - mu) / s);
        let b = std_normal_cdf((self.bounds.hi - mu) / s);
        let u: f64 = rng.random();
        let p = (a + u * (b - a)).clamp(1e-300, 1.0 - 1e-16);
        self.bounds.clamp(mu + s * std_normal_inv_cdf(p))
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = (0..self.mus.len())
            .map(|k| {
                let z = (x - self.mus[k]) / self.sigmas[k];
                (self.weights[k] / self.total_weight).ln() - 0.5 * z * z
                    - (self.sigmas[k] * self.masses[k] * (2.0 * PI).sqrt()).ln()
            })
            .collect();
        log_sum_exp(&terms)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn pick_weighted<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Smoothed category frequencies: `(count_c + prior/K) / (n + prior)`.
#[derive(Clone, Debug)]
struct ParzenCategorical {
    alphabet: Vec<JointType>,
    probs: Vec<f64>,
}

impl ParzenCategorical {
    fn fit(values: &[JointType], weights: &[f64], alphabet: &[JointType], prior_weight: f64) -> Self {
        let k = alphabet.len() as f64;
        let counted: Vec<f64> = alphabet
            .iter()
            .map(|a| values.iter().zip(weights).filter(|(v, _)| *v == a).map(|(_, w)| w).sum())
            .collect();
        let n: f64 = counted.iter().sum();
        let probs = counted
            .iter()
            .map(|&c| (c + prior_weight / k) / (n + prior_weight))
            .collect();
        Self {
            alphabet: alphabet.to_vec(),
            probs,
        }
    }

    fn probability(&self, j: JointType) -> f64 {
        self.alphabet
            .iter()
            .position(|a| *a == j)
            .map_or(0.0, |i| self.probs[i])
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> JointType {
        self.alphabet[pick_weighted(rng, &self.probs, self.probs.iter().sum())]
    }
}

/// Kernel weights for the good group: each member's hypervolume contribution
/// within the group, scaled to mean 1 with a small floor. Uniform when no
/// member contributes (e.g. all beyond the reference).
fn good_weights<T: Observation>(trials: &[T], good: &[usize], reference: RefPoint) -> Vec<f64> {
    let objs: Vec<ObjectiveValues> = good.iter().map(|&i| trials[i].objectives()).collect();
    let c = hypervolume_contributions(&objs, reference);
    let max = c.iter().copied().fold(0.0_f64, f64::max);
    if !(max > 0.0) {
        return vec![1.0; good.len()];
    }
    let w: Vec<f64> = c.iter().map(|v| (v / max).max(WEIGHT_FLOOR)).collect();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v / mean).collect()
}

const WEIGHT_FLOOR: f64 = 1e-3;

/// Per-dimension good/bad model pair for the whole design space.
struct DensityModel {
    origin: Vec<(ParzenContinuous, ParzenContinuous)>,
    joints: Vec<(ParzenCategorical, ParzenCategorical)>,
    lengths: Vec<(ParzenContinuous, ParzenContinuous)>,
}

impl DensityModel {
    fn fit<T: Observation>(
        trials: &[T],
        good: &[usize],
        bad: &[usize],
        cfg: &TpeConfig,
        space: &SpaceConfig,
    ) -> Self {
        let good_w = good_weights(trials, good, cfg.reference);
        let bad_w = vec![1.0; bad.len()];
        let column = |idx: &[usize], w: &[f64], f: &dyn Fn(&DesignParams) -> Option<f64>| {
            idx.iter()
                .zip(w)
                .filter_map(|(&i, &w)| f(trials[i].params()).map(|v| (v, w)))
                .unzip::<f64, f64, Vec<f64>, Vec<f64>>()
        };
        let cont_pair = |f: &dyn Fn(&DesignParams) -> Option<f64>, b: Bounds| {
            let (gv, gw) = column(good, &good_w, f);
            let (bv, bw) = column(bad, &bad_w, f);
            (
                ParzenContinuous::fit(&gv, &gw, b, cfg),
                ParzenContinuous::fit(&bv, &bw, b, cfg),
            )
        };
        let origin = (0..3)
            .map(|k| cont_pair(&|p: &DesignParams| Some(p.origin[k]), space.origin_bounds[k]))
            .collect();
        let lengths = (0..space.dof)
            .map(|k| cont_pair(&|p: &DesignParams| p.lengths.get(k).copied(), space.length_bounds))
            .collect();
        let joints = (0..space.dof)
            .map(|k| {
                let col = |idx: &[usize], w: &[f64]| {
                    idx.iter()
                        .zip(w)
                        .filter_map(|(&i, &w)| trials[i].params().joints.get(k).map(|j| (*j, w)))
                        .unzip::<JointType, f64, Vec<JointType>, Vec<f64>>()
                };
                let ((gv, gw), (bv, bw)) = (col(good, &good_w), col(bad, &bad_w));
                (
                    ParzenCategorical::fit(&gv, &gw, &space.joint_types, cfg.prior_weight),
                    ParzenCategorical::fit(&bv, &bw, &space.joint_types, cfg.prior_weight),
                )
            })
            .collect();
        Self {
            origin,
            joints,
            lengths,
        }
    }

    fn sample_good<R: Rng + ?Sized>(&self, rng: &mut R) -> DesignParams {
        let o: Vec<f64> = self.origin.iter().map(|(l, _)| l.sample(rng)).collect();
        DesignParams {
            origin: [o[0], o[1], o[2]],
            joints: self.joints.iter().map(|(l, _)| l.sample(rng)).collect(),
            lengths: self.lengths.iter().map(|(l, _)| l.sample(rng)).collect(),
        }
    }

    /// `Σ_dims log l(x) − log g(x)`.
    fn log_ratio(&self, p: &DesignParams) -> f64 {
        let cont = |pairs: &[(ParzenContinuous, ParzenContinuous)], xs: &[f64]| -> f64 {
            pairs
                .iter()
                .zip(xs)
                .map(|((l, g), &x)| l.log_pdf(x) - g.log_pdf(x))
                .sum()
        };
        let cat: f64 = self
            .joints
            .iter()
            .zip(&p.joints)
            .map(|((l, g), &j)| l.probability(j).ln() - g.probability(j).ln())
            .sum();
        cont(&self.origin, &p.origin) + cont(&self.lengths, &p.lengths) + cat
    }
}

/// Proposes the next design. Falls back to uniform sampling until
/// `cfg.n_startup` trials exist. The result always lies inside `space`.
pub fn suggest<R: Rng + ?Sized, T: Observation>(
    rng: &mut R,
    trials: &[T],
    cfg: &TpeConfig,
    space: &SpaceConfig,
) -> DesignParams {
    if trials.is_empty() || trials.len() < cfg.n_startup {
        return DesignParams::random_sample(rng, space);
    }
    let (good, bad) = split_observations(trials, cfg.gamma, cfg.reference);
    let model = DensityModel::fit(trials, &good, &bad, cfg, space);
    let mut best: Option<(f64, DesignParams)> = None;
    for _ in 0..cfg.n_candidates {
        let cand = model.sample_good(rng);
        let score = model.log_ratio(&cand);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, cand));
        }
    }
    best.map(|(_, p)| p)
        .unwrap_or_else(|| DesignParams::random_sample(rng, space))
}

/// Probability the good-group model assigns to joint type `j` in slot `slot`.
/// Exposed for diagnostics and tests.
pub fn good_joint_probability<T: Observation>(
    trials: &[T],
    cfg: &TpeConfig,
    space: &SpaceConfig,
    slot: usize,
    j: JointType,
) -> f64 {
    let (good, bad) = split_observations(trials, cfg.gamma, cfg.reference);
    DensityModel::fit(trials, &good, &bad, cfg, space).joints[slot]
        .0
        .probability(j)
}
