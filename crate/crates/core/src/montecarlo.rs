//! Monte Carlo simulation of the censored Poisson field.
//!
//! A full field around the transponder holds millions of users, so by
//! default each trial simulates exactly only the users whose interference
//! could exceed a cutoff `ε` (chosen so that about [`DEFAULT_POINT_BUDGET`]
//! of them are expected) and replaces the remaining sum of small terms by a
//! Gamma variate with the same mean and variance. Those two moments come
//! from a one-dimensional integral over the radius of a bivariate normal
//! probability, a route independent of the analytic engine.
//! [`PointBudget::Exact`] simulates every user.
//!
//! Each trial draws from its own ChaCha8 stream, so results do not depend
//! on the number of worker threads.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::NumericError;
use crate::quadrature::{integrate, Tolerance};
use crate::scenario::{AirborneScenario, TransponderScenario};
use crate::special::{bvn_cdf, norm_cdf, norm_interval, norm_isf, norm_quantile, norm_sf};
use crate::summation::NeumaierSum;

/// Expected number of exactly simulated users per trial.
pub const DEFAULT_POINT_BUDGET: f64 = 1_000.0;
/// Lower integration limit in `ln r`, in units of `σ/α` below the peak.
const TAIL_WIDTH: f64 = 14.0;
/// Stream-key offset separating compensator draws from point draws.
const COMPENSATOR_KEY: u64 = 0x9e37_79b9_7f4a_7c15;
const Z95: f64 = 1.959_963_984_540_054;

/// How much of each field is simulated point by point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointBudget {
    /// Every user of the field.
    Exact,
    /// About this many users per trial, the rest by moment-matched compensator.
    Points(f64),
}

impl Default for PointBudget {
    fn default() -> Self {
        PointBudget::Points(DEFAULT_POINT_BUDGET)
    }
}

/// Whether trials run on the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
    pub budget: PointBudget,
    pub execution: Execution,
}

impl McOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            budget: PointBudget::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_budget(mut self, budget: PointBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Per-trial aggregate interference in mW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSample {
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub scenario_digest: String,
}

/// Fraction of trials above a threshold with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
    pub exceedances: usize,
    pub trials: usize,
}

impl TailEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

impl McSample {
    pub fn mean(&self) -> f64 {
        self.values.iter().copied().collect::<NeumaierSum>().total() / self.values.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let ss = self
            .values
            .iter()
            .map(|v| (v - m) * (v - m))
            .collect::<NeumaierSum>()
            .total();
        ss / (self.values.len() as f64 - 1.0)
    }

    /// Standard error of the sample mean.
    pub fn mean_standard_error(&self) -> f64 {
        (self.variance() / self.values.len() as f64).sqrt()
    }

    /// Standard error of the sample variance, from the fourth central moment.
    pub fn variance_standard_error(&self) -> f64 {
        let n = self.values.len() as f64;
        let m = self.mean();
        let v = self.variance();
        let m4 = self
            .values
            .iter()
            .map(|x| (x - m).powi(4))
            .collect::<NeumaierSum>()
            .total()
            / n;
        ((m4 - v * v * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn empirical_tail(&self, threshold_mw: f64) -> TailEstimate {
        empirical_tail(self, threshold_mw)
    }

    /// Raw export: `#` header lines with the reproduction keys, then one
    /// value per line at full precision.
    pub fn write_export<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# seed = {}", self.seed)?;
        writeln!(w, "# trials = {}", self.trials)?;
        writeln!(w, "# scenario_digest = {}", self.scenario_digest)?;
        for v in &self.values {
            writeln!(w, "{v:.16e}")?;
        }
        Ok(())
    }
}

/// Empirical quantile of sorted data (linear interpolation between order
/// statistics).
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

/// `Pr[I_a > threshold]` estimated from a sample, with a Wilson interval.
pub fn empirical_tail(sample: &McSample, threshold_mw: f64) -> TailEstimate {
    let n = sample.values.len();
    let k = sample.values.iter().filter(|&&v| v > threshold_mw).count();
    let (lower, upper) = wilson_interval(k, n, Z95);
    TailEstimate {
        probability: k as f64 / n as f64,
        lower,
        upper,
        exceedances: k,
        trials: n,
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if k == 0 {
        return (0.0, z * z / (n as f64 + z * z));
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Radii of a homogeneous Poisson field on an annulus.
pub fn sample_annulus_ppp<R: Rng + ?Sized>(
    lambda: f64,
    r_min: f64,
    r_max: f64,
    rng: &mut R,
) -> Result<Vec<f64>, NumericError> {
    if !(lambda >= 0.0 && r_min >= 0.0 && r_min < r_max) {
        return Err(NumericError::Domain(format!(
            "need lambda >= 0 and 0 <= r_min < r_max, got {lambda}, [{r_min}, {r_max}]"
        )));
    }
    let (a, b) = (r_min * r_min, r_max * r_max);
    let count = poisson(lambda * std::f64::consts::PI * (b - a), rng)?;
    Ok((0..count)
        .map(|_| (a + rng.random::<f64>() * (b - a)).sqrt())
        .collect())
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64, NumericError> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| NumericError::Domain(format!("Poisson({mean}): {e}")))?;
    Ok(d.sample(rng) as u64)
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn compensator_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    trial_rng(seed ^ COMPENSATOR_KEY, trial)
}

fn run_trials<F>(trials: usize, execution: Execution, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..trials).into_par_iter().map(f).collect(),
        _ => (0..trials).map(f).collect(),
    }
}

/// Moment-matched Gamma stand-in for the sum of the small terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compensator {
    pub mean: f64,
    pub variance: f64,
    law: Option<Gamma<f64>>,
}

impl Compensator {
    fn new(mean: f64, variance: f64) -> Result<Self, NumericError> {
        let law = if mean > 0.0 && variance > 0.0 {
            Some(
                Gamma::new(mean * mean / variance, variance / mean)
                    .map_err(|e| NumericError::Domain(format!("compensator law: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            mean,
            variance,
            law,
        })
    }

    fn none() -> Self {
        Self {
            mean: 0.0,
            variance: 0.0,
            law: None,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            Some(g) => g.sample(rng),
            None => self.mean,
        }
    }
}

/// Cumulant `n` of the sum of `r^-α y` over users with `r^-α y <= ε` that
/// transmit under the normalized threshold `Î`, both given by their logs.
/// Either may be `+∞`.
pub fn small_term_cumulant(
    n: u32,
    s: &TransponderScenario,
    ln_i_hat: f64,
    ln_eps: f64,
) -> Result<f64, NumericError> {
    let nf = f64::from(n);
    let alpha = s.alpha;
    let sigma = s.sigma_ln();
    let rho = s.rho;
    let ln_r_max = s.r_max_km.ln();
    if s.lambda_su == 0.0 || ln_i_hat == f64::NEG_INFINITY || ln_eps == f64::NEG_INFINITY {
        return Ok(0.0);
    }

    let c_a = ln_eps - nf * sigma * sigma;
    let c_b = ln_i_hat - nf * rho * sigma * sigma;
    let peak_t = |c: f64| ((2.0 - nf * alpha) * sigma * sigma / alpha - c) / alpha;
    let mut t_lo = f64::NEG_INFINITY;
    for c in [c_a, c_b] {
        if c.is_finite() {
            t_lo = t_lo.max(peak_t(c) - TAIL_WIDTH * sigma / alpha);
        }
    }
    if s.r_min_km > 0.0 {
        t_lo = t_lo.max(s.r_min_km.ln());
    }
    if !t_lo.is_finite() {
        return Err(NumericError::Domain(
            "small-term cumulant diverges without censoring, cutoff or exclusion".into(),
        ));
    }
    if t_lo >= ln_r_max {
        return Ok(0.0);
    }

    let integrand = |t: f64| {
        let a = (c_a + alpha * t) / sigma;
        let b = (c_b + alpha * t) / sigma;
        ((2.0 - nf * alpha) * t).exp() * bvn_cdf(a, b, rho)
    };
    let peak = (0..=64)
        .map(|i| integrand(t_lo + (ln_r_max - t_lo) * f64::from(i) / 64.0))
        .fold(0.0, f64::max);
    let tol = Tolerance::new(1e-13 * peak * (ln_r_max - t_lo), 1e-10);
    let value = integrate(integrand, t_lo, ln_r_max, tol)?.value;
    Ok(2.0 * std::f64::consts::PI * s.lambda_su * (nf * nf * sigma * sigma / 2.0).exp() * value)
}

/// A user seen in a traced trial, powers in mW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub r_km: f64,
    /// Interference the user estimates on the sensing channel.
    pub sensed_mw: f64,
    /// Interference it would cause at the victim.
    pub interference_mw: f64,
    pub transmits: bool,
}

/// One trial with every exactly simulated user.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub interferers: Vec<Interferer>,
    pub compensator_mw: f64,
    pub total_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Envelope {
    /// Proposal weight `e^{q(u - ln ε)}`, the full reach of the cutoff.
    Reach,
    /// `e^{q(u - ln ε)} - e^{q(u - ln Î)}`, the band between cutoff and threshold.
    Band,
    /// `R² - r_o²`, the whole annulus.
    Annulus,
}

/// A slice of `u = ln y` over which candidates are proposed from one normal.
#[derive(Debug, Clone, Copy)]
struct Piece {
    envelope: Envelope,
    /// Standardized bounds of `u` about the proposal mean.
    z: (f64, f64),
    kept: f64,
    mean_count: f64,
}

impl Piece {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kept > 0.25 {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                if z > self.z.0 && z <= self.z.1 {
                    return z;
                }
            }
        }
        truncated_normal(self.z.0, self.z.1, rng.random::<f64>())
    }
}

#[derive(Debug, Clone)]
enum FieldMode {
    Silent,
    Exact {
        mean_count: f64,
    },
    /// Users with `ε < r^-α y <= band` simulated, the rest compensated.
    Split {
        ln_eps: f64,
        /// `+∞` unless `ρ = 1`, where users above `Î` never transmit.
        ln_band: f64,
        pieces: Vec<Piece>,
        compensator: Compensator,
    },
}

/// Precomputed sampling plan for one transponder scenario and threshold.
#[derive(Debug, Clone)]
pub struct TransponderPlan {
    scale: f64,
    alpha: f64,
    sigma: f64,
    rho: f64,
    cond_sd: f64,
    ln_i_hat: f64,
    r_o2: f64,
    r_max2: f64,
    expected_points: f64,
    mode: FieldMode,
}

/// Expected users per trial with `r^-α y > ε` on the annulus.
fn count_above(s: &TransponderScenario, ln_eps: f64) -> f64 {
    if ln_eps == f64::INFINITY {
        return 0.0;
    }
    let sigma = s.sigma_ln();
    let q = 2.0 / s.alpha;
    let r_o2 = s.r_min_km * s.r_min_km;
    let r_max2 = s.r_max_km * s.r_max_km;
    let area = std::f64::consts::PI * s.lambda_su * (r_max2 - r_o2);
    if ln_eps == f64::NEG_INFINITY {
        return area;
    }
    let u_o = ln_eps + s.alpha * s.r_min_km.ln();
    let u_r = ln_eps + s.alpha * s.r_max_km.ln();
    let m = q * sigma * sigma;
    let lo = (-q * ln_eps + 0.5 * q * q * sigma * sigma).exp()
        * norm_interval((u_o - m) / sigma, (u_r - m) / sigma)
        - r_o2 * norm_interval(u_o / sigma, u_r / sigma);
    let hi = (r_max2 - r_o2) * norm_sf(u_r / sigma);
    (std::f64::consts::PI * s.lambda_su * (lo.max(0.0) + hi)).min(area)
}

/// Solves `f(ln ε) = target` for a decreasing `f` by bisection.
fn solve_cutoff(target: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) < target && lo > -1e4 {
        lo = 2.0 * lo - 1.0;
    }
    while f(hi) > target && hi < 1e4 {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Proposal pieces covering `{(u, r²): ε < e^u r^-α <= e^band}` on the annulus.
fn build_pieces(s: &TransponderScenario, ln_eps: f64, ln_band: f64) -> Vec<Piece> {
    let sigma = s.sigma_ln();
    let alpha = s.alpha;
    let q = 2.0 / alpha;
    let lambda_pi = std::f64::consts::PI * s.lambda_su;
    let r_o2 = s.r_min_km * s.r_min_km;
    let r_max2 = s.r_max_km * s.r_max_km;
    let ln_r_o = s.r_min_km.ln();
    let ln_r = s.r_max_km.ln();
    // u at which the reach of the cutoff / band hits r_o and R.
    let edge = |level: f64, ln_radius: f64| {
        if level.is_infinite() {
            level
        } else {
            level + alpha * ln_radius
        }
    };
    let (e1, e2) = (edge(ln_eps, ln_r_o), edge(ln_eps, ln_r));
    let (i1, i2) = (edge(ln_band, ln_r_o), edge(ln_band, ln_r));
    let tilt = q * sigma * sigma;
    let tilt_gain = (-q * ln_eps + 0.5 * q * q * sigma * sigma).exp();

    let candidates = [
        (Envelope::Reach, e1, e2.min(i1)),
        (Envelope::Band, e1.max(i1), e2),
        (Envelope::Annulus, e2, i1),
        (Envelope::Annulus, e2.max(i1), i2),
    ];
    candidates
        .into_iter()
        .filter(|&(_, a, b)| a < b)
        .filter_map(|(envelope, a, b)| {
            let (center, weight) = match envelope {
                Envelope::Reach => (tilt, tilt_gain),
                Envelope::Band => (tilt, -tilt_gain * (-q * (ln_band - ln_eps)).exp_m1()),
                Envelope::Annulus => (0.0, r_max2 - r_o2),
            };
            let z = ((a - center) / sigma, (b - center) / sigma);
            let kept = norm_interval(z.0, z.1);
            let mean_count = lambda_pi * weight * kept;
            (mean_count > 0.0).then_some(Piece {
                envelope,
                z,
                kept,
                mean_count,
            })
        })
        .collect()
}

impl TransponderPlan {
    pub fn new(
        s: &TransponderScenario,
        i_thr_mw: f64,
        budget: PointBudget,
    ) -> Result<Self, NumericError> {
        let ln_i_hat = s.normalized_threshold(i_thr_mw).ln();
        let correlated = s.rho >= 1.0;
        let useful_total = if correlated {
            count_above(s, f64::NEG_INFINITY) - count_above(s, ln_i_hat)
        } else {
            count_above(s, f64::NEG_INFINITY)
        };
        let ln_eps = match budget {
            PointBudget::Exact => None,
            PointBudget::Points(b) if !(b > 0.0) => {
                return Err(NumericError::Domain(format!(
                    "point budget must be positive, got {b}"
                )))
            }
            PointBudget::Points(b) if correlated && useful_total <= b => Some(f64::NEG_INFINITY),
            PointBudget::Points(b) if useful_total <= b => None,
            PointBudget::Points(b) if correlated => {
                let censored = count_above(s, ln_i_hat);
                Some(solve_cutoff(censored + b, |le| count_above(s, le)))
            }
            PointBudget::Points(b) => Some(solve_cutoff(b, |le| count_above(s, le))),
        };
        Self::build(s, i_thr_mw, ln_eps)
    }

    /// Plan with an explicit cutoff `ε` on `r^-α y`.
    pub fn with_cutoff(
        s: &TransponderScenario,
        i_thr_mw: f64,
        eps: f64,
    ) -> Result<Self, NumericError> {
        if !(eps > 0.0) {
            return Err(NumericError::Domain(format!(
                "cutoff must be positive, got {eps}"
            )));
        }
        Self::build(s, i_thr_mw, Some(eps.ln()))
    }

    fn build(
        s: &TransponderScenario,
        i_thr_mw: f64,
        ln_eps: Option<f64>,
    ) -> Result<Self, NumericError> {
        s.validate()
            .map_err(|e| NumericError::Domain(e.to_string()))?;
        if !(i_thr_mw >= 0.0) {
            return Err(NumericError::Domain(format!(
                "I_thr must be non-negative, got {i_thr_mw}"
            )));
        }
        let sigma = s.sigma_ln();
        let ln_i_hat = s.normalized_threshold(i_thr_mw).ln();
        let r_o2 = s.r_min_km * s.r_min_km;
        let r_max2 = s.r_max_km * s.r_max_km;
        let area_mean = std::f64::consts::PI * s.lambda_su * (r_max2 - r_o2);

        let (mode, expected_points) = if i_thr_mw == 0.0 || s.lambda_su == 0.0 {
            (FieldMode::Silent, 0.0)
        } else if let Some(ln_eps) = ln_eps {
            let ln_band = if s.rho >= 1.0 {
                ln_i_hat
            } else {
                f64::INFINITY
            };
            let expected = if ln_eps < ln_band {
                count_above(s, ln_eps) - count_above(s, ln_band)
            } else {
                0.0
            };
            let pieces = if ln_eps < ln_band {
                build_pieces(s, ln_eps, ln_band)
            } else {
                Vec::new()
            };
            let k1 = small_term_cumulant(1, s, ln_i_hat, ln_eps)?;
            let k2 = small_term_cumulant(2, s, ln_i_hat, ln_eps)?;
            (
                FieldMode::Split {
                    ln_eps,
                    ln_band,
                    pieces,
                    compensator: Compensator::new(k1, k2)?,
                },
                expected.max(0.0),
            )
        } else {
            (
                FieldMode::Exact {
                    mean_count: area_mean,
                },
                area_mean,
            )
        };

        Ok(Self {
            scale: s.scale(),
            alpha: s.alpha,
            sigma,
            rho: s.rho,
            cond_sd: sigma * (1.0 - s.rho * s.rho).max(0.0).sqrt(),
            ln_i_hat,
            r_o2,
            r_max2,
            expected_points,
            mode,
        })
    }

    /// Expected number of exactly simulated users per trial.
    pub fn expected_points(&self) -> f64 {
        self.expected_points
    }

    /// Cutoff `ε` in path-gain units, if the plan splits the field.
    pub fn cutoff(&self) -> Option<f64> {
        match &self.mode {
            FieldMode::Split { ln_eps, .. } => Some(ln_eps.exp()),
            _ => None,
        }
    }

    /// Mean and variance of the compensator, in mW and mW².
    pub fn compensator_moments(&self) -> (f64, f64) {
        match &self.mode {
            FieldMode::Split { compensator, .. } => (
                compensator.mean * self.scale,
                compensator.variance * self.scale * self.scale,
            ),
            _ => (0.0, 0.0),
        }
    }

    #[inline]
    fn user<R: Rng + ?Sized, F: FnMut(f64, f64, f64)>(
        &self,
        u: f64,
        r2: f64,
        rng: &mut R,
        visit: &mut F,
    ) {
        let w = if self.rho >= 1.0 {
            u
        } else {
            let z: f64 = rng.sample(StandardNormal);
            self.rho * u + self.cond_sd * z
        };
        let half_ln_r2 = 0.5 * self.alpha * r2.ln();
        visit(r2, u - half_ln_r2, w - half_ln_r2);
    }

    /// Walks one trial, calling `visit(r², ln(r^-α y), ln(r^-α x))` per user,
    /// and returns the compensator draw in path-gain units.
    fn walk<F: FnMut(f64, f64, f64)>(&self, seed: u64, trial: usize, mut visit: F) -> f64 {
        let mut rng = trial_rng(seed, trial);
        match &self.mode {
            FieldMode::Silent => 0.0,
            FieldMode::Exact { mean_count } => {
                let n = poisson(*mean_count, &mut rng).expect("validated mean");
                let span = self.r_max2 - self.r_o2;
                for _ in 0..n {
                    let r2 = self.r_o2 + rng.random::<f64>() * span;
                    let z: f64 = rng.sample(StandardNormal);
                    self.user(self.sigma * z, r2, &mut rng, &mut visit);
                }
                0.0
            }
            FieldMode::Split {
                ln_eps,
                ln_band,
                pieces,
                compensator,
            } => {
                let q = 2.0 / self.alpha;
                let tilt = q * self.sigma * self.sigma;
                for piece in pieces {
                    let n = poisson(piece.mean_count, &mut rng).expect("validated mean");
                    let center = match piece.envelope {
                        Envelope::Annulus => 0.0,
                        _ => tilt,
                    };
                    for _ in 0..n {
                        let u = center + self.sigma * piece.draw(&mut rng);
                        let accept = rng.random::<f64>();
                        let r = rng.random::<f64>();
                        let reach = (q * (u - ln_eps)).exp();
                        let floor = (q * (u - ln_band)).exp();
                        let lo = self.r_o2.max(floor);
                        let len = self.r_max2.min(reach) - lo;
                        let envelope = match piece.envelope {
                            Envelope::Reach => reach,
                            Envelope::Band => reach - floor,
                            Envelope::Annulus => self.r_max2 - self.r_o2,
                        };
                        if len > 0.0 && accept * envelope < len {
                            self.user(u, lo + r * len, &mut rng, &mut visit);
                        }
                    }
                }
                compensator.draw(&mut compensator_rng(seed, trial))
            }
        }
    }

    /// Aggregate interference of one trial, in mW.
    pub fn trial(&self, seed: u64, trial: usize) -> f64 {
        let mut acc = NeumaierSum::new();
        let ln_i_hat = self.ln_i_hat;
        let comp = self.walk(seed, trial, |_, ln_xi, ln_sensed| {
            if ln_sensed <= ln_i_hat {
                acc.add(ln_xi.exp());
            }
        });
        acc.add(comp);
        acc.total() * self.scale
    }

    /// Same trial as [`Self::trial`], with every simulated user reported.
    pub fn trace(&self, seed: u64, trial: usize) -> TrialTrace {
        let mut interferers = Vec::new();
        let ln_i_hat = self.ln_i_hat;
        let scale = self.scale;
        let comp = self.walk(seed, trial, |r2, ln_xi, ln_sensed| {
            interferers.push(Interferer {
                r_km: r2.sqrt(),
                sensed_mw: ln_sensed.exp() * scale,
                interference_mw: ln_xi.exp() * scale,
                transmits: ln_sensed <= ln_i_hat,
            });
        });
        TrialTrace {
            interferers,
            compensator_mw: comp * scale,
            total_mw: self.trial(seed, trial),
        }
    }

    pub fn run(&self, options: &McOptions) -> Vec<f64> {
        let seed = options.seed;
        run_trials(options.trials, options.execution, |i| self.trial(seed, i))
    }
}

/// Standard normal restricted to `(lo, hi]`, by inversion of `v ∈ [0, 1)`.
fn truncated_normal(lo: f64, hi: f64, v: f64) -> f64 {
    if lo > 0.0 {
        let (a, b) = (norm_sf(lo), norm_sf(hi));
        norm_isf(b + (1.0 - v) * (a - b))
    } else {
        let (a, b) = (norm_cdf(lo), norm_cdf(hi));
        norm_quantile(a + (1.0 - v) * (b - a))
    }
}

fn check_trials(trials: usize) -> Result<(), NumericError> {
    if trials == 0 {
        return Err(NumericError::Domain("at least one trial is required".into()));
    }
    Ok(())
}

/// Monte Carlo of the aggregate at the transponder with censoring at `I_thr`.
pub fn simulate_transponder(
    s: &TransponderScenario,
    i_thr_mw: f64,
    options: &McOptions,
) -> Result<McSample, NumericError> {
    check_trials(options.trials)?;
    let plan = TransponderPlan::new(s, i_thr_mw, options.budget)?;
    Ok(McSample {
        values: plan.run(options),
        trials: options.trials,
        seed: options.seed,
        scenario_digest: s.digest(),
    })
}

/// Sampling plan for the interrogator field.
#[derive(Debug, Clone)]
pub struct AirbornePlan {
    scale: f64,
    alpha: f64,
    h2: f64,
    r_o2: f64,
    r_c2: f64,
    mean_count: f64,
    compensator: Compensator,
}

impl AirbornePlan {
    pub fn new(
        s: &AirborneScenario,
        r_o_km: f64,
        budget: PointBudget,
    ) -> Result<Self, NumericError> {
        s.validate()
            .map_err(|e| NumericError::Domain(e.to_string()))?;
        if !(r_o_km >= 0.0) {
            return Err(NumericError::Domain(format!(
                "exclusion radius must be non-negative, got {r_o_km}"
            )));
        }
        let r_o = r_o_km.min(s.r_max_km);
        let r_o2 = r_o * r_o;
        let r_max2 = s.r_max_km * s.r_max_km;
        let lambda_pi = std::f64::consts::PI * s.lambda_su;
        let r_c2 = match budget {
            PointBudget::Exact => r_max2,
            PointBudget::Points(b) if !(b > 0.0) => {
                return Err(NumericError::Domain(format!("point budget must be positive, got {b}")))
            }
            PointBudget::Points(b) if lambda_pi == 0.0 => r_max2.max(r_o2 + b),
            PointBudget::Points(b) => (r_o2 + b / lambda_pi).min(r_max2),
        };
        let compensator = if r_c2 < r_max2 && s.lambda_su > 0.0 {
            let moment = |n: i32| -> Result<f64, NumericError> {
                let e = -0.5 * f64::from(n) * s.alpha;
                let h2 = s.h_km * s.h_km;
                let f = |r: f64| r * (h2 + r * r).powf(e);
                let v = integrate(f, r_c2.sqrt(), s.r_max_km, Tolerance::new(0.0, 1e-11))?;
                Ok(2.0 * lambda_pi * v.value)
            };
            Compensator::new(moment(1)?, moment(2)?)?
        } else {
            Compensator::none()
        };
        Ok(Self {
            scale: s.scale(),
            alpha: s.alpha,
            h2: s.h_km * s.h_km,
            r_o2,
            r_c2,
            mean_count: lambda_pi * (r_c2 - r_o2),
            compensator,
        })
    }

    pub fn expected_points(&self) -> f64 {
        self.mean_count
    }

    pub fn trial(&self, seed: u64, trial: usize) -> f64 {
        let mut rng = trial_rng(seed, trial);
        let mut acc = NeumaierSum::new();
        let n = poisson(self.mean_count, &mut rng).expect("validated mean");
        let span = self.r_c2 - self.r_o2;
        let e = -0.5 * self.alpha;
        for _ in 0..n {
            let r2 = self.r_o2 + rng.random::<f64>() * span;
            acc.add((self.h2 + r2).powf(e));
        }
        acc.add(self.compensator.draw(&mut compensator_rng(seed, trial)));
        acc.total() * self.scale
    }

    pub fn run(&self, options: &McOptions) -> Vec<f64> {
        let seed = options.seed;
        run_trials(options.trials, options.execution, |i| self.trial(seed, i))
    }
}

/// Monte Carlo of the interrogator aggregate with exclusion radius `r_o`.
pub fn simulate_airborne(
    s: &AirborneScenario,
    r_o_km: f64,
    options: &McOptions,
) -> Result<McSample, NumericError> {
    check_trials(options.trials)?;
    if r_o_km > s.r_max_km {
        return Err(NumericError::Domain(format!(
            "exclusion radius {r_o_km} exceeds the field radius {}",
            s.r_max_km
        )));
    }
    let plan = AirbornePlan::new(s, r_o_km, options.budget)?;
    Ok(McSample {
        values: plan.run(options),
        trials: options.trials,
        seed: options.seed,
        scenario_digest: s.digest(),
    })
}
