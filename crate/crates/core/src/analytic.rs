//! Cumulants of the censored aggregate interference and the closed-form
//! distributions fitted to them.
//!
//! For the transponder the cumulant of `I_Nt = Σ r^-α Y` restricted to the
//! transmitting users is
//!
//! ```text
//! k(n) = 2πλ/(nα-2) · E[ Y^n · ( max(r_o, (X/Î)^(1/α))^(2-nα) - R^(2-nα) )⁺ ]
//! ```
//!
//! With `u = ln y` and `w = ln x` the conditional expectation over `X | Y`
//! is a Gaussian partial moment and has a closed form; the remaining
//! expectation over `Y` is tilted by `Y^n` into a normal with mean `nσ²` and
//! integrated with adaptive Gauss–Kronrod. `ρ = 1` has a fully closed form.

use std::sync::Once;

use serde::{Deserialize, Serialize};

use crate::error::NumericError;
use crate::propagation::path_gain;
use crate::quadrature::{integrate, Tolerance};
use crate::scenario::{effective_tx_power, AirborneScenario, TransponderScenario};
use crate::special::{norm_cdf, norm_interval, norm_pdf, norm_quantile, norm_sf};

/// Shadowing spread below which the log-normal composite-fading model is
/// known to be poor. Smaller values are accepted with a warning.
pub const MIN_RELIABLE_SIGMA_DB: f64 = 6.0;

static SIGMA_WARNING: Once = Once::new();

fn warn_small_sigma(sigma_db: f64) {
    if sigma_db <= MIN_RELIABLE_SIGMA_DB {
        SIGMA_WARNING.call_once(|| {
            log::warn!(
                "sigma_db = {sigma_db} dB: the log-normal composite fading model is only \
                 reliable above {MIN_RELIABLE_SIGMA_DB} dB"
            );
        });
    }
}

/// Half-width of the outer integration window, in standard deviations.
pub const OUTER_WINDOW_SIGMAS: f64 = 8.0;
/// Relative tolerance of the outer quadrature.
pub const CUMULANT_REL_TOL: f64 = 1e-9;
/// Absolute tolerance, relative to the integrand's peak times window width.
pub const CUMULANT_ABS_TOL: f64 = 1e-12;
/// Highest cumulant order the engine evaluates.
pub const MAX_ORDER: u32 = 4;

/// Cumulants `k(1..=N)` of an aggregate, in linear units (mW^n once scaled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet(Vec<f64>);

impl CumulantSet {
    pub fn new(k: Vec<f64>) -> Result<Self, NumericError> {
        if k.len() < 2 {
            return Err(NumericError::Domain(format!(
                "a cumulant set needs at least two entries, got {}",
                k.len()
            )));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(NumericError::Domain(format!("non-finite cumulant in {k:?}")));
        }
        if k[0] < 0.0 || k[1] < 0.0 {
            return Err(NumericError::Domain(format!(
                "mean and variance of a non-negative sum cannot be negative: {k:?}"
            )));
        }
        Ok(Self(k))
    }

    /// `k(n)`, 1-based.
    pub fn k(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    pub fn mean(&self) -> f64 {
        self.0[0]
    }

    pub fn variance(&self) -> f64 {
        self.0[1]
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Standardized third cumulant, when available.
    pub fn skewness(&self) -> Option<f64> {
        (self.0.len() >= 3 && self.0[1] > 0.0).then(|| self.0[2] / self.0[1].powf(1.5))
    }
}

/// Raw transponder cumulant `k_{I_Nt}(n)` for a normalized censoring level
/// `i_hat = I_thr / (P_eff C)`.
pub fn transponder_cumulant(
    n: u32,
    s: &TransponderScenario,
    i_hat: f64,
) -> Result<f64, NumericError> {
    let alpha = s.alpha;
    let nf = f64::from(n);
    if n == 0 || n > MAX_ORDER {
        return Err(NumericError::Domain(format!(
            "cumulant order must lie in 1..={MAX_ORDER}, got {n}"
        )));
    }
    if !(nf * alpha > 2.0) {
        return Err(NumericError::Domain(format!(
            "cumulant {n} is not integrable for alpha = {alpha} (needs n·alpha > 2)"
        )));
    }
    if !(i_hat >= 0.0) {
        return Err(NumericError::Domain(format!(
            "normalized threshold must be non-negative, got {i_hat}"
        )));
    }
    if !(0.0..=1.0).contains(&s.rho) {
        return Err(NumericError::Domain(format!("rho must lie in [0, 1], got {}", s.rho)));
    }
    if s.lambda_su == 0.0 || i_hat == 0.0 || s.r_min_km >= s.r_max_km {
        return Ok(0.0);
    }

    let sigma = s.sigma_ln();
    let prefactor = 2.0 * std::f64::consts::PI * s.lambda_su / (nf * alpha - 2.0)
        * (nf * nf * sigma * sigma / 2.0).exp();
    let c_r = s.r_max_km.powf(2.0 - nf * alpha);
    let c_o = (s.r_min_km > 0.0).then(|| s.r_min_km.powf(2.0 - nf * alpha));

    if i_hat.is_infinite() {
        return match c_o {
            Some(c_o) => Ok(prefactor * (c_o - c_r)),
            None => Err(NumericError::Domain(
                "uncensored cumulant diverges for r_min = 0".into(),
            )),
        };
    }

    let kernel = CensoredKernel {
        n: nf,
        alpha,
        sigma,
        rho: s.rho,
        ln_i_hat: i_hat.ln(),
        ln_r_o: s.r_min_km.ln(),
        ln_r_max: s.r_max_km.ln(),
        c_o,
        c_r,
    };

    if s.rho >= 1.0 {
        return Ok(prefactor * kernel.fully_correlated());
    }
    Ok(prefactor * kernel.integrate_outer()?)
}

/// `E[(max(r_o, (X/Î)^(1/α))^(2-nα) - R^(2-nα))⁺ | ln Y = u]`, closed form in
/// the partial moments of `ln X | u ~ N(ρu, σ²(1-ρ²))`.
struct CensoredKernel {
    n: f64,
    alpha: f64,
    sigma: f64,
    rho: f64,
    ln_i_hat: f64,
    ln_r_o: f64,
    ln_r_max: f64,
    c_o: Option<f64>,
    c_r: f64,
}

impl CensoredKernel {
    fn p(&self) -> f64 {
        2.0 / self.alpha - self.n
    }

    /// Log-threshold on `X` below which a user at `r_o` transmits.
    fn a_o(&self) -> f64 {
        if self.c_o.is_some() {
            self.ln_i_hat + self.alpha * self.ln_r_o
        } else {
            f64::NEG_INFINITY
        }
    }

    fn a_r(&self) -> f64 {
        self.ln_i_hat + self.alpha * self.ln_r_max
    }

    /// Kernel with `ln X ~ N(m, sd²)`.
    fn eval(&self, m: f64, sd: f64) -> f64 {
        let p = self.p();
        let (a_o, a_r) = (self.a_o(), self.a_r());
        let l_o = (a_o - m) / sd;
        let l_r = (a_r - m) / sd;
        let inner = self.c_o.map_or(0.0, |c| c * norm_cdf(l_o));
        let boundary = self.c_r * norm_cdf(l_r);
        // E[(e^W / Î)^p ; a_o < W <= a_r]
        let moment = (p * (m - self.ln_i_hat) + 0.5 * p * p * sd * sd).exp()
            * norm_interval(l_o - p * sd, l_r - p * sd);
        (inner - boundary + moment).max(0.0)
    }

    /// `ρ = 1`: `X = Y`, so the tilted `ln Y ~ N(nσ², σ²)` enters directly.
    fn fully_correlated(&self) -> f64 {
        self.eval(self.n * self.sigma * self.sigma, self.sigma)
    }

    fn integrate_outer(&self) -> Result<f64, NumericError> {
        let sigma = self.sigma;
        let rho = self.rho;
        let sd = sigma * (1.0 - rho * rho).sqrt();
        let center = self.n * sigma * sigma;
        let integrand = |t: f64| {
            let u = center + sigma * t;
            norm_pdf(t) * self.eval(rho * u, sd)
        };

        // The partial-moment term shifts mass towards t = pρσ.
        let shift = self.p() * rho * sigma;
        let lo = shift.min(0.0) - OUTER_WINDOW_SIGMAS;
        let hi = OUTER_WINDOW_SIGMAS;

        // Break at the censoring edges, which sharpen as ρ → 1.
        let mut breaks = vec![lo];
        if rho > 0.0 {
            for a in [self.a_o(), self.a_r()] {
                let t = (a / rho - center) / sigma;
                if t.is_finite() && t > lo && t < hi {
                    breaks.push(t);
                }
            }
        }
        breaks.push(hi);
        breaks.sort_by(f64::total_cmp);

        let peak = (0..=64)
            .map(|i| integrand(lo + (hi - lo) * f64::from(i) / 64.0).abs())
            .fold(0.0, f64::max);
        let tol = Tolerance::new(CUMULANT_ABS_TOL * peak * (hi - lo), CUMULANT_REL_TOL);

        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += integrate(integrand, w[0], w[1], tol)?.value;
        }
        Ok(total)
    }
}

/// Raw airborne cumulant `k_{I_Nt}(n)` over the annulus `[r_o, R]` seen from
/// height `h`. `nα = 2` takes the logarithmic limit.
pub fn airborne_cumulant(n: u32, s: &AirborneScenario, r_o_km: f64) -> Result<f64, NumericError> {
    if n == 0 {
        return Err(NumericError::Domain("cumulant order starts at 1".into()));
    }
    if !(r_o_km >= 0.0) {
        return Err(NumericError::Domain(format!(
            "exclusion radius must be non-negative, got {r_o_km}"
        )));
    }
    if s.lambda_su == 0.0 || r_o_km >= s.r_max_km {
        return Ok(0.0);
    }
    let h2 = s.h_km * s.h_km;
    let a = h2 + s.r_max_km * s.r_max_km;
    let b = h2 + r_o_km * r_o_km;
    let lambda_pi = std::f64::consts::PI * s.lambda_su;
    let x = (2.0 - f64::from(n) * s.alpha) / 2.0;
    if x == 0.0 {
        return Ok(lambda_pi * (a / b).ln());
    }
    // 2πλ/(nα-2) (B^x - A^x), rewritten to stay accurate as x → 0.
    Ok(-lambda_pi / x * a.powf(x) * (x * (b / a).ln()).exp_m1())
}

/// `k_out(n) = (p_eff C)^n k_in(n)`.
pub fn scale_cumulants(raw: &CumulantSet, p_eff_mw: f64, c: f64) -> CumulantSet {
    let g = p_eff_mw * c;
    CumulantSet(
        raw.0
            .iter()
            .zip(1..)
            .map(|(k, n)| g.powi(n) * k)
            .collect(),
    )
}

/// Scaled transponder cumulants `k_{I_a}(1..=order)` for a censoring level in mW.
pub fn transponder_cumulants(
    s: &TransponderScenario,
    i_thr_mw: f64,
    order: u32,
) -> Result<CumulantSet, NumericError> {
    warn_small_sigma(s.sigma_db);
    let i_hat = s.normalized_threshold(i_thr_mw);
    let raw = (1..=order.max(2))
        .map(|n| transponder_cumulant(n, s, i_hat))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(scale_cumulants(
        &CumulantSet::new(raw)?,
        effective_tx_power(s),
        s.c_pathloss,
    ))
}

/// Scaled airborne cumulants for an exclusion radius.
pub fn airborne_cumulants(
    s: &AirborneScenario,
    r_o_km: f64,
    order: u32,
) -> Result<CumulantSet, NumericError> {
    let raw = (1..=order.max(2))
        .map(|n| airborne_cumulant(n, s, r_o_km))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(scale_cumulants(
        &CumulantSet::new(raw)?,
        effective_tx_power(s),
        s.c_pathloss,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    LogNormal,
    Gaussian,
}

/// Moment-matched model of the aggregate interference. For the log-normal,
/// `mu`/`sigma` are in log-mW; for the Gaussian, in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedDistribution {
    pub kind: FitKind,
    pub mu: f64,
    pub sigma: f64,
}

impl FittedDistribution {
    pub fn mean(&self) -> f64 {
        match self.kind {
            FitKind::LogNormal => (self.mu + 0.5 * self.sigma * self.sigma).exp(),
            FitKind::Gaussian => self.mu,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            FitKind::LogNormal => {
                let s2 = self.sigma * self.sigma;
                s2.exp_m1() * (2.0 * self.mu + s2).exp()
            }
            FitKind::Gaussian => self.sigma * self.sigma,
        }
    }

    fn standardize(&self, x: f64) -> f64 {
        match self.kind {
            FitKind::LogNormal if x <= 0.0 => f64::NEG_INFINITY,
            FitKind::LogNormal => (x.ln() - self.mu) / self.sigma,
            FitKind::Gaussian => (x - self.mu) / self.sigma,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        norm_cdf(self.standardize(x))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let z = norm_quantile(p);
        match self.kind {
            FitKind::LogNormal => (self.mu + self.sigma * z).exp(),
            FitKind::Gaussian => self.mu + self.sigma * z,
        }
    }
}

/// Log-normal with the same mean and variance as `k`.
pub fn fit_lognormal(k: &CumulantSet) -> Result<FittedDistribution, NumericError> {
    let (m, v) = (k.mean(), k.variance());
    if !(m > 0.0 && v > 0.0) {
        return Err(NumericError::Domain(format!(
            "log-normal fit needs positive mean and variance, got {m:e}, {v:e}"
        )));
    }
    let s2 = (v / (m * m)).ln_1p();
    Ok(FittedDistribution {
        kind: FitKind::LogNormal,
        mu: m.ln() - 0.5 * s2,
        sigma: s2.sqrt(),
    })
}

/// Gaussian with mean `k(1)` and variance `k(2)`.
pub fn fit_gaussian(k: &CumulantSet) -> Result<FittedDistribution, NumericError> {
    if !(k.variance() > 0.0) {
        return Err(NumericError::Domain(format!(
            "Gaussian fit needs a positive variance, got {:e}",
            k.variance()
        )));
    }
    Ok(FittedDistribution {
        kind: FitKind::Gaussian,
        mu: k.mean(),
        sigma: k.variance().sqrt(),
    })
}

/// `Pr[I_a > threshold]` under a fitted model.
pub fn prob_exceed(d: &FittedDistribution, threshold_mw: f64) -> f64 {
    norm_sf(d.standardize(threshold_mw))
}

/// Probability that a user at `r_km` believes its interference is within
/// `I_thr` and therefore transmits.
pub fn transmission_probability(
    s: &TransponderScenario,
    i_thr_mw: f64,
    r_km: f64,
) -> Result<f64, NumericError> {
    let median = effective_tx_power(s) * path_gain(r_km, s.c_pathloss, s.alpha)?;
    Ok(norm_cdf((i_thr_mw / median).ln() / s.sigma_ln()))
}

/// Exceedance of the protection threshold for the transponder at `I_thr`,
/// using the log-normal fit. An empty field never exceeds.
pub fn transponder_exceedance(
    s: &TransponderScenario,
    i_thr_mw: f64,
    threshold_mw: f64,
) -> Result<f64, NumericError> {
    let k = transponder_cumulants(s, i_thr_mw, 2)?;
    if k.mean() == 0.0 {
        return Ok(0.0);
    }
    if k.variance() == 0.0 {
        return Ok(if k.mean() > threshold_mw { 1.0 } else { 0.0 });
    }
    Ok(prob_exceed(&fit_lognormal(&k)?, threshold_mw))
}

/// Exceedance for the interrogator with exclusion radius `r_o`, using the
/// Gaussian fit.
pub fn airborne_exceedance(
    s: &AirborneScenario,
    r_o_km: f64,
    threshold_mw: f64,
) -> Result<f64, NumericError> {
    let k = airborne_cumulants(s, r_o_km, 2)?;
    if k.variance() == 0.0 {
        return Ok(if k.mean() > threshold_mw { 1.0 } else { 0.0 });
    }
    Ok(prob_exceed(&fit_gaussian(&k)?, threshold_mw))
}
