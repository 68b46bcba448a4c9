//! Path loss, correlated composite fading, adjacent-channel rejection and the
//! secondary-receiver saturation check.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::NumericError;
use crate::scenario::TransponderScenario;
use crate::special::{norm_cdf, norm_sf};

/// Distance-power law `C r^-α`, `r` in km.
pub fn path_gain(r_km: f64, c: f64, alpha: f64) -> Result<f64, NumericError> {
    if !(r_km > 0.0) {
        return Err(NumericError::Domain(format!(
            "path gain needs a positive distance, got {r_km}"
        )));
    }
    Ok(c * r_km.powf(-alpha))
}

/// Gain to a receiver at height `h_km` above a ground point `r_km` away.
pub fn slant_gain(r_km: f64, h_km: f64, c: f64, alpha: f64) -> f64 {
    c * (h_km * h_km + r_km * r_km).powf(-alpha / 2.0)
}

/// Linear fading on the sensing (`x`) and interfering (`y`) channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingPair {
    pub x: f64,
    pub y: f64,
}

/// Draws a pair whose logs are jointly normal with zero mean, common
/// variance `sigma_ln²` and correlation `rho`.
pub fn sample_fading_pair<R: Rng + ?Sized>(sigma_ln: f64, rho: f64, rng: &mut R) -> FadingPair {
    let (ln_x, ln_y) = sample_log_fading(sigma_ln, rho, rng);
    FadingPair {
        x: ln_x.exp(),
        y: ln_y.exp(),
    }
}

/// Same as [`sample_fading_pair`] but returns the logs.
#[inline]
pub fn sample_log_fading<R: Rng + ?Sized>(sigma_ln: f64, rho: f64, rng: &mut R) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let ln_x = sigma_ln * z1;
    let ln_y = if rho >= 1.0 {
        ln_x
    } else {
        let z2: f64 = rng.sample(StandardNormal);
        rho * ln_x + (1.0 - rho * rho).sqrt() * sigma_ln * z2
    };
    (ln_x, ln_y)
}

/// Density of `X` given `Y = y` for the bivariate log-normal fading model.
///
/// Singular at `rho = 1`, where `X = Y` and callers must take the
/// deterministic branch instead.
pub fn conditional_fading_density(
    x: f64,
    y: f64,
    sigma_ln: f64,
    rho: f64,
) -> Result<f64, NumericError> {
    if !(x > 0.0 && y > 0.0) {
        return Err(NumericError::Domain(format!(
            "fading values must be positive, got x = {x}, y = {y}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(NumericError::Domain(format!(
            "conditional density needs 0 <= rho < 1, got {rho}"
        )));
    }
    let var = sigma_ln * sigma_ln * (1.0 - rho * rho);
    let d = x.ln() - rho * y.ln();
    Ok((-d * d / (2.0 * var)).exp() / (x * (2.0 * std::f64::consts::PI * var).sqrt()))
}

/// Probability that the transponder pulse saturates a secondary receiver at
/// `r_km`: `Pr[P_pu g(r) X > I_sat]`.
pub fn saturation_probability(s: &TransponderScenario, r_km: f64) -> Result<f64, NumericError> {
    let median = s.p_pu_dbm.to_mw() * path_gain(r_km, s.c_pathloss, s.alpha)?;
    let z = (s.i_sat_dbm.to_mw() / median).ln() / s.sigma_ln();
    Ok(norm_sf(z))
}

/// Probability that the transponder pulse stays below saturation; the
/// complement of [`saturation_probability`].
pub fn saturation_margin_probability(
    s: &TransponderScenario,
    r_km: f64,
) -> Result<f64, NumericError> {
    let median = s.p_pu_dbm.to_mw() * path_gain(r_km, s.c_pathloss, s.alpha)?;
    Ok(norm_cdf((s.i_sat_dbm.to_mw() / median).ln() / s.sigma_ln()))
}

/// Step-function receiver selectivity: rejection in dB by channel offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcrMask {
    /// `(offset_mhz, acr_db)` breakpoints sorted by offset. Each value holds
    /// from its offset up to the next breakpoint.
    steps: Vec<(f64, f64)>,
}

/// Conservative end of the 60-70 dB rejection quoted for a 2 MHz separation.
pub const DEFAULT_ADJACENT_ACR_DB: f64 = 60.0;

impl Default for AcrMask {
    fn default() -> Self {
        // The 1 MHz offset has no published value; it inherits the 2 MHz one.
        Self {
            steps: vec![(0.0, 0.0), (1.0, DEFAULT_ADJACENT_ACR_DB)],
        }
    }
}

impl AcrMask {
    /// Builds a mask from breakpoints. Offsets must be distinct, non-negative
    /// and include 0.
    pub fn new(mut steps: Vec<(f64, f64)>) -> Result<Self, NumericError> {
        steps.sort_by(|a, b| a.0.total_cmp(&b.0));
        if steps.first().map(|s| s.0) != Some(0.0) {
            return Err(NumericError::Domain(
                "ACR mask must define the co-channel (0 MHz) entry".into(),
            ));
        }
        for w in steps.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(NumericError::Domain(format!(
                    "duplicate ACR mask offset {}",
                    w[0].0
                )));
            }
        }
        if steps.iter().any(|(o, a)| !o.is_finite() || !a.is_finite() || *o < 0.0) {
            return Err(NumericError::Domain(
                "ACR mask entries must be finite with non-negative offsets".into(),
            ));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }

    pub fn lookup(&self, delta_f_mhz: f64) -> Result<f64, NumericError> {
        if !(delta_f_mhz >= 0.0) {
            return Err(NumericError::Domain(format!(
                "channel offset must be non-negative, got {delta_f_mhz}"
            )));
        }
        Ok(self
            .steps
            .iter()
            .take_while(|(o, _)| *o <= delta_f_mhz)
            .last()
            .map(|(_, a)| *a)
            .unwrap_or(0.0))
    }
}

/// Rejection for a channel offset under the default mask.
pub fn acr_for_offset(delta_f_mhz: f64) -> Result<f64, NumericError> {
    AcrMask::default().lookup(delta_f_mhz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use crate::units::sigma_db_to_ln;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_gain_examples() {
        assert_eq!(path_gain(1.0, 4.5e-13, 3.5).unwrap(), 4.5e-13);
        let g5 = path_gain(5.0, 4.5e-13, 3.5).unwrap();
        // 5^-3.5 = 1 / (125 * sqrt(5))
        let want = 4.5e-13 / (125.0 * 5f64.sqrt());
        assert!(((g5 - want) / want).abs() < 1e-14);
        assert_eq!(path_gain(2.0, 1.0, 2.0).unwrap(), 0.25);
        assert!(path_gain(0.0, 1.0, 2.0).is_err());
        assert!(path_gain(-1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn slant_gain_examples() {
        assert_eq!(slant_gain(0.0, 1.0, 5.7e-10, 2.0), 5.7e-10);
        assert!((slant_gain(3.0, 4.0, 1.0, 2.0) - 1.0 / 25.0).abs() < 1e-16);
        let want = 5.7e-10 / 101.0;
        assert!(((slant_gain(10.0, 1.0, 5.7e-10, 2.0) - want) / want).abs() < 1e-14);
    }

    #[test]
    fn full_correlation_gives_identical_fading() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = sample_fading_pair(2.3, 1.0, &mut rng);
            assert_eq!(p.x, p.y);
        }
    }

    fn log_correlation(rho: f64, n: usize, seed: u64) -> (f64, f64) {
        let sigma = sigma_db_to_ln(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy, mut sx3) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let (a, b) = sample_log_fading(sigma, rho, &mut rng);
            sx += a;
            sy += b;
            sxx += a * a;
            syy += b * b;
            sxy += a * b;
            sx3 += a * a * a;
        }
        let nf = n as f64;
        let (mx, my) = (sx / nf, sy / nf);
        let vx = sxx / nf - mx * mx;
        let vy = syy / nf - my * my;
        let corr = (sxy / nf - mx * my) / (vx * vy).sqrt();
        let skew = (sx3 / nf - 3.0 * mx * vx - mx.powi(3)) / vx.powf(1.5);
        (corr, skew)
    }

    #[test]
    fn sampled_correlation_matches_rho() {
        let (c0, skew) = log_correlation(0.0, 1_000_000, 7);
        assert!(c0.abs() < 0.005, "rho=0 gave {c0}");
        assert!(skew.abs() < 0.01, "skewness {skew}");
        let (c5, _) = log_correlation(0.5, 1_000_000, 8);
        assert!((c5 - 0.5).abs() < 0.01, "rho=0.5 gave {c5}");
    }

    #[test]
    fn conditional_density_examples() {
        let sigma = std::f64::consts::LN_10;
        // Independence: marginal log-normal density.
        let x: f64 = 3.0;
        let marginal = (-(x.ln()).powi(2) / (2.0 * sigma * sigma)).exp()
            / (x * sigma * (2.0 * std::f64::consts::PI).sqrt());
        let got = conditional_fading_density(x, 7.0, sigma, 0.0).unwrap();
        assert!(((got - marginal) / marginal).abs() < 1e-14);
        // Both logs zero.
        for rho in [0.0, 0.3, 0.9] {
            let got = conditional_fading_density(1.0, 1.0, sigma, rho).unwrap();
            let want = 1.0 / (sigma * (2.0 * std::f64::consts::PI * (1.0 - rho * rho)).sqrt());
            assert!(((got - want) / want).abs() < 1e-14);
        }
        assert!(conditional_fading_density(1.0, 1.0, sigma, 1.0).is_err());
    }

    fn density_mass(y: f64, sigma: f64, rho: f64) -> f64 {
        // w = ln x turns the density into a normal one in w.
        let mean = rho * y.ln();
        let sd = sigma * (1.0 - rho * rho).sqrt();
        integrate(
            |w| {
                let x = w.exp();
                conditional_fading_density(x, y, sigma, rho).unwrap() * x
            },
            mean - 12.0 * sd,
            mean + 12.0 * sd,
            Tolerance::new(0.0, 1e-12),
        )
        .unwrap()
        .value
    }

    #[test]
    fn conditional_density_normalizes() {
        let m = density_mass(2.0, std::f64::consts::LN_10, 0.7);
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conditional_density_normalizes_for_all_rho(rho in 0.0f64..0.999, y in 0.01f64..100.0) {
            let m = density_mass(y, std::f64::consts::LN_10, rho);
            prop_assert!((m - 1.0).abs() < 1e-6);
        }

        #[test]
        fn path_gain_is_homogeneous(r in 0.01f64..500.0, k in 0.1f64..10.0, alpha in 2.0f64..5.0) {
            let g = path_gain(r, 1.0, alpha).unwrap();
            let gk = path_gain(k * r, 1.0, alpha).unwrap();
            prop_assert!(((gk - k.powf(-alpha) * g) / gk).abs() < 1e-12);
            prop_assert!(path_gain(r * 1.001, 1.0, alpha).unwrap() < g);
        }

        #[test]
        fn slant_is_path_gain_of_slant_range(r in 0.0f64..300.0, h in 0.01f64..20.0, alpha in 1.5f64..5.0) {
            let l = (h * h + r * r).sqrt();
            let a = slant_gain(r, h, 4.0, alpha);
            let b = path_gain(l, 4.0, alpha).unwrap();
            prop_assert!(((a - b) / b).abs() < 1e-12);
        }
    }

    #[test]
    fn saturation_examples() {
        // Place I_sat exactly at the median received power.
        let mut s = TransponderScenario::default();
        let median = s.p_pu_dbm.to_mw() * path_gain(7.0, s.c_pathloss, s.alpha).unwrap();
        s.i_sat_dbm = crate::units::PowerDbm::from_mw(median);
        assert!((saturation_probability(&s, 7.0).unwrap() - 0.5).abs() < 1e-12);

        let s = TransponderScenario::default();
        assert!(saturation_probability(&s, 1e6).unwrap() < 1e-100);
        assert!(saturation_probability(&s, 5.0).unwrap() < s.beta_su);
        let p = saturation_probability(&s, 3.0).unwrap();
        let q = saturation_margin_probability(&s, 3.0).unwrap();
        assert!((p + q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn acr_default_mask() {
        assert_eq!(acr_for_offset(0.0).unwrap(), 0.0);
        assert_eq!(acr_for_offset(1.0).unwrap(), 60.0);
        assert_eq!(acr_for_offset(2.0).unwrap(), 60.0);
        assert_eq!(acr_for_offset(10.0).unwrap(), 60.0);
        assert!(acr_for_offset(-1.0).is_err());
    }

    #[test]
    fn acr_custom_mask() {
        let m = AcrMask::new(vec![(2.0, 65.0), (0.0, 0.0), (1.0, 30.0), (5.0, 70.0)]).unwrap();
        assert_eq!(m.lookup(0.5).unwrap(), 0.0);
        assert_eq!(m.lookup(1.0).unwrap(), 30.0);
        assert_eq!(m.lookup(3.0).unwrap(), 65.0);
        assert_eq!(m.lookup(100.0).unwrap(), 70.0);
        assert!(AcrMask::new(vec![(1.0, 30.0)]).is_err());
        assert!(AcrMask::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
    }
}
