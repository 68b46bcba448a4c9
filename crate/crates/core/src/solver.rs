//! Inverse problems on the analytic engine: the largest individual
//! threshold meeting the protection constraint, the density and power
//! frontiers, and the exclusion radius around an interrogator.
//!
//! Every search is a bisection on a monotone objective. The bracket ends
//! must straddle the target, and every feasible midpoint must lie between
//! the feasible end and the target; a violation is an error, not a silent
//! answer. Past the target the objective only has to keep its sign: the
//! fitted tail probability of the threshold search flattens and wobbles
//! there without affecting the crossing.

use serde::{Deserialize, Serialize};

use crate::analytic::{airborne_exceedance, transmission_probability, transponder_exceedance};
use crate::error::{NumericError, SolverError};
use crate::scenario::{effective_protection_threshold, AirborneScenario, TransponderScenario};
use crate::units::PowerDbm;

pub const MAX_ITERATIONS: usize = 200;
const MONOTONE_SLACK: f64 = 1e-12;

/// Convergence targets of the searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Width of the final bracket on thresholds and powers.
    pub tol_db: f64,
    pub tol_km: f64,
    /// Width of the final bracket on `log10 λ`.
    pub tol_decades: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_db: 1e-4,
            tol_km: 1e-3,
            tol_decades: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Converged,
    /// The constraint holds across the whole search range; `value` is its top.
    Unbounded,
    /// No value in the search range satisfies the constraint.
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    IThrDbm,
    RadiusKm,
    DensityPerKm2,
    PowerDbm,
}

/// Outcome of a search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub quantity: Quantity,
    /// Feasible end of the final bracket, in the unit named by `quantity`.
    pub value: f64,
    /// Objective probability at `value`.
    pub achieved_prob: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    pub status: SolveStatus,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }
}

/// Final bracket of a bisection with the objective at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub iterations: usize,
}

/// Bisects `[lo, hi]` for the sign change of `f`, increasing up to its
/// root, with `f(lo) <= 0 < f(hi)`, until the bracket is narrower than `tol`.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Bracket, SolverError>
where
    F: FnMut(f64) -> Result<f64, SolverError>,
{
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    bisect_from(f, lo, hi, f_lo, f_hi, tol)
}

fn bisect_from<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    mut f_hi: f64,
    tol: f64,
) -> Result<Bracket, SolverError>
where
    F: FnMut(f64) -> Result<f64, SolverError>,
{
    if !(f_lo <= 0.0 && f_hi > 0.0) {
        return Err(SolverError::NotMonotone {
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        if iterations == MAX_ITERATIONS {
            return Err(SolverError::Iterations(MAX_ITERATIONS));
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid.is_nan() {
            return Err(NumericError::NonFinite { at: mid }.into());
        }
        // Only the feasible side must rise towards the root; beyond it the
        // objective need only keep its sign. Quadrature noise far below any
        // probability of interest is tolerated.
        if f_mid <= 0.0 && f_mid < f_lo - MONOTONE_SLACK {
            return Err(SolverError::NotMonotone {
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
        if f_mid <= 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(Bracket {
        lo,
        hi,
        f_lo,
        f_hi,
        iterations,
    })
}

fn validated<T>(r: Result<(), crate::error::ValidationError>, v: T) -> Result<T, SolverError> {
    r.map(|_| v).map_err(SolverError::from)
}

/// Exceedance probability of the protection threshold at a given `I_thr`.
pub fn ithr_exceedance(s: &TransponderScenario, i_thr_dbm: f64) -> Result<f64, NumericError> {
    transponder_exceedance(
        s,
        PowerDbm(i_thr_dbm).to_mw(),
        effective_protection_threshold(s),
    )
}

const ITHR_BRACKET: (f64, f64) = (-200.0, 0.0);
const ITHR_LIMITS: (f64, f64) = (-400.0, 100.0);
const BRACKET_STEP_DB: f64 = 50.0;

/// Largest `I_thr` (dBm) whose log-normal exceedance of the protection
/// threshold stays within `β_PU`.
pub fn solve_ithr(s: &TransponderScenario) -> Result<FeasibilityResult, SolverError> {
    solve_ithr_with(s, &SolverOptions::default())
}

pub fn solve_ithr_with(
    s: &TransponderScenario,
    opts: &SolverOptions,
) -> Result<FeasibilityResult, SolverError> {
    validated(s.validate(), ())?;
    let beta = s.beta_pu;
    let f = |x: f64| -> Result<f64, SolverError> { Ok(ithr_exceedance(s, x)? - beta) };

    let (mut lo, mut hi) = ITHR_BRACKET;
    let mut f_lo = f(lo)?;
    while f_lo > 0.0 {
        hi = lo;
        lo -= BRACKET_STEP_DB;
        if lo < ITHR_LIMITS.0 {
            return Ok(FeasibilityResult {
                quantity: Quantity::IThrDbm,
                value: f64::NEG_INFINITY,
                achieved_prob: f_lo + beta,
                iterations: 0,
                bracket: (hi, hi),
                status: SolveStatus::Infeasible,
            });
        }
        f_lo = f(lo)?;
    }
    let mut f_hi = f(hi)?;
    while f_hi <= 0.0 {
        if f_hi < f_lo {
            return Err(SolverError::NotMonotone {
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
        if hi + BRACKET_STEP_DB > ITHR_LIMITS.1 {
            return Ok(FeasibilityResult {
                quantity: Quantity::IThrDbm,
                value: hi,
                achieved_prob: f_hi + beta,
                iterations: 0,
                bracket: (hi, hi),
                status: SolveStatus::Unbounded,
            });
        }
        lo = hi;
        f_lo = f_hi;
        hi += BRACKET_STEP_DB;
        f_hi = f(hi)?;
    }
    let b = bisect_from(f, lo, hi, f_lo, f_hi, opts.tol_db)?;
    Ok(FeasibilityResult {
        quantity: Quantity::IThrDbm,
        value: b.lo,
        achieved_prob: b.f_lo + beta,
        iterations: b.iterations,
        bracket: (b.lo, b.hi),
        status: SolveStatus::Converged,
    })
}

/// Probability that a user at `r_ref_km` transmits when everyone applies
/// the solved `I_thr`. Zero when no threshold is feasible.
pub fn transmission_probability_at_solution(
    s: &TransponderScenario,
    r_ref_km: f64,
    opts: &SolverOptions,
) -> Result<f64, SolverError> {
    let sol = solve_ithr_with(s, opts)?;
    if sol.status == SolveStatus::Infeasible {
        return Ok(0.0);
    }
    Ok(transmission_probability(
        s,
        PowerDbm(sol.value).to_mw(),
        r_ref_km,
    )?)
}

const DENSITY_DECADES: (f64, f64) = (-2.0, 8.0);

/// Largest density `λ` at which a user at `r_ref_km` still transmits with
/// probability at least `prob_floor` under the solved `I_thr`.
pub fn max_density_for_power(
    template: &TransponderScenario,
    p_su_dbm: f64,
    prob_floor: f64,
    r_ref_km: f64,
) -> Result<FeasibilityResult, SolverError> {
    max_density_for_power_with(template, p_su_dbm, prob_floor, r_ref_km, &SolverOptions::default())
}

pub fn max_density_for_power_with(
    template: &TransponderScenario,
    p_su_dbm: f64,
    prob_floor: f64,
    r_ref_km: f64,
    opts: &SolverOptions,
) -> Result<FeasibilityResult, SolverError> {
    if !(0.0..1.0).contains(&prob_floor) {
        return Err(NumericError::Domain(format!(
            "probability floor must lie in [0, 1), got {prob_floor}"
        ))
        .into());
    }
    if !(r_ref_km > 0.0) {
        return Err(NumericError::Domain(format!(
            "reference distance must be positive, got {r_ref_km}"
        ))
        .into());
    }
    let at = |decades: f64| TransponderScenario {
        p_su_dbm: PowerDbm(p_su_dbm),
        lambda_su: 10f64.powf(decades),
        ..template.clone()
    };
    validated(at(0.0).validate(), ())?;
    // Shortfall of the transmission probability; increasing in density.
    let f = |d: f64| -> Result<f64, SolverError> {
        Ok(prob_floor - transmission_probability_at_solution(&at(d), r_ref_km, opts)?)
    };
    let (lo, hi) = DENSITY_DECADES;
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    let density = |d: f64| 10f64.powf(d);
    if f_lo > 0.0 {
        return Ok(FeasibilityResult {
            quantity: Quantity::DensityPerKm2,
            value: 0.0,
            achieved_prob: prob_floor - f_lo,
            iterations: 0,
            bracket: (density(lo), density(lo)),
            status: SolveStatus::Infeasible,
        });
    }
    if f_hi <= 0.0 {
        return Ok(FeasibilityResult {
            quantity: Quantity::DensityPerKm2,
            value: density(hi),
            achieved_prob: prob_floor - f_hi,
            iterations: 0,
            bracket: (density(hi), density(hi)),
            status: SolveStatus::Unbounded,
        });
    }
    let b = bisect_from(f, lo, hi, f_lo, f_hi, opts.tol_decades)?;
    Ok(FeasibilityResult {
        quantity: Quantity::DensityPerKm2,
        value: density(b.lo),
        achieved_prob: prob_floor - b.f_lo,
        iterations: b.iterations,
        bracket: (density(b.lo), density(b.hi)),
        status: SolveStatus::Converged,
    })
}

/// Gaussian exceedance of the interrogator's protection threshold with
/// exclusion radius `r_o_km`.
pub fn exclusion_exceedance(s: &AirborneScenario, r_o_km: f64) -> Result<f64, NumericError> {
    airborne_exceedance(s, r_o_km, effective_protection_threshold(s))
}

/// Smallest exclusion radius keeping the interrogator protected. Zero when
/// no exclusion is needed; flagged infeasible when only the whole disc works.
pub fn solve_exclusion_radius(s: &AirborneScenario) -> Result<FeasibilityResult, SolverError> {
    solve_exclusion_radius_with(s, &SolverOptions::default())
}

pub fn solve_exclusion_radius_with(
    s: &AirborneScenario,
    opts: &SolverOptions,
) -> Result<FeasibilityResult, SolverError> {
    validated(s.validate(), ())?;
    let beta = s.beta_pu;
    // Shortfall below the target as the radius shrinks; increasing in -r.
    let g = |r: f64| -> Result<f64, SolverError> { Ok(exclusion_exceedance(s, r)? - beta) };
    let g0 = g(0.0)?;
    if g0 <= 0.0 {
        return Ok(FeasibilityResult {
            quantity: Quantity::RadiusKm,
            value: 0.0,
            achieved_prob: g0 + beta,
            iterations: 0,
            bracket: (0.0, 0.0),
            status: SolveStatus::Converged,
        });
    }
    let r_max = s.r_max_km;
    let g_r = g(r_max)?;
    let b = bisect_from(|x: f64| g(-x), -r_max, 0.0, g_r, g0, opts.tol_km)?;
    let value = -b.lo;
    let status = if value >= r_max - opts.tol_km {
        SolveStatus::Infeasible
    } else {
        SolveStatus::Converged
    };
    Ok(FeasibilityResult {
        quantity: Quantity::RadiusKm,
        value,
        achieved_prob: b.f_lo + beta,
        iterations: b.iterations,
        bracket: (-b.hi, -b.lo),
        status,
    })
}

/// Exclusion radius widened by the distance the aircraft covers during
/// the database update delay. No exclusion stays no exclusion.
pub fn apply_update_delay(r_thr_km: f64, t_u_s: f64, v_kmh: f64) -> Result<f64, NumericError> {
    if !(r_thr_km >= 0.0 && t_u_s >= 0.0 && v_kmh >= 0.0) {
        return Err(NumericError::Domain(format!(
            "radius, delay and speed must be non-negative, got {r_thr_km}, {t_u_s}, {v_kmh}"
        )));
    }
    Ok(if r_thr_km > 0.0 {
        r_thr_km + t_u_s / 3600.0 * v_kmh
    } else {
        0.0
    })
}

const POWER_BRACKET: (f64, f64) = (-100.0, 60.0);

/// Largest secondary power (dBm) at density `lambda` that needs no
/// exclusion region.
pub fn max_power_no_exclusion(
    template: &AirborneScenario,
    lambda: f64,
) -> Result<FeasibilityResult, SolverError> {
    max_power_no_exclusion_with(template, lambda, &SolverOptions::default())
}

pub fn max_power_no_exclusion_with(
    template: &AirborneScenario,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<FeasibilityResult, SolverError> {
    if !(lambda > 0.0) {
        return Err(NumericError::Domain(format!("density must be positive, got {lambda}")).into());
    }
    let at = |p: f64| AirborneScenario {
        p_su_dbm: PowerDbm(p),
        lambda_su: lambda,
        ..template.clone()
    };
    validated(at(0.0).validate(), ())?;
    let beta = template.beta_pu;
    let f = |p: f64| -> Result<f64, SolverError> { Ok(exclusion_exceedance(&at(p), 0.0)? - beta) };
    let (lo, hi) = POWER_BRACKET;
    let (f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo > 0.0 {
        return Ok(FeasibilityResult {
            quantity: Quantity::PowerDbm,
            value: f64::NEG_INFINITY,
            achieved_prob: f_lo + beta,
            iterations: 0,
            bracket: (lo, lo),
            status: SolveStatus::Infeasible,
        });
    }
    if f_hi <= 0.0 {
        return Ok(FeasibilityResult {
            quantity: Quantity::PowerDbm,
            value: hi,
            achieved_prob: f_hi + beta,
            iterations: 0,
            bracket: (hi, hi),
            status: SolveStatus::Unbounded,
        });
    }
    let b = bisect_from(f, lo, hi, f_lo, f_hi, opts.tol_db)?;
    Ok(FeasibilityResult {
        quantity: Quantity::PowerDbm,
        value: b.lo,
        achieved_prob: b.f_lo + beta,
        iterations: b.iterations,
        bracket: (b.lo, b.hi),
        status: SolveStatus::Converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn update_delay_examples() {
        assert_eq!(apply_update_delay(0.0, 300.0, 900.0).unwrap(), 0.0);
        assert_eq!(apply_update_delay(10.0, 60.0, 900.0).unwrap(), 25.0);
        assert_eq!(apply_update_delay(7.5, 0.0, 900.0).unwrap(), 7.5);
        assert!(apply_update_delay(-1.0, 0.0, 900.0).is_err());
    }

    #[test]
    fn update_delay_jumps_at_zero() {
        let eps = 1e-9;
        assert_eq!(apply_update_delay(0.0, 60.0, 900.0).unwrap(), 0.0);
        assert!((apply_update_delay(eps, 60.0, 900.0).unwrap() - (eps + 15.0)).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let b = bisect(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-12).unwrap();
        assert!(b.lo <= 2f64.cbrt() && 2f64.cbrt() <= b.hi);
        assert!(b.hi - b.lo <= 1e-12);
        assert!(b.iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn bisect_rejects_non_monotone() {
        assert!(matches!(
            bisect(|x| Ok(x * x - 0.5), -1.0, 1.0, 1e-9),
            Err(SolverError::NotMonotone { .. })
        ));
        // Detected at a midpoint.
        let f = |x: f64| Ok(if (0.4..0.6).contains(&x) { -5.0 } else { x - 0.8 });
        assert!(matches!(bisect(f, 0.0, 1.0, 1e-9), Err(SolverError::NotMonotone { .. })));
    }

    #[test]
    fn bisect_reports_iteration_cap() {
        assert!(matches!(
            bisect(Ok, -1.0, 1.0, 0.0),
            Err(SolverError::Iterations(_))
        ));
    }

    #[test]
    fn empty_field_is_unbounded() {
        for lambda_su in [0.0, 1e-40] {
            let s = TransponderScenario {
                lambda_su,
                ..Default::default()
            };
            let r = solve_ithr(&s).unwrap();
            assert_eq!(r.status, SolveStatus::Unbounded);
            assert_eq!(r.value, ITHR_LIMITS.1);
        }
    }

    #[test]
    fn solved_threshold_meets_target() {
        let s = TransponderScenario::default();
        let r = solve_ithr(&s).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.achieved_prob <= s.beta_pu);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-4);
        assert!(ithr_exceedance(&s, r.bracket.1).unwrap() > s.beta_pu);
    }

    #[test]
    fn threshold_tightens_with_density() {
        let a = solve_ithr(&TransponderScenario::default()).unwrap().value;
        let b = solve_ithr(&TransponderScenario {
            lambda_su: 200.0,
            ..Default::default()
        })
        .unwrap()
        .value;
        assert!(b < a);
    }

    #[test]
    fn zero_floor_is_unbounded() {
        let r = max_density_for_power(&TransponderScenario::default(), 1.0, 0.0, 5.0).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
        assert!(max_density_for_power(&TransponderScenario::default(), 1.0, 1.0, 5.0).is_err());
    }

    #[test]
    fn no_exclusion_at_high_acr() {
        let s = AirborneScenario {
            acr_db: 60.0,
            margin_db: 10.0,
            ..Default::default()
        };
        let r = solve_exclusion_radius(&s).unwrap();
        assert_eq!((r.value, r.status), (0.0, SolveStatus::Converged));
    }

    #[test]
    fn vanishing_threshold_needs_whole_disc() {
        let s = AirborneScenario {
            a_thr_dbm: PowerDbm(-400.0),
            ..Default::default()
        };
        let r = solve_exclusion_radius(&s).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.value > s.r_max_km - 1e-2);
    }

    #[test]
    fn exclusion_radius_meets_target() {
        let s = AirborneScenario {
            acr_db: 30.0,
            margin_db: 10.0,
            ..Default::default()
        };
        let r = solve_exclusion_radius(&s).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.value > 0.0);
        assert!(exclusion_exceedance(&s, r.value).unwrap() <= s.beta_pu);
        assert!(exclusion_exceedance(&s, r.bracket.0).unwrap() > s.beta_pu);
    }

    #[test]
    fn sparse_field_power_is_unbounded() {
        let r = max_power_no_exclusion(&AirborneScenario::default(), 1e-40).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
        assert!(max_power_no_exclusion(&AirborneScenario::default(), 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn exclusion_shrinks_with_acr(acr in 0.0f64..50.0, d in 1.0f64..20.0) {
            let at = |acr_db| AirborneScenario { acr_db, margin_db: 10.0, ..Default::default() };
            let wide = solve_exclusion_radius(&at(acr)).unwrap().value;
            let narrow = solve_exclusion_radius(&at(acr + d)).unwrap().value;
            prop_assert!(narrow <= wide + 1e-3);
        }

        #[test]
        fn delay_is_identity_or_shift(r in 0.0f64..100.0, t in 0.0f64..600.0, v in 0.0f64..1000.0) {
            let out = apply_update_delay(r, t, v).unwrap();
            if r > 0.0 {
                prop_assert!((out - (r + t * v / 3600.0)).abs() < 1e-12);
            } else {
                prop_assert_eq!(out, 0.0);
            }
        }
    }
}
