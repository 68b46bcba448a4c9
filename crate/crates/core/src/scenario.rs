//! Parameter bundles for the two protected DME receivers.
//!
//! Distances are in kilometres everywhere. The path-loss constants below are
//! consistent with that unit: `4.5e-13 * 5^-3.5` is a suburban-Hata-like
//! 148 dB at 5 km, and `5.7e-10` is the 1 GHz free-space constant
//! `(c / 4πf)^2` rescaled from metres to kilometres. Neither unit nor the
//! rescaling is stated alongside the constants in the source material; both
//! are inferred from those two identities.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ValidationError, Violation};
use crate::units::{sigma_db_to_ln, PowerDbm};

/// Harmful-interference probability limit used for both victims.
pub const BETA_PU: f64 = 1e-5;
/// Spectral-aggregation margin for co-channel use (dB).
pub const MARGIN_CO_CHANNEL_DB: f64 = 3.0;
/// Spectral-aggregation margin for adjacent-channel use (dB).
pub const MARGIN_ADJACENT_DB: f64 = 10.0;

/// Which DME endpoint is the victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Transponder,
    Airborne,
}

/// Ground-transponder sharing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderScenario {
    pub p_pu_dbm: PowerDbm,
    pub p_su_dbm: PowerDbm,
    pub g_su_dbi: f64,
    pub g_dme_dbi: f64,
    pub penetration_db: f64,
    /// Linear path-loss constant, distances in km.
    pub c_pathloss: f64,
    pub alpha: f64,
    pub sigma_db: f64,
    /// Correlation of the log-fading on the sensing and interfering channels.
    pub rho: f64,
    /// Secondary users per km².
    pub lambda_su: f64,
    pub r_min_km: f64,
    pub r_max_km: f64,
    pub a_thr_dbm: PowerDbm,
    pub beta_pu: f64,
    pub acr_db: f64,
    pub margin_db: f64,
    /// Saturation level of the secondary receiver front end.
    pub i_sat_dbm: PowerDbm,
    /// Maximum tolerated saturation probability.
    pub beta_su: f64,
}

impl Default for TransponderScenario {
    fn default() -> Self {
        Self {
            p_pu_dbm: PowerDbm(60.0),
            p_su_dbm: PowerDbm(1.0),
            g_su_dbi: 0.0,
            g_dme_dbi: 5.4,
            penetration_db: 10.0,
            c_pathloss: 4.5e-13,
            alpha: 3.5,
            sigma_db: 10.0,
            rho: 0.0,
            lambda_su: 20.0,
            r_min_km: 0.0,
            r_max_km: 200.0,
            a_thr_dbm: PowerDbm(-119.0),
            beta_pu: BETA_PU,
            acr_db: 0.0,
            margin_db: MARGIN_CO_CHANNEL_DB,
            i_sat_dbm: PowerDbm(-30.0),
            beta_su: 0.02,
        }
    }
}

/// Airborne-interrogator sharing problem (free space, no fading).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirborneScenario {
    pub p_pu_dbm: PowerDbm,
    pub p_su_dbm: PowerDbm,
    pub g_su_dbi: f64,
    pub g_dme_dbi: f64,
    pub penetration_db: f64,
    pub c_pathloss: f64,
    pub alpha: f64,
    /// Interrogator height above ground.
    pub h_km: f64,
    /// Location-database update delay.
    pub t_u_s: f64,
    /// Aircraft speed.
    pub v_kmh: f64,
    pub lambda_su: f64,
    pub r_max_km: f64,
    pub a_thr_dbm: PowerDbm,
    pub beta_pu: f64,
    pub acr_db: f64,
    pub margin_db: f64,
}

impl Default for AirborneScenario {
    fn default() -> Self {
        Self {
            p_pu_dbm: PowerDbm(55.0),
            p_su_dbm: PowerDbm(1.0),
            g_su_dbi: 0.0,
            g_dme_dbi: 5.4,
            penetration_db: 10.0,
            c_pathloss: 5.7e-10,
            alpha: 2.0,
            h_km: 1.0,
            t_u_s: 0.0,
            v_kmh: 900.0,
            lambda_su: 20.0,
            r_max_km: 200.0,
            a_thr_dbm: PowerDbm(-111.0),
            beta_pu: BETA_PU,
            acr_db: 0.0,
            margin_db: MARGIN_CO_CHANNEL_DB,
        }
    }
}

/// Parameters shared by both victims' link budgets.
pub trait LinkBudget {
    fn p_su(&self) -> PowerDbm;
    fn g_su_dbi(&self) -> f64;
    fn g_dme_dbi(&self) -> f64;
    fn penetration_db(&self) -> f64;
    fn a_thr(&self) -> PowerDbm;
    fn acr_db(&self) -> f64;
    fn margin_db(&self) -> f64;

    /// Secondary power as seen by the victim antenna, in dBm/MHz.
    fn effective_tx_power_dbm(&self) -> PowerDbm {
        self.p_su()
            .offset_db(self.g_su_dbi() + self.g_dme_dbi() - self.penetration_db())
    }

    /// `A_thr + ACR - margin`, in dBm/MHz.
    fn effective_protection_threshold_dbm(&self) -> PowerDbm {
        self.a_thr().offset_db(self.acr_db() - self.margin_db())
    }
}

macro_rules! impl_link_budget {
    ($t:ty) => {
        impl LinkBudget for $t {
            fn p_su(&self) -> PowerDbm {
                self.p_su_dbm
            }
            fn g_su_dbi(&self) -> f64 {
                self.g_su_dbi
            }
            fn g_dme_dbi(&self) -> f64 {
                self.g_dme_dbi
            }
            fn penetration_db(&self) -> f64 {
                self.penetration_db
            }
            fn a_thr(&self) -> PowerDbm {
                self.a_thr_dbm
            }
            fn acr_db(&self) -> f64 {
                self.acr_db
            }
            fn margin_db(&self) -> f64 {
                self.margin_db
            }
        }
    };
}

impl_link_budget!(TransponderScenario);
impl_link_budget!(AirborneScenario);

/// Effective secondary transmit power in mW: `p_su + g_su + g_dme - penetration`.
pub fn effective_tx_power<S: LinkBudget>(s: &S) -> f64 {
    s.effective_tx_power_dbm().to_mw()
}

/// Interference level the aggregate must stay below, in mW.
pub fn effective_protection_threshold<S: LinkBudget>(s: &S) -> f64 {
    s.effective_protection_threshold_dbm().to_mw()
}

fn check(out: &mut Vec<Violation>, ok: bool, field: &str, message: impl Into<String>) {
    if !ok {
        out.push(Violation::new(field, message));
    }
}

fn finite(out: &mut Vec<Violation>, fields: &[(&str, f64)]) {
    for (name, v) in fields {
        check(out, v.is_finite(), name, format!("must be finite, got {v}"));
    }
}

impl TransponderScenario {
    pub fn sigma_ln(&self) -> f64 {
        sigma_db_to_ln(self.sigma_db)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        finite(
            &mut out,
            &[
                ("p_pu_dbm", self.p_pu_dbm.0),
                ("p_su_dbm", self.p_su_dbm.0),
                ("g_su_dbi", self.g_su_dbi),
                ("g_dme_dbi", self.g_dme_dbi),
                ("penetration_db", self.penetration_db),
                ("a_thr_dbm", self.a_thr_dbm.0),
                ("acr_db", self.acr_db),
                ("margin_db", self.margin_db),
                ("i_sat_dbm", self.i_sat_dbm.0),
                ("r_max_km", self.r_max_km),
            ],
        );
        check(
            &mut out,
            (0.0..=1.0).contains(&self.rho),
            "rho",
            format!("must lie in [0, 1], got {}", self.rho),
        );
        check(
            &mut out,
            self.alpha.is_finite() && self.alpha > 2.0,
            "alpha",
            format!("must exceed 2 so the first cumulant is integrable, got {}", self.alpha),
        );
        check(
            &mut out,
            self.c_pathloss.is_finite() && self.c_pathloss > 0.0,
            "c_pathloss",
            format!("must be positive, got {}", self.c_pathloss),
        );
        check(
            &mut out,
            self.sigma_db.is_finite() && self.sigma_db > 0.0,
            "sigma_db",
            format!("must be positive, got {}", self.sigma_db),
        );
        check(
            &mut out,
            self.lambda_su.is_finite() && self.lambda_su >= 0.0,
            "lambda_su",
            format!("must be non-negative, got {}", self.lambda_su),
        );
        check(
            &mut out,
            self.r_min_km.is_finite() && self.r_min_km >= 0.0,
            "r_min_km",
            format!("must be non-negative, got {}", self.r_min_km),
        );
        check(
            &mut out,
            self.r_min_km < self.r_max_km,
            "r_max_km",
            format!(
                "must exceed r_min_km ({} >= {})",
                self.r_min_km, self.r_max_km
            ),
        );
        check(
            &mut out,
            self.beta_pu > 0.0 && self.beta_pu < 1.0,
            "beta_pu",
            format!("must lie in (0, 1), got {}", self.beta_pu),
        );
        check(
            &mut out,
            self.beta_su > 0.0 && self.beta_su < 1.0,
            "beta_su",
            format!("must lie in (0, 1), got {}", self.beta_su),
        );
        check(
            &mut out,
            self.margin_db >= 0.0,
            "margin_db",
            format!("must be non-negative, got {}", self.margin_db),
        );
        out
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        into_result(self.violations())
    }

    /// Linear `P_eff * C`, the common scale of every interference term.
    pub fn scale(&self) -> f64 {
        effective_tx_power(self) * self.c_pathloss
    }

    /// `I_thr / (P_eff C)`: the censoring level in path-gain units.
    pub fn normalized_threshold(&self, i_thr_mw: f64) -> f64 {
        i_thr_mw / self.scale()
    }

    pub fn digest(&self) -> String {
        digest_of(ScenarioKind::Transponder, self)
    }
}

impl AirborneScenario {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        finite(
            &mut out,
            &[
                ("p_pu_dbm", self.p_pu_dbm.0),
                ("p_su_dbm", self.p_su_dbm.0),
                ("g_su_dbi", self.g_su_dbi),
                ("g_dme_dbi", self.g_dme_dbi),
                ("penetration_db", self.penetration_db),
                ("a_thr_dbm", self.a_thr_dbm.0),
                ("acr_db", self.acr_db),
                ("margin_db", self.margin_db),
                ("r_max_km", self.r_max_km),
            ],
        );
        check(
            &mut out,
            self.h_km.is_finite() && self.h_km > 0.0,
            "h_km",
            format!("must be positive, got {}", self.h_km),
        );
        check(
            &mut out,
            self.t_u_s.is_finite() && self.t_u_s >= 0.0,
            "t_u_s",
            format!("must be non-negative, got {}", self.t_u_s),
        );
        check(
            &mut out,
            self.v_kmh.is_finite() && self.v_kmh >= 0.0,
            "v_kmh",
            format!("must be non-negative, got {}", self.v_kmh),
        );
        check(
            &mut out,
            self.alpha.is_finite() && self.alpha > 0.0,
            "alpha",
            format!("must be positive, got {}", self.alpha),
        );
        check(
            &mut out,
            self.c_pathloss.is_finite() && self.c_pathloss > 0.0,
            "c_pathloss",
            format!("must be positive, got {}", self.c_pathloss),
        );
        check(
            &mut out,
            self.lambda_su.is_finite() && self.lambda_su >= 0.0,
            "lambda_su",
            format!("must be non-negative, got {}", self.lambda_su),
        );
        check(
            &mut out,
            self.r_max_km > 0.0,
            "r_max_km",
            format!("must be positive, got {}", self.r_max_km),
        );
        check(
            &mut out,
            self.beta_pu > 0.0 && self.beta_pu < 1.0,
            "beta_pu",
            format!("must lie in (0, 1), got {}", self.beta_pu),
        );
        check(
            &mut out,
            self.margin_db >= 0.0,
            "margin_db",
            format!("must be non-negative, got {}", self.margin_db),
        );
        out
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        into_result(self.violations())
    }

    pub fn scale(&self) -> f64 {
        effective_tx_power(self) * self.c_pathloss
    }

    pub fn digest(&self) -> String {
        digest_of(ScenarioKind::Airborne, self)
    }
}

fn into_result(v: Vec<Violation>) -> Result<(), ValidationError> {
    if v.is_empty() {
        Ok(())
    } else {
        Err(ValidationError(v))
    }
}

/// Hex SHA-256 of the canonical JSON form of a scenario.
fn digest_of<T: Serialize>(kind: ScenarioKind, s: &T) -> String {
    let body = serde_json::to_vec(&(kind, s)).expect("scenario serializes");
    Sha256::digest(&body)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Either victim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Transponder(TransponderScenario),
    Airborne(AirborneScenario),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Transponder(_) => ScenarioKind::Transponder,
            Scenario::Airborne(_) => ScenarioKind::Airborne,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        match self {
            Scenario::Transponder(s) => s.violations(),
            Scenario::Airborne(s) => s.violations(),
        }
    }

    pub fn digest(&self) -> String {
        match self {
            Scenario::Transponder(s) => s.digest(),
            Scenario::Airborne(s) => s.digest(),
        }
    }

    /// Names of the numeric fields that can be swept or set from a file.
    pub fn numeric_fields(kind: ScenarioKind) -> &'static [&'static str] {
        match kind {
            ScenarioKind::Transponder => &[
                "p_pu_dbm",
                "p_su_dbm",
                "g_su_dbi",
                "g_dme_dbi",
                "penetration_db",
                "c_pathloss",
                "alpha",
                "sigma_db",
                "rho",
                "lambda_su",
                "r_min_km",
                "r_max_km",
                "a_thr_dbm",
                "beta_pu",
                "acr_db",
                "margin_db",
                "i_sat_dbm",
                "beta_su",
            ],
            ScenarioKind::Airborne => &[
                "p_pu_dbm",
                "p_su_dbm",
                "g_su_dbi",
                "g_dme_dbi",
                "penetration_db",
                "c_pathloss",
                "alpha",
                "h_km",
                "t_u_s",
                "v_kmh",
                "lambda_su",
                "r_max_km",
                "a_thr_dbm",
                "beta_pu",
                "acr_db",
                "margin_db",
            ],
        }
    }

    /// Sets a numeric field by name. Returns `false` for unknown names.
    pub fn set_field(&mut self, name: &str, value: f64) -> bool {
        match self {
            Scenario::Transponder(s) => {
                let slot = match name {
                    "p_pu_dbm" => &mut s.p_pu_dbm.0,
                    "p_su_dbm" => &mut s.p_su_dbm.0,
                    "g_su_dbi" => &mut s.g_su_dbi,
                    "g_dme_dbi" => &mut s.g_dme_dbi,
                    "penetration_db" => &mut s.penetration_db,
                    "c_pathloss" => &mut s.c_pathloss,
                    "alpha" => &mut s.alpha,
                    "sigma_db" => &mut s.sigma_db,
                    "rho" => &mut s.rho,
                    "lambda_su" => &mut s.lambda_su,
                    "r_min_km" => &mut s.r_min_km,
                    "r_max_km" => &mut s.r_max_km,
                    "a_thr_dbm" => &mut s.a_thr_dbm.0,
                    "beta_pu" => &mut s.beta_pu,
                    "acr_db" => &mut s.acr_db,
                    "margin_db" => &mut s.margin_db,
                    "i_sat_dbm" => &mut s.i_sat_dbm.0,
                    "beta_su" => &mut s.beta_su,
                    _ => return false,
                };
                *slot = value;
            }
            Scenario::Airborne(s) => {
                let slot = match name {
                    "p_pu_dbm" => &mut s.p_pu_dbm.0,
                    "p_su_dbm" => &mut s.p_su_dbm.0,
                    "g_su_dbi" => &mut s.g_su_dbi,
                    "g_dme_dbi" => &mut s.g_dme_dbi,
                    "penetration_db" => &mut s.penetration_db,
                    "c_pathloss" => &mut s.c_pathloss,
                    "alpha" => &mut s.alpha,
                    "h_km" => &mut s.h_km,
                    "t_u_s" => &mut s.t_u_s,
                    "v_kmh" => &mut s.v_kmh,
                    "lambda_su" => &mut s.lambda_su,
                    "r_max_km" => &mut s.r_max_km,
                    "a_thr_dbm" => &mut s.a_thr_dbm.0,
                    "beta_pu" => &mut s.beta_pu,
                    "acr_db" => &mut s.acr_db,
                    "margin_db" => &mut s.margin_db,
                    _ => return false,
                };
                *slot = value;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_one_effective_power() {
        let s = TransponderScenario::default();
        assert!((s.effective_tx_power_dbm().dbm() - (-3.6)).abs() < 1e-12);
        let want = 10f64.powf(-0.36);
        assert!(((effective_tx_power(&s) - want) / want).abs() < 1e-12);
    }

    #[test]
    fn effective_power_identities() {
        let mut s = AirborneScenario {
            p_su_dbm: PowerDbm(0.0),
            g_su_dbi: 0.0,
            g_dme_dbi: 0.0,
            penetration_db: 0.0,
            ..AirborneScenario::default()
        };
        assert_eq!(effective_tx_power(&s), 1.0);
        s.p_su_dbm = PowerDbm(10.0);
        s.penetration_db = 10.0;
        assert_eq!(effective_tx_power(&s), 1.0);
    }

    #[test]
    fn protection_threshold_examples() {
        let mut s = TransponderScenario::default();
        assert_eq!(s.effective_protection_threshold_dbm().dbm(), -122.0);
        s.acr_db = 60.0;
        s.margin_db = 10.0;
        assert_eq!(s.effective_protection_threshold_dbm().dbm(), -69.0);
        s.acr_db = 0.0;
        s.margin_db = 0.0;
        assert_eq!(effective_protection_threshold(&s), PowerDbm(-119.0).to_mw());
    }

    #[test]
    fn hata_like_loss_at_five_km() {
        let s = TransponderScenario::default();
        let loss_db = -10.0 * (s.c_pathloss * 5f64.powf(-s.alpha)).log10();
        assert!((loss_db - 147.9).abs() < 0.1, "{loss_db}");
    }

    #[test]
    fn free_space_constant_matches_one_ghz_in_km() {
        let c = 299_792_458.0;
        let f = 1e9;
        let per_m2 = (c / (4.0 * std::f64::consts::PI * f)).powi(2);
        let per_km2 = per_m2 / 1e6;
        let s = AirborneScenario::default();
        assert!(((per_km2 - s.c_pathloss) / s.c_pathloss).abs() < 0.01, "{per_km2:e}");
    }

    #[test]
    fn defaults_validate() {
        TransponderScenario::default().validate().unwrap();
        AirborneScenario::default().validate().unwrap();
    }

    #[test]
    fn every_violation_is_reported() {
        let s = TransponderScenario {
            rho: 1.5,
            r_min_km: 10.0,
            r_max_km: 5.0,
            sigma_db: 0.0,
            beta_pu: 1.0,
            ..TransponderScenario::default()
        };
        let fields: Vec<_> = s.violations().into_iter().map(|v| v.field).collect();
        for f in ["rho", "r_max_km", "sigma_db", "beta_pu"] {
            assert!(fields.iter().any(|x| x == f), "missing {f} in {fields:?}");
        }
        let a = AirborneScenario {
            h_km: 0.0,
            t_u_s: -1.0,
            ..AirborneScenario::default()
        };
        assert_eq!(a.violations().len(), 2);
    }

    #[test]
    fn digest_tracks_content() {
        let a = TransponderScenario::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.rho = 0.5;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        assert_ne!(a.digest(), AirborneScenario::default().digest());
    }

    #[test]
    fn set_field_covers_every_listed_name() {
        for kind in [ScenarioKind::Transponder, ScenarioKind::Airborne] {
            let mut s = match kind {
                ScenarioKind::Transponder => Scenario::Transponder(Default::default()),
                ScenarioKind::Airborne => Scenario::Airborne(Default::default()),
            };
            for name in Scenario::numeric_fields(kind) {
                assert!(s.set_field(name, 1.0), "{name}");
            }
            assert!(!s.set_field("nope", 1.0));
        }
    }

    proptest! {
        #[test]
        fn threshold_monotone(acr in 0.0f64..80.0, d_acr in 0.01f64..10.0,
                              margin in 0.0f64..20.0, d_margin in 0.01f64..10.0) {
            let base = TransponderScenario { acr_db: acr, margin_db: margin, ..Default::default() };
            let more_acr = TransponderScenario { acr_db: acr + d_acr, ..base.clone() };
            let more_margin = TransponderScenario { margin_db: margin + d_margin, ..base.clone() };
            let t = effective_protection_threshold(&base);
            prop_assert!(effective_protection_threshold(&more_acr) > t);
            prop_assert!(effective_protection_threshold(&more_margin) < t);
        }
    }
}
