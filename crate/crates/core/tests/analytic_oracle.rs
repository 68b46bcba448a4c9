//! Cumulants against brute-force integration routes that share no code
//! with the library kernels.

use dmeshare::analytic::{airborne_cumulant, transponder_cumulant};
use dmeshare::montecarlo::small_term_cumulant;
use dmeshare::{AirborneScenario, TransponderScenario};

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `2πλ ∫ r^{1-nα} E[Y^n; r^-α X <= Î] dr` as a double integral over
/// `t = ln r` and the sensing-channel normal `z`, with the interfering
/// channel's independent part integrated out.
fn transponder_oracle(n: u32, s: &TransponderScenario, i_hat: f64) -> f64 {
    let nf = f64::from(n);
    let sigma = s.sigma_ln();
    let rho = s.rho;
    let tilt = nf * rho * sigma;
    let free = (nf * nf * sigma * sigma * (1.0 - rho * rho) / 2.0).exp();
    let t_hi = s.r_max_km.ln();
    let t_lo = if s.r_min_km > 0.0 { s.r_min_km.ln() } else { t_hi - 40.0 };
    let outer = |t: f64| {
        let z_star = (i_hat.ln() + s.alpha * t) / sigma;
        let lo = tilt - 12.0;
        let hi = z_star.min(tilt + 12.0);
        let inner = simpson(|z| phi(z) * (tilt * z).exp(), lo, hi, 2000);
        ((2.0 - nf * s.alpha) * t).exp() * inner
    };
    2.0 * std::f64::consts::PI * s.lambda_su * free * simpson(outer, t_lo, t_hi, 8000)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn transponder_cumulant_matches_double_integral() {
    for rho in [0.0, 0.5, 0.9, 1.0] {
        for i_hat in [1e-4, 5e-3, 1.0] {
            for n in [1, 2] {
                let s = TransponderScenario {
                    rho,
                    ..Default::default()
                };
                let got = transponder_cumulant(n, &s, i_hat).unwrap();
                let want = transponder_oracle(n, &s, i_hat);
                assert!(
                    rel(got, want) < 1e-7,
                    "n={n} rho={rho} i_hat={i_hat}: {got:e} vs {want:e}"
                );
            }
        }
    }
}

#[test]
fn transponder_cumulant_matches_double_integral_on_annulus() {
    for rho in [0.0, 0.7, 1.0] {
        let s = TransponderScenario {
            rho,
            r_min_km: 0.5,
            r_max_km: 30.0,
            alpha: 4.0,
            sigma_db: 6.0,
            ..Default::default()
        };
        for n in [1, 2, 3] {
            let got = transponder_cumulant(n, &s, 2e-2).unwrap();
            let want = transponder_oracle(n, &s, 2e-2);
            assert!(rel(got, want) < 1e-7, "n={n} rho={rho}: {got:e} vs {want:e}");
        }
    }
}

/// Table 1 scenario with `λ = 20`, `Î = 5e-3`; values from an offline
/// `scipy.integrate.dblquad` evaluation of the same double integral.
#[test]
fn transponder_cumulant_matches_offline_reference() {
    let cases = [
        (0.9, 25.37786, 0.1402356),
        (0.99, 20.60672, 0.03587064),
        (0.999, 20.18109, 0.0312986),
        (1.0, 20.13434, 0.030828),
    ];
    for (rho, k1, k2) in cases {
        let s = TransponderScenario {
            rho,
            ..Default::default()
        };
        let got1 = transponder_cumulant(1, &s, 5e-3).unwrap();
        let got2 = transponder_cumulant(2, &s, 5e-3).unwrap();
        assert!(rel(got1, k1) < 2e-5, "rho={rho}: k1 {got1} vs {k1}");
        assert!(rel(got2, k2) < 2e-5, "rho={rho}: k2 {got2} vs {k2}");
    }
}

#[test]
fn bivariate_normal_route_agrees() {
    for rho in [0.0, 0.5, 0.9, 1.0] {
        let s = TransponderScenario {
            rho,
            ..Default::default()
        };
        for n in [1, 2] {
            let i_hat: f64 = 5e-3;
            let closed = transponder_cumulant(n, &s, i_hat).unwrap();
            let phi2 = small_term_cumulant(n, &s, i_hat.ln(), f64::INFINITY).unwrap();
            assert!(rel(phi2, closed) < 1e-7, "n={n} rho={rho}: {phi2:e} vs {closed:e}");
        }
    }
}

#[test]
fn cumulants_are_linear_in_density() {
    let a = TransponderScenario {
        rho: 0.5,
        lambda_su: 20.0,
        ..Default::default()
    };
    let b = TransponderScenario {
        lambda_su: 60.0,
        ..a.clone()
    };
    for n in 1..=4 {
        let ka = transponder_cumulant(n, &a, 1e-3).unwrap();
        let kb = transponder_cumulant(n, &b, 1e-3).unwrap();
        assert!(rel(kb, 3.0 * ka) < 1e-12, "n={n}");
    }
}

fn airborne_oracle(n: u32, s: &AirborneScenario, r_o: f64) -> f64 {
    let nf = f64::from(n);
    let h2 = s.h_km * s.h_km;
    // Substituting u = ln r keeps the integrand smooth over four decades.
    let lo = r_o.max(1e-4).ln();
    let f = |u: f64| {
        let r = u.exp();
        r * r * (h2 + r * r).powf(-nf * s.alpha / 2.0)
    };
    let mut total = simpson(f, lo, s.r_max_km.ln(), 20000);
    if r_o < 1e-4 {
        // The omitted core disc is flat to first order.
        total += 0.5 * 1e-8 * h2.powf(-nf * s.alpha / 2.0);
    }
    2.0 * std::f64::consts::PI * s.lambda_su * total
}

#[test]
fn airborne_cumulant_matches_radial_integral() {
    for alpha in [2.0, 2.5, 3.5] {
        for r_o in [0.0, 25.0] {
            let s = AirborneScenario {
                alpha,
                ..Default::default()
            };
            for n in [1, 2] {
                let got = airborne_cumulant(n, &s, r_o).unwrap();
                let want = airborne_oracle(n, &s, r_o);
                assert!(
                    rel(got, want) < 1e-8,
                    "alpha={alpha} r_o={r_o} n={n}: {got:e} vs {want:e}"
                );
            }
        }
    }
}
