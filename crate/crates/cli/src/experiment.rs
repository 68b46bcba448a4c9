//! Named experiments and their output tables.

use std::io::{self, Write};

use dmeshare::analytic::{
    airborne_cumulants, airborne_exceedance, fit_lognormal, transponder_cumulants,
    transponder_exceedance,
};
use dmeshare::montecarlo::{simulate_airborne, simulate_transponder, sorted_quantile, McSample};
use dmeshare::scenario::effective_protection_threshold;
use dmeshare::solver::{
    apply_update_delay, max_density_for_power, max_power_no_exclusion, solve_exclusion_radius,
    solve_ithr,
};
use dmeshare::{units::linear_to_db, AirborneScenario, PowerDbm, Scenario, TransponderScenario};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ExperimentKind, ExperimentSpec, OutputFormat};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.8e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) => serde_json::Value::Null,
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> io::Result<()> {
        let rows: Vec<Vec<serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::json).collect())
            .collect();
        let doc = json!({
            "experiment": self.experiment,
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)
    }

    pub fn write<W: Write>(&self, format: OutputFormat, w: W) -> io::Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
    }
}

/// Column names after the axis column.
pub fn columns(kind: ExperimentKind, spec: &ExperimentSpec) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Fig3Cdf => &["level", "analytic_dbm", "mc_dbm", "status"],
        ExperimentKind::Fig4Ithr => &["i_thr_dbm", "exceed_prob", "iterations", "status"],
        ExperimentKind::Fig5Frontier => &["lambda_max_per_km2", "transmit_prob", "status"],
        ExperimentKind::Fig6Exclusion => &["t_u_s", "r_thr_km", "r_o_km", "status"],
        ExperimentKind::Fig7Power => &["p_su_max_dbm", "exceed_prob", "status"],
        ExperimentKind::Custom => match spec.scenario {
            Scenario::Transponder(_) => &[
                "i_thr_dbm",
                "mean_mw",
                "variance_mw2",
                "exceed_analytic",
                "mc_mean_mw",
                "exceed_mc",
                "exceed_mc_lo",
                "exceed_mc_hi",
                "status",
            ],
            Scenario::Airborne(_) => &[
                "r_o_km",
                "mean_mw",
                "variance_mw2",
                "exceed_analytic",
                "mc_mean_mw",
                "exceed_mc",
                "exceed_mc_lo",
                "exceed_mc_hi",
                "status",
            ],
        },
    }
}

type Rows = Vec<Vec<Cell>>;
type RowResult = Result<Rows, String>;

/// Runs every sweep value, in parallel, keeping sweep order.
pub fn run_experiment(spec: &ExperimentSpec) -> Table {
    let cols = columns(spec.kind, spec);
    let mut header = vec![spec.axis().to_string()];
    header.extend(cols.iter().map(|c| c.to_string()));
    let values = spec.axis_values();
    let rows: Vec<Rows> = values
        .par_iter()
        .map(|&v| {
            let s = spec.scenario_at(v);
            match run_row(spec, &s) {
                Ok(rows) => rows,
                Err(e) => {
                    log::warn!("{} = {v}: {e}", spec.axis());
                    failed_rows(spec, cols.len())
                }
            }
        })
        .collect();
    let rows = values
        .iter()
        .zip(rows)
        .flat_map(|(&v, rows)| {
            rows.into_iter().map(move |r| {
                let mut full = Vec::with_capacity(r.len() + 1);
                full.push(Cell::Num(v));
                full.extend(r);
                full
            })
        })
        .collect();
    Table {
        experiment: spec.kind.as_str().to_string(),
        columns: header,
        rows,
    }
}

/// Placeholder rows for a sweep value whose computation failed.
fn failed_rows(spec: &ExperimentSpec, width: usize) -> Rows {
    let row = |lead: Option<f64>| {
        let mut r: Vec<Cell> = lead.into_iter().map(Cell::Num).collect();
        while r.len() < width - 1 {
            r.push(Cell::Num(f64::NAN));
        }
        r.push("error".into());
        r
    };
    match spec.kind {
        ExperimentKind::Fig3Cdf => spec.params.levels.iter().map(|&p| row(Some(p))).collect(),
        ExperimentKind::Fig6Exclusion => spec.params.delays_s.iter().map(|&d| row(Some(d))).collect(),
        _ => vec![row(None)],
    }
}

fn run_row(spec: &ExperimentSpec, s: &Scenario) -> RowResult {
    match (spec.kind, s) {
        (ExperimentKind::Fig3Cdf, Scenario::Transponder(t)) => fig3_rows(spec, t),
        (ExperimentKind::Fig4Ithr, Scenario::Transponder(t)) => {
            let r = solve_ithr(t).map_err(|e| e.to_string())?;
            Ok(vec![vec![
                r.value.into(),
                r.achieved_prob.into(),
                (r.iterations as f64).into(),
                r.status.as_str().into(),
            ]])
        }
        (ExperimentKind::Fig5Frontier, Scenario::Transponder(t)) => {
            let r = max_density_for_power(
                t,
                t.p_su_dbm.dbm(),
                spec.params.prob_floor,
                spec.params.r_ref_km,
            )
            .map_err(|e| e.to_string())?;
            Ok(vec![vec![
                r.value.into(),
                r.achieved_prob.into(),
                r.status.as_str().into(),
            ]])
        }
        (ExperimentKind::Fig6Exclusion, Scenario::Airborne(a)) => fig6_rows(spec, a),
        (ExperimentKind::Fig7Power, Scenario::Airborne(a)) => {
            let r = max_power_no_exclusion(a, a.lambda_su).map_err(|e| e.to_string())?;
            Ok(vec![vec![
                r.value.into(),
                r.achieved_prob.into(),
                r.status.as_str().into(),
            ]])
        }
        (ExperimentKind::Custom, Scenario::Transponder(t)) => custom_transponder(spec, t),
        (ExperimentKind::Custom, Scenario::Airborne(a)) => custom_airborne(spec, a),
        (kind, _) => Err(format!("{kind} does not apply to this victim")),
    }
}

fn dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

fn fig3_rows(spec: &ExperimentSpec, t: &TransponderScenario) -> RowResult {
    let mc = spec.mc.ok_or("fig3-cdf needs a Monte Carlo block")?;
    let i_thr = PowerDbm(spec.params.i_thr_dbm).to_mw();
    let k = transponder_cumulants(t, i_thr, 2).map_err(|e| e.to_string())?;
    let fit = fit_lognormal(&k).map_err(|e| e.to_string())?;
    let sample = simulate_transponder(t, i_thr, &mc.options()).map_err(|e| e.to_string())?;
    let sorted = sample.sorted();
    Ok(spec
        .params
        .levels
        .iter()
        .map(|&p| {
            vec![
                p.into(),
                dbm(fit.quantile(p)).into(),
                dbm(sorted_quantile(&sorted, p)).into(),
                "ok".into(),
            ]
        })
        .collect())
}

fn fig6_rows(spec: &ExperimentSpec, a: &AirborneScenario) -> RowResult {
    let r = solve_exclusion_radius(a).map_err(|e| e.to_string())?;
    spec.params
        .delays_s
        .iter()
        .map(|&d| {
            let r_o = apply_update_delay(r.value, d, a.v_kmh).map_err(|e| e.to_string())?;
            Ok(vec![
                d.into(),
                r.value.into(),
                r_o.into(),
                r.status.as_str().into(),
            ])
        })
        .collect()
}

/// Monte Carlo columns: mean, tail probability and its Wilson interval.
fn mc_cells(sample: Option<McSample>, threshold_mw: f64) -> Vec<Cell> {
    match sample {
        Some(s) => {
            let tail = s.empirical_tail(threshold_mw);
            vec![
                s.mean().into(),
                tail.probability.into(),
                tail.lower.into(),
                tail.upper.into(),
            ]
        }
        None => vec![Cell::Num(f64::NAN); 4],
    }
}

fn custom_transponder(spec: &ExperimentSpec, t: &TransponderScenario) -> RowResult {
    let i_thr = PowerDbm(spec.params.i_thr_dbm).to_mw();
    let thr = effective_protection_threshold(t);
    let k = transponder_cumulants(t, i_thr, 2).map_err(|e| e.to_string())?;
    let p = transponder_exceedance(t, i_thr, thr).map_err(|e| e.to_string())?;
    let sample = spec
        .mc
        .map(|mc| simulate_transponder(t, i_thr, &mc.options()))
        .transpose()
        .map_err(|e| e.to_string())?;
    let mut row = vec![
        spec.params.i_thr_dbm.into(),
        k.mean().into(),
        k.variance().into(),
        p.into(),
    ];
    row.extend(mc_cells(sample, thr));
    row.push("ok".into());
    Ok(vec![row])
}

fn custom_airborne(spec: &ExperimentSpec, a: &AirborneScenario) -> RowResult {
    let r_o = spec.params.r_o_km;
    let thr = effective_protection_threshold(a);
    let k = airborne_cumulants(a, r_o, 2).map_err(|e| e.to_string())?;
    let p = airborne_exceedance(a, r_o, thr).map_err(|e| e.to_string())?;
    let sample = spec
        .mc
        .map(|mc| simulate_airborne(a, r_o, &mc.options()))
        .transpose()
        .map_err(|e| e.to_string())?;
    let mut row = vec![r_o.into(), k.mean().into(), k.variance().into(), p.into()];
    row.extend(mc_cells(sample, thr));
    row.push("ok".into());
    Ok(vec![row])
}

/// Monte Carlo sample of the base scenario for raw export.
pub fn export_sample(spec: &ExperimentSpec) -> Result<McSample, String> {
    let mc = spec.mc.ok_or("mc-export needs a Monte Carlo block")?;
    let opts = mc.options();
    match &spec.scenario {
        Scenario::Transponder(t) => {
            simulate_transponder(t, PowerDbm(spec.params.i_thr_dbm).to_mw(), &opts)
        }
        Scenario::Airborne(a) => simulate_airborne(a, spec.params.r_o_km, &opts),
    }
    .map_err(|e| e.to_string())
}

/// Export with the conditioning parameter ahead of the sample header.
pub fn write_export<W: Write>(spec: &ExperimentSpec, sample: &McSample, mut w: W) -> io::Result<()> {
    match spec.scenario {
        Scenario::Transponder(_) => {
            writeln!(w, "# kind = transponder")?;
            writeln!(w, "# i_thr_dbm = {}", spec.params.i_thr_dbm)?;
        }
        Scenario::Airborne(_) => {
            writeln!(w, "# kind = airborne")?;
            writeln!(w, "# r_o_km = {}", spec.params.r_o_km)?;
        }
    }
    sample.write_export(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_spec;

    #[test]
    fn empty_sweep_is_header_only() {
        let spec = parse_spec("kind = transponder\n[experiment]\nkind = fig4-ithr\n[sweep]\naxis = lambda_su\nvalues = []\n").unwrap();
        let t = run_experiment(&spec);
        assert!(t.rows.is_empty());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda_su,i_thr_dbm,exceed_prob,iterations,status\n"
        );
    }

    #[test]
    fn csv_numbers_have_nine_significant_digits() {
        let t = Table {
            experiment: "x".into(),
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![Cell::Num(-123.456789012), "ok".into()]],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n-1.23456789e2,ok\n");
    }

    #[test]
    fn json_layout() {
        let t = Table {
            experiment: "x".into(),
            columns: vec!["a".into()],
            rows: vec![vec![Cell::Num(f64::NAN)], vec![Cell::Num(2.0)]],
        };
        let mut buf = Vec::new();
        t.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["experiment"], "x");
        assert_eq!(v["rows"][0][0], serde_json::Value::Null);
        assert_eq!(v["rows"][1][0], 2.0);
    }

    #[test]
    fn rows_follow_sweep_order() {
        let spec = parse_spec(
            "kind = transponder\n[experiment]\nkind = fig4-ithr\n[sweep]\naxis = lambda_su\nvalues = [1000, 10, 100]\n",
        )
        .unwrap();
        let t = run_experiment(&spec);
        let lead: Vec<_> = t.rows.iter().map(|r| r[0].clone()).collect();
        assert_eq!(lead, vec![Cell::Num(1000.0), Cell::Num(10.0), Cell::Num(100.0)]);
    }

    #[test]
    fn exclusion_vanishes_at_high_rejection() {
        let spec = parse_spec(
            "kind = airborne\n[experiment]\nkind = fig6-exclusion\n[sweep]\naxis = acr_db\nvalues = [30, 60]\n",
        )
        .unwrap();
        let t = run_experiment(&spec);
        assert_eq!(t.rows.len(), 6);
        for row in &t.rows[3..] {
            assert_eq!(row[2], Cell::Num(0.0));
            assert_eq!(row[3], Cell::Num(0.0));
        }
        // With 30 dB of rejection an exclusion disc is needed and the delay widens it.
        let Cell::Num(r0) = t.rows[0][3] else { panic!() };
        let Cell::Num(r300) = t.rows[2][3] else { panic!() };
        assert!(r0 > 0.0);
        assert_eq!(r300, r0 + 75.0);
    }
}
