//! Scenario orchestration and tabular output.
//!
//! A scenario turns a configuration into an ordered result table: `fringe`
//! emits raw coincidence counters versus θ_A, `correlation` adds the
//! correlation estimate per point, `chsh` runs the four Bell settings with
//! four-run symmetrization and appends the Bell parameter, and `oracle`
//! emits the closed-form values at the same settings without sampling.
//! Identical configuration and seed produce byte-identical CSV output.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::analysis::{chsh_s, estimate_e, AnalysisError, CorrelationEstimate};
use crate::config::{ExperimentConfig, ScenarioKind};
use crate::detection::{analytic_correlation, AnalyzerSetting};
use crate::model::ModelError;
use crate::montecarlo::{
    run_point_partitioned, run_symmetrized_partitioned, CoincidenceCounts,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("invalid detector bank: {0}")]
    InvalidBank(String),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One output row. Inapplicable fields are `None` and serialize as empty
/// CSV cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: ScenarioKind,
    pub theta_a_deg: Option<f64>,
    pub theta_b_deg: Option<f64>,
    pub c13: Option<u64>,
    pub c14: Option<u64>,
    pub c23: Option<u64>,
    pub c24: Option<u64>,
    pub trials: Option<u64>,
    pub e_value: Option<f64>,
    pub sigma_e: Option<f64>,
    pub s_value: Option<f64>,
    pub sigma_s: Option<f64>,
    pub seed: u64,
}

impl ResultRow {
    fn empty(scenario: ScenarioKind, seed: u64) -> Self {
        Self {
            scenario,
            theta_a_deg: None,
            theta_b_deg: None,
            c13: None,
            c14: None,
            c23: None,
            c24: None,
            trials: None,
            e_value: None,
            sigma_e: None,
            s_value: None,
            sigma_s: None,
            seed,
        }
    }

    fn with_setting(mut self, setting: &AnalyzerSetting) -> Self {
        self.theta_a_deg = Some(setting.theta_a_deg);
        self.theta_b_deg = Some(setting.theta_b_deg);
        self
    }

    fn with_counts(mut self, counts: &CoincidenceCounts) -> Self {
        self.c13 = Some(counts.c13());
        self.c14 = Some(counts.c14());
        self.c23 = Some(counts.c23());
        self.c24 = Some(counts.c24());
        self.trials = Some(counts.trials);
        self
    }
}

/// Ordered result rows with a fixed column schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Exact header line of the CSV schema.
pub const CSV_HEADER: &str =
    "scenario,theta_a_deg,theta_b_deg,c13,c14,c23,c24,trials,E,sigma_E,S,sigma_S,seed";

/// Deterministic per-point seed spacing (odd 64-bit golden-ratio step), so
/// every measurement point draws from its own stream family while the
/// whole run stays reproducible from the single master seed.
const POINT_SEED_STEP: u64 = 0x9E37_79B9_7F4A_7C15;

fn point_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(index.wrapping_mul(POINT_SEED_STEP))
}

/// The four CHSH settings in the role order
/// (θ_A,θ_B), (θ_A',θ_B), (θ_A,θ_B'), (θ_A',θ_B').
fn chsh_settings(angles: (f64, f64, f64, f64)) -> [AnalyzerSetting; 4] {
    let (a, ap, b, bp) = angles;
    [
        AnalyzerSetting::new(a, b),
        AnalyzerSetting::new(ap, b),
        AnalyzerSetting::new(a, bp),
        AnalyzerSetting::new(ap, bp),
    ]
}

/// Runs the configured scenario and returns the result table.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ResultTable, ScenarioError> {
    config
        .bank
        .validate()
        .map_err(ScenarioError::InvalidBank)?;
    let state = config.effective_state()?;
    let single = config.single_channel()?;
    let trials = config.trials_per_point();
    let seed = config.seed;
    let kind = config.scenario;
    let mut rows = Vec::new();

    let sample_point =
        |setting: &AnalyzerSetting, point_index: u64| -> CoincidenceCounts {
            let point_seed = point_seed(seed, point_index);
            if config.symmetrize || kind == ScenarioKind::Chsh {
                // Spread the per-point budget over the four symmetrization
                // runs, rounding up so the total is never undershot.
                let per_run = trials.div_ceil(4);
                run_symmetrized_partitioned(
                    &state,
                    &single,
                    setting,
                    &config.bank,
                    per_run,
                    point_seed,
                    config.workers,
                )
            } else {
                run_point_partitioned(
                    &state,
                    &single,
                    setting,
                    &config.bank,
                    trials,
                    point_seed,
                    config.workers,
                )
            }
        };

    match kind {
        ScenarioKind::Fringe => {
            let mut point = 0u64;
            for &theta_b in &config.theta_b_list_deg {
                for &theta_a in &config.theta_a_list_deg {
                    let setting = AnalyzerSetting::new(theta_a, theta_b);
                    let counts = sample_point(&setting, point);
                    point += 1;
                    rows.push(
                        ResultRow::empty(kind, seed)
                            .with_setting(&setting)
                            .with_counts(&counts),
                    );
                }
            }
        }
        ScenarioKind::Correlation => {
            let mut point = 0u64;
            for &theta_b in &config.theta_b_list_deg {
                for &theta_a in &config.theta_a_list_deg {
                    let setting = AnalyzerSetting::new(theta_a, theta_b);
                    let counts = sample_point(&setting, point);
                    point += 1;
                    let est = estimate_e(&counts, setting)?;
                    let mut row = ResultRow::empty(kind, seed)
                        .with_setting(&setting)
                        .with_counts(&counts);
                    row.e_value = Some(est.e_value);
                    row.sigma_e = Some(est.sigma);
                    rows.push(row);
                }
            }
        }
        ScenarioKind::Chsh => {
            let settings = chsh_settings(config.chsh_angles_deg);
            let mut estimates = Vec::with_capacity(4);
            for (i, setting) in settings.iter().enumerate() {
                let counts = sample_point(setting, i as u64);
                let est = estimate_e(&counts, *setting)?;
                let mut row = ResultRow::empty(kind, seed)
                    .with_setting(setting)
                    .with_counts(&counts);
                row.e_value = Some(est.e_value);
                row.sigma_e = Some(est.sigma);
                rows.push(row);
                estimates.push(est);
            }
            let bell = chsh_s(&estimates[0], &estimates[1], &estimates[2], &estimates[3])?;
            let mut row = ResultRow::empty(kind, seed);
            row.s_value = Some(bell.s_value);
            row.sigma_s = Some(bell.sigma);
            rows.push(row);
        }
        ScenarioKind::Oracle => {
            let settings = chsh_settings(config.chsh_angles_deg);
            let mut estimates = Vec::with_capacity(4);
            for setting in &settings {
                let e = analytic_correlation(&state, setting, config.visibility);
                let mut row = ResultRow::empty(kind, seed).with_setting(setting);
                row.e_value = Some(e);
                rows.push(row);
                estimates.push(CorrelationEstimate {
                    e_value: e,
                    sigma: 0.0,
                    setting: *setting,
                    n_coincidences: 0,
                });
            }
            let bell = chsh_s(&estimates[0], &estimates[1], &estimates[2], &estimates[3])?;
            let mut row = ResultRow::empty(kind, seed);
            row.s_value = Some(bell.s_value);
            rows.push(row);
        }
    }

    Ok(ResultTable { rows })
}

/// Serializes a float with six significant digits in plain decimal.
fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let prec = 5 - exp;
    if prec >= 0 {
        format!("{x:.*}", prec as usize)
    } else {
        let scale = 10f64.powi(-prec);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

fn opt_u64(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the table as CSV to any writer; the final line is
/// newline-terminated.
pub fn write_table_to(table: &ResultTable, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.scenario,
            opt_f64(row.theta_a_deg),
            opt_f64(row.theta_b_deg),
            opt_u64(row.c13),
            opt_u64(row.c14),
            opt_u64(row.c23),
            opt_u64(row.c24),
            opt_u64(row.trials),
            opt_f64(row.e_value),
            opt_f64(row.sigma_e),
            opt_f64(row.s_value),
            opt_f64(row.sigma_s),
            row.seed
        )?;
    }
    Ok(())
}

/// Writes the table as CSV to `path`.
pub fn write_table(table: &ResultTable, path: impl AsRef<Path>) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    write_table_to(table, &mut buf)?;
    buf.flush()
}

/// Renders the table to a CSV string.
pub fn table_to_string(table: &ResultTable) -> String {
    let mut out = Vec::new();
    write_table_to(table, &mut out).expect("in-memory write cannot fail");
    String::from_utf8(out).expect("CSV output is ASCII")
}

fn parse_opt_f64(field: &str, line: usize) -> Result<Option<f64>, TableError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| TableError::Parse {
            line,
            reason: format!("bad float `{field}`"),
        })
}

fn parse_opt_u64(field: &str, line: usize) -> Result<Option<u64>, TableError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| TableError::Parse {
            line,
            reason: format!("bad integer `{field}`"),
        })
}

/// Parses CSV text produced by [`write_table_to`].
pub fn parse_table(text: &str) -> Result<ResultTable, TableError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(TableError::Parse {
                line: 1,
                reason: format!("bad header {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 13 {
            return Err(TableError::Parse {
                line,
                reason: format!("expected 13 columns, got {}", fields.len()),
            });
        }
        let scenario: ScenarioKind = fields[0].parse().map_err(|reason| TableError::Parse {
            line,
            reason,
        })?;
        let seed = fields[12].parse().map_err(|_| TableError::Parse {
            line,
            reason: format!("bad seed `{}`", fields[12]),
        })?;
        rows.push(ResultRow {
            scenario,
            theta_a_deg: parse_opt_f64(fields[1], line)?,
            theta_b_deg: parse_opt_f64(fields[2], line)?,
            c13: parse_opt_u64(fields[3], line)?,
            c14: parse_opt_u64(fields[4], line)?,
            c23: parse_opt_u64(fields[5], line)?,
            c24: parse_opt_u64(fields[6], line)?,
            trials: parse_opt_u64(fields[7], line)?,
            e_value: parse_opt_f64(fields[8], line)?,
            sigma_e: parse_opt_f64(fields[9], line)?,
            s_value: parse_opt_f64(fields[10], line)?,
            sigma_s: parse_opt_f64(fields[11], line)?,
            seed,
        });
    }
    Ok(ResultTable { rows })
}

/// Reads a CSV table from `path`.
pub fn read_table(path: impl AsRef<Path>) -> Result<ResultTable, TableError> {
    parse_table(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(fmt_sig6(2.6), "2.60000");
        assert_eq!(fmt_sig6(-0.39073112), "-0.390731");
        assert_eq!(fmt_sig6(78.5), "78.5000");
        assert_eq!(fmt_sig6(0.0), "0.00000");
        assert_eq!(fmt_sig6(0.000123456789), "0.000123457");
        assert_eq!(fmt_sig6(1234567.0), "1234570");
        assert_eq!(fmt_sig6(2.163), "2.16300");
    }

    #[test]
    fn empty_table_is_header_only() {
        let csv = table_to_string(&ResultTable::default());
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn rows_serialize_with_empty_inapplicable_cells() {
        let mut row = ResultRow::empty(ScenarioKind::Oracle, 7);
        row.s_value = Some(2.599772154703968);
        let csv = table_to_string(&ResultTable { rows: vec![row] });
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line, "oracle,,,,,,,,,,2.59977,,7");
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn round_trip_is_stable() {
        let mut a = ResultRow::empty(ScenarioKind::Chsh, 99);
        a.theta_a_deg = Some(78.5);
        a.theta_b_deg = Some(45.0);
        a.c13 = Some(388);
        a.c14 = Some(196);
        a.c23 = Some(111);
        a.c24 = Some(303);
        a.trials = Some(10_000_000);
        a.e_value = Some(0.384);
        a.sigma_e = Some(0.0291);
        let mut b = ResultRow::empty(ScenarioKind::Chsh, 99);
        b.s_value = Some(2.6001);
        b.sigma_s = Some(0.058);
        let table = ResultTable { rows: vec![a, b] };

        let once = table_to_string(&table);
        let reparsed = parse_table(&once).unwrap();
        assert_eq!(table_to_string(&reparsed), once);
        assert_eq!(reparsed.rows.len(), 2);
        assert_eq!(reparsed.rows[0].c13, Some(388));
        assert_eq!(reparsed.rows[1].s_value, Some(2.6001));
    }

    #[test]
    fn parse_rejects_bad_header_and_width() {
        assert!(parse_table("nope\n").is_err());
        let bad = format!("{CSV_HEADER}\noracle,,\n");
        assert!(matches!(
            parse_table(&bad),
            Err(TableError::Parse { line: 2, .. })
        ));
    }
}
