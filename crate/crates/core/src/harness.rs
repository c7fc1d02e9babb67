//! Convergence studies and their CSV/text output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::assembly::{Coefficients, Discretization, Permeability, VProjection};
use crate::error::{Error, Result};
use crate::estimators::{format_g, Aggregate, CoupledEstimator, EstimatorOptions, REPORT_CSV_HEADER};
use crate::heat::run_heat_level;
use crate::manufactured::{instant_error, interval_error, BenchmarkSolution, ExactSolution, SpaceTimeError};
use crate::mesh::{structured_unit_square, BoundaryTag, Diagonal};
use crate::quadrature::time_rule_5;
use crate::stepper::{BiotStepper, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// `tau = c h` refined together with `h`.
    CoupledSimultaneous,
    /// One `tau` for every level.
    CoupledFixedTau,
    Heat,
}

impl StudyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyKind::CoupledSimultaneous => "coupled-sim",
            StudyKind::CoupledFixedTau => "coupled-fixed",
            StudyKind::Heat => "heat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coupled-sim" | "coupled-simultaneous" => Ok(StudyKind::CoupledSimultaneous),
            "coupled-fixed" | "coupled-fixed-tau" => Ok(StudyKind::CoupledFixedTau),
            "heat" => Ok(StudyKind::Heat),
            _ => Err(Error::Config(format!("unknown study '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    Ratio(f64),
    Fixed(f64),
}

impl TauRule {
    pub fn tau(&self, h: f64) -> f64 {
        match *self {
            TauRule::Ratio(c) => c * h,
            TauRule::Fixed(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub k_min: u32,
    pub k_max: u32,
    pub tau: TauRule,
    pub final_time: f64,
    pub coefficients: Coefficients,
    pub out: Option<PathBuf>,
    pub squared_div: bool,
    pub e2_alpha: bool,
    pub include_data: bool,
    pub projection: VProjection,
    pub diagonal: Diagonal,
}

impl StudyConfig {
    /// Defaults of each study: `tau = 0.4 h`, `T = 1`, `k = 1..5` for the
    /// simultaneous study, `tau = 1e-3`, `T = 0.2`, `k = 1..4` for the
    /// fixed-step study and `tau = 0.4 h`, `T = 1`, `k = 2..4` for heat.
    pub fn for_study(study: StudyKind) -> Self {
        let (k_min, k_max, tau, final_time) = match study {
            StudyKind::CoupledSimultaneous => (1, 5, TauRule::Ratio(0.4), 1.0),
            StudyKind::CoupledFixedTau => (1, 4, TauRule::Fixed(1e-3), 0.2),
            StudyKind::Heat => (2, 4, TauRule::Ratio(0.4), 1.0),
        };
        Self {
            study,
            k_min,
            k_max,
            tau,
            final_time,
            coefficients: Coefficients::benchmark(),
            out: None,
            squared_div: true,
            e2_alpha: true,
            include_data: false,
            projection: VProjection::default(),
            diagonal: Diagonal::default(),
        }
    }

    /// Fixed `tau = 5e-5`, `T = 1`, `k = 1..6`.
    pub fn full_scale_fixed() -> Self {
        Self {
            k_max: 6,
            tau: TauRule::Fixed(5e-5),
            final_time: 1.0,
            ..Self::for_study(StudyKind::CoupledFixedTau)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_max < self.k_min {
            return Err(Error::Config(format!("need 1 <= kmin <= kmax, got {}..{}", self.k_min, self.k_max)));
        }
        if self.k_max > 12 {
            return Err(Error::InvalidLevel(i64::from(self.k_max)));
        }
        let t = match self.tau {
            TauRule::Ratio(c) => c,
            TauRule::Fixed(t) => t,
        };
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidTimeStep(t));
        }
        if !(self.final_time > 0.0) || !self.final_time.is_finite() {
            return Err(Error::Config(format!("final time must be positive, got {}", self.final_time)));
        }
        self.coefficients.validate(0).or_else(|e| match (&self.coefficients.permeability, e) {
            (Permeability::PerElement(_), Error::DimensionMismatch { .. }) => Ok(()),
            (_, e) => Err(e),
        })
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(self)
    }

    /// Reads a config file; the `study` key, if present, selects the
    /// defaults the remaining keys override.
    pub fn from_text(text: &str) -> Result<Self> {
        let study = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "study")
            .map(|(_, v)| StudyKind::parse(v.trim()))
            .transpose()?
            .unwrap_or(StudyKind::CoupledSimultaneous);
        Self::for_study(study).apply_text(text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Config(format!("'{key}' expects a number, got '{v}'")));
        let int = |v: &str| v.parse::<u32>().map_err(|_| Error::Config(format!("'{key}' expects an integer, got '{v}'")));
        let flag = |v: &str| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::Config(format!("'{key}' expects true/false, got '{v}'"))),
        };
        match key {
            "study" => self.study = StudyKind::parse(value)?,
            "kmin" => self.k_min = int(value)?,
            "kmax" => self.k_max = int(value)?,
            "tau-ratio" => self.tau = TauRule::Ratio(num(value)?),
            "tau" => self.tau = TauRule::Fixed(num(value)?),
            "T" => self.final_time = num(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "include-data-osc" => self.include_data = flag(value)?,
            "wnorm-unsquared" => self.squared_div = !flag(value)?,
            "e2-no-alpha" => self.e2_alpha = !flag(value)?,
            "projection" => {
                self.projection = match value {
                    "unconstrained" => VProjection::Unconstrained,
                    "constrained" => VProjection::Constrained,
                    _ => return Err(Error::Config(format!("unknown projection '{value}'"))),
                }
            }
            "diagonal" => self.diagonal = Diagonal::parse(value)?,
            "mu" => self.coefficients.mu = num(value)?,
            "lambda" => self.coefficients.lambda = num(value)?,
            "alpha" => self.coefficients.alpha = num(value)?,
            "beta" => self.coefficients.beta = num(value)?,
            "permeability" => {
                let k = num(value)?;
                self.coefficients.permeability = Permeability::Constant([[k, 0.0], [0.0, k]]);
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn estimator_options(&self) -> EstimatorOptions {
        EstimatorOptions {
            e2_alpha: self.e2_alpha,
            squared_div: self.squared_div,
            projection: self.projection,
        }
    }
}

/// One row of a level's time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub n: usize,
    pub t: f64,
    pub e: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub k: u32,
    pub h: f64,
    pub tau: f64,
    pub steps: usize,
    /// Space-time error `E_k`.
    pub error: f64,
    /// Aggregate indicator.
    pub estimator: f64,
    pub series: Vec<SeriesRow>,
    /// Formatted scalar estimator rows, one per step.
    pub report_rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub k: u32,
    pub h: f64,
    pub tau: f64,
    pub error: f64,
    pub estimator: f64,
    pub efficiency: f64,
    pub error_ratio: Option<f64>,
    pub estimator_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub study: StudyKind,
    pub levels: Vec<LevelResult>,
}

impl StudyResult {
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let prev = i.checked_sub(1).map(|j| &self.levels[j]);
                SummaryRow {
                    k: l.k,
                    h: l.h,
                    tau: l.tau,
                    error: l.error,
                    estimator: l.estimator,
                    efficiency: l.estimator / l.error,
                    error_ratio: prev.map(|p| p.error / l.error),
                    estimator_ratio: prev.map(|p| p.estimator / l.estimator),
                }
            })
            .collect()
    }
}

/// A failed study with every level completed before the failure.
#[derive(Debug)]
pub struct StudyFailure {
    pub partial: StudyResult,
    pub error: Error,
}

impl std::fmt::Display for StudyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (completed levels: {})", self.error, self.partial.levels.len())
    }
}

impl std::error::Error for StudyFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn step_failure(k: u32, n: usize, e: Error) -> Error {
    match e {
        e @ Error::StepFailure { .. } => e,
        e => Error::StepFailure {
            level: k,
            step: n,
            source: Box::new(e),
        },
    }
}

/// Runs the coupled benchmark on level `k`.
pub fn run_coupled_level(config: &StudyConfig, k: u32) -> Result<LevelResult> {
    let h = 0.5f64.powi(k as i32);
    let grid = TimeGrid::with_step(config.final_time, config.tau.tau(h))?;
    let disc = Discretization::new(structured_unit_square(i64::from(k), config.diagonal, |_, _| BoundaryTag::Gamma1)?);
    let coeffs = config.coefficients.clone();
    coeffs.validate(disc.n_triangles())?;
    let exact = BenchmarkSolution::new(coeffs.clone());
    let mut stepper = BiotStepper::new(&disc, coeffs.clone())?;
    let mut estimator = CoupledEstimator::new(&disc, coeffs, config.estimator_options())?;
    let rule = time_rule_5();

    let init = stepper
        .initial_state(|x| exact.f(0.0, x))
        .map_err(|e| step_failure(k, 0, e))?;
    let mut error = SpaceTimeError::new(config.squared_div);
    let mut agg = Aggregate::default();
    let mut series = Vec::with_capacity(grid.n_steps());
    let mut report_rows = Vec::with_capacity(grid.n_steps());

    let mut prev = init;
    for n in 1..=grid.n_steps() {
        let (t0, t1, tau) = (grid.t(n - 1), grid.t(n), grid.tau(n));
        let cur = stepper
            .step(&prev, n, tau, |x| exact.f(t1, x), |x| exact.g(t1, x))
            .map_err(|e| step_failure(k, n, e))?;
        error.add(&interval_error(&disc, &exact, &prev, &cur, t0, tau, &rule));
        let report = estimator
            .report(stepper.forms(), &exact, &prev, &cur, t0, t1)
            .map_err(|e| step_failure(k, n, e))?;
        agg.add(&report);
        let e_n = instant_error(&disc, &exact, &prev, &cur, t1, tau).total_sq(config.squared_div).sqrt();
        series.push(SeriesRow {
            n,
            t: t1,
            e: e_n,
            eps: report.eps(),
        });
        report_rows.push(report.csv_row());
        prev = cur;
    }
    Ok(LevelResult {
        k,
        h,
        tau: grid.tau(1),
        steps: grid.n_steps(),
        error: error.value(),
        estimator: agg.value(config.include_data),
        series,
        report_rows,
    })
}

fn run_level(config: &StudyConfig, k: u32) -> Result<LevelResult> {
    match config.study {
        StudyKind::CoupledSimultaneous | StudyKind::CoupledFixedTau => run_coupled_level(config, k),
        StudyKind::Heat => {
            let h = 0.5f64.powi(k as i32);
            let grid = TimeGrid::with_step(config.final_time, config.tau.tau(h))?;
            let lvl = run_heat_level(k, config.diagonal, &config.coefficients, &grid, config.squared_div, config.include_data)?;
            let report_rows = lvl
                .reports
                .iter()
                .map(|r| {
                    let vals = [
                        r.t,
                        r.eta_time,
                        r.e_tilde_time,
                        r.eta_tilde.iter().sum(),
                        r.e3.iter().sum(),
                        r.e3t.iter().sum(),
                        r.eta_space(),
                        r.eps(),
                        r.data,
                    ];
                    std::iter::once(r.n.to_string())
                        .chain(vals.iter().map(|v| format_g(*v)))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect();
            Ok(LevelResult {
                k,
                h,
                tau: lvl.tau,
                steps: grid.n_steps(),
                error: lvl.error,
                estimator: lvl.estimator,
                series: lvl.series.iter().map(|&(n, t, e, eps)| SeriesRow { n, t, e, eps }).collect(),
                report_rows,
            })
        }
    }
}

/// Runs every level of the study; on failure returns the levels finished so
/// far together with the error.
pub fn run_study(config: &StudyConfig) -> std::result::Result<StudyResult, StudyFailure> {
    run_study_with(config, |_| Ok(()))
}

/// Like [`run_study`], calling `on_level` after each completed level.
pub fn run_study_with(
    config: &StudyConfig,
    mut on_level: impl FnMut(&LevelResult) -> Result<()>,
) -> std::result::Result<StudyResult, StudyFailure> {
    let mut result = StudyResult {
        study: config.study,
        levels: Vec::new(),
    };
    if let Err(error) = config.validate() {
        return Err(StudyFailure { partial: result, error });
    }
    for k in config.k_min..=config.k_max {
        match run_level(config, k).and_then(|l| on_level(&l).map(|_| l)) {
            Ok(level) => result.levels.push(level),
            Err(error) => return Err(StudyFailure { partial: result, error }),
        }
    }
    Ok(result)
}

pub const SUMMARY_HEADER: &str = "k,h,tau,E,Est,Est_over_E,E_ratio,Est_ratio";
pub const SERIES_HEADER: &str = "n,t_n,e_n,eps_n,ratio";
pub const HEAT_REPORT_HEADER: &str = "n,t_n,eta_time,E_tilde_time,eta_tilde_space,E3,E3t,eta_space,eps_n,data";

pub fn summary_csv(result: &StudyResult) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(format_g).unwrap_or_default();
    for r in result.summary() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k,
            format_g(r.h),
            format_g(r.tau),
            format_g(r.error),
            format_g(r.estimator),
            format_g(r.efficiency),
            opt(r.error_ratio),
            opt(r.estimator_ratio)
        );
    }
    out
}

pub fn series_csv(level: &LevelResult) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for s in &level.series {
        let _ = writeln!(out, "{},{},{},{},{}", s.n, format_g(s.t), format_g(s.e), format_g(s.eps), format_g(s.eps / s.e));
    }
    out
}

fn report_csv(study: StudyKind, level: &LevelResult) -> String {
    let header = if study == StudyKind::Heat { HEAT_REPORT_HEADER } else { REPORT_CSV_HEADER };
    let mut out = String::from(header);
    out.push('\n');
    for row in &level.report_rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

/// Aligned plain-text version of the summary table.
pub fn summary_text(result: &StudyResult) -> String {
    let head = ["k", "h", "tau", "E", "Est", "Est/E", "E ratio", "Est ratio"];
    let rows: Vec<Vec<String>> = result
        .summary()
        .iter()
        .map(|r| {
            let opt = |v: Option<f64>| v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.3}"));
            vec![
                r.k.to_string(),
                format_g(r.h),
                format_g(r.tau),
                format!("{:.3}", r.error),
                format!("{:.3}", r.estimator),
                format!("{:.2}", r.efficiency),
                opt(r.error_ratio),
                opt(r.estimator_ratio),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..head.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([head[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| -> String {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.push('\n');
        s
    };
    let mut out = format!("study: {}\n", result.study.as_str());
    out.push_str(&line(head.to_vec()));
    for r in &rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Writes one level's series and estimator files into `dir`.
pub fn emit_level(study: StudyKind, level: &LevelResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("series_k{}.csv", level.k)), series_csv(level))?;
    fs::write(dir.join(format!("estimators_k{}.csv", level.k)), report_csv(study, level))?;
    Ok(())
}

/// Writes `summary.csv`, `summary.txt` and the per-level files.
pub fn emit_tables(result: &StudyResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(result))?;
    fs::write(dir.join("summary.txt"), summary_text(result))?;
    for level in &result.levels {
        emit_level(result.study, level, dir)?;
    }
    Ok(())
}

/// Parses a `summary.csv` back into rows.
pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(Error::Config("summary.csv: unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Config(format!("summary.csv: expected 8 fields in '{l}'")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("summary.csv: bad number '{s}'")));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            Ok(SummaryRow {
                k: f[0].parse().map_err(|_| Error::Config(format!("summary.csv: bad level '{}'", f[0])))?,
                h: num(f[1])?,
                tau: num(f[2])?,
                error: num(f[3])?,
                estimator: num(f[4])?,
                efficiency: num(f[5])?,
                error_ratio: opt(f[6])?,
                estimator_ratio: opt(f[7])?,
            })
        })
        .collect()
}
