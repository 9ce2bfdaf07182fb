//! Experiment specs, sweeps, and the plain-text files they emit.
//!
//! An experiment directory holds:
//!
//! * `logs/<label>.jsonl`: raw epoch log per job;
//! * `cdf/<label>.tsv`: threshold vs error CDF, one column per estimator;
//! * `trajectory/<label>.tsv`: true and estimated tracks after burn-in;
//! * `sweep.tsv`: per sweep point and estimator, the mean error over
//!   replications with its standard error and detection rates.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{mean, standard_error, summarize, thresholds, RunSummary};
use crate::runtime::{self, read_log, write_log, EpochLog, Estimator, LogHeader, RuntimeConfig};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::types::{NodeKind, Position};

pub const SWEEP_HEADER: &str = "# p2ploc-sweep v1";
pub const CDF_HEADER: &str = "# p2ploc-cdf v1";
pub const TRAJECTORY_HEADER: &str = "# p2ploc-trajectory v1";

/// Empty axes keep the base scenario's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub alpha: Vec<f64>,
    pub n_anchor: Vec<usize>,
    pub n_mobile: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub write_logs: bool,
    pub write_trajectories: bool,
    /// Degree of the least-squares fit added to trajectory files; `None` disables it.
    pub fit_degree: Option<usize>,
    pub cdf_step: f64,
    pub cdf_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            write_logs: true,
            write_trajectories: true,
            fit_degree: Some(5),
            cdf_step: 0.05,
            cdf_points: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub runtime: RuntimeConfig,
    pub sweep: SweepAxes,
    pub replications: usize,
    pub burn_in: usize,
    pub output: OutputConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let runtime = RuntimeConfig {
            estimators: vec![Estimator::ParticleFilter, Estimator::GenieMl],
            ..RuntimeConfig::default()
        };
        ExperimentSpec {
            scenario: ScenarioConfig::default(),
            runtime,
            sweep: SweepAxes::default(),
            replications: 1,
            burn_in: 20,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub n_anchor: usize,
    pub n_mobile: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub point: SweepPoint,
    pub replication: usize,
    pub seed: u64,
}

impl Job {
    pub fn label(&self) -> String {
        format!(
            "a{}_m{}_n{}_s{}",
            self.point.alpha, self.point.n_anchor, self.point.n_mobile, self.seed
        )
    }
}

impl ExperimentSpec {
    /// Parse TOML text, then apply `key.path=value` overrides. Values are
    /// read as TOML scalars or arrays, falling back to bare strings.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse()?;
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::config(format!("override {o:?} is not key=value")))?;
            set_path(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        let spec: ExperimentSpec = table.try_into()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.runtime.validate()?;
        if self.runtime.estimators.is_empty() {
            return Err(Error::config("at least one estimator is required"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if self.output.cdf_points == 0 || !(self.output.cdf_step > 0.0) {
            return Err(Error::config("CDF grid needs a positive step and at least one point"));
        }
        for &a in &self.sweep.alpha {
            self.scenario.params.with_alpha(a)?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let base = &self.scenario;
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let oru = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for alpha in or(&self.sweep.alpha, base.params.alpha()) {
            for n_anchor in oru(&self.sweep.n_anchor, base.n_anchor) {
                for n_mobile in oru(&self.sweep.n_mobile, base.n_mobile) {
                    out.push(SweepPoint { alpha, n_anchor, n_mobile });
                }
            }
        }
        out
    }

    /// Replication `r` of every point uses seed `scenario.seed + r`.
    pub fn jobs(&self) -> Vec<Job> {
        self.points()
            .into_iter()
            .flat_map(|point| {
                (0..self.replications).map(move |replication| Job {
                    point,
                    replication,
                    seed: self.scenario.seed.wrapping_add(replication as u64),
                })
            })
            .collect()
    }

    pub fn scenario_for(&self, job: &Job) -> Result<ScenarioConfig> {
        let mut c = self.scenario.clone();
        c.params = c.params.with_alpha(job.point.alpha)?;
        c.n_anchor = job.point.n_anchor;
        c.n_mobile = job.point.n_mobile;
        c.seed = job.seed;
        if let crate::scenario::AnchorLayout::Explicit { positions } = &c.anchor_layout {
            if positions.len() != c.n_anchor {
                return Err(Error::config("explicit anchor layouts cannot be swept over n_anchor"));
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn cdf_thresholds(&self) -> Vec<f64> {
        thresholds(self.output.cdf_step, self.output.cdf_points)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts = path.split('.').peekable();
    let mut cur = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::config(format!("bad key path {path:?}")));
        }
        if parts.peek().is_none() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("{part:?} in {path:?} is not a table")))?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct JobResult {
    pub job: Job,
    pub summary: RunSummary,
}

#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    pub results: Vec<JobResult>,
    pub failures: Vec<(Job, Error)>,
}

/// Run one job end to end, returning its logs and summary.
pub fn run_job(spec: &ExperimentSpec, job: &Job) -> Result<(Vec<EpochLog>, RunSummary)> {
    let started = Instant::now();
    let scenario = Scenario::generate(&spec.scenario_for(job)?)?;
    let logs = runtime::run(&scenario, &spec.runtime)?;
    let mut summary = summarize(
        &logs,
        &spec.runtime.estimators,
        spec.burn_in,
        &spec.cdf_thresholds(),
        job.seed,
    )?;
    summary.runtime_seconds = started.elapsed().as_secs_f64();
    Ok((logs, summary))
}

/// Run every job, writing per-job files as each finishes and `sweep.tsv` at
/// the end. Failed jobs are reported in the outcome rather than aborting the
/// others.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentOutcome> {
    spec.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let jobs = spec.jobs();
    let finished: Vec<(Job, Result<RunSummary>)> = jobs
        .par_iter()
        .map(|job| {
            let r = run_job(spec, job).and_then(|(logs, summary)| {
                if let Some(dir) = out_dir {
                    write_job_files(spec, job, &logs, &summary, dir)?;
                }
                Ok(summary)
            });
            (*job, r)
        })
        .collect();
    let mut outcome = ExperimentOutcome::default();
    for (job, r) in finished {
        match r {
            Ok(summary) => outcome.results.push(JobResult { job, summary }),
            Err(e) => outcome.failures.push((job, e)),
        }
    }
    if let Some(dir) = out_dir {
        let rows = sweep_rows(spec, &outcome.results);
        write_sweep_table(&rows, BufWriter::new(File::create(dir.join("sweep.tsv"))?))?;
    }
    Ok(outcome)
}

fn write_job_files(spec: &ExperimentSpec, job: &Job, logs: &[EpochLog], summary: &RunSummary, dir: &Path) -> Result<()> {
    let label = job.label();
    let sub = |name: &str| -> Result<PathBuf> {
        let d = dir.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    };
    if spec.output.write_logs {
        let f = File::create(sub("logs")?.join(format!("{label}.jsonl")))?;
        write_log(&LogHeader::new(job.seed, spec.runtime.estimators.clone()), logs, BufWriter::new(f))?;
    }
    write_cdf(summary, BufWriter::new(File::create(sub("cdf")?.join(format!("{label}.tsv")))?))?;
    if spec.output.write_trajectories {
        let f = File::create(sub("trajectory")?.join(format!("{label}.tsv")))?;
        write_trajectories(logs, spec.burn_in, spec.output.fit_degree, BufWriter::new(f))?;
    }
    Ok(())
}

pub fn write_cdf<W: Write>(summary: &RunSummary, mut w: W) -> Result<()> {
    writeln!(w, "{CDF_HEADER}")?;
    let mut head = String::from("threshold");
    for s in &summary.estimators {
        write!(head, "\t{}", s.estimator).expect("string write");
    }
    writeln!(w, "{head}")?;
    for (i, x) in summary.thresholds.iter().enumerate() {
        let mut line = format!("{x}");
        for s in &summary.estimators {
            write!(line, "\t{}", s.cdf[i]).expect("string write");
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Rows are `node t true_x true_y <est_x est_y>... [fit_x fit_y]`, one per
/// mobile node per step after burn-in; the fit smooths particle-filter estimates.
pub fn write_trajectories<W: Write>(logs: &[EpochLog], burn_in: usize, fit_degree: Option<usize>, mut w: W) -> Result<()> {
    let kept: Vec<&EpochLog> = logs.iter().filter(|l| l.t > burn_in).collect();
    let estimators: Vec<Estimator> = kept
        .first()
        .and_then(|l| l.records.iter().find(|r| r.kind == NodeKind::Mobile))
        .map(|r| r.estimates.keys().copied().collect())
        .unwrap_or_default();
    let mobiles: Vec<_> = kept
        .first()
        .map(|l| l.records.iter().filter(|r| r.kind == NodeKind::Mobile).map(|r| r.id).collect())
        .unwrap_or_default();

    writeln!(w, "{TRAJECTORY_HEADER}")?;
    let mut head = String::from("node\tt\ttrue_x\ttrue_y");
    for e in &estimators {
        write!(head, "\t{e}_x\t{e}_y").expect("string write");
    }
    if fit_degree.is_some() {
        head.push_str("\tfit_x\tfit_y");
    }
    writeln!(w, "{head}")?;

    for id in mobiles {
        let rows: Vec<_> = kept
            .iter()
            .filter_map(|l| l.records.iter().find(|r| r.id == id))
            .collect();
        let fit = fit_degree.map(|d| {
            let ts: Vec<f64> = rows.iter().map(|r| r.t as f64).collect();
            let pf: Vec<Position> = rows
                .iter()
                .map(|r| r.estimates.get(&Estimator::ParticleFilter).copied().unwrap_or(r.truth))
                .collect();
            let xs: Vec<f64> = pf.iter().map(|p| p.x).collect();
            let ys: Vec<f64> = pf.iter().map(|p| p.y).collect();
            (PolyFit::new(&ts, &xs, d), PolyFit::new(&ts, &ys, d))
        });
        for r in rows {
            let mut line = format!("{}\t{}\t{}\t{}", id, r.t, r.truth.x, r.truth.y);
            for e in &estimators {
                let p = r.estimates.get(e).copied().unwrap_or(Position::new(f64::NAN, f64::NAN));
                write!(line, "\t{}\t{}", p.x, p.y).expect("string write");
            }
            if let Some((fx, fy)) = &fit {
                write!(line, "\t{}\t{}", fx.eval(r.t as f64), fy.eval(r.t as f64)).expect("string write");
            }
            writeln!(w, "{line}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Least-squares polynomial in a rescaled abscissa `u ∈ [-1, 1]`.
#[derive(Clone, Debug)]
pub struct PolyFit {
    coef: Vec<f64>,
    center: f64,
    scale: f64,
}

impl PolyFit {
    /// Degree is capped at `len - 1`; an empty sample yields the zero polynomial.
    pub fn new(ts: &[f64], ys: &[f64], degree: usize) -> Self {
        let n = ts.len().min(ys.len());
        let (lo, hi) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
        let center = if n > 0 { 0.5 * (lo + hi) } else { 0.0 };
        let scale = if n > 0 && hi > lo { 0.5 * (hi - lo) } else { 1.0 };
        if n == 0 {
            return PolyFit { coef: vec![0.0], center, scale };
        }
        let p = degree.min(n - 1) + 1;
        // normal equations; well conditioned enough for low degree on [-1, 1]
        let mut a = vec![vec![0.0; p + 1]; p];
        for (&t, &y) in ts.iter().zip(ys).take(n) {
            let u = (t - center) / scale;
            let mut pw = vec![1.0; p];
            for j in 1..p {
                pw[j] = pw[j - 1] * u;
            }
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += pw[i] * pw[j];
                }
                a[i][p] += pw[i] * y;
            }
        }
        PolyFit { coef: solve(a), center, scale }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.scale;
        self.coef.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        a.swap(col, piv);
        let d = a[col][col];
        if d.abs() < 1e-300 {
            continue;
        }
        for i in col + 1..n {
            let f = a[i][col] / d;
            for j in col..=n {
                a[i][j] -= f * a[col][j];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = if a[i][i].abs() < 1e-300 { 0.0 } else { (a[i][n] - s) / a[i][i] };
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub n_anchor: usize,
    pub n_mobile: usize,
    pub estimator: Estimator,
    pub replications: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub p_d: Option<f64>,
    pub false_alarm: Option<f64>,
}

/// Aggregate replications per point and estimator, in job order.
pub fn sweep_rows(spec: &ExperimentSpec, results: &[JobResult]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for point in spec.points() {
        let here: Vec<&RunSummary> = results.iter().filter(|r| r.job.point == point).map(|r| &r.summary).collect();
        if here.is_empty() {
            continue;
        }
        let pd: Vec<f64> = here.iter().filter_map(|s| s.detection.p_d).collect();
        let fa: Vec<f64> = here.iter().filter_map(|s| s.detection.false_alarm).collect();
        for &e in &spec.runtime.estimators {
            let means: Vec<f64> = here.iter().filter_map(|s| s.mean_error(e)).collect();
            rows.push(SweepRow {
                alpha: point.alpha,
                n_anchor: point.n_anchor,
                n_mobile: point.n_mobile,
                estimator: e,
                replications: means.len(),
                mean_error: mean(&means).unwrap_or(f64::NAN),
                std_error: standard_error(&means),
                p_d: mean(&pd),
                false_alarm: mean(&fa),
            });
        }
    }
    rows
}

const SWEEP_COLUMNS: &str = "alpha\tn_anchor\tn_mobile\testimator\treplications\tmean_error\tstd_error\tp_d\tfalse_alarm";

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| v.to_string())
}

pub fn write_sweep_table<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.alpha,
            r.n_anchor,
            r.n_mobile,
            r.estimator,
            r.replications,
            r.mean_error,
            r.std_error,
            opt(r.p_d),
            opt(r.false_alarm)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_table<R: BufRead>(r: R) -> Result<Vec<SweepRow>> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, msg: String| Error::Format { line: line + 1, msg };
    match lines.next() {
        Some((_, Ok(h))) if h == SWEEP_HEADER => {}
        _ => return Err(bad(0, "missing sweep header".into())),
    }
    match lines.next() {
        Some((_, Ok(h))) if h == SWEEP_COLUMNS => {}
        _ => return Err(bad(1, "unexpected column header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(bad(i, format!("expected 9 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i, format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad(i, format!("{s:?}: {e}")));
        let optn = |s: &str| if s == "NA" { Ok(None) } else { num(s).map(Some) };
        rows.push(SweepRow {
            alpha: num(f[0])?,
            n_anchor: int(f[1])?,
            n_mobile: int(f[2])?,
            estimator: f[3].parse().map_err(|e: Error| bad(i, e.to_string()))?,
            replications: int(f[4])?,
            mean_error: num(f[5])?,
            std_error: num(f[6])?,
            p_d: optn(f[7])?,
            false_alarm: optn(f[8])?,
        });
    }
    Ok(rows)
}

/// Recompute a summary from a written log file.
pub fn report_log(path: &Path, burn_in: usize, thresholds: &[f64]) -> Result<RunSummary> {
    let (header, logs) = read_log(BufReader::new(File::open(path)?))?;
    summarize(&logs, &header.estimators, burn_in, thresholds, header.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let spec = ExperimentSpec::from_toml_str(
            "replications = 2\n[scenario]\nn_steps = 5\n",
            &[
                "scenario.seed=41".into(),
                "scenario.params.alpha=0.15".into(),
                "sweep.n_anchor=[10, 18]".into(),
                "runtime.estimators=[\"particle-filter\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(spec.scenario.seed, 41);
        assert_eq!(spec.scenario.n_steps, 5);
        assert_eq!(spec.scenario.params.alpha(), 0.15);
        assert_eq!(spec.sweep.n_anchor, vec![10, 18]);
        assert_eq!(spec.jobs().len(), 4);
        assert_eq!(spec.jobs()[1].seed, 42);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(ExperimentSpec::from_toml_str("replications = 0", &[]).is_err());
        assert!(ExperimentSpec::from_toml_str("", &["runtime.estimators=[]".into()]).is_err());
        assert!(ExperimentSpec::from_toml_str("", &["nonsense".into()]).is_err());
        assert!(ExperimentSpec::from_toml_str("", &["scenario.bogus=1".into()]).is_err());
        assert!(ExperimentSpec::from_toml_str("", &["sweep.alpha=[1.5]".into()]).is_err());
    }

    #[test]
    fn poly_fit_recovers_a_cubic() {
        let ts: Vec<f64> = (0..40).map(f64::from).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 - 0.5 * t + 0.01 * t * t * t).collect();
        let f = PolyFit::new(&ts, &ys, 5);
        for (t, y) in ts.iter().zip(&ys) {
            assert!((f.eval(*t) - y).abs() < 1e-8);
        }
    }

    #[test]
    fn sweep_table_round_trips() {
        let rows = vec![
            SweepRow {
                alpha: 0.05,
                n_anchor: 26,
                n_mobile: 20,
                estimator: Estimator::GenieMl,
                replications: 3,
                mean_error: 1.0 / 3.0,
                std_error: 0.1,
                p_d: None,
                false_alarm: Some(0.25),
            },
        ];
        let mut buf = Vec::new();
        write_sweep_table(&rows, &mut buf).unwrap();
        assert_eq!(read_sweep_table(&buf[..]).unwrap(), rows);
    }
}
