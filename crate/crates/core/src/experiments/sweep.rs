use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::mpsc;

use serde::Serialize;

use super::{preset, ExperimentError, PRESET_NAMES};
use crate::analysis::{fit_decay, FIT_FLOOR};
use crate::cli::config::parse_config_with;
use crate::par::Execution;
use crate::solver::simulate;

pub const SWEEP_DEFAULT_CAP: usize = 1000;

/// Largest log-residual for a fit to count as exponential decay.
const DECAY_RESIDUAL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Config key -> values in config-file syntax. Rows vary the first key slowest.
    pub axes: BTreeMap<String, Vec<String>>,
    pub base: String,
    pub output: PathBuf,
    /// Worker threads; 0 uses the global pool size.
    pub parallelism: usize,
    pub execution: Execution,
    pub cap: usize,
}

impl SweepSpec {
    pub fn new(base: &str, output: PathBuf) -> Self {
        Self {
            axes: BTreeMap::new(),
            base: base.into(),
            output,
            parallelism: 0,
            execution: Execution::default(),
            cap: SWEEP_DEFAULT_CAP,
        }
    }

    pub fn axis(mut self, key: &str, values: &[&str]) -> Self {
        self.axes.insert(key.into(), values.iter().map(|v| v.to_string()).collect());
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Sweep(m));
        if preset(&self.base).is_none() {
            return bad(format!(
                "unknown base preset `{}` (known: {})",
                self.base,
                PRESET_NAMES.join(", ")
            ));
        }
        if self.axes.is_empty() {
            return bad("at least one axis is required".into());
        }
        for (k, vs) in &self.axes {
            if vs.is_empty() {
                return bad(format!("axis `{k}` has no values"));
            }
            if k == "preset" {
                return bad("`preset` cannot be swept".into());
            }
            let unique: BTreeSet<&String> = vs.iter().collect();
            if unique.len() != vs.len() {
                return bad(format!("axis `{k}` repeats a value"));
            }
            if let Some(v) = vs.iter().find(|v| v.contains([',', '\n', '"'])) {
                return bad(format!("axis `{k}`: value `{v}` cannot be stored in the table"));
            }
        }
        let size = self.size();
        if size > self.cap {
            return bad(format!("{size} rows exceed the cap of {}", self.cap));
        }
        Ok(())
    }

    /// Cross-product size (saturating).
    pub fn size(&self) -> usize {
        self.axes.values().fold(1usize, |n, v| n.saturating_mul(v.len()))
    }

    /// All parameter tuples in table order.
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut out = vec![Vec::new()];
        for (k, vs) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<(String, String)>| {
                    vs.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((k.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        out
    }

    fn header(&self) -> String {
        let mut cols: Vec<&str> = self.axes.keys().map(String::as_str).collect();
        cols.extend(["outcome", "beta", "max_theta", "t_final", "error"]);
        cols.join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: Vec<(String, String)>,
    /// `GlobalDecay`, `GlobalBounded`, `BlowUpDetected` or `Error`.
    pub outcome: String,
    /// Fitted decay rate of `||u_x||_inf`; NaN when no fit was possible.
    pub beta: f64,
    pub max_theta: f64,
    pub t_final: f64,
    pub error: Option<String>,
}

impl SweepRow {
    fn key(params: &[(String, String)]) -> String {
        params.iter().map(|(_, v)| v.as_str()).collect::<Vec<_>>().join(",")
    }

    fn to_line(&self) -> String {
        let error = self
            .error
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n', '\r'], ";")
            .replace('"', "'");
        format!(
            "{},{},{:?},{:?},{:?},{}",
            Self::key(&self.params),
            self.outcome,
            self.beta,
            self.max_theta,
            self.t_final,
            error
        )
    }

    fn failed(params: Vec<(String, String)>, error: String) -> Self {
        Self {
            params,
            outcome: "Error".into(),
            beta: f64::NAN,
            max_theta: f64::NAN,
            t_final: f64::NAN,
            error: Some(error),
        }
    }
}

fn run_point(base: &str, params: Vec<(String, String)>) -> SweepRow {
    let overrides: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let config = match parse_config_with(&format!("preset = \"{base}\"\n"), &overrides, None) {
        Ok(p) => p.config,
        Err(e) => return SweepRow::failed(params, e.to_string()),
    };
    let result = match simulate(&config) {
        Ok(r) => r,
        Err(e) => return SweepRow::failed(params, e.to_string()),
    };
    let fit = fit_decay(&result.series, "ux_linf", FIT_FLOOR).ok();
    let outcome = if result.blew_up() {
        "BlowUpDetected"
    } else if fit.as_ref().is_some_and(|f| f.beta > 0.0 && f.residual <= DECAY_RESIDUAL) {
        "GlobalDecay"
    } else {
        "GlobalBounded"
    };
    SweepRow {
        params,
        outcome: outcome.into(),
        beta: fit.map_or(f64::NAN, |f| f.beta),
        max_theta: result.series.rows.iter().map(|r| r.theta_linf).fold(0.0, f64::max),
        t_final: result.final_state.t,
        error: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub total: usize,
    /// Rows already present in the output and not recomputed.
    pub skipped: usize,
    /// Rows computed by this call, in table order.
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Runs every missing row of the sweep and appends it to `spec.output`.
///
/// Rows are computed by a worker pool and handed to a single writer that appends
/// them in table order, so the file never depends on scheduling. Rows already in
/// the file (matched on their parameter values) are skipped.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepSummary, ExperimentError> {
    spec.validate()?;
    let io = |what: &str| ExperimentError::io(format!("{what} {}", spec.output.display()));
    let header = spec.header();
    let mut done = BTreeSet::new();
    if spec.output.exists() {
        let text = std::fs::read_to_string(&spec.output).map_err(io("reading"))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == header => {}
            None => {}
            Some(h) => {
                return Err(ExperimentError::Sweep(format!(
                    "{} has header `{h}`, expected `{header}`",
                    spec.output.display()
                )))
            }
        }
        let n_axes = spec.axes.len();
        for line in lines.filter(|l| !l.is_empty()) {
            let key: Vec<&str> = line.splitn(n_axes + 1, ',').take(n_axes).collect();
            done.insert(key.join(","));
        }
    }
    let points = spec.points();
    let total = points.len();
    let todo: Vec<Vec<(String, String)>> = points.into_iter().filter(|p| !done.contains(&SweepRow::key(p))).collect();
    let skipped = total - todo.len();
    if let Some(dir) = spec.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io("creating directory for"))?;
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&spec.output)
        .map_err(io("opening"))?;
    if file.metadata().map_err(io("reading"))?.len() == 0 {
        writeln!(file, "{header}").map_err(io("writing"))?;
    }

    let (tx, rx) = mpsc::channel::<(usize, SweepRow)>();
    let rows = std::thread::scope(|s| {
        let writer = s.spawn(move || -> std::io::Result<Vec<SweepRow>> {
            let mut pending = BTreeMap::new();
            let mut written = Vec::new();
            for (i, row) in rx {
                pending.insert(i, row);
                while let Some(row) = pending.remove(&written.len()) {
                    writeln!(file, "{}", row.to_line())?;
                    file.flush()?;
                    written.push(row);
                }
            }
            Ok(written)
        });
        dispatch(spec, todo, tx);
        writer.join().expect("writer thread")
    })
    .map_err(io("writing"))?;
    Ok(SweepSummary { total, skipped, rows })
}

fn dispatch(spec: &SweepSpec, todo: Vec<Vec<(String, String)>>, tx: mpsc::Sender<(usize, SweepRow)>) {
    #[cfg(feature = "parallel")]
    if spec.execution.is_parallel() {
        use rayon::prelude::*;
        let work = |tx: mpsc::Sender<(usize, SweepRow)>| {
            todo.into_par_iter().enumerate().for_each_with(tx, |tx, (i, p)| {
                let _ = tx.send((i, run_point(&spec.base, p)));
            })
        };
        match rayon::ThreadPoolBuilder::new().num_threads(spec.parallelism).build() {
            Ok(pool) => pool.install(|| work(tx)),
            Err(_) => work(tx),
        }
        return;
    }
    for (i, p) in todo.into_iter().enumerate() {
        let _ = tx.send((i, run_point(&spec.base, p)));
    }
}
