//! Parameter sweeps over generated scenarios, with CSV output and a JSON run
//! manifest from which every number can be regenerated.
//!
//! CSV schema of `results.csv`, one row per (seed, sweep value, method):
//!
//! | column | meaning |
//! |---|---|
//! | experiment | convergence, demand, bandwidth, connections or compare |
//! | parameter | swept quantity (`num_sue`, `demand_mbps`, `w_leo2_mhz`) |
//! | value | sweep value in the unit named by `parameter` |
//! | seed | scenario seed |
//! | method | `alg1` or `greedy` |
//! | status | converged, max_iter, fallback, feasible, unsatisfied, infeasible or error |
//! | iterations | outer iterations (0 for greedy) |
//! | total_power_w | total transmit power, empty when no solution exists |
//! | total_power_dbw | same in dBW |
//! | satisfaction | fraction of terminals meeting demand |
//! | feasible | every demand met within the power caps |
//! | connections | terminals per satellite, `;`-separated |
//! | message | error text for failed cells |
//!
//! `trace.csv` holds the per-iteration objective of every alternating-algorithm run
//! (experiment, value, seed, iteration, objective_w, objective_dbw) and
//! `summary.csv` aggregates over seeds per (value, method).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternating::{run_algorithm1, AlgorithmConfig, RunStatus};
use crate::error::{Error, Result};
use crate::greedy::{run_greedy, GreedyMode};
use crate::instance::{generate_scenario, ScenarioConfig};
use crate::units::watts_to_dbw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sweeps the number of SUEs and records iteration traces.
    Convergence,
    /// Sweeps the per-user demand, Mbps.
    Demand,
    /// Sweeps the bandwidth of the middle satellite, MHz.
    Bandwidth,
    /// Same sweep as `Bandwidth`, reported for connection counts.
    Connections,
    /// Single comparison at the base configuration.
    Compare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Convergence => "convergence",
            Self::Demand => "demand",
            Self::Bandwidth => "bandwidth",
            Self::Connections => "connections",
            Self::Compare => "compare",
        }
    }

    pub fn parameter(self) -> &'static str {
        match self {
            Self::Convergence => "num_sue",
            Self::Demand | Self::Compare => "demand_mbps",
            Self::Bandwidth | Self::Connections => "w_leo2_mhz",
        }
    }

    pub fn default_sweep(self, base: &ScenarioConfig) -> Vec<f64> {
        match self {
            Self::Convergence => vec![base.num_sue as f64],
            Self::Demand => (6..=12).map(|i| f64::from(i) * 10.0).collect(),
            Self::Bandwidth | Self::Connections => (1..=7).rev().map(|i| f64::from(i) * 100.0).collect(),
            Self::Compare => vec![base.demand_per_user / 1e6],
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convergence" => Self::Convergence,
            "demand" | "demand_sweep" => Self::Demand,
            "bandwidth" | "bandwidth_sweep" => Self::Bandwidth,
            "connections" | "connection_count" => Self::Connections,
            "compare" => Self::Compare,
            _ => return Err(Error::InvalidInput(format!("unknown experiment '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub base: ScenarioConfig,
    pub algorithm: AlgorithmConfig,
    pub sweep: Vec<f64>,
    pub seeds: Vec<u64>,
    pub strict_paper: bool,
}

impl ExperimentSpec {
    /// Default sweep and seeds 1..=30.
    pub fn new(kind: ExperimentKind, base: ScenarioConfig) -> Self {
        Self {
            kind,
            sweep: kind.default_sweep(&base),
            base,
            algorithm: AlgorithmConfig::default(),
            seeds: (1..=30).collect(),
            strict_paper: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.algorithm.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::field("seeds", "at least one seed is required"));
        }
        if self.sweep.is_empty() || self.sweep.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::field("sweep", "values must be positive"));
        }
        let ascending = self.sweep.windows(2).all(|w| w[0] < w[1]);
        let descending = self.sweep.windows(2).all(|w| w[0] > w[1]);
        if !(ascending || descending) {
            return Err(Error::field("sweep", "values must be sorted without repeats"));
        }
        if matches!(self.kind, ExperimentKind::Bandwidth | ExperimentKind::Connections) && self.base.num_satellites < 2 {
            return Err(Error::field("sweep", "bandwidth sweeps need at least two satellites"));
        }
        Ok(())
    }

    /// Scenario configuration of one sweep cell.
    pub fn cell_config(&self, value: f64, seed: u64) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        cfg.rng_seed = seed;
        match self.kind {
            ExperimentKind::Convergence => cfg.num_sue = value.round() as usize,
            ExperimentKind::Demand | ExperimentKind::Compare => cfg.demand_per_user = value * 1e6,
            ExperimentKind::Bandwidth | ExperimentKind::Connections => {
                let mut w = cfg.bandwidths();
                w[1] = value * 1e6;
                cfg.w_leo = w;
            }
        }
        cfg
    }

    fn greedy_mode(&self) -> GreedyMode {
        if self.strict_paper {
            GreedyMode::Literal {
                mean_ues: self.base.mean_ues_per_bs,
            }
        } else {
            GreedyMode::Repaired
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub method: String,
    pub status: String,
    pub iterations: usize,
    pub total_power_w: Option<f64>,
    pub total_power_dbw: Option<f64>,
    pub satisfaction: f64,
    pub feasible: bool,
    pub connections: String,
    pub message: String,
}

impl ResultRow {
    pub fn connection_counts(&self) -> Vec<usize> {
        self.connections.split(';').filter_map(|c| c.parse().ok()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub experiment: String,
    pub value: f64,
    pub seed: u64,
    pub iteration: usize,
    pub objective_w: f64,
    pub objective_dbw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub parameter: String,
    pub value: f64,
    pub method: String,
    pub seeds: usize,
    pub feasible_fraction: f64,
    /// Mean over feasible seeds.
    pub mean_power_dbw: Option<f64>,
    pub mean_satisfaction: f64,
    pub median_iterations: f64,
    pub mean_connections: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRow>,
}

fn join_counts(c: &[usize]) -> String {
    c.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn run_cell(spec: &ExperimentSpec, value: f64, seed: u64) -> (Vec<ResultRow>, Vec<TraceRow>) {
    let exp = spec.kind.name().to_string();
    let row = |method: &str| ResultRow {
        experiment: exp.clone(),
        parameter: spec.kind.parameter().to_string(),
        value,
        seed,
        method: method.to_string(),
        status: "error".into(),
        iterations: 0,
        total_power_w: None,
        total_power_dbw: None,
        satisfaction: 0.0,
        feasible: false,
        connections: String::new(),
        message: String::new(),
    };
    let inst = match generate_scenario(&spec.cell_config(value, seed)) {
        Ok(s) => s.instance,
        Err(e) => {
            let mut a = row("alg1");
            a.message = e.to_string();
            let mut g = row("greedy");
            g.message = e.to_string();
            return (vec![a, g], Vec::new());
        }
    };

    let mut traces = Vec::new();
    let mut alg = row("alg1");
    match run_algorithm1(&inst, &spec.algorithm) {
        Ok(sol) => {
            alg.status = match sol.status {
                RunStatus::Converged => "converged",
                RunStatus::MaxIter => "max_iter",
                RunStatus::Infeasible => "fallback",
            }
            .into();
            alg.iterations = sol.iterations();
            alg.total_power_w = Some(sol.metrics.total_power_w);
            alg.total_power_dbw = Some(sol.metrics.total_power_dbw);
            alg.satisfaction = sol.satisfaction;
            alg.feasible = sol.satisfaction >= 1.0;
            alg.connections = join_counts(&sol.per_leo_connections);
            traces = sol
                .objective_trace
                .iter()
                .enumerate()
                .map(|(i, &o)| TraceRow {
                    experiment: exp.clone(),
                    value,
                    seed,
                    iteration: i,
                    objective_w: o,
                    objective_dbw: watts_to_dbw(o),
                })
                .collect();
        }
        Err(e) => {
            alg.status = if e.is_infeasible() { "infeasible" } else { "error" }.into();
            alg.message = e.to_string();
        }
    }

    let mut gr = row("greedy");
    match run_greedy(&inst, &spec.greedy_mode()) {
        Ok(res) => {
            gr.status = if res.feasible { "feasible" } else { "unsatisfied" }.into();
            gr.total_power_w = Some(res.total_power);
            gr.total_power_dbw = Some(watts_to_dbw(res.total_power));
            gr.satisfaction = res.satisfaction;
            gr.feasible = res.feasible;
            gr.connections = join_counts(&res.association.connections());
        }
        Err(e) => {
            gr.message = e.to_string();
        }
    }
    (vec![alg, gr], traces)
}

/// Runs every (sweep value, seed) cell in parallel; output order is the
/// sweep order, then seed order, then method.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let cells: Vec<(f64, u64)> = spec
        .sweep
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<_> = cells.par_iter().map(|&(v, s)| run_cell(spec, v, s)).collect();
    let mut out = ExperimentOutput::default();
    for (rows, traces) in results {
        out.rows.extend(rows);
        out.traces.extend(traces);
    }
    Ok(out)
}

pub fn summarize(spec: &ExperimentSpec, rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &value in &spec.sweep {
        for method in ["alg1", "greedy"] {
            let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.value == value && r.method == method).collect();
            if cell.is_empty() {
                continue;
            }
            let n = cell.len() as f64;
            let feasible: Vec<f64> = cell.iter().filter(|r| r.feasible).filter_map(|r| r.total_power_dbw).collect();
            let mut iters: Vec<usize> = cell.iter().map(|r| r.iterations).collect();
            iters.sort_unstable();
            let median = if iters.len() % 2 == 1 {
                iters[iters.len() / 2] as f64
            } else {
                (iters[iters.len() / 2 - 1] + iters[iters.len() / 2]) as f64 / 2.0
            };
            let m = spec.base.num_satellites;
            let mut conn = vec![0.0; m];
            for r in &cell {
                for (c, v) in conn.iter_mut().zip(r.connection_counts()) {
                    *c += v as f64 / n;
                }
            }
            out.push(SummaryRow {
                experiment: spec.kind.name().into(),
                parameter: spec.kind.parameter().into(),
                value,
                method: method.into(),
                seeds: cell.len(),
                feasible_fraction: feasible.len() as f64 / n,
                mean_power_dbw: (!feasible.is_empty()).then(|| feasible.iter().sum::<f64>() / feasible.len() as f64),
                mean_satisfaction: cell.iter().map(|r| r.satisfaction).sum::<f64>() / n,
                median_iterations: median,
                mean_connections: conn.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(";"),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub files: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Runs the experiment and writes `results.csv`, `trace.csv`, `summary.csv`
/// and `manifest.json` into `out_dir`.
pub fn run_and_write(spec: &ExperimentSpec, out_dir: impl AsRef<Path>) -> Result<(ExperimentOutput, Vec<PathBuf>)> {
    let out_dir = out_dir.as_ref();
    let output = run_experiment(spec)?;
    fs::create_dir_all(out_dir)?;
    let names = ["results.csv", "trace.csv", "summary.csv", MANIFEST_FILE];
    let paths: Vec<PathBuf> = names.iter().map(|n| out_dir.join(n)).collect();
    write_csv(&paths[0], &output.rows)?;
    write_csv(&paths[1], &output.traces)?;
    write_csv(&paths[2], &summarize(spec, &output.rows))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec: spec.clone(),
        files: names[..3].iter().map(|s| s.to_string()).collect(),
    };
    fs::write(&paths[3], serde_json::to_string_pretty(&manifest)?)?;
    Ok((output, paths))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let text = fs::read_to_string(path)?;
    let m: Manifest = serde_json::from_str(&text)?;
    m.spec.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_validation() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Demand, ScenarioConfig::default());
        assert_eq!(spec.sweep, vec![60.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0]);
        assert_eq!(spec.seeds.len(), 30);
        spec.validate().unwrap();
        spec.sweep = vec![60.0, 50.0, 70.0];
        assert!(spec.validate().is_err());
        spec.sweep = vec![60.0];
        spec.seeds.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn cell_configs() {
        let spec = ExperimentSpec::new(ExperimentKind::Bandwidth, ScenarioConfig::default());
        assert_eq!(spec.sweep.first(), Some(&700.0));
        let cfg = spec.cell_config(300.0, 4);
        assert_eq!(cfg.w_leo, vec![5e8, 3e8, 5e8]);
        assert_eq!(cfg.rng_seed, 4);
        let spec = ExperimentSpec::new(ExperimentKind::Convergence, ScenarioConfig::default());
        assert_eq!(spec.cell_config(12.0, 1).num_sue, 12);
    }

    #[test]
    fn manifest_round_trip() {
        let mut spec = ExperimentSpec::new(ExperimentKind::Compare, ScenarioConfig::default());
        spec.seeds = vec![3];
        spec.algorithm.rho = 0.55;
        let m = Manifest {
            tool: "t".into(),
            version: "0".into(),
            spec: spec.clone(),
            files: vec![],
        };
        let back: Manifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
