//! Command-line front end: `estimate`, `test`, `simulate` and `power`.
//!
//! Every subcommand writes into the directory given by `--output`:
//!
//! | command    | files                                   |
//! |------------|-----------------------------------------|
//! | `estimate` | `graph.json`, `edges.csv`               |
//! | `test`     | `test.json`, `edges.csv`                |
//! | `simulate` | `data.csv`, `truth.csv`, `simulate.json`|
//! | `power`    | `power.csv`, `power.json`               |
//!
//! Settings may also come from a TOML file passed with `--config`, whose
//! keys are the long flag names (`lambda-d = 0.3`, `grid = [4, 5]`). Flags
//! win over the file. The merged settings are written to the `config` field
//! of every JSON output, and no output carries a timestamp.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cv::CvConfig;
use crate::dantzig::DEFAULT_LAMBDA_D;
use crate::data::{format_float, load_csv, slot, write_csv, Dataset};
use crate::error::{config, usage, Error, Result};
use crate::inference::{
    edge_test, stability_select, test_all_edges, Correction, EdgeTest, GraphResult, InferenceConfig, StabilityConfig,
};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::power::{run_power, Design, PowerConfig};
use crate::samplers::{EdgeSigns, GibbsConfig};
use crate::solver::{estimate_graph, GraphConfig, LambdaSelection, SolverConfig, Symmetrize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "semigraph", version, about = "Graph estimation and edge tests for semiparametric graphical models")]
pub struct Cli {
    /// TOML file of default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the graph with the node-wise multi-stage estimator.
    Estimate(EstimateArgs),
    /// Score-test one edge or all edges.
    Test(TestArgs),
    /// Draw a dataset from one of the simulation designs.
    Simulate(SimulateArgs),
    /// Tabulate rejection rates over a grid of signal strengths.
    Power(PowerArgs),
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// Shared penalty level; omit to choose it per node by cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub cv_folds: Option<usize>,
    #[arg(long)]
    pub cv_grid: Option<usize>,
    /// capped-l1, scad, mcp or lasso.
    #[arg(long)]
    pub penalty: Option<String>,
    /// Shape parameter (cap, a or gamma) of the penalty.
    #[arg(long)]
    pub penalty_param: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// and | or
    #[arg(long)]
    pub symmetrize: Option<String>,
    /// Center and scale every column first.
    #[arg(long)]
    pub standardize: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// none | bonferroni | stability
    #[arg(long)]
    pub correction: Option<String>,
    /// Test a single edge `j,k` (0-based).
    #[arg(long, value_parser = parse_edge)]
    pub edge: Option<(usize, usize)>,
    #[arg(long)]
    pub lambda_d: Option<f64>,
    #[arg(long)]
    pub subsamples: Option<usize>,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub standardize: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// gaussian | ising | mixed
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["R", "C"])]
    pub grid: Option<Vec<usize>>,
    #[arg(long)]
    pub n: Option<usize>,
    /// positive | random
    #[arg(long)]
    pub signs: Option<String>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub design: DesignArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Comma-separated grid of signal strengths.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_edge)]
    pub edge: Option<(usize, usize)>,
    #[arg(long)]
    pub lambda_d: Option<f64>,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub fit: FitArgs,
}

fn parse_edge(s: &str) -> std::result::Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let j = a.parse().map_err(|_| format!("bad node index {a:?}"))?;
            let k = b.parse().map_err(|_| format!("bad node index {b:?}"))?;
            if j == k {
                return Err("edge endpoints must differ".into());
            }
            Ok((j, k))
        }
        _ => Err(format!("expected j,k but got {s:?}")),
    }
}

/// Merges flags over the config file and records every effective value.
struct Settings {
    file: toml::Table,
    effective: BTreeMap<String, Value>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config(format!("config {}: {e}", p.display())))?
            }
        };
        Ok(Self {
            file,
            effective: BTreeMap::new(),
        })
    }

    fn from_file<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.file.remove(key) {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|e| config(format!("config key {key:?}: {e}"))),
        }
    }

    /// Flag, else file, else `default`.
    fn get<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let from_file = self.from_file(key)?;
        let v = flag.or(from_file).unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    /// Flag, else file, else absent.
    fn opt<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let from_file = self.from_file(key)?;
        let v = flag.or(from_file);
        self.record(key, &v);
        Ok(v)
    }

    fn require<T: DeserializeOwned + Serialize>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        self.opt(key, flag)?
            .ok_or_else(|| usage(format!("--{key} is required (flag or config key)")))
    }

    fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        let from_file: Option<bool> = self.from_file(key)?;
        let v = flag || from_file.unwrap_or(false);
        self.record(key, &v);
        Ok(v)
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &T) {
        self.effective
            .insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    /// Errors on config keys no setting consumed.
    fn finish(&self) -> Result<Value> {
        if let Some(key) = self.file.keys().next() {
            return Err(config(format!("unknown config key {key:?}")));
        }
        Ok(serde_json::to_value(&self.effective).unwrap_or(Value::Null))
    }
}

fn fit_settings(s: &mut Settings, fit: FitArgs) -> Result<(SolverConfig, LambdaSelection)> {
    let name = s.get("penalty", fit.penalty, "capped-l1".to_string())?;
    let mut family = PenaltyFamily::from_name(&name)?;
    if let Some(p) = s.opt("penalty-param", fit.penalty_param)? {
        family = match family {
            PenaltyFamily::Lasso => return Err(usage("lasso takes no shape parameter")),
            PenaltyFamily::CappedL1 { .. } => PenaltyFamily::CappedL1 { cap: p },
            PenaltyFamily::Scad { .. } => PenaltyFamily::Scad { a: p },
            PenaltyFamily::Mcp { .. } => PenaltyFamily::Mcp { gamma: p },
        };
    }
    let lambda = s.opt("lambda", fit.lambda)?;
    let seed = s.get("seed", fit.seed, 0)?;
    let folds = s.get("cv-folds", fit.cv_folds, 10)?;
    let grid = s.get("cv-grid", fit.cv_grid, 50)?;
    let solver = SolverConfig::new(PenaltySpec::new(family, lambda.unwrap_or(1.0))?);
    let selection = match lambda {
        Some(_) => LambdaSelection::Shared,
        None => LambdaSelection::CrossValidated(CvConfig {
            folds,
            grid_size: grid,
            seed,
            ..CvConfig::default()
        }),
    };
    Ok((solver, selection))
}

fn load_input(s: &mut Settings, input: Option<PathBuf>, standardize: bool) -> Result<Dataset> {
    let path: PathBuf = s.require("input", input)?;
    let data = load_csv(&path)?;
    log::info!("loaded {}: n = {}, d = {}", path.display(), data.n(), data.d());
    Ok(if s.switch("standardize", standardize)? {
        data.standardized(true)
    } else {
        data
    })
}

fn output_dir(s: &mut Settings, output: Option<PathBuf>) -> Result<PathBuf> {
    let dir: PathBuf = s.require("output", output)?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path)?))
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut s = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&mut s, a),
        Command::Test(a) => cmd_test(&mut s, a),
        Command::Simulate(a) => cmd_simulate(&mut s, a),
        Command::Power(a) => cmd_power(&mut s, a),
    }
}

fn cmd_estimate(s: &mut Settings, a: EstimateArgs) -> Result<()> {
    let data = load_input(s, a.input, a.standardize)?;
    let out = output_dir(s, a.output)?;
    let symmetrize = match s.get("symmetrize", a.symmetrize, "and".to_string())?.as_str() {
        "and" => Symmetrize::And,
        "or" => Symmetrize::Or,
        other => return Err(usage(format!("unknown symmetrization {other:?} (and | or)"))),
    };
    let (solver, selection) = fit_settings(s, a.fit)?;
    let effective = s.finish()?;
    let graph = estimate_graph(
        &data,
        &GraphConfig {
            solver,
            selection,
            symmetrize,
        },
    )?;

    let nodes: Vec<Value> = graph
        .nodes
        .iter()
        .map(|e| {
            json!({
                "node": e.node,
                "name": data.column_label(e.node),
                "lambda": e.lambda_used,
                "stages": e.stages_run,
                "outer_converged": e.outer_converged,
                "inner_converged": e.inner_converged,
                "objective_trace": e.objective_trace,
                "beta": e.beta_hat,
            })
        })
        .collect();
    let edges = graph.edges();
    write_json(
        &out.join("graph.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "estimate",
            "config": effective,
            "n": data.n(),
            "d": data.d(),
            "symmetrize": symmetrize,
            "penalty": solver.penalty.family,
            "nodes": nodes,
            "adjacency": graph.adjacency,
            "edges": edges,
        }),
    )?;

    let mut w = csv_writer(&out.join("edges.csv"))?;
    w.write_record(["j", "k", "name_j", "name_k", "beta_jk", "beta_kj"]).map_err(csv_io)?;
    for (j, k) in edges {
        w.write_record([
            j.to_string(),
            k.to_string(),
            data.column_label(j),
            data.column_label(k),
            format_float(graph.nodes[j].beta_hat[slot(j, k)]),
            format_float(graph.nodes[k].beta_hat[slot(k, j)]),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn test_row(t: &EdgeTest, reject: bool) -> [String; 9] {
    [
        t.edge.0.to_string(),
        t.edge.1.to_string(),
        format_float(t.s_hat),
        format_float(t.sigma_hat),
        format_float(t.z),
        format_float(t.p_value),
        reject.to_string(),
        t.degenerate.to_string(),
        String::new(),
    ]
}

fn cmd_test(s: &mut Settings, a: TestArgs) -> Result<()> {
    let data = load_input(s, a.input, a.standardize)?;
    let out = output_dir(s, a.output)?;
    let alpha = s.get("alpha", a.alpha, 0.05)?;
    let lambda_d = s.get("lambda-d", a.lambda_d, DEFAULT_LAMBDA_D)?;
    let edge: Option<(usize, usize)> = s.opt("edge", a.edge)?;
    let correction = s.get("correction", a.correction, "bonferroni".to_string())?;
    let subsamples = s.get("subsamples", a.subsamples, 100)?;
    let keep = s.get("keep", a.keep, 90)?;
    let (solver, selection) = fit_settings(s, a.fit)?;
    let seed = s.effective.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let effective = s.finish()?;
    let cfg = InferenceConfig {
        solver,
        selection,
        lambda_d,
    };

    let header = ["j", "k", "s_hat", "sigma_hat", "z", "p_value", "reject", "degenerate", "error"];
    let mut w = csv_writer(&out.join("edges.csv"))?;
    w.write_record(header).map_err(csv_io)?;

    let report = if let Some((j, k)) = edge {
        if j >= data.d() || k >= data.d() {
            return Err(usage(format!("edge ({j}, {k}) out of range for d = {}", data.d())));
        }
        let (tests, errors) = match edge_test(&data, j, k, alpha, &cfg) {
            Ok(t) => {
                w.write_record(test_row(&t, t.reject)).map_err(csv_io)?;
                (vec![t], Vec::<Value>::new())
            }
            Err(e @ (Error::Usage(_) | Error::Config(_) | Error::Io(_))) => return Err(e),
            Err(e) => {
                let (a, b) = (j.min(k), j.max(k));
                w.write_record([a.to_string(), b.to_string(), "".into(), "".into(), "".into(), "1.0".into(), "false".into(), "false".into(), e.to_string()])
                    .map_err(csv_io)?;
                (Vec::new(), vec![json!({ "edge": [a, b], "message": e.to_string() })])
            }
        };
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": "test",
            "config": effective,
            "method": "single-test",
            "alpha": alpha,
            "level": alpha,
            "tests": tests,
            "errors": errors,
        })
    } else {
        let result: GraphResult = match correction.as_str() {
            "none" => test_all_edges(&data, alpha, Correction::None, &cfg)?,
            "bonferroni" => test_all_edges(&data, alpha, Correction::Bonferroni, &cfg)?,
            "stability" => stability_select(
                &data,
                alpha,
                &StabilityConfig {
                    n_subsamples: subsamples,
                    keep_threshold: keep,
                    seed,
                },
                &cfg,
            )?,
            other => {
                return Err(usage(format!(
                    "unknown correction {other:?} (none | bonferroni | stability)"
                )))
            }
        };
        for t in &result.tests {
            w.write_record(test_row(t, result.adjacency[t.edge.0][t.edge.1])).map_err(csv_io)?;
        }
        if result.tests.is_empty() {
            // stability mode: one row per pair with the median p-value
            let d = data.d();
            for j in 0..d {
                for k in j + 1..d {
                    w.write_record([
                        j.to_string(),
                        k.to_string(),
                        "".into(),
                        "".into(),
                        "".into(),
                        format_float(result.p_matrix[j][k]),
                        result.adjacency[j][k].to_string(),
                        "false".into(),
                        "".into(),
                    ])
                    .map_err(csv_io)?;
                }
            }
        }
        for f in &result.failures {
            w.write_record([f.edge.0.to_string(), f.edge.1.to_string(), "".into(), "".into(), "".into(), "1.0".into(), "false".into(), "false".into(), f.message.clone()])
                .map_err(csv_io)?;
        }
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": "test",
            "config": effective,
            "method": result.method,
            "alpha": result.alpha,
            "level": result.level,
            "tests": result.tests,
            "p_matrix": result.p_matrix,
            "adjacency": result.adjacency,
            "edges": result.edges(),
            "selection_counts": result.selection_counts,
            "errors": result.failures,
        })
    };
    w.flush()?;
    write_json(&out.join("test.json"), &report)
}

fn design_settings(s: &mut Settings, a: DesignArgs, default_n: usize) -> Result<(Design, usize, GibbsConfig)> {
    let model = s.require::<String>("model", a.model)?;
    let n = s.get("n", a.n, default_n)?;
    let signs = match s.get("signs", a.signs, "positive".to_string())?.as_str() {
        "positive" => EdgeSigns::Positive,
        "random" => EdgeSigns::Random {
            seed: s.effective.get("seed").and_then(Value::as_u64).unwrap_or(0),
        },
        other => return Err(usage(format!("unknown sign pattern {other:?} (positive | random)"))),
    };
    let burn_in = s.get("burn-in", a.burn_in, 1000)?;
    let thin = s.get("thin", a.thin, 10)?;
    let design = match model.as_str() {
        "gaussian" => {
            let d = s.require("d", a.d)?;
            Design::Gaussian { d }
        }
        "ising" | "mixed" => {
            let grid: Vec<usize> = s.require("grid", a.grid)?;
            let [rows, cols] = grid[..] else {
                return Err(usage("--grid takes two values R C"));
            };
            if model == "ising" {
                Design::Ising { rows, cols, signs }
            } else {
                Design::Mixed { rows, cols, signs }
            }
        }
        other => return Err(usage(format!("unknown model {other:?} (gaussian | ising | mixed)"))),
    };
    Ok((design, n, GibbsConfig { burn_in, thin, seed: 0 }))
}

fn design_metadata(design: &Design) -> Value {
    match design {
        Design::Gaussian { .. } => json!({ "coefficients": "beta_jk = -theta_jk", "theta_diagonal": 1.0 }),
        Design::Ising { .. } => json!({ "states": [0, 1], "external_field": 0.0, "sampler": "systematic-scan gibbs" }),
        Design::Mixed { .. } => json!({
            "binary_nodes": "first layer",
            "gaussian_nodes": "second layer",
            "gaussian_conditional_variance": 1.0,
            "sampler": "systematic-scan gibbs",
        }),
    }
}

fn cmd_simulate(s: &mut Settings, a: SimulateArgs) -> Result<()> {
    let out = output_dir(s, a.output)?;
    let seed = s.get("seed", a.seed, 0)?;
    let mu = s.require("mu", a.mu)?;
    let (design, n, gibbs) = design_settings(s, a.design, 100)?;
    let effective = s.finish()?;
    let data = design.sample(mu, n, seed, &gibbs)?;
    let truth = design.truth_edges(mu);

    write_csv(&data, fs::File::create(out.join("data.csv"))?)?;
    let mut w = csv_writer(&out.join("truth.csv"))?;
    w.write_record(["j", "k"]).map_err(csv_io)?;
    for (j, k) in &truth {
        w.write_record([j.to_string(), k.to_string()]).map_err(csv_io)?;
    }
    w.flush()?;
    write_json(
        &out.join("simulate.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "config": effective,
            "design": design,
            "mu": mu,
            "n": n,
            "d": design.d(),
            "gibbs": gibbs_used(&design, &gibbs, seed),
            "model_details": design_metadata(&design),
            "truth_edges": truth,
        }),
    )
}

fn gibbs_used(design: &Design, gibbs: &GibbsConfig, seed: u64) -> Value {
    match design {
        Design::Gaussian { .. } => Value::Null,
        _ => json!(GibbsConfig { seed, ..*gibbs }),
    }
}

fn cmd_power(s: &mut Settings, a: PowerArgs) -> Result<()> {
    let out = output_dir(s, a.output)?;
    let mus: Vec<f64> = s.require("mu", a.mu)?;
    let replicates = s.get("replicates", a.replicates, 100)?;
    let alpha = s.get("alpha", a.alpha, 0.05)?;
    let edge = s.get("edge", a.edge, (0, 1))?;
    let lambda_d = s.get("lambda-d", a.lambda_d, DEFAULT_LAMBDA_D)?;
    let (solver, selection) = fit_settings(s, a.fit)?;
    let seed = s.effective.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let (design, n, gibbs) = design_settings(s, a.design, 150)?;
    let effective = s.finish()?;
    let cfg = PowerConfig {
        design,
        n,
        mus,
        replicates,
        alpha,
        edge,
        seed,
        gibbs,
        inference: InferenceConfig {
            solver,
            selection,
            lambda_d,
        },
    };
    let result = run_power(&cfg)?;

    let mut w = csv_writer(&out.join("power.csv"))?;
    w.write_record([
        "mu",
        "n",
        "d",
        "model",
        "replicates",
        "rejection_rate",
        "monte_carlo_stderr",
        "rejections",
        "degenerate",
        "failures",
    ])
    .map_err(csv_io)?;
    for r in &result.rows {
        w.write_record([
            format_float(r.mu),
            r.n.to_string(),
            r.d.to_string(),
            r.model.clone(),
            r.replicates.to_string(),
            format_float(r.rejection_rate),
            format_float(r.monte_carlo_stderr),
            r.rejections.to_string(),
            r.degenerate.to_string(),
            r.failures.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    write_json(
        &out.join("power.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "power",
            "config": effective,
            "design": design,
            "model_details": design_metadata(&design),
            "rows": result.rows,
        }),
    )
}

/// Parses `args`, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
