use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::config::set_key;

/// Simulation and exact analysis of oriented kinetically constrained models.
#[derive(Debug, Parser)]
#[command(name = "kcm", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Event-driven simulation; writes the full event log.
    Simulate(SimulateArgs),
    /// Spectral gap of the generator.
    ExactGap(ExactGapArgs),
    /// Exact worst-case mixing time.
    ExactMix(ExactMixArgs),
    /// Feynman–Kac exponent of a site with a Monte Carlo cross-check.
    FkBound(FkBoundArgs),
    /// Log-Sobolev upper bound from the all-ones indicator.
    LsiBound(LsiBoundArgs),
    /// Iteration schedule Δ_i, t_i and error budget.
    Schedule(ScheduleArgs),
    /// Exact relaxation of a single diagonal.
    DiagonalDecay(DiagonalDecayArgs),
    /// Monte Carlo scaling of τ* with the side length.
    TauScaling(TauScalingArgs),
    /// Monte Carlo against exact evolution.
    ValidateMc(ValidateMcArgs),
    /// Influence-region shape diagnostics (d = 2).
    Shape(ShapeArgs),
    /// Runs the command stored in a configuration file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Lattice dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Side length.
    #[arg(long)]
    pub n: Option<usize>,
    /// Density of spin 1.
    #[arg(long)]
    pub p: Option<f64>,
    /// Constraint family: northeast, maximal or custom.
    #[arg(long)]
    pub family: Option<String>,
    /// Custom constraints as JSON: {"x1,x2": [[y1,y2], ...], ...}.
    #[arg(long)]
    pub custom_constraints: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExecArgs {
    /// Configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo replicas.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Results root (default: $KCM_RESULTS_DIR, else ./results).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Largest exact state space.
    #[arg(long)]
    pub state_cap: Option<usize>,
    /// Uniformization truncation tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Time resolution of mixing-time searches.
    #[arg(long)]
    pub time_tolerance: Option<f64>,
    /// Also write long-format CSV tables for plotting.
    #[arg(long)]
    pub plot_data: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Simulation horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Initial configuration: ones, zeros or pi.
    #[arg(long)]
    pub initial: Option<String>,
    /// Restrict to the lower set U_level.
    #[arg(long)]
    pub level: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExactGapArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Eigensolver: auto, dense or lanczos.
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExactMixArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Distance threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Distance: tv or chi2.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct FkBoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Site as "x1,x2,..." (default: far corner).
    #[arg(long)]
    pub site: Option<String>,
    /// Check times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct LsiBoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Target accuracy ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Rate constant (default: c_0 of the model).
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DiagonalDecayArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Hyperplane level i.
    #[arg(long)]
    pub level: Option<usize>,
    /// Last grid time.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Grid spacing.
    #[arg(long)]
    pub t_step: Option<f64>,
    /// Smallest time used for fitting and bound checks.
    #[arg(long)]
    pub fit_from: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TauScalingArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Side lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Per-replica cap in units of n.
    #[arg(long)]
    pub cap_factor: Option<f64>,
    /// Bootstrap resamples.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValidateMcArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Comparison time.
    #[arg(long)]
    pub time: Option<f64>,
    /// Initial configuration: ones or zeros.
    #[arg(long)]
    pub initial: Option<String>,
    /// Density used on the exact side (negative control).
    #[arg(long)]
    pub exact_p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    /// Snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// Flip rule: value-change or legal-ring.
    #[arg(long)]
    pub rule: Option<String>,
    /// Bootstrap resamples.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exec: ExecArgs,
}

/// Collected overrides: `(section, key, value)`.
pub struct Overrides {
    pub entries: Vec<(&'static str, &'static str, Value)>,
    pub config: Option<PathBuf>,
    pub command: Option<&'static str>,
    pub output_dir_given: bool,
}

impl Overrides {
    fn push<T: serde::Serialize>(&mut self, section: &'static str, key: &'static str, v: &Option<T>) {
        if let Some(v) = v {
            self.entries.push((section, key, json!(v)));
        }
    }

    fn model(&mut self, m: &ModelArgs) {
        self.push("model", "d", &m.d);
        self.push("model", "n", &m.n);
        self.push("model", "p", &m.p);
        self.push("model", "family", &m.family);
        if let Some(raw) = &m.custom_constraints {
            let v = serde_json::from_str(raw).unwrap_or(Value::String(raw.clone()));
            self.entries.push(("model", "custom_constraints", v));
        }
    }

    fn exec(&mut self, e: &ExecArgs) {
        self.config = e.config.clone();
        self.output_dir_given = e.output_dir.is_some();
        self.push("execution", "seed", &e.seed);
        self.push("execution", "replicas", &e.replicas);
        self.push("execution", "threads", &e.threads);
        self.push("execution", "output_dir", &e.output_dir);
        self.push("execution", "state_cap", &e.state_cap);
        self.push("execution", "tolerance", &e.tolerance);
        self.push("execution", "time_tolerance", &e.time_tolerance);
        if e.plot_data {
            self.entries.push(("execution", "plot_data", Value::Bool(true)));
        }
    }

    /// Merges into a configuration document (the file's, or an empty one).
    pub fn apply(&self, mut base: Map<String, Value>) -> Value {
        if let Some(name) = self.command {
            let same = base
                .get("command")
                .and_then(|c| c.get("name"))
                .and_then(Value::as_str)
                == Some(name);
            if !same {
                base.insert("command".into(), json!({ "name": name }));
            }
        }
        for (section, key, v) in &self.entries {
            set_key(&mut base, section, key, v.clone());
        }
        Value::Object(base)
    }
}

impl CliCommand {
    pub fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            entries: Vec::new(),
            config: None,
            command: None,
            output_dir_given: false,
        };
        let c = "command";
        match self {
            CliCommand::Simulate(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("simulate");
                o.push(c, "horizon", &a.horizon);
                o.push(c, "initial", &a.initial);
                o.push(c, "level", &a.level);
            }
            CliCommand::ExactGap(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("exact-gap");
                o.push(c, "method", &a.method);
            }
            CliCommand::ExactMix(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("exact-mix");
                o.push(c, "threshold", &a.threshold);
                o.push(c, "mode", &a.mode);
            }
            CliCommand::FkBound(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("fk-bound");
                o.push(c, "site", &a.site);
                o.push(c, "times", &a.times);
            }
            CliCommand::LsiBound(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("lsi-bound");
            }
            CliCommand::Schedule(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("schedule");
                o.push(c, "eps", &a.eps);
                o.push(c, "c", &a.c);
            }
            CliCommand::DiagonalDecay(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("diagonal-decay");
                o.push(c, "level", &a.level);
                o.push(c, "t_max", &a.t_max);
                o.push(c, "t_step", &a.t_step);
                o.push(c, "fit_from", &a.fit_from);
            }
            CliCommand::TauScaling(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("tau-scaling");
                o.push(c, "sizes", &a.sizes);
                o.push(c, "cap_factor", &a.cap_factor);
                o.push(c, "bootstrap", &a.bootstrap);
            }
            CliCommand::ValidateMc(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("validate-mc");
                o.push(c, "time", &a.time);
                o.push(c, "initial", &a.initial);
                o.push(c, "exact_p", &a.exact_p);
            }
            CliCommand::Shape(a) => {
                o.model(&a.model);
                o.exec(&a.exec);
                o.command = Some("shape");
                o.push(c, "snapshots", &a.snapshots);
                o.push(c, "rule", &a.rule);
                o.push(c, "bootstrap", &a.bootstrap);
            }
            CliCommand::Run(a) => {
                o.exec(&a.exec);
            }
        }
        o
    }
}
