use std::time::Instant;

use kcm::dynamics::{sample_pi, simulate, FlipRule, RandomnessStream};
use kcm::exact::{
    analytic_c0, build_generator, lsi_upper_bound, mixing_time_exact, spectral_gap,
    spectral_gap_with, DistanceMode, EigenMethod, ExactOptions,
};
use kcm::experiments::{
    diagonal_decay_study, feynman_kac_study, metadata, mc_exact_validation_against, mixing_schedule,
    shape_study, tau_star_scaling, ShapeOptions, StudyReport, Table, TauOptions,
};
use kcm::lattice::{parse_coord_key, Model, Region};
use kcm::measure::SpinConfig;
use kcm::{KcmError, Result};
use serde_json::{json, Value};

use crate::config::{Command, InitialState, MethodChoice, ModeChoice, RuleChoice, RunConfig};

/// A finished run: its report and whether the study met its own checks.
pub struct Outcome {
    pub report: StudyReport,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(report: StudyReport) -> Self {
        Self {
            report,
            failure: None,
        }
    }

    fn check(report: StudyReport, passed: bool, what: &str) -> Self {
        Self {
            report,
            failure: (!passed).then(|| what.to_string()),
        }
    }
}

fn exact_options(cfg: &RunConfig) -> ExactOptions {
    ExactOptions {
        state_cap: cfg.execution.state_cap,
        tolerance: cfg.execution.tolerance,
        time_tolerance: cfg.execution.time_tolerance,
    }
}

fn record(model: &Model, quantity: &str, value: f64, method: Value, residual: Value) -> Value {
    let g = model.geometry();
    json!({
        "model": model.family().name(),
        "d": g.dim(),
        "n": g.side(),
        "p": model.p(),
        "quantity": quantity,
        "value": value,
        "method": method,
        "residual": residual,
    })
}

fn site_index(model: &Model, key: &str) -> Result<usize> {
    let x = parse_coord_key(key)?;
    model
        .geometry()
        .index_of(&x)
        .ok_or_else(|| KcmError::Validation(format!("site {key:?} is outside the lattice")))
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let model = cfg.model.build()?;
    let seed = cfg.execution.seed;
    let replicas = cfg.execution.replicas.unwrap_or(0);
    let opts = exact_options(cfg);
    let mut outcome = match &cfg.command {
        Command::Simulate(c) => {
            let region = match c.level {
                Some(i) => Region::lower_set(&model, i)?,
                None => Region::full(&model),
            };
            let stream = RandomnessStream::new(seed);
            let initial = match c.initial {
                InitialState::Ones => SpinConfig::ones(region.len()),
                InitialState::Zeros => SpinConfig::zeros(region.len()),
                InitialState::Pi => sample_pi(&model, &region, &mut stream.initial_rng()),
            };
            let log = simulate(&model, &region, &initial, c.horizon, &stream)?;
            let g = model.geometry();
            let coord_cols: Vec<String> = (1..=g.dim()).map(|j| format!("site_x{j}")).collect();
            let mut header: Vec<&str> = vec!["time"];
            header.extend(coord_cols.iter().map(String::as_str));
            header.extend(["constraint", "coin", "applied"]);
            let mut events = Table::new("events", &header);
            for e in &log.events {
                let mut row = vec![e.time.to_string()];
                row.extend(g.coords(e.site).iter().map(|x| x.to_string()));
                row.extend([
                    u8::from(e.constraint).to_string(),
                    u8::from(e.coin).to_string(),
                    u8::from(e.applied).to_string(),
                ]);
                events.push(row);
            }
            let mut header: Vec<&str> = coord_cols.iter().map(String::as_str).collect();
            header.extend(["initial", "final"]);
            let mut finals = Table::new("final_config", &header);
            for (k, &s) in region.sites().iter().enumerate() {
                let mut row: Vec<String> = g.coords(s).iter().map(|x| x.to_string()).collect();
                row.push(u8::from(log.initial.get(k)).to_string());
                row.push(u8::from(log.final_config.get(k)).to_string());
                finals.push(row);
            }
            let mut r = StudyReport::new(
                "simulate",
                metadata(&model, Some(seed), Some(c.horizon)),
                json!({ "horizon": c.horizon, "initial": c.initial, "level": c.level }),
                json!({
                    "region_sites": region.len(),
                    "rings": log.events.len(),
                    "legal_rings": log.events.iter().filter(|e| e.applied).count(),
                    "flips": log.events.iter().filter(|e| e.changed).count(),
                    "final_ones": log.final_config.count_ones(),
                    "replay_matches": log.replay() == log.final_config,
                }),
            );
            r.tables.push(events);
            r.tables.push(finals);
            Outcome::ok(r)
        }
        Command::ExactGap(c) => {
            let gen = build_generator(&model, &Region::full(&model), opts.state_cap)?;
            let s = match c.method {
                MethodChoice::Auto => spectral_gap(&gen)?,
                MethodChoice::Dense => spectral_gap_with(&gen, EigenMethod::Dense)?,
                MethodChoice::Lanczos => spectral_gap_with(&gen, EigenMethod::Lanczos)?,
            };
            Outcome::ok(StudyReport::new(
                "exact-gap",
                metadata(&model, Some(seed), None),
                json!({ "method": c.method }),
                json!({
                    "records": [record(&model, "spectral_gap", s.gap, json!(s.method), json!(s.residual))],
                    "states": gen.num_states(),
                    "detailed_balance_error": gen.max_detailed_balance_error(),
                    "max_row_sum": gen.max_row_sum(),
                }),
            ))
        }
        Command::ExactMix(c) => {
            let mode = match c.mode {
                ModeChoice::Tv => DistanceMode::Tv,
                ModeChoice::Chi2 => DistanceMode::Chi2,
            };
            let m = mixing_time_exact(&model, c.threshold, mode, &opts)?;
            let quantity = match mode {
                DistanceMode::Tv => "t_mix",
                DistanceMode::Chi2 => "t_2",
            };
            let mut trace = Table::new("trace", &["time", "worst_distance"]);
            for (t, d) in &m.trace {
                trace.push([t.to_string(), format!("{d:e}")]);
            }
            let mut r = StudyReport::new(
                "exact-mix",
                metadata(&model, Some(seed), None),
                json!({ "threshold": c.threshold, "mode": c.mode }),
                json!({
                    "records": [record(&model, quantity, m.time, json!("uniformization-bisection"),
                                       json!(opts.time_tolerance))],
                    "gap": m.gap,
                    "bracket": m.bracket,
                    "trace_monotone": m.trace_is_monotone(1e-12),
                }),
            );
            r.tables.push(trace);
            Outcome::ok(r)
        }
        Command::FkBound(c) => {
            let site = match &c.site {
                Some(k) => site_index(&model, k)?,
                None => model.geometry().far_corner(),
            };
            let s = feynman_kac_study(&model, site, &c.times, replicas, seed, &opts)?;
            let mut r = s.to_report(&model);
            r.results["records"] = json!([record(
                &model,
                "feynman_kac_beta",
                s.exact.beta,
                json!(s.exact.method),
                json!(s.exact.residual)
            )]);
            Outcome::check(r, s.passes(), "Feynman–Kac bound check failed")
        }
        Command::LsiBound(_) => {
            let b = lsi_upper_bound(&model, &opts)?;
            Outcome::ok(StudyReport::new(
                "lsi-bound",
                metadata(&model, Some(seed), None),
                json!({}),
                json!({
                    "records": [record(&model, "lsi_upper_bound", b.bound, json!("indicator-of-all-ones"), Value::Null)],
                    "dirichlet": b.dirichlet,
                    "entropy": b.entropy,
                    "bound_times_sites": b.bound * b.num_sites as f64,
                }),
            ))
        }
        Command::Schedule(c) => {
            let (rate, c0) = match c.c {
                Some(v) => (v, None),
                None => {
                    let gen = build_generator(&model, &Region::full(&model), opts.state_cap)?;
                    let gap = spectral_gap(&gen)?.gap;
                    let b = analytic_c0(model.q(), model.geometry().dim(), gap)?;
                    (b.c0, Some(b))
                }
            };
            let s = mixing_schedule(model.geometry().side(), c.eps, rate)?;
            let mut table = Table::new("schedule", &["i", "delta", "t", "error_budget"]);
            for k in 0..s.deltas.len() {
                table.push([
                    (k + 1).to_string(),
                    s.deltas[k].to_string(),
                    s.times[k].to_string(),
                    s.error_budget[k].to_string(),
                ]);
            }
            let mut r = StudyReport::new(
                "schedule",
                metadata(&model, Some(seed), None),
                json!({ "eps": c.eps, "c": rate }),
                json!({ "schedule": s, "final_time": s.final_time(), "c0": c0 }),
            );
            r.tables.push(table);
            Outcome::ok(r)
        }
        Command::DiagonalDecay(c) => {
            let level = c
                .level
                .ok_or_else(|| KcmError::Validation("diagonal-decay needs a level".into()))?;
            let s = diagonal_decay_study(&model, level, &c.grid()?, c.fit_from, &opts)?;
            let passed = s.nonincreasing && s.dominated && s.fitted_rate >= s.c0.c0 - 1e-6;
            Outcome::check(s.to_report(&model, seed), passed, "decay curve violated its bound")
        }
        Command::TauScaling(c) => {
            let family = cfg.model.family()?;
            let topts = TauOptions {
                replicas,
                seed,
                cap_factor: c.cap_factor,
                bootstrap: c.bootstrap,
            };
            let s = tau_star_scaling(cfg.model.d, &family, cfg.model.p, &c.sizes, &topts)?;
            let largest = c.sizes.iter().copied().max().unwrap_or(cfg.model.n);
            let meta_model = Model::new(kcm::Geometry::new(cfg.model.d, largest)?, family, cfg.model.p)?;
            Outcome::ok(s.to_report(&meta_model))
        }
        Command::ValidateMc(c) => {
            let exact_model = match c.exact_p {
                Some(p) => model.with_p(p)?,
                None => model.clone(),
            };
            let initial = match c.initial {
                InitialState::Ones => SpinConfig::ones(model.num_sites()),
                InitialState::Zeros => SpinConfig::zeros(model.num_sites()),
                InitialState::Pi => {
                    return Err(KcmError::Validation(
                        "validate-mc starts from a fixed configuration (ones or zeros)".into(),
                    ))
                }
            };
            let s = mc_exact_validation_against(&model, &exact_model, c.time, replicas, seed, &initial, &opts)?;
            let pass = s.pass;
            Outcome::check(s.to_report(&model), pass, "empirical law outside tolerance")
        }
        Command::Shape(c) => {
            let rule = match c.rule {
                RuleChoice::ValueChange => FlipRule::ValueChange,
                RuleChoice::LegalRing => FlipRule::LegalRing,
            };
            let s = shape_study(
                &model,
                &ShapeOptions {
                    snapshots: c.snapshots.clone(),
                    replicas,
                    seed,
                    rule,
                    bootstrap: c.bootstrap,
                },
            )?;
            Outcome::ok(s.to_report(&model))
        }
    };
    outcome.report.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(outcome)
}
