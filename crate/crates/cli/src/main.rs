mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use critic_lab::actor_critic::{self, default_config, initial_policies, DomainDefaults, LearningCurve};
use critic_lab::domains::{self, DOMAIN_NAMES};
use critic_lab::export::{self, HistorySidecar, TraceRow};
use critic_lab::gradients::{analyze, gd_train, sgd_train, GdConfig, SgdConfig, StepSchedule, Variant};
use critic_lab::suites::{self, Check, Suite, Target};
use critic_lab::values::{q_history_state, q_individual_all, q_joint_history, q_state, q_state_timed, QTable};
use critic_lab::visitation::{compute_visitations, VisitationConfig};
use critic_lab::{DecPomdp, PolicySet};

use output::Run;

/// Exact visitation, value, and gradient analysis for multi-agent actor-critic on finite Dec-POMDPs.
#[derive(Parser, Debug)]
#[command(name = "critic-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a property suite and report each check.
    Verify(VerifyArgs),
    /// Train one variant over a range of seeds.
    Train(TrainArgs),
    /// Write model, visitation, value, or gradient tables.
    Export(ExportArgs),
    /// Train several variants over a range of seeds in parallel.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct DomainArgs {
    /// Bundled domain name or alias; may also be given as the first positional argument.
    #[arg(long)]
    domain: Option<String>,
    /// Load the model from a JSON file instead of a bundled domain.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "GAMMA")]
    gamma_override: Option<f64>,
    /// Joint-history node budget for exact enumeration.
    #[arg(long, value_name = "NODES")]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    target: DomainArgs,
    /// `[DOMAIN] [SUITE]`: domain (or `all`, `random`) and suite (default `all`).
    #[arg(value_name = "ARGS", num_args = 0..=2)]
    args: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct TrainingArgs {
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    actor_lr: Option<f64>,
    #[arg(long)]
    critic_lr: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Ac)]
    mode: Mode,
    #[arg(long, env = "CRITIC_LAB_OUT", default_value = "critic-lab-out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    target: DomainArgs,
    #[arg(value_name = "DOMAIN")]
    domain_arg: Option<String>,
    #[arg(long, default_value = "iac")]
    variant: String,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    target: DomainArgs,
    #[arg(value_name = "DOMAIN")]
    domain_arg: Option<String>,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_value = "iac,iacc-h,iacc-s,iacc-hs,jac")]
    variant: Vec<String>,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    target: DomainArgs,
    /// `[DOMAIN] WHAT`, with WHAT one of model, visitations, qtables, gradients.
    #[arg(value_name = "ARGS", num_args = 1..=2, required = true)]
    args: Vec<String>,
    #[arg(long, env = "CRITIC_LAB_OUT", default_value = "critic-lab-out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    /// Sampled actor-critic with a learned critic.
    Ac,
    /// Exact expected-gradient ascent.
    Gd,
    /// Single-episode stochastic ascent with the exact critic.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum What {
    Model,
    Visitations,
    Qtables,
    Gradients,
}

/// Usage, configuration, and runtime errors all exit with 2.
fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(msg.into())
}

struct Resolved {
    name: String,
    model: DecPomdp,
    reference: Option<PolicySet>,
    bundled: bool,
}

impl DomainArgs {
    fn name(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    /// Takes the domain from the leading positional unless `--domain` or `--model` gave one; returns the rest.
    fn absorb(&mut self, positionals: &[String]) -> Result<Vec<String>> {
        let mut rest = positionals.to_vec();
        if self.domain.is_some() && self.model.is_some() {
            return Err(usage("--domain and --model are mutually exclusive"));
        }
        if self.domain.is_none() && self.model.is_none() && !rest.is_empty() {
            self.domain = Some(rest.remove(0));
        }
        Ok(rest)
    }

    fn vis_config(&self) -> VisitationConfig {
        let mut c = VisitationConfig::default();
        if let Some(b) = self.budget {
            c.node_budget = b;
        }
        c
    }

    fn resolve(&self) -> Result<Resolved> {
        let mut r = match (&self.model, self.name()) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let model = DecPomdp::from_json_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let name = path.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
                Resolved { reference: Some(domains::uniform_softmax(&model)), name, model, bundled: false }
            }
            (None, Some(name)) => {
                let b = domains::by_name(name).map_err(|e| usage(e.to_string()))?;
                Resolved { name: b.name.to_string(), model: b.model, reference: b.reference_policies, bundled: true }
            }
            (None, None) => return Err(usage("a domain name or --model FILE is required")),
        };
        if let Some(g) = self.gamma_override {
            if !(0.0..=1.0).contains(&g) {
                return Err(usage(format!("--gamma-override must lie in [0, 1], got {g}")));
            }
            r.model.discount = g;
        }
        Ok(r)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => verify(a),
        Command::Train(a) => train(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Export(a) => export_cmd(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn verify(mut a: VerifyArgs) -> Result<bool> {
    let rest = a.target.absorb(&a.args)?;
    let suite = match rest.as_slice() {
        [] => "all",
        [s] => s.as_str(),
        _ => return Err(usage("verify takes [DOMAIN] [SUITE]")),
    };
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![Suite::from_str(suite).map_err(|e| usage(e.to_string()))?]
    };
    let mut jobs: Vec<(Suite, Target)> = Vec::new();
    let mut push = |t: Target, explicit: bool| -> Result<()> {
        let name = match &t {
            Target::Bundle(b) => b.name.to_string(),
            _ => String::new(),
        };
        for &s in &suites {
            if s.applies_to(&name) {
                jobs.push((s, t.clone()));
            } else if explicit && suites.len() == 1 {
                return Err(usage(format!("suite '{s}' is not defined for '{}'", t.name())));
            }
        }
        Ok(())
    };
    match (&a.target.model, a.target.name()) {
        (Some(_), _) => {
            let r = a.target.resolve()?;
            push(Target::Model(r.name, r.model), true)?;
        }
        (None, Some("all")) => {
            for name in DOMAIN_NAMES {
                push(with_gamma(Target::Bundle(domains::by_name(name)?), a.target.gamma_override), false)?;
            }
            push(Target::Random(suites::RANDOM_MODELS), false)?;
        }
        (None, Some("random")) => push(Target::Random(suites::RANDOM_MODELS), true)?,
        (None, Some(name)) => {
            let b = domains::by_name(name).map_err(|e| usage(e.to_string()))?;
            push(with_gamma(Target::Bundle(b), a.target.gamma_override), true)?;
        }
        (None, None) => return Err(usage("a domain name, `all`, `random`, or --model FILE is required")),
    }
    let results: Vec<critic_lab::Result<Vec<Check>>> = jobs.par_iter().map(|(s, t)| suites::run(*s, t)).collect();
    let (mut passed, mut failed) = (0usize, 0usize);
    for ((s, t), r) in jobs.iter().zip(results) {
        match r {
            Ok(checks) => {
                for c in checks {
                    if c.passed() {
                        passed += 1;
                    } else {
                        failed += 1;
                    }
                    println!("{c}");
                }
            }
            Err(e) => {
                failed += 1;
                println!("FAIL [{s}/{}] suite did not run: {e}", t.name());
            }
        }
    }
    println!("{passed} passed, {failed} failed");
    Ok(failed == 0)
}

fn with_gamma(t: Target, gamma: Option<f64>) -> Target {
    match (t, gamma) {
        (Target::Bundle(mut b), Some(g)) => {
            b.model.discount = g;
            Target::Bundle(b)
        }
        (t, _) => t,
    }
}

/// Resolved training configuration; its hash goes into the manifest.
#[derive(Debug, Clone, Serialize)]
struct TrainPlan {
    domain: String,
    mode: Mode,
    variants: Vec<Variant>,
    seeds: Vec<u64>,
    defaults: DomainDefaults,
    discount: f64,
    budget: Option<usize>,
}

fn plan(target: &DomainArgs, variants: &[String], t: &TrainingArgs) -> Result<(Resolved, TrainPlan)> {
    let r = target.resolve()?;
    let variants = variants.iter().map(|v| Variant::from_str(v).map_err(|e| usage(e.to_string()))).collect::<Result<Vec<_>>>()?;
    if variants.is_empty() {
        return Err(usage("at least one variant is required"));
    }
    if t.seeds == 0 {
        return Err(usage("--seeds must be positive"));
    }
    let mut d = if r.bundled {
        default_config(&r.name)?
    } else {
        DomainDefaults {
            domain: r.name.clone(),
            actor_lr: 0.01,
            critic_lr: 0.1,
            episodes: 5000,
            eval_every: 100,
            max_len: r.model.horizon.unwrap_or(50),
            eval_episodes: actor_critic::DEFAULT_EVAL_EPISODES,
        }
    };
    if let Some(e) = t.episodes {
        d.episodes = e;
        d.eval_every = d.eval_every.min(e.max(1));
    }
    if let Some(x) = t.actor_lr {
        d.actor_lr = x;
    }
    if let Some(x) = t.critic_lr {
        d.critic_lr = x;
    }
    let p = TrainPlan {
        domain: r.name.clone(),
        mode: t.mode,
        variants,
        seeds: (t.seed_offset..t.seed_offset + t.seeds).collect(),
        defaults: d,
        discount: r.model.discount,
        budget: target.budget,
    };
    Ok((r, p))
}

enum Outcome {
    Curve(LearningCurve),
    Trace(Vec<TraceRow>),
}

fn run_one(r: &Resolved, p: &TrainPlan, vcfg: &VisitationConfig, variant: Variant, seed: u64) -> Result<Outcome> {
    let run_id = format!("{}-{variant}-s{seed}", r.name);
    let d = &p.defaults;
    Ok(match p.mode {
        Mode::Ac => {
            let mut cfg = d.to_train_config(variant, seed);
            if let Some(b) = p.budget {
                cfg.eval_budget = b;
            }
            Outcome::Curve(actor_critic::train(&r.model, &cfg)?)
        }
        Mode::Gd => {
            let cfg = GdConfig { variant, schedule: StepSchedule::Constant { lr: d.actor_lr }, iterations: d.episodes, ascent: true };
            let run = gd_train(&r.model, &initial_policies(&r.model, variant), &cfg, vcfg)?;
            Outcome::Trace(export::gd_rows(&run_id, seed, &run))
        }
        Mode::Sgd => {
            let cfg = SgdConfig {
                variant,
                schedule: StepSchedule::Constant { lr: d.actor_lr },
                iterations: d.episodes,
                seed,
                ascent: true,
                critic_refresh: 1,
                max_len: d.max_len,
            };
            let run = sgd_train(&r.model, &initial_policies(&r.model, variant), &cfg, vcfg)?;
            Outcome::Trace(export::sgd_rows(&run_id, seed, &run))
        }
    })
}

fn training(command: &str, r: &Resolved, p: &TrainPlan, vcfg: &VisitationConfig, out: &Path) -> Result<()> {
    let jobs: Vec<(Variant, u64)> = p.variants.iter().flat_map(|&v| p.seeds.iter().map(move |&s| (v, s))).collect();
    let results: Vec<Result<Outcome>> = jobs.par_iter().map(|&(v, s)| run_one(r, p, vcfg, v, s)).collect();
    let mut run = Run::create(out, command, &r.name)?;
    let mut aggregates = Vec::new();
    let mut outcomes = results.into_iter();
    for &variant in &p.variants {
        let mut rows = Vec::new();
        let mut curves = Vec::new();
        for _ in &p.seeds {
            match outcomes.next().expect("one outcome per job")? {
                Outcome::Curve(c) => {
                    rows.extend(export::curve_rows(&format!("{}-{variant}-s{}", r.name, c.config.seed), &c));
                    curves.push(c);
                }
                Outcome::Trace(t) => rows.extend(t),
            }
        }
        let name = if p.mode == Mode::Ac { format!("{variant}-curves.csv") } else { format!("{variant}-{}-trace.csv", mode_str(p.mode)) };
        run.write_with(&name, |b| export::write_trace_csv(b, &rows))?;
        if !curves.is_empty() {
            let agg = export::aggregate(variant.as_str(), &curves);
            let f = curves.iter().map(|c| c.final_point().greedy).collect::<Vec<_>>();
            println!(
                "{variant}: final greedy return mean {} over {} seeds (min {}, max {})",
                export::sig6(f.iter().sum::<f64>() / f.len() as f64),
                f.len(),
                export::sig6(f.iter().copied().fold(f64::INFINITY, f64::min)),
                export::sig6(f.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            );
            aggregates.extend(agg);
        }
    }
    if !aggregates.is_empty() {
        run.write_with("aggregate.csv", |b| export::write_aggregate_csv(b, &aggregates))?;
    }
    run.write("config.json", format!("{}\n", serde_json::to_string_pretty(p)?).as_bytes())?;
    let dir = run.dir().to_path_buf();
    run.finish(command, &r.name, p.variants.iter().map(|v| v.to_string()).collect(), p.seeds.clone(), p)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn mode_str(m: Mode) -> &'static str {
    match m {
        Mode::Ac => "ac",
        Mode::Gd => "gd",
        Mode::Sgd => "sgd",
    }
}

fn train(mut a: TrainArgs) -> Result<()> {
    a.target.absorb(a.domain_arg.as_slice())?;
    let (r, p) = plan(&a.target, std::slice::from_ref(&a.variant), &a.training)?;
    training("train", &r, &p, &a.target.vis_config(), &a.training.out)
}

fn sweep(mut a: SweepArgs) -> Result<()> {
    a.target.absorb(a.domain_arg.as_slice())?;
    let (r, p) = plan(&a.target, &a.variant, &a.training)?;
    training("sweep", &r, &p, &a.target.vis_config(), &a.training.out)
}

#[derive(Serialize)]
struct ExportConfig<'a> {
    domain: &'a str,
    what: What,
    discount: f64,
    budget: Option<usize>,
}

fn export_cmd(mut a: ExportArgs) -> Result<()> {
    let rest = a.target.absorb(&a.args)?;
    let what = match rest.as_slice() {
        [w] => What::from_str(w, true).map_err(|_| usage(format!("unknown export kind '{w}' (expected model, visitations, qtables, gradients)")))?,
        _ => return Err(usage("export takes [DOMAIN] WHAT")),
    };
    let r = a.target.resolve()?;
    let vcfg = a.target.vis_config();
    let m = &r.model;
    let mut run = Run::create(&a.out, "export", &r.name)?;
    let reference = || r.reference.clone().ok_or_else(|| usage(format!("{} has no reference policy", r.name)));
    let mut variants = Vec::new();
    match what {
        What::Model => {
            run.write("model.json", format!("{}\n", m.to_json_string()).as_bytes())?;
        }
        What::Visitations => {
            let vis = compute_visitations(m, &reference()?, &vcfg)?;
            run.write_with("visitations.csv", |b| export::write_visitation_csv(b, &vis))?;
            run.write("histories.json", HistorySidecar::from_arena(m, &vis.arena).to_json_string().as_bytes())?;
        }
        What::Qtables => {
            let pol = reference()?;
            let vis = compute_visitations(m, &pol, &vcfg)?;
            let qh = q_joint_history(m, &pol, &vis)?;
            let qhs = q_history_state(m, &pol, &vis)?;
            let qi = q_individual_all(m, &pol, &vis)?;
            let qs = q_state(m, &vis)?;
            let qt = q_state_timed(m, &vis);
            let mut tables: Vec<&dyn QTable> = vec![&qh, &qhs, &qs, &qt];
            tables.extend(qi.iter().map(|q| q as &dyn QTable));
            run.write_with("qtables.csv", |b| export::write_qtable_csv(b, &tables))?;
            let mut side = HistorySidecar::from_arena(m, &vis.arena);
            for q in &qi {
                side.add_individuals(m, &q.arena, q.agent);
            }
            run.write("histories.json", side.to_json_string().as_bytes())?;
        }
        What::Gradients => {
            let pol = suites::analysis_policies(m, &reference()?)?;
            let vis = compute_visitations(m, &pol, &vcfg)?;
            let mut stats = Vec::new();
            for v in Variant::DECENTRALIZED {
                stats.extend(analyze(v, m, &pol, &vis).map_err(|e| anyhow!("{v}: {e}"))?);
                variants.push(v.to_string());
            }
            run.write_with("gradient-moments.csv", |b| export::write_moments_csv(b, &stats))?;
            run.write_with("gradients.csv", |b| export::write_gradient_csv(b, &stats))?;
            let mut side = HistorySidecar::from_arena(m, &vis.arena);
            for agent in 0..m.n_agents() {
                side.add_individuals(m, &vis.arena, agent);
            }
            run.write("histories.json", side.to_json_string().as_bytes())?;
        }
    }
    let dir = run.dir().to_path_buf();
    let cfg = ExportConfig { domain: &r.name, what, discount: m.discount, budget: a.target.budget };
    run.finish("export", &r.name, variants, Vec::new(), &cfg)?;
    println!("wrote {}", dir.display());
    Ok(())
}
