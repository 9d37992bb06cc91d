//! Command-line front end. `run` parses argv, resolves the configuration
//! (flags over config file over per-command defaults), runs the experiment
//! and writes the points plus a manifest.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 failed
//! consistency or theorem assertion.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adversary::{
    best_reference_index, build_gen_lower, build_gen_nfl, build_id_lower, build_slow_rate, reference_interval,
    Instance, InstanceSpec, Side, DEFAULT_TAIL_ATOMS,
};
use crate::config::{geometric_grid, AlgorithmSpec, ExperimentConfig, Format, MethodChoice};
use crate::distributions::{lemma512_construct, RateFn};
use crate::error::{Error, Result};
use crate::eval::{exact_gen_err, exact_id_err, mc_rate, write_csv, write_json, Metric, RatePoint, Task};
use crate::identify::{theoretical_id_bound, IdAlgorithm};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "LANGLAB_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "langlab", version, about = "Identification and generation rate experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Experiment config (JSON, schema 1)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated sample sizes
    #[arg(long, global = true, value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; defaults to $LANGLAB_OUT_DIR/<command>.<ext>, else stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Margin,
    Erm,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// IdErr curve of an identification algorithm
    IdRate {
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long, value_enum)]
        method: Option<MethodChoice>,
    },
    /// GenErr curve of witness elimination with its analytic bound
    GenRate {
        #[arg(long, value_enum)]
        method: Option<MethodChoice>,
    },
    /// Worst of D_0/D_1 on the signature instances against (1/4)^(n+2)
    IdLower {
        #[arg(long)]
        distractors: Option<usize>,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long, value_enum)]
        method: Option<MethodChoice>,
    },
    /// Worst of D_0/D_1 on the shared-strings instances against exp(-2n)
    GenLower {
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        tail_atoms: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodChoice>,
    },
    /// GenErr over random labelings against 1 - epsilon
    Nfl {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// IdErr at the slow-rate checkpoints over random labelings
    SlowRate {
        #[arg(long)]
        rate: Option<RateFn>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
    },
    /// Checkpoints and mass of the slow-rate construction with property checks
    Lemma512 {
        #[arg(long)]
        rate: Option<RateFn>,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Maximiser of (1 - 2^-i)^n / i against its interval
    AppendixExample {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u64>>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::IdRate { .. } => "id-rate",
            Command::GenRate { .. } => "gen-rate",
            Command::IdLower { .. } => "id-lower",
            Command::GenLower { .. } => "gen-lower",
            Command::Nfl { .. } => "nfl",
            Command::SlowRate { .. } => "slow-rate",
            Command::Lemma512 { .. } => "lemma512",
            Command::AppendixExample { .. } => "appendix-example",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion { name: name.into(), passed, detail: detail.into() }
    }
}

/// Rendered output of one command.
struct Outcome {
    body: String,
    assertions: Vec<Assertion>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub all_passed: bool,
    pub wall_time_seconds: f64,
    pub finished_unix_seconds: u64,
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("langlab: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::BudgetExceeded(_)
        | Error::NoTailFormula(_)
        | Error::InvalidDistribution(_)
        | Error::InvalidRate { .. }
        | Error::HypothesisViolated(_)
        | Error::ZeroIndex(_)
        | Error::MalformedString { .. } => EXIT_CONFIG,
        Error::ConstructionFailure { .. } | Error::AnalyticsMismatch(_) | Error::IndexOverflow(_) => EXIT_ASSERTION,
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let started = Instant::now();
    let name = cli.command.name();
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(),
    };
    if let Some(c) = &cfg.command {
        if c != name {
            return Err(Error::Config(format!("config is for '{c}', not '{name}'")));
        }
    }
    cfg.command = Some(name.to_string());
    let c = &cli.common;
    cfg.n_grid = c.n_grid.clone().or(cfg.n_grid);
    cfg.trials = c.trials.or(cfg.trials);
    cfg.seed = c.seed.or(cfg.seed);
    cfg.format = c.format.or(cfg.format);
    cfg.validate()?;

    let outcome = match cli.command {
        Command::IdRate { algorithm, method } => id_rate(&mut cfg, algorithm, method)?,
        Command::GenRate { method } => gen_rate(&mut cfg, method)?,
        Command::IdLower { distractors, algorithm, method } => id_lower(&mut cfg, distractors, algorithm, method)?,
        Command::GenLower { m, tail_atoms, method } => gen_lower(&mut cfg, m, tail_atoms, method)?,
        Command::Nfl { epsilon } => nfl(&mut cfg, epsilon)?,
        Command::SlowRate { rate, depth, algorithm } => slow_rate(&mut cfg, rate, depth, algorithm)?,
        Command::Lemma512 { rate, depth } => lemma512(&mut cfg, rate, depth)?,
        Command::AppendixExample { n } => appendix(&mut cfg, n)?,
    };

    let format = cfg.format.unwrap_or(Format::Csv);
    let target = match &cli.common.out {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(|dir| PathBuf::from(dir).join(format!("{name}.{}", format.extension()))),
    };
    let all_passed = outcome.assertions.iter().all(|a| a.passed);
    for a in outcome.assertions.iter().filter(|a| !a.passed) {
        eprintln!("langlab: assertion failed: {} ({})", a.name, a.detail);
    }
    match target {
        None => print!("{}", outcome.body),
        Some(path) => {
            write_atomic(&path, outcome.body.as_bytes())?;
            let manifest = RunManifest {
                tool: "langlab",
                version: env!("CARGO_PKG_VERSION"),
                command: name.to_string(),
                config: cfg.clone(),
                outputs: vec![path.display().to_string()],
                assertions: outcome.assertions,
                all_passed,
                wall_time_seconds: started.elapsed().as_secs_f64(),
                finished_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            };
            let manifest_path = manifest_path(&path);
            write_atomic(&manifest_path, (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
        }
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_ASSERTION })
}

/// `<out>.manifest.json` next to the output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes to a sibling temporary file, then renames over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::from(e)
    })
}

fn render_points(cfg: &ExperimentConfig, points: &[RatePoint]) -> Result<String> {
    match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(write_csv(points)),
        Format::Json => write_json(points, &serde_json::to_value(cfg)?),
    }
}

fn resolve_id_algorithm(cfg: &mut ExperimentConfig, flag: Option<AlgorithmArg>) -> Result<IdAlgorithm> {
    let alg = match (flag, &cfg.algorithm) {
        (Some(AlgorithmArg::Margin), _) => IdAlgorithm::margin(),
        (Some(AlgorithmArg::Erm), _) => IdAlgorithm::erm(),
        (None, Some(spec)) => spec.identification()?,
        (None, None) => IdAlgorithm::margin(),
    };
    cfg.algorithm = Some(alg.into());
    Ok(alg)
}

fn check_unit_interval(points: &[RatePoint]) -> Assertion {
    let bad: Vec<u64> = points
        .iter()
        .filter(|p| !(0.0..=1.0).contains(&p.estimate) || p.std_error < 0.0)
        .map(|p| p.n)
        .collect();
    Assertion::new("estimates_are_probabilities", bad.is_empty(), format!("offending n: {bad:?}"))
}

/// Exact when requested or when `auto` and it fits, else Monte Carlo.
fn evaluate(
    method: MethodChoice,
    exact: impl Fn(u64) -> Result<Vec<RatePoint>>,
    mc: impl Fn(u64) -> Result<Vec<RatePoint>>,
    n: u64,
) -> Result<Vec<RatePoint>> {
    match method {
        MethodChoice::Exact => exact(n),
        MethodChoice::Mc => mc(n),
        MethodChoice::Auto => match exact(n) {
            Err(Error::BudgetExceeded(_)) => mc(n),
            other => other,
        },
    }
}

fn id_rate(cfg: &mut ExperimentConfig, flag: Option<AlgorithmArg>, method: Option<MethodChoice>) -> Result<Outcome> {
    let spec = cfg.instance.clone().unwrap_or(InstanceSpec::Signature { distractors: 2, side: Side::D0 });
    let instance = spec.build()?;
    cfg.instance = Some(spec);
    let alg = resolve_id_algorithm(cfg, flag)?;
    let method = *cfg.method.insert(method.or(cfg.method).unwrap_or(MethodChoice::Auto));
    let grid = cfg.n_grid.get_or_insert_with(|| geometric_grid(2, 12)).clone();
    let trials = *cfg.trials.get_or_insert(10_000);
    let seed = *cfg.seed.get_or_insert(0);
    let upper = |n: u64, p: &mut RatePoint| {
        if let (IdAlgorithm::Margin { window }, Metric::IdErr) = (alg, p.metric) {
            p.bound = Some(theoretical_id_bound(n, &window));
        }
    };
    let mut points = Vec::new();
    for n in grid {
        let mut pts = evaluate(
            method,
            |n| {
                let r = exact_id_err(&alg, &instance, n)?;
                Ok(std::iter::once(r.id_err).chain(r.select_prob).collect())
            },
            |n| mc_rate(&Task::Identify(alg), &instance, &[n], trials, seed),
            n,
        )?;
        pts.iter_mut().for_each(|p| upper(n, p));
        points.extend(pts);
    }
    Ok(Outcome { body: render_points(cfg, &points)?, assertions: vec![check_unit_interval(&points)] })
}

fn gen_rate(cfg: &mut ExperimentConfig, method: Option<MethodChoice>) -> Result<Outcome> {
    if let Some(a) = &cfg.algorithm {
        a.generation()?;
    }
    cfg.algorithm = Some(AlgorithmSpec::WitnessElimination {});
    let spec = cfg.instance.clone().unwrap_or(InstanceSpec::GenUpper {});
    let instance = spec.build()?;
    cfg.instance = Some(spec);
    let method = *cfg.method.insert(method.or(cfg.method).unwrap_or(MethodChoice::Auto));
    let grid = cfg.n_grid.get_or_insert_with(|| geometric_grid(0, 6)).clone();
    let trials = *cfg.trials.get_or_insert(10_000);
    let seed = *cfg.seed.get_or_insert(0);
    let mut points = Vec::new();
    for n in grid {
        points.extend(evaluate(
            method,
            |n| exact_gen_err(&instance, n).map(|p| vec![p]),
            |n| mc_rate(&Task::Generate, &instance, &[n], trials, seed),
            n,
        )?);
    }
    let mut assertions = vec![check_unit_interval(&points)];
    if instance.analytic.gen.is_some() {
        let over: Vec<u64> = points
            .iter()
            .filter(|p| p.std_error == 0.0 && p.trials == 0)
            .filter(|p| p.bound.is_some_and(|b| p.estimate > b + 1e-12))
            .map(|p| p.n)
            .collect();
        assertions.push(Assertion::new("exact_within_gen_upper_bound", over.is_empty(), format!("n over bound: {over:?}")));
    }
    Ok(Outcome { body: render_points(cfg, &points)?, assertions })
}

/// Pointwise worst case over a `(D_0, D_1)` pair.
fn worst_of(pair: &[Instance; 2], eval: impl Fn(&Instance) -> Result<RatePoint>) -> Result<RatePoint> {
    let a = eval(&pair[0])?;
    let b = eval(&pair[1])?;
    Ok(if b.estimate > a.estimate { b } else { a })
}

fn lower_bound_check(name: &str, points: &[RatePoint]) -> Assertion {
    let below: Vec<u64> = points
        .iter()
        .filter(|p| p.trials == 0)
        .filter(|p| p.bound.is_some_and(|b| p.estimate < b * (1.0 - 1e-12)))
        .map(|p| p.n)
        .collect();
    Assertion::new(name, below.is_empty(), format!("n below bound: {below:?}"))
}

fn id_lower(
    cfg: &mut ExperimentConfig,
    distractors: Option<usize>,
    flag: Option<AlgorithmArg>,
    method: Option<MethodChoice>,
) -> Result<Outcome> {
    let from_cfg = match &cfg.instance {
        None => None,
        Some(InstanceSpec::Signature { distractors, .. }) => Some(*distractors),
        Some(other) => return Err(Error::Config(format!("id-lower needs a signature instance, got {other:?}"))),
    };
    let d = distractors.or(from_cfg).unwrap_or(2);
    cfg.instance = Some(InstanceSpec::Signature { distractors: d, side: Side::D0 });
    let pair = build_id_lower(d)?;
    let alg = resolve_id_algorithm(cfg, flag)?;
    let method = *cfg.method.insert(method.or(cfg.method).unwrap_or(MethodChoice::Auto));
    let grid = cfg.n_grid.get_or_insert_with(|| geometric_grid(1, 4)).clone();
    let trials = *cfg.trials.get_or_insert(10_000);
    let seed = *cfg.seed.get_or_insert(0);
    let mut points = Vec::new();
    for n in grid {
        points.extend(evaluate(
            method,
            |n| Ok(vec![worst_of(&pair, |i| Ok(exact_id_err(&alg, i, n)?.id_err))?]),
            |n| Ok(vec![worst_of(&pair, |i| Ok(mc_rate(&Task::Identify(alg), i, &[n], trials, seed)?.remove(0)))?]),
            n,
        )?);
    }
    let assertions = vec![check_unit_interval(&points), lower_bound_check("worst_case_above_lower_bound", &points)];
    Ok(Outcome { body: render_points(cfg, &points)?, assertions })
}

fn gen_lower(
    cfg: &mut ExperimentConfig,
    m: Option<u64>,
    tail_atoms: Option<usize>,
    method: Option<MethodChoice>,
) -> Result<Outcome> {
    let (cfg_m, cfg_tail) = match &cfg.instance {
        None => (None, None),
        Some(InstanceSpec::GenLower { m, tail_atoms, .. }) => (Some(*m), Some(*tail_atoms)),
        Some(other) => return Err(Error::Config(format!("gen-lower needs a gen-lower instance, got {other:?}"))),
    };
    let m = m.or(cfg_m).unwrap_or(0);
    let tail = tail_atoms.or(cfg_tail).unwrap_or(DEFAULT_TAIL_ATOMS);
    cfg.instance = Some(InstanceSpec::GenLower { m, side: Side::D0, tail_atoms: tail });
    if let Some(a) = &cfg.algorithm {
        a.generation()?;
    }
    cfg.algorithm = Some(AlgorithmSpec::WitnessElimination {});
    let pair = build_gen_lower(m, tail)?;
    let method = *cfg.method.insert(method.or(cfg.method).unwrap_or(MethodChoice::Auto));
    let default_grid = if m == 0 { geometric_grid(1, 4) } else { (8 * m * m..=8 * m * m + 4).collect() };
    let grid = cfg.n_grid.get_or_insert(default_grid).clone();
    let trials = *cfg.trials.get_or_insert(10_000);
    let seed = *cfg.seed.get_or_insert(0);
    let mut points = Vec::new();
    for n in grid {
        points.extend(evaluate(
            method,
            |n| Ok(vec![worst_of(&pair, |i| exact_gen_err(i, n))?]),
            |n| Ok(vec![worst_of(&pair, |i| Ok(mc_rate(&Task::Generate, i, &[n], trials, seed)?.remove(0)))?]),
            n,
        )?);
    }
    let assertions = vec![check_unit_interval(&points), lower_bound_check("worst_case_above_lower_bound", &points)];
    Ok(Outcome { body: render_points(cfg, &points)?, assertions })
}

fn nfl(cfg: &mut ExperimentConfig, epsilon: Option<f64>) -> Result<Outcome> {
    let cfg_eps = match &cfg.instance {
        None => None,
        Some(InstanceSpec::Nfl { epsilon }) => Some(*epsilon),
        Some(other) => return Err(Error::Config(format!("nfl needs an nfl instance, got {other:?}"))),
    };
    let eps = epsilon.or(cfg_eps).unwrap_or(0.25);
    cfg.instance = Some(InstanceSpec::Nfl { epsilon: eps });
    if let Some(a) = &cfg.algorithm {
        a.generation()?;
    }
    cfg.algorithm = Some(AlgorithmSpec::WitnessElimination {});
    let instance = build_gen_nfl(eps)?;
    cfg.method = Some(MethodChoice::Mc);
    let grid = cfg.n_grid.get_or_insert_with(|| geometric_grid(0, 4)).clone();
    let trials = *cfg.trials.get_or_insert(10_000);
    let seed = *cfg.seed.get_or_insert(0);
    let points = mc_rate(&Task::Generate, &instance, &grid, trials, seed)?;
    let hit = points.iter().find(|p| p.estimate >= 1.0 - eps - 3.0 * p.std_error).map(|p| p.n);
    let assertions = vec![
        check_unit_interval(&points),
        Assertion::new("some_n_reaches_one_minus_epsilon", hit.is_some(), format!("first n: {hit:?}")),
    ];
    Ok(Outcome { body: render_points(cfg, &points)?, assertions })
}

fn slow_rate(
    cfg: &mut ExperimentConfig,
    rate: Option<RateFn>,
    depth: Option<usize>,
    flag: Option<AlgorithmArg>,
) -> Result<Outcome> {
    let (cfg_rate, cfg_depth) = match &cfg.instance {
        None => (cfg.rate, cfg.depth),
        Some(InstanceSpec::SlowRate { rate, depth }) => (Some(*rate), Some(*depth)),
        Some(other) => return Err(Error::Config(format!("slow-rate needs a slow-rate instance, got {other:?}"))),
    };
    let rate = rate.or(cfg_rate).unwrap_or(RateFn::inverse_sqrt());
    let depth = depth.or(cfg_depth).unwrap_or(4);
    cfg.instance = Some(InstanceSpec::SlowRate { rate, depth });
    cfg.rate = None;
    cfg.depth = None;
    let (instance, art) = build_slow_rate(rate, depth)?;
    let alg = resolve_id_algorithm(cfg, flag)?;
    cfg.method = Some(MethodChoice::Mc);
    let grid = cfg
        .n_grid
        .get_or_insert_with(|| art.n.iter().copied().filter(|n| *n < 100_000).collect())
        .clone();
    let trials = *cfg.trials.get_or_insert(2_000);
    let seed = *cfg.seed.get_or_insert(0);
    let points = mc_rate(&Task::Identify(alg), &instance, &grid, trials, seed)?;
    let short: Vec<u64> = points
        .iter()
        .filter(|p| art.n.contains(&p.n))
        .filter(|p| p.estimate < rate.eval(p.n) / 16.0 - 3.0 * p.std_error)
        .map(|p| p.n)
        .collect();
    let assertions = vec![
        check_unit_interval(&points),
        Assertion::new("checkpoints_above_rate_over_16", short.is_empty(), format!("checkpoints below: {short:?}")),
    ];
    Ok(Outcome { body: render_points(cfg, &points)?, assertions })
}

#[derive(Serialize)]
struct LemmaRow {
    i: usize,
    n: u64,
    k: u64,
    p: f64,
    sigma: u64,
    rate: f64,
    tail_bound: bool,
    mass_vs_index: bool,
    proportional: bool,
}

fn lemma512(cfg: &mut ExperimentConfig, rate: Option<RateFn>, depth: Option<usize>) -> Result<Outcome> {
    let rate = *cfg.rate.insert(rate.or(cfg.rate).unwrap_or(RateFn::InverseLog {}));
    let depth = *cfg.depth.insert(depth.or(cfg.depth).unwrap_or(3));
    let art = lemma512_construct(rate, depth)?;
    let report = art.verify();
    let rows: Vec<LemmaRow> = (0..depth)
        .map(|i| LemmaRow {
            i: i + 1,
            n: art.n[i],
            k: art.k[i],
            p: art.p[i],
            sigma: art.sigma[i + 1],
            rate: rate.eval(art.n[i]),
            tail_bound: report.tail_bound[i],
            mass_vs_index: report.mass_vs_index[i],
            proportional: report.proportional[i],
        })
        .collect();
    let body = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("i,n,k,p,sigma,rate,tail_bound,mass_vs_index,proportional\n");
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{:e},{},{:e},{},{},{}\n",
                    r.i, r.n, r.k, r.p, r.sigma, r.rate, r.tail_bound, r.mass_vs_index, r.proportional
                ));
            }
            s
        }
        Format::Json => {
            let doc = serde_json::json!({
                "config": cfg,
                "artifacts": art,
                "rows": rows,
                "properties": report,
                "all_hold": report.all_hold(),
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    let assertions = vec![
        Assertion::new("tail_bound", report.tail_bound.iter().all(|b| *b), format!("{:?}", report.tail_bound)),
        Assertion::new("mass_vs_index", report.mass_vs_index.iter().all(|b| *b), format!("{:?}", report.mass_vs_index)),
        Assertion::new("proportional", report.proportional.iter().all(|b| *b), format!("{:?}", report.proportional)),
        Assertion::new("c_at_least_half", report.c_at_least_half, format!("C = {}", art.c)),
        Assertion::new("normalized", report.normalized, String::new()),
    ];
    Ok(Outcome { body, assertions })
}

#[derive(Serialize)]
struct AppendixRow {
    n: u64,
    index: u64,
    value: f64,
    lower: f64,
    upper: f64,
    within: bool,
}

fn appendix(cfg: &mut ExperimentConfig, n: Option<Vec<u64>>) -> Result<Outcome> {
    let grid = n.or(cfg.n_grid.clone()).unwrap_or_else(|| vec![10, 100, 1000, 10_000]);
    if grid.is_empty() || grid.contains(&0) {
        return Err(Error::Config("n must be positive".into()));
    }
    cfg.n_grid = Some(grid.clone());
    let rows: Vec<AppendixRow> = grid
        .iter()
        .map(|&n| {
            let (index, value) = best_reference_index(n);
            let (lower, upper) = reference_interval(n);
            AppendixRow { n, index, value, lower, upper, within: lower <= index as f64 && index as f64 <= upper }
        })
        .collect();
    let body = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("n,index,value,lower,upper,within\n");
            for r in &rows {
                s.push_str(&format!("{},{},{:e},{:e},{:e},{}\n", r.n, r.index, r.value, r.lower, r.upper, r.within));
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&serde_json::json!({ "config": cfg, "rows": rows }))? + "\n",
    };
    let outside: Vec<u64> = rows.iter().filter(|r| !r.within).map(|r| r.n).collect();
    Ok(Outcome {
        body,
        assertions: vec![Assertion::new("maximiser_within_interval", outside.is_empty(), format!("{outside:?}"))],
    })
}
