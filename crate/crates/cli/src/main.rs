//! `flowlab`: simulate Brownian flows and check them against tail bounds.
//!
//! Exit codes: 0 when every verdict passes, 1 when any fails, 2 on a usage or
//! configuration error.

mod output;
mod shipped;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flowlab_core::bounds::{self, BallParams, TailBound};
use flowlab_core::config::{ExperimentKind, OneOrMany};
use flowlab_core::experiments::{chaining_exact_check, quarter_grid, ChainingRow};
use flowlab_core::geometry::cover_sphere;
use flowlab_core::integrator::{evolve_with, TrajectoryWriter};
use flowlab_core::report::{binomial_se, fmt_sig, SummaryRow};
use flowlab_core::runner::{run, RunOutput};
use flowlab_core::{beta0, gamma0, CertifiedConstants, ExperimentConfig, ModelSpec, NoiseSource, PointCloud, Seed};
use serde::Serialize;

use crate::output::{write_outputs, Manifest, Results, MANIFEST, REPORT, SUMMARY};

#[derive(Parser)]
#[command(name = "flowlab", version, about = "Simulation and bound checks for Brownian flows of SDEs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Global {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Run seed, decimal or 0x-hex.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for report.json, summary.csv and manifest.json.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Step size.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Monte Carlo replicas.
    #[arg(long, global = true)]
    replicas: Option<u64>,
}

/// Overrides for the `radii` block and the horizon of a config.
#[derive(Args, Clone, Default)]
struct RadiiFlags {
    #[arg(long = "R")]
    r_big: Option<f64>,
    #[arg(long = "S")]
    s: Option<f64>,
    #[arg(long = "R-bar")]
    r_bar: Option<f64>,
    #[arg(long = "r")]
    r: Option<f64>,
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    /// Lattice points per cube side.
    #[arg(long)]
    grid: Option<usize>,
    /// Horizon `T` (or the first rung of a ladder).
    #[arg(long = "T")]
    horizon: Option<f64>,
}

#[derive(Args, Clone)]
struct ConstantsArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long = "sigma-l")]
    sigma_l: f64,
    #[arg(long = "sigma-b")]
    sigma_b: f64,
    #[arg(long)]
    d: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Chaining,
    Gaussian,
    OnePoint,
    TwoPoint,
    Diameter,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Chaining => "chaining",
            Suite::Gaussian => "gaussian",
            Suite::OnePoint => "one-point",
            Suite::TwoPoint => "two-point",
            Suite::Diameter => "diameter",
            Suite::All => "all",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Critical drift beta0 and covering scale Gamma0 of certified constants.
    Beta0(ConstantsArgs),
    /// Rate certificate of the expansion estimate, and the cube rate I(gamma).
    Rates {
        #[command(flatten)]
        constants: ConstantsArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Use d - 1 in place of d in I(gamma).
        #[arg(long)]
        one_to_one: bool,
    },
    /// Evaluate one tail bound and print it as JSON.
    Bounds {
        /// gaussian_tail, running_max_tail, escape_upper, return_upper, dip_bound,
        /// crossing_bound, excursion_bound, two_point_tail, kolmogorov_tail,
        /// ball_diameter_bound, ball_diameter_bound_opt, rate_I
        name: String,
        /// Comma-separated key=value pairs.
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Sphere covering as CSV.
    Cover {
        #[arg(long)]
        d: usize,
        #[arg(long = "S")]
        s: f64,
        #[arg(long)]
        xi: f64,
    },
    /// Trajectories of coupled points as CSV.
    Simulate {
        #[arg(long, default_value = "radial2d-in")]
        model: String,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Starting points, `x1,x2;y1,y2;...`.
        #[arg(long)]
        points: String,
        #[arg(long = "T")]
        horizon: f64,
        /// Record every k-th step.
        #[arg(long, default_value_t = 1)]
        every: u64,
    },
    /// Run a bound suite and compare each estimate with its bound.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        radii: RadiiFlags,
    },
    /// Pullback attraction experiment.
    Attract {
        #[command(flatten)]
        radii: RadiiFlags,
    },
    /// Linear expansion experiment.
    Expand {
        #[command(flatten)]
        radii: RadiiFlags,
    },
    /// Exhaustive chaining check on short random walks.
    ChainCheck {
        /// Walk lengths (powers of two up to 16).
        #[arg(long, value_delimiter = ',', default_values_t = vec![4u32, 8])]
        steps: Vec<u32>,
    },
    /// Radius schedule S_{i+1} = S_i + gamma S_i^alpha with partial sums of exp(-c S_i^alpha).
    Schedule {
        #[arg(long, default_value_t = 2.0)]
        s0: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
}

/// Configuration errors exit with 2, verdicts with 0 or 1.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Beta0(c) => {
            let k = constants(c)?;
            println!("beta0 = {}", fmt_sig(beta0(&k, c.d)));
            println!("Gamma0 = {}", fmt_sig(gamma0(&k, c.d)));
            Ok(Outcome::Pass)
        }
        Command::Rates {
            constants: c,
            beta,
            gamma,
            epsilon,
            one_to_one,
        } => {
            let k = constants(c)?;
            let cert = bounds::rate_certificate(*beta, *gamma, *epsilon, &k, c.d)?;
            let rate = bounds::rate_i(*gamma, k.lambda, k.sigma_l, c.d, *one_to_one);
            #[derive(Serialize)]
            struct Rates {
                certificate: bounds::RateCertificate,
                rate_i: f64,
            }
            println!("{}", flowlab_core::report::to_json(&Rates { certificate: cert.clone(), rate_i: rate })?);
            Ok(if cert.feasible { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Bounds { name, params } => {
            let value = evaluate_bound(name, &parse_params(params)?)?;
            println!("{}", flowlab_core::report::to_json(&value)?);
            Ok(Outcome::Pass)
        }
        Command::Cover { d, s, xi } => {
            let c = cover_sphere(*d, *s, *xi)?;
            match &g.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    c.write_csv(BufWriter::new(File::create(dir.join("covering.csv"))?))?;
                }
                None => c.write_csv(io::stdout().lock())?,
            }
            eprintln!("centers = {}, achieved c_d = {}", c.len(), fmt_sig(c.achieved_cd));
            Ok(if c.verify() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Simulate {
            model,
            beta,
            sigma,
            tau,
            lambda,
            points,
            horizon,
            every,
        } => {
            let spec = ModelSpec {
                id: model.clone(),
                beta: *beta,
                sigma: *sigma,
                tau: *tau,
                lambda: *lambda,
            };
            simulate(g, &spec, points, *horizon, (*every).max(1))?;
            Ok(Outcome::Pass)
        }
        Command::Verify { suite, radii } => verify(g, *suite, radii),
        Command::Attract { radii } => experiment(g, radii, shipped::ATTRACTION, ExperimentKind::Attraction),
        Command::Expand { radii } => experiment(g, radii, shipped::EXPANSION, ExperimentKind::Expansion),
        Command::ChainCheck { steps } => {
            let rows = chaining_rows(steps)?;
            print_chaining(&rows);
            Ok(if rows.iter().all(|r| r.holds) { Outcome::Pass } else { Outcome::Fail })
        }
        Command::Schedule { s0, gamma, alpha, n, c } => {
            let s = bounds::borel_cantelli_schedule(*s0, *gamma, *alpha, *n, *c)?;
            println!("i,S_i,T_i,partial_sum");
            for (i, ((si, ti), ps)) in s.pairs.iter().zip(&s.partial_sums).enumerate() {
                println!("{i},{},{},{}", fmt_sig(*si), fmt_sig(*ti), fmt_sig(*ps));
            }
            Ok(Outcome::Pass)
        }
    }
}

fn constants(c: &ConstantsArgs) -> anyhow::Result<CertifiedConstants> {
    if c.d == 0 {
        bail!("dimension must be at least 1");
    }
    Ok(CertifiedConstants::new(c.lambda, c.sigma_l, c.sigma_b)?)
}

fn parse_params(text: &str) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| anyhow!("parameter `{item}` is not key=value"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("parameter `{k}`"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(untagged)]
enum BoundValue {
    Tail(TailBound),
    TwoPoint { exact: f64, bound: TailBound },
    Optimized { bound: TailBound, q: f64, kappa: f64 },
    Rate { name: String, value: f64 },
}

fn evaluate_bound(name: &str, p: &BTreeMap<String, f64>) -> anyhow::Result<BoundValue> {
    let name = name.replace('-', "_");
    let allowed: &[&str] = match name.as_str() {
        "gaussian_tail" | "running_max_tail" => &["c", "t"],
        "escape_upper" | "return_upper" => &["R", "S", "R_bar", "T", "sigma_B", "beta_star"],
        "dip_bound" => &["S", "R_bar", "sigma_B", "beta_star"],
        "crossing_bound" => &["R", "S", "T", "sigma_B"],
        "excursion_bound" => &["delta", "h", "sigma_B"],
        "two_point_tail" => &["separation", "u", "T", "sigma_L", "lambda"],
        "kolmogorov_tail" => &["a", "b", "c", "kappa", "d", "u"],
        "ball_diameter_bound" => &["xi", "T", "u", "q", "kappa", "c_bar", "Lambda", "sigma", "d"],
        "ball_diameter_bound_opt" => &["xi", "T", "u", "c_bar", "Lambda", "sigma", "d"],
        "rate_I" | "rate_i" => &["gamma", "Lambda", "sigma", "d", "one_to_one"],
        other => bail!("unknown bound `{other}`"),
    };
    if let Some(k) = p.keys().find(|k| !allowed.contains(&k.as_str())) {
        bail!("unknown parameter `{k}` for {name}; expected {}", allowed.join(", "));
    }
    let get = |k: &str| p.get(k).copied().ok_or_else(|| anyhow!("missing parameter `{k}` for {name}"));
    let dim = |k: &str| -> anyhow::Result<usize> {
        let v = get(k)?;
        if v < 1.0 || v.fract() != 0.0 {
            bail!("`{k}` must be a positive integer");
        }
        Ok(v as usize)
    };
    Ok(match name.as_str() {
        "gaussian_tail" => BoundValue::Tail(bounds::gaussian_tail(get("c")?, get("t")?)?),
        "running_max_tail" => BoundValue::Tail(bounds::running_max_tail(get("c")?, get("t")?)?),
        "escape_upper" => BoundValue::Tail(bounds::escape_upper(
            get("R")?,
            get("S")?,
            get("R_bar")?,
            get("T")?,
            get("sigma_B")?,
            get("beta_star")?,
        )?),
        "return_upper" => BoundValue::Tail(bounds::return_upper(
            get("R")?,
            get("S")?,
            get("R_bar")?,
            get("T")?,
            get("sigma_B")?,
            get("beta_star")?,
        )?),
        "dip_bound" => BoundValue::Tail(bounds::dip_bound(get("S")?, get("R_bar")?, get("sigma_B")?, get("beta_star")?)?),
        "crossing_bound" => BoundValue::Tail(bounds::crossing_bound(get("R")?, get("S")?, get("T")?, get("sigma_B")?)?),
        "excursion_bound" => BoundValue::Tail(bounds::excursion_bound(get("delta")?, get("h")?, get("sigma_B")?)?),
        "two_point_tail" => {
            let (exact, bound) =
                bounds::two_point_tail(get("separation")?, get("u")?, get("T")?, get("sigma_L")?, get("lambda")?)?;
            BoundValue::TwoPoint { exact, bound }
        }
        "kolmogorov_tail" => BoundValue::Tail(
            bounds::kolmogorov_tail(get("a")?, get("b")?, get("c")?, get("kappa")?, dim("d")?, get("u")?)?.bound,
        ),
        "ball_diameter_bound" | "ball_diameter_bound_opt" => {
            let bp = BallParams {
                xi: get("xi")?,
                t: get("T")?,
                u: get("u")?,
                c_bar: p.get("c_bar").copied().unwrap_or(2.0),
                lambda: get("Lambda")?,
                sigma: get("sigma")?,
                d: dim("d")?,
            };
            if name == "ball_diameter_bound" {
                BoundValue::Tail(bounds::ball_diameter_bound(&bp, get("q")?, get("kappa")?)?)
            } else {
                let o = bounds::ball_diameter_bound_opt(&bp);
                BoundValue::Optimized {
                    bound: o.bound,
                    q: o.q,
                    kappa: o.kappa,
                }
            }
        }
        _ => BoundValue::Rate {
            name: "rate_I".into(),
            value: bounds::rate_i(
                get("gamma")?,
                get("Lambda")?,
                get("sigma")?,
                dim("d")?,
                p.get("one_to_one").is_some_and(|v| *v != 0.0),
            ),
        },
    })
}

fn parse_points(text: &str) -> anyhow::Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            p.split(',')
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("point `{p}`")))
                .collect()
        })
        .collect()
}

fn simulate(g: &Global, spec: &ModelSpec, points: &str, horizon: f64, every: u64) -> anyhow::Result<()> {
    let model = spec.build()?;
    let pts = parse_points(points)?;
    let mut cloud = PointCloud::from_points(&pts)?;
    if cloud.dimension() != model.dimension() {
        bail!("points are {}-dimensional, model {} is {}-dimensional", cloud.dimension(), model.id(), model.dimension());
    }
    let h = g.h.unwrap_or(1e-3);
    let seed: Seed = g.seed.as_deref().unwrap_or("0").parse()?;
    let noise = NoiseSource::new(seed.value, model.field_count().max(1), h)?;
    let steps = flowlab_core::experiments::step_count(horizon, h)?;
    let sink: Box<dyn Write> = match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Box::new(BufWriter::new(File::create(dir.join("trajectory.csv"))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let mut writer = TrajectoryWriter::new(sink, cloud.dimension())?;
    writer.record(&cloud)?;
    let mut failure = None;
    evolve_with(&model, &mut cloud, 0, steps, &noise, |k, c| {
        if ((k + 1) as u64).is_multiple_of(every) || k + 1 == steps {
            if let Err(e) = writer.record(c) {
                failure = Some(e);
                return std::ops::ControlFlow::Break(());
            }
        }
        std::ops::ControlFlow::Continue(())
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    writer.into_inner().flush()?;
    Ok(())
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ExperimentConfig::from_json(&text)?)
}

/// Flags win over config values.
fn apply_overrides(cfg: &mut ExperimentConfig, g: &Global, r: &RadiiFlags) -> anyhow::Result<()> {
    if let Some(s) = &g.seed {
        cfg.seed = s.parse()?;
    }
    if let Some(h) = g.h {
        cfg.step = OneOrMany::One(h);
    }
    if let Some(n) = g.replicas {
        cfg.replicas = n;
    }
    if let Some(t) = r.horizon {
        cfg.horizon = match &cfg.horizon {
            OneOrMany::Many(ladder) if ladder.len() > 1 => {
                let scale = t / ladder[0];
                OneOrMany::Many(ladder.iter().map(|v| v * scale).collect())
            }
            _ => OneOrMany::One(t),
        };
    }
    let radii = &mut cfg.radii;
    let pairs = [
        (&mut radii.r_big, r.r_big),
        (&mut radii.s, r.s),
        (&mut radii.r_bar, r.r_bar),
        (&mut radii.r, r.r),
        (&mut radii.r0, r.r0),
        (&mut radii.gamma, r.gamma),
        (&mut radii.xi, r.xi),
        (&mut radii.u, r.u),
        (&mut radii.separation, r.separation),
    ];
    for (slot, flag) in pairs {
        if flag.is_some() {
            *slot = flag;
        }
    }
    if r.grid.is_some() {
        radii.grid = r.grid;
    }
    cfg.validate()?;
    Ok(())
}

fn chaining_rows(steps: &[u32]) -> anyhow::Result<Vec<ChainingRow>> {
    let mut rows = Vec::new();
    for &s in steps {
        rows.extend(chaining_exact_check(s, &quarter_grid(s))?);
    }
    Ok(rows)
}

fn print_chaining(rows: &[ChainingRow]) {
    println!("{:>5} {:>6} {:>12} {:>12}  holds", "steps", "u", "lhs", "rhs");
    for r in rows {
        println!("{:>5} {:>6} {:>12} {:>12}  {}", r.steps, fmt_sig(r.u), fmt_sig(r.lhs), fmt_sig(r.rhs), r.holds);
    }
}

fn print_run(run: &RunOutput) {
    for b in &run.bounds {
        let key: Vec<String> = b
            .params
            .iter()
            .filter(|(k, _)| ["R", "S", "R_bar", "T", "T_trunc", "c", "u", "xi", "separation"].contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={}", fmt_sig(*v)))
            .collect();
        println!(
            "{:<22} {:<13} h={:<9} p={:<12} se={:<12} bound={:<12}{} {}  [{}]",
            b.name,
            b.model,
            fmt_sig(b.step_size),
            fmt_sig(b.mc_estimate),
            fmt_sig(b.std_error),
            fmt_sig(b.analytic_bound),
            b.exact.map(|e| format!(" exact={}", fmt_sig(e))).unwrap_or_default(),
            if b.pass { "pass" } else { "FAIL" },
            key.join(" ")
        );
    }
    for c in &run.checks {
        println!(
            "{:<22} value={} threshold={} {}",
            c.name,
            fmt_sig(c.value),
            fmt_sig(c.threshold),
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(a) = &run.attraction {
        println!("attraction {} beta={} beta0={} gamma={} r={}", a.model, a.beta, fmt_sig(a.beta0), a.gamma, a.r);
        for (k, t) in a.ladder.iter().enumerate() {
            println!(
                "  t={:<6} inclusion={:<8} absorbing={:<8} hausdorff_median={}",
                fmt_sig(*t),
                fmt_sig(a.inclusion_frequency[k]),
                fmt_sig(a.absorbing_frequency[k]),
                fmt_sig(a.hausdorff_median[k])
            );
        }
        println!(
            "  fraction of replicas with decreasing hausdorff distance {}  {}",
            fmt_sig(a.hausdorff_decreasing),
            if a.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(e) = &run.expansion {
        println!("expansion {} beta={} beta0={} gamma={} r={}", e.model, e.beta, fmt_sig(e.beta0), e.gamma, e.r);
        for (k, t) in e.ladder.iter().enumerate() {
            println!(
                "  t={:<6} containment={:<8} inner_radius_median={}",
                fmt_sig(*t),
                fmt_sig(e.containment_frequency[k]),
                fmt_sig(e.inner_radius_median[k])
            );
        }
        println!(
            "  median slope {} in [{}, {}]  {}",
            fmt_sig(e.median_slope),
            fmt_sig(e.slope_window.0),
            fmt_sig(e.slope_window.1),
            if e.pass { "pass" } else { "FAIL" }
        );
    }
}

fn summary_rows(run: &RunOutput) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = run.bounds.iter().map(|b| b.summary_row()).collect();
    let frequency_row = |name: &str, model: &str, seed: &str, n: u64, h: f64, f: f64, target: f64, pass: bool| SummaryRow {
        experiment: name.to_string(),
        model: model.to_string(),
        seed: seed.to_string(),
        n,
        h,
        estimate: f,
        se: binomial_se(f, n),
        bound: target,
        pass,
    };
    if let Some(a) = &run.attraction {
        let f = a.inclusion_frequency.iter().copied().fold(1.0, f64::min);
        rows.push(frequency_row("attraction-min-inclusion", &a.model, &a.seed, a.replicas, a.step_size, f, 0.95, f >= 0.95));
    }
    if let Some(e) = &run.expansion {
        let f = e.containment_frequency.iter().copied().fold(1.0, f64::min);
        rows.push(frequency_row("expansion-min-containment", &e.model, &e.seed, e.replicas, e.step_size, f, 0.95, f >= 0.95));
    }
    rows
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    manifest: &'static str,
    pass: bool,
    runs: &'a [RunOutput],
    #[serde(skip_serializing_if = "Option::is_none")]
    chaining: Option<&'a [ChainingRow]>,
}

fn finish(
    g: &Global,
    command: &str,
    runs: &[RunOutput],
    chaining: Option<&[ChainingRow]>,
    started: String,
) -> anyhow::Result<Outcome> {
    let pass = runs.iter().all(|r| r.pass()) && chaining.is_none_or(|c| c.iter().all(|r| r.holds));
    if let Some(dir) = &g.out {
        let report = Report {
            tool: "flowlab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            manifest: MANIFEST,
            pass,
            runs,
            chaining,
        };
        let rows: Vec<SummaryRow> = runs.iter().flat_map(summary_rows).collect();
        let configs: Vec<&ExperimentConfig> = runs.iter().map(|r| &r.config).collect();
        let manifest = Manifest {
            tool: "flowlab",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seeds: runs.iter().map(|r| r.config.seed.text.clone()).collect(),
            configs: &configs,
            started,
            finished: chrono::Utc::now().to_rfc3339(),
            results: Results {
                report: REPORT,
                summary: SUMMARY,
            },
        };
        write_outputs(dir, &report, &rows, &manifest)?;
    }
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn verify(g: &Global, suite: Suite, radii: &RadiiFlags) -> anyhow::Result<Outcome> {
    let started = chrono::Utc::now().to_rfc3339();
    let command = format!("verify {}", suite.name());
    let mut configs = match &g.config {
        Some(path) => vec![load_config(path)?],
        None => shipped::suite(suite.name())?,
    };
    let chaining = if matches!(suite, Suite::Chaining | Suite::All) {
        let rows = chaining_rows(&[4, 8])?;
        print_chaining(&rows);
        Some(rows)
    } else {
        None
    };
    let mut runs = Vec::with_capacity(configs.len());
    for cfg in &mut configs {
        apply_overrides(cfg, g, radii)?;
        let out = run(cfg)?;
        print_run(&out);
        runs.push(out);
    }
    finish(g, &command, &runs, chaining.as_deref(), started)
}

fn experiment(g: &Global, radii: &RadiiFlags, shipped: &str, kind: ExperimentKind) -> anyhow::Result<Outcome> {
    let started = chrono::Utc::now().to_rfc3339();
    let mut cfg = match &g.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::from_json(shipped)?,
    };
    if cfg.experiment != kind {
        bail!("config describes a {} experiment, expected {}", cfg.experiment.name(), kind.name());
    }
    apply_overrides(&mut cfg, g, radii)?;
    let out = run(&cfg)?;
    print_run(&out);
    finish(g, kind.name(), std::slice::from_ref(&out), None, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse() {
        let p = parse_params("a=1, b=2.5,c=-3").unwrap();
        assert_eq!(p["b"], 2.5);
        assert!(parse_params("a").is_err());
        assert!(parse_params("a=x").is_err());
    }

    #[test]
    fn flags_override_config_values() {
        let mut cfg = ExperimentConfig::from_json(shipped::ESCAPE).unwrap();
        let g = Global {
            seed: Some("0x10".into()),
            replicas: Some(500),
            h: Some(0.01),
            ..Default::default()
        };
        let r = RadiiFlags {
            s: Some(30.0),
            ..Default::default()
        };
        apply_overrides(&mut cfg, &g, &r).unwrap();
        assert_eq!((cfg.seed.value, cfg.replicas, cfg.radii.s), (16, 500, Some(30.0)));
        assert_eq!(cfg.radii.r_big, Some(10.0));
        assert_eq!(cfg.steps(), vec![0.01]);
        let bad = RadiiFlags {
            r_bar: Some(50.0),
            ..Default::default()
        };
        assert!(apply_overrides(&mut cfg, &g, &bad).is_err());
    }

    #[test]
    fn ladder_rescales_with_the_horizon_flag() {
        let mut cfg = ExperimentConfig::from_json(shipped::EXPANSION).unwrap();
        let r = RadiiFlags {
            horizon: Some(1.0),
            ..Default::default()
        };
        apply_overrides(&mut cfg, &Global::default(), &r).unwrap();
        assert_eq!(cfg.horizons(), vec![1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn bound_names_and_parameters_are_checked() {
        let p = parse_params("c=1,t=1").unwrap();
        assert!(matches!(evaluate_bound("running_max_tail", &p).unwrap(), BoundValue::Tail(_)));
        assert!(evaluate_bound("nope", &p).is_err());
        assert!(evaluate_bound("gaussian_tail", &parse_params("c=1").unwrap()).is_err());
        assert!(evaluate_bound("gaussian_tail", &parse_params("c=1,t=1,z=2").unwrap()).is_err());
    }
}
