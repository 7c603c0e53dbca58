//! `bfrac`: spectral values, Monte Carlo estimators and the bounds report.
//!
//! Exit status: 0 on success, 1 when `report` has a failed bound, 2 on an
//! invalid configuration, 3 when a computation or IO step fails.

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brownian_fracture::experiments::{
    estimate_constant, estimate_loss, full_report, Budgets, ConstantMode, ExperimentError, LossMode,
};
use brownian_fracture::geometry::{BallSpec, CylinderSpec, Domain, Point3, TracePolyline};
use brownian_fracture::potential::{
    capacity_estimate, kappa_estimate, torsion_value, NoObstacle, Obstacle, PotentialError, Tube, WosConfig,
};
use brownian_fracture::spectral::{
    bessel_j0, disc_heat_content, interval_heat_content, rigidity_cylinder, rigidity_disc_series, unit_zeros,
    DiscSpectrum, IntervalSpectrum, SeriesValue, SpectralError, DEFAULT_TERMS,
};
use brownian_fracture::stochastic::{sample_start, sample_trace_with, PathConfig, StartMode, StochasticError};
use brownian_fracture::{BoundsReport, Estimate, RngStream};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{check_count, check_positive, config_err, run_err, CliError, Settings};
use output::Format;

#[derive(Parser, Debug)]
#[command(name = "bfrac", version, about = "Torsional rigidity of cylinders fractured by Brownian traces")]
struct Cli {
    /// Random seed [default: $BFRAC_SEED, else 20240607]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat key=value file; flags take precedence over it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file [default: stdout]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Record format [default: jsonl]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Shorthand for --format csv
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Positive zeros of J0
    Zeros {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Heat content of the disc D_R, or of the cylinder C_{L,R} when --L is given
    HeatContent {
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long = "L", allow_negative_numbers = true)]
        l: Option<f64>,
        #[arg(long = "R", allow_negative_numbers = true)]
        r: Option<f64>,
    },
    /// Torsional rigidity of the disc D_R, or of the cylinder C_{L,R} when --L is given
    Rigidity {
        #[arg(long = "L", allow_negative_numbers = true)]
        l: Option<f64>,
        #[arg(long = "R", allow_negative_numbers = true)]
        r: Option<f64>,
    },
    /// Sample a Brownian trace; binary to --out (text with --text), text to stdout otherwise
    Trace {
        /// cyl:L,R | cyl:inf,R | ball:r
        #[arg(long)]
        domain: Option<String>,
        /// axis | center | uniform
        #[arg(long)]
        start: Option<String>,
        /// Time step [default: 1e-4 R^2]
        #[arg(long, allow_negative_numbers = true)]
        dt: Option<f64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        text: bool,
    },
    /// Walk-on-spheres torsion function at a point, optionally with a trace removed
    Torsion {
        #[arg(long)]
        domain: Option<String>,
        /// x1,x2,x3 with x1 along the axis
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        eps_shell: Option<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        eps_tube: Option<f64>,
    },
    /// Newtonian capacity of the tube around a trace file
    Capacity {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        eps_tube: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        eps_shell: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        launch_radius: Option<f64>,
    },
    /// Expected capacity of a Brownian trace from the centre of the ball of radius a
    Kappa {
        #[arg(long)]
        n_traces: Option<usize>,
        #[arg(long)]
        n_walkers: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        eps_tube: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        eps_shell: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        /// small | default | large
        #[arg(long)]
        budget: Option<String>,
    },
    /// Expected loss of rigidity of C_{L,R}
    Loss {
        #[arg(long = "L", allow_negative_numbers = true)]
        l: Option<f64>,
        #[arg(long = "R", allow_negative_numbers = true)]
        r: Option<f64>,
        /// uniform | axis
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// The limiting constant c or c'
    Constant {
        /// c | c-prime
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Every bound with its value; exit status 1 if any fails
    Report {
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

#[derive(Args, Debug, Default)]
struct BudgetArgs {
    /// small | default | large
    #[arg(long)]
    budget: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    dt_factor: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_tube: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps_shell: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    window: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    l_trunc: Option<f64>,
    #[arg(long)]
    n_traces: Option<usize>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    n_rest: Option<usize>,
    #[arg(long)]
    n_constant_traces: Option<usize>,
    #[arg(long)]
    n_kappa_traces: Option<usize>,
    #[arg(long)]
    n_walkers: Option<usize>,
    #[arg(long)]
    n_hitting_walkers: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    max_jumps: Option<usize>,
}

enum Outcome {
    Records(Vec<Value>),
    Report(BoundsReport),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bfrac: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Run(_) => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let mut s = Settings::load(cli.config.as_deref())?;
    s.record("subcommand", subcommand_name(&cli.command));
    let seed = s.seed(cli.seed)?;
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers = check_count("workers", s.get("workers", cli.workers, default_workers)?)?;
    let format = if cli.csv {
        if cli.format == Some(Format::Jsonl) {
            return Err(config_err("format", "--csv conflicts with --format jsonl"));
        }
        s.record("format", Format::Csv);
        Format::Csv
    } else {
        s.get("format", cli.format, Format::Jsonl)?
    };
    let out = s.untracked("out", cli.out.as_ref().map(|p| p.display().to_string())).map(PathBuf::from);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(run_err)?;
    let stream = RngStream::new(seed, 0);

    let outcome = match cli.command {
        Command::Zeros { n } => zeros(&mut s, n)?,
        Command::HeatContent { t, l, r } => heat_content(&mut s, t, l, r)?,
        Command::Rigidity { l, r } => rigidity(&mut s, l, r)?,
        Command::Trace {
            domain,
            start,
            dt,
            max_steps,
            text,
        } => return trace(&mut s, domain, start, dt, max_steps, text, out.as_deref(), &stream),
        Command::Torsion {
            domain,
            point,
            n,
            eps_shell,
            trace,
            eps_tube,
        } => torsion(&mut s, domain, point, n, eps_shell, trace, eps_tube, &stream)?,
        Command::Capacity {
            trace,
            n,
            eps_tube,
            eps_shell,
            launch_radius,
        } => capacity(&mut s, trace, n, eps_tube, eps_shell, launch_radius, &stream)?,
        Command::Kappa {
            n_traces,
            n_walkers,
            eps_tube,
            eps_shell,
            a,
            budget,
        } => {
            let args = BudgetArgs {
                budget,
                eps_tube,
                eps_shell,
                n_kappa_traces: n_traces,
                n_walkers,
                ..BudgetArgs::default()
            };
            kappa(&mut s, a, args, &stream)?
        }
        Command::Loss { l, r, mode, budget } => loss(&mut s, l, r, mode, budget, &stream)?,
        Command::Constant { mode, budget } => constant(&mut s, mode, budget, &stream)?,
        Command::Report { budget } => {
            let b = budgets(&mut s, budget)?;
            Outcome::Report(full_report(&b, &stream).map_err(experiment_err)?)
        }
    };

    for k in s.unused_keys() {
        eprintln!("bfrac: warning: config key `{k}` is not used by this subcommand");
    }
    let resolved = s.resolved();
    let mut w = output::open(out.as_deref()).map_err(run_err)?;
    match outcome {
        Outcome::Records(mut records) => {
            for r in &mut records {
                r["config"] = resolved.clone();
            }
            match format {
                Format::Jsonl => output::write_jsonl(&records, &mut w),
                Format::Csv => output::write_csv(&records, &mut w),
            }
            .map_err(run_err)?;
            Ok(ExitCode::SUCCESS)
        }
        Outcome::Report(mut report) => {
            for e in &mut report.entries {
                e.inputs["cli"] = resolved.clone();
            }
            match format {
                Format::Jsonl => report.write_jsonl(&mut w),
                Format::Csv => report.write_csv(&mut w),
            }
            .and_then(|_| w.flush())
            .map_err(run_err)?;
            let failed: Vec<&str> = report.failures().map(|e| e.name.as_str()).collect();
            eprintln!(
                "bfrac: {} entries, {} failed{}",
                report.entries.len(),
                failed.len(),
                if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) }
            );
            Ok(report_status(&report))
        }
    }
}

fn report_status(r: &BoundsReport) -> ExitCode {
    if r.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Zeros { .. } => "zeros",
        Command::HeatContent { .. } => "heat-content",
        Command::Rigidity { .. } => "rigidity",
        Command::Trace { .. } => "trace",
        Command::Torsion { .. } => "torsion",
        Command::Capacity { .. } => "capacity",
        Command::Kappa { .. } => "kappa",
        Command::Loss { .. } => "loss",
        Command::Constant { .. } => "constant",
        Command::Report { .. } => "report",
    }
}

fn spectral_err(e: SpectralError) -> CliError {
    match e {
        SpectralError::InsufficientTerms { .. } => run_err(e),
        other => CliError::Config(other.to_string()),
    }
}

fn stochastic_err(e: StochasticError) -> CliError {
    match e {
        StochasticError::StartOutside(_) | StochasticError::UnsupportedStart { .. } => config_err("start", e),
        StochasticError::InvalidConfig(_) | StochasticError::Geometry(_) => CliError::Config(e.to_string()),
        StochasticError::MaxStepsExceeded { .. } => run_err(e),
    }
}

fn potential_err(e: PotentialError) -> CliError {
    match e {
        PotentialError::InvalidConfig(_) => CliError::Config(e.to_string()),
        PotentialError::Spectral(e) => spectral_err(e),
        PotentialError::Stochastic(e) => stochastic_err(e),
        PotentialError::MaxJumps(_) => run_err(e),
    }
}

fn experiment_err(e: ExperimentError) -> CliError {
    match e {
        ExperimentError::Invalid(_) => CliError::Config(e.to_string()),
        ExperimentError::Potential(e) => potential_err(e),
        ExperimentError::Stochastic(e) => stochastic_err(e),
        ExperimentError::Spectral(e) => spectral_err(e),
    }
}

fn spectral_record(quantity: &str, inputs: Value, v: SeriesValue) -> Value {
    json!({
        "quantity": quantity,
        "inputs": inputs,
        "value": v.value,
        "n_terms": v.n_terms,
        "tail_bound": v.tail_bound,
    })
}

fn stochastic_record(quantity: &str, inputs: Value, e: &Estimate, eps_tube: Option<f64>, eps_shell: f64, seed: u64) -> Value {
    json!({
        "quantity": quantity,
        "inputs": inputs,
        "mean": e.mean,
        "std_error": e.std_error,
        "n": e.n,
        "eps_tube": eps_tube,
        "eps_shell": eps_shell,
        "seed": seed,
    })
}

fn zeros(s: &mut Settings, n: Option<usize>) -> Result<Outcome, CliError> {
    let n = check_count("n", s.get("n", n, 1)?)?;
    let records = unit_zeros(n)
        .into_iter()
        .enumerate()
        .map(|(i, z)| {
            // Size of the next Newton step, an estimate of the remaining error.
            let h = 1e-6;
            let slope = (bessel_j0(z + h) - bessel_j0(z - h)) / (2.0 * h);
            let step = (bessel_j0(z) / slope).abs() + f64::EPSILON * z;
            spectral_record(
                "bessel_j0_zero",
                json!({"k": i + 1}),
                SeriesValue {
                    value: z,
                    n_terms: 1,
                    tail_bound: step,
                },
            )
        })
        .collect();
    Ok(Outcome::Records(records))
}

fn heat_content(s: &mut Settings, t: Option<f64>, l: Option<f64>, r: Option<f64>) -> Result<Outcome, CliError> {
    let t = check_positive("t", s.require("t", t)?)?;
    let r = s.positive("R", r, 1.0)?;
    let l = s.optional("L", l)?.map(|l| check_positive("L", l)).transpose()?;
    let disc = disc_heat_content(t, &DiscSpectrum::for_time(r, t).map_err(spectral_err)?).map_err(spectral_err)?;
    let record = match l {
        None => spectral_record("heat_content_disc", json!({"t": t, "R": r}), disc),
        Some(l) => {
            let q1 = interval_heat_content(t, &IntervalSpectrum::new(l, 100_000_000).map_err(spectral_err)?)
                .map_err(spectral_err)?;
            let v = SeriesValue {
                value: q1.value * disc.value,
                n_terms: q1.n_terms + disc.n_terms,
                tail_bound: q1.tail_bound * disc.value + disc.tail_bound * q1.value + q1.tail_bound * disc.tail_bound,
            };
            spectral_record("heat_content_cylinder", json!({"t": t, "L": l, "R": r}), v)
        }
    };
    Ok(Outcome::Records(vec![record]))
}

fn rigidity(s: &mut Settings, l: Option<f64>, r: Option<f64>) -> Result<Outcome, CliError> {
    let r = s.positive("R", r, 1.0)?;
    let l = s.optional("L", l)?.map(|l| check_positive("L", l)).transpose()?;
    let record = match l {
        None => {
            let v = rigidity_disc_series(&DiscSpectrum::new(r, DEFAULT_TERMS).map_err(spectral_err)?);
            spectral_record("rigidity_disc", json!({"R": r}), v)
        }
        Some(l) => {
            let v = rigidity_cylinder(l, r).map_err(spectral_err)?;
            spectral_record("rigidity_cylinder", json!({"L": l, "R": r}), v)
        }
    };
    Ok(Outcome::Records(vec![record]))
}

fn parse_domain(spec: &str) -> Result<Domain, CliError> {
    let bad = |msg: &str| config_err("domain", format!("{msg} in `{spec}`; expected cyl:L,R, cyl:inf,R or ball:r"));
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(&format!("bad number `{x}`")));
    let (kind, rest) = spec.split_once(':').ok_or_else(|| bad("missing `:`"))?;
    match kind {
        "cyl" => {
            let (l, r) = rest.split_once(',').ok_or_else(|| bad("missing `,`"))?;
            let r = num(r)?;
            let c = if l.trim() == "inf" {
                CylinderSpec::infinite(r)
            } else {
                CylinderSpec::finite(num(l)?, r)
            };
            Ok(Domain::Cylinder(c.map_err(|e| config_err("domain", e))?))
        }
        "ball" => Ok(Domain::Ball(
            BallSpec::new(Point3::ORIGIN, num(rest)?).map_err(|e| config_err("domain", e))?,
        )),
        _ => Err(bad(&format!("unknown kind `{kind}`"))),
    }
}

fn domain_radius(d: &Domain) -> f64 {
    match d {
        Domain::Cylinder(c) => c.radius(),
        Domain::Ball(b) => b.radius(),
    }
}

fn parse_point(spec: &str) -> Result<Point3, CliError> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| config_err("point", format!("`{spec}`: {e}")))?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Point3::new(x, y, z)),
        _ => Err(config_err("point", format!("expected three finite coordinates x1,x2,x3, got `{spec}`"))),
    }
}

fn read_trace(path: &Path) -> Result<TracePolyline, CliError> {
    let bytes = std::fs::read(path).map_err(|e| config_err("trace", format!("cannot read {}: {e}", path.display())))?;
    TracePolyline::read_any(&bytes).map_err(|e| config_err("trace", format!("{}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn trace(
    s: &mut Settings,
    domain: Option<String>,
    start: Option<String>,
    dt: Option<f64>,
    max_steps: Option<usize>,
    text: bool,
    out: Option<&Path>,
    stream: &RngStream,
) -> Result<ExitCode, CliError> {
    let spec: String = s.require("domain", domain)?;
    let d = parse_domain(&spec)?;
    let start_name: String = s.get("start", start, "center".to_string())?;
    let mode = match start_name.as_str() {
        "axis" => StartMode::Axis,
        "center" => StartMode::Center,
        "uniform" => StartMode::UniformCylinder,
        other => return Err(config_err("start", format!("expected axis, center or uniform, got `{other}`"))),
    };
    let default = PathConfig::for_radius(domain_radius(&d));
    let cfg = PathConfig {
        dt: s.positive("dt", dt, default.dt)?,
        max_steps: check_count("max_steps", s.get("max_steps", max_steps, default.max_steps)?)?,
    };
    let text = s.get("text", if text { Some(true) } else { None }, false)?;
    let mut rng = stream.labelled("trace").rng();
    let x0 = sample_start(mode, &d, &mut rng).map_err(stochastic_err)?;
    let t = sample_trace_with(x0, &d, &cfg, &mut rng).map_err(stochastic_err)?;
    for k in s.unused_keys() {
        eprintln!("bfrac: warning: config key `{k}` is not used by this subcommand");
    }
    match out {
        None => {
            let mut w = output::open(None).map_err(run_err)?;
            t.write_text(&mut w).and_then(|_| w.flush()).map_err(run_err)?;
        }
        Some(p) => {
            let mut w = output::open(Some(p)).map_err(run_err)?;
            if text { t.write_text(&mut w) } else { t.write_binary(&mut w) }
                .and_then(|_| w.flush())
                .map_err(run_err)?;
            let last = *t.vertices().last().expect("a trace has at least two vertices");
            let record = json!({
                "quantity": "trace",
                "inputs": {"domain": spec, "start": [x0.x, x0.y, x0.z]},
                "n_vertices": t.vertices().len(),
                "duration": t.duration(),
                "exit_point": [last.x, last.y, last.z],
                "file": p.display().to_string(),
                "config": s.resolved(),
            });
            println!("{record}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn torsion(
    s: &mut Settings,
    domain: Option<String>,
    point: Option<String>,
    n: Option<usize>,
    eps_shell: Option<f64>,
    trace: Option<PathBuf>,
    eps_tube: Option<f64>,
    stream: &RngStream,
) -> Result<Outcome, CliError> {
    let spec: String = s.require("domain", domain)?;
    let d = parse_domain(&spec)?;
    let r = domain_radius(&d);
    let p: String = s.require("point", point)?;
    let x = parse_point(&p)?;
    if !d.contains(x) {
        return Err(config_err("point", format!("{p} is not inside {spec}")));
    }
    let n = check_count("n", s.get("n", n, 10_000)?)?;
    let eps_shell = s.positive("eps_shell", eps_shell, 1e-3 * r)?;
    let trace_path = s.optional("trace", trace.map(|p| p.display().to_string()))?;
    let loaded = trace_path.as_deref().map(|p| read_trace(Path::new(p))).transpose()?;
    let eps_tube = match (&loaded, s.optional("eps_tube", eps_tube)?) {
        (None, Some(_)) => return Err(config_err("eps_tube", "only meaningful together with --trace")),
        (None, None) => None,
        (Some(_), e) => Some(check_positive("eps_tube", e.unwrap_or(0.02 * r))?),
    };
    let cfg = WosConfig {
        eps_shell,
        eps_tube: eps_tube.unwrap_or(4.0 * eps_shell),
        launch_radius: None,
        max_jumps: 1_000_000,
    };
    let tube = loaded.as_ref().map(|t| Tube::new(t, cfg.eps_tube));
    let obstacle: &dyn Obstacle = match &tube {
        Some(t) => t,
        None => &NoObstacle,
    };
    cfg.validate(tube.is_some()).map_err(potential_err)?;
    let e = torsion_value(x, &d, obstacle, &cfg, n, &stream.labelled("torsion")).map_err(potential_err)?;
    Ok(Outcome::Records(vec![stochastic_record(
        "torsion",
        json!({"domain": spec, "point": [x.x, x.y, x.z], "trace": trace_path}),
        &e,
        eps_tube,
        eps_shell,
        stream.seed,
    )]))
}

fn capacity(
    s: &mut Settings,
    trace: Option<PathBuf>,
    n: Option<usize>,
    eps_tube: Option<f64>,
    eps_shell: Option<f64>,
    launch: Option<f64>,
    stream: &RngStream,
) -> Result<Outcome, CliError> {
    let path: String = s.require("trace", trace.map(|p| p.display().to_string()))?;
    let t = read_trace(Path::new(&path))?;
    let n = check_count("n", s.get("n", n, 10_000)?)?;
    let eps_tube = s.positive("eps_tube", eps_tube, 0.02)?;
    let eps_shell = s.positive("eps_shell", eps_shell, eps_tube / 10.0)?;
    let launch = s.optional("launch_radius", launch)?.map(|r| check_positive("launch_radius", r)).transpose()?;
    let cfg = WosConfig {
        eps_shell,
        eps_tube,
        launch_radius: launch,
        max_jumps: 1_000_000,
    };
    let e = capacity_estimate(&Tube::new(&t, eps_tube), &cfg, n, &stream.labelled("capacity")).map_err(potential_err)?;
    Ok(Outcome::Records(vec![stochastic_record(
        "capacity",
        json!({"trace": path, "n_vertices": t.vertices().len(), "launch_radius": launch}),
        &e,
        Some(eps_tube),
        eps_shell,
        stream.seed,
    )]))
}

fn budgets(s: &mut Settings, a: BudgetArgs) -> Result<Budgets, CliError> {
    let name: String = s.get("budget", a.budget, "default".to_string())?;
    let mut b = Budgets::preset(&name)
        .ok_or_else(|| config_err("budget", format!("expected small, default or large, got `{name}`")))?;
    b.dt_factor = s.get("dt_factor", a.dt_factor, b.dt_factor)?;
    b.eps_tube = s.get("eps_tube", a.eps_tube, b.eps_tube)?;
    b.eps_shell = s.get("eps_shell", a.eps_shell, b.eps_shell)?;
    b.window = s.get("window", a.window, b.window)?;
    b.l_trunc = s.get("l_trunc", a.l_trunc, b.l_trunc)?;
    b.n_traces = s.get("n_traces", a.n_traces, b.n_traces)?;
    b.n_points = s.get("n_points", a.n_points, b.n_points)?;
    b.n_rest = s.get("n_rest", a.n_rest, b.n_rest)?;
    b.n_constant_traces = s.get("n_constant_traces", a.n_constant_traces, b.n_constant_traces)?;
    b.n_kappa_traces = s.get("n_kappa_traces", a.n_kappa_traces, b.n_kappa_traces)?;
    b.n_walkers = s.get("n_walkers", a.n_walkers, b.n_walkers)?;
    b.n_hitting_walkers = s.get("n_hitting_walkers", a.n_hitting_walkers, b.n_hitting_walkers)?;
    b.max_steps = s.get("max_steps", a.max_steps, b.max_steps)?;
    b.max_jumps = s.get("max_jumps", a.max_jumps, b.max_jumps)?;
    b.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(b)
}

fn kappa(s: &mut Settings, a: Option<f64>, args: BudgetArgs, stream: &RngStream) -> Result<Outcome, CliError> {
    let a = s.positive("a", a, 1.0)?;
    let b = budgets(s, args)?;
    let cfg = b.kappa(a);
    let k = kappa_estimate(&cfg, b.n_kappa_traces, b.n_walkers, &stream.labelled("kappa")).map_err(potential_err)?;
    let mut record = stochastic_record(
        "kappa",
        json!({"a": a, "n_traces": b.n_kappa_traces, "n_walkers": b.n_walkers, "dt": cfg.path.dt}),
        &k.headline,
        Some(cfg.eps0),
        cfg.wos.eps_shell,
        stream.seed,
    );
    record["by_eps"] = k
        .by_eps
        .iter()
        .map(|(eps, e)| json!({"eps_tube": eps, "mean": e.mean, "std_error": e.std_error}))
        .collect();
    record["extrapolated"] = json!({"mean": k.extrapolated.mean, "std_error": k.extrapolated.std_error});
    Ok(Outcome::Records(vec![record]))
}

fn loss(
    s: &mut Settings,
    l: Option<f64>,
    r: Option<f64>,
    mode: Option<String>,
    args: BudgetArgs,
    stream: &RngStream,
) -> Result<Outcome, CliError> {
    let l = check_positive("L", s.require("L", l)?)?;
    let r = s.positive("R", r, 1.0)?;
    let mode_name: String = s.get("mode", mode, "uniform".to_string())?;
    let mode = match mode_name.as_str() {
        "uniform" => LossMode::Uniform,
        "axis" => LossMode::Axis,
        other => return Err(config_err("mode", format!("expected uniform or axis, got `{other}`"))),
    };
    let b = budgets(s, args)?;
    let e = estimate_loss(l, r, mode, &b, &stream.labelled("loss")).map_err(experiment_err)?;
    let mut record = stochastic_record(
        "loss",
        json!({"L": l, "R": r, "mode": mode_name}),
        &e.value,
        Some(b.eps_tube * r),
        b.eps_shell * r,
        stream.seed,
    );
    record["exact"] = json!(e.exact);
    record["fractured"] = json!(e.fractured.mean);
    Ok(Outcome::Records(vec![record]))
}

fn constant(s: &mut Settings, mode: Option<String>, args: BudgetArgs, stream: &RngStream) -> Result<Outcome, CliError> {
    let mode_name: String = s.get("mode", mode, "c".to_string())?;
    let mode = match mode_name.as_str() {
        "c" => ConstantMode::C,
        "c-prime" | "c_prime" => ConstantMode::CPrime,
        other => return Err(config_err("mode", format!("expected c or c-prime, got `{other}`"))),
    };
    let b = budgets(s, args)?;
    let e = estimate_constant(mode, &b, &stream.labelled("constant")).map_err(experiment_err)?;
    let mut record = stochastic_record(
        if mode == ConstantMode::C { "c" } else { "c_prime" },
        json!({"mode": mode_name, "l_trunc": e.l_trunc, "window": e.window}),
        &e.value,
        Some(b.eps_tube),
        b.eps_shell,
        stream.seed,
    );
    record["truncation_probability_bound"] = json!(e.truncation_probability_bound);
    record["window_bias_bound"] = json!(e.window_bias_bound);
    Ok(Outcome::Records(vec![record]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn domains_parse() {
        assert!(matches!(parse_domain("cyl:6,1").unwrap(), Domain::Cylinder(c) if c.finite_length() == Some(6.0)));
        assert!(matches!(parse_domain("cyl:inf,2").unwrap(), Domain::Cylinder(c) if c.finite_length().is_none()));
        assert!(matches!(parse_domain("ball:0.5").unwrap(), Domain::Ball(b) if b.radius() == 0.5));
        for bad in ["cyl:6", "ball:-1", "cube:1", "cyl:x,1"] {
            assert!(matches!(parse_domain(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn points_parse() {
        assert_eq!(parse_point("1, 0.5,-2").unwrap(), Point3::new(1.0, 0.5, -2.0));
        assert!(parse_point("1,2").is_err());
        assert!(parse_point("1,2,nan").is_err());
    }

    #[test]
    fn failed_bound_sets_status_one() {
        use brownian_fracture::BoundEntry;
        let mut r = BoundsReport::default();
        r.push(BoundEntry::new("ok", Some(0.0), 1.0, 0.0, Some(2.0), 0.0, json!({})));
        assert_eq!(report_status(&r), ExitCode::SUCCESS);
        r.push(BoundEntry::new("info", None, 3.0, 0.0, Some(2.0), 0.0, json!({})).informational());
        assert_eq!(report_status(&r), ExitCode::SUCCESS);
        r.push(BoundEntry::new("bad", None, 3.0, 0.0, Some(2.0), 0.5, json!({})));
        assert_eq!(report_status(&r), ExitCode::from(1));
    }
}
