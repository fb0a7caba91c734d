use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fracrelax::fitting::{default_bounds, fit, fit_report_tail, model_value, parameter_index, parameter_names, FitProblem};
use fracrelax::gridops::{fmt17, read_xy};
use fracrelax::mlf::{eval_ml_with_regime, MlQuery};
use fracrelax::relax::{asymptotic_form, cm_verdict, evaluate_solution, solve_relaxation, RelaxationProblem};
use fracrelax::specparams::{classify, validate, DerivativeSpec};
use fracrelax::verify::{run_suite, Suite};
use fracrelax::volterra::{default_grid, picard_solve, Rhs, VolterraProblem};

mod output;

/// Nth-level fractional derivatives and fractional relaxation.
///
/// Exit status: 0 on success, 1 on invalid input or a failed verification
/// suite, 2 when a numerical procedure fails.
#[derive(Parser, Debug)]
#[command(name = "fracrelax", version)]
struct Cli {
    /// Output file. Required by solve, picard and fit.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for fit and verify.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Picard stopping tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate E_{α,β}(z) for z ≤ 0.
    Mlf {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Classify a derivative spec.
    Classify(SpecArgs),
    /// Closed-form relaxation solution sampled on (0, xmax].
    Solve {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Initial values y_1,...; one per kernel exponent of the reduced spec.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        init: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        xmax: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Log-spaced samples from xmin instead of the uniform xmax/points, ..., xmax.
        #[arg(long)]
        xmin: Option<f64>,
        /// Sidecar JSON (default: the output with extension .json).
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Picard iteration for D y = F(x, y) on a graded grid.
    Picard {
        #[command(flatten)]
        spec: SpecArgs,
        /// linear:c for F = c y, logistic:a,b for F = a y (1 - y/b).
        #[arg(long, allow_hyphen_values = true)]
        rhs: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        init: Vec<f64>,
        #[arg(long, default_value_t = 5.0)]
        xmax: f64,
        /// Grid intervals.
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        /// Convergence log (default: the output with extension .json).
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Least-squares fit of a relaxation solution to x,y data.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        n: usize,
        /// Free parameters, e.g. alpha,gamma1,lambda,y1.
        #[arg(long, value_delimiter = ',', required = true)]
        free: Vec<String>,
        /// JSON object of [lo, hi] pairs overriding the default bounds.
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Starting values name=value,... (fixed parameters keep these).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        guess: Vec<String>,
        #[arg(long)]
        downweight_origin: bool,
        /// Fitted curve CSV (default: the output with extension .csv).
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Run an identity suite; the JSON report lists every failing draw.
    Verify {
        #[arg(value_enum)]
        suite: SuiteName,
        /// Defaults to the suite's own trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteName {
    Ftfc,
    Projector,
    Kernel,
    Laplace,
    Picard,
    Cm,
}

impl From<SuiteName> for Suite {
    fn from(s: SuiteName) -> Suite {
        match s {
            SuiteName::Ftfc => Suite::Ftfc,
            SuiteName::Projector => Suite::Projector,
            SuiteName::Kernel => Suite::Kernel,
            SuiteName::Laplace => Suite::Laplace,
            SuiteName::Picard => Suite::Picard,
            SuiteName::Cm => Suite::Cm,
        }
    }
}

/// Either a JSON spec file or inline --alpha/--gamma.
#[derive(Args, Debug)]
struct SpecArgs {
    #[arg(long, conflicts_with_all = ["alpha", "gamma"])]
    spec: Option<PathBuf>,
    #[arg(long, requires = "gamma")]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "alpha")]
    gamma: Option<Vec<f64>>,
}

impl SpecArgs {
    fn load(&self) -> Result<DerivativeSpec> {
        let spec = match (&self.spec, self.alpha, &self.gamma) {
            (Some(path), _, _) => {
                let raw: DerivativeSpec = serde_json::from_str(&output::read_to_string(path)?)
                    .with_context(|| format!("parsing {}", path.display()))?;
                if raw.n != raw.gamma.len() {
                    bail!("{}: n = {} but gamma has {} entries", path.display(), raw.n, raw.gamma.len());
                }
                DerivativeSpec::new(raw.alpha, raw.gamma)?
            }
            (None, Some(a), Some(g)) => DerivativeSpec::new(a, g.clone())?,
            _ => bail!("give either --spec FILE or --alpha and --gamma"),
        };
        spec.require_valid()?;
        Ok(spec)
    }
}

/// Problems with the arguments that clap cannot see; exit status 1.
fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(msg.into())
}

fn reject(cli: &Cli, cmd: &str, seed: bool, tol: bool) -> Result<()> {
    if !seed && cli.seed.is_some() {
        return Err(usage(format!("--seed has no effect for {cmd}")));
    }
    if !tol && cli.tol.is_some() {
        return Err(usage(format!("--tol has no effect for {cmd}")));
    }
    Ok(())
}

fn required_out(cli: &Cli, cmd: &str) -> Result<PathBuf> {
    let out = cli.out.clone().ok_or_else(|| usage(format!("{cmd} needs --out")))?;
    output::check_writable(&out)?;
    Ok(out)
}

fn json_bytes(v: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn xy_csv(xs: &[f64], ys: &[f64]) -> Vec<u8> {
    let mut s = String::from("x,y\n");
    for (x, y) in xs.iter().zip(ys) {
        s.push_str(&fmt17(*x));
        s.push(',');
        s.push_str(&fmt17(*y));
        s.push('\n');
    }
    s.into_bytes()
}

/// Text to --out when given, stdout otherwise.
fn emit(cli: &Cli, bytes: Vec<u8>) -> Result<()> {
    match &cli.out {
        Some(p) => output::write_all(vec![(p.clone(), bytes)]),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

fn text_or_json(cli: &Cli, cmd: &str) -> Result<bool> {
    match cli.format {
        None => Ok(false),
        Some(Format::Json) => Ok(true),
        Some(Format::Csv) => Err(usage(format!("{cmd} prints text or json, not csv"))),
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(p) = &cli.out {
        output::check_writable(p)?;
    }
    match &cli.cmd {
        Command::Mlf { alpha, beta, z } => {
            reject(cli, "mlf", false, false)?;
            let json = text_or_json(cli, "mlf")?;
            let (v, regime) = eval_ml_with_regime(&MlQuery::new(*alpha, *beta, *z)?)?;
            let bytes = if json {
                json_bytes(&json!({ "alpha": alpha, "beta": beta, "z": z, "value": v, "regime": regime.to_string() }))?
            } else {
                format!("{} {regime}\n", fmt17(v)).into_bytes()
            };
            emit(cli, bytes)?;
        }
        Command::Classify(args) => {
            reject(cli, "classify", false, false)?;
            let json = text_or_json(cli, "classify")?;
            let spec = args.load()?;
            let c = classify(&spec)?;
            let bytes = if json {
                json_bytes(&json!({
                    "spec": spec,
                    "class": c.class.to_string(),
                    "base": c.base.to_string(),
                    "effective": c.effective,
                    "kept": c.kept,
                    "notes": c.notes,
                    "validation": validate(&spec)?,
                }))?
            } else {
                let mut s = format!("{}\n", c.base);
                for n in &c.notes {
                    s.push_str(&format!("# {n}\n"));
                }
                s.into_bytes()
            };
            emit(cli, bytes)?;
        }
        Command::Solve { spec, lambda, init, xmax, points, xmin, sidecar } => {
            reject(cli, "solve", false, false)?;
            let out = required_out(cli, "solve")?;
            let side = sidecar.clone().unwrap_or_else(|| output::sibling(&out, "json"));
            let format = cli.format.unwrap_or(Format::Csv);
            if format == Format::Csv {
                output::check_writable(&side)?;
                output::check_distinct(&out, &side)?;
            }
            let spec = spec.load()?;
            let xs = sample_points(*xmax, *points, *xmin)?;
            let p = RelaxationProblem::new(spec, *lambda, init.clone())?;
            let sol = solve_relaxation(&p)?;
            let ys = xs.iter().map(|&x| evaluate_solution(&sol, x)).collect::<fracrelax::Result<Vec<_>>>()?;
            let mut meta = json!({
                "spec": p.spec,
                "class": classify(&p.spec)?.class.to_string(),
                "lambda": p.lambda,
                "init": p.y,
                "sigma": p.sigma()?,
                "terms": sol.terms,
                "cm_verdict": cm_verdict(&p)?,
                "asymptotic": asymptotic_form(&p)?,
            });
            let files = match format {
                Format::Csv => vec![(out, xy_csv(&xs, &ys)), (side, json_bytes(&meta)?)],
                Format::Json => {
                    meta["x"] = json!(xs);
                    meta["y"] = json!(ys);
                    vec![(out, json_bytes(&meta)?)]
                }
            };
            output::write_all(files)?;
        }
        Command::Picard { spec, rhs, init, xmax, points, max_iter, sidecar } => {
            reject(cli, "picard", false, true)?;
            let out = required_out(cli, "picard")?;
            let side = sidecar.clone().unwrap_or_else(|| output::sibling(&out, "json"));
            let format = cli.format.unwrap_or(Format::Csv);
            if format == Format::Csv {
                output::check_writable(&side)?;
                output::check_distinct(&out, &side)?;
            }
            let spec = spec.load()?;
            let rhs = Rhs::parse(rhs)?;
            let grid = default_grid(&spec, *xmax, *points)?;
            let p = VolterraProblem::new(spec, rhs, init.clone(), grid, cli.tol.unwrap_or(1e-8), *max_iter)?;
            let r = picard_solve(&p)?;
            let mut log = json!({
                "spec": p.spec,
                "rhs": p.rhs.name(),
                "init": p.y,
                "tol": p.tol,
                "max_iter": p.max_iter,
                "iterations": r.iterations,
                "residual": r.residual,
                "history": r.history,
            });
            let files = match format {
                Format::Csv => {
                    let mut csv = Vec::new();
                    r.solution.write_csv(&mut csv)?;
                    vec![(out, csv), (side, json_bytes(&log)?)]
                }
                Format::Json => {
                    log["x"] = json!(r.solution.nodes());
                    log["y"] = json!(r.solution.values);
                    vec![(out, json_bytes(&log)?)]
                }
            };
            output::write_all(files)?;
        }
        Command::Fit { data, n, free, bounds, guess, downweight_origin, curve } => {
            reject(cli, "fit", true, false)?;
            let out = required_out(cli, "fit")?;
            if cli.format == Some(Format::Csv) {
                return Err(usage("fit writes a JSON result; the curve goes to --curve"));
            }
            let curve = curve.clone().unwrap_or_else(|| output::sibling(&out, "csv"));
            output::check_writable(&curve)?;
            output::check_distinct(&out, &curve)?;
            let (xs, ys) = read_xy(std::fs::File::open(data).with_context(|| format!("reading {}", data.display()))?)?;
            let p = fit_problem(*n, free, bounds.as_deref(), guess, xs.iter().copied().zip(ys).collect(), cli.seed.unwrap_or(0), *downweight_origin)?;
            let r = fit(&p)?;
            if !r.converged {
                eprintln!("warning: simplex search stopped after {} iterations without converging", r.iterations);
            }
            let names = parameter_names(p.n);
            let fitted = xs.iter().map(|&x| model_value(p.n, &r.parameters, x)).collect::<fracrelax::Result<Vec<_>>>()?;
            let report = json!({
                "names": names,
                "free": p.free,
                "bounds": p.bounds,
                "initial_guess": p.initial_guess,
                "seed": p.seed,
                "downweight_origin": p.downweight_origin,
                "result": r,
                "asymptotic": fit_report_tail(&p, &r)?,
            });
            output::write_all(vec![(out, json_bytes(&report)?), (curve, xy_csv(&xs, &fitted))])?;
        }
        Command::Verify { suite, trials } => {
            reject(cli, "verify", true, false)?;
            if cli.format == Some(Format::Csv) {
                return Err(usage("verify reports are json"));
            }
            let suite = Suite::from(*suite);
            let trials = trials.unwrap_or(suite.default_trials());
            let report = run_suite(suite, trials, cli.seed.unwrap_or(0))?;
            eprintln!("{suite}: {} trials, {} failures", report.trials, report.failures.len());
            emit(cli, json_bytes(&report)?)?;
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sample_points(xmax: f64, points: usize, xmin: Option<f64>) -> Result<Vec<f64>> {
    if !(xmax > 0.0) || !xmax.is_finite() {
        return Err(usage(format!("--xmax must be positive, got {xmax}")));
    }
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let last = (points - 1) as f64;
    Ok(match xmin {
        None => (1..=points).map(|i| xmax * i as f64 / points as f64).collect(),
        Some(lo) if lo > 0.0 && lo < xmax => {
            let r = (xmax / lo).ln();
            (0..points).map(|i| if i + 1 == points { xmax } else { lo * (r * i as f64 / last).exp() }).collect()
        }
        Some(lo) => return Err(usage(format!("--xmin must lie in (0, xmax), got {lo}"))),
    })
}

fn fit_problem(
    n: usize,
    free: &[String],
    bounds: Option<&Path>,
    guess: &[String],
    data: Vec<(f64, f64)>,
    seed: u64,
    downweight_origin: bool,
) -> Result<FitProblem> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let dim = 2 * n + 2;
    let mut mask = vec![false; dim];
    for name in free {
        mask[parameter_index(name.trim(), n)?] = true;
    }
    let mut b = default_bounds(n);
    if let Some(path) = bounds {
        let raw: std::collections::BTreeMap<String, (f64, f64)> = serde_json::from_str(&output::read_to_string(path)?)
            .with_context(|| format!("parsing {} (expected {{\"name\": [lo, hi], ...}})", path.display()))?;
        for (name, pair) in raw {
            b[parameter_index(&name, n)?] = pair;
        }
    }
    // α = 1/2 with every γ_k = 1/2 is a valid spec for all n.
    let mut g: Vec<f64> = vec![0.5; n + 1];
    g.push(1.0);
    g.extend(std::iter::repeat(1.0).take(n));
    for (i, v) in g.iter_mut().enumerate() {
        *v = v.clamp(b[i].0, b[i].1);
    }
    for item in guess {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--guess entry `{item}` is not name=value")))?;
        let v: f64 = value.trim().parse().map_err(|e| usage(format!("--guess {name}: {e}")))?;
        g[parameter_index(name.trim(), n)?] = v;
    }
    let mut p = FitProblem::new(data, n, mask, b, g, seed)?;
    p.downweight_origin = downweight_origin;
    Ok(p)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<fracrelax::Error>() {
        Some(fe) if fe.is_numeric() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
