use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tensorpgd::bench::{emit_convergence_plot, run_bench, BenchConfig, LabeledTrace, Method};
use tensorpgd::convex::{lambda_scale, ConvexSolver, RegularizerKind, RegularizerSpec};
use tensorpgd::datagen::{derive_seed, snr, CaseSpec, SnrLevel};
use tensorpgd::pgd::{pgd_solve, PgdConfig, Termination};
use tensorpgd::width::{estimate_width_mc, width_bound};
use tensorpgd::{ConstraintSpec, Dataset, DenseTensor, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "tensorpgd", version, about = "Low-rank tensor regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one dataset of a simulation case and write it to a directory.
    Simulate {
        #[arg(long)]
        case: String,
        #[arg(long, default_value = "high")]
        level: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the case sample size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one dataset written by `simulate`.
    Solve {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "pgd")]
        method: String,
        /// Cone for PGD.
        #[arg(long, value_enum, default_value_t = Cone::Theta3)]
        constraint: Cone,
        /// Step sizes, one run each.
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        eta: Vec<f64>,
        /// Projection ranks r′, one run each.
        #[arg(long, value_delimiter = ',', default_value = "5")]
        rank: Vec<usize>,
        /// Slice budget s′ for theta2.
        #[arg(long, default_value_t = 5)]
        sparsity: usize,
        /// λ values as multiples of the data-driven scale.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = 300)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run simulation cases and tabulate rmse.
    Bench {
        /// TOML configuration; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        levels: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        eta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        sparsity: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Allow the large d = 50 and order-4 cases.
        #[arg(long)]
        heavy: bool,
    },
    /// Monte-Carlo Gaussian width of a cone in the unit ball.
    Gwidth {
        #[arg(long, value_enum)]
        constraint: Cone,
        #[arg(long, value_delimiter = ',', default_value = "10,10,10")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        rank: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        sparsity: Vec<usize>,
        #[arg(long, default_value_t = tensorpgd::width::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Cone {
    Theta1,
    Theta2,
    Theta3,
}

impl Cone {
    fn spec(self, r: usize, s: usize) -> ConstraintSpec {
        match self {
            Cone::Theta1 => ConstraintSpec::Theta1 { r },
            Cone::Theta2 => ConstraintSpec::Theta2 { r, s },
            Cone::Theta3 => ConstraintSpec::Theta3 { r },
        }
    }
}

/// Contents of `meta.toml` in a dataset directory.
#[derive(Serialize, Deserialize)]
struct Meta {
    seed: u64,
    snr: f64,
    case: CaseSpec,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            let config = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Argument(_) | Error::Shape(_) | Error::Format(_))
            );
            ExitCode::from(if config { EXIT_CONFIG } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Simulate { case, level, seed, n, out } => simulate(&case, &level, seed, n, &out),
        Command::Solve {
            data,
            method,
            constraint,
            eta,
            rank,
            sparsity,
            lambda,
            max_iters,
            out,
        } => {
            let method: Method = method.parse()?;
            let dataset = load_dataset(&data)?;
            fs::create_dir_all(&out)?;
            let traces = match method {
                Method::Pgd => solve_pgd(&dataset, constraint, &eta, &rank, sparsity, max_iters)?,
                _ => solve_convex(&dataset, method, &lambda, max_iters)?,
            };
            let diverged = traces
                .iter()
                .any(|t| t.trace.termination == Termination::Diverged);
            for (i, t) in traces.iter().enumerate() {
                let path = out.join(format!("trace_{}.csv", i));
                t.trace.write_csv(BufWriter::new(File::create(&path)?))?;
                println!(
                    "{}: {} iterations, objective {:.6e}, rmse {}, {:?}",
                    t.label,
                    t.trace.iterations(),
                    t.trace.final_objective(),
                    t.trace
                        .final_rmse()
                        .map_or("-".to_string(), |r| format!("{:.4}", r)),
                    t.trace.termination
                );
            }
            emit_convergence_plot(&traces, &out.join("convergence.svg"))?;
            Ok(if diverged { EXIT_DIVERGED } else { 0 })
        }
        Command::Bench {
            config,
            cases,
            levels,
            methods,
            eta,
            lambda,
            replicates,
            rank,
            sparsity,
            seed,
            threads,
            out,
            heavy,
        } => {
            let mut cfg = match &config {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    BenchConfig::from_toml(&text)?
                }
                None if cases.is_empty() => {
                    return Err(Error::Argument("bench needs --config or --cases".into()).into())
                }
                None => BenchConfig::new(Vec::new()),
            };
            if !cases.is_empty() {
                cfg.cases = cases;
            }
            if !levels.is_empty() {
                cfg.levels = levels.iter().map(|l| l.parse()).collect::<Result<_, _>>()?;
            }
            if !methods.is_empty() {
                cfg.methods = methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
            }
            if !eta.is_empty() {
                cfg.eta_grid = eta;
            }
            if !lambda.is_empty() {
                cfg.lambda_grid = lambda;
            }
            cfg.replicates = replicates.unwrap_or(cfg.replicates);
            cfg.rank = rank.or(cfg.rank);
            cfg.sparsity = sparsity.or(cfg.sparsity);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.threads = threads.unwrap_or(cfg.threads);
            cfg.output_dir = out.unwrap_or(cfg.output_dir);
            cfg.heavy |= heavy;

            let outcome = run_bench(&cfg)?;
            print!(
                "{}",
                fs::read_to_string(cfg.output_dir.join("table.txt"))?
            );
            if outcome.diverged > 0 {
                eprintln!("{} run(s) diverged", outcome.diverged);
                return Ok(EXIT_DIVERGED);
            }
            Ok(0)
        }
        Command::Gwidth {
            constraint,
            dims,
            rank,
            sparsity,
            samples,
            seed,
            out,
        } => {
            let mut rows = Vec::new();
            for &r in &rank {
                let budgets: &[usize] = match constraint {
                    Cone::Theta2 => &sparsity,
                    _ => &[0],
                };
                for &s in budgets {
                    let spec = constraint.spec(r, s);
                    let est = estimate_width_mc(&spec, &dims, samples, seed)?;
                    rows.push((spec_label(&spec), est, width_bound(&spec, &dims)));
                }
            }
            let sink: Box<dyn std::io::Write> = match &out {
                Some(path) => Box::new(File::create(path)?),
                None => Box::new(std::io::stdout()),
            };
            let mut w = csv_writer(sink);
            w.write_record(["spec", "mean", "se", "bound", "kind"])?;
            for (label, est, bound) in rows {
                w.write_record([
                    label,
                    est.mean.to_string(),
                    est.std_error.to_string(),
                    bound.map(|b| b.to_string()).unwrap_or_default(),
                    format!("{:?}", est.kind),
                ])?;
            }
            w.flush()?;
            Ok(0)
        }
    }
}

fn csv_writer(w: Box<dyn std::io::Write>) -> csv::Writer<Box<dyn std::io::Write>> {
    csv::Writer::from_writer(w)
}

fn spec_label(spec: &ConstraintSpec) -> String {
    match *spec {
        ConstraintSpec::Theta1 { r } => format!("theta1(r={})", r),
        ConstraintSpec::Theta2 { r, s } => format!("theta2(r={};s={})", r, s),
        ConstraintSpec::Theta3 { r } => format!("theta3(r={})", r),
    }
}

fn simulate(id: &str, level: &str, seed: u64, n: Option<usize>, out: &Path) -> anyhow::Result<u8> {
    let level: SnrLevel = level.parse()?;
    let mut case = CaseSpec::lookup(id, level)?;
    if let Some(n) = n {
        case = case.with_n(n);
    }
    let data = case.generate(seed)?;
    fs::create_dir_all(out)?;
    let truth = data.truth().expect("simulated data carries the truth");
    truth.write_to(BufWriter::new(File::create(out.join("truth.tns"))?))?;

    // Covariates as one tensor with the sample index last.
    let mut dims = case.dims.clone();
    dims.push(data.n());
    let mut values = Vec::with_capacity(data.design().len());
    for row in data.design().row_iter() {
        values.extend(row.iter());
    }
    DenseTensor::new(dims, values)?.write_to(BufWriter::new(File::create(out.join("covariates.tns"))?))?;

    let mut w = csv::Writer::from_path(out.join("responses.csv"))?;
    w.write_record(["y"])?;
    for y in data.responses() {
        w.write_record([y.to_string()])?;
    }
    w.flush()?;

    let meta = Meta {
        seed,
        snr: snr(truth, &case.family, 10_000, derive_seed(seed, &[3])),
        case,
    };
    fs::write(out.join("meta.toml"), toml::to_string(&meta)?)?;
    println!("wrote {} samples to {} (snr {:.2})", data.n(), out.display(), meta.snr);
    Ok(0)
}

fn load_dataset(dir: &Path) -> anyhow::Result<Dataset> {
    let meta: Meta = toml::from_str(
        &fs::read_to_string(dir.join("meta.toml")).context("reading meta.toml")?,
    )
    .map_err(|e| Error::Format(format!("meta.toml: {}", e)))?;
    let truth = DenseTensor::read_from(File::open(dir.join("truth.tns"))?)?;
    let x = DenseTensor::read_from(File::open(dir.join("covariates.tns"))?)?;
    let (&n, dims) = x
        .dims()
        .split_last()
        .ok_or_else(|| Error::Format("empty covariate tensor".into()))?;
    let len: usize = dims.iter().product();
    let design = tensorpgd::tensor::Matrix::from_row_slice(n, len, x.data());
    let mut reader = csv::Reader::from_path(dir.join("responses.csv"))?;
    let y = reader
        .records()
        .map(|r| -> anyhow::Result<f64> {
            let r = r?;
            Ok(r.get(0).unwrap_or_default().trim().parse::<f64>()?)
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    Ok(Dataset::from_design(
        dims.to_vec(),
        design,
        y,
        meta.case.family,
        Some(truth),
    )?)
}

fn solve_pgd(
    data: &Dataset,
    cone: Cone,
    etas: &[f64],
    ranks: &[usize],
    sparsity: usize,
    max_iters: usize,
) -> anyhow::Result<Vec<LabeledTrace>> {
    if etas.is_empty() || ranks.is_empty() {
        bail!(Error::Argument("need at least one eta and one rank".into()));
    }
    let mut traces = Vec::new();
    for &r in ranks {
        for &eta in etas {
            let spec = cone.spec(r, sparsity);
            let label = format!("eta={} {}", eta, spec_label(&spec));
            let cfg = PgdConfig::new(spec, eta).max_iters(max_iters);
            let trace = match pgd_solve(data, &cfg) {
                Ok(t) => t,
                Err(Error::Diverged { trace, .. }) => *trace,
                Err(e) => return Err(e.into()),
            };
            let label = if trace.termination == Termination::Diverged {
                format!("{} (diverged)", label)
            } else {
                label
            };
            traces.push(LabeledTrace { label, trace });
        }
    }
    Ok(traces)
}

fn solve_convex(
    data: &Dataset,
    method: Method,
    lambdas: &[f64],
    max_iters: usize,
) -> anyhow::Result<Vec<LabeledTrace>> {
    let kind = if method == Method::ConvexR1 { RegularizerKind::R1 } else { RegularizerKind::R2 };
    let scale = lambda_scale(data);
    let mut solver = ConvexSolver::new(data);
    let mut traces = Vec::new();
    for &m in lambdas {
        let reg = RegularizerSpec::new(kind, m * scale).max_iters(max_iters);
        let trace = solver.solve(&reg)?;
        traces.push(LabeledTrace {
            label: format!("{} lambda={}", kind.name(), m),
            trace,
        });
    }
    Ok(traces)
}
