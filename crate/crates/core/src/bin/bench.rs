use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use sarc_core::bench::{parse_synth_spec, run_benchmark, Algorithm, DataSource, RunSpec};
use sarc_core::data::{LabelMapping, LibsvmOptions};
use sarc_core::problem::LossFamily;
use sarc_core::sampling::SamplingScheme;
use sarc_core::sarc::{HessianMode, RunResult, RunStatus};

#[derive(Parser)]
#[command(name = "bench", about = "Cubic-regularization benchmarks on finite-sum losses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more algorithms and write CSV traces.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated list: sarc, saarc, sacr, cr, acr, agd, sgd, lbfgs.
    #[arg(long, value_delimiter = ',', required = true)]
    algo: Vec<String>,
    /// LIBSVM file.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    data: Option<PathBuf>,
    /// Synthetic data as `n,d,seed[,skew]`.
    #[arg(long)]
    synth: Option<String>,
    /// Row scale of synthetic features.
    #[arg(long, default_value_t = 1.0)]
    row_scale: f64,
    /// Label treated as +1 in a LIBSVM file (default: automatic mapping).
    #[arg(long)]
    positive_label: Option<f64>,
    #[arg(long, default_value = "logistic")]
    loss: String,
    #[arg(long, default_value_t = 1e-5)]
    lambda: f64,
    #[arg(long, default_value = "uniform")]
    scheme: String,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa_theta: Option<f64>,
    /// SGD minibatch size.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs each algorithm with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// CSV path; `{algo}` and `{seed}` are substituted when several runs share it.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    grad_tol: f64,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Standard deviation of the Gaussian initial point.
    #[arg(long, default_value_t = 5000.0)]
    x0_std: f64,
    /// Runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn build_specs(args: &RunArgs) -> anyhow::Result<Vec<RunSpec>> {
    let algorithms = args
        .algo
        .iter()
        .map(|a| a.parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;
    let data = match (&args.data, &args.synth) {
        (Some(path), None) => DataSource::Libsvm {
            path: path.clone(),
            options: LibsvmOptions {
                labels: args.positive_label.map_or(LabelMapping::Auto, LabelMapping::Positive),
                dimension: None,
            },
        },
        (None, Some(text)) => {
            DataSource::Synthetic(parse_synth_spec(text)?.with_row_scale(args.row_scale))
        }
        _ => bail!("give exactly one of --data and --synth"),
    };
    let scheme: SamplingScheme = args.scheme.parse()?;
    let loss: LossFamily = args.loss.parse()?;
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let runs = algorithms.len() as u64 * args.trials;
    if let Some(out) = &args.out {
        if runs > 1 && !(out.contains("{algo}") || algorithms.len() == 1) {
            bail!("--out needs an {{algo}} placeholder when several algorithms run");
        }
        if args.trials > 1 && !out.contains("{seed}") {
            bail!("--out needs a {{seed}} placeholder when --trials > 1");
        }
    }

    let mut specs = Vec::new();
    for trial in 0..args.trials {
        let seed = args.seed + trial;
        for &algorithm in &algorithms {
            let mut spec = RunSpec::new(algorithm, data.clone());
            spec.loss = loss;
            spec.lambda = args.lambda;
            spec.seed = seed;
            spec.x0_std = args.x0_std;
            let s = &mut spec.solver;
            s.hessian = HessianMode::Subsampled(scheme);
            s.grad_tol = args.grad_tol;
            if let Some(v) = args.eps {
                s.eps = v;
            }
            if let Some(v) = args.delta {
                s.delta = v;
            }
            if let Some(v) = args.sigma_min {
                s.sigma_min = v;
            }
            if let Some(v) = args.sigma0 {
                s.sigma0 = v;
            }
            if let Some(v) = args.eta {
                s.eta = v;
            }
            if let Some(v) = args.kappa_theta {
                s.kappa_theta = v;
            }
            let fo = &mut spec.first_order;
            fo.grad_tol = args.grad_tol;
            if let Some(v) = args.batch_size {
                fo.batch_size = v;
            }
            if let Some(v) = args.max_iters {
                spec.solver.max_iters = v;
                spec.first_order.max_iters = v;
            }
            spec.output = args.out.as_ref().map(|o| {
                PathBuf::from(
                    o.replace("{algo}", algorithm.name())
                        .replace("{seed}", &seed.to_string()),
                )
            });
            specs.push(spec);
        }
    }
    Ok(specs)
}

fn summary(spec: &RunSpec, r: &RunResult) -> String {
    format!(
        "{} seed={} status={:?} iters={} epochs={:.4} f={:.12e} grad_norm={:.3e}",
        spec.algorithm,
        spec.seed,
        r.status,
        r.trace.last().map_or(0, |t| t.iter),
        r.ledger.epochs(),
        r.f,
        r.grad_norm,
    )
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    let specs = build_specs(&args)?;
    let jobs = args.jobs.max(1).min(specs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<anyhow::Result<RunResult>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(i) else { break };
                let out = run_benchmark(spec)
                    .with_context(|| format!("{} (seed {})", spec.algorithm, spec.seed));
                results.lock().expect("result slot")[i] = Some(out);
            });
        }
    });

    let (mut capped, mut failed) = (false, false);
    for (spec, result) in specs.iter().zip(results.into_inner().expect("results")) {
        match result.expect("every spec ran") {
            Ok(r) => {
                println!("{}", summary(spec, &r));
                match r.status {
                    s if s.reached_tolerance() => {}
                    RunStatus::MaxIters => capped = true,
                    _ => failed = true,
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                failed = true;
            }
        }
    }
    // an error outranks an iteration cap
    Ok(ExitCode::from(if failed { 1 } else if capped { 2 } else { 0 }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
