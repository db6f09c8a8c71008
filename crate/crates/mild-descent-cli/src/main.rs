mod artifacts;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mild_descent::nalgebra::{DMatrix, DVector};
use mild_descent::{
    evaluate_cost, exact_increment, expm, increment_identity_residual, propagate, reproduce,
    terminal_state, ControlSignal, Halt, LinearOracle, OracleCost, ProblemSpec, TimeGrid,
};

use config::CliConfig;

#[derive(Parser)]
#[command(
    name = "mild-descent",
    version,
    about = "Sample-and-hold descent for controlled semilinear evolution equations"
)]
struct Cli {
    /// Flat key=value config file (missing keys fall back to defaults)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Where to write artifacts (overrides the config's output_dir)
    #[arg(long, global = true, value_name = "PATH")]
    output_dir: Option<PathBuf>,

    /// Override the number of outer iterations
    #[arg(long, global = true, value_name = "K")]
    iters: Option<usize>,

    /// Suppress notices and progress lines; errors still print
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the reaction-diffusion steering benchmark and write artifacts
    Reproduce,
    /// Run the descent on a configured problem and write artifacts
    Descend,
    /// Recompute the validation residuals and print a pass/fail table
    Verify,
    /// Print the exact cost increment from the first control to the second
    Increment {
        /// Baseline control CSV (t_start,t_end,u1,...)
        ubar: PathBuf,
        /// Comparison control CSV, same format and horizon
        u: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), String> {
    let cfg = resolve_config(cli)?;
    match &cli.cmd {
        Cmd::Reproduce | Cmd::Descend => run_benchmark(cli, &cfg),
        Cmd::Verify => run_verify(&cfg),
        Cmd::Increment { ubar, u } => run_increment(&cfg, ubar, u),
    }
}

fn resolve_config(cli: &Cli) -> Result<CliConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let (cfg, notices) = config::load_config(path)?;
            if !cli.quiet {
                for n in notices {
                    eprintln!("notice: {n}");
                }
            }
            cfg
        }
        None => CliConfig::default(),
    };
    if let Some(k) = cli.iters {
        cfg.rd.outer_iters = k;
    }
    Ok(cfg)
}

/// Invocation string for the manifest: argv with the binary path collapsed
/// to its name, so identical runs record identical commands.
fn command_line() -> String {
    let mut parts: Vec<String> = std::env::args().collect();
    if !parts.is_empty() {
        parts[0] = "mild-descent".into();
    }
    parts.join(" ")
}

fn run_benchmark(cli: &Cli, cfg: &CliConfig) -> Result<(), String> {
    let run = reproduce(&cfg.rd).map_err(|e| e.to_string())?;
    if !cli.quiet {
        for (i, c) in run.report.cost_history.iter().enumerate() {
            println!("iter {i}: cost {c:.6}");
        }
        if run.report.guard_rejections > 0 {
            println!("guard rejections: {}", run.report.guard_rejections);
        }
        match &run.report.halt {
            Halt::MaxIters => {}
            Halt::Stalled { decrease } => println!("halted: stalled (decrease {decrease:.3e})"),
            Halt::CostIncrease { attempted } => {
                println!("halted: rejected cost increase (attempted {attempted:.6})")
            }
            Halt::Failure(e) => println!("halted: {e}"),
        }
    }
    let out_dir = cli
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("artifacts"));
    let files = artifacts::emit_artifacts(&run, cfg.seed, &command_line(), &out_dir)
        .map_err(|e| format!("cannot write artifacts to {}: {e}", out_dir.display()))?;
    if !cli.quiet {
        println!("wrote {} file(s) to {}", files.len(), out_dir.display());
    }
    Ok(())
}

// ---- verify ----------------------------------------------------------

struct Check {
    name: &'static str,
    measured: f64,
    threshold: f64,
}

/// Max over fine-grid nodes of |ℓ(flow restarted from the stored state) −
/// ℓ(x_T)|. Exercises the single-time-authority restart contract.
fn backward_invariance(
    problem: &ProblemSpec,
    grid: &TimeGrid,
    u: &ControlSignal,
) -> Result<f64, String> {
    let traj = propagate(problem, grid, u, 0, &problem.x0).map_err(|e| e.to_string())?;
    let l_term = (problem.terminal_cost)(traj.terminal());
    let mut worst = 0.0f64;
    for i in 0..=grid.n_steps() {
        let restarted = terminal_state(problem, grid, u, i, traj.state_at_node(i))
            .map_err(|e| e.to_string())?;
        worst = worst.max(((problem.terminal_cost)(&restarted) - l_term).abs());
    }
    Ok(worst)
}

fn linear_probe_oracle() -> LinearOracle {
    LinearOracle {
        a_mat: DMatrix::from_row_slice(2, 2, &[0.0, 0.2, -0.2, 0.05]),
        b_mat: DMatrix::from_row_slice(2, 1, &[0.5, 0.3]),
        cost: OracleCost::Linear(DVector::from_row_slice(&[0.4, -0.3])),
        alpha: 0.2,
        radius: 10.0,
        horizon: 1.0,
        x0: DVector::from_row_slice(&[0.3, -0.1]),
    }
}

fn uniform_control(
    grid: &TimeGrid,
    rng: &mut ChaCha8Rng,
    m: usize,
    scale: f64,
) -> Result<ControlSignal, String> {
    let values: Vec<Vec<f64>> = (0..grid.n_intervals())
        .map(|_| (0..m).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    ControlSignal::uniform(grid, values).map_err(|e| e.to_string())
}

fn run_verify(cfg: &CliConfig) -> Result<(), String> {
    let mut checks: Vec<Check> = Vec::new();

    // Matrix exponential against the rotation closed form, with norm large
    // enough to force several scaling-and-squaring levels.
    let w = 20.0f64;
    let rot = expm(&DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]));
    let exact = DMatrix::from_row_slice(2, 2, &[w.cos(), -w.sin(), w.sin(), w.cos()]);
    checks.push(Check {
        name: "expm-rotation",
        measured: (rot - exact).abs().max(),
        threshold: 1e-12,
    });

    // Linear-cost oracle: probe difference quotient equals the chain rule
    // through the tangent flow (exact for linear terminal cost).
    let oracle = linear_probe_oracle();
    let problem = oracle.build().map_err(|e| e.to_string())?;
    let grid = TimeGrid::new(1.0, 10, 1e-3).map_err(|e| e.to_string())?;
    let ubar = ControlSignal::uniform(&grid, vec![vec![0.3]; 10]).map_err(|e| e.to_string())?;
    let h = mild_descent::StateField(vec![1.0, 0.0]);
    let (fd, chain) =
        mild_descent::dp_probe_vs_jvp(&problem, &grid, &ubar, 0.0, &problem.x0, &h, 1e-3)
            .map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "jvp-gap-linear",
        measured: (fd - chain).abs(),
        threshold: 1e-8,
    });

    // Backward invariance of the terminal cost along stored trajectories.
    checks.push(Check {
        name: "invariance-linear",
        measured: backward_invariance(&problem, &grid, &ubar)?,
        threshold: 1e-8,
    });
    let bench_problem = mild_descent::build_problem(&cfg.rd).map_err(|e| e.to_string())?;
    let bench_grid = cfg.rd.grid().map_err(|e| e.to_string())?;
    let bench_u = ControlSignal::zero(&bench_grid, 2);
    checks.push(Check {
        name: "invariance-benchmark",
        measured: backward_invariance(&bench_problem, &bench_grid, &bench_u)?,
        threshold: 1e-4,
    });

    // Increment identity computed through the tangent flow (no probes):
    // time-quadrature error only.
    let fine = TimeGrid::new(1.0, 100, 1e-4).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let id_oracle = LinearOracle {
        a_mat: DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.2..0.2)),
        b_mat: DMatrix::from_fn(2, 1, |_, _| rng.gen_range(-0.5..0.5)),
        cost: OracleCost::Linear(DVector::from_fn(2, |_, _| rng.gen_range(-0.3..0.3))),
        alpha: 0.2,
        radius: 10.0,
        horizon: 1.0,
        x0: DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5)),
    };
    let id_problem = id_oracle.build().map_err(|e| e.to_string())?;
    let id_ubar = uniform_control(&fine, &mut rng, 1, 0.2)?;
    let id_u = uniform_control(&fine, &mut rng, 1, 0.2)?;
    let id_res = increment_identity_residual(&id_problem, &fine, &id_ubar, &id_u)
        .map_err(|e| e.to_string())?;
    checks.push(Check {
        name: "identity-residual-linear",
        measured: id_res,
        threshold: 1e-6,
    });

    // Probe-based increment formula against direct cost differences on
    // randomly drawn linear problems.
    let inc_grid = TimeGrid::new(1.0, 20, 1e-4).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let oracle = LinearOracle {
            a_mat: DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.25..0.25)),
            b_mat: DMatrix::from_fn(2, 1, |_, _| rng.gen_range(-0.5..0.5)),
            cost: OracleCost::Linear(DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5))),
            alpha: 0.2,
            radius: 10.0,
            horizon: 1.0,
            x0: DVector::from_fn(2, |_, _| rng.gen_range(-0.5..0.5)),
        };
        let problem = oracle.build().map_err(|e| e.to_string())?;
        let ubar = uniform_control(&inc_grid, &mut rng, 1, 0.5)?;
        let u = uniform_control(&inc_grid, &mut rng, 1, 0.5)?;
        let formula =
            exact_increment(&problem, &inc_grid, &ubar, &u, 1e-3).map_err(|e| e.to_string())?;
        let direct = evaluate_cost(&problem, &inc_grid, &u).map_err(|e| e.to_string())?
            - evaluate_cost(&problem, &inc_grid, &ubar).map_err(|e| e.to_string())?;
        worst = worst.max((formula - direct).abs());
    }
    checks.push(Check {
        name: "increment-vs-direct",
        measured: worst,
        threshold: 1e-4,
    });

    println!("check,measured,threshold,status");
    let mut failures = 0usize;
    for c in &checks {
        let ok = c.measured <= c.threshold;
        if !ok {
            failures += 1;
        }
        println!(
            "{},{:.3e},{:.1e},{}",
            c.name,
            c.measured,
            c.threshold,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failures > 0 {
        Err(format!("verification failed: {failures} check(s) over threshold"))
    } else {
        Ok(())
    }
}

// ---- increment -------------------------------------------------------

/// Reads a control in the emitted CSV format: header, then one row per
/// piece with t_start,t_end followed by the channel values.
fn read_control_csv(path: &Path, grid: &TimeGrid) -> Result<ControlSignal, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read control {}: {e}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(format!("{}: empty control file", path.display()));
    };
    if !header.starts_with("t_start,t_end") {
        return Err(format!(
            "{}:1:1: expected header starting with t_start,t_end",
            path.display()
        ));
    }
    let mut breakpoints: Vec<usize> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(format!(
                "{}:{}:1: expected t_start,t_end,u1,... got {:?}",
                path.display(),
                line_no,
                line
            ));
        }
        let mut parse = |col: usize| -> Result<f64, String> {
            fields[col].trim().parse::<f64>().map_err(|e| {
                format!(
                    "{}:{}:{}: invalid number {:?} ({e})",
                    path.display(),
                    line_no,
                    col + 1,
                    fields[col]
                )
            })
        };
        let t_start = parse(0)?;
        let t_end = parse(1)?;
        let row: Vec<f64> = (2..fields.len())
            .map(&mut parse)
            .collect::<Result<_, _>>()?;
        let start_node = grid
            .node_of_time(t_start)
            .map_err(|e| format!("{}:{}: {e}", path.display(), line_no))?;
        let end_node = grid
            .node_of_time(t_end)
            .map_err(|e| format!("{}:{}: {e}", path.display(), line_no))?;
        if let Some(&prev_end) = breakpoints.last() {
            if start_node != prev_end {
                return Err(format!(
                    "{}:{}:1: pieces are not contiguous (start {} != previous end)",
                    path.display(),
                    line_no,
                    t_start
                ));
            }
        } else {
            breakpoints.push(start_node);
        }
        breakpoints.push(end_node);
        values.push(row);
    }
    ControlSignal::new(grid, breakpoints, values)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn run_increment(cfg: &CliConfig, ubar_path: &Path, u_path: &Path) -> Result<(), String> {
    let problem = mild_descent::build_problem(&cfg.rd).map_err(|e| e.to_string())?;
    let grid = cfg.rd.grid().map_err(|e| e.to_string())?;
    let ubar = read_control_csv(ubar_path, &grid)?;
    let u = read_control_csv(u_path, &grid)?;
    let inc =
        exact_increment(&problem, &grid, &ubar, &u, cfg.rd.epsilon).map_err(|e| e.to_string())?;
    println!("{:.16e}", inc);
    Ok(())
}
