use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use mild_descent::BenchmarkRun;
use serde_json::json;

/// Scheme identifiers recorded in every manifest so a run's numbers can be
/// tied to the discretization choices that produced them.
pub const INTEGRATOR: &str = "exponential-euler, forcing through the full-step semigroup";
pub const QUADRATURE: &str = "composite midpoint over merged control cells";
pub const PROBE: &str = "one-sided forward difference";

fn fmt(x: f64) -> String {
    format!("{:.16e}", x) // 17 significant digits
}

/// Writes the CSV artifacts plus a manifest; returns the emitted file names
/// (manifest included). Every file this function writes is listed in the
/// manifest exactly once.
pub fn emit_artifacts(
    run: &BenchmarkRun,
    seed: u64,
    command: &str,
    out_dir: &Path,
) -> std::io::Result<Vec<String>> {
    fs::create_dir_all(out_dir)?;
    let mut files: Vec<String> = Vec::new();
    let mut write = |name: String, content: String| -> std::io::Result<()> {
        let mut f = fs::File::create(out_dir.join(&name))?;
        f.write_all(content.as_bytes())?;
        files.push(name);
        Ok(())
    };

    let mut hist = String::from("iteration,cost\n");
    for (i, c) in run.report.cost_history.iter().enumerate() {
        hist.push_str(&format!("{i},{}\n", fmt(*c)));
    }
    write("cost_history.csv".into(), hist)?;

    let m = run.report.controls.first().map_or(0, |u| u.dim());
    let u_header: String = (1..=m).map(|j| format!(",u{j}")).collect();
    for (k, u) in run.report.controls.iter().enumerate() {
        let mut csv = format!("t_start,t_end{u_header}\n");
        for (piece, w) in u.breakpoints().windows(2).enumerate() {
            csv.push_str(&fmt(run.grid.node_time(w[0])));
            csv.push(',');
            csv.push_str(&fmt(run.grid.node_time(w[1])));
            for v in &u.values()[piece] {
                csv.push(',');
                csv.push_str(&fmt(*v));
            }
            csv.push('\n');
        }
        write(format!("control_iter{k}.csv"), csv)?;
    }

    for (k, state) in run.report.terminal_states.iter().enumerate() {
        let mut csv = String::from("theta,rho\n");
        for (th, v) in run.thetas.iter().zip(state.as_slice()) {
            csv.push_str(&format!("{},{}\n", fmt(*th), fmt(*v)));
        }
        write(format!("terminal_profile_iter{k}.csv"), csv)?;
    }

    let mut csv = String::from("theta,rho\n");
    for (th, v) in run.thetas.iter().zip(run.target.as_slice()) {
        csv.push_str(&format!("{},{}\n", fmt(*th), fmt(*v)));
    }
    write("target_profile.csv".into(), csv)?;

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut listed = files.clone();
    listed.push("manifest.json".into());
    let cfg = &run.config;
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "created_unix": created,
        "config": {
            "nu": cfg.nu,
            "beta": cfg.beta,
            "T": cfg.horizon,
            "alpha": cfg.alpha,
            "radius": cfg.radius,
            "epsilon": cfg.epsilon,
            "n_space": cfg.n_space,
            "dt": cfg.dt,
            "dt_actual": run.grid.dt(),
            "n_intervals": cfg.n_intervals,
            "outer_iters": cfg.outer_iters,
            "seed": seed,
        },
        "scheme": {
            "integrator": INTEGRATOR,
            "quadrature": QUADRATURE,
            "probe": PROBE,
        },
        "cost_history": run.report.cost_history,
        "increment_residuals": run.report.increment_residuals,
        "guard_rejections": run.report.guard_rejections,
        "artifacts": listed,
    });
    let mut f = fs::File::create(out_dir.join("manifest.json"))?;
    f.write_all(serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    f.write_all(b"\n")?;
    files.push("manifest.json".into());
    Ok(files)
}
