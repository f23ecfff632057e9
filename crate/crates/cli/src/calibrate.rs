use std::fs;
use std::path::PathBuf;

use clap::{ArgGroup, Args};
use dptune_core::calibration::SigmaCalibration;
use dptune_core::{
    calibrate_sigma, calibrate_sigma_alpha_line, calibrate_steps, dp_sgd_epsilon, grid_uniform_curve, Error, GridEntry,
    GridPoint, PrivacyTarget,
};

use crate::exit::{CliResult, Failure};
use crate::output::{csv_bytes, emit, write_atomic};

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("solve").required(true).multiple(true).args(["steps", "sigma", "grid", "alpha_line"])))]
pub struct CalibrateArgs {
    #[arg(long)]
    pub target_eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Solve for σ at this many steps.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Solve for the largest step count at this σ.
    #[arg(long, conflicts_with_all = ["steps", "grid", "alpha_line"])]
    pub sigma: Option<f64>,
    /// JSON list of `{"gamma", "epochs", "n"}` points; calibrates σ for
    /// each and reports the bound over all of them.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["steps", "alpha_line"])]
    pub grid: Option<PathBuf>,
    /// Solve for σ so that `T·ε(α) ≤ C·α` on orders 2..=64 (needs --gamma, --steps).
    #[arg(long, value_name = "C", requires = "steps")]
    pub alpha_line: Option<f64>,
    /// Where to write the grid report CSV (default: stdout).
    #[arg(long, requires = "grid")]
    pub out: Option<PathBuf>,
    /// Where to write the grid's uniform RDP curve as JSON.
    #[arg(long, requires = "grid")]
    pub curve_out: Option<PathBuf>,
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(format!("this mode needs {flag}")))
}

fn target(args: &CalibrateArgs) -> Result<PrivacyTarget, Failure> {
    Ok(PrivacyTarget::new(need(args.target_eps, "--target-eps")?, need(args.delta, "--delta")?)?)
}

fn print_sigma(c: &SigmaCalibration, what: &str, limit: f64) {
    println!("sigma={}", c.sigma);
    if c.at_lower_bound {
        println!("check: {what}={} <= {limit} at the lower end of the search bracket", c.value);
    } else {
        println!(
            "check: {what}={} <= {limit}; at sigma={} {what}={} > {limit}",
            c.value, c.perturbed_sigma, c.perturbed_value
        );
    }
}

pub fn run(args: &CalibrateArgs) -> CliResult {
    if let Some(path) = &args.grid {
        return run_grid(args, path);
    }
    let gamma = need(args.gamma, "--gamma")?;
    if let Some(c) = args.alpha_line {
        let steps = need(args.steps, "--steps")?;
        let cal = calibrate_sigma_alpha_line(gamma, steps, c)?;
        print_sigma(&cal, "max T*eps(alpha)/alpha", c);
        return Ok(());
    }
    let target = target(args)?;
    if let Some(steps) = args.steps {
        let cal = calibrate_sigma(gamma, steps, target)?;
        print_sigma(&cal, "epsilon", target.epsilon);
        return Ok(());
    }
    let sigma = need(args.sigma, "--steps or --sigma")?;
    let cal = calibrate_steps(gamma, sigma, target)?;
    match cal.epsilon {
        Some(eps) => {
            println!("steps={}", cal.steps);
            println!(
                "check: epsilon={eps} <= {}; at steps={} epsilon={} > {}",
                target.epsilon,
                cal.steps + 1,
                cal.next_epsilon,
                target.epsilon
            );
            Ok(())
        }
        None => Err(Failure::infeasible(format!(
            "a single step already gives epsilon={} > {}",
            cal.next_epsilon, target.epsilon
        ))),
    }
}

fn run_grid(args: &CalibrateArgs, path: &PathBuf) -> CliResult {
    let target = target(args)?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(anyhow::Error::from(e).context(path.display().to_string())))?;
    let points: Vec<GridPoint> = serde_json::from_str(&text)
        .map_err(|e| Failure::config(anyhow::Error::from(e).context(format!("parsing {}", path.display()))))?;
    if points.is_empty() {
        return Err(Failure::from(Error::Config("grid file lists no points".into())));
    }
    let entries: Vec<GridEntry> = points.iter().map(GridPoint::entry).collect();
    let cal = grid_uniform_curve(&entries, target)?;
    let mut rows = Vec::with_capacity(entries.len());
    for (e, s) in entries.iter().zip(&cal.sigmas) {
        rows.push((e, s.sigma, dp_sgd_epsilon(s.sigma, e.gamma, e.steps, target.delta)?));
    }
    let bytes = csv_bytes(&["gamma", "steps", "sigma", "eps_check"], |w| {
        for (e, sigma, check) in &rows {
            w.write_record([e.gamma.to_string(), e.steps.to_string(), sigma.to_string(), check.to_string()])?;
        }
        Ok(())
    })?;
    emit(args.out.as_deref(), &bytes)?;
    if let Some(p) = &args.curve_out {
        let json = serde_json::to_vec_pretty(&cal.uniform).map_err(|e| Failure::other(e.into()))?;
        write_atomic(p, &json)?;
    }
    Ok(())
}
