use clap::{Args, ValueEnum};
use dptune_core::{rdp_to_dp, AlphaGrid, DpConversion, MechanismSpec, RdpCurve};
use serde::Serialize;

use crate::exit::{CliResult, Failure};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mechanism {
    Gaussian,
    Subsampled,
}

#[derive(Args, Debug)]
pub struct AccountArgs {
    #[arg(long, value_enum)]
    pub mechanism: Mechanism,
    /// Noise multiplier.
    #[arg(long)]
    pub sigma: f64,
    /// Poisson sampling ratio (subsampled only).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// L2 sensitivity (gaussian only).
    #[arg(long, default_value_t = 1.0)]
    pub sensitivity: f64,
    #[arg(long, default_value_t = 1)]
    pub steps: u64,
    #[arg(long)]
    pub delta: f64,
    /// Largest integer order of the grid.
    #[arg(long, default_value_t = dptune_core::rdp::DEFAULT_MAX_ORDER)]
    pub alpha_max: u32,
    /// Print one JSON object instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct AccountReport<'a> {
    mechanism: &'a MechanismSpec,
    curve: &'a RdpCurve,
    conversion: DpConversion,
}

pub fn mechanism_spec(args: &AccountArgs) -> Result<MechanismSpec, Failure> {
    let inner = match (args.mechanism, args.gamma) {
        (Mechanism::Gaussian, None) => MechanismSpec::Gaussian { sigma: args.sigma, sensitivity: args.sensitivity },
        (Mechanism::Gaussian, Some(_)) => return Err(Failure::usage("--gamma only applies to --mechanism subsampled")),
        (Mechanism::Subsampled, Some(gamma)) => MechanismSpec::SubsampledGaussian { sigma: args.sigma, gamma },
        (Mechanism::Subsampled, None) => return Err(Failure::usage("--mechanism subsampled needs --gamma")),
    };
    Ok(MechanismSpec::Composed { inner: Box::new(inner), steps: args.steps })
}

pub fn run(args: &AccountArgs) -> CliResult {
    let spec = mechanism_spec(args)?;
    let grid = AlphaGrid::with_max(args.alpha_max)?;
    let curve = spec.curve(&grid)?;
    let conversion = rdp_to_dp(&curve, args.delta)?;
    if args.json {
        let report = AccountReport { mechanism: &spec, curve: &curve, conversion };
        let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::other(e.into()))?;
        println!("{text}");
        return Ok(());
    }
    print!("{}", curve.to_csv());
    let order = conversion.order.map_or_else(|| "none".to_string(), |a| a.to_string());
    println!("# epsilon={} delta={} order={order}", conversion.epsilon, conversion.delta);
    Ok(())
}
