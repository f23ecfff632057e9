use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use dptune_core::simulator::{run_replications, summarize, ExperimentConfig, Replication, VariantSummary};

use crate::exit::{CliResult, Failure};
use crate::output::{csv_bytes, write_atomic};
use crate::svg::{Plot, Series};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Experiment config (JSON).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub replications: u64,
    /// Root seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "dptune-out")]
    pub out: PathBuf,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(anyhow::Error::from(e).context(format!("reading {}", path.display()))))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::config(anyhow::Error::from(e).context(format!("parsing {}", path.display()))))?;
    config
        .validate()
        .map_err(|e| Failure::config(anyhow::Error::from(e).context(format!("invalid config {}", path.display()))))?;
    Ok(config)
}

fn json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| Failure::other(e.into()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn num(x: f64) -> String {
    x.to_string()
}

fn trials_csv(reps: &[Replication]) -> Result<Vec<u8>, Failure> {
    let header = [
        "replication",
        "variant",
        "trial",
        "eta",
        "clip",
        "gamma",
        "steps",
        "optimizer",
        "sigma",
        "score",
        "steps_run",
        "gradient_evals",
        "seed",
    ];
    Ok(csv_bytes(&header, |w| {
        for rep in reps {
            for r in &rep.reports {
                for (i, t) in r.trials.iter().enumerate() {
                    let p = &t.params;
                    w.write_record([
                        rep.index.to_string(),
                        r.variant.name().to_string(),
                        i.to_string(),
                        num(p.eta),
                        num(p.clip),
                        num(p.gamma),
                        p.steps.to_string(),
                        p.optimizer.name().to_string(),
                        num(t.sigma),
                        num(t.score),
                        t.steps_run.to_string(),
                        t.gradient_evals.to_string(),
                        t.seed.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })?)
}

fn finals_csv(reps: &[Replication]) -> Result<Vec<u8>, Failure> {
    let header = [
        "replication",
        "variant",
        "mu",
        "q",
        "final_epsilon",
        "final_score",
        "eta",
        "gamma",
        "steps",
        "sigma",
        "candidates_drawn",
        "tuning_set_size",
        "final_set_size",
        "actual_gradient_evals",
        "expected_gradient_evals",
    ];
    Ok(csv_bytes(&header, |w| {
        for rep in reps {
            for r in &rep.reports {
                w.write_record([
                    rep.index.to_string(),
                    r.variant.name().to_string(),
                    num(r.mu),
                    num(r.q),
                    num(r.final_epsilon),
                    num(r.final_score),
                    num(r.final_params.eta),
                    num(r.final_params.gamma),
                    r.final_params.steps.to_string(),
                    num(r.final_sigma),
                    r.candidates_drawn.to_string(),
                    r.tuning_set_size.to_string(),
                    r.final_set_size.to_string(),
                    r.actual_gradient_evals.to_string(),
                    num(r.expected_cost.gradient_evals),
                ])?;
            }
        }
        Ok(())
    })?)
}

fn summary_csv(summary: &[VariantSummary]) -> Result<Vec<u8>, Failure> {
    let header = [
        "variant",
        "mu",
        "q",
        "epsilon",
        "replications",
        "mean_score",
        "stderr_score",
        "mean_gradient_evals",
        "expected_gradient_evals",
    ];
    Ok(csv_bytes(&header, |w| {
        for s in summary {
            w.write_record([
                s.variant.name().to_string(),
                num(s.mu),
                num(s.q),
                num(s.epsilon),
                s.replications.to_string(),
                num(s.mean_score),
                s.stderr_score.map(num).unwrap_or_default(),
                num(s.mean_gradient_evals),
                num(s.expected_gradient_evals),
            ])?;
        }
        Ok(())
    })?)
}

fn score_plot(summary: &[VariantSummary]) -> String {
    let series = summary
        .iter()
        .map(|s| {
            Series::scatter(s.variant.name(), vec![(s.epsilon, s.mean_score)], vec![s.stderr_score.unwrap_or(0.0)])
        })
        .collect();
    let (mu, q) = summary.first().map_or((0.0, 0.0), |s| (s.mu, s.q));
    Plot {
        title: format!("mean test accuracy vs epsilon (mu = {mu}, q = {q})"),
        x_label: "epsilon".into(),
        y_label: "test accuracy (mean +/- s.e.)".into(),
        series,
    }
    .render()
}

pub fn run(args: &SimulateArgs) -> CliResult {
    if args.replications == 0 {
        return Err(Failure::config(anyhow::anyhow!("--replications must be at least 1")));
    }
    let config = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(config.seed);
    let reps = run_replications(&config, args.replications, seed)?;
    let summary = summarize(&reps)?;

    fs::create_dir_all(&args.out)?;
    for rep in &reps {
        write_atomic(&args.out.join(format!("replication_{:03}.json", rep.index)), &json(rep)?)?;
    }
    write_atomic(&args.out.join("trials.csv"), &trials_csv(&reps)?)?;
    write_atomic(&args.out.join("finals.csv"), &finals_csv(&reps)?)?;
    write_atomic(&args.out.join("summary.csv"), &summary_csv(&summary)?)?;
    write_atomic(&args.out.join("score_vs_epsilon.svg"), score_plot(&summary).as_bytes())?;

    for s in &summary {
        println!(
            "{:<9} epsilon={:.4} mean_score={:.4} stderr={} mean_gradient_evals={:.0}",
            s.variant.name(),
            s.epsilon,
            s.mean_score,
            s.stderr_score.map_or_else(|| "-".to_string(), |e| format!("{e:.4}")),
            s.mean_gradient_evals
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
