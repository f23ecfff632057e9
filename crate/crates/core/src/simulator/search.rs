//! Random search with a Poisson number of candidates, on the full data or
//! on a Poisson subset followed by a final training run.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::{
    derive_seed, stream, TAG_CANDIDATE_COUNT, TAG_CANDIDATE_PICK, TAG_FINAL, TAG_REPLICATION, TAG_SUBSET, TAG_TRAIN,
};
use super::sgd::{train_candidate, Logistic, TrialRecord};
use super::task::{Dataset, Sample};
use crate::calibration::{grid_uniform_curve, steps_for_epochs, GridEntry};
use crate::error::{domain, Error, Result};
use crate::extrapolation::{extrapolate, HyperParams};
use crate::rdp::{rdp_to_dp, uniform_grid_bound, AlphaGrid, MechanismSpec, PrivacyTarget, RdpCurve};
use crate::tuning::{expected_cost, protocol_curve, CostEstimate, CostModel, Variant};

/// Draws `K ~ Poisson(μ)`.
pub fn poisson_sample<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<u64> {
    let dist = Poisson::new(mu).map_err(|e| domain(format!("invalid Poisson mean {mu}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: HyperParams,
    pub sigma: f64,
}

/// Candidates together with one RDP curve that bounds every one of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateGrid {
    pub candidates: Vec<Candidate>,
    pub uniform: RdpCurve,
}

fn distinct_entries(params: &[HyperParams]) -> Vec<GridEntry> {
    let mut entries: Vec<GridEntry> = Vec::new();
    for p in params {
        let e = GridEntry { gamma: p.gamma, steps: p.steps };
        if !entries.contains(&e) {
            entries.push(e);
        }
    }
    entries
}

impl CandidateGrid {
    /// Every candidate uses noise multiplier `sigma`; the bound is the
    /// maximum over the distinct `(γ, T)` pairs.
    pub fn with_sigma(params: Vec<HyperParams>, sigma: f64) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("candidate grid is empty".into()));
        }
        params.iter().try_for_each(HyperParams::validate)?;
        let grid = AlphaGrid::default();
        let curves = distinct_entries(&params)
            .iter()
            .map(|e| MechanismSpec::dp_sgd(sigma, e.gamma, e.steps).curve(&grid))
            .collect::<Result<Vec<_>>>()?;
        let candidates = params.into_iter().map(|params| Candidate { params, sigma }).collect();
        Ok(Self { candidates, uniform: uniform_grid_bound(&curves)? })
    }

    /// σ is calibrated per `(γ, T)` pair to meet `target`; the bound is the
    /// pointwise maximum of the calibrated curves.
    pub fn calibrated(params: Vec<HyperParams>, target: PrivacyTarget) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("candidate grid is empty".into()));
        }
        params.iter().try_for_each(HyperParams::validate)?;
        let entries = distinct_entries(&params);
        let cal = grid_uniform_curve(&entries, target)?;
        let candidates = params
            .into_iter()
            .map(|params| {
                let i = entries
                    .iter()
                    .position(|e| e.gamma == params.gamma && e.steps == params.steps)
                    .expect("entry exists");
                Candidate { params, sigma: cal.sigmas[i].sigma }
            })
            .collect();
        Ok(Self { candidates, uniform: cal.uniform })
    }

    /// Mean of `γ·T` over the candidates: expected epochs of a random pick.
    pub fn mean_epochs(&self) -> f64 {
        self.candidates.iter().map(|c| c.params.epochs()).sum::<f64>() / self.candidates.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// δ at which the final ε is reported.
    pub delta: f64,
    /// Start the final training run from the best tuning model.
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variant: Variant,
    pub mu: f64,
    pub q: f64,
    pub delta: f64,
    /// ε of the whole protocol at `delta`, from the accounting modules.
    pub final_epsilon: f64,
    pub epsilon_order: Option<f64>,
    pub final_score: f64,
    pub final_params: HyperParams,
    pub final_sigma: f64,
    /// Number of candidates drawn (`K`).
    pub candidates_drawn: u64,
    pub tuning_set_size: usize,
    pub final_set_size: usize,
    pub expected_cost: CostEstimate,
    pub actual_gradient_evals: u64,
    pub trials: Vec<TrialRecord>,
}

/// Accounted ε of `variant` at `delta` when every candidate and the final
/// model satisfy `uniform`.
pub fn protocol_epsilon(
    variant: Variant,
    uniform: &RdpCurve,
    mu: f64,
    q: f64,
    delta: f64,
) -> Result<(f64, Option<f64>)> {
    let curve = protocol_curve(variant, uniform, mu, q)?;
    let conv = rdp_to_dp(&curve, delta)?;
    Ok((conv.epsilon, conv.order))
}

struct TuningOutcome {
    trials: Vec<TrialRecord>,
    best: Candidate,
    theta: Vec<f64>,
    score: f64,
}

fn tune(tune_set: &[Sample], data: &Dataset, grid: &CandidateGrid, mu: f64, seed: u64) -> Result<TuningOutcome> {
    let k = poisson_sample(mu, &mut stream(seed, TAG_CANDIDATE_COUNT, 0))?;
    let mut pick_rng = stream(seed, TAG_CANDIDATE_PICK, 0);
    let picks: Vec<usize> = (0..k).map(|_| pick_rng.random_range(0..grid.candidates.len())).collect();
    let runs: Vec<(TrialRecord, Vec<f64>)> = picks
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let cand = &grid.candidates[c];
            let trial_seed = derive_seed(seed, TAG_TRAIN, i as u64);
            train_candidate(tune_set, &data.test, data.dim, &cand.params, cand.sigma, trial_seed, None)
        })
        .collect();

    // K = 0: untrained model with the first grid entry as its hyperparameters.
    let mut best = (grid.candidates[0], vec![0.0; data.dim + 1], f64::NEG_INFINITY);
    if runs.is_empty() {
        best.2 = Logistic::accuracy(&best.1, &data.test);
    }
    for ((record, theta), &c) in runs.iter().zip(&picks) {
        if record.score > best.2 {
            best = (grid.candidates[c], theta.clone(), record.score);
        }
    }
    Ok(TuningOutcome { trials: runs.into_iter().map(|(r, _)| r).collect(), best: best.0, theta: best.1, score: best.2 })
}

/// Runs one tuning protocol end to end.
///
/// The baseline tunes on the whole training split and returns the best
/// candidate. The variants draw a Poisson(q) tuning subset `X₁`, tune on it,
/// extrapolate the winner's hyperparameters, and train a final model on
/// `X ∖ X₁` (variant 1) or on all of `X` (variant 2) with the winner's σ.
pub fn run_tuning(
    data: &Dataset,
    variant: Variant,
    mu: f64,
    q: f64,
    grid: &CandidateGrid,
    options: RunOptions,
    seed: u64,
) -> Result<ExperimentReport> {
    if !(0.0..=1.0).contains(&q) {
        return Err(domain(format!("q must lie in [0, 1], got {q}")));
    }
    let (final_epsilon, epsilon_order) = protocol_epsilon(variant, &grid.uniform, mu, q, options.delta)?;
    let n = data.train.len();
    let expected_cost = expected_cost(&CostModel { n: n as f64, epochs: grid.mean_epochs(), mu, q }, variant)?;

    let report = |tuning: TuningOutcome, final_params, final_sigma, final_score, sizes: (usize, usize), extra: u64| {
        let actual = tuning.trials.iter().map(|t| t.gradient_evals).sum::<u64>() + extra;
        ExperimentReport {
            variant,
            mu,
            q,
            delta: options.delta,
            final_epsilon,
            epsilon_order,
            final_score,
            final_params,
            final_sigma,
            candidates_drawn: tuning.trials.len() as u64,
            tuning_set_size: sizes.0,
            final_set_size: sizes.1,
            expected_cost,
            actual_gradient_evals: actual,
            trials: tuning.trials,
        }
    };

    if variant == Variant::Baseline {
        let tuning = tune(&data.train, data, grid, mu, seed)?;
        let (p, s, score) = (tuning.best.params, tuning.best.sigma, tuning.score);
        return Ok(report(tuning, p, s, score, (n, 0), 0));
    }

    let mut subset_rng = stream(seed, TAG_SUBSET, 0);
    let (mut tune_set, mut rest) = (Vec::new(), Vec::new());
    for s in &data.train {
        if subset_rng.random_bool(q) {
            tune_set.push(s.clone());
        } else {
            rest.push(s.clone());
        }
    }
    let tuning = tune(&tune_set, data, grid, mu, seed)?;
    let final_set: &[Sample] = match variant {
        Variant::Variant1 => &rest,
        _ => &data.train,
    };
    let final_params = extrapolate(&tuning.best.params, tune_set.len(), final_set.len());
    let sigma = tuning.best.sigma;
    let init = options.warm_start.then_some(tuning.theta.as_slice());
    let (record, _) =
        train_candidate(final_set, &data.test, data.dim, &final_params, sigma, derive_seed(seed, TAG_FINAL, 0), init);
    let sizes = (tune_set.len(), final_set.len());
    Ok(report(tuning, final_params, sigma, record.score, sizes, record.gradient_evals))
}

/// Cartesian hyperparameter grid of the experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub learning_rates: Vec<f64>,
    pub gammas: Vec<f64>,
    pub epochs: Vec<f64>,
    pub clip: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: crate::extrapolation::Optimizer,
}

fn default_optimizer() -> crate::extrapolation::Optimizer {
    crate::extrapolation::Optimizer::Sgd
}

impl GridConfig {
    /// All `(η, γ, epochs)` combinations, with `T = round(epochs/γ)`.
    pub fn candidates(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &gamma in &self.gammas {
            for &epochs in &self.epochs {
                for &eta in &self.learning_rates {
                    out.push(HyperParams {
                        eta,
                        clip: self.clip,
                        gamma,
                        steps: steps_for_epochs(gamma, epochs),
                        optimizer: self.optimizer,
                    });
                }
            }
        }
        out
    }
}

/// Noise for the candidates: one fixed multiplier, or calibrated per
/// `(γ, T)` pair to a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    Sigma(f64),
    Target(PrivacyTarget),
}

/// The experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: super::task::SyntheticTask,
    pub mu: f64,
    pub q: f64,
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
    pub grid: GridConfig,
    pub noise: NoiseConfig,
    pub delta: f64,
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub seed: u64,
}

fn all_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.task.validate()?;
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return cfg(format!("mu must be > 0, got {}", self.mu));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return cfg(format!("q must lie in [0, 1], got {}", self.q));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return cfg(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.variants.is_empty() {
            return cfg("no variants requested".into());
        }
        let g = &self.grid;
        if g.learning_rates.is_empty() || g.gammas.is_empty() || g.epochs.is_empty() {
            return cfg("grid lists must be nonempty".into());
        }
        for p in g.candidates() {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        match self.noise {
            NoiseConfig::Sigma(s) if !(s > 0.0) => cfg(format!("sigma must be > 0, got {s}")),
            NoiseConfig::Target(t) => t.validate().map_err(|e| Error::Config(e.to_string())),
            _ => Ok(()),
        }
    }

    pub fn candidate_grid(&self) -> Result<CandidateGrid> {
        let params = self.grid.candidates();
        match self.noise {
            NoiseConfig::Sigma(s) => CandidateGrid::with_sigma(params, s),
            NoiseConfig::Target(t) => CandidateGrid::calibrated(params, t),
        }
    }
}

/// Runs every requested variant with the same `seed`, so the candidate
/// count and picks are shared between them.
pub fn run_experiment(
    config: &ExperimentConfig,
    grid: &CandidateGrid,
    data: &Dataset,
    seed: u64,
) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    let options = RunOptions { delta: config.delta, warm_start: config.warm_start };
    config.variants.iter().map(|&v| run_tuning(data, v, config.mu, config.q, grid, options, seed)).collect()
}

/// Reports of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: u64,
    pub seed: u64,
    pub reports: Vec<ExperimentReport>,
}

/// Runs `count` replications of the experiment on one dataset built from
/// the task description. Replication `r` uses seed `derive_seed(seed, TAG_REPLICATION, r)`;
/// replications run in parallel and come back in index order.
pub fn run_replications(config: &ExperimentConfig, count: u64, seed: u64) -> Result<Vec<Replication>> {
    if count == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    config.validate()?;
    let data = super::task::make_task(&config.task)?;
    let grid = config.candidate_grid()?;
    (0..count)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(seed, TAG_REPLICATION, index);
            let reports = run_experiment(config, &grid, &data, seed)?;
            Ok(Replication { index, seed, reports })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrapolation::Optimizer;
    use crate::simulator::task::{make_task, SyntheticTask};

    fn lr_grid(sigma: f64) -> CandidateGrid {
        let params = [0.05, 0.2, 1.0, 4.0]
            .iter()
            .map(|&eta| HyperParams { eta, clip: 1.0, gamma: 0.05, steps: 100, optimizer: Optimizer::Sgd })
            .collect();
        CandidateGrid::with_sigma(params, sigma).unwrap()
    }

    fn opts() -> RunOptions {
        RunOptions { delta: 1e-5, warm_start: false }
    }

    #[test]
    fn poisson_moments() {
        let mut rng = stream(11, 0, 0);
        let draws: Vec<u64> = (0..100_000).map(|_| poisson_sample(15.0, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<u64>() as f64 / draws.len() as f64;
        assert!((mean / 15.0 - 1.0).abs() < 0.01, "{mean}");

        let reps = 100_000;
        let zeros = (0..reps).filter(|_| poisson_sample(3.0, &mut rng).unwrap() == 0).count();
        let p0 = (-3.0f64).exp();
        let se = (p0 * (1.0 - p0) / reps as f64).sqrt();
        assert!((zeros as f64 / reps as f64 - p0).abs() < 3.0 * se);
        assert!(poisson_sample(0.0, &mut rng).is_err());
    }

    #[test]
    fn report_epsilon_comes_from_accounting() {
        let data = make_task(&SyntheticTask::new(500, 2, 3.0, 2)).unwrap();
        let grid = lr_grid(1.5);
        for v in Variant::ALL {
            let r = run_tuning(&data, v, 5.0, 0.2, &grid, opts(), 4).unwrap();
            let curve = protocol_curve(v, &grid.uniform, 5.0, 0.2).unwrap();
            assert_eq!(r.final_epsilon, rdp_to_dp(&curve, 1e-5).unwrap().epsilon);
            assert_eq!(r.candidates_drawn as usize, r.trials.len());
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let data = make_task(&SyntheticTask::new(500, 2, 3.0, 2)).unwrap();
        let grid = lr_grid(1.0);
        for v in Variant::ALL {
            let a = run_tuning(&data, v, 6.0, 0.3, &grid, opts(), 99).unwrap();
            let b = run_tuning(&data, v, 6.0, 0.3, &grid, opts(), 99).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn subset_sizes() {
        let data = make_task(&SyntheticTask::new(1000, 2, 3.0, 2)).unwrap();
        let grid = lr_grid(1.0);
        let v1 = run_tuning(&data, Variant::Variant1, 3.0, 0.25, &grid, opts(), 5).unwrap();
        assert_eq!(v1.tuning_set_size + v1.final_set_size, 800);
        let v2 = run_tuning(&data, Variant::Variant2, 3.0, 0.25, &grid, opts(), 5).unwrap();
        assert_eq!(v2.final_set_size, 800);
        assert_eq!(v1.tuning_set_size, v2.tuning_set_size);
        // q = 1: tuning on everything, the extrapolation is the identity
        let full = run_tuning(&data, Variant::Variant2, 3.0, 1.0, &grid, opts(), 5).unwrap();
        assert_eq!(full.tuning_set_size, 800);
        if full.candidates_drawn > 0 {
            assert!(grid.candidates.iter().any(|c| c.params == full.final_params));
        }
    }

    #[test]
    fn no_candidates_falls_back_to_default_model() {
        let data = make_task(&SyntheticTask::new(300, 2, 3.0, 2)).unwrap();
        let grid = lr_grid(1.0);
        // find a seed whose candidate count is zero at a tiny mean
        let seed =
            (0..1000u64).find(|&s| poisson_sample(0.05, &mut stream(s, TAG_CANDIDATE_COUNT, 0)).unwrap() == 0).unwrap();
        let r = run_tuning(&data, Variant::Baseline, 0.05, 0.1, &grid, opts(), seed).unwrap();
        assert_eq!(r.candidates_drawn, 0);
        assert_eq!(r.final_params, grid.candidates[0].params);
        assert_eq!(r.final_score, Logistic::accuracy(&[0.0, 0.0, 0.0], &data.test));
        assert_eq!(r.actual_gradient_evals, 0);
    }

    #[test]
    fn large_mu_finds_best_candidate() {
        let data = make_task(&SyntheticTask::new(1000, 2, 3.0, 2)).unwrap();
        let grid = lr_grid(0.5);
        let r = run_tuning(&data, Variant::Baseline, 200.0, 0.1, &grid, opts(), 8).unwrap();
        let best_single = grid
            .candidates
            .iter()
            .map(|c| super::super::sgd::train_on(&data, &c.params, c.sigma, 1).score)
            .fold(0.0, f64::max);
        assert!(r.final_score >= best_single - 0.02, "{} vs {best_single}", r.final_score);
    }

    #[test]
    fn calibrated_grid_meets_target_per_pair() {
        let params: Vec<HyperParams> = [0.02, 0.04]
            .iter()
            .flat_map(|&gamma| {
                [0.1, 1.0].iter().map(move |&eta| HyperParams {
                    eta,
                    clip: 1.0,
                    gamma,
                    steps: (5.0 / gamma) as u64,
                    optimizer: Optimizer::Sgd,
                })
            })
            .collect();
        let target = PrivacyTarget::new(2.0, 1e-5).unwrap();
        let grid = CandidateGrid::calibrated(params, target).unwrap();
        for c in &grid.candidates {
            let e = crate::calibration::dp_sgd_epsilon(c.sigma, c.params.gamma, c.params.steps, 1e-5).unwrap();
            assert!(e <= 2.0);
            let curve =
                MechanismSpec::dp_sgd(c.sigma, c.params.gamma, c.params.steps).curve(&AlphaGrid::default()).unwrap();
            for ((_, u), (_, e)) in grid.uniform.iter().zip(curve.iter()) {
                assert!(u >= e);
            }
        }
    }

    #[test]
    fn config_parsing_and_validation() {
        let json = r#"{
            "task": {"n": 1000, "dim": 2, "class_separation": 3.0, "seed": 1},
            "mu": 15, "q": 0.1,
            "grid": {"learning_rates": [0.1, 1.0], "gammas": [0.02], "epochs": [5], "clip": 1.0},
            "noise": {"sigma": 1.0},
            "delta": 1e-5
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.variants, Variant::ALL.to_vec());
        assert_eq!(cfg.grid.candidates().len(), 2);
        assert_eq!(cfg.grid.candidates()[0].steps, 250);

        let bad = json.replace("\"mu\": 15", "\"mu\": -1");
        let cfg: ExperimentConfig = serde_json::from_str(&bad).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let unknown = json.replace("\"delta\"", "\"typo\": 1, \"delta\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&unknown).is_err());
    }
}
