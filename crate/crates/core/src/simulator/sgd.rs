//! Per-sample clipped, Gaussian-noised gradient descent on a logistic model.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::stream;
use super::task::{Dataset, Sample};
use crate::extrapolation::{HyperParams, Optimizer};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// A differentiable per-sample loss.
pub trait Objective {
    /// Length of the parameter vector for `dim` features.
    fn num_params(&self, dim: usize) -> usize;
    /// Writes `∇f(sample, θ)` into `out`.
    fn gradient(&self, theta: &[f64], sample: &Sample, out: &mut [f64]);
}

/// Logistic regression with a bias as the last parameter.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

impl Logistic {
    fn logit(theta: &[f64], x: &[f64]) -> f64 {
        let d = x.len();
        x.iter().zip(&theta[..d]).map(|(a, b)| a * b).sum::<f64>() + theta[d]
    }

    /// Fraction of samples whose sign of the logit matches the label.
    pub fn accuracy(theta: &[f64], samples: &[Sample]) -> f64 {
        if samples.is_empty() || theta.iter().any(|t| !t.is_finite()) {
            return 0.0;
        }
        let correct = samples.iter().filter(|s| (Self::logit(theta, &s.x) > 0.0) == (s.y > 0.5)).count();
        correct as f64 / samples.len() as f64
    }
}

impl Objective for Logistic {
    fn num_params(&self, dim: usize) -> usize {
        dim + 1
    }

    fn gradient(&self, theta: &[f64], sample: &Sample, out: &mut [f64]) {
        let z = Self::logit(theta, &sample.x);
        let r = 1.0 / (1.0 + (-z).exp()) - sample.y;
        let d = sample.x.len();
        for (o, x) in out[..d].iter_mut().zip(&sample.x) {
            *o = r * x;
        }
        out[d] = r;
    }
}

/// Scales `g` in place onto the L2 ball of radius `clip`.
pub fn clip_in_place(g: &mut [f64], clip: f64) {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > clip {
        let s = clip / norm;
        g.iter_mut().for_each(|v| *v *= s);
    }
}

pub fn clip_gradient(g: &[f64], clip: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    clip_in_place(&mut out, clip);
    out
}

/// `(1/|B|) Σ clip(∇f(x, θ), C) + Z` with `Z ~ N(0, C²σ²/|B|² I)`, where
/// `|B|` is the expected batch size rather than the realized one.
pub fn privatized_gradient<O: Objective, R: Rng + ?Sized>(
    objective: &O,
    theta: &[f64],
    batch: &[&Sample],
    clip: f64,
    sigma: f64,
    expected_batch: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut sum = vec![0.0; theta.len()];
    let mut g = vec![0.0; theta.len()];
    for s in batch {
        objective.gradient(theta, s, &mut g);
        clip_in_place(&mut g, clip);
        sum.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let noise_sd = clip * sigma / expected_batch;
    for v in sum.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = *v / expected_batch + noise_sd * z;
    }
    sum
}

/// One DP-SGD update `θ − η((1/|B|) Σ clip(∇f, C) + Z)`.
pub fn dp_sgd_step<O: Objective, R: Rng + ?Sized>(
    objective: &O,
    theta: &[f64],
    batch: &[&Sample],
    params: &HyperParams,
    sigma: f64,
    expected_batch: f64,
    rng: &mut R,
) -> Vec<f64> {
    let g = privatized_gradient(objective, theta, batch, params.clip, sigma, expected_batch, rng);
    theta.iter().zip(&g).map(|(t, g)| t - params.eta * g).collect()
}

#[derive(Debug, Clone)]
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    fn update(&mut self, theta: &mut [f64], g: &[f64], eta: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            theta[i] -= eta * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

/// Draws a Poisson(γ) subsample of `0..n`: every index independently with
/// probability γ. The count is binomial and the subset uniform given the
/// count, which is the same law.
pub fn poisson_batch<R: Rng + ?Sized>(n: usize, gamma: f64, rng: &mut R) -> Vec<usize> {
    if n == 0 || gamma <= 0.0 {
        return Vec::new();
    }
    let count = Binomial::new(n as u64, gamma.min(1.0)).expect("valid binomial").sample(rng) as usize;
    let mut idx = index::sample(rng, n, count).into_vec();
    idx.sort_unstable();
    idx
}

/// One trained candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub params: HyperParams,
    pub sigma: f64,
    /// Test accuracy; 0 if training diverged.
    pub score: f64,
    pub seed: u64,
    pub steps_run: u64,
    pub gradient_evals: u64,
}

/// Runs `params.steps` noisy steps with Poisson batches on `train` and
/// scores the result on `test`. Returns the record and the final θ.
///
/// An empty training set leaves `init` unchanged. Non-finite parameters
/// stop training and score 0.
pub fn train_candidate(
    train: &[Sample],
    test: &[Sample],
    dim: usize,
    params: &HyperParams,
    sigma: f64,
    seed: u64,
    init: Option<&[f64]>,
) -> (TrialRecord, Vec<f64>) {
    let objective = Logistic;
    let mut rng = stream(seed, 0, 0);
    let mut theta = init.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; objective.num_params(dim)]);
    let expected_batch = params.gamma * train.len() as f64;
    let mut adam = AdamState::new(theta.len());
    let mut evals = 0u64;
    let mut steps_run = 0u64;
    if !train.is_empty() {
        for _ in 0..params.steps {
            let idx = poisson_batch(train.len(), params.gamma, &mut rng);
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
            evals += batch.len() as u64;
            let g = privatized_gradient(&objective, &theta, &batch, params.clip, sigma, expected_batch, &mut rng);
            match params.optimizer {
                Optimizer::Sgd => theta.iter_mut().zip(&g).for_each(|(t, g)| *t -= params.eta * g),
                Optimizer::Adam => adam.update(&mut theta, &g, params.eta),
            }
            steps_run += 1;
            if theta.iter().any(|t| !t.is_finite()) {
                break;
            }
        }
    }
    let score = Logistic::accuracy(&theta, test);
    let record = TrialRecord { params: *params, sigma, score, seed, steps_run, gradient_evals: evals };
    (record, theta)
}

/// Convenience wrapper training on the whole training split of `data`.
pub fn train_on(data: &Dataset, params: &HyperParams, sigma: f64, seed: u64) -> TrialRecord {
    train_candidate(&data.train, &data.test, data.dim, params, sigma, seed, None).0
}

/// Noise-free full-batch gradient descent; a non-private reference.
pub fn train_non_private(data: &Dataset, eta: f64, steps: usize) -> (f64, Vec<f64>) {
    let objective = Logistic;
    let mut theta = vec![0.0; objective.num_params(data.dim)];
    let mut g = vec![0.0; theta.len()];
    let n = data.train.len() as f64;
    for _ in 0..steps {
        let mut sum = vec![0.0; theta.len()];
        for s in &data.train {
            objective.gradient(&theta, s, &mut g);
            sum.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        theta.iter_mut().zip(&sum).for_each(|(t, s)| *t -= eta * s / n);
    }
    (Logistic::accuracy(&theta, &data.test), theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::task::{make_task, SyntheticTask};

    struct Quadratic {
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn num_params(&self, dim: usize) -> usize {
            dim
        }
        fn gradient(&self, theta: &[f64], _s: &Sample, out: &mut [f64]) {
            for i in 0..theta.len() {
                out[i] = theta[i] - self.target[i];
            }
        }
    }

    struct Flat;

    impl Objective for Flat {
        fn num_params(&self, dim: usize) -> usize {
            dim
        }
        fn gradient(&self, _t: &[f64], _s: &Sample, out: &mut [f64]) {
            out.iter_mut().for_each(|o| *o = 0.0);
        }
    }

    fn sgd(eta: f64, clip: f64) -> HyperParams {
        HyperParams { eta, clip, gamma: 0.1, steps: 10, optimizer: Optimizer::Sgd }
    }

    #[test]
    fn clip_examples() {
        let c = clip_gradient(&[3.0, 4.0], 1.0);
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip_gradient(&[0.1, 0.0], 1.0), vec![0.1, 0.0]);
        assert_eq!(clip_gradient(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn noiseless_full_batch_is_gradient_descent() {
        let obj = Quadratic { target: vec![1.0, -2.0] };
        let samples = vec![Sample { x: vec![], y: 0.0 }; 4];
        let batch: Vec<&Sample> = samples.iter().collect();
        let mut rng = stream(1, 0, 0);
        let theta = [0.5, 0.5];
        let next = dp_sgd_step(&obj, &theta, &batch, &sgd(0.1, 100.0), 0.0, 4.0, &mut rng);
        assert!((next[0] - (0.5 - 0.1 * (0.5 - 1.0))).abs() < 1e-15);
        assert!((next[1] - (0.5 - 0.1 * (0.5 + 2.0))).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let obj = Quadratic { target: vec![1.0, -2.0] };
        let samples = vec![Sample { x: vec![], y: 0.0 }; 4];
        let batch: Vec<&Sample> = samples.iter().collect();
        let mut rng = stream(1, 0, 0);
        let theta = [0.5, 0.5];
        assert_eq!(dp_sgd_step(&obj, &theta, &batch, &sgd(0.0, 1.0), 3.0, 4.0, &mut rng), theta.to_vec());
    }

    #[test]
    fn noise_variance_matches_scale() {
        // η²C²σ²/(γn)² per coordinate
        let (eta, clip, sigma, gamma, n): (f64, f64, f64, f64, f64) = (0.5, 2.0, 1.5, 0.1, 300.0);
        let expected_batch = gamma * n;
        let expected = (eta * clip * sigma / expected_batch).powi(2);
        let mut rng = stream(3, 0, 0);
        let reps = 100_000;
        let mut sq = 0.0;
        for _ in 0..reps {
            let next = dp_sgd_step(&Flat, &[0.0], &[], &sgd(eta, clip), sigma, expected_batch, &mut rng);
            sq += next[0] * next[0];
        }
        let var = sq / reps as f64;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn poisson_batches_have_the_right_rate() {
        let mut rng = stream(5, 0, 0);
        let total: usize = (0..2000).map(|_| poisson_batch(1000, 0.02, &mut rng).len()).sum();
        let mean = total as f64 / 2000.0;
        assert!((mean - 20.0).abs() < 0.5, "{mean}");
        assert!(poisson_batch(0, 0.5, &mut rng).is_empty());
        let all = poisson_batch(10, 1.0, &mut rng);
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn non_private_reference_is_accurate() {
        let data = make_task(&SyntheticTask::new(5000, 2, 3.0, 7)).unwrap();
        let (acc, _) = train_non_private(&data, 1.0, 200);
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn indistinguishable_classes_are_a_coin_flip() {
        let data = make_task(&SyntheticTask::new(5000, 2, 0.0, 7)).unwrap();
        let (acc, _) = train_non_private(&data, 1.0, 200);
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }

    #[test]
    fn candidate_training() {
        let data = make_task(&SyntheticTask::new(2000, 2, 3.0, 1)).unwrap();
        let untrained = Logistic::accuracy(&[0.0, 0.0, 0.0], &data.test);
        let p = HyperParams { eta: 0.0, clip: 1.0, gamma: 0.05, steps: 50, optimizer: Optimizer::Sgd };
        assert_eq!(train_on(&data, &p, 1.0, 3).score, untrained);
        let good = HyperParams { eta: 0.5, ..p };
        let r = train_on(&data, &good, 0.0, 3);
        assert!(r.score >= 0.9, "{}", r.score);
        assert_eq!(r, train_on(&data, &good, 0.0, 3));
        let adam = HyperParams { eta: 0.05, optimizer: Optimizer::Adam, ..p };
        assert!(train_on(&data, &adam, 1.0, 3).score >= 0.9);
    }

    #[test]
    fn divergence_scores_zero() {
        let data = make_task(&SyntheticTask::new(200, 2, 3.0, 1)).unwrap();
        let p = HyperParams { eta: f64::MAX, clip: 1.0, gamma: 0.5, steps: 50, optimizer: Optimizer::Sgd };
        let r = train_on(&data, &p, 10.0, 3);
        assert_eq!(r.score, 0.0);
        assert!(r.steps_run < 50);
    }
}
