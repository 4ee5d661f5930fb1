//! Linear classifiers trained by full-batch gradient descent on the
//! logistic loss, standing in for empirical risk minimization over
//! halfspaces.

use serde::{Deserialize, Serialize};

use super::data::{Dataset, Example, SparseVector};
use super::Predictor;
use crate::error::{param_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHypothesis {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearHypothesis {
    pub fn zeros(dim: usize) -> Self {
        LinearHypothesis {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    /// Same decision rule with every parameter multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        LinearHypothesis {
            weights: self.weights.iter().map(|w| w * c).collect(),
            bias: self.bias * c,
        }
    }

    /// The hypothesis predicting the opposite label everywhere except on
    /// the decision boundary itself.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }
}

impl Predictor<Example> for LinearHypothesis {
    /// 1 iff `w·x + b ≥ 0`.
    fn predict(&self, x: &Example) -> u8 {
        u8::from(self.score(&x.features) >= 0.0)
    }
}

impl Predictor<SparseVector> for LinearHypothesis {
    fn predict(&self, x: &SparseVector) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub max_iters: usize,
    /// Ridge penalty `l2/2 · |w|²` (bias unpenalized).
    pub l2: f64,
    /// Fixed step size; `None` uses `1/L` for the data's smoothness bound `L`.
    pub step: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            max_iters: 500,
            l2: 0.0,
            step: None,
        }
    }
}

/// Example with a label and a loss weight.
#[derive(Debug, Clone, Copy)]
pub struct WeightedRow<'a> {
    pub features: &'a SparseVector,
    pub label: u8,
    pub weight: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted mean logistic loss plus the ridge term.
pub fn logistic_loss(h: &LinearHypothesis, rows: &[WeightedRow<'_>], l2: f64) -> f64 {
    let total: f64 = rows.iter().map(|r| r.weight).sum();
    let data: f64 = rows
        .iter()
        .map(|r| {
            let z = h.score(r.features);
            r.weight * (softplus(z) - f64::from(r.label) * z)
        })
        .sum::<f64>()
        / total;
    data + 0.5 * l2 * h.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Upper bound on the Lipschitz constant of the loss gradient:
/// `(1/4) Σ wᵢ (|xᵢ|² + 1) / Σ wᵢ + l2`.
pub fn smoothness_bound(rows: &[WeightedRow<'_>], l2: f64) -> f64 {
    let total: f64 = rows.iter().map(|r| r.weight).sum();
    0.25 * rows
        .iter()
        .map(|r| r.weight * (r.features.norm_sq() + 1.0))
        .sum::<f64>()
        / total
        + l2
}

/// Gradient descent from `init`, returning the fit and the loss before each
/// step followed by the final loss.
pub fn fit_weighted_traced(
    rows: &[WeightedRow<'_>],
    dim: usize,
    config: &TrainerConfig,
    init: Option<&LinearHypothesis>,
) -> Result<(LinearHypothesis, Vec<f64>)> {
    if rows.is_empty() {
        return param_err("cannot train on an empty dataset");
    }
    if rows.iter().any(|r| !(r.weight > 0.0) || r.label > 1) {
        return param_err("rows need positive weights and labels in {0, 1}");
    }
    let mut h = match init {
        Some(h0) => {
            let mut h = h0.clone();
            h.weights.resize(dim.max(h0.weights.len()), 0.0);
            h
        }
        None => LinearHypothesis::zeros(dim),
    };
    let dim = h.weights.len();
    let step = config
        .step
        .unwrap_or_else(|| 1.0 / smoothness_bound(rows, config.l2));
    let total: f64 = rows.iter().map(|r| r.weight).sum();
    // Without regularization only coordinates present in some row move.
    let active: Option<Vec<usize>> = (config.l2 == 0.0).then(|| {
        let mut idx: Vec<usize> = rows
            .iter()
            .flat_map(|r| r.features.iter().map(|(i, _)| i as usize))
            .filter(|&i| i < dim)
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    });
    let mut grad = vec![0.0; dim];
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    for _ in 0..config.max_iters {
        trace.push(logistic_loss(&h, rows, config.l2));
        let mut grad_bias = 0.0;
        for r in rows {
            let residual = r.weight * (sigmoid(h.score(r.features)) - f64::from(r.label)) / total;
            for (i, v) in r.features.iter() {
                if let Some(g) = grad.get_mut(i as usize) {
                    *g += residual * v;
                }
            }
            grad_bias += residual;
        }
        match &active {
            Some(idx) => {
                for &i in idx {
                    h.weights[i] -= step * grad[i];
                    grad[i] = 0.0;
                }
            }
            None => {
                for (w, g) in h.weights.iter_mut().zip(grad.iter_mut()) {
                    *w -= step * (*g + config.l2 * *w);
                    *g = 0.0;
                }
            }
        }
        h.bias -= step * grad_bias;
    }
    trace.push(logistic_loss(&h, rows, config.l2));
    Ok((h, trace))
}

pub fn fit_weighted(
    rows: &[WeightedRow<'_>],
    dim: usize,
    config: &TrainerConfig,
    init: Option<&LinearHypothesis>,
) -> Result<LinearHypothesis> {
    fit_weighted_traced(rows, dim, config, init).map(|(h, _)| h)
}

fn labeled_rows(data: &Dataset) -> Result<Vec<WeightedRow<'_>>> {
    if data.is_empty() {
        return param_err("cannot train on an empty dataset");
    }
    data.iter()
        .map(|e| match e.label {
            Some(label) => Ok(WeightedRow {
                features: &e.features,
                label,
                weight: 1.0,
            }),
            None => param_err("training data contains an unlabeled example"),
        })
        .collect()
}

/// Logistic-loss surrogate for ERM over linear classifiers.
pub fn train_erm(data: &Dataset, config: &TrainerConfig) -> Result<LinearHypothesis> {
    let rows = labeled_rows(data)?;
    fit_weighted(&rows, data.dim(), config, None)
}

/// [`train_erm`] plus the per-iteration loss trace.
pub fn train_erm_traced(
    data: &Dataset,
    config: &TrainerConfig,
) -> Result<(LinearHypothesis, Vec<f64>)> {
    let rows = labeled_rows(data)?;
    fit_weighted_traced(&rows, data.dim(), config, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::empirical_error;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let examples = (0..n)
            .map(|i| {
                let y = (i % 2) as u8;
                let c = if y == 1 { 2.0 } else { -2.0 };
                let x = [c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)];
                Example::labeled(SparseVector::from_dense(&x), y)
            })
            .collect();
        Dataset::new(examples)
    }

    #[test]
    fn separable_blobs_are_fit_exactly() {
        let data = blobs(200, 1);
        let h = train_erm(&data, &TrainerConfig::default()).unwrap();
        assert_eq!(empirical_error(&h, &data).unwrap(), 0.0);
    }

    #[test]
    fn repeated_positive_point() {
        let x = SparseVector::from_dense(&[0.3, -1.0]);
        let data = Dataset::new(vec![Example::labeled(x.clone(), 1); 5]);
        let h = train_erm(&data, &TrainerConfig::default()).unwrap();
        assert_eq!(Predictor::<SparseVector>::predict(&h, &x), 1);
    }

    #[test]
    fn loss_never_increases() {
        let mut data = blobs(100, 2);
        // Overlap makes the problem non-separable.
        data = data.concat(blobs(100, 3).relabeled(&[1; 100]).unwrap());
        for l2 in [0.0, 0.1] {
            let config = TrainerConfig { l2, ..Default::default() };
            let (_, trace) = train_erm_traced(&data, &config).unwrap();
            assert_eq!(trace.len(), config.max_iters + 1);
            for w in trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "loss rose from {} to {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn rejects_bad_training_sets() {
        let cfg = TrainerConfig::default();
        assert!(train_erm(&Dataset::default(), &cfg).is_err());
        let unlabeled = Dataset::new(vec![Example::unlabeled(SparseVector::from_dense(&[1.0]))]);
        assert!(train_erm(&unlabeled, &cfg).is_err());
    }

    #[test]
    fn prediction_conventions() {
        let x = Example::unlabeled(SparseVector::from_dense(&[1.0, -2.0]));
        assert_eq!(LinearHypothesis::zeros(2).predict(&x), 1);
        let h = LinearHypothesis { weights: vec![0.0, 0.0], bias: -1e300 };
        assert_eq!(h.predict(&x), 0);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(50, 4);
        let a = train_erm(&data, &TrainerConfig::default()).unwrap();
        let b = train_erm(&data, &TrainerConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
