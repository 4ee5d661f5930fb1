use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::linear::{train_erm, LinearHypothesis, TrainerConfig};
use super::Predictor;
use crate::aggregation::VoteCount;
use crate::error::{param_err, Result};

/// Teachers trained on disjoint parts of the private data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<H> {
    members: Vec<H>,
}

impl<H> Ensemble<H> {
    pub fn new(members: Vec<H>) -> Result<Self> {
        if members.is_empty() {
            return param_err("an ensemble needs at least one member");
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[H] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn vote_count<X: ?Sized>(&self, x: &X) -> VoteCount
    where
        H: Predictor<X>,
    {
        let ones = self
            .members
            .iter()
            .filter(|h| h.predict(x) == 1)
            .count();
        VoteCount::new(ones, self.members.len()).expect("ensemble is nonempty")
    }

    pub fn majority_label<X: ?Sized>(&self, x: &X) -> u8
    where
        H: Predictor<X>,
    {
        self.vote_count(x).majority()
    }
}

impl<H: Predictor<X>, X: ?Sized> Predictor<X> for Ensemble<H> {
    fn predict(&self, x: &X) -> u8 {
        self.majority_label(x)
    }
}

/// Random partition into `k` parts whose sizes differ by at most one.
pub fn split_disjoint<R: Rng + ?Sized>(data: &Dataset, k: usize, rng: &mut R) -> Result<Vec<Dataset>> {
    Ok(partition_indices(data.len(), k, rng)?
        .iter()
        .map(|part| data.subset(part))
        .collect())
}

/// Shuffled `0..n` cut into `k` balanced runs; the first `n mod k` get the extra element.
pub fn partition_indices<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return param_err("number of parts must be at least 1");
    }
    if k > n {
        return param_err(format!("cannot split {n} examples into {k} nonempty parts"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / k;
    let extra = n % k;
    let mut parts = Vec::with_capacity(k);
    let mut start = 0;
    for p in 0..k {
        let len = base + usize::from(p < extra);
        parts.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(parts)
}

/// Splits `data` into `k` parts and trains one linear teacher per part.
pub fn train_ensemble<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    config: &TrainerConfig,
    rng: &mut R,
) -> Result<Ensemble<LinearHypothesis>> {
    let parts = split_disjoint(data, k, rng)?;
    let members = parts
        .par_iter()
        .map(|part| train_erm(part, config))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members)
}

/// Student in the voting space: `k` linear fits on disjoint splits of the
/// pseudo-labeled data, combined by majority.
pub fn train_voting_student<R: Rng + ?Sized>(
    pseudo_labeled: &Dataset,
    k: usize,
    config: &TrainerConfig,
    rng: &mut R,
) -> Result<Ensemble<LinearHypothesis>> {
    train_ensemble(pseudo_labeled, k, config, rng)
}
