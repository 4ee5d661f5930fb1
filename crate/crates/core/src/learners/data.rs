use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(pairs: Vec<(u32, f64)>) -> Result<Self> {
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if let Some(&last) = indices.last() {
                if i <= last {
                    return param_err(format!("feature index {i} does not follow {last}"));
                }
            }
            if !v.is_finite() {
                return param_err(format!("feature {i} has non-finite value {v}"));
            }
            indices.push(i);
            values.push(v);
        }
        Ok(SparseVector { indices, values })
    }

    /// Dense input; zeros are dropped.
    pub fn from_dense(xs: &[f64]) -> Self {
        let (indices, values) = xs
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        SparseVector { indices, values }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// One past the largest index, or 0 when empty.
    pub fn dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn get(&self, index: u32) -> f64 {
        self.indices
            .binary_search(&index)
            .map_or(0.0, |pos| self.values[pos])
    }

    /// Dot product with a dense vector; indices past its end contribute 0.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter()
            .filter_map(|(i, v)| dense.get(i as usize).map(|w| w * v))
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: SparseVector,
    pub label: Option<u8>,
}

impl Example {
    pub fn labeled(features: SparseVector, label: u8) -> Self {
        Example {
            features,
            label: Some(label),
        }
    }

    pub fn unlabeled(features: SparseVector) -> Self {
        Example {
            features,
            label: None,
        }
    }
}

/// A collection of examples sharing a feature space of dimension `dim`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
    dim: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Self {
        let dim = examples.iter().map(|e| e.features.dim()).max().unwrap_or(0);
        Dataset { examples, dim }
    }

    /// Like [`Dataset::new`] but with a feature dimension at least `dim`.
    pub fn with_dim(examples: Vec<Example>, dim: usize) -> Self {
        let mut data = Dataset::new(examples);
        data.dim = data.dim.max(dim);
        data
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn labels(&self) -> Vec<Option<u8>> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_some())
    }

    /// Examples at `indices`, keeping this dataset's dimension.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            dim: self.dim,
        }
    }

    /// Copy with every label removed.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            examples: self
                .examples
                .iter()
                .map(|e| Example::unlabeled(e.features.clone()))
                .collect(),
            dim: self.dim,
        }
    }

    /// Copy with labels replaced by `labels`.
    pub fn relabeled(&self, labels: &[u8]) -> Result<Dataset> {
        if labels.len() != self.len() {
            return param_err(format!(
                "{} labels supplied for {} examples",
                labels.len(),
                self.len()
            ));
        }
        Ok(Dataset {
            examples: self
                .examples
                .iter()
                .zip(labels)
                .map(|(e, &y)| Example::labeled(e.features.clone(), y))
                .collect(),
            dim: self.dim,
        })
    }

    pub fn concat(mut self, other: Dataset) -> Dataset {
        self.dim = self.dim.max(other.dim);
        self.examples.extend(other.examples);
        self
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Example;
    type IntoIter = std::slice::Iter<'a, Example>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_vector_rejects_unsorted() {
        assert!(SparseVector::new(vec![(3, 1.0), (3, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(3, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::new(vec![(0, f64::NAN)]).is_err());
    }

    #[test]
    fn dot_ignores_out_of_range() {
        let v = SparseVector::new(vec![(0, 2.0), (5, 1.0)]).unwrap();
        assert_eq!(v.dot(&[3.0, 1.0]), 6.0);
        assert_eq!(v.dim(), 6);
        assert_eq!(v.get(5), 1.0);
        assert_eq!(v.get(4), 0.0);
    }

    #[test]
    fn dataset_dim_and_relabel() {
        let d = Dataset::new(vec![
            Example::unlabeled(SparseVector::from_dense(&[1.0, 0.0, 2.0])),
            Example::unlabeled(SparseVector::from_dense(&[1.0])),
        ]);
        assert_eq!(d.dim(), 3);
        assert!(!d.is_fully_labeled());
        let l = d.relabeled(&[1, 0]).unwrap();
        assert!(l.is_fully_labeled());
        assert!(d.relabeled(&[1]).is_err());
    }
}
