//! Markov-chain state ids and row-stochastic transition matrices.

use std::fmt;

use crate::error::{Error, Result};
use crate::opinion::TOLERANCE;

/// A Markov state, identified externally by a 1-based id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(u32);

impl State {
    /// State from its 1-based id. Returns `None` for id 0.
    pub fn new(id: u32) -> Option<State> {
        (id >= 1).then_some(State(id))
    }

    pub fn from_index(index: usize) -> State {
        State(index as u32 + 1)
    }

    pub fn id(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Row-stochastic `N×N` matrix; entry `(i, j)` is the probability of moving
/// from state `i` to state `j` (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    probs: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<TransitionMatrix> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Config(format!(
                "transition matrix needs N >= 2, got {n}"
            )));
        }
        let mut probs = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            probs.extend_from_slice(row);
        }
        TransitionMatrix::from_flat(n, probs)
    }

    pub fn from_flat(n: usize, probs: Vec<f64>) -> Result<TransitionMatrix> {
        if n < 2 || probs.len() != n * n {
            return Err(Error::Config(format!(
                "transition matrix of size {n} needs {} entries, got {}",
                n * n,
                probs.len()
            )));
        }
        for (i, row) in probs.chunks(n).enumerate() {
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::Config(format!(
                    "row {} has entry {p} outside [0, 1]",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > TOLERANCE {
                return Err(Error::Config(format!(
                    "row {} sums to {sum}, expected 1",
                    i + 1
                )));
            }
        }
        Ok(TransitionMatrix { n, probs })
    }

    pub fn identity(n: usize) -> TransitionMatrix {
        let mut probs = vec![0.0; n * n];
        for i in 0..n {
            probs[i * n + i] = 1.0;
        }
        TransitionMatrix { n, probs }
    }

    pub fn num_states(&self) -> usize {
        self.n
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.probs[from * self.n..(from + 1) * self.n]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// Entry-wise `(1 - t)·self + t·other`.
    pub fn lerp(&self, other: &TransitionMatrix, t: f64) -> TransitionMatrix {
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| a + (b - a) * t)
            .collect();
        TransitionMatrix { n: self.n, probs }
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
