//! Data model for joint collections of tensor time series.
//!
//! A [`ThreadSeries`] is one observed tensor time series; a [`Collection`]
//! joins several threads that share the time axis (the threads may have
//! different tensor orders). [`RankProfile`] carries the per-thread, per-mode
//! global and local factor counts, and [`FitResult`] the estimation output.
//!
//! All types are immutable after construction and safe for shared reads.

use crate::linalg::Matrix;
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum DataError {
    #[error("thread {thread}: observation {time} has dims {got:?}, expected {expected:?}")]
    ObservationShape {
        thread: usize,
        time: usize,
        got: Vec<usize>,
        expected: Vec<usize>,
    },

    #[error("threads do not share a time axis: thread {thread} has T={got}, expected T={expected}")]
    Alignment {
        thread: usize,
        got: usize,
        expected: usize,
    },

    #[error("non-finite value in thread {thread} at time {time}, flat offset {offset}")]
    NonFinite {
        thread: usize,
        time: usize,
        offset: usize,
    },

    #[error("collection is empty")]
    Empty,

    #[error("operation requires T >= 2, collection has T={0}")]
    TooShort(usize),

    #[error("rank profile invalid: {0}")]
    RankProfile(String),
}

/// One observed tensor time series with fixed per-observation dims.
#[derive(Clone, Debug)]
pub struct ThreadSeries {
    dims: Vec<usize>,
    observations: Vec<DenseTensor>,
}

impl ThreadSeries {
    pub fn new(dims: Vec<usize>, observations: Vec<DenseTensor>) -> Result<Self, DataError> {
        if observations.is_empty() {
            return Err(DataError::Empty);
        }
        for (t, obs) in observations.iter().enumerate() {
            if obs.dims() != dims.as_slice() {
                return Err(DataError::ObservationShape {
                    thread: 0,
                    time: t,
                    got: obs.dims().to_vec(),
                    expected: dims.clone(),
                });
            }
        }
        Ok(Self { dims, observations })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Product of the mode sizes.
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn t_len(&self) -> usize {
        self.observations.len()
    }

    pub fn observation(&self, t: usize) -> &DenseTensor {
        &self.observations[t]
    }

    pub fn observations(&self) -> &[DenseTensor] {
        &self.observations
    }
}

/// Joint collection of threads sharing a time axis.
#[derive(Clone, Debug)]
pub struct Collection {
    threads: Vec<ThreadSeries>,
}

impl Collection {
    /// Joins threads into a collection; all threads must share the same T.
    pub fn new(threads: Vec<ThreadSeries>) -> Result<Self, DataError> {
        if threads.is_empty() {
            return Err(DataError::Empty);
        }
        let t_len = threads[0].t_len();
        for (m, th) in threads.iter().enumerate() {
            if th.t_len() != t_len {
                return Err(DataError::Alignment {
                    thread: m,
                    got: th.t_len(),
                    expected: t_len,
                });
            }
        }
        Ok(Self { threads })
    }

    pub fn num_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn t_len(&self) -> usize {
        self.threads[0].t_len()
    }

    pub fn thread(&self, m: usize) -> &ThreadSeries {
        &self.threads[m]
    }

    pub fn threads(&self) -> &[ThreadSeries] {
        &self.threads
    }
}

/// Per-thread dims and shared length, as returned by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollectionSummary {
    pub t_len: usize,
    pub thread_dims: Vec<Vec<usize>>,
}

/// Confirms the shared time axis and scans every value for NaN/Inf,
/// reporting the first offender with its thread, time and flat offset.
pub fn validate(c: &Collection) -> Result<CollectionSummary, DataError> {
    for (m, th) in c.threads().iter().enumerate() {
        for (t, obs) in th.observations().iter().enumerate() {
            if let Some(offset) = obs.data().iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    thread: m,
                    time: t,
                    offset,
                });
            }
        }
    }
    Ok(CollectionSummary {
        t_len: c.t_len(),
        thread_dims: c.threads().iter().map(|t| t.dims().to_vec()).collect(),
    })
}

/// Subtracts the per-entry time average from every thread, so each entry of
/// the result sums to zero over time. Idempotent up to roundoff.
pub fn demean(c: &Collection) -> Result<Collection, DataError> {
    if c.t_len() < 2 {
        return Err(DataError::TooShort(c.t_len()));
    }
    let t_len = c.t_len() as f64;
    let threads = c
        .threads()
        .iter()
        .map(|th| {
            let n = th.total_dim();
            let mut mean = vec![0.0; n];
            for obs in th.observations() {
                for (m, v) in mean.iter_mut().zip(obs.data()) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= t_len;
            }
            let observations = th
                .observations()
                .iter()
                .map(|obs| {
                    let data = obs
                        .data()
                        .iter()
                        .zip(&mean)
                        .map(|(v, m)| v - m)
                        .collect();
                    DenseTensor::new(th.dims().to_vec(), data).expect("dims preserved")
                })
                .collect();
            ThreadSeries::new(th.dims().to_vec(), observations).expect("shape preserved")
        })
        .collect();
    Collection::new(threads)
}

/// Per-thread, per-mode factor counts: global `r_{m,k}` and local `u_{m,k}`.
///
/// Ranks of zero are legal; a thread with a zero local rank in any mode has an
/// empty local component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankProfile {
    pub threads: Vec<ThreadRanks>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadRanks {
    pub global: Vec<usize>,
    pub local: Vec<usize>,
}

impl RankProfile {
    pub fn new(threads: Vec<ThreadRanks>) -> Self {
        Self { threads }
    }

    pub fn global(&self, m: usize, k: usize) -> usize {
        self.threads[m].global[k]
    }

    pub fn local(&self, m: usize, k: usize) -> usize {
        self.threads[m].local[k]
    }

    /// Checks the profile against a collection: one entry per mode and
    /// `r_{m,k} + u_{m,k} <= p_{m,k}` throughout.
    pub fn check_against(&self, c: &Collection) -> Result<(), DataError> {
        if self.threads.len() != c.num_threads() {
            return Err(DataError::RankProfile(format!(
                "{} thread entries for {} threads",
                self.threads.len(),
                c.num_threads()
            )));
        }
        for (m, (ranks, th)) in self.threads.iter().zip(c.threads()).enumerate() {
            if ranks.global.len() != th.order() || ranks.local.len() != th.order() {
                return Err(DataError::RankProfile(format!(
                    "thread {m}: rank lists must have one entry per mode (order {})",
                    th.order()
                )));
            }
            for (k, p) in th.dims().iter().enumerate() {
                if ranks.global[k] + ranks.local[k] > *p {
                    return Err(DataError::RankProfile(format!(
                        "thread {m} mode {k}: r+u = {} exceeds dimension {p}",
                        ranks.global[k] + ranks.local[k]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Estimated loading matrices and eigenvalue diagnostics for every
/// (thread, mode) pair.
///
/// Conventions: global loadings satisfy `ÂᵀÂ = p·I`, their complements
/// `Â⊥ᵀÂ⊥ = I` and `ÂᵀÂ⊥ = 0`, local loadings `B̂ᵀB̂ = p·I`; eigenvalue
/// lists are non-increasing.
#[derive(Clone, Debug)]
pub struct LoadingEstimates {
    pub threads: Vec<ThreadLoadings>,
}

#[derive(Clone, Debug)]
pub struct ThreadLoadings {
    /// `p_{m,k} × r_{m,k}` global loading per mode.
    pub global: Vec<Matrix>,
    /// `p_{m,k} × (p_{m,k} - r_{m,k})` orthonormal complement per mode.
    pub global_complement: Vec<Matrix>,
    /// `p_{m,k} × u_{m,k}` local loading per mode.
    pub local: Vec<Matrix>,
    /// Descending eigenvalues of the global covariance per mode.
    pub global_eigvals: Vec<Vec<f64>>,
    /// Descending eigenvalues of the local covariance per mode.
    pub local_eigvals: Vec<Vec<f64>>,
}

/// Output of a full fit: loadings, factor series and (optionally) the
/// materialised component series and residuals.
///
/// Factor series are `None` for a thread when the corresponding rank product
/// is zero (absent component); materialised components are then zero tensors.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub loadings: LoadingEstimates,
    pub global_factors: Vec<Option<Vec<DenseTensor>>>,
    pub local_factors: Vec<Option<Vec<DenseTensor>>>,
    pub global_components: Option<Vec<Vec<DenseTensor>>>,
    pub local_components: Option<Vec<Vec<DenseTensor>>>,
    pub residuals: Option<Vec<Vec<DenseTensor>>>,
}
