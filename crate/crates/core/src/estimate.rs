//! Eigendecomposition-based estimation of global/local loadings, factors and
//! components.
//!
//! For thread m and mode k the global loading span is recovered from the
//! covariance-like matrix
//!
//! ```text
//! Σ_{m,k} = Σ_{n≠m} Σ_{i ∈ indices(n)} Ω_{k,n,i} Ω_{k,n,i}ᵀ ,
//! Ω_{k,n,i} = (1/T) Σ_t mat_k(X_t⁽ᵐ⁾) · (X_t⁽ⁿ⁾)_i ,
//! ```
//!
//! whose leading eigenvectors (times `√p_{m,k}`) estimate the global loading.
//! Expanding the square shows the equivalent Gram form
//!
//! ```text
//! Σ_{m,k} = (1/T²) Σ_{n≠m} Σ_{t,s} ⟨vec X_t⁽ⁿ⁾, vec X_s⁽ⁿ⁾⟩ ·
//!           mat_k(X_t⁽ᵐ⁾) mat_k(X_s⁽ᵐ⁾)ᵀ ,
//! ```
//!
//! which costs O(T²) inner products instead of a full peer-index loop and is
//! the default; the naive expansion is kept as the test oracle and for tiny
//! problems. Local loadings come from a projected PCA after removing the
//! estimated global column spaces, and factors from least-squares given the
//! loadings.

use crate::data::{
    Collection, DataError, FitResult, LoadingEstimates, RankProfile, ThreadLoadings,
};
use crate::linalg::{self, LinalgError, Matrix, Vector};
use crate::subsample::{draw_index_sets, IndexSets, SubsampleError};
use crate::tensor::{kron_descending, DenseTensor, TensorError};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum EstimationError {
    #[error("global estimation requires at least two threads")]
    NeedsTwoThreads,

    #[error("peer thread must differ from the target thread ({0})")]
    SelfPeer(usize),

    #[error("thread or mode index out of range: thread {thread}, mode {mode:?}")]
    IndexOutOfRange { thread: usize, mode: Option<usize> },

    #[error("rank {rank} out of range for dimension {dim}")]
    RankOutOfRange { rank: usize, dim: usize },

    #[error("local covariance variant mismatch: {0}")]
    VariantMismatch(String),

    #[error("degenerate complement: no directions left after removing the global span")]
    DegenerateComplement,

    #[error("collinear design: {0}")]
    Collinear(#[from] LinalgError),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Subsample(#[from] SubsampleError),

    #[error("{stage} (thread {thread}, mode {mode:?}): {source}")]
    Stage {
        stage: &'static str,
        thread: usize,
        mode: Option<usize>,
        #[source]
        source: Box<EstimationError>,
    },
}

fn stage<T>(
    res: Result<T, EstimationError>,
    stage: &'static str,
    thread: usize,
    mode: Option<usize>,
) -> Result<T, EstimationError> {
    res.map_err(|e| EstimationError::Stage {
        stage,
        thread,
        mode,
        source: Box::new(e),
    })
}

/// How the global covariance is assembled. Both routes agree to roundoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SigmaMethod {
    /// Literal peer multi-index loop; the oracle path.
    Naive,
    /// O(T²) Gram-form accumulation; the default.
    Gram,
}

/// Records whether a covariance used all peer indices or a random subset.
#[derive(Clone, Debug)]
pub enum SigmaConstruction {
    Full,
    Subsampled(IndexSets),
}

/// Filtered covariance for one (thread, mode) pair; symmetric non-negative
/// definite up to roundoff.
#[derive(Clone, Debug)]
pub struct GlobalCovariance {
    pub matrix: Matrix,
    pub thread: usize,
    pub mode: usize,
    pub construction: SigmaConstruction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalCovVariant {
    /// Complement-projected covariance for threads of order > 1.
    Projected,
    /// Complement-sandwiched covariance for order-1 threads.
    Sandwiched,
}

/// Covariance whose leading eigenvectors estimate a local loading.
#[derive(Clone, Debug)]
pub struct LocalCovariance {
    pub matrix: Matrix,
    pub variant: LocalCovVariant,
}

/// Time-averaged mode-k unfolding of thread m weighted by one scalar entry of
/// peer thread n: `(1/T) Σ_t mat_k(X_t⁽ᵐ⁾) · (X_t⁽ⁿ⁾)_index`.
pub fn cross_moment(
    c: &Collection,
    m: usize,
    k: usize,
    n: usize,
    index: &[usize],
) -> Result<Matrix, EstimationError> {
    if n == m {
        return Err(EstimationError::SelfPeer(m));
    }
    check_pair(c, m, Some(k))?;
    check_pair(c, n, None)?;
    let flat = crate::tensor::encode_index(c.thread(n).dims(), index);
    let t_len = c.t_len();
    let mut acc = Matrix::zeros(
        c.thread(m).dims()[k],
        c.thread(m).total_dim() / c.thread(m).dims()[k],
    );
    for t in 0..t_len {
        let w = c.thread(n).observation(t).data()[flat];
        axpy_matrix(&mut acc, w, &c.thread(m).observation(t).unfold(k)?);
    }
    Ok(acc / t_len as f64)
}

/// Global covariance for thread m, mode k, over all peer multi-indices.
pub fn global_covariance(
    c: &Collection,
    m: usize,
    k: usize,
    method: SigmaMethod,
) -> Result<GlobalCovariance, EstimationError> {
    global_covariance_impl(c, m, k, method, None)
}

/// Global covariance restricted to the multi-index subsets in `sets`.
///
/// With full sets this equals [`global_covariance`] exactly.
pub fn global_covariance_subsampled(
    c: &Collection,
    m: usize,
    k: usize,
    sets: &IndexSets,
    method: SigmaMethod,
) -> Result<GlobalCovariance, EstimationError> {
    if sets.target_thread != m {
        return Err(EstimationError::VariantMismatch(format!(
            "index sets drawn for thread {}, used for thread {m}",
            sets.target_thread
        )));
    }
    global_covariance_impl(c, m, k, method, Some(sets))
}

fn global_covariance_impl(
    c: &Collection,
    m: usize,
    k: usize,
    method: SigmaMethod,
    sets: Option<&IndexSets>,
) -> Result<GlobalCovariance, EstimationError> {
    if c.num_threads() < 2 {
        return Err(EstimationError::NeedsTwoThreads);
    }
    check_pair(c, m, Some(k))?;
    let t_len = c.t_len();
    let unfolds: Vec<Matrix> = (0..t_len)
        .map(|t| c.thread(m).observation(t).unfold(k))
        .collect::<Result<_, _>>()?;
    let p_k = unfolds[0].nrows();

    let matrix = match method {
        SigmaMethod::Naive => {
            let mut acc = Matrix::zeros(p_k, p_k);
            for n in (0..c.num_threads()).filter(|&n| n != m) {
                let peer = c.thread(n);
                let flats: Vec<usize> = match sets {
                    Some(s) => peer_flats(s, n),
                    None => (0..peer.total_dim()).collect(),
                };
                let mut omega = Matrix::zeros(p_k, unfolds[0].ncols());
                for flat in flats {
                    omega.fill(0.0);
                    for t in 0..t_len {
                        let w = peer.observation(t).data()[flat];
                        axpy_matrix(&mut omega, w, &unfolds[t]);
                    }
                    omega /= t_len as f64;
                    acc += &omega * omega.transpose();
                }
            }
            acc
        }
        SigmaMethod::Gram => {
            // w[t, s] = Σ_{n≠m} ⟨selected entries of X_t⁽ⁿ⁾ and X_s⁽ⁿ⁾⟩
            let w = peer_gram(c, m, sets);
            let mut acc = Matrix::zeros(p_k, p_k);
            let mut weighted = Matrix::zeros(p_k, unfolds[0].ncols());
            for s in 0..t_len {
                weighted.fill(0.0);
                for t in 0..t_len {
                    axpy_matrix(&mut weighted, w[(t, s)], &unfolds[t]);
                }
                acc += &weighted * unfolds[s].transpose();
            }
            acc / (t_len as f64 * t_len as f64)
        }
    };
    // Symmetrise before any eigendecomposition sees it.
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(GlobalCovariance {
        matrix,
        thread: m,
        mode: k,
        construction: match sets {
            Some(s) => SigmaConstruction::Subsampled(s.clone()),
            None => SigmaConstruction::Full,
        },
    })
}

fn peer_flats(sets: &IndexSets, n: usize) -> Vec<usize> {
    sets.sets
        .iter()
        .find(|(peer, _)| *peer == n)
        .map(|(_, flats)| flats.clone())
        .unwrap_or_default()
}

fn peer_gram(c: &Collection, m: usize, sets: Option<&IndexSets>) -> Matrix {
    let t_len = c.t_len();
    let mut w = Matrix::zeros(t_len, t_len);
    for n in (0..c.num_threads()).filter(|&n| n != m) {
        let peer = c.thread(n);
        // Gather the selected entries once per time point.
        let rows: Vec<Vec<f64>> = match sets {
            Some(s) => {
                let flats = peer_flats(s, n);
                (0..t_len)
                    .map(|t| {
                        let data = peer.observation(t).data();
                        flats.iter().map(|&f| data[f]).collect()
                    })
                    .collect()
            }
            None => (0..t_len)
                .map(|t| peer.observation(t).data().to_vec())
                .collect(),
        };
        for t in 0..t_len {
            for s in t..t_len {
                let dot: f64 = rows[t].iter().zip(&rows[s]).map(|(a, b)| a * b).sum();
                w[(t, s)] += dot;
                if s != t {
                    w[(s, t)] += dot;
                }
            }
        }
    }
    w
}

/// Global loading from a covariance: `√p` times the leading `rank`
/// eigenvectors, the orthonormal complement (all remaining eigenvectors,
/// unscaled), and the full descending eigenvalue list.
pub fn global_loading(
    sigma: &GlobalCovariance,
    rank: usize,
) -> Result<(Matrix, Matrix, Vec<f64>), EstimationError> {
    let p = sigma.matrix.nrows();
    if rank >= p {
        return Err(EstimationError::RankOutOfRange { rank, dim: p });
    }
    let (values, vectors) = linalg::sym_eigen_desc(&sigma.matrix)?;
    let loading = vectors.columns(0, rank).clone_owned() * (p as f64).sqrt();
    let complement = vectors.columns(rank, p - rank).clone_owned();
    Ok((loading, complement, values))
}

/// Local covariance for a thread of order > 1: project the mode-k unfolding
/// onto the Kronecker product of the *other* modes' global complements, then
/// average the outer products over time.
///
/// `complements` holds one complement per mode of the thread; entry `k` is
/// ignored.
pub fn local_covariance_projected(
    c: &Collection,
    m: usize,
    k: usize,
    complements: &[Matrix],
) -> Result<LocalCovariance, EstimationError> {
    check_pair(c, m, Some(k))?;
    let order = c.thread(m).order();
    if order == 1 {
        return Err(EstimationError::VariantMismatch(
            "order-1 thread: use the sandwiched variant".into(),
        ));
    }
    if complements.len() != order {
        return Err(EstimationError::IndexOutOfRange {
            thread: m,
            mode: None,
        });
    }
    let others: Vec<&Matrix> = complements
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, c)| c)
        .collect();
    let kron = kron_descending(&others);
    if kron.ncols() == 0 {
        return Err(EstimationError::DegenerateComplement);
    }
    let t_len = c.t_len();
    let p_m = c.thread(m).total_dim() as f64;
    let p_k = c.thread(m).dims()[k];
    let mut acc = Matrix::zeros(p_k, p_k);
    for t in 0..t_len {
        let projected = c.thread(m).observation(t).unfold(k)? * &kron;
        acc += &projected * projected.transpose();
    }
    let matrix = acc / (t_len as f64 * p_m);
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(LocalCovariance {
        matrix,
        variant: LocalCovVariant::Projected,
    })
}

/// Local covariance for an order-1 thread: sandwich the sample second moment
/// between the global-complement projectors.
pub fn local_covariance_vector(
    c: &Collection,
    m: usize,
    complement: &Matrix,
) -> Result<LocalCovariance, EstimationError> {
    check_pair(c, m, None)?;
    if c.thread(m).order() != 1 {
        return Err(EstimationError::VariantMismatch(
            "thread of order > 1: use the projected variant".into(),
        ));
    }
    let t_len = c.t_len();
    let p = c.thread(m).dims()[0];
    let q = complement * complement.transpose();
    let mut acc = Matrix::zeros(p, p);
    for t in 0..t_len {
        let x = Vector::from_column_slice(c.thread(m).observation(t).data());
        let y = &q * x;
        acc += &y * y.transpose();
    }
    let matrix = acc / (t_len as f64 * p as f64);
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(LocalCovariance {
        matrix,
        variant: LocalCovVariant::Sandwiched,
    })
}

/// Local loading: `√p` times the leading `rank` eigenvectors, plus the full
/// descending eigenvalue list.
pub fn local_loading(
    sigma: &LocalCovariance,
    rank: usize,
) -> Result<(Matrix, Vec<f64>), EstimationError> {
    let p = sigma.matrix.nrows();
    if rank >= p {
        return Err(EstimationError::RankOutOfRange { rank, dim: p });
    }
    let (values, vectors) = linalg::sym_eigen_desc(&sigma.matrix)?;
    Ok((
        vectors.columns(0, rank).clone_owned() * (p as f64).sqrt(),
        values,
    ))
}

/// Least-squares recovery of the local factor series given the loadings:
///
/// ```text
/// vec(F̂_t) = (CᵀC)⁻¹ Cᵀ (⊗_k Â_{k,⊥})ᵀ vec(X_t),   C = (⊗_k Â_{k,⊥})ᵀ (⊗_k B̂_k)
/// ```
///
/// Returns `None` when the local rank product is zero (absent component).
/// `C` is assembled from the per-mode products via the Kronecker mixed-product
/// rule, and the big projections are evaluated as mode products.
pub fn local_factor_series(
    c: &Collection,
    m: usize,
    loadings: &ThreadLoadings,
) -> Result<Option<Vec<DenseTensor>>, EstimationError> {
    check_pair(c, m, None)?;
    let u_dims: Vec<usize> = loadings.local.iter().map(Matrix::ncols).collect();
    if u_dims.iter().product::<usize>() == 0 {
        return Ok(None);
    }
    if loadings
        .global_complement
        .iter()
        .any(|c| c.ncols() == 0)
    {
        return Err(EstimationError::DegenerateComplement);
    }
    let per_mode: Vec<Matrix> = loadings
        .global_complement
        .iter()
        .zip(&loadings.local)
        .map(|(perp, b)| perp.transpose() * b)
        .collect();
    let refs: Vec<&Matrix> = per_mode.iter().collect();
    let c_mat = kron_descending(&refs);
    let gram = c_mat.transpose() * &c_mat;

    let perp_t: Vec<Matrix> = loadings
        .global_complement
        .iter()
        .map(Matrix::transpose)
        .collect();
    let perp_refs: Vec<&Matrix> = perp_t.iter().collect();

    let mut series = Vec::with_capacity(c.t_len());
    for t in 0..c.t_len() {
        let projected = c.thread(m).observation(t).multi_mode_product(&perp_refs)?;
        let rhs = c_mat.transpose() * projected.vectorize();
        let solved = linalg::solve_gram(&gram, &rhs)?;
        series.push(DenseTensor::new(
            u_dims.clone(),
            solved.as_slice().to_vec(),
        )?);
    }
    Ok(Some(series))
}

/// Least-squares recovery of the global factor series after subtracting the
/// estimated local component:
///
/// ```text
/// vec(Ĝ_t) = {(⊗Â)ᵀ(⊗Â)}⁻¹ (⊗Â)ᵀ {vec(X_t) − (⊗B̂) vec(F̂_t)}
/// ```
///
/// Under the `ÂᵀÂ = p·I` convention the Gram factor is `p_m·I` exactly, but a
/// guarded solve is used regardless.
pub fn global_factor_series(
    c: &Collection,
    m: usize,
    loadings: &ThreadLoadings,
    local_factors: Option<&[DenseTensor]>,
) -> Result<Option<Vec<DenseTensor>>, EstimationError> {
    check_pair(c, m, None)?;
    let r_dims: Vec<usize> = loadings.global.iter().map(Matrix::ncols).collect();
    if r_dims.iter().product::<usize>() == 0 {
        return Ok(None);
    }
    let gram_parts: Vec<Matrix> = loadings
        .global
        .iter()
        .map(|a| a.transpose() * a)
        .collect();
    let gram_refs: Vec<&Matrix> = gram_parts.iter().collect();
    let gram = kron_descending(&gram_refs);

    let a_t: Vec<Matrix> = loadings.global.iter().map(Matrix::transpose).collect();
    let a_refs: Vec<&Matrix> = a_t.iter().collect();
    let b_refs: Vec<&Matrix> = loadings.local.iter().collect();

    let mut series = Vec::with_capacity(c.t_len());
    for t in 0..c.t_len() {
        let mut resid = c.thread(m).observation(t).clone();
        if let Some(f) = local_factors {
            resid = &resid - &f[t].multi_mode_product(&b_refs)?;
        }
        let projected = resid.multi_mode_product(&a_refs)?;
        let solved = linalg::solve_gram(&gram, &projected.vectorize())?;
        series.push(DenseTensor::new(
            r_dims.clone(),
            solved.as_slice().to_vec(),
        )?);
    }
    Ok(Some(series))
}

/// Options for [`fit`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub sigma_method: SigmaMethod,
    /// When set, the global covariances use random peer subsets with this
    /// total budget; one set is drawn per thread from `derive_seed(seed, m)`.
    pub subsample: Option<SubsampleOptions>,
    /// Subtract per-entry time means first. Off by default: simulated data is
    /// mean zero by construction; turn on for real data.
    pub demean: bool,
    /// Materialise component series (and residuals) in the result.
    pub materialize: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct SubsampleOptions {
    pub budget: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sigma_method: SigmaMethod::Gram,
            subsample: None,
            demean: false,
            materialize: true,
        }
    }
}

/// Runs the full pipeline per thread: global covariance → global loadings per
/// mode → local covariances → local loadings → local factors → global factors
/// → components. Deterministic given the options.
pub fn fit(
    c: &Collection,
    ranks: &RankProfile,
    opts: &FitOptions,
) -> Result<FitResult, EstimationError> {
    if c.num_threads() < 2 {
        return Err(EstimationError::NeedsTwoThreads);
    }
    crate::data::validate(c)?;
    ranks.check_against(c)?;
    let demeaned;
    let c = if opts.demean {
        demeaned = crate::data::demean(c)?;
        &demeaned
    } else {
        c
    };

    let mut threads = Vec::with_capacity(c.num_threads());
    let mut global_factors = Vec::new();
    let mut local_factors = Vec::new();

    for m in 0..c.num_threads() {
        let sets = match &opts.subsample {
            Some(sub) => Some(stage(
                draw_index_sets(c, m, sub.budget, crate::derive_seed(sub.seed, m as u64))
                    .map_err(EstimationError::from),
                "subsample draw",
                m,
                None,
            )?),
            None => None,
        };

        let order = c.thread(m).order();
        let mut global = Vec::with_capacity(order);
        let mut global_complement = Vec::with_capacity(order);
        let mut global_eigvals = Vec::with_capacity(order);
        for k in 0..order {
            let sigma = stage(
                match &sets {
                    Some(s) => global_covariance_subsampled(c, m, k, s, opts.sigma_method),
                    None => global_covariance(c, m, k, opts.sigma_method),
                },
                "global covariance",
                m,
                Some(k),
            )?;
            let (a, a_perp, eigvals) = stage(
                global_loading(&sigma, ranks.global(m, k)),
                "global loading",
                m,
                Some(k),
            )?;
            global.push(a);
            global_complement.push(a_perp);
            global_eigvals.push(eigvals);
        }

        let mut local = Vec::with_capacity(order);
        let mut local_eigvals = Vec::with_capacity(order);
        for k in 0..order {
            let u = ranks.local(m, k);
            if u == 0 {
                local.push(Matrix::zeros(c.thread(m).dims()[k], 0));
                local_eigvals.push(Vec::new());
                continue;
            }
            let cov = stage(
                if order == 1 {
                    local_covariance_vector(c, m, &global_complement[0])
                } else {
                    local_covariance_projected(c, m, k, &global_complement)
                },
                "local covariance",
                m,
                Some(k),
            )?;
            let (b, eigvals) = stage(local_loading(&cov, u), "local loading", m, Some(k))?;
            local.push(b);
            local_eigvals.push(eigvals);
        }

        let loadings = ThreadLoadings {
            global,
            global_complement,
            local,
            global_eigvals,
            local_eigvals,
        };
        let f_series = stage(
            local_factor_series(c, m, &loadings),
            "local factors",
            m,
            None,
        )?;
        let g_series = stage(
            global_factor_series(c, m, &loadings, f_series.as_deref()),
            "global factors",
            m,
            None,
        )?;
        local_factors.push(f_series);
        global_factors.push(g_series);
        threads.push(loadings);
    }

    let loadings = LoadingEstimates { threads };
    let (global_components, local_components, residuals) = if opts.materialize {
        let mut gc = Vec::new();
        let mut lc = Vec::new();
        let mut res = Vec::new();
        for m in 0..c.num_threads() {
            let dims = c.thread(m).dims().to_vec();
            let zeros = || -> Result<Vec<DenseTensor>, TensorError> {
                Ok(vec![DenseTensor::zeros(dims.clone())?; c.t_len()])
            };
            let g: Vec<DenseTensor> = match &global_factors[m] {
                Some(series) => {
                    let a_refs: Vec<&Matrix> = loadings.threads[m].global.iter().collect();
                    series
                        .iter()
                        .map(|g| g.multi_mode_product(&a_refs))
                        .collect::<Result<_, _>>()?
                }
                None => zeros()?,
            };
            let l: Vec<DenseTensor> = match &local_factors[m] {
                Some(series) => {
                    let b_refs: Vec<&Matrix> = loadings.threads[m].local.iter().collect();
                    series
                        .iter()
                        .map(|f| f.multi_mode_product(&b_refs))
                        .collect::<Result<_, _>>()?
                }
                None => zeros()?,
            };
            let r: Vec<DenseTensor> = (0..c.t_len())
                .map(|t| &(c.thread(m).observation(t) - &g[t]) - &l[t])
                .collect();
            gc.push(g);
            lc.push(l);
            res.push(r);
        }
        (Some(gc), Some(lc), Some(res))
    } else {
        (None, None, None)
    };

    Ok(FitResult {
        loadings,
        global_factors,
        local_factors,
        global_components,
        local_components,
        residuals,
    })
}

fn check_pair(c: &Collection, m: usize, k: Option<usize>) -> Result<(), EstimationError> {
    if m >= c.num_threads() || k.is_some_and(|k| k >= c.thread(m).order()) {
        return Err(EstimationError::IndexOutOfRange { thread: m, mode: k });
    }
    Ok(())
}

/// `y += a * x` without allocating; both matrices must have identical shape.
fn axpy_matrix(y: &mut Matrix, a: f64, x: &Matrix) {
    debug_assert_eq!(y.shape(), x.shape());
    for (dst, src) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *dst += a * src;
    }
}
