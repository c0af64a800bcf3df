//! Factor-number selection.
//!
//! Total per-mode factor counts come from an eigenvalue-ratio scan of the
//! per-mode sample covariance. Global counts use the *perturbed* ratio on the
//! cross-thread global covariance,
//!
//! ```text
//! r̂ = argmin_{1 ≤ i ≤ r_max} (λ_{i+1} + ξ) / (λ_i + ξ) ,
//! ξ = c_ξ · p_m · (Σ_{n≠m} peer size) / √T ,
//! ```
//!
//! where the peer size is the full dimension `p_n`, or the subset size when
//! the covariance was subsampled. The stabiliser ξ prevents the spurious
//! minima that plain ratios produce in the trailing (noise) eigenvalues;
//! with ξ = 0 the scan degrades to the naive ratio estimator. Local counts
//! follow by differencing the totals.

use crate::data::Collection;
use crate::estimate::{GlobalCovariance, SigmaConstruction};
use crate::linalg;
use thiserror::Error;

/// Practical default for the ξ constant.
pub const DEFAULT_XI_FACTOR: f64 = 0.2;

#[derive(Error, Debug)]
pub enum RankError {
    #[error("dimension {0} too small for ratio-based selection")]
    DimensionTooSmall(usize),

    #[error("r_max {r_max} out of range; need 1 <= r_max <= {limit}")]
    RMaxOutOfRange { r_max: usize, limit: usize },

    #[error("thread or mode index out of range: thread {thread}, mode {mode}")]
    IndexOutOfRange { thread: usize, mode: usize },

    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),

    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

/// Eigenvalues, perturbed ratios and the selected index of one ratio scan.
#[derive(Clone, Debug)]
pub struct RatioDiagnostics {
    /// Descending eigenvalues (clamped below at zero).
    pub eigvals: Vec<f64>,
    /// `(λ_{i+1} + ξ)/(λ_i + ξ)` for i = 1..=r_max.
    pub ratios: Vec<f64>,
    pub xi: f64,
    /// Selected rank (1-based position of the minimising ratio).
    pub selected: usize,
}

fn ratio_scan(eigvals: &[f64], r_max: usize, xi: f64) -> RatioDiagnostics {
    let clamped: Vec<f64> = eigvals.iter().map(|&v| v.max(0.0)).collect();
    let mut ratios = Vec::with_capacity(r_max);
    for i in 0..r_max {
        let num = clamped[i + 1] + xi;
        let den = clamped[i] + xi;
        // Both zero carries no information; count it as a flat ratio.
        ratios.push(if den == 0.0 { 1.0 } else { num / den });
    }
    let mut selected = 1;
    let mut best = ratios[0];
    for (i, &r) in ratios.iter().enumerate().skip(1) {
        if r < best {
            best = r;
            selected = i + 1;
        }
    }
    RatioDiagnostics {
        eigvals: clamped,
        ratios,
        xi,
        selected,
    }
}

/// Estimates the *total* factor count `s_{m,k} = r_{m,k} + u_{m,k}` of one
/// mode by the unperturbed eigenvalue ratio of the per-mode sample covariance
/// `(1/(T·p_{m,-k})) Σ_t mat_k(X_t) mat_k(X_t)ᵀ`.
///
/// Any consistent external estimate may be used instead; the fit pipeline
/// takes totals as plain integers.
pub fn total_rank(
    c: &Collection,
    m: usize,
    k: usize,
    r_max: usize,
) -> Result<(usize, RatioDiagnostics), RankError> {
    if m >= c.num_threads() || k >= c.thread(m).order() {
        return Err(RankError::IndexOutOfRange { thread: m, mode: k });
    }
    let p = c.thread(m).dims()[k];
    if p < 2 {
        return Err(RankError::DimensionTooSmall(p));
    }
    check_r_max(r_max, p)?;
    let t_len = c.t_len();
    let p_rest = (c.thread(m).total_dim() / p) as f64;
    let mut acc = crate::linalg::Matrix::zeros(p, p);
    for t in 0..t_len {
        let u = c.thread(m).observation(t).unfold(k)?;
        acc += &u * u.transpose();
    }
    acc /= t_len as f64 * p_rest;
    let (eigvals, _) = linalg::sym_eigen_desc(&acc)?;
    let diag = ratio_scan(&eigvals, r_max, 0.0);
    Ok((diag.selected, diag))
}

/// The ξ stabiliser for a covariance construction: `c_xi · p_m · S / √T` with
/// S the summed peer sizes (full dimensions, or subset sizes if subsampled).
pub fn xi_value(
    c: &Collection,
    sigma: &GlobalCovariance,
    c_xi: f64,
) -> f64 {
    let m = sigma.thread;
    let p_m = c.thread(m).total_dim() as f64;
    let peer_sum: usize = match &sigma.construction {
        SigmaConstruction::Full => (0..c.num_threads())
            .filter(|&n| n != m)
            .map(|n| c.thread(n).total_dim())
            .sum(),
        SigmaConstruction::Subsampled(sets) => sets.total(),
    };
    c_xi * p_m * peer_sum as f64 / (c.t_len() as f64).sqrt()
}

/// Estimates the global factor count of one (thread, mode) pair from its
/// global covariance by the perturbed eigenvalue-ratio scan.
///
/// `r_max` defaults to `⌊p_{m,k}/2⌋`; ties select the smallest index;
/// `c_xi = 0` reproduces the naive ratio estimator.
pub fn global_rank(
    c: &Collection,
    sigma: &GlobalCovariance,
    r_max: Option<usize>,
    c_xi: f64,
) -> Result<(usize, RatioDiagnostics), RankError> {
    let p = sigma.matrix.nrows();
    let r_max = r_max.unwrap_or(p / 2);
    check_r_max(r_max, p)?;
    let xi = xi_value(c, sigma, c_xi);
    let (eigvals, _) = linalg::sym_eigen_desc(&sigma.matrix)?;
    let diag = ratio_scan(&eigvals, r_max, xi);
    Ok((diag.selected, diag))
}

/// Local count by differencing: `û = max(ŝ − r̂, 0)`. The boolean flags the
/// clamped case `ŝ < r̂` (an over-estimated global count); `û = 0` hints at an
/// absent local component.
pub fn local_rank(s_hat: usize, r_hat: usize) -> (usize, bool) {
    if s_hat >= r_hat {
        (s_hat - r_hat, false)
    } else {
        (0, true)
    }
}

fn check_r_max(r_max: usize, p: usize) -> Result<(), RankError> {
    if r_max < 1 || r_max >= p {
        return Err(RankError::RMaxOutOfRange {
            r_max,
            limit: p.saturating_sub(1),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::SigmaConstruction;
    use crate::linalg::Matrix;

    fn sigma_from_diag(diag: &[f64]) -> GlobalCovariance {
        let n = diag.len();
        GlobalCovariance {
            matrix: Matrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
            thread: 0,
            mode: 0,
            construction: SigmaConstruction::Full,
        }
    }

    #[test]
    fn ratio_scan_hand_case() {
        // eigvals (100, 1, 0.5, 0.1), xi = 0.1, r_max = 2.
        let diag = ratio_scan(&[100.0, 1.0, 0.5, 0.1], 2, 0.1);
        assert!((diag.ratios[0] - 1.1 / 100.1).abs() < 1e-12);
        assert!((diag.ratios[1] - 0.6 / 1.1).abs() < 1e-12);
        assert_eq!(diag.selected, 1);

        // xi = 0 on the same eigenvalues still selects 1.
        let diag = ratio_scan(&[100.0, 1.0, 0.5, 0.1], 2, 0.0);
        assert!((diag.ratios[0] - 0.01).abs() < 1e-12);
        assert!((diag.ratios[1] - 0.5).abs() < 1e-12);
        assert_eq!(diag.selected, 1);
    }

    #[test]
    fn scan_is_scale_equivariant() {
        let eig = [40.0, 6.0, 3.0, 1.0, 0.2, 0.05];
        let base = ratio_scan(&eig, 3, 2.0);
        let scaled: Vec<f64> = eig.iter().map(|v| v * 7.5).collect();
        let other = ratio_scan(&scaled, 3, 2.0 * 7.5);
        assert_eq!(base.selected, other.selected);
        for (a, b) in base.ratios.iter().zip(&other.ratios) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn huge_xi_flattens_ratios() {
        let diag = ratio_scan(&[40.0, 6.0, 3.0, 1.0], 3, 1e12);
        for r in &diag.ratios {
            assert!((r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ties_select_smallest_index() {
        let diag = ratio_scan(&[8.0, 2.0, 2.0, 0.5], 3, 0.0);
        // ratios: 0.25, 1.0, 0.25 -> tie between 1 and 3.
        assert_eq!(diag.selected, 1);
    }

    #[test]
    fn global_rank_uses_xi_from_collection() {
        use crate::data::ThreadSeries;
        use crate::tensor::DenseTensor;
        let mk = |p: usize, t: usize| {
            ThreadSeries::new(vec![p], vec![DenseTensor::zeros(vec![p]).unwrap(); t]).unwrap()
        };
        let c = crate::data::Collection::new(vec![mk(4, 16), mk(9, 16)]).unwrap();
        let sigma = sigma_from_diag(&[100.0, 1.0, 0.5, 0.1]);
        // xi = 0.2 · 4 · 9 / 4 = 1.8
        let (r, diag) = global_rank(&c, &sigma, Some(2), DEFAULT_XI_FACTOR).unwrap();
        assert!((diag.xi - 1.8).abs() < 1e-12);
        assert_eq!(r, 1);
        assert!(matches!(
            global_rank(&c, &sigma, Some(0), 0.2),
            Err(RankError::RMaxOutOfRange { .. })
        ));
        assert!(matches!(
            global_rank(&c, &sigma, Some(4), 0.2),
            Err(RankError::RMaxOutOfRange { .. })
        ));
    }

    #[test]
    fn local_rank_differencing() {
        assert_eq!(local_rank(3, 1), (2, false));
        assert_eq!(local_rank(2, 2), (0, false));
        assert_eq!(local_rank(1, 2), (0, true));
    }
}
