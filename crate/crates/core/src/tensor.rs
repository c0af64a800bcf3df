//! Dense tensor storage and the deterministic multilinear kernel.
//!
//! A [`DenseTensor`] is an order-K array with a fixed lexicographic layout:
//! mode 1 varies fastest, so the element at (0-based) multi-index
//! `(i_1, …, i_K)` lives at flat offset `Σ_k i_k · Π_{l<k} I_l`. This is the
//! single layout convention the whole crate depends on: `vec(X)` is the flat
//! data verbatim, and `vec(G ×₁ A_1 ⋯ ×_K A_K) = (A_K ⊗ ⋯ ⊗ A_1) vec(G)`,
//! i.e. Kronecker products over an index set are always taken in *descending*
//! index order (see [`kron_descending`]).
//!
//! All operations are value-returning and never mutate their inputs, so
//! tensors can be shared freely across worker threads.

use crate::linalg::Matrix;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum TensorError {
    #[error("mode index {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("data length {len} does not match dims product {expected}")]
    DataLength { len: usize, expected: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),
}

/// Dense order-K tensor of `f64` values in lexicographic (mode-1 fastest) layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor from its mode sizes and flat data.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(TensorError::DimensionMismatch(format!(
                "mode sizes must all be positive, got {dims:?}"
            )));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                len: data.len(),
                expected,
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self, TensorError> {
        let n: usize = dims.iter().product();
        Self::new(dims, vec![0.0; n])
    }

    /// Order-1 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Self {
            dims: vec![1],
            data: vec![value],
        }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Element at a 0-based multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[encode_index(&self.dims, index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Mode-k unfolding: an `I_k × Π_{l≠k} I_l` matrix whose columns enumerate
    /// the remaining modes lexicographically with the smallest remaining mode
    /// varying fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix, TensorError> {
        self.check_mode(mode)?;
        let p_k = self.dims[mode];
        let cols = self.len() / p_k;
        let inner: usize = self.dims[..mode].iter().product();
        let outer = self.len() / (inner * p_k);
        let mut m = Matrix::zeros(p_k, cols);
        // flat = a + i·inner + b·inner·p_k with a ∈ [0, inner), b ∈ [0, outer)
        for b in 0..outer {
            for i in 0..p_k {
                let base = (b * p_k + i) * inner;
                for a in 0..inner {
                    m[(i, a + b * inner)] = self.data[base + a];
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`unfold`](Self::unfold): exact by construction.
    pub fn fold(m: &Matrix, mode: usize, dims: &[usize]) -> Result<Self, TensorError> {
        if mode >= dims.len() {
            return Err(TensorError::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let total: usize = dims.iter().product();
        let p_k = dims[mode];
        if m.nrows() != p_k || m.ncols() * p_k != total {
            return Err(TensorError::DimensionMismatch(format!(
                "matrix {}x{} cannot fold into dims {dims:?} at mode {mode}",
                m.nrows(),
                m.ncols()
            )));
        }
        let inner: usize = dims[..mode].iter().product();
        let outer = total / (inner * p_k);
        let mut data = vec![0.0; total];
        for b in 0..outer {
            for i in 0..p_k {
                let base = (b * p_k + i) * inner;
                for a in 0..inner {
                    data[base + a] = m[(i, a + b * inner)];
                }
            }
        }
        Self::new(dims.to_vec(), data)
    }

    /// Mode-k product with a `J × I_k` matrix; the result replaces `I_k` by `J`
    /// and satisfies `unfold(x ×_k A, k) = A · unfold(x, k)`.
    pub fn mode_product(&self, mode: usize, a: &Matrix) -> Result<Self, TensorError> {
        self.check_mode(mode)?;
        if a.ncols() != self.dims[mode] {
            return Err(TensorError::DimensionMismatch(format!(
                "matrix has {} columns, mode {mode} has size {}",
                a.ncols(),
                self.dims[mode]
            )));
        }
        if a.nrows() == 0 {
            return Err(TensorError::DimensionMismatch(
                "mode product with a zero-row matrix".into(),
            ));
        }
        let unf = self.unfold(mode)?;
        let mut dims = self.dims.clone();
        dims[mode] = a.nrows();
        Self::fold(&(a * unf), mode, &dims)
    }

    /// Applies one matrix per mode: `x ×₁ mats[0] ⋯ ×_K mats[K-1]`.
    pub fn multi_mode_product(&self, mats: &[&Matrix]) -> Result<Self, TensorError> {
        if mats.len() != self.order() {
            return Err(TensorError::DimensionMismatch(format!(
                "{} matrices supplied for an order-{} tensor",
                mats.len(),
                self.order()
            )));
        }
        let mut out = self.clone();
        for (k, a) in mats.iter().enumerate() {
            out = out.mode_product(k, a)?;
        }
        Ok(out)
    }

    /// Flat data in the canonical layout, as a column vector.
    pub fn vectorize(&self) -> crate::linalg::Vector {
        crate::linalg::Vector::from_column_slice(&self.data)
    }

    /// Combines the modes listed in `group` (0-based, strictly increasing)
    /// into a single new *last* mode of size `Π_{j∈group} I_j`; the combined
    /// index is lexicographic with the smallest grouped mode varying fastest.
    /// Remaining modes keep their relative order. Pure re-indexing.
    pub fn combine_modes(&self, group: &[usize]) -> Result<Self, TensorError> {
        check_group(group, self.order())?;
        let in_group = membership(group, self.order());

        let mut out_dims: Vec<usize> = (0..self.order())
            .filter(|j| !in_group[j])
            .map(|j| self.dims[j])
            .collect();
        out_dims.push(group.iter().map(|&j| self.dims[j]).product());

        // Each input mode contributes linearly to the output offset.
        let mut weights = vec![0usize; self.order()];
        let mut stride = 1usize;
        for j in (0..self.order()).filter(|j| !in_group[*j]) {
            weights[j] = stride;
            stride *= self.dims[j];
        }
        let kept_total = stride;
        let mut gstride = 1usize;
        for &j in group {
            weights[j] = kept_total * gstride;
            gstride *= self.dims[j];
        }

        Ok(self.remap(out_dims, &weights))
    }

    /// Mode permutation: mode `j` of the result is mode `perm[j]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, TensorError> {
        let k = self.order();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&j| j >= k || std::mem::replace(&mut seen[j], true))
        {
            return Err(TensorError::DimensionMismatch(format!(
                "{perm:?} is not a permutation of 0..{k}"
            )));
        }
        let out_dims: Vec<usize> = perm.iter().map(|&j| self.dims[j]).collect();
        let mut weights = vec![0usize; k];
        let mut stride = 1usize;
        for &j in perm {
            weights[j] = stride;
            stride *= self.dims[j];
        }
        Ok(self.remap(out_dims, &weights))
    }

    /// Re-organises the tensor along a [`Channel`]: the result has one mode
    /// per index group, mode `l` of size `Π_{j∈v_l} I_j`.
    ///
    /// Implemented as an explicit mode pre-permutation (groups reversed, so
    /// that earlier groups hold the larger permuted indices) followed by one
    /// [`combine_modes`](Self::combine_modes) pass per group. Invertible via
    /// [`unmap_modes`](Self::unmap_modes).
    pub fn map_modes(&self, channel: &Channel) -> Result<Self, TensorError> {
        channel.check_partitions(self.order())?;
        let perm: Vec<usize> = channel
            .groups()
            .iter()
            .rev()
            .flat_map(|g| g.iter().copied())
            .collect();
        let mut cur = self.permute(&perm)?;
        let mut remaining = self.order();
        for g in channel.groups() {
            let positions: Vec<usize> = (remaining - g.len()..remaining).collect();
            cur = cur.combine_modes(&positions)?;
            remaining -= g.len();
        }
        Ok(cur)
    }

    /// Inverse of [`map_modes`](Self::map_modes) given the original mode sizes.
    pub fn unmap_modes(
        &self,
        channel: &Channel,
        dims: &[usize],
    ) -> Result<Self, TensorError> {
        channel.check_partitions(dims.len())?;
        let expected: Vec<usize> = channel.mapped_dims(dims);
        if self.dims != expected {
            return Err(TensorError::DimensionMismatch(format!(
                "mapped dims {:?} inconsistent with original dims {dims:?} under the channel",
                self.dims
            )));
        }
        // Weight of original mode a ∈ v_l inside the mapped flat offset.
        let mut weights = vec![0usize; dims.len()];
        let mut mode_stride = 1usize;
        for g in channel.groups() {
            let mut gstride = 1usize;
            for &a in g {
                weights[a] = mode_stride * gstride;
                gstride *= dims[a];
            }
            mode_stride *= gstride;
        }
        let mut data = vec![0.0; self.len()];
        let mut odo = Odometer::new(dims);
        for slot in data.iter_mut() {
            *slot = self.data[odo.weighted(&weights)];
            odo.step();
        }
        Self::new(dims.to_vec(), data)
    }

    /// Gather `self` into a tensor of `out_dims` where input mode `j`
    /// contributes `index_j · weights[j]` to the output flat offset.
    fn remap(&self, out_dims: Vec<usize>, weights: &[usize]) -> Self {
        let mut data = vec![0.0; self.len()];
        let mut odo = Odometer::new(&self.dims);
        for v in &self.data {
            data[odo.weighted(weights)] = *v;
            odo.step();
        }
        Self {
            dims: out_dims,
            data,
        }
    }

    fn check_mode(&self, mode: usize) -> Result<(), TensorError> {
        if mode >= self.order() {
            Err(TensorError::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }
}

impl std::ops::Add<&DenseTensor> for &DenseTensor {
    type Output = DenseTensor;
    fn add(self, rhs: &DenseTensor) -> DenseTensor {
        assert_eq!(self.dims, rhs.dims, "tensor addition requires equal dims");
        DenseTensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub<&DenseTensor> for &DenseTensor {
    type Output = DenseTensor;
    fn sub(self, rhs: &DenseTensor) -> DenseTensor {
        assert_eq!(self.dims, rhs.dims, "tensor subtraction requires equal dims");
        DenseTensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Ordered partition of the mode set `{0, …, K-1}` into index groups.
///
/// Drives [`DenseTensor::map_modes`]: group `l` becomes mode `l` of the mapped
/// tensor. Within each group the indices must strictly increase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    groups: Vec<Vec<usize>>,
}

impl Channel {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self, TensorError> {
        if groups.is_empty() {
            return Err(TensorError::InvalidChannel("no index groups".into()));
        }
        for g in &groups {
            if g.is_empty() {
                return Err(TensorError::InvalidChannel("empty index group".into()));
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TensorError::InvalidChannel(format!(
                    "group {g:?} is not strictly increasing"
                )));
            }
        }
        let ch = Self { groups };
        // Disjointness holds whenever the union size matches the index count.
        let mut all: Vec<usize> = ch.groups.iter().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != ch.groups.iter().map(Vec::len).sum::<usize>() {
            return Err(TensorError::InvalidChannel(
                "index groups are not pairwise disjoint".into(),
            ));
        }
        Ok(ch)
    }

    /// The identity channel `{{0}, {1}, …, {K-1}}`.
    pub fn identity(order: usize) -> Self {
        Self {
            groups: (0..order).map(|j| vec![j]).collect(),
        }
    }

    /// Single-group channel `{{0, …, K-1}}`; mapping along it vectorises.
    pub fn full(order: usize) -> Self {
        Self {
            groups: vec![(0..order).collect()],
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Mode sizes of the mapped tensor for original `dims`.
    pub fn mapped_dims(&self, dims: &[usize]) -> Vec<usize> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&j| dims[j]).product())
            .collect()
    }

    /// Errors unless the groups partition `{0, …, order-1}` exactly.
    pub fn check_partitions(&self, order: usize) -> Result<(), TensorError> {
        let mut seen = vec![false; order];
        for g in &self.groups {
            for &j in g {
                if j >= order || seen[j] {
                    return Err(TensorError::InvalidChannel(format!(
                        "groups do not partition 0..{order}"
                    )));
                }
                seen[j] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(TensorError::InvalidChannel(format!(
                "groups do not cover 0..{order}"
            )))
        }
    }
}

/// Kronecker product over a list of matrices computed in descending index
/// order: `kron_descending([A_1, …, A_K]) = A_K ⊗ ⋯ ⊗ A_1`.
///
/// The empty list returns the 1×1 identity, matching the convention that a
/// product over an empty index set is the scalar 1.
pub fn kron_descending(mats: &[&Matrix]) -> Matrix {
    let mut acc = Matrix::from_element(1, 1, 1.0);
    for m in mats.iter().rev() {
        acc = acc.kronecker(m);
    }
    acc
}

/// Flat offset of a 0-based multi-index in the canonical layout.
pub fn encode_index(dims: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), index.len());
    let mut offset = 0;
    let mut stride = 1;
    for (i, d) in index.iter().zip(dims) {
        debug_assert!(i < d);
        offset += i * stride;
        stride *= d;
    }
    offset
}

/// Multi-index of a flat offset in the canonical layout.
pub fn decode_offset(dims: &[usize], mut offset: usize) -> Vec<usize> {
    let mut index = Vec::with_capacity(dims.len());
    for &d in dims {
        index.push(offset % d);
        offset /= d;
    }
    index
}

fn check_group(group: &[usize], order: usize) -> Result<(), TensorError> {
    if group.is_empty() {
        return Err(TensorError::InvalidChannel("empty index group".into()));
    }
    if group.windows(2).any(|w| w[0] >= w[1]) || *group.last().unwrap() >= order {
        return Err(TensorError::InvalidChannel(format!(
            "group {group:?} is not a strictly increasing subset of 0..{order}"
        )));
    }
    Ok(())
}

fn membership(group: &[usize], order: usize) -> Vec<bool> {
    let mut m = vec![false; order];
    for &j in group {
        m[j] = true;
    }
    m
}

/// Counts through all multi-indices of `dims` in canonical (first mode
/// fastest) order while tracking an arbitrary weighted offset.
struct Odometer<'a> {
    dims: &'a [usize],
    index: Vec<usize>,
}

impl<'a> Odometer<'a> {
    fn new(dims: &'a [usize]) -> Self {
        Self {
            dims,
            index: vec![0; dims.len()],
        }
    }

    fn weighted(&self, weights: &[usize]) -> usize {
        self.index
            .iter()
            .zip(weights)
            .map(|(i, w)| i * w)
            .sum()
    }

    fn step(&mut self) {
        for (i, d) in self.index.iter_mut().zip(self.dims) {
            *i += 1;
            if *i < *d {
                return;
            }
            *i = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_222() -> DenseTensor {
        // x_{i,j,l} = 100 i + 10 j + l with 1-based (i, j, l).
        let mut data = vec![0.0; 8];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    data[encode_index(&[2, 2, 2], &[i, j, l])] =
                        (100 * (i + 1) + 10 * (j + 1) + (l + 1)) as f64;
                }
            }
        }
        DenseTensor::new(vec![2, 2, 2], data).unwrap()
    }

    #[test]
    fn order_one_unfold_is_the_vector() {
        let v = DenseTensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let m = v.unfold(0).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 1));
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn matrix_unfold_is_the_matrix_itself() {
        // dims (2,2) data (a11, a21, a12, a22) column-major
        let x = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = x.unfold(0).unwrap();
        assert_eq!(m, Matrix::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn unfold_mode2_hand_enumeration() {
        // Frozen by enumerating all 8 entries of the flat layout by hand.
        let x = tensor_222();
        let m = x.unfold(1).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 4));
        let row1: Vec<f64> = (0..4).map(|c| m[(0, c)]).collect();
        let row2: Vec<f64> = (0..4).map(|c| m[(1, c)]).collect();
        assert_eq!(row1, vec![111.0, 211.0, 112.0, 212.0]);
        assert_eq!(row2, vec![121.0, 221.0, 122.0, 222.0]);
    }

    #[test]
    fn fold_inverts_unfold_exactly() {
        let x = tensor_222();
        for k in 0..3 {
            let back = DenseTensor::fold(&x.unfold(k).unwrap(), k, x.dims()).unwrap();
            assert_eq!(back, x);
        }
        let scalar = DenseTensor::fold(
            &Matrix::from_element(1, 1, 5.0),
            0,
            &[1, 1],
        )
        .unwrap();
        assert_eq!(scalar.data(), &[5.0]);
    }

    #[test]
    fn mode_product_identity_and_vector_case() {
        let x = tensor_222();
        let id = Matrix::identity(2, 2);
        assert_eq!(x.mode_product(1, &id).unwrap(), x);

        let v = DenseTensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let out = v.mode_product(0, &a).unwrap();
        assert_eq!(out.dims(), &[1]);
        assert_eq!(out.data(), &[3.0]);
    }

    #[test]
    fn mode_product_matches_direct_matrix_product() {
        // x ×₂ A for a matrix x equals x · Aᵀ.
        let x = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let out = x.mode_product(1, &a).unwrap();
        let xm = x.unfold(0).unwrap();
        let expect = &xm * a.transpose();
        assert_eq!(out.unfold(0).unwrap(), expect);
    }

    #[test]
    fn mode_product_shape_errors() {
        let x = tensor_222();
        let a = Matrix::zeros(2, 3);
        assert!(matches!(
            x.mode_product(0, &a),
            Err(TensorError::DimensionMismatch(_))
        ));
        assert!(matches!(
            x.unfold(3),
            Err(TensorError::ModeOutOfRange { mode: 3, order: 3 })
        ));
    }

    #[test]
    fn kron_descending_conventions() {
        let empty = kron_descending(&[]);
        assert_eq!(empty, Matrix::from_element(1, 1, 1.0));

        let a = Matrix::from_element(1, 1, 2.0);
        assert_eq!(kron_descending(&[&a]), a);

        let b = Matrix::from_element(1, 1, 3.0);
        assert_eq!(kron_descending(&[&a, &b]), Matrix::from_element(1, 1, 6.0));

        // Orientation: for non-square blocks the descending order matters.
        let a = Matrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = Matrix::from_row_slice(2, 1, &[1.0, 10.0]);
        let k = kron_descending(&[&a, &b]);
        assert_eq!(k, b.kronecker(&a));
    }

    #[test]
    fn vectorize_is_flat_data() {
        let x = tensor_222();
        assert_eq!(x.vectorize().as_slice(), x.data());
    }

    #[test]
    fn combine_modes_cases() {
        let x = DenseTensor::new(vec![2, 3], (0..6).map(|v| v as f64).collect()).unwrap();
        // Full combine = vectorise.
        let v = x.combine_modes(&[0, 1]).unwrap();
        assert_eq!(v.dims(), &[6]);
        assert_eq!(v.data(), x.data());

        // Singleton group moves the mode to the last position.
        let y = x.combine_modes(&[0]).unwrap();
        assert_eq!(y.dims(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(y.get(&[j, i]), x.get(&[i, j]));
            }
        }
    }

    #[test]
    fn map_modes_identity_channel_is_identity() {
        let x = tensor_222();
        let mapped = x.map_modes(&Channel::identity(3)).unwrap();
        assert_eq!(mapped, x);
    }

    #[test]
    fn map_modes_full_channel_vectorises() {
        let x = tensor_222();
        let mapped = x.map_modes(&Channel::full(3)).unwrap();
        assert_eq!(mapped.dims(), &[8]);
        assert_eq!(mapped.data(), x.data());
    }

    #[test]
    fn map_modes_hand_enumeration() {
        // (2,2,2) with V = {{1,2},{3}} (1-based): 4×2 result, combined index
        // has mode 1 fastest. Expected entries enumerated by hand.
        let x = tensor_222();
        let ch = Channel::new(vec![vec![0, 1], vec![2]]).unwrap();
        let y = x.map_modes(&ch).unwrap();
        assert_eq!(y.dims(), &[4, 2]);
        let expected = [
            [111.0, 112.0],
            [211.0, 212.0],
            [121.0, 122.0],
            [221.0, 222.0],
        ];
        for c in 0..4 {
            for l in 0..2 {
                assert_eq!(y.get(&[c, l]), expected[c][l]);
            }
        }
        // And back.
        let back = y.unmap_modes(&ch, x.dims()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn map_reversed_singletons_reverse_the_modes() {
        let x = DenseTensor::new(vec![2, 3], (0..6).map(|v| v as f64).collect()).unwrap();
        let ch = Channel::new(vec![vec![1], vec![0]]).unwrap();
        let y = x.map_modes(&ch).unwrap();
        assert_eq!(y.dims(), &[3, 2]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(y.get(&[j, i]), x.get(&[i, j]));
            }
        }
    }

    #[test]
    fn channel_validation() {
        assert!(Channel::new(vec![]).is_err());
        assert!(Channel::new(vec![vec![0, 0]]).is_err());
        assert!(Channel::new(vec![vec![1, 0]]).is_err());
        assert!(Channel::new(vec![vec![0], vec![0]]).is_err());
        let ch = Channel::new(vec![vec![0], vec![1]]).unwrap();
        assert!(ch.check_partitions(2).is_ok());
        assert!(ch.check_partitions(3).is_err());
        let x = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        assert!(matches!(
            x.map_modes(&ch),
            Err(TensorError::InvalidChannel(_))
        ));
    }

    #[test]
    fn unmap_rejects_inconsistent_dims() {
        let x = tensor_222();
        let ch = Channel::new(vec![vec![0, 1], vec![2]]).unwrap();
        let y = x.map_modes(&ch).unwrap();
        assert!(y.unmap_modes(&ch, &[2, 2, 3]).is_err());
    }

    #[test]
    fn encode_decode_roundtrip() {
        let dims = [3, 2, 4];
        for f in 0..24 {
            assert_eq!(encode_index(&dims, &decode_offset(&dims, f)), f);
        }
    }
}
