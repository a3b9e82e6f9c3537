//! Dense complex linear algebra with explicit multi-subsystem bookkeeping.
//!
//! Conventions fixed here and relied on by every other module:
//!
//! * Matrices are row-major, entries `Complex64`.
//! * Composite indices are big-endian: for factors `(d0, d1, ...)` the flat
//!   index of `(i0, i1, ...)` is `i0·d1·d2·… + i1·d2·… + …`, matching [`kron`]
//!   (the first factor of a Kronecker product is the most significant).
//! * [`vectorize`] maps a `d_out × d_in` operator `K` to the column vector
//!   with entry `K[m, n]` at flat index `n·d_out + m`: the *input* index is
//!   the first (most significant) tensor factor of the doubled space.

use num_complex::Complex64;
use std::fmt;

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = Complex64;

pub const ZERO: C64 = Complex64::new(0.0, 0.0);
pub const ONE: C64 = Complex64::new(1.0, 0.0);
pub const I_UNIT: C64 = Complex64::new(0.0, 1.0);

/// Dense complex matrix, row-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(8) {
                let z = self.get(r, c);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting size mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Dimension("matrix size overflows".into()))?;
        if data.len() != len {
            return Err(Error::Dimension(format!(
                "expected {}x{}={} entries, got {}",
                rows,
                cols,
                len,
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn col_vec(entries: &[C64]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    /// Computational basis column vector `|i⟩` of dimension `d`.
    pub fn basis_vec(d: usize, i: usize) -> Self {
        let mut v = Self::zeros(d, 1);
        v.set(i, 0, ONE);
        v
    }

    /// Matrix unit `|i⟩⟨j|` of side `d`.
    pub fn matrix_unit(d: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(d, d);
        m.set(i, j, ONE);
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} by {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                let row_out = r * other.cols;
                let row_b = k * other.cols;
                for c in 0..other.cols {
                    out.data[row_out + c] += a * other.data[row_b + c];
                }
            }
        }
        out
    }

    /// `self^n` for square matrices by repeated squaring.
    pub fn pow(&self, n: usize) -> Self {
        assert!(self.is_square());
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base);
            }
            base = base.matmul(&base);
            k >>= 1;
        }
        result
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Hilbert-Schmidt inner product `Tr(self† other)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.max_abs_diff(other) <= tol
    }

    /// Entrywise deviation from Hermiticity, `max |m - m†|`.
    pub fn hermiticity_residual(&self) -> f64 {
        assert!(self.is_square());
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Entrywise deviation from unitarity, `max |u†u - I|`.
    pub fn unitarity_residual(&self) -> f64 {
        let p = self.dagger().matmul(self);
        p.max_abs_diff(&Self::identity(p.rows()))
    }

    /// Column `c` as a new column vector.
    pub fn column(&self, c: usize) -> Self {
        Self::from_fn(self.rows, 1, |r, _| self.get(r, c))
    }
}

/// Ordered list of tensor-factor dimensions annotating a square matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemShape {
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(
                "subsystem dims must be positive and non-empty".into(),
            ));
        }
        let mut side: usize = 1;
        for &d in &dims {
            side = side
                .checked_mul(d)
                .ok_or_else(|| Error::Dimension("subsystem product overflows".into()))?;
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn side(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn check_matches(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.side() {
            return Err(Error::Dimension(format!(
                "shape {:?} (side {}) does not match {}x{} matrix",
                self.dims,
                self.side(),
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn decompose(mut idx: usize, dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; dims.len()];
    for i in 0..dims.len() {
        out[i] = idx / strides[i];
        idx %= strides[i];
    }
    out
}

/// Kronecker product, first factor most significant.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ra in 0..a.rows() {
        for ca in 0..a.cols() {
            let x = a.get(ra, ca);
            if x == ZERO {
                continue;
            }
            for rb in 0..b.rows() {
                for cb in 0..b.cols() {
                    out.set(ra * b.rows() + rb, ca * b.cols() + cb, x * b.get(rb, cb));
                }
            }
        }
    }
    out
}

pub fn kron_all(mats: &[&ComplexMatrix]) -> ComplexMatrix {
    assert!(!mats.is_empty());
    let mut out = mats[0].clone();
    for m in &mats[1..] {
        out = kron(&out, m);
    }
    out
}

/// Trace over every factor not listed in `keep`; kept factors stay in their
/// original relative order.
pub fn partial_trace(
    m: &ComplexMatrix,
    shape: &SubsystemShape,
    keep: &[usize],
) -> Result<ComplexMatrix> {
    shape.check_matches(m)?;
    let dims = shape.dims();
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension("keep index out of range".into()));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let st = strides(dims);
    let keep_dims: Vec<usize> = keep.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let keep_side: usize = keep_dims.iter().product();
    let traced_side: usize = traced_dims.iter().product();
    let keep_st = strides(&keep_dims);
    let traced_st = strides(&traced_dims);

    let mut out = ComplexMatrix::zeros(keep_side, keep_side);
    for kr in 0..keep_side {
        let kr_digits = decompose(kr, &keep_dims, &keep_st);
        let base_r: usize = kr_digits
            .iter()
            .zip(&keep)
            .map(|(&d, &f)| d * st[f])
            .sum();
        for kc in 0..keep_side {
            let kc_digits = decompose(kc, &keep_dims, &keep_st);
            let base_c: usize = kc_digits
                .iter()
                .zip(&keep)
                .map(|(&d, &f)| d * st[f])
                .sum();
            let mut acc = ZERO;
            for t in 0..traced_side {
                let t_digits = decompose(t, &traced_dims, &traced_st);
                let off: usize = t_digits
                    .iter()
                    .zip(&traced)
                    .map(|(&d, &f)| d * st[f])
                    .sum();
                acc += m.get(base_r + off, base_c + off);
            }
            out.set(kr, kc, acc);
        }
    }
    Ok(out)
}

/// Transpose on a single tensor factor.
pub fn partial_transpose(
    m: &ComplexMatrix,
    shape: &SubsystemShape,
    factor: usize,
) -> Result<ComplexMatrix> {
    shape.check_matches(m)?;
    let dims = shape.dims();
    if factor >= dims.len() {
        return Err(Error::Dimension("factor index out of range".into()));
    }
    let st = strides(dims);
    let side = shape.side();
    let d = dims[factor];
    let stride = st[factor];
    let mut out = ComplexMatrix::zeros(side, side);
    for r in 0..side {
        let rf = (r / stride) % d;
        let r_base = r - rf * stride;
        for c in 0..side {
            let cf = (c / stride) % d;
            let c_base = c - cf * stride;
            // swap the factor digits between row and column
            out.set(r_base + cf * stride, c_base + rf * stride, m.get(r, c));
        }
    }
    Ok(out)
}

/// Reorders tensor factors: result factor `j` is source factor `perm[j]`.
pub fn permute_factors(
    m: &ComplexMatrix,
    shape: &SubsystemShape,
    perm: &[usize],
) -> Result<(ComplexMatrix, SubsystemShape)> {
    shape.check_matches(m)?;
    let dims = shape.dims();
    let n = dims.len();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::Dimension("invalid factor permutation".into()));
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_shape = SubsystemShape::new(new_dims.clone())?;
    let st_old = strides(dims);
    let st_new = strides(&new_dims);
    let side = shape.side();

    // map each source flat index to its destination flat index once
    let mut dest = vec![0usize; side];
    for (idx, d) in dest.iter_mut().enumerate() {
        let digits = decompose(idx, dims, &st_old);
        *d = perm
            .iter()
            .enumerate()
            .map(|(j, &p)| digits[p] * st_new[j])
            .sum();
    }
    let mut out = ComplexMatrix::zeros(side, side);
    for r in 0..side {
        for c in 0..side {
            out.set(dest[r], dest[c], m.get(r, c));
        }
    }
    Ok((out, new_shape))
}

/// `|K⟩⟩`: column vector with entry `K[m, n]` at flat index `n·d_out + m`
/// (input index in the first, most significant, factor).
pub fn vectorize(k: &ComplexMatrix) -> ComplexMatrix {
    let (d_out, d_in) = (k.rows(), k.cols());
    let mut v = ComplexMatrix::zeros(d_in * d_out, 1);
    for m in 0..d_out {
        for n in 0..d_in {
            v.set(n * d_out + m, 0, k.get(m, n));
        }
    }
    v
}

/// Exact inverse of [`vectorize`].
pub fn devectorize(v: &ComplexMatrix, d_in: usize, d_out: usize) -> Result<ComplexMatrix> {
    if v.cols() != 1 || v.rows() != d_in * d_out {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot devectorize to {}x{}",
            v.rows(),
            d_out,
            d_in
        )));
    }
    Ok(ComplexMatrix::from_fn(d_out, d_in, |m, n| {
        v.get(n * d_out + m, 0)
    }))
}

/// Unnormalized maximally entangled vector `|I⟩⟩ = Σ |n⟩|n⟩` of a `d`-level
/// system, equal to `vectorize(I_d)`.
pub fn max_entangled(d: usize) -> ComplexMatrix {
    vectorize(&ComplexMatrix::identity(d))
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Columns are the matching orthonormal eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianSpectrum {
    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for c in 0..n {
            for r in 0..n {
                let z = scaled.get(r, c) * self.eigenvalues[c];
                scaled.set(r, c, z);
            }
        }
        scaled.matmul(&v.dagger())
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Rejects inputs whose Hermiticity residual exceeds the crate tolerance;
/// the residual asymmetry is removed before iterating.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianSpectrum> {
    if !m.is_square() {
        return Err(Error::Dimension("hermitian_eig needs a square matrix".into()));
    }
    let residual = m.hermiticity_residual();
    if residual > tol::HERM_TOL {
        return Err(Error::NonHermitian { residual });
    }
    let n = m.rows();
    // symmetrize away the residual
    let mut a = ComplexMatrix::from_fn(n, n, |r, c| (m.get(r, c) + m.get(c, r).conj()) * 0.5);
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(1e-300);
    let stop = 1e-15 * scale;

    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a.get(p, q);
                let absg = g.norm();
                if absg <= stop * 1e-2 {
                    continue;
                }
                let phase = g / absg; // e^{iφ}
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * absg);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let sp = phase.conj() * s; // s·e^{-iφ}

                // A ← A·U with U columns u_p=(c, -s e^{-iφ}), u_q=(s, c e^{-iφ})
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * c - akq * sp);
                    a.set(k, q, akp * s + akq * (phase.conj() * c));
                }
                // A ← U†·A
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * c - aqk * (phase * s));
                    a.set(q, k, apk * s + aqk * (phase * c));
                }
                // V ← V·U
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c - vkq * sp);
                    v.set(k, q, vkp * s + vkq * (phase.conj() * c));
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        // deterministic phase: first significant component made real positive
        let mut phase = ONE;
        for r in 0..n {
            let z = v.get(r, old_c);
            if z.norm() > 1e-8 {
                phase = z.conj() / z.norm();
                break;
            }
        }
        for r in 0..n {
            eigenvectors.set(r, new_c, v.get(r, old_c) * phase);
        }
    }
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Schatten p-norm from the singular values, `(Σ σᵢᵖ)^{1/p}`.
///
/// `p = f64::INFINITY` selects the largest singular value. Singular values
/// are obtained from the Hermitian dilation `[[0, M], [M†, 0]]`, whose
/// spectrum is `±σᵢ` padded with zeros.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::SchattenOrder(p));
    }
    let (r, c) = (m.rows(), m.cols());
    let n = r + c;
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..r {
        for j in 0..c {
            h.set(i, r + j, m.get(i, j));
            h.set(r + j, i, m.get(i, j).conj());
        }
    }
    let spec = hermitian_eig(&h)?;
    if p.is_infinite() {
        return Ok(spec.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs())));
    }
    // each singular value appears as ±σ, so halve the symmetric power sum
    let sum: f64 = spec.eigenvalues.iter().map(|&l| l.abs().powf(p)).sum();
    Ok((sum / 2.0).powf(1.0 / p))
}

/// `½ ‖a - b‖₁` for Hermitian operators.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let spec = hermitian_eig(&a.sub(b))?;
    Ok(0.5 * spec.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Unitary `e^{-i h t}` of a Hermitian generator.
pub fn expm_generator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let spec = hermitian_eig(h)?;
    let n = h.rows();
    let v = &spec.eigenvectors;
    let mut scaled = v.clone();
    for c in 0..n {
        let ph = C64::from_polar(1.0, -spec.eigenvalues[c] * t);
        for r in 0..n {
            let z = scaled.get(r, c) * ph;
            scaled.set(r, c, z);
        }
    }
    Ok(scaled.matmul(&v.dagger()))
}

/// Spectral decomposition of a unitary.
///
/// Returns unit-modulus eigenvalues and an orthonormal eigenvector matrix.
/// Built from the commuting Hermitian pair `(U+U†)/2`, `(U-U†)/2i`, so no
/// general non-symmetric eigensolver is needed.
pub fn unitary_eig(u: &ComplexMatrix) -> Result<(Vec<C64>, ComplexMatrix)> {
    let residual = u.unitarity_residual();
    if residual > tol::UNITARY_TOL {
        return Err(Error::NonUnitary { residual });
    }
    let n = u.rows();
    let ud = u.dagger();
    let h1 = u.add(&ud).scale(C64::new(0.5, 0.0));
    let h2 = u.sub(&ud).scale(C64::new(0.0, -0.5));
    let s1 = hermitian_eig(&h1)?;

    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut col = 0usize;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && (s1.eigenvalues[end] - s1.eigenvalues[start]).abs() <= tol::CLUSTER_TOL {
            end += 1;
        }
        let k = end - start;
        // refine the cluster basis with the second commuting Hermitian part
        let basis = ComplexMatrix::from_fn(n, k, |r, c| s1.eigenvectors.get(r, start + c));
        let compressed = basis.dagger().matmul(&h2).matmul(&basis);
        let s2 = hermitian_eig(&compressed)?;
        let refined = basis.matmul(&s2.eigenvectors);
        for c in 0..k {
            for r in 0..n {
                vectors.set(r, col + c, refined.get(r, c));
            }
        }
        col += k;
        start = end;
    }

    let mut values = Vec::with_capacity(n);
    let mut worst: f64 = 0.0;
    for c in 0..n {
        let v = vectors.column(c);
        let uv = u.matmul(&v);
        let mut mu = v.hs_inner(&uv);
        mu /= mu.norm();
        worst = worst.max(uv.sub(&v.scale(mu)).frobenius_norm());
        values.push(mu);
    }
    if worst > 1e-8 {
        return Err(Error::NonUnitary { residual: worst });
    }
    Ok((values, vectors))
}

fn principal_phase(z: C64) -> f64 {
    let theta = z.im.atan2(z.re);
    // keep the branch cut convention (-π, π]
    if theta <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        theta
    }
}

/// Principal n-th root of a unitary: eigenphases mapped to `(-π, π]` and
/// divided by `n`. Any orthonormal eigenbasis of a degenerate eigenvalue
/// yields the same root, since the root is a function of the operator.
pub fn unitary_root(u: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Parameter("root order must be positive".into()));
    }
    let (values, vectors) = unitary_eig(u)?;
    let phases: Vec<f64> = values.iter().map(|&z| principal_phase(z)).collect();
    Ok(rebuild_unitary(&vectors, &phases, n))
}

/// n-th root of `u ∈ SU(d)` chosen inside `SU(d)`.
///
/// The principal root can pick up a determinant `e^{2πik/n}`; this variant
/// shifts single eigenphase branches by `2π` until the root has determinant
/// one, which leaves `root^n = u` untouched.
pub fn special_unitary_root(u: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::Parameter("root order must be positive".into()));
    }
    let (values, vectors) = unitary_eig(u)?;
    let det: C64 = values.iter().product();
    if (det - ONE).norm() > 1e-8 {
        return Err(Error::Parameter(format!(
            "matrix is not special unitary (det = {:.6}+{:.6}i)",
            det.re, det.im
        )));
    }
    let mut phases: Vec<f64> = values.iter().map(|&z| principal_phase(z)).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let total: f64 = phases.iter().sum();
    let mut m = (total / two_pi).round() as i64;
    while m > 0 {
        // shift the largest phase down one branch
        let j = phases
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        phases[j] -= two_pi;
        m -= 1;
    }
    while m < 0 {
        let j = phases
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        phases[j] += two_pi;
        m += 1;
    }
    Ok(rebuild_unitary(&vectors, &phases, n))
}

fn rebuild_unitary(vectors: &ComplexMatrix, phases: &[f64], n: usize) -> ComplexMatrix {
    let dim = vectors.rows();
    let mut scaled = vectors.clone();
    for c in 0..dim {
        let ph = C64::from_polar(1.0, phases[c] / n as f64);
        for r in 0..dim {
            let z = scaled.get(r, c) * ph;
            scaled.set(r, c, z);
        }
    }
    scaled.matmul(&vectors.dagger())
}

/// The single-qubit Pauli matrices `(I, X, Y, Z)`.
pub fn paulis() -> [ComplexMatrix; 4] {
    let i2 = ComplexMatrix::identity(2);
    let x = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap();
    let y = ComplexMatrix::new(2, 2, vec![ZERO, -I_UNIT, I_UNIT, ZERO]).unwrap();
    let z = ComplexMatrix::new(2, 2, vec![ONE, ZERO, ZERO, -ONE]).unwrap();
    [i2, x, y, z]
}
