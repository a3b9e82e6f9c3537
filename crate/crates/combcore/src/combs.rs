//! N-slot quantum combs.
//!
//! A comb transforming `N` input channels `A_k: L(H_{2k-1}) → L(H_{2k})`
//! into a channel `L(H_0) → L(H_{2N+1})` is stored as a Choi operator on
//! `H_0 ⊗ H_1 ⊗ … ⊗ H_{2N+1}` with factors in ascending index order, or as
//! Kraus operators `S_i: H_1 ⊗ … ⊗ H_{2N} → H_0 ⊗ H_{2N+1}`.
//!
//! Validity is the positivity of the Choi operator together with the
//! recursive normalization chain
//! `Tr_{2k+1} J^{(2k+1)} = Tr_{2k,2k+1} J^{(2k+1)} ⊗ I_{2k}/d_{2k}` for
//! `k = N … 0`, where `J^{(2k+1)} = Tr_{2k+2…2N+1} J`. The chain alone is
//! scale invariant, so the total trace `Tr J = Π_k d_{2k}` is checked as
//! well; the Kraus-side conditions pin the same normalization.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_eig, kron, partial_trace, permute_factors, ComplexMatrix, SubsystemShape, C64, ONE,
    ZERO,
};
use crate::tol;

/// Dimension list `[d_0, …, d_{2N+1}]` of an N-slot comb.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombShape {
    dims: Vec<usize>,
}

impl CombShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 4 || dims.len() % 2 != 0 {
            return Err(Error::CombShape(format!(
                "a comb needs an even number ≥ 4 of spaces, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::CombShape("dimensions must be positive".into()));
        }
        Ok(Self { dims })
    }

    /// Uniform shape: N slots, every space of dimension `d`.
    pub fn uniform(slots: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; 2 * slots + 2])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn slots(&self) -> usize {
        self.dims.len() / 2 - 1
    }

    pub fn side(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn subsystem_shape(&self) -> SubsystemShape {
        SubsystemShape::new(self.dims.clone()).expect("positive dims")
    }

    /// `Π d_{2k}`: the trace of a deterministic comb.
    pub fn even_product(&self) -> usize {
        self.dims.iter().step_by(2).product()
    }

    /// Dimension of the slot input space `⊗ H_{2k-1}`.
    pub fn slot_input_side(&self) -> usize {
        (0..self.slots()).map(|k| self.dims[2 * k + 1]).product()
    }

    /// Dimension of the slot output space `⊗ H_{2k}` over slots.
    pub fn slot_output_side(&self) -> usize {
        (0..self.slots()).map(|k| self.dims[2 * k + 2]).product()
    }

    fn kraus_rows(&self) -> usize {
        self.dims[0] * self.dims[self.dims.len() - 1]
    }

    fn kraus_cols(&self) -> usize {
        self.dims[1..self.dims.len() - 1].iter().product()
    }
}

/// Comb as a Choi operator (ascending factor order).
#[derive(Clone, Debug)]
pub struct CombChoi {
    mat: ComplexMatrix,
    shape: CombShape,
}

impl CombChoi {
    pub fn new(mat: ComplexMatrix, shape: CombShape) -> Result<Self> {
        if !mat.is_square() || mat.rows() != shape.side() {
            return Err(Error::CombShape(format!(
                "matrix side {} does not match shape {:?}",
                mat.rows(),
                shape.dims()
            )));
        }
        Ok(Self { mat, shape })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn shape(&self) -> &CombShape {
        &self.shape
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.shape == other.shape && self.mat.approx_eq(&other.mat, tol)
    }
}

/// Comb as Kraus operators `S_i: ⊗H_{1..2N} → H_0 ⊗ H_{2N+1}`.
#[derive(Clone, Debug)]
pub struct CombKraus {
    ops: Vec<ComplexMatrix>,
    shape: CombShape,
}

impl CombKraus {
    pub fn new(ops: Vec<ComplexMatrix>, shape: CombShape) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Parameter("empty comb Kraus set".into()));
        }
        let (rows, cols) = (shape.kraus_rows(), shape.kraus_cols());
        if ops.iter().any(|m| m.rows() != rows || m.cols() != cols) {
            return Err(Error::CombShape(format!(
                "comb Kraus operators must be {rows}x{cols}"
            )));
        }
        Ok(Self { ops, shape })
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn shape(&self) -> &CombShape {
        &self.shape
    }

    /// Induced Choi operator `Σ |Sᵢ⟩⟩⟨⟨Sᵢ|` in ascending factor order.
    pub fn to_choi(&self) -> CombChoi {
        let side = self.shape.side();
        let mut j = ComplexMatrix::zeros(side, side);
        for op in &self.ops {
            let v = kraus_matrix_to_vector(op, &self.shape);
            for r in 0..side {
                let vr = v.get(r, 0);
                if vr == ZERO {
                    continue;
                }
                for c in 0..side {
                    let z = j.get(r, c) + vr * v.get(c, 0).conj();
                    j.set(r, c, z);
                }
            }
        }
        CombChoi {
            mat: j,
            shape: self.shape.clone(),
        }
    }
}

/// Permutation sending the vectorization order `[1, …, 2N, 0, 2N+1]` of a
/// comb Kraus operator to ascending factor order.
fn kraus_vec_perm(shape: &CombShape) -> (Vec<usize>, SubsystemShape) {
    let n2 = shape.dims.len();
    // source factor list: domain factors 1..=2N, then range factors (0, 2N+1)
    let mut src: Vec<usize> = (1..n2 - 1).collect();
    src.push(0);
    src.push(n2 - 1);
    let perm: Vec<usize> = (0..n2)
        .map(|j| src.iter().position(|&f| f == j).unwrap())
        .collect();
    let src_dims: Vec<usize> = src.iter().map(|&f| shape.dims[f]).collect();
    (perm, SubsystemShape::new(src_dims).unwrap())
}

/// Vectorizes a comb Kraus operator into ascending factor order.
pub fn kraus_matrix_to_vector(op: &ComplexMatrix, shape: &CombShape) -> ComplexMatrix {
    let v = crate::tensor::vectorize(op);
    let (perm, src_shape) = kraus_vec_perm(shape);
    // permute a vector by treating it as the diagonal pattern of indices
    let side = shape.side();
    let dims_src = src_shape.dims().to_vec();
    let mut strides_src = vec![1usize; dims_src.len()];
    for i in (0..dims_src.len() - 1).rev() {
        strides_src[i] = strides_src[i + 1] * dims_src[i + 1];
    }
    let dims_dst: Vec<usize> = perm.iter().map(|&p| dims_src[p]).collect();
    let mut strides_dst = vec![1usize; dims_dst.len()];
    for i in (0..dims_dst.len() - 1).rev() {
        strides_dst[i] = strides_dst[i + 1] * dims_dst[i + 1];
    }
    let mut out = ComplexMatrix::zeros(side, 1);
    for idx in 0..side {
        let mut rem = idx;
        let mut digits = vec![0usize; dims_src.len()];
        for (i, d) in digits.iter_mut().enumerate() {
            *d = rem / strides_src[i];
            rem %= strides_src[i];
        }
        let dst: usize = perm
            .iter()
            .enumerate()
            .map(|(j, &p)| digits[p] * strides_dst[j])
            .sum();
        out.set(dst, 0, v.get(idx, 0));
    }
    out
}

/// Inverse of [`kraus_matrix_to_vector`].
pub fn vector_to_kraus_matrix(v: &ComplexMatrix, shape: &CombShape) -> Result<ComplexMatrix> {
    if v.cols() != 1 || v.rows() != shape.side() {
        return Err(Error::CombShape("vector length mismatch".into()));
    }
    let n2 = shape.dims.len();
    let range: Vec<usize> = vec![0, n2 - 1];
    let domain: Vec<usize> = (1..n2 - 1).collect();
    Ok(vector_to_operator(v, shape, &range, &domain))
}

/// Reshapes an ascending-order comb vector into an operator with the listed
/// range factors as rows and domain factors as columns (big-endian in the
/// listed order).
pub fn vector_to_operator(
    v: &ComplexMatrix,
    shape: &CombShape,
    range: &[usize],
    domain: &[usize],
) -> ComplexMatrix {
    let dims = shape.dims();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len() - 1).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let rows: usize = range.iter().map(|&f| dims[f]).product();
    let cols: usize = domain.iter().map(|&f| dims[f]).product();
    let mut out = ComplexMatrix::zeros(rows, cols);
    let range_dims: Vec<usize> = range.iter().map(|&f| dims[f]).collect();
    let domain_dims: Vec<usize> = domain.iter().map(|&f| dims[f]).collect();
    for r in 0..rows {
        let rd = digits(r, &range_dims);
        for c in 0..cols {
            let cd = digits(c, &domain_dims);
            let mut flat = 0usize;
            for (i, &f) in range.iter().enumerate() {
                flat += rd[i] * strides[f];
            }
            for (i, &f) in domain.iter().enumerate() {
                flat += cd[i] * strides[f];
            }
            out.set(r, c, v.get(flat, 0));
        }
    }
    out
}

fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; dims.len()];
    for i in (0..dims.len()).rev() {
        out[i] = idx % dims[i];
        idx /= dims[i];
    }
    out
}

/// The slot-flow matrix of a comb vector: rows are the odd spaces
/// `(H_1, H_3, …, H_{2N+1})`, columns the even spaces `(H_0, …, H_{2N})`.
/// This is the operator the circuit applies along each wire segment; for the
/// basis-randomization comb it reads literally `U ⊗ U†`.
pub fn flow_matrix(v: &ComplexMatrix, shape: &CombShape) -> ComplexMatrix {
    let n2 = shape.dims().len();
    let range: Vec<usize> = (0..n2).filter(|f| f % 2 == 1).collect();
    let domain: Vec<usize> = (0..n2).filter(|f| f % 2 == 0).collect();
    vector_to_operator(v, shape, &range, &domain)
}

/// Vector of the identity comb's single Kraus operator: 1 exactly where
/// `i_{2k} = i_{2k+1}` for every `k`.
pub fn identity_comb_vector(shape: &CombShape) -> Result<ComplexMatrix> {
    let dims = shape.dims();
    for k in 0..dims.len() / 2 {
        if dims[2 * k] != dims[2 * k + 1] {
            return Err(Error::CombShape(
                "identity comb needs d_{2k} = d_{2k+1}".into(),
            ));
        }
    }
    let side = shape.side();
    let mut v = ComplexMatrix::zeros(side, 1);
    for idx in 0..side {
        let dg = digits(idx, dims);
        if (0..dims.len() / 2).all(|k| dg[2 * k] == dg[2 * k + 1]) {
            v.set(idx, 0, ONE);
        }
    }
    Ok(v)
}

/// The identity comb: pipes `H_0 → H_1`, `H_2 → H_3`, …; applying it to
/// channels `A_1 … A_N` yields `A_N ∘ … ∘ A_1`.
pub fn identity_comb(shape: &CombShape) -> Result<CombChoi> {
    let v = identity_comb_vector(shape)?;
    let side = shape.side();
    let mut j = ComplexMatrix::zeros(side, side);
    for r in 0..side {
        let vr = v.get(r, 0);
        if vr == ZERO {
            continue;
        }
        for c in 0..side {
            let z = vr * v.get(c, 0).conj();
            j.set(r, c, z);
        }
    }
    CombChoi::new(j, shape.clone())
}

/// Validity report for a comb Choi operator.
#[derive(Clone, Debug)]
pub struct CombChoiReport {
    pub cp: bool,
    pub min_eigenvalue: f64,
    pub hermiticity_residual: f64,
    /// Normalization-chain residuals for `k = N, N-1, …, 0`.
    pub chain: Vec<f64>,
    /// `|Tr J - Π d_{2k}|`.
    pub trace_residual: f64,
}

impl CombChoiReport {
    pub fn valid(&self) -> bool {
        self.cp
            && self.trace_residual <= tol::COMB_TOL
            && self.chain.iter().all(|&r| r <= tol::COMB_TOL)
    }
}

/// Checks positivity and the recursive normalization chain.
pub fn check_comb_choi(j: &CombChoi) -> Result<CombChoiReport> {
    let dims = j.shape.dims();
    let n = j.shape.slots();
    let full = j.shape.subsystem_shape();
    let herm = j.mat.hermiticity_residual();
    let min_eigenvalue = if herm <= tol::HERM_TOL {
        hermitian_eig(&j.mat)?
            .eigenvalues
            .last()
            .copied()
            .unwrap_or(0.0)
    } else {
        f64::NEG_INFINITY
    };

    let mut chain = Vec::with_capacity(n + 1);
    for k in (0..=n).rev() {
        // J^{(2k+1)} = Tr_{2k+2..2N+1} J, on factors 0..=2k+1
        let keep: Vec<usize> = (0..=2 * k + 1).collect();
        let jk = partial_trace(&j.mat, &full, &keep)?;
        let sub_dims: Vec<usize> = dims[..=2 * k + 1].to_vec();
        let sub_shape = SubsystemShape::new(sub_dims.clone())?;
        let lhs_keep: Vec<usize> = (0..=2 * k).collect();
        let lhs = partial_trace(&jk, &sub_shape, &lhs_keep)?;
        let rhs_keep: Vec<usize> = (0..2 * k).collect();
        let core = partial_trace(&jk, &sub_shape, &rhs_keep)?;
        let d2k = dims[2 * k] as f64;
        let rhs = kron(&core, &ComplexMatrix::identity(dims[2 * k]))
            .scale(Complex64::new(1.0 / d2k, 0.0));
        chain.push(lhs.max_abs_diff(&rhs));
    }
    let expected_trace = j.shape.even_product() as f64;
    let trace_residual = (j.mat.trace().re - expected_trace).abs().max(j.mat.trace().im.abs());
    Ok(CombChoiReport {
        cp: herm <= tol::HERM_TOL && min_eigenvalue >= tol::PSD_FLOOR,
        min_eigenvalue,
        hermiticity_residual: herm,
        chain,
        trace_residual,
    })
}

/// Contracts a comb Choi operator with the Choi operators of its slot
/// inputs: `J_out = Tr_{1…2N}[J · (I_0 ⊗ (⊗_k J_k)ᵀ ⊗ I_{2N+1})]`.
pub fn link_apply(
    comb: &CombChoi,
    inputs: &[crate::channels::ChoiMatrix],
) -> Result<crate::channels::ChoiMatrix> {
    let dims = comb.shape.dims();
    let n = comb.shape.slots();
    if inputs.len() != n {
        return Err(Error::CombShape(format!(
            "comb has {} slots, got {} inputs",
            n,
            inputs.len()
        )));
    }
    for (k, input) in inputs.iter().enumerate() {
        if input.d_in() != dims[2 * k + 1] || input.d_out() != dims[2 * k + 2] {
            return Err(Error::CombShape(format!(
                "slot {} expects {}→{}, got {}→{}",
                k + 1,
                dims[2 * k + 1],
                dims[2 * k + 2],
                input.d_in(),
                input.d_out()
            )));
        }
    }
    let mut middle = inputs[0].matrix().clone();
    for input in &inputs[1..] {
        middle = kron(&middle, input.matrix());
    }
    let lifted = kron(
        &kron(&ComplexMatrix::identity(dims[0]), &middle.transpose()),
        &ComplexMatrix::identity(dims[dims.len() - 1]),
    );
    let full = comb.shape.subsystem_shape();
    let out = partial_trace(
        &comb.mat.matmul(&lifted),
        &full,
        &[0, dims.len() - 1],
    )?;
    crate::channels::ChoiMatrix::new(out, dims[0], dims[dims.len() - 1])
}

/// Contraction of one comb vector with slot unitaries: the vector on
/// `H_0 ⊗ H_{2N+1}` whose `(n, p)` entry is
/// `Σ (Π_k u_k[q_k, m_k]) · s[n, m_1, q_1, …, p]`.
pub fn contract_slots(
    v: &ComplexMatrix,
    shape: &CombShape,
    slot_ops: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    let dims = shape.dims();
    let n = shape.slots();
    if slot_ops.len() != n {
        return Err(Error::CombShape("one operator per slot required".into()));
    }
    for (k, u) in slot_ops.iter().enumerate() {
        if u.cols() != dims[2 * k + 1] || u.rows() != dims[2 * k + 2] {
            return Err(Error::CombShape(format!(
                "slot {} operator must be {}x{}",
                k + 1,
                dims[2 * k + 2],
                dims[2 * k + 1]
            )));
        }
    }
    let d0 = dims[0];
    let dl = dims[dims.len() - 1];
    let mut out = ComplexMatrix::zeros(d0 * dl, 1);
    let side = shape.side();
    for idx in 0..side {
        let z = v.get(idx, 0);
        if z == ZERO {
            continue;
        }
        let dg = digits(idx, dims);
        let mut weight = ONE;
        for (k, u) in slot_ops.iter().enumerate() {
            let m = dg[2 * k + 1];
            let q = dg[2 * k + 2];
            weight *= u.get(q, m);
            if weight == ZERO {
                break;
            }
        }
        if weight == ZERO {
            continue;
        }
        let target = dg[0] * dl + dg[dims.len() - 1];
        let acc = out.get(target, 0) + weight * z;
        out.set(target, 0, acc);
    }
    Ok(out)
}

/// A coherence operator for a comb: an element of the span of the comb's
/// Kraus operators, stored as an ascending-order vector.
#[derive(Clone, Debug)]
pub struct CoherenceOperatorS {
    vec: ComplexMatrix,
    shape: CombShape,
    beta: Vec<C64>,
    span_residual: f64,
}

impl CoherenceOperatorS {
    pub fn from_vector(comb: &CombChoi, vec: ComplexMatrix) -> Result<Self> {
        if vec.cols() != 1 || vec.rows() != comb.shape.side() {
            return Err(Error::CombShape("coherence vector length mismatch".into()));
        }
        let spec = hermitian_eig(comb.matrix())?;
        let mut beta = Vec::new();
        let mut approx = ComplexMatrix::zeros(vec.rows(), 1);
        for (i, &lambda) in spec.eigenvalues.iter().enumerate() {
            if lambda <= tol::EIG_DROP {
                continue;
            }
            let w = spec.eigenvectors.column(i);
            // S̃ᵢ vector = √λᵢ wᵢ ; βᵢ = ⟨S̃ᵢ, s⟩ / λᵢ
            let coeff = w.hs_inner(&vec) / Complex64::new(lambda.sqrt(), 0.0);
            approx = approx.add(&w.scale(coeff * lambda.sqrt()));
            beta.push(coeff);
        }
        let span_residual = vec.max_abs_diff(&approx);
        let norm_sq: f64 = beta.iter().map(|b| b.norm_sqr()).sum();
        if span_residual > tol::SPAN_TOL || norm_sq > 1.0 + tol::COH_NORM_SLACK {
            return Err(Error::InvalidCoherence {
                span_residual,
                norm_sq,
            });
        }
        Ok(Self {
            vec,
            shape: comb.shape.clone(),
            beta,
            span_residual,
        })
    }

    pub fn from_kraus_matrix(comb: &CombChoi, m: &ComplexMatrix) -> Result<Self> {
        let v = kraus_matrix_to_vector(m, comb.shape());
        Self::from_vector(comb, v)
    }

    pub fn vector(&self) -> &ComplexMatrix {
        &self.vec
    }

    pub fn shape(&self) -> &CombShape {
        &self.shape
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }

    pub fn span_residual(&self) -> f64 {
        self.span_residual
    }

    /// `Tr S†S`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.vec.hs_inner(&self.vec).re
    }

    /// The operator `⊗H_{1..2N} → H_0 ⊗ H_{2N+1}`.
    pub fn kraus_matrix(&self) -> ComplexMatrix {
        vector_to_kraus_matrix(&self.vec, &self.shape).expect("consistent shape")
    }

    /// The slot-flow matrix (odd spaces from even spaces).
    pub fn flow_matrix(&self) -> ComplexMatrix {
        flow_matrix(&self.vec, &self.shape)
    }
}

/// Controlled version of a comb: identity comb on `|0⟩`, the comb on `|1⟩`,
/// coherence block `|S_id⟩⟩⟨⟨S|`. Control factors are appended in front of
/// `H_0` and `H_{2N+1}`, so the result is again a comb with shape
/// `[2·d_0, d_1, …, d_{2N}, 2·d_{2N+1}]`.
///
/// The same construction works with any rank-one comb in place of the
/// identity comb (see [`controlled_comb_two`] with a single-Kraus `S`
/// branch); only the identity-comb special case is exposed here.
pub fn controlled_comb(comb: &CombChoi, s: &CoherenceOperatorS) -> Result<CombChoi> {
    if s.shape != comb.shape {
        return Err(Error::CombShape("coherence operator shape mismatch".into()));
    }
    let id = identity_comb(comb.shape())?;
    let id_vec = identity_comb_vector(comb.shape())?;
    controlled_comb_two_vectors(&id, &id_vec, comb, &s.vec)
}

/// Controlled switch between two combs of equal shape:
/// `|00⟩⟨00|⊗J_S + |11⟩⟨11|⊗J_T + |00⟩⟨11|⊗|S⟩⟩⟨⟨T| + h.c.`
pub fn controlled_comb_two(
    comb_s: &CombChoi,
    s: &CoherenceOperatorS,
    comb_t: &CombChoi,
    t: &CoherenceOperatorS,
) -> Result<CombChoi> {
    if comb_s.shape != comb_t.shape || s.shape != comb_s.shape || t.shape != comb_t.shape {
        return Err(Error::CombShape("comb shapes must match".into()));
    }
    controlled_comb_two_vectors(comb_s, &s.vec, comb_t, &t.vec)
}

fn controlled_comb_two_vectors(
    comb_s: &CombChoi,
    s_vec: &ComplexMatrix,
    comb_t: &CombChoi,
    t_vec: &ComplexMatrix,
) -> Result<CombChoi> {
    let dims = comb_s.shape.dims().to_vec();
    let n2 = dims.len();
    let e = |a: usize, b: usize| ComplexMatrix::matrix_unit(2, a, b);
    let ctrl = |a: usize, b: usize| kron(&e(a, b), &e(a, b));
    let off = s_vec.matmul(&t_vec.dagger());
    let mut work = kron(&ctrl(0, 0), &comb_s.mat);
    work = work.add(&kron(&ctrl(1, 1), &comb_t.mat));
    work = work.add(&kron(&kron(&e(0, 1), &e(0, 1)), &off));
    work = work.add(&kron(&kron(&e(1, 0), &e(1, 0)), &off.dagger()));

    // working factors: [c_in, c_out, H_0, …, H_{2N+1}]
    let mut work_dims = vec![2usize, 2usize];
    work_dims.extend_from_slice(&dims);
    let work_shape = SubsystemShape::new(work_dims)?;
    // target: [c_in, H_0, …, H_{2N}, c_out, H_{2N+1}]
    let mut perm = vec![0usize];
    perm.extend(2..n2 + 1);
    perm.push(1);
    perm.push(n2 + 1);
    let (permuted, _) = permute_factors(&work, &work_shape, &perm)?;

    let mut new_dims = dims;
    new_dims[0] *= 2;
    let last = new_dims.len() - 1;
    new_dims[last] *= 2;
    CombChoi::new(permuted, CombShape::new(new_dims)?)
}

/// Swaps the two control branches of a controlled comb (Pauli X on both
/// control factors). The first and last dims must carry the control as
/// their most significant digit.
pub fn swap_comb_control(comb: &CombChoi) -> Result<CombChoi> {
    let dims = comb.shape.dims();
    let last = dims.len() - 1;
    if dims[0] % 2 != 0 || dims[last] % 2 != 0 {
        return Err(Error::CombShape("not a controlled comb".into()));
    }
    let d0 = dims[0] / 2;
    let dl = dims[last] / 2;
    let side = comb.shape.side();
    let tail: usize = dims[1..].iter().product();
    let flip = |idx: usize| -> usize {
        let i0 = idx / tail;
        let rest = idx % tail;
        let il = rest % dims[last];
        let mid = rest / dims[last];
        let a = i0 / d0;
        let t0 = i0 % d0;
        let b = il / dl;
        let tl = il % dl;
        let new_i0 = (1 - a) * d0 + t0;
        let new_il = (1 - b) * dl + tl;
        (new_i0 * (tail / dims[last]) + mid) * dims[last] + new_il
    };
    let mut out = ComplexMatrix::zeros(side, side);
    for r in 0..side {
        for c in 0..side {
            out.set(flip(r), flip(c), comb.mat.get(r, c));
        }
    }
    CombChoi::new(out, comb.shape.clone())
}

/// Indices of maximal-norm orthogonal comb Kraus vectors, with the
/// eigendecomposition they came from.
fn comb_spectrum(comb: &CombChoi) -> Result<(Vec<f64>, ComplexMatrix, Vec<usize>)> {
    let spec = hermitian_eig(comb.matrix())?;
    let kept: Vec<(usize, f64)> = spec
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, l)| *l > tol::EIG_DROP)
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidChannel("zero comb".into()));
    }
    let top = kept.iter().map(|(_, l)| *l).fold(0.0f64, f64::max);
    let bmax: Vec<usize> = kept
        .iter()
        .filter(|(_, l)| *l >= top * (1.0 - 1e-9))
        .map(|(i, _)| *i)
        .collect();
    Ok((spec.eigenvalues.clone(), spec.eigenvectors, bmax))
}

/// Most coherent comb operator `S = Σ αᵢ* S̃ᵢ` over the maximal-norm family
/// `B_max`, `Σ|αᵢ|² = 1`.
///
/// Default selection inside a degenerate family: the element maximizing the
/// overlap of its identity-slot contraction with `|I⟩⟩` on the outer spaces
/// (equivalently, the choice for which the controlled comb maps the identity
/// operation to the identity). This is basis independent; when the
/// functional vanishes or the shape has no identity slots, the first
/// eigenvector in deterministic order is used. Explicit `alpha` coefficients
/// against the eigendecomposition order override the default.
pub fn most_coherent_s(comb: &CombChoi, alpha: Option<&[C64]>) -> Result<CoherenceOperatorS> {
    let (values, vectors, bmax) = comb_spectrum(comb)?;
    let lam_max = values[bmax[0]];
    let scale = Complex64::new(lam_max.sqrt(), 0.0);
    if let Some(coeffs) = alpha {
        if coeffs.len() != bmax.len() {
            return Err(Error::Parameter(format!(
                "expected {} coefficients for the maximal family, got {}",
                bmax.len(),
                coeffs.len()
            )));
        }
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter("coefficients must have unit norm".into()));
        }
        let mut v = ComplexMatrix::zeros(comb.shape.side(), 1);
        for (c, &i) in coeffs.iter().zip(&bmax) {
            v = v.add(&vectors.column(i).scale(c.conj() * scale));
        }
        return CoherenceOperatorS::from_vector(comb, v);
    }

    let dims = comb.shape.dims();
    let n = comb.shape.slots();
    let slots_square = (0..n).all(|k| dims[2 * k + 1] == dims[2 * k + 2]);
    let outer_square = dims[0] == dims[dims.len() - 1];
    if slots_square && outer_square {
        let ids: Vec<ComplexMatrix> = (0..n)
            .map(|k| ComplexMatrix::identity(dims[2 * k + 1]))
            .collect();
        let ivec = crate::tensor::max_entangled(dims[0]);
        let mut f = Vec::with_capacity(bmax.len());
        for &i in &bmax {
            let tilde = vectors.column(i).scale(scale);
            let phi = contract_slots(&tilde, &comb.shape, &ids)?;
            f.push(ivec.hs_inner(&phi));
        }
        let fn2: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        if fn2.sqrt() > 1e-9 {
            let inv = Complex64::new(1.0 / fn2.sqrt(), 0.0);
            let mut v = ComplexMatrix::zeros(comb.shape.side(), 1);
            for (fi, &i) in f.iter().zip(&bmax) {
                // S = Σ βᵢ S̃ᵢ with βᵢ = f̄ᵢ/‖f‖ maximizes the overlap and
                // leaves it real positive
                v = v.add(&vectors.column(i).scale(fi.conj() * inv * scale));
            }
            return CoherenceOperatorS::from_vector(comb, v);
        }
    }
    let v = vectors.column(bmax[0]).scale(scale);
    CoherenceOperatorS::from_vector(comb, v)
}

/// Kraus-side validity report (the conditions swept over operator bases).
#[derive(Clone, Debug)]
pub struct CombKrausReport {
    /// Max deviation from `c·I` for the reduced-comb condition at each
    /// reduction level `k = 0 … N-1`.
    pub condition_residuals: Vec<f64>,
    /// Residual of the final normalization `Σ Gᵢ†Gᵢ = I`.
    pub normalization_residual: f64,
}

impl CombKrausReport {
    pub fn passes(&self) -> bool {
        self.normalization_residual <= tol::COMB_TOL
            && self.condition_residuals.iter().all(|&r| r <= tol::COMB_TOL)
    }
}

/// Checks the sequential comb conditions directly on the Kraus operators,
/// without forming the Choi operator.
///
/// Level `k` reshapes each `Sᵢ` so that the odd spaces
/// `H_{2N-2k+1}, …, H_{2N-1}` join the range, then requires
/// `Tr_{1..2N-2k-1}[(B ⊗ I)(Σᵢ Sᵢ^{(k)†}(A₀ ⊗ I)Sᵢ^{(k)})] ∝ I`
/// for every matrix unit `A₀` on `H_0` and `B` on the leading domain spaces.
/// The final normalization reshapes all odd spaces into the range and
/// requires `Σᵢ Gᵢ†Gᵢ = I`.
pub fn comb_kraus_conditions(kraus: &CombKraus) -> Result<CombKrausReport> {
    let shape = kraus.shape();
    let dims = shape.dims();
    let n = shape.slots();
    let n2 = dims.len();
    let vectors: Vec<ComplexMatrix> = kraus
        .operators()
        .iter()
        .map(|op| kraus_matrix_to_vector(op, shape))
        .collect();

    let mut condition_residuals = Vec::with_capacity(n);
    for k in 0..n {
        // range: H_0, moved odd spaces, H_{2N+1}; domain: the rest ascending
        let moved: Vec<usize> = (0..k).map(|l| 2 * n - 2 * l - 1).collect();
        let mut range = vec![0usize];
        let mut sorted_moved = moved.clone();
        sorted_moved.sort_unstable();
        range.extend(&sorted_moved);
        range.push(n2 - 1);
        let domain: Vec<usize> = (1..n2 - 1).filter(|f| !sorted_moved.contains(f)).collect();
        let ops: Vec<ComplexMatrix> = vectors
            .iter()
            .map(|v| vector_to_operator(v, shape, &range, &domain))
            .collect();

        // domain splits into a prefix 1..=2N-2k-1 and an even tail
        let prefix_len = 2 * n - 2 * k - 1;
        let prefix: Vec<usize> = domain
            .iter()
            .copied()
            .filter(|&f| f <= prefix_len)
            .collect();
        let tail: Vec<usize> = domain
            .iter()
            .copied()
            .filter(|&f| f > prefix_len)
            .collect();
        let d_prefix: usize = prefix.iter().map(|&f| dims[f]).product();
        let d_tail: usize = tail.iter().map(|&f| dims[f]).product();
        let range_rest: usize = range[1..].iter().map(|&f| dims[f]).product();

        let mut worst: f64 = 0.0;
        let d0 = dims[0];
        for a in 0..d0 {
            for b in 0..d0 {
                let a0 = ComplexMatrix::matrix_unit(d0, a, b);
                let mid = kron(&a0, &ComplexMatrix::identity(range_rest));
                let mut m = ComplexMatrix::zeros(d_prefix * d_tail, d_prefix * d_tail);
                for op in &ops {
                    m = m.add(&op.dagger().matmul(&mid).matmul(op));
                }
                let dom_shape = SubsystemShape::new(vec![d_prefix, d_tail])?;
                for p in 0..d_prefix {
                    for q in 0..d_prefix {
                        let bop = ComplexMatrix::matrix_unit(d_prefix, p, q);
                        let lifted = kron(&bop, &ComplexMatrix::identity(d_tail));
                        let t = partial_trace(&lifted.matmul(&m), &dom_shape, &[1])?;
                        let c = t.trace() / Complex64::new(d_tail as f64, 0.0);
                        let target = ComplexMatrix::identity(d_tail).scale(c);
                        worst = worst.max(t.max_abs_diff(&target));
                    }
                }
            }
        }
        condition_residuals.push(worst);
    }

    // final normalization: all odd spaces as range, H_0 and evens as domain
    let range: Vec<usize> = (0..n2).filter(|f| f % 2 == 1).collect();
    let domain: Vec<usize> = (0..n2).filter(|f| f % 2 == 0).collect();
    let d_domain: usize = domain.iter().map(|&f| dims[f]).product();
    let mut sum = ComplexMatrix::zeros(d_domain, d_domain);
    for v in &vectors {
        let g = vector_to_operator(v, shape, &range, &domain);
        sum = sum.add(&g.dagger().matmul(&g));
    }
    let normalization_residual = sum.max_abs_diff(&ComplexMatrix::identity(d_domain));

    Ok(CombKrausReport {
        condition_residuals,
        normalization_residual,
    })
}

/// A valid-by-construction random comb: alternating random circuit unitaries
/// with a traced-out ancilla of dimension `anc`. All slot spaces share the
/// dimension `d`.
pub fn random_circuit_comb(
    slots: usize,
    d: usize,
    anc: usize,
    rng: &mut impl rand::Rng,
) -> Result<CombKraus> {
    let shape = CombShape::uniform(slots, d)?;
    let ws: Vec<ComplexMatrix> = (0..=slots)
        .map(|_| crate::sampling::haar_unitary(d * anc, rng))
        .collect();
    let dims = shape.dims();
    let rows = shape.kraus_rows();
    let cols = shape.kraus_cols();
    let inner_dims = dims[1..dims.len() - 1].to_vec();
    // sum over the ancilla wire indices b_1..b_N between consecutive gates
    let paths = anc.pow(slots as u32);
    let mut ops = Vec::with_capacity(anc);
    for j in 0..anc {
        let mut op = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            let n0 = r / dims[dims.len() - 1];
            let p = r % dims[dims.len() - 1];
            for c in 0..cols {
                // cd holds (m_1, q_2, m_3, q_4, …, q_{2N})
                let cd = digits(c, &inner_dims);
                let mut acc = ZERO;
                for path in 0..paths {
                    let mut bseq = vec![0usize; slots + 1];
                    let mut rem = path;
                    for b in bseq.iter_mut().skip(1) {
                        *b = rem % anc;
                        rem /= anc;
                    }
                    // W_0: (n_0, 0) → (m_1, b_1)
                    let mut term = ws[0].get(cd[0] * anc + bseq[1], n0 * anc);
                    for k in 1..=slots {
                        if term == ZERO {
                            break;
                        }
                        // W_k: (q_{2k}, b_k) → (m_{2k+1}, b_{k+1}), last gate → (p, j)
                        let out_idx = if k == slots {
                            p * anc + j
                        } else {
                            cd[2 * k] * anc + bseq[k + 1]
                        };
                        let in_idx = cd[2 * k - 1] * anc + bseq[k];
                        term *= ws[k].get(out_idx, in_idx);
                    }
                    acc += term;
                }
                op.set(r, c, acc);
            }
        }
        ops.push(op);
    }
    CombKraus::new(ops, shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{validate_channel, ChoiMatrix};
    use crate::sampling::{haar_unitary, random_cptp_kraus, seeded_rng};

    #[test]
    fn identity_comb_passes_and_pipes() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let comb = identity_comb(&shape).unwrap();
        let report = check_comb_choi(&comb).unwrap();
        assert!(report.valid(), "{report:?}");

        let mut rng = seeded_rng(1);
        let u = haar_unitary(2, &mut rng);
        let out = link_apply(&comb, &[ChoiMatrix::unitary(&u)]).unwrap();
        assert!(out.approx_eq(&ChoiMatrix::unitary(&u), 1e-12));
    }

    #[test]
    fn identity_comb_two_slots_composes() {
        let shape = CombShape::uniform(2, 2).unwrap();
        let comb = identity_comb(&shape).unwrap();
        assert!(check_comb_choi(&comb).unwrap().valid());
        let mut rng = seeded_rng(2);
        let u = haar_unitary(2, &mut rng);
        let v = haar_unitary(2, &mut rng);
        let out = link_apply(
            &comb,
            &[ChoiMatrix::unitary(&u), ChoiMatrix::unitary(&v)],
        )
        .unwrap();
        let vu = v.matmul(&u);
        assert!(out.approx_eq(&ChoiMatrix::unitary(&vu), 1e-12));
    }

    #[test]
    fn link_apply_identity_equals_compose_chain() {
        let mut rng = seeded_rng(3);
        let shape = CombShape::uniform(2, 2).unwrap();
        let comb = identity_comb(&shape).unwrap();
        let a = random_cptp_kraus(2, 2, 2, &mut rng).unwrap().to_choi();
        let b = random_cptp_kraus(2, 2, 3, &mut rng).unwrap().to_choi();
        let linked = link_apply(&comb, &[a.clone(), b.clone()]).unwrap();
        let composed = crate::channels::compose(&a, &b).unwrap();
        assert!(linked.approx_eq(&composed, 1e-10));
        assert!(validate_channel(&linked).is_cptp());
    }

    #[test]
    fn random_psd_fails_chain() {
        let mut rng = seeded_rng(7);
        let shape = CombShape::uniform(1, 2).unwrap();
        let mut failures = 0;
        for _ in 0..100 {
            let g = crate::sampling::ginibre(16, 16, &mut rng);
            let p = g.matmul(&g.dagger());
            // normalize the trace so only the chain can fail
            let t = p.trace().re;
            let p = p.scale(Complex64::new(4.0 / t, 0.0));
            let comb = CombChoi::new(p, shape.clone()).unwrap();
            if !check_comb_choi(&comb).unwrap().valid() {
                failures += 1;
            }
        }
        assert!(failures >= 99, "only {failures} failures");
    }

    #[test]
    fn kraus_vector_round_trip() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let mut rng = seeded_rng(4);
        let op = crate::sampling::ginibre(4, 4, &mut rng);
        let v = kraus_matrix_to_vector(&op, &shape);
        let back = vector_to_kraus_matrix(&v, &shape).unwrap();
        assert!(back.approx_eq(&op, 0.0));
    }

    #[test]
    fn identity_comb_kraus_is_identity_matrix() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let v = identity_comb_vector(&shape).unwrap();
        let m = vector_to_kraus_matrix(&v, &shape).unwrap();
        assert!(m.approx_eq(&ComplexMatrix::identity(4), 0.0));
        // the comb Choi from this single Kraus operator is the identity comb
        let k = CombKraus::new(vec![m], shape.clone()).unwrap();
        assert!(k.to_choi().approx_eq(&identity_comb(&shape).unwrap(), 1e-14));
    }

    #[test]
    fn circuit_comb_valid_both_sides() {
        let mut rng = seeded_rng(11);
        for slots in [1usize, 2] {
            let kraus = random_circuit_comb(slots, 2, 2, &mut rng).unwrap();
            let report = comb_kraus_conditions(&kraus).unwrap();
            assert!(report.passes(), "slots={slots} {report:?}");
            let choi_report = check_comb_choi(&kraus.to_choi()).unwrap();
            assert!(choi_report.valid(), "slots={slots} {choi_report:?}");
        }
    }

    #[test]
    fn random_operators_fail_both_sides() {
        let mut rng = seeded_rng(13);
        let shape = CombShape::uniform(1, 2).unwrap();
        for _ in 0..10 {
            let ops = vec![
                crate::sampling::ginibre(4, 4, &mut rng),
                crate::sampling::ginibre(4, 4, &mut rng),
            ];
            let kraus = CombKraus::new(ops, shape.clone()).unwrap();
            let kr = comb_kraus_conditions(&kraus).unwrap();
            let cr = check_comb_choi(&kraus.to_choi()).unwrap();
            assert_eq!(kr.passes(), cr.valid());
            assert!(!kr.passes());
        }
    }

    #[test]
    fn identity_comb_kraus_conditions_pass() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let v = identity_comb_vector(&shape).unwrap();
        let m = vector_to_kraus_matrix(&v, &shape).unwrap();
        let k = CombKraus::new(vec![m], shape).unwrap();
        assert!(comb_kraus_conditions(&k).unwrap().passes());

        let shape2 = CombShape::uniform(2, 2).unwrap();
        let v2 = identity_comb_vector(&shape2).unwrap();
        let m2 = vector_to_kraus_matrix(&v2, &shape2).unwrap();
        let k2 = CombKraus::new(vec![m2], shape2).unwrap();
        assert!(comb_kraus_conditions(&k2).unwrap().passes());
    }

    #[test]
    fn controlled_identity_comb_acts_as_identity() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let comb = identity_comb(&shape).unwrap();
        let s = most_coherent_s(&comb, None).unwrap();
        // rank-one comb: S must be the identity-comb Kraus operator itself
        assert!(s.kraus_matrix().approx_eq(&ComplexMatrix::identity(4), 1e-10));
        let cc = controlled_comb(&comb, &s).unwrap();
        assert!(check_comb_choi(&cc).unwrap().valid());
        let mut rng = seeded_rng(5);
        let u = haar_unitary(2, &mut rng);
        let out = link_apply(&cc, &[ChoiMatrix::unitary(&u)]).unwrap();
        // both branches pipe U; coherence is full: the controlled comb of the
        // identity comb with S = S_id acts as id ⊗ U on control ⊗ target
        let mut cu = ComplexMatrix::zeros(4, 4);
        for r in 0..2 {
            for c in 0..2 {
                cu.set(r, c, u.get(r, c));
                cu.set(2 + r, 2 + c, u.get(r, c));
            }
        }
        let direct = ChoiMatrix::unitary(&cu);
        assert!(out.approx_eq(&direct, 1e-10));
    }

    #[test]
    fn controlled_comb_zero_coherence_acts_classically() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let comb = identity_comb(&shape).unwrap();
        let zero = CoherenceOperatorS::from_vector(&comb, ComplexMatrix::zeros(16, 1)).unwrap();
        let cc = controlled_comb(&comb, &zero).unwrap();
        assert!(check_comb_choi(&cc).unwrap().valid());
        // both branches pipe U but with no coherence between them
        let mut rng = seeded_rng(9);
        let u = haar_unitary(2, &mut rng);
        let out = link_apply(&cc, &[ChoiMatrix::unitary(&u)]).unwrap();
        let ju = ChoiMatrix::unitary(&u);
        let b00 = crate::controlled::control_block(&out, (0, 0), (0, 0));
        let b11 = crate::controlled::control_block(&out, (1, 1), (1, 1));
        let b01 = crate::controlled::control_block(&out, (0, 0), (1, 1));
        assert!(b00.approx_eq(ju.matrix(), 1e-12));
        assert!(b11.approx_eq(ju.matrix(), 1e-12));
        assert!(b01.max_abs() < 1e-12);
    }

    #[test]
    fn controlled_comb_two_cases() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let id = identity_comb(&shape).unwrap();
        let s = most_coherent_s(&id, None).unwrap();
        let two = controlled_comb_two(&id, &s, &id, &s).unwrap();
        assert!(check_comb_choi(&two).unwrap().valid());
        let direct = controlled_comb(&id, &s).unwrap();
        assert!(two.approx_eq(&direct, 1e-12));
    }

    #[test]
    fn flow_matrix_of_identity_comb() {
        let shape = CombShape::uniform(1, 2).unwrap();
        let v = identity_comb_vector(&shape).unwrap();
        // flow pairs (0→1) and (2→3): both identity wires
        assert!(flow_matrix(&v, &shape).approx_eq(&ComplexMatrix::identity(4), 0.0));
    }
}
