//! Quantum channels as Kraus sets and Choi operators.
//!
//! The Choi operator of a channel `A: L(H_in) → L(H_out)` lives on
//! `H_in ⊗ H_out` (input factor first) and equals `Σᵢ |Kᵢ⟩⟩⟨⟨Kᵢ|` under the
//! vectorization of [`crate::tensor::vectorize`]. The Choi operator is the
//! canonical identity of a channel: it does not depend on the choice of
//! Kraus operators.

use crate::error::{Error, Result};
use crate::tensor::{
    devectorize, hermitian_eig, kron, partial_trace, partial_transpose, paulis, vectorize,
    ComplexMatrix, SubsystemShape, C64, ZERO,
};
use crate::tol;

/// A list of Kraus operators sharing a `d_out × d_in` shape.
#[derive(Clone, Debug)]
pub struct KrausSet {
    ops: Vec<ComplexMatrix>,
    d_in: usize,
    d_out: usize,
}

impl KrausSet {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::Parameter("empty Kraus set".into()))?;
        let (d_out, d_in) = (first.rows(), first.cols());
        if ops.iter().any(|k| k.rows() != d_out || k.cols() != d_in) {
            return Err(Error::Dimension(
                "Kraus operators must share one shape".into(),
            ));
        }
        Ok(Self { ops, d_in, d_out })
    }

    pub fn single(op: ComplexMatrix) -> Self {
        let (d_out, d_in) = (op.rows(), op.cols());
        Self {
            ops: vec![op],
            d_in,
            d_out,
        }
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// `max |Σ Kᵢ†Kᵢ - I|`.
    pub fn tp_residual(&self) -> f64 {
        let mut s = ComplexMatrix::zeros(self.d_in, self.d_in);
        for k in &self.ops {
            s = s.add(&k.dagger().matmul(k));
        }
        s.max_abs_diff(&ComplexMatrix::identity(self.d_in))
    }

    /// `J = Σᵢ |Kᵢ⟩⟩⟨⟨Kᵢ|`.
    pub fn to_choi(&self) -> ChoiMatrix {
        let side = self.d_in * self.d_out;
        let mut j = ComplexMatrix::zeros(side, side);
        for k in &self.ops {
            let v = vectorize(k);
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
        ChoiMatrix {
            mat: j,
            d_in: self.d_in,
            d_out: self.d_out,
        }
    }

    /// Direct Kraus application `Σ Kᵢ ρ Kᵢ†`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.d_in || rho.cols() != self.d_in {
            return Err(Error::Dimension("state does not match d_in".into()));
        }
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for k in &self.ops {
            out = out.add(&k.matmul(rho).matmul(&k.dagger()));
        }
        Ok(out)
    }
}

/// Choi operator on `H_in ⊗ H_out`.
#[derive(Clone, Debug)]
pub struct ChoiMatrix {
    mat: ComplexMatrix,
    d_in: usize,
    d_out: usize,
}

impl ChoiMatrix {
    pub fn new(mat: ComplexMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        if !mat.is_square() || mat.rows() != d_in * d_out {
            return Err(Error::Dimension(format!(
                "Choi side {} does not match d_in·d_out = {}",
                mat.rows(),
                d_in * d_out
            )));
        }
        Ok(Self { mat, d_in, d_out })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn shape(&self) -> SubsystemShape {
        SubsystemShape::new(vec![self.d_in, self.d_out]).expect("valid dims")
    }

    /// Choi operator of the identity channel, `|I⟩⟩⟨⟨I|`.
    pub fn identity(d: usize) -> Self {
        KrausSet::single(ComplexMatrix::identity(d)).to_choi()
    }

    /// Choi operator of a unitary channel, `|U⟩⟩⟨⟨U|`.
    pub fn unitary(u: &ComplexMatrix) -> Self {
        KrausSet::single(u.clone()).to_choi()
    }

    /// The qubit depolarizing channel, Kraus `{σᵢ/2}`.
    pub fn depolarizing() -> Self {
        let half = C64::new(0.5, 0.0);
        let ops = paulis().iter().map(|p| p.scale(half)).collect();
        KrausSet::new(ops).expect("pauli set").to_choi()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.d_in == other.d_in && self.d_out == other.d_out && self.mat.approx_eq(&other.mat, tol)
    }
}

/// CP/TP validation report for a Choi operator.
#[derive(Clone, Debug)]
pub struct ChannelReport {
    pub cp: bool,
    pub tp: bool,
    pub min_eigenvalue: f64,
    pub tp_residual: f64,
    pub hermiticity_residual: f64,
}

impl ChannelReport {
    pub fn is_cptp(&self) -> bool {
        self.cp && self.tp
    }
}

/// Checks complete positivity (spectrum of the Choi) and trace preservation
/// (`Tr_out J = I_in`).
pub fn validate_channel(j: &ChoiMatrix) -> ChannelReport {
    let herm = j.mat.hermiticity_residual();
    let min_eigenvalue = if herm <= tol::HERM_TOL {
        hermitian_eig(&j.mat)
            .map(|s| s.eigenvalues.last().copied().unwrap_or(0.0))
            .unwrap_or(f64::NEG_INFINITY)
    } else {
        f64::NEG_INFINITY
    };
    let tp_residual = partial_trace(&j.mat, &j.shape(), &[0])
        .map(|m| m.max_abs_diff(&ComplexMatrix::identity(j.d_in)))
        .unwrap_or(f64::INFINITY);
    ChannelReport {
        cp: herm <= tol::HERM_TOL && min_eigenvalue >= tol::PSD_FLOOR,
        tp: tp_residual <= tol::TP_TOL,
        min_eigenvalue,
        tp_residual,
        hermiticity_residual: herm,
    }
}

/// Mutually orthogonal Kraus operators from the spectral decomposition of
/// the Choi operator; zero-eigenvalue directions are dropped.
pub fn choi_to_orthogonal_kraus(j: &ChoiMatrix) -> Result<KrausSet> {
    let spec = hermitian_eig(&j.mat)?;
    let mut ops = Vec::new();
    for (idx, &lambda) in spec.eigenvalues.iter().enumerate() {
        if lambda < tol::PSD_FLOOR {
            return Err(Error::NotCompletelyPositive {
                min_eigenvalue: lambda,
            });
        }
        if lambda <= tol::EIG_DROP {
            continue;
        }
        let col = spec.eigenvectors.column(idx);
        let k = devectorize(&col, j.d_in, j.d_out)?.scale(C64::new(lambda.sqrt(), 0.0));
        ops.push(k);
    }
    if ops.is_empty() {
        // the zero channel has no Kraus operators; keep an explicit zero
        ops.push(ComplexMatrix::zeros(j.d_out, j.d_in));
    }
    KrausSet::new(ops)
}

/// `ρ′ = Tr_in[(ρᵀ ⊗ I_out) · J]`.
pub fn apply_channel(j: &ChoiMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.rows() != j.d_in || rho.cols() != j.d_in {
        return Err(Error::Dimension(format!(
            "state side {} does not match d_in {}",
            rho.rows(),
            j.d_in
        )));
    }
    let lifted = kron(&rho.transpose(), &ComplexMatrix::identity(j.d_out));
    partial_trace(&lifted.matmul(&j.mat), &j.shape(), &[1])
}

/// Choi operator of `second ∘ first`.
pub fn compose(first: &ChoiMatrix, second: &ChoiMatrix) -> Result<ChoiMatrix> {
    if first.d_out != second.d_in {
        return Err(Error::Dimension(format!(
            "compose: first.d_out = {} but second.d_in = {}",
            first.d_out, second.d_in
        )));
    }
    let (a, b, c) = (first.d_in, first.d_out, second.d_out);
    let shape = SubsystemShape::new(vec![a, b, c])?;
    // J₂∘₁ = Tr_B[(J₁^{T_B} ⊗ I_C)(I_A ⊗ J₂)]
    let j1_tb = partial_transpose(
        &first.mat,
        &SubsystemShape::new(vec![a, b])?,
        1,
    )?;
    let left = kron(&j1_tb, &ComplexMatrix::identity(c));
    let right = kron(&ComplexMatrix::identity(a), &second.mat);
    let out = partial_trace(&left.matmul(&right), &shape, &[0, 2])?;
    ChoiMatrix::new(out, a, c)
}

/// Purification of a trace-preserving Kraus set `{Kᵢ}ᵢ₌₁ⁿ`: a unitary on
/// `H ⊗ aux` with `dim(aux) = n+1` satisfying
/// `U|ψ⟩|0⟩ = Σᵢ₌₁ⁿ Kᵢ|ψ⟩|i⟩`.
///
/// The auxiliary index 0 is reserved (the sum starts at 1, equivalent to a
/// Kraus list padded with `K₀ = 0`); the unspecified columns are completed
/// to a unitary by Gram-Schmidt over the standard basis.
pub fn stinespring(k: &KrausSet) -> Result<ComplexMatrix> {
    let residual = k.tp_residual();
    if residual > tol::TP_TOL {
        return Err(Error::NotTracePreserving { residual });
    }
    if k.d_in != k.d_out {
        return Err(Error::Dimension(
            "stinespring purification needs d_in = d_out".into(),
        ));
    }
    let d = k.d_in;
    let n = k.ops.len();
    let aux = n + 1;
    let side = d * aux;
    let mut u = ComplexMatrix::zeros(side, side);
    let mut fixed_cols = Vec::new();
    for j in 0..d {
        let col_idx = j * aux; // |j⟩|0⟩
        let mut col = ComplexMatrix::zeros(side, 1);
        for (i, op) in k.ops.iter().enumerate() {
            for h in 0..d {
                col.set(h * aux + (i + 1), 0, op.get(h, j));
            }
        }
        // re-normalize away the tp residual
        let norm = col.frobenius_norm();
        let col = col.scale(C64::new(1.0 / norm, 0.0));
        for r in 0..side {
            u.set(r, col_idx, col.get(r, 0));
        }
        fixed_cols.push(col_idx);
    }

    // complete the remaining columns: greedily orthogonalize the standard
    // basis vector with the largest residual against everything filled so
    // far (the residual is bounded below by √(remaining/side), so this
    // always succeeds)
    let mut filled = fixed_cols.clone();
    let orthogonalize = |col: &mut ComplexMatrix, u: &ComplexMatrix, filled: &[usize]| {
        for _pass in 0..2 {
            for &f in filled {
                let mut proj = ZERO;
                for r in 0..side {
                    proj += u.get(r, f).conj() * col.get(r, 0);
                }
                for r in 0..side {
                    let z = col.get(r, 0) - proj * u.get(r, f);
                    col.set(r, 0, z);
                }
            }
        }
    };
    for c in 0..side {
        if fixed_cols.contains(&c) {
            continue;
        }
        let mut best: Option<(f64, ComplexMatrix)> = None;
        for cand in 0..side {
            let mut col = ComplexMatrix::basis_vec(side, cand);
            orthogonalize(&mut col, &u, &filled);
            let norm = col.frobenius_norm();
            if best.as_ref().map_or(true, |(n, _)| norm > *n) {
                best = Some((norm, col));
            }
        }
        let (norm, col) = best.expect("side > 0");
        if norm < 1e-8 {
            return Err(Error::Parameter("unitary completion failed".into()));
        }
        let col = col.scale(C64::new(1.0 / norm, 0.0));
        for r in 0..side {
            u.set(r, c, col.get(r, 0));
        }
        filled.push(c);
    }
    let res = u.unitarity_residual();
    if res > tol::UNITARY_TOL {
        return Err(Error::NonUnitary { residual: res });
    }
    Ok(u)
}

/// Reduced dynamics of a Stinespring unitary: `Tr_aux[U (ρ ⊗ |0⟩⟨0|) U†]`
/// as a Choi operator on `H ⊗ H`. The auxiliary dimension is inferred from
/// the unitary side.
pub fn stinespring_reduced_choi(u: &ComplexMatrix, d: usize) -> Result<ChoiMatrix> {
    if u.rows() % d != 0 {
        return Err(Error::Dimension("unitary side not divisible by d".into()));
    }
    let aux = u.rows() / d;
    let side = d * d;
    let mut j = ComplexMatrix::zeros(side, side);
    // J = Σ_n (id ⊗ E)(|n⟩⟨n'| ⊗ ...) assembled column by column from
    // U (|j⟩|0⟩) amplitudes
    for n in 0..d {
        for np in 0..d {
            // E(|n⟩⟨n'|) = Tr_aux[U(|n⟩⟨n'| ⊗ |0⟩⟨0|)U†]
            let cn = u.column(n * aux);
            let cnp = u.column(np * aux);
            for m in 0..d {
                for mp in 0..d {
                    let mut acc = ZERO;
                    for a in 0..aux {
                        acc += cn.get(m * aux + a, 0) * cnp.get(mp * aux + a, 0).conj();
                    }
                    let r = n * d + m;
                    let c = np * d + mp;
                    let z = j.get(r, c) + acc;
                    j.set(r, c, z);
                }
            }
        }
    }
    ChoiMatrix::new(j, d, d)
}

/// Coefficients of a qubit Choi operator in the Pauli double-ket basis,
/// `J = Σ c_{αβ} |σ_α⟩⟩⟨⟨σ_β|`.
#[derive(Clone, Debug)]
pub struct PauliCoefficients {
    pub c: [[C64; 4]; 4],
}

impl PauliCoefficients {
    pub fn diagonal(&self) -> [f64; 4] {
        [
            self.c[0][0].re,
            self.c[1][1].re,
            self.c[2][2].re,
            self.c[3][3].re,
        ]
    }

    pub fn reconstruct(&self) -> ChoiMatrix {
        let sigmas = paulis();
        let mut j = ComplexMatrix::zeros(4, 4);
        for (a, sa) in sigmas.iter().enumerate() {
            let va = vectorize(sa);
            for (b, sb) in sigmas.iter().enumerate() {
                let vb = vectorize(sb);
                if self.c[a][b] == ZERO {
                    continue;
                }
                for r in 0..4 {
                    for cc in 0..4 {
                        let z = j.get(r, cc) + self.c[a][b] * va.get(r, 0) * vb.get(cc, 0).conj();
                        j.set(r, cc, z);
                    }
                }
            }
        }
        ChoiMatrix::new(j, 2, 2).expect("qubit Choi")
    }
}

/// `c_{αβ} = ⟨⟨σ_α|J|σ_β⟩⟩ / 4` for a qubit channel.
pub fn pauli_decompose(j: &ChoiMatrix) -> Result<PauliCoefficients> {
    if j.d_in != 2 || j.d_out != 2 {
        return Err(Error::Dimension("pauli_decompose needs a qubit channel".into()));
    }
    let sigmas = paulis();
    let vecs: Vec<ComplexMatrix> = sigmas.iter().map(vectorize).collect();
    let mut c = [[ZERO; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let jv = j.mat.matmul(&vecs[b]);
            c[a][b] = vecs[a].hs_inner(&jv) / C64::new(4.0, 0.0);
        }
    }
    Ok(PauliCoefficients { c })
}
