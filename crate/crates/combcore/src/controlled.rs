//! Coherently controlled quantum operations.
//!
//! A controlled operation acts as the identity when the control qubit is
//! `|0⟩` and as the channel `A` when it is `|1⟩`. Its Choi operator is fixed
//! by one operator `K` in the linear span of the Kraus operators of `A`:
//!
//! ```text
//! J = |00⟩⟨00|⊗J_I + |11⟩⟨11|⊗J_A + |00⟩⟨11|⊗|I⟩⟩⟨⟨K| + |11⟩⟨00|⊗|K⟩⟩⟨⟨I|
//! ```
//!
//! Stored factor order is `(control_in, target_in, control_out, target_out)`,
//! so the result is an ordinary Choi operator of a channel on the doubled
//! space and all of [`crate::channels`] applies to it directly.


use crate::channels::{
    apply_channel, choi_to_orthogonal_kraus, compose, validate_channel, ChoiMatrix, KrausSet,
};
use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_eig, kron, max_entangled, paulis, schatten_norm, vectorize, ComplexMatrix, C64, ONE,
    ZERO,
};
use crate::tol;

/// An operator in the Kraus span of a channel, with its expansion
/// coefficients against the orthogonal Kraus set.
#[derive(Clone, Debug)]
pub struct CoherenceOperator {
    k: ComplexMatrix,
    beta: Vec<C64>,
    basis: KrausSet,
    span_residual: f64,
}

impl CoherenceOperator {
    /// Expands `k` in the orthogonal Kraus basis of `a` and enforces the
    /// admissibility constraints: span membership and `Σ|βᵢ|² ≤ 1`.
    pub fn new(a: &ChoiMatrix, k: ComplexMatrix) -> Result<Self> {
        if k.rows() != a.d_out() || k.cols() != a.d_in() {
            return Err(Error::Dimension(
                "coherence operator shape must match the channel".into(),
            ));
        }
        let basis = choi_to_orthogonal_kraus(a)?;
        let mut beta = Vec::with_capacity(basis.operators().len());
        let mut approx = ComplexMatrix::zeros(k.rows(), k.cols());
        for op in basis.operators() {
            let denom = op.hs_inner(op).re;
            let coeff = if denom > 0.0 {
                op.hs_inner(&k) / denom
            } else {
                ZERO
            };
            approx = approx.add(&op.scale(coeff));
            beta.push(coeff);
        }
        let span_residual = k.max_abs_diff(&approx);
        let coeff_norm_sq: f64 = beta.iter().map(|b| b.norm_sqr()).sum();
        if span_residual > tol::SPAN_TOL || coeff_norm_sq > 1.0 + tol::COH_NORM_SLACK {
            return Err(Error::InvalidCoherence {
                span_residual,
                norm_sq: coeff_norm_sq,
            });
        }
        Ok(Self {
            k,
            beta,
            basis,
            span_residual,
        })
    }

    pub fn zero(a: &ChoiMatrix) -> Result<Self> {
        Self::new(a, ComplexMatrix::zeros(a.d_out(), a.d_in()))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.k
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }

    pub fn basis(&self) -> &KrausSet {
        &self.basis
    }

    pub fn span_residual(&self) -> f64 {
        self.span_residual
    }

    /// `Tr K†K`.
    pub fn hs_norm_sq(&self) -> f64 {
        self.k.hs_inner(&self.k).re
    }
}

/// Controlled version of a channel, Axiom-style: identity on `|0⟩`, the
/// channel on `|1⟩`, coherence block fixed by `K`.
#[derive(Clone, Debug)]
pub struct ControlledChannel {
    choi: ChoiMatrix,
    k: CoherenceOperator,
    /// Recorded global-phase convention of the `|1⟩` branch. The default
    /// construction uses `θ = 0`: the supplied operator matrices are the
    /// branch.
    theta: f64,
}

impl ControlledChannel {
    pub fn choi(&self) -> &ChoiMatrix {
        &self.choi
    }

    pub fn coherence(&self) -> &CoherenceOperator {
        &self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn d_target_in(&self) -> usize {
        self.choi.d_in() / 2
    }

    pub fn d_target_out(&self) -> usize {
        self.choi.d_out() / 2
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    /// Builds the object from raw parts, revalidating the coherence operator.
    pub fn from_parts(choi: ChoiMatrix, a: &ChoiMatrix, k: ComplexMatrix, theta: f64) -> Result<Self> {
        Ok(Self {
            choi,
            k: CoherenceOperator::new(a, k)?,
            theta,
        })
    }
}

/// Assembles a controlled-layout Choi operator from 2x2 control blocks, each
/// given on `target_in ⊗ target_out`.
pub fn assemble_control_blocks(
    blocks: &[((usize, usize), (usize, usize), &ComplexMatrix)],
    d_in: usize,
    d_out: usize,
) -> ChoiMatrix {
    let side = 4 * d_in * d_out;
    let mut j = ComplexMatrix::zeros(side, side);
    for &((a, b), (a2, b2), m) in blocks {
        for ti in 0..d_in {
            for to in 0..d_out {
                let row = ((a * d_in + ti) * 2 + b) * d_out + to;
                for ti2 in 0..d_in {
                    for to2 in 0..d_out {
                        let col = ((a2 * d_in + ti2) * 2 + b2) * d_out + to2;
                        let z = j.get(row, col) + m.get(ti * d_out + to, ti2 * d_out + to2);
                        j.set(row, col, z);
                    }
                }
            }
        }
    }
    ChoiMatrix::new(j, 2 * d_in, 2 * d_out).expect("consistent block dims")
}

/// Extracts the control block `(a,b),(a2,b2)` of a controlled-layout Choi.
pub fn control_block(
    j: &ChoiMatrix,
    ket: (usize, usize),
    bra: (usize, usize),
) -> ComplexMatrix {
    let d_in = j.d_in() / 2;
    let d_out = j.d_out() / 2;
    let (a, b) = ket;
    let (a2, b2) = bra;
    ComplexMatrix::from_fn(d_in * d_out, d_in * d_out, |r, c| {
        let (ti, to) = (r / d_out, r % d_out);
        let (ti2, to2) = (c / d_out, c % d_out);
        let row = ((a * d_in + ti) * 2 + b) * d_out + to;
        let col = ((a2 * d_in + ti2) * 2 + b2) * d_out + to2;
        j.matrix().get(row, col)
    })
}

fn require_square_cptp(a: &ChoiMatrix) -> Result<()> {
    if a.d_in() != a.d_out() {
        return Err(Error::Dimension(
            "controlled operations need d_in = d_out".into(),
        ));
    }
    let report = validate_channel(a);
    if !report.is_cptp() {
        return Err(Error::InvalidChannel(format!(
            "not CPTP (min eig {:.3e}, tp residual {:.3e})",
            report.min_eigenvalue, report.tp_residual
        )));
    }
    Ok(())
}

/// Classically controlled version: diagonal blocks only, `K = 0`.
pub fn classical_controlled(a: &ChoiMatrix) -> Result<ControlledChannel> {
    require_square_cptp(a)?;
    let d = a.d_in();
    let j_id = ChoiMatrix::identity(d);
    let choi = assemble_control_blocks(
        &[
            ((0, 0), (0, 0), j_id.matrix()),
            ((1, 1), (1, 1), a.matrix()),
        ],
        d,
        d,
    );
    Ok(ControlledChannel {
        choi,
        k: CoherenceOperator::zero(a)?,
        theta: 0.0,
    })
}

/// Controlled version of `a` with coherence operator `k`.
pub fn controlled_with_k(a: &ChoiMatrix, k: ComplexMatrix) -> Result<ControlledChannel> {
    require_square_cptp(a)?;
    let coherence = CoherenceOperator::new(a, k)?;
    let d = a.d_in();
    let j_id = ChoiMatrix::identity(d);
    let ivec = max_entangled(d);
    let kvec = vectorize(coherence.matrix());
    let off = ivec.matmul(&kvec.dagger()); // |I⟩⟩⟨⟨K|
    let off_dag = off.dagger();
    let choi = assemble_control_blocks(
        &[
            ((0, 0), (0, 0), j_id.matrix()),
            ((1, 1), (1, 1), a.matrix()),
            ((0, 0), (1, 1), &off),
            ((1, 1), (0, 0), &off_dag),
        ],
        d,
        d,
    );
    Ok(ControlledChannel {
        choi,
        k: coherence,
        theta: 0.0,
    })
}

/// Fully coherent controlled unitary, `K = U`.
pub fn controlled_unitary(u: &ComplexMatrix) -> Result<ControlledChannel> {
    controlled_with_k(&ChoiMatrix::unitary(u), u.clone())
}

/// The coherence part `ΔJ = J - J_cls` (the off-diagonal control blocks).
pub fn delta_j(cc: &ChoiMatrix) -> ComplexMatrix {
    let d_in = cc.d_in() / 2;
    let d_out = cc.d_out() / 2;
    let diag00 = control_block(cc, (0, 0), (0, 0));
    let diag11 = control_block(cc, (1, 1), (1, 1));
    let cls = assemble_control_blocks(
        &[((0, 0), (0, 0), &diag00), ((1, 1), (1, 1), &diag11)],
        d_in,
        d_out,
    );
    cc.matrix().sub(cls.matrix())
}

/// Schatten p-norm of the coherence part of a controlled channel. Equals
/// `2^{1/p} √d √(Tr K†K)` because `ΔJ` has exactly two non-zero eigenvalues
/// `±√d √(Tr K†K)`.
pub fn coherence_norm(cc: &ControlledChannel, p: f64) -> Result<f64> {
    schatten_norm(&delta_j(cc.choi()), p)
}

/// Indices of the orthogonal Kraus operators with maximal Hilbert-Schmidt
/// norm (ties within a relative tolerance).
pub fn max_norm_indices(basis: &KrausSet) -> Vec<usize> {
    let norms: Vec<f64> = basis
        .operators()
        .iter()
        .map(|op| op.hs_inner(op).re)
        .collect();
    let top = norms.iter().fold(0.0f64, |m, &x| m.max(x));
    norms
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= top * (1.0 - 1e-9))
        .map(|(i, _)| i)
        .collect()
}

/// Most coherent `K`: a unit-coefficient combination of the orthogonal Kraus
/// operators of maximal Hilbert-Schmidt norm.
///
/// With `alpha = None` the weight concentrates on the first maximal-norm
/// operator in the deterministic eigendecomposition order; `alpha` selects a
/// different element of the degenerate family via `K = Σ αᵢ* K̃ᵢ` over the
/// maximal set, `Σ|αᵢ|² = 1`.
pub fn most_coherent_k(a: &ChoiMatrix, alpha: Option<&[C64]>) -> Result<CoherenceOperator> {
    let basis = choi_to_orthogonal_kraus(a)?;
    let amax = max_norm_indices(&basis);
    let k = match alpha {
        None => basis.operators()[amax[0]].clone(),
        Some(coeffs) => {
            if coeffs.len() != amax.len() {
                return Err(Error::Parameter(format!(
                    "expected {} coefficients for the maximal family, got {}",
                    amax.len(),
                    coeffs.len()
                )));
            }
            let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
            if (norm_sq - 1.0).abs() > 1e-9 {
                return Err(Error::Parameter("coefficients must have unit norm".into()));
            }
            let mut k = ComplexMatrix::zeros(a.d_out(), a.d_in());
            for (c, &i) in coeffs.iter().zip(&amax) {
                k = k.add(&basis.operators()[i].scale(c.conj()));
            }
            k
        }
    };
    CoherenceOperator::new(a, k)
}

/// Axiom compliance report for a candidate controlled channel.
#[derive(Clone, Debug)]
pub struct AxiomsReport {
    /// Worst deviation of the control marginal from `|c⟩⟨c|` over a full
    /// operator basis of target inputs, `c ∈ {0, 1}`.
    pub control_residual: f64,
    /// Deviation of the `|0⟩`-conditioned action from the identity channel.
    pub zero_branch_residual: f64,
    /// Deviation of the `|1⟩`-conditioned action from the channel `a`.
    pub one_branch_residual: f64,
}

impl AxiomsReport {
    pub fn passes(&self) -> bool {
        self.control_residual <= tol::CHOI_EQ_TOL
            && self.zero_branch_residual <= tol::CHOI_EQ_TOL
            && self.one_branch_residual <= tol::CHOI_EQ_TOL
    }
}

/// Checks the three axioms operationally: control preservation and the two
/// conditioned actions, swept over a full matrix-unit basis on the target.
pub fn axioms_check(j_cc: &ChoiMatrix, a: &ChoiMatrix) -> Result<AxiomsReport> {
    let d_in = j_cc.d_in() / 2;
    let d_out = j_cc.d_out() / 2;
    if j_cc.d_in() != 2 * a.d_in() || j_cc.d_out() != 2 * a.d_out() {
        return Err(Error::Dimension(
            "controlled Choi does not match the base channel dims".into(),
        ));
    }
    let mut control_residual: f64 = 0.0;
    let mut zero_res: f64 = 0.0;
    let mut one_res: f64 = 0.0;
    for c in 0..2usize {
        let ctrl = ComplexMatrix::matrix_unit(2, c, c);
        for jdx in 0..d_in {
            for kdx in 0..d_in {
                let e = ComplexMatrix::matrix_unit(d_in, jdx, kdx);
                let input = kron(&ctrl, &e);
                let out = apply_channel(j_cc, &input)?;
                let out_shape = crate::tensor::SubsystemShape::new(vec![2, d_out])?;
                let ctrl_marg = crate::tensor::partial_trace(&out, &out_shape, &[0])?;
                let expected_marg = ctrl.scale(e.trace());
                control_residual = control_residual.max(ctrl_marg.max_abs_diff(&expected_marg));

                // conditioned target block ⟨c|out|c⟩
                let block = ComplexMatrix::from_fn(d_out, d_out, |r, s| {
                    out.get(c * d_out + r, c * d_out + s)
                });
                if c == 0 {
                    zero_res = zero_res.max(block.max_abs_diff(&e));
                } else {
                    let expected = apply_channel(a, &e)?;
                    one_res = one_res.max(block.max_abs_diff(&expected));
                }
            }
        }
    }
    Ok(AxiomsReport {
        control_residual,
        zero_branch_residual: zero_res,
        one_branch_residual: one_res,
    })
}

/// Conjugates a controlled-layout Choi by Pauli X on the control, swapping
/// the roles of the two branches.
pub fn swap_control(j: &ChoiMatrix) -> ChoiMatrix {
    let d_in = j.d_in() / 2;
    let d_out = j.d_out() / 2;
    let side = j.matrix().rows();
    let mut out = ComplexMatrix::zeros(side, side);
    let flip = |idx: usize| -> usize {
        // factor layout (c_in, t_in, c_out, t_out)
        let to = idx % d_out;
        let rest = idx / d_out;
        let b = rest % 2;
        let rest = rest / 2;
        let ti = rest % d_in;
        let a = rest / d_in;
        (((1 - a) * d_in + ti) * 2 + (1 - b)) * d_out + to
    };
    for r in 0..side {
        for c in 0..side {
            out.set(flip(r), flip(c), j.matrix().get(r, c));
        }
    }
    ChoiMatrix::new(out, j.d_in(), j.d_out()).expect("same dims")
}

/// Controlled switch between two channels by concatenation: applies `a` on
/// `|0⟩` and `b` on `|1⟩`, with coherence block `|K⟩⟩⟨⟨L|`.
#[derive(Clone, Debug)]
pub struct TwoOpControlled {
    pub choi: ChoiMatrix,
    pub k: CoherenceOperator,
    pub l: CoherenceOperator,
}

pub fn controlled_two(
    a: &ChoiMatrix,
    k: ComplexMatrix,
    b: &ChoiMatrix,
    l: ComplexMatrix,
) -> Result<TwoOpControlled> {
    require_square_cptp(a)?;
    require_square_cptp(b)?;
    if a.d_in() != b.d_in() {
        return Err(Error::Dimension("the two channels must share dims".into()));
    }
    let kop = CoherenceOperator::new(a, k)?;
    let lop = CoherenceOperator::new(b, l)?;
    let d = a.d_in();
    let kvec = vectorize(kop.matrix());
    let lvec = vectorize(lop.matrix());
    let off = kvec.matmul(&lvec.dagger()); // |K⟩⟩⟨⟨L|
    let off_dag = off.dagger();
    let choi = assemble_control_blocks(
        &[
            ((0, 0), (0, 0), a.matrix()),
            ((1, 1), (1, 1), b.matrix()),
            ((0, 0), (1, 1), &off),
            ((1, 1), (0, 0), &off_dag),
        ],
        d,
        d,
    );
    Ok(TwoOpControlled {
        choi,
        k: kop,
        l: lop,
    })
}

fn check_alpha(alpha: &[f64; 4]) -> Result<()> {
    if alpha.iter().any(|&a| a < 0.0) {
        return Err(Error::Parameter("alpha components must be non-negative".into()));
    }
    let norm: f64 = alpha.iter().map(|a| a * a).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "alpha must satisfy Σαᵢ² = 1, got {norm}"
        )));
    }
    Ok(())
}

/// Choi operator of the quantum switch acting on two copies of the qubit
/// Pauli-mixture channel with Kraus `{αᵢσᵢ}`, in the controlled layout.
///
/// Built by brute force from the switch Kraus operators
/// `|0⟩⟨0|⊗KⱼKᵢ + |1⟩⟨1|⊗KᵢKⱼ`; the closed form of the off-diagonal block
/// is available separately as [`switch_offdiag_closed_form`].
pub fn switch_action_pauli(alpha: &[f64; 4]) -> Result<ChoiMatrix> {
    check_alpha(alpha)?;
    let sigmas = paulis();
    let aa = compose_pauli_mixture(alpha)?;
    let mut off = ComplexMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let w = alpha[i] * alpha[i] * alpha[j] * alpha[j];
            if w == 0.0 {
                continue;
            }
            let ket = vectorize(&sigmas[j].matmul(&sigmas[i]));
            let bra = vectorize(&sigmas[i].matmul(&sigmas[j]));
            off = off.add(&ket.matmul(&bra.dagger()).scale(C64::new(w, 0.0)));
        }
    }
    let off_dag = off.dagger();
    Ok(assemble_control_blocks(
        &[
            ((0, 0), (0, 0), aa.matrix()),
            ((1, 1), (1, 1), aa.matrix()),
            ((0, 0), (1, 1), &off),
            ((1, 1), (0, 0), &off_dag),
        ],
        2,
        2,
    ))
}

/// `J_{A∘A}` for the Pauli-mixture channel.
pub fn compose_pauli_mixture(alpha: &[f64; 4]) -> Result<ChoiMatrix> {
    let a = pauli_mixture_choi(alpha)?;
    compose(&a, &a)
}

/// Choi of the channel with Kraus `{αᵢσᵢ}`.
pub fn pauli_mixture_choi(alpha: &[f64; 4]) -> Result<ChoiMatrix> {
    check_alpha(alpha)?;
    let ops: Vec<ComplexMatrix> = paulis()
        .iter()
        .zip(alpha)
        .map(|(s, &a)| s.scale(C64::new(a, 0.0)))
        .collect();
    Ok(KrausSet::new(ops)?.to_choi())
}

/// Closed form of the switch off-diagonal block:
/// `Σαᵢ⁴|I⟩⟩⟨⟨I| + 2[(α₀α₁)²-(α₂α₃)²]|X⟩⟩⟨⟨X| + (Y, Z analogues)`.
pub fn switch_offdiag_closed_form(alpha: &[f64; 4]) -> ComplexMatrix {
    let sigmas = paulis();
    let sq = |x: f64| x * x;
    let coeffs = [
        alpha.iter().map(|&a| a.powi(4)).sum::<f64>(),
        2.0 * (sq(alpha[0] * alpha[1]) - sq(alpha[2] * alpha[3])),
        2.0 * (sq(alpha[0] * alpha[2]) - sq(alpha[1] * alpha[3])),
        2.0 * (sq(alpha[0] * alpha[3]) - sq(alpha[1] * alpha[2])),
    ];
    let mut out = ComplexMatrix::zeros(4, 4);
    for (c, s) in coeffs.iter().zip(&sigmas) {
        let v = vectorize(s);
        out = out.add(&v.matmul(&v.dagger()).scale(C64::new(*c, 0.0)));
    }
    out
}

/// Pauli-mixture weights of `A∘A`.
pub fn concatenated_alpha(alpha: &[f64; 4]) -> [f64; 4] {
    let sq = |x: f64| x * x;
    [
        alpha.iter().map(|&a| a.powi(4)).sum::<f64>().sqrt(),
        (2.0 * (sq(alpha[0] * alpha[1]) + sq(alpha[2] * alpha[3]))).sqrt(),
        (2.0 * (sq(alpha[0] * alpha[2]) + sq(alpha[1] * alpha[3]))).sqrt(),
        (2.0 * (sq(alpha[0] * alpha[3]) + sq(alpha[1] * alpha[2]))).sqrt(),
    ]
}

/// Best Frobenius fit of a target block by an admissible coherence pair:
/// `min ‖B - |K⟩⟩⟨⟨L|‖_F` over `K = Σβᵢ(wᵢσᵢ)`, `L = Σγᵢ(wᵢσᵢ)` with
/// `Σ|β|², Σ|γ|² ≤ 1`. Returns the minimized residual and a lower bound
/// from unconstrained rank-one approximation.
pub fn best_coherence_fit(target: &ComplexMatrix, weights: &[f64; 4]) -> Result<(f64, f64)> {
    let sigmas = paulis();
    // coordinates of the target in the |σa⟩⟩⟨⟨σb| basis
    let vecs: Vec<ComplexMatrix> = sigmas.iter().map(vectorize).collect();
    let mut coords = ComplexMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            let z = vecs[a].hs_inner(&target.matmul(&vecs[b]).scale(C64::new(0.25, 0.0)));
            coords.set(a, b, z);
        }
    }
    // unconstrained rank-one lower bound from singular values
    let spec = hermitian_eig(&dilation(&coords))?;
    let mut sv: Vec<f64> = spec.eigenvalues.iter().map(|l| l.abs()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let sv: Vec<f64> = sv.chunks(2).map(|c| c[0]).take(4).collect();
    let lower = 2.0 * sv.iter().skip(1).map(|s| s * s).sum::<f64>().sqrt();

    let mut best = f64::INFINITY;
    let starts: Vec<Vec<C64>> = vec![
        weights.iter().map(|&w| C64::new(w, 0.0)).collect(),
        vec![ONE, ZERO, ZERO, ZERO],
        vec![ZERO, ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ONE, ZERO],
        vec![ZERO, ZERO, ZERO, ONE],
        vec![
            C64::new(0.5, 0.1),
            C64::new(-0.4, 0.2),
            C64::new(0.3, -0.3),
            C64::new(0.2, 0.4),
        ],
    ];
    for start in starts {
        let mut v: Vec<C64> = start
            .iter()
            .zip(weights)
            .map(|(s, &w)| if w > 0.0 { *s } else { ZERO })
            .collect();
        if v.iter().all(|z| *z == ZERO) {
            continue;
        }
        project_ball(&mut v, weights);
        let mut u = vec![ZERO; 4];
        let mut prev = f64::INFINITY;
        for _it in 0..200 {
            solve_factor(&coords, &v, weights, &mut u, false);
            solve_factor(&coords, &u, weights, &mut v, true);
            let res = residual(&coords, &u, &v);
            if (prev - res).abs() < 1e-15 {
                break;
            }
            prev = res;
        }
        best = best.min(prev);
    }
    // back to true Frobenius units: ‖Σ M_ab σσ‖_F = 2‖M‖_F
    Ok((2.0 * best.max(0.0).sqrt(), lower))
}

fn dilation(m: &ComplexMatrix) -> ComplexMatrix {
    let (r, c) = (m.rows(), m.cols());
    let mut h = ComplexMatrix::zeros(r + c, r + c);
    for i in 0..r {
        for j in 0..c {
            h.set(i, r + j, m.get(i, j));
            h.set(r + j, i, m.get(i, j).conj());
        }
    }
    h
}

fn residual(coords: &ComplexMatrix, u: &[C64], v: &[C64]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += (coords.get(a, b) - u[a] * v[b].conj()).norm_sqr();
        }
    }
    s
}

/// `Σᵢ |xᵢ/wᵢ|² ≤ 1` projection by Lagrange bisection (entries with `wᵢ = 0`
/// are forced to zero).
fn project_ball(x: &mut [C64], weights: &[f64; 4]) {
    for (xi, &w) in x.iter_mut().zip(weights) {
        if w == 0.0 {
            *xi = ZERO;
        }
    }
    let g = |mu: f64, x: &[C64]| -> f64 {
        x.iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(xi, &w)| {
                let scaled = xi.norm_sqr() / ((1.0 + mu / (w * w)) * (1.0 + mu / (w * w)));
                scaled / (w * w)
            })
            .sum()
    };
    if g(0.0, x) <= 1.0 {
        return;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while g(hi, x) > 1.0 {
        hi *= 2.0;
        if hi > 1e18 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid, x) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    for (xi, &w) in x.iter_mut().zip(weights) {
        if w > 0.0 {
            *xi /= 1.0 + mu / (w * w);
        }
    }
}

/// One half-step of alternating least squares with the ellipsoid constraint.
fn solve_factor(
    coords: &ComplexMatrix,
    fixed: &[C64],
    weights: &[f64; 4],
    out: &mut [C64],
    solving_v: bool,
) {
    let norm_sq: f64 = fixed.iter().map(|z| z.norm_sqr()).sum();
    if norm_sq < 1e-300 {
        for o in out.iter_mut() {
            *o = ZERO;
        }
        return;
    }
    for a in 0..4 {
        let mut c = ZERO;
        for b in 0..4 {
            if solving_v {
                // minimizing over v with u fixed: c_b = Σ_a coords[a][b]* u_a
                c += coords.get(b, a).conj() * fixed[b];
            } else {
                c += coords.get(a, b) * fixed[b];
            }
        }
        out[a] = if weights[a] > 0.0 { c / norm_sq } else { ZERO };
    }
    // rescale into the admissible ellipsoid with the exact Lagrange solution
    let viol: f64 = out
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(x, &w)| x.norm_sqr() / (w * w))
        .sum();
    if viol > 1.0 {
        // redo with the constrained stationary condition (norm_sq + μ/w²)x = c
        let cs: Vec<C64> = (0..4)
            .map(|a| {
                let mut c = ZERO;
                for b in 0..4 {
                    if solving_v {
                        c += coords.get(b, a).conj() * fixed[b];
                    } else {
                        c += coords.get(a, b) * fixed[b];
                    }
                }
                c
            })
            .collect();
        let g = |mu: f64| -> f64 {
            cs.iter()
                .zip(weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(c, &w)| c.norm_sqr() / ((norm_sq + mu / (w * w)) * (norm_sq + mu / (w * w)) * w * w))
                .sum()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while g(hi) > 1.0 && hi < 1e18 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = hi;
        for a in 0..4 {
            out[a] = if weights[a] > 0.0 {
                cs[a] / (norm_sq + mu / (weights[a] * weights[a]))
            } else {
                ZERO
            };
        }
    }
}

/// Comparison of the quantum switch action against controlled
/// concatenations for the Pauli-mixture channel `{αᵢσᵢ}`.
#[derive(Clone, Debug)]
pub struct SwitchComparison {
    /// The concatenation of two controlled copies of `A` reproduces the
    /// switch output (diagonal and coherence blocks).
    pub match_single: bool,
    /// A controlled version of `A∘A` reproduces the switch output.
    pub match_concat: bool,
    /// Best coherence-block residual of the `A∘A` family.
    pub residual: f64,
    /// Best coherence-block residual of the single-`A` family.
    pub residual_single: f64,
    /// Diagonal-block mismatch `‖J_{A∘A} - J_A‖` relevant to the single case.
    pub diag_mismatch: f64,
}

pub fn switch_vs_controlled(alpha: &[f64; 4]) -> Result<SwitchComparison> {
    check_alpha(alpha)?;
    let b = switch_offdiag_closed_form(alpha);
    let (res_single, _) = best_coherence_fit(&b, alpha)?;
    let alpha_prime = concatenated_alpha(alpha);
    let (res_concat, _) = best_coherence_fit(&b, &alpha_prime)?;
    let a = pauli_mixture_choi(alpha)?;
    let aa = compose_pauli_mixture(alpha)?;
    let diag_mismatch = a.matrix().max_abs_diff(aa.matrix());
    Ok(SwitchComparison {
        match_single: res_single <= tol::MATCH_TOL && diag_mismatch <= tol::MATCH_TOL,
        match_concat: res_concat <= tol::MATCH_TOL,
        residual: res_concat,
        residual_single: res_single,
        diag_mismatch,
    })
}

/// Best fit of the `id ⊗ D` coherence block `I/2` by an admissible pair
/// `|K⟩⟩⟨⟨L|` of the qubit depolarizing channel. The analytic minimum is
/// `√3/2 ≈ 0.866`, witnessing that `id ⊗ D` is not a concatenation.
pub fn id_depolarizing_offdiag_fit() -> Result<(f64, f64)> {
    let target = ComplexMatrix::identity(4).scale(C64::new(0.5, 0.0));
    best_coherence_fit(&target, &[0.5, 0.5, 0.5, 0.5])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{haar_unitary, random_cptp_kraus, seeded_rng};

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn classical_control_blocks() {
        let id = ChoiMatrix::identity(2);
        let cc = classical_controlled(&id).unwrap();
        let b00 = control_block(cc.choi(), (0, 0), (0, 0));
        let b11 = control_block(cc.choi(), (1, 1), (1, 1));
        let b01 = control_block(cc.choi(), (0, 0), (1, 1));
        assert!(b00.approx_eq(id.matrix(), 1e-14));
        assert!(b11.approx_eq(id.matrix(), 1e-14));
        assert!(b01.max_abs() < 1e-14);
        assert!(validate_channel(cc.choi()).is_cptp());
    }

    #[test]
    fn classical_control_random_is_cptp() {
        let mut rng = seeded_rng(4);
        for _ in 0..5 {
            let a = random_cptp_kraus(2, 2, 3, &mut rng).unwrap().to_choi();
            let cc = classical_controlled(&a).unwrap();
            assert!(validate_channel(cc.choi()).is_cptp());
            assert!(axioms_check(cc.choi(), &a).unwrap().passes());
        }
    }

    #[test]
    fn controlled_unitary_matches_direct_choi() {
        let mut rng = seeded_rng(12);
        let u = haar_unitary(2, &mut rng);
        let cc = controlled_unitary(&u).unwrap();
        // direct construction of C_U = |0⟩⟨0|⊗I + |1⟩⟨1|⊗U on (c, t)
        let mut cu = ComplexMatrix::zeros(4, 4);
        for t in 0..2 {
            cu.set(t, t, ONE);
        }
        for r in 0..2 {
            for c in 0..2 {
                cu.set(2 + r, 2 + c, u.get(r, c));
            }
        }
        let direct = ChoiMatrix::unitary(&cu);
        assert!(cc.choi().approx_eq(&direct, 1e-12));
        assert!(axioms_check(cc.choi(), &ChoiMatrix::unitary(&u)).unwrap().passes());
    }

    #[test]
    fn controlled_with_zero_k_is_classical() {
        let mut rng = seeded_rng(6);
        let a = random_cptp_kraus(3, 3, 2, &mut rng).unwrap().to_choi();
        let cc = controlled_with_k(&a, ComplexMatrix::zeros(3, 3)).unwrap();
        let cls = classical_controlled(&a).unwrap();
        assert!(cc.choi().approx_eq(cls.choi(), 1e-14));
    }

    #[test]
    fn controlled_depolarizing_half_identity() {
        let dep = ChoiMatrix::depolarizing();
        let k = ComplexMatrix::identity(2).scale(re(0.5));
        let cc = controlled_with_k(&dep, k).unwrap();
        let off = control_block(cc.choi(), (0, 0), (1, 1));
        // |I⟩⟩⟨⟨I|/2
        let iv = max_entangled(2);
        assert!(off.approx_eq(&iv.matmul(&iv.dagger()).scale(re(0.5)), 1e-14));
        assert!(validate_channel(cc.choi()).is_cptp());
        assert!((coherence_norm(&cc, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn coherence_operator_rejections() {
        let dep = ChoiMatrix::depolarizing();
        // outside the span: nothing in the depolarizing span has off-diagonal
        // support only, e.g. |0⟩⟨1| + |1⟩⟨0| is X/… in span; use a rank-one
        // non-Pauli combination instead
        let bad = ComplexMatrix::matrix_unit(2, 0, 0);
        assert!(matches!(
            CoherenceOperator::new(&dep, bad),
            Err(Error::InvalidCoherence { .. })
        ));
        // norm bound: 2·(σ0/2) has Σ|β|² = 4
        let too_big = ComplexMatrix::identity(2);
        assert!(CoherenceOperator::new(&dep, too_big).is_err());
    }

    #[test]
    fn coherence_norm_law() {
        let mut rng = seeded_rng(3);
        let u = haar_unitary(2, &mut rng);
        let cc = controlled_unitary(&u).unwrap();
        // ‖ΔJ‖₁ = 2·√2·√2 = 4 for a qubit unitary
        assert!((coherence_norm(&cc, 1.0).unwrap() - 4.0).abs() < 1e-10);
        let cls = classical_controlled(&ChoiMatrix::unitary(&u)).unwrap();
        assert!(coherence_norm(&cls, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn delta_j_two_eigenvalues() {
        let mut rng = seeded_rng(19);
        let a = random_cptp_kraus(2, 2, 3, &mut rng).unwrap().to_choi();
        let k = most_coherent_k(&a, None).unwrap();
        let expected = (2.0 * k.hs_norm_sq()).sqrt();
        let cc = controlled_with_k(&a, k.matrix().clone()).unwrap();
        let spec = hermitian_eig(&delta_j(cc.choi())).unwrap();
        let nonzero: Vec<f64> = spec
            .eigenvalues
            .iter()
            .copied()
            .filter(|l| l.abs() > 1e-10)
            .collect();
        assert_eq!(nonzero.len(), 2);
        assert!((nonzero[0] - expected).abs() < 1e-10);
        assert!((nonzero[1] + expected).abs() < 1e-10);
    }

    #[test]
    fn most_coherent_k_cases() {
        let mut rng = seeded_rng(23);
        let u = haar_unitary(3, &mut rng);
        let k = most_coherent_k(&ChoiMatrix::unitary(&u), None).unwrap();
        assert!((k.hs_norm_sq() - 3.0).abs() < 1e-10);
        // equality with U up to a global phase
        let phase = k.matrix().hs_inner(&u) / re(3.0);
        assert!((phase.norm() - 1.0).abs() < 1e-9);
        assert!(k.matrix().scale(phase).approx_eq(&u, 1e-9));

        let dep = most_coherent_k(&ChoiMatrix::depolarizing(), None).unwrap();
        assert!((dep.hs_norm_sq() - 0.5).abs() < 1e-10);

        // Kraus {√.7 I, √.3 X}: the maximal orthogonal Kraus operator is √.7 I
        let k = KrausSet::new(vec![
            ComplexMatrix::identity(2).scale(re(0.7f64.sqrt())),
            paulis()[1].scale(re(0.3f64.sqrt())),
        ])
        .unwrap();
        let best = most_coherent_k(&k.to_choi(), None).unwrap();
        // Tr K†K = 0.7 · Tr I₂ = 1.4
        assert!((best.hs_norm_sq() - 1.4).abs() < 1e-10);
        assert!(best
            .matrix()
            .approx_eq(&ComplexMatrix::identity(2).scale(re(0.7f64.sqrt())), 1e-9));
    }

    #[test]
    fn axioms_hold_for_random_coherent_controls() {
        let mut rng = seeded_rng(77);
        for d in [2usize, 3] {
            let a = random_cptp_kraus(d, d, 2, &mut rng).unwrap().to_choi();
            let k = most_coherent_k(&a, None).unwrap();
            let cc = controlled_with_k(&a, k.matrix().clone()).unwrap();
            let report = axioms_check(cc.choi(), &a).unwrap();
            assert!(report.passes(), "d={d} {report:?}");
        }
    }

    #[test]
    fn axioms_reject_swap() {
        // SWAP on control⊗target preserves nothing about the control
        let mut swap = ComplexMatrix::zeros(4, 4);
        swap.set(0, 0, ONE);
        swap.set(1, 2, ONE);
        swap.set(2, 1, ONE);
        swap.set(3, 3, ONE);
        let j = ChoiMatrix::unitary(&swap);
        let report = axioms_check(&j, &ChoiMatrix::identity(2)).unwrap();
        assert!(report.control_residual > 0.5);
        assert!(!report.passes());
    }

    #[test]
    fn controlled_two_reduces_and_composes() {
        let mut rng = seeded_rng(31);
        let b = random_cptp_kraus(2, 2, 3, &mut rng).unwrap().to_choi();
        let lk = most_coherent_k(&b, None).unwrap();
        let id = ChoiMatrix::identity(2);
        let two = controlled_two(
            &id,
            ComplexMatrix::identity(2),
            &b,
            lk.matrix().clone(),
        )
        .unwrap();
        let direct = controlled_with_k(&b, lk.matrix().clone()).unwrap();
        assert!(two.choi.approx_eq(direct.choi(), 1e-12));

        // equality with the concatenation C_B^L ∘ C̄_A^K
        let a = random_cptp_kraus(2, 2, 2, &mut rng).unwrap().to_choi();
        let ka = most_coherent_k(&a, None).unwrap();
        let two = controlled_two(&a, ka.matrix().clone(), &b, lk.matrix().clone()).unwrap();
        let cc_a_inv = swap_control(controlled_with_k(&a, ka.matrix().clone()).unwrap().choi());
        let cc_b = controlled_with_k(&b, lk.matrix().clone()).unwrap();
        let composed = compose(&cc_a_inv, cc_b.choi()).unwrap();
        assert!(two.choi.approx_eq(&composed, 1e-12));
        assert!(validate_channel(&two.choi).is_cptp());
    }

    #[test]
    fn depolarizing_two_op_quarter_identity() {
        let dep = ChoiMatrix::depolarizing();
        let half = ComplexMatrix::identity(2).scale(re(0.5));
        let two = controlled_two(&dep, half.clone(), &dep, half).unwrap();
        let off = control_block(&two.choi, (0, 0), (1, 1));
        let iv = max_entangled(2);
        assert!(off.approx_eq(&iv.matmul(&iv.dagger()).scale(re(0.25)), 1e-14));
    }

    #[test]
    fn switch_closed_form_matches_brute_force() {
        let cases: [[f64; 4]; 3] = [
            [0.5, 0.5, 0.5, 0.5],
            [0.7f64.sqrt(), 0.3f64.sqrt(), 0.0, 0.0],
            [0.6f64.sqrt(), 0.2f64.sqrt(), 0.15f64.sqrt(), 0.05f64.sqrt()],
        ];
        for alpha in cases {
            let j = switch_action_pauli(&alpha).unwrap();
            let off = control_block(&j, (0, 0), (1, 1));
            let closed = switch_offdiag_closed_form(&alpha);
            assert!(off.approx_eq(&closed, 1e-12));
        }
        // identity channel: B = |I⟩⟩⟨⟨I|
        let j = switch_action_pauli(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let off = control_block(&j, (0, 0), (1, 1));
        let iv = max_entangled(2);
        assert!(off.approx_eq(&iv.matmul(&iv.dagger()), 1e-13));

        // α = (√.7, √.3, 0, 0): B = 0.58·|I⟩⟩⟨⟨I| + 0.42·|X⟩⟩⟨⟨X|
        let alpha = [0.7f64.sqrt(), 0.3f64.sqrt(), 0.0, 0.0];
        let b = switch_offdiag_closed_form(&alpha);
        let xv = vectorize(&paulis()[1]);
        let expected = iv
            .matmul(&iv.dagger())
            .scale(re(0.58))
            .add(&xv.matmul(&xv.dagger()).scale(re(0.42)));
        assert!(b.approx_eq(&expected, 1e-12));
    }

    #[test]
    fn switch_depolarizing_quarter_coefficient() {
        let alpha = [0.5; 4];
        let j = switch_action_pauli(&alpha).unwrap();
        let off = control_block(&j, (0, 0), (1, 1));
        let iv = max_entangled(2);
        assert!(off.approx_eq(&iv.matmul(&iv.dagger()).scale(re(0.25)), 1e-13));
    }

    #[test]
    fn switch_comparison_classification() {
        let dep = switch_vs_controlled(&[0.5; 4]).unwrap();
        assert!(dep.match_single && dep.match_concat);
        assert!(dep.residual < 1e-8);

        let pauli = switch_vs_controlled(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(pauli.match_concat);

        let skew = switch_vs_controlled(&[0.7f64.sqrt(), 0.3f64.sqrt(), 0.0, 0.0]).unwrap();
        assert!(!skew.match_single && !skew.match_concat);
        assert!(skew.residual > 1e-3);
    }

    #[test]
    fn id_depolarizing_gap() {
        let (fit, lower) = id_depolarizing_offdiag_fit().unwrap();
        assert!(fit > 0.4);
        assert!((fit - 3f64.sqrt() / 2.0).abs() < 1e-6);
        assert!(lower <= fit + 1e-9);
    }

    #[test]
    fn representation_independent_construction() {
        let mut rng = seeded_rng(44);
        let u = haar_unitary(2, &mut rng);
        let phi = 0.7f64;
        let u2 = u.scale(C64::from_polar(1.0, phi));
        let k = u2.clone();
        let a1 = ChoiMatrix::unitary(&u);
        let a2 = ChoiMatrix::unitary(&u2);
        assert!(a1.approx_eq(&a2, 1e-12));
        let c1 = controlled_with_k(&a1, k.clone()).unwrap();
        let c2 = controlled_with_k(&a2, k).unwrap();
        assert!(c1.choi().approx_eq(c2.choi(), 1e-12));
    }
}
