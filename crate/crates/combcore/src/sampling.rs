//! Seeded random objects: Haar unitaries, CPTP channels, states, Hamiltonians.
//!
//! Everything routes through [`seeded_rng`] / [`derived_rng`] so that any
//! experiment is reproducible from a single integer seed, and sampled trials
//! can draw independent streams indexed by `(seed, stream)`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channels::{ChoiMatrix, KrausSet};
use crate::error::Result;
use crate::tensor::{hermitian_eig, ComplexMatrix, C64, ONE, ZERO};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for trial `stream` of master seed `seed`
/// (splitmix64 finalizer on the pair).
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(stream)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; u clamped away from zero
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

fn complex_normal(rng: &mut impl Rng) -> C64 {
    Complex64::new(
        standard_normal(rng) / 2f64.sqrt(),
        standard_normal(rng) / 2f64.sqrt(),
    )
}

/// Square matrix of iid standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the phases of the
/// R diagonal fixed.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    let (q, r) = gram_schmidt_qr(&g);
    let mut phases = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        let rii = r.get(i, i);
        let ph = if rii.norm() > 0.0 { rii / rii.norm() } else { ONE };
        phases.set(i, i, ph);
    }
    q.matmul(&phases)
}

/// Haar-distributed special unitary: Haar unitary divided by a principal
/// d-th root of its determinant.
pub fn haar_special_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let u = haar_unitary(d, rng);
    let mut det = ONE;
    let spec = crate::tensor::unitary_eig(&u).expect("haar sample is unitary");
    for z in &spec.0 {
        det *= z;
    }
    let correction = Complex64::from_polar(1.0, -det.arg() / d as f64);
    u.scale(correction)
}

/// Modified Gram-Schmidt QR with a reorthogonalization pass.
fn gram_schmidt_qr(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q = m.clone();
    let mut r = ComplexMatrix::zeros(cols, cols);
    for j in 0..cols {
        for _pass in 0..2 {
            for i in 0..j {
                let mut proj = ZERO;
                for k in 0..rows {
                    proj += q.get(k, i).conj() * q.get(k, j);
                }
                r.set(i, j, r.get(i, j) + proj);
                for k in 0..rows {
                    let z = q.get(k, j) - proj * q.get(k, i);
                    q.set(k, j, z);
                }
            }
        }
        let norm: f64 = (0..rows).map(|k| q.get(k, j).norm_sqr()).sum::<f64>().sqrt();
        r.set(j, j, Complex64::new(norm, 0.0));
        for k in 0..rows {
            let z = q.get(k, j) / norm;
            q.set(k, j, z);
        }
    }
    (q, r)
}

/// Haar-distributed unit vector.
pub fn random_state_vector(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut v = ComplexMatrix::from_fn(d, 1, |_, _| complex_normal(rng));
    let norm = v.frobenius_norm();
    v = v.scale(Complex64::new(1.0 / norm, 0.0));
    v
}

/// Random density operator `GG†/Tr(GG†)`.
pub fn random_density(d: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    let p = g.matmul(&g.dagger());
    let t = p.trace().re;
    p.scale(Complex64::new(1.0 / t, 0.0))
}

/// Random Hermitian matrix with operator norm scaled to `norm_bound`.
pub fn random_hermitian(d: usize, norm_bound: f64, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    let h = g.add(&g.dagger()).scale(Complex64::new(0.5, 0.0));
    let spec = hermitian_eig(&h).expect("symmetrized matrix is Hermitian");
    let top = spec
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &l| m.max(l.abs()))
        .max(1e-12);
    h.scale(Complex64::new(norm_bound / top, 0.0))
}

/// Random trace-preserving Kraus set: Ginibre stack normalized by
/// `(Σ GᵢᵀGᵢ)^{-1/2}`.
pub fn random_cptp_kraus(
    d_in: usize,
    d_out: usize,
    kraus_count: usize,
    rng: &mut impl Rng,
) -> Result<KrausSet> {
    let gs: Vec<ComplexMatrix> = (0..kraus_count.max(1))
        .map(|_| ginibre(d_out, d_in, rng))
        .collect();
    let mut s = ComplexMatrix::zeros(d_in, d_in);
    for g in &gs {
        s = s.add(&g.dagger().matmul(g));
    }
    let spec = hermitian_eig(&s)?;
    // S^{-1/2}
    let v = &spec.eigenvectors;
    let mut scaled = v.clone();
    for c in 0..d_in {
        let lambda = spec.eigenvalues[c].max(1e-14);
        let inv_sqrt = 1.0 / lambda.sqrt();
        for r in 0..d_in {
            let z = scaled.get(r, c) * inv_sqrt;
            scaled.set(r, c, z);
        }
    }
    let s_inv_sqrt = scaled.matmul(&v.dagger());
    let ops: Vec<ComplexMatrix> = gs.iter().map(|g| g.matmul(&s_inv_sqrt)).collect();
    KrausSet::new(ops)
}

/// Random CPTP channel as a Choi matrix.
pub fn random_cptp_choi(
    d_in: usize,
    d_out: usize,
    kraus_count: usize,
    rng: &mut impl Rng,
) -> Result<ChoiMatrix> {
    Ok(random_cptp_kraus(d_in, d_out, kraus_count, rng)?.to_choi())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol;

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = seeded_rng(7);
        for d in [2, 3, 4] {
            let u = haar_unitary(d, &mut rng);
            assert!(u.unitarity_residual() < tol::UNITARY_TOL);
        }
    }

    #[test]
    fn haar_special_unitary_has_unit_det() {
        let mut rng = seeded_rng(11);
        for d in [2, 3] {
            let u = haar_special_unitary(d, &mut rng);
            let (vals, _) = crate::tensor::unitary_eig(&u).unwrap();
            let det: C64 = vals.iter().product();
            assert!((det - ONE).norm() < 1e-9);
        }
    }

    #[test]
    fn random_cptp_is_trace_preserving() {
        let mut rng = seeded_rng(3);
        let k = random_cptp_kraus(3, 2, 4, &mut rng).unwrap();
        assert!(k.tp_residual() < 1e-12);
    }

    #[test]
    fn derived_streams_differ_and_reproduce() {
        let a: u64 = derived_rng(5, 0).gen();
        let b: u64 = derived_rng(5, 1).gen();
        let a2: u64 = derived_rng(5, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }
}
