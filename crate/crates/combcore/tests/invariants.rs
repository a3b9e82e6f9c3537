//! Property tests for the module-level invariants.

use num_complex::Complex64;
use proptest::prelude::*;

use combcore::channels::{apply_channel, choi_to_orthogonal_kraus, validate_channel, KrausSet};
use combcore::controlled::{controlled_with_k, most_coherent_k};
use combcore::sampling::{random_cptp_kraus, seeded_rng};
use combcore::tensor::{
    devectorize, expm_generator, hermitian_eig, kron, partial_trace, schatten_norm, unitary_root,
    vectorize, ComplexMatrix, SubsystemShape,
};

fn complex_entry() -> impl Strategy<Value = Complex64> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    proptest::collection::vec(complex_entry(), rows * cols)
        .prop_map(move |data| ComplexMatrix::new(rows, cols, data).unwrap())
}

fn square(max_side: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max_side).prop_flat_map(|n| matrix(n, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vectorize_devectorize_inverse(m in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| matrix(r, c))) {
        let v = vectorize(&m);
        let back = devectorize(&v, m.cols(), m.rows()).unwrap();
        prop_assert!(back.approx_eq(&m, 0.0));
        prop_assert!(vectorize(&back).approx_eq(&v, 0.0));
    }

    #[test]
    fn partial_trace_of_kron(a in square(3), b in square(3)) {
        let prod = kron(&a, &b);
        let shape = SubsystemShape::new(vec![a.rows(), b.rows()]).unwrap();
        let left = partial_trace(&prod, &shape, &[0]).unwrap();
        prop_assert!(left.approx_eq(&a.scale(b.trace()), 1e-10));
        let right = partial_trace(&prod, &shape, &[1]).unwrap();
        prop_assert!(right.approx_eq(&b.scale(a.trace()), 1e-10));
    }

    #[test]
    fn schatten_two_is_frobenius(m in square(5)) {
        let s2 = schatten_norm(&m, 2.0).unwrap();
        let frob_sq = m.hs_inner(&m).re;
        prop_assert!((s2 * s2 - frob_sq).abs() <= 1e-12 * (1.0 + frob_sq));
    }

    #[test]
    fn hermitian_eig_reconstructs(m in square(6)) {
        let h = m.add(&m.dagger()).scale(Complex64::new(0.5, 0.0));
        let spec = hermitian_eig(&h).unwrap();
        prop_assert!(spec.reconstruct().approx_eq(&h, 1e-10));
        // orthonormality of the eigenvector columns
        let v = &spec.eigenvectors;
        let gram = v.dagger().matmul(v);
        prop_assert!(gram.approx_eq(&ComplexMatrix::identity(h.rows()), 1e-10));
    }

    #[test]
    fn expm_is_unitary_and_semigroup(m in square(4), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let h = m.add(&m.dagger()).scale(Complex64::new(0.5, 0.0));
        let u1 = expm_generator(&h, t1).unwrap();
        prop_assert!(u1.unitarity_residual() <= 1e-10);
        let u2 = expm_generator(&h, t2).unwrap();
        let u12 = expm_generator(&h, t1 + t2).unwrap();
        prop_assert!(u1.matmul(&u2).approx_eq(&u12, 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unitary_root_defining_property(seed in 0u64..10_000, d in 2usize..5, n in 1usize..6) {
        let mut rng = seeded_rng(seed);
        let u = combcore::sampling::haar_unitary(d, &mut rng);
        let root = unitary_root(&u, n).unwrap();
        prop_assert!(root.pow(n).approx_eq(&u, 1e-9));
        prop_assert!(root.unitarity_residual() <= 1e-9);
    }

    #[test]
    fn kraus_remix_leaves_choi_fixed(seed in 0u64..10_000) {
        let mut rng = seeded_rng(seed);
        let k = random_cptp_kraus(2, 2, 3, &mut rng).unwrap();
        let mix = combcore::sampling::haar_unitary(3, &mut rng);
        let mut remixed = Vec::new();
        for i in 0..3 {
            let mut op = ComplexMatrix::zeros(2, 2);
            for (j, kop) in k.operators().iter().enumerate() {
                op = op.add(&kop.scale(mix.get(i, j)));
            }
            remixed.push(op);
        }
        let k2 = KrausSet::new(remixed).unwrap();
        prop_assert!(k.to_choi().approx_eq(&k2.to_choi(), 1e-10));
    }

    #[test]
    fn choi_round_trip_and_application(seed in 0u64..10_000, d_in in 2usize..4, d_out in 2usize..4) {
        let mut rng = seeded_rng(seed);
        let k = random_cptp_kraus(d_in, d_out, 2, &mut rng).unwrap();
        let j = k.to_choi();
        let back = choi_to_orthogonal_kraus(&j).unwrap();
        prop_assert!(back.to_choi().approx_eq(&j, 1e-10));
        let rho = combcore::sampling::random_density(d_in, &mut rng);
        let via_choi = apply_channel(&j, &rho).unwrap();
        let via_kraus = k.apply(&rho).unwrap();
        prop_assert!(via_choi.approx_eq(&via_kraus, 1e-12));
    }

    #[test]
    fn most_coherent_control_is_cptp(seed in 0u64..10_000, d in 2usize..4) {
        let mut rng = seeded_rng(seed);
        let a = random_cptp_kraus(d, d, 2, &mut rng).unwrap().to_choi();
        let k = most_coherent_k(&a, None).unwrap();
        let cc = controlled_with_k(&a, k.matrix().clone()).unwrap();
        prop_assert!(validate_channel(cc.choi()).is_cptp());
    }
}
