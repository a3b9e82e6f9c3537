//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantity and its pinned tolerance.
//!
//! Run with `cargo test -p combcore --test acceptance -- --nocapture` to see
//! every line.

use std::time::Instant;

use num_complex::Complex64;

use combcore::channels::{choi_to_orthogonal_kraus, validate_channel, ChoiMatrix, KrausSet};
use combcore::combs::{
    check_comb_choi, comb_kraus_conditions, link_apply, most_coherent_s, random_circuit_comb,
    CombKraus, CombShape,
};
use combcore::controlled::{
    coherence_norm, controlled_two, controlled_with_k, id_depolarizing_offdiag_fit,
    most_coherent_k, switch_action_pauli, switch_vs_controlled,
};
use combcore::controllization::{
    antisym_state, clifford_coefficient_prediction, eigenstate_controllization, fit_loglog_slope,
    expected_randomization_s0, generic_qubit_hamiltonian, multicopy_controllization,
    pauli_coefficient_prediction, pauli_vs_clifford, prepare_traceout_comb,
    randomization_comb_choi, randomized_coefficients, randomized_controllization, Hamiltonian,
    RandomizationMode, RandomizationSet,
};
use combcore::sampling::{
    derived_rng, haar_special_unitary, haar_unitary, random_cptp_kraus, random_density,
    seeded_rng,
};
use combcore::tensor::{
    hermitian_eig, kron, special_unitary_root, unitary_eig, ComplexMatrix, C64,
};

fn verdict(num: u32, name: &str, pass: bool, detail: &str, started: Instant) {
    println!(
        "ACCEPTANCE {num:02} {name}: {} ({detail}; {:.2} s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {num:02} {name} failed: {detail}");
}

fn re(x: f64) -> C64 {
    Complex64::new(x, 0.0)
}

/// Random coherence operator: coefficients in the unit ball against the
/// orthogonal Kraus set.
fn random_coherence(
    a: &ChoiMatrix,
    rng: &mut impl rand::Rng,
) -> combcore::error::Result<ComplexMatrix> {
    let basis = choi_to_orthogonal_kraus(a)?;
    let m = basis.operators().len();
    let mut beta: Vec<C64> = (0..m)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm: f64 = beta.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
    let radius: f64 = rng.gen_range(0.1..1.0f64);
    for b in beta.iter_mut() {
        *b = *b / norm * radius.sqrt();
    }
    let mut k = ComplexMatrix::zeros(a.d_out(), a.d_in());
    for (b, op) in beta.iter().zip(basis.operators()) {
        k = k.add(&op.scale(*b));
    }
    Ok(k)
}

#[test]
fn acceptance_01_coherence_eigenvalue_law() {
    let started = Instant::now();
    let mut rng = seeded_rng(101);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let d = if case % 2 == 0 { 2 } else { 3 };
        let a = random_cptp_kraus(d, d, 1 + case % 4, &mut rng)
            .unwrap()
            .to_choi();
        let k = random_coherence(&a, &mut rng).unwrap();
        let cc = controlled_with_k(&a, k.clone()).unwrap();
        let tr_kk = k.hs_inner(&k).re;
        for p in [1.0, 2.0] {
            let measured = coherence_norm(&cc, p).unwrap();
            let predicted = 2f64.powf(1.0 / p) * (d as f64).sqrt() * tr_kk.sqrt();
            worst = worst.max((measured - predicted).abs());
        }
    }
    verdict(
        1,
        "coherence-eigenvalue-law",
        worst < 1e-9 && started.elapsed().as_secs_f64() < 5.0,
        &format!("max |measured - 2^(1/p)·√d·√TrK†K| = {worst:.3e}, tolerance 1e-9"),
        started,
    );
}

#[test]
fn acceptance_02_depolarizing_coherence_bound() {
    let started = Instant::now();
    let k = most_coherent_k(&ChoiMatrix::depolarizing(), None).unwrap();
    let deviation = (k.hs_norm_sq() - 0.5).abs();
    verdict(
        2,
        "depolarizing-coherence-bound",
        deviation < 1e-10,
        &format!("max Tr K†K = {:.12}, |Δ| = {deviation:.3e}", k.hs_norm_sq()),
        started,
    );
}

#[test]
fn acceptance_03_switch_equivalence() {
    let started = Instant::now();
    // depolarizing: switch output equals the controlled concatenation with
    // K = L = I/2 entrywise
    let switch = switch_action_pauli(&[0.5; 4]).unwrap();
    let dep = ChoiMatrix::depolarizing();
    let half = ComplexMatrix::identity(2).scale(re(0.5));
    let two = controlled_two(&dep, half.clone(), &dep, half).unwrap();
    let eq_residual = switch.matrix().max_abs_diff(two.choi.matrix());

    // a skewed mixture admits no controlled concatenation
    let skew = switch_vs_controlled(&[0.7f64.sqrt(), 0.3f64.sqrt(), 0.0, 0.0]).unwrap();
    let pass = eq_residual < 1e-12 && skew.residual > 1e-3 && !skew.match_concat;
    verdict(
        3,
        "switch-equivalence",
        pass && started.elapsed().as_secs_f64() < 10.0,
        &format!(
            "depolarizing equality residual {eq_residual:.3e} (tol 1e-12), \
             skewed best-fit residual {:.3e} (> 1e-3)",
            skew.residual
        ),
        started,
    );
}

#[test]
fn acceptance_04_comb_condition_cross_check() {
    let started = Instant::now();
    let mut rng = seeded_rng(104);
    let mut agreements = 0usize;
    let mut valid_pass = 0usize;
    let mut random_fail = 0usize;
    for idx in 0..100 {
        let slots = 1 + idx % 2;
        let valid_instance = idx < 50;
        let kraus = if valid_instance {
            random_circuit_comb(slots, 2, 2, &mut rng).unwrap()
        } else {
            let shape = CombShape::uniform(slots, 2).unwrap();
            let cols = 4usize.pow(slots as u32);
            let ops = vec![
                combcore::sampling::ginibre(4, cols, &mut rng),
                combcore::sampling::ginibre(4, cols, &mut rng),
            ];
            CombKraus::new(ops, shape).unwrap()
        };
        let kraus_verdict = comb_kraus_conditions(&kraus).unwrap().passes();
        let choi_verdict = check_comb_choi(&kraus.to_choi()).unwrap().valid();
        if kraus_verdict == choi_verdict {
            agreements += 1;
        }
        if valid_instance && kraus_verdict {
            valid_pass += 1;
        }
        if !valid_instance && !kraus_verdict {
            random_fail += 1;
        }
    }
    verdict(
        4,
        "comb-condition-cross-check",
        agreements == 100 && valid_pass == 50 && random_fail == 50
            && started.elapsed().as_secs_f64() < 60.0,
        &format!(
            "verdict agreement {agreements}/100, circuit-built pass {valid_pass}/50, \
             random fail {random_fail}/50"
        ),
        started,
    );
}

#[test]
fn acceptance_05_neutralization() {
    let started = Instant::now();
    let mut rng = seeded_rng(105);
    let shape = CombShape::uniform(1, 2).unwrap();
    let target = ChoiMatrix::identity(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let rho = random_density(2, &mut rng);
        let comb = prepare_traceout_comb(&rho, &shape).unwrap();
        let input = random_cptp_kraus(2, 2, 1 + (rng.gen_range(0..4usize)), &mut rng)
            .unwrap()
            .to_choi();
        let out = link_apply(&comb, &[input]).unwrap();
        worst = worst.max(out.matrix().max_abs_diff(target.matrix()));
    }
    use rand::Rng;
    verdict(
        5,
        "neutralization",
        worst < 1e-10,
        &format!("max |output - |I⟩⟩⟨⟨I|| = {worst:.3e}, tolerance 1e-10"),
        started,
    );
}

#[test]
fn acceptance_06_eigenstate_controllization() {
    let started = Instant::now();
    let mut rng = seeded_rng(106);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        use rand::Rng;
        let d = 2 + rng.gen_range(0..2usize);
        // unitary with a known eigenvector: conjugated random phases
        let v = haar_unitary(d, &mut rng);
        let mut diag = ComplexMatrix::zeros(d, d);
        for j in 0..d {
            diag.set(j, j, Complex64::from_polar(1.0, rng.gen_range(-3.0..3.0)));
        }
        let u = v.matmul(&diag).matmul(&v.dagger());
        let psi = v.column(0);
        let cc = eigenstate_controllization(&u, &psi).unwrap();
        let branch = u.scale(Complex64::from_polar(1.0, -cc.theta()));
        let direct = controlled_with_k(&ChoiMatrix::unitary(&u), branch).unwrap();
        worst = worst.max(cc.choi().matrix().max_abs_diff(direct.choi().matrix()));
    }
    verdict(
        6,
        "eigenstate-controllization",
        worst < 1e-10,
        &format!("max |output - controlled-(e^(-iθ)U)| = {worst:.3e}, tolerance 1e-10"),
        started,
    );
}

#[test]
fn acceptance_07_multicopy_controllization() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        for s in 0..20u64 {
            let mut rng = derived_rng(107, d as u64 * 1000 + s);
            let u = haar_special_unitary(d, &mut rng);
            let v = special_unitary_root(&u, d).unwrap();
            let cc = multicopy_controllization(&v, d).unwrap();
            let direct = controlled_with_k(&ChoiMatrix::unitary(&u), u.clone()).unwrap();
            worst = worst.max(cc.choi().matrix().max_abs_diff(direct.choi().matrix()));
        }
    }
    verdict(
        7,
        "multicopy-controllization",
        worst < 1e-10 && started.elapsed().as_secs_f64() < 30.0,
        &format!("max |circuit - controlled-U| = {worst:.3e} over d ∈ {{2,3}}, tolerance 1e-10"),
        started,
    );
}

#[test]
fn acceptance_08_antisymmetric_covariance() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        let a = antisym_state(d).unwrap();
        for s in 0..50u64 {
            let mut rng = derived_rng(108, d as u64 * 1000 + s);
            let u = haar_unitary(d, &mut rng);
            let (vals, _) = unitary_eig(&u).unwrap();
            let det: C64 = vals.iter().product();
            let mut power = u.clone();
            for _ in 1..d {
                power = kron(&power, &u);
            }
            worst = worst.max(power.matmul(&a).max_abs_diff(&a.scale(det)));
        }
    }
    verdict(
        8,
        "antisymmetric-covariance",
        worst < 1e-12,
        &format!("max |U^⊗d|A_d⟩ - det(U)|A_d⟩| = {worst:.3e}, tolerance 1e-12"),
        started,
    );
}

#[test]
fn acceptance_09_randomization_scaling() {
    let started = Instant::now();
    let n_list = [4usize, 8, 16, 32, 64, 128, 256];
    let set = RandomizationSet::pauli();
    let mut slopes = Vec::new();
    for s in 0..10u64 {
        let mut rng = derived_rng(109, s);
        let h = generic_qubit_hamiltonian(&mut rng);
        let records: Vec<_> = n_list
            .iter()
            .map(|&n| {
                let out =
                    randomized_controllization(&h, 1.0, n, &set, 0, RandomizationMode::Average)
                        .unwrap();
                combcore::controllization::ScalingRecord {
                    n,
                    error: out.error,
                    phase: out.phase,
                }
            })
            .collect();
        slopes.push(fit_loglog_slope(&records));
    }
    let worst = slopes
        .iter()
        .map(|s| (s + 1.0).abs())
        .fold(0.0f64, f64::max);
    verdict(
        9,
        "randomization-scaling",
        worst <= 0.15 && started.elapsed().as_secs_f64() < 60.0,
        &format!(
            "log-log slopes in [{:.3}, {:.3}], band -1 ± 0.15",
            slopes.iter().cloned().fold(f64::INFINITY, f64::min),
            slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        ),
        started,
    );
}

#[test]
fn acceptance_10_coefficient_formulas() {
    let started = Instant::now();
    let n = 100usize;
    let bound = 5.0 / (n as f64 * n as f64);
    let mut worst_pauli: f64 = 0.0;
    let mut worst_clifford: f64 = 0.0;
    let mut worst_trio_asym: f64 = 0.0;
    let mut worst_trio_mean: f64 = 0.0;
    let pauli = RandomizationSet::pauli();
    let clifford = RandomizationSet::clifford();
    let mut hs = vec![Hamiltonian::new(combcore::tensor::paulis()[3].clone()).unwrap()];
    for s in 0..3u64 {
        hs.push(generic_qubit_hamiltonian(&mut derived_rng(110, s)));
    }
    for h in &hs {
        let meas = randomized_coefficients(h, 1.0, n, &pauli).unwrap();
        let pred = pauli_coefficient_prediction(h, 1.0, n);
        for i in 0..4 {
            worst_pauli = worst_pauli.max((meas.c[i] - pred.c[i]).abs());
        }
        let meas_c = randomized_coefficients(h, 1.0, n, &clifford).unwrap();
        let pred_c = clifford_coefficient_prediction(h, 1.0, n);
        for i in 0..4 {
            worst_clifford = worst_clifford.max((meas_c.c[i] - pred_c.c[i]).abs());
        }
        worst_trio_asym = worst_trio_asym
            .max((meas_c.c[1] - meas_c.c[2]).abs())
            .max((meas_c.c[1] - meas_c.c[3]).abs());
        let pauli_mean = (meas.c[1] + meas.c[2] + meas.c[3]) / 3.0;
        worst_trio_mean = worst_trio_mean.max((meas_c.c[1] - pauli_mean).abs());
    }
    let pass = worst_pauli < bound
        && worst_clifford < bound
        && worst_trio_asym < 1e-12
        && worst_trio_mean < bound;
    verdict(
        10,
        "coefficient-formulas",
        pass,
        &format!(
            "pauli |Δ| ≤ {worst_pauli:.3e}, clifford |Δ| ≤ {worst_clifford:.3e} \
             (bound {bound:.1e}); trio asymmetry {worst_trio_asym:.3e} (tol 1e-12); \
             trio vs pauli mean {worst_trio_mean:.3e}"
        ),
        started,
    );
}

#[test]
fn acceptance_11_phase_law() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let t = 1.0;
    for s in 0..5u64 {
        let mut rng = derived_rng(111, s);
        let mut h = combcore::sampling::random_hermitian(2, 0.8, &mut rng);
        use rand::Rng;
        let lift = rng.gen_range(0.2..0.6);
        h.set(0, 0, h.get(0, 0) + re(lift));
        h.set(1, 1, h.get(1, 1) + re(lift));
        let h = Hamiltonian::new(h).unwrap();
        assert!(h.trace().abs() > 0.1);
        let out = randomized_controllization(
            &h,
            t,
            1024,
            &RandomizationSet::pauli(),
            0,
            RandomizationMode::Average,
        )
        .unwrap();
        let expected = h.trace() / 2.0 * t;
        let diff = (out.phase - expected + std::f64::consts::PI)
            .rem_euclid(2.0 * std::f64::consts::PI)
            - std::f64::consts::PI;
        worst = worst.max(diff.abs());
    }
    verdict(
        11,
        "phase-law",
        worst < 1e-5,
        &format!("max |phase - (TrH/d)t| = {worst:.3e} at n = 1024, tolerance 1e-5"),
        started,
    );
}

#[test]
fn acceptance_12_pauli_vs_clifford() {
    let started = Instant::now();
    let expected_s0 = expected_randomization_s0();
    let mut ordering_ok = true;
    let mut s0_ok = true;
    let mut worst_gap = f64::NEG_INFINITY;
    for s in 0..10u64 {
        let mut rng = derived_rng(112, s);
        let h = generic_qubit_hamiltonian(&mut rng);
        let report = pauli_vs_clifford(&h, 1.0, &[32]).unwrap();
        ordering_ok &= report.c0_ordering_holds;
        s0_ok &= report.s0_match && report.s0_flow.approx_eq(&expected_s0, 1e-10);
        for row in &report.rows {
            worst_gap = worst_gap.max(row.c0_clifford - row.c0_pauli);
        }
    }
    // the S0 operators themselves, once, against the closed form
    let s0_p = most_coherent_s(
        &randomization_comb_choi(&RandomizationSet::pauli()).unwrap(),
        None,
    )
    .unwrap();
    let s0_c = most_coherent_s(
        &randomization_comb_choi(&RandomizationSet::clifford()).unwrap(),
        None,
    )
    .unwrap();
    s0_ok &= s0_p.flow_matrix().approx_eq(&expected_s0, 1e-10)
        && s0_c.flow_matrix().approx_eq(&expected_s0, 1e-10);
    verdict(
        12,
        "pauli-vs-clifford",
        ordering_ok && s0_ok,
        &format!(
            "c0^C - c0^P ≤ {worst_gap:.3e} at n = 32 (must be ≤ 0); \
             S0 = (1/4)Σσ⊗σ matrix equality at 1e-10: {s0_ok}"
        ),
        started,
    );
}

#[test]
fn acceptance_13_id_depolarizing_gap() {
    let started = Instant::now();
    let (fit, lower_bound) = id_depolarizing_offdiag_fit().unwrap();
    verdict(
        13,
        "id-depolarizing-non-concatenability",
        fit > 0.4,
        &format!(
            "min ‖I/2 - |K⟩⟩⟨⟨L|‖₂ = {fit:.6} (> 0.4; analytic √3/2 ≈ 0.866, \
             rank-one lower bound {lower_bound:.6})"
        ),
        started,
    );
}

/// Sanity companion to the suite: every constructed controlled object in the
/// criteria is a valid channel.
#[test]
fn acceptance_constructions_are_cptp() {
    let mut rng = seeded_rng(113);
    let a = random_cptp_kraus(2, 2, 3, &mut rng).unwrap().to_choi();
    let k = most_coherent_k(&a, None).unwrap();
    let cc = controlled_with_k(&a, k.matrix().clone()).unwrap();
    assert!(validate_channel(cc.choi()).is_cptp());
    let dep_kraus = KrausSet::new(
        combcore::tensor::paulis()
            .iter()
            .map(|p| p.scale(re(0.5)))
            .collect(),
    )
    .unwrap();
    assert!(validate_channel(&dep_kraus.to_choi()).is_cptp());
    let spec = hermitian_eig(cc.choi().matrix()).unwrap();
    assert!(spec.eigenvalues.iter().all(|&l| l > -1e-9));
}
