//! Acceptance suite: seven criteria, one test and one pass/fail line each.
//!
//! Run with `cargo test -p ergodual --test acceptance -- --nocapture` to see
//! the per-criterion lines.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ergodual::bl::bl_distance;
use ergodual::ctmc::RateMatrix;
use ergodual::eprop::modulus_table;
use ergodual::function::{BoundedFunction, TailRule};
use ergodual::kernel::{duality_consistency, Kernel, KernelOperator};
use ergodual::measure::SignedMeasure;
use ergodual::models::{build_standard, build_z_infinity, StandardModel, IRREDUCIBLE3};
use ergodual::pairing::{norming_report, pairing};
use ergodual::projection::{estimate_projection, ProjectionOptions, Topology};
use ergodual::reproduce::{reproduce_cycles_line, reproduce_summing, reproduce_z_infinity};
use ergodual::scheme::{
    cesaro_avg, cesaro_kernel, dyadic_grid, verify_as3, SchemeOperators, SchemeSpec,
};
use ergodual::space::{Metric, StateSpace};

fn line_space(n: usize) -> Arc<StateSpace> {
    let names = (0..n).map(|i| format!("s{i}")).collect();
    StateSpace::new(
        names,
        Metric::Line { coords: (0..n).map(|i| i as f64).collect() },
        vec![(0..n).collect()],
        vec![],
    )
    .unwrap()
}

fn random_stochastic(rng: &mut ChaCha8Rng, space: &Arc<StateSpace>) -> KernelOperator {
    let n = space.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        })
        .collect();
    KernelOperator::new(Kernel::from_matrix(space.clone(), &rows).unwrap())
}

fn random_function(rng: &mut ChaCha8Rng, space: &Arc<StateSpace>) -> BoundedFunction {
    let values: Vec<f64> = (0..space.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    BoundedFunction::new(space.clone(), values, Some(TailRule::Zero), None).unwrap()
}

fn random_unit_measure(rng: &mut ChaCha8Rng, space: &Arc<StateSpace>) -> SignedMeasure {
    let raw: Vec<f64> = (0..space.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let tv: f64 = raw.iter().map(|v| v.abs()).sum();
    let map: BTreeMap<usize, f64> =
        raw.iter().enumerate().map(|(i, &v)| (i, v / tv)).collect();
    SignedMeasure::new(space.clone(), map).unwrap()
}

fn op_sup_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Independent stationary-distribution oracle: direct linear solve of the
/// balance equations with a normalization row.
fn stationary_oracle(s: &KernelOperator) -> Vec<f64> {
    let n = s.space().len();
    let k = s.kernel().to_matrix();
    let mut a = k.transpose() - nalgebra::DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).unwrap().iter().copied().collect()
}

#[test]
fn criterion_1_duality_kernel_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..100 {
        let n = rng.gen_range(2..=20usize);
        let space = line_space(n);
        let s = random_stochastic(&mut rng, &space);
        let f = random_function(&mut rng, &space);
        let mu = random_unit_measure(&mut rng, &space);

        // duality residual
        let rep = duality_consistency(&s, &f, &mu).unwrap();
        assert!(rep.residual <= 1e-12, "trial {trial}: duality residual {}", rep.residual);

        // forward and adjoint operator norms realized and equal
        let bound = s.operator_norm();
        let mut adjoint_realized = 0.0f64;
        for x in 0..n {
            let delta = SignedMeasure::dirac(space.clone(), x).unwrap();
            adjoint_realized = adjoint_realized.max(s.adjoint_apply(&delta).unwrap().tv_norm());
        }
        let mut forward_realized = 0.0f64;
        for x in 0..n {
            let row = s.kernel().row(x);
            let sign: Vec<f64> = (0..n)
                .map(|y| match row.weights.get(&y) {
                    Some(&w) if w >= 0.0 => 1.0,
                    Some(_) => -1.0,
                    None => 0.0,
                })
                .collect();
            let probe =
                BoundedFunction::new(space.clone(), sign, Some(TailRule::Zero), None).unwrap();
            forward_realized =
                forward_realized.max(s.forward_apply(&probe).unwrap().sup_norm());
        }
        assert!((adjoint_realized - bound).abs() <= 1e-12, "trial {trial}");
        assert!((forward_realized - bound).abs() <= 1e-12, "trial {trial}");

        // power additivity
        let m_pow = rng.gen_range(1..=6u64);
        let n_pow = rng.gen_range(1..=6u64);
        let lhs = s.power(m_pow + n_pow).unwrap().kernel().to_matrix();
        let rhs = s
            .power(m_pow)
            .unwrap()
            .compose(&s.power(n_pow).unwrap())
            .unwrap()
            .kernel()
            .to_matrix();
        assert!(op_sup_norm(&(lhs - rhs)) <= 1e-12, "trial {trial}: power additivity");
    }
    println!("criterion 1 (duality/kernel suite, 100 random kernels): PASS");
}

#[test]
fn criterion_2_scheme_axiom_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    // Cesaro identity exact to 1e-12 and the Markovian bound on n <= 1024
    let grid = dyadic_grid(10); // 1..1024
    for _ in 0..5 {
        let space = line_space(rng.gen_range(2..=8usize));
        let s = random_stochastic(&mut rng, &space);
        let f = random_function(&mut rng, &space);
        let mu = random_unit_measure(&mut rng, &space);
        let spec = SchemeSpec::cesaro(grid.clone(), 1.0).unwrap();
        let report = verify_as3(&spec, SchemeOperators::Discrete(&s), &f, &mu).unwrap();
        assert!(
            report.max_identity_residual <= 1e-12,
            "Cesaro identity residual {}",
            report.max_identity_residual
        );
        assert!(report.markov_bound_checked && report.markov_bound_ok);
    }

    // Abel identity residual <= 1e-10 for r in {0.5, 0.9, 0.99}
    for _ in 0..5 {
        let space = line_space(rng.gen_range(2..=8usize));
        let s = random_stochastic(&mut rng, &space);
        let f = random_function(&mut rng, &space);
        let mu = random_unit_measure(&mut rng, &space);
        let spec = SchemeSpec::abel(vec![0.5, 0.9, 0.99], 1.0).unwrap();
        let report = verify_as3(&spec, SchemeOperators::Discrete(&s), &f, &mu).unwrap();
        assert!(
            report.max_identity_residual <= 1e-10,
            "Abel identity residual {}",
            report.max_identity_residual
        );
    }

    // time identity residual <= 1e-8 on the two-state rate model
    let ctmc = build_standard(StandardModel::Ctmc2).unwrap();
    let rate: &RateMatrix = ctmc.rate.as_ref().unwrap();
    let f = BoundedFunction::new(
        ctmc.space.clone(),
        vec![1.0, 0.0],
        Some(TailRule::Zero),
        None,
    )
    .unwrap();
    let mu = SignedMeasure::dirac(ctmc.space.clone(), 0).unwrap();
    let spec = SchemeSpec::time(vec![0.5, 1.0, 2.0, 4.0, 8.0], 1.0).unwrap();
    let report = verify_as3(&spec, SchemeOperators::Continuous(rate), &f, &mu).unwrap();
    assert!(
        report.max_identity_residual <= 1e-8,
        "time identity residual {}",
        report.max_identity_residual
    );
    println!("criterion 2 (scheme axiom suite): PASS");
}

#[test]
fn criterion_3_ergodic_projection_suite() {
    let chain = build_standard(StandardModel::Irreducible3).unwrap();
    let s = &chain.operator;
    let pi = stationary_oracle(s);

    // Cesaro projection equals the rank-one stationary projection to 1e-8
    let cesaro_spec = SchemeSpec::cesaro(dyadic_grid(34), 1.0).unwrap();
    let cesaro_est = estimate_projection(
        s,
        &cesaro_spec,
        &ProjectionOptions::new(Topology::SigmaPrime).with_plateau_tol(1e-8),
    )
    .unwrap();
    assert!(cesaro_est.certified(), "Cesaro estimate not certified: {:?}", cesaro_est.status);
    let p_ces = cesaro_est.operator.kernel().to_matrix();
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (p_ces[(i, j)] - pi[j]).abs() <= 1e-8,
                "entry ({i},{j}): {} vs {}",
                p_ces[(i, j)],
                pi[j]
            );
        }
    }
    let inv = cesaro_est.invariants.as_ref().unwrap();
    assert!(inv.pass && inv.max_residual <= 1e-8, "invariants {:?}", inv);

    // Abel projection along a geometric grid approaching one agrees to 1e-6
    let r_grid: Vec<f64> = (4..=30).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    let abel_spec = SchemeSpec::abel(r_grid, 1.0).unwrap();
    let abel_est = estimate_projection(
        s,
        &abel_spec,
        &ProjectionOptions::new(Topology::SigmaPrime).with_plateau_tol(1e-7),
    )
    .unwrap();
    assert!(abel_est.certified(), "Abel estimate not certified: {:?}", abel_est.status);
    let p_abel = abel_est.operator.kernel().to_matrix();
    let gap = op_sup_norm(&(&p_abel - &p_ces));
    assert!(gap <= 1e-6, "Cesaro/Abel projection gap {gap}");

    // ||A_n - P|| decays like C/n: log-log slope within -1 +/- 0.1
    let mut points = Vec::new();
    let mut n = 8u64;
    while n <= 1024 {
        let a = cesaro_kernel(s, n).unwrap().kernel().to_matrix();
        let gap = op_sup_norm(&(&a - &p_ces));
        points.push(((n as f64).ln(), gap.ln()));
        n *= 2;
    }
    let len = points.len() as f64;
    let mean_x: f64 = points.iter().map(|(x, _)| x).sum::<f64>() / len;
    let mean_y: f64 = points.iter().map(|(_, y)| y).sum::<f64>() / len;
    let slope: f64 = points.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum::<f64>();
    assert!((-1.1..=-0.9).contains(&slope), "log-log slope {slope}");
    println!("criterion 3 (ergodic projection suite): PASS");
}

#[test]
fn criterion_4_summing_model() {
    let v = reproduce_summing().unwrap();
    assert!(v.adjoint_atom_exact, "{v:?}");
    assert_eq!(v.forward_rule_max_residual, 0.0, "{v:?}");
    assert!(v.tail_escape_certified, "{v:?}");
    assert!(v.pass, "{v:?}");
    println!("criterion 4 (summing model, truncation 64): PASS");
}

#[test]
fn criterion_5_two_sided_shift_model() {
    let v = reproduce_z_infinity().unwrap();
    assert!(v.forward_pointwise_max_err <= 1e-9, "{v:?}");
    assert!(v.forward_equivalences_all_true, "{v:?}");
    assert!(v.backward_rule_exact, "{v:?}");
    assert!(v.backward_modulus_floor >= 0.5 - 1e-12, "{v:?}");
    assert!(v.backward_hypothesis_fails, "{v:?}");
    assert!(v.pass, "{v:?}");
    println!("criterion 5 (two-sided shift model): PASS");
}

#[test]
fn criterion_6_cycles_line_model() {
    let v = reproduce_cycles_line().unwrap();
    assert!(v.basis_recovery_residual <= 1e-10, "{v:?}");
    assert!(v.gram_identity_residual <= 1e-10, "{v:?}");
    assert_eq!(v.obstruction.matched, 1000, "{v:?}");
    assert!(v.obstruction.max_total_pairing <= 1e-8, "{v:?}");
    assert!((v.obstruction.target_total_pairing - 1.0).abs() <= 1e-12, "{v:?}");
    assert!(v.pass, "{v:?}");
    println!("criterion 6 (cycles-line model, 8 cycles): PASS");
}

#[test]
fn criterion_7_invariant_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);

    // bilinearity to 1e-12
    for _ in 0..50 {
        let space = line_space(rng.gen_range(2..=8usize));
        let f = random_function(&mut rng, &space);
        let g = random_function(&mut rng, &space);
        let mu = random_unit_measure(&mut rng, &space);
        let (a, b) = (rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
        let combo = f.combine(a, &g, b).unwrap();
        let lhs = pairing(&combo, &mu).unwrap();
        let rhs = a * pairing(&f, &mu).unwrap() + b * pairing(&g, &mu).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12);
        // norming identity rides along
        assert!(norming_report(&f, &mu).unwrap().residual <= 1e-12);
    }

    // bounded-Lipschitz metric axioms on random triples
    for _ in 0..25 {
        let space = line_space(rng.gen_range(2..=5usize));
        let a = random_unit_measure(&mut rng, &space);
        let b = random_unit_measure(&mut rng, &space);
        let c = random_unit_measure(&mut rng, &space);
        let dab = bl_distance(&a, &b).unwrap();
        let dba = bl_distance(&b, &a).unwrap();
        assert!((dab - dba).abs() <= 1e-8);
        assert!(dab <= bl_distance(&a, &c).unwrap() + bl_distance(&c, &b).unwrap() + 1e-8);
        assert!(bl_distance(&a, &a).unwrap() <= 1e-10);
    }

    // fixed points are scheme-invariant: exact on deterministic material
    let shift = build_z_infinity(8).unwrap();
    let one = BoundedFunction::one(shift.space.clone());
    for n in [1u64, 2, 7, 64, 1000] {
        let avg = cesaro_avg(&shift.operator, n, &one).unwrap();
        assert_eq!(avg.values(), one.values());
    }

    // certified cluster witnesses of average sequences are fixed points (1e-8)
    let chain = build_standard(StandardModel::Irreducible3).unwrap();
    let s = &chain.operator;
    let est = estimate_projection(
        s,
        &SchemeSpec::cesaro(dyadic_grid(34), 1.0).unwrap(),
        &ProjectionOptions::new(Topology::SigmaPrime).with_plateau_tol(1e-8),
    )
    .unwrap();
    assert!(est.certified());
    for x in 0..chain.space.len() {
        let row = est.operator.kernel().row_measure(x).unwrap();
        let pushed = s.adjoint_apply(&row).unwrap();
        assert!(pushed.combine(1.0, &row, -1.0).unwrap().tv_norm() <= 1e-8);
    }

    // e-property inheritance within a factor of two on the shift model
    let plain = build_standard(StandardModel::ShiftZ { n: 16 }).unwrap();
    let center = plain.space.index_of("0").unwrap();
    let f = BoundedFunction::bump(plain.space.clone(), center, 4.0).unwrap();
    let radii = [4.0, 2.0, 1.5];
    let semigroup: Vec<BoundedFunction> =
        (0..8).map(|k| plain.operator.forward_power_apply(k, &f).unwrap()).collect();
    let scheme: Vec<BoundedFunction> =
        (1..=8).map(|n| cesaro_avg(&plain.operator, n, &f).unwrap()).collect();
    let semi = modulus_table(&semigroup, &plain.space, &[center], &radii).unwrap();
    let schm = modulus_table(&scheme, &plain.space, &[center], &radii).unwrap();
    assert!(schm.max_ratio_against(&semi) <= 2.0 + 1e-12);

    println!("criterion 7 (invariant suite): PASS");
}

#[test]
fn criterion_2b_markovian_bound_on_full_grid() {
    // the Markovian AS3 bound 2||f||/n verified on the full grid n <= 1024
    // for the fixed three-state chain
    let space = StateSpace::new(
        vec!["a".into(), "b".into(), "c".into()],
        Metric::Discrete,
        vec![vec![0, 1, 2]],
        vec![],
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = IRREDUCIBLE3.iter().map(|r| r.to_vec()).collect();
    let s = KernelOperator::new(Kernel::from_matrix(space.clone(), &rows).unwrap());
    let f =
        BoundedFunction::new(space.clone(), vec![1.0, -0.5, 0.25], Some(TailRule::Zero), None)
            .unwrap();
    let g = s.forward_apply(&f).unwrap().combine(1.0, &f, -1.0).unwrap();
    for n in 1..=1024u64 {
        let decay = cesaro_avg(&s, n, &g).unwrap().sup_norm();
        let bound = 2.0 * f.sup_norm() / n as f64;
        assert!(decay <= bound * (1.0 + 1e-9) + 1e-15, "n={n}: {decay} > {bound}");
    }
    println!("criterion 2 (Markovian bound, dense grid): PASS");
}
