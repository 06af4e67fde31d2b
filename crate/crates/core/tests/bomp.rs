#![allow(clippy::needless_range_loop)]

use blocksparse::bomp::{
    default_guard, run_bomp, run_bomp_observed, select_block, IterationState, StopReason,
};
use blocksparse::model::{block_columns, generate_instance, ModelParams, ProblemInstance};
use blocksparse::numerics::{least_squares, Complex64, ComplexMatrix, Rng};
use blocksparse::stopping::{RuleTag, StoppingRule, ThresholdParams};

fn params(n: usize, d: usize, m: usize, na: usize, sigma2: f64) -> ModelParams {
    ModelParams {
        n_blocks: n,
        block_len: d,
        measurements: m,
        sparsity: na,
        sigma2,
    }
}

fn derived() -> StoppingRule {
    StoppingRule::DerivedThreshold(ThresholdParams::new(0.001, 0.005).unwrap())
}

#[test]
fn selection_matches_exhaustive_search() {
    let mut rng = Rng::new(1);
    for _ in 0..100 {
        let b = ComplexMatrix::from_fn(20, 8, |_, _| rng.complex_gaussian(1.0));
        let r: Vec<Complex64> = (0..20).map(|_| rng.complex_gaussian(1.0)).collect();
        for d in [1, 2, 4] {
            let mut scores = Vec::new();
            for j in 0..8 / d {
                let mut s = 0.0;
                for col in j * d..(j + 1) * d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..20 {
                        acc += b.get(i, col).conj() * r[i];
                    }
                    s += acc.norm_sqr();
                }
                scores.push(s);
            }
            let best = (0..scores.len())
                .max_by(|&a, &c| scores[a].partial_cmp(&scores[c]).unwrap())
                .unwrap();
            assert_eq!(select_block(&b, &r, &[], d).unwrap(), best);
        }
    }
}

#[test]
fn selection_tie_and_exclusion() {
    let b = ComplexMatrix::identity(4);
    let zero = vec![Complex64::new(0.0, 0.0); 4];
    assert_eq!(select_block(&b, &zero, &[], 2).unwrap(), 0);
    assert_eq!(select_block(&b, &zero, &[0], 2).unwrap(), 1);
    assert!(matches!(
        select_block(&b, &zero, &[0, 1], 2),
        Err(blocksparse::Error::Exhausted)
    ));
}

#[test]
fn small_noisy_instances_recover_the_support() {
    // 17 blocks so that M = 64 stays below N·d
    let p = params(17, 4, 64, 3, 1e-4);
    let guard = default_guard(64, 4);
    let mut covered = 0;
    for trial in 0..200 {
        let mut rng = Rng::derive(42, &[trial]);
        let inst = generate_instance(p, &mut rng).unwrap();
        let res = run_bomp(&inst, &derived(), guard).unwrap();
        if inst.support.iter().all(|j| res.lambda.contains(j)) {
            covered += 1;
        }
    }
    assert!(covered >= 190, "support covered in {covered}/200 trials");
}

#[test]
fn final_estimate_is_least_squares_on_lambda() {
    let mut rng = Rng::new(7);
    for _ in 0..20 {
        let inst = generate_instance(params(32, 5, 100, 4, 0.01), &mut rng).unwrap();
        let res = run_bomp(&inst, &derived(), default_guard(100, 5)).unwrap();
        let blocks: Vec<ComplexMatrix> = res
            .lambda
            .iter()
            .map(|&j| block_columns(&inst.b, j, 5).unwrap())
            .collect();
        let refs: Vec<&ComplexMatrix> = blocks.iter().collect();
        let x = least_squares(&ComplexMatrix::hstack(&refs).unwrap(), &inst.y).unwrap();
        for (pos, &j) in res.lambda.iter().enumerate() {
            for t in 0..5 {
                let diff = (res.estimate_full[j * 5 + t] - x[pos * 5 + t]).norm();
                assert!(diff < 1e-10, "{diff}");
            }
        }
        for j in (0..32).filter(|j| !res.lambda.contains(j)) {
            assert!(res.estimate_full[j * 5..(j + 1) * 5]
                .iter()
                .all(|v| v.norm() == 0.0));
        }
    }
}

fn observed(inst: &ProblemInstance, rule: &StoppingRule, guard: usize) -> Vec<IterationState> {
    let mut states = Vec::new();
    run_bomp_observed(inst, rule, guard, |s| states.push(s.clone())).unwrap();
    states
}

#[test]
fn iteration_invariants() {
    let mut rng = Rng::new(9);
    for _ in 0..10 {
        let inst = generate_instance(params(40, 4, 120, 5, 0.05), &mut rng).unwrap();
        let guard = default_guard(120, 4);
        let states = observed(&inst, &StoppingRule::MaxIterations(guard), guard);
        assert_eq!(states.len(), guard);
        let e0 = inst.y.norm_sqr();
        let mut last = e0;
        for s in &states {
            assert_eq!(s.lambda.len(), s.k);
            let mut sorted = s.lambda.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), s.k);
            assert!(s.energy <= last + 1e-9 * e0);
            assert!((s.energy - s.residual.norm_sqr()).abs() <= 1e-10 * s.energy.max(1e-300));

            let mut fit = inst.y.clone();
            for (&j, x) in s.lambda.iter().zip(s.estimate.chunks_exact(4)) {
                let bj = block_columns(&inst.b, j, 4).unwrap();
                let v = bj.mul_vec(x).unwrap();
                for (f, vi) in fit.iter_mut().zip(v.iter()) {
                    *f -= vi;
                }
            }
            assert!(fit.sub(&s.residual).max_abs() < 1e-10 * inst.y.max_abs());
            last = s.energy;
        }
    }
}

#[test]
fn max_iterations_runs_exactly_k() {
    let inst = generate_instance(params(40, 4, 120, 5, 0.05), &mut Rng::new(2)).unwrap();
    for k in [1, 3, 7, 20] {
        let res = run_bomp(&inst, &StoppingRule::MaxIterations(k), 29).unwrap();
        assert_eq!(res.iterations, k);
        assert_eq!(res.energy_trace.len(), k);
        assert_eq!(res.stop_reason, StopReason::Rule(RuleTag::MaxIterations));
        assert!(res.thresholds.iter().all(Option::is_none));
    }
}

#[test]
fn results_are_reproducible() {
    let inst = generate_instance(params(40, 4, 120, 5, 0.05), &mut Rng::new(3)).unwrap();
    for rule in [
        derived(),
        StoppingRule::RelativeChange { epsilon1: 0.25 },
        StoppingRule::ResidualEnergy { epsilon2: 6.0 },
    ] {
        let a = run_bomp(&inst, &rule, 29).unwrap();
        let b = run_bomp(&inst, &rule, 29).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn relative_change_never_stops_first() {
    let inst = generate_instance(params(40, 4, 120, 5, 0.05), &mut Rng::new(4)).unwrap();
    let res = run_bomp(&inst, &StoppingRule::RelativeChange { epsilon1: 1e9 }, 29).unwrap();
    assert_eq!(res.iterations, 2);
}

#[test]
fn derived_thresholds_are_recorded() {
    let inst = generate_instance(params(40, 4, 120, 5, 0.05), &mut Rng::new(5)).unwrap();
    let res = run_bomp(&inst, &derived(), 29).unwrap();
    assert_eq!(res.thresholds.len(), res.iterations);
    assert!(res.thresholds.iter().all(Option::is_some));
    if res.stop_reason == StopReason::Rule(RuleTag::DerivedThreshold) {
        let last = res.energy_trace.len() - 1;
        assert!(res.energy_trace[last] <= res.thresholds[last].unwrap());
    }
}
