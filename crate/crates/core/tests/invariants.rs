use std::sync::Arc;

use cyclic_fp::diagnostics::AffineTestOperator;
use cyclic_fp::linalg::rel_dist;
use cyclic_fp::operator::Uncached;
use cyclic_fp::primal_dual::{LinfBallProx, QuadraticConjugateProx, SeparableProx, ShiftedLinfProx};
use cyclic_fp::robust_l1::{build_robust_l1, gen_gaussian_instance, RobustL1Instance};
use cyclic_fp::selection::stream_rng;
use cyclic_fp::{
    epoch, make_order, run, BlockPartition, BlockVector, ResidualOperator, RunOptions, SelectionRule, StepSchedule,
    StopCriteria,
};
use proptest::prelude::*;

fn affine(seed: u64, dim: usize, blocks: usize) -> AffineTestOperator<f64> {
    let mut rng = stream_rng(seed, 0);
    let part = BlockPartition::uniform(dim, blocks).unwrap();
    AffineTestOperator::random_strongly_monotone(&mut rng, part, 0.3, 1.8).unwrap()
}

fn gaussian(op: &impl ResidualOperator<f64>, seed: u64) -> BlockVector<f64> {
    let mut rng = stream_rng(seed, 1);
    let data = cyclic_fp::linalg::random_normal_vec(&mut rng, op.dim());
    BlockVector::new(data, Arc::new(op.partition().clone())).unwrap()
}

fn rule_strategy() -> impl Strategy<Value = SelectionRule> {
    prop_oneof![
        Just(SelectionRule::Cyclic),
        Just(SelectionRule::Shuffled),
        Just(SelectionRule::ShuffleOnce),
        Just(SelectionRule::Random),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_evaluation_matches_full(seed in 0u64..1000, dim in 2usize..12, blocks in 1usize..6) {
        let blocks = blocks.min(dim);
        let op = affine(seed, dim, blocks);
        let x = gaussian(&op, seed);
        let mut full = vec![0.0; dim];
        op.eval_full(x.as_slice(), &mut full);
        for i in 0..blocks {
            let r = op.partition().range(i);
            let mut out = vec![0.0; r.len()];
            op.eval_block(x.as_slice(), i, &mut out);
            prop_assert_eq!(&out[..], &full[r]);
        }
    }

    #[test]
    fn epoch_is_sequential_composition(seed in 0u64..1000, dim in 2usize..10, alpha in 0.05f64..1.0) {
        let op = affine(seed, dim, dim.min(4));
        let m = op.partition().num_blocks();
        let x = gaussian(&op, seed);
        let order = make_order(&SelectionRule::Shuffled, m, 1, seed).unwrap();
        let e = epoch(&op, &x, alpha, &order).unwrap();
        // oracle: one block at a time through the full residual
        let mut y = x.as_slice().to_vec();
        let mut s = vec![0.0; dim];
        for &i in &order {
            op.eval_full(&y, &mut s);
            for j in op.partition().range(i) {
                y[j] -= alpha * s[j];
            }
        }
        prop_assert!(rel_dist(e.as_slice(), &y) <= 1e-12);
    }

    #[test]
    fn orders_cover_every_block(rule in rule_strategy(), m in 1usize..40, k in 1usize..20, seed in any::<u64>()) {
        let order = make_order(&rule, m, k, seed).unwrap();
        prop_assert_eq!(order.len(), m);
        prop_assert!(order.iter().all(|&i| i < m));
        if rule.is_permutation() {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..m).collect::<Vec<_>>());
        }
    }

    #[test]
    fn fixed_points_are_absorbing(seed in 0u64..1000, dim in 2usize..12, rule in rule_strategy(), alpha in 0.1f64..1.0) {
        let op = affine(seed, dim, dim.min(3));
        let x = BlockVector::new(op.x_star().to_vec(), Arc::new(op.partition().clone())).unwrap();
        let order = make_order(&rule, op.partition().num_blocks(), 3, seed).unwrap();
        let e = epoch(&op, &x, alpha, &order).unwrap();
        prop_assert!(rel_dist(e.as_slice(), op.x_star()) <= 1e-12);
    }

    #[test]
    fn runs_are_deterministic(seed in 0u64..1000, rule in rule_strategy()) {
        let op = affine(seed, 8, 4);
        let x0 = gaussian(&op, seed);
        let opts = RunOptions::new(StopCriteria::epochs(15), seed);
        let a = run(&op, &x0, &StepSchedule::Constant(0.8), &rule, &opts).unwrap();
        let b = run(&op, &x0, &StepSchedule::Constant(0.8), &rule, &opts).unwrap();
        prop_assert_eq!(a.x.as_slice(), b.x.as_slice());
        let strip = |r: &cyclic_fp::RunRecord| (r.epoch, r.alpha, r.residual_norm);
        prop_assert_eq!(a.records.iter().map(strip).collect::<Vec<_>>(), b.records.iter().map(strip).collect::<Vec<_>>());
    }

    #[test]
    fn proxes_are_nonexpansive(u in -5.0f64..5.0, v in -5.0f64..5.0, radius in 0.0f64..3.0, gamma in 0.0f64..10.0, b in -2.0f64..2.0) {
        let proxes: Vec<Box<dyn SeparableProx<f64>>> = vec![
            Box::new(LinfBallProx::new(radius).unwrap()),
            Box::new(ShiftedLinfProx::new(vec![gamma * b])),
            Box::new(QuadraticConjugateProx::new(gamma, vec![b]).unwrap()),
        ];
        for p in &proxes {
            let d = (p.prox_entry(0, u) - p.prox_entry(0, v)).abs();
            prop_assert!(d <= (u - v).abs() + 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cached_steps_keep_products_exact(seed in 0u64..1000, steps in 1usize..400) {
        let (a, b) = gen_gaussian_instance::<f64>(30, 8, seed).unwrap();
        let op = build_robust_l1(&RobustL1Instance::new(a, b, 12.0).unwrap()).unwrap();
        let mut state = op.init_state(vec![0.0; op.dim()]).unwrap();
        let mut rng = stream_rng(seed, 2);
        let m = op.partition().num_blocks();
        for _ in 0..steps {
            let i = rand::Rng::random_range(&mut rng, 0..m);
            op.coord_step_cached(&mut state, i, 1.0).unwrap();
        }
        let fresh = op.fresh_cache(&state.z);
        prop_assert!(rel_dist(&state.cache.ax, &fresh.ax) <= 1e-10);
        prop_assert!(rel_dist(&state.cache.ats, &fresh.ats) <= 1e-10);
    }

    #[test]
    fn cached_epoch_matches_uncached(seed in 0u64..1000, rule in rule_strategy()) {
        let (a, b) = gen_gaussian_instance::<f64>(40, 10, seed).unwrap();
        let op = build_robust_l1(&RobustL1Instance::new(a, b, 12.0).unwrap()).unwrap();
        let x = gaussian(&op, seed);
        let order = make_order(&rule, op.partition().num_blocks(), 2, seed).unwrap();
        let cached = epoch(&op, &x, 1.0, &order).unwrap();
        let plain = epoch(&Uncached(&op), &x, 1.0, &order).unwrap();
        prop_assert!(rel_dist(cached.as_slice(), plain.as_slice()) <= 1e-12);
    }
}

#[test]
fn one_block_cyclic_run_is_km() {
    let op = affine(5, 6, 1);
    let x0 = gaussian(&op, 5);
    let opts = RunOptions::new(StopCriteria::epochs(25), 0);
    let cyc = run(&op, &x0, &StepSchedule::Constant(0.7), &SelectionRule::Cyclic, &opts).unwrap();
    let km = run(&op, &x0, &StepSchedule::Constant(0.7), &SelectionRule::Full, &opts).unwrap();
    assert_eq!(cyc.x.as_slice(), km.x.as_slice());
}
