use nsbwk_core::ocowc::{
    oco_benchmarks, oco_nonstationarity, random_affine_instance, run_virtual_queue, ConstraintNoise, VqParams,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn queue_recursion_and_domain(n in 1usize..=3, d in 1usize..=3, t in 3usize..=40, seed in any::<u64>(), regularized in any::<bool>()) {
        let inst = random_affine_instance(n, d, t, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let params = if regularized { VqParams::regularized(t) } else { VqParams::literal(t) };
        let log = run_virtual_queue(&inst, &vec![0.5; n], params).unwrap();
        prop_assert!(log.queues.iter().all(|&q| q >= 0.0));
        for k in 0..t {
            prop_assert!(inst.domain().contains(&log.xs[k * n..(k + 1) * n], 1e-12));
        }
        for s in 2..t {
            for i in 0..d {
                let g = inst.realized_constraint(s - 2, i);
                let (prev, cur) = (&log.xs[(s - 2) * n..(s - 1) * n], &log.xs[(s - 1) * n..s * n]);
                let lin = g.eval(prev) + g.a.iter().zip(cur.iter().zip(prev)).map(|(a, (c, p))| a * (c - p)).sum::<f64>();
                let expected = (log.queues[(s - 1) * d + i] + lin).max(0.0);
                prop_assert!((log.queues[s * d + i] - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn restricted_comparator_sandwich(n in 1usize..=3, d in 1usize..=3, t in 2usize..=30, seed in any::<u64>()) {
        let inst = random_affine_instance(n, d, t, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = oco_benchmarks(&inst).unwrap();
        prop_assert!(b.exact);
        let gap = b.opt_restricted.value - b.opt.value;
        let tol = 1e-9 * t as f64;
        prop_assert!(gap >= -tol);
        prop_assert!(gap <= b.qbar.unwrap() * oco_nonstationarity(&inst) + tol);
    }

    #[test]
    fn noisy_constraints_keep_expected_benchmarks(seed in any::<u64>(), amp in 0.0f64..0.05) {
        let inst = random_affine_instance(2, 2, 20, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let noisy = inst.clone().with_noise(ConstraintNoise { amplitude: amp, seed }).unwrap();
        prop_assert!(noisy.is_stochastic());
        let (a, b) = (oco_benchmarks(&inst).unwrap(), oco_benchmarks(&noisy).unwrap());
        prop_assert!((a.opt.value - b.opt.value).abs() < 1e-9);
        prop_assert!((oco_nonstationarity(&inst) - oco_nonstationarity(&noisy)).abs() < 1e-12);
        let log = run_virtual_queue(&noisy, &[0.5, 0.5], VqParams::literal(20)).unwrap();
        prop_assert!(log.queues.iter().all(|&q| q >= 0.0));
    }
}
