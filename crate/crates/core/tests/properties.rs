use killing_probe::kernel::{kernel_analysis, KernelDim, RankRule};
use killing_probe::metric::{catalog_default, perturb, PerturbationSpec};
use killing_probe::obstruction::{analyze, restriction_vector, ObstructionSettings};
use killing_probe::oracles::rank_formula;
use killing_probe::runner::{decide, Verdict};
use killing_probe::integrals::hamiltonian_power;
use nalgebra::DMatrix;
use num_bigint::BigUint;
use proptest::prelude::*;

fn dim_strategy() -> impl Strategy<Value = KernelDim> {
    prop_oneof![(0usize..5).prop_map(KernelDim::Determinate), Just(KernelDim::Indeterminate)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planted_kernel_is_recovered(rank in 1usize..6, extra in 0usize..4, seed in any::<u64>()) {
        // product of random factors has exactly `rank` nonzero singular values
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cols = rank + extra;
        let a = DMatrix::from_fn(cols + 2, rank, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(rank, cols, |_, _| rng.gen_range(-1.0..1.0));
        let m = &a * &b;
        let k = kernel_analysis(&m, &RankRule { gap_min: 1e6, ..RankRule::default() });
        if let KernelDim::Determinate(dim) = k.dim {
            prop_assert_eq!(dim, extra);
            prop_assert_eq!(k.basis.len(), extra);
            for v in &k.basis {
                prop_assert!((&m * v).norm() <= 1e-12 * k.singular_values[0].max(1.0));
                prop_assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(k.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn collocation_bound_never_promotes(raw in 0usize..5, k in 0usize..5, c in dim_strategy(), h in dim_strategy()) {
        let k = k.min(raw);
        let cell = (KernelDim::Determinate(raw), KernelDim::Determinate(k));
        let (v, _) = decide(&[cell], Some(c), Some(h));
        match v {
            Verdict::Dim(x) => {
                prop_assert_eq!(x, k);
                prop_assert_eq!(c, KernelDim::Determinate(raw));
                prop_assert_eq!(h, KernelDim::Determinate(raw));
            }
            Verdict::TrivialOnly => {
                prop_assert_eq!(k, 0);
                prop_assert!(c.value().is_some_and(|c| c <= raw));
            }
            Verdict::Indeterminate => {}
        }
    }

    #[test]
    fn rank_formula_degree_one(n in 2u64..200) {
        let (rank, jet) = rank_formula(n, 1).unwrap();
        prop_assert_eq!(rank.clone(), BigUint::from(n * (n + 1) / 2));
        prop_assert_eq!(jet, rank + 2u32);
    }

    #[test]
    fn rank_formula_two_dimensions(d in 1u64..60) {
        // for n = 2 the bundle rank is (d + 1)(d + 2) / 2
        let (rank, _) = rank_formula(2, d).unwrap();
        prop_assert_eq!(rank, BigUint::from((d + 1) * (d + 2) / 2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn hamiltonian_always_solves_the_system(seed in 0u64..1000, amp_exp in -3i32..-1) {
        let m = perturb(&catalog_default("flat", 2).unwrap(), &PerturbationSpec::global(10f64.powi(amp_exp), 2, seed)).unwrap();
        let run = analyze(&m, 2, &ObstructionSettings::default(), seed).unwrap();
        let h = restriction_vector(&hamiltonian_power(&m, 2), &run.cfg).unwrap();
        let resid = (&run.matrix * &h).norm();
        prop_assert!(resid < 1e-7 * run.report.matrix_norm * h.norm(), "{}", resid);
        prop_assert!(run.report.trivial_residual.unwrap() <= run.report.threshold);
    }

    #[test]
    fn kappa_never_grows_the_kernel(seed in 0u64..1000) {
        let m = catalog_default("revolution", 2).unwrap();
        let dims: Vec<Option<usize>> = [3, 4]
            .iter()
            .map(|&kappa| {
                let s = ObstructionSettings { kappa, ..Default::default() };
                analyze(&m, 1, &s, seed).unwrap().report.raw_kernel_dim.value()
            })
            .collect();
        if let [Some(a), Some(b)] = dims[..] {
            prop_assert!(b <= a);
        }
    }
}

#[test]
fn kernel_basis_is_orthonormal() {
    let m = catalog_default("sphere_cap", 2).unwrap();
    let r = analyze(&m, 2, &ObstructionSettings::default(), 9).unwrap().report;
    let b = DMatrix::from_columns(&r.kernel_basis);
    let gram = b.transpose() * &b;
    assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-12);
    let nb = DMatrix::from_columns(&r.nontrivial_basis);
    assert_eq!(nb.ncols(), 5);
}
