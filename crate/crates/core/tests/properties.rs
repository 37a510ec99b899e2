//! Randomized invariants across the library.

use oneform_lab::evolution::{evolve_path, evolve_path_reversed, loop_residual, Rectangle};
use oneform_lab::hierarchy::{
    builtin, gauge_transform, mixing_gauge, zero_curvature_residual, Basis, Builtin,
    HamiltonianHierarchy, PhasePolynomial, TimePoint, DEFAULT_FD_STEP,
};
use oneform_lab::kernelflow::{compose, ho_kernel};
use oneform_lab::timelattice::{
    count_paths, enumerate_paths, multiindex_from_path, path_from_multiindex, LatticeSpec,
    PathMultiIndex, StaircasePath,
};
use proptest::prelude::*;

fn oscillator(dim: usize, w1: f64, w2: f64) -> HamiltonianHierarchy {
    builtin(
        &Builtin::OscillatorPair {
            omega1: w1,
            omega2: w2,
        },
        dim,
        Basis::Oscillator,
    )
    .unwrap()
}

fn point(t1: f64, t2: f64) -> TimePoint {
    TimePoint::new(vec![t1, t2]).unwrap()
}

fn word(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..2, 1..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_is_antisymmetric(w1 in 0.2f64..3.0, w2 in 0.2f64..3.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let h = oscillator(8, w1, w2);
        let t = point(t1, t2);
        let z12 = zero_curvature_residual(&h, 0, 1, &t, DEFAULT_FD_STEP).unwrap();
        let z21 = zero_curvature_residual(&h, 1, 0, &t, DEFAULT_FD_STEP).unwrap();
        let sum = &z12.residual + &z21.residual;
        prop_assert!(sum.frobenius_norm() <= 1e-12 * (1.0 + z12.norm));
    }

    #[test]
    fn residual_is_gauge_covariant(
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in -0.5f64..0.5,
        t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
    ) {
        let h = oscillator(8, 1.0, 2.0);
        let phase = PhasePolynomial::new(vec![(a, vec![1, 0]), (b, vec![0, 1]), (c, vec![1, 1])]);
        let gauge = mixing_gauge(2, Basis::Oscillator, 8, phase, None).unwrap();
        let hg = gauge_transform(&h, &gauge).unwrap();
        let t = point(t1, t2);
        let z = zero_curvature_residual(&h, 0, 1, &t, DEFAULT_FD_STEP).unwrap().residual;
        let zg = zero_curvature_residual(&hg, 0, 1, &t, DEFAULT_FD_STEP).unwrap().residual;
        let expected = z.conjugate_by(&gauge.value(&t));
        prop_assert!((&zg - &expected).frobenius_norm() <= 1e-8 * (1.0 + z.frobenius_norm()));
    }

    #[test]
    fn path_text_round_trips(w in word(12), x in -3i64..3, y in -3i64..3) {
        let p = StaircasePath::from_word(2, &w).unwrap();
        let shifted = StaircasePath::new(vec![x, y], p.moves().to_vec()).unwrap();
        let parsed: StaircasePath = shifted.to_string().parse().unwrap();
        prop_assert_eq!(parsed, shifted);
    }

    #[test]
    fn word_round_trips(w in word(16)) {
        let p = StaircasePath::from_word(2, &w).unwrap();
        prop_assert_eq!(p.word(), w);
        prop_assert!(p.canonical().is_canonical());
    }

    #[test]
    fn multiindex_round_trips(steps in 1u32..7, start in 0usize..2, raw in prop::collection::vec(0u32..7, 6)) {
        let spec = LatticeSpec::unit(2, steps).unwrap();
        let mut values: Vec<u32> = raw.into_iter().take(steps as usize - 1).map(|v| v.min(steps)).collect();
        values.sort_unstable();
        let idx = PathMultiIndex { starting_axis: start, values };
        let path = path_from_multiindex(&spec, &idx).unwrap();
        prop_assert_eq!(path.end(), vec![steps as i64, steps as i64]);
        prop_assert_eq!(multiindex_from_path(&spec, &path).unwrap(), idx);
    }

    #[test]
    fn count_matches_enumeration(n_times in 2usize..4, steps in 1u32..5) {
        prop_assume!(n_times == 2 || steps <= 3);
        let spec = LatticeSpec::unit(n_times, steps).unwrap();
        let paths = enumerate_paths(&spec).unwrap();
        prop_assert_eq!(paths.len() as u128, count_paths(&spec));
        let mut sorted = paths.clone();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), paths.len());
    }

    #[test]
    fn oscillator_kernel_semigroup(w in 0.1f64..3.0, t1 in 0.05f64..2.0, t2 in 0.05f64..2.0, hbar in 0.25f64..2.0) {
        for t in [t1, t2, t1 + t2] {
            prop_assume!((w * t).sin().abs() > 0.05);
        }
        let k1 = ho_kernel(w, t1, hbar).unwrap();
        let k2 = ho_kernel(w, t2, hbar).unwrap();
        let direct = ho_kernel(w, t1 + t2, hbar).unwrap();
        let composed = compose(&k2, &k1).unwrap();
        prop_assert!(composed.coefficient_distance(&direct) <= 1e-9 * (1.0 + w / (w * (t1 + t2)).sin().abs()));
        prop_assert!(composed.amplitude_distance(&direct) <= 1e-9 * direct.component(0).amplitude.norm().max(1.0));
        prop_assert_eq!(composed.phase_index(), direct.phase_index());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reversed_evolution_inverts(w in word(6), t1 in 0.05f64..0.5, t2 in 0.05f64..0.5) {
        let h = oscillator(8, 1.0, 2.0);
        let path = StaircasePath::from_word(2, &w).unwrap();
        let forward = evolve_path(&h, &path, &[t1, t2], 100).unwrap();
        prop_assert!(forward.unitarity_defect <= 1e-10);
        let back = evolve_path_reversed(&h, &path, &[t1, t2], 100).unwrap();
        prop_assert!((&back * forward.unitary()).distance_from_identity() <= 1e-10);
    }

    #[test]
    fn small_loops_follow_the_area_law(side1 in 0.01f64..0.04, side2 in 0.01f64..0.04, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let h = oscillator(8, 1.0, 2.0);
        let rect = Rectangle::new(point(t1, t2), (0, 1), (side1, side2)).unwrap();
        let z = zero_curvature_residual(&h, 0, 1, &rect.center(), DEFAULT_FD_STEP).unwrap().norm;
        let r = loop_residual(&h, &rect, 400).unwrap();
        let ratio = r / (rect.area() * z / h.hbar());
        prop_assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn commuting_hierarchies_close_every_loop(side1 in 0.1f64..1.5, side2 in 0.1f64..1.5) {
        let h = builtin(&Builtin::Free { orders: vec![1, 2] }, 16, Basis::balanced_grid(16)).unwrap();
        let rect = Rectangle::new(point(0.0, 0.0), (0, 1), (side1, side2)).unwrap();
        prop_assert!(loop_residual(&h, &rect, 10).unwrap() <= 1e-11);
    }
}
