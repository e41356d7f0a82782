//! Property tests over randomly generated Pauli strings, channels, spectra
//! and configs.

use proptest::prelude::*;

use qptkit::channel::KrausSet;
use qptkit::circuit::{Circuit, Gate};
use qptkit::experiment::ExperimentConfig;
use qptkit::tomo::selective::select_top_k;
use qptkit::tomo::{chi_from_superoperator, spectral_stats, superoperator_from_chi, ChiMatrix, HistogramSpec, Superoperator};
use qptkit::{c64, ComplexMatrix, PauliString};

fn unitary_from(l: usize, angles: &[f64]) -> ComplexMatrix {
    let mut c = Circuit::new(l, "u").unwrap();
    for (k, a) in angles.chunks(3).enumerate() {
        let q = k % l;
        c.push(Gate::SingleQubitU { q, mu: [a[0], a[1], a[2]] }).unwrap();
        if l > 1 && q == l - 1 {
            c.push(Gate::CX { control: k % (l - 1), target: k % (l - 1) + 1 }).unwrap();
        }
    }
    c.unitary().unwrap()
}

fn angles(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.2f64..3.2, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pauli_product_matches_matrices(l in 1usize..=3, a in 0usize..64, b in 0usize..64) {
        let n = 1usize << (2 * l);
        let (pa, pb) = (PauliString::from_index(l, a % n).unwrap(), PauliString::from_index(l, b % n).unwrap());
        let (phase, pc) = pa.mul(&pb).unwrap();
        let lhs = pa.to_matrix().unwrap().matmul(&pb.to_matrix().unwrap()).unwrap();
        let rhs = pc.to_matrix().unwrap().scale(phase.to_complex());
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-14);
        prop_assert_eq!(pa.commutes_with(&pb), pb.commutes_with(&pa));
    }

    #[test]
    fn chi_superoperator_round_trip(l in 1usize..=2, p in 0.0f64..1.0, a in angles(12), b in angles(12)) {
        let k = KrausSet::new(vec![
            unitary_from(l, &a).scale_real((1.0 - p).sqrt()),
            unitary_from(l, &b).scale_real(p.sqrt()),
        ]).unwrap();
        let lam = Superoperator::from_kraus(&k).unwrap();
        let chi = chi_from_superoperator(&lam).unwrap();
        prop_assert!((chi.trace() - c64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(chi.hermiticity_error() < 1e-12);
        prop_assert!(chi.tp_deviation() < 1e-12);
        let back = superoperator_from_chi(&chi).unwrap();
        prop_assert!(back.matrix().sub(lam.matrix()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn histogram_conserves_counts(mods in prop::collection::vec((0.0f64..1.5, -3.1f64..3.1), 1..80), width in 0.01f64..0.5) {
        let spectrum: Vec<c64> = mods.iter().map(|&(r, t)| c64::from_polar(r, t)).collect();
        let spec = HistogramSpec { width, max: 1.2 };
        let st = spectral_stats(&spectrum, &spec).unwrap();
        prop_assert_eq!(st.histogram.counts.iter().sum::<usize>() + st.histogram.overflow, spectrum.len());
        prop_assert_eq!(st.above_unit_circle, spectrum.iter().filter(|z| z.norm() > 1.0).count());
        prop_assert!(st.second_moment >= 0.0);
        prop_assert!((st.mean_square_modulus - st.mean_modulus.powi(2) - st.second_moment).abs() < 1e-12);
    }

    #[test]
    fn top_k_is_sorted_upper_triangle(a in angles(9), k in 0usize..40) {
        let ideal = ChiMatrix::from_unitary(&unitary_from(2, &a)).unwrap();
        let pairs = select_top_k(&ideal, k, 1e-10);
        prop_assert!(pairs.len() <= k.div_ceil(2));
        prop_assert!(pairs.iter().all(|&(m, n)| m < n));
        let mags: Vec<f64> = pairs.iter().map(|&(m, n)| ideal.get(m, n).norm()).collect();
        prop_assert!(mags.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn config_overrides_round_trip(shots in 0usize..100_000, seed in any::<u32>(), p2 in 0.0f64..0.5) {
        let overrides = vec![format!("shots={shots}"), format!("seed={seed}"), format!("noise.p2={p2:?}")];
        let cfg = ExperimentConfig::from_toml("", &overrides).unwrap();
        prop_assert_eq!(cfg.shots, shots);
        prop_assert_eq!(cfg.seed, seed as u64);
        prop_assert_eq!(cfg.noise.p2, p2);
        prop_assert!(cfg.validate().is_ok());
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), &[]).unwrap();
        prop_assert_eq!(again.hash(), cfg.hash());
    }
}
