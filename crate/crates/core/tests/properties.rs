use std::sync::{Arc, OnceLock};

use mdl_core::bundle::{log_normalizer_table, tilted_log_probs, TiltingGrid};
use mdl_core::codec::bitstream::{read_bitstream, write_bitstream};
use mdl_core::codec::{CodeConfig, Codebook};
use mdl_core::linalg::{self, Matrix};
use mdl_core::models::family::{FamilyRef, SymbolTable};
use mdl_core::models::mixture::Mixture;
use mdl_core::models::pmf::Counts;
use mdl_core::oracles::{kl, renyi};
use proptest::prelude::*;

fn family() -> FamilyRef {
    Arc::new(
        Mixture::from_probs(
            vec![vec![0.6, 0.2, 0.1, 0.1], vec![0.1, 0.5, 0.3, 0.1], vec![0.2, 0.1, 0.1, 0.6]],
            0.1,
        )
        .unwrap(),
    )
}

fn codebook() -> &'static Codebook {
    static CB: OnceLock<Codebook> = OnceLock::new();
    CB.get_or_init(|| Codebook::build(family(), 40, &CodeConfig::default()).unwrap())
}

fn pmf(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

fn simplex_point() -> impl Strategy<Value = Vec<f64>> {
    // weights of components 1 and 2 inside the 0.1-simplex
    (0.0f64..1.0, 0.0f64..1.0).prop_map(|(u, v)| {
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        vec![0.1 + 0.7 * u, 0.1 + 0.7 * v]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn renyi_is_monotone_and_below_kl((p, q) in (2usize..6).prop_flat_map(|m| (pmf(m), pmf(m))), l1 in 0.01f64..0.99, l2 in 0.01f64..0.99) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let a = renyi(&p, &q, lo).unwrap();
        let b = renyi(&p, &q, hi).unwrap();
        let d = kl(&p, &q).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(a <= b + 1e-12);
        prop_assert!(b <= d + 1e-12);
        // continuity in the order
        let c = renyi(&p, &q, (hi - 1e-7).max(0.005)).unwrap();
        prop_assert!((c - b).abs() < 1e-5);
    }

    #[test]
    fn tilted_densities_are_normalized(theta in simplex_point(), j in 0usize..9) {
        let fam = family();
        let table = SymbolTable::new(fam.as_ref(), &theta).unwrap();
        let grid = TiltingGrid::new(2, 64, 1.0, 0.7, 2.0, 0.05).unwrap();
        let lp = tilted_log_probs(&table, &grid.xi(j)).unwrap();
        prop_assert!((lp.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(log_normalizer_table(&table, &Matrix::zeros(2, 2)).unwrap(), 0.0);
        let mut ev = Matrix::zeros(2, 2);
        for (x, v) in table.v.iter().enumerate() {
            ev += v * table.probs[x];
        }
        prop_assert!(linalg::max_norm(&ev) < 1e-10);
    }

    #[test]
    fn tilt_code_satisfies_kraft(k in 1usize..5, n in 2u64..100_000, nu in 0.01f64..0.5) {
        let grid = TiltingGrid::new(k, n, 1.0, 0.5, 2.0, nu).unwrap();
        prop_assert!(grid.kraft_sum() <= 1.0 + 1e-12);
        prop_assert_eq!(grid.len(), 1 + 2 * k * k);
    }

    #[test]
    fn quantization_bound(theta in simplex_point()) {
        let cb = codebook();
        let near = cb.grid.nearest_point(&theta).unwrap();
        prop_assert!(near.quad <= 2.0 * 4.0 / (4.0 * 40.0) + 1e-9);
        prop_assert!(family().space().contains(&near.point, 1e-12));
    }

    #[test]
    fn encoding_invariants(xs in prop::collection::vec(0usize..4, 40)) {
        let cb = codebook();
        let c = Counts::from_symbols(&xs, 4).unwrap();
        let e = cb.encode(&c).unwrap();
        prop_assert!((e.total - (e.data_length + e.model_length + e.descriptor_length + e.switch_length)).abs() < 1e-12);
        let plain = cb.encode_plain(&c).unwrap();
        // the plain code is the argmin over the whole product grid
        for i in 0..cb.grid.len() {
            for j in 0..cb.tilt_count() {
                let row = cb.row(i, j);
                let data: f64 = -c.support().map(|(x, k)| k as f64 * row[x]).sum::<f64>();
                let total = data + cb.config.alpha * (cb.grid.code_length() + cb.tilt_length(j));
                prop_assert!(plain.total <= total + 1e-12);
            }
        }
        let bs = write_bitstream(cb, &xs).unwrap();
        prop_assert_eq!(read_bitstream(cb, &bs.bytes).unwrap(), xs);
        prop_assert!(bs.payload_bits as f64 <= bs.ideal_bits + 32.0);
    }

    #[test]
    fn norm_sandwich(k in 1usize..6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(k, k);
        for r in 0..k {
            for c in r..k {
                let v: f64 = rng.gen_range(-5.0..5.0);
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        let (mx, sp, kf) = (linalg::max_norm(&m), linalg::spectral_norm(&m), k as f64);
        prop_assert!(mx / kf.sqrt() <= sp * (1.0 + 1e-12));
        prop_assert!(sp <= kf * mx * (1.0 + 1e-12));
    }

    #[test]
    fn projection_lands_inside(x in prop::collection::vec(-2.0f64..2.0, 2)) {
        let fam = family();
        let p = fam.space().project(&x);
        prop_assert!(fam.space().contains(&p, 0.0));
    }
}
