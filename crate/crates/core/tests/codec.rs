use std::sync::Arc;

use mdl_core::codec::bitstream::{read_bitstream, write_bitstream, HEADER_BYTES};
use mdl_core::codec::{decode_bitstream, encode_bitstream, CodeConfig, Codebook, Route, SearchMode};
use mdl_core::models::bernoulli::{BernoulliCanonical, BernoulliMean};
use mdl_core::models::family::{probs, FamilyRef};
use mdl_core::models::mixture::Mixture;
use mdl_core::models::pmf::{Counts, FinitePmf};
use mdl_core::quantizer::QuantizedGrid;
use mdl_core::types::all_types;
use mdl_core::MdlError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixture2() -> FamilyRef {
    Arc::new(Mixture::from_probs(vec![vec![0.8, 0.2], vec![0.3, 0.7]], 0.2).unwrap())
}

fn mixture3() -> FamilyRef {
    Arc::new(Mixture::from_probs(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]], 0.2).unwrap())
}

fn draw(family: &FamilyRef, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let theta = family.space().sample(rng);
    FinitePmf::normalized(probs(family.as_ref(), &theta)).unwrap().sample(n, rng)
}

#[test]
fn two_point_bernoulli_example() {
    let fam: FamilyRef = Arc::new(BernoulliMean::new(0.0, 1.0).unwrap());
    let config = CodeConfig {
        use_bundle: false,
        ..CodeConfig::default()
    };
    let grid = QuantizedGrid::from_points(vec![vec![0.25], vec![0.75]]);
    let cb = Codebook::with_grid(fam, 3, &config, grid).unwrap();
    let plain = cb.encode_plain(&Counts::new(vec![1, 2])).unwrap();
    assert_eq!(plain.theta, vec![0.75]);
    assert!((plain.data_length - 1.9617).abs() < 1e-4);
    assert!((plain.model_length - 1.3863).abs() < 1e-4);
    assert!((plain.total - 3.3480).abs() < 1e-4);

    let combined = cb.encode_symbols(&[1, 1, 0]).unwrap();
    assert_eq!(combined.route, Route::Interior);
    let switch = 2.0 * 3f64.powf(-0.25);
    assert!((combined.total - (3.3480 + switch)).abs() < 1e-4);
    assert!((combined.regret() - (3.3480 + switch - 1.9095)).abs() < 1e-4);
}

#[test]
fn mismatched_length_is_a_precondition_error() {
    let cb = Codebook::build(mixture2(), 5, &CodeConfig::default()).unwrap();
    let e = cb.encode(&Counts::new(vec![2, 2])).unwrap_err();
    assert!(matches!(e, MdlError::Precondition(_)));
}

#[test]
fn exponential_family_never_tilts() {
    let fam: FamilyRef = Arc::new(BernoulliCanonical::new(-2.0, 2.0).unwrap());
    let cb = Codebook::build(fam, 10, &CodeConfig::default()).unwrap();
    assert!(cb.bundle.as_ref().unwrap().trivial);
    for c in all_types(10, 2) {
        assert_eq!(cb.encode(&c).unwrap().xi_index, 0);
        assert_eq!(cb.encode_plain(&c).unwrap().xi_index, 0);
    }
}

#[test]
fn shortcut_agrees_with_full_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for fam in [mixture2(), mixture3()] {
        for n in [8u64, 20, 50, 120] {
            let full = Codebook::build(fam.clone(), n, &CodeConfig::default()).unwrap();
            let short = Codebook::build(
                fam.clone(),
                n,
                &CodeConfig {
                    search: SearchMode::Shortcut,
                    ..CodeConfig::default()
                },
            )
            .unwrap();
            for _ in 0..125 {
                let xs = draw(&fam, n as usize, &mut rng);
                let c = Counts::from_symbols(&xs, fam.alphabet_size()).unwrap();
                let a = full.encode_plain(&c).unwrap();
                let b = short.encode_plain(&c).unwrap();
                assert_eq!((a.theta_index, a.xi_index), (b.theta_index, b.xi_index), "{c:?} at n = {n}");
                assert_eq!(a.total, b.total);
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn boundary_route_on_a_one_dimensional_mixture() {
    let fam = mixture2();
    let config = CodeConfig::default();
    let cb = Codebook::build(fam, 10, &config).unwrap();
    // ten symbols favouring q_0 pin the weight at τ
    let e = cb.encode(&Counts::new(vec![10, 0])).unwrap();
    assert_eq!(e.route, Route::Boundary);
    let face = e.face.as_ref().unwrap();
    assert_eq!(face.descriptor_count, 4);
    assert!((e.descriptor_length - config.alpha * 2.0 * 2f64.ln()).abs() < 1e-12);
    assert_eq!(e.model_length, 0.0);
    let l1 = cb.l1();
    let switch = -config.alpha * (1.0 - (-l1).exp()).ln();
    assert!((e.switch_length - switch).abs() < 1e-12);
    assert!((e.theta[0] - 0.2).abs() < 1e-12);
    // data coded under p_τ exactly
    let want = -10.0 * (0.8 * 0.8 + 0.2 * 0.3f64).ln();
    assert!((e.data_length - want).abs() < 1e-9);
    assert!(cb.boundary_encode(&Counts::new(vec![5, 5])).is_err());
}

#[test]
fn total_is_the_sum_of_its_parts() {
    let fam = mixture3();
    let cb = Codebook::build(fam, 12, &CodeConfig::default()).unwrap();
    for c in all_types(12, 3) {
        let e = cb.encode(&c).unwrap();
        let sum = e.data_length + e.model_length + e.descriptor_length + e.switch_length;
        assert!((e.total - sum).abs() < 1e-12);
    }
}

#[test]
fn bitstream_round_trips_near_the_ideal_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let config = CodeConfig::default();
    let mut trips = 0;
    for fam in [mixture2(), mixture3()] {
        for n in [1u64, 2, 7, 64, 200, 512] {
            let cb = Codebook::build(fam.clone(), n, &config).unwrap();
            for t in 0..84 {
                let xs = if t % 7 == 0 {
                    // boundary-heavy data
                    vec![0; n as usize]
                } else {
                    draw(&fam, n as usize, &mut rng)
                };
                let bs = write_bitstream(&cb, &xs).unwrap();
                assert_eq!(read_bitstream(&cb, &bs.bytes).unwrap(), xs);
                assert!(
                    (bs.payload_bits as f64) <= bs.ideal_bits + 32.0,
                    "{} bits vs ideal {}",
                    bs.payload_bits,
                    bs.ideal_bits
                );
                trips += 1;
            }
        }
    }
    assert!(trips >= 1000);
}

#[test]
fn empty_input_is_header_only() {
    let fam = mixture2();
    let bs = encode_bitstream(&fam, &[], &CodeConfig::default()).unwrap();
    assert_eq!(bs.bytes.len(), HEADER_BYTES);
    assert!(decode_bitstream(&fam, &bs.bytes, &CodeConfig::default()).unwrap().is_empty());
}

#[test]
fn corrupt_streams_report_offsets() {
    let fam = mixture2();
    let config = CodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<usize> = (0..40).map(|_| rng.gen_range(0..2)).collect();
    let bs = encode_bitstream(&fam, &xs, &config).unwrap();
    let mut bad = bs.bytes.clone();
    bad[0] ^= 0xFF;
    assert!(matches!(
        decode_bitstream(&fam, &bad, &config),
        Err(MdlError::Decode { offset: 0, .. })
    ));
    let truncated = &bs.bytes[..HEADER_BYTES];
    assert!(matches!(
        decode_bitstream(&fam, truncated, &config),
        Err(MdlError::Decode { .. })
    ));
    let mut wrong_n = bs.bytes.clone();
    wrong_n[5] = wrong_n[5].wrapping_add(1);
    let cb = Codebook::build(fam, 40, &config).unwrap();
    assert!(matches!(read_bitstream(&cb, &wrong_n), Err(MdlError::Decode { offset: 2, .. })));
}
