//! End-to-end acceptance suite. Every criterion prints one line
//! `[PASS]`/`[FAIL]` with its measurements and wall time; the process exits
//! nonzero when any criterion fails. Runtime limits are part of each
//! criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mdl_core::bundle::{log_normalizer_table, tilted_log_probs, TiltingGrid};
use mdl_core::codec::bitstream::{read_bitstream, write_bitstream};
use mdl_core::codec::{exp_regret_bound, CodeConfig, Codebook, Route};
use mdl_core::linalg::{self, Matrix};
use mdl_core::models::bernoulli::{BernoulliCanonical, BernoulliMean};
use mdl_core::models::certify::certify_assumptions;
use mdl_core::models::family::{probs, ConstantFisher, FamilyRef, FisherGeometry, SymbolTable};
use mdl_core::models::mixture::Mixture;
use mdl_core::models::pmf::FinitePmf;
use mdl_core::models::space::ParamSpace;
use mdl_core::oracles::obligations::audit_theorem3;
use mdl_core::oracles::risk::{verify_theorem1_with, verify_theorem2_with};
use mdl_core::oracles::{
    bernoulli_shtarkov_closed_form, exhaustive_kraft, exhaustive_max_regret, shtarkov_complexity, trial_rng, CodeKind,
};
use mdl_core::quantizer::{build_grid_relaxed, cardinality_bound, BoundConstants};
use mdl_core::types::DEFAULT_ENUMERATION_CAP;
use rand::Rng;

const CAP: u64 = DEFAULT_ENUMERATION_CAP;
const TOL: f64 = 1e-9;

fn bernoulli() -> FamilyRef {
    Arc::new(BernoulliCanonical::new(-2.0, 2.0).unwrap())
}

/// Two components over a binary alphabet.
fn mixture_m2() -> FamilyRef {
    Arc::new(Mixture::from_probs(vec![vec![0.8, 0.2], vec![0.3, 0.7]], 0.2).unwrap())
}

/// Two components over three symbols: `V(θ̂)` can be large at an interior
/// MLE, so `𝓖_n^c` is not empty at desk-scale n.
fn mixture_m3() -> FamilyRef {
    Arc::new(Mixture::from_probs(vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.1, 0.8]], 0.2).unwrap())
}

/// Three components over three symbols, `K = 2`.
fn mixture_k2() -> FamilyRef {
    Arc::new(
        Mixture::from_probs(
            vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.7, 0.2], vec![0.2, 0.1, 0.7]],
            0.1,
        )
        .unwrap(),
    )
}

fn config(alpha: f64) -> CodeConfig {
    CodeConfig::default().with_alpha(alpha)
}

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

/// Name, runtime limit in seconds, and check.
type Criterion = (&'static str, u64, fn() -> Outcome);

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ordered = true;
    let mut all = true;
    for fam in [bernoulli(), mixture_m2()] {
        for n in 1..=10 {
            let mut sums = Vec::new();
            let mut plain_has_model_cost = false;
            for alpha in [1.0, 2.0] {
                let cb = Codebook::build(fam.clone(), n, &config(alpha)).unwrap();
                plain_has_model_cost = cb.grid.len() > 1 || cb.tilt_count() > 1;
                for kind in [CodeKind::Plain, CodeKind::Combined] {
                    let r = exhaustive_kraft(&cb, kind, CAP).unwrap();
                    worst = worst.max(r.sum);
                    all &= r.sum <= 1.0 + TOL;
                    sums.push(r.sum);
                }
            }
            // α = 2 lengths are longer than α = 1 lengths whenever the
            // model part costs anything; the switch always does
            ordered &= sums[3] < sums[1];
            ordered &= if plain_has_model_cost { sums[2] < sums[0] } else { sums[2] == sums[0] };
        }
    }
    (all && ordered, format!("max Kraft sum {worst:.12} (limit 1 + 1e-9); alpha ordering {ordered}"))
}

fn criterion_2() -> Outcome {
    let a = 2.0;
    let mut ok = true;
    let mut worst_quad: f64 = f64::NEG_INFINITY;
    let mut worst_seg: f64 = f64::NEG_INFINITY;
    for fam in [mixture_m2(), mixture_k2()] {
        let k = fam.dim();
        let c = certify_assumptions(fam.as_ref(), 200).unwrap();
        for n in [100u64, 10_000] {
            let grid = build_grid_relaxed(fam.as_ref(), n, a, 0.25, c.b_bar).unwrap();
            let quad_limit = k as f64 * a * a / (4.0 * n as f64);
            let seg_limit = (k as f64).sqrt() * a * (n as f64).powf(-0.25);
            let rows: Vec<(f64, f64)> = (0..10_000u64)
                .map(|i| {
                    let mut rng = trial_rng(2, i);
                    let theta = fam.space().sample(&mut rng);
                    let near = grid.nearest_point(&theta).unwrap();
                    let cell = &grid.cells()[near.cell.expect("every point of Θ lies in a cell")];
                    let seg = (0..=20)
                        .map(|s| {
                            let t = s as f64 / 20.0;
                            let p: Vec<f64> = theta.iter().zip(&near.point).map(|(h, d)| h + t * (d - h)).collect();
                            linalg::euclid(&p, &cell.theta_s)
                        })
                        .fold(0.0, f64::max);
                    (near.quad - quad_limit, seg - seg_limit)
                })
                .collect();
            for (q, s) in rows {
                worst_quad = worst_quad.max(q);
                worst_seg = worst_seg.max(s);
                ok &= q <= TOL && s <= TOL;
            }
        }
    }
    (
        ok,
        format!("max quad excess {worst_quad:.3e}, max segment excess {worst_seg:.3e} over 4 x 10^4 samples"),
    )
}

fn criterion_3() -> Outcome {
    let (a, beta) = (2.0, 0.25);
    let mut ok = true;
    let mut slack = f64::INFINITY;
    let mut largest = 0;
    let unit_box = |k: usize| ConstantFisher::identity(ParamSpace::new_box(vec![0.0; k], vec![1.0; k]).unwrap());
    for n in [100u64, 1_000, 10_000, 100_000] {
        for fam in [mixture_m2(), mixture_k2()] {
            let c = certify_assumptions(fam.as_ref(), 200).unwrap();
            let bc = BoundConstants::from_certified(fam.as_ref(), &c).unwrap();
            let grid = build_grid_relaxed(fam.as_ref(), n, a, beta, c.b_bar).unwrap();
            let bound = cardinality_bound(&bc, n, a, beta).unwrap();
            let gap = bound.log_bound - (grid.len() as f64).ln();
            slack = slack.min(gap);
            largest = largest.max(grid.len());
            ok &= gap >= 0.0;
        }
        for k in [1, 2] {
            let geom = unit_box(k);
            let bc = BoundConstants::constant(&geom).unwrap();
            let grid = build_grid_relaxed(&geom as &dyn FisherGeometry, n, a, beta, f64::INFINITY).unwrap();
            let bound = cardinality_bound(&bc, n, a, beta).unwrap();
            let gap = bound.log_bound - (grid.len() as f64).ln();
            slack = slack.min(gap);
            largest = largest.max(grid.len());
            ok &= gap >= 0.0;
        }
    }
    (ok, format!("min log-slack {slack:.4}; largest grid {largest} points"))
}

fn criterion_4() -> Outcome {
    let fam = bernoulli();
    let mut ok = true;
    let mut rows = Vec::new();
    for a in [1.0, 2.0] {
        for n in [8u64, 10, 12] {
            // the plain two-part code: parameter length L_n only, no tilts
            let cfg = CodeConfig {
                a,
                use_bundle: false,
                ..config(2.0)
            };
            let cb = Codebook::build(fam.clone(), n, &cfg).unwrap();
            let c = cb.constants.clone().unwrap();
            let bc = BoundConstants::from_certified(fam.as_ref(), &c).unwrap();
            let report = exp_regret_bound(fam.as_ref(), n, &cfg, &c, &bc).unwrap();
            let m = exhaustive_max_regret(&cb, CodeKind::Plain, CAP).unwrap();
            // interior sequences are the ones the combined code routes inside
            let interior = interior_plain_max(&cb);
            let limit = cfg.alpha * report.bound;
            ok &= interior <= limit + TOL;
            rows.push(format!("a={a} n={n}: {interior:.3} <= {limit:.3} (all-route max {:.3})", m.value));
        }
    }
    (ok, rows.join("; "))
}

fn interior_plain_max(cb: &Codebook) -> f64 {
    mdl_core::types::all_types(cb.n, cb.family().alphabet_size())
        .iter()
        .filter(|c| cb.encode(c).unwrap().route == Route::Interior)
        .map(|c| cb.encode_plain(c).unwrap().regret())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn audit() -> mdl_core::oracles::TheoremThreeAudit {
    let cb = Codebook::build(mixture_m3(), 12, &config(2.0)).unwrap();
    audit_theorem3(&cb, CAP, TOL).unwrap()
}

fn criterion_5() -> Outcome {
    let a = audit();
    let min_one = a.part_one.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let min_l6 = a.part_two.iter().map(|r| r.lemma6.margin).fold(f64::INFINITY, f64::min);
    let min_two = a.part_two.iter().map(|r| r.rhs - r.lhs).fold(f64::INFINITY, f64::min);
    let ok = a.part_one_holds && a.lemma6_holds && a.part_two_holds && !a.part_two.is_empty() && !a.part_one.is_empty();
    (
        ok,
        format!(
            "|G_n| = {}, |G_n^c| = {}; min margins: part I {min_one:.4}, tilt gain {min_l6:.4e}, part II {min_two:.4}",
            a.part_one.len(),
            a.part_two.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut min_risk: f64 = f64::INFINITY;
    let mut min_res: f64 = f64::INFINITY;
    let mut count = 0;
    for fam in [mixture_m2(), mixture_m3()] {
        for n in [6u64, 8, 10] {
            let cb = Codebook::build(fam.clone(), n, &config(2.0)).unwrap();
            for theta in [0.3, 0.5, 0.7] {
                let cert = verify_theorem1_with(&cb, &[theta], CAP).unwrap();
                min_risk = min_risk.min(cert.risk_margin.unwrap());
                min_res = min_res.min(cert.resolvability_margin.unwrap());
                ok &= cert.passed;
                count += 1;
            }
        }
    }
    (
        ok,
        format!("{count} certificates; min redundancy-risk {min_risk:.3e}, min resolvability-redundancy {min_res:.3e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut ok = true;
    let mut rows = Vec::new();
    for (name, fam) in [("M=2", mixture_m2()), ("M=3", mixture_m3())] {
        let cb = Codebook::build(fam, 50, &config(2.0)).unwrap();
        let cert = verify_theorem2_with(&cb, &[0.5], &[0.05, 0.1], 100_000, 2024).unwrap();
        ok &= cert.passed;
        for r in &cert.tail {
            rows.push(format!(
                "{name} b={}: freq {:.5} vs {:.5} + 3 x {:.5}",
                r.b, r.frequency, r.bound, r.sigma
            ));
        }
    }
    (ok, rows.join("; "))
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut closed: f64 = 0.0;
    let mean = BernoulliMean::new(0.0, 1.0).unwrap();
    for n in 1..=20 {
        let v = shtarkov_complexity(&mean, n, CAP).unwrap();
        closed = closed.max((v - bernoulli_shtarkov_closed_form(n)).abs());
    }
    ok &= closed <= 1e-10;
    let mut min_gap = f64::INFINITY;
    for fam in [bernoulli(), mixture_m2(), mixture_m3()] {
        for n in [4u64, 8, 12] {
            let nml = shtarkov_complexity(fam.as_ref(), n, CAP).unwrap();
            let cb = Codebook::build(fam.clone(), n, &config(2.0)).unwrap();
            for kind in [CodeKind::Plain, CodeKind::Combined] {
                let m = exhaustive_max_regret(&cb, kind, CAP).unwrap();
                min_gap = min_gap.min(m.value - nml);
                ok &= m.value >= nml - TOL;
            }
        }
    }
    (ok, format!("closed-form error {closed:.2e}; min (max regret - Shtarkov) {min_gap:.4}"))
}

fn criterion_9() -> Outcome {
    let a = audit();
    let min = a
        .part_two
        .iter()
        .map(|r| r.advantage - r.advantage_floor)
        .fold(f64::INFINITY, f64::min);
    let ok = a.dominance_holds && !a.part_two.is_empty();
    (ok, format!("{} tilted instances; min advantage over floor {min:.4e}", a.part_two.len()))
}

fn criterion_10() -> Outcome {
    let cfg = CodeConfig::default();
    let mut ok = true;
    let mut trips = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut boundary = 0;
    for (f, fam) in [mixture_m2(), mixture_m3(), mixture_k2()].into_iter().enumerate() {
        for n in [1u64, 5, 33, 128, 300, 512] {
            let cb = Codebook::build(fam.clone(), n, &cfg).unwrap();
            for t in 0..56u64 {
                let mut rng = trial_rng(10 + f as u64, n * 1000 + t);
                let theta = fam.space().sample(&mut rng);
                let xs = FinitePmf::normalized(probs(fam.as_ref(), &theta)).unwrap().sample(n as usize, &mut rng);
                let bs = write_bitstream(&cb, &xs).unwrap();
                let back = read_bitstream(&cb, &bs.bytes).unwrap();
                ok &= back == xs;
                worst = worst.max(bs.payload_bits as f64 - bs.ideal_bits);
                if bs.encoding.as_ref().unwrap().route == Route::Boundary {
                    boundary += 1;
                }
                trips += 1;
            }
        }
    }
    ok &= worst <= 32.0 && trips >= 1000;
    (ok, format!("{trips} roundtrips ({boundary} boundary route); max excess over ideal {worst:.2} bits"))
}

fn criterion_11() -> Outcome {
    let mut ok = true;
    let mut psi0: f64 = 0.0;
    let mut mean_v: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    for (s, fam) in [mixture_m2(), mixture_m3(), mixture_k2()].into_iter().enumerate() {
        let k = fam.dim();
        let grid = TiltingGrid::new(k, 100, 1.0, 0.5, 2.0, 0.05).unwrap();
        for i in 0..200u64 {
            let mut rng = trial_rng(11 + s as u64, i);
            let theta = fam.space().sample(&mut rng);
            let table = SymbolTable::new(fam.as_ref(), &theta).unwrap();
            psi0 = psi0.max(log_normalizer_table(&table, &Matrix::zeros(k, k)).unwrap().abs());
            let mut ev = Matrix::zeros(k, k);
            for (x, v) in table.v.iter().enumerate() {
                ev += v * table.probs[x];
            }
            mean_v = mean_v.max(linalg::max_norm(&ev));
            for j in 0..grid.len() {
                let lp = tilted_log_probs(&table, &grid.xi(j)).unwrap();
                norm_err = norm_err.max((lp.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs());
            }
        }
    }
    ok &= psi0 == 0.0 && mean_v <= 1e-10 && norm_err <= 1e-12;
    let mut sandwich = true;
    for i in 0..1000u64 {
        let mut rng = trial_rng(111, i);
        let k = rng.gen_range(1..=5);
        let mut m = Matrix::zeros(k, k);
        for r in 0..k {
            for c in r..k {
                let v = rng.gen_range(-3.0..3.0);
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        let (mx, sp) = (linalg::max_norm(&m), linalg::spectral_norm(&m));
        let kf = k as f64;
        sandwich &= mx / kf.sqrt() <= sp * (1.0 + 1e-12) && sp <= kf * mx * (1.0 + 1e-12);
    }
    ok &= sandwich;
    (
        ok,
        format!("|psi(0)| {psi0:e}; max |E V| {mean_v:.2e}; max |sum p - 1| {norm_err:.2e}; norm sandwich {sandwich}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 Kraft sums", 10, criterion_1),
        ("2 quantization inequalities", 30, criterion_2),
        ("3 grid cardinality", 120, criterion_3),
        ("4 exponential-family regret", 60, criterion_4),
        ("5 tilted-code proof obligations", 120, criterion_5),
        ("6 risk chain", 60, criterion_6),
        ("7 risk tail", 120, criterion_7),
        ("8 NML ordering", 30, criterion_8),
        ("9 bundle advantage", 30, criterion_9),
        ("10 bitstream", 30, criterion_10),
        ("11 normalization identities", 10, criterion_11),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {detail} ({:.2}s of {limit}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
