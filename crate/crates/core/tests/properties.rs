//! Stream, rounding, and statistical-query invariants.

use proptest::prelude::*;

use replearn::rounding::{BoxScheme, FoamScheme, IntervalPartition};
use replearn::sq::{rstat, rstat_sample_size, SqParams, SqQuery};
use replearn::RandomStream;

// ------------------------------------------------------------- streams

#[test]
fn replay_invariance_bit_identical() {
    // Same stream, same sample: any consumer sequence replays exactly.
    let mut a = RandomStream::new(99).derive("replay");
    let mut b = RandomStream::new(99).derive("replay");
    for i in 0..10_000 {
        if i % 3 == 0 {
            assert_eq!(a.draw_u64(), b.draw_u64());
        } else {
            assert_eq!(a.draw_unit().to_bits(), b.draw_unit().to_bits());
        }
    }
}

#[test]
fn isolation_under_million_draw_interleaving() {
    let root = RandomStream::new(5);
    let sib = root.derive("watched");
    let expected: Vec<u64> = {
        let mut s = sib.clone();
        (0..100).map(|_| s.draw_u64()).collect()
    };
    // Exhaust a sibling heavily, interleaved with derivations.
    let mut noisy = root.derive("noisy");
    for _ in 0..1_000_000 {
        noisy.draw_u64();
    }
    let _ = root.derive("other").draw_u64();
    let got: Vec<u64> = {
        let mut s = sib.clone();
        (0..100).map(|_| s.draw_u64()).collect()
    };
    assert_eq!(expected, got);
}

#[test]
fn sibling_streams_pass_chi_square_independence() {
    // Pair draws from two sibling streams, bin into a 16x16 grid, and check
    // the chi-square statistic against df = 255 (mean 255, sd ~22.6).
    let mut a = RandomStream::new(31).derive("a");
    let mut b = RandomStream::new(31).derive("b");
    let n = 100_000usize;
    let mut counts = [[0u32; 16]; 16];
    for _ in 0..n {
        let i = (a.draw_unit() * 16.0) as usize;
        let j = (b.draw_unit() * 16.0) as usize;
        counts[i.min(15)][j.min(15)] += 1;
    }
    let expect = n as f64 / 256.0;
    let stat: f64 = counts
        .iter()
        .flatten()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    assert!(stat < 255.0 + 6.0 * (2.0 * 255.0f64).sqrt(), "chi-square {stat}");
}

// ------------------------------------------------------------- intervals

proptest! {
    #[test]
    fn interval_midpoint_within_half_width(v in 0.0..=1.0f64, alpha in 0.01..=0.5f64, u in 0.0..1.0f64) {
        let p = IntervalPartition::new(alpha, u * alpha).unwrap();
        let m = p.round(v);
        prop_assert!((m - v).abs() <= alpha / 2.0 + 1e-12);
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn interval_same_region_iff_same_output(
        v1 in 0.0..=1.0f64, v2 in 0.0..=1.0f64, alpha in 0.01..=0.5f64, u in 0.0..1.0f64
    ) {
        let p = IntervalPartition::new(alpha, u * alpha).unwrap();
        let (lo1, _) = p.region_of(v1);
        let (lo2, _) = p.region_of(v2);
        prop_assert_eq!(lo1 == lo2, p.round(v1) == p.round(v2));
    }
}

#[test]
fn interval_boundary_crossing_rate_bounded() {
    // For |v1 - v2| <= 2τ' and a random offset, different regions happen
    // with probability at most 2τ'/α (tested at 5% relative tolerance).
    let alpha = 0.17;
    let two_tau_prime = 0.03;
    let mut s = RandomStream::new(8).derive("interval");
    let trials = 200_000;
    let mut crossings = 0;
    for _ in 0..trials {
        let p = IntervalPartition::with_random_offset(alpha, &mut s).unwrap();
        let v1 = s.draw_uniform(0.2, 0.7).unwrap();
        let v2 = v1 + two_tau_prime;
        if p.round(v1) != p.round(v2) {
            crossings += 1;
        }
    }
    let rate = crossings as f64 / trials as f64;
    let bound = two_tau_prime / alpha;
    assert!(rate <= bound * 1.05, "rate {rate} vs bound {bound}");
    // The offset makes the bound tight for points in general position.
    assert!(rate >= bound * 0.9, "rate {rate} suspiciously far below {bound}");
}

// ------------------------------------------------------------- boxes

proptest! {
    #[test]
    fn box_rounding_commutes_with_integer_translation(
        x0 in -3.0..3.0f64, x1 in -3.0..3.0f64, m0 in -3i32..=3, m1 in -3i32..=3, seed in 0u64..1000
    ) {
        let mut s = RandomStream::new(seed);
        let b = BoxScheme::construct(2, &mut s).unwrap();
        let x = [x0, x1];
        // Skip points within float noise of a cell boundary.
        let near_boundary = x.iter().zip(b.shift()).any(|(xi, zi)| {
            let t = xi - zi + 0.5;
            (t - t.round()).abs() < 1e-9
        });
        prop_assume!(!near_boundary);
        let r = b.apply(&x).unwrap();
        let shifted = [x0 + m0 as f64, x1 + m1 as f64];
        let r_shifted = b.apply(&shifted).unwrap();
        prop_assert!((r_shifted[0] - r[0] - m0 as f64).abs() < 1e-9);
        prop_assert!((r_shifted[1] - r[1] - m1 as f64).abs() < 1e-9);
    }
}

#[test]
fn box_axis_aligned_disagreement_exact_per_coordinate() {
    // For axis-aligned pairs the per-coordinate split probability is
    // exactly min(eps, 1).
    let mut s = RandomStream::new(12).derive("box1d");
    for &eps in &[0.05f64, 0.2, 0.5] {
        let trials = 100_000;
        let mut splits = 0;
        for _ in 0..trials {
            let b = BoxScheme::construct(1, &mut s).unwrap();
            let x = s.draw_uniform(-2.0, 2.0).unwrap();
            if b.apply(&[x]).unwrap() != b.apply(&[x + eps]).unwrap() {
                splits += 1;
            }
        }
        let rate = splits as f64 / trials as f64;
        let sigma = (eps * (1.0 - eps) / trials as f64).sqrt();
        assert!((rate - eps).abs() <= 4.0 * sigma, "eps={eps}: rate {rate}");
    }
}

// ------------------------------------------------------------- foams

#[test]
fn foam_periodicity_and_repeat_queries() {
    let mut s = RandomStream::new(13);
    let f = FoamScheme::construct(2, &mut s, 1_000_000).unwrap();
    let mut pts = RandomStream::new(14);
    for _ in 0..200 {
        let x = [
            pts.draw_uniform(-2.0, 2.0).unwrap(),
            pts.draw_uniform(-2.0, 2.0).unwrap(),
        ];
        let r = f.apply(&x).unwrap();
        assert_eq!(r, f.apply(&x).unwrap());
        let shifted = [x[0] + 2.0, x[1] - 1.0];
        let rs = f.apply(&shifted).unwrap();
        assert!((rs[0] - r[0] - 2.0).abs() < 1e-9 && (rs[1] - r[1] + 1.0).abs() < 1e-9);
    }
}

#[cfg(feature = "parallel")]
#[test]
fn foam_concurrent_queries_match_serial() {
    use rayon::prelude::*;
    let points: Vec<[f64; 2]> = {
        let mut s = RandomStream::new(16);
        (0..500)
            .map(|_| [s.draw_uniform(-2.0, 2.0).unwrap(), s.draw_uniform(-2.0, 2.0).unwrap()])
            .collect()
    };
    let mut c1 = RandomStream::new(17);
    let serial = FoamScheme::construct(2, &mut c1, 1_000_000).unwrap();
    let expected: Vec<Vec<f64>> = points.iter().map(|x| serial.apply(x).unwrap()).collect();
    let mut c2 = RandomStream::new(17);
    let shared = FoamScheme::construct(2, &mut c2, 1_000_000).unwrap();
    let got: Vec<Vec<f64>> = points.par_iter().map(|x| shared.apply(x).unwrap()).collect();
    assert_eq!(expected, got);
}

#[test]
fn foam_every_point_assigned_in_one_dim() {
    // f > 0 on (0,1), so every queried point is eventually captured.
    let mut s = RandomStream::new(15);
    let f = FoamScheme::construct(1, &mut s, 1_000_000).unwrap();
    for i in 0..1000 {
        let x = i as f64 / 1000.0;
        let r = f.apply(&[x]).unwrap();
        assert!((r[0] - x).abs() < 1.0);
    }
}

// ------------------------------------------------------------- rstat

#[test]
fn rstat_error_decomposition_instrumented() {
    // |mean - truth| <= τ' (Chernoff share) and the midpoint shift <= α/2;
    // together the output is within τ of the truth except with rate ~δ.
    let params = SqParams::new(0.1, 0.2, 0.01).unwrap();
    let n = rstat_sample_size(&params).unwrap();
    let root = RandomStream::new(20);
    let truth = 0.37;
    let trials = 400;
    let q = SqQuery::new("identity", |b: &u8| *b as f64);
    let mut mean_violations = 0;
    let mut total_violations = 0;
    for i in 0..trials {
        let t = root.derive(&format!("t{i}"));
        let mut data = t.derive("data");
        let sample: Vec<u8> = (0..n).map(|_| u8::from(data.draw_bernoulli(truth))).collect();
        let mean = sample.iter().map(|&b| b as f64).sum::<f64>() / n as f64;
        let out = rstat(&q, &sample, &params, &mut t.derive("algo")).unwrap();
        if (mean - truth).abs() > params.tau_prime() {
            mean_violations += 1;
        }
        assert!((out - mean).abs() <= params.alpha() / 2.0 + 1e-12);
        if (out - truth).abs() > params.tau {
            total_violations += 1;
        }
    }
    // δ = 0.01; allow generous Monte-Carlo slack at 400 trials.
    assert!(mean_violations <= 12, "mean violations {mean_violations}");
    assert!(total_violations <= 12, "total violations {total_violations}");
}

#[test]
fn rstat_paired_agreement_meets_budget() {
    let params = SqParams::new(0.1, 0.2, 0.01).unwrap();
    let n = rstat_sample_size(&params).unwrap();
    let root = RandomStream::new(21);
    let q = SqQuery::new("identity", |b: &u8| *b as f64);
    let trials = 800;
    let mut agree = 0;
    for i in 0..trials {
        let t = root.derive(&format!("t{i}"));
        let algo = t.derive("algo");
        let run = |label: &str| {
            let mut data = t.derive(label);
            let sample: Vec<u8> = (0..n).map(|_| u8::from(data.draw_bernoulli(0.5))).collect();
            rstat(&q, &sample, &params, &mut algo.clone()).unwrap()
        };
        if run("d1") == run("d2") {
            agree += 1;
        }
    }
    assert!(agree as f64 >= 0.8 * trials as f64, "agreement {agree}/{trials}");
}
