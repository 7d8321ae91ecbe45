//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its measured quantities. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use sparse_moments::calibration;
use sparse_moments::highdim::{recover_highdim, ProjectionQuery, RecoveryConfigHD};
use sparse_moments::mixtures::{
    random_mixture, transport_1d, transport_general, Domain, GroundMetric, SeparationMode,
    SpikeMixture,
};
use sparse_moments::moments::{build_hankel, moments_1d, moments_2d, MomentVector1D};
use sparse_moments::oracles::{
    gaussian_moments_1d, sample_corpus, topic_projected_moments, EstimatedMoments, TopicOracle,
};
use sparse_moments::prony1d::{recover_1d, RecoveryConfig1D};
use sparse_moments::prony2d::{recover_2d, RecoveryConfig2D};
use sparse_moments::rng::CounterRng;
use sparse_moments::verify::{
    composition_sum, schur_bruteforce, transport_lp_reference, vandermonde_ratio, Partition,
};

fn separated_interval_mixture(k: usize, sep: f64, min_w: f64, rng: &mut CounterRng) -> SpikeMixture {
    random_mixture(&Domain::UnitInterval, k, SeparationMode::Separated(sep), min_w, rng).unwrap()
}

#[test]
fn criterion_01_exact_recovery_regression() {
    let mut worst = 0.0f64;
    let mut within_tight = 0usize;
    let mut total = 0usize;
    let mut slowest = 0.0f64;
    for k in 1..=5usize {
        for seed in 0..50u64 {
            let mut rng = CounterRng::stream(seed, 0xc1 ^ (k as u64) << 8);
            let truth = separated_interval_mixture(k, 0.1, 0.1, &mut rng);
            let m = moments_1d(&truth, 2 * k - 1).unwrap();
            let cfg = RecoveryConfig1D::new(k, 1e-12, seed);
            let t0 = Instant::now();
            let rep = recover_1d(&m, &cfg).unwrap();
            let elapsed = t0.elapsed().as_secs_f64() * 1e3;
            slowest = slowest.max(elapsed);
            let t = transport_1d(&rep.mixture, &truth).unwrap();
            total += 1;
            if t <= 1e-5 {
                within_tight += 1;
            }
            worst = worst.max(t);
            assert!(t <= 1e-3, "k={k} seed={seed}: transport {t} above 1e-3");
            assert!(elapsed < 10.0, "k={k} seed={seed}: {elapsed:.2} ms per case");
        }
    }
    let rate = within_tight as f64 / total as f64;
    assert!(rate >= 0.95, "only {within_tight}/{total} within 1e-5");
    println!(
        "criterion 01 PASS: exact recovery {within_tight}/{total} within 1e-5, worst {worst:.2e}, slowest case {slowest:.2} ms"
    );
}

#[test]
fn criterion_02_hankel_identity() {
    // Exact rational check of the worked example in i128 arithmetic:
    // M = (1, 1/2, 5/16, 7/32) over denominator 32, c = (3/16, -1) over 16.
    // Row residuals of A c + b must vanish exactly.
    let m_num: [i128; 4] = [32, 16, 10, 7]; // times 1/32
    let c_num: [i128; 2] = [3, -16]; // times 1/16
    for i in 0..2 {
        // residual_i * (32*16) = sum_j M[i+j]*c[j]*32*16/(32*16) + M[i+2]
        let r = m_num[i] * c_num[0] + m_num[i + 1] * c_num[1] + m_num[i + 2] * 16;
        assert_eq!(r, 0, "rational Hankel identity failed at row {i}");
    }
    let mut rng = CounterRng::new(0xc2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let k = 1 + rng.below(6);
        let m = random_mixture(&Domain::UnitInterval, k, SeparationMode::Random, 0.0, &mut rng).unwrap();
        let mv = moments_1d(&m, 2 * k - 1).unwrap();
        let h = build_hankel(&mv, k).unwrap();
        let mut poly = vec![1.0];
        for &a in &m.scalar_locations() {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, &p) in poly.iter().enumerate() {
                next[i + 1] += p;
                next[i] -= a * p;
            }
            poly = next;
        }
        for i in 0..k {
            let mut r = h.b[i];
            for j in 0..k {
                r += h.a[i * k + j] * poly[j];
            }
            worst = worst.max(r.abs());
        }
    }
    assert!(worst <= 1e-10, "worst Hankel residual {worst}");
    println!("criterion 02 PASS: Hankel identity on 500 mixtures, worst residual {worst:.2e}; rational case exact");
}

#[test]
fn criterion_03_noise_scaling_law() {
    let t0 = Instant::now();
    let sweep = calibration::sweep_1d();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        sweep.max_error_rate <= 1.2 * calibration::ERROR_RATE_1D,
        "rate {} exceeds 1.2 x pinned {}",
        sweep.max_error_rate,
        calibration::ERROR_RATE_1D
    );
    assert!(elapsed < 60.0, "sweep took {elapsed:.1} s");
    println!(
        "criterion 03 PASS: max T/(k xi^(1/(4k-2))) = {:.4e} <= 1.2 x {:.4e}, sweep {elapsed:.2} s",
        sweep.max_error_rate,
        calibration::ERROR_RATE_1D
    );
}

#[test]
fn criterion_04_no_separation_robustness() {
    let xi: f64 = 1e-12;
    // 1-D: coincident spikes plus a 1e-6 weight spike, exact moments.
    let worst_1d = calibration::sweep_degenerate_1d();
    assert!(
        worst_1d <= 1.2 * calibration::MOMENT_CONSISTENCY_1D + 1e-9,
        "1-D degenerate consistency {worst_1d}"
    );
    let worst_2d = calibration::sweep_degenerate_2d();
    assert!(
        worst_2d <= 1.2 * calibration::MOMENT_CONSISTENCY_2D_DEGENERATE + 1e-9,
        "2-D degenerate consistency {worst_2d}"
    );
    // Reports stay finite on the degenerate corpus.
    let mut rng = CounterRng::new(0xc4);
    let x = rng.uniform();
    let truth = SpikeMixture::new(
        Domain::UnitInterval,
        vec![vec![x], vec![x], vec![rng.uniform()]],
        vec![0.4999995, 0.4999995, 1e-6],
    )
    .unwrap();
    let m = moments_1d(&truth, 5).unwrap();
    let rep = recover_1d(&m, &RecoveryConfig1D::new(3, xi, 7)).unwrap();
    assert!(!rep.has_non_finite(), "non-finite values in the 1-D report");
    let p = sparse_moments::mixtures::random_point(&Domain::UnitTriangle, &mut rng);
    let truth2 = SpikeMixture::new(Domain::UnitTriangle, vec![p.clone(), p], vec![0.5, 0.5]).unwrap();
    let g = moments_2d(&truth2, 3).unwrap();
    let rep2 = recover_2d(&g, &RecoveryConfig2D::new(2, xi, 7)).unwrap();
    assert!(!rep2.has_non_finite(), "non-finite values in the 2-D report");
    println!(
        "criterion 04 PASS: degenerate corpora stay within pinned sqrt(xi) consistency (1d {worst_1d:.2e}, 2d {worst_2d:.2e}), no NaN/Inf"
    );
}

#[test]
fn criterion_05_planar_pipeline() {
    // Conjugate-moment transform vs direct computation, 200 random mixtures.
    let mut rng = CounterRng::new(0xc5);
    let mut worst_transform = 0.0f64;
    for _ in 0..200 {
        let k = 1 + rng.below(5);
        let m = random_mixture(&Domain::UnitTriangle, k, SeparationMode::Random, 0.0, &mut rng).unwrap();
        let grid = moments_2d(&m, 2 * k - 1).unwrap();
        let g = sparse_moments::moments::complex_transform(&grid).unwrap();
        let direct = sparse_moments::moments::conjugate_moments_direct(&m, k).unwrap();
        for i in 0..=k {
            for j in 0..k {
                worst_transform = worst_transform.max((g.get(i, j) - direct.get(i, j)).norm());
            }
        }
    }
    assert!(worst_transform <= 1e-10, "transform error {worst_transform}");
    // Planar recovery on exact moments of separated truths.
    let mut ok = 0usize;
    let seeds = 100u64;
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut rng = CounterRng::stream(seed, 0xc5c5);
        let k = 1 + rng.below(3);
        let truth = random_mixture(&Domain::UnitTriangle, k, SeparationMode::Separated(0.2), 0.1, &mut rng)
            .unwrap();
        let grid = moments_2d(&truth, 2 * k - 1).unwrap();
        let rep = recover_2d(&grid, &RecoveryConfig2D::new(k, 1e-12, seed)).unwrap();
        let (t, _) = transport_general(&rep.mixture, &truth, GroundMetric::L1).unwrap();
        worst = worst.max(t);
        if t <= 1e-4 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "only {ok}/{seeds} within 1e-4 (worst {worst:.2e})");
    println!(
        "criterion 05 PASS: transform error {worst_transform:.2e}; planar recovery {ok}/{seeds} within 1e-4"
    );
}

#[test]
fn criterion_06_high_dimensional_end_to_end() {
    let t0 = Instant::now();
    let (exponent, successes, seeds) = calibration::sweep_highdim();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(successes >= 95, "only {successes}/{seeds} within 1e-2");
    assert!(elapsed < 30.0, "sweep took {elapsed:.1} s");
    assert!(
        exponent >= 0.9 * calibration::HIGHDIM_EXPONENT,
        "exponent regression: {exponent} vs pinned {}",
        calibration::HIGHDIM_EXPONENT
    );
    println!(
        "criterion 06 PASS: {successes}/{seeds} seeds within 1e-2, exponent {exponent:.3} (pinned {:.3}), {elapsed:.1} s",
        calibration::HIGHDIM_EXPONENT
    );
}

#[test]
fn criterion_07_schur_vandermonde_identities() {
    let t0 = Instant::now();
    // Worked example: s_(2,1,0) has an eight-tableau expansion; integer
    // evaluation is exact.
    let l = Partition::new(vec![2, 1, 0]).unwrap();
    let (x1, x2, x3) = (2.0, 3.0, 5.0);
    let expect = x1 * x1 * x2
        + x1 * x1 * x3
        + x1 * x2 * x2
        + 2.0 * x1 * x2 * x3
        + x1 * x3 * x3
        + x2 * x2 * x3
        + x2 * x3 * x3;
    assert_eq!(schur_bruteforce(&l, &[x1, x2, x3]).unwrap(), expect);
    let mut rng = CounterRng::new(0xc7);
    let mut worst_rel = 0.0f64;
    for k in 1..=5usize {
        for j in k..=k + 4 {
            for _ in 0..100 {
                let mut a: Vec<f64>;
                loop {
                    a = (0..k).map(|_| rng.uniform_in(0.2, 1.8)).collect();
                    let mut ok = true;
                    for p in 0..k {
                        for q in 0..p {
                            if (a[p] - a[q]).abs() < 1e-3 {
                                ok = false;
                            }
                        }
                    }
                    if ok {
                        break;
                    }
                }
                let vr = vandermonde_ratio(&a, j).unwrap().abs();
                let cs = composition_sum(&a, j).unwrap().abs();
                let hook = schur_bruteforce(&Partition::hook(j, k).unwrap(), &a).unwrap().abs();
                let scale = 1.0 + vr.max(cs).max(hook);
                let rel = ((vr - cs).abs().max((vr - hook).abs())) / scale;
                worst_rel = worst_rel.max(rel);
                assert!(rel <= 1e-9, "k={k} j={j}: |vr|={vr} |cs|={cs} |schur|={hook}");
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "identity suite took {elapsed:.2} s");
    println!(
        "criterion 07 PASS: identities to rel {worst_rel:.2e} over k<=5, j<=k+4; worked example exact; {elapsed:.2} s"
    );
}

#[test]
fn criterion_08_topic_model_statistical() {
    let t0 = Instant::now();
    let d = 5usize;
    let k = 2usize;
    let snapshot = 3usize;
    let n_docs = 100_000usize;
    let truth = SpikeMixture::new(
        Domain::Simplex { dim: d },
        vec![vec![0.6, 0.1, 0.1, 0.1, 0.1], vec![0.1, 0.1, 0.1, 0.1, 0.6]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let mut rng = CounterRng::new(0xc8);
    let corpus = sample_corpus(&truth, snapshot, n_docs, &mut rng).unwrap();

    // Moment estimates within 0.01 of the exact projected moments on an
    // Algorithm-style query.
    let mut dir_rng = CounterRng::new(0xc8c8);
    let r = sparse_moments::highdim::random_unit_direction(d, &mut dir_rng);
    let col: Vec<f64> = r.iter().map(|x| (x + 1.0) / 4.0).collect();
    let q1 = ProjectionQuery { columns: vec![col.clone()], shifts: vec![0.0], max_degree: snapshot };
    let mut est_rng = CounterRng::new(0xc811);
    let est = match topic_projected_moments(&corpus, &q1, &mut est_rng).unwrap() {
        EstimatedMoments::OneD(e) => e,
        _ => unreachable!(),
    };
    let mut worst_moment_err = 0.0f64;
    for t in 1..=snapshot {
        let exact: f64 = truth
            .locations()
            .iter()
            .zip(truth.weights())
            .map(|(a, &w)| w * a.iter().zip(&col).map(|(x, c)| x * c).sum::<f64>().powi(t as i32))
            .sum();
        worst_moment_err = worst_moment_err.max((est.moments.get(t) - exact).abs());
    }
    let mut e2 = vec![0.0; d];
    e2[1] = 0.5;
    let q2 = ProjectionQuery { columns: vec![col.clone(), e2.clone()], shifts: vec![0.0, 0.0], max_degree: snapshot };
    let mut est_rng = CounterRng::new(0xc812);
    let est2 = match topic_projected_moments(&corpus, &q2, &mut est_rng).unwrap() {
        EstimatedMoments::TwoD(e) => e,
        _ => unreachable!(),
    };
    for (i, j) in est2.moments.indices() {
        let exact: f64 = truth
            .locations()
            .iter()
            .zip(truth.weights())
            .map(|(a, &w)| {
                let p1: f64 = a.iter().zip(&col).map(|(x, c)| x * c).sum();
                let p2: f64 = a.iter().zip(&e2).map(|(x, c)| x * c).sum();
                w * p1.powi(i as i32) * p2.powi(j as i32)
            })
            .sum();
        worst_moment_err = worst_moment_err.max((est2.moments.get(i, j) - exact).abs());
    }
    assert!(worst_moment_err <= 0.01, "moment estimate error {worst_moment_err}");

    // Full recovery through the oracle; the noise bound comes from the
    // estimator's own standard errors (4 sigma).
    let xi_est = est
        .standard_errors
        .iter()
        .chain(est2.standard_errors.iter().map(|(_, s)| s))
        .fold(0.0f64, |a, &b| a.max(4.0 * b));
    let oracle = TopicOracle::new(corpus, xi_est, 0xc9);
    let cfg = RecoveryConfigHD::new(k, d, xi_est, 0xca);
    let rep = recover_highdim(&oracle, &cfg).unwrap();
    let (t, _) = transport_general(&rep.mixture, &truth, GroundMetric::L1).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(t <= 0.15, "topic recovery transport {t}");
    assert!(elapsed < 60.0, "topic pipeline took {elapsed:.1} s");
    println!(
        "criterion 08 PASS: moment estimates within {worst_moment_err:.4} (<= 0.01), recovery transport {t:.3} (<= 0.15), {elapsed:.1} s"
    );
}

#[test]
fn criterion_09_gaussian_one_dimensional() {
    let truth = SpikeMixture::new(
        Domain::UnitInterval,
        vec![vec![0.25], vec![0.75]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let n = 100_000usize;
    let mut rng = CounterRng::new(2);
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let comp = usize::from(rng.uniform() < 0.5);
            let mu = if comp == 0 { 0.25 } else { 0.75 };
            mu + rng.gaussian()
        })
        .collect();
    let est = gaussian_moments_1d(&samples, 1.0, 3).unwrap();
    // Ridge scale from the estimator's own standard errors; the per-entry
    // 4-sigma bound is too conservative as a joint regularizer.
    let xi = est.standard_errors.iter().fold(0.0f64, |a, &b| a.max(2.0 * b)).max(1e-6);
    let rep = recover_1d(&est.moments, &RecoveryConfig1D::new(2, xi, 5)).unwrap();
    let t = transport_1d(&rep.mixture, &truth).unwrap();
    assert!(t <= 0.2, "gaussian recovery transport {t}");

    // Unbiasedness z-test over 200 repetitions at the 4-sigma level.
    let reps = 200u64;
    let mut z_sum = 0.0;
    for rep_seed in 0..reps {
        let mut r = CounterRng::stream(rep_seed, 0x9a);
        let s: Vec<f64> = (0..2000)
            .map(|_| {
                let mu = if r.uniform() < 0.5 { 0.25 } else { 0.75 };
                mu + r.gaussian()
            })
            .collect();
        let e = gaussian_moments_1d(&s, 1.0, 3).unwrap();
        let truth_m2: f64 = 0.5 * (0.25f64.powi(2) + 0.75f64.powi(2));
        if e.standard_errors[2] > 0.0 {
            z_sum += (e.moments.get(2) - truth_m2) / e.standard_errors[2];
        }
    }
    let mean_z = z_sum / reps as f64;
    let bound = 4.0 / (reps as f64).sqrt();
    assert!(mean_z.abs() <= bound, "mean z {mean_z} exceeds {bound}");
    println!(
        "criterion 09 PASS: gaussian recovery transport {t:.3} (<= 0.2), unbiasedness mean z {mean_z:.3} within {bound:.3}"
    );
}

#[test]
fn criterion_10_transport_correctness() {
    let mut rng = CounterRng::new(0xca);
    let mut worst = 0.0f64;
    for trial in 0..500 {
        let dom = if trial % 2 == 0 { Domain::UnitTriangle } else { Domain::UnitInterval };
        let a = random_mixture(&dom, 1 + rng.below(6), SeparationMode::Random, 0.0, &mut rng).unwrap();
        let b = random_mixture(&dom, 1 + rng.below(6), SeparationMode::Random, 0.0, &mut rng).unwrap();
        let metric = if trial % 3 == 0 { GroundMetric::L2 } else { GroundMetric::L1 };
        let (fast, plan) = transport_general(&a, &b, metric).unwrap();
        let lp = transport_lp_reference(&a, &b, metric).unwrap();
        worst = worst.max((fast - lp).abs());
        assert!((fast - lp).abs() <= 1e-9, "trial {trial}: flow {fast} vs LP {lp}");
        assert!(plan.marginal_error(a.weights(), b.weights()) <= 1e-12);
    }
    println!("criterion 10 PASS: flow == LP reference on 500 instances, worst gap {worst:.2e}");
}

#[test]
fn criterion_11_scalability_smoke() {
    let k = 20usize;
    let mut rng = CounterRng::new(0xcb);
    let truth = random_mixture(&Domain::UnitInterval, k, SeparationMode::Random, 0.01, &mut rng).unwrap();
    let m = moments_1d(&truth, 2 * k - 1).unwrap();
    let t0 = Instant::now();
    let rep = recover_1d(&m, &RecoveryConfig1D::new(k, 1e-12, 1)).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert_eq!(rep.mixture.k(), k);
    assert!(!rep.has_non_finite());
    assert!(elapsed < 1.0, "k=20 recovery took {elapsed:.3} s");
    println!("criterion 11 PASS: k=20 recovery in {:.1} ms", elapsed * 1e3);
}

/// Criterion 1 also pins the rational two-spike example end to end.
#[test]
fn criterion_01_companion_rational_case() {
    let m = MomentVector1D::new(vec![1.0, 0.5, 5.0 / 16.0, 7.0 / 32.0], 0.0).unwrap();
    let rep = recover_1d(&m, &RecoveryConfig1D::new(2, 1e-12, 0)).unwrap();
    let truth = SpikeMixture::new(
        Domain::UnitInterval,
        vec![vec![0.25], vec![0.75]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let t = transport_1d(&rep.mixture, &truth).unwrap();
    assert!(t <= 1e-6, "rational case transport {t}");
    println!("criterion 01 (rational case) PASS: transport {t:.2e}");
}
