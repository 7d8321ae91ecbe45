//! Cross-module invariants: metric axioms, oracle agreement, pinned
//! calibration regressions, estimator unbiasedness, and randomized
//! structural properties.

use proptest::prelude::*;

use sparse_moments::calibration;
use sparse_moments::highdim::ProjectionQuery;
use sparse_moments::mixtures::{
    project_to_domain, random_mixture, repair_negative_weights, transport_1d, transport_general, Domain,
    GroundMetric, SeparationMode, SignedSpikeMixture, SpikeMixture,
};
use sparse_moments::moments::{moment_distance_1d, moments_1d};
use sparse_moments::oracles::{
    gaussian_moments_1d, gaussian_projected_moments, sample_corpus, topic_projected_moments, EstimatedMoments,
    GaussianModel,
};
use sparse_moments::rng::CounterRng;
use sparse_moments::verify::{moment_inequality_probe, signed_transport_lp, transport_lp_reference};

/// Pinned maximum of the moment-transportation probe on the seeded k=2
/// corpus (1000 pairs); the inequality itself guarantees boundedness.
const INEQUALITY_PROBE_K2: f64 = 0.456185;

fn random_interval_mixture(k: usize, rng: &mut CounterRng) -> SpikeMixture {
    random_mixture(&Domain::UnitInterval, k, SeparationMode::Random, 0.0, rng).unwrap()
}

#[test]
fn metric_axioms_interval() {
    let mut rng = CounterRng::new(101);
    for _ in 0..200 {
        let k_a = 1 + rng.below(6);
        let k_b = 1 + rng.below(6);
        let a = random_interval_mixture(k_a, &mut rng);
        let b = random_interval_mixture(k_b, &mut rng);
        let c = random_interval_mixture(1 + rng.below(6), &mut rng);
        let t_ab = transport_1d(&a, &b).unwrap();
        let t_ba = transport_1d(&b, &a).unwrap();
        assert!(t_ab >= 0.0);
        assert!((t_ab - t_ba).abs() <= 1e-12);
        assert!(transport_1d(&a, &a).unwrap() <= 1e-15);
        let t_ac = transport_1d(&a, &c).unwrap();
        let t_cb = transport_1d(&c, &b).unwrap();
        assert!(t_ab <= t_ac + t_cb + 1e-9, "triangle: {t_ab} > {t_ac} + {t_cb}");
    }
}

#[test]
fn metric_axioms_triangle_flow() {
    let mut rng = CounterRng::new(103);
    for _ in 0..100 {
        let dom = Domain::UnitTriangle;
        let a = random_mixture(&dom, 1 + rng.below(6), SeparationMode::Random, 0.0, &mut rng).unwrap();
        let b = random_mixture(&dom, 1 + rng.below(6), SeparationMode::Random, 0.0, &mut rng).unwrap();
        let c = random_mixture(&dom, 1 + rng.below(6), SeparationMode::Random, 0.0, &mut rng).unwrap();
        let (t_ab, plan) = transport_general(&a, &b, GroundMetric::L1).unwrap();
        let (t_ba, _) = transport_general(&b, &a, GroundMetric::L1).unwrap();
        assert!((t_ab - t_ba).abs() <= 1e-12);
        assert!(plan.marginal_error(a.weights(), b.weights()) <= 1e-12);
        let (t_aa, _) = transport_general(&a, &a, GroundMetric::L1).unwrap();
        assert!(t_aa <= 1e-9);
        let (t_ac, _) = transport_general(&a, &c, GroundMetric::L1).unwrap();
        let (t_cb, _) = transport_general(&c, &b, GroundMetric::L1).unwrap();
        assert!(t_ab <= t_ac + t_cb + 1e-9);
    }
}

#[test]
fn identity_of_indiscernibles_within_tolerance() {
    // Distinct mixtures at tiny distance have tiny transport; zero transport
    // only happens for equal measures.
    let mut rng = CounterRng::new(107);
    for _ in 0..100 {
        let a = random_interval_mixture(3, &mut rng);
        let eps = 1e-10;
        let shifted: Vec<Vec<f64>> = a
            .locations()
            .iter()
            .map(|p| vec![(p[0] + eps).min(1.0)])
            .collect();
        let b = SpikeMixture::new(Domain::UnitInterval, shifted, a.weights().to_vec()).unwrap();
        let t = transport_1d(&a, &b).unwrap();
        assert!(t <= 1e-9, "near-identical mixtures transport {t}");
    }
}

#[test]
fn repair_beats_random_candidates_and_matches_lp() {
    let mut rng = CounterRng::new(109);
    for trial in 0..20 {
        let k = 2 + rng.below(4); // k <= 5
        let locs: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.uniform()]).collect();
        // Signed weights summing to one, with genuine negatives.
        let mut w: Vec<f64> = (0..k).map(|_| rng.uniform_in(-0.4, 1.0)).collect();
        let s: f64 = w.iter().sum();
        if s.abs() < 0.2 {
            continue;
        }
        for x in &mut w {
            *x /= s;
        }
        let signed = match SignedSpikeMixture::from_real_weights(Domain::UnitInterval, locs.clone(), w.clone()) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let repaired = match repair_negative_weights(&signed) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let repaired_signed = SignedSpikeMixture::from_real_weights(
            Domain::UnitInterval,
            repaired.locations().to_vec(),
            repaired.weights().to_vec(),
        )
        .unwrap();
        let repaired_cost = signed_transport_lp(&signed, &repaired_signed).unwrap();
        // Certificate against 1000 random probability vectors on the support.
        for _ in 0..1000 {
            let mut cand: Vec<f64> = (0..k).map(|_| -rng.uniform().max(f64::MIN_POSITIVE).ln()).collect();
            let cs: f64 = cand.iter().sum();
            for x in &mut cand {
                *x /= cs;
            }
            let cand_m =
                SignedSpikeMixture::from_real_weights(Domain::UnitInterval, locs.clone(), cand).unwrap();
            let cand_cost = signed_transport_lp(&signed, &cand_m).unwrap();
            assert!(
                repaired_cost <= cand_cost + 1e-9,
                "trial {trial}: repair cost {repaired_cost} beaten by candidate {cand_cost}"
            );
        }
    }
}

#[test]
fn noise_scaling_regression_1d() {
    // Re-runs the pinned calibration sweep; nothing may exceed 1.2x the
    // recorded maxima.
    let sweep = calibration::sweep_1d();
    assert!(
        sweep.max_error_rate <= 1.2 * calibration::ERROR_RATE_1D,
        "error rate {} vs pinned {}",
        sweep.max_error_rate,
        calibration::ERROR_RATE_1D
    );
    assert!(
        sweep.max_char_norm <= 1.2 * calibration::CHAR_COEFF_NORM,
        "char norm {} vs pinned {}",
        sweep.max_char_norm,
        calibration::CHAR_COEFF_NORM
    );
    assert!(
        sweep.max_root_product <= 1.2 * calibration::ROOT_PRODUCT,
        "root product {} vs pinned {}",
        sweep.max_root_product,
        calibration::ROOT_PRODUCT
    );
}

#[test]
fn noise_scaling_regression_2d() {
    let (rate, consistency) = calibration::sweep_2d();
    assert!(
        rate <= 1.2 * calibration::ERROR_RATE_2D,
        "2-D error rate {rate} vs pinned {}",
        calibration::ERROR_RATE_2D
    );
    assert!(
        consistency <= 1.2 * calibration::MOMENT_CONSISTENCY_2D,
        "2-D moment consistency {consistency} vs pinned {}",
        calibration::MOMENT_CONSISTENCY_2D
    );
}

#[test]
fn moment_inequality_probe_regression() {
    let mut rng = CounterRng::new(0x1e11);
    let r1 = moment_inequality_probe(1, 1000, &mut rng).unwrap();
    assert!((r1 - 1.0).abs() <= 1e-9, "k=1 ratio must be exactly 1, got {r1}");
    let mut rng = CounterRng::new(0x1e11);
    let r2 = moment_inequality_probe(2, 1000, &mut rng).unwrap();
    assert!(
        r2 <= 1.2 * INEQUALITY_PROBE_K2,
        "k=2 probe {r2} vs pinned {INEQUALITY_PROBE_K2}"
    );
}

#[test]
fn topic_p1_estimator_agrees_with_direct_moments_at_scale() {
    // Desk-scale agreement: one million 3-snapshots, k = 2 topics, a fixed
    // projection; every estimated degree within 0.01 of the exact projected
    // moment.
    let d = 4;
    let truth = SpikeMixture::new(
        Domain::Simplex { dim: d },
        vec![vec![0.5, 0.3, 0.1, 0.1], vec![0.1, 0.1, 0.2, 0.6]],
        vec![0.4, 0.6],
    )
    .unwrap();
    let mut rng = CounterRng::new(0x106);
    let corpus = sample_corpus(&truth, 3, 1_000_000, &mut rng).unwrap();
    let r = vec![0.45, 0.2, 0.35, 0.15];
    let q = ProjectionQuery { columns: vec![r.clone()], shifts: vec![0.0], max_degree: 3 };
    let mut est_rng = CounterRng::new(0x107);
    let est = match topic_projected_moments(&corpus, &q, &mut est_rng).unwrap() {
        EstimatedMoments::OneD(e) => e,
        _ => unreachable!(),
    };
    for t in 1..=3 {
        let exact: f64 = truth
            .locations()
            .iter()
            .zip(truth.weights())
            .map(|(a, &w)| w * a.iter().zip(&r).map(|(x, c)| x * c).sum::<f64>().powi(t as i32))
            .sum();
        let err = (est.moments.get(t) - exact).abs();
        assert!(err <= 0.01, "degree {t}: error {err}");
    }
}

#[test]
fn grid_oracle_agrees_with_recovery_on_tiny_instances() {
    // Independent exhaustive search confirms the pipeline's output on k <= 2.
    use sparse_moments::prony1d::{recover_1d, RecoveryConfig1D};
    use sparse_moments::verify::grid_recover_oracle;
    let mut rng = CounterRng::new(0x99d);
    for trial in 0..10 {
        let k = 1 + (trial % 2);
        let truth = random_mixture(&Domain::UnitInterval, k, SeparationMode::Separated(0.2), 0.2, &mut rng)
            .unwrap();
        let m = moments_1d(&truth, 2 * k - 1).unwrap();
        let rec = recover_1d(&m, &RecoveryConfig1D::new(k, 1e-12, trial as u64)).unwrap();
        let grid = grid_recover_oracle(&m, k, 0.01).unwrap();
        let t = transport_1d(&rec.mixture, &grid).unwrap();
        assert!(t <= 0.02, "trial {trial}: pipeline vs grid oracle transport {t}");
    }
}

#[test]
fn topic_estimator_unbiased_z_test() {
    // 200 seeded repetitions; the mean z-score of an unbiased estimator
    // stays within 4 sigma of zero.
    let d = 4;
    let truth = SpikeMixture::new(
        Domain::Simplex { dim: d },
        vec![vec![0.4, 0.3, 0.2, 0.1], vec![0.1, 0.2, 0.3, 0.4]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let r1 = vec![0.9, 0.1, 0.3, 0.7];
    let r2 = vec![0.2, 0.8, 0.5, 0.4];
    let q1 = ProjectionQuery { columns: vec![r1.clone()], shifts: vec![0.0], max_degree: 3 };
    let q2 = ProjectionQuery { columns: vec![r1.clone(), r2.clone()], shifts: vec![0.0, 0.0], max_degree: 3 };
    let truth_m1: f64 = truth
        .locations()
        .iter()
        .zip(truth.weights())
        .map(|(a, &w)| w * a.iter().zip(&r1).map(|(x, r)| x * r).sum::<f64>())
        .sum();
    let truth_m11: f64 = truth
        .locations()
        .iter()
        .zip(truth.weights())
        .map(|(a, &w)| {
            let p1: f64 = a.iter().zip(&r1).map(|(x, r)| x * r).sum();
            let p2: f64 = a.iter().zip(&r2).map(|(x, r)| x * r).sum();
            w * p1 * p2
        })
        .sum();
    let reps = 200;
    let mut z1_sum = 0.0;
    let mut z11_sum = 0.0;
    let mut used = 0;
    for rep in 0..reps {
        let mut rng = CounterRng::stream(rep, 0x70);
        let corpus = sample_corpus(&truth, 3, 400, &mut rng).unwrap();
        let mut est_rng = CounterRng::stream(rep, 0x71);
        let e1 = match topic_projected_moments(&corpus, &q1, &mut est_rng).unwrap() {
            EstimatedMoments::OneD(e) => e,
            _ => unreachable!(),
        };
        let mut est_rng = CounterRng::stream(rep, 0x72);
        let e2 = match topic_projected_moments(&corpus, &q2, &mut est_rng).unwrap() {
            EstimatedMoments::TwoD(e) => e,
            _ => unreachable!(),
        };
        let se1 = e1.standard_errors[1];
        let se11 = e2
            .standard_errors
            .iter()
            .find(|(p, _)| *p == (1, 1))
            .map(|(_, s)| *s)
            .unwrap();
        if se1 == 0.0 || se11 == 0.0 {
            continue;
        }
        used += 1;
        z1_sum += (e1.moments.get(1) - truth_m1) / se1;
        z11_sum += (e2.moments.get(1, 1) - truth_m11) / se11;
    }
    let bound = 4.0 / (used as f64).sqrt();
    let z1 = z1_sum / used as f64;
    let z11 = z11_sum / used as f64;
    assert!(z1.abs() <= bound, "p=1 mean z {z1} exceeds {bound}");
    assert!(z11.abs() <= bound, "p=2 mean z {z11} exceeds {bound}");
}

#[test]
fn gaussian_estimator_unbiased_z_test() {
    let reps = 200;
    let mut z_sum = vec![0.0; 4];
    for rep in 0..reps {
        let mut rng = CounterRng::stream(rep, 0x6a);
        let mu = 0.4;
        let samples: Vec<f64> = (0..2000).map(|_| mu + rng.gaussian()).collect();
        let est = gaussian_moments_1d(&samples, 1.0, 3).unwrap();
        for t in 1..=3 {
            let se = est.standard_errors[t];
            if se > 0.0 {
                z_sum[t] += (est.moments.get(t) - mu.powi(t as i32)) / se;
            }
        }
    }
    let bound = 4.0 / (reps as f64).sqrt();
    for t in 1..=3 {
        let z = z_sum[t] / reps as f64;
        assert!(z.abs() <= bound, "degree {t}: mean z {z} exceeds {bound}");
    }
}

#[test]
fn hermite_moments_match_powers_of_mean() {
    // E[H_t(x)] = mu^t for x ~ N(mu, 1); three means, n = 1e5, 4 sigma.
    for (seed, mu) in [(1u64, 0.0f64), (2, 0.5), (3, -0.5)] {
        let mut rng = CounterRng::new(seed);
        let samples: Vec<f64> = (0..100_000).map(|_| mu + rng.gaussian()).collect();
        let est = gaussian_moments_1d(&samples, 1.0, 4).unwrap();
        for t in 1..=4 {
            let se = est.standard_errors[t].max(1e-9);
            let err = (est.moments.get(t) - mu.powi(t as i32)).abs();
            assert!(err <= 4.0 * se, "mu={mu} t={t}: err {err} vs 4se {}", 4.0 * se);
        }
    }
}

#[test]
fn gaussian_ball_recovery_end_to_end() {
    // Samples -> Hermite oracle (affine ball queries) -> full recovery.
    use sparse_moments::highdim::{recover_highdim, RecoveryConfigHD, RecoveryDomain};
    use sparse_moments::oracles::GaussianOracle;
    let d = 3;
    let truth = SpikeMixture::new(
        Domain::UnitBall { dim: d },
        vec![vec![0.5, -0.3, 0.2], vec![-0.4, 0.45, -0.25]],
        vec![0.5, 0.5],
    )
    .unwrap();
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        cov[i * d + i] = 1.0;
    }
    let mut rng = CounterRng::new(3);
    let model = GaussianModel::sample_from(&truth, cov, 200_000, &mut rng).unwrap();
    let xi = 2e-3;
    let oracle = GaussianOracle::new(model, xi);
    let cfg = RecoveryConfigHD::new(2, d, xi, 3).with_domain(RecoveryDomain::Ball);
    let rep = recover_highdim(&oracle, &cfg).unwrap();
    let (t, _) = transport_general(&rep.mixture, &truth, GroundMetric::L1).unwrap();
    assert!(t <= 0.15, "gaussian ball recovery transport {t}");
    assert_eq!(rep.query_log.len(), d + 1);
    for q in &rep.query_log {
        assert!(q.query.max_entry() <= 1.0);
    }
}

#[test]
fn gaussian_2d_recombination_matches_direct_products() {
    // Correlated covariance: the rho-recombined mixed moments must agree
    // with the direct expectation within CLT error.
    let d = 2;
    let mean = vec![0.25, -0.3];
    let truth = SpikeMixture::new(Domain::UnitBall { dim: d }, vec![mean.clone()], vec![1.0]).unwrap();
    let cov = vec![1.0, 0.4, 0.4, 0.8];
    let mut rng = CounterRng::new(77);
    let model = GaussianModel::sample_from(&truth, cov, 200_000, &mut rng).unwrap();
    let q = ProjectionQuery {
        columns: vec![vec![0.8, 0.2], vec![0.3, 0.9]],
        shifts: vec![0.0, 0.0],
        max_degree: 3,
    };
    match gaussian_projected_moments(&model, &q).unwrap() {
        EstimatedMoments::TwoD(e) => {
            for (i, j) in e.moments.indices() {
                if (i, j) == (0, 0) {
                    continue;
                }
                let p1: f64 = mean.iter().zip(&q.columns[0]).map(|(x, r)| x * r).sum();
                let p2: f64 = mean.iter().zip(&q.columns[1]).map(|(x, r)| x * r).sum();
                let want = p1.powi(i as i32) * p2.powi(j as i32);
                let se = e
                    .standard_errors
                    .iter()
                    .find(|(p, _)| *p == (i, j))
                    .map(|(_, s)| *s)
                    .unwrap()
                    .max(1e-9);
                let err = (e.moments.get(i, j) - want).abs();
                assert!(err <= 5.0 * se, "({i},{j}): err {err} vs 5se {}", 5.0 * se);
            }
        }
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_projection_properties(v in prop::collection::vec(-2.0f64..2.0, 2..8)) {
        let dom = Domain::Simplex { dim: v.len() };
        let p = project_to_domain(&v, &dom);
        prop_assert!(dom.contains(&p, 1e-9));
        let p2 = project_to_domain(&p, &dom);
        prop_assert_eq!(p, p2);
    }

    #[test]
    fn interval_signed_transport_matches_flow(
        xs in prop::collection::vec(0.0f64..1.0, 1..5),
        ys in prop::collection::vec(0.0f64..1.0, 1..5),
    ) {
        // Probability mixtures: signed transport, flow transport, and the LP
        // reference oracle must agree.
        let mut rng = CounterRng::new(5);
        let wa = sparse_moments::mixtures::random_weights(xs.len(), 0.0, &mut rng);
        let wb = sparse_moments::mixtures::random_weights(ys.len(), 0.0, &mut rng);
        let a = SpikeMixture::new(Domain::UnitInterval, xs.iter().map(|&x| vec![x]).collect(), wa).unwrap();
        let b = SpikeMixture::new(Domain::UnitInterval, ys.iter().map(|&y| vec![y]).collect(), wb).unwrap();
        let direct = transport_1d(&a, &b).unwrap();
        let (flow, _) = transport_general(&a, &b, GroundMetric::L1).unwrap();
        let lp = transport_lp_reference(&a, &b, GroundMetric::L1).unwrap();
        prop_assert!((direct - flow).abs() <= 1e-9, "cdf {} vs flow {}", direct, flow);
        prop_assert!((direct - lp).abs() <= 1e-9, "cdf {} vs lp {}", direct, lp);
    }

    #[test]
    fn hankel_identity_property(
        locs in prop::collection::vec(0.0f64..1.0, 1..6),
    ) {
        let mut rng = CounterRng::new(6);
        let k = locs.len();
        let w = sparse_moments::mixtures::random_weights(k, 0.0, &mut rng);
        let m = SpikeMixture::new(Domain::UnitInterval, locs.iter().map(|&x| vec![x]).collect(), w).unwrap();
        let mv = moments_1d(&m, 2 * k - 1).unwrap();
        let h = sparse_moments::moments::build_hankel(&mv, k).unwrap();
        let mut poly = vec![1.0];
        for &a in &locs {
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
            prop_assert!(r.abs() <= 1e-10, "row {} residual {}", i, r);
        }
        prop_assert_eq!(h.hankel_symmetry_error(), 0.0);
    }

    #[test]
    fn recovered_moments_close_for_exact_input(
        locs in prop::collection::vec(0.05f64..0.95, 2..4),
    ) {
        // Moment-consistency on exact inputs: the recovered mixture
        // reproduces the input moments at the sqrt(xi) scale.
        let mut rng = CounterRng::new(8);
        let k = locs.len();
        let w = sparse_moments::mixtures::random_weights(k, 0.1, &mut rng);
        let truth = SpikeMixture::new(Domain::UnitInterval, locs.iter().map(|&x| vec![x]).collect(), w).unwrap();
        let m = moments_1d(&truth, 2 * k - 1).unwrap();
        let xi = 1e-10;
        let cfg = sparse_moments::prony1d::RecoveryConfig1D::new(k, xi, 3);
        let rep = sparse_moments::prony1d::recover_1d(&m, &cfg).unwrap();
        let back = moments_1d(&rep.mixture, 2 * k - 1).unwrap();
        let mdis = moment_distance_1d(&back, &m, 2 * k - 1).unwrap();
        prop_assert!(mdis <= 1e-3 * xi.sqrt().max(1e-12) + 1e-9, "moment distance {}", mdis);
    }
}
