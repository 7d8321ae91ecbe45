//! Recovery of a k-spike mixture on the unit triangle from noisy 2-D mixed
//! moments, via the complex correspondence `beta = x + iy`.
//!
//! The moment grid is first mapped to conjugate moments
//! `G_{i,j} = sum_t w_t conj(beta_t)^i beta_t^j`; the rest mirrors the 1-D
//! pipeline over complex numbers: complex ridge regression, companion roots,
//! projection onto the triangle (as a convex subset of C), jitter, a complex
//! Vandermonde regression for weights, normalization, dropping imaginary
//! weight parts, and the transport repair of negative weights.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mixtures::{project_triangle, Domain};
use crate::moments::{build_hankel_complex, build_vandermonde_complex, complex_transform_at, ConjugateMomentGrid, MomentGrid2D};
use crate::prony1d::{RecoveryReport, ZERO_XI_JITTER};
use crate::rng::CounterRng;

/// Configuration for [`recover_2d`]; same shape as the 1-D config.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryConfig2D {
    pub k: usize,
    pub xi: f64,
    pub jitter_scale: Option<f64>,
    pub rng_seed: u64,
    /// Gauss-Newton moment-refinement budget (0 disables).
    pub refine_iterations: usize,
}

impl RecoveryConfig2D {
    pub fn new(k: usize, xi: f64, rng_seed: u64) -> Self {
        RecoveryConfig2D {
            k,
            xi,
            jitter_scale: None,
            rng_seed,
            refine_iterations: crate::refine::DEFAULT_REFINE_ITERATIONS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::BadInput("k must be >= 1".into()));
        }
        if !self.xi.is_finite() || self.xi < 0.0 {
            return Err(Error::BadInput("xi must be finite and nonnegative".into()));
        }
        if let Some(s) = self.jitter_scale {
            if !(s > 0.0 && s <= self.xi.max(ZERO_XI_JITTER)) {
                return Err(Error::BadInput("jitter_scale must lie in (0, xi]".into()));
            }
        }
        Ok(())
    }

    fn effective_jitter(&self) -> f64 {
        match self.jitter_scale {
            Some(s) => s,
            None if self.xi > 0.0 => self.xi,
            None => ZERO_XI_JITTER,
        }
    }
}

/// Complex ridge estimate: `argmin_{x in C^k} ||A x + b||_2^2 + xi^2 ||x||_2^2`
/// for the conjugate-moment system, via the stacked form `[A; xi I]`.
pub fn ridge_characteristic_complex(g: &ConjugateMomentGrid, xi: f64) -> Result<Vec<Complex64>> {
    if !xi.is_finite() || xi < 0.0 {
        return Err(Error::BadInput("xi must be finite and nonnegative".into()));
    }
    let h = build_hankel_complex(g);
    let k = h.k;
    if xi == 0.0 {
        if linalg::is_rank_deficient_complex(&h.a, k, k) {
            return Err(Error::SingularSystem);
        }
        let rhs: Vec<Complex64> = h.b.iter().map(|x| -x).collect();
        return Ok(linalg::lstsq_complex(&h.a, k, k, &rhs));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut stacked = vec![zero; 2 * k * k];
    stacked[..k * k].copy_from_slice(&h.a);
    for i in 0..k {
        stacked[(k + i) * k + i] = Complex64::new(xi, 0.0);
    }
    let mut rhs = vec![zero; 2 * k];
    for i in 0..k {
        rhs[i] = -h.b[i];
    }
    Ok(linalg::lstsq_complex(&stacked, 2 * k, k, &rhs))
}

fn ridge_residual_complex(g: &ConjugateMomentGrid, coeffs: &[Complex64]) -> f64 {
    let h = build_hankel_complex(g);
    let k = h.k;
    let mut worst = 0.0f64;
    for i in 0..k {
        let mut r = h.b[i];
        for j in 0..k {
            r += h.a[i * k + j] * coeffs[j];
        }
        worst = worst.max(r.norm());
    }
    worst
}

/// Euclidean projection of a complex point onto the triangle
/// `{a + bi : a >= 0, b >= 0, a + b <= 1}`.
pub fn project_triangle_complex(z: Complex64) -> Complex64 {
    let [a, b] = project_triangle(z.re, z.im);
    Complex64::new(a, b)
}

fn in_triangle(z: Complex64) -> bool {
    z.re >= 0.0 && z.im >= 0.0 && z.re + z.im <= 1.0
}

/// Jitters projected points by at most `jitter` (complex modulus), keeping
/// them inside the triangle and pairwise distinct.
fn separate_in_triangle(points: &[Complex64], jitter: f64, rng: &mut CounterRng) -> Result<Vec<Complex64>> {
    if jitter == 0.0 {
        for i in 0..points.len() {
            for j in 0..i {
                if points[i] == points[j] {
                    return Err(Error::DegenerateSupport);
                }
            }
        }
        return Ok(points.to_vec());
    }
    let s = jitter.min(0.1);
    let half = s / std::f64::consts::SQRT_2;
    for _ in 0..64 {
        let mut cand = Vec::with_capacity(points.len());
        let mut ok = true;
        for &p in points {
            // Per-point rejection sampling inside triangle & disk.
            let mut accepted = None;
            for _ in 0..32 {
                let q = p + Complex64::new(rng.uniform_in(-half, half), rng.uniform_in(-half, half));
                if in_triangle(q) {
                    accepted = Some(q);
                    break;
                }
            }
            match accepted {
                Some(q) => cand.push(q),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let mut distinct = true;
        'pairs: for i in 0..cand.len() {
            for j in 0..i {
                if cand[i] == cand[j] {
                    distinct = false;
                    break 'pairs;
                }
            }
        }
        if distinct {
            return Ok(cand);
        }
    }
    // Deterministic fallback: graded moves toward the centroid (interior by
    // convexity), distinct magnitudes per sorted position.
    let centroid = Complex64::new(1.0 / 3.0, 1.0 / 3.0);
    let k = points.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        (points[i].re, points[i].im, i)
            .partial_cmp(&(points[j].re, points[j].im, j))
            .unwrap()
    });
    let mut out = vec![Complex64::new(0.0, 0.0); k];
    for (rank, &idx) in order.iter().enumerate() {
        let p = points[idx];
        let to_c = centroid - p;
        let dist = to_c.norm();
        let mag = s * (rank + 1) as f64 / (k * k) as f64;
        let q = if dist > 1e-9 {
            p + to_c / dist * mag.min(dist)
        } else {
            p + Complex64::new(mag / 2.0, mag / 2.0)
        };
        out[idx] = q;
    }
    for i in 0..k {
        for j in 0..i {
            if out[i] == out[j] {
                return Err(Error::DegenerateSupport);
            }
        }
    }
    Ok(out)
}

/// Full 2-D recovery from a mixed-moment grid complete for total degree
/// `2k - 1`. Deterministic per seed; returns a mixture on the unit triangle.
pub fn recover_2d(m: &MomentGrid2D, cfg: &RecoveryConfig2D) -> Result<RecoveryReport> {
    cfg.validate()?;
    let k = cfg.k;
    if m.max_degree() < 2 * k - 1 {
        return Err(Error::MissingMoment(0, m.max_degree() + 1));
    }
    let mut warnings = Vec::new();
    if cfg.xi > 2.0f64.powi(-(k as i32)) {
        warnings.push(format!(
            "noise bound {} exceeds the 2^-k = {} regime the analysis assumes",
            cfg.xi,
            2.0f64.powi(-(k as i32))
        ));
    }
    let g = complex_transform_at(m, k)?;
    let coeffs = ridge_characteristic_complex(&g, cfg.xi)?;
    let residual_ridge = ridge_residual_complex(&g, &coeffs);
    let roots = linalg::companion_roots(&coeffs)?;
    let projected: Vec<Complex64> = roots.iter().map(|&z| project_triangle_complex(z)).collect();
    let mut rng = CounterRng::stream(cfg.rng_seed, 0x2d);
    let nodes = separate_in_triangle(&projected, cfg.effective_jitter(), &mut rng)?;
    // Weight regression against the pure moments M_G = (G_{0,0..k-1}).
    let v = build_vandermonde_complex(&nodes, k);
    let rhs: Vec<Complex64> = (0..k).map(|j| g.get(0, j)).collect();
    let w = linalg::lstsq_complex(&v.v, k, k, &rhs);
    let sum: Complex64 = w.iter().sum();
    if sum.norm() < 1e-12 {
        return Err(Error::NormalizationFailure(sum.norm()));
    }
    let mut residual_weights = 0.0;
    for t in 0..k {
        let mut r = -rhs[t];
        for j in 0..k {
            r += v.v[t * k + j] * w[j];
        }
        residual_weights += r.norm_sqr();
    }
    let residual_weights = residual_weights.sqrt();
    let normalized: Vec<Complex64> = w.iter().map(|&x| x / sum).collect();
    // Imaginary weight parts are discarded only after normalization.
    let real_weights: Vec<f64> = normalized.iter().map(|z| z.re).collect();
    let planar: Vec<(f64, f64)> = nodes.iter().map(|z| (z.re, z.im)).collect();
    let (planar, real_weights) = if cfg.refine_iterations > 0 {
        // The escape trigger compares the fit against the tighter of the
        // configured bound and the grid's own recorded noise level.
        let floor = cfg.xi.min(m.noise_bound());
        crate::refine::refine_2d_escaping(&planar, &real_weights, m, cfg.refine_iterations, floor)
    } else {
        (planar, real_weights)
    };
    let refined_sum: f64 = real_weights.iter().sum();
    if refined_sum.abs() < 1e-12 {
        return Err(Error::NormalizationFailure(refined_sum));
    }
    let real_weights: Vec<f64> = real_weights.iter().map(|x| x / refined_sum).collect();
    let locations: Vec<Vec<f64>> = planar.iter().map(|&(x, y)| vec![x, y]).collect();
    let mixture = crate::mixtures::repair_weights_raw(Domain::UnitTriangle, locations, &real_weights)?;
    Ok(RecoveryReport {
        mixture,
        char_coeffs: coeffs,
        raw_roots: roots,
        residual_ridge,
        residual_weights,
        weight_sum_pre_normalization: sum,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{transport_general, GroundMetric, SpikeMixture};
    use crate::moments::{conjugate_moments_direct, moments_2d};

    fn triangle(locs: &[[f64; 2]], ws: &[f64]) -> SpikeMixture {
        SpikeMixture::new(
            Domain::UnitTriangle,
            locs.iter().map(|p| p.to_vec()).collect(),
            ws.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn complex_ridge_known_coefficients() {
        // Spikes beta = {1/4, (3/4)i} as triangle points (1/4,0), (0,3/4):
        // (x - 1/4)(x - 3/4 i) = x^2 - (1/4 + 3/4 i) x + (3/16) i.
        let m = triangle(&[[0.25, 0.0], [0.0, 0.75]], &[0.5, 0.5]);
        let g = conjugate_moments_direct(&m, 2).unwrap();
        let c = ridge_characteristic_complex(&g, 0.0).unwrap();
        assert!((c[0] - Complex64::new(0.0, 3.0 / 16.0)).norm() < 1e-12, "{c:?}");
        assert!((c[1] - Complex64::new(-0.25, -0.75)).norm() < 1e-12, "{c:?}");
        // Exact conjugate moments give a tiny residual.
        assert!(ridge_residual_complex(&g, &c) < 1e-10);
    }

    #[test]
    fn complex_ridge_single_spike() {
        let m = triangle(&[[0.3, 0.45]], &[1.0]);
        let g = conjugate_moments_direct(&m, 1).unwrap();
        let c = ridge_characteristic_complex(&g, 0.0).unwrap();
        assert!((c[0] - Complex64::new(-0.3, -0.45)).norm() < 1e-12);
    }

    #[test]
    fn complex_ridge_large_xi_limit() {
        let m = triangle(&[[0.25, 0.0], [0.0, 0.75]], &[0.5, 0.5]);
        let g = conjugate_moments_direct(&m, 2).unwrap();
        let c = ridge_characteristic_complex(&g, 1e9).unwrap();
        assert!(c.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn triangle_projection_examples() {
        let z = project_triangle_complex(Complex64::new(0.2, 0.3));
        assert_eq!(z, Complex64::new(0.2, 0.3));
        let z = project_triangle_complex(Complex64::new(-0.1, 0.5));
        assert!((z - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let z = project_triangle_complex(Complex64::new(1.0, 1.0));
        assert!((z - Complex64::new(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn recover_single_spike_exact() {
        let truth = triangle(&[[0.5, 0.25]], &[1.0]);
        let m = moments_2d(&truth, 1).unwrap();
        let rep = recover_2d(&m, &RecoveryConfig2D::new(1, 1e-12, 5)).unwrap();
        let loc = &rep.mixture.locations()[0];
        assert!((loc[0] - 0.5).abs() < 1e-8 && (loc[1] - 0.25).abs() < 1e-8, "{loc:?}");
    }

    #[test]
    fn recover_two_spikes_exact() {
        let truth = triangle(&[[0.25, 0.0], [0.0, 0.75]], &[0.5, 0.5]);
        let m = moments_2d(&truth, 3).unwrap();
        let rep = recover_2d(&m, &RecoveryConfig2D::new(2, 1e-12, 3)).unwrap();
        let (t, _) = transport_general(&rep.mixture, &truth, GroundMetric::L1).unwrap();
        assert!(t <= 1e-5, "transport {t}");
        assert!(!rep.has_non_finite());
    }

    #[test]
    fn recover_coincident_spikes() {
        let third = 1.0 / 3.0;
        let truth = triangle(&[[third, third], [third, third]], &[0.5, 0.5]);
        let m = moments_2d(&truth, 3).unwrap();
        let xi = 1e-6;
        let rep = recover_2d(&m, &RecoveryConfig2D::new(2, xi, 9)).unwrap();
        let delta = triangle(&[[third, third]], &[1.0]);
        let (t, _) = transport_general(&rep.mixture, &delta, GroundMetric::L1).unwrap();
        assert!(t <= 4.0 * xi, "transport {t}");
        assert_eq!(rep.mixture.k(), 2);
    }

    #[test]
    fn axis_swap_equivariance() {
        // Recovering from the transposed grid must give the coordinate-
        // swapped mixture (conjugation symmetry of G), up to jitter dust.
        let truth = triangle(&[[0.6, 0.1], [0.1, 0.7]], &[0.4, 0.6]);
        let m = moments_2d(&truth, 3).unwrap();
        let swapped = MomentGrid2D::from_fn(3, 0.0, |i, j| m.get(j, i)).unwrap();
        let cfg = RecoveryConfig2D::new(2, 0.0, 17);
        let rep = recover_2d(&m, &cfg).unwrap();
        let rep_swapped = recover_2d(&swapped, &cfg).unwrap();
        let unswapped = SpikeMixture::new(
            Domain::UnitTriangle,
            rep_swapped
                .mixture
                .locations()
                .iter()
                .map(|p| vec![p[1], p[0]])
                .collect(),
            rep_swapped.mixture.weights().to_vec(),
        )
        .unwrap();
        let (t, _) = transport_general(&rep.mixture, &unswapped, GroundMetric::L1).unwrap();
        assert!(t <= 1e-9, "transport between swapped recoveries {t}");
    }

    #[test]
    fn recover_deterministic() {
        let truth = triangle(&[[0.2, 0.2], [0.5, 0.3]], &[0.5, 0.5]);
        let m = moments_2d(&truth, 3).unwrap();
        let cfg = RecoveryConfig2D::new(2, 1e-10, 23);
        let a = serde_json::to_string(&recover_2d(&m, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&recover_2d(&m, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recover_rejects_incomplete_grid() {
        let truth = triangle(&[[0.2, 0.2]], &[1.0]);
        let m = moments_2d(&truth, 1).unwrap();
        assert!(matches!(
            recover_2d(&m, &RecoveryConfig2D::new(2, 1e-9, 0)),
            Err(Error::MissingMoment(_, _))
        ));
    }
}
