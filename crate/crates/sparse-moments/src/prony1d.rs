//! Recovery of a k-spike mixture on `[0,1]` from noisy moments
//! `M'_0..M'_{2k-1}`.
//!
//! The pipeline is a robust variant of Prony's method: a ridge regression
//! stands in for the null vector of the Hankel system, the monic polynomial's
//! roots are projected back to the domain and jittered apart, weights come
//! from a Vandermonde least squares, and remaining negative weights are
//! repaired by an optimal transport step. No separation or minimum-weight
//! assumption is needed; accuracy degrades gracefully as `O(k xi^(1/(4k-2)))`
//! in transport distance.

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;
use crate::mixtures::{Domain, SpikeMixture};
use crate::moments::{build_hankel, build_vandermonde, MomentVector1D};
use crate::rng::CounterRng;

/// Internal jitter floor used when the caller passes `xi = 0`: the ridge
/// stays unregularized but root separation still needs a positive scale.
pub const ZERO_XI_JITTER: f64 = 1e-14;

/// Configuration for [`recover_1d`].
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryConfig1D {
    /// Number of spikes to recover.
    pub k: usize,
    /// Moment noise bound; also the ridge weight and default jitter scale.
    pub xi: f64,
    /// Root jitter magnitude, in `(0, xi]`. Defaults to `xi`.
    pub jitter_scale: Option<f64>,
    /// Seed for the jitter stream.
    pub rng_seed: u64,
    /// Gauss-Newton moment-refinement budget (0 disables).
    pub refine_iterations: usize,
}

impl RecoveryConfig1D {
    pub fn new(k: usize, xi: f64, rng_seed: u64) -> Self {
        RecoveryConfig1D {
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

fn ser_c64_vec<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

fn ser_c64<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Recovered mixture plus the diagnostics of every pipeline stage.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub mixture: SpikeMixture,
    /// Ridge solution: coefficients of the estimated characteristic
    /// polynomial (`x^k + c_{k-1} x^{k-1} + ... + c_0`).
    #[serde(serialize_with = "ser_c64_vec")]
    pub char_coeffs: Vec<Complex64>,
    /// Companion-matrix roots before projection.
    #[serde(serialize_with = "ser_c64_vec")]
    pub raw_roots: Vec<Complex64>,
    /// `||A c + b||_inf` on the input moments.
    pub residual_ridge: f64,
    /// `||V w - M'||_2` of the weight regression.
    pub residual_weights: f64,
    /// Weight sum before the normalization step.
    #[serde(serialize_with = "ser_c64")]
    pub weight_sum_pre_normalization: Complex64,
    /// Non-fatal conditions observed during recovery.
    pub warnings: Vec<String>,
}

impl RecoveryReport {
    /// True iff any numeric field is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        let vecs = self
            .char_coeffs
            .iter()
            .chain(self.raw_roots.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite());
        let scalars = !self.residual_ridge.is_finite()
            || !self.residual_weights.is_finite()
            || !self.weight_sum_pre_normalization.re.is_finite()
            || !self.weight_sum_pre_normalization.im.is_finite();
        let mix = self
            .mixture
            .locations()
            .iter()
            .flatten()
            .chain(self.mixture.weights().iter())
            .any(|x| !x.is_finite());
        vecs || scalars || mix
    }
}

/// Ridge estimate of the characteristic vector:
/// `argmin_x ||A x + b||_2^2 + xi^2 ||x||_2^2` for the Hankel system of the
/// first `2k` moments. Solved through the stacked least-squares form
/// `[A; xi I] x = [-b; 0]`, which computes the exact minimizer
/// `-(A'A + xi^2 I)^{-1} A' b` without squaring the condition number.
pub fn ridge_characteristic(m: &MomentVector1D, k: usize, xi: f64) -> Result<Vec<f64>> {
    if !xi.is_finite() || xi < 0.0 {
        return Err(Error::BadInput("xi must be finite and nonnegative".into()));
    }
    let h = build_hankel(m, k)?;
    if xi == 0.0 {
        if linalg::is_rank_deficient_real(&h.a, k, k) {
            return Err(Error::SingularSystem);
        }
        let rhs: Vec<f64> = h.b.iter().map(|x| -x).collect();
        return Ok(linalg::lstsq_real(&h.a, k, k, &rhs));
    }
    let mut stacked = vec![0.0; 2 * k * k];
    stacked[..k * k].copy_from_slice(&h.a);
    for i in 0..k {
        stacked[(k + i) * k + i] = xi;
    }
    let mut rhs = vec![0.0; 2 * k];
    for i in 0..k {
        rhs[i] = -h.b[i];
    }
    Ok(linalg::lstsq_real(&stacked, 2 * k, k, &rhs))
}

/// `||A c + b||_inf` for the Hankel system of `m`.
pub fn ridge_residual(m: &MomentVector1D, coeffs: &[f64]) -> Result<f64> {
    let k = coeffs.len();
    let h = build_hankel(m, k)?;
    let mut worst = 0.0f64;
    for i in 0..k {
        let mut r = h.b[i];
        for j in 0..k {
            r += h.a[i * k + j] * coeffs[j];
        }
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// All `k` roots of `x^k + c_{k-1} x^{k-1} + ... + c_0`.
pub fn monic_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let lifted: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    linalg::companion_roots(&lifted)
}

/// Projects roots onto `[0,1]` (clamping the real part) and perturbs each by
/// at most `jitter` so the results are pairwise distinct and stay in `[0,1]`.
///
/// With `jitter = 0` the points are only projected; duplicates then raise
/// `DegenerateSupport`.
pub fn project_and_separate(roots: &[Complex64], jitter: f64, rng: &mut CounterRng) -> Result<Vec<f64>> {
    if !jitter.is_finite() || jitter < 0.0 {
        return Err(Error::BadInput("jitter must be finite and nonnegative".into()));
    }
    let projected: Vec<f64> = roots.iter().map(|z| z.re.clamp(0.0, 1.0)).collect();
    if jitter == 0.0 {
        for i in 0..projected.len() {
            for j in 0..i {
                if projected[i] == projected[j] {
                    return Err(Error::DegenerateSupport);
                }
            }
        }
        return Ok(projected);
    }
    let s = jitter.min(1.0);
    let bounds: Vec<(f64, f64)> = projected
        .iter()
        .map(|&x| ((x - s).max(0.0), (x + s).min(1.0)))
        .collect();
    for _ in 0..64 {
        let cand: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect();
        let mut distinct = true;
        'outer: for i in 0..cand.len() {
            for j in 0..i {
                if cand[i] == cand[j] {
                    distinct = false;
                    break 'outer;
                }
            }
        }
        if distinct {
            return Ok(cand);
        }
    }
    // Deterministic fallback: graded offsets along the sorted order. Interval
    // widths are at least s, and the total drift (k-1) * s / k^2 fits inside.
    let k = projected.len();
    let delta = s / (k * k) as f64;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| projected[i].partial_cmp(&projected[j]).unwrap().then(i.cmp(&j)));
    let mut out = vec![0.0; k];
    let mut prev = f64::NEG_INFINITY;
    for &idx in &order {
        let (lo, hi) = bounds[idx];
        let y = (prev + delta).max(lo).min(hi);
        out[idx] = y;
        prev = y;
    }
    Ok(out)
}

/// Vandermonde weight regression against all `2k` moments: returns the raw
/// least-squares weights and their normalization to sum exactly one.
pub fn fit_weights(nodes: &[f64], m: &MomentVector1D) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = nodes.len();
    if k == 0 || m.degree() < 2 * k - 1 {
        return Err(Error::BadInput("need 2k moments for the weight regression".into()));
    }
    let v = build_vandermonde(nodes, 2 * k);
    let rhs: Vec<f64> = (0..2 * k).map(|t| m.get(t)).collect();
    let w = linalg::lstsq_real(&v.v, 2 * k, k, &rhs);
    let sum: f64 = w.iter().sum();
    if sum.abs() < 1e-12 {
        return Err(Error::NormalizationFailure(sum));
    }
    let normalized = w.iter().map(|x| x / sum).collect();
    Ok((w, normalized))
}

fn weight_residual(nodes: &[f64], weights: &[f64], m: &MomentVector1D) -> f64 {
    let k = nodes.len();
    let v = build_vandermonde(nodes, 2 * k);
    let mut ss = 0.0;
    for t in 0..2 * k {
        let mut r = -m.get(t);
        for j in 0..k {
            r += v.v[t * k + j] * weights[j];
        }
        ss += r * r;
    }
    ss.sqrt()
}

/// Full 1-D recovery: ridge characteristic vector, companion roots,
/// projection and jitter, Vandermonde weights, normalization, and the
/// transport-optimal repair of negative weights. Deterministic per seed.
pub fn recover_1d(m: &MomentVector1D, cfg: &RecoveryConfig1D) -> Result<RecoveryReport> {
    cfg.validate()?;
    let k = cfg.k;
    if m.degree() < 2 * k - 1 {
        return Err(Error::BadInput(format!(
            "recovering k={k} spikes needs moments up to degree {}, have {}",
            2 * k - 1,
            m.degree()
        )));
    }
    let mut warnings = Vec::new();
    if cfg.xi > 2.0f64.powi(-(k as i32)) {
        warnings.push(format!(
            "noise bound {} exceeds the 2^-k = {} regime the analysis assumes",
            cfg.xi,
            2.0f64.powi(-(k as i32))
        ));
    }
    let coeffs = ridge_characteristic(m, k, cfg.xi)?;
    let residual_ridge = ridge_residual(m, &coeffs)?;
    let roots = monic_roots(&coeffs)?;
    let mut rng = CounterRng::stream(cfg.rng_seed, 0x1d);
    let nodes = project_and_separate(&roots, cfg.effective_jitter(), &mut rng)?;
    let (raw_w, normalized) = fit_weights(&nodes, m)?;
    let residual_weights = weight_residual(&nodes, &raw_w, m);
    let weight_sum: f64 = raw_w.iter().sum();
    let (nodes, refined_w) = if cfg.refine_iterations > 0 {
        crate::refine::refine_1d(&nodes, &normalized, m, cfg.refine_iterations)
    } else {
        (nodes, normalized)
    };
    let refined_sum: f64 = refined_w.iter().sum();
    if refined_sum.abs() < 1e-12 {
        return Err(Error::NormalizationFailure(refined_sum));
    }
    let normalized: Vec<f64> = refined_w.iter().map(|x| x / refined_sum).collect();
    let mixture = crate::mixtures::repair_weights_raw(
        Domain::UnitInterval,
        nodes.iter().map(|&x| vec![x]).collect(),
        &normalized,
    )?;
    Ok(RecoveryReport {
        mixture,
        char_coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        raw_roots: roots,
        residual_ridge,
        residual_weights,
        weight_sum_pre_normalization: Complex64::new(weight_sum, 0.0),
        warnings,
    })
}
