//! Recovery of a k-spike mixture on the simplex (or unit ball) from a
//! projected-moment oracle.
//!
//! One random direction `r` fixes a 1-D skeleton of the mixture; for each
//! coordinate `t` a planar recovery along `(r, e_t)` supplies that
//! coordinate of every spike, matched to the skeleton through the shared
//! first axis. The oracle is queried exactly `d + 1` times.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixtures::{project_to_domain, Domain, SpikeMixture};
use crate::moments::{MomentGrid2D, MomentVector1D};
use crate::prony1d::{recover_1d, RecoveryConfig1D, RecoveryReport};
use crate::prony2d::{recover_2d, RecoveryConfig2D};
use crate::rng::CounterRng;

/// A projection query: `p in {1, 2}` columns with `||R||_inf <= 1`, plus an
/// affine shift per column (zero for the simplex queries; ball domains use a
/// shift to land the projected support in `[0,1]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionQuery {
    /// Columns of the projection matrix, each of length `d`.
    pub columns: Vec<Vec<f64>>,
    /// Constant added to each projected coordinate.
    pub shifts: Vec<f64>,
    /// Highest total moment degree requested (`2k - 1`).
    pub max_degree: usize,
}

impl ProjectionQuery {
    pub fn validate(&self, d: usize) -> Result<()> {
        let p = self.columns.len();
        if p == 0 || p > 2 || self.shifts.len() != p {
            return Err(Error::InvalidQuery(format!("need 1 or 2 columns with shifts, got {p}")));
        }
        for col in &self.columns {
            if col.len() != d {
                return Err(Error::InvalidQuery(format!("column length {} != d = {d}", col.len())));
            }
            if col.iter().any(|x| !x.is_finite() || x.abs() > 1.0 + 1e-12) {
                return Err(Error::InvalidQuery("projection entries must satisfy |R_ij| <= 1".into()));
            }
        }
        if self.shifts.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidQuery("non-finite shift".into()));
        }
        if self.max_degree == 0 {
            return Err(Error::InvalidQuery("max_degree must be >= 1".into()));
        }
        Ok(())
    }

    /// Max absolute projection entry, `||R||_inf` in the elementwise sense.
    pub fn max_entry(&self) -> f64 {
        self.columns
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    /// Image of a point under the affine projection.
    pub fn project_point(&self, alpha: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .zip(&self.shifts)
            .map(|(col, &s)| col.iter().zip(alpha).map(|(&c, &a)| c * a).sum::<f64>() + s)
            .collect()
    }
}

/// Noisy projected-moment source for a hidden k-spike mixture: each query
/// returns moments within `noise_bound` of the exact projected moments, with
/// the zeroth moment exactly 1. Implementations must be safe for concurrent
/// queries.
pub trait MomentOracle: Sync {
    /// Ambient dimension d of the hidden mixture.
    fn dim(&self) -> usize;
    /// Guaranteed bound on the moment error of every reply.
    fn noise_bound(&self) -> f64;
    /// Moments of the 1-column projection, degrees `0..=max_degree`.
    fn moments_1d(&self, query: &ProjectionQuery) -> Result<MomentVector1D>;
    /// Mixed moments of the 2-column projection, total degree `<= max_degree`.
    fn moments_2d(&self, query: &ProjectionQuery) -> Result<MomentGrid2D>;
}

/// How planar spikes are associated with skeleton spikes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchingMode {
    /// Per plane, one optimal bijection between skeleton slots and planar
    /// spikes under the cost `|y_j - y_s| + |w_j - w_s|`. The weight term
    /// keeps the association consistent across planes when two spikes
    /// collapse along the random direction, which nearest-point matching
    /// cannot do. Default.
    Assignment,
    /// Independent nearest heavy spike per (slot, coordinate); the literal
    /// textbook rule. Kept for comparison runs.
    NearestPerCoordinate,
}

fn assign_slots(skeleton: &[f64], slot_weights: &[f64], spikes: &[(f64, f64, f64)]) -> Vec<usize> {
    let k = skeleton.len();
    let cost = |j: usize, s: usize| (skeleton[j] - spikes[s].0).abs() + (slot_weights[j] - spikes[s].2).abs();
    if k > 8 {
        // Greedy fallback: heaviest slots pick first.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| slot_weights[b].partial_cmp(&slot_weights[a]).unwrap().then(a.cmp(&b)));
        let mut taken = vec![false; k];
        let mut out = vec![0; k];
        for &j in &order {
            let s = (0..k)
                .filter(|&s| !taken[s])
                .min_by(|&a, &b| (cost(j, a), a).partial_cmp(&(cost(j, b), b)).unwrap())
                .expect("spike available");
            taken[s] = true;
            out[j] = s;
        }
        return out;
    }
    // Exact assignment by permutation enumeration (k <= 8).
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_perm = perm.clone();
    let mut best_cost = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let c: f64 = (0..k).map(|j| cost(j, p[j])).sum();
        if c < best_cost {
            best_cost = c;
            best_perm = p.to_vec();
        }
    });
    best_perm
}

fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Target domain of the high-dimensional recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryDomain {
    /// Probability simplex; queries are pure linear maps `(r + 1)/4`, `e_t/2`.
    Simplex,
    /// Euclidean unit ball; queries carry a `1/4` shift instead, since the
    /// coordinate sum is no longer fixed.
    Ball,
}

/// Configuration for [`recover_highdim`].
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryConfigHD {
    pub k: usize,
    pub d: usize,
    pub xi: f64,
    /// Overrides the spike-weight threshold used when matching planar spikes
    /// to the 1-D skeleton.
    pub weight_threshold_override: Option<f64>,
    /// Failure probability budget for the random direction.
    pub eta: f64,
    pub rng_seed: u64,
    pub domain: RecoveryDomain,
    pub matching: MatchingMode,
    /// Joint Gauss-Newton budget over all d+1 moment sets (0 disables).
    pub refine_iterations: usize,
}

impl RecoveryConfigHD {
    pub fn new(k: usize, d: usize, xi: f64, rng_seed: u64) -> Self {
        RecoveryConfigHD {
            k,
            d,
            xi,
            weight_threshold_override: None,
            eta: 0.01,
            rng_seed,
            domain: RecoveryDomain::Simplex,
            matching: MatchingMode::Assignment,
            refine_iterations: crate::refine::DEFAULT_REFINE_ITERATIONS,
        }
    }

    pub fn with_domain(mut self, domain: RecoveryDomain) -> Self {
        self.domain = domain;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 {
            return Err(Error::BadInput("k and d must be >= 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::BadInput("eta must lie in (0, 1)".into()));
        }
        if !self.xi.is_finite() || self.xi < 0.0 {
            return Err(Error::BadInput("xi must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Uniform random unit vector (L2) in R^d.
pub fn random_unit_direction(d: usize, rng: &mut CounterRng) -> Vec<f64> {
    assert!(d >= 1);
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.iter().map(|x| x / norm).collect();
        }
    }
}

/// Weight threshold for matching planar spikes: `sqrt(eps)/k` where `eps` is
/// the a-priori 1-D/2-D error scale `min(1/2, C * k * xi^(1/(4k-2)))` with
/// the calibrated constant, or the explicit override.
pub fn weight_threshold(cfg: &RecoveryConfigHD) -> f64 {
    if let Some(t) = cfg.weight_threshold_override {
        return t;
    }
    if cfg.xi == 0.0 {
        return 0.0;
    }
    let rate = crate::calibration::ERROR_RATE_1D * cfg.k as f64
        * cfg.xi.powf(1.0 / (4.0 * cfg.k as f64 - 2.0));
    let eps = rate.min(0.5);
    eps.sqrt() / cfg.k as f64
}

/// One oracle query as recorded in the report.
#[derive(Debug, Clone, Serialize)]
pub struct QueryRecord {
    pub query: ProjectionQuery,
    pub kind: &'static str,
}

/// Result of the high-dimensional recovery with per-stage diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct HighDimReport {
    pub mixture: SpikeMixture,
    /// Random direction used for the skeleton.
    pub direction: Vec<f64>,
    /// Report of the 1-D skeleton recovery.
    pub base: RecoveryReport,
    /// Reports of the d planar recoveries, by coordinate.
    pub coordinate_reports: Vec<RecoveryReport>,
    /// Weight threshold used for spike matching.
    pub threshold: f64,
    /// `(spike, coordinate)` pairs where no planar spike passed the threshold
    /// and the globally nearest spike was used instead.
    pub fallbacks: Vec<(usize, usize)>,
    /// Every oracle query issued, in order.
    pub query_log: Vec<QueryRecord>,
}

fn unit_column(d: usize, t: usize, scale: f64) -> Vec<f64> {
    let mut col = vec![0.0; d];
    col[t] = scale;
    col
}

/// Algorithm: recover the projection of the mixture along a random direction
/// with the 1-D solver, recover each `(r, e_t)` plane with the 2-D solver,
/// associate planar spikes with skeleton spikes (see [`MatchingMode`]), then
/// refit the weights and jointly polish the configuration against all
/// queried moment sets. Exactly `d + 1` oracle queries.
pub fn recover_highdim<O: MomentOracle + ?Sized>(oracle: &O, cfg: &RecoveryConfigHD) -> Result<HighDimReport> {
    cfg.validate()?;
    let d = cfg.d;
    let k = cfg.k;
    if oracle.dim() != d {
        return Err(Error::BadInput(format!("oracle dimension {} != configured d {d}", oracle.dim())));
    }
    let degree = 2 * k - 1;
    let mut rng = CounterRng::stream(cfg.rng_seed, 0xd1);
    let r = random_unit_direction(d, &mut rng);

    // 1-D skeleton along r, supported in [0, 1/2] after the affine map
    // y = (r'a + 1)/4.
    let base_query = match cfg.domain {
        RecoveryDomain::Simplex => ProjectionQuery {
            columns: vec![r.iter().map(|x| (x + 1.0) / 4.0).collect()],
            shifts: vec![0.0],
            max_degree: degree,
        },
        RecoveryDomain::Ball => ProjectionQuery {
            columns: vec![r.iter().map(|x| x / 4.0).collect()],
            shifts: vec![0.25],
            max_degree: degree,
        },
    };
    base_query.validate(d)?;
    let mut query_log = vec![QueryRecord { query: base_query.clone(), kind: "1d" }];
    let base_moments = oracle.moments_1d(&base_query)?;
    let cfg1 = RecoveryConfig1D::new(k, cfg.xi, cfg.rng_seed ^ 0x5eed_1d);
    let base = recover_1d(&base_moments, &cfg1)?;
    let skeleton: Vec<f64> = base
        .mixture
        .scalar_locations()
        .iter()
        .map(|&y| 4.0 * y - 1.0)
        .collect();
    let weights = base.mixture.weights().to_vec();

    // Planar queries, one per coordinate; axis scaling keeps the image in the
    // unit triangle.
    let coord_queries: Vec<ProjectionQuery> = (0..d)
        .map(|t| match cfg.domain {
            RecoveryDomain::Simplex => ProjectionQuery {
                columns: vec![base_query.columns[0].clone(), unit_column(d, t, 0.5)],
                shifts: vec![0.0, 0.0],
                max_degree: degree,
            },
            RecoveryDomain::Ball => ProjectionQuery {
                columns: vec![base_query.columns[0].clone(), unit_column(d, t, 0.25)],
                shifts: vec![0.25, 0.25],
                max_degree: degree,
            },
        })
        .collect();
    for q in &coord_queries {
        q.validate(d)?;
        query_log.push(QueryRecord { query: q.clone(), kind: "2d" });
    }

    // The planar recoveries are independent; fan out across threads.
    let (coord_results, coord_grids) = run_coordinate_recoveries(oracle, cfg, &coord_queries)?;

    let threshold = weight_threshold(cfg);
    // Planar spikes per coordinate, un-mapped: first axis back to
    // r-coordinates, second axis back to the native coordinate scale.
    let planar_spikes: Vec<Vec<(f64, f64, f64)>> = coord_results
        .iter()
        .map(|rep| {
            rep.mixture
                .locations()
                .iter()
                .zip(rep.mixture.weights())
                .map(|(p, &w)| {
                    let y = 4.0 * p[0] - 1.0;
                    let a = match cfg.domain {
                        RecoveryDomain::Simplex => 2.0 * p[1],
                        RecoveryDomain::Ball => 4.0 * p[1] - 1.0,
                    };
                    (y, a, w)
                })
                .collect()
        })
        .collect();
    let assemble = |mode: MatchingMode, fallbacks: &mut Vec<(usize, usize)>| -> Vec<Vec<f64>> {
        let mut assembled: Vec<Vec<f64>> = vec![vec![0.0; d]; skeleton.len()];
        for (t, spikes) in planar_spikes.iter().enumerate() {
            let choice = match mode {
                MatchingMode::Assignment => assign_slots(&skeleton, &weights, spikes),
                MatchingMode::NearestPerCoordinate => skeleton
                    .iter()
                    .map(|&yj| {
                        let heavy = spikes
                            .iter()
                            .enumerate()
                            .filter(|(_, s)| s.2 >= threshold)
                            .min_by(|(i1, s1), (i2, s2)| {
                                ((s1.0 - yj).abs(), *i1).partial_cmp(&((s2.0 - yj).abs(), *i2)).unwrap()
                            });
                        match heavy {
                            Some((s_idx, _)) => s_idx,
                            None => {
                                spikes
                                    .iter()
                                    .enumerate()
                                    .min_by(|(i1, s1), (i2, s2)| {
                                        ((s1.0 - yj).abs(), *i1)
                                            .partial_cmp(&((s2.0 - yj).abs(), *i2))
                                            .unwrap()
                                    })
                                    .expect("planar recovery returns k >= 1 spikes")
                                    .0
                            }
                        }
                    })
                    .collect(),
            };
            for (j, &s_idx) in choice.iter().enumerate() {
                if spikes[s_idx].2 < threshold {
                    fallbacks.push((j, t));
                }
                assembled[j][t] = spikes[s_idx].1;
            }
        }
        assembled
    };
    let target = match cfg.domain {
        RecoveryDomain::Simplex => Domain::Simplex { dim: d },
        RecoveryDomain::Ball => Domain::UnitBall { dim: d },
    };

    // For one assembled support: refit the weights against every queried
    // moment set (the skeleton cannot apportion weight between spikes that
    // collapse along r, but the planar grids separate them through their
    // coordinates), then jointly refine positions and weights across all
    // d+1 moment sets. Returns the stacked residual for model selection.
    let noise_floor = coord_grids
        .iter()
        .map(|g| g.noise_bound())
        .fold(cfg.xi.min(base_moments.noise_bound()), f64::min);
    let polish = |assembled: Vec<Vec<f64>>, skeleton_w: &[f64]| -> (Vec<Vec<f64>>, Vec<f64>, f64) {
        let w0 = match refit_weights(&assembled, &base_query, &base_moments, &coord_queries, &coord_grids) {
            Some(w) => w,
            None => skeleton_w.to_vec(),
        };
        crate::refine::refine_joint_escaping(
            &assembled,
            &w0,
            &base_query,
            &base_moments,
            &coord_queries,
            &coord_grids,
            cfg.refine_iterations,
            noise_floor,
        )
    };

    let mut fallbacks = Vec::new();
    let primary = assemble(cfg.matching, &mut fallbacks);
    let (mut assembled, mut weights_out, residual) = polish(primary, &weights);
    // Model selection on the moment residual: a fit far above the oracle
    // noise scale means the association was wrong, so try the alternative
    // matching rule and keep the better explanation.
    let noise_scale = noise_floor.max(1e-13) * ((2 * k) as f64 + (d * 2 * k * k) as f64).sqrt();
    if residual > 32.0 * noise_scale && cfg.matching == MatchingMode::Assignment {
        let mut alt_fallbacks = Vec::new();
        let alt = assemble(MatchingMode::NearestPerCoordinate, &mut alt_fallbacks);
        let (alt_loc, alt_w, alt_residual) = polish(alt, &weights);
        if alt_residual < residual {
            assembled = alt_loc;
            weights_out = alt_w;
            fallbacks = alt_fallbacks;
        }
    }
    let weights = weights_out;
    let weight_sum: f64 = weights.iter().sum();
    if !weight_sum.is_finite() || weight_sum.abs() < 1e-12 {
        return Err(Error::NormalizationFailure(weight_sum));
    }
    let weights: Vec<f64> = weights.iter().map(|x| x / weight_sum).collect();
    let locations: Vec<Vec<f64>> = assembled.iter().map(|p| project_to_domain(p, &target)).collect();
    let mixture = crate::mixtures::repair_weights_raw(target, locations, &weights)?;
    Ok(HighDimReport {
        mixture,
        direction: r,
        base,
        coordinate_reports: coord_results,
        threshold,
        fallbacks,
        query_log,
    })
}

/// Stacked least squares for the spike weights, given the assembled support:
/// every projected moment equation from the d+1 oracle replies becomes one
/// row. Returns `None` when the system degenerates (near-zero weight sum).
fn refit_weights(
    locations: &[Vec<f64>],
    base_query: &ProjectionQuery,
    base_moments: &MomentVector1D,
    coord_queries: &[ProjectionQuery],
    coord_grids: &[MomentGrid2D],
) -> Option<Vec<f64>> {
    let k = locations.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let base_pts: Vec<f64> = locations.iter().map(|a| base_query.project_point(a)[0]).collect();
    for t in 0..=base_moments.degree() {
        rows.push(base_pts.iter().map(|&y| y.powi(t as i32)).collect());
        rhs.push(base_moments.get(t));
    }
    for (q, grid) in coord_queries.iter().zip(coord_grids) {
        let pts: Vec<(f64, f64)> = locations
            .iter()
            .map(|a| {
                let p = q.project_point(a);
                (p[0], p[1])
            })
            .collect();
        for (i, j) in grid.indices() {
            rows.push(pts.iter().map(|&(u, v)| u.powi(i as i32) * v.powi(j as i32)).collect());
            rhs.push(grid.get(i, j));
        }
    }
    let n = rows.len();
    // Tiny Tikhonov block: evens out the split across duplicated support
    // points instead of producing huge cancelling weights there; far below
    // the residual scale everywhere else.
    let lambda = 1e-7;
    let mut flat = Vec::with_capacity((n + k) * k);
    for row in &rows {
        flat.extend_from_slice(row);
    }
    for i in 0..k {
        let mut reg = vec![0.0; k];
        reg[i] = lambda;
        flat.extend_from_slice(&reg);
        rhs.push(0.0);
    }
    let w = crate::linalg::lstsq_real(&flat, n + k, k, &rhs);
    let sum: f64 = w.iter().sum();
    let mass: f64 = w.iter().map(|x| x.abs()).sum();
    if !sum.is_finite() || sum.abs() < 1e-6 || mass > 16.0 {
        return None;
    }
    let mut out: Vec<f64> = w.iter().map(|x| x / sum).collect();
    // Second pass removes the remaining rounding dust in the sum.
    let sum2: f64 = out.iter().sum();
    for x in &mut out {
        *x /= sum2;
    }
    Some(out)
}

type CoordinateOutputs = (Vec<RecoveryReport>, Vec<MomentGrid2D>);

fn run_coordinate_recoveries<O: MomentOracle + ?Sized>(
    oracle: &O,
    cfg: &RecoveryConfigHD,
    queries: &[ProjectionQuery],
) -> Result<CoordinateOutputs> {
    let d = queries.len();
    let run_one = |t: usize| -> Result<(RecoveryReport, MomentGrid2D)> {
        let grid = oracle.moments_2d(&queries[t])?;
        let cfg2 = RecoveryConfig2D::new(cfg.k, cfg.xi, cfg.rng_seed ^ 0x5eed_2d ^ ((t as u64) << 32));
        let rep = recover_2d(&grid, &cfg2)?;
        Ok((rep, grid))
    };
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(d).max(1);
    let collected: Vec<Result<(RecoveryReport, MomentGrid2D)>> = if threads == 1 || d == 1 {
        (0..d).map(run_one).collect()
    } else {
        let mut slots: Vec<Option<Result<(RecoveryReport, MomentGrid2D)>>> = (0..d).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunk = d.div_ceil(threads);
            for (c, slice) in slots.chunks_mut(chunk).enumerate() {
                let run_one = &run_one;
                scope.spawn(move || {
                    for (off, slot) in slice.iter_mut().enumerate() {
                        *slot = Some(run_one(c * chunk + off));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every coordinate slot is filled")).collect()
    };
    let mut reports = Vec::with_capacity(d);
    let mut grids = Vec::with_capacity(d);
    for item in collected {
        let (rep, grid) = item?;
        reports.push(rep);
        grids.push(grid);
    }
    Ok((reports, grids))
}
