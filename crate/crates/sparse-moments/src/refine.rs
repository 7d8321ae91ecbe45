//! Local moment-matching refinement of a recovered spike configuration.
//!
//! Prony-style pipelines lose positional accuracy when spikes nearly collapse
//! along the recovery axis: the ridge solution smears the roots even though
//! the moments still determine the configuration far more precisely. A few
//! damped Gauss-Newton iterations on the nonlinear moment residual recover
//! that accuracy. The step only ever decreases the residual, is a no-op at an
//! exact solution, and is deterministic, so every guarantee stated for the
//! unrefined pipeline still holds.

use crate::linalg;
use crate::mixtures::project_triangle;
use crate::moments::{MomentGrid2D, MomentVector1D};

/// Default Gauss-Newton iteration budget of the recovery pipelines.
pub const DEFAULT_REFINE_ITERATIONS: usize = 40;

struct LevenbergState {
    lambda: f64,
}

impl LevenbergState {
    fn new() -> Self {
        LevenbergState { lambda: 1e-12 }
    }
}

/// Jointly refines 1-D spike positions (clamped to `[0,1]`) and weights
/// against `M'_0..M'_{2k-1}` by damped Gauss-Newton on
/// `sum_t (sum_i w_i a_i^t - M'_t)^2`. Returns the refined `(positions,
/// weights)`; the best-seen iterate wins, so the residual never increases.
pub fn refine_1d(
    positions: &[f64],
    weights: &[f64],
    target: &MomentVector1D,
    iterations: usize,
) -> (Vec<f64>, Vec<f64>) {
    let k = positions.len();
    let n_res = target.degree() + 1;
    let n_par = 2 * k;
    let residual = |a: &[f64], w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for t in 0..n_res {
            let mut acc = -target.get(t);
            for i in 0..k {
                acc += w[i] * a[i].powi(t as i32);
            }
            out.push(acc);
        }
    };
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut a = positions.to_vec();
    let mut w = weights.to_vec();
    let mut r = Vec::with_capacity(n_res);
    residual(&a, &w, &mut r);
    let mut best = norm2(&r);
    let mut lm = LevenbergState::new();
    let mut jac = vec![0.0; n_res * n_par];
    let mut r_try = Vec::with_capacity(n_res);
    for _ in 0..iterations {
        if best == 0.0 {
            break;
        }
        for t in 0..n_res {
            for i in 0..k {
                jac[t * n_par + i] = if t == 0 { 0.0 } else { w[i] * t as f64 * a[i].powi(t as i32 - 1) };
                jac[t * n_par + k + i] = a[i].powi(t as i32);
            }
        }
        let mut improved = false;
        for _ in 0..8 {
            match lm_step(&jac, n_res, n_par, &r, lm.lambda) {
                Some(step) => {
                    let a_try: Vec<f64> = (0..k).map(|i| (a[i] - step[i]).clamp(0.0, 1.0)).collect();
                    let w_try: Vec<f64> = (0..k).map(|i| w[i] - step[k + i]).collect();
                    residual(&a_try, &w_try, &mut r_try);
                    let c_try = norm2(&r_try);
                    if c_try.is_finite() && c_try < best {
                        a = a_try;
                        w = w_try;
                        std::mem::swap(&mut r, &mut r_try);
                        best = c_try;
                        lm.lambda = (lm.lambda * 0.25).max(1e-16);
                        improved = true;
                        break;
                    }
                }
                None => {}
            }
            lm.lambda *= 10.0;
            if lm.lambda > 1e8 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (a, w)
}

/// Planar analog of [`refine_1d`]: positions constrained to the unit
/// triangle, residuals over the full mixed-moment grid.
pub fn refine_2d(
    positions: &[(f64, f64)],
    weights: &[f64],
    target: &MomentGrid2D,
    iterations: usize,
) -> (Vec<(f64, f64)>, Vec<f64>) {
    let k = positions.len();
    let deg = target.max_degree();
    let idx: Vec<(usize, usize)> = (0..=deg).flat_map(|i| (0..=deg - i).map(move |j| (i, j))).collect();
    let n_res = idx.len();
    let n_par = 3 * k;
    let residual = |p: &[(f64, f64)], w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for &(i, j) in &idx {
            let mut acc = -target.get(i, j);
            for t in 0..k {
                acc += w[t] * p[t].0.powi(i as i32) * p[t].1.powi(j as i32);
            }
            out.push(acc);
        }
    };
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut p = positions.to_vec();
    let mut w = weights.to_vec();
    let mut r = Vec::with_capacity(n_res);
    residual(&p, &w, &mut r);
    let mut best = norm2(&r);
    let mut lm = LevenbergState::new();
    let mut jac = vec![0.0; n_res * n_par];
    let mut r_try = Vec::with_capacity(n_res);
    for _ in 0..iterations {
        if best == 0.0 {
            break;
        }
        for (row, &(i, j)) in idx.iter().enumerate() {
            for t in 0..k {
                let (x, y) = p[t];
                let xi = x.powi(i as i32);
                let yj = y.powi(j as i32);
                jac[row * n_par + t] = if i == 0 { 0.0 } else { w[t] * i as f64 * x.powi(i as i32 - 1) * yj };
                jac[row * n_par + k + t] = if j == 0 { 0.0 } else { w[t] * j as f64 * xi * y.powi(j as i32 - 1) };
                jac[row * n_par + 2 * k + t] = xi * yj;
            }
        }
        let mut improved = false;
        for _ in 0..8 {
            match lm_step(&jac, n_res, n_par, &r, lm.lambda) {
                Some(step) => {
                    let p_try: Vec<(f64, f64)> = (0..k)
                        .map(|t| {
                            let [x, y] = project_triangle(p[t].0 - step[t], p[t].1 - step[k + t]);
                            (x, y)
                        })
                        .collect();
                    let w_try: Vec<f64> = (0..k).map(|t| w[t] - step[2 * k + t]).collect();
                    residual(&p_try, &w_try, &mut r_try);
                    let c_try = norm2(&r_try);
                    if c_try.is_finite() && c_try < best {
                        p = p_try;
                        w = w_try;
                        std::mem::swap(&mut r, &mut r_try);
                        best = c_try;
                        lm.lambda = (lm.lambda * 0.25).max(1e-16);
                        improved = true;
                        break;
                    }
                }
                None => {}
            }
            lm.lambda *= 10.0;
            if lm.lambda > 1e8 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (p, w)
}

fn grid_residual_norm(positions: &[(f64, f64)], weights: &[f64], target: &MomentGrid2D) -> f64 {
    let deg = target.max_degree();
    let mut ss = 0.0;
    for i in 0..=deg {
        for j in 0..=deg - i {
            let mut acc = -target.get(i, j);
            for t in 0..positions.len() {
                acc += weights[t] * positions[t].0.powi(i as i32) * positions[t].1.powi(j as i32);
            }
            ss += acc * acc;
        }
    }
    ss.sqrt()
}

/// [`refine_2d`] plus split-and-merge restarts. When the refined residual
/// stays far above the noise floor, the starting configuration usually put
/// two spikes on one true location and left a stray one elsewhere; merging
/// the lightest spike away and splitting the heaviest along a few directions
/// escapes that basin. The best candidate by residual wins; the plain
/// refinement result is never made worse.
pub fn refine_2d_escaping(
    positions: &[(f64, f64)],
    weights: &[f64],
    target: &MomentGrid2D,
    iterations: usize,
    noise_floor: f64,
) -> (Vec<(f64, f64)>, Vec<f64>) {
    let (mut best_p, mut best_w) = refine_2d(positions, weights, target, iterations);
    let mut best_res = grid_residual_norm(&best_p, &best_w, target);
    let k = positions.len();
    let deg = target.max_degree();
    let n_res = ((deg + 1) * (deg + 2) / 2) as f64;
    let threshold = 64.0 * noise_floor * n_res.sqrt() + 1e-12;
    if best_res <= threshold || k < 2 || iterations == 0 {
        return (best_p, best_w);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| best_w[a].partial_cmp(&best_w[b]).unwrap().then(a.cmp(&b)));
    let lightest = order[0];
    let heaviest = order[k - 1];
    let diag = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [(1.0, 0.0), (0.0, 1.0), (diag, diag), (diag, -diag)];
    for &delta in &[2e-3, 2e-2] {
        for &(dx, dy) in &dirs {
            let mut p = best_p.clone();
            let mut w = best_w.clone();
            // Merge the lightest spike into its nearest neighbour, then
            // split the heaviest across the candidate direction.
            let near = (0..k)
                .filter(|&i| i != lightest)
                .min_by(|&a, &b| {
                    let da = (p[a].0 - p[lightest].0).powi(2) + (p[a].1 - p[lightest].1).powi(2);
                    let db = (p[b].0 - p[lightest].0).powi(2) + (p[b].1 - p[lightest].1).powi(2);
                    (da, a).partial_cmp(&(db, b)).unwrap()
                })
                .unwrap();
            w[near] += w[lightest];
            let split_from = if heaviest == lightest { near } else { heaviest };
            let half = w[split_from] / 2.0;
            w[split_from] = half;
            w[lightest] = half;
            let base = p[split_from];
            let pa = crate::mixtures::project_triangle(base.0 + dx * delta, base.1 + dy * delta);
            let pb = crate::mixtures::project_triangle(base.0 - dx * delta, base.1 - dy * delta);
            p[split_from] = (pa[0], pa[1]);
            p[lightest] = (pb[0], pb[1]);
            let (cand_p, cand_w) = refine_2d(&p, &w, target, iterations);
            let cand_res = grid_residual_norm(&cand_p, &cand_w, target);
            if cand_res < best_res {
                best_res = cand_res;
                best_p = cand_p;
                best_w = cand_w;
            }
            if best_res <= threshold {
                return (best_p, best_w);
            }
        }
    }
    (best_p, best_w)
}

/// Jointly refines a d-dimensional spike configuration against every queried
/// moment set (the 1-D skeleton vector plus one grid per coordinate plane).
/// Spike coordinates are shared across planes, so directions that collapse in
/// one projection stay pinned down by the others. Positions move freely
/// during the iteration; the caller projects onto its domain afterwards.
pub fn refine_joint(
    locations: &[Vec<f64>],
    weights: &[f64],
    base_query: &crate::highdim::ProjectionQuery,
    base_moments: &MomentVector1D,
    coord_queries: &[crate::highdim::ProjectionQuery],
    coord_grids: &[MomentGrid2D],
    iterations: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let k = locations.len();
    let d = locations.first().map(|p| p.len()).unwrap_or(0);
    let n_par = k * d + k;
    // Row layout: base vector rows, then each grid's rows in index order.
    let grid_idx: Vec<Vec<(usize, usize)>> = coord_grids
        .iter()
        .map(|g| g.indices().collect())
        .collect();
    let n_res = base_moments.degree() + 1 + grid_idx.iter().map(|v| v.len()).sum::<usize>();
    let residual = |loc: &[Vec<f64>], w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        let pts: Vec<f64> = loc.iter().map(|a| base_query.project_point(a)[0]).collect();
        for t in 0..=base_moments.degree() {
            let mut acc = -base_moments.get(t);
            for i in 0..k {
                acc += w[i] * pts[i].powi(t as i32);
            }
            out.push(acc);
        }
        for (q, (grid, idx)) in coord_queries.iter().zip(coord_grids.iter().zip(&grid_idx)) {
            let uv: Vec<(f64, f64)> = loc
                .iter()
                .map(|a| {
                    let p = q.project_point(a);
                    (p[0], p[1])
                })
                .collect();
            for &(a, b) in idx {
                let mut acc = -grid.get(a, b);
                for i in 0..k {
                    acc += w[i] * uv[i].0.powi(a as i32) * uv[i].1.powi(b as i32);
                }
                out.push(acc);
            }
        }
    };
    let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut loc = locations.to_vec();
    let mut w = weights.to_vec();
    let mut r = Vec::with_capacity(n_res);
    residual(&loc, &w, &mut r);
    let mut best = norm2(&r);
    let mut lm = LevenbergState::new();
    let mut jac = vec![0.0; n_res * n_par];
    let mut r_try = Vec::with_capacity(n_res);
    for _ in 0..iterations {
        if best == 0.0 {
            break;
        }
        // Jacobian: parameter order (alpha_{0,0..d}, alpha_{1,0..d}, ...,
        // w_0..w_{k-1}).
        for cell in jac.iter_mut() {
            *cell = 0.0;
        }
        let mut row = 0;
        let pts: Vec<f64> = loc.iter().map(|a| base_query.project_point(a)[0]).collect();
        for t in 0..=base_moments.degree() {
            for i in 0..k {
                let dp = if t == 0 { 0.0 } else { w[i] * t as f64 * pts[i].powi(t as i32 - 1) };
                for c in 0..d {
                    jac[row * n_par + i * d + c] = dp * base_query.columns[0][c];
                }
                jac[row * n_par + k * d + i] = pts[i].powi(t as i32);
            }
            row += 1;
        }
        for (q, idx) in coord_queries.iter().zip(&grid_idx) {
            let uv: Vec<(f64, f64)> = loc
                .iter()
                .map(|a| {
                    let p = q.project_point(a);
                    (p[0], p[1])
                })
                .collect();
            for &(a, b) in idx {
                for i in 0..k {
                    let (u, v) = uv[i];
                    let ua = u.powi(a as i32);
                    let vb = v.powi(b as i32);
                    let du = if a == 0 { 0.0 } else { w[i] * a as f64 * u.powi(a as i32 - 1) * vb };
                    let dv = if b == 0 { 0.0 } else { w[i] * b as f64 * ua * v.powi(b as i32 - 1) };
                    for c in 0..d {
                        jac[row * n_par + i * d + c] = du * q.columns[0][c] + dv * q.columns[1][c];
                    }
                    jac[row * n_par + k * d + i] = ua * vb;
                }
                row += 1;
            }
        }
        let mut improved = false;
        for _ in 0..8 {
            match lm_step(&jac, n_res, n_par, &r, lm.lambda) {
                Some(step) => {
                    let loc_try: Vec<Vec<f64>> = (0..k)
                        .map(|i| (0..d).map(|c| loc[i][c] - step[i * d + c]).collect())
                        .collect();
                    let w_try: Vec<f64> = (0..k).map(|i| w[i] - step[k * d + i]).collect();
                    residual(&loc_try, &w_try, &mut r_try);
                    let c_try = norm2(&r_try);
                    if c_try.is_finite() && c_try < best {
                        loc = loc_try;
                        w = w_try;
                        std::mem::swap(&mut r, &mut r_try);
                        best = c_try;
                        lm.lambda = (lm.lambda * 0.25).max(1e-16);
                        improved = true;
                        break;
                    }
                }
                None => {}
            }
            lm.lambda *= 10.0;
            if lm.lambda > 1e8 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (loc, w, best.sqrt())
}

/// [`refine_joint`] plus split-and-merge restarts, mirroring
/// [`refine_2d_escaping`]: candidates split the heaviest spike along the
/// base direction or a coordinate axis and merge the lightest away. Engaged
/// only when the joint residual sits far above the noise floor.
#[allow(clippy::too_many_arguments)]
pub fn refine_joint_escaping(
    locations: &[Vec<f64>],
    weights: &[f64],
    base_query: &crate::highdim::ProjectionQuery,
    base_moments: &MomentVector1D,
    coord_queries: &[crate::highdim::ProjectionQuery],
    coord_grids: &[MomentGrid2D],
    iterations: usize,
    noise_floor: f64,
) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let (mut best_l, mut best_w, mut best_res) = refine_joint(
        locations,
        weights,
        base_query,
        base_moments,
        coord_queries,
        coord_grids,
        iterations,
    );
    let k = locations.len();
    let d = locations.first().map(|p| p.len()).unwrap_or(0);
    let n_res = (base_moments.degree() + 1 + coord_grids.iter().map(|g| {
        let deg = g.max_degree();
        (deg + 1) * (deg + 2) / 2
    }).sum::<usize>()) as f64;
    let threshold = 64.0 * noise_floor * n_res.sqrt() + 1e-12;
    if best_res <= threshold || k < 2 || d == 0 || iterations == 0 {
        return (best_l, best_w, best_res);
    }
    // Split directions: the shared projection direction plus the first few
    // coordinate axes.
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    let base_dir: Vec<f64> = base_query.columns[0].clone();
    let norm = base_dir.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        dirs.push(base_dir.iter().map(|x| x / norm).collect());
    }
    for c in 0..d.min(4) {
        let mut e = vec![0.0; d];
        e[c] = 1.0;
        dirs.push(e);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| best_w[a].partial_cmp(&best_w[b]).unwrap().then(a.cmp(&b)));
    let lightest = order[0];
    let heaviest = order[k - 1];
    for &delta in &[1e-2, 5e-2] {
        for dir in &dirs {
            let mut loc = best_l.clone();
            let mut w = best_w.clone();
            let near = (0..k)
                .filter(|&i| i != lightest)
                .min_by(|&a, &b| {
                    let da: f64 = loc[a].iter().zip(&loc[lightest]).map(|(x, y)| (x - y) * (x - y)).sum();
                    let db: f64 = loc[b].iter().zip(&loc[lightest]).map(|(x, y)| (x - y) * (x - y)).sum();
                    (da, a).partial_cmp(&(db, b)).unwrap()
                })
                .unwrap();
            w[near] += w[lightest];
            let split_from = if heaviest == lightest { near } else { heaviest };
            let half = w[split_from] / 2.0;
            w[split_from] = half;
            w[lightest] = half;
            let base = loc[split_from].clone();
            loc[split_from] = base.iter().zip(dir).map(|(x, u)| x + u * delta).collect();
            loc[lightest] = base.iter().zip(dir).map(|(x, u)| x - u * delta).collect();
            let (cand_l, cand_w, cand_res) = refine_joint(
                &loc,
                &w,
                base_query,
                base_moments,
                coord_queries,
                coord_grids,
                iterations,
            );
            if cand_res < best_res {
                best_res = cand_res;
                best_l = cand_l;
                best_w = cand_w;
            }
            if best_res <= threshold {
                return (best_l, best_w, best_res);
            }
        }
    }
    (best_l, best_w, best_res)
}

/// One Levenberg-Marquardt step: solves `(J'J + lambda diag(J'J)) d = J' r`
/// through the stacked least-squares form for stability.
fn lm_step(jac: &[f64], n_res: usize, n_par: usize, r: &[f64], lambda: f64) -> Option<Vec<f64>> {
    // Stack [J; sqrt(lambda) D] with D = sqrt(diag(J'J)) (plus a floor so
    // dead parameters stay put).
    let mut diag = vec![0.0; n_par];
    for t in 0..n_res {
        for p in 0..n_par {
            diag[p] += jac[t * n_par + p] * jac[t * n_par + p];
        }
    }
    let scale = diag.iter().fold(0.0f64, |a, &b| a.max(b)).max(1e-300);
    let rows = n_res + n_par;
    let mut stacked = vec![0.0; rows * n_par];
    stacked[..n_res * n_par].copy_from_slice(jac);
    for p in 0..n_par {
        stacked[(n_res + p) * n_par + p] = (lambda * diag[p].max(1e-12 * scale)).sqrt();
    }
    let mut rhs = vec![0.0; rows];
    rhs[..n_res].copy_from_slice(r);
    let step = linalg::lstsq_real(&stacked, rows, n_par, &rhs);
    if step.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(step)
}
