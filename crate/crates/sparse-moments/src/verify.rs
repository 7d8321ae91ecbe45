//! Independent brute-force oracles: semistandard-tableau Schur sums, exact
//! cofactor determinant ratios, an LP transport reference, and exhaustive
//! grid recovery. These deliberately share no code with the production
//! linear-algebra and flow paths so they can pin expected values in tests.

use crate::error::{Error, Result};
use crate::mixtures::{GroundMetric, SignedSpikeMixture, SpikeMixture};
use crate::moments::{moments_1d, MomentVector1D};
use crate::rng::CounterRng;

/// Weakly decreasing sequence of nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::BadInput("partition parts must be weakly decreasing".into()));
        }
        Ok(Partition(parts))
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.iter().sum()
    }

    /// Hook shape `(j - k + 1, 1, ..., 1)` with `k - 1` trailing ones.
    pub fn hook(j: usize, k: usize) -> Result<Self> {
        if j < k || k == 0 {
            return Err(Error::BadInput("hook shape needs j >= k >= 1".into()));
        }
        let mut parts = vec![1; k];
        parts[0] = j - k + 1;
        Partition::new(parts)
    }
}

/// Schur polynomial value as the sum over all semistandard Young tableaux of
/// shape `lambda` with entries in `1..=k`: rows weakly increase, columns
/// strictly increase, and each tableau contributes `prod_i x_i^(count of i)`.
pub fn schur_bruteforce(lambda: &Partition, x: &[f64]) -> Result<f64> {
    let k = x.len();
    if k == 0 || k > 5 {
        return Err(Error::BadInput("schur_bruteforce supports 1 <= k <= 5 variables".into()));
    }
    if lambda.size() > 10 {
        return Err(Error::BadInput("schur_bruteforce supports |lambda| <= 10".into()));
    }
    let shape: Vec<usize> = lambda.parts().iter().copied().filter(|&r| r > 0).collect();
    if shape.len() > k {
        // More rows than available entries: first column cannot strictly
        // increase, so the sum is empty.
        return Ok(0.0);
    }
    if shape.is_empty() {
        return Ok(1.0);
    }
    let mut cells = Vec::new();
    for (r, &len) in shape.iter().enumerate() {
        for c in 0..len {
            cells.push((r, c));
        }
    }
    let cols = shape[0];
    let mut fill = vec![vec![0usize; cols]; shape.len()];
    let mut counts = vec![0usize; k + 1];
    let mut total = 0.0;
    fn rec(
        idx: usize,
        cells: &[(usize, usize)],
        fill: &mut Vec<Vec<usize>>,
        counts: &mut Vec<usize>,
        x: &[f64],
        total: &mut f64,
    ) {
        if idx == cells.len() {
            let mut term = 1.0;
            for (i, &c) in counts.iter().enumerate().skip(1) {
                term *= x[i - 1].powi(c as i32);
            }
            *total += term;
            return;
        }
        let (r, c) = cells[idx];
        let k = x.len();
        let min_row = if c > 0 { fill[r][c - 1] } else { 1 };
        let min_col = if r > 0 { fill[r - 1][c] + 1 } else { 1 };
        for v in min_row.max(min_col)..=k {
            fill[r][c] = v;
            counts[v] += 1;
            rec(idx + 1, cells, fill, counts, x, total);
            counts[v] -= 1;
        }
        fill[r][c] = 0;
    }
    rec(0, &cells, &mut fill, &mut counts, x, &mut total);
    Ok(total)
}

/// Double-double value for the determinant oracle: roughly 32 significant
/// digits, enough to survive the cancellation in Vandermonde-like cofactor
/// expansions with close nodes.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd { hi: p, lo: a.mul_add(b, -p) }
    }

    fn add(self, other: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, other.hi);
        let lo = s.lo + self.lo + other.lo;
        Dd::two_sum(s.hi, lo)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, other: Dd) -> Dd {
        let p = Dd::two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        Dd::two_sum(p.hi, lo)
    }

    fn powi(x: f64, e: usize) -> Dd {
        let mut acc = Dd::from(1.0);
        for _ in 0..e {
            acc = acc.mul(Dd::from(x));
        }
        acc
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Cofactor-expansion determinant for n <= 6 in double-double arithmetic.
fn det_cofactor(m: &[Vec<Dd>]) -> Dd {
    let n = m.len();
    match n {
        0 => Dd::from(1.0),
        1 => m[0][0],
        2 => m[0][0].mul(m[1][1]).add(m[0][1].mul(m[1][0]).neg()),
        _ => {
            let mut det = Dd::ZERO;
            for col in 0..n {
                let minor: Vec<Vec<Dd>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(c, _)| c != col)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let term = m[0][col].mul(det_cofactor(&minor));
                det = det.add(if col % 2 == 0 { term } else { term.neg() });
            }
            det
        }
    }
}

/// Alternant determinant `det(x_c^(lambda_r + k - 1 - r))` (row r, column c,
/// zero-based), divided by nothing; the Schur polynomial is this over the
/// `lambda = 0` case.
pub fn alternant_det(lambda: &Partition, x: &[f64]) -> Result<f64> {
    let k = x.len();
    if k > 6 {
        return Err(Error::BadInput("alternant_det supports k <= 6".into()));
    }
    let mut parts = lambda.parts().to_vec();
    parts.resize(k, 0);
    let m: Vec<Vec<Dd>> = (0..k)
        .map(|r| {
            let e = parts[r] + k - 1 - r;
            x.iter().map(|&xc| Dd::powi(xc, e)).collect()
        })
        .collect();
    Ok(det_cofactor(&m).value())
}

/// The determinant ratio of the Vandermonde-with-power-row identity, exactly
/// as printed: numerator rows `(a^j, a^1, ..., a^(k-1))`, denominator rows
/// `(1, a^1, ..., a^(k-1))`, both expanded by exact cofactors.
pub fn vandermonde_ratio(a: &[f64], j: usize) -> Result<f64> {
    let k = a.len();
    if k == 0 || k > 6 {
        return Err(Error::BadInput("vandermonde_ratio supports 1 <= k <= 6".into()));
    }
    if j < k {
        return Err(Error::BadInput("vandermonde_ratio needs j >= k".into()));
    }
    for p in 0..k {
        for q in 0..p {
            if (a[p] - a[q]).abs() < 1e-6 {
                return Err(Error::BadInput("nodes must be separated by at least 1e-6".into()));
            }
        }
    }
    let num: Vec<Vec<Dd>> = (0..k)
        .map(|r| {
            let e = if r == 0 { j } else { r };
            a.iter().map(|&x| Dd::powi(x, e)).collect()
        })
        .collect();
    let den: Vec<Vec<Dd>> = (0..k)
        .map(|r| a.iter().map(|&x| Dd::powi(x, r)).collect())
        .collect();
    Ok(det_cofactor(&num).value() / det_cofactor(&den).value())
}

/// The alternant ratio route to the same quantity as [`vandermonde_ratio`],
/// with the rows in the Schur-definition order; exposed for the identity
/// tests.
pub fn schur_alternant_ratio(lambda: &Partition, x: &[f64]) -> Result<f64> {
    let num = alternant_det(lambda, x)?;
    let den = alternant_det(&Partition::new(vec![])?, x)?;
    Ok(num / den)
}

/// `prod_i a_i * sum over compositions s of (j - k) into k nonnegative parts
/// of prod_i a_i^(s_i)`.
pub fn composition_sum(a: &[f64], j: usize) -> Result<f64> {
    let k = a.len();
    if k == 0 || j < k {
        return Err(Error::BadInput("composition_sum needs j >= k >= 1".into()));
    }
    let budget = j - k;
    // Composition count C(budget + k - 1, k - 1) must stay enumerable.
    let count = crate::moments::binomial(budget + k - 1, k - 1)?;
    if count > 1_000_000 {
        return Err(Error::BadInput(format!("{count} compositions is too many to enumerate")));
    }
    fn rec(a: &[f64], idx: usize, left: usize, prefix: f64, acc: &mut f64) {
        if idx + 1 == a.len() {
            *acc += prefix * a[idx].powi(left as i32);
            return;
        }
        for s in 0..=left {
            rec(a, idx + 1, left - s, prefix * a[idx].powi(s as i32), acc);
        }
    }
    let mut acc = 0.0;
    rec(a, 0, budget, 1.0, &mut acc);
    let lead: f64 = a.iter().product();
    Ok(lead * acc)
}

/// Exact transport cost by LP: north-west-corner start, then Bellman-Ford
/// negative-cycle canceling on the residual graph until optimal.
pub fn transport_lp_reference(a: &SpikeMixture, b: &SpikeMixture, metric: GroundMetric) -> Result<f64> {
    if a.k() * b.k() > 400 {
        return Err(Error::TooLarge(a.k(), b.k(), 400));
    }
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch(
            a.domain().kind_name().into(),
            b.domain().kind_name().into(),
        ));
    }
    Ok(lp_min_cost(a.locations(), a.weights(), b.locations(), b.weights(), metric))
}

/// Signed-transport reference: difference measure split into parts, then the
/// LP solver. Mirrors `mixtures::transport_signed` through an independent
/// optimizer.
pub fn signed_transport_lp(a: &SignedSpikeMixture, b: &SignedSpikeMixture) -> Result<f64> {
    let wa = a.real_weights()?;
    let wb = b.real_weights()?;
    let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
    for (x, &w) in a.locations().iter().zip(&wa) {
        atoms.push((x.clone(), w));
    }
    for (x, &w) in b.locations().iter().zip(&wb) {
        atoms.push((x.clone(), -w));
    }
    atoms.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
    for (x, w) in atoms {
        match merged.last_mut() {
            Some((px, pw)) if *px == x => *pw += w,
            _ => merged.push((x, w)),
        }
    }
    let mut px = Vec::new();
    let mut pw = Vec::new();
    let mut nx = Vec::new();
    let mut nw = Vec::new();
    for (x, w) in merged {
        if w > 1e-15 {
            px.push(x);
            pw.push(w);
        } else if w < -1e-15 {
            nx.push(x);
            nw.push(-w);
        }
    }
    if pw.is_empty() || nw.is_empty() {
        return Ok(0.0);
    }
    let p: f64 = pw.iter().sum();
    let n: f64 = nw.iter().sum();
    let scale = p / n;
    for w in &mut nw {
        *w *= scale;
    }
    Ok(lp_min_cost(&px, &pw, &nx, &nw, GroundMetric::L1))
}

fn lp_min_cost(xs: &[Vec<f64>], ws: &[f64], ys: &[Vec<f64>], wy: &[f64], metric: GroundMetric) -> f64 {
    let m = xs.len();
    let n = ys.len();
    let mut cost = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            cost[i * n + j] = metric.dist(&xs[i], &ys[j]);
        }
    }
    // North-west-corner feasible start.
    let mut flow = vec![0.0; m * n];
    let mut supply = ws.to_vec();
    let mut demand = wy.to_vec();
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        let q = supply[i].min(demand[j]);
        flow[i * n + j] += q;
        supply[i] -= q;
        demand[j] -= q;
        if supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    // Cancel negative cycles in the residual graph until optimal.
    let nodes = m + n;
    let flow_tol = 1e-14;
    for _round in 0..10_000 {
        // Bellman-Ford with a virtual zero-distance start at every node.
        let mut dist = vec![0.0f64; nodes];
        let mut pred = vec![usize::MAX; nodes];
        let mut updated_node = usize::MAX;
        for _iter in 0..nodes {
            updated_node = usize::MAX;
            for u in 0..m {
                for v in 0..n {
                    // Forward arc source u -> sink v.
                    let c = cost[u * n + v];
                    if dist[u] + c < dist[m + v] - 1e-13 {
                        dist[m + v] = dist[u] + c;
                        pred[m + v] = u;
                        updated_node = m + v;
                    }
                    // Backward arc sink v -> source u if flow present.
                    if flow[u * n + v] > flow_tol && dist[m + v] - c < dist[u] - 1e-13 {
                        dist[u] = dist[m + v] - c;
                        pred[u] = m + v;
                        updated_node = u;
                    }
                }
            }
            if updated_node == usize::MAX {
                break;
            }
        }
        if updated_node == usize::MAX {
            break; // no negative cycle
        }
        // Walk predecessors to land inside the cycle, then extract it.
        let mut v = updated_node;
        for _ in 0..nodes {
            v = pred[v];
        }
        let start = v;
        let mut cycle = vec![start];
        let mut u = pred[start];
        while u != start {
            cycle.push(u);
            u = pred[u];
        }
        cycle.reverse(); // now in forward direction of the arcs
        // Bottleneck over backward arcs of the cycle.
        let mut theta = f64::INFINITY;
        for w in 0..cycle.len() {
            let from = cycle[w];
            let to = cycle[(w + 1) % cycle.len()];
            if from >= m {
                // backward arc sink -> source reduces flow[to][from - m]
                theta = theta.min(flow[to * n + (from - m)]);
            }
        }
        if !theta.is_finite() || theta <= flow_tol {
            break;
        }
        for w in 0..cycle.len() {
            let from = cycle[w];
            let to = cycle[(w + 1) % cycle.len()];
            if from < m {
                flow[from * n + (to - m)] += theta;
            } else {
                flow[to * n + (from - m)] -= theta;
            }
        }
    }
    flow.iter().zip(&cost).map(|(f, c)| f * c).sum()
}

/// Exhaustive grid search over spike locations and weights minimizing the
/// moment distance to `target`; sanity oracle for tiny instances.
pub fn grid_recover_oracle(target: &MomentVector1D, k: usize, grid_step: f64) -> Result<SpikeMixture> {
    if !(k == 1 || k == 2) {
        return Err(Error::BadInput("grid_recover_oracle supports k in {1, 2}".into()));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::BadInput("grid_step must be in (0, 0.5]".into()));
    }
    let degree = target.degree();
    let steps = (1.0 / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * grid_step).min(1.0)).collect();
    let dist = |locs: &[f64], ws: &[f64]| -> f64 {
        let mm = crate::moments::raw_moments_1d(locs, ws, degree);
        (1..=degree)
            .map(|t| (mm[t] - target.get(t)).abs())
            .fold(0.0, f64::max)
    };
    let mut best = f64::INFINITY;
    let mut best_mix = None;
    if k == 1 {
        for &x in &grid {
            let d = dist(&[x], &[1.0]);
            if d < best {
                best = d;
                best_mix = Some((vec![x], vec![1.0]));
            }
        }
    } else {
        for (ia, &x1) in grid.iter().enumerate() {
            for &x2 in &grid[ia..] {
                for &w1 in &grid {
                    let ws = [w1, 1.0 - w1];
                    let d = dist(&[x1, x2], &ws);
                    if d < best {
                        best = d;
                        best_mix = Some((vec![x1, x2], ws.to_vec()));
                    }
                }
            }
        }
    }
    let (locs, ws) = best_mix.expect("grid is nonempty");
    SpikeMixture::new(
        crate::mixtures::Domain::UnitInterval,
        locs.into_iter().map(|x| vec![x]).collect(),
        ws,
    )
}

/// Samples random mixture pairs and returns the largest observed ratio
/// `T / (k * Mdis^(1/(2k-1)))`, probing the moment-transportation inequality.
/// Pairs with moment distance below 1e-14 are skipped.
pub fn moment_inequality_probe(k: usize, n_pairs: usize, rng: &mut CounterRng) -> Result<f64> {
    if k == 0 || k > 3 {
        return Err(Error::BadInput("moment_inequality_probe supports k <= 3".into()));
    }
    let degree = 2 * k - 1;
    let mut max_ratio = 0.0f64;
    for _ in 0..n_pairs {
        let a = crate::mixtures::random_mixture(
            &crate::mixtures::Domain::UnitInterval,
            k,
            crate::mixtures::SeparationMode::Random,
            0.0,
            rng,
        )?;
        let b = crate::mixtures::random_mixture(
            &crate::mixtures::Domain::UnitInterval,
            k,
            crate::mixtures::SeparationMode::Random,
            0.0,
            rng,
        )?;
        let mdis = crate::moments::moment_distance_1d(&moments_1d(&a, degree)?, &moments_1d(&b, degree)?, degree)?;
        if mdis < 1e-14 {
            continue;
        }
        let t = crate::mixtures::transport_1d(&a, &b)?;
        let ratio = t / (k as f64 * mdis.powf(1.0 / (2.0 * k as f64 - 1.0)));
        max_ratio = max_ratio.max(ratio);
    }
    Ok(max_ratio)
}
