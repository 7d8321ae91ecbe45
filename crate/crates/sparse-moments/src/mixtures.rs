//! Core mixture types, domain projections, and transportation distances
//! (plain, signed, complex, multi-dimensional).
//!
//! A `SpikeMixture` is a discrete probability measure: `k` support points in a
//! convex domain plus nonnegative weights summing to one. Intermediate
//! algorithm states carry signed or complex weights (`SignedSpikeMixture`).
//! Distances are L1-transportation (Wasserstein-1 with the L1 ground metric)
//! throughout; L2 is available as an evaluator option only.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Membership tolerance for domain checks.
pub const DOMAIN_TOL: f64 = 1e-9;
/// Weights above `-WEIGHT_TOL` count as nonnegative (float dust).
pub const WEIGHT_TOL: f64 = 1e-12;
/// Tolerance on the total weight of a mixture.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Hard cap on spike counts accepted by the exact transport solver.
pub const TRANSPORT_SIZE_CAP: usize = 512;

/// Convex support domains for spike locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// `[0, 1]` in R^1.
    UnitInterval,
    /// `{(a, b) : a >= 0, b >= 0, a + b <= 1}` in R^2.
    UnitTriangle,
    /// Probability simplex `{x in R^dim : x >= 0, sum x = 1}`.
    Simplex { dim: usize },
    /// Axis-aligned cube `[lo, hi]^dim`.
    Box { dim: usize, lo: f64, hi: f64 },
    /// Euclidean unit ball in R^dim.
    UnitBall { dim: usize },
}

impl Domain {
    /// Ambient dimension of points in this domain.
    pub fn dim(&self) -> usize {
        match *self {
            Domain::UnitInterval => 1,
            Domain::UnitTriangle => 2,
            Domain::Simplex { dim } | Domain::Box { dim, .. } | Domain::UnitBall { dim } => dim,
        }
    }

    /// Membership test with tolerance `tol` per constraint.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim() || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match *self {
            Domain::UnitInterval => p[0] >= -tol && p[0] <= 1.0 + tol,
            Domain::UnitTriangle => p[0] >= -tol && p[1] >= -tol && p[0] + p[1] <= 1.0 + tol,
            Domain::Simplex { .. } => {
                p.iter().all(|&x| x >= -tol) && (p.iter().sum::<f64>() - 1.0).abs() <= tol * p.len() as f64
            }
            Domain::Box { lo, hi, .. } => p.iter().all(|&x| x >= lo - tol && x <= hi + tol),
            Domain::UnitBall { .. } => p.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1.0 + tol,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Domain::UnitInterval => "unit_interval",
            Domain::UnitTriangle => "unit_triangle",
            Domain::Simplex { .. } => "simplex",
            Domain::Box { .. } => "box",
            Domain::UnitBall { .. } => "unit_ball",
        }
    }
}

/// Ground metric for multi-dimensional transports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundMetric {
    L1,
    L2,
}

impl GroundMetric {
    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            GroundMetric::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
            GroundMetric::L2 => x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        }
    }
}

/// Euclidean projection of a point onto a domain. Idempotent and
/// non-expansive in L2.
///
/// Points already inside the domain (within `DOMAIN_TOL`) are returned
/// unchanged, so a projected point is a bitwise fixed point.
pub fn project_to_domain(p: &[f64], domain: &Domain) -> Vec<f64> {
    assert_eq!(p.len(), domain.dim(), "point dimension mismatch");
    if domain.contains(p, DOMAIN_TOL) {
        return p.to_vec();
    }
    match *domain {
        Domain::UnitInterval => vec![p[0].clamp(0.0, 1.0)],
        Domain::UnitTriangle => project_triangle(p[0], p[1]).to_vec(),
        Domain::Simplex { .. } => project_simplex(p),
        Domain::Box { lo, hi, .. } => p.iter().map(|&x| x.clamp(lo, hi)).collect(),
        Domain::UnitBall { .. } => {
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= 1.0 {
                p.to_vec()
            } else {
                p.iter().map(|&x| x / norm).collect()
            }
        }
    }
}

/// Euclidean projection onto the probability simplex by sort-and-threshold.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    (0..n).map(|i| (v[i] - theta).max(0.0)).collect()
}

/// Euclidean projection onto the unit triangle `{a,b >= 0, a+b <= 1}`.
pub fn project_triangle(a: f64, b: f64) -> [f64; 2] {
    if a >= 0.0 && b >= 0.0 && a + b <= 1.0 {
        return [a, b];
    }
    // Closest point is on one of the three edges.
    let candidates = [
        project_segment(a, b, [0.0, 0.0], [1.0, 0.0]),
        project_segment(a, b, [0.0, 0.0], [0.0, 1.0]),
        project_segment(a, b, [1.0, 0.0], [0.0, 1.0]),
    ];
    let mut best = candidates[0];
    let mut best_d = f64::INFINITY;
    for c in candidates {
        let d = (c[0] - a) * (c[0] - a) + (c[1] - b) * (c[1] - b);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn project_segment(px: f64, py: f64, s: [f64; 2], e: [f64; 2]) -> [f64; 2] {
    let dx = e[0] - s[0];
    let dy = e[1] - s[1];
    let t = (((px - s[0]) * dx + (py - s[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    [s[0] + t * dx, s[1] + t * dy]
}

/// Discrete probability measure with `k` spikes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeMixture {
    domain: Domain,
    locations: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SpikeMixture {
    /// Validates the invariants: matching lengths, weights above `-WEIGHT_TOL`
    /// summing to 1 within `WEIGHT_SUM_TOL`, every location in the domain.
    pub fn new(domain: Domain, locations: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if locations.is_empty() || locations.len() != weights.len() {
            return Err(Error::InvalidMixture(format!(
                "need k >= 1 with matching lengths, got {} locations and {} weights",
                locations.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -WEIGHT_TOL) {
            return Err(Error::InvalidMixture("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}, expected 1")));
        }
        for loc in &locations {
            if !domain.contains(loc, DOMAIN_TOL) {
                return Err(Error::InvalidMixture(format!(
                    "location {loc:?} outside {} domain",
                    domain.kind_name()
                )));
            }
        }
        Ok(SpikeMixture { domain, locations, weights })
    }

    /// Single unit spike at `p`.
    pub fn dirac(domain: Domain, p: Vec<f64>) -> Result<Self> {
        SpikeMixture::new(domain, vec![p], vec![1.0])
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Spike locations as scalars; only valid on 1-dimensional domains.
    pub fn scalar_locations(&self) -> Vec<f64> {
        assert_eq!(self.domain.dim(), 1);
        self.locations.iter().map(|p| p[0]).collect()
    }
}

impl<'de> Deserialize<'de> for SpikeMixture {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            domain: Domain,
            locations: Vec<Vec<f64>>,
            weights: Vec<f64>,
        }
        let raw = Raw::deserialize(de)?;
        SpikeMixture::new(raw.domain, raw.locations, raw.weights).map_err(serde::de::Error::custom)
    }
}

/// Mixture whose weights may be negative or complex; the weight sum must
/// still be 1 (real part; imaginary part of the sum near 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSpikeMixture {
    domain: Domain,
    locations: Vec<Vec<f64>>,
    weights: Vec<Complex64>,
}

impl SignedSpikeMixture {
    pub fn new(domain: Domain, locations: Vec<Vec<f64>>, weights: Vec<Complex64>) -> Result<Self> {
        if locations.is_empty() || locations.len() != weights.len() {
            return Err(Error::InvalidMixture("signed mixture needs matching nonempty lengths".into()));
        }
        if weights.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::InvalidMixture("non-finite signed weight".into()));
        }
        let total: Complex64 = weights.iter().sum();
        if (total.re - 1.0).abs() > WEIGHT_SUM_TOL || total.im.abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMixture(format!("signed weights sum to {total}, expected 1")));
        }
        for loc in &locations {
            if loc.len() != domain.dim() || loc.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMixture("bad location in signed mixture".into()));
            }
        }
        Ok(SignedSpikeMixture { domain, locations, weights })
    }

    pub fn from_real_weights(domain: Domain, locations: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let w = weights.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        SignedSpikeMixture::new(domain, locations, w)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn has_complex_weights(&self) -> bool {
        self.weights.iter().any(|w| w.im.abs() > WEIGHT_TOL)
    }

    pub fn real_weights(&self) -> Result<Vec<f64>> {
        if self.has_complex_weights() {
            return Err(Error::BadInput(
                "signed mixture has complex weights; use the complex transport".into(),
            ));
        }
        Ok(self.weights.iter().map(|w| w.re).collect())
    }
}

impl Serialize for SignedSpikeMixture {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = ser.serialize_struct("SignedSpikeMixture", 3)?;
        st.serialize_field("domain", &self.domain)?;
        st.serialize_field("locations", &self.locations)?;
        let pairs: Vec<[f64; 2]> = self.weights.iter().map(|w| [w.re, w.im]).collect();
        st.serialize_field("weights", &pairs)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SignedSpikeMixture {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum W {
            Real(f64),
            Pair([f64; 2]),
        }
        #[derive(Deserialize)]
        struct Raw {
            domain: Domain,
            locations: Vec<Vec<f64>>,
            weights: Vec<W>,
        }
        let raw = Raw::deserialize(de)?;
        let weights = raw
            .weights
            .into_iter()
            .map(|w| match w {
                W::Real(x) => Complex64::new(x, 0.0),
                W::Pair([re, im]) => Complex64::new(re, im),
            })
            .collect();
        SignedSpikeMixture::new(raw.domain, raw.locations, weights).map_err(serde::de::Error::custom)
    }
}

/// One entry of an optimal coupling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportMove {
    pub source: usize,
    pub sink: usize,
    pub mass: f64,
}

/// Optimal transport plan: row sums equal source masses, column sums equal
/// sink masses, all entries nonnegative.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportPlan {
    pub moves: Vec<TransportMove>,
    pub total_cost: f64,
}

impl TransportPlan {
    /// Max violation of the coupling constraints against the given marginals.
    pub fn marginal_error(&self, source_masses: &[f64], sink_masses: &[f64]) -> f64 {
        let mut row = vec![0.0; source_masses.len()];
        let mut col = vec![0.0; sink_masses.len()];
        for m in &self.moves {
            row[m.source] += m.mass;
            col[m.sink] += m.mass;
        }
        let mut err = 0.0f64;
        for (r, m) in row.iter().zip(source_masses) {
            err = err.max((r - m).abs());
        }
        for (c, m) in col.iter().zip(sink_masses) {
            err = err.max((c - m).abs());
        }
        err
    }
}

/// Exact Wasserstein-1 distance between two mixtures on `[0, 1]`, by sorting
/// the supports and integrating `|CDF_a - CDF_b|`.
pub fn transport_1d(a: &SpikeMixture, b: &SpikeMixture) -> Result<f64> {
    if a.domain != b.domain {
        return Err(Error::DomainMismatch(
            a.domain.kind_name().into(),
            b.domain.kind_name().into(),
        ));
    }
    if a.domain.dim() != 1 {
        return Err(Error::BadInput("transport_1d needs a 1-dimensional domain".into()));
    }
    Ok(cdf_distance(
        &a.scalar_locations(),
        a.weights(),
        &b.scalar_locations(),
        b.weights(),
    ))
}

/// `integral |CDF_a - CDF_b|` for finite signed measures with equal total
/// mass on the line.
fn cdf_distance(xa: &[f64], wa: &[f64], xb: &[f64], wb: &[f64]) -> f64 {
    let mut events: Vec<(f64, f64)> = xa
        .iter()
        .zip(wa)
        .map(|(&x, &w)| (x, w))
        .chain(xb.iter().zip(wb).map(|(&x, &w)| (x, -w)))
        .collect();
    events.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut cum = 0.0;
    let mut cost = 0.0;
    for i in 0..events.len() {
        cum += events[i].1;
        if i + 1 < events.len() {
            cost += cum.abs() * (events[i + 1].0 - events[i].0);
        }
    }
    cost
}

/// Optimal transport between two mixtures on a common domain via min-cost
/// flow on the complete bipartite graph. Returns the cost and the plan.
pub fn transport_general(
    a: &SpikeMixture,
    b: &SpikeMixture,
    metric: GroundMetric,
) -> Result<(f64, TransportPlan)> {
    if a.domain != b.domain {
        return Err(Error::DomainMismatch(
            a.domain.kind_name().into(),
            b.domain.kind_name().into(),
        ));
    }
    if a.k() > TRANSPORT_SIZE_CAP || b.k() > TRANSPORT_SIZE_CAP {
        return Err(Error::TooLarge(a.k(), b.k(), TRANSPORT_SIZE_CAP));
    }
    let plan = min_cost_transport(a.locations(), a.weights(), b.locations(), b.weights(), metric);
    Ok((plan.total_cost, plan))
}

/// Generalized transportation distance between signed mixtures with real
/// weights: the transport cost between the positive and negative parts of the
/// difference measure, with the L1 ground metric.
pub fn transport_signed(a: &SignedSpikeMixture, b: &SignedSpikeMixture) -> Result<f64> {
    let wa = a.real_weights()?;
    let wb = b.real_weights()?;
    if a.domain.dim() != b.domain.dim() {
        return Err(Error::DomainMismatch(
            a.domain.kind_name().into(),
            b.domain.kind_name().into(),
        ));
    }
    signed_difference_transport(a.locations(), &wa, b.locations(), &wb)
}

/// Transportation distance between complex-weighted mixtures: the signed
/// transport of the real parts plus the signed transport of the imaginary
/// parts.
pub fn transport_complex(a: &SignedSpikeMixture, b: &SignedSpikeMixture) -> Result<f64> {
    if a.domain.dim() != b.domain.dim() {
        return Err(Error::DomainMismatch(
            a.domain.kind_name().into(),
            b.domain.kind_name().into(),
        ));
    }
    let re_a: Vec<f64> = a.weights().iter().map(|w| w.re).collect();
    let re_b: Vec<f64> = b.weights().iter().map(|w| w.re).collect();
    let im_a: Vec<f64> = a.weights().iter().map(|w| w.im).collect();
    let im_b: Vec<f64> = b.weights().iter().map(|w| w.im).collect();
    let t_re = signed_difference_transport(a.locations(), &re_a, b.locations(), &re_b)?;
    let t_im = signed_difference_transport(a.locations(), &im_a, b.locations(), &im_b)?;
    Ok(t_re + t_im)
}

/// Transport between the positive and negative parts of the difference of two
/// real-weighted atomic measures with equal total mass.
pub(crate) fn signed_difference_transport(
    xa: &[Vec<f64>],
    wa: &[f64],
    xb: &[Vec<f64>],
    wb: &[f64],
) -> Result<f64> {
    let sa: f64 = wa.iter().sum();
    let sb: f64 = wb.iter().sum();
    if (sa - sb).abs() > 1e-6 {
        return Err(Error::BadInput(format!(
            "signed transport needs equal total masses, got {sa} vs {sb}"
        )));
    }
    // Difference measure on the merged support; exact-duplicate points merge.
    let mut atoms: Vec<(Vec<f64>, f64)> = Vec::with_capacity(xa.len() + xb.len());
    for (x, &w) in xa.iter().zip(wa) {
        atoms.push((x.clone(), w));
    }
    for (x, &w) in xb.iter().zip(wb) {
        atoms.push((x.clone(), -w));
    }
    atoms.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(atoms.len());
    for (x, w) in atoms {
        match merged.last_mut() {
            Some((px, pw)) if *px == x => *pw += w,
            _ => merged.push((x, w)),
        }
    }
    let dust = 1e-15;
    let mut pos_x = Vec::new();
    let mut pos_w = Vec::new();
    let mut neg_x = Vec::new();
    let mut neg_w = Vec::new();
    for (x, w) in merged {
        if w > dust {
            pos_x.push(x);
            pos_w.push(w);
        } else if w < -dust {
            neg_x.push(x);
            neg_w.push(-w);
        }
    }
    if pos_w.is_empty() || neg_w.is_empty() {
        return Ok(0.0);
    }
    // Rebalance rounding dust so the flow fully drains.
    let p: f64 = pos_w.iter().sum();
    let n: f64 = neg_w.iter().sum();
    let scale = p / n;
    for w in &mut neg_w {
        *w *= scale;
    }
    let plan = min_cost_transport(&pos_x, &pos_w, &neg_x, &neg_w, GroundMetric::L1);
    Ok(plan.total_cost)
}

/// Closest probability weight vector on the same support, in signed-transport
/// distance: each unit of genuinely negative mass is routed to positive
/// spikes (capped by their weights) at minimum L1 cost, and cancelled.
pub fn repair_negative_weights(m: &SignedSpikeMixture) -> Result<SpikeMixture> {
    let w = m.real_weights()?;
    repair_weights_raw(m.domain().clone(), m.locations().to_vec(), &w)
}

/// Repair on raw parts. Unlike the typed entry point this tolerates weight
/// vectors whose sum carries summation dust (ill-conditioned regressions can
/// produce huge cancelling weights); the final renormalization restores an
/// exact unit sum.
pub(crate) fn repair_weights_raw(domain: Domain, locations: Vec<Vec<f64>>, w: &[f64]) -> Result<SpikeMixture> {
    let k = w.len();
    let mut pos_idx = Vec::new();
    let mut neg_idx = Vec::new();
    for (i, &wi) in w.iter().enumerate() {
        if wi > WEIGHT_TOL {
            pos_idx.push(i);
        } else if wi < -WEIGHT_TOL {
            neg_idx.push(i);
        }
    }
    if pos_idx.is_empty() {
        return Err(Error::Infeasible);
    }
    let mut out = vec![0.0; k];
    for &i in &pos_idx {
        out[i] = w[i];
    }
    if !neg_idx.is_empty() {
        let supplies: Vec<f64> = neg_idx.iter().map(|&i| -w[i]).collect();
        let caps: Vec<f64> = pos_idx.iter().map(|&i| w[i]).collect();
        let sources: Vec<Vec<f64>> = neg_idx.iter().map(|&i| locations[i].clone()).collect();
        let sinks: Vec<Vec<f64>> = pos_idx.iter().map(|&i| locations[i].clone()).collect();
        let flow = min_cost_flow_capped(&sources, &supplies, &sinks, &caps, GroundMetric::L1)?;
        for mv in &flow.moves {
            out[pos_idx[mv.sink]] -= mv.mass;
        }
    }
    for x in &mut out {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = out.iter().sum();
    if total <= 0.0 {
        return Err(Error::Infeasible);
    }
    for x in &mut out {
        *x /= total;
    }
    SpikeMixture::new(domain, locations, out)
}

/// Min-cost transport between equal-mass atomic measures: successive shortest
/// paths with node potentials on the complete bipartite graph.
fn min_cost_transport(
    xs: &[Vec<f64>],
    ws: &[f64],
    ys: &[Vec<f64>],
    wy: &[f64],
    metric: GroundMetric,
) -> TransportPlan {
    min_cost_flow_capped(xs, ws, ys, wy, metric).expect("equal-mass transport is feasible")
}

/// Min-cost flow shipping all of `supplies` from `sources` into `sinks`
/// subject to per-sink capacities `caps` (total capacity >= total supply).
fn min_cost_flow_capped(
    sources: &[Vec<f64>],
    supplies: &[f64],
    sinks: &[Vec<f64>],
    caps: &[f64],
    metric: GroundMetric,
) -> Result<TransportPlan> {
    let m = sources.len();
    let n = sinks.len();
    let total_supply: f64 = supplies.iter().sum();
    let total_cap: f64 = caps.iter().sum();
    if total_cap < total_supply - 1e-9 {
        return Err(Error::Infeasible);
    }
    let mut cost = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            cost[i * n + j] = metric.dist(&sources[i], &sinks[j]);
        }
    }
    let mass_tol = 1e-15 * total_supply.max(1.0);
    let mut supply = supplies.to_vec();
    let mut cap = caps.to_vec();
    let mut flow = vec![0.0; m * n];
    // Potentials keep reduced costs nonnegative for Dijkstra.
    let mut pot = vec![0.0; m + n];
    // Each augmentation saturates a supply, a capacity, or a residual arc;
    // arcs can refill, so the hard stop scales with the arc count.
    let iteration_cap = m * n + 4 * (m + n) + 64;
    let mut iterations = 0usize;
    loop {
        let remaining: f64 = supply.iter().sum();
        if remaining <= mass_tol {
            break;
        }
        iterations += 1;
        if iterations > iteration_cap {
            break;
        }
        // Dijkstra over the residual graph, seeded at sources with supply.
        let inf = f64::INFINITY;
        let mut dist = vec![inf; m + n];
        let mut parent = vec![usize::MAX; m + n];
        let mut done = vec![false; m + n];
        for i in 0..m {
            if supply[i] > mass_tol {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = inf;
            for v in 0..m + n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                // Forward arcs source u -> each sink.
                for j in 0..n {
                    let rc = cost[u * n + j] + pot[u] - pot[m + j];
                    let nd = dist[u] + rc.max(0.0);
                    if nd < dist[m + j] {
                        dist[m + j] = nd;
                        parent[m + j] = u;
                    }
                }
            } else {
                let j = u - m;
                // Backward arcs sink -> source where flow exists.
                for i in 0..m {
                    if flow[i * n + j] > mass_tol {
                        let rc = -cost[i * n + j] + pot[m + j] - pot[i];
                        let nd = dist[u] + rc.max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            parent[i] = m + j;
                        }
                    }
                }
            }
        }
        // Cheapest reachable sink with free capacity.
        let mut sink = usize::MAX;
        let mut best = inf;
        for j in 0..n {
            if cap[j] > mass_tol && dist[m + j] < best {
                best = dist[m + j];
                sink = j;
            }
        }
        if sink == usize::MAX {
            break;
        }
        // Trace back to a seed source, collecting the bottleneck.
        let mut path = Vec::new();
        let mut v = m + sink;
        let mut bottleneck = cap[sink];
        while parent[v] != usize::MAX {
            let u = parent[v];
            path.push((u, v));
            if u >= m {
                // Backward arc (sink u-m) -> (source v): bounded by the flow.
                bottleneck = bottleneck.min(flow[v * n + (u - m)]);
            }
            v = u;
        }
        bottleneck = bottleneck.min(supply[v]);
        if bottleneck <= mass_tol {
            // Degenerate path; saturate and retry.
            supply[v] = 0.0;
            continue;
        }
        for &(u, t) in &path {
            if u < m {
                flow[u * n + (t - m)] += bottleneck;
            } else {
                flow[t * n + (u - m)] -= bottleneck;
            }
        }
        supply[v] -= bottleneck;
        cap[sink] -= bottleneck;
        for v in 0..m + n {
            if dist[v].is_finite() {
                pot[v] += dist[v];
            }
        }
    }
    let mut moves = Vec::new();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            if flow[i * n + j] > mass_tol {
                moves.push(TransportMove { source: i, sink: j, mass: flow[i * n + j] });
                total += flow[i * n + j] * cost[i * n + j];
            }
        }
    }
    Ok(TransportPlan { moves, total_cost: total })
}

/// How spike locations are spread when generating random mixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeparationMode {
    /// No constraint.
    Random,
    /// Pairwise L1 distance at least the given value.
    Separated(f64),
    /// All spikes at one location.
    Coincident,
}

/// Random mixture with weights bounded below by `min_weight`.
pub fn random_mixture(
    domain: &Domain,
    k: usize,
    mode: SeparationMode,
    min_weight: f64,
    rng: &mut CounterRng,
) -> Result<SpikeMixture> {
    if k == 0 {
        return Err(Error::BadInput("k must be at least 1".into()));
    }
    if min_weight < 0.0 || k as f64 * min_weight > 1.0 {
        return Err(Error::BadInput(format!("min_weight {min_weight} infeasible for k={k}")));
    }
    let weights = random_weights(k, min_weight, rng);
    let locations = match mode {
        SeparationMode::Coincident => {
            let p = random_point(domain, rng);
            vec![p; k]
        }
        SeparationMode::Random => (0..k).map(|_| random_point(domain, rng)).collect(),
        SeparationMode::Separated(zeta) => {
            let mut pts: Vec<Vec<f64>> = Vec::with_capacity(k);
            let mut attempts = 0;
            while pts.len() < k {
                attempts += 1;
                if attempts > 100_000 {
                    return Err(Error::BadInput(format!(
                        "cannot place {k} points with separation {zeta} in {}",
                        domain.kind_name()
                    )));
                }
                let p = random_point(domain, rng);
                if pts
                    .iter()
                    .all(|q| GroundMetric::L1.dist(&p, q) >= zeta)
                {
                    pts.push(p);
                }
            }
            pts
        }
    };
    SpikeMixture::new(domain.clone(), locations, weights)
}

/// Weights `min_weight + (1 - k*min_weight) * Dirichlet(1,...,1)`.
pub fn random_weights(k: usize, min_weight: f64, rng: &mut CounterRng) -> Vec<f64> {
    let mut e: Vec<f64> = (0..k).map(|_| -rng.uniform().max(f64::MIN_POSITIVE).ln()).collect();
    let s: f64 = e.iter().sum();
    let slack = 1.0 - k as f64 * min_weight;
    for x in &mut e {
        *x = min_weight + slack * (*x / s);
    }
    // Exact renormalization kills rounding dust in the sum.
    let t: f64 = e.iter().sum();
    for x in &mut e {
        *x /= t;
    }
    e
}

/// Uniform random point in a domain.
pub fn random_point(domain: &Domain, rng: &mut CounterRng) -> Vec<f64> {
    match *domain {
        Domain::UnitInterval => vec![rng.uniform()],
        Domain::UnitTriangle => {
            let (mut a, mut b) = (rng.uniform(), rng.uniform());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            vec![a, b]
        }
        Domain::Simplex { dim } => {
            let mut e: Vec<f64> = (0..dim).map(|_| -rng.uniform().max(f64::MIN_POSITIVE).ln()).collect();
            let s: f64 = e.iter().sum();
            for x in &mut e {
                *x /= s;
            }
            e
        }
        Domain::Box { dim, lo, hi } => (0..dim).map(|_| rng.uniform_in(lo, hi)).collect(),
        Domain::UnitBall { dim } => {
            let g: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r = rng.uniform().powf(1.0 / dim as f64);
            g.iter().map(|x| x / norm * r).collect()
        }
    }
}
