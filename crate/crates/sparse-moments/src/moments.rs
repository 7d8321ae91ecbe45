//! Moment algebra: exact moments of mixtures, Hankel/Vandermonde systems, the
//! real-to-complex conjugate moment transform, and moment distances.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixtures::SpikeMixture;

type C64 = Complex64;

/// Exact binomial coefficient in 64 bits; errors past C(64,32)-scale values
/// rather than silently losing precision.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(Error::BinomialOverflow(n, k));
        }
    }
    Ok(acc as u64)
}

/// 1-D moment vector `M_0..M_D` with its noise bound. `M_0` is pinned to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector1D {
    values: Vec<f64>,
    noise_bound: f64,
}

impl MomentVector1D {
    pub fn new(values: Vec<f64>, noise_bound: f64) -> Result<Self> {
        if values.is_empty() || values[0] != 1.0 {
            return Err(Error::BadInput("moment vector must start with M_0 = 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || !noise_bound.is_finite() || noise_bound < 0.0 {
            return Err(Error::BadInput("non-finite moment data".into()));
        }
        Ok(MomentVector1D { values, noise_bound })
    }

    /// Highest stored degree D.
    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    /// Largest spike count recoverable from this vector (needs `M_0..M_{2k-1}`).
    pub fn spike_capacity(&self) -> usize {
        self.values.len() / 2
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, t: usize) -> f64 {
        self.values[t]
    }

    /// `|M_t| <= 1 + noise_bound` for mixtures supported in `[0,1]`.
    pub fn in_unit_range(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= 1.0 + self.noise_bound + 1e-12)
    }
}

/// Dense 2-D mixed-moment grid `M_{i,j}` for all `i + j <= max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentGrid2D {
    max_degree: usize,
    values: Vec<f64>,
    noise_bound: f64,
}

fn tri_offset(max_degree: usize, i: usize) -> usize {
    // Row r holds max_degree + 1 - r entries.
    i * (max_degree + 1) - i * (i + 1) / 2 + i
}

impl MomentGrid2D {
    /// Build from an entry function over `i + j <= max_degree`.
    pub fn from_fn(max_degree: usize, noise_bound: f64, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::new();
        for i in 0..=max_degree {
            for j in 0..=max_degree - i {
                values.push(f(i, j));
            }
        }
        let grid = MomentGrid2D { max_degree, values, noise_bound };
        if grid.get(0, 0) != 1.0 {
            return Err(Error::BadInput("moment grid must have M_00 = 1".into()));
        }
        if grid.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadInput("non-finite moment data".into()));
        }
        Ok(grid)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Spike count this grid supports (`max_degree = 2k - 1`).
    pub fn spike_capacity(&self) -> usize {
        (self.max_degree + 1) / 2
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i + j <= self.max_degree);
        self.values[tri_offset(self.max_degree, i) + j]
    }

    pub fn try_get(&self, i: usize, j: usize) -> Result<f64> {
        if i + j > self.max_degree {
            return Err(Error::MissingMoment(i, j));
        }
        Ok(self.get(i, j))
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.max_degree).flat_map(move |i| (0..=self.max_degree - i).map(move |j| (i, j)))
    }
}

/// Conjugate moments `G_{i,j} = sum_t w_t conj(beta_t)^i beta_t^j` stored for
/// `0 <= i <= k`, `0 <= j <= k-1`; the missing column `j = k` is reached via
/// the symmetry `G_{i,j} = conj(G_{j,i})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateMomentGrid {
    k: usize,
    values: Vec<C64>, // (k+1) rows, k columns, row-major
    noise_bound: f64,
}

impl ConjugateMomentGrid {
    pub fn from_fn(k: usize, noise_bound: f64, mut f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        if k == 0 {
            return Err(Error::BadInput("conjugate grid needs k >= 1".into()));
        }
        let mut values = Vec::with_capacity((k + 1) * k);
        for i in 0..=k {
            for j in 0..k {
                values.push(f(i, j));
            }
        }
        let g = ConjugateMomentGrid { k, values, noise_bound };
        if (g.get(0, 0) - C64::new(1.0, 0.0)).norm() != 0.0 {
            return Err(Error::BadInput("conjugate grid must have G_00 = 1".into()));
        }
        Ok(g)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    /// `G_{i,j}` for `0 <= i <= k`, `0 <= j <= k`, `(i,j) != (k,k)`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if j < self.k {
            self.values[i * self.k + j]
        } else {
            assert!(j == self.k && i < self.k, "index ({i},{j}) out of range");
            self.values[self.k * self.k + i].conj()
        }
    }

    /// Max violation of the Hermitian symmetry over stored index pairs.
    pub fn symmetry_error(&self) -> f64 {
        let mut err = 0.0f64;
        for i in 0..=self.k.min(self.k - 1) {
            for j in 0..self.k.min(i + 1) {
                err = err.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        err
    }
}

/// Exact moments `M_t = sum_i w_i x_i^t` of a weighted point set.
pub(crate) fn raw_moments_1d(points: &[f64], weights: &[f64], max_degree: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_degree + 1];
    for (&x, &w) in points.iter().zip(weights) {
        let mut p = 1.0;
        for m in out.iter_mut() {
            *m += w * p;
            p *= x;
        }
    }
    out
}

pub(crate) fn raw_moments_2d(
    points: &[(f64, f64)],
    weights: &[f64],
    max_degree: usize,
) -> Vec<((usize, usize), f64)> {
    let mut out = Vec::new();
    for i in 0..=max_degree {
        for j in 0..=max_degree - i {
            let mut m = 0.0;
            for (&(x, y), &w) in points.iter().zip(weights) {
                m += w * x.powi(i as i32) * y.powi(j as i32);
            }
            out.push(((i, j), m));
        }
    }
    out
}

/// Moments `M_0..M_K` of a mixture on `[0,1]`; `M_0` is set to exactly 1.
pub fn moments_1d(m: &SpikeMixture, max_degree: usize) -> Result<MomentVector1D> {
    if m.domain().dim() != 1 {
        return Err(Error::BadInput("moments_1d needs a 1-dimensional mixture".into()));
    }
    if max_degree < 1 {
        return Err(Error::BadInput("max_degree must be >= 1".into()));
    }
    let mut values = raw_moments_1d(&m.scalar_locations(), m.weights(), max_degree);
    values[0] = 1.0;
    MomentVector1D::new(values, 0.0)
}

/// Mixed moments `M_{i,j}` for `i + j <= max_degree` of a planar mixture;
/// `M_{0,0}` is set to exactly 1.
pub fn moments_2d(m: &SpikeMixture, max_degree: usize) -> Result<MomentGrid2D> {
    if m.domain().dim() != 2 {
        return Err(Error::BadInput("moments_2d needs a 2-dimensional mixture".into()));
    }
    if max_degree < 1 {
        return Err(Error::BadInput("max_degree must be >= 1".into()));
    }
    let pts: Vec<(f64, f64)> = m.locations().iter().map(|p| (p[0], p[1])).collect();
    let raw = raw_moments_2d(&pts, m.weights(), max_degree);
    let mut map = BTreeMap::new();
    for ((i, j), v) in raw {
        map.insert((i, j), v);
    }
    MomentGrid2D::from_fn(max_degree, 0.0, |i, j| if (i, j) == (0, 0) { 1.0 } else { map[&(i, j)] })
}

const I_POWERS: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

fn i_pow(m: usize) -> C64 {
    I_POWERS[m % 4]
}

fn neg_i_pow(m: usize) -> C64 {
    I_POWERS[(4 - (m % 4)) % 4]
}

/// Conjugate moments of the complex correspondence `beta = x + iy` from real
/// mixed moments:
/// `G_{i,j} = sum_{p<=i} sum_{q<=j} C(i,p) C(j,q) (-i)^(i-p) i^(j-q) M_{p+q, i+j-p-q}`.
///
/// Needs the grid complete for total degree `2k - 1` where `k` is the grid's
/// spike capacity.
pub fn complex_transform(m: &MomentGrid2D) -> Result<ConjugateMomentGrid> {
    complex_transform_at(m, m.spike_capacity())
}

/// [`complex_transform`] truncated to a caller-chosen spike count `k`.
pub fn complex_transform_at(m: &MomentGrid2D, k: usize) -> Result<ConjugateMomentGrid> {
    if k == 0 || m.max_degree() < 2 * k - 1 {
        return Err(Error::MissingMoment(0, m.max_degree() + 1));
    }
    let mut values = vec![C64::new(0.0, 0.0); (k + 1) * k];
    for i in 0..=k {
        for j in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for p in 0..=i {
                for q in 0..=j {
                    let coeff = binomial(i, p)? as f64 * binomial(j, q)? as f64;
                    let phase = neg_i_pow(i - p) * i_pow(j - q);
                    acc += coeff * phase * m.try_get(p + q, i + j - p - q)?;
                }
            }
            values[i * k + j] = acc;
        }
    }
    values[0] = C64::new(1.0, 0.0);
    ConjugateMomentGrid::from_fn(k, m.noise_bound(), |i, j| values[i * k + j])
}

/// Conjugate moments computed directly from a planar mixture, as
/// `sum_t w_t conj(beta_t)^i beta_t^j`. Reference route for the transform.
pub fn conjugate_moments_direct(m: &SpikeMixture, k: usize) -> Result<ConjugateMomentGrid> {
    if m.domain().dim() != 2 {
        return Err(Error::BadInput("need a 2-dimensional mixture".into()));
    }
    let betas: Vec<C64> = m.locations().iter().map(|p| C64::new(p[0], p[1])).collect();
    let ws = m.weights().to_vec();
    ConjugateMomentGrid::from_fn(k, 0.0, |i, j| {
        if (i, j) == (0, 0) {
            return C64::new(1.0, 0.0);
        }
        betas
            .iter()
            .zip(&ws)
            .map(|(&b, &w)| w * b.conj().powu(i as u32) * b.powu(j as u32))
            .sum()
    })
}

/// Square linear system `A x + b = 0` built from moments; `A` is Hankel in the
/// real case (`A_{i,j} = M_{i+j}`) and the conjugate-moment matrix in the
/// complex case (`A_{i,j} = G_{i,j}`).
#[derive(Debug, Clone, PartialEq)]
pub struct HankelSystem<T> {
    pub k: usize,
    /// Row-major k x k matrix.
    pub a: Vec<T>,
    pub b: Vec<T>,
}

impl HankelSystem<f64> {
    /// Max violation of the Hankel anti-diagonal symmetry (exact 0 by
    /// construction).
    pub fn hankel_symmetry_error(&self) -> f64 {
        let k = self.k;
        let mut err = 0.0f64;
        for i in 0..k - 1 {
            for j in 1..k {
                err = err.max((self.a[i * k + j] - self.a[(i + 1) * k + (j - 1)]).abs());
            }
        }
        err
    }
}

/// `A_{i,j} = M_{i+j}`, `b_i = M_{i+k}` for `i, j in [0, k)`.
pub fn build_hankel(m: &MomentVector1D, k: usize) -> Result<HankelSystem<f64>> {
    if k < 1 || m.degree() < 2 * k - 1 {
        return Err(Error::BadInput(format!(
            "need moments up to degree {} for k={k}, have {}",
            2 * k - 1,
            m.degree()
        )));
    }
    let mut a = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            a[i * k + j] = m.get(i + j);
        }
    }
    let b = (0..k).map(|i| m.get(i + k)).collect();
    Ok(HankelSystem { k, a, b })
}

/// Complex analog from conjugate moments: `A_{i,j} = G_{i,j}`, `b_i = G_{i,k}`.
pub fn build_hankel_complex(g: &ConjugateMomentGrid) -> HankelSystem<C64> {
    let k = g.k();
    let mut a = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            a[i * k + j] = g.get(i, j);
        }
    }
    let b = (0..k).map(|i| g.get(i, k)).collect();
    HankelSystem { k, a, b }
}

/// Vandermonde matrix `V_{t,j} = nodes_j^t`, `t in [0, rows)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VandermondeSystem<T> {
    pub rows: usize,
    pub k: usize,
    /// Row-major rows x k matrix.
    pub v: Vec<T>,
}

pub fn build_vandermonde(nodes: &[f64], rows: usize) -> VandermondeSystem<f64> {
    let k = nodes.len();
    let mut v = vec![0.0; rows * k];
    for (j, &x) in nodes.iter().enumerate() {
        let mut p = 1.0;
        for t in 0..rows {
            v[t * k + j] = p;
            p *= x;
        }
    }
    VandermondeSystem { rows, k, v }
}

pub fn build_vandermonde_complex(nodes: &[C64], rows: usize) -> VandermondeSystem<C64> {
    let k = nodes.len();
    let mut v = vec![C64::new(0.0, 0.0); rows * k];
    for (j, &x) in nodes.iter().enumerate() {
        let mut p = C64::new(1.0, 0.0);
        for t in 0..rows {
            v[t * k + j] = p;
            p *= x;
        }
    }
    VandermondeSystem { rows, k, v }
}

/// L-infinity distance between 1-D moment vectors over degrees `<= max_degree`.
pub fn moment_distance_1d(a: &MomentVector1D, b: &MomentVector1D, max_degree: usize) -> Result<f64> {
    if a.degree() < max_degree || b.degree() < max_degree {
        return Err(Error::BadInput("moment vectors shorter than requested degree".into()));
    }
    Ok((0..=max_degree).map(|t| (a.get(t) - b.get(t)).abs()).fold(0.0, f64::max))
}

/// L-infinity distance between 2-D moment grids over total degrees
/// `<= max_degree`.
pub fn moment_distance_2d(a: &MomentGrid2D, b: &MomentGrid2D, max_degree: usize) -> Result<f64> {
    if a.max_degree() < max_degree || b.max_degree() < max_degree {
        return Err(Error::BadInput("moment grids smaller than requested degree".into()));
    }
    let mut err = 0.0f64;
    for i in 0..=max_degree {
        for j in 0..=max_degree - i {
            err = err.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    Ok(err)
}

/// Moment container used by the file schema.
#[derive(Debug, Clone, PartialEq)]
pub enum Moments {
    OneD(MomentVector1D),
    TwoD(MomentGrid2D),
    Conjugate(ConjugateMomentGrid),
}

#[derive(Serialize, Deserialize)]
struct RawMomentFile {
    k: usize,
    kind: String,
    noise_bound: f64,
    values: BTreeMap<String, serde_json::Value>,
}

/// Serialize to the moment file schema:
/// `{"k", "kind": "1d"|"2d"|"conjugate", "noise_bound", "values": {index: value}}`
/// with complex values as `[re, im]` pairs.
pub fn moments_to_json(m: &Moments) -> serde_json::Value {
    let raw = match m {
        Moments::OneD(v) => RawMomentFile {
            k: v.spike_capacity(),
            kind: "1d".into(),
            noise_bound: v.noise_bound(),
            values: v
                .values()
                .iter()
                .enumerate()
                .map(|(t, &x)| (t.to_string(), serde_json::json!(x)))
                .collect(),
        },
        Moments::TwoD(g) => RawMomentFile {
            k: g.spike_capacity(),
            kind: "2d".into(),
            noise_bound: g.noise_bound(),
            values: g
                .indices()
                .map(|(i, j)| (format!("{i},{j}"), serde_json::json!(g.get(i, j))))
                .collect(),
        },
        Moments::Conjugate(g) => RawMomentFile {
            k: g.k(),
            kind: "conjugate".into(),
            noise_bound: g.noise_bound(),
            values: (0..=g.k())
                .flat_map(|i| (0..g.k()).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let z = g.get(i, j);
                    (format!("{i},{j}"), serde_json::json!([z.re, z.im]))
                })
                .collect(),
        },
    };
    serde_json::to_value(raw).expect("moment file serialization")
}

pub fn moments_from_json(v: &serde_json::Value) -> Result<Moments> {
    let raw: RawMomentFile =
        serde_json::from_value(v.clone()).map_err(|e| Error::BadInput(format!("moment file: {e}")))?;
    let parse_real = |v: &serde_json::Value, key: &str| -> Result<f64> {
        v.as_f64().ok_or_else(|| Error::BadInput(format!("value at {key} is not a number")))
    };
    match raw.kind.as_str() {
        "1d" => {
            let len = raw.values.len();
            let mut values = vec![f64::NAN; len];
            for (key, val) in &raw.values {
                let t: usize = key.parse().map_err(|_| Error::BadInput(format!("bad index {key}")))?;
                if t >= len {
                    return Err(Error::BadInput(format!("non-contiguous moment index {t}")));
                }
                values[t] = parse_real(val, key)?;
            }
            MomentVector1D::new(values, raw.noise_bound).map(Moments::OneD)
        }
        "2d" => {
            let max_degree = 2 * raw.k - 1;
            let mut map = BTreeMap::new();
            for (key, val) in &raw.values {
                let (i, j) = parse_pair(key)?;
                map.insert((i, j), parse_real(val, key)?);
            }
            for i in 0..=max_degree {
                for j in 0..=max_degree - i {
                    if !map.contains_key(&(i, j)) {
                        return Err(Error::MissingMoment(i, j));
                    }
                }
            }
            MomentGrid2D::from_fn(max_degree, raw.noise_bound, |i, j| map[&(i, j)]).map(Moments::TwoD)
        }
        "conjugate" => {
            let k = raw.k;
            let mut map = BTreeMap::new();
            for (key, val) in &raw.values {
                let (i, j) = parse_pair(key)?;
                let pair = val
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::BadInput(format!("conjugate value at {key} must be [re, im]")))?;
                let re = pair[0].as_f64().ok_or_else(|| Error::BadInput("bad re".into()))?;
                let im = pair[1].as_f64().ok_or_else(|| Error::BadInput("bad im".into()))?;
                map.insert((i, j), C64::new(re, im));
            }
            for i in 0..=k {
                for j in 0..k {
                    if !map.contains_key(&(i, j)) {
                        return Err(Error::MissingMoment(i, j));
                    }
                }
            }
            ConjugateMomentGrid::from_fn(k, raw.noise_bound, |i, j| map[&(i, j)]).map(Moments::Conjugate)
        }
        other => Err(Error::BadInput(format!("unknown moment kind {other:?}"))),
    }
}

fn parse_pair(key: &str) -> Result<(usize, usize)> {
    let mut it = key.split(',');
    let i = it
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::BadInput(format!("bad index {key}")))?;
    let j = it
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::BadInput(format!("bad index {key}")))?;
    if it.next().is_some() {
        return Err(Error::BadInput(format!("bad index {key}")));
    }
    Ok((i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::Domain;
    use crate::rng::CounterRng;

    fn interval(locs: &[f64], ws: &[f64]) -> SpikeMixture {
        SpikeMixture::new(
            Domain::UnitInterval,
            locs.iter().map(|&x| vec![x]).collect(),
            ws.to_vec(),
        )
        .unwrap()
    }

    fn triangle(locs: &[[f64; 2]], ws: &[f64]) -> SpikeMixture {
        SpikeMixture::new(
            Domain::UnitTriangle,
            locs.iter().map(|p| p.to_vec()).collect(),
            ws.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn binomial_exact_and_overflow() {
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(64, 32).unwrap(), 1832624140942590534);
        assert_eq!(binomial(3, 5).unwrap(), 0);
        assert!(binomial(128, 64).is_err());
    }

    #[test]
    fn moments_1d_examples() {
        let m = moments_1d(&interval(&[1.0], &[1.0]), 5).unwrap();
        for t in 0..=5 {
            assert!((m.get(t) - 1.0).abs() < 1e-15);
        }
        let m = moments_1d(&interval(&[0.0, 1.0], &[0.5, 0.5]), 4).unwrap();
        assert_eq!(m.get(0), 1.0);
        for t in 1..=4 {
            assert!((m.get(t) - 0.5).abs() < 1e-15);
        }
        // Hand expansion: M = (1, 1/2, 5/16, 7/32).
        let m = moments_1d(&interval(&[0.25, 0.75], &[0.5, 0.5]), 3).unwrap();
        assert!((m.get(1) - 0.5).abs() < 1e-15);
        assert!((m.get(2) - 5.0 / 16.0).abs() < 1e-15);
        assert!((m.get(3) - 7.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn moments_1d_matches_bruteforce_sum() {
        let mut rng = CounterRng::new(17);
        for _ in 0..50 {
            let k = 1 + rng.below(5);
            let m = crate::mixtures::random_mixture(
                &Domain::UnitInterval,
                k,
                crate::mixtures::SeparationMode::Random,
                0.0,
                &mut rng,
            )
            .unwrap();
            let mv = moments_1d(&m, 2 * k - 1).unwrap();
            for t in 1..2 * k {
                let brute: f64 = m
                    .scalar_locations()
                    .iter()
                    .zip(m.weights())
                    .map(|(&x, &w)| w * x.powi(t as i32))
                    .sum();
                assert!((mv.get(t) - brute).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn moments_2d_examples() {
        let g = moments_2d(&triangle(&[[1.0, 0.0]], &[1.0]), 3).unwrap();
        for i in 0..=3usize {
            for j in 0..=3 - i {
                let expect = if j == 0 { 1.0 } else { 0.0 };
                assert!((g.get(i, j) - expect).abs() < 1e-15);
            }
        }
        let g = moments_2d(&triangle(&[[0.5, 0.5]], &[1.0]), 3).unwrap();
        for i in 0..=3usize {
            for j in 0..=3 - i {
                assert!((g.get(i, j) - 0.5f64.powi((i + j) as i32)).abs() < 1e-15);
            }
        }
        let g = moments_2d(&triangle(&[[0.25, 0.0], [0.0, 0.75]], &[0.5, 0.5]), 3).unwrap();
        assert_eq!(g.get(1, 1), 0.0);
        assert!((g.get(2, 0) - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn complex_transform_low_order() {
        let m = triangle(&[[0.2, 0.3], [0.4, 0.1]], &[0.6, 0.4]);
        let grid = moments_2d(&m, 3).unwrap();
        let g = complex_transform(&grid).unwrap();
        assert_eq!(g.get(0, 0), C64::new(1.0, 0.0));
        // G_{0,1} = M_10 + i M_01.
        let expect = C64::new(grid.get(1, 0), grid.get(0, 1));
        assert!((g.get(0, 1) - expect).norm() < 1e-14);
        // G_{1,1} = M_20 + M_02 (cross terms cancel).
        let expect = C64::new(grid.get(2, 0) + grid.get(0, 2), 0.0);
        assert!((g.get(1, 1) - expect).norm() < 1e-14);
    }

    #[test]
    fn complex_transform_matches_direct_conjugate_moments() {
        let mut rng = CounterRng::new(23);
        for _ in 0..200 {
            let k = 1 + rng.below(5);
            let m = crate::mixtures::random_mixture(
                &Domain::UnitTriangle,
                k,
                crate::mixtures::SeparationMode::Random,
                0.0,
                &mut rng,
            )
            .unwrap();
            let grid = moments_2d(&m, 2 * k - 1).unwrap();
            let via_transform = complex_transform(&grid).unwrap();
            let direct = conjugate_moments_direct(&m, k).unwrap();
            for i in 0..=k {
                for j in 0..k {
                    let d = (via_transform.get(i, j) - direct.get(i, j)).norm();
                    assert!(d < 1e-10, "k={k} ({i},{j}): {d}");
                }
            }
            assert!(via_transform.symmetry_error() < 1e-12);
        }
    }

    #[test]
    fn conjugate_noise_amplification_bound() {
        // Noise amplification bound: |G'_{i,j} - G_{i,j}| <= 2^(i+j) * xi.
        let mut rng = CounterRng::new(31);
        let xi = 1e-6;
        for _ in 0..20 {
            let m = crate::mixtures::random_mixture(
                &Domain::UnitTriangle,
                3,
                crate::mixtures::SeparationMode::Random,
                0.0,
                &mut rng,
            )
            .unwrap();
            let exact = moments_2d(&m, 5).unwrap();
            let noisy = MomentGrid2D::from_fn(5, xi, |i, j| {
                if (i, j) == (0, 0) {
                    1.0
                } else {
                    exact.get(i, j) + xi * (2.0 * rng.uniform() - 1.0)
                }
            })
            .unwrap();
            let g_exact = complex_transform(&exact).unwrap();
            let g_noisy = complex_transform(&noisy).unwrap();
            for i in 0..=3usize {
                for j in 0..3 {
                    let d = (g_noisy.get(i, j) - g_exact.get(i, j)).norm();
                    assert!(d <= 2.0f64.powi((i + j) as i32) * xi * (1.0 + 1e-9));
                    assert!(g_noisy.get(i, j).norm() <= 1.0 + 2.0f64.powi((i + j) as i32) * xi + 1e-9);
                }
            }
        }
    }

    #[test]
    fn hankel_examples() {
        let m = MomentVector1D::new(vec![1.0, 0.3], 0.0).unwrap();
        let h = build_hankel(&m, 1).unwrap();
        assert_eq!(h.a, vec![1.0]);
        assert_eq!(h.b, vec![0.3]);

        let m = MomentVector1D::new(vec![1.0, 0.5, 5.0 / 16.0, 7.0 / 32.0], 0.0).unwrap();
        let h = build_hankel(&m, 2).unwrap();
        assert_eq!(h.a, vec![1.0, 0.5, 0.5, 5.0 / 16.0]);
        assert_eq!(h.b, vec![5.0 / 16.0, 7.0 / 32.0]);
        assert_eq!(h.hankel_symmetry_error(), 0.0);

        // Characteristic identity A c + b = 0 with c = (3/16, -1).
        let c = [3.0 / 16.0, -1.0];
        for i in 0..2 {
            let r = h.a[i * 2] * c[0] + h.a[i * 2 + 1] * c[1] + h.b[i];
            assert_eq!(r, 0.0, "row {i} residual {r}");
        }
    }

    #[test]
    fn hankel_identity_random_mixtures() {
        let mut rng = CounterRng::new(5);
        for _ in 0..200 {
            let k = 1 + rng.below(6);
            let m = crate::mixtures::random_mixture(
                &Domain::UnitInterval,
                k,
                crate::mixtures::SeparationMode::Random,
                0.0,
                &mut rng,
            )
            .unwrap();
            let mv = moments_1d(&m, 2 * k - 1).unwrap();
            let h = build_hankel(&mv, k).unwrap();
            // c = coefficients of prod (x - alpha_i), by convolution.
            let mut poly = vec![1.0];
            for &a in &m.scalar_locations() {
                let mut next = vec![0.0; poly.len() + 1];
                for (i, &p) in poly.iter().enumerate() {
                    next[i + 1] += p;
                    next[i] -= a * p;
                }
                poly = next;
            }
            let coeffs = &poly[..k];
            for i in 0..k {
                let mut r = h.b[i];
                for j in 0..k {
                    r += h.a[i * k + j] * coeffs[j];
                }
                assert!(r.abs() < 1e-10, "k={k} row {i}: residual {r}");
            }
        }
    }

    #[test]
    fn vandermonde_examples() {
        let v = build_vandermonde(&[0.0, 1.0], 4);
        assert_eq!((0..4).map(|t| v.v[t * 2]).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!((0..4).map(|t| v.v[t * 2 + 1]).collect::<Vec<_>>(), vec![1.0, 1.0, 1.0, 1.0]);
        let v = build_vandermonde(&[0.5], 2);
        assert_eq!(v.v, vec![1.0, 0.5]);
        // det of the square top block for nodes (1,2,3) is prod_{p<q}(a_q-a_p) = 2.
        let v = build_vandermonde(&[1.0, 2.0, 3.0], 3);
        let m = &v.v;
        let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6]);
        assert!((det - 2.0).abs() < 1e-12);
    }

    #[test]
    fn moment_distance_examples() {
        let a = MomentVector1D::new(vec![1.0, 0.5], 0.0).unwrap();
        assert_eq!(moment_distance_1d(&a, &a, 1).unwrap(), 0.0);
        let b = MomentVector1D::new(vec![1.0, 0.25], 0.0).unwrap();
        assert_eq!(moment_distance_1d(&a, &b, 1).unwrap(), 0.25);

        let g1 = MomentGrid2D::from_fn(3, 0.0, |i, j| if (i, j) == (0, 0) { 1.0 } else { 0.1 }).unwrap();
        let g2 = MomentGrid2D::from_fn(3, 0.0, |i, j| {
            if (i, j) == (0, 0) {
                1.0
            } else if (i, j) == (1, 1) {
                0.4
            } else {
                0.1
            }
        })
        .unwrap();
        assert!((moment_distance_2d(&g1, &g2, 3).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn moment_file_roundtrip() {
        let m = moments_1d(&interval(&[0.25, 0.75], &[0.5, 0.5]), 3).unwrap();
        let v = moments_to_json(&Moments::OneD(m.clone()));
        match moments_from_json(&v).unwrap() {
            Moments::OneD(back) => assert_eq!(m, back),
            _ => panic!("wrong kind"),
        }
        let g = moments_2d(&triangle(&[[0.25, 0.0], [0.0, 0.75]], &[0.5, 0.5]), 3).unwrap();
        let v = moments_to_json(&Moments::TwoD(g.clone()));
        match moments_from_json(&v).unwrap() {
            Moments::TwoD(back) => assert_eq!(g, back),
            _ => panic!("wrong kind"),
        }
        let cg = complex_transform(&g).unwrap();
        let v = moments_to_json(&Moments::Conjugate(cg.clone()));
        match moments_from_json(&v).unwrap() {
            Moments::Conjugate(back) => assert_eq!(cg, back),
            _ => panic!("wrong kind"),
        }
        // Missing entry is rejected.
        let mut broken = moments_to_json(&Moments::TwoD(g));
        broken["values"].as_object_mut().unwrap().remove("1,1");
        assert!(matches!(moments_from_json(&broken), Err(Error::MissingMoment(1, 1))));
    }
}
