//! Concrete moment oracles: an exact-plus-noise synthetic oracle over a
//! hidden mixture, the topic-model K-snapshot sampler with unbiased moment
//! estimators, and Gaussian location-mixture estimators built on Hermite
//! polynomials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::highdim::{MomentOracle, ProjectionQuery};
use crate::linalg;
use crate::mixtures::SpikeMixture;
use crate::moments::{binomial, raw_moments_1d, raw_moments_2d, MomentGrid2D, MomentVector1D};
use crate::rng::{fingerprint, CounterRng};

/// Noise added by the synthetic oracle on top of exact projected moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "xi", rename_all = "snake_case")]
pub enum NoiseMode {
    None,
    /// Independent uniform noise in `[-xi, xi]` per entry.
    Uniform(f64),
    /// Worst-case-style `+-xi` with alternating signs by entry index.
    AdversarialSign(f64),
}

impl NoiseMode {
    pub fn bound(&self) -> f64 {
        match *self {
            NoiseMode::None => 0.0,
            NoiseMode::Uniform(x) | NoiseMode::AdversarialSign(x) => x,
        }
    }
}

/// Oracle over a hidden ground-truth mixture: exact projected moments plus
/// per-entry noise. The zeroth moment is always exact.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    truth: SpikeMixture,
    noise: NoiseMode,
    rng_seed: u64,
}

impl SyntheticOracle {
    pub fn new(truth: SpikeMixture, noise: NoiseMode, rng_seed: u64) -> Result<Self> {
        if let NoiseMode::Uniform(x) | NoiseMode::AdversarialSign(x) = noise {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::BadInput("noise magnitude must be finite and nonnegative".into()));
            }
        }
        Ok(SyntheticOracle { truth, noise, rng_seed })
    }

    pub fn truth(&self) -> &SpikeMixture {
        &self.truth
    }

    fn noise_stream(&self, query: &ProjectionQuery) -> CounterRng {
        let mut data: Vec<f64> = Vec::new();
        for col in &query.columns {
            data.extend_from_slice(col);
        }
        data.extend_from_slice(&query.shifts);
        data.push(query.max_degree as f64);
        CounterRng::stream(self.rng_seed, fingerprint(&data))
    }

    fn perturb(&self, idx: usize, rng: &mut CounterRng) -> f64 {
        match self.noise {
            NoiseMode::None => 0.0,
            NoiseMode::Uniform(x) => rng.uniform_in(-x, x),
            NoiseMode::AdversarialSign(x) => {
                if idx % 2 == 0 {
                    x
                } else {
                    -x
                }
            }
        }
    }
}

impl MomentOracle for SyntheticOracle {
    fn dim(&self) -> usize {
        self.truth.domain().dim()
    }

    fn noise_bound(&self) -> f64 {
        self.noise.bound()
    }

    fn moments_1d(&self, query: &ProjectionQuery) -> Result<MomentVector1D> {
        query.validate(self.dim())?;
        let pts: Vec<f64> = self.truth.locations().iter().map(|a| query.project_point(a)[0]).collect();
        let mut vals = raw_moments_1d(&pts, self.truth.weights(), query.max_degree);
        let mut rng = self.noise_stream(query);
        for (t, v) in vals.iter_mut().enumerate().skip(1) {
            *v += self.perturb(t, &mut rng);
        }
        vals[0] = 1.0;
        MomentVector1D::new(vals, self.noise.bound())
    }

    fn moments_2d(&self, query: &ProjectionQuery) -> Result<MomentGrid2D> {
        query.validate(self.dim())?;
        let pts: Vec<(f64, f64)> = self
            .truth
            .locations()
            .iter()
            .map(|a| {
                let p = query.project_point(a);
                (p[0], p[1])
            })
            .collect();
        let raw = raw_moments_2d(&pts, self.truth.weights(), query.max_degree);
        let map: std::collections::BTreeMap<(usize, usize), f64> = raw.into_iter().collect();
        let mut rng = self.noise_stream(query);
        let mut idx = 0;
        MomentGrid2D::from_fn(query.max_degree, self.noise.bound(), |i, j| {
            if (i, j) == (0, 0) {
                return 1.0;
            }
            idx += 1;
            map[&(i, j)] + self.perturb(idx, &mut rng)
        })
    }
}

/// Bag-of-words corpus: `n` documents of exactly `snapshot_len` words drawn
/// from a vocabulary `1..=vocab_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicCorpus {
    pub vocab_size: usize,
    pub snapshot_len: usize,
    pub docs: Vec<Vec<u32>>,
}

impl TopicCorpus {
    pub fn new(vocab_size: usize, snapshot_len: usize, docs: Vec<Vec<u32>>) -> Result<Self> {
        for doc in &docs {
            if doc.len() != snapshot_len {
                return Err(Error::BadInput("all documents must have the snapshot length".into()));
            }
            if doc.iter().any(|&w| w == 0 || w as usize > vocab_size) {
                return Err(Error::BadInput(format!("word ids must lie in 1..={vocab_size}")));
            }
        }
        Ok(TopicCorpus { vocab_size, snapshot_len, docs })
    }

    /// JSON-lines encoding: one document per line as an integer array, UTF-8,
    /// LF line endings.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.docs {
            out.push_str(&serde_json::to_string(doc).expect("doc serialization"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, vocab_size: usize) -> Result<Self> {
        let mut docs = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let doc: Vec<u32> =
                serde_json::from_str(line).map_err(|e| Error::BadInput(format!("corpus line: {e}")))?;
            docs.push(doc);
        }
        if docs.is_empty() {
            return Err(Error::BadInput("empty corpus".into()));
        }
        let snapshot_len = docs[0].len();
        TopicCorpus::new(vocab_size, snapshot_len, docs)
    }
}

fn sample_categorical(weights: &[f64], rng: &mut CounterRng) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Draws `n_docs` K-snapshots from a topic mixture on the simplex: per
/// document one topic from the mixture weights, then `snapshot_len` i.i.d.
/// words from that topic.
pub fn sample_corpus(
    mixture: &SpikeMixture,
    snapshot_len: usize,
    n_docs: usize,
    rng: &mut CounterRng,
) -> Result<TopicCorpus> {
    if snapshot_len == 0 {
        return Err(Error::BadInput("snapshot length must be >= 1".into()));
    }
    let d = mixture.domain().dim();
    if !matches!(mixture.domain(), crate::mixtures::Domain::Simplex { .. }) {
        return Err(Error::BadInput("topic mixtures live on the simplex".into()));
    }
    let mut docs = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let topic = sample_categorical(mixture.weights(), rng);
        let alpha = &mixture.locations()[topic];
        let doc: Vec<u32> = (0..snapshot_len)
            .map(|_| sample_categorical(alpha, rng) as u32 + 1)
            .collect();
        docs.push(doc);
    }
    TopicCorpus::new(d, snapshot_len, docs)
}

/// Moment estimates together with per-entry standard errors.
#[derive(Debug, Clone)]
pub struct Estimated1D {
    pub moments: MomentVector1D,
    /// Standard error of each estimated degree (index 0 is exactly 0).
    pub standard_errors: Vec<f64>,
}

/// 2-D variant of [`Estimated1D`].
#[derive(Debug, Clone)]
pub struct Estimated2D {
    pub moments: MomentGrid2D,
    pub standard_errors: Vec<((usize, usize), f64)>,
}

struct MeanVar {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    fn new() -> Self {
        MeanVar { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn standard_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt()
    }
}

/// Number of random word permutations averaged per document by the 2-D topic
/// estimator.
pub const TOPIC_PERMUTATIONS: usize = 8;

/// Unbiased projected-moment estimates from K-snapshots.
///
/// For one column `r` (entries in `[0,1]`): per word draw a Bernoulli with
/// mean `r[x_j]`; with `S` their sum, `E[C(S,t)] = C(K,t) q^t` where
/// `q = r' alpha`, so averaging `C(S,t)/C(K,t)` over documents estimates
/// `M_t` without bias.
///
/// For two columns: per document, random word permutations split the words
/// into disjoint blocks of sizes `t1` and `t2`; the product of the first
/// block's `r1`-Bernoullis and the second block's `r2`-Bernoullis is unbiased
/// for `M_{t1,t2}` because distinct words are i.i.d. given the topic.
pub fn topic_projected_moments(
    corpus: &TopicCorpus,
    query: &ProjectionQuery,
    rng: &mut CounterRng,
) -> Result<EstimatedMoments> {
    query.validate(corpus.vocab_size)?;
    if query.shifts.iter().any(|&s| s != 0.0) {
        return Err(Error::InvalidQuery("topic estimators need pure linear projections".into()));
    }
    for col in &query.columns {
        if col.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidQuery("topic projections need entries in [0,1]".into()));
        }
    }
    let k_snap = corpus.snapshot_len;
    if query.max_degree > k_snap {
        return Err(Error::InsufficientSnapshot { need: query.max_degree, have: k_snap });
    }
    match query.columns.len() {
        1 => topic_moments_p1(corpus, &query.columns[0], query.max_degree, rng).map(EstimatedMoments::OneD),
        2 => topic_moments_p2(corpus, &query.columns[0], &query.columns[1], query.max_degree, rng)
            .map(EstimatedMoments::TwoD),
        _ => unreachable!("validated above"),
    }
}

/// Either estimator output, by projection arity.
#[derive(Debug, Clone)]
pub enum EstimatedMoments {
    OneD(Estimated1D),
    TwoD(Estimated2D),
}

fn topic_moments_p1(
    corpus: &TopicCorpus,
    r: &[f64],
    max_degree: usize,
    rng: &mut CounterRng,
) -> Result<Estimated1D> {
    let k_snap = corpus.snapshot_len;
    let inv_binom: Vec<f64> = (0..=max_degree)
        .map(|t| binomial(k_snap, t).map(|b| 1.0 / b as f64))
        .collect::<Result<_>>()?;
    // C(s, t) table for s <= K.
    let mut stats: Vec<MeanVar> = (0..=max_degree).map(|_| MeanVar::new()).collect();
    for doc in &corpus.docs {
        let s: usize = doc
            .iter()
            .map(|&w| usize::from(rng.uniform() < r[(w - 1) as usize]))
            .sum();
        for t in 1..=max_degree {
            let c_st = binomial(s, t)? as f64;
            stats[t].push(c_st * inv_binom[t]);
        }
    }
    let mut values = vec![1.0];
    let mut ses = vec![0.0];
    for t in 1..=max_degree {
        values.push(stats[t].mean);
        ses.push(stats[t].standard_error());
    }
    let noise = ses.iter().fold(0.0f64, |a, &b| a.max(4.0 * b));
    Ok(Estimated1D { moments: MomentVector1D::new(values, noise)?, standard_errors: ses })
}

fn topic_moments_p2(
    corpus: &TopicCorpus,
    r1: &[f64],
    r2: &[f64],
    max_degree: usize,
    rng: &mut CounterRng,
) -> Result<Estimated2D> {
    let k_snap = corpus.snapshot_len;
    let pairs: Vec<(usize, usize)> = (0..=max_degree)
        .flat_map(|i| (0..=max_degree - i).map(move |j| (i, j)))
        .filter(|&(i, j)| (i, j) != (0, 0))
        .collect();
    let mut stats: std::collections::BTreeMap<(usize, usize), MeanVar> =
        pairs.iter().map(|&p| (p, MeanVar::new())).collect();
    let mut beta1 = vec![false; k_snap];
    let mut beta2 = vec![false; k_snap];
    let mut perm = Vec::with_capacity(k_snap);
    for doc in &corpus.docs {
        for (j, &w) in doc.iter().enumerate() {
            let idx = (w - 1) as usize;
            beta1[j] = rng.uniform() < r1[idx];
            beta2[j] = rng.uniform() < r2[idx];
        }
        let mut acc: std::collections::BTreeMap<(usize, usize), f64> =
            pairs.iter().map(|&p| (p, 0.0)).collect();
        for _ in 0..TOPIC_PERMUTATIONS {
            rng.permutation(k_snap, &mut perm);
            for &(t1, t2) in &pairs {
                let mut prod = 1.0;
                for &pos in &perm[..t1] {
                    if !beta1[pos] {
                        prod = 0.0;
                        break;
                    }
                }
                if prod > 0.0 {
                    for &pos in &perm[t1..t1 + t2] {
                        if !beta2[pos] {
                            prod = 0.0;
                            break;
                        }
                    }
                }
                *acc.get_mut(&(t1, t2)).unwrap() += prod;
            }
        }
        for (&p, stat) in stats.iter_mut() {
            stat.push(acc[&p] / TOPIC_PERMUTATIONS as f64);
        }
    }
    let mut ses = Vec::new();
    let mut noise = 0.0f64;
    for (&p, stat) in &stats {
        ses.push((p, stat.standard_error()));
        noise = noise.max(4.0 * stat.standard_error());
    }
    let moments = MomentGrid2D::from_fn(max_degree, noise, |i, j| {
        if (i, j) == (0, 0) {
            1.0
        } else {
            stats[&(i, j)].mean
        }
    })?;
    Ok(Estimated2D { moments, standard_errors: ses })
}

/// Moment oracle backed by a sampled corpus. Each query derives its own
/// Bernoulli/permutation stream from the seed and the query contents, so
/// concurrent queries are reproducible.
#[derive(Debug, Clone)]
pub struct TopicOracle {
    corpus: TopicCorpus,
    noise_estimate: f64,
    rng_seed: u64,
}

impl TopicOracle {
    pub fn new(corpus: TopicCorpus, noise_estimate: f64, rng_seed: u64) -> Self {
        TopicOracle { corpus, noise_estimate, rng_seed }
    }

    fn stream(&self, query: &ProjectionQuery) -> CounterRng {
        let mut data: Vec<f64> = Vec::new();
        for col in &query.columns {
            data.extend_from_slice(col);
        }
        data.push(query.max_degree as f64);
        CounterRng::stream(self.rng_seed, fingerprint(&data))
    }
}

impl MomentOracle for TopicOracle {
    fn dim(&self) -> usize {
        self.corpus.vocab_size
    }

    fn noise_bound(&self) -> f64 {
        self.noise_estimate
    }

    fn moments_1d(&self, query: &ProjectionQuery) -> Result<MomentVector1D> {
        let mut rng = self.stream(query);
        match topic_projected_moments(&self.corpus, query, &mut rng)? {
            EstimatedMoments::OneD(e) => Ok(e.moments),
            EstimatedMoments::TwoD(_) => Err(Error::InvalidQuery("expected a 1-column query".into())),
        }
    }

    fn moments_2d(&self, query: &ProjectionQuery) -> Result<MomentGrid2D> {
        let mut rng = self.stream(query);
        match topic_projected_moments(&self.corpus, query, &mut rng)? {
            EstimatedMoments::TwoD(e) => Ok(e.moments),
            EstimatedMoments::OneD(_) => Err(Error::InvalidQuery("expected a 2-column query".into())),
        }
    }
}

/// Coefficients `h_{t,0..t}` of the probabilists' Hermite polynomial
/// `H_t(x) = t! sum_j (-1/2)^j / (j! (t-2j)!) x^(t-2j)`, i.e.
/// `h_{t,t-2j} = (-1)^j C(t,2j) (2j-1)!!`.
pub fn hermite_coefficients(t: usize) -> Result<Vec<f64>> {
    if t > 64 {
        return Err(Error::BadInput("hermite_coefficients supports t <= 64".into()));
    }
    let mut h = vec![0.0; t + 1];
    for j in 0..=t / 2 {
        let mut coeff = binomial(t, 2 * j)? as f64;
        // (2j-1)!! in floating point; exceeds 2^53 for large t, where the
        // closed form is still accurate to a few ulps.
        for odd in (1..2 * j).step_by(2) {
            coeff *= odd as f64;
        }
        if j % 2 == 1 {
            coeff = -coeff;
        }
        h[t - 2 * j] = coeff;
    }
    Ok(h)
}

/// Per-sample Hermite statistic `sum_i h_{t,i} sigma^(t-i) x^i`, unbiased for
/// `mu^t` when `x ~ N(mu, sigma^2)`.
fn hermite_stat(h_rows: &[Vec<f64>], sigma_pows: &[f64], x: f64, t: usize) -> f64 {
    let mut xp = 1.0;
    let mut acc = 0.0;
    for i in 0..=t {
        let c = h_rows[t][i];
        if c != 0.0 {
            acc += c * sigma_pows[t - i] * xp;
        }
        xp *= x;
    }
    acc
}

/// Unbiased estimates of the location-mixture moments `M_t = sum w_i mu_i^t`
/// from samples of a 1-D Gaussian mixture with known standard deviation.
pub fn gaussian_moments_1d(samples: &[f64], sigma: f64, max_degree: usize) -> Result<Estimated1D> {
    if samples.is_empty() {
        return Err(Error::BadInput("need at least one sample".into()));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::BadInput("sigma must be positive".into()));
    }
    if max_degree < 1 {
        return Err(Error::BadInput("max_degree must be >= 1".into()));
    }
    let h_rows: Vec<Vec<f64>> = (0..=max_degree).map(hermite_coefficients).collect::<Result<_>>()?;
    let sigma_pows: Vec<f64> = (0..=max_degree).map(|e| sigma.powi(e as i32)).collect();
    let mut stats: Vec<MeanVar> = (0..=max_degree).map(|_| MeanVar::new()).collect();
    for &x in samples {
        for t in 1..=max_degree {
            stats[t].push(hermite_stat(&h_rows, &sigma_pows, x, t));
        }
    }
    let mut values = vec![1.0];
    let mut ses = vec![0.0];
    for t in 1..=max_degree {
        values.push(stats[t].mean);
        ses.push(stats[t].standard_error());
    }
    let noise = ses.iter().fold(0.0f64, |a, &b| a.max(4.0 * b));
    Ok(Estimated1D { moments: MomentVector1D::new(values, noise)?, standard_errors: ses })
}

/// Known-covariance Gaussian location mixture: covariance plus samples.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    dim: usize,
    covariance: Vec<f64>,
    samples: Vec<Vec<f64>>,
}

impl GaussianModel {
    pub fn new(dim: usize, covariance: Vec<f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        if covariance.len() != dim * dim {
            return Err(Error::BadInput("covariance must be d x d".into()));
        }
        for i in 0..dim {
            for j in 0..i {
                if (covariance[i * dim + j] - covariance[j * dim + i]).abs() > 1e-12 {
                    return Err(Error::BadInput("covariance must be symmetric".into()));
                }
            }
        }
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::BadInput("sample dimension mismatch".into()));
        }
        Ok(GaussianModel { dim, covariance, samples })
    }

    /// Draws `n` samples from the mixture `sum_i w_i N(mu_i, Sigma)`; the
    /// means stay hidden inside the returned model.
    pub fn sample_from(
        means: &SpikeMixture,
        covariance: Vec<f64>,
        n: usize,
        rng: &mut CounterRng,
    ) -> Result<Self> {
        let d = means.domain().dim();
        if covariance.len() != d * d {
            return Err(Error::BadInput("covariance must be d x d".into()));
        }
        let chol = linalg::cholesky(&covariance, d)
            .ok_or_else(|| Error::BadInput("covariance must be positive definite for sampling".into()))?;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let comp = sample_categorical(means.weights(), rng);
            let mu = &means.locations()[comp];
            let z: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
            let x: Vec<f64> = (0..d)
                .map(|i| mu[i] + (0..=i).map(|j| chol[i * d + j] * z[j]).sum::<f64>())
                .collect();
            samples.push(x);
        }
        GaussianModel::new(d, covariance, samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn covariance(&self) -> &[f64] {
        &self.covariance
    }

    fn quad_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += a[i] * self.covariance[i * d + j] * b[j];
            }
        }
        acc
    }
}

/// Variance floor below which a projection direction counts as degenerate.
pub const DIRECTION_VARIANCE_FLOOR: f64 = 1e-12;

/// Projected-moment estimates for a Gaussian location mixture.
///
/// One column: the 1-D Hermite estimator along `r1` with effective standard
/// deviation `sqrt(r1' Sigma r1)`.
///
/// Two columns: `r2` is Gram-Schmidt-orthogonalized against `r1` in the Sigma
/// inner product (making the two projected coordinates independent), mixed
/// Hermite moments are estimated along `(r1, r2')`, and the `(r1, r2)`
/// moments are recombined through the binomial identity with ratio
/// `rho = r1' Sigma r2 / r1' Sigma r1`.
pub fn gaussian_projected_moments(model: &GaussianModel, query: &ProjectionQuery) -> Result<EstimatedMoments> {
    query.validate(model.dim())?;
    let r1 = &query.columns[0];
    let var1 = model.quad_form(r1, r1);
    if var1 < DIRECTION_VARIANCE_FLOOR {
        return Err(Error::DegenerateDirection(var1));
    }
    let deg = query.max_degree;
    let h_rows: Vec<Vec<f64>> = (0..=deg).map(hermite_coefficients).collect::<Result<_>>()?;
    let s1 = var1.sqrt();
    let s1_pows: Vec<f64> = (0..=deg).map(|e| s1.powi(e as i32)).collect();
    if query.columns.len() == 1 {
        let shift = query.shifts[0];
        let mut stats: Vec<MeanVar> = (0..=deg).map(|_| MeanVar::new()).collect();
        for x in model.samples() {
            let u: f64 = r1.iter().zip(x).map(|(&r, &xi)| r * xi).sum::<f64>() + shift;
            for t in 1..=deg {
                stats[t].push(hermite_stat(&h_rows, &s1_pows, u, t));
            }
        }
        let mut values = vec![1.0];
        let mut ses = vec![0.0];
        for t in 1..=deg {
            values.push(stats[t].mean);
            ses.push(stats[t].standard_error());
        }
        let noise = ses.iter().fold(0.0f64, |a, &b| a.max(4.0 * b));
        return Ok(EstimatedMoments::OneD(Estimated1D {
            moments: MomentVector1D::new(values, noise)?,
            standard_errors: ses,
        }));
    }
    let r2 = &query.columns[1];
    let rho = model.quad_form(r1, r2) / var1;
    let r2p: Vec<f64> = r2.iter().zip(r1).map(|(&b, &a)| b - rho * a).collect();
    let var2 = model.quad_form(&r2p, &r2p).max(0.0);
    let s2 = var2.sqrt();
    let s2_pows: Vec<f64> = (0..=deg).map(|e| s2.powi(e as i32)).collect();
    let shift1 = query.shifts[0];
    let shift2 = query.shifts[1] - rho * shift1;
    let pairs: Vec<(usize, usize)> = (0..=deg)
        .flat_map(|i| (0..=deg - i).map(move |j| (i, j)))
        .filter(|&(i, j)| (i, j) != (0, 0))
        .collect();
    let binoms: Vec<Vec<f64>> = (0..=deg)
        .map(|n| (0..=n).map(|i| binomial(n, i).map(|b| b as f64)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut stats: std::collections::BTreeMap<(usize, usize), MeanVar> =
        pairs.iter().map(|&p| (p, MeanVar::new())).collect();
    let mut h1 = vec![0.0; deg + 1];
    let mut h2 = vec![0.0; deg + 1];
    for x in model.samples() {
        let u: f64 = r1.iter().zip(x).map(|(&r, &xi)| r * xi).sum::<f64>() + shift1;
        let v: f64 = r2p.iter().zip(x).map(|(&r, &xi)| r * xi).sum::<f64>() + shift2;
        for t in 0..=deg {
            h1[t] = hermite_stat(&h_rows, &s1_pows, u, t);
            h2[t] = hermite_stat(&h_rows, &s2_pows, v, t);
        }
        for &(t1, t2) in &pairs {
            // Recombine per sample so the recorded variance matches the
            // final estimator.
            let mut z = 0.0;
            let mut rho_pow = 1.0;
            for i in 0..=t2 {
                z += binoms[t2][i] * rho_pow * h1[t1 + i] * h2[t2 - i];
                rho_pow *= rho;
            }
            stats.get_mut(&(t1, t2)).unwrap().push(z);
        }
    }
    let mut ses = Vec::new();
    let mut noise = 0.0f64;
    for (&p, stat) in &stats {
        ses.push((p, stat.standard_error()));
        noise = noise.max(4.0 * stat.standard_error());
    }
    let moments = MomentGrid2D::from_fn(deg, noise, |i, j| {
        if (i, j) == (0, 0) {
            1.0
        } else {
            stats[&(i, j)].mean
        }
    })?;
    Ok(EstimatedMoments::TwoD(Estimated2D { moments, standard_errors: ses }))
}

/// Moment oracle over Gaussian samples, for ball-domain recovery.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    model: GaussianModel,
    noise_estimate: f64,
}

impl GaussianOracle {
    pub fn new(model: GaussianModel, noise_estimate: f64) -> Self {
        GaussianOracle { model, noise_estimate }
    }
}

impl MomentOracle for GaussianOracle {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn noise_bound(&self) -> f64 {
        self.noise_estimate
    }

    fn moments_1d(&self, query: &ProjectionQuery) -> Result<MomentVector1D> {
        match gaussian_projected_moments(&self.model, query)? {
            EstimatedMoments::OneD(e) => Ok(e.moments),
            EstimatedMoments::TwoD(_) => Err(Error::InvalidQuery("expected a 1-column query".into())),
        }
    }

    fn moments_2d(&self, query: &ProjectionQuery) -> Result<MomentGrid2D> {
        match gaussian_projected_moments(&self.model, query)? {
            EstimatedMoments::TwoD(e) => Ok(e.moments),
            EstimatedMoments::OneD(_) => Err(Error::InvalidQuery("expected a 2-column query".into())),
        }
    }
}

/// Gaussian sample CSV: one row per sample, '.' decimals, LF endings.
pub fn gaussian_samples_to_csv(samples: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in samples {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn gaussian_samples_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|e| Error::BadInput(format!("csv cell: {e}"))))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::BadInput("empty sample file".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::BadInput("ragged sample rows".into()));
    }
    Ok(rows)
}
