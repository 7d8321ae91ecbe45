//! Command-line front end: generate spike mixtures, recover them from
//! moments or oracles, evaluate transport distances, and run noise sweeps.
//!
//! Every command resolves its configuration up front, emits it alongside the
//! results, and is deterministic per seed. JSON output is canonicalized
//! (sorted keys); CSV uses '.' decimals and LF endings.
//!
//! Exit codes: 0 ok, 2 input error, 3 config error, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sparse_moments::error::Error as SmError;
use sparse_moments::highdim::{
    recover_highdim, MomentOracle, ProjectionQuery, RecoveryConfigHD, RecoveryDomain,
};
use sparse_moments::mixtures::{
    random_mixture, transport_1d, transport_general, Domain, GroundMetric, SeparationMode, SpikeMixture,
};
use sparse_moments::moments::{moments_from_json, Moments};
use sparse_moments::oracles::{
    gaussian_samples_from_csv, GaussianModel, GaussianOracle, NoiseMode, SyntheticOracle, TopicCorpus,
    TopicOracle,
};
use sparse_moments::prony1d::{recover_1d, RecoveryConfig1D};
use sparse_moments::prony2d::{recover_2d, RecoveryConfig2D};
use sparse_moments::rng::CounterRng;

const EXIT_INPUT: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: msg.into() }
    }

    fn config(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: msg.into() }
    }
}

impl From<SmError> for CliError {
    fn from(e: SmError) -> Self {
        let code = match e {
            SmError::SingularSystem
            | SmError::DegenerateSupport
            | SmError::NormalizationFailure(_)
            | SmError::Infeasible
            | SmError::DegenerateDirection(_) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "sparse-moments", about = "Spike-mixture recovery from noisy moments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DomainArg {
    Interval,
    Triangle,
    Simplex,
    Ball,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MetricArg {
    L1,
    L2,
}

impl From<MetricArg> for GroundMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L1 => GroundMetric::L1,
            MetricArg::L2 => GroundMetric::L2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
    #[value(name = "hd")]
    HighDim,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random spike mixture to a JSON file.
    Gen {
        #[arg(long)]
        k: usize,
        /// Ambient dimension (simplex/ball only).
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, value_enum, default_value_t = DomainArg::Interval)]
        domain: DomainArg,
        /// "random", "coincident", or a minimum pairwise L1 distance.
        #[arg(long, default_value = "random")]
        separation: String,
        #[arg(long, default_value_t = 0.0)]
        min_weight: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a mixture from a moment file or an oracle config.
    Recover {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Moment file (kind "1d"/"2d") or oracle config (key "oracle").
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// Noise bound; defaults to the oracle's own estimate or 0.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ground-truth mixture for the report's transport diagnostic.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transport distance between two mixture files (stdout + JSON).
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::L1)]
        metric: MetricArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noise sweep driven by a JSON config; writes a CSV of results.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { k, d, domain, separation, min_weight, seed, out } => {
            cmd_gen(k, d, domain, &separation, min_weight, seed, &out)
        }
        Command::Recover { kind, input, k, xi, seed, truth, out } => {
            cmd_recover(kind, &input, k, xi, seed, truth.as_deref(), out.as_deref())
        }
        Command::Eval { input, truth, metric, out } => cmd_eval(&input, &truth, metric, out.as_deref()),
        Command::Sweep { config, out } => cmd_sweep(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Canonical JSON: sorted keys, trailing newline.
fn to_canonical_json<T: Serialize>(value: &T) -> CliResult<String> {
    let v = serde_json::to_value(value).map_err(|e| CliError::input(format!("serialize: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::input(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn write_output(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content).map_err(|e| CliError::input(format!("write {}: {e}", path.display())))
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("parse {}: {e}", path.display())))
}

fn read_mixture(path: &Path) -> CliResult<SpikeMixture> {
    let v = read_json(path)?;
    serde_json::from_value(v).map_err(|e| CliError::input(format!("mixture {}: {e}", path.display())))
}

fn cmd_gen(
    k: usize,
    d: usize,
    domain: DomainArg,
    separation: &str,
    min_weight: f64,
    seed: u64,
    out: &Path,
) -> CliResult<()> {
    let dom = match domain {
        DomainArg::Interval => Domain::UnitInterval,
        DomainArg::Triangle => Domain::UnitTriangle,
        DomainArg::Simplex => Domain::Simplex { dim: d },
        DomainArg::Ball => Domain::UnitBall { dim: d },
    };
    let mode = match separation {
        "random" => SeparationMode::Random,
        "coincident" => SeparationMode::Coincident,
        other => {
            let zeta: f64 = other
                .parse()
                .map_err(|_| CliError::config(format!("separation must be random, coincident, or a number, got {other:?}")))?;
            SeparationMode::Separated(zeta)
        }
    };
    let mut rng = CounterRng::new(seed);
    let mixture = random_mixture(&dom, k, mode, min_weight, &mut rng).map_err(|e| CliError {
        code: EXIT_CONFIG,
        message: e.to_string(),
    })?;
    write_output(out, &to_canonical_json(&mixture)?)
}

#[derive(Deserialize)]
#[serde(tag = "oracle", rename_all = "snake_case")]
enum OracleConfig {
    Synthetic {
        #[serde(default)]
        truth: Option<SpikeMixture>,
        #[serde(default)]
        truth_path: Option<PathBuf>,
        #[serde(default)]
        noise: Option<NoiseMode>,
        #[serde(default)]
        seed: u64,
    },
    Topic {
        corpus_path: PathBuf,
        vocab_size: usize,
        #[serde(default)]
        noise_estimate: f64,
        #[serde(default)]
        seed: u64,
    },
    Gaussian {
        samples_path: PathBuf,
        /// Row-major d x d covariance.
        covariance: Vec<Vec<f64>>,
        #[serde(default)]
        noise_estimate: f64,
    },
}

enum LoadedOracle {
    Synthetic(SyntheticOracle),
    Topic(TopicOracle),
    Gaussian(GaussianOracle),
}

impl LoadedOracle {
    fn as_dyn(&self) -> &dyn MomentOracle {
        match self {
            LoadedOracle::Synthetic(o) => o,
            LoadedOracle::Topic(o) => o,
            LoadedOracle::Gaussian(o) => o,
        }
    }

    fn domain(&self) -> RecoveryDomain {
        match self {
            LoadedOracle::Gaussian(_) => RecoveryDomain::Ball,
            _ => RecoveryDomain::Simplex,
        }
    }
}

fn load_oracle(v: &serde_json::Value, base: &Path) -> CliResult<LoadedOracle> {
    let cfg: OracleConfig =
        serde_json::from_value(v.clone()).map_err(|e| CliError::input(format!("oracle config: {e}")))?;
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.parent().unwrap_or(Path::new(".")).join(p)
        }
    };
    match cfg {
        OracleConfig::Synthetic { truth, truth_path, noise, seed } => {
            let truth = match (truth, truth_path) {
                (Some(t), _) => t,
                (None, Some(p)) => read_mixture(&resolve(&p))?,
                (None, None) => return Err(CliError::config("synthetic oracle needs truth or truth_path")),
            };
            let noise = noise.unwrap_or(NoiseMode::None);
            Ok(LoadedOracle::Synthetic(SyntheticOracle::new(truth, noise, seed)?))
        }
        OracleConfig::Topic { corpus_path, vocab_size, noise_estimate, seed } => {
            let text = std::fs::read_to_string(resolve(&corpus_path))
                .map_err(|e| CliError::input(format!("read corpus: {e}")))?;
            let corpus = TopicCorpus::from_jsonl(&text, vocab_size)?;
            Ok(LoadedOracle::Topic(TopicOracle::new(corpus, noise_estimate, seed)))
        }
        OracleConfig::Gaussian { samples_path, covariance, noise_estimate } => {
            let text = std::fs::read_to_string(resolve(&samples_path))
                .map_err(|e| CliError::input(format!("read samples: {e}")))?;
            let samples = gaussian_samples_from_csv(&text)?;
            let d = samples[0].len();
            if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                return Err(CliError::config("covariance shape must match the sample dimension"));
            }
            let flat: Vec<f64> = covariance.into_iter().flatten().collect();
            let model = GaussianModel::new(d, flat, samples)?;
            Ok(LoadedOracle::Gaussian(GaussianOracle::new(model, noise_estimate)))
        }
    }
}

fn transport_to(truth: &SpikeMixture, recovered: &SpikeMixture) -> CliResult<f64> {
    if truth.domain().dim() == 1 {
        Ok(transport_1d(recovered, truth)?)
    } else {
        Ok(transport_general(recovered, truth, GroundMetric::L1)?.0)
    }
}

fn cmd_recover(
    kind: KindArg,
    input: &Path,
    k: usize,
    xi: Option<f64>,
    seed: u64,
    truth: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    if k == 0 {
        return Err(CliError::config("k must be at least 1"));
    }
    let raw = read_json(input)?;
    let is_oracle = raw.get("oracle").is_some();
    let truth_mixture = truth.map(read_mixture).transpose()?;
    let degree = 2 * k - 1;

    let (result, resolved_xi): (serde_json::Value, f64) = match kind {
        KindArg::OneD | KindArg::TwoD => {
            let moments = if is_oracle {
                let oracle = load_oracle(&raw, input)?;
                let o = oracle.as_dyn();
                match kind {
                    KindArg::OneD => {
                        if o.dim() != 1 {
                            return Err(CliError::config("1d recovery needs a 1-dimensional oracle"));
                        }
                        let q = ProjectionQuery { columns: vec![vec![1.0]], shifts: vec![0.0], max_degree: degree };
                        Moments::OneD(o.moments_1d(&q)?)
                    }
                    _ => {
                        if o.dim() != 2 {
                            return Err(CliError::config("2d recovery needs a 2-dimensional oracle"));
                        }
                        let q = ProjectionQuery {
                            columns: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                            shifts: vec![0.0, 0.0],
                            max_degree: degree,
                        };
                        Moments::TwoD(o.moments_2d(&q)?)
                    }
                }
            } else {
                moments_from_json(&raw)?
            };
            match (kind, moments) {
                (KindArg::OneD, Moments::OneD(m)) => {
                    let xi = xi.unwrap_or(m.noise_bound());
                    let cfg = RecoveryConfig1D::new(k, xi, seed);
                    let rep = recover_1d(&m, &cfg)?;
                    let mut v = serde_json::to_value(&rep).map_err(|e| CliError::input(e.to_string()))?;
                    if let Some(t) = &truth_mixture {
                        v["transport_to_truth"] = serde_json::json!(transport_to(t, &rep.mixture)?);
                    }
                    (v, xi)
                }
                (KindArg::TwoD, Moments::TwoD(m)) => {
                    let xi = xi.unwrap_or(m.noise_bound());
                    let cfg = RecoveryConfig2D::new(k, xi, seed);
                    let rep = recover_2d(&m, &cfg)?;
                    let mut v = serde_json::to_value(&rep).map_err(|e| CliError::input(e.to_string()))?;
                    if let Some(t) = &truth_mixture {
                        v["transport_to_truth"] = serde_json::json!(transport_to(t, &rep.mixture)?);
                    }
                    (v, xi)
                }
                _ => return Err(CliError::input("moment file kind does not match --kind")),
            }
        }
        KindArg::HighDim => {
            if !is_oracle {
                return Err(CliError::input("hd recovery needs an oracle config"));
            }
            let oracle = load_oracle(&raw, input)?;
            let o = oracle.as_dyn();
            let xi = xi.unwrap_or_else(|| o.noise_bound());
            let cfg = RecoveryConfigHD::new(k, o.dim(), xi, seed).with_domain(oracle.domain());
            let rep = recover_highdim(o, &cfg)?;
            let mut v = serde_json::to_value(&rep).map_err(|e| CliError::input(e.to_string()))?;
            if let Some(t) = &truth_mixture {
                v["transport_to_truth"] = serde_json::json!(transport_to(t, &rep.mixture)?);
            }
            (v, xi)
        }
    };

    let payload = serde_json::json!({
        "config": {
            "kind": kind,
            "k": k,
            "xi": resolved_xi,
            "seed": seed,
            "input": input.display().to_string(),
        },
        "result": result,
    });
    let text = to_canonical_json(&payload)?;
    match out {
        Some(path) => write_output(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_eval(input: &Path, truth: &Path, metric: MetricArg, out: Option<&Path>) -> CliResult<()> {
    let a = read_mixture(input)?;
    let b = read_mixture(truth)?;
    let (cost, moves) = transport_general(&a, &b, metric.into()).map_err(CliError::from).map(|(c, p)| (c, p.moves.len()))?;
    let payload = serde_json::json!({
        "config": {
            "a": input.display().to_string(),
            "b": truth.display().to_string(),
            "metric": metric,
        },
        "result": { "transport": cost, "plan_moves": moves },
    });
    let text = to_canonical_json(&payload)?;
    print!("{text}");
    if let Some(path) = out {
        write_output(path, &text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepConfig {
    /// "1d" or "2d".
    kind: String,
    ks: Vec<usize>,
    xis: Vec<f64>,
    seeds: u64,
    #[serde(default)]
    separation: Option<f64>,
    #[serde(default)]
    min_weight: f64,
}

struct SweepRow {
    k: usize,
    xi: f64,
    seed: u64,
    transport_error: f64,
    runtime_ms: f64,
}

fn sweep_cell(cfg: &SweepConfig, k: usize, xi: f64, seed: u64) -> CliResult<SweepRow> {
    let mode = match cfg.separation {
        Some(z) => SeparationMode::Separated(z),
        None => SeparationMode::Random,
    };
    let mut rng = CounterRng::stream(seed, (k as u64) << 32 ^ xi.to_bits());
    let t0 = std::time::Instant::now();
    let transport_error = match cfg.kind.as_str() {
        "1d" => {
            let truth = random_mixture(&Domain::UnitInterval, k, mode, cfg.min_weight, &mut rng)?;
            let exact = sparse_moments::moments::moments_1d(&truth, 2 * k - 1)?;
            let noisy = sparse_moments::calibration::perturb_vector(&exact, xi, &mut rng);
            let rep = recover_1d(&noisy, &RecoveryConfig1D::new(k, xi, seed))?;
            transport_1d(&rep.mixture, &truth)?
        }
        "2d" => {
            let truth = random_mixture(&Domain::UnitTriangle, k, mode, cfg.min_weight, &mut rng)?;
            let exact = sparse_moments::moments::moments_2d(&truth, 2 * k - 1)?;
            let noisy = sparse_moments::calibration::perturb_grid(&exact, xi, &mut rng);
            let rep = recover_2d(&noisy, &RecoveryConfig2D::new(k, xi, seed))?;
            transport_general(&rep.mixture, &truth, GroundMetric::L1)?.0
        }
        other => return Err(CliError::config(format!("unknown sweep kind {other:?}"))),
    };
    Ok(SweepRow { k, xi, seed, transport_error, runtime_ms: t0.elapsed().as_secs_f64() * 1e3 })
}

fn cmd_sweep(config_path: &Path, out: &Path) -> CliResult<()> {
    let raw = read_json(config_path)?;
    let cfg: SweepConfig =
        serde_json::from_value(raw).map_err(|e| CliError::config(format!("sweep config: {e}")))?;
    if cfg.ks.is_empty() || cfg.xis.is_empty() || cfg.seeds == 0 {
        return Err(CliError::config("sweep grid is empty"));
    }
    if cfg.kind != "1d" && cfg.kind != "2d" {
        return Err(CliError::config(format!("unknown sweep kind {:?}", cfg.kind)));
    }
    let cells: Vec<(usize, f64, u64)> = cfg
        .ks
        .iter()
        .flat_map(|&k| cfg.xis.iter().flat_map(move |&xi| (0..cfg.seeds).map(move |s| (k, xi, s))))
        .collect();
    let threads = std::env::var("SPARSE_MOMENTS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .min(cells.len().max(1));
    let mut slots: Vec<Option<CliResult<SweepRow>>> = (0..cells.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = cells.len().div_ceil(threads);
        for (c, slice) in slots.chunks_mut(chunk).enumerate() {
            let cells = &cells;
            let cfg = &cfg;
            scope.spawn(move || {
                for (off, slot) in slice.iter_mut().enumerate() {
                    let (k, xi, seed) = cells[c * chunk + off];
                    *slot = Some(sweep_cell(cfg, k, xi, seed));
                }
            });
        }
    });
    let mut csv = String::from("k,xi,seed,transport_error,runtime_ms\n");
    for slot in slots {
        let row = slot.expect("all cells computed")?;
        csv.push_str(&format!(
            "{},{:e},{},{:e},{:.3}\n",
            row.k, row.xi, row.seed, row.transport_error, row.runtime_ms
        ));
    }
    write_output(out, &csv)?;
    let sidecar = out.with_extension("config.json");
    write_output(&sidecar, &to_canonical_json(&cfg)?)?;
    Ok(())
}
