//! Command-line front end: deal a secret into a share bundle on disk, corrupt
//! it, reconstruct from chosen parties, and run analyses and simulations.

pub mod bundle;
pub mod encoding;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcess::adversary::{compare_to_bound, corrupt_stored, run_trials, Placement, StrategyKind, TrialConfig, View};
use rcess::flowgraph::{build_graph, cut_accounting, download_bound};
use rcess::hashing::{hash_overhead, GraphMode, HashGraph};
use rcess::scheme::{collect_responses, Status};
use rcess::{AdversaryBudget, Mode, SchemeParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bundle::{CorruptionEntry, SecretFormat, ShareBundle};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Param(String),
    #[error("{0}")]
    Abort(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Param(_) => 2,
            CliError::Abort(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Param(format!("{}: {e}", path.display()))
    }
}

impl From<rcess::Error> for CliError {
    fn from(e: rcess::Error) -> Self {
        use rcess::Error as E;
        match e {
            E::Parameter(_) | E::NoSecretCapacity(_) => CliError::Param(e.to_string()),
            E::DetectionAbort(_) | E::HashRecoveryFailure(_) | E::DecodingFailure(_) => CliError::Abort(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rcess", version, about = "Reliable communication-efficient secret sharing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Deal a secret into a share bundle.
    Share(ShareArgs),
    /// Corrupt stored party records in place.
    Corrupt(CorruptArgs),
    /// Reconstruct the secret from a set of parties.
    Reconstruct(ReconstructArgs),
    /// Capacity, cost, min-cut and hash overhead figures as JSON.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Monte Carlo estimate of the undetected-error rate.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Lk,
    Omniscient,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Lk => Mode::LimitedKnowledge,
            ModeArg::Omniscient => Mode::Omniscient,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphArg {
    Complete,
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    BlindAdditive,
    FakeSecret,
    HashTargeted,
    OrthogonalSearch,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::BlindAdditive => StrategyKind::BlindAdditive,
            StrategyArg::FakeSecret => StrategyKind::FakeSecret,
            StrategyArg::HashTargeted => StrategyKind::HashTargeted,
            StrategyArg::OrthogonalSearch => StrategyKind::OrthogonalSearch,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub zro: usize,
    #[arg(long, default_value_t = 0)]
    pub zwo: usize,
    #[arg(long, default_value_t = 0)]
    pub zrw: usize,
    /// Prime field size.
    #[arg(long, default_value_t = 257)]
    pub q: u64,
    /// Packet width (field elements per packet).
    #[arg(long, default_value_t = 1)]
    pub v: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Lk)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = GraphArg::Complete)]
    pub hash_graph: GraphArg,
    /// Seed for the sparse hash graph.
    #[arg(long, default_value_t = 0)]
    pub graph_seed: u64,
}

impl ParamArgs {
    pub fn params(&self) -> Result<SchemeParams, CliError> {
        let graph = match self.hash_graph {
            GraphArg::Complete => GraphMode::Complete,
            GraphArg::Sparse => GraphMode::Sparse { seed: self.graph_seed },
        };
        Ok(SchemeParams::new(
            self.n,
            self.k,
            AdversaryBudget::new(self.zro, self.zwo, self.zrw),
            self.mode.into(),
            self.q,
            self.v,
            graph,
        )?)
    }
}

#[derive(Args, Debug)]
pub struct ShareArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Seed for keys and hash masks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub secret_file: PathBuf,
    /// `bytes` needs q > 256; `elements` reads decimal integers.
    #[arg(long, value_enum, default_value_t = SecretFormatArg::Bytes)]
    pub secret_format: SecretFormatArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SecretFormatArg {
    Bytes,
    Elements,
}

#[derive(Args, Debug)]
pub struct CorruptArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Parties to corrupt; the first z_rw act as read-write, the rest write-only.
    #[arg(long, value_delimiter = ',', required = true)]
    pub parties: Vec<usize>,
    /// Parties the adversary only reads.
    #[arg(long, value_delimiter = ',')]
    pub read_only: Vec<usize>,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub parties: Vec<usize>,
    /// Where to write the recovered secret.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    Capacity(ParamArgs),
    Cost {
        #[command(flatten)]
        params: ParamArgs,
        /// Single contact count; sweeps k..=n when omitted.
        #[arg(long)]
        d: Option<usize>,
    },
    Mincut {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = FigureArg::Converse)]
        figure: FigureArg,
    },
    Overhead(ParamArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FigureArg {
    /// Four parties, users contacting {1,2} and {2,3,4}.
    Fig1,
    /// One user contacting parties 1..=k, with the adversary's cut accounting.
    Converse,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub z_ro: usize,
    #[serde(default)]
    pub z_wo: usize,
    #[serde(default)]
    pub z_rw: usize,
    pub mode: ModeArg,
    pub q: u64,
    pub v: usize,
    #[serde(default = "complete")]
    pub hash_graph: GraphMode,
    pub d: usize,
    pub strategy: StrategyKind,
}

fn complete() -> GraphMode {
    GraphMode::Complete
}

/// Text for stdout plus the process exit code.
#[derive(Debug)]
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    fn json(value: &impl Serialize) -> Result<Self, CliError> {
        let mut stdout = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        stdout.push('\n');
        Ok(Output { stdout, code: 0 })
    }
}

pub fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Share(a) => cmd_share(&a),
        Command::Corrupt(a) => cmd_corrupt(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

pub fn cmd_share(a: &ShareArgs) -> Result<Output, CliError> {
    let params = a.params.params()?;
    if params.capacity() == 0 {
        return Err(CliError::Param(format!(
            "parameters admit no secret: {} does not hold",
            params.condition_text()
        )));
    }
    let capacity = params.capacity();
    let q = params.field().modulus();
    let raw = fs::read(&a.secret_file).map_err(|e| CliError::io(&a.secret_file, e))?;
    let (secret, format, meaningful) = match a.secret_format {
        SecretFormatArg::Bytes => (encoding::bytes_to_elements(&raw, capacity, q)?, SecretFormat::Bytes, capacity),
        SecretFormatArg::Elements => {
            let text = String::from_utf8(raw).map_err(|_| CliError::Param("element secret file is not UTF-8".into()))?;
            let mut el = encoding::parse_elements(&text, q)?;
            if el.len() > capacity {
                return Err(CliError::Param(format!(
                    "secret of {} elements exceeds capacity of {capacity}",
                    el.len()
                )));
            }
            let len = el.len();
            el.resize(capacity, 0);
            (el, SecretFormat::Elements, len)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let states = params.deal(&secret, &mut rng)?;
    let bundle = ShareBundle::from_states(&params, &states, format, meaningful)?;
    bundle.write(&a.out_dir)?;
    Output::json(&json!({
        "out_dir": a.out_dir,
        "capacity_elements": capacity,
        "alpha": bundle.manifest.alpha,
        "hash_edges": bundle.manifest.hash_edges.len(),
    }))
}

pub fn cmd_corrupt(a: &CorruptArgs) -> Result<Output, CliError> {
    let mut bundle = ShareBundle::read(&a.dir)?;
    let params = bundle.params()?;
    let mut states = bundle.states(&params)?;
    let b = params.budget();
    let mut parties = a.parties.clone();
    parties.sort_unstable();
    parties.dedup();
    if parties.len() != a.parties.len() {
        return Err(CliError::Param("duplicate party in --parties".into()));
    }
    if parties.len() > params.z_w() {
        return Err(CliError::Param(format!(
            "cannot corrupt {} parties: the bundle allows z_w = {}",
            parties.len(),
            params.z_w()
        )));
    }
    let split = parties.len().min(b.read_write);
    let placement = Placement::new(
        &params,
        a.read_only.clone(),
        parties[split..].to_vec(),
        parties[..split].to_vec(),
    )?;
    let snapshot = states.clone();
    let view = match params.mode() {
        Mode::LimitedKnowledge => View::limited(&snapshot, &placement),
        Mode::Omniscient => View::omniscient(&snapshot),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    corrupt_stored(a.strategy.into(), &params, &placement, &view, &mut states, &mut rng)?;
    bundle.set_states(&states);
    bundle.manifest.corruption_log.push(CorruptionEntry {
        parties: parties.clone(),
        strategy: a.strategy.into(),
        seed: a.seed,
    });
    bundle.write(&a.dir)?;
    let changed: Vec<usize> = snapshot.iter().zip(&states).filter(|(x, y)| x != y).map(|(x, _)| x.id).collect();
    Output::json(&json!({ "corrupted": parties, "changed": changed }))
}

pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<Output, CliError> {
    let bundle = ShareBundle::read(&a.dir)?;
    let params = bundle.params()?;
    let states = bundle.states(&params)?;
    let d = a.parties.len();
    if d < params.k() || d > params.n() {
        return Err(CliError::Param(format!(
            "contacting {d} parties: need k <= d <= n with k = {}, n = {}",
            params.k(),
            params.n()
        )));
    }
    let responses = collect_responses(&params, &states, &a.parties)?;
    let report = params.reconstruct(&responses)?;
    let mut out = Output::json(&report)?;
    if let Some(path) = &a.report {
        fs::write(path, &out.stdout).map_err(|e| CliError::io(path, e))?;
    }
    match report.status {
        Status::Success => {
            let secret = report.secret.as_deref().unwrap_or_default();
            let bytes = match bundle.manifest.secret_format {
                SecretFormat::Bytes => encoding::elements_to_bytes(secret)?,
                SecretFormat::Elements => {
                    let keep = bundle.manifest.secret_elements.min(secret.len());
                    encoding::format_elements(&secret[..keep]).into_bytes()
                }
            };
            fs::write(&a.out, bytes).map_err(|e| CliError::io(&a.out, e))?;
        }
        Status::DetectedAbort => out.code = 3,
        Status::Failure => out.code = 4,
    }
    Ok(out)
}

pub fn cmd_analyze(a: &AnalyzeCommand) -> Result<Output, CliError> {
    match a {
        AnalyzeCommand::Capacity(p) => {
            let params = p.params()?;
            Output::json(&json!({
                "mode": params.mode(),
                "capacity_elements": params.capacity(),
                "condition": params.condition_text(),
                "condition_holds": params.condition_holds(),
            }))
        }
        AnalyzeCommand::Cost { params: p, d } => {
            let params = p.params()?;
            let ds: Vec<usize> = match d {
                Some(d) => vec![*d],
                None => (params.k()..=params.n()).collect(),
            };
            let costs = ds
                .into_iter()
                .map(|d| {
                    let total = params.comm_cost(d)?;
                    Ok(json!({ "d": d, "elements": total, "per_party": total / d }))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Output::json(&json!({ "mode": params.mode(), "costs": costs }))
        }
        AnalyzeCommand::Mincut { params: p, figure } => {
            let params = p.params()?;
            let alpha_v = params.staircase().map_or(1, |sc| sc.alpha()) as u64 * params.v() as u64;
            match figure {
                FigureArg::Fig1 => {
                    let users = vec![vec![1, 2], vec![2, 3, 4]];
                    let g = build_graph(4, alpha_v, &users, None)?;
                    Output::json(&json!({
                        "figure": "fig1",
                        "alpha_v": alpha_v,
                        "vertices": g.vertex_count(),
                        "edges": g.edge_count(),
                        "cut": g.min_cut(1)?,
                        "cut_user2": g.min_cut(2)?,
                    }))
                }
                FigureArg::Converse => {
                    let acc = cut_accounting(params.n(), params.k(), params.budget(), alpha_v, params.mode())?;
                    let downloads = (params.k()..=params.n())
                        .map(|d| {
                            let r = download_bound(params.n(), params.k(), params.budget(), alpha_v, params.mode(), d)?;
                            Ok(json!({ "d": d, "min_download": format!("{r}") }))
                        })
                        .collect::<Result<Vec<_>, CliError>>()?;
                    Output::json(&json!({
                        "figure": "converse",
                        "alpha_v": alpha_v,
                        "cut": acc.cut,
                        "converse_bound": acc.usable,
                        "read": acc.read,
                        "write": acc.write,
                        "honest": acc.honest,
                        "capacity_elements": params.capacity(),
                        "download_bounds": downloads,
                    }))
                }
            }
        }
        AnalyzeCommand::Overhead(p) => {
            let params = p.params()?;
            let alpha = params.staircase()?.alpha();
            let graph = match params.hash_graph() {
                Some(g) => g.clone(),
                None => HashGraph::build(params.n(), params.graph_mode())?,
            };
            let ratio = hash_overhead(alpha, params.v(), &graph);
            let complete = hash_overhead(alpha, params.v(), &HashGraph::complete(params.n()));
            Output::json(&json!({
                "hash_edges": graph.edge_count(),
                "resamples": graph.resamples(),
                "overhead": ratio.to_string(),
                "overhead_value": *ratio.numer() as f64 / *ratio.denom() as f64,
                "complete_overhead": complete.to_string(),
            }))
        }
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Output, CliError> {
    let text = fs::read_to_string(&a.config).map_err(|e| CliError::io(&a.config, e))?;
    let cfg: SimConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Param(format!("{}: {e}", a.config.display())))?;
    let params = SchemeParams::new(
        cfg.n,
        cfg.k,
        AdversaryBudget::new(cfg.z_ro, cfg.z_wo, cfg.z_rw),
        cfg.mode.into(),
        cfg.q,
        cfg.v,
        cfg.hash_graph,
    )?;
    let stats = run_trials(&params, &TrialConfig::new(cfg.strategy, cfg.d, a.trials, a.seed))?;
    let bound = compare_to_bound(&stats, &params, cfg.d);
    Output::json(&json!({
        "config": cfg,
        "seed": a.seed,
        "stats": stats,
        "undetected_rate": stats.undetected_rate(),
        "bound": bound,
    }))
}
