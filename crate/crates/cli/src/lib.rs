//! The `crn` command line: each subcommand runs one pipeline stage from files
//! to files under a root seed.
//!
//! The binary prints the hash of the parsed configuration on stdout and echoes
//! the configuration as JSON on stderr. Each output gets a `<output>.meta.json`
//! sidecar with the seed, schema hash and configuration that produced it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use crn_core::crn::{self, Checkpoint, Crn, TrainConfig, TrainingMeta};
use crn_core::estimators::{
    cnt2crd_single, improved, CardinalityEstimator, ColumnStatsModel, ContainmentEstimator, Crd2Cnt, ExactCardinality,
    ExactContainment, FinalFn, PoolEstimator, QueriesPool,
};
use crn_core::eval::{self, cardinality_qerror, Evaluation};
use crn_core::featurize::FeatureSpace;
use crn_core::qgen::{self, GenConfig, LabeledPair, LabeledQuery, WorkloadHeader};
use crn_core::relstore::{self, build_database, Database, Schema};
use crn_core::seed;
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "crn", version, about = "Containment-rate estimation experiments")]
pub struct Cli {
    /// Root seed; stages draw from its named substreams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic database from a schema file.
    GenDb(GenDbArgs),
    /// Generate a labeled workload: containment pairs, cardinality queries or pool queries.
    GenWorkload(GenWorkloadArgs),
    /// Train a containment-rate network on a pairs workload.
    Train(TrainArgs),
    /// Evaluate a containment-rate model on a pairs workload.
    EvalCnt(EvalCntArgs),
    /// Build a queries pool from labeled queries.
    BuildPool(BuildPoolArgs),
    /// Evaluate a cardinality model on a queries workload.
    EvalCrd(EvalCrdArgs),
    /// Train once per hidden width and write all validation curves.
    SweepH(SweepArgs),
    /// Check that pool estimation over exact containment rates reproduces exact cardinalities.
    RoundTripCheck(RoundTripArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenDbArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Row count per table as `table=n`; defaults to the built-in counts for the movies schema.
    #[arg(long = "rows", value_parser = parse_rows)]
    pub rows: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadKind {
    /// Labeled containment pairs.
    Pairs,
    /// Labeled queries, join counts drawn uniformly.
    Queries,
    /// Labeled queries spread evenly over FROM clauses.
    Pool,
}

#[derive(Debug, Args, Serialize)]
pub struct GenWorkloadArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "pairs")]
    pub kind: WorkloadKind,
    #[arg(long, default_value_t = 2)]
    pub max_joins: usize,
    #[arg(long)]
    pub n: usize,
    /// Keep queries whose result is empty.
    #[arg(long)]
    pub allow_empty: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub label_floor: f64,
}

impl TrainFlags {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            max_epochs: self.max_epochs,
            patience: self.patience,
            label_floor: self.label_floor,
            seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    /// Checkpoint output.
    #[arg(long)]
    pub out: PathBuf,
    /// Validation curve CSV output.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CntModel {
    /// Trained network from `--checkpoint`.
    Crn,
    /// Crd2Cnt over the independence baseline.
    Baseline,
    /// Exact containment rates.
    Exact,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalCntArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_enum, default_value = "crn")]
    pub model: CntModel,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Statistics CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-pair CSV output.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    pub label_floor: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildPoolArgs {
    #[arg(long)]
    pub db: PathBuf,
    /// Labeled queries workload.
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `median`, `mean`, `trimmed-mean` or `trimmed-mean:<per-tail fraction>`.
    #[arg(long, default_value = "median")]
    pub final_fn: String,
    #[arg(long, default_value_t = QueriesPool::DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Also add a predicate-free query for every FROM clause of up to this many tables.
    #[arg(long)]
    pub coverage: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrdModel {
    /// The independence baseline.
    Baseline,
    /// Exact cardinalities.
    Exact,
    /// Pool estimation over the network's containment rates; baseline fallback.
    Cnt2crdCrn,
    /// Pool estimation over Crd2Cnt of exact cardinalities; baseline fallback.
    Cnt2crdExact,
    /// Pool estimation over Crd2Cnt of the baseline; baseline fallback.
    Improved,
}

impl CrdModel {
    fn uses_pool(self) -> bool {
        matches!(self, CrdModel::Cnt2crdCrn | CrdModel::Cnt2crdExact | CrdModel::Improved)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalCrdArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum, default_value = "cnt2crd-crn")]
    pub model: CrdModel,
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Statistics CSV output: one overall row and one row per join count.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub db: PathBuf,
    #[arg(long)]
    pub pairs: PathBuf,
    /// Hidden widths, comma separated.
    #[arg(long = "widths", value_delimiter = ',', default_value = "16,32,64,128")]
    pub widths: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args, Serialize)]
pub struct RoundTripArgs {
    /// Number of evaluated queries.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub max_joins: usize,
    /// Pool queries drawn besides the predicate-free coverage queries.
    #[arg(long, default_value_t = 100)]
    pub pool_size: usize,
    /// Optional statistics CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_rows(s: &str) -> Result<(String, usize), String> {
    let (t, n) = s
        .split_once('=')
        .ok_or_else(|| format!("expected table=n, got `{s}`"))?;
    let n = n.parse().map_err(|e| format!("bad row count in `{s}`: {e}"))?;
    Ok((t.to_string(), n))
}

/// A failed run: a stable category plus a human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            category: "config-error",
            message: message.into(),
        }
    }

    /// The first line of a clap parse failure.
    pub fn usage(e: &clap::Error) -> Self {
        let text = e.to_string();
        let line = text.lines().next().unwrap_or_default();
        CliError {
            category: "usage-error",
            message: line.trim_start_matches("error:").trim().to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category {
            "config-error" | "usage-error" => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace('\n', " ");
        write!(f, "{}: {}", self.category, msg.trim())
    }
}

impl std::error::Error for CliError {}

impl From<crn_core::Error> for CliError {
    fn from(e: crn_core::Error) -> Self {
        CliError {
            category: e.category(),
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        crn_core::Error::from(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// What the run printed on stdout, returned for in-process callers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub config_hash: String,
    pub lines: Vec<String>,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> CliResult<RunOutput>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::usage(&e))?;
    execute(&cli)
}

/// The configuration as echoed on stderr, and its hash.
pub fn config_echo(cli: &Cli) -> CliResult<(String, String)> {
    let config = serde_json::to_string(cli)?;
    let hash = seed::short_hash(config.as_bytes());
    Ok((config, hash))
}

/// Runs an already parsed command line. Nothing is printed; the binary
/// prints the echo and the returned lines.
pub fn execute(cli: &Cli) -> CliResult<RunOutput> {
    let (_, config_hash) = config_echo(cli)?;
    let mut ctx = Ctx {
        cli,
        config_hash: config_hash.clone(),
        lines: vec![format!("config-hash {config_hash}")],
    };
    match &cli.command {
        Command::GenDb(a) => gen_db(&mut ctx, a)?,
        Command::GenWorkload(a) => gen_workload(&mut ctx, a)?,
        Command::Train(a) => train(&mut ctx, a)?,
        Command::EvalCnt(a) => eval_cnt(&mut ctx, a)?,
        Command::BuildPool(a) => build_pool(&mut ctx, a)?,
        Command::EvalCrd(a) => eval_crd(&mut ctx, a)?,
        Command::SweepH(a) => sweep(&mut ctx, a)?,
        Command::RoundTripCheck(a) => round_trip(&mut ctx, a)?,
    }
    Ok(RunOutput {
        config_hash,
        lines: ctx.lines,
    })
}

struct Ctx<'a> {
    cli: &'a Cli,
    config_hash: String,
    lines: Vec<String>,
}

#[derive(Serialize)]
struct Meta<'a> {
    config_hash: &'a str,
    seed: u64,
    schema_hash: &'a str,
    config: &'a Cli,
}

impl Ctx<'_> {
    fn say(&mut self, line: String) {
        self.lines.push(line);
    }

    fn seed(&self) -> u64 {
        self.cli.seed
    }

    /// Writes `<output>.meta.json` beside `output`.
    fn sidecar(&self, output: &Path, schema_hash: &str) -> CliResult<()> {
        let meta = Meta {
            config_hash: &self.config_hash,
            seed: self.cli.seed,
            schema_hash,
            config: self.cli,
        };
        let mut name = output.as_os_str().to_owned();
        name.push(".meta.json");
        let path = PathBuf::from(name);
        let text = serde_json::to_string_pretty(&meta)? + "\n";
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError {
        category: "io-error",
        message: format!("{}: {e}", path.display()),
    }
}

fn require_input(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(format!("{what} not found: {}", path.display())))
    }
}

/// Creates the parent directory of an output path.
fn prepare_output(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e)),
        _ => Ok(()),
    }
}

fn load_db(path: &Path) -> CliResult<Database> {
    require_input(path, "database directory")?;
    Ok(relstore::load(path)?)
}

fn check_schema(header_hash: &str, db: &Database, what: &Path) -> CliResult<()> {
    let hash = db.schema().hash();
    if header_hash != hash {
        return Err(CliError::config(format!(
            "{} was built for schema {header_hash}, database has {hash}",
            what.display()
        )));
    }
    Ok(())
}

fn load_pairs(path: &Path, db: &Database) -> CliResult<(WorkloadHeader, Vec<LabeledPair>)> {
    require_input(path, "pairs workload")?;
    let (h, pairs) = qgen::read_pairs(path)?;
    check_schema(&h.schema_hash, db, path)?;
    Ok((h, pairs))
}

fn load_queries(path: &Path, db: &Database) -> CliResult<(WorkloadHeader, Vec<LabeledQuery>)> {
    require_input(path, "queries workload")?;
    let (h, queries) = qgen::read_queries(path)?;
    check_schema(&h.schema_hash, db, path)?;
    Ok((h, queries))
}

fn load_model(path: Option<&Path>, db: &Database) -> CliResult<Crn> {
    let path = path.ok_or_else(|| CliError::config("--checkpoint is required for this model"))?;
    require_input(path, "checkpoint")?;
    Ok(Checkpoint::load_for_schema(path, &db.schema().hash())?.model())
}

fn workload_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "workload".into())
}

fn gen_db(ctx: &mut Ctx, a: &GenDbArgs) -> CliResult<()> {
    require_input(&a.schema, "schema file")?;
    let schema = Schema::load(&a.schema)?;
    let counts: BTreeMap<String, usize> = if !a.rows.is_empty() {
        a.rows.iter().cloned().collect()
    } else if schema == Schema::movies() {
        Schema::movies_row_counts()
    } else {
        return Err(CliError::config(
            "--rows is required for schemas other than the movies schema",
        ));
    };
    let db = build_database(&schema, &counts, seed::substream(ctx.seed(), "db"))?;
    prepare_output(&a.out)?;
    relstore::dump(&db, &a.out, Some(ctx.seed()))?;
    ctx.sidecar(&a.out, &schema.hash())?;
    ctx.say(format!("wrote {} rows to {}", db.total_rows(), a.out.display()));
    Ok(())
}

fn gen_workload(ctx: &mut Ctx, a: &GenWorkloadArgs) -> CliResult<()> {
    let db = load_db(&a.db)?;
    let cfg = GenConfig {
        max_joins: a.max_joins,
        nonempty: !a.allow_empty,
        seed: ctx.seed(),
        ..GenConfig::default()
    };
    let mut rng = seed::sub_rng(ctx.seed(), "gen");
    let hash = db.schema().hash();
    prepare_output(&a.out)?;
    let count = match a.kind {
        WorkloadKind::Pairs => {
            let pairs = qgen::generate_pairs(&cfg, &db, a.n, &mut rng)?;
            qgen::write_pairs(&a.out, &hash, ctx.seed(), a.max_joins, &pairs)?;
            pairs.len()
        }
        WorkloadKind::Queries | WorkloadKind::Pool => {
            let queries = if a.kind == WorkloadKind::Queries {
                qgen::generate_queries(&cfg, &db, a.n, &mut rng)?
            } else {
                qgen::generate_pool_queries(&cfg, &db, a.n, &mut rng)?
            };
            qgen::write_queries(&a.out, &hash, ctx.seed(), a.max_joins, &queries)?;
            queries.len()
        }
    };
    ctx.sidecar(&a.out, &hash)?;
    ctx.say(format!("wrote {count} records to {}", a.out.display()));
    Ok(())
}

fn train(ctx: &mut Ctx, a: &TrainArgs) -> CliResult<()> {
    let db = load_db(&a.db)?;
    let (_, pairs) = load_pairs(&a.pairs, &db)?;
    let cfg = a.train.config(ctx.seed());
    let (tr, va) = qgen::split_train_validation(&pairs);
    let space = FeatureSpace::new(db.schema());
    let (params, report) = crn::train(&space, &tr, &va, &cfg)?;
    let model = Crn::new(space, params)?;
    let hash = db.schema().hash();
    prepare_output(&a.out)?;
    Checkpoint::new(&model, Some(TrainingMeta::new(&cfg, &report, tr.len(), va.len()))).save(&a.out)?;
    ctx.sidecar(&a.out, &hash)?;
    if let Some(curve) = &a.curve {
        prepare_output(curve)?;
        crn::write_curve_csv(curve, &report)?;
        ctx.sidecar(curve, &hash)?;
    }
    ctx.say(format!(
        "trained {} epochs; best epoch {} with validation mean q-error {} (untrained {})",
        report.curve.len(),
        report.best_epoch,
        report.best_val,
        report.initial_val
    ));
    Ok(())
}

fn write_evaluation(
    ctx: &mut Ctx,
    ev: &Evaluation,
    workload: &str,
    model: &str,
    out: &Path,
    samples: Option<&Path>,
    schema_hash: &str,
) -> CliResult<()> {
    prepare_output(out)?;
    eval::write_results_csv(out, &eval::result_rows(workload, model, ev))?;
    ctx.sidecar(out, schema_hash)?;
    if let Some(s) = samples {
        prepare_output(s)?;
        eval::write_samples_csv(s, workload, model, &ev.samples)?;
        ctx.sidecar(s, schema_hash)?;
    }
    let o = &ev.overall;
    ctx.say(format!(
        "{model} on {workload}: median {} p90 {} max {} mean {} over {}",
        o.p50, o.p90, o.max, o.mean, o.n
    ));
    Ok(())
}

fn model_name<T: Serialize>(m: &T) -> String {
    serde_json::to_value(m)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn eval_cnt(ctx: &mut Ctx, a: &EvalCntArgs) -> CliResult<()> {
    let db = load_db(&a.db)?;
    let (_, pairs) = load_pairs(&a.pairs, &db)?;
    let model: Box<dyn ContainmentEstimator + '_> = match a.model {
        CntModel::Crn => Box::new(load_model(a.checkpoint.as_deref(), &db)?),
        CntModel::Baseline => Box::new(Crd2Cnt(ColumnStatsModel::from_database(&db))),
        CntModel::Exact => Box::new(ExactContainment(&db)),
    };
    let ev = eval::eval_containment(&model, &pairs, a.label_floor)?;
    let name = model_name(&a.model);
    write_evaluation(
        ctx,
        &ev,
        &workload_name(&a.pairs),
        &name,
        &a.out,
        a.samples.as_deref(),
        &db.schema().hash(),
    )
}

fn build_pool(ctx: &mut Ctx, a: &BuildPoolArgs) -> CliResult<()> {
    let db = load_db(&a.db)?;
    let (_, queries) = load_queries(&a.queries, &db)?;
    let final_fn: FinalFn = a
        .final_fn
        .parse()
        .map_err(|e: crn_core::Error| CliError::config(e.to_string()))?;
    if !(a.epsilon >= 0.0 && a.epsilon < 1.0) {
        return Err(CliError::config(format!("epsilon {} outside [0, 1)", a.epsilon)));
    }
    let mut pool = QueriesPool::new(queries, a.epsilon, final_fn);
    if let Some(k) = a.coverage {
        pool.add_coverage(&db, k)?;
    }
    let hash = db.schema().hash();
    prepare_output(&a.out)?;
    pool.save(&a.out, &hash)?;
    ctx.sidecar(&a.out, &hash)?;
    ctx.say(format!(
        "wrote pool of {} records over {} FROM clauses to {}",
        pool.len(),
        pool.bucket_sizes().len(),
        a.out.display()
    ));
    Ok(())
}

fn eval_crd(ctx: &mut Ctx, a: &EvalCrdArgs) -> CliResult<()> {
    let db = load_db(&a.db)?;
    let (_, queries) = load_queries(&a.queries, &db)?;
    let pool = match (&a.pool, a.model.uses_pool()) {
        (Some(p), true) => {
            require_input(p, "pool")?;
            let (h, pool) = QueriesPool::load(p)?;
            check_schema(&h.schema_hash, &db, p)?;
            Some(pool)
        }
        (None, true) => return Err(CliError::config("--pool is required for pool-based models")),
        _ => None,
    };
    let base = ColumnStatsModel::from_database(&db);
    let ev = match (a.model, &pool) {
        (CrdModel::Baseline, _) => eval::eval_cardinality(&base, &queries)?,
        (CrdModel::Exact, _) => eval::eval_cardinality(&ExactCardinality(&db), &queries)?,
        (CrdModel::Improved, Some(pool)) => eval::eval_cardinality(&improved(pool, &base), &queries)?,
        (CrdModel::Cnt2crdExact, Some(pool)) => {
            let rates = Crd2Cnt(ExactCardinality(&db));
            eval::eval_cardinality(&PoolEstimator::new(pool, rates, &base), &queries)?
        }
        (CrdModel::Cnt2crdCrn, Some(pool)) => {
            let m = load_model(a.checkpoint.as_deref(), &db)?;
            eval::eval_cardinality(&PoolEstimator::new(pool, &m, &base), &queries)?
        }
        (_, None) => unreachable!("pool presence checked above"),
    };
    let name = model_name(&a.model);
    write_evaluation(
        ctx,
        &ev,
        &workload_name(&a.queries),
        &name,
        &a.out,
        a.samples.as_deref(),
        &db.schema().hash(),
    )
}

fn sweep(ctx: &mut Ctx, a: &SweepArgs) -> CliResult<()> {
    if a.widths.is_empty() {
        return Err(CliError::config("--widths must list at least one hidden width"));
    }
    let db = load_db(&a.db)?;
    let (_, pairs) = load_pairs(&a.pairs, &db)?;
    let (tr, va) = qgen::split_train_validation(&pairs);
    let space = FeatureSpace::new(db.schema());
    let runs = crn::sweep_hidden(&space, &tr, &va, &a.train.config(ctx.seed()), &a.widths)?;
    prepare_output(&a.out)?;
    crn::write_sweep_csv(&a.out, &runs)?;
    ctx.sidecar(&a.out, &db.schema().hash())?;
    for (h, r) in &runs {
        ctx.say(format!(
            "hidden {h}: best epoch {} validation mean q-error {}",
            r.best_epoch, r.best_val
        ));
    }
    Ok(())
}

/// Row counts of the round-trip database: 4,000 rows in total.
fn round_trip_counts() -> BTreeMap<String, usize> {
    [
        ("title", 500),
        ("cast_info", 1500),
        ("movie_companies", 1000),
        ("movie_keyword", 1000),
    ]
    .into_iter()
    .map(|(t, n)| (t.to_string(), n))
    .collect()
}

/// Relative tolerance of the round-trip comparison.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;

fn round_trip(ctx: &mut Ctx, a: &RoundTripArgs) -> CliResult<()> {
    let schema = Schema::movies();
    let db = build_database(&schema, &round_trip_counts(), seed::substream(ctx.seed(), "db"))?;
    let cfg = GenConfig {
        max_joins: a.max_joins,
        seed: ctx.seed(),
        ..GenConfig::default()
    };
    let mut rng = seed::sub_rng(ctx.seed(), "gen");
    let pool_queries = qgen::generate_pool_queries(&cfg, &db, a.pool_size, &mut rng)?;
    let workload = qgen::generate_queries(&cfg, &db, a.n, &mut rng)?;
    let mut pool = QueriesPool::new(pool_queries, QueriesPool::DEFAULT_EPSILON, FinalFn::Median);
    pool.add_coverage(&db, a.max_joins + 1)?;

    let rates = Crd2Cnt(ExactCardinality(&db));
    let base = ColumnStatsModel::from_database(&db);
    let est = PoolEstimator::new(&pool, &rates, &base);
    let mut applicable = 0usize;
    let mut worst = 1.0f64;
    for w in &workload {
        let has_record = pool
            .same_from(&w.query)
            .map(|r| cnt2crd_single(&rates, &w.query, r))
            .collect::<crn_core::Result<Vec<_>>>()?
            .iter()
            .any(Option::is_some);
        if has_record {
            applicable += 1;
            worst = worst.max(cardinality_qerror(est.estimate(&w.query)?, w.card as f64));
        }
    }
    if let Some(out) = &a.out {
        let ev = eval::eval_cardinality(&est, &workload)?;
        write_evaluation(ctx, &ev, "round-trip", "cnt2crd-exact", out, None, &schema.hash())?;
    }
    let passed = applicable > 0 && worst - 1.0 <= ROUND_TRIP_TOLERANCE;
    ctx.say(format!(
        "round-trip {}: {applicable} of {} queries applicable, worst q-error {worst}",
        if passed { "pass" } else { "fail" },
        workload.len()
    ));
    if passed {
        Ok(())
    } else {
        Err(CliError {
            category: "check-failed",
            message: format!("round-trip worst q-error {worst} over {applicable} applicable queries"),
        })
    }
}
