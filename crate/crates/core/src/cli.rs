//! Command-line entry point: ingest, train, evaluate, serve, predict,
//! summary and fetch.
//!
//! Settings come from an optional JSON config file; every key can be
//! overridden by the long flag of the same name with dashes. Standard output
//! carries only JSON; diagnostics go to standard error.

use std::ffi::OsString;
use std::io::{BufWriter, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::api::{self, InlineDocument, PredictResponse};
use crate::error::{Error, Result};
use crate::features::{FeatureSchema, assemble_features};
use crate::ingest::{QuarantineRecord, ingest_path_with_jobs};
use crate::model::{
    ClockOrigin, Split, TrainConfig, TrainedModelBundle, build_dataset, evaluate_split, predict_grant_lag,
    train_and_select,
};
use crate::store::{AliasTable, EntityKey, EntityKind, PatentStore};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

/// Contents of the JSON config file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub store_path: Option<PathBuf>,
    pub alias_table_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub hash_dim: Option<usize>,
    pub ngram_orders: Option<Vec<usize>>,
    pub lambda_grid: Option<Vec<f64>>,
    pub rounds_grid: Option<Vec<usize>>,
    pub alpha: Option<f64>,
    pub split_seed: Option<u64>,
    pub clock_origin: Option<ClockOrigin>,
    pub trained_at: Option<DateTime<Utc>>,
    pub host: Option<IpAddr>,
    pub port: Option<u16>,
}

impl RunConfig {
    /// Fill every field set in `over`, keeping the rest.
    fn merge(mut self, over: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            store_path,
            alias_table_path,
            model_path,
            hash_dim,
            ngram_orders,
            lambda_grid,
            rounds_grid,
            alpha,
            split_seed,
            clock_origin,
            trained_at,
            host,
            port
        );
        self
    }

    fn store_path(&self) -> Result<&Path> {
        self.store_path
            .as_deref()
            .filter(|p| !p.as_os_str().is_empty())
            .ok_or_else(|| Error::InvalidArgument("store_path is required (--store-path or config)".into()))
    }

    fn model_path(&self) -> Result<&Path> {
        self.model_path
            .as_deref()
            .filter(|p| !p.as_os_str().is_empty())
            .ok_or_else(|| Error::InvalidArgument("model_path is required (--model-path or config)".into()))
    }

    fn aliases(&self) -> Result<AliasTable> {
        match &self.alias_table_path {
            Some(p) => AliasTable::load(p),
            None => Ok(AliasTable::shipped()),
        }
    }

    fn open_store(&self) -> Result<PatentStore> {
        PatentStore::open(self.store_path()?, self.aliases()?)
    }

    fn schema(&self) -> Result<FeatureSchema> {
        let default = FeatureSchema::default();
        FeatureSchema::new(
            self.hash_dim.unwrap_or(default.hash_dim),
            self.ngram_orders.as_deref().unwrap_or(&default.ngram_orders),
        )
    }

    fn train_config(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let alpha = self.alpha.unwrap_or(d.alpha);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
        }
        Ok(TrainConfig {
            lambda_grid: self.lambda_grid.clone().unwrap_or(d.lambda_grid),
            rounds_grid: self.rounds_grid.clone().unwrap_or(d.rounds_grid),
            alpha,
            split_seed: self.split_seed.unwrap_or(d.split_seed),
            clock_origin: self.clock_origin.unwrap_or(d.clock_origin),
            trained_at: self.trained_at.or(d.trained_at),
            ..d
        })
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',').map(|p| p.trim().parse().map_err(|_| format!("invalid list element {p:?}"))).collect()
}

fn parse_origin(s: &str) -> std::result::Result<ClockOrigin, String> {
    match s {
        "filing_date" => Ok(ClockOrigin::FilingDate),
        "publication_date" => Ok(ClockOrigin::PublicationDate),
        _ => Err("expected filing_date or publication_date".into()),
    }
}

#[derive(Debug, Args, Default)]
struct ConfigFlags {
    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, visible_alias = "store", global = true)]
    store_path: Option<PathBuf>,
    #[arg(long, visible_alias = "aliases", global = true)]
    alias_table_path: Option<PathBuf>,
    #[arg(long, visible_alias = "model", global = true)]
    model_path: Option<PathBuf>,
    #[arg(long, global = true)]
    hash_dim: Option<usize>,
    /// Comma-separated, e.g. `1,2`.
    #[arg(long, global = true, value_parser = parse_list::<usize>)]
    ngram_orders: Option<Vec<usize>>,
    #[arg(long, global = true, value_parser = parse_list::<f64>)]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, global = true, value_parser = parse_list::<usize>)]
    rounds_grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    split_seed: Option<u64>,
    /// filing_date or publication_date.
    #[arg(long, global = true, value_parser = parse_origin)]
    clock_origin: Option<ClockOrigin>,
    /// RFC 3339 timestamp recorded in the bundle, for reproducible output.
    #[arg(long, global = true)]
    trained_at: Option<DateTime<Utc>>,
    #[arg(long, global = true)]
    host: Option<IpAddr>,
    #[arg(long, global = true)]
    port: Option<u16>,
}

impl ConfigFlags {
    fn resolve(self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        Ok(file.merge(RunConfig {
            store_path: self.store_path,
            alias_table_path: self.alias_table_path,
            model_path: self.model_path,
            hash_dim: self.hash_dim,
            ngram_orders: self.ngram_orders,
            lambda_grid: self.lambda_grid,
            rounds_grid: self.rounds_grid,
            alpha: self.alpha,
            split_seed: self.split_seed,
            clock_origin: self.clock_origin,
            trained_at: self.trained_at,
            host: self.host,
            port: self.port,
        }))
    }
}

#[derive(Debug, Parser)]
#[command(name = "patent-analytics", version, about = "Patent grant-lag analytics and prediction")]
struct Cli {
    #[command(flatten)]
    flags: ConfigFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse XML files into the store and print the ingest report.
    Ingest {
        /// An .xml file or a directory of them.
        #[arg(long)]
        input: PathBuf,
        /// Also write every accepted document as JSON lines.
        #[arg(long)]
        export_jsonl: Option<PathBuf>,
        /// Write quarantine records as JSON lines.
        #[arg(long)]
        quarantine_log: Option<PathBuf>,
        /// Parser threads; defaults to the available parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Train the model grid, keep the best by test MAE, write the bundle.
    Train,
    /// Score the bundle on the test split of the store.
    Evaluate,
    /// Run the HTTP API.
    Serve,
    /// Predict one inline document read as JSON from a file or stdin.
    Predict {
        /// Input file; `-` or absent reads standard input.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print summary statistics of one inventor or organisation.
    Summary {
        /// inventor or org.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        id: String,
    },
    /// Print bulk-data URLs for a date range without downloading.
    Fetch {
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        /// grant or application.
        #[arg(long, default_value = "grant")]
        kind: String,
    },
}

/// Run with `argv` (program name first) and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() { EXIT_USER } else { EXIT_INTERNAL }
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn execute(cli: Cli) -> Result<()> {
    let config = cli.flags.resolve()?;
    match cli.command {
        Command::Ingest { input, export_jsonl, quarantine_log, jobs } => {
            ingest(&config, &input, export_jsonl.as_deref(), quarantine_log.as_deref(), jobs)
        }
        Command::Train => train(&config),
        Command::Evaluate => evaluate(&config),
        Command::Serve => serve(&config),
        Command::Predict { input } => predict(&config, input.as_deref()),
        Command::Summary { kind, id } => {
            let kind = EntityKind::parse_segment(&kind)
                .ok_or_else(|| Error::InvalidArgument(format!("kind must be inventor or org, got {kind:?}")))?;
            let store = config.open_store()?;
            print_json(&store.entity_summary(&EntityKey { kind, canonical_id: id })?)
        }
        Command::Fetch { from, to, kind } => print_json(&bulk_urls(from, to, &kind)?),
    }
}

fn create(path: &Path) -> Result<BufWriter<std::fs::File>> {
    std::fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn ingest(
    config: &RunConfig,
    input: &Path,
    export: Option<&Path>,
    quarantine: Option<&Path>,
    jobs: Option<usize>,
) -> Result<()> {
    let mut store = config.open_store()?;
    let mut export = export.map(|p| create(p).map(|w| (p, w))).transpose()?;
    let mut fatal: Option<Error> = None;
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = {
        let mut sink = |doc: crate::PatentDocument| -> std::result::Result<(), String> {
            if fatal.is_some() {
                return Err("ingest aborted".into());
            }
            if let Some((path, w)) = export.as_mut() {
                let line = serde_json::to_string(&doc).map_err(|e| e.to_string())?;
                if let Err(e) = writeln!(w, "{line}") {
                    fatal = Some(Error::io(*path, e));
                    return Err("ingest aborted".into());
                }
            }
            match store.upsert_patent(doc) {
                Ok(_) => Ok(()),
                Err(e @ (Error::Io { .. } | Error::CorruptStore(_))) => {
                    let msg = e.to_string();
                    fatal = Some(e);
                    Err(msg)
                }
                Err(e) => Err(e.to_string()),
            }
        };
        ingest_path_with_jobs(input, &mut sink, jobs)?
    };
    if let Some(e) = fatal {
        return Err(e);
    }
    if let Some((path, mut w)) = export {
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    store.flush()?;
    if let Some(path) = quarantine {
        write_quarantine(path, &report.quarantine_records)?;
    }
    print_json(&report)
}

fn write_quarantine(path: &Path, records: &[QuarantineRecord]) -> Result<()> {
    let mut w = create(path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    model_id: &'a str,
    schema_id: &'a str,
    learner: &'a str,
    metrics: crate::model::Metrics,
    train_rows: usize,
    calibration_rows: usize,
    test_rows: usize,
    candidates: &'a [crate::model::CandidateReport],
}

fn train(config: &RunConfig) -> Result<()> {
    let model_path = config.model_path()?.to_path_buf();
    let store = config.open_store()?;
    let outcome = train_and_select(&store, &config.schema()?, &config.train_config()?)?;
    outcome.bundle.save(&model_path)?;
    let b = &outcome.bundle;
    print_json(&TrainSummary {
        model_id: &b.model_id,
        schema_id: &b.schema_id,
        learner: &b.learner,
        metrics: b.metrics,
        train_rows: outcome.dataset_sizes[0],
        calibration_rows: outcome.dataset_sizes[1],
        test_rows: outcome.dataset_sizes[2],
        candidates: &outcome.candidates,
    })
}

fn evaluate(config: &RunConfig) -> Result<()> {
    let bundle = TrainedModelBundle::load(config.model_path()?)?;
    let store = config.open_store()?;
    let tc = config.train_config()?;
    let dataset = build_dataset(&store, &bundle.schema, tc.clock_origin, tc.split_seed, tc.fractions)?;
    print_json(&evaluate_split(&bundle, &dataset, Split::Test)?)
}

fn serve(config: &RunConfig) -> Result<()> {
    let store = config.open_store()?;
    let model = config.model_path.as_deref().map(TrainedModelBundle::load).transpose()?;
    let addr = SocketAddr::new(config.host.unwrap_or(IpAddr::from([127, 0, 0, 1])), config.port.unwrap_or(8080));
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(api::serve(api::AppState::new(store, model), addr)).map_err(|e| Error::io(addr.to_string(), e))
}

fn predict(config: &RunConfig, input: Option<&Path>) -> Result<()> {
    let bundle = TrainedModelBundle::load(config.model_path()?)?;
    let text = match input {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| Error::io("<stdin>", e))?;
            s
        }
    };
    let inline: InlineDocument =
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("inline document: {e}")))?;
    let doc = inline.into_document()?;
    let result = predict_grant_lag(&bundle, &assemble_features(&doc, &bundle.schema))?;
    print_json(&PredictResponse::new(&bundle.model_id, &result))
}

#[derive(Debug, Serialize)]
struct BulkFile {
    date: NaiveDate,
    url: String,
}

/// Weekly bulk full-text files: grants issue on Tuesdays, applications
/// publish on Thursdays.
fn bulk_urls(from: NaiveDate, to: NaiveDate, kind: &str) -> Result<Vec<BulkFile>> {
    if from > to {
        return Err(Error::InvalidRange(format!("{from} is after {to}")));
    }
    let (weekday, segment, prefix) = match kind {
        "grant" => (Weekday::Tue, "grant", "ipg"),
        "application" => (Weekday::Thu, "application", "ipa"),
        _ => return Err(Error::InvalidArgument(format!("kind must be grant or application, got {kind:?}"))),
    };
    let shift = (7 + weekday.num_days_from_monday() - from.weekday().num_days_from_monday()) % 7;
    let mut day = from + Duration::days(i64::from(shift));
    let mut out = Vec::new();
    while day <= to {
        out.push(BulkFile {
            date: day,
            url: format!(
                "https://bulkdata.uspto.gov/data/patent/{segment}/redbook/fulltext/{}/{prefix}{}.zip",
                day.year(),
                day.format("%y%m%d")
            ),
        });
        day += Duration::days(7);
    }
    Ok(out)
}
