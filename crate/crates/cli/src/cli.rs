//! Argument parsing and dispatch for the `mars` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Query, CHECKPOINT_DIR};
use crate::config::{RunConfig, SplitName};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mars", version, about = "Single-step retrosynthesis: data pipeline, training and beam-search inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every stage. Precedence: defaults, `--config`,
/// `--set` in order, then the dedicated flags.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Directory holding the run's artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Override one config value, e.g. `--set model.encoder.dim=128`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed for the split, parameter initialization and training.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for training batches and evaluation.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a mapped reaction file, remove the mapping shortcut and split.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Build the motif vocabulary and transformation paths.
    Build {
        #[command(flatten)]
        common: Common,
    },
    /// Train the model on the built training paths.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Hidden width D.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        max_records: Option<usize>,
        /// Continue from the last checkpoint if there is one.
        #[arg(long)]
        resume: bool,
    },
    /// Rank reactant sets for products given as SMILES.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Defaults to the run's last checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        smiles: Vec<String>,
        /// One product per line, optionally `id<TAB>smiles`.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Reaction class (1-10) when the model is class-conditioned.
        #[arg(long)]
        class: Option<u8>,
        /// Beam width.
        #[arg(short, long)]
        k: Option<usize>,
        /// Write predictions here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Top-n exact-match accuracy on a split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<SplitName>,
        #[arg(short, long)]
        k: Option<usize>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Build and replay every path; exits 3 on any mismatch.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        split: Option<SplitName>,
        /// Vocabulary to build against; by default one is built from the
        /// checked records.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Canonical SMILES for one SMILES per line, as CSV.
    Canon {
        input: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Print the effective configuration and its hash.
    ShowConfig {
        #[command(flatten)]
        common: Common,
    },
}

/// Effective configuration for `common`.
pub fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for s in &common.set {
        cfg.set(s)?;
    }
    if let Some(d) = &common.out_dir {
        cfg.data.out_dir = d.clone();
    }
    if let Some(s) = common.seed {
        cfg.data.split_seed = s;
        cfg.model.seed = s;
        cfg.train.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.train.workers = w;
        cfg.eval.workers = w;
    }
    Ok(cfg)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn checkpoint_path(cfg: &RunConfig, given: &Option<PathBuf>) -> PathBuf {
    given.clone().unwrap_or_else(|| cfg.out(CHECKPOINT_DIR).join("last.ckpt"))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { common, input } => {
            let mut cfg = resolve(&common)?;
            if input.is_some() {
                cfg.data.input = input;
            }
            let r = commands::ingest(&cfg)?;
            println!("accepted {} of {} rows; rejected {:?}", r.accepted, r.rows, r.rejected);
            println!("split train {} valid {} test {} ({})", r.train, r.valid, r.test, if r.shipped_split { "shipped" } else { "seeded" });
            println!("config {}", r.config_hash);
        }
        Command::Build { common } => {
            let cfg = resolve(&common)?;
            let r = commands::build(&cfg)?;
            println!("|Z| = {}", r.vocab_size);
            for (name, s) in &r.splits {
                println!("{name}: built {} of {}; excluded {:?}", s.built, s.total, s.rejected);
            }
            println!("round trip: {} of {} training paths replay ({:.2}%)", r.replayed, r.splits["train"].built, 100.0 * r.replay_rate);
            println!("config {}", r.config_hash);
        }
        Command::Train { common, epochs, batch_size, lr, dim, max_records, resume } => {
            let mut cfg = resolve(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(b) = batch_size {
                cfg.train.batch_size = b;
            }
            if let Some(l) = lr {
                cfg.train.lr = l;
            }
            if let Some(d) = dim {
                cfg.model.encoder.dim = d;
            }
            if max_records.is_some() {
                cfg.data.max_train_records = max_records;
            }
            let r = commands::train(&cfg, resume)?;
            println!("trained {} records for {} epochs ({} steps)", r.records, r.epochs, r.steps);
            if let Some(l) = r.epoch_losses.last() {
                println!("final loss {l:.5}");
            }
            println!("checkpoint {}", r.checkpoint.display());
        }
        Command::Predict { common, checkpoint, vocab, smiles, file, class, k, output: out } => {
            let mut cfg = resolve(&common)?;
            if let Some(k) = k {
                cfg.beam.k = k;
            }
            let mut queries: Vec<Query> = smiles
                .iter()
                .enumerate()
                .map(|(i, s)| Query { id: format!("input{}", i + 1), smiles: s.clone(), class })
                .collect();
            if let Some(f) = &file {
                queries.extend(commands::read_queries(f, class)?);
            }
            if queries.is_empty() {
                return Err(CliError::Usage("give --smiles or --file".into()));
            }
            let mut sink = output(&out)?;
            commands::predict(&cfg, &checkpoint_path(&cfg, &checkpoint), vocab.as_deref(), &queries, &mut sink)?;
        }
        Command::Eval { common, checkpoint, split, k, limit } => {
            let mut cfg = resolve(&common)?;
            if let Some(s) = split {
                cfg.eval.split = s;
            }
            if let Some(k) = k {
                cfg.beam.k = k;
            }
            if limit.is_some() {
                cfg.eval.limit = limit;
            }
            let r = commands::eval(&cfg, &checkpoint_path(&cfg, &checkpoint))?;
            print!("{}", r.table());
            println!("config {}", r.config_hash);
        }
        Command::Roundtrip { common, split, vocab } => {
            let cfg = resolve(&common)?;
            let r = commands::roundtrip(&cfg, split, vocab.as_deref())?;
            println!(
                "built {} of {} ({:.2}%); replayed {} ({:.2}%); rejected {:?}",
                r.built,
                r.total,
                100.0 * r.build_rate,
                r.replayed,
                100.0 * r.replay_rate,
                r.rejected
            );
            for m in &r.mismatches {
                print!("{}", commands::mismatch_diff(m));
            }
            if !r.mismatches.is_empty() {
                return Err(CliError::Verification(format!("{} paths did not replay", r.mismatches.len())));
            }
        }
        Command::Canon { input, output: out } => {
            let rows = commands::canon(&input)?;
            let mut sink = output(&out)?;
            commands::write_canon_csv(&rows, &mut sink)?;
        }
        Command::ShowConfig { common } => {
            let cfg = resolve(&common)?;
            print!("{}", cfg.to_toml());
            println!("# config hash {}", cfg.hash());
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
