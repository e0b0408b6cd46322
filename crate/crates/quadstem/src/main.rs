//! Command-line entry point for the four-stem separation toolkit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use quadstem::config::ProjectConfig;
use quadstem::datagen::{
    build_manifest, index_pools, split_pools, synthesize_example, validate_pools, write_example,
    write_manifest, StemPools,
};
use quadstem::dsp::{read_audio, resample, write_wav};
use quadstem::error::QuadstemError;
use quadstem::eval::{
    aggregate, evaluate_track, read_records, render_table, to_csv, write_records,
};
use quadstem::model::network::{forward_bandit, forward_banquet};
use quadstem::model::{load_checkpoint, Arch, ModelParams};
use quadstem::stem::{SetupKind, Stem};
use quadstem::training::{train, Dataset};

#[derive(Parser)]
#[command(name = "quadstem", version, about = "Four-stem cinematic audio separation")]
struct Cli {
    /// Project configuration file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for data generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Experimental setup: inst | combined | split.
    #[arg(long, global = true)]
    setup: Option<String>,

    /// Architecture: bandit | banquet.
    #[arg(long, global = true)]
    arch: Option<String>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Compute device id (informational; execution is CPU-only).
    #[arg(long, global = true)]
    device: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a source tree into a stem pool index.
    IndexPools(IndexPoolsArgs),
    /// Synthesize train/val/test mixtures from indexed pools.
    Datagen(DatagenArgs),
    /// Train a model on a generated dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split, writing JSONL records.
    Evaluate(EvaluateArgs),
    /// Aggregate evaluation records into a median/effect-size table.
    Compare(CompareArgs),
    /// Extract query vectors from a checkpoint and emit a clustermap.
    Analyze(AnalyzeArgs),
    /// Separate a single audio file into stem files.
    Separate(SeparateArgs),
    /// Print the full effective configuration.
    ConfigDump,
}

#[derive(Args)]
struct IndexPoolsArgs {
    /// Source tree with dx/, mx_v/, mx_i/, fx/ subdirectories.
    #[arg(long)]
    root: PathBuf,
    /// Output pool index (JSONL). Defaults to <cache>/pools.jsonl.
    #[arg(long)]
    pools: Option<PathBuf>,
}

#[derive(Args)]
struct DatagenArgs {
    /// Pool index produced by index-pools.
    #[arg(long)]
    pools: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root produced by datagen (contains train/, and optionally val/).
    #[arg(long)]
    data: PathBuf,
    /// Resume from <out>/last.ckpt when present.
    #[arg(long, default_value_t = false)]
    resume: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset root produced by datagen.
    #[arg(long)]
    data: PathBuf,
    /// Dataset split to score (defaults to the configured evaluation split).
    #[arg(long)]
    split: Option<String>,
    /// Model id recorded in the output (defaults to the architecture name).
    #[arg(long)]
    model_id: Option<String>,
    /// Output records path (JSONL).
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Record files to aggregate (repeatable).
    #[arg(long, num_args = 1.., required = true)]
    records: Vec<PathBuf>,
    /// Optional CSV output path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct SeparateArgs {
    /// Input audio file (wav or flac).
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated stems to write (defaults to all model stems).
    #[arg(long)]
    stems: Option<String>,
}

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_RUNTIME: u8 = 1;

fn exit_code_for(err: &QuadstemError) -> u8 {
    match err {
        QuadstemError::InvalidInput(_) => EXIT_USAGE,
        QuadstemError::Config(_) => EXIT_CONFIG,
        QuadstemError::Data(_) | QuadstemError::AudioIo { .. } => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn cache_dir() -> PathBuf {
    std::env::var_os("QUADSTEM_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".quadstem-cache"))
}

fn load_config(cli: &Cli) -> Result<ProjectConfig, QuadstemError> {
    let mut cfg = match &cli.config {
        Some(path) => ProjectConfig::load(path)?,
        None => ProjectConfig::default(),
    };
    if let Some(setup) = &cli.setup {
        SetupKind::from_str(setup)?;
        cfg.model.setup = setup.clone();
    }
    if let Some(arch) = &cli.arch {
        Arch::from_str(arch)?;
        cfg.model.arch = arch.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.training.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), QuadstemError> {
    let cfg = load_config(cli)?;
    if let Some(device) = &cli.device {
        log::info!("device '{device}' requested; running on CPU");
    }
    match &cli.command {
        Command::ConfigDump => {
            print!("{}", cfg.dump());
            Ok(())
        }
        Command::IndexPools(args) => {
            let pools = index_pools(&args.root)?;
            let report = validate_pools(&pools);
            let out = args
                .pools
                .clone()
                .unwrap_or_else(|| cache_dir().join("pools.jsonl"));
            pools.write_jsonl(&out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            println!("indexed {} entries -> {}", pools.entries.len(), out.display());
            if !report.is_clean() {
                return Err(QuadstemError::Data(
                    "pool validation reported problems (see report above)".into(),
                ));
            }
            Ok(())
        }
        Command::Datagen(args) => {
            let pools = StemPools::read_jsonl(&args.pools)?;
            let setup = SetupKind::from_str(&cfg.model.setup)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            let seed = cfg.training.seed;
            let splits = split_pools(&pools, seed);
            let dg = &cfg.datagen;
            for (split, n) in
                [("train", dg.n_train), ("val", dg.n_val), ("test", dg.n_test)]
            {
                if n == 0 {
                    continue;
                }
                let split_pools = &splits[split];
                let split_seed = seed ^ (split.len() as u64) << 32 | split.as_bytes()[1] as u64;
                let manifest = build_manifest(
                    split_pools,
                    setup,
                    n,
                    dg.duration_secs,
                    dg.sample_rate,
                    split_seed,
                    &dg.levels,
                )?;
                write_manifest(&out.join(format!("{split}.manifest.jsonl")), &manifest)?;
                let results: Vec<Result<(), QuadstemError>> = manifest
                    .par_iter()
                    .map(|entry| {
                        let example = synthesize_example(entry)?;
                        write_example(&out, split, &example)?;
                        Ok(())
                    })
                    .collect();
                results.into_iter().collect::<Result<Vec<_>, _>>()?;
                println!("{split}: {n} examples -> {}", out.join(split).display());
            }
            Ok(())
        }
        Command::Train(args) => {
            let model_cfg = cfg.model.to_model_config()?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs/default"));
            if !args.resume && out.join("last.ckpt").exists() {
                return Err(QuadstemError::Config(format!(
                    "{} exists; pass --resume to continue or choose a fresh --out",
                    out.join("last.ckpt").display()
                )));
            }
            let train_set = Dataset::from_dir(&args.data.join("train"), &model_cfg.stems)?;
            let val_dir = args.data.join("val");
            let val_set = if val_dir.is_dir() {
                Some(Dataset::from_dir(&val_dir, &model_cfg.stems)?)
            } else {
                None
            };
            let mut params = ModelParams::init(&model_cfg, cfg.training.seed);
            let outcome = train(
                &model_cfg,
                &mut params,
                &train_set,
                val_set.as_ref(),
                &cfg.training,
                &out,
            )?;
            println!(
                "trained {} steps: loss {:.6} -> {:.6} (checkpoint {})",
                outcome.steps_run,
                outcome.initial_loss,
                outcome.final_loss,
                outcome.last_checkpoint.display()
            );
            Ok(())
        }
        Command::Evaluate(args) => {
            let (model_cfg, params, _) = load_checkpoint(&args.checkpoint)?;
            let setup = SetupKind::from_str(&cfg.model.setup)?;
            let split = args.split.clone().unwrap_or_else(|| cfg.evaluation.split.clone());
            let data = Dataset::from_dir(&args.data.join(&split), &model_cfg.stems)?;
            let model_id = args
                .model_id
                .clone()
                .unwrap_or_else(|| model_cfg.arch.to_string());
            let records: Vec<_> = data
                .examples
                .par_iter()
                .map(|ex| {
                    evaluate_track(
                        &model_cfg, &params, setup, &ex.id, &model_id, &ex.mixture, &ex.stems,
                    )
                })
                .collect::<Result<_, _>>()?;
            let out = args
                .records
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{model_id}.{split}.records.jsonl")));
            write_records(&out, &records)?;
            println!("{} tracks -> {}", records.len(), out.display());
            Ok(())
        }
        Command::Compare(args) => {
            let mut records = Vec::new();
            for path in &args.records {
                records.extend(read_records(path)?);
            }
            let summary = aggregate(&records)?;
            print!("{}", render_table(&summary));
            if let Some(csv_path) = &args.csv {
                std::fs::write(csv_path, to_csv(&summary))?;
                println!("csv -> {}", csv_path.display());
            }
            Ok(())
        }
        Command::Analyze(args) => {
            let (model_cfg, params, _) = load_checkpoint(&args.checkpoint)?;
            let queries = quadstem::analysis::extract_queries(&model_cfg, &params)?;
            let normalized = quadstem::analysis::z_normalize(&queries);
            let order = quadstem::analysis::cluster_order(&normalized)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("analysis"));
            let (png, csv) =
                quadstem::analysis::emit_clustermap(&normalized, &order, &out.join("clustermap"))?;
            println!("clustermap -> {} and {}", png.display(), csv.display());
            Ok(())
        }
        Command::Separate(args) => {
            let (model_cfg, params, _) = load_checkpoint(&args.checkpoint)?;
            let stems: Vec<Stem> = match &args.stems {
                Some(list) => list
                    .split(',')
                    .map(|s| Stem::from_str(s.trim()))
                    .collect::<Result<_, _>>()?,
                None => model_cfg.stems.clone(),
            };
            let mut wave = read_audio(&args.input)?;
            if wave.sample_rate != model_cfg.sample_rate {
                wave = resample(&wave, model_cfg.sample_rate)?;
            }
            let estimates: BTreeMap<Stem, _> = match model_cfg.arch {
                Arch::Banquet => forward_banquet(&wave, &params, &model_cfg, &stems)?,
                Arch::Bandit => {
                    let mut all = forward_bandit(&wave, &params, &model_cfg)?;
                    for stem in &stems {
                        if !all.contains_key(stem) {
                            return Err(QuadstemError::InvalidInput(format!(
                                "model does not produce stem {stem}"
                            )));
                        }
                    }
                    all.retain(|s, _| stems.contains(s));
                    all
                }
            };
            let out_dir = cli
                .out
                .clone()
                .unwrap_or_else(|| args.input.parent().unwrap_or(Path::new(".")).to_path_buf());
            let base = args.input.file_stem().unwrap().to_string_lossy().into_owned();
            for (stem, est) in &estimates {
                let path = out_dir.join(format!("{base}.{}.wav", stem.file_token()));
                write_wav(&path, est)?;
                println!("{stem} -> {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
