mod config;
mod pgm;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdrestore::audio::{read_wav, write_wav, write_wav_float, AudioBuffer};
use hdrestore::checkpoint::Checkpoint;
use hdrestore::eval::evaluate;
use hdrestore::model::{count_params, forward, ModelConfig, ModelParams};
use hdrestore::sim::{generate_corpus, list_wavs, CorpusManifest, CorpusOptions, Subset};
use hdrestore::train::{load_model, train, TrainData, Trainer};
use hdrestore::verify::{run_suite, Suite};
use hdrestore::Error;

use crate::config::RunConfig;

/// Dual-decoder speech restoration: simulate, train, restore, evaluate.
#[derive(Parser, Debug)]
#[command(name = "hdrestore", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a distorted corpus and manifest from clean WAVs.
    Simulate(SimulateArgs),
    /// Train a model on a manifest, writing checkpoints and a metrics log.
    Train(TrainArgs),
    /// Restore one WAV file or every WAV in a directory.
    Restore(RestoreArgs),
    /// Score a checkpoint on a manifest and write a report.
    Evaluate(EvaluateArgs),
    /// Run built-in correctness checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// INI file with [model], [train] and [simulate] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set train.lr=1e-3`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Directory of clean 16 kHz WAV files.
    #[arg(long)]
    clean_dir: PathBuf,
    /// Output directory for distorted WAVs and manifest.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    /// Distortion subset: N (noise), R (reverb + noise), B (bandlimit), A (all).
    #[arg(long)]
    subset: Option<String>,
    /// Parameter ranges: train or test.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of records; defaults to one per clean file.
    #[arg(long)]
    count: Option<usize>,
    /// Draw noise from WAVs in this directory instead of synthesising it.
    #[arg(long)]
    noise_dir: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Training manifest produced by `simulate`.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for checkpoints and metrics.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Continue from this checkpoint; its stored configuration is used.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RestoreArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Input WAV file or directory of WAV files.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output WAV file, or directory (created if needed) for directory input.
    #[arg(long)]
    out: PathBuf,
    /// Also write mask, fusion weight and refined signal as float WAVs at the
    /// internal rate, plus log-magnitude spectrogram PGM images.
    #[arg(long)]
    dump_trace: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// N, R, B, A or all.
    #[arg(long, default_value = "all")]
    subset: String,
    /// Report path (TSV).
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// gradcheck, params, dsp or all.
    #[arg(long, default_value = "all")]
    suite: String,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Usage(String),
    Checks(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Lib(e) => match e {
                Error::Io { .. } | Error::Wav { .. } | Error::Manifest { .. } | Error::Corrupt(_) | Error::FormatVersionMismatch { .. } => 2,
                Error::EmptyInput | Error::ManifestEmpty => 3,
                Error::NonFiniteLoss { .. } | Error::NonFiniteGradient(_) => 4,
                Error::SampleRateMismatch { .. } => 5,
                _ => 1,
            },
            Failure::Usage(_) | Failure::Checks(_) => 1,
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn echo_config(cfg: &RunConfig) {
    for line in cfg.effective_lines() {
        eprintln!("config {line}");
    }
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut cfg = RunConfig::resolve(a.cfg.config.as_deref(), &a.cfg.overrides)?;
    let s = &mut cfg.simulate;
    if let Some(v) = &a.subset {
        s.set("subset", v)?;
    }
    if let Some(v) = &a.split {
        s.set("split", v)?;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.count {
        s.count = Some(v);
    }
    if let Some(d) = a.noise_dir {
        s.noise = hdrestore::sim::NoiseSource::Dir(d);
    }
    echo_config(&cfg);
    let files = list_wavs(&a.clean_dir)?;
    if files.is_empty() {
        eprintln!("no WAV files in {}", a.clean_dir.display());
        return Err(Error::EmptyInput.into());
    }
    let s = &cfg.simulate;
    let opts = CorpusOptions {
        subset: s.subset,
        split: s.split,
        seed: s.seed,
        count: s.count.unwrap_or(files.len()),
        noise: s.noise.clone(),
    };
    if opts.count == 0 {
        eprintln!("--count must be positive");
        return Err(Error::EmptyInput.into());
    }
    let m = generate_corpus(&files, &a.out_dir, &opts)?;
    println!("{} records written to {}", m.records.len(), a.out_dir.join(hdrestore::sim::MANIFEST_NAME).display());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let cfg = RunConfig::resolve(a.cfg.config.as_deref(), &a.cfg.overrides)?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let mut trainer = match &a.resume {
        Some(p) => {
            let t = Trainer::<f32>::from_checkpoint(&Checkpoint::load(p)?)?;
            eprintln!("resuming {} at step {} with its stored configuration", p.display(), t.state.step);
            t
        }
        None => Trainer::<f32>::new(cfg.model.clone(), cfg.train.clone())?,
    };
    let effective = RunConfig {
        model: trainer.model_cfg.clone(),
        train: trainer.train_cfg.clone(),
        simulate: cfg.simulate,
    };
    echo_config(&effective);
    eprintln!("model parameters: {}", count_params(&trainer.model_cfg));
    let data = TrainData::<f32>::from_manifest(&manifest)?;
    std::fs::create_dir_all(&a.out).map_err(|source| Error::Io { path: a.out.clone(), source })?;
    let ini = a.out.join("config.ini");
    std::fs::write(&ini, effective.to_ini()).map_err(|source| Error::Io { path: ini, source })?;
    let total = trainer.train_cfg.total_steps;
    let every = (total / 100).max(1);
    let fin = train(&mut trainer, &data, &a.out, |r| {
        if r.step % every == 0 || r.step + 1 == total {
            eprintln!(
                "step {:>6}/{total} {} lr {:.3e} l_time {:.5} l_freq {:.5} total {:.5}",
                r.step + 1,
                r.phase,
                r.lr,
                r.loss.l_time,
                r.loss.l_freq,
                r.loss.total
            );
        }
    })?;
    println!("{}", fin.display());
    Ok(())
}

fn mirrored_jobs(input: &Path, out: &Path) -> std::result::Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if input.is_dir() {
        let files = list_wavs(input)?;
        if files.is_empty() {
            eprintln!("no WAV files in {}", input.display());
            return Err(Error::EmptyInput.into());
        }
        std::fs::create_dir_all(out).map_err(|source| Error::Io { path: out.to_path_buf(), source })?;
        Ok(files
            .into_iter()
            .map(|f| {
                let name = f.file_name().map(PathBuf::from).unwrap_or_default();
                (f, out.join(name))
            })
            .collect())
    } else if out.is_dir() {
        let name = input
            .file_name()
            .ok_or_else(|| Failure::Usage(format!("{} is not a file", input.display())))?;
        Ok(vec![(input.to_path_buf(), out.join(name))])
    } else {
        Ok(vec![(input.to_path_buf(), out.to_path_buf())])
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn dump_trace(
    out: &Path,
    input: &AudioBuffer<f32>,
    trace: &hdrestore::model::ForwardTrace<f32>,
    cfg: &ModelConfig,
) -> hdrestore::Result<()> {
    let up_rate = input.sample_rate * cfg.resample_factor as u32;
    let up_len = input.len() * cfg.resample_factor;
    let named = [("mask", &trace.mask), ("w", &trace.w), ("refined", &trace.refined)];
    for (name, sig) in named {
        if let Some(s) = sig {
            let s = s[..up_len.min(s.len())].to_vec();
            write_wav_float(with_suffix(out, &format!("{name}.wav")), &AudioBuffer::new(s, up_rate))?;
        }
    }
    pgm::write_spectrogram(&with_suffix(out, "input.pgm"), &input.samples)?;
    pgm::write_spectrogram(&with_suffix(out, "restored.pgm"), &trace.x_hat)?;
    if let Some(m) = &trace.mask {
        let masked: Vec<f32> = m.iter().zip(&trace.y_up).map(|(a, b)| a * b).take(up_len).collect();
        pgm::write_spectrogram(&with_suffix(out, "masked.pgm"), &masked)?;
    }
    if let Some(r) = &trace.refined {
        pgm::write_spectrogram(&with_suffix(out, "refined.pgm"), &r[..up_len.min(r.len())])?;
    }
    Ok(())
}

fn cmd_restore(a: RestoreArgs) -> CmdResult {
    let (cfg, params): (ModelConfig, ModelParams<f32>) = load_model(&a.ckpt)?;
    for (src, dst) in mirrored_jobs(&a.input, &a.out)? {
        let y: AudioBuffer<f32> = read_wav(&src)?;
        if y.is_empty() {
            eprintln!("{} is empty", src.display());
            return Err(Error::EmptyInput.into());
        }
        let trace = forward(&y, &params, &cfg)?;
        write_wav(&dst, &AudioBuffer::new(trace.x_hat.clone(), y.sample_rate))?;
        if a.dump_trace {
            dump_trace(&dst, &y, &trace, &cfg)?;
        }
        println!("{} -> {}", src.display(), dst.display());
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    let subset = match a.subset.as_str() {
        "all" => None,
        s => Some(s.parse::<Subset>()?),
    };
    let (cfg, params): (ModelConfig, ModelParams<f32>) = load_model(&a.ckpt)?;
    let manifest = CorpusManifest::read(&a.manifest)?;
    let report = evaluate(&manifest, &params, &cfg, subset)?;
    report.write(&a.report)?;
    for line in report.summary_lines() {
        eprintln!("{line}");
    }
    println!("{}", a.report.display());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let suites = match a.suite.as_str() {
        "all" => Suite::ALL.to_vec(),
        s => vec![s.parse::<Suite>()?],
    };
    let mut failed = 0;
    for suite in suites {
        for c in run_suite(suite)? {
            println!("[{suite}] {c}");
            failed += usize::from(!c.passed);
        }
    }
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
        Command::Restore(a) => cmd_restore(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Checks(n) => eprintln!("{n} check(s) failed"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
