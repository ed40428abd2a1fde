use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paragse_cli::*;

#[derive(Parser)]
#[command(name = "paragse", version, about = "Codec-token speech enhancement toolkit")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set enhancer.lr=0.05`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run seed (falls back to the config, then PARAGSE_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a degraded/clean corpus with a manifest.
    MakeCorpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the codec and its quantizers on a corpus.
    TrainCodec {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a parallel or serial token enhancer against a frozen codec.
    TrainEnhancer {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        /// Per-epoch loss and accuracy table.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Enhance one WAV file.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        /// Check the model against this codec file.
        #[arg(long)]
        codec: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        dump_tokens: Option<PathBuf>,
    },
    /// LSD, SNR and token accuracy over a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        codec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Real-time factor of the parallel and serial pipelines.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        serial_model: PathBuf,
        #[arg(long)]
        codec: Option<PathBuf>,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Write the table here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides;
    match &cli.command {
        Command::TrainEnhancer { mode: Some(m), .. } => overrides.push(format!("enhancer.mode={}", mode_name(*m))),
        Command::Enhance { workers: Some(w), .. } | Command::Eval { workers: Some(w), .. } => {
            overrides.push(format!("workers={w}"))
        }
        _ => {}
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides, cli.seed)?;
    match cli.command {
        Command::MakeCorpus { out } => {
            let s = make_corpus(&cfg, &out)?;
            println!("manifest={}\nutterances={}\nseconds={}", s.manifest.display(), s.utterances, s.seconds);
        }
        Command::TrainCodec { manifest, out } => {
            print!("{}", train_codec(&cfg, &manifest, &out)?.to_text());
        }
        Command::TrainEnhancer {
            manifest,
            codec,
            out,
            report,
            ..
        } => {
            let r = train_enhancer_cmd(&cfg, &manifest, &codec, &out)?;
            let text = train_report_text(&r);
            if let Some(p) = report {
                std::fs::write(&p, &text).map_err(|e| CliError::io(&p, e))?;
            }
            print!("{text}");
            println!("model_checksum={}", file_checksum(&out)?);
        }
        Command::Enhance {
            model,
            codec,
            input,
            output,
            mode,
            dump_tokens,
            ..
        } => {
            let m = open_enhancer(&model, codec.as_deref(), mode)?;
            let s = enhance_cmd(&m, &input, &output, cfg.workers, dump_tokens.as_deref())?;
            println!("frames={}\nseconds={}\noutput_checksum={}", s.frames, s.seconds, s.output_checksum);
        }
        Command::Eval {
            manifest,
            model,
            codec,
            out,
            ..
        } => {
            let m = open_enhancer(&model, codec.as_deref(), None)?;
            print!("{}", eval_cmd(&m, &manifest, &out, cfg.workers)?.summary());
        }
        Command::Bench {
            model,
            serial_model,
            codec,
            duration,
            workers_list,
            repeats,
            out,
        } => {
            let p = open_enhancer(&model, codec.as_deref(), Some(Mode::Parallel))?;
            let s = open_enhancer(&serial_model, codec.as_deref(), Some(Mode::Serial))?;
            let audio = bench_audio(duration, cfg.seed)?;
            let table = bench_cmd(&p, &s, &audio, &workers_list, repeats)?.table();
            if let Some(o) = out {
                std::fs::write(&o, &table).map_err(|e| CliError::io(&o, e))?;
            }
            print!("{table}");
        }
    }
    Ok(())
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Parallel => "parallel",
        Mode::Serial => "serial",
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
