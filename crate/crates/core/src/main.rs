use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctt_core::config::{RunConfig, SchemeName};
use ctt_core::data::{parse_corpus, synth_generate, tokenize, write_corpus};
use ctt_core::decoding::{chunk_decode, tag_offline, Emission, StreamDecoder};
use ctt_core::eval::{bench, score};
use ctt_core::model::checkpoint;
use ctt_core::training::{train, Init};
use ctt_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ctt", version, about = "Streaming punctuation and disfluency tagging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        /// Output corpus file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, short = 'n')]
        utterances: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train a model and write its checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Dev corpus for periodic evaluation and checkpoint selection.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        init_checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Tag every utterance of a corpus file in one pass each.
    Tag {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus file; gold columns, if present, are ignored.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use overlapped fixed-size chunks instead of one pass.
        #[arg(long)]
        chunked: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Tag words from standard input as they arrive.
    Stream {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        frame_rate: Option<usize>,
        #[arg(long)]
        lookahead_words: Option<usize>,
        /// Force out the oldest words once the buffer holds more than this.
        #[arg(long)]
        max_buffer: Option<usize>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score predicted labels against gold labels.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        scheme: Option<SchemeName>,
        /// Also write `key=value` metrics to this file.
        #[arg(long)]
        kv: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Time streaming decoding and print the revision-distance histogram.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Corpus whose utterances are streamed one at a time.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        frame_rate: Option<usize>,
        #[arg(long)]
        lookahead_words: Option<usize>,
        #[arg(long)]
        max_buffer: Option<usize>,
        /// Stream the whole corpus as a single word sequence.
        #[arg(long)]
        concat: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Defaults, then the config file, then `--set` pairs, then `extra`
/// (dedicated flags).
fn load_config(args: &ConfigArgs, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for pair in &args.sets {
        c.set_pair(pair)?;
    }
    for (k, v) in extra {
        if let Some(v) = v {
            c.set(k, v)?;
        }
    }
    c.resolve()
}

fn show<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io_at(path, e)),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { seed, out, utterances, cfg } => {
            let c = load_config(&cfg, &[("seed", show(&seed)), ("utterances", show(&utterances))])?;
            let corpus = synth_generate(c.train.seed, c.utterances, &c.grammar)?;
            write_output(out.as_deref(), &write_corpus(&corpus))
        }
        Command::Train {
            corpus,
            dev,
            init_checkpoint,
            out,
            seed,
            cfg,
        } => {
            let init_flag = init_checkpoint.map(|p| p.display().to_string());
            let c = load_config(&cfg, &[("seed", show(&seed)), ("init_checkpoint", init_flag)])?;
            let init = match &c.train.init_checkpoint {
                Some(path) => Init::From(checkpoint::load(path)?),
                None => Init::Scratch {
                    arch: c.model.clone(),
                    scheme: c.scheme.build(),
                    vocab: None,
                },
            };
            let scheme = match &init {
                Init::From(m) => m.scheme().clone(),
                Init::Scratch { scheme, .. } => scheme.clone(),
            };
            let train_set = parse_corpus(&corpus, &scheme)?;
            let dev_set = match &dev {
                Some(p) => Some(parse_corpus(p, &scheme)?),
                None => None,
            };
            eprintln!(
                "training on {} utterances for {} steps ({} phase)",
                train_set.len(),
                c.train.max_steps,
                c.train.phase
            );
            let outcome = train(&train_set, dev_set.as_deref(), &c.train, init)?;
            for p in &outcome.evals {
                let loss = outcome.losses[p.step as usize - 1];
                eprintln!(
                    "step {:>6}  loss {loss:.4}  punct F1 {:.3}  disfluency F1 {:.3}",
                    p.step,
                    p.report.punct_overall.f1(),
                    p.report.either.f1()
                );
            }
            if let Some(best) = outcome.evals.iter().find(|p| p.step == outcome.best_step) {
                eprintln!("selected step {}\n{}", outcome.best_step, best.report.to_table());
            } else if let Some(last) = outcome.losses.last() {
                eprintln!("final loss {last:.4} after {} steps", outcome.steps_run);
            }
            checkpoint::save(&outcome.model, &out)
        }
        Command::Tag {
            checkpoint,
            input,
            out,
            chunked,
            cfg,
        } => {
            let c = load_config(&cfg, &[])?;
            let model = checkpoint::load(&checkpoint)?;
            let tagged = parse_corpus(&input, model.scheme())?
                .iter()
                .map(|s| {
                    if chunked {
                        chunk_decode(&model, s.words(), c.chunk).map(|o| o.sequence)
                    } else {
                        tag_offline(&model, s.words())
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            write_output(out.as_deref(), &write_corpus(&tagged))
        }
        Command::Stream {
            checkpoint,
            frame_rate,
            lookahead_words,
            max_buffer,
            cfg,
        } => {
            let c = load_config(
                &cfg,
                &[
                    ("frame_rate", show(&frame_rate)),
                    ("lookahead_words", show(&lookahead_words)),
                    ("max_buffer", show(&max_buffer)),
                ],
            )?;
            let model = checkpoint::load(&checkpoint)?;
            let mut dec = StreamDecoder::new(&model, c.decode)?;
            let mut stdout = io::stdout().lock();
            let mut print = |batch: Vec<Emission>| -> Result<()> {
                for e in &batch {
                    writeln!(stdout, "{}\t{}\t{}", e.word, e.punct, e.disf)?;
                }
                stdout.flush()?;
                Ok(())
            };
            for line in io::stdin().lock().lines() {
                let batch = dec.push(tokenize(&line?))?;
                print(batch)?;
            }
            print(dec.finish()?)
        }
        Command::Eval {
            pred,
            gold,
            scheme,
            kv,
            cfg,
        } => {
            let c = load_config(&cfg, &[("scheme", show(&scheme))])?;
            let scheme = c.scheme.build();
            let p = parse_corpus(&pred, &scheme)?;
            let g = parse_corpus(&gold, &scheme)?;
            let report = score(&p, &g, &scheme)?;
            print!("{}", report.to_table());
            if let Some(path) = kv {
                fs::write(&path, report.to_kv()).map_err(|e| Error::io_at(&path, e))?;
            }
            Ok(())
        }
        Command::Bench {
            checkpoint,
            input,
            runs,
            frame_rate,
            lookahead_words,
            max_buffer,
            concat,
            cfg,
        } => {
            let c = load_config(
                &cfg,
                &[
                    ("runs", show(&runs)),
                    ("frame_rate", show(&frame_rate)),
                    ("lookahead_words", show(&lookahead_words)),
                    ("max_buffer", show(&max_buffer)),
                ],
            )?;
            let model = checkpoint::load(&checkpoint)?;
            let corpus = parse_corpus(&input, model.scheme())?;
            let streams: Vec<Vec<String>> = if concat {
                vec![corpus.iter().flat_map(|s| s.words().to_vec()).collect()]
            } else {
                corpus.iter().map(|s| s.words().to_vec()).collect()
            };
            let report = bench(&model, &streams, &c.decode, c.runs)?;
            eprintln!(
                "{} words in {} stream(s): median {:.3?} over {} runs, {:.1} words/second",
                report.words,
                streams.len(),
                report.total,
                report.runs.len(),
                report.words_per_second()
            );
            write_output(None, &report.histogram.to_tsv())
        }
    }
}
