//! Thin command-line front end over the library: each subcommand parses
//! flags and files, calls into the library, and writes outputs. Exit codes:
//! 0 success, 1 input error, 2 numerical failure, 3 non-convergence under
//! `--strict`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vbx::io::{self, EmbeddingSequence};
use vbx::pipeline::{self, DiarizeOptions, Settings};
use vbx::scoring::{self, RecordingScore, ScoreSetup};
use vbx::timeline::{Ticks, Timeline};
use vbx::{plda, synth, Error};

#[derive(Parser)]
#[command(
    name = "vbx",
    about = "Bayesian-HMM diarization of speaker embedding sequences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a two-covariance PLDA model from labeled embeddings.
    EstimatePlda {
        /// Labeled embedding file (`VBXLBL` format).
        #[arg(long)]
        data: PathBuf,
        /// Output model file (`VBXPLDA` format).
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive the diarization space (projection + phi) from a PLDA model.
    DeriveSpace {
        /// PLDA model file.
        #[arg(long)]
        model: PathBuf,
        /// Retained dimension.
        #[arg(long, default_value_t = 128)]
        r: usize,
        /// Output space file (`VBXSPACE` format).
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut VAD speech intervals into overlapping sub-segments.
    Subsegment {
        /// VAD label file (`onset offset speech` lines).
        #[arg(long)]
        vad: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        window: f64,
        #[arg(long, default_value_t = 0.25)]
        shift: f64,
        #[arg(long, default_value_t = 0.1)]
        min_len: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a synthetic conversation and write embeddings plus reference.
    Synth {
        #[arg(long)]
        speakers: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0.99)]
        loop_p: f64,
        /// Comma-separated speaker priors; uniform when omitted.
        #[arg(long)]
        pi: Option<String>,
        /// Comma-separated between-speaker variances (sets the dimension).
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 0.25)]
        step_seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synth")]
        rec_id: String,
        /// Output embedding file.
        #[arg(long)]
        out_emb: PathBuf,
        /// Output reference RTTM.
        #[arg(long)]
        out_rttm: PathBuf,
        /// Also write the matching space file (identity projection with the
        /// generator's phi), ready for `diarize --space`.
        #[arg(long)]
        out_space: Option<PathBuf>,
        /// Write the binary embedding format instead of text.
        #[arg(long)]
        binary: bool,
    },
    /// Diarize one embedding file or a directory of them.
    Diarize(DiarizeArgs),
    /// Score hypothesis RTTM against reference RTTM.
    Score {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        /// forgiving, fair, full, or all.
        #[arg(long, default_value = "all")]
        setup: String,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a diarization reference from a word-level transcript.
    BuildRef {
        /// Word file (`recording speaker start end kind` lines).
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep time-annotated vocal sounds instead of discarding them.
        #[arg(long)]
        include_vocal_sounds: bool,
    },
    /// Compare the inference engine against exact brute-force references.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 25)]
        instances: usize,
    },
}

#[derive(Args)]
struct DiarizeArgs {
    /// Space file from `derive-space`.
    #[arg(long)]
    space: PathBuf,
    /// Embedding file or directory of `.emb`/`.embb` files.
    #[arg(long)]
    emb: PathBuf,
    /// Output RTTM file, or directory when `--emb` is a directory.
    #[arg(long)]
    out: PathBuf,
    /// Treat embeddings as raw (project and length-normalize first).
    #[arg(long)]
    raw: bool,
    /// `key=value` config file overriding built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fa: Option<f64>,
    #[arg(long)]
    fb: Option<f64>,
    #[arg(long)]
    loop_p: Option<f64>,
    #[arg(long)]
    ahc_threshold: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    elbo_tol: Option<f64>,
    #[arg(long)]
    prune_pi: Option<f64>,
    /// Worker threads for directory mode.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
    /// Fail (exit 3) when any recording does not converge.
    #[arg(long)]
    strict: bool,
}

enum Failure {
    Input(String),
    Numerical(String),
    NonConvergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) | Failure::NonConvergence(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::EstimatePlda { data, out } => {
            let data = io::read_labeled(&data)?;
            let model = plda::estimate_plda(&data)?;
            io::write_plda(&out, &model)?;
            eprintln!(
                "estimated PLDA: D={} from {} vectors",
                model.dim,
                data.vectors.nrows()
            );
            Ok(())
        }
        Command::DeriveSpace { model, r, out } => {
            let model = io::read_plda(&model)?;
            let (space, clamped) = plda::derive_space(&model, r)?;
            if clamped > 0 {
                eprintln!("warning: {clamped} eigenvalues clamped to the floor");
            }
            io::write_space(&out, &space)?;
            eprintln!("space: D={} R={}", space.source_dim, space.dim);
            Ok(())
        }
        Command::Subsegment {
            vad,
            window,
            shift,
            min_len,
            out,
        } => {
            let vad = io::read_vad(&vad)?;
            let cfg = pipeline::SubsegmentConfig {
                window: Ticks::from_seconds(window),
                shift: Ticks::from_seconds(shift),
                min_len: Ticks::from_seconds(min_len),
            };
            let mut text = String::new();
            for (on, off) in pipeline::subsegment(&vad, &cfg) {
                text.push_str(&format!("{on} {off}\n"));
            }
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Synth {
            speakers,
            steps,
            loop_p,
            pi,
            phi,
            step_seconds,
            seed,
            rec_id,
            out_emb,
            out_rttm,
            out_space,
            binary,
        } => {
            let phi = parse_float_list(&phi, "--phi")?;
            let pi = pi.map(|p| parse_float_list(&p, "--pi")).transpose()?;
            let cfg = synth::SynthConfig {
                speakers,
                duration_steps: steps,
                loop_p,
                pi,
                phi: phi.clone(),
                step_seconds,
                seed,
            };
            let conv = synth::sample_conversation(&cfg)?;
            let step = Ticks::from_seconds(step_seconds);
            let onsets: Vec<Ticks> = (0..steps).map(|i| step * i as i64).collect();
            let offsets: Vec<Ticks> = (0..steps).map(|i| step * (i as i64 + 1)).collect();
            let seq = EmbeddingSequence::new(&rec_id, onsets, offsets, conv.x)?;
            if binary {
                io::write_embeddings_binary(&out_emb, &seq)?;
            } else {
                io::write_embeddings_text(&out_emb, &seq)?;
            }
            let reference = synth::labels_to_timeline(&conv.z, step_seconds, &rec_id)?;
            io::write_rttm(&out_rttm, &[reference])?;
            if let Some(path) = out_space {
                let dim = phi.len();
                let floored: Vec<f64> = phi.iter().map(|&p| p.max(vbx::plda::PHI_FLOOR)).collect();
                let space = vbx::plda::DiarSpace {
                    source_dim: dim,
                    dim,
                    mean: ndarray::Array1::zeros(dim),
                    projection: ndarray::Array2::eye(dim),
                    phi: ndarray::Array1::from_vec(floored),
                };
                io::write_space(&path, &space)?;
            }
            eprintln!("sampled {steps} steps of {speakers} speakers (seed {seed})");
            Ok(())
        }
        Command::Diarize(args) => diarize_command(args),
        Command::Score {
            reference,
            hyp,
            setup,
            out,
        } => {
            let refs = io::read_rttm(&reference)?;
            let hyps = io::read_rttm(&hyp)?;
            let setups: Vec<(String, ScoreSetup)> = if setup == "all" {
                ["forgiving", "fair", "full"]
                    .iter()
                    .map(|n| (n.to_string(), ScoreSetup::named(n).unwrap()))
                    .collect()
            } else {
                let s = ScoreSetup::named(&setup).ok_or_else(|| {
                    Failure::Input(format!(
                        "unknown setup {setup:?}; use forgiving, fair, full, or all"
                    ))
                })?;
                vec![(setup, s)]
            };

            let mut report = String::new();
            for (name, setup) in &setups {
                let mut scores = Vec::new();
                for reference in &refs {
                    let empty = Timeline::new(&reference.recording_id);
                    let hypothesis = hyps
                        .iter()
                        .find(|h| h.recording_id == reference.recording_id)
                        .unwrap_or(&empty);
                    scores.push(RecordingScore {
                        recording_id: reference.recording_id.clone(),
                        der: scoring::der(reference, hypothesis, setup)?,
                        jer_speakers: scoring::jer_per_speaker(reference, hypothesis)?,
                    });
                }
                report.push_str(&scoring::format_report(&scores, name));
            }
            for hypothesis in &hyps {
                if !refs
                    .iter()
                    .any(|r| r.recording_id == hypothesis.recording_id)
                {
                    eprintln!(
                        "warning: hypothesis recording {} has no reference; ignored",
                        hypothesis.recording_id
                    );
                }
            }
            match out {
                Some(path) => std::fs::write(path, report)?,
                None => print!("{report}"),
            }
            Ok(())
        }
        Command::BuildRef {
            words,
            out,
            include_vocal_sounds,
        } => {
            let grouped = io::read_words(&words)?;
            let mut timelines = Vec::new();
            for (recording, records) in &grouped {
                let (timeline, skipped) =
                    scoring::build_reference(recording, records, include_vocal_sounds)?;
                if skipped > 0 {
                    eprintln!("warning: {recording}: skipped {skipped} untimed records");
                }
                timelines.push(timeline);
            }
            io::write_rttm(&out, &timelines)?;
            Ok(())
        }
        Command::Oracle { seed, instances } => {
            let report = vbx::oracle::engine_delta_report(seed, instances)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn parse_float_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Input(format!("{what}: invalid number {tok:?}")))
        })
        .collect()
}

fn diarize_command(args: DiarizeArgs) -> Result<(), Failure> {
    let space = io::read_space(&args.space)?;

    let mut settings = Settings::default();
    if let Some(path) = &args.config {
        let entries = pipeline::read_config(path)?;
        settings.apply(&entries)?;
    }
    let flag_overrides: [(&str, Option<f64>); 6] = [
        ("fa", args.fa),
        ("fb", args.fb),
        ("loop_p", args.loop_p),
        ("ahc_threshold", args.ahc_threshold),
        ("elbo_tol", args.elbo_tol),
        ("prune_pi", args.prune_pi),
    ];
    let mut cli_map = HashMap::new();
    for (key, value) in flag_overrides {
        if let Some(v) = value {
            cli_map.insert(key.to_string(), v.to_string());
        }
    }
    if let Some(v) = args.max_iters {
        cli_map.insert("max_iters".to_string(), v.to_string());
    }
    settings.apply(&cli_map)?;

    let opts = DiarizeOptions {
        ahc: settings.ahc_config(),
        vbx: settings.vbx_config(),
        raw: args.raw,
    };

    let mut non_converged: Vec<String> = Vec::new();
    if args.emb.is_dir() {
        if args.out.exists() && !args.out.is_dir() {
            return Err(Failure::Input(format!(
                "--out {} must be a directory when --emb is a directory",
                args.out.display()
            )));
        }
        std::fs::create_dir_all(&args.out)?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(&args.emb)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("emb") | Some("embb")
                )
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Failure::Input(format!(
                "no .emb or .embb files in {}",
                args.emb.display()
            )));
        }
        let mut recordings = Vec::new();
        for file in &files {
            recordings.push(io::read_embeddings(file)?);
        }
        let outcomes = pipeline::diarize_many(&recordings, &space, &opts, args.jobs)?;
        for outcome in &outcomes {
            if let Some(warning) = &outcome.warning {
                eprintln!("warning: {warning}");
            }
            if !outcome.converged {
                non_converged.push(outcome.timeline.recording_id.clone());
            }
            let path = args
                .out
                .join(format!("{}.rttm", outcome.timeline.recording_id));
            io::write_rttm(&path, std::slice::from_ref(&outcome.timeline))?;
        }
    } else {
        let emb = io::read_embeddings(&args.emb)?;
        let outcome = pipeline::diarize_recording(&emb, &space, &opts)?;
        if let Some(warning) = &outcome.warning {
            eprintln!("warning: {warning}");
        }
        if !outcome.converged {
            non_converged.push(outcome.timeline.recording_id.clone());
        }
        io::write_rttm(&args.out, std::slice::from_ref(&outcome.timeline))?;
    }

    if args.strict && !non_converged.is_empty() {
        return Err(Failure::NonConvergence(format!(
            "inference did not converge for: {}",
            non_converged.join(", ")
        )));
    }
    Ok(())
}
