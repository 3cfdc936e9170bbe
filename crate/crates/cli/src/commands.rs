use crate::config::{Config, ConfigError};
use crate::{Cli, ClusterArgs, Command, Format, InputArgs};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use vfrtok::durcode::CodingSpace;
use vfrtok::frontend::{
    compute_frames, load_audio, load_embeddings, write_embeddings_bin, write_embeddings_csv,
    write_wav_pcm16, FrontendError,
};
use vfrtok::lm::{fit_ngram, generate, LmError};
use vfrtok::matrix::{FrameMatrix, FrameRate};
use vfrtok::metrics::{
    baseline_bitrate, bitrate, embedding_distortion, frame_rate, MetricsError, RateAccumulator,
};
use vfrtok::stream::{
    expand, read_stream, read_stream_for, tokenize, write_stream, StreamError, TokenStream,
};
use vfrtok::synth::{synth_corpus, SynthConfig};
use vfrtok::tadpc::{pool, segment, ClusterError, ClusterParams};
use vfrtok::vq::{train_codebook, Codebook, VqError};
use vfrtok::{CodeError, ExtendedToken};

/// Exit code and module label for an error chain.
pub fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<vfrtok::Error>() {
            return match e {
                vfrtok::Error::Frontend(_) => (10, "frontend"),
                vfrtok::Error::Cluster(_) => (11, "tadpc"),
                vfrtok::Error::Vq(_) => (12, "vq"),
                vfrtok::Error::Code(_) => (13, "durcode"),
                vfrtok::Error::Stream(_) => (14, "stream"),
                vfrtok::Error::Metrics(_) => (15, "metrics"),
                vfrtok::Error::Lm(_) => (16, "lm"),
            };
        }
        if cause.is::<FrontendError>() {
            return (10, "frontend");
        }
        if cause.is::<ClusterError>() {
            return (11, "tadpc");
        }
        if cause.is::<VqError>() {
            return (12, "vq");
        }
        if cause.is::<CodeError>() {
            return (13, "durcode");
        }
        if let Some(e) = cause.downcast_ref::<StreamError>() {
            return match e {
                StreamError::Cluster(_) => (11, "tadpc"),
                StreamError::Vq(_) => (12, "vq"),
                StreamError::Code(_) => (13, "durcode"),
                _ => (14, "stream"),
            };
        }
        if cause.is::<MetricsError>() {
            return (15, "metrics");
        }
        if cause.is::<LmError>() {
            return (16, "lm");
        }
        if cause.is::<ConfigError>() {
            return (3, "config");
        }
    }
    (1, "error")
}

struct Ctx {
    cfg: Config,
}

impl Ctx {
    fn cluster(&self, args: &ClusterArgs) -> ClusterParams {
        args.apply(self.cfg.cluster)
    }

    fn codebook_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        flag.clone()
            .or_else(|| self.cfg.codebook.clone())
            .ok_or_else(|| {
                anyhow!(ConfigError(
                    "no codebook: pass --codebook, set VFRTOK_CODEBOOK or `codebook` in the config"
                        .into()
                ))
            })
    }

    fn embedding_rate(&self, input: &InputArgs) -> Result<FrameRate> {
        let text = input
            .embedding_rate
            .clone()
            .or_else(|| self.cfg.embedding_rate.clone());
        match text {
            None => Ok(FrameRate::new(75, 1).expect("nonzero")),
            Some(t) => t.parse().map_err(|e: String| anyhow!(ConfigError(e))),
        }
    }

    fn load_frames(&self, path: &Path, csv_rate: FrameRate) -> Result<FrameMatrix> {
        let is_wav = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        let frames = if is_wav {
            let w = load_audio(path)?;
            compute_frames(&w, &self.cfg.frontend)?
        } else {
            load_embeddings(path, None, csv_rate)?
        };
        Ok(frames)
    }

    fn load_all(&self, input: &InputArgs) -> Result<Vec<FrameMatrix>> {
        let rate = self.embedding_rate(input)?;
        input
            .inputs
            .par_iter()
            .map(|p| {
                self.load_frames(p, rate)
                    .with_context(|| format!("reading {}", p.display()))
            })
            .collect()
    }
}

fn load_codebook(path: &Path) -> Result<Codebook> {
    Codebook::load(path).with_context(|| format!("loading codebook {}", path.display()))
}

fn load_streams(paths: &[PathBuf]) -> Result<Vec<TokenStream>> {
    paths
        .par_iter()
        .map(|p| read_stream(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(jobs) = cli.jobs.or(cfg.jobs) {
        if jobs == 0 {
            bail!(ConfigError("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("starting worker pool")?;
    }
    let ctx = Ctx { cfg };
    match cli.command {
        Command::TrainCodebook {
            input,
            out,
            codebook_size,
            epochs,
            seed,
            decay,
            awaken_fraction,
            cluster,
            report,
        } => {
            let mut tc = ctx.cfg.train.clone();
            tc.codebook_size = codebook_size.unwrap_or(tc.codebook_size);
            tc.epochs = epochs.unwrap_or(tc.epochs);
            tc.seed = seed.unwrap_or(tc.seed);
            tc.decay = decay.unwrap_or(tc.decay);
            tc.awaken_fraction = awaken_fraction.unwrap_or(tc.awaken_fraction);
            let p = ctx.cluster(&cluster);
            p.validate()?;
            let frames = ctx.load_all(&input)?;
            let batches = frames
                .par_iter()
                .map(|x| {
                    let seg = segment(x, &p)?;
                    Ok(pool(x, &seg)?.0)
                })
                .collect::<Result<Vec<_>, ClusterError>>()?;
            let (cb, rep) = train_codebook(&batches, &tc)?;
            cb.save(&out)?;
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&rep)?;
                std::fs::write(&path, json)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!(
                "codebook {}: K={} H={} epochs={} usage={:.3} awakenings={} final_loss={:.6} hash={}",
                out.display(),
                cb.len(),
                cb.dim(),
                rep.epochs_run,
                rep.codebook_usage,
                rep.awakenings,
                rep.commitment_loss_per_epoch.last().copied().unwrap_or(0.0),
                cb.hash_hex()
            );
            Ok(())
        }

        Command::Tokenize {
            input,
            codebook,
            cluster,
            out_dir,
            out,
        } => {
            let cb = load_codebook(&ctx.codebook_path(&codebook)?)?;
            let p = ctx.cluster(&cluster);
            let targets: Vec<PathBuf> = match (&out, &out_dir) {
                (Some(o), _) => {
                    if input.inputs.len() != 1 {
                        bail!(ConfigError(
                            "--out needs exactly one input; use --out-dir".into()
                        ));
                    }
                    vec![o.clone()]
                }
                (None, dir) => {
                    let dir = dir.clone().unwrap_or_else(|| PathBuf::from("."));
                    std::fs::create_dir_all(&dir)
                        .with_context(|| format!("creating {}", dir.display()))?;
                    let mut seen = HashSet::new();
                    input
                        .inputs
                        .iter()
                        .map(|i| {
                            let stem = i
                                .file_stem()
                                .unwrap_or_default()
                                .to_string_lossy()
                                .into_owned();
                            if !seen.insert(stem.clone()) {
                                bail!(ConfigError(format!("two inputs share the name {stem:?}")));
                            }
                            Ok(dir.join(format!("{stem}.vstk")))
                        })
                        .collect::<Result<_>>()?
                }
            };
            let rate = ctx.embedding_rate(&input)?;
            let lines = input
                .inputs
                .par_iter()
                .zip(&targets)
                .map(|(src, dst)| -> Result<String> {
                    let x = ctx.load_frames(src, rate).with_context(|| format!("reading {}", src.display()))?;
                    let s = tokenize(&x, &cb, &p)?;
                    write_stream(&s, dst)?;
                    let y = expand(&s, &cb)?;
                    let (mse, cos) = embedding_distortion(&x, &y)?;
                    let hz = frame_rate(std::slice::from_ref(&s))?;
                    Ok(format!(
                        "{}\ttokens={}\tframes={}\trate={:.2}Hz\tbitrate={:.3}kbps\tmse={:.6}\tcos={:.6}\n",
                        src.display(),
                        s.len(),
                        x.frames(),
                        hz,
                        bitrate(hz, &s.space),
                        mse,
                        cos
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            print!("{}", lines.concat());
            Ok(())
        }

        Command::Detokenize {
            stream,
            codebook,
            out,
        } => {
            let cb = load_codebook(&ctx.codebook_path(&codebook)?)?;
            let s = read_stream_for(&stream, &cb)
                .with_context(|| format!("reading {}", stream.display()))?;
            let y = expand(&s, &cb)?;
            let csv = out
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            if csv {
                write_embeddings_csv(&out, &y)?;
            } else {
                write_embeddings_bin(&out, &y)?;
            }
            println!(
                "{}: {} frames x {} dims",
                out.display(),
                y.frames(),
                y.dim()
            );
            Ok(())
        }

        Command::Stats {
            streams,
            frame_rate: override_hz,
            codebook_size,
            smax,
            format,
            histogram_csv,
            utterance_csv,
        } => {
            let loaded = load_streams(&streams)?;
            if let Some(hz) = override_hz {
                if !(hz >= 0.0 && hz.is_finite()) {
                    bail!(ConfigError(
                        "--frame-rate must be a non-negative number".into()
                    ));
                }
                let space = match loaded.first() {
                    Some(s) => s.space,
                    None => CodingSpace::new(
                        codebook_size.unwrap_or(ctx.cfg.train.codebook_size as u32),
                        smax.unwrap_or(ctx.cfg.cluster.s_max as u32),
                    )?,
                };
                return emit(None, &override_report(hz, &space, format)?);
            }
            let mut acc = RateAccumulator::new();
            for (p, s) in streams.iter().zip(&loaded) {
                acc.add_stream(p.display().to_string(), s)?;
            }
            let rep = acc.finish()?;
            if let Some(p) = histogram_csv {
                emit(Some(&p), &rep.histogram_csv())?;
            }
            if let Some(p) = utterance_csv {
                emit(Some(&p), &rep.utterance_csv())?;
            }
            match format {
                Format::Json => emit(None, &(serde_json::to_string_pretty(&rep)? + "\n")),
                Format::Table => emit(None, &rep.to_table()),
                Format::Csv => emit(None, &rep.utterance_csv()),
            }
        }

        Command::Boundaries {
            stream,
            format,
            out,
        } => {
            let s =
                read_stream(&stream).with_context(|| format!("reading {}", stream.display()))?;
            emit(out.as_deref(), &boundaries(&s, format)?)
        }

        Command::Sweep {
            input,
            codebook,
            codebook_size,
            tau,
            smax,
            beta,
            m,
            out,
        } => {
            let cb = match codebook.clone().or_else(|| ctx.cfg.codebook.clone()) {
                Some(p) => Some(load_codebook(&p)?),
                None => None,
            };
            let k = match &cb {
                Some(cb) => cb.len() as u32,
                None => codebook_size.unwrap_or(ctx.cfg.train.codebook_size as u32),
            };
            let frames = ctx.load_all(&input)?;
            let base = ClusterArgs {
                beta,
                m,
                ..ClusterArgs::default()
            }
            .apply(ctx.cfg.cluster);
            let mut csv = String::from("tau,s_max,frame_rate_hz,bitrate_kbps\n");
            for &s_max in &smax {
                for &t in &tau {
                    let p = ClusterParams {
                        tau: t,
                        s_max,
                        ..base
                    };
                    p.validate()?;
                    let hz = sweep_rate(&frames, cb.as_ref(), &p)?;
                    let space = CodingSpace::new(k, s_max as u32)?;
                    writeln!(csv, "{t},{s_max},{hz},{}", bitrate(hz, &space))?;
                }
            }
            emit(out.as_deref(), &csv)
        }

        Command::Lm {
            streams,
            order,
            alpha,
            model_out,
            generate: n,
            seed,
            out,
        } => {
            let loaded = load_streams(&streams)?;
            let order = order.unwrap_or(ctx.cfg.lm.order);
            let alpha = alpha.unwrap_or(ctx.cfg.lm.alpha);
            let model = fit_ngram(&loaded, order, alpha)?;
            let (mut nll, mut steps) = (0.0, 0.0);
            for s in &loaded {
                let ppl = vfrtok::lm::perplexity(&model, s)?;
                let n = (s.len() + 1) as f64;
                nll += n * ppl.ln();
                steps += n;
            }
            println!(
                "order={order} alpha={alpha} vocab={} perplexity={:.4}",
                model.vocab_size(),
                (nll / steps).exp()
            );
            if let Some(p) = model_out {
                emit(Some(&p), &model.to_table())?;
            }
            if n > 0 {
                let ids = generate(&model, &[], n, seed)?;
                match out {
                    Some(path) => {
                        let first = &loaded[0];
                        let tokens: Vec<ExtendedToken> = ids
                            .iter()
                            .map(|&id| first.space.token(i64::from(id)))
                            .collect::<Result<_, _>>()?;
                        let frames: u64 = tokens
                            .iter()
                            .map(|&t| first.space.decode(t).map(|(_, d)| u64::from(d)))
                            .sum::<Result<_, _>>()?;
                        let s = TokenStream {
                            tokens,
                            space: first.space,
                            base_frame_rate: first.base_frame_rate,
                            codebook_hash: first.codebook_hash,
                            source_duration_sec: first.base_frame_rate.seconds(frames as usize),
                            params: first.params,
                        };
                        write_stream(&s, &path)?;
                    }
                    None => {
                        let text: Vec<String> = ids.iter().map(u32::to_string).collect();
                        println!("{}", text.join(" "));
                    }
                }
            }
            Ok(())
        }

        Command::Synth {
            out_dir,
            utterances,
            seconds,
            seed,
        } => {
            let cfg = SynthConfig {
                sample_rate: ctx.cfg.frontend.sample_rate,
                utterances,
                utterance_sec: seconds,
                seed,
                ..SynthConfig::default()
            };
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for (i, w) in synth_corpus(&cfg).iter().enumerate() {
                let p = out_dir.join(format!("synth_{i:03}.wav"));
                write_wav_pcm16(&p, w)?;
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn sweep_rate(frames: &[FrameMatrix], cb: Option<&Codebook>, p: &ClusterParams) -> Result<f64> {
    match cb {
        Some(cb) => {
            let streams = frames
                .par_iter()
                .map(|x| tokenize(x, cb, p))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(frame_rate(&streams)?)
        }
        None => {
            let counts = frames
                .par_iter()
                .map(|x| segment(x, p).map(|s| s.len()))
                .collect::<Result<Vec<_>, _>>()?;
            let tokens: usize = counts.iter().sum();
            let total: usize = frames.iter().map(FrameMatrix::frames).sum();
            let rate = frames
                .first()
                .map(|x| x.base_frame_rate)
                .ok_or(MetricsError::EmptyCorpus)?;
            if frames.iter().any(|x| x.base_frame_rate != rate) {
                let secs: f64 = frames
                    .iter()
                    .map(|x| x.base_frame_rate.seconds(x.frames()))
                    .sum();
                return Ok(tokens as f64 / secs);
            }
            Ok(tokens as f64 * f64::from(rate.num) / (total as f64 * f64::from(rate.den)))
        }
    }
}

fn override_report(hz: f64, space: &CodingSpace, format: Format) -> Result<String> {
    #[derive(Serialize)]
    struct Override {
        frame_rate_hz: f64,
        codebook_size: u32,
        s_max: u32,
        bitrate_kbps: f64,
        baseline_bitrate_kbps: f64,
    }
    let o = Override {
        frame_rate_hz: hz,
        codebook_size: space.codebook_size(),
        s_max: space.s_max(),
        bitrate_kbps: bitrate(hz, space),
        baseline_bitrate_kbps: baseline_bitrate(hz, u64::from(space.codebook_size())),
    };
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&o)? + "\n",
        Format::Csv => format!(
            "frame_rate_hz,codebook_size,s_max,bitrate_kbps,baseline_bitrate_kbps\n{},{},{},{},{}\n",
            o.frame_rate_hz, o.codebook_size, o.s_max, o.bitrate_kbps, o.baseline_bitrate_kbps
        ),
        Format::Table => format!(
            "{:<18} {:>12.2}\n{:<18} {:>12}\n{:<18} {:>12}\n{:<18} {:>12.2}\n{:<18} {:>12.2}\n",
            "frame rate (Hz)",
            o.frame_rate_hz,
            "K",
            o.codebook_size,
            "s_max",
            o.s_max,
            "bitrate (kbps)",
            o.bitrate_kbps,
            "baseline (kbps)",
            o.baseline_bitrate_kbps
        ),
    })
}

#[derive(Debug, Serialize)]
struct Boundary {
    start_frame: u64,
    start_sec: f64,
    duration_sec: f64,
    k: u32,
    d: u32,
}

fn boundaries(s: &TokenStream, format: Format) -> Result<String> {
    let rate = s.base_frame_rate;
    let mut frame = 0u64;
    let mut rows = Vec::with_capacity(s.len());
    for (k, d) in s.decoded()? {
        rows.push(Boundary {
            start_frame: frame,
            start_sec: rate.seconds(frame as usize),
            duration_sec: rate.seconds(d as usize),
            k,
            d,
        });
        frame += u64::from(d);
    }
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("start_sec,duration_sec,k,d\n");
            for b in &rows {
                writeln!(out, "{},{},{},{}", b.start_sec, b.duration_sec, b.k, b.d)?;
            }
            out
        }
        Format::Json | Format::Table => {
            let v = serde_json::json!({
                "base_frame_rate": rate.to_string(),
                "source_duration_sec": s.source_duration_sec,
                "total_frames": frame,
                "boundaries": rows,
            });
            serde_json::to_string_pretty(&v)? + "\n"
        }
    })
}
