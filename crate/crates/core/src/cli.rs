//! `tdsc` command-line front end.
//!
//! Settings are resolved in increasing precedence: built-in defaults, the
//! `TDSC_SEED` environment variable, the `--config` file, trailing
//! `key=value` overrides, then dedicated flags.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::channel::ImpairmentConfig;
use crate::detector::{self, TdscConfig};
use crate::experiment::{
    sweep_roc_with, sweep_snr_with, CsvSink, CurvePoint, Execution, Executor, ExperimentConfig,
    RocPoint, RunLabels, Scenario, SweepPlan, CONFIG_KEYS,
};
use crate::pilot_grid::{pattern_for, Standard};
use crate::theory::{pmd_analytic, roc_analytic, HypothesisParams};
use crate::waveform::{
    read_iq, read_starts, write_iq, write_starts, Baseband, FrameConfig, IqMetadata, OfdmModulator,
};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SEED_ENV: &str = "TDSC_SEED";

fn keys_help() -> String {
    let mut s =
        String::from("Config keys (file `key = value` lines or trailing key=value overrides):\n");
    for (k, d) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<16} default {d}\n"));
    }
    s.push_str(&format!(
        "\nPrecedence: defaults < ${SEED_ENV} < --config file < key=value < flags.\n\
         standard, cp_ratio and channel accept comma lists; sweep and roc run every combination."
    ));
    s
}

#[derive(Debug, Parser)]
#[command(
    name = "tdsc",
    version,
    about = "Pilot-tone cross-correlation spectrum sensing for OFDM signals",
    arg_required_else_help = true,
    after_help = keys_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize frames, pass them through the channel and write an IQ capture.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of frames; defaults to enough to cover the sensing window.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Run the detector on an IQ capture.
    Sense {
        #[command(flatten)]
        common: Common,
        /// IQ file; its `.meta` and `.starts` sidecars are read alongside.
        #[arg(long)]
        input: PathBuf,
        /// Symbol-start list; defaults to `<input>.starts`.
        #[arg(long)]
        starts: Option<PathBuf>,
        /// Per-sample noise power; defaults to `noise_power` in the metadata.
        #[arg(long)]
        noise_power: Option<f64>,
    },
    /// Monte-Carlo P_MD sweep over SNR, written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo ROC curves per SNR, written as CSV. `--pfa` sets the P_FA grid.
    Roc {
        #[command(flatten)]
        common: Common,
    },
    /// Analytic P_MD and ROC.
    Theory {
        #[command(flatten)]
        common: Common,
        /// Non-centrality of the H1 statistic; without it the configured scenario is used.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (CSV for sweep/roc, IQ file for generate).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    workers: Option<usize>,
    /// wimax or lte (comma list allowed).
    #[arg(long)]
    standard: Option<String>,
    /// 1/4 or 1/8 (comma list allowed).
    #[arg(long)]
    cp_ratio: Option<String>,
    /// Channel profile name (comma list allowed).
    #[arg(long)]
    channel: Option<String>,
    /// SNR list in dB: `a,b,c` or `start:step:end`.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    /// Target false-alarm probability.
    #[arg(long)]
    pfa: Option<String>,
    /// Sensing window in milliseconds.
    #[arg(long)]
    sensing_ms: Option<f64>,
    /// Trailing `key=value` overrides.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    match e {
        Error::Io { .. } => Failure::Runtime(e),
        other => Failure::Usage(other.to_string()),
    }
}

type Outcome = std::result::Result<(), Failure>;

impl Common {
    fn plan(&self, verb: &str, env_seed: Option<&str>) -> std::result::Result<SweepPlan, Failure> {
        let mut plan = SweepPlan::default();
        if let Some(seed) = env_seed {
            plan.set("seed", seed)
                .map_err(|e| Failure::Usage(format!("{SEED_ENV}: {e}")))?;
        }
        if let Some(path) = &self.config {
            plan.apply_file(path).map_err(usage)?;
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("expected key=value, got '{o}'")))?;
            plan.set(k, v).map_err(usage)?;
        }
        let pfa_key = if verb == "roc" { "pfa_grid" } else { "p_fa" };
        let flags: [(&str, Option<String>); 10] = [
            (
                "output_path",
                self.out.as_ref().map(|p| p.display().to_string()),
            ),
            ("seed", self.seed.map(|s| s.to_string())),
            ("trials", self.trials.map(|s| s.to_string())),
            ("workers", self.workers.map(|s| s.to_string())),
            ("standard", self.standard.clone()),
            ("cp_ratio", self.cp_ratio.clone()),
            ("channel", self.channel.clone()),
            ("snr_db_list", self.snr.clone()),
            (pfa_key, self.pfa.clone()),
            (
                "sensing_time",
                self.sensing_ms.map(|ms| (ms / 1000.0).to_string()),
            ),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                plan.set(key, &v).map_err(usage)?;
            }
        }
        plan.expand().map_err(usage)?;
        Ok(plan)
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    run_with_env(args, env_seed.as_deref(), stdout, stderr)
}

/// [`run`] with the `TDSC_SEED` value passed explicitly.
pub fn run_with_env<I, T>(
    args: I,
    env_seed: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().ansi().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match &cli.command {
        Command::Generate { common, frames } => common
            .plan("generate", env_seed)
            .and_then(|p| generate(&p, *frames, stdout)),
        Command::Sense {
            common,
            input,
            starts,
            noise_power,
        } => common
            .plan("sense", env_seed)
            .and_then(|p| sense(&p, input, starts.as_deref(), *noise_power, stdout)),
        Command::Sweep { common } => common
            .plan("sweep", env_seed)
            .and_then(|p| sweep(&p, stdout)),
        Command::Roc { common } => common.plan("roc", env_seed).and_then(|p| roc(&p, stdout)),
        Command::Theory { common, lambda } => common
            .plan("theory", env_seed)
            .and_then(|p| theory(&p, *lambda, stdout)),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\nRun `tdsc --help` for usage.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| {
        Failure::Runtime(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

fn write_rows<R, F>(plan: &SweepPlan, stdout: &mut dyn Write, run: F) -> Outcome
where
    R: crate::experiment::CsvRow,
    F: Fn(
        &ExperimentConfig,
        &Executor,
        &mut dyn FnMut(&R) -> crate::Result<()>,
    ) -> crate::Result<()>,
{
    let configs = plan.expand().map_err(usage)?;
    let exec = Executor::new(Execution::from_workers(plan.base.workers)).map_err(usage)?;
    let emit = |sink: &mut dyn FnMut(&R, &RunLabels) -> crate::Result<()>| -> crate::Result<()> {
        for cfg in &configs {
            let labels = RunLabels::of(cfg);
            run(cfg, &exec, &mut |row| sink(row, &labels))?;
        }
        Ok(())
    };
    match &plan.base.output_path {
        Some(path) => {
            let mut sink = CsvSink::create::<R>(path)?;
            emit(&mut |row, labels| sink.write(row, labels))?;
        }
        None => {
            let mut sink = CsvSink::new::<R>(stdout, Path::new("<stdout>"))?;
            emit(&mut |row, labels| sink.write(row, labels))?;
        }
    }
    Ok(())
}

fn sweep(plan: &SweepPlan, stdout: &mut dyn Write) -> Outcome {
    write_rows::<CurvePoint, _>(plan, stdout, |cfg, exec, sink| {
        sweep_snr_with(cfg, exec, |p| sink(p))
    })
}

fn roc(plan: &SweepPlan, stdout: &mut dyn Write) -> Outcome {
    write_rows::<RocPoint, _>(plan, stdout, |cfg, exec, sink| {
        sweep_roc_with(cfg, &cfg.pfa_grid, exec, |p| sink(p))
    })
}

/// Shortest decimal for a probability, at most 10 places.
fn prob(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn theory(plan: &SweepPlan, lambda: Option<f64>, out: &mut dyn Write) -> Outcome {
    let cfg = &plan.base;
    let w = io_err(Path::new("<stdout>"));
    if let Some(lambda) = lambda {
        let params = HypothesisParams::from_noncentrality(lambda).map_err(usage)?;
        let gamma = detector::threshold(params.sigma_h0_sq, cfg.p_fa).map_err(usage)?;
        let pmd = pmd_analytic(gamma, &params)?;
        writeln!(out, "P_MD = {}", prob(pmd)).map_err(&w)?;
        writeln!(out, "p_md={pmd}\np_fa={}\nnoncentrality={lambda}", cfg.p_fa).map_err(&w)?;
        writeln!(out, "p_fa,p_d").map_err(&w)?;
        for (p, d) in roc_analytic(&params, &cfg.pfa_grid)? {
            writeln!(out, "{p},{d}").map_err(&w)?;
        }
        return Ok(());
    }
    writeln!(
        out,
        "standard,cp_ratio,channel,snr_db,lambda_mean,noncentrality,threshold,pmd_theory"
    )
    .map_err(&w)?;
    for cfg in plan.expand().map_err(usage)? {
        let scenario = Scenario::new(&cfg).map_err(usage)?;
        for &snr in &cfg.snr_db_list {
            let gamma = scenario.threshold(snr, cfg.p_fa)?;
            let (lm, nc, pmd) = match scenario.theory(snr)? {
                Some(p) => (
                    p.lambda_mean.to_string(),
                    p.noncentrality.to_string(),
                    pmd_analytic(gamma, &p)?.to_string(),
                ),
                None => Default::default(),
            };
            writeln!(
                out,
                "{},{},{},{snr},{lm},{nc},{gamma},{pmd}",
                cfg.standard, cfg.cp_ratio, cfg.channel
            )
            .map_err(&w)?;
        }
    }
    Ok(())
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn generate(plan: &SweepPlan, frames: Option<usize>, out: &mut dyn Write) -> Outcome {
    let cfg = &plan.base;
    let scenario = Scenario::new(cfg).map_err(usage)?;
    let frame = FrameConfig::default();
    let ofdm = scenario.ofdm().clone();
    let frame_time = frame.frame_len(&ofdm) as f64 / ofdm.sample_rate;
    let frames = frames.unwrap_or_else(|| (cfg.sensing_time / frame_time).ceil().max(1.0) as usize);
    if frames == 0 {
        return Err(Failure::Usage("--frames must be at least 1".into()));
    }
    let snr_db = cfg.snr_db_list[0];
    let mut rng = <rand_xoshiro::Xoshiro256PlusPlus as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let tx =
        OfdmModulator::new(ofdm.clone())?.frames(&frame, scenario.pattern(), frames, &mut rng)?;
    let phase = crate::channel::random_phase(&mut rng);
    let chain_seed = rand::RngCore::next_u64(&mut rng);
    let impairment = ImpairmentConfig {
        cfo_normalized: cfg.cfo_normalized,
        phase,
        snr_db,
    };
    let (rx, sigma2) = scenario.channel().apply(
        tx,
        &impairment,
        cfg.fft_size,
        scenario.reference_power(),
        chain_seed,
    )?;
    let path = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from("tdsc_capture.iq"));
    write_iq(&path, &rx.samples)?;
    let dl: Vec<usize> = rx
        .symbol_starts
        .iter()
        .enumerate()
        .filter(|(i, _)| frame.is_downlink(*i))
        .map(|(_, &s)| s)
        .collect();
    write_starts(&sidecar(&path, "starts"), &dl)?;
    let mut meta = IqMetadata {
        sample_rate: ofdm.sample_rate,
        fft_size: ofdm.num_subcarriers,
        cp_len: ofdm.cp_len,
        standard: cfg.standard.to_string(),
        seed: cfg.seed,
        extra: Default::default(),
    };
    for (k, v) in [
        ("noise_power", sigma2.to_string()),
        ("snr_db", snr_db.to_string()),
        ("channel", cfg.channel.clone()),
        ("cfo_normalized", cfg.cfo_normalized.to_string()),
        ("frames", frames.to_string()),
        (
            "pilot_amplitude",
            scenario.pattern().pilot_amplitude().to_string(),
        ),
    ] {
        meta.extra.insert(k.to_string(), v);
    }
    meta.write(&sidecar(&path, "meta"))?;
    writeln!(
        out,
        "wrote {} samples ({frames} frames, {} DL symbols) to {}",
        rx.len(),
        dl.len(),
        path.display()
    )
    .map_err(io_err(&path))?;
    Ok(())
}

fn sense(
    plan: &SweepPlan,
    input: &Path,
    starts: Option<&Path>,
    noise_power: Option<f64>,
    out: &mut dyn Write,
) -> Outcome {
    let cfg = &plan.base;
    let meta = IqMetadata::read(&sidecar(input, "meta"))?;
    let samples = read_iq(input)?;
    let starts_path = starts
        .map(Path::to_path_buf)
        .unwrap_or_else(|| sidecar(input, "starts"));
    let starts = read_starts(&starts_path)?;
    let standard: Standard = meta.standard.parse()?;
    let mut pattern = pattern_for(standard, meta.fft_size)?;
    if let Some(rho) = meta.extra.get("pilot_amplitude") {
        let rho: f64 = rho
            .parse()
            .map_err(|_| Error::Parse(format!("bad pilot_amplitude '{rho}' in metadata")))?;
        pattern = pattern.with_pilot_amplitude(rho)?;
    }
    let noise_power = match noise_power {
        Some(p) => p,
        None => meta
            .extra
            .get("noise_power")
            .ok_or_else(|| {
                Failure::Usage("no --noise-power given and none in the metadata".into())
            })?
            .parse()
            .map_err(|_| Error::Parse("bad noise_power in metadata".into()))?,
    };
    let m = meta.fft_size + meta.cp_len;
    let stream = Baseband::new(samples, meta.sample_rate, starts, m)?;
    let v = cfg.v.unwrap_or_else(|| standard.default_offset());
    let probe = TdscConfig::new(v, 1, meta.fft_size, m).map_err(usage)?;
    let period = pattern.period();
    let s_v = detector::available_pairs(&stream, &probe) / period * period;
    if s_v == 0 {
        return Err(Error::InsufficientSymbols {
            needed: period,
            available: detector::available_pairs(&stream, &probe),
        }
        .into());
    }
    let tdsc = TdscConfig { s_v, ..probe };
    let result = detector::sense(&stream, &tdsc, &pattern, noise_power, cfg.p_fa)?;
    let cmp = if result.statistic >= result.threshold {
        ">="
    } else {
        "<"
    };
    let w = io_err(Path::new("<stdout>"));
    writeln!(
        out,
        "{}: |C(v)| = {:e} {cmp} threshold {:e} (v = {v}, S_v = {s_v}, P_FA = {})",
        result.decision, result.statistic, result.threshold, cfg.p_fa
    )
    .map_err(&w)?;
    writeln!(
        out,
        "decision={}\nstatistic={}\nc_re={}\nc_im={}\nthreshold={}\nsigma_h0_sq={}\nnoise_power={noise_power}\nv={v}\ns_v={s_v}\np_fa={}",
        result.decision,
        result.statistic,
        result.c_value.re,
        result.c_value.im,
        result.threshold,
        result.sigma_h0_sq.unwrap_or_default(),
        cfg.p_fa
    )
    .map_err(&w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str], env: Option<&str>) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let mut argv = vec!["tdsc"];
        argv.extend_from_slice(args);
        let code = run_with_env(argv, env, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn no_arguments_is_a_usage_error() {
        let (code, out, err) = run_capture(&[], None);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("Usage"));
    }

    #[test]
    fn help_lists_keys() {
        let (code, out, _) = run_capture(&["--help"], None);
        assert_eq!(code, EXIT_OK);
        for (k, _) in CONFIG_KEYS {
            assert!(out.contains(k), "{k}");
        }
    }

    #[test]
    fn unknown_verb_and_flag() {
        assert_eq!(run_capture(&["frobnicate"], None).0, EXIT_USAGE);
        assert_eq!(run_capture(&["theory", "--bogus"], None).0, EXIT_USAGE);
        assert_eq!(run_capture(&["theory", "colour=red"], None).0, EXIT_USAGE);
        assert_eq!(run_capture(&["theory", "novalue"], None).0, EXIT_USAGE);
    }

    #[test]
    fn degenerate_theory() {
        let (code, out, _) = run_capture(&["theory", "--lambda", "0", "--pfa", "0.01"], None);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with("P_MD = 0.99\n"), "{out}");
    }

    #[test]
    fn precedence_of_settings() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "seed = 5\ntrials = 7\np_fa = 0.2\n").unwrap();
        let c = cfg.to_str().unwrap();
        let common = |args: &[&str]| {
            let mut argv = vec!["tdsc", "sweep"];
            argv.extend_from_slice(args);
            match Cli::try_parse_from(argv).unwrap().command {
                Command::Sweep { common } => common,
                _ => unreachable!(),
            }
        };
        let plan = |args: &[&str], env: Option<&str>| match common(args).plan("sweep", env) {
            Ok(p) => p.base,
            Err(Failure::Usage(m)) => panic!("{m}"),
            Err(Failure::Runtime(e)) => panic!("{e}"),
        };
        assert_eq!(plan(&[], Some("3")).seed, 3);
        assert_eq!(plan(&["--config", c], Some("3")).seed, 5);
        assert_eq!(plan(&["--config", c, "seed=6"], Some("3")).seed, 6);
        assert_eq!(
            plan(&["--config", c, "seed=6", "--seed", "8"], Some("3")).seed,
            8
        );
        let b = plan(&["--config", c, "trials=9", "--pfa", "0.05"], None);
        assert_eq!((b.trials, b.p_fa), (9, 0.05));
        let b = plan(&["--sensing-ms", "20", "--snr", "-20:2:-16"], None);
        assert!((b.sensing_time - 0.02).abs() < 1e-15);
        assert_eq!(b.snr_db_list, vec![-20.0, -18.0, -16.0]);
    }

    #[test]
    fn bad_env_seed_is_usage_error() {
        assert_eq!(
            run_capture(&["theory", "--lambda", "1"], Some("abc")).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn missing_input_is_runtime_error() {
        let (code, _, err) = run_capture(&["sense", "--input", "/nonexistent/x.iq"], None);
        assert_eq!(code, EXIT_RUNTIME);
        assert!(err.contains("/nonexistent/x.iq"));
    }

    #[test]
    fn prob_formatting() {
        assert_eq!(prob(0.9900000000000001), "0.99");
        assert_eq!(prob(1.0), "1");
        assert_eq!(prob(0.0), "0");
        assert_eq!(prob(0.123456789012), "0.123456789");
    }
}
