//! Command-line front end for the `sixstate` key-rate library.
//!
//! Every command goes through [`run`], which returns the process exit code:
//! 0 on success, 1 for usage or invariant errors, 2 when no key can be
//! extracted.

pub mod error;
pub mod output;
pub mod settings;
pub mod sweep;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sixstate::rate::{asymptotic_rate, min_pulses_for_key, qber_threshold};
use sixstate::sim::compare_with_model;
use sixstate::spdc::source_stats;
use sixstate::{optimize_asymptotic, optimize_key_length, simulate, Error, RateResult, SetupParams};

pub use error::CliError;
use output::{header_lines, render_table, select_columns, Row};
use settings::{Choice, Format, Settings};
use sweep::{SweepSpec, SweepVar};

#[derive(Debug, Parser)]
#[command(name = "sixstate", version, about = "Finite-key rates for six-state QKD with an SPDC source")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimized finite-key rate at one operating point.
    Rate(Common),
    /// Asymptotic rate, optimized over lambda unless it is fixed.
    Asymptotic(Common),
    /// Table of rates over L, N_source or lambda.
    Sweep(SweepArgs),
    /// Smallest N_source giving a key of at least `--target` bits.
    MinPulses(Common),
    /// Monte Carlo run of the protocol, reported as JSON.
    Simulate(SimulateArgs),
    /// QBER above which the asymptotic rate vanishes.
    Threshold(ThresholdArgs),
}

/// Flags shared by all model commands. Values are kept as text and parsed by
/// [`Settings::set`] so flags and config files follow the same rules.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Alice-Bob distance in km.
    #[arg(long = "L", value_name = "KM", allow_hyphen_values = true)]
    pub length_km: Option<String>,
    /// Fibre attenuation in dB/km.
    #[arg(long, value_name = "DB_PER_KM")]
    pub alpha: Option<String>,
    /// Detector efficiency (both sides unless --eta-d-bob is given).
    #[arg(long, value_name = "0..1")]
    pub eta_d: Option<String>,
    #[arg(long, value_name = "0..1")]
    pub eta_d_bob: Option<String>,
    /// Misalignment probability per photon.
    #[arg(long, value_name = "0..0.5")]
    pub eta_m: Option<String>,
    /// Source brightness, or `opt`.
    #[arg(long, value_name = "FLOAT|opt")]
    pub lambda: Option<String>,
    /// Number of emitted pulses; scientific notation is accepted.
    #[arg(long = "N", value_name = "COUNT")]
    pub n_source: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub eps_ec: Option<String>,
    /// Error-correction efficiency.
    #[arg(long)]
    pub fec: Option<String>,
    /// X-basis probability, or `opt`.
    #[arg(long, value_name = "FLOAT|opt")]
    pub px: Option<String>,
    /// Split eps_PE over the three bases.
    #[arg(long)]
    pub strict_pe: bool,
    /// Key length required by min-pulses, in bits.
    #[arg(long, value_name = "BITS")]
    pub target: Option<String>,
    /// `key = value` file; flags take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Swept quantity.
    #[arg(long = "var", value_enum)]
    pub var: SweepVar,
    /// Comma-separated values.
    #[arg(long, conflicts_with = "range", required_unless_present = "range")]
    pub values: Option<String>,
    /// `start,stop,count[,lin|log]`.
    #[arg(long)]
    pub range: Option<String>,
    /// Report asymptotic rates instead of finite-key ones.
    #[arg(long)]
    pub asymptotic: bool,
    /// Comma-separated subset of the output columns.
    #[arg(long)]
    pub columns: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of emitted pulses.
    #[arg(long)]
    pub pulses: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    /// Defaults, then the config file, then flags.
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_config_file(path)?;
        }
        let flags = [
            ("L", &self.length_km),
            ("alpha", &self.alpha),
            ("eta-d", &self.eta_d),
            ("eta-d-bob", &self.eta_d_bob),
            ("eta-m", &self.eta_m),
            ("lambda", &self.lambda),
            ("N", &self.n_source),
            ("eps", &self.eps),
            ("eps-ec", &self.eps_ec),
            ("fec", &self.fec),
            ("px", &self.px),
            ("target", &self.target),
            ("jobs", &self.jobs),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if self.strict_pe {
            s.strict_pe = true;
        }
        if let Some(f) = self.format {
            s.format = f;
        }
        Ok(s)
    }
}

/// Optimized finite-key row for the settings as given.
pub fn finite_row(s: &Settings) -> Result<(Row, Option<RateResult>), CliError> {
    let setup = s.setup()?;
    let config = s.key_config()?;
    let space = s.search_space()?;
    let mut row = Row { L_km: s.length_km, N_source: Some(s.n_source), ..Row::default() };
    let opt = match optimize_key_length(&setup, &config, s.n_source, &space) {
        Ok(opt) => opt,
        Err(Error::Infeasible(_) | Error::ZeroCoincidence) => return Ok((row, None)),
        Err(e) => return Err(e.into()),
    };
    let p = opt.best_params;
    row.lambda_opt = Some(p.lambda);
    row.p_x_opt = Some(p.p_x);
    row.eps_bar = Some(p.eps_bar);
    row.eps_pe = Some(p.eps_pe);
    row.eps_pa = Some(p.eps_pa);
    fill_source(&mut row, &setup, p.lambda)?;
    if let (true, Some(best)) = (opt.feasible, opt.best) {
        row.key_bits = Some(best.key_length_bits);
        row.rate = Some(best.rate);
    }
    Ok((row, opt.best))
}

/// Asymptotic row; lambda is optimized unless fixed.
pub fn asymptotic_row(s: &Settings) -> Result<Row, CliError> {
    let setup = s.setup()?;
    let mut row = Row { L_km: s.length_km, ..Row::default() };
    let (lambda, rate) = match s.lambda {
        Choice::Opt => match optimize_asymptotic(&setup, s.search_space()?.lambda_range) {
            Ok(a) => (a.lambda, a.rate),
            Err(Error::ZeroCoincidence) => return Ok(row),
            Err(e) => return Err(e.into()),
        },
        Choice::Fixed(l) => match asymptotic_rate(&setup) {
            Ok(r) => (l, r),
            Err(Error::ZeroCoincidence) => {
                row.lambda_opt = Some(l);
                return Ok(row);
            }
            Err(e) => return Err(e.into()),
        },
    };
    row.lambda_opt = Some(lambda);
    fill_source(&mut row, &setup, lambda)?;
    row.rate = (rate > 0.0).then_some(rate);
    Ok(row)
}

fn fill_source(row: &mut Row, setup: &SetupParams, lambda: f64) -> Result<(), CliError> {
    match source_stats(&setup.with_lambda(lambda)?) {
        Ok(st) => {
            row.e_pdc = Some(st.e_pdc);
            row.p11 = Some(st.p11);
            Ok(())
        }
        Err(Error::ZeroCoincidence) => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn infeasible_code(row: &Row) -> i32 {
    if row.feasible() {
        0
    } else {
        2
    }
}

fn cmd_rate(common: &Common) -> Result<(String, i32), CliError> {
    let s = common.settings()?;
    let (row, best) = finite_row(&s)?;
    let mut extra = Vec::new();
    if let Some(b) = best {
        let d = b.breakdown;
        extra = vec![
            ("breakdown.entropy_bits", d.entropy_bits),
            ("breakdown.smoothing_penalty_bits", d.smoothing_penalty_bits),
            ("breakdown.leak_ec_bits", d.leak_ec_bits),
            ("breakdown.pa_cost_bits", d.pa_cost_bits),
            ("breakdown.ec_verification_bits", d.ec_verification_bits),
            ("breakdown.bracket_bits", b.bracket_bits),
        ];
    }
    let extra: Vec<(&str, String)> = extra.into_iter().map(|(k, v)| (k, output::fmt_f64(v))).collect();
    let header = header_lines("rate", &s, &extra);
    let details = best.map(serde_json::to_value).transpose()?;
    let text = render_table(s.format, &header, &output::COLUMNS, &[row], details)?;
    Ok((text, infeasible_code(&row)))
}

fn cmd_asymptotic(common: &Common) -> Result<(String, i32), CliError> {
    let s = common.settings()?;
    let row = asymptotic_row(&s)?;
    let header = header_lines("asymptotic", &s, &[]);
    let text = render_table(s.format, &header, &output::COLUMNS, &[row], None)?;
    Ok((text, infeasible_code(&row)))
}

fn cmd_min_pulses(common: &Common) -> Result<(String, i32), CliError> {
    let s = common.settings()?;
    let setup = s.setup()?;
    let found = min_pulses_for_key(&setup, &s.key_config()?, s.target_bits, &s.search_space()?)?;
    let mut at_min = s.clone();
    at_min.n_source = found.n_source;
    let (row, _) = finite_row(&at_min)?;
    let header = header_lines("min-pulses", &s, &[("probes", found.probes.to_string())]);
    let text = render_table(s.format, &header, &output::COLUMNS, &[row], None)?;
    Ok((text, 0))
}

fn cmd_sweep(args: &SweepArgs) -> Result<(String, i32), CliError> {
    let s = args.common.settings()?;
    let columns = select_columns(args.columns.as_deref())?;
    let spec = SweepSpec::parse(args.var, args.values.as_deref(), args.range.as_deref(), args.asymptotic)?;
    let rows = sweep::run(&spec, &s)?;
    let header = header_lines("sweep", &s, &spec.header_pairs());
    let text = render_table(s.format, &header, &columns, &rows, None)?;
    Ok((text, 0))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(String, i32), CliError> {
    let mut s = args.common.settings()?;
    if let Some(p) = &args.pulses {
        s.set("pulses", p)?;
    }
    if let Some(seed) = &args.seed {
        s.set("seed", seed)?;
    }
    let setup = match s.lambda {
        Choice::Fixed(_) => s.setup()?,
        Choice::Opt => return Err(CliError::Usage("simulate needs a fixed --lambda".into())),
    };
    let tally = simulate(&setup, &s.sifting()?, s.pulses, s.seed)?;
    let comparison = compare_with_model(&tally)?;
    let report = json!({
        "header": header_lines("simulate", &s, &[]),
        "tally": tally,
        "comparison": comparison,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    Ok((text, 0))
}

fn cmd_threshold(args: &ThresholdArgs) -> Result<(String, i32), CliError> {
    let e = qber_threshold();
    let text = match args.format.unwrap_or_default() {
        Format::Csv => format!("qber_threshold\n{}\n", output::fmt_f64(e)),
        Format::Json => format!("{}\n", json!({ "qber_threshold": e })),
    };
    Ok((text, 0))
}

/// Runs one command line and writes its output. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Rate(c) => cmd_rate(c),
        Command::Asymptotic(c) => cmd_asymptotic(c),
        Command::Sweep(a) => cmd_sweep(a),
        Command::MinPulses(c) => cmd_min_pulses(c),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Threshold(a) => cmd_threshold(a),
    };
    match result {
        Ok((text, code)) => {
            if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
            code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
