//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a statistical check failed, 2 usage error,
//! 3 malformed input file.

pub mod formats;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    design_binomial, design_fixed_weight, expected_candidates, optimal_q_binomial, required_length,
    required_length_checked, roberts_weight, SourceModel,
};
use crate::codegen::{CodeSpec, Codebook};
use crate::optimizer::{isotropize, optimal_weights_independent};
use crate::simulator::{run_false_drop_experiment, run_target_experiment, SimConfig, SimResult};

use formats::{
    codebook_to_bytes, format_weight_plan, parse_codebook, parse_frequencies, parse_record_line,
    parse_records, parse_signatures, parse_weight_plan, signatures_to_bytes,
};

pub const EXIT_STATISTICAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_FORMAT: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn format(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FORMAT,
            message: message.into(),
        }
    }

    pub fn statistical(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_STATISTICAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(format!("write failed: {e}"))
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "supcode",
    version,
    about = "Superimposed code design, encoding and screening"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predict false-drop rate and signature moments of a code design.
    Predict(PredictArgs),
    /// Fixed code weights for independent source bits from a frequency file.
    Weights(WeightsArgs),
    /// Generate a codebook file.
    Gencode(GencodeArgs),
    /// Encode a record file into a signature file.
    Encode(EncodeArgs),
    /// List records whose signature covers the query signature.
    Screen(ScreenArgs),
    /// Monte Carlo check of the analytic predictions.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Binomial,
    Fixed,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_enum, default_value = "binomial")]
    pub scheme: SchemeArg,
    /// Signature length.
    #[arg(short = 'n')]
    pub n: Option<usize>,
    /// Record weight.
    #[arg(short = 'r')]
    pub r: Option<usize>,
    /// Query weight.
    #[arg(short = 's')]
    pub s: Option<usize>,
    /// Probability that a binomial code bit is off.
    #[arg(short = 'q', long = "q", conflicts_with = "optimal_q")]
    pub q: Option<f64>,
    #[arg(long)]
    pub optimal_q: bool,
    /// Fixed code weight.
    #[arg(short = 'w', conflicts_with = "optimal_w")]
    pub w: Option<usize>,
    /// Use `round(n ln 2 / r)` as the fixed code weight.
    #[arg(long)]
    pub optimal_w: bool,
    /// Report the signature length needed for `--theta-max` at query weight `--s-min`.
    #[arg(long)]
    pub required_n: bool,
    #[arg(long)]
    pub s_min: Option<usize>,
    #[arg(long)]
    pub theta_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// One bit frequency per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(short = 'n')]
    pub n: usize,
    /// Write the plan here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CodeArgs {
    #[arg(long, value_enum, default_value = "fixed")]
    pub scheme: SchemeArg,
    #[arg(short = 'w')]
    pub w: Option<usize>,
    #[arg(short = 'q', long = "q")]
    pub q: Option<f64>,
    /// Per-bit fixed weights from a weight plan file.
    #[arg(long, conflicts_with_all = ["w", "q"])]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GencodeArgs {
    #[arg(short = 'n')]
    pub n: Option<usize>,
    /// Source length.
    #[arg(short = 'N')]
    pub big_n: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[arg(long)]
    pub signatures: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Query in record-line format; an empty string is the zero pattern.
    #[arg(long, allow_hyphen_values = true)]
    pub query: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(short = 'n')]
    pub n: Option<usize>,
    /// Source length.
    #[arg(short = 'N')]
    pub big_n: Option<usize>,
    /// Fixed source weight.
    #[arg(short = 'r', conflicts_with_all = ["source_p", "frequencies"])]
    pub r: Option<usize>,
    /// Independent source bits, all with this frequency.
    #[arg(long, conflicts_with = "frequencies")]
    pub source_p: Option<f64>,
    /// Independent source bits with per-bit frequencies from a file.
    #[arg(long)]
    pub frequencies: Option<PathBuf>,
    #[command(flatten)]
    pub code: CodeArgs,
    /// Derive per-bit fixed weights from the source frequencies.
    #[arg(long, conflicts_with_all = ["w", "q", "weights"])]
    pub optimal_weights: bool,
    /// Keep one codebook for all trials.
    #[arg(long)]
    pub fixed_codebook: bool,
    /// Mask weights whose cover frequency is recorded.
    #[arg(long, value_delimiter = ',')]
    pub masks: Vec<usize>,
    /// Query weight; runs the false-drop experiment.
    #[arg(short = 's')]
    pub s: Option<usize>,
    /// Print the comparison table and fail on large deviations.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value_t = crate::simulator::Z_LIMIT)]
    pub z_limit: f64,
}

fn need<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::usage(format!("missing required flag {flag}")))
}

fn read_text(path: &Path) -> CliResult<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes)
        .map_err(|_| CliError::format(format!("{}: not valid UTF-8", path.display())))
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn in_context<T>(path: &Path, r: CliResult<T>) -> CliResult<T> {
    r.map_err(|e| CliError {
        code: e.code,
        message: format!("{}: {}", path.display(), e.message),
    })
}

fn kv(out: &mut dyn Write, key: &str, value: impl fmt::Display) -> CliResult {
    writeln!(out, "{key} = {value}")?;
    Ok(())
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> CliResult {
    if a.required_n {
        let r = need(a.r, "-r")?;
        let s_min = need(a.s_min, "--s-min")?;
        let theta_max = need(a.theta_max, "--theta-max")?;
        kv(out, "required_n", required_length(r, s_min, theta_max)?)?;
        kv(
            out,
            "required_n_exact",
            required_length_checked(r, s_min, theta_max)?,
        )?;
        kv(
            out,
            "q_optimal",
            format!("{:.6}", optimal_q_binomial(r, s_min)),
        )?;
        if a.n.is_none() {
            return Ok(());
        }
    } else if a.s_min.is_some() || a.theta_max.is_some() {
        return Err(CliError::usage(
            "--s-min and --theta-max require --required-n",
        ));
    }
    let n = need(a.n, "-n")?;
    let r = need(a.r, "-r")?;
    let s = need(a.s, "-s")?;
    let report = match a.scheme {
        SchemeArg::Binomial => {
            if a.w.is_some() || a.optimal_w {
                return Err(CliError::usage("-w and --optimal-w need --scheme fixed"));
            }
            let q = if a.optimal_q {
                optimal_q_binomial(r, s)
            } else {
                need(a.q, "-q or --optimal-q")?
            };
            design_binomial(n, r, s, q)?
        }
        SchemeArg::Fixed => {
            if a.q.is_some() || a.optimal_q {
                return Err(CliError::usage("-q and --optimal-q need --scheme binomial"));
            }
            let w = if a.optimal_w {
                roberts_weight(n, r)
            } else {
                need(a.w, "-w or --optimal-w")?
            };
            design_fixed_weight(n, r, s, w)?
        }
    };
    write!(out, "{report}")?;
    if a.scheme == SchemeArg::Binomial {
        kv(out, "q_optimal", format!("{:.6}", optimal_q_binomial(r, s)))?;
    }
    Ok(())
}

fn cmd_weights(a: &WeightsArgs, out: &mut dyn Write) -> CliResult {
    let p = in_context(&a.input, parse_frequencies(&read_text(&a.input)?))?;
    let plan = optimal_weights_independent(&p, a.n)?;
    let text = format_weight_plan(&plan);
    match &a.output {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            kv(out, "bits", plan.weights.len())?;
            kv(out, "max_p", plan.max_p)?;
            kv(out, "lambda_minus_2", format!("{:.6e}", plan.lambda_diag))?;
            kv(out, "warnings", plan.warnings.len())?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Per-bit specs from `--scheme/-w/-q` or a weight plan file.
fn code_specs(c: &CodeArgs, n: Option<usize>, big_n: Option<usize>) -> CliResult<Vec<CodeSpec>> {
    if let Some(path) = &c.weights {
        let specs = in_context(path, parse_weight_plan(&read_text(path)?))?;
        if let Some(n) = n.filter(|&n| n != specs[0].n()) {
            return Err(CliError::usage(format!(
                "-n {n} differs from the weight plan's n = {}",
                specs[0].n()
            )));
        }
        if let Some(big_n) = big_n.filter(|&b| b != specs.len()) {
            return Err(CliError::usage(format!(
                "-N {big_n} differs from the {} plan weights",
                specs.len()
            )));
        }
        return Ok(specs);
    }
    let n = need(n, "-n")?;
    let big_n = need(big_n, "-N")?;
    let spec = match c.scheme {
        SchemeArg::Fixed => {
            if c.q.is_some() {
                return Err(CliError::usage("-q needs --scheme binomial"));
            }
            CodeSpec::fixed_weight(n, need(c.w, "-w")?)?
        }
        SchemeArg::Binomial => {
            if c.w.is_some() {
                return Err(CliError::usage("-w needs --scheme fixed"));
            }
            CodeSpec::binomial(n, need(c.q, "-q")?)?
        }
    };
    Ok(vec![spec; big_n])
}

fn cmd_gencode(a: &GencodeArgs, out: &mut dyn Write) -> CliResult {
    if a.big_n == Some(0) {
        return Err(CliError::usage("-N must be positive"));
    }
    let specs = code_specs(&a.code, a.n, a.big_n)?;
    let cb = Codebook::build(specs, a.seed)?;
    let bytes = codebook_to_bytes(&cb);
    write_file(&a.output, &bytes)?;
    kv(out, "n", cb.n())?;
    kv(out, "N", cb.source_len())?;
    kv(out, "seed", cb.seed())?;
    kv(out, "bytes", bytes.len())?;
    Ok(())
}

fn load_codebook(path: &Path) -> CliResult<Codebook> {
    in_context(path, parse_codebook(&read_bytes(path)?))
}

fn cmd_encode(a: &EncodeArgs, out: &mut dyn Write) -> CliResult {
    let cb = load_codebook(&a.codebook)?;
    let (len, records) = in_context(&a.records, parse_records(&read_text(&a.records)?))?;
    if len != cb.source_len() {
        return Err(CliError::usage(format!(
            "record file has N = {len}, codebook has N = {}",
            cb.source_len()
        )));
    }
    let sigs = records
        .iter()
        .map(|rec| cb.encode(rec))
        .collect::<crate::Result<Vec<_>>>()?;
    write_file(&a.output, &signatures_to_bytes(cb.n(), &sigs))?;
    kv(out, "records", sigs.len())?;
    kv(out, "n", cb.n())?;
    Ok(())
}

fn cmd_screen(a: &ScreenArgs, out: &mut dyn Write) -> CliResult {
    let cb = load_codebook(&a.codebook)?;
    let (n, sigs) = in_context(&a.signatures, parse_signatures(&read_bytes(&a.signatures)?))?;
    if n != cb.n() {
        return Err(CliError::usage(format!(
            "signature file has n = {n}, codebook has n = {}",
            cb.n()
        )));
    }
    let query = parse_record_line(&a.query, cb.source_len())
        .map_err(|e| CliError::usage(format!("--query: {e}")))?;
    let qsig = cb.encode(&query)?;
    let mut hits = 0usize;
    for (i, sig) in sigs.iter().enumerate() {
        if sig.covers(&qsig)? {
            writeln!(out, "{i}")?;
            hits += 1;
        }
    }
    writeln!(out, "# candidates = {hits}")?;
    writeln!(out, "# query_signature_weight = {}", qsig.weight())?;
    if !sigs.is_empty() {
        // Prediction from the isotropic distribution with the stored signatures' weight histogram.
        let mut hist = vec![0.0; n + 1];
        for sig in &sigs {
            hist[sig.weight()] += 1.0;
        }
        let total = sigs.len() as f64;
        hist.iter_mut().for_each(|h| *h /= total);
        let target = isotropize(&hist, n)?;
        let expected = expected_candidates(&target, qsig.weight(), sigs.len())?;
        writeln!(out, "# expected_candidates = {expected:.3}")?;
    }
    Ok(())
}

fn simulate_config(a: &SimulateArgs) -> CliResult<(SimConfig, Option<SourceModel>)> {
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let freqs = match &a.frequencies {
        Some(path) => Some(in_context(path, parse_frequencies(&read_text(path)?))?),
        None => None,
    };
    let big_n = match (&freqs, a.big_n) {
        (Some(p), Some(b)) if p.len() != b => {
            return Err(CliError::usage(format!(
                "-N {b} differs from the {} frequencies",
                p.len()
            )))
        }
        (Some(p), _) => p.len(),
        (None, b) => need(b, "-N")?,
    };
    let source = match (a.r, a.source_p, freqs) {
        (Some(r), _, _) => SourceModel::fixed_weight(big_n, r)?,
        (None, Some(p), _) => SourceModel::independent(vec![p; big_n])?,
        (None, None, Some(p)) => SourceModel::independent(p)?,
        _ => {
            return Err(CliError::usage(
                "missing source model: -r, --source-p or --frequencies",
            ))
        }
    };
    let specs = if a.optimal_weights {
        let p = match source.kind() {
            crate::analysis::SourceKind::IndependentBits { p } => p.clone(),
            _ => {
                return Err(CliError::usage(
                    "--optimal-weights needs --source-p or --frequencies",
                ))
            }
        };
        optimal_weights_independent(&p, need(a.n, "-n")?)?.specs()
    } else {
        code_specs(&a.code, a.n, Some(big_n))?
    };
    let query = match a.s {
        Some(s) => Some(SourceModel::fixed_weight(big_n, s)?),
        None => None,
    };
    let mut cfg = SimConfig::new(a.trials, a.seed, source, specs);
    cfg.regenerate_codebook = !a.fixed_codebook;
    cfg.mask_weights = a.masks.clone();
    Ok((cfg, query))
}

fn write_sim_report(cfg: &SimConfig, res: &SimResult, out: &mut dyn Write) -> CliResult {
    kv(out, "trials", res.trials)?;
    kv(out, "seed", cfg.seed)?;
    kv(
        out,
        "mode",
        if cfg.regenerate_codebook {
            "regenerate"
        } else {
            "fixed"
        },
    )?;
    kv(out, "N", cfg.source.len())?;
    kv(out, "n", cfg.specs[0].n())?;
    kv(out, "mean_weight", format!("{:.6}", res.mean_weight.value))?;
    kv(
        out,
        "mean_weight_se",
        format!("{:.6}", res.mean_weight.std_error),
    )?;
    kv(
        out,
        "weight_variance",
        format!("{:.6}", res.weight_variance.value),
    )?;
    kv(
        out,
        "weight_variance_se",
        format!("{:.6}", res.weight_variance.std_error),
    )?;
    kv(out, "g1", format!("{:.6}", res.g1.value))?;
    for (a, est) in &res.mask_covers {
        kv(out, &format!("cover_F{a}"), format!("{:.6}", est.value))?;
    }
    if let Some(fd) = &res.false_drop {
        kv(out, "theta", format!("{:.6e}", fd.theta_all.value))?;
        kv(out, "theta_se", format!("{:.6e}", fd.theta_all.std_error))?;
        kv(
            out,
            "theta_nonmatching",
            format!("{:.6e}", fd.theta_nonmatching.value),
        )?;
        kv(
            out,
            "theta_disjoint",
            format!("{:.6e}", fd.theta_disjoint.value),
        )?;
        if let Some(c) = fd.conditional_all {
            kv(out, "theta_conditional", format!("{:.6e}", c.value))?;
            kv(out, "theta_conditional_se", format!("{:.6e}", c.std_error))?;
        }
        if let Some(c) = fd.conditional_disjoint {
            kv(
                out,
                "theta_conditional_disjoint",
                format!("{:.6e}", c.value),
            )?;
            kv(
                out,
                "theta_conditional_disjoint_se",
                format!("{:.6e}", c.std_error),
            )?;
        }
    }
    Ok(())
}

fn write_comparisons(res: &SimResult, out: &mut dyn Write) -> CliResult {
    writeln!(
        out,
        "{:<28} {:>14} {:>14} {:>12} {:>9}  enforced",
        "quantity", "predicted", "observed", "std_error", "z"
    )?;
    for c in &res.comparisons {
        writeln!(
            out,
            "{:<28} {:>14.6e} {:>14.6e} {:>12.4e} {:>9.3} {}",
            c.quantity,
            c.predicted,
            c.observed,
            c.std_error,
            c.z,
            if c.enforced { "yes" } else { "no" }
        )?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    let (cfg, query) = simulate_config(a)?;
    let res = match &query {
        Some(q) => run_false_drop_experiment(&cfg, q)?,
        None => run_target_experiment(&cfg)?,
    };
    write_sim_report(&cfg, &res, out)?;
    if a.compare {
        write_comparisons(&res, out)?;
        kv(out, "max_abs_z", format!("{:.3}", res.max_abs_z()))?;
        let ok = res.passes(a.z_limit);
        kv(out, "status", if ok { "pass" } else { "fail" })?;
        if !ok {
            return Err(CliError::statistical(format!(
                "max |z| = {:.3} exceeds {}",
                res.max_abs_z(),
                a.z_limit
            )));
        }
    }
    Ok(())
}

/// Runs a parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Predict(a) => cmd_predict(a, out),
        Command::Weights(a) => cmd_weights(a, out),
        Command::Gencode(a) => cmd_gencode(a, out),
        Command::Encode(a) => cmd_encode(a, out),
        Command::Screen(a) => cmd_screen(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors go to standard error.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.code
        }
    }
}
