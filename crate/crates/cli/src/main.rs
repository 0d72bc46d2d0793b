use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use ehll::analysis;
use ehll::harness::simulate::{
    matched_registers, run_simulation, BiasConstants, EstimatorSpec, SimulationConfig,
};
use ehll::harness::{self, format_sig, svg};
use ehll::martingale::MartingaleCounter;
use ehll::oracle::{self, Indicator};
use ehll::{AnySketch, BucketLayout, CardinalitySketch, SketchKind};

/// Distinct-count sketches: estimate, merge, simulate, and inspect constants.
#[derive(Parser)]
#[command(name = "ehll", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the number of distinct newline-delimited tokens.
    Estimate(EstimateArgs),
    /// Merge sketch files of the same kind, precision and seed.
    Merge(MergeArgs),
    /// Monte-Carlo accuracy campaign, written as CSV.
    Simulate(SimulateArgs),
    /// Bias and variance constants for a register count.
    Constants {
        #[arg(long, default_value_t = 1024)]
        m: u32,
    },
    /// Memory-variance products.
    Mvp {
        #[arg(long, default_value_t = 64)]
        bits: u32,
    },
    /// Brute-force reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct SketchArgs {
    #[arg(long, default_value = "ehll")]
    sketch: SketchKind,
    /// Precision: 2^b registers.
    #[arg(long, default_value_t = 10)]
    b: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the large-m limits of the bias constants.
    #[arg(long)]
    asymptotic_constants: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Token file; standard input when omitted (and no --load is given).
    input: Option<PathBuf>,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Size HLL / HLL-TC to the register payload of a 2^b EHLL / EHLL-TC.
    #[arg(long)]
    match_memory: bool,
    /// Also run the martingale estimator.
    #[arg(long)]
    martingale: bool,
    /// Write the sketch to this file.
    #[arg(long)]
    save: Option<PathBuf>,
    /// Start from a saved sketch; its kind, precision and seed win.
    #[arg(long)]
    load: Option<PathBuf>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    asymptotic_constants: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sketch kinds to compare.
    #[arg(long, value_delimiter = ',', default_value = "ehll,hll")]
    sketch: Vec<SketchKind>,
    #[arg(long, default_value_t = SimulationConfig::DEFAULT_B)]
    b: u8,
    #[arg(long)]
    match_memory: bool,
    /// Use martingale estimators instead of the sketches' own estimates.
    #[arg(long)]
    martingale: bool,
    #[arg(long, default_value_t = SimulationConfig::DEFAULT_N)]
    n: u64,
    #[arg(long, default_value_t = SimulationConfig::DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = SimulationConfig::DEFAULT_CHECKPOINTS)]
    checkpoints: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// 25,000 trials of 10^6 elements with all four matched-memory kinds.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    asymptotic_constants: bool,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact E[Y] (ehll) or E[Z] (hll) by enumeration.
    Expectation {
        #[arg(long, default_value = "ehll")]
        sketch: SketchKind,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
        #[arg(long, default_value_t = 64)]
        k: u32,
        /// Also print a Monte-Carlo mean over this many trials.
        #[arg(long)]
        mc_trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Exit code 2 for configuration problems, 1 for everything else.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ehll::Error> for Failure {
    fn from(e: ehll::Error) -> Self {
        use ehll::Error::*;
        match e {
            InvalidPrecision(_) | InvalidRegisterCount(_) | Domain(_) | Incompatible(_) => {
                Failure::Usage(e.into())
            }
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Constants { m } => cmd_constants(m),
        Command::Mvp { bits } => cmd_mvp(bits),
        Command::Oracle(o) => cmd_oracle(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn print_estimate(out: &mut impl Write, sketch: &AnySketch, asymptotic: bool) -> io::Result<()> {
    let est = match sketch.kind().asymptotic_bias() {
        Some(bias) if asymptotic => sketch.estimate_with_bias(bias),
        _ => sketch.estimate(),
    };
    writeln!(out, "sketch: {}", sketch.kind())?;
    writeln!(out, "m: {}", sketch.registers())?;
    writeln!(out, "estimate: {}", format_sig(est.value))?;
    writeln!(out, "regime: {}", est.regime)?;
    writeln!(out, "memory_bits: {}", sketch.memory_bits())
}

fn read_sketch(path: &Path) -> Result<AnySketch, Failure> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    harness::deserialize(&bytes).map_err(|e| Failure::Runtime(anyhow!("{}: {e}", path.display())))
}

fn write_sketch(path: &Path, sketch: &AnySketch) -> CmdResult {
    let bytes = harness::serialize(sketch).map_err(|e| Failure::Runtime(e.into()))?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> CmdResult {
    if a.load.is_some() && a.martingale {
        return Err(usage(
            "--martingale needs the whole stream; it cannot resume from --load",
        ));
    }
    let mut sketch = match &a.load {
        Some(path) => read_sketch(path)?,
        None => {
            let registers = if a.match_memory {
                matched_registers(a.sketch.sketch, a.sketch.b)?
            } else {
                BucketLayout::with_precision(a.sketch.b)?.registers()
            };
            AnySketch::new(
                a.sketch.sketch,
                BucketLayout::with_registers(registers)?,
                a.sketch.seed,
            )?
        }
    };
    let reader: Option<Box<dyn BufRead>> = match (&a.input, &a.load) {
        (Some(p), _) if p.as_os_str() != "-" => Some(Box::new(BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        ))),
        (Some(_), _) | (None, None) => Some(Box::new(io::stdin().lock())),
        (None, Some(_)) => None,
    };

    let mut counter = a.martingale.then(|| MartingaleCounter::new(sketch.clone()));
    if let Some(mut r) = reader {
        let mut line = Vec::new();
        loop {
            line.clear();
            if r.read_until(b'\n', &mut line).context("reading input")? == 0 {
                break;
            }
            let token = line.strip_suffix(b"\n").unwrap_or(&line);
            let token = token.strip_suffix(b"\r").unwrap_or(token);
            if token.is_empty() {
                continue;
            }
            match &mut counter {
                Some(c) => {
                    c.insert(token);
                }
                None => {
                    sketch.insert(token);
                }
            }
        }
    }
    let counter = counter.map(|c| {
        let (e, v) = (c.estimate(), c.retro_variance());
        sketch = c.into_inner();
        (e, v)
    });

    let mut out = io::stdout().lock();
    print_estimate(&mut out, &sketch, a.sketch.asymptotic_constants).context("writing output")?;
    if let Some((e, v)) = counter {
        writeln!(out, "martingale_estimate: {}", format_sig(e)).context("writing output")?;
        writeln!(out, "martingale_std_error: {}", format_sig(v.sqrt()))
            .context("writing output")?;
    }
    if let Some(path) = &a.save {
        write_sketch(path, &sketch)?;
    }
    Ok(())
}

fn cmd_merge(a: MergeArgs) -> CmdResult {
    let mut sketches = a
        .inputs
        .iter()
        .map(|p| read_sketch(p))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter();
    let mut acc = sketches.next().expect("at least two inputs");
    for s in sketches {
        acc.merge(&s)?;
    }
    if acc.kind().is_tailcut() {
        eprintln!(
            "warning: approximate merge: {} registers are re-clamped to the merged base",
            acc.kind()
        );
    }
    write_sketch(&a.out, &acc)?;
    print_estimate(&mut io::stdout().lock(), &acc, a.asymptotic_constants)
        .context("writing output")?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let mut config = if a.paper_scale {
        eprintln!(
            "warning: paper-scale campaign ({} trials x {} elements); expect hours of runtime",
            SimulationConfig::PAPER_TRIALS,
            SimulationConfig::PAPER_N
        );
        SimulationConfig::paper_scale(a.seed)?
    } else {
        if a.sketch.is_empty() {
            return Err(usage("no sketch kinds given"));
        }
        let estimators = if a.match_memory {
            SimulationConfig::matched_memory(&a.sketch, a.b, a.martingale)?
        } else {
            let m = BucketLayout::with_precision(a.b)?.registers();
            a.sketch
                .iter()
                .map(|&k| EstimatorSpec::new(k, m, a.martingale))
                .collect()
        };
        SimulationConfig::new(estimators, a.n, a.trials, a.checkpoints, a.seed)
    };
    if a.asymptotic_constants {
        config.bias = BiasConstants::Asymptotic;
    }
    config.validate()?;
    let report = run_simulation(&config)?;
    let csv = report.to_csv();
    match &a.out {
        Some(p) => fs::write(p, &csv).with_context(|| format!("writing {}", p.display()))?,
        None => io::stdout()
            .write_all(csv.as_bytes())
            .context("writing output")?,
    }
    if let Some(p) = &a.svg {
        let chart = svg::render_svg(&report, &svg::default_groups(&report));
        fs::write(p, chart).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn cmd_constants(m: u32) -> CmdResult {
    let q = analysis::bias_constants(m)?;
    let asym = analysis::asymptotic_bias_constants(m);
    let mut out = io::stdout().lock();
    writeln!(out, "m: {m}").context("writing output")?;
    for (name, v, limit) in [
        ("gamma_m", q.gamma_m, asym.gamma_m),
        ("beta_m", q.beta_m, asym.beta_m),
        ("alpha_m", q.alpha_m, asym.alpha_m),
        ("hll_beta_m", q.hll_beta_m, asym.hll_beta_m),
    ] {
        writeln!(
            out,
            "{name}: {}  asymptotic: {}  |diff|: {:.3e}",
            format_sig(v),
            format_sig(limit),
            (v - limit).abs()
        )
        .context("writing output")?;
    }
    Ok(())
}

fn cmd_mvp(bits: u32) -> CmdResult {
    let rows = analysis::mvp_report(bits)?;
    let mut out = io::stdout().lock();
    writeln!(out, "sketch,bits_per_cell,variance_constant,mvp").context("writing output")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.sketch,
            format_sig(r.bits_per_cell),
            format_sig(r.variance_constant),
            format_sig(r.mvp)
        )
        .context("writing output")?;
    }
    Ok(())
}

fn cmd_oracle(cmd: OracleCommand) -> CmdResult {
    match cmd {
        OracleCommand::Expectation {
            sketch,
            n,
            m,
            k,
            mc_trials,
            seed,
        } => {
            let ind = Indicator::for_kind(sketch)?;
            let exact = oracle::exact_expectation(ind, n, m, k)?;
            let name = if ind == Indicator::Y { "E[Y]" } else { "E[Z]" };
            let mut out = io::stdout().lock();
            writeln!(out, "{name}: {}", format_sig(exact.value)).context("writing output")?;
            writeln!(out, "truncation_bound: {:e}", exact.truncation_bound)
                .context("writing output")?;
            if let Some(trials) = mc_trials {
                let mc = oracle::monte_carlo_indicator(ind, n, m, trials, seed)?;
                writeln!(
                    out,
                    "monte_carlo: {} ± {} ({trials} trials)",
                    format_sig(mc.mean),
                    format_sig(mc.std_error)
                )
                .context("writing output")?;
            }
            Ok(())
        }
    }
}
