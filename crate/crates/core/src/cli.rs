use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sbitmap::baselines::{LinearCounter, LogMode, LogRegisterSketch};
use sbitmap::dimensioning::{required_memory, solve_capacity, CapacityParams, RateTable};
use sbitmap::envelope::Envelope;
use sbitmap::harness::{self, TrialReport};
use sbitmap::hashing::DEFAULT_SAMPLER_BITS;
use sbitmap::registry::{SketchRegistry, DEFAULT_MAX_KEYS};
use sbitmap::SBitmap;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

impl From<sbitmap::Error> for CliError {
    fn from(e: sbitmap::Error) -> Self {
        match e {
            sbitmap::Error::InvalidInput(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// S-bitmap distinct counting: dimensioning, counting and simulation.
#[derive(Debug, Parser)]
#[command(name = "sbitmap", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the capacity equation and print the sketch parameters.
    Dimension(DimensionArgs),
    /// Dump the sampling-rate schedule as CSV (k,p,q,t).
    Rates(RatesArgs),
    /// Count distinct newline-delimited items from a file or stdin.
    Count(CountArgs),
    /// Run an S-bitmap RRMSE sweep and write CSV.
    Simulate(SimulateArgs),
    /// Compare sketches at equal memory, or print the analytic memory table.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("budget").required(true).args(["memory_bits", "epsilon"]))]
struct DimensionArgs {
    #[arg(long)]
    memory_bits: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_parser = parse_count)]
    max_cardinality: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLER_BITS)]
    sampler_bits: u32,
    /// Also print the k,p,q,t table.
    #[arg(long)]
    dump_rates: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long)]
    memory_bits: usize,
    #[arg(long, value_parser = parse_count)]
    max_cardinality: u64,
}

#[derive(Debug, Args)]
struct CountArgs {
    /// Input file; stdin when omitted or `-`.
    input: Option<PathBuf>,
    #[arg(long)]
    memory_bits: usize,
    #[arg(long, value_parser = parse_count)]
    max_cardinality: u64,
    #[arg(long, env = "SBITMAP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLER_BITS)]
    sampler_bits: u32,
    /// Split each line at the first TAB into key and item.
    #[arg(long)]
    keyed: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_KEYS)]
    max_keys: usize,
    #[arg(long)]
    json: bool,
    /// Write the sketch envelope(s) as JSON to this path.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    memory_bits: usize,
    #[arg(long, value_parser = parse_count)]
    max_cardinality: u64,
    #[arg(long, default_value_t = harness::DEFAULT_REPLICATES)]
    replicates: usize,
    /// Comma-separated counts or `A..B[:F]` for a geometric range with factor F.
    #[arg(long, value_parser = parse_grid)]
    n_grid: Option<Grid>,
    #[arg(long, env = "SBITMAP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SketchKind {
    Sbitmap,
    Hll,
    Loglog,
    Linear,
}

impl SketchKind {
    fn name(self) -> &'static str {
        match self {
            SketchKind::Sbitmap => "sbitmap",
            SketchKind::Hll => "hll",
            SketchKind::Loglog => "loglog",
            SketchKind::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Table {
    Memory,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_values = ["sbitmap", "hll", "loglog", "linear"])]
    sketches: Vec<SketchKind>,
    #[arg(long, default_value_t = 3200)]
    memory_bits: usize,
    #[arg(long, value_parser = parse_count, default_value = "1048576")]
    max_cardinality: u64,
    #[arg(long, default_value_t = harness::DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, value_parser = parse_grid)]
    n_grid: Option<Grid>,
    #[arg(long, env = "SBITMAP_SEED", default_value_t = 0)]
    seed: u64,
    /// Print an analytic table instead of running simulations.
    #[arg(long, value_enum)]
    table: Option<Table>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.03, 0.09])]
    epsilons: Vec<f64>,
    #[arg(long = "Ns", value_parser = parse_grid, default_value = "1e3..1e7")]
    ns: Grid,
    /// Directory for per-sketch CSV files (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid(pub Vec<u64>);

/// Parses `1048576`, `1e6`, `2^20` or `10^9`.
pub fn parse_count(text: &str) -> Result<u64, String> {
    let text = text.trim();
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    if let Some((base, exp)) = text.split_once('^') {
        let base: u64 = base.parse().map_err(|_| format!("bad base in {text:?}"))?;
        let exp: u32 = exp.parse().map_err(|_| format!("bad exponent in {text:?}"))?;
        return base.checked_pow(exp).ok_or_else(|| format!("{text} overflows"));
    }
    let v: f64 = text.parse().map_err(|_| format!("not a count: {text:?}"))?;
    if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("not a non-negative integer: {text:?}"));
    }
    Ok(v as u64)
}

/// Comma-separated counts, or `A..B[:F]` meaning `A, A·F, A·F², … ≤ B` (F defaults to 10).
pub fn parse_grid(text: &str) -> Result<Grid, String> {
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, factor) = match rest.split_once(':') {
            Some((hi, f)) => (hi, parse_count(f)?),
            None => (rest, 10),
        };
        let (lo, hi) = (parse_count(lo)?, parse_count(hi)?);
        if lo == 0 || factor < 2 || lo > hi {
            return Err(format!("bad range {text:?}"));
        }
        let mut out = Vec::new();
        let mut v = lo;
        while v <= hi {
            out.push(v);
            match v.checked_mul(factor) {
                Some(next) => v = next,
                None => break,
            }
        }
        return Ok(Grid(out));
    }
    text.split(',')
        .map(parse_count)
        .collect::<Result<Vec<_>, _>>()
        .map(Grid)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Dimension(args) => cmd_dimension(args, &mut out)?,
        Command::Rates(args) => {
            let table = RateTable::new(solve_capacity(args.memory_bits, args.max_cardinality)?);
            table.write_csv(&mut out)?;
        }
        Command::Count(args) => cmd_count(args, &mut out)?,
        Command::Simulate(args) => cmd_simulate(args, &mut out)?,
        Command::Compare(args) => cmd_compare(args, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn cmd_dimension(args: DimensionArgs, out: &mut impl Write) -> CliResult<()> {
    let bits = match (args.memory_bits, args.epsilon) {
        (Some(m), _) => m,
        (None, Some(eps)) => required_memory(eps, args.max_cardinality)?,
        (None, None) => unreachable!("clap enforces the budget group"),
    };
    if !(1..=32).contains(&args.sampler_bits) {
        return Err(CliError::Usage(format!("sampler width must be in 1..=32, got {}", args.sampler_bits)));
    }
    let params = solve_capacity(bits, args.max_cardinality)?;
    print_params(&params, args.sampler_bits, args.json, out)?;
    if args.dump_rates {
        writeln!(out)?;
        RateTable::new(params).write_csv(&mut *out)?;
    }
    Ok(())
}

fn print_params(params: &CapacityParams, d: u32, as_json: bool, out: &mut impl Write) -> io::Result<()> {
    if as_json {
        let v = json!({
            "m": params.bits(),
            "N": params.max_cardinality(),
            "C": params.precision(),
            "epsilon": params.epsilon(),
            "r": params.ratio(),
            "b_max": params.truncation(),
            "d": d,
        });
        writeln!(out, "{v}")
    } else {
        writeln!(out, "m,N,C,epsilon,r,b_max,d")?;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.9},{},{}",
            params.bits(),
            params.max_cardinality(),
            params.precision(),
            params.epsilon(),
            params.ratio(),
            params.truncation(),
            d
        )
    }
}

fn open_input(path: Option<&Path>) -> io::Result<Box<dyn BufRead>> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => Ok(Box::new(BufReader::new(File::open(p)?))),
    }
}

/// Calls `f` for every line, without its trailing `\n`.
fn for_each_line(mut input: impl BufRead, mut f: impl FnMut(&[u8]) -> CliResult<()>) -> CliResult<()> {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        f(&buf)?;
    }
}

fn cmd_count(args: CountArgs, out: &mut impl Write) -> CliResult<()> {
    let params = solve_capacity(args.memory_bits, args.max_cardinality)?;
    let rates = Arc::new(RateTable::new(params));
    let input = open_input(args.input.as_deref())?;

    if !args.keyed {
        let mut sketch = SBitmap::new(rates, args.seed, args.sampler_bits)?;
        for_each_line(input, |line| {
            sketch.update(line);
            Ok(())
        })?;
        let est = sketch.estimate();
        if args.json {
            let v = json!({
                "n_hat": est.n_hat,
                "fill": sketch.fill(),
                "saturated": est.saturated,
                "theoretical_rrmse": est.theoretical_rrmse,
            });
            writeln!(out, "{v}")?;
        } else {
            writeln!(out, "n_hat,fill,saturated")?;
            writeln!(out, "{:.3},{},{}", est.n_hat, sketch.fill(), est.saturated)?;
        }
        if let Some(path) = &args.save {
            std::fs::write(path, Envelope::from_sbitmap(&sketch).to_json() + "\n")?;
        }
        return Ok(());
    }

    let mut registry = SketchRegistry::new(rates, args.seed, args.sampler_bits, args.max_keys)?;
    let mut malformed = 0u64;
    for_each_line(input, |line| {
        match line.iter().position(|&b| b == b'\t') {
            Some(tab) => {
                registry.update(&line[..tab], &line[tab + 1..])?;
            }
            None => malformed += 1,
        }
        Ok(())
    })?;
    if malformed > 0 {
        eprintln!("warning: skipped {malformed} malformed line(s) without a TAB");
    }

    if args.json {
        let rows: Vec<_> = registry
            .estimates()
            .map(|(key, est)| {
                json!({
                    "key": String::from_utf8_lossy(key),
                    "n_hat": est.n_hat,
                    "fill": registry.get(key).map_or(0, SBitmap::fill),
                    "saturated": est.saturated,
                })
            })
            .collect();
        writeln!(out, "{}", serde_json::Value::Array(rows))?;
    } else {
        writeln!(out, "key,n_hat,fill,saturated")?;
        for (key, est) in registry.estimates() {
            let fill = registry.get(key).map_or(0, SBitmap::fill);
            writeln!(
                out,
                "{},{:.3},{},{}",
                String::from_utf8_lossy(key),
                est.n_hat,
                fill,
                est.saturated
            )?;
        }
    }
    if let Some(path) = &args.save {
        let mut file = BufWriter::new(File::create(path)?);
        for (key, _) in registry.estimates() {
            let sketch = registry.get(key).expect("key listed by registry");
            let line = json!({
                "key": String::from_utf8_lossy(key),
                "sketch": serde_json::to_value(Envelope::from_sbitmap(sketch)).expect("envelope serializes"),
            });
            writeln!(file, "{line}")?;
        }
        file.flush()?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, out: &mut impl Write) -> CliResult<()> {
    let params = solve_capacity(args.memory_bits, args.max_cardinality)?;
    let rates = Arc::new(RateTable::new(params));
    let grid = args
        .n_grid
        .map(|g| g.0)
        .unwrap_or_else(|| harness::default_grid(args.max_cardinality));
    let reports = harness::rrmse_sweep(
        |seed| SBitmap::new(rates.clone(), seed, DEFAULT_SAMPLER_BITS).expect("valid sampler width"),
        &grid,
        args.replicates,
        args.seed,
    )?;
    match &args.out {
        Some(path) => harness::write_reports_csv(&reports, BufWriter::new(File::create(path)?))?,
        None => harness::write_reports_csv(&reports, &mut *out)?,
    }
    Ok(())
}

fn sweep_kind(kind: SketchKind, args: &CompareArgs, grid: &[u64]) -> CliResult<Vec<TrialReport>> {
    let bits = args.memory_bits;
    let reports = match kind {
        SketchKind::Sbitmap => {
            let rates = Arc::new(RateTable::new(solve_capacity(bits, args.max_cardinality)?));
            harness::rrmse_sweep(
                |seed| SBitmap::new(rates.clone(), seed, DEFAULT_SAMPLER_BITS).expect("valid sampler width"),
                grid,
                args.replicates,
                args.seed,
            )?
        }
        SketchKind::Hll | SketchKind::Loglog => {
            let mode = if kind == SketchKind::Hll { LogMode::HyperLogLog } else { LogMode::LogLog };
            LogRegisterSketch::with_memory(bits, mode, 0)?;
            harness::rrmse_sweep(
                |seed| LogRegisterSketch::with_memory(bits, mode, seed).expect("validated above"),
                grid,
                args.replicates,
                args.seed,
            )?
        }
        SketchKind::Linear => {
            LinearCounter::new(bits, 0)?;
            harness::rrmse_sweep(
                |seed| LinearCounter::new(bits, seed).expect("validated above"),
                grid,
                args.replicates,
                args.seed,
            )?
        }
    };
    Ok(reports)
}

fn cmd_compare(args: CompareArgs, out: &mut impl Write) -> CliResult<()> {
    if args.table == Some(Table::Memory) {
        let rows = harness::memory_table(&args.epsilons, &args.ns.0)?;
        harness::write_memory_csv(&rows, &mut *out)?;
        return Ok(());
    }
    if args.sketches.is_empty() {
        return Err(CliError::Usage("no sketches selected".into()));
    }
    let grid = args
        .n_grid
        .clone()
        .map(|g| g.0)
        .unwrap_or_else(|| harness::default_grid(args.max_cardinality));

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
    } else {
        writeln!(out, "sketch,n,replicates,mean,l1,rrmse,q99,theory")?;
    }
    for &kind in &args.sketches {
        let reports = sweep_kind(kind, &args, &grid)?;
        match &args.out {
            Some(dir) => {
                let path = dir.join(format!("{}.csv", kind.name()));
                harness::write_reports_csv(&reports, BufWriter::new(File::create(path)?))?;
            }
            None => {
                let mut buf = Vec::new();
                harness::write_reports_csv(&reports, &mut buf)?;
                for line in String::from_utf8_lossy(&buf).lines().skip(1) {
                    writeln!(out, "{},{}", kind.name(), line)?;
                }
            }
        }
    }
    Ok(())
}
