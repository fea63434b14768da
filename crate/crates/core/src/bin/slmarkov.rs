//! Command-line front end: simulate traces, identify channel models, turn
//! delay traces into observations and compare reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data error.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slmarkov::config::{Discount, RunConfig};
use slmarkov::delay::{self, SyntheticDelayConfig, ThresholdConfig};
use slmarkov::report::{build_report, smoothed_classical, RunReport, Summary};
use slmarkov::sim::{read_trace_csv, reference_scenario};
use slmarkov::{Error, ErrorClass, Result, ScenarioSpec, State, TransitionMatrix};

#[derive(Parser)]
#[command(
    name = "slmarkov",
    version,
    about = "Subjective-logic Markov channel identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an observation trace from a scenario.
    Simulate(SimulateArgs),
    /// Run the identifier over an observation trace.
    Identify(IdentifyArgs),
    /// Classify a delay trace into three states and identify it.
    Delays(DelaysArgs),
    /// Summarize an existing report against its ground-truth columns.
    Compare(CompareArgs),
}

#[derive(Args)]
#[group(multiple = false)]
struct ScenarioSource {
    /// Scenario JSON file.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Built-in two-state scenario with two parameter jumps.
    #[arg(long, alias = "paper-scenario")]
    reference_scenario: bool,
}

impl ScenarioSource {
    fn load(&self) -> Result<Option<ScenarioSpec>> {
        if self.reference_scenario {
            return Ok(Some(reference_scenario()));
        }
        match &self.spec {
            Some(path) => {
                let text = read_text(path)?;
                let spec = ScenarioSpec::from_json(&text)?;
                spec.validate()?;
                Ok(Some(spec))
            }
            None => Ok(None),
        }
    }
}

#[derive(Args)]
struct IdentifierFlags {
    /// JSON run configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Observations per window.
    #[arg(long)]
    window: Option<usize>,
    /// Degree-of-conflict threshold; `inf` disables resets.
    #[arg(long)]
    theta: Option<f64>,
    /// Discount applied to the running opinion before fusion.
    #[arg(long)]
    discount_prev: Option<f64>,
    /// Discount applied to each new window opinion.
    #[arg(long)]
    discount_new: Option<f64>,
    /// Non-informative prior weight W.
    #[arg(long)]
    prior_weight: Option<f64>,
}

impl IdentifierFlags {
    fn run_config(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => RunConfig::from_json(&read_text(path)?)?,
            None => RunConfig::default(),
        };
        Ok(file.merged(RunConfig {
            window: self.window,
            theta: self.theta,
            prior_weight: self.prior_weight,
            discount_prev: self.discount_prev.map(Discount::Uniform),
            discount_new: self.discount_new.map(Discount::Uniform),
            base_rates: None,
            delay: None,
        }))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output trace CSV (`-` for stdout).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the resolved scenario JSON.
    #[arg(long, value_name = "FILE")]
    spec_out: Option<PathBuf>,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Observation trace CSV (`packet_index,state`).
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    /// Number of states; inferred from the trace when omitted.
    #[arg(long)]
    states: Option<usize>,
    #[command(flatten)]
    source: ScenarioSource,
    #[command(flatten)]
    ident: IdentifierFlags,
    /// Report CSV (`-` for stdout; the summary then goes to stderr).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct DelaysArgs {
    /// Delay CSV (`packet_index,delay_ms` or `packet_index,t_send_us,t_recv_us`).
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    input: Option<PathBuf>,
    /// Generate a synthetic delay trace with this many packets instead.
    #[arg(long, value_name = "PACKETS")]
    synthetic: Option<usize>,
    /// Seed for the synthetic trace.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ident: IdentifierFlags,
    #[arg(long)]
    margin_ms: Option<f64>,
    #[arg(long)]
    harq_offset_ms: Option<f64>,
    /// Inliers in the baseline moving average.
    #[arg(long)]
    average_window: Option<usize>,
    /// Reference smoothing half-width in windows.
    #[arg(long, default_value_t = 10)]
    smooth: usize,
    /// Per-packet classification CSV.
    #[arg(long, value_name = "FILE")]
    states_out: Option<PathBuf>,
    /// Report CSV (`-` for stdout).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Report CSV written by `identify` or `delays`.
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
    /// Comma-separated packet indices of parameter jumps.
    #[arg(long, value_delimiter = ',')]
    jumps: Vec<usize>,
    /// Take the jump packets from a scenario instead.
    #[command(flatten)]
    source: ScenarioSource,
    /// Window length the report was produced with.
    #[arg(long, default_value_t = slmarkov::ident::DEFAULT_WINDOW_LEN)]
    window: usize,
}

fn is_stdout(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn with_path(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn open_out(path: &Path) -> Result<Box<dyn Write>> {
    if is_stdout(path) {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(
            File::create(path).map_err(with_path(path))?,
        )))
    }
}

fn open_in(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(with_path(path))?))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(with_path(path))
}

/// Summary text goes to stdout unless stdout already carries the report.
fn emit_summary(text: &str, report_on_stdout: bool) {
    if report_on_stdout {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
}

fn warn_partial_window(observations: usize, window: usize) {
    let dropped = observations % window;
    if dropped > 0 {
        eprintln!("warning: dropping {dropped} trailing observations that do not fill a window of {window}");
    }
}

fn final_estimate_text(report: &RunReport) -> String {
    let Some(last) = report.rows.last() else {
        return String::new();
    };
    let mut s = "final transition matrix:\n".to_string();
    for row in last.sl.to_rows() {
        let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
        s.push_str(&format!("  {}\n", cells.join(" ")));
    }
    let us: Vec<String> = last
        .uncertainty
        .iter()
        .map(|u| format!("{u:.3e}"))
        .collect();
    s.push_str(&format!("final uncertainty: {}\n", us.join(" ")));
    let resets: usize = report
        .rows
        .iter()
        .map(|r| r.reset.iter().filter(|&&x| x).count())
        .sum();
    s.push_str(&format!("row resets: {resets}\n"));
    s
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec = args
        .source
        .load()?
        .ok_or_else(|| Error::Config("one of --spec or --reference-scenario is required".into()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let trace = spec.generate()?;
    let mut out = open_out(&args.out)?;
    trace.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = &args.spec_out {
        std::fs::write(path, spec.to_json()).map_err(with_path(path))?;
    }
    if !is_stdout(&args.out) {
        println!("packets: {}\nseed: {}", trace.len(), trace.seed);
    }
    Ok(())
}

fn infer_states(states: &[State]) -> usize {
    states
        .iter()
        .map(|s| s.id() as usize)
        .max()
        .unwrap_or(0)
        .max(2)
}

fn identify(args: &IdentifyArgs) -> Result<()> {
    let run_cfg = args.ident.run_config()?;
    let scenario = args.source.load()?;
    let states = read_trace_csv(open_in(&args.trace)?)?;
    let num_states = match (args.states, &scenario) {
        (Some(n), _) => n,
        (None, Some(spec)) => spec.num_states,
        (None, None) => infer_states(&states),
    };
    let cfg = run_cfg.identifier_config(num_states)?;
    if scenario
        .as_ref()
        .is_some_and(|s| s.num_states != num_states)
    {
        return Err(Error::Config("--states disagrees with the scenario".into()));
    }
    warn_partial_window(states.len(), cfg.window_len);

    let truth: Option<Vec<TransitionMatrix>> = scenario
        .as_ref()
        .map(|spec| slmarkov::sim::window_ground_truth(spec, states.len(), cfg.window_len));
    let report = build_report(&states, &cfg, truth.as_deref())?;
    let mut out = open_out(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;

    let mut text = match &scenario {
        Some(spec) => Summary::compute(&report, &spec.jump_packets()?, cfg.window_len)?.to_string(),
        None => format!("windows: {}\n", report.rows.len()),
    };
    text.push_str(&final_estimate_text(&report));
    emit_summary(&text, is_stdout(&args.out));
    Ok(())
}

fn delays(args: &DelaysArgs) -> Result<()> {
    let mut run_cfg = args.ident.run_config()?;
    let mut th = run_cfg.delay.unwrap_or_default();
    if let Some(m) = args.margin_ms {
        th.margin_ms = m;
    }
    if let Some(h) = args.harq_offset_ms {
        th.harq_offset_ms = h;
    }
    if let Some(w) = args.average_window {
        th.average_window = w;
    }
    run_cfg.delay = Some(th);
    let th: ThresholdConfig = run_cfg.threshold_config()?;
    let cfg = run_cfg.identifier_config(3)?;

    let (records, labels) = match (&args.input, args.synthetic) {
        (Some(path), _) => (delay::read_delay_csv(open_in(path)?)?, None),
        (None, Some(packets)) => {
            let syn = SyntheticDelayConfig {
                packets,
                ..Default::default()
            };
            let (r, l) = delay::synthetic_delay_trace(&syn, args.seed)?;
            (r, Some(l))
        }
        (None, None) => {
            return Err(Error::Config(
                "one of --input or --synthetic is required".into(),
            ))
        }
    };
    let states = delay::pipeline(&records, &th)?;
    if let Some(path) = &args.states_out {
        let mut w = open_out(path)?;
        delay::write_state_csv(&records, &states, &mut w)?;
        w.flush()?;
    }
    warn_partial_window(states.len(), cfg.window_len);

    let mut report = build_report(&states, &cfg, None)?;
    let reference = smoothed_classical(&report.rows, args.smooth);
    for (row, gt) in report.rows.iter_mut().zip(reference) {
        row.ground_truth = Some(gt);
    }
    let mut out = open_out(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;

    let mut text = String::new();
    let mut counts = [0usize; 3];
    for s in &states {
        counts[s.index()] += 1;
    }
    text.push_str(&format!(
        "packets: {}\nstate counts: {} {} {}\n",
        states.len(),
        counts[0],
        counts[1],
        counts[2]
    ));
    if let Some(labels) = labels {
        let agree = states.iter().zip(&labels).filter(|(a, b)| a == b).count();
        text.push_str(&format!(
            "classification accuracy: {:.6}\n",
            agree as f64 / states.len().max(1) as f64
        ));
    }
    if report.rows.is_empty() {
        text.push_str("windows: 0\n");
    } else {
        text.push_str(&Summary::compute(&report, &[], cfg.window_len)?.to_string());
    }
    text.push_str(&final_estimate_text(&report));
    emit_summary(
        &text,
        is_stdout(&args.out) || args.states_out.as_deref().is_some_and(is_stdout),
    );
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let report = RunReport::read_csv(open_in(&args.report)?)?;
    let mut jumps = args.jumps.clone();
    if let Some(spec) = args.source.load()? {
        jumps.extend(spec.jump_packets()?);
    }
    jumps.sort_unstable();
    jumps.dedup();
    if args.window == 0 {
        return Err(Error::Config("--window must be >= 1".into()));
    }
    print!("{}", Summary::compute(&report, &jumps, args.window)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Identify(a) => identify(a),
        Command::Delays(a) => delays(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Io => 3,
                ErrorClass::Data => 4,
            })
        }
    }
}
