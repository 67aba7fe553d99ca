//! Subcommands. Each one reads the run configuration, applies the global
//! overrides and writes its artifacts below the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use phononcp::objective::{excitation_profile, modulus_matrix, ModulusTable};
use phononcp::optimizer::{design_pulse_with_progress, ProgressEvent, Stage};
use phononcp::pulses::{analytic_swap_parameters, composite_unitary};
use phononcp::robustness::{sweep, PulseSelection, SweepAxis, SweepResult};
use phononcp::thermometry::{
    correct_populations, design_window_pulses, evaluate_thermometry, sample_measurements,
    CorrectionProblem, ThermometryReport,
};
use phononcp::{CompositePulse, SystemConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::library::{PulseLibrary, PulseLibraryEntry};

/// Pulse argument that evaluates the three-pulse analytic SWAP.
pub const ANALYTIC_SWAP: &str = "analytic-swap";

/// Progress lines are printed every this many optimizer iterations.
const PROGRESS_EVERY: usize = 50;

#[derive(Debug, Parser)]
#[command(
    name = "phononcp",
    version,
    about = "Fock-state-selective composite pulses and phonon thermometry"
)]
pub struct Cli {
    /// Run configuration (TOML). Omitted fields and a missing flag use the
    /// built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Replaces the configured seed list with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of Fock levels of the simulation space. For `thermometry`
    /// this is the truth space the readout is simulated in.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,

    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Machine-readable format of written reports. `evaluate` prints in this
    /// format instead of tables when given.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// No progress output on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimizes a composite pulse for the configured target and stores it
    /// in the library.
    ///
    /// Prints the modulus matrix |U_ij| with three decimals and the pulse
    /// parameters. Writes `library/<id>.json` and `design.<format>`. The CSV
    /// has columns `k,delta,omega,phi,t`, one row per pulse.
    Design,

    /// Re-evaluates a stored pulse, optionally at another cutoff.
    ///
    /// PULSE is a library id or unique id prefix, a path to a library entry,
    /// or `analytic-swap`. Prints the modulus matrix and the excitation
    /// profile. With `--format csv` prints columns `n,excitation` instead,
    /// where `n` is the absolute Fock number.
    Evaluate { pulse: String },

    /// Designs one shelving pulse per window state, simulates the readout of
    /// the configured distribution and corrects it.
    ///
    /// Writes `thermometry.csv` with columns `n,P,M,R` (true, measured and
    /// corrected population) and the full report `thermometry.json`.
    /// Prints max |R - P|.
    Thermometry,

    /// Sweeps a duration or phase offset around a stored pulse.
    ///
    /// PULSE is resolved as for `evaluate`. Writes `robustness.<format>`;
    /// the CSV has columns `offset,probability`. Prints the widest offset
    /// window in which the probe stays at or above the threshold.
    Robustness {
        pulse: String,
        /// Overrides `robustness.axis`.
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        /// Perturb only pulse K (counted from 0).
        #[arg(long, value_name = "K")]
        only: Option<usize>,
        /// Lower end of the offset range.
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        /// Upper end of the offset range.
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        /// Number of offsets, at least 3.
        #[arg(long)]
        points: Option<usize>,
    },

    /// Prints the default configuration.
    Defaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Duration,
    Phase,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Duration => SweepAxis::DurationOffset,
            AxisArg::Phase => SweepAxis::PhaseOffset,
        }
    }
}

/// Runs one command, writing human output to `out` and progress to stderr.
pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> CliResult<()> {
    let cfg = effective_config(cli)?;
    let text = match &cli.command {
        Command::Design => design(cli, &cfg)?,
        Command::Evaluate { pulse } => evaluate(cli, &cfg, pulse)?,
        Command::Thermometry => thermometry(cli, &cfg)?,
        Command::Robustness {
            pulse,
            axis,
            only,
            from,
            to,
            points,
        } => {
            let mut cfg = cfg;
            let r = &mut cfg.robustness;
            if let Some(axis) = axis {
                r.axis = (*axis).into();
            }
            if let Some(k) = only {
                r.which = PulseSelection::Single(*k);
            }
            if let Some(from) = from {
                r.range.0 = *from;
            }
            if let Some(to) = to {
                r.range.1 = *to;
            }
            if let Some(points) = points {
                r.points = *points;
            }
            robustness(cli, &cfg, pulse)?
        }
        Command::Defaults => RunConfig::default().to_toml(),
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::input(format!("writing output: {e}")))
}

/// The configuration file with the command-line overrides applied.
pub fn effective_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(cutoff) = cli.cutoff {
        match cli.command {
            Command::Thermometry => cfg.thermometry.truth_cutoff = cutoff,
            _ => cfg.system.cutoff = cutoff,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn progress_printer(quiet: bool, label: String) -> impl FnMut(&ProgressEvent) {
    move |event: &ProgressEvent| {
        if quiet || event.iteration % PROGRESS_EVERY != 0 {
            return;
        }
        let stage = match event.stage {
            Stage::Swarm { seed } => format!("swarm {seed}"),
            Stage::Refine => "refine".to_string(),
        };
        eprintln!(
            "{label}{stage} iteration {}: best loss {:.6e}",
            event.iteration, event.best_loss
        );
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports are always serializable") + "\n"
}

fn parameter_table(cp: &CompositePulse) -> String {
    let mut s = String::from("   k     delta     omega       phi           t\n");
    for (k, p) in cp.pulses().iter().enumerate() {
        writeln!(
            s,
            "{k:4} {:9.3} {:9.3} {:9.3} {:11.3}",
            p.delta, p.omega, p.phi, p.t
        )
        .unwrap();
    }
    s
}

fn parameter_csv(cp: &CompositePulse) -> String {
    let mut s = String::from("k,delta,omega,phi,t\n");
    for (k, p) in cp.pulses().iter().enumerate() {
        writeln!(
            s,
            "{k},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.delta, p.omega, p.phi, p.t
        )
        .unwrap();
    }
    s
}

#[derive(Serialize)]
struct DesignReport<'a> {
    entry: &'a PulseLibraryEntry,
    modulus: Vec<Vec<f64>>,
    history: &'a [(usize, f64)],
    evaluations: usize,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn design(cli: &Cli, cfg: &RunConfig) -> CliResult<String> {
    let system = cfg.system;
    let spec = cfg.target.build(&system).map_err(CliError::from_core)?;
    let template = cfg
        .regime
        .template(cfg.pulse_count)
        .map_err(CliError::from_core)?;
    let layout = cfg.regime.layout(&system, cfg.pulse_count);

    let mut best = None;
    for &seed in &cfg.seeds {
        let pso = phononcp::optimizer::PsoConfig {
            seed,
            ..cfg.optimizer.pso.clone()
        };
        let mut progress = progress_printer(cli.quiet, format!("seed {seed}: "));
        let result = design_pulse_with_progress(
            &system,
            &template,
            &layout,
            &spec,
            &pso,
            &cfg.optimizer.refine,
            &mut progress,
        )
        .map_err(CliError::from_optimizer)?;
        if best
            .as_ref()
            .is_none_or(|b: &phononcp::optimizer::OptimizationResult| result.loss < b.loss)
        {
            best = Some(result);
        }
    }
    let result = best.expect("at least one seed");
    let loss = result.loss.value();

    let entry = PulseLibraryEntry::new(
        system,
        cfg.target,
        cfg.regime,
        &result.best,
        loss,
        cfg.clone(),
    );
    let u = composite_unitary(&system, &entry.pulse).map_err(CliError::from_core)?;
    let modulus = modulus_matrix(&u);

    let mut text = String::new();
    writeln!(
        text,
        "target {} ({} coupling, {} pulses)",
        cfg.target, cfg.regime, cfg.pulse_count
    )
    .unwrap();
    writeln!(text, "loss {loss:.6e}").unwrap();
    writeln!(text, "\n|U_ij|:").unwrap();
    write!(text, "{}", ModulusTable(&modulus)).unwrap();
    writeln!(text, "\nparameters (phases in [0, 2pi)):").unwrap();
    text.push_str(&parameter_table(&entry.pulse));

    if let Some(max) = cfg.optimizer.max_loss {
        if !(loss <= max) {
            eprint!("{text}");
            return Err(CliError::Optimization(format!(
                "final loss {loss:.6e} is above max_loss {max:.6e}"
            )));
        }
    }

    let library = PulseLibrary::new(&cfg.output_dir);
    let path = library.store(&entry)?;
    let format = cli.format.unwrap_or(Format::Csv);
    let report_path = cfg
        .output_dir
        .join(format!("design.{}", format.extension()));
    let report = match format {
        Format::Csv => parameter_csv(&entry.pulse),
        Format::Json => to_json(&DesignReport {
            entry: &entry,
            modulus: rows(&modulus),
            history: &result.history,
            evaluations: result.evaluations,
        }),
    };
    write_file(&report_path, &report)?;
    writeln!(text, "\nlibrary id {} ({})", entry.id, path.display()).unwrap();
    Ok(text)
}

/// A pulse together with the space it was designed in.
struct ResolvedPulse {
    label: String,
    system: SystemConfig,
    pulse: CompositePulse,
}

fn resolve_pulse(cfg: &RunConfig, cutoff: Option<usize>, arg: &str) -> CliResult<ResolvedPulse> {
    let (label, mut system, pulse) = if arg == ANALYTIC_SWAP {
        let system = cfg.system;
        let omega = cfg.regime.omega();
        let pulse = analytic_swap_parameters(&system, omega).map_err(CliError::from_core)?;
        (format!("analytic SWAP, Omega = {omega}"), system, pulse)
    } else {
        let path = Path::new(arg);
        let entry = if path.is_file() {
            PulseLibraryEntry::load(path)?
        } else {
            PulseLibrary::new(&cfg.output_dir).find(arg)?
        };
        (
            format!(
                "{} (target {}, loss {:.6e})",
                entry.id, entry.target, entry.loss
            ),
            entry.system,
            entry.pulse,
        )
    };
    if let Some(c) = cutoff {
        system.cutoff = c;
    }
    system.validate().map_err(CliError::from_core)?;
    Ok(ResolvedPulse {
        label,
        system,
        pulse,
    })
}

#[derive(Serialize)]
struct EvaluationReport {
    system: SystemConfig,
    pulse: CompositePulse,
    modulus: Vec<Vec<f64>>,
    /// `(n, excitation)` with absolute Fock numbers.
    excitation: Vec<(usize, f64)>,
}

fn evaluate(cli: &Cli, cfg: &RunConfig, arg: &str) -> CliResult<String> {
    let resolved = resolve_pulse(cfg, cli.cutoff, arg)?;
    let system = resolved.system;
    let u = composite_unitary(&system, &resolved.pulse).map_err(CliError::from_core)?;
    let modulus = modulus_matrix(&u);
    let excitation: Vec<(usize, f64)> = system
        .fock_levels()
        .zip(excitation_profile(&u).map_err(CliError::from_core)?)
        .collect();

    let mut text = String::new();
    match cli.format {
        Some(Format::Csv) => {
            text.push_str("n,excitation\n");
            for (n, e) in &excitation {
                writeln!(text, "{n},{e:.16e}").unwrap();
            }
        }
        Some(Format::Json) => {
            text = to_json(&EvaluationReport {
                system,
                pulse: resolved.pulse,
                modulus: rows(&modulus),
                excitation,
            })
        }
        None => {
            writeln!(text, "pulse {}", resolved.label).unwrap();
            writeln!(text, "Fock levels {:?}", system.fock_levels()).unwrap();
            writeln!(text, "\n|U_ij|:").unwrap();
            write!(text, "{}", ModulusTable(&modulus)).unwrap();
            writeln!(text, "\nexcitation from |g,n>:").unwrap();
            for (n, e) in &excitation {
                writeln!(text, "{n:4} {e:.3}").unwrap();
            }
        }
    }
    Ok(text)
}

fn thermometry(cli: &Cli, cfg: &RunConfig) -> CliResult<String> {
    let setup = cfg.thermometry_setup()?;
    let t = &cfg.thermometry;
    let dist = t.distribution.build(setup.truth.cutoff)?;

    let (pulses, losses): (Vec<CompositePulse>, Vec<Option<f64>>) = if t.pulses.is_empty() {
        let quiet = cli.quiet;
        let mut on_progress = |n: usize, event: &ProgressEvent| {
            progress_printer(quiet, format!("n = {n}: "))(event);
        };
        design_window_pulses(&setup, &mut on_progress)
            .map_err(|e| CliError::from_optimizer(e.in_stage("pulse design")))?
            .into_iter()
            .map(|(p, l)| (p, Some(l)))
            .unzip()
    } else {
        if t.pulses.len() != setup.window.len() {
            return Err(CliError::input(format!(
                "thermometry.pulses lists {} pulses for a window of {} states",
                t.pulses.len(),
                setup.window.len()
            )));
        }
        let library = PulseLibrary::new(&cfg.output_dir);
        let mut pulses = Vec::new();
        for id in &t.pulses {
            let entry = library.find(id)?;
            if entry.system.fock_levels() != setup.design.fock_levels() {
                return Err(CliError::input(format!(
                    "pulse {} was designed on Fock levels {:?}, the window needs {:?}",
                    entry.id,
                    entry.system.fock_levels(),
                    setup.design.fock_levels()
                )));
            }
            pulses.push((entry.pulse, Some(entry.loss)));
        }
        pulses.into_iter().unzip()
    };

    let mut report = evaluate_thermometry(&setup, &pulses, &dist).map_err(CliError::from_core)?;
    for (d, l) in report.pulses.iter_mut().zip(&losses) {
        d.loss = *l;
    }
    if let Some(shots) = t.shots {
        resample(&mut report, shots, cfg.seeds[0])?;
    }

    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("writing to memory");
    let csv_path = cfg.output_dir.join("thermometry.csv");
    let json_path = cfg.output_dir.join("thermometry.json");
    write_file(&csv_path, &String::from_utf8(csv).expect("ascii"))?;
    write_file(&json_path, &to_json(&report))?;

    let mut text = String::new();
    writeln!(text, "     n      P      M      R").unwrap();
    for (j, n) in report.window.iter().enumerate() {
        writeln!(
            text,
            "{n:6} {:6.3} {:6.3} {:6.3}",
            report.populations[j], report.measured[j], report.corrected[j]
        )
        .unwrap();
    }
    writeln!(text, "\ncondition number {:.3e}", report.condition).unwrap();
    writeln!(text, "max |M - P| = {:.3e}", report.max_measured_error()).unwrap();
    writeln!(text, "max |R - P| = {:.3e}", report.max_corrected_error()).unwrap();
    writeln!(
        text,
        "wrote {} and {}",
        csv_path.display(),
        json_path.display()
    )
    .unwrap();
    Ok(text)
}

/// Replaces the exact readout with shot-noise samples and corrects again.
fn resample(report: &mut ThermometryReport, shots: u64, seed: u64) -> CliResult<()> {
    report.measured =
        sample_measurements(&report.measured, shots, seed).map_err(CliError::from_core)?;
    let k = report.window.len();
    let coeff = DMatrix::from_fn(k, k, |i, j| report.coefficients[i][j]);
    let correction = correct_populations(&CorrectionProblem {
        coeff,
        measured: report.measured.clone(),
    })
    .map_err(|e| CliError::from_core(e.in_stage("population correction")))?;
    report.corrected = correction.corrected;
    report.condition = correction.condition;
    Ok(())
}

fn robustness(cli: &Cli, cfg: &RunConfig, arg: &str) -> CliResult<String> {
    let spec = cfg.robustness.spec()?;
    let resolved = resolve_pulse(cfg, cli.cutoff, arg)?;
    let probe = cfg.robustness.probe;
    let result: SweepResult =
        sweep(&resolved.system, &resolved.pulse, &spec, &probe).map_err(CliError::from_core)?;

    let format = cli.format.unwrap_or(Format::Csv);
    let path = cfg
        .output_dir
        .join(format!("robustness.{}", format.extension()));
    let contents = match format {
        Format::Csv => {
            let mut buf = Vec::new();
            result.write_csv(&mut buf).expect("writing to memory");
            String::from_utf8(buf).expect("ascii")
        }
        Format::Json => to_json(&result),
    };
    write_file(&path, &contents)?;

    let threshold = cfg.robustness.threshold;
    let mut text = String::new();
    writeln!(text, "pulse {}", resolved.label).unwrap();
    let unit = match spec.axis {
        SweepAxis::DurationOffset => format!(
            "time units, 1 unit = {:.6} us",
            phononcp::fockspace::TIME_UNIT_MICROSECONDS
        ),
        SweepAxis::PhaseOffset => "rad".to_string(),
    };
    writeln!(
        text,
        "{} points over [{:.3}, {:.3}] ({unit})",
        spec.points, spec.range.0, spec.range.1
    )
    .unwrap();
    if let Some(nominal) = result.nominal() {
        writeln!(text, "nominal probability {:.3}", nominal.probability).unwrap();
    }
    match result.widest_window(threshold) {
        Some((a, b)) => writeln!(
            text,
            "widest window with probability >= {threshold}: [{a:.3}, {b:.3}]"
        )
        .unwrap(),
        None => writeln!(text, "probability never reaches {threshold}").unwrap(),
    }
    if result.clamped() {
        writeln!(text, "some durations were clamped at 0").unwrap();
    }
    writeln!(text, "wrote {}", path.display()).unwrap();
    Ok(text)
}
