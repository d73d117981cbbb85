//! The `vortex` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 runtime
//! failure, 3 kernel admissibility failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{KernelKind, Model, SimulationConfig};
use crate::error::{io_error, VortexError};
use crate::filament::Filament;
use crate::io::{DirectorySink, Snapshot};
use crate::kernel::{verify_admissibility, AdmissibilityReport, SamplingSpec};
use crate::refine::refine;
use crate::sim::{run, Sink, State};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_INADMISSIBLE: i32 = 3;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Debug, Parser)]
#[command(name = "vortex", version, about = "Regularized vortex filament, blob and loop simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Simulation configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Force fixed-order compensated summation.
    #[arg(long)]
    reproducible: bool,
    /// Overrides the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the configured model and write diagnostics and snapshots.
    Run(Common),
    /// Check the configured kernel against the admissibility conditions.
    VerifyKernel(Common),
    /// Per-segment instability scores of a filament snapshot.
    Scores {
        #[command(flatten)]
        common: Common,
        /// Filament snapshot to score.
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Apply the refinement policy once to the initial filament.
    RefineDemo(Common),
}

struct Failure {
    code: i32,
    message: String,
}

fn classify(e: VortexError) -> Failure {
    let code = match e {
        VortexError::InvalidParameter { .. } | VortexError::Malformed { .. } | VortexError::Io { .. } => EXIT_INVALID,
        _ => EXIT_RUNTIME,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn runtime(e: VortexError) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: e.to_string(),
    }
}

fn load(common: &Common) -> Result<SimulationConfig, Failure> {
    let mut cfg = SimulationConfig::load(&common.config).map_err(classify)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if common.reproducible {
        cfg.reproducible = true;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| runtime(io_error(path, e)))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| runtime(io_error(dir, e)))
}

fn cmd_run(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    let state = cfg.build_state().map_err(classify)?;
    let dir = cfg.output.dir.clone();
    ensure_dir(&dir)?;
    write_file(&dir.join(RESOLVED_CONFIG), &cfg.to_toml())?;
    let mut sink = DirectorySink::new(&dir, cfg.output.outputs()).map_err(runtime)?;
    let trace = {
        let mut sinks: [&mut dyn Sink; 1] = [&mut sink];
        run(state, &cfg.run_spec(), &mut sinks)
    };
    sink.finish().map_err(runtime)?;
    let _ = writeln!(
        out,
        "{} run: {} steps to t = {}, {} records, {} refinements, N = {}",
        trace.state.model(),
        trace.steps,
        trace.t,
        trace.records.len(),
        trace.events.len(),
        trace.state.len()
    );
    match trace.error {
        None => Ok(()),
        Some(e @ VortexError::InvalidParameter { .. }) => Err(classify(e)),
        Some(e) => Err(runtime(e)),
    }
}

fn admissibility(cfg: &SimulationConfig) -> Result<AdmissibilityReport, Failure> {
    if cfg.kernel.kind == KernelKind::Bump {
        Ok(cfg.build_lattice().map_err(classify)?.verify())
    } else {
        let kernel = cfg.build_kernel().map_err(classify)?;
        let spec = SamplingSpec {
            quadrature: cfg.kernel.tolerance,
            ..SamplingSpec::default()
        };
        Ok(verify_admissibility(&kernel, &spec))
    }
}

fn cmd_verify(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    let report = admissibility(&cfg)?;
    let _ = write!(out, "{report}");
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&dir.join("admissibility.json"), &json)?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_INADMISSIBLE,
            message: format!("kernel fails {}", report.failed_ids().join(", ")),
        })
    }
}

fn cmd_scores(common: &Common, snapshot: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    let snap = Snapshot::read(snapshot).map_err(classify)?;
    if snap.model != "filament" {
        return Err(classify(VortexError::invalid(
            "snapshot",
            format!("scores need a filament snapshot, got {}", snap.model),
        )));
    }
    let kernel = cfg.build_kernel().map_err(classify)?;
    let filament = Filament::new(snap.positions, kernel)
        .map_err(classify)?
        .with_summation(cfg.summation());
    let rate = filament.energy_rate(&cfg.rate_options()).map_err(runtime)?;
    let mut text = String::from("beta,J\n");
    for (b, j) in rate.scores.iter().enumerate() {
        text.push_str(&format!("{b},{j}\n"));
    }
    match &common.out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(&dir.join("scores.csv"), &text)?;
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn cmd_refine_demo(common: &Common, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = load(common)?;
    if cfg.model != Model::Filament {
        return Err(classify(VortexError::invalid("model", "refine-demo needs a filament")));
    }
    let refine_cfg = cfg.refine;
    refine_cfg.policy().validate().map_err(classify)?;
    let State::Filament(f) = cfg.build_state().map_err(classify)? else {
        unreachable!("model checked above");
    };
    let (g, report) = refine(&f, &refine_cfg.policy(), &cfg.rate_options()).map_err(runtime)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let _ = writeln!(out, "{json}");
    if let Some(dir) = &common.out {
        ensure_dir(dir)?;
        write_file(&dir.join("refine_report.json"), &json)?;
        Snapshot::of_state(&State::Filament(g), 0.0)
            .write(&dir.join("refined.csv"))
            .map_err(runtime)?;
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name), writing normal
/// output to `out` and errors to `err`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
            } else {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c, out),
        Command::VerifyKernel(c) => cmd_verify(c, out),
        Command::Scores { common, snapshot } => cmd_scores(common, snapshot, out),
        Command::RefineDemo(c) => cmd_refine_demo(c, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
