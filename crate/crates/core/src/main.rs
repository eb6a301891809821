use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kvtherm::experiments::{element_fields, ExperimentConfig, PRESETS};
use kvtherm::io::{load_experiment, serialize_config, write_vtk_snapshot, CsvSeries, DerivedFields};
use kvtherm::{oracles, Error};

/// Default output directory when `--out` is not given.
const OUTPUT_ENV: &str = "KVTHERM_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "kvtherm", version, about = "Staggered finite-strain thermoviscoelasticity solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML configuration file.
    Run {
        /// Preset name (see `list-presets`) or path to a config file.
        experiment: String,
        /// Override a config value, e.g. `--set time.steps=40` or `--set variant=V2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory [default: $KVTHERM_OUTPUT_DIR or ./kvtherm-out].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a VTK snapshot every N steps.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        stride: u64,
        /// Worker threads for element loops (0 = all cores).
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Suppress per-step progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Run the verification suites and print one line per check.
    Verify,
    /// List the built-in presets.
    ListPresets,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NotFound(_) => 2,
        Error::Parse { .. } | Error::Validation(_) => 3,
        _ => 1,
    }
}

fn snapshot(dir: &Path, cfg: &ExperimentConfig, sim: &kvtherm::Simulation) -> kvtherm::Result<()> {
    let disc = &sim.setup().disc;
    let state = sim.state();
    let (phase, det_f) = element_fields(disc, &state.y, cfg.material.eps);
    let path = dir.join(format!("snapshot_{:05}.vtk", sim.steps_done()));
    write_vtk_snapshot(&disc.mesh, state, &DerivedFields { phase, det_f }, &path)
}

fn run(experiment: &str, overrides: &[String], out: PathBuf, stride: usize, workers: usize, quiet: bool) -> kvtherm::Result<()> {
    let cfg = load_experiment(experiment, overrides)?;
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), serialize_config(&cfg)?)?;
    let mut sim = cfg.build(workers)?;
    let mut csv = CsvSeries::new(BufWriter::new(File::create(out.join("series.csv"))?), &cfg.probes, &sim.setup().disc)?;
    if csv.is_header_only() {
        eprintln!("warning: no probes configured, series.csv holds only the header");
    }
    snapshot(&out, &cfg, &sim)?;
    while !sim.is_finished() {
        let rec = sim.step()?.clone();
        let setup = sim.setup();
        csv.write_step(&setup.disc, &setup.model, sim.state(), &rec)?;
        if !quiet {
            println!(
                "step {:>5} t={:.6e} mech_iters={:>2} thermal_iters={:>2} dissipation={:.6e} internal_energy={:.12e}",
                rec.step, rec.time, rec.mech.newton_iters, rec.thermal.newton_iters, rec.mech.dissipation, rec.thermal.internal_energy
            );
        }
        if rec.step % stride == 0 || cfg.output.snapshot_steps.contains(&rec.step) || sim.is_finished() {
            snapshot(&out, &cfg, &sim)?;
        }
    }
    csv.finish()?;
    if !quiet {
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListPresets => {
            for p in PRESETS {
                println!("{p}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify => match oracles::verify() {
            Ok(reports) => {
                for r in &reports {
                    println!("{r}");
                }
                let failed = reports.iter().filter(|r| !r.pass).count();
                println!("{} checks, {} failed", reports.len(), failed);
                if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
        Command::Run { experiment, overrides, out, stride, workers, quiet } => {
            let out = out.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("kvtherm-out"));
            match run(&experiment, &overrides, out, stride as usize, workers, quiet) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    if let Error::Validation(problems) = &e {
                        for p in problems {
                            eprintln!("  - {p}");
                        }
                    }
                    ExitCode::from(exit_code(&e))
                }
            }
        }
    }
}
