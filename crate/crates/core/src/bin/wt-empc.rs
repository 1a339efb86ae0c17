use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use wt_empc::empc::Variant;
use wt_empc::sim::{
    compare_controllers, compute_metrics, export_ablation, export_comparison, export_run, export_sweep, max_threads,
    np_sweep, run_simulation, terminal_ablation, Scenario, SimConfig,
};
use wt_empc::validation::run_suite;
use wt_empc::Result;

/// Economic MPC of a wind turbine with multi-location tower load limiting.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop run of the configured scenario.
    Simulate(Common),
    /// Same scenario under several controller variants.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "no-damping,single-mode,multi-mode")]
        variants: Vec<Variant>,
    },
    /// Same scenario for several prediction horizons.
    NpSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
        values: Vec<usize>,
    },
    /// Runs with and without the terminal equality.
    TerminalAblation(Common),
    /// Builds the available-power envelope and writes it as CSV.
    FitPwl {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        export: PathBuf,
        /// Also write the thrust envelope.
        #[arg(long)]
        thrust: Option<PathBuf>,
    },
    /// Runs the model invariant suite; fails when any check fails.
    ValidateModel {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Prints the default configuration.
    DefaultConfig,
}

fn load(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn scenario(c: &Common) -> Result<Scenario> {
    Scenario::from_config(&load(c.config.as_deref())?)
}

fn run(cli: Cli) -> Result<bool> {
    let threads = max_threads();
    match cli.command {
        Command::Simulate(c) => {
            let sc = scenario(&c)?;
            let out = run_simulation(&sc)?;
            let m = compute_metrics(
                &out.log,
                &sc.wind.plateaus(),
                &sc.settings,
                sc.controller.sample_time,
                &sc.turbine.params,
            );
            export_run(&out.log, &m, &c.out)?;
            println!("{} steps, energy {:.4e} J, mean solve {:.1} ms", m.steps, m.energy_j, m.mean_solve_time_s * 1e3);
            for p in &m.plateaus {
                println!("  {:5.1} m/s  P_g {:10.1} kW", p.speed, p.p_g / 1e3);
            }
            if let Some(reason) = &out.aborted {
                eprintln!("run aborted: {reason}");
                return Ok(false);
            }
        }
        Command::Compare { common, variants } => {
            let c = compare_controllers(&scenario(&common)?, &variants, threads)?;
            export_comparison(&c, &common.out)?;
            println!("baseline {}", c.baseline);
            for r in &c.rows {
                let red: Vec<String> = r.rms_reduction.iter().map(|v| format!("{:+.1}%", v * 100.0)).collect();
                println!(
                    "  {:5.1} m/s {:12} ΔP_g {:+.3}%  RMS v_p reduction {}",
                    r.speed,
                    r.variant.name(),
                    r.p_g_delta * 100.0,
                    red.join(" ")
                );
            }
        }
        Command::NpSweep { common, values } => {
            let s = np_sweep(&scenario(&common)?, &values, threads)?;
            export_sweep(&s, &common.out)?;
            for (n, t) in s.mean_solve_times() {
                println!("N_p = {n:4}: mean solve {:.1} ms", t * 1e3);
            }
        }
        Command::TerminalAblation(c) => {
            let a = terminal_ablation(&scenario(&c)?, threads)?;
            export_ablation(&a, &c.out)?;
            for r in &a.rows {
                println!(
                    "  {:5.1} m/s  tail {:.3e} vs {:.3e}  P_g {:.1} vs {:.1} kW",
                    r.speed,
                    r.tail_with,
                    r.tail_without,
                    r.p_g_with / 1e3,
                    r.p_g_without / 1e3
                );
            }
        }
        Command::FitPwl { config, export, thrust } => {
            let t = load(config.as_deref())?.build_turbine()?;
            t.available_power.write_csv(&export)?;
            if let Some(p) = thrust {
                t.max_thrust.write_csv(&p)?;
            }
            info!("wrote {}", export.display());
        }
        Command::ValidateModel { config, json } => {
            let checks = run_suite(&load(config.as_deref())?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&checks)?);
            } else {
                for c in &checks {
                    let tag = if c.passed { "PASS" } else { "FAIL" };
                    println!(
                        "{tag} {:26} {:.3e} (bound {:.1e}, {:.2} s) {}",
                        c.name,
                        c.value,
                        c.bound,
                        c.elapsed.as_secs_f64(),
                        c.detail
                    );
                }
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::DefaultConfig => print!("{}", SimConfig::default().to_toml()?),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
