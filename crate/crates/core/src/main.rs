use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use parabolib::analysis::{
    bias_points_from_profiles, constant_cpd_bias, cross_mode_consistency, qpc_effective_cpd,
    ModeCalibration, DEFAULT_Z_THRESHOLD,
};
use parabolib::fit::{extract_profiles, fit_power_law};
use parabolib::forward::synthesize_grid;
use parabolib::io::tables::{self, write_text};
use parabolib::io::{read_power_law, run_pipeline, to_json, write_power_law, RunConfig};
use parabolib::{Error, Geometry, Mode, PowerLaw};

#[derive(Parser)]
#[command(
    name = "parabolib",
    version,
    about = "Parabola calibration of AFM/Casimir force measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the measurement grid of one configured mode.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit parabolas and the distance law; writes profiles.csv and powerlaw.json.
    Fit {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// inverse_linear, inverse_square or capacitance_squared (default: by mode)
        #[arg(long)]
        law: Option<PowerLaw>,
        /// Sphere radius in m; only the capacitance_squared law uses it.
        #[arg(long, default_value_t = 1e-4)]
        sphere_radius: f64,
    },
    /// Overestimate from compensating with one constant voltage.
    Bias {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        fit: PathBuf,
        /// Compensation voltage in V (default: V_m at the largest separation)
        #[arg(long, allow_hyphen_values = true)]
        v_const: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-mode checks over directories produced by `fit`.
    Consistency {
        #[arg(long = "input", required = true, num_args = 1)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
        z_threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Effective contact potential of a quantum point contact.
    Qpc {
        #[arg(long)]
        voltage_mv: f64,
        #[arg(long)]
        residual_ohm: f64,
    },
    /// Run simulate → fit → analyze for every configured mode.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_dir from the configuration.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print (or write) the demo configuration.
    DemoConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidInput(_)
        | Error::MissingGamma
        | Error::Separation { .. } => 2,
        Error::Schema { .. } | Error::Io(_) => 4,
        _ => 3,
    }
}

/// Formats `v` with four significant digits in fixed notation.
fn four_significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.3}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn run(command: Command) -> Result<(), (u8, String)> {
    let fail = |e: Error| (exit_code(&e), e.to_string());
    match command {
        Command::Simulate { config, mode, out } => {
            let cfg = RunConfig::load(&config).map_err(|e| match e {
                Error::Io(_) => fail(e),
                other => (2, other.to_string()),
            })?;
            let run = cfg.mode_run(mode).map_err(fail)?;
            let scenario = cfg.scenario_for(run);
            let grid = synthesize_grid(&scenario).map_err(|e| (2, e.to_string()))?;
            tables::write_grid(&grid, &out).map_err(fail)?;
        }
        Command::Fit {
            grid,
            out_dir,
            law,
            sphere_radius,
        } => {
            let grid = tables::read_grid(&grid).map_err(fail)?;
            let profiles = extract_profiles(&grid).map_err(fail)?;
            tables::write_profiles(&profiles, &out_dir.join("profiles.csv")).map_err(fail)?;
            let geometry = Geometry::new(sphere_radius).map_err(fail)?;
            let law = law.unwrap_or_else(|| grid.mode().curvature_law());
            let fit = fit_power_law(&profiles, law, &geometry).map_err(fail)?;
            write_power_law(&fit, &out_dir.join("powerlaw.json")).map_err(fail)?;
            println!(
                "{}: d0 = {:e} ± {:e} m, amplitude = {:e} ± {:e}, chi2/dof = {:.3}",
                grid.mode(),
                fit.d0_hat,
                fit.d0_sigma,
                fit.amplitude,
                fit.amplitude_sigma,
                fit.chi2_per_dof
            );
        }
        Command::Bias {
            profiles,
            fit,
            v_const,
            out,
        } => {
            let profiles = tables::read_profiles(&profiles).map_err(fail)?;
            let fit = read_power_law(&fit).map_err(fail)?;
            let v_const = v_const.unwrap_or(profiles.rows[0].v_m);
            let points = bias_points_from_profiles(&profiles, fit.d0_hat).map_err(fail)?;
            let curve = constant_cpd_bias(&points, v_const).map_err(fail)?;
            write_text(
                &out,
                &tables::bias_to_string(&curve, profiles.mode).map_err(fail)?,
            )
            .map_err(fail)?;
        }
        Command::Consistency {
            inputs,
            z_threshold,
            out,
        } => {
            let calibrations = inputs
                .iter()
                .map(|dir| {
                    Ok(ModeCalibration {
                        profiles: tables::read_profiles(&dir.join("profiles.csv"))?,
                        fit: read_power_law(&dir.join("powerlaw.json"))?,
                    })
                })
                .collect::<parabolib::Result<Vec<_>>>()
                .map_err(fail)?;
            let report = cross_mode_consistency(&calibrations, z_threshold).map_err(fail)?;
            let json = to_json(&report);
            match out {
                Some(path) => write_text(&path, &json).map_err(fail)?,
                None => print!("{json}"),
            }
        }
        Command::Qpc {
            voltage_mv,
            residual_ohm,
        } => {
            let v = qpc_effective_cpd(voltage_mv * 1e-3, residual_ohm).map_err(fail)?;
            println!("{} mV", four_significant(v * 1e3));
        }
        Command::Pipeline { config, output_dir } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| match e {
                Error::Io(_) => fail(e),
                other => (2, other.to_string()),
            })?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let summary = run_pipeline(&cfg).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
            for m in &summary.modes {
                println!(
                    "{}: d0 = {:e} ± {:e} m (truth {:e}), amplitude = {:e} ± {:e}",
                    m.mode,
                    m.power_law.d0_hat,
                    m.power_law.d0_sigma,
                    m.truth.d0_true,
                    m.power_law.amplitude,
                    m.power_law.amplitude_sigma
                );
            }
            if let Some(report) = &summary.consistency {
                println!("cross-mode verdict: {:?}", report.overall);
            }
            println!("artifacts written to {}", cfg.output_dir.display());
        }
        Command::DemoConfig { out } => {
            let text = RunConfig::demo().to_toml_string().map_err(fail)?;
            match out {
                Some(path) => write_text(&path, &text).map_err(fail)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::four_significant;

    #[test]
    fn significant_digits() {
        assert_eq!(four_significant(1.503030), "1.503");
        assert_eq!(four_significant(12.3456), "12.35");
        assert_eq!(four_significant(0.0123456), "0.01235");
        assert_eq!(four_significant(49.99), "49.99");
    }
}
