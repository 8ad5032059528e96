use std::path::PathBuf;
use std::process::ExitCode;

use aquid_driver::{run, Command, ExperimentConfig, Overrides};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aquid", version, about = "Ring-lattice flux qubit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed in hex (`5eed` or `0x5eed`) for solvers, noise and random phases
    #[arg(long, global = true, value_parser = parse_hex)]
    seed: Option<u64>,
    /// Eigensolver residual tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Low-lying levels of the ring over a sweep
    Spectrum,
    /// Levels plus persistent currents of the two lowest states
    Currents,
    /// Qubit gap and quality over U, N, t' or t''
    Gaps,
    /// Site occupations of the lowest states
    Density,
    /// Reduced phase-model spectra or bath coefficients
    Effective,
    /// Double-well splitting: WKB against the grid solver
    Wkb,
    /// Ring-lattice kinoform with camera feedback
    Shape,
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).map_err(|e| format!("`{s}` is not a hex seed: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Currents => Command::Currents,
        Cmd::Gaps => Command::Gaps,
        Cmd::Density => Command::Density,
        Cmd::Effective => Command::Effective,
        Cmd::Wkb => Command::Wkb,
        Cmd::Shape => Command::Shape,
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let result = ExperimentConfig::load(&path).and_then(|mut config| {
        Overrides {
            out: cli.out,
            seed: cli.seed,
            tol: cli.tol,
        }
        .apply(&mut config);
        run(command, &config)
    });
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", summary.dir.join(f).display());
            }
            println!("{}", summary.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_hex_with_optional_prefix() {
        assert_eq!(parse_hex("5eed"), Ok(0x5eed));
        assert_eq!(parse_hex("0x5EED"), Ok(0x5eed));
        assert!(parse_hex("seed").is_err());
        assert!(parse_hex("").is_err());
    }

    #[test]
    fn flags_are_global() {
        let cli = Cli::try_parse_from([
            "aquid",
            "gaps",
            "--config",
            "c.toml",
            "--workers",
            "2",
            "--seed",
            "ff",
            "--tol",
            "1e-9",
            "--out",
            "o",
        ])
        .unwrap();
        assert!(matches!(cli.command, Cmd::Gaps));
        assert_eq!(cli.seed, Some(255));
        assert_eq!(cli.workers, Some(2));
        assert_eq!(cli.tol, Some(1e-9));
        assert_eq!(cli.out, Some(PathBuf::from("o")));
        assert!(Cli::try_parse_from(["aquid", "--seed", "xyz", "wkb"]).is_err());
        assert!(Cli::try_parse_from(["aquid", "fit"]).is_err());
    }
}
