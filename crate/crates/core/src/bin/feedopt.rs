use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use feedopt::config::load_scenario;
use feedopt::experiments::{run_experiment, EXPERIMENTS};
use feedopt::output::{write_csv, ArcSeries, RunSummary};
use feedopt::report::{certificate_report, Analysis};
use feedopt::sim::simulate;

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "feedopt", version, about = "Feedback optimization of switched LTI plants")]
struct Cli {
    /// Output format for trajectories.
    #[arg(long, value_enum, global = true, default_value = "csv")]
    format: Format,
    /// Print errors only.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the stability certificates of a scenario.
    Check { scenario: PathBuf },
    /// Simulate a scenario and write its trajectory.
    Simulate {
        scenario: PathBuf,
        /// Defaults to <out-dir>/<scenario stem>.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "FEEDOPT_OUT_DIR", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run a named experiment preset.
    Experiment {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
        name: String,
        #[arg(long, env = "FEEDOPT_OUT_DIR", default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn check(path: &Path, quiet: bool) -> feedopt::Result<bool> {
    let sc = load_scenario(path)?;
    let report = certificate_report(&sc)?;
    if !quiet {
        print!("{}", report.render_text());
        print!("{}", report.render_kv());
    }
    Ok(report.all_pass())
}

fn simulate_cmd(path: &Path, out: &Path, quiet: bool) -> feedopt::Result<bool> {
    let sc = load_scenario(path)?;
    sc.validate()?;
    let an = Analysis::new(&sc)?;
    let arc = simulate(&sc)?;
    let series = ArcSeries::new(&sc, &an, &arc);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_csv(BufWriter::new(File::create(out)?), &sc, &arc, &series)?;
    if !quiet {
        println!("{}", RunSummary::new(&arc, &series).render());
        println!("wrote {}", out.display());
    }
    Ok(true)
}

fn experiment(name: &str, dir: &Path, seed: u64, quiet: bool) -> feedopt::Result<bool> {
    let res = run_experiment(name, seed)?;
    let dir = dir.join(name);
    res.write(&dir)?;
    if !quiet {
        print!("{}", res.render_text());
        println!("wrote {}", dir.display());
    }
    Ok(res.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Format::Csv = cli.format;
    let outcome = match &cli.command {
        Command::Check { scenario } => check(scenario, cli.quiet),
        Command::Simulate { scenario, out, out_dir } => {
            let out = out.clone().unwrap_or_else(|| {
                let stem = scenario.file_stem().unwrap_or_else(|| "scenario".as_ref());
                out_dir.join(stem).with_extension("csv")
            });
            simulate_cmd(scenario, &out, cli.quiet)
        }
        Command::Experiment { name, out_dir, seed } => experiment(name, out_dir, *seed, cli.quiet),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
