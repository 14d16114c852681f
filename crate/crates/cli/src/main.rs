use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use omega_stab::harness::{
    discrete_example, emit_plot_data, run_init, run_study_detailed, stat_rows_to_csv, ExperimentConfig,
    InitKind,
};
use omega_stab::init::lmi_init;
use omega_stab::numkernel::io::read_matrix;
use omega_stab::numkernel::spectral_radius;
use omega_stab::solver::bcd;
use omega_stab::{Error, Mat, RegionSpec, SolveReport, SolverOptions};

#[derive(Parser)]
#[command(name = "omega-stab", version, about = "Nearest matrix with eigenvalues in a prescribed region")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitChoice {
    Identity,
    Lmi,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run block coordinate descent on a matrix.
    Solve {
        /// Matrix file (CSV, or JSON when the extension is .json).
        #[arg(long)]
        matrix: PathBuf,
        /// Region JSON file.
        #[arg(long)]
        region: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        init: InitChoice,
        /// Outer iterations.
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// Write the report(s) as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write history, eigenvalue and boundary CSVs into this directory.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Report region membership and the relaxed-LMI stability certificate.
    Check {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        region: PathBuf,
    },
    /// Run a multi-trial synthetic study and write the summary table.
    Study {
        /// Study configuration JSON; omitted fields take their defaults.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write every trial as JSON.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Run the built-in 5x5 discrete-time example and compare with published solutions.
    DemoDiscrete,
}

/// Failure kinds mapped onto exit codes.
enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence(_)
            | Error::NumericalBreakdown(_)
            | Error::NumericalBackend(_)
            | Error::StepCollapse { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve {
            matrix,
            region,
            init,
            iters,
            out,
            plots,
        } => solve(&matrix, &region, init, iters, out.as_deref(), plots.as_deref()),
        Command::Check { matrix, region } => check(&matrix, &region),
        Command::Study { config, out, records } => study(&config, &out, records.as_deref()),
        Command::DemoDiscrete => demo_discrete(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_region(path: &Path) -> Result<RegionSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(RegionSpec::from_json(&text)?)
}

fn load_inputs(matrix: &Path, region: &Path) -> Result<(Mat, RegionSpec), Failure> {
    let a = read_matrix(matrix)?;
    if !a.is_square() {
        return Err(Failure::Input(format!("matrix is {}x{}, expected square", a.nrows(), a.ncols())));
    }
    Ok((a, load_region(region)?))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Failure::from(Error::io(path, e)))
}

fn solve(
    matrix: &Path,
    region_path: &Path,
    init: InitChoice,
    iters: usize,
    out: Option<&Path>,
    plots: Option<&Path>,
) -> Result<(), Failure> {
    let (a, region) = load_inputs(matrix, region_path)?;
    let opts = SolverOptions {
        outer_iters: iters,
        ..SolverOptions::default()
    };
    let kinds: &[InitKind] = match init {
        InitChoice::Identity => &[InitKind::Identity],
        InitChoice::Lmi => &[InitKind::Lmi],
        InitChoice::Both => &[InitKind::Identity, InitKind::Lmi],
    };
    let norm_a = a.norm();
    let mut reports: Vec<(InitKind, SolveReport)> = Vec::new();
    println!("{:<9} {:>12} {:>14} {:>14} {:>12} {:>12}", "init", "delta*", "initial_err", "final_err", "rel_err_%", "margin");
    for &kind in kinds {
        let start = run_init(kind, &a, &region, &opts, None)?;
        let rep = bcd(&a, &region, &start.triple, &opts)?;
        let delta = start.delta_star.map_or("-".to_string(), |d| format!("{d:.3e}"));
        println!(
            "{:<9} {:>12} {:>14.6} {:>14.6} {:>12.4} {:>12.3e}",
            kind.to_string(),
            delta,
            rep.initial_error(),
            rep.final_error(),
            100.0 * rep.final_error() / norm_a,
            rep.final_margin
        );
        reports.push((kind, rep));
    }
    if let Some(path) = out {
        let text = if reports.len() == 1 {
            reports[0].1.to_json()
        } else {
            let map: serde_json::Map<String, serde_json::Value> = reports
                .iter()
                .map(|(k, r)| (k.to_string(), serde_json::to_value(r).expect("report serializes")))
                .collect();
            serde_json::to_string_pretty(&map).expect("report serializes")
        };
        write_text(path, &text)?;
    }
    if let Some(dir) = plots {
        for (kind, rep) in &reports {
            let sub = if reports.len() == 1 { dir.to_path_buf() } else { dir.join(kind.to_string()) };
            emit_plot_data(rep, &region, &sub)?;
        }
    }
    Ok(())
}

fn check(matrix: &Path, region_path: &Path) -> Result<(), Failure> {
    let (a, region) = load_inputs(matrix, region_path)?;
    let (strict, eig) = region.matrix_in_region(&a, false, 0.0)?;
    let (closed, _) = region.matrix_in_region(&a, true, omega_stab::region::DEFAULT_CLOSED_TOL)?;
    println!("eigenvalues:");
    for z in &eig {
        println!("  {:+.6e} {:+.6e}i  outside_distance={:.3e}", z.re, z.im, region.outside_distance(*z));
    }
    println!("in open region: {strict}");
    println!("in closed region: {closed}");
    let init = lmi_init(&a, &region, &SolverOptions::default())?;
    println!("delta*: {:.6e}", init.delta_star.unwrap_or(f64::NAN));
    println!("certificate: {}", init.certificate);
    Ok(())
}

fn study(config: &Path, out: &Path, records: Option<&Path>) -> Result<(), Failure> {
    let text = fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(base) = cfg.apply_seed_env()? {
        eprintln!("using base seed {base} from {}", omega_stab::harness::SEED_ENV);
    }
    let outcome = run_study_detailed(&cfg)?;
    write_text(out, &stat_rows_to_csv(&outcome.rows))?;
    if let Some(path) = records {
        write_text(path, &serde_json::to_string_pretty(&outcome.records).expect("records serialize"))?;
    }
    println!("{:>8} {:<9} {:>10} {:>10} {:>5} {:>7} {:>9}", "epsilon", "init", "mean_%", "std_%", "wins", "trials", "failures");
    for r in &outcome.rows {
        println!(
            "{:>8} {:<9} {:>10.4} {:>10.4} {:>5} {:>7} {:>9}",
            r.epsilon,
            r.init.to_string(),
            r.mean,
            r.std,
            r.wins,
            r.trials,
            r.failures
        );
    }
    if outcome.rows.iter().any(|r| r.trials == 0) {
        return Err(Failure::Solver("every trial of at least one row failed".into()));
    }
    Ok(())
}

fn demo_discrete() -> Result<(), Failure> {
    let ex = discrete_example();
    let region = ex.region();
    let opts = SolverOptions::default();
    println!("spectral radius of A: {:.4}", spectral_radius(&ex.a)?);
    println!("{:<22} {:>10} {:>10} {:>12}", "solution", "error", "published", "spec_radius");
    for (name, m, published) in [
        ("nonnegative A+", &ex.a_plus, ex.published_error_plus),
        ("best reported A_b", &ex.a_b, ex.published_error_b),
    ] {
        println!(
            "{:<22} {:>10.4} {:>10.2} {:>12.6}",
            name,
            (&ex.a - m).norm(),
            published,
            spectral_radius(m)?
        );
    }
    for (kind, published) in [
        (InitKind::Identity, ex.published_error_identity),
        (InitKind::Lmi, ex.published_error_lmi),
    ] {
        let start = run_init(kind, &ex.a, &region, &opts, None)?;
        let rep = bcd(&ex.a, &region, &start.triple, &opts)?;
        println!(
            "{:<22} {:>10.4} {:>10.2} {:>12.6}",
            format!("BCD, {kind} init"),
            rep.final_error(),
            published,
            spectral_radius(&rep.final_matrix)?
        );
    }
    Ok(())
}
