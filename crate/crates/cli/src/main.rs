//! Command-line front end for the Ψ-Hilfer solver.
//!
//! Exit status: 0 on success, 2 when a verification fails, 1 on any error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psi_hilfer::analysis::{
    certify, uhml_verify, PerturbationShape, PerturbationSpec, ZetaVariant,
};
use psi_hilfer::config::{catalog_names, load_catalog, load_problem};
use psi_hilfer::export::{write_convergence_log, write_refinement_table, write_solution_csv};
use psi_hilfer::picard::{convergence_study, picard_solve, GridKind, GridSpec, SolverOptions};
use psi_hilfer::problem::ImpulsiveDelayIVP;
use psi_hilfer::quadrature::QuadratureScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Solve,
    CheckHypotheses,
    Certify,
    VerifyUhml,
    ConvergenceStudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ZetaArg {
    Derived,
    AsStated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Rect,
    Trap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    UniformT,
    UniformPsi,
}

#[derive(Debug, Parser)]
#[command(
    name = "psi-hilfer",
    version,
    about = "Solve and certify impulsive implicit Ψ-Hilfer delay problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    args: Args,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Solve by Picard iteration and export the solution.
    Solve,
    /// Echo the Lipschitz data and evaluate the contraction constant.
    CheckHypotheses,
    /// Compute the stability constants.
    Certify,
    /// Compare a perturbed solve against the stability envelope.
    VerifyUhml,
    /// Tabulate u(b) over successively doubled grids.
    ConvergenceStudy,
    /// List the built-in problems.
    Catalog,
}

#[derive(Debug, clap::Args)]
struct Args {
    /// Problem file (TOML).
    #[arg(long, global = true, conflicts_with = "problem")]
    config: Option<PathBuf>,
    /// Built-in problem name.
    #[arg(long, global = true)]
    problem: Option<String>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 512)]
    grid_n: usize,
    #[arg(long, global = true, value_enum, default_value = "uniform-t")]
    grid_kind: GridArg,
    /// Picard stopping tolerance on the weighted sup-norm change.
    #[arg(long, global = true, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 200)]
    max_sweeps: usize,
    /// 0 selects the canonical perturbation; other values draw one.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value = "derived")]
    zeta: ZetaArg,
    #[arg(long, global = true, value_enum, default_value = "trap")]
    scheme: SchemeArg,
    #[arg(long, global = true, default_value_t = 1e-3)]
    epsilon: f64,
    /// Number of grids in a convergence study.
    #[arg(long, global = true, default_value_t = 4)]
    levels: usize,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

/// Everything a run depends on.
#[derive(Debug, Clone)]
struct RunManifest {
    command: Command,
    config_path: Option<PathBuf>,
    problem: Option<String>,
    output_dir: PathBuf,
    grid_n: usize,
    grid_kind: GridKind,
    tol: f64,
    max_sweeps: usize,
    seed: u64,
    zeta: ZetaVariant,
    scheme: QuadratureScheme,
    epsilon: f64,
    levels: usize,
}

impl RunManifest {
    fn validate(&self) -> Result<()> {
        if self.grid_n < 8 {
            bail!("--grid-n must be at least 8, got {}", self.grid_n);
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            bail!("--tol must lie in (0, 1e-2], got {}", self.tol);
        }
        if self.max_sweeps == 0 {
            bail!("--max-sweeps must be positive");
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            bail!(
                "--epsilon must be finite and nonnegative, got {}",
                self.epsilon
            );
        }
        if self.levels == 0 || self.levels > 12 {
            bail!("--levels must lie in 1..=12, got {}", self.levels);
        }
        if self.config_path.is_none() && self.problem.is_none() {
            bail!("either --config or --problem is required");
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            grid: GridSpec {
                n: self.grid_n,
                kind: self.grid_kind,
            },
            scheme: self.scheme,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            ..SolverOptions::default()
        }
    }

    fn load(&self) -> Result<ImpulsiveDelayIVP> {
        match (&self.config_path, &self.problem) {
            (Some(path), _) => {
                load_problem(path).with_context(|| format!("loading {}", path.display()))
            }
            (None, Some(name)) => Ok(load_catalog(name)?),
            (None, None) => bail!("either --config or --problem is required"),
        }
    }

    fn render(&self) -> String {
        let source = match (&self.config_path, &self.problem) {
            (Some(p), _) => format!("config={}", p.display()),
            (None, Some(n)) => format!("problem={n}"),
            (None, None) => String::new(),
        };
        format!(
            "command={:?}\n{source}\ngrid_n={}\ngrid_kind={:?}\ntol={:e}\nmax_sweeps={}\nseed={}\nzeta={}\nscheme={:?}\nepsilon={:e}\nlevels={}\n",
            self.command,
            self.grid_n,
            self.grid_kind,
            self.tol,
            self.max_sweeps,
            self.seed,
            self.zeta.name(),
            self.scheme,
            self.epsilon,
            self.levels,
        )
    }
}

/// What a finished run reports.
struct Outcome {
    passed: bool,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn prepare_out(m: &RunManifest) -> Result<()> {
    fs::create_dir_all(&m.output_dir)
        .with_context(|| format!("creating {}", m.output_dir.display()))?;
    let mut w = create(&m.output_dir, "manifest.txt")?;
    w.write_all(m.render().as_bytes())?;
    w.flush()?;
    Ok(())
}

fn perturbation(m: &RunManifest, impulses: usize) -> Result<PerturbationSpec> {
    let spec = if m.seed == 0 {
        PerturbationSpec::new(
            m.epsilon,
            PerturbationShape::ConstantOne,
            vec![1.0; impulses],
        )?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
        let frequency = rng.gen_range(0.5..5.0);
        let signs = (0..impulses).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        PerturbationSpec::new(
            m.epsilon,
            PerturbationShape::Sinusoidal { frequency },
            signs,
        )?
    };
    Ok(spec)
}

fn run(m: &RunManifest) -> Result<Outcome> {
    m.validate()?;
    let ivp = m.load()?;
    match m.command {
        Command::Solve => {
            prepare_out(m)?;
            let sol = picard_solve(&ivp, &m.solver_options())?;
            write_solution_csv(&sol, create(&m.output_dir, "solution.csv")?)?;
            write_convergence_log(sol.deltas(), create(&m.output_dir, "convergence.csv")?)?;
            println!("problem: {}", ivp.name());
            println!("sweeps: {}", sol.sweeps());
            println!(
                "final delta: {:.4e}",
                sol.deltas().last().copied().unwrap_or(0.0)
            );
            println!("u(b) = {:.4}", sol.final_value());
            Ok(Outcome { passed: true })
        }
        Command::CheckHypotheses => {
            let cert = certify(&ivp, m.zeta)?;
            let h = &cert.hypotheses;
            let lj: Vec<String> = h.l_j.iter().map(|v| format!("{v:.4}")).collect();
            println!("problem: {}", ivp.name());
            println!("H1 (asserted): K = {:.4}, L_f = {:.4}", h.k, h.l_f);
            println!("H2 (asserted): L_J = [{}]", lj.join(", "));
            let verdict = if cert.is_contractive() {
                "CONTRACTIVE"
            } else {
                "NOT CONTRACTIVE"
            };
            println!("H3: L = {:.4} -> {verdict}", cert.l_contraction);
            println!("L_full = {:.16e}", cert.l_contraction);
            Ok(Outcome {
                passed: cert.is_contractive(),
            })
        }
        Command::Certify => {
            prepare_out(m)?;
            let cert = certify(&ivp, m.zeta)?;
            let mut w = create(&m.output_dir, "certificate.txt")?;
            w.write_all(cert.render().as_bytes())?;
            w.flush()?;
            println!("problem: {}", ivp.name());
            println!("L = {:.4}", cert.l_contraction);
            println!("zeta (derived) = {:.4}", cert.zeta_derived);
            println!("zeta (as stated) = {:.4}", cert.zeta_as_stated);
            println!("C_p,E = {:.4}", cert.c_p_e_alpha);
            println!("C_f ({}) = {:.4}", m.zeta.name(), cert.c_f);
            Ok(Outcome {
                passed: cert.is_contractive(),
            })
        }
        Command::VerifyUhml => {
            prepare_out(m)?;
            let pert = perturbation(m, ivp.impulses().len())?;
            let report = uhml_verify(&ivp, &pert, &m.solver_options(), m.zeta)?;
            let mut w = create(&m.output_dir, "uhml_report.txt")?;
            write!(w, "{report}")?;
            w.flush()?;
            println!("problem: {}", ivp.name());
            println!("epsilon = {:e}", report.epsilon);
            println!(
                "max ratio ({}) = {:.4} at t = {:.4}",
                m.zeta.name(),
                report.max_ratio,
                report.argmax_time
            );
            println!(
                "max weighted deviation = {:.4e} vs eps*C_f = {:.4e}",
                report.max_weighted_deviation, report.uh_bound
            );
            let ok = report.pass && report.uh_pass;
            println!("verdict: {}", if ok { "PASS" } else { "FAIL" });
            Ok(Outcome { passed: ok })
        }
        Command::ConvergenceStudy => {
            prepare_out(m)?;
            let rows = convergence_study(&ivp, &m.solver_options(), m.levels)?;
            write_refinement_table(&rows, create(&m.output_dir, "convergence_study.csv")?)?;
            println!("{:>8} {:>14} {:>12} {:>7}", "N", "u(b)", "change", "sweeps");
            for r in &rows {
                let change = if r.change.is_nan() {
                    "-".to_string()
                } else {
                    format!("{:.4e}", r.change)
                };
                println!(
                    "{:>8} {:>14.8} {:>12} {:>7}",
                    r.n, r.u_end, change, r.sweeps
                );
            }
            Ok(Outcome { passed: true })
        }
    }
}

fn manifest(cli: &Cli) -> Option<RunManifest> {
    let command = match cli.command {
        Sub::Solve => Command::Solve,
        Sub::CheckHypotheses => Command::CheckHypotheses,
        Sub::Certify => Command::Certify,
        Sub::VerifyUhml => Command::VerifyUhml,
        Sub::ConvergenceStudy => Command::ConvergenceStudy,
        Sub::Catalog => return None,
    };
    let a = &cli.args;
    Some(RunManifest {
        command,
        config_path: a.config.clone(),
        problem: a.problem.clone(),
        output_dir: a.out.clone(),
        grid_n: a.grid_n,
        grid_kind: match a.grid_kind {
            GridArg::UniformT => GridKind::UniformT,
            GridArg::UniformPsi => GridKind::UniformPsi,
        },
        tol: a.tol,
        max_sweeps: a.max_sweeps,
        seed: a.seed,
        zeta: match a.zeta {
            ZetaArg::Derived => ZetaVariant::Derived,
            ZetaArg::AsStated => ZetaVariant::AsStated,
        },
        scheme: match a.scheme {
            SchemeArg::Rect => QuadratureScheme::ProductRectangle,
            SchemeArg::Trap => QuadratureScheme::ProductTrapezoid,
        },
        epsilon: a.epsilon,
        levels: a.levels,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let Some(m) = manifest(&cli) else {
        for name in catalog_names() {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    };
    match run(&m) {
        Ok(Outcome { passed: true }) => ExitCode::SUCCESS,
        Ok(Outcome { passed: false }) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
