use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqrtdiff::analytic::robin_roots;
use sqrtdiff::fracpow::SpectralOracle;
use sqrtdiff::harness::{self, ExperimentConfig, InputKind, MeshSource, Setup};
use sqrtdiff::mesh::{generate_quarter_disk, load_mesh, save_mesh, Mesh};
use sqrtdiff::{Error, ErrorKind, Result};

/// Square-root diffusion solver: regularized time schemes with the
/// pseudo-parabolic inverse square root on a quarter-disk P1 mesh.
#[derive(Parser)]
#[command(name = "sqrtdiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or check a mesh.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Roots of mu J0(nu) = nu J1(nu).
    Roots {
        /// Robin coefficients (repeatable).
        #[arg(long = "mu", default_values_t = [1.0, 10.0, 100.0], allow_negative_numbers = true)]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// One run against the exact solution.
    Solve(RunArgs),
    /// Convergence study over several step counts.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated step counts.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
    },
    /// Compare the pseudo-time inverse square root with the spectral oracle.
    OracleCheck {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// `white` or `low:CUTOFF` (eigenvalues up to CUTOFF only).
        #[arg(long, default_value = "white")]
        inputs: String,
        /// Largest accepted relative M-norm error.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a generated quarter-disk mesh.
    Gen {
        #[arg(long)]
        mesh_level: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a mesh and print its statistics.
    Check {
        #[arg(long, conflicts_with = "mesh_level")]
        mesh_file: Option<PathBuf>,
        #[arg(long)]
        mesh_level: Option<u32>,
    },
}

/// Experiment flags. Anything given here overrides the config file.
#[derive(Args)]
struct RunArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mesh_level: Option<u32>,
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    k_pseudo: Option<usize>,
    /// `be` or `cn`.
    #[arg(long)]
    integrator: Option<String>,
    /// `pseudo_parabolic` or `spectral`.
    #[arg(long)]
    sqrt_method: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// `zero`, `bubble_rotation` or `bubble_rotation:AMPLITUDE`.
    #[arg(long)]
    velocity: Option<String>,
    /// CSV report path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    #[arg(long)]
    vtk: Option<PathBuf>,
    /// Directory for MatrixMarket dumps.
    #[arg(long)]
    matrix_dump: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.mesh_level.is_some() || self.mesh_file.is_some() {
            cfg.mesh_level = self.mesh_level;
            cfg.mesh_file = self.mesh_file.clone();
        }
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone().into();
                }
            )*};
        }
        set!(mu, sigma, scheme, n_steps, k_pseudo, integrator, sqrt_method, t_final, delta, velocity, seed);
        set!(out, trajectory_out, vtk, matrix_dump);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Solver => 3,
                ErrorKind::Validation => 4,
            })
        }
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Mesh(MeshCommand::Gen { mesh_level, out }) => {
            let mesh = generate_quarter_disk(mesh_level)?;
            save_mesh(&mesh, &out)?;
            println!("wrote {} ({} vertices, {} cells)", out.display(), mesh.n_vertices(), mesh.n_triangles());
        }
        Command::Mesh(MeshCommand::Check { mesh_file, mesh_level }) => {
            let mesh = match (mesh_file, mesh_level) {
                (Some(p), _) => load_mesh(p)?,
                (None, Some(l)) => generate_quarter_disk(l)?,
                (None, None) => return Err(Error::Config("mesh check needs --mesh-file or --mesh-level".into())),
            };
            print_mesh_stats(&mesh);
        }
        Command::Roots { mu, count } => print_roots(&mu, count)?,
        Command::Solve(args) => {
            let cfg = args.config()?;
            let r = harness::run_experiment(&cfg)?;
            println!(
                "{} ({} vertices) {} mu={} sigma={} N={} tau={:e} K={} {}",
                r.grid, r.n_vertices, r.scheme, r.mu, r.sigma, r.n_steps, r.tau, r.k_pseudo, r.integrator
            );
            println!("eps2 = {:.8}", r.eps2);
            println!("eps_inf = {:.8}", r.eps_inf);
            println!(
                "cg iterations {}, pseudo-time iterations {}, {:.3} s",
                r.cg_iterations, r.pseudo_iterations, r.wall_time_s
            );
        }
        Command::Sweep { run, n_list } => {
            let cfg = run.config()?;
            let ns = n_list.unwrap_or_else(|| cfg.n_list.clone());
            let table = harness::convergence_study(&cfg, &ns)?;
            println!("{:>6} {:>12} {:>14} {:>14}", "N", "tau", "eps2", "eps_inf");
            for r in &table.reports {
                println!("{:>6} {:>12.6e} {:>14.8} {:>14.8}", r.n_steps, r.tau, r.eps2, r.eps_inf);
            }
            if let Some(p) = table.fitted_order {
                println!("fitted order in tau: {p:.3}");
            }
            for (n, msg) in &table.failures {
                eprintln!("N = {n} failed: {msg}");
            }
            if !table.failures.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::OracleCheck { run, count, inputs, tol } => {
            let mut cfg = run.config()?;
            if run.mesh_level.is_none() && run.mesh_file.is_none() && run.config.is_none() {
                cfg.mesh_level = Some(1);
            }
            let kind = parse_inputs(&inputs)?;
            let setup = Setup::build(&cfg)?;
            let oracle = SpectralOracle::new(&setup.op)?;
            let pseudo = cfg.pseudo_config()?;
            let w = harness::random_inputs(&oracle, kind, count, cfg.seed);
            let check = harness::oracle_check(&setup.op, &oracle, &pseudo, &w)?;
            let grid = MeshSource::label(&cfg.mesh_source()?);
            println!("{grid}: {} vertices, K = {}, {}", setup.mesh.n_vertices(), pseudo.steps, pseudo.integrator);
            for (i, (e, h)) in check.errors.iter().zip(&check.errors_half).enumerate() {
                println!("input {i:>3}: rel err {e:.3e} (K/2: {h:.3e}, ratio {:.2})", h / e);
            }
            println!("max rel err {:.3e}, mean ratio {:.2}", check.max_error(), check.mean_ratio());
            if check.max_error() > tol {
                eprintln!("max error exceeds {tol:e}");
                return Ok(ExitCode::from(4));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_inputs(s: &str) -> Result<InputKind> {
    match s.split_once(':') {
        None if s == "white" => Ok(InputKind::WhiteNoise),
        Some(("low", c)) => c
            .parse()
            .map(|cutoff| InputKind::LowModes { cutoff })
            .map_err(|_| Error::Config(format!("bad cutoff `{c}`"))),
        _ => Err(Error::Config(format!("unknown input kind `{s}` (white, low:CUTOFF)"))),
    }
}

fn print_mesh_stats(mesh: &Mesh) {
    let tags = mesh.boundary_edges().iter().fold([0usize; 3], |mut acc, e| {
        acc[e.tag.code() as usize - 1] += 1;
        acc
    });
    println!("ok");
    println!("vertices {}", mesh.n_vertices());
    println!("cells {}", mesh.n_triangles());
    println!("boundary edges {} (horizontal {}, vertical {}, arc {})", tags.iter().sum::<usize>(), tags[0], tags[1], tags[2]);
    println!("area {:.12}", mesh.total_area());
    println!("max edge {:.6}", mesh.max_edge_length());
    println!("min angle {:.3} deg", mesh.min_angle_degrees());
}

fn print_roots(mus: &[f64], count: usize) -> Result<()> {
    let table = mus.iter().map(|&m| robin_roots(m, count)).collect::<Result<Vec<_>>>()?;
    print!("{:>4}", "k");
    for m in mus {
        print!(" {:>14}", format!("mu={m}"));
    }
    println!();
    for k in 1..=count {
        print!("{k:>4}");
        for r in &table {
            print!(" {:>14.8}", r.nu(k));
        }
        println!();
    }
    Ok(())
}
