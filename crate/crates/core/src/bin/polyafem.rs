//! Command-line driver: experiments, the verification battery, and mesh
//! utilities.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use polyafem::adapt::RefinementMode;
use polyafem::experiment::{check_thresholds, run_experiment, ExperimentConfig};
use polyafem::export::{write_svg, write_vtk};
use polyafem::mesh::{
    generate_initial_mesh, read_mesh_json, write_mesh_json, Domain, MeshStyle,
};
use polyafem::verify;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "polyafem", version, about = "Adaptive Wachspress polygonal FEM for the 2D Poisson equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence experiment.
    Run(RunArgs),
    /// Run the numerical verification battery of the geometric estimates.
    Verify(VerifyArgs),
    /// Mesh utilities: generate, inspect, convert.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark example: 1 (peak), 2 (interior layer), 3 (L-shape corner).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    example: u8,
    /// Refinement mode: adaptive or uniform.
    #[arg(long, default_value = "adaptive")]
    mode: String,
    /// Bulk marking parameter.
    #[arg(long, default_value_t = 0.6)]
    theta: f64,
    /// Stop once the dof count reaches this bound.
    #[arg(long, default_value_t = 30_000)]
    max_dof: usize,
    /// Initial mesh style: grid or polygonal.
    #[arg(long, default_value = "grid")]
    style: String,
    /// Initial mesh resolution.
    #[arg(long, default_value_t = 4)]
    resolution: u32,
    /// Generator seed (polygonal style).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Polygon quadrature degree.
    #[arg(long, default_value_t = 8)]
    quad_degree: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Verify rate and effectivity thresholds; exit code 2 on failure.
    #[arg(long, default_value_t = false)]
    check: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Sample seed.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Output directory for the report files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate an initial mesh and write it as JSON.
    Generate {
        #[arg(long, default_value = "unit_square")]
        domain: String,
        #[arg(long, default_value = "grid")]
        style: String,
        #[arg(long, default_value_t = 4)]
        resolution: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a mesh file and print its regularity report.
    Inspect { file: PathBuf },
    /// Convert a mesh JSON file to .vtk or .svg.
    Convert { input: PathBuf, output: PathBuf },
}

fn parse_mode(s: &str) -> Result<RefinementMode> {
    match s.to_ascii_lowercase().as_str() {
        "adaptive" => Ok(RefinementMode::Adaptive),
        "uniform" => Ok(RefinementMode::Uniform),
        other => bail!("unknown mode '{other}' (expected adaptive|uniform)"),
    }
}

fn main() -> ExitCode {
    polyafem::init_thread_pool();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Verify(args) => run_verify(args),
        Command::Mesh { command } => {
            mesh_command(command)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut config = ExperimentConfig::new(args.example, parse_mode(&args.mode)?);
    config.theta = args.theta;
    config.max_dof = args.max_dof;
    config.style = args.style.parse::<MeshStyle>().map_err(|e| anyhow::anyhow!(e))?;
    config.resolution = args.resolution;
    config.seed = args.seed;
    config.quad_degree = args.quad_degree;
    config.out_dir = Some(args.out.clone());
    anyhow::ensure!(config.theta > 0.0 && config.theta < 1.0, "theta must lie in (0,1)");

    let output = run_experiment(&config)
        .with_context(|| format!("example {} run failed", args.example))?;
    println!("example {} ({:?}): {} levels", args.example, config.mode, output.records.len());
    println!("{}", polyafem::experiment::CSV_HEADER);
    for r in &output.records {
        println!("{}", polyafem::experiment::record_csv_row(r));
    }
    if let Some(s) = output.slope_error {
        println!("fitted error slope: {s:.4}");
    }
    if let Some(s) = output.slope_eta {
        println!("fitted estimator slope: {s:.4}");
    }
    println!("artifacts written to {}", args.out.display());

    if args.check {
        let violations = check_thresholds(&config, &output);
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("check failed: {v}");
            }
            return Ok(ExitCode::from(2));
        }
        println!("all threshold checks passed");
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: VerifyArgs) -> Result<ExitCode> {
    std::fs::create_dir_all(&args.out)?;
    let reports = verify::run_all(args.seed);
    let mut csv = String::from("lemma,ratio_min,ratio_max,aux_max,scale_drift,pass\n");
    let mut all_pass = true;
    for report in &reports {
        print!("{}", report.text());
        csv.push_str(&report.csv_row());
        std::fs::write(
            args.out.join(format!("verify_{}.txt", report.lemma)),
            report.text(),
        )?;
        all_pass &= report.pass;
    }
    let (worst, samples) = verify::det_expansion_discrepancy(60, args.seed ^ 99);
    println!("determinant-expansion: max relative discrepancy {worst:.3e} over {samples} samples");
    csv.push_str(&format!("determinant-expansion,,{worst},,,{}\n", worst <= 1e-9));
    all_pass &= worst <= 1e-9;
    std::fs::write(args.out.join("verify_reports.csv"), csv)?;
    if all_pass {
        println!("verification battery passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification battery FAILED");
        Ok(ExitCode::from(2))
    }
}

fn mesh_command(command: MeshCommand) -> Result<()> {
    match command {
        MeshCommand::Generate { domain, style, resolution, seed, out } => {
            let domain = domain.parse::<Domain>().map_err(|e| anyhow::anyhow!(e))?;
            let style = style.parse::<MeshStyle>().map_err(|e| anyhow::anyhow!(e))?;
            let mesh = generate_initial_mesh(domain, style, resolution, seed)?;
            std::fs::write(&out, write_mesh_json(&mesh))?;
            println!(
                "wrote {} ({} vertices, {} elements)",
                out.display(),
                mesh.n_vertices(),
                mesh.n_elements()
            );
        }
        MeshCommand::Inspect { file } => {
            let text = std::fs::read_to_string(&file)?;
            let mesh = read_mesh_json(&text)?;
            let report = mesh.regularity_report();
            println!("vertices: {}", mesh.n_vertices());
            println!("elements: {}", mesh.n_elements());
            println!("facets:   {}", mesh.n_facets());
            println!("area:     {}", mesh.total_area());
            println!("aspect C1 (max h/rho):        {:.4}", report.aspect_max);
            println!("clearance C2 (min h*/h):      {:.4}", report.clearance_min);
            println!(
                "interior angles:              [{:.2}, {:.2}] deg",
                report.angle_lower.to_degrees(),
                report.angle_upper.to_degrees()
            );
            println!("max corners N:                {}", report.max_corners);
            println!("max vertex patch M:           {}", report.max_patch);
        }
        MeshCommand::Convert { input, output } => {
            let text = std::fs::read_to_string(&input)?;
            let mesh = read_mesh_json(&text)?;
            let ext = output.extension().and_then(|e| e.to_str()).unwrap_or("");
            match ext {
                "vtk" => std::fs::write(&output, write_vtk(&mesh, None, None))?,
                "svg" => std::fs::write(&output, write_svg(&mesh, None))?,
                other => bail!("unsupported output extension '{other}' (vtk|svg)"),
            }
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}
