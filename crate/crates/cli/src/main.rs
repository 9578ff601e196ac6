use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wnorient::io::{write_oriented_cloud, Format};
use wnorient::{generate_fixture, run_orient, CliError, Fixture, RunConfig};

#[derive(Parser)]
#[command(
    name = "wnorient",
    version,
    about = "Orient point-cloud normals by regularizing the winding-number field"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orient the normals of an unoriented cloud.
    Orient(OrientArgs),
    /// Write a synthetic fixture with its reference normals.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct OrientArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// xyz or ply; inferred from each file's extension when omitted.
    #[arg(long)]
    format: Option<Format>,
    #[arg(long, default_value_t = 10.0)]
    lambda_a: f64,
    #[arg(long, default_value_t = 50.0)]
    lambda_b: f64,
    /// Shear divisor; `inf` disables the shear term.
    #[arg(long, default_value_t = 4.0)]
    shear_d: f64,
    #[arg(long, default_value_t = 1.3)]
    bbox_scale: f64,
    /// Gaussian noise added after normalizing to the unit box.
    #[arg(long, default_value_t = 0.0)]
    noise_level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Threshold on the change of the unnormalized objective.
    #[arg(long, default_value_t = 1.0)]
    tol: f64,
    /// Write `x y z w` per examination point next to the output.
    #[arg(long)]
    export_exam_points: bool,
    /// Add the winding-value histogram to the JSON report.
    #[arg(long)]
    export_histogram: bool,
    /// File with reference normals, index-aligned with the input.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// File with starting normals, index-aligned with the input.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Suppress the per-iteration trace.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// torus, sphere or sheet.
    shape: Fixture,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sheet thickness.
    #[arg(long, default_value_t = 0.02)]
    thickness: f64,
    #[arg(long)]
    format: Option<Format>,
}

fn orient(a: OrientArgs) -> Result<(), CliError> {
    let cfg = RunConfig {
        input: a.input,
        output: a.output,
        format: a.format,
        lambda_a: a.lambda_a,
        lambda_b: a.lambda_b,
        shear_d: a.shear_d,
        bbox_scale: a.bbox_scale,
        noise_level: a.noise_level,
        seed: a.seed,
        max_iters: a.max_iters,
        tol: a.tol,
        export_exam_points: a.export_exam_points,
        export_histogram: a.export_histogram,
        gt: a.gt,
        init: a.init,
        threads: a.threads,
    };
    let quiet = a.quiet;
    let summary = run_orient(&cfg, &mut |r| {
        if !quiet {
            if r.iteration == 0 {
                eprintln!(
                    "{:>5} {:>14} {:>14} {:>14} {:>14} {:>11} {:>9}",
                    "iter", "f", "f01", "fB", "fA", "|g|", "seconds"
                );
            }
            let v = r.value;
            eprintln!(
                "{:>5} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>11.3e} {:>9.2}",
                r.iteration, v.total, v.f01, v.f_b, v.f_a, r.gradient_norm, r.seconds
            );
        }
    })?;
    let r = &summary.report;
    println!(
        "oriented {} points ({} exam points): {} iterations, {} evaluations, {}",
        r.points, r.exam_points, r.iterations, r.evaluations, r.termination
    );
    if let Some(m) = &r.metrics {
        println!(
            "truth {:.3}%  angle rmse {:.3} deg  chamfer x100 {:.4}",
            m.truth_percentage, m.angle_rmse, m.chamfer
        );
    }
    let mut written = vec![&summary.artifacts.cloud];
    written.extend(summary.artifacts.exam_points.iter());
    written.extend(summary.artifacts.report.iter());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let g = generate_fixture(a.shape, a.n, a.seed, a.thickness)?;
    let format = a.format.unwrap_or_else(|| Format::from_path(&a.output));
    write_oriented_cloud(&g.cloud.points, &g.gt_normals, &a.output, format)?;
    println!("wrote {} points to {}", g.cloud.len(), a.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Orient(a) => orient(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
