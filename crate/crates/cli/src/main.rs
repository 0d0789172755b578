use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use gedamage::damage::DamageField;
use gedamage::driver::{run_simulation, stored_energy, Prepared, SimulationResult};
use gedamage::fd_laplace::StencilSet;
use gedamage::io::{parse_config, write_field_snapshot, CurveWriter, RunConfig};
use gedamage::mesh::Adjacency;
use gedamage::{verify, Error};

#[derive(Parser)]
#[command(name = "gedamage", version, about = "Finite-strain gradient-enhanced damage solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a load program and write curve, snapshots and run summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print mesh and stencil statistics.
    MeshInfo {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in verification suites.
    Verify,
}

const EXIT_INPUT: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFY: u8 = 3;

struct Failure {
    code: u8,
    tag: &'static str,
    message: String,
}

impl Failure {
    fn new(code: u8, error: Error) -> Self {
        Failure {
            code,
            tag: error.tag(),
            message: error.to_string(),
        }
    }
}

fn input(error: Error) -> Failure {
    Failure::new(EXIT_INPUT, error)
}

fn solver(error: Error) -> Failure {
    Failure::new(EXIT_SOLVER, error)
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        input(Error::Config {
            path: path.display().to_string(),
            reason: format!("cannot read: {e}"),
        })
    })?;
    parse_config(&text).map_err(input)
}

fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:05}.vtk")
}

struct LastState {
    step: usize,
    displacement: Vec<f64>,
    damage: DamageField,
}

fn summary(prepared: &Prepared<'_>, result: &SimulationResult) -> gedamage::Result<serde_json::Value> {
    let (peak_step, peak) = result
        .records
        .iter()
        .map(|r| (r.step, r.reaction))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Ok(json!({
        "steps": result.records.len(),
        "peak_reaction_N": peak,
        "peak_step": peak_step,
        "final_reaction_N": result.records.last().map(|r| r.reaction),
        "max_damage": result.damage.max_damage(),
        "eroded_count": result.damage.eroded_count(),
        "dissipated_energy_Nmm": result.total_dissipation(),
        "external_work_Nmm": result.external_work(),
        "stored_energy_Nmm": stored_energy(prepared, &result.displacement, &result.damage)?,
        "jacobi_capped_steps": result.capped_steps,
    }))
}

fn write_json(path: &Path, value: &serde_json::Value) -> gedamage::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serialises");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    std::fs::create_dir_all(&dir).map_err(|e| input(e.into()))?;
    let problem = cfg.build_problem().map_err(input)?;
    let options = cfg.run_options();
    let prepared = Prepared::new(&problem, options.stencil_mode).map_err(input)?;
    log::info!(
        "{} elements, {} nodes, {} free dofs, {} load steps",
        problem.mesh.element_count(),
        problem.mesh.node_count(),
        prepared.free_dof_count(),
        cfg.load.step_count()
    );
    let mut curve = CurveWriter::create(&dir.join("curve.csv")).map_err(input)?;
    let mut last: Option<LastState> = None;
    let mesh = &problem.mesh;
    let mut observer = |view: &gedamage::driver::StepView<'_>| -> gedamage::Result<()> {
        curve.push(view.record)?;
        if view.snapshot {
            let title = format!("gedamage step {} u* = {:.6}", view.record.step, view.record.u_star);
            write_field_snapshot(&dir.join(snapshot_name(view.record.step)), mesh, view.displacement, view.damage, &title)?;
        }
        if view.record.step % 50 == 0 || view.last {
            log::info!(
                "step {} u* = {:.4} F = {:.6e} max D = {:.4} eroded = {}",
                view.record.step,
                view.record.u_star,
                view.record.reaction,
                view.record.max_damage,
                view.record.eroded_count
            );
        }
        last = Some(LastState {
            step: view.record.step,
            displacement: view.displacement.to_vec(),
            damage: view.damage.clone(),
        });
        Ok(())
    };
    let outcome = run_simulation(&prepared, &cfg.load, &options, &mut observer);
    let config_value = serde_json::to_value(&cfg).expect("config serialises");
    match outcome {
        Ok(result) => {
            let s = summary(&prepared, &result).map_err(solver)?;
            write_json(
                &dir.join("run.json"),
                &json!({"status": "completed", "config": config_value, "summary": s}),
            )
            .map_err(solver)?;
            Ok(())
        }
        Err(error) => {
            let last_step = last.as_ref().map(|l| l.step);
            if let Some(l) = &last {
                let title = format!("gedamage last converged step {}", l.step);
                if let Err(e) = write_field_snapshot(&dir.join("snapshot_last_converged.vtk"), mesh, &l.displacement, &l.damage, &title) {
                    log::warn!("could not write final snapshot: {e}");
                }
            }
            let record = json!({
                "status": "aborted",
                "error": {"tag": error.tag(), "message": error.to_string()},
                "last_converged_step": last_step,
                "config": config_value,
            });
            if let Err(e) = write_json(&dir.join("run.json"), &record) {
                log::warn!("could not write run summary: {e}");
            }
            Err(solver(error))
        }
    }
}

fn mesh_info(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let mesh = cfg.build_mesh().map_err(input)?;
    let adjacency = Adjacency::build(&mesh);
    let min_jac = (0..mesh.element_count())
        .map(|e| mesh.min_corner_jacobian(e))
        .fold(f64::INFINITY, f64::min);
    println!("elements        {}", mesh.element_count());
    println!("nodes           {}", mesh.node_count());
    println!("volume          {:.6e} mm^3", mesh.volume());
    println!("min corner detJ {:.6e}", min_jac);
    for (name, nodes) in mesh.node_sets() {
        println!("node set        {name}: {} nodes", nodes.len());
    }
    let stencils = StencilSet::build(&mesh, &adjacency, cfg.solver.stencil_mode).map_err(input)?;
    let (mut lo, mut hi, mut ghosts) = (f64::INFINITY, 0.0f64, 0);
    for s in stencils.iter() {
        lo = lo.min(s.rcond);
        hi = hi.max(s.rcond);
        ghosts += s.ghost_count();
    }
    println!("stencil rcond   {lo:.3e} .. {hi:.3e}");
    println!("ghost entries   {ghosts}");
    Ok(())
}

fn run_verify() -> Result<(), Failure> {
    let results = verify::run_all().map_err(|e| Failure::new(EXIT_VERIFY, e))?;
    let mut ok = true;
    println!("{:<22} {:>12} {:>12}  result", "suite", "error", "tolerance");
    for r in &results {
        ok &= r.passed();
        println!(
            "{:<22} {:>12.3e} {:>12.1e}  {}",
            r.name,
            r.error,
            r.tolerance,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    if ok {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            tag: "verification",
            message: "one or more suites failed".into(),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::MeshInfo { config } => mesh_info(&config),
        Command::Verify => run_verify(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, tag, message }) => {
            eprintln!("error[{tag}]: {}", message.replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
