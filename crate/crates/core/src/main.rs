use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kinonav::cli::{
    check_sidecar, exit, load_sidecar, mission_exit_code, plan_exit_code, plan_once, scenario_exit_code, sidecar_path,
    sweep_lines, SWEEP_HEADER,
};
use kinonav::scenario::{load_scenario, Scenario};
use kinonav::sim::run_mission;
use kinonav::verify::acceptance::Acceptance;
use kinonav::world::UnknownPolicy;

#[derive(Parser)]
#[command(name = "kinonav", version, about = "Kinodynamic quadrotor navigation: planning, missions, sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map from the start pose, plan once and refine.
    Plan(Common),
    /// Fly the full closed-loop mission.
    Run(Common),
    /// Fly a straight-line scenario at several speeds, with and without drag compensation.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// comma-separated cruise speeds, m/s
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,17.5")]
        speeds: Vec<f64>,
    },
    /// Run the acceptance suite and every expected-metric sidecar.
    Verify {
        /// directory holding the committed scenarios
        #[arg(long, default_value = "scenarios")]
        scenarios: PathBuf,
        /// only check sidecars
        #[arg(long)]
        sidecars_only: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unknown {
    Free,
    Occupied,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// directory for CSV logs and the summary
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drag_comp: Option<OnOff>,
    #[arg(long)]
    unknown_as: Option<Unknown>,
}

impl Common {
    fn load(&self) -> Result<Scenario, i32> {
        let mut sc = load_scenario(&self.scenario).map_err(|e| {
            eprintln!("{e}");
            scenario_exit_code(&e)
        })?;
        if let Some(seed) = self.seed {
            sc.seed = seed;
            sc.noise.seed = None;
        }
        if let Some(d) = self.drag_comp {
            sc.control.drag_comp = matches!(d, OnOff::On);
        }
        if let Some(u) = self.unknown_as {
            sc.mission.unknown_as = match u {
                Unknown::Free => UnknownPolicy::Free,
                Unknown::Occupied => UnknownPolicy::Occupied,
            };
        }
        Ok(sc)
    }

    fn out_file(&self, name: &str) -> Result<Option<BufWriter<File>>, i32> {
        let Some(dir) = &self.out else { return Ok(None) };
        std::fs::create_dir_all(dir)
            .and_then(|_| File::create(dir.join(name)))
            .map(|f| Some(BufWriter::new(f)))
            .map_err(|e| {
                eprintln!("cannot write {}: {e}", dir.join(name).display());
                exit::IO
            })
    }
}

fn io_err(e: std::io::Error) -> i32 {
    eprintln!("write failed: {e}");
    exit::IO
}

fn write_text(common: &Common, name: &str, text: &str) -> Result<(), i32> {
    if let Some(mut f) = common.out_file(name)? {
        use std::io::Write;
        f.write_all(text.as_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_plan(common: &Common) -> Result<i32, i32> {
    let sc = common.load()?;
    let report = match plan_once(&sc) {
        Ok(r) => r,
        Err(e) => {
            println!("result = \"{e}\"");
            return Ok(plan_exit_code(&e));
        }
    };
    let text = report.to_text();
    print!("{text}");
    write_text(common, "plan_summary.txt", &text)?;
    if let Some(f) = common.out_file("trajectory.csv")? {
        report.write_trajectory_csv(f, 0.01).map_err(io_err)?;
    }
    Ok(exit::OK)
}

fn cmd_run(common: &Common) -> Result<i32, i32> {
    let sc = common.load()?;
    let log = run_mission(&sc).map_err(|e| {
        eprintln!("{e}");
        exit::INVALID
    })?;
    let text = log.summary().to_text();
    print!("{text}");
    write_text(common, "summary.txt", &text)?;
    if let Some(f) = common.out_file("control.csv")? {
        log.write_control_csv(f).map_err(io_err)?;
    }
    if let Some(f) = common.out_file("events.csv")? {
        log.write_events_csv(f).map_err(io_err)?;
    }
    Ok(mission_exit_code(log.outcome))
}

fn cmd_sweep(common: &Common, speeds: &[f64]) -> Result<i32, i32> {
    let sc = common.load()?;
    let rows = sweep_lines(&sc, speeds).map_err(|e| {
        eprintln!("{e}");
        exit::INVALID
    })?;
    let mut table = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        table.push_str(&r.csv());
        table.push('\n');
    }
    print!("{table}");
    write_text(common, "sweep.csv", &table)?;
    Ok(exit::OK)
}

fn sidecar_scenarios(dir: &Path) -> Result<Vec<PathBuf>, i32> {
    let entries = std::fs::read_dir(dir).map_err(|e| {
        eprintln!("{}: {e}", dir.display());
        exit::IO
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.to_string_lossy();
            name.ends_with(".toml") && !name.ends_with(".expected.toml") && sidecar_path(p).exists()
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn cmd_verify(dir: &Path, sidecars_only: bool) -> Result<i32, i32> {
    let mut ok = true;
    if !sidecars_only {
        let acc = Acceptance::new(dir);
        for c in acc.run_all() {
            println!("{}", c.line());
            for n in &c.notes {
                println!("    {n}");
            }
            ok &= c.passed;
        }
    }
    let paths = sidecar_scenarios(dir)?;
    let results: Vec<Result<(String, Vec<String>), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| {
                s.spawn(move || {
                    let sc = load_scenario(p).map_err(|e| format!("{}: {e}", p.display()))?;
                    let side = load_sidecar(&sidecar_path(p))?;
                    let r = check_sidecar(&sc, &side);
                    Ok((r.scenario, r.failures))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sidecar worker panicked")).collect()
    });
    for r in results {
        match r {
            Ok((name, f)) if f.is_empty() => println!("sidecar {name}: PASS"),
            Ok((name, f)) => {
                ok = false;
                println!("sidecar {name}: FAIL: {}", f.join("; "));
            }
            Err(e) => {
                ok = false;
                println!("sidecar error: {e}");
            }
        }
    }
    Ok(if ok { exit::OK } else { exit::ACCEPTANCE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Plan(c) => cmd_plan(c),
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, speeds } => cmd_sweep(common, speeds),
        Command::Verify {
            scenarios,
            sidecars_only,
        } => cmd_verify(scenarios, *sidecars_only),
    };
    ExitCode::from(code.unwrap_or_else(|c| c) as u8)
}
