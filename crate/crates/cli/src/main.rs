use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use agency_core::export;
use agency_core::gridworld::{GridMap, Trajectory};
use agency_core::planner::bfs_distances;
use agency_core::scenario::{scenario_actions, Scenario, ScenarioParams};
use agency_core::trajfile::{load_map, TrajFile};
use agency_core::{parse_actions, replay, AssessConfig, Color, VerdictReport, World, DEFAULT_EPSILON_POINTS, DEFAULT_GAMMA};
use agency_service::{AppState, ServiceConfig};
use clap::{Args, Parser, Subcommand};

const MAP_ENV: &str = "AGENCY_DEFAULT_MAP";

#[derive(Parser)]
#[command(name = "agency", version, about = "Is this trajectory an agent or a device?")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score an action string or trajectory file.
    Replay(ReplayArgs),
    /// Generate and score one of the built-in scenarios.
    Scenario(ScenarioArgs),
    /// Run the HTTP steering service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Score the agent with the switching goal mixture.
    #[arg(long)]
    switching: bool,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Points on the exploration-rate grid.
    #[arg(long = "n-eps", default_value_t = DEFAULT_EPSILON_POINTS)]
    epsilon_points: usize,
}

#[derive(Args, Default)]
struct OutputArgs {
    /// Write the full report as JSON (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Context-hit table.
    #[arg(long, value_name = "PATH")]
    csv_hits: Option<PathBuf>,
    /// Goal posterior after every step.
    #[arg(long, value_name = "PATH")]
    csv_goals: Option<PathBuf>,
    /// State values per goal.
    #[arg(long, value_name = "PATH")]
    values_csv: Option<PathBuf>,
    /// Trajectory drawn over the grid.
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Agent posterior against time.
    #[arg(long, value_name = "PATH")]
    svg_posterior: Option<PathBuf>,
    /// Goal posteriors against time.
    #[arg(long, value_name = "PATH")]
    svg_goals: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Map file, or `default` for the shipped map.
    #[arg(long)]
    map: Option<String>,
    /// Actions over U, D, L, R.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    actions: Option<String>,
    /// Trajectory file (TOML with `actions` and optionally `map`).
    #[arg(long)]
    file: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ScenarioArgs {
    /// circle, magenta, epsblue, followwalls, switchB or random.
    name: Scenario,
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    /// Print the generated action string.
    #[arg(long)]
    print_actions: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Map used by sessions that do not send their own.
    #[arg(long)]
    map: Option<String>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Directory of web assets served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Failure {
            code: 2,
            message: message.to_string(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        Failure {
            code: 1,
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

/// `--map`, then `AGENCY_DEFAULT_MAP`, then the shipped map.
fn resolve_map(spec: Option<&str>) -> Result<GridMap, Failure> {
    let from_env = std::env::var(MAP_ENV).ok().filter(|s| !s.is_empty());
    let spec = spec.or(from_env.as_deref()).unwrap_or("default");
    load_map(spec, None).map_err(Failure::usage)
}

fn world(map: GridMap, gamma: f64) -> Result<World, Failure> {
    World::new(map, gamma).map_err(Failure::usage)
}

fn config(model: &ModelArgs, force_switching: bool) -> AssessConfig {
    AssessConfig {
        switching: model.switching || force_switching,
        epsilon_points: model.epsilon_points,
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    if path == Path::new("-") {
        print!("{contents}");
        return Ok(());
    }
    std::fs::write(path, contents).map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn emit(world: &World, traj: &Trajectory, report: &VerdictReport, out: &OutputArgs) -> CliResult {
    let json_to_stdout = out.json.as_deref() == Some(Path::new("-"));
    if !json_to_stdout {
        print!("{}", report.table());
        let goals: Vec<String> = report
            .goal_posteriors
            .iter()
            .map(|g| format!("{}={:.4}", g.color, g.probability))
            .collect();
        println!("goals: {}", goals.join(" "));
        println!("MAP epsilon: {:.3}", report.map_epsilon);
    }
    let outputs: [(&Option<PathBuf>, &dyn Fn() -> String); 7] = [
        (&out.json, &|| report.to_json() + "\n"),
        (&out.csv_hits, &|| export::context_hits_csv(report)),
        (&out.csv_goals, &|| export::goal_trace_csv(report)),
        (&out.values_csv, &|| export::value_table_csv(world)),
        (&out.svg, &|| export::trajectory_svg(world.map(), traj)),
        (&out.svg_posterior, &|| export::posterior_svg(report)),
        (&out.svg_goals, &|| export::goal_strip_svg(report)),
    ];
    for (path, render) in outputs {
        if let Some(path) = path {
            write_file(path, &render())?;
        }
    }
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> CliResult {
    let (actions, file_map) = match (&args.actions, &args.file) {
        (Some(text), None) => (parse_actions(text).map_err(Failure::usage)?, None),
        (None, Some(path)) => {
            let file = TrajFile::read(path).map_err(Failure::usage)?;
            let map = file.map(path.parent()).map_err(Failure::usage)?;
            (file.actions().map_err(Failure::usage)?, map)
        }
        _ => return Err(Failure::usage("give exactly one of --actions or --file")),
    };
    // A map named in the trajectory file wins over the default, not over --map.
    let map = match (args.map.as_deref(), file_map) {
        (None, Some(map)) => map,
        (spec, _) => resolve_map(spec)?,
    };
    let world = world(map, args.model.gamma)?;
    let traj = replay(world.map(), &actions);
    let report = agency_core::assess(&world, &traj, config(&args.model, false)).map_err(Failure::runtime)?;
    emit(&world, &traj, &report, &args.output)
}

fn cmd_scenario(args: ScenarioArgs) -> CliResult {
    let world = world(resolve_map(args.map.as_deref())?, args.model.gamma)?;
    let params = ScenarioParams {
        seed: args.seed,
        steps: args.steps,
    };
    let actions = scenario_actions(world.map(), args.name, params).map_err(Failure::runtime)?;
    let traj = replay(world.map(), &actions);
    let config = config(&args.model, args.name.uses_switching());
    if args.output.json.as_deref() != Some(Path::new("-")) {
        println!(
            "scenario {}: {} actions{}",
            args.name,
            traj.len(),
            if config.switching { ", switching agent" } else { "" }
        );
        if args.name == Scenario::EpsBlue {
            if let Some(blue) = world.map().goal(Color::Blue) {
                if let Some(d) = bfs_distances(world.map(), blue)[world.map().index_of(world.map().start())] {
                    println!("shortest route to blue: {d} actions");
                }
            }
        }
        if args.print_actions {
            println!("actions: {}", traj.action_string());
        }
    }
    let report = agency_core::assess(&world, &traj, config).map_err(Failure::runtime)?;
    emit(&world, &traj, &report, &args.output)
}

fn cmd_serve(args: ServeArgs) -> CliResult {
    let world = world(resolve_map(args.map.as_deref())?, args.gamma)?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| Failure::usage(format!("bad address {}:{}: {e}", args.host, args.port)))?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::runtime(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(Failure::runtime)?;
        eprintln!("listening on http://{local}");
        let state = Arc::new(AppState::new(world));
        let config = ServiceConfig {
            static_dir: args.static_dir,
        };
        agency_service::serve(listener, state, config).await.map_err(Failure::runtime)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay(args) => cmd_replay(args),
        Command::Scenario(args) => cmd_scenario(args),
        Command::Serve(args) => cmd_serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("agency: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
