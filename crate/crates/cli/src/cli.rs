use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use eac_core::concepts::builtin_library;
use eac_core::sim::Perception;
use eac_core::Vec3;

use crate::commands;
use crate::config::{load_file, ReasonerArgs, ReasonerSettings, CONFIG_VAR};
use crate::scene::SceneFile;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "eac", version, about = "Parametric part concepts, fitting and articulated-object manipulation in simulation")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = CONFIG_VAR)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List or render concept assets.
    Concepts {
        #[command(subcommand)]
        action: ConceptsAction,
    },
    /// Fit a concept asset to a PLY point cloud.
    Fit {
        cloud: PathBuf,
        #[arg(long)]
        asset: String,
        /// Add a brute-force grid search for comparison.
        #[arg(long)]
        oracle: bool,
        /// Grid values per parameter for --oracle.
        #[arg(long, default_value_t = 9)]
        grid: usize,
        /// Camera position `x,y,z` when the cloud is a single view.
        #[arg(long, value_parser = parse_vec3)]
        viewpoint: Option<Vec3>,
    },
    /// Carry out an instruction on a scene and print the run record.
    Run {
        /// Scene file, or `builtin:<blueprint id>`.
        scene: String,
        instruction: String,
        #[arg(long, env = "EAC_SEED")]
        seed: Option<u64>,
        #[command(flatten)]
        reasoner: ReasonerArgs,
        /// Write the record here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a saved run record and check that the output is unchanged.
    Replay { record: PathBuf },
    /// Success rates over an episode suite.
    Evaluate {
        #[arg(long, default_value = "builtin")]
        suite: String,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, env = "EAC_SEED")]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = PerceptionArg::Fitted)]
        perception: PerceptionArg,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        reasoner: ReasonerArgs,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConceptsAction {
    /// Print the asset registry.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Sample an instance's surface into a PLY file. Parameters are given
    /// as `--<name> <value>`, e.g. `--R_o 0.05`.
    Render {
        asset: String,
        /// `--n <points>`, `--seed <seed>`, `--out <file>` and parameter flags.
        #[arg(num_args = 0.., allow_hyphen_values = true, trailing_var_arg = true)]
        rest: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerceptionArg {
    Fitted,
    GroundTruth,
}

impl From<PerceptionArg> for Perception {
    fn from(p: PerceptionArg) -> Self {
        match p {
            PerceptionArg::Fitted => Perception::Fitted,
            PerceptionArg::GroundTruth => Perception::GroundTruth,
        }
    }
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"))).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err("expected three comma-separated numbers".into()),
    }
}

struct RenderArgs {
    n: usize,
    seed: u64,
    out: Option<PathBuf>,
    params: BTreeMap<String, f64>,
}

fn parse_render(rest: &[String]) -> Result<RenderArgs, CliError> {
    let mut args = RenderArgs { n: 2048, seed: 0, out: None, params: BTreeMap::new() };
    let mut it = rest.iter();
    while let Some(flag) = it.next() {
        let name = flag.strip_prefix("--").ok_or_else(|| CliError::Usage(format!("unexpected argument `{flag}`")))?;
        let (name, value) = match name.split_once('=') {
            Some((n, v)) => (n, v.to_string()),
            None => (name, it.next().ok_or_else(|| CliError::Usage(format!("`--{name}` needs a value")))?.clone()),
        };
        let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("`--{name} {value}`: {e}"));
        match name {
            "n" => args.n = value.parse().map_err(|e| bad(&e))?,
            "seed" => args.seed = value.parse().map_err(|e| bad(&e))?,
            "out" => args.out = Some(PathBuf::from(&value)),
            param => {
                args.params.insert(param.to_string(), value.parse().map_err(|e| bad(&e))?);
            }
        }
    }
    Ok(args)
}

fn write_to(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let file = load_file(cli.config.as_deref())?;
    let io = |e: std::io::Error| CliError::Runtime(e.to_string());
    match cli.command {
        Command::Concepts { action: ConceptsAction::List { json } } => {
            let library = builtin_library();
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&library).expect("library serializes")).map_err(io)?;
            } else {
                write!(out, "{}", commands::concepts_table(&library)).map_err(io)?;
            }
        }
        Command::Concepts { action: ConceptsAction::Render { asset, rest } } => {
            let a = parse_render(&rest)?;
            let cloud = commands::render_concept(&asset, &a.params, a.n, a.seed)?;
            match a.out {
                Some(path) => {
                    let mut buf = Vec::new();
                    crate::ply::write_cloud(&mut buf, &cloud)?;
                    write_to(&path, &buf)?;
                    writeln!(err, "wrote {} points to {}", cloud.len(), path.display()).map_err(io)?;
                }
                None => crate::ply::write_cloud(out, &cloud)?,
            }
        }
        Command::Fit { cloud, asset, oracle, grid, viewpoint } => {
            let points = crate::ply::read_cloud_file(&cloud)?;
            let record = commands::fit_cloud(&points, &asset, viewpoint, oracle.then_some(grid))?;
            writeln!(out, "{}", serde_json::to_string_pretty(&record).expect("record serializes")).map_err(io)?;
        }
        Command::Run { scene, instruction, seed, reasoner, out: path } => {
            let (scene, _) = SceneFile::load(&scene)?;
            let settings = ReasonerSettings::resolve(&reasoner, &file);
            let record = commands::run(commands::run_input(scene, &instruction, seed.or(file.seed).unwrap_or(0), settings))?;
            let text = record.to_json();
            match path {
                Some(p) => write_to(&p, format!("{text}\n").as_bytes())?,
                None => writeln!(out, "{text}").map_err(io)?,
            }
            writeln!(err, "{}: {}", instruction, if record.success() { "succeeded" } else { "failed" }).map_err(io)?;
        }
        Command::Replay { record } => {
            let text = std::fs::read_to_string(&record).map_err(|e| CliError::input(&record.display().to_string(), e))?;
            let (_, same) = commands::replay(&text)?;
            if !same {
                return Err(CliError::Runtime(format!("{}: replay differs from the recorded output", record.display())));
            }
            writeln!(out, "{}: replay identical", record.display()).map_err(io)?;
        }
        Command::Evaluate { suite, episodes, seed, perception, threads, reasoner, out: path, json } => {
            let settings = ReasonerSettings::resolve(&reasoner, &file);
            let input = commands::eval_input(&suite, episodes, seed.or(file.seed).unwrap_or(0), perception.into(), settings);
            let record = commands::evaluate(input, threads.or(file.threads).unwrap_or(0))?;
            let text = serde_json::to_string_pretty(&record).expect("report serializes");
            if let Some(p) = path {
                write_to(&p, format!("{text}\n").as_bytes())?;
            }
            if json {
                writeln!(out, "{text}").map_err(io)?;
            } else {
                write!(out, "{}", record.report.to_table()).map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
