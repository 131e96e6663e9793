//! `sarnet` — diffusion-set partitioning and SAR epidemic runs from the
//! command line.
//!
//! Exit codes: 0 success, 1 validation or parse error, 2 a run completed
//! with a numerical diagnostic, 3 I/O error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use sarnet::cost::CostTable;
use sarnet::dynamics::DynamicsError;
use sarnet::graph::{classify_node, parse_tree, tree_interference, Network};
use sarnet::report::{execute, RunError, RunOptions};
use sarnet::scenario::Scenario;
use sarnet::EpidemicState;

const EXIT_VALIDATION: u8 = 1;
const EXIT_DIAGNOSTIC: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "sarnet", version, about = "SAR interference-epidemic toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and write CSV series, stability reports
    /// and a summary.
    Run {
        /// Scenario TOML document.
        scenario: PathBuf,
        /// Directory for the output files (created if missing).
        #[arg(short, long)]
        out_dir: PathBuf,
        /// Cost-table TOML document; overrides the scenario's `cost_table`
        /// and the built-in table.
        #[arg(long)]
        cost_table: Option<PathBuf>,
        /// Comma-separated states to price: susceptible, attacked, removed.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "susceptible,attacked,removed"
        )]
        cost_states: Vec<String>,
        /// Don't echo the summary to stdout.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Partition a graph file into diffusion sets and classify nodes.
    Partition {
        /// Graph file.
        graph: PathBuf,
        /// Lower interference threshold.
        t1: f64,
        /// Upper interference threshold.
        t2: f64,
        /// Collection-tree file; its child counts become the node weights.
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help/--version are not failures; bad usage is validation
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_VALIDATION,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            cost_table,
            cost_states,
            quiet,
        } => run_command(
            &scenario,
            &out_dir,
            cost_table.as_deref(),
            &cost_states,
            quiet,
        ),
        Command::Partition {
            graph,
            t1,
            t2,
            tree,
            json,
        } => partition_command(&graph, t1, t2, tree.as_deref(), json),
    }
}

fn read_file(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|err| {
        eprintln!("error: cannot read {}: {err}", path.display());
        ExitCode::from(EXIT_IO)
    })
}

fn parse_states(names: &[String]) -> Result<Vec<EpidemicState>, ExitCode> {
    let mut states = Vec::new();
    for name in names {
        let state = match name.trim().to_ascii_lowercase().as_str() {
            "susceptible" | "s" => EpidemicState::Susceptible,
            "attacked" | "a" => EpidemicState::Attacked,
            "removed" | "r" => EpidemicState::Removed,
            other => {
                eprintln!(
                    "error: unknown state `{other}` (expected susceptible, attacked or removed)"
                );
                return Err(ExitCode::from(EXIT_VALIDATION));
            }
        };
        if !states.contains(&state) {
            states.push(state);
        }
    }
    Ok(states)
}

fn run_command(
    scenario_path: &Path,
    out_dir: &Path,
    cost_table: Option<&Path>,
    cost_states: &[String],
    quiet: bool,
) -> ExitCode {
    let source = match read_file(scenario_path) {
        Ok(text) => text,
        Err(code) => return code,
    };
    let scenario = match Scenario::parse(&source) {
        Ok(s) => s,
        Err(err) => {
            eprintln!("error: {}: {err}", scenario_path.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    // --cost-table wins over the path named inside the scenario; relative
    // scenario paths resolve against the scenario file's directory
    let table_path: Option<PathBuf> = match cost_table {
        Some(path) => Some(path.to_path_buf()),
        None => scenario.cost_table.as_ref().map(|rel| {
            let rel = Path::new(rel);
            if rel.is_absolute() {
                rel.to_path_buf()
            } else {
                scenario_path
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join(rel)
            }
        }),
    };
    let table = match table_path {
        None => None,
        Some(path) => {
            let text = match read_file(&path) {
                Ok(text) => text,
                Err(code) => return code,
            };
            match CostTable::parse(&text) {
                Ok(table) => Some(table),
                Err(err) => {
                    eprintln!("error: {}: {err}", path.display());
                    return ExitCode::from(EXIT_VALIDATION);
                }
            }
        }
    };

    let states = match parse_states(cost_states) {
        Ok(states) => states,
        Err(code) => return code,
    };

    let opts = RunOptions {
        cost_table: table,
        cost_states: states,
    };
    let artifacts = match execute(&scenario, &opts) {
        Ok(artifacts) => artifacts,
        Err(err) => {
            eprintln!("error: {err}");
            // a diverging integration is a numerical failure, not bad input
            let code = match &err {
                RunError::Dynamics(DynamicsError::NonFinite { .. }) => EXIT_DIAGNOSTIC,
                _ => EXIT_VALIDATION,
            };
            return ExitCode::from(code);
        }
    };

    if let Err(err) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {err}", out_dir.display());
        return ExitCode::from(EXIT_IO);
    }
    for file in &artifacts.files {
        let path = out_dir.join(&file.name);
        if let Err(err) = std::fs::write(&path, &file.contents) {
            eprintln!("error: cannot write {}: {err}", path.display());
            return ExitCode::from(EXIT_IO);
        }
    }
    if !quiet {
        print!("{}", artifacts.summary);
    }
    if artifacts.diagnostics.is_empty() {
        ExitCode::SUCCESS
    } else {
        for diagnostic in &artifacts.diagnostics {
            eprintln!("warning: {diagnostic}");
        }
        ExitCode::from(EXIT_DIAGNOSTIC)
    }
}

#[derive(serde::Serialize)]
struct PartitionOutput {
    sets: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    states: Option<BTreeMap<String, NodeReport>>,
}

#[derive(serde::Serialize)]
struct NodeReport {
    weight: f64,
    state: String,
}

fn partition_command(
    graph_path: &Path,
    t1: f64,
    t2: f64,
    tree_path: Option<&Path>,
    json: bool,
) -> ExitCode {
    // reject bad thresholds up front, weights or not
    if let Err(err) = classify_node(0.0, t1, t2) {
        eprintln!("error: {err}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let source = match read_file(graph_path) {
        Ok(text) => text,
        Err(code) => return code,
    };
    let net = match Network::parse(&source) {
        Ok(net) => net,
        Err(err) => {
            eprintln!("error: {}: {err}", graph_path.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let depths = net.compute_depths();
    let partition = net.partition_diffusion_sets(&depths);

    // Weights: a tree file takes precedence over weight directives.
    let weights: Option<BTreeMap<String, f64>> = match tree_path {
        Some(path) => {
            let text = match read_file(path) {
                Ok(text) => text,
                Err(code) => return code,
            };
            let parents = match parse_tree(&text) {
                Ok(parents) => parents,
                Err(err) => {
                    eprintln!("error: {}: {err}", path.display());
                    return ExitCode::from(EXIT_VALIDATION);
                }
            };
            match tree_interference(&net, &parents) {
                Ok(counts) => Some(
                    counts
                        .into_iter()
                        .map(|(node, count)| (node.to_string(), f64::from(count)))
                        .collect(),
                ),
                Err(err) => {
                    eprintln!("error: {}: {err}", path.display());
                    return ExitCode::from(EXIT_VALIDATION);
                }
            }
        }
        None => {
            if net.explicit_weights().next().is_some() {
                Some(
                    net.nodes()
                        .map(|n| (n.to_string(), net.weight(n)))
                        .collect(),
                )
            } else {
                None
            }
        }
    };

    let states: Option<BTreeMap<String, NodeReport>> = match &weights {
        None => None,
        Some(map) => {
            let mut out = BTreeMap::new();
            for (node, weight) in map {
                match classify_node(*weight, t1, t2) {
                    Ok(state) => {
                        out.insert(
                            node.clone(),
                            NodeReport {
                                weight: *weight,
                                state: state.to_string(),
                            },
                        );
                    }
                    Err(err) => {
                        eprintln!("error: {err}");
                        return ExitCode::from(EXIT_VALIDATION);
                    }
                }
            }
            Some(out)
        }
    };

    if json {
        let output = PartitionOutput {
            sets: partition
                .sets()
                .iter()
                .map(|set| set.iter().map(ToString::to_string).collect())
                .collect(),
            states,
        };
        println!(
            "{}",
            serde_json::to_string_pretty(&output).expect("serialisable")
        );
    } else {
        for (pos, set) in partition.sets().iter().enumerate() {
            let members: Vec<String> = set.iter().map(ToString::to_string).collect();
            println!("I{}: {{{}}}", pos + 1, members.join(", "));
        }
        if let Some(states) = &states {
            println!("states (t1={t1}, t2={t2}):");
            for (node, report) in states {
                println!("  {node}: {} (weight {})", report.state, report.weight);
            }
        }
    }
    ExitCode::SUCCESS
}
