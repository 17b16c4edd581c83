use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bilap::conditions::{
    cb_to_yr, certify, preset_conditions, yr_to_cb, ConditionError, ConditionPreset, ConditionYR,
};
use bilap::discrete::{
    bilaplacian_closed_form, discrete_semigroup, discrete_transition_time, linf_generator_row_condition,
    lp_dissipativity_scan, markov_character, spectral_gap_bounds_check, DiscreteEvolver,
};
use bilap::fem::{
    assemble, eigensolve, evolve, kernel_dimension, kernel_sup_bound, spectral_data, FemEvolver, Mesh,
    ReducedSystem,
};
use bilap::graph::{preset_graph, MetricGraph, PresetKind};
use bilap::io::{
    condition_cb_to_json, condition_yr_to_json, csv_document, json_document, parse_condition_json,
    parse_graph_json, parse_time_grid, parse_tolerance, spectrum_rows, trajectory_rows, write_file,
    ConditionInput, IoError, ParsedGraph, RunConfig,
};
use bilap::qualitative::{classify, last_sign_change, loglog_slope, TransitionOptions};
use bilap::reproduce::{format_line, identity_crossing_note, run_all, transition_growth};
use bilap::Error;

#[derive(Parser, Debug)]
#[command(name = "bilap", version, about = "Bi-Laplacians on graphs and metric networks")]
struct Cli {
    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for output files; stdout only when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance override, NAME=VALUE (repeatable).
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// The discrete operator L^2 on a combinatorial graph.
    #[command(subcommand)]
    Discrete(DiscreteCommand),
    /// The bi-Laplacian on a metric graph, discretised by finite elements.
    #[command(subcommand)]
    Metric(MetricCommand),
    /// Vertex condition checks and conversions.
    #[command(subcommand)]
    Conditions(ConditionsCommand),
    /// Runs the acceptance battery and prints a pass/fail table.
    ReproducePaper,
}

#[derive(Args, Debug, Clone)]
struct GraphArg {
    /// Graph JSON file, or a built-in `kind:n` (path, cycle, complete, star, flower).
    #[arg(long)]
    graph: String,
}

#[derive(Subcommand, Debug)]
enum DiscreteCommand {
    /// Semigroup matrix at time t with positivity and contractivity flags.
    Check {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value_t = 0.1)]
        t: f64,
        /// Time grid a:b:n for the completeness comparison.
        #[arg(long, default_value = "0.001:10:13")]
        times: String,
    },
    /// Solution from an initial vector, with its transition time.
    Evolve {
        #[command(flatten)]
        graph: GraphArg,
        /// Comma-separated initial values, one per vertex.
        #[arg(long)]
        f0: String,
        #[arg(long, default_value = "0.01:10:20")]
        times: String,
    },
    /// Searches for l^p-dissipativity witnesses.
    Scan {
        #[command(flatten)]
        graph: GraphArg,
        /// Comma-separated exponents, scanned in ascending order.
        #[arg(long, default_value = "3,4,5,6,7,8")]
        p: String,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Spectral gap against its lower and upper bounds.
    Gap {
        #[command(flatten)]
        graph: GraphArg,
    },
}

#[derive(Args, Debug, Clone)]
struct MetricArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[command(flatten)]
    condition: ConditionArg,
    /// Elements per edge.
    #[arg(long, default_value_t = 16)]
    mesh: usize,
}

#[derive(Args, Debug, Clone)]
#[group(required = false, multiple = false)]
struct ConditionArg {
    /// Named vertex condition (sliding_kirchhoff, cont_deriv, cont_free, friedrichs, krein).
    #[arg(long)]
    preset: Option<String>,
    /// Condition JSON: a preset document or {"Y_basis", "R"}.
    #[arg(long)]
    yr: Option<PathBuf>,
    /// Condition JSON {"C", "B"}.
    #[arg(long)]
    cb: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum MetricCommand {
    /// Lowest eigenvalues.
    Spectrum {
        #[command(flatten)]
        args: MetricArgs,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Dimension of the kernel.
    Kernel {
        #[command(flatten)]
        args: MetricArgs,
    },
    /// Solution from an initial profile.
    Evolve {
        #[command(flatten)]
        args: MetricArgs,
        /// `bump:c:w` (on edge 0) or `const:v`.
        #[arg(long, default_value = "bump:0.2:0.05")]
        f0: String,
        #[arg(long, default_value = "0.0001:1:20")]
        times: String,
        /// Also compute the transition time to nonnegativity.
        #[arg(long)]
        transition: bool,
    },
    /// Eventual positivity verdict.
    Classify {
        #[command(flatten)]
        args: MetricArgs,
    },
    /// Heat kernel sup bound over time and its log-log slope.
    Ultra {
        #[command(flatten)]
        args: MetricArgs,
        #[arg(long, default_value = "0.0001:0.01:21")]
        times: String,
    },
}

#[derive(Subcommand, Debug)]
enum ConditionsCommand {
    /// Self-adjointness certificate.
    Verify {
        /// Needed for presets only.
        #[arg(long)]
        graph: Option<String>,
        #[command(flatten)]
        condition: ConditionArg,
    },
    /// Converts (Y, R) to (C, B) and back.
    Convert {
        #[arg(long)]
        graph: Option<String>,
        #[command(flatten)]
        condition: ConditionArg,
    },
}

fn load_graph(spec: &str) -> Result<ParsedGraph, Error> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some((kind, n)) = spec.split_once(':') {
            if let (Ok(kind), Ok(n)) = (kind.parse::<PresetKind>(), n.parse::<usize>()) {
                return Ok(ParsedGraph::Combinatorial(preset_graph(kind, n)?));
            }
        }
    }
    Ok(parse_graph_json(path)?)
}

fn load_metric(spec: &str) -> Result<MetricGraph, Error> {
    Ok(load_graph(spec)?.into_metric()?)
}

fn parse_list(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| IoError::SchemaError(format!("'{s}' is not a number")).into())
        })
        .collect()
}

enum Loaded {
    YR(ConditionYR),
    CB(bilap::conditions::ConditionCB),
}

fn load_condition(arg: &ConditionArg, graph: Option<&MetricGraph>) -> Result<Loaded, Error> {
    let need_graph = || {
        graph.ok_or_else(|| {
            Error::from(IoError::SchemaError("a preset condition needs --graph".into()))
        })
    };
    if let Some(name) = &arg.preset {
        let preset = ConditionPreset::from_name(name)?;
        return Ok(Loaded::YR(preset_conditions(need_graph()?, &preset)?));
    }
    let input = match (&arg.yr, &arg.cb) {
        (Some(p), _) | (None, Some(p)) => parse_condition_json(p)?,
        (None, None) => {
            return Ok(Loaded::YR(preset_conditions(need_graph()?, &ConditionPreset::SlidingKirchhoff)?));
        }
    };
    Ok(match input {
        ConditionInput::Preset(p) => Loaded::YR(preset_conditions(need_graph()?, &p)?),
        ConditionInput::YR(c) => Loaded::YR(c),
        ConditionInput::CB(c) => Loaded::CB(c),
    })
}

fn condition_yr(arg: &ConditionArg, graph: &MetricGraph) -> Result<ConditionYR, Error> {
    match load_condition(arg, Some(graph))? {
        Loaded::YR(c) => Ok(c),
        Loaded::CB(c) => Ok(cb_to_yr(&c)?),
    }
}

fn condition_label(arg: &ConditionArg) -> Option<String> {
    arg.preset
        .clone()
        .or_else(|| arg.yr.as_ref().map(|p| format!("yr:{}", p.display())))
        .or_else(|| arg.cb.as_ref().map(|p| format!("cb:{}", p.display())))
}

struct Output {
    name: &'static str,
    text: String,
    summary: String,
}

fn metric_system(args: &MetricArgs, config: &mut RunConfig) -> Result<ReducedSystem, Error> {
    config.graph = Some(args.graph.graph.clone());
    config.condition = condition_label(&args.condition).or(Some("sliding_kirchhoff".into()));
    config.mesh = Some(args.mesh);
    let g = load_metric(&args.graph.graph)?;
    let cond = condition_yr(&args.condition, &g)?;
    Ok(assemble(&g, &Mesh::uniform(g.edge_count(), args.mesh)?, &cond)?)
}

fn initial_profile(spec: &str) -> Result<Box<dyn Fn(usize, f64) -> f64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::from(IoError::SchemaError(format!("unknown initial profile '{spec}'")));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        ["bump", c, w] => Ok(Box::new(bilap::reproduce::bump(num(c)?, num(w)?))),
        ["const", v] => {
            let v = num(v)?;
            Ok(Box::new(move |_, _| v))
        }
        _ => Err(bad()),
    }
}

fn run_discrete(cmd: &DiscreteCommand, config: &mut RunConfig) -> Result<Output, Error> {
    match cmd {
        DiscreteCommand::Check { graph, t, times } => {
            config.command = "discrete check".into();
            config.graph = Some(graph.graph.clone());
            config.times = Some(times.clone());
            let g = load_graph(&graph.graph)?;
            let op = bilaplacian_closed_form(g.graph());
            let s = discrete_semigroup(&op, *t)?;
            let report = markov_character(g.graph(), &parse_time_grid(times)?)?;
            let rows: Vec<Vec<f64>> = s.row_iter().map(|r| r.iter().cloned().collect()).collect();
            let summary = format!(
                "complete: {}, positive on grid: {}, l-inf contractive: {}, rows passing: {:?}",
                report.is_complete,
                report.positive_all_t,
                report.linf_contractive,
                linf_generator_row_condition(op.matrix())
            );
            let result = json!({ "t": t, "semigroup": rows, "markov": report });
            Ok(Output { name: "check.json", text: json_document(config, &result), summary })
        }
        DiscreteCommand::Evolve { graph, f0, times } => {
            config.command = "discrete evolve".into();
            config.graph = Some(graph.graph.clone());
            config.times = Some(times.clone());
            let g = load_graph(&graph.graph)?;
            let f0 = parse_list(f0)?;
            let ev = DiscreteEvolver::new(g.graph(), &f0)?;
            let mut rows = Vec::new();
            for t in parse_time_grid(times)? {
                for (v, x) in ev.state(t).iter().enumerate() {
                    rows.push(vec![format!("{t:e}"), v.to_string(), format!("{x:e}")]);
                }
            }
            let summary = match discrete_transition_time(g.graph(), &f0, config.tol("transition", 1e-12)) {
                Ok(r) => format!("transition time t* = {:.6}", r.t_star),
                Err(e) => format!("no transition time: {e}"),
            };
            Ok(Output {
                name: "trajectory.csv",
                text: csv_document(config, &["t", "node", "value"], &rows)?,
                summary,
            })
        }
        DiscreteCommand::Scan { graph, p, trials } => {
            config.command = "discrete scan".into();
            config.graph = Some(graph.graph.clone());
            let g = load_graph(&graph.graph)?;
            let mut grid = parse_list(p)?;
            grid.sort_by(f64::total_cmp);
            let out = lp_dissipativity_scan(g.graph(), &grid, *trials, config.seed);
            let summary = match &out.witness {
                Some(w) => format!("witness at p = {} with kappa = {:.3e}", w.p, w.kappa),
                None => "no counterexample found".to_string(),
            };
            Ok(Output { name: "scan.json", text: json_document(config, &out), summary })
        }
        DiscreteCommand::Gap { graph } => {
            config.command = "discrete gap".into();
            config.graph = Some(graph.graph.clone());
            let g = load_graph(&graph.graph)?;
            let r = spectral_gap_bounds_check(g.graph());
            let summary = format!("{} <= lambda_2 = {} <= {}: {}", r.lower, r.lambda2, r.upper, r.within);
            Ok(Output { name: "gap.json", text: json_document(config, &r), summary })
        }
    }
}

fn run_metric(cmd: &MetricCommand, config: &mut RunConfig) -> Result<Output, Error> {
    match cmd {
        MetricCommand::Spectrum { args, count } => {
            config.command = "metric spectrum".into();
            let sys = metric_system(args, config)?;
            let k = (*count).min(sys.reduced_dim());
            let eig = eigensolve(&sys, Some(k))?;
            let values: Vec<f64> = eig.values.iter().cloned().collect();
            Ok(Output {
                name: "spectrum.csv",
                text: csv_document(config, &["index", "eigenvalue"], &spectrum_rows(&values))?,
                summary: format!("{k} eigenvalues, lowest {:.6e}", values.first().copied().unwrap_or(f64::NAN)),
            })
        }
        MetricCommand::Kernel { args } => {
            config.command = "metric kernel".into();
            let sys = metric_system(args, config)?;
            let eig = eigensolve(&sys, None)?;
            let dim = kernel_dimension(&eig)?;
            let shown: Vec<f64> = eig.values.iter().take(dim + 3).cloned().collect();
            let result = json!({ "kernel_dimension": dim, "lowest_eigenvalues": shown, "noise": eig.noise });
            Ok(Output {
                name: "kernel.json",
                text: json_document(config, &result),
                summary: format!("kernel dimension {dim}"),
            })
        }
        MetricCommand::Evolve { args, f0, times, transition } => {
            config.command = "metric evolve".into();
            config.times = Some(times.clone());
            let sys = metric_system(args, config)?;
            let eig = eigensolve(&sys, None)?;
            let profile = initial_profile(f0)?;
            let traj = evolve(&sys, &eig, &*profile, &parse_time_grid(times)?)?;
            let mut summary = format!("{} times x {} nodes", traj.times.len(), traj.nodes.len());
            if *transition {
                let ev = FemEvolver::new(&sys, &eig, &*profile);
                let r = last_sign_change(&ev, config.tol("transition", 1e-10), &TransitionOptions::default())?;
                summary.push_str(&format!(", transition time t* = {:.6e}", r.t_star));
                if let Some(dir) = &config.out {
                    let rows: Vec<Vec<String>> =
                        r.samples.iter().map(|(t, m)| vec![format!("{t:e}"), format!("{m:e}")]).collect();
                    write_file(Path::new(dir), "transition.csv", &csv_document(config, &["t", "min_value"], &rows)?)?;
                }
            }
            Ok(Output {
                name: "trajectory.csv",
                text: csv_document(config, &["t", "node", "value"], &trajectory_rows(&traj))?,
                summary,
            })
        }
        MetricCommand::Classify { args } => {
            config.command = "metric classify".into();
            let sys = metric_system(args, config)?;
            let eig = eigensolve(&sys, None)?;
            let c = classify(&spectral_data(&sys, &eig), config.tol("sign", 1e-9), config.seed)?;
            Ok(Output {
                name: "classification.json",
                summary: format!("verdict: {}", c.verdict.name()),
                text: json_document(config, &c),
            })
        }
        MetricCommand::Ultra { args, times } => {
            config.command = "metric ultra".into();
            config.times = Some(times.clone());
            let sys = metric_system(args, config)?;
            let eig = eigensolve(&sys, None)?;
            let samples = parse_time_grid(times)?
                .into_iter()
                .map(|t| kernel_sup_bound(&sys, &eig, t).map(|k| (t, k)))
                .collect::<Result<Vec<_>, _>>()?;
            let rows: Vec<Vec<String>> =
                samples.iter().map(|(t, k)| vec![format!("{t:e}"), format!("{k:e}")]).collect();
            Ok(Output {
                name: "ultra.csv",
                text: csv_document(config, &["t", "sup_bound"], &rows)?,
                summary: format!("log-log slope {:.4}", loglog_slope(&samples)),
            })
        }
    }
}

fn run_conditions(cmd: &ConditionsCommand, config: &mut RunConfig) -> Result<Output, Error> {
    let (graph, condition, verify) = match cmd {
        ConditionsCommand::Verify { graph, condition } => (graph, condition, true),
        ConditionsCommand::Convert { graph, condition } => (graph, condition, false),
    };
    config.command = if verify { "conditions verify" } else { "conditions convert" }.into();
    config.graph = graph.clone();
    config.condition = condition_label(condition);
    let metric = graph.as_deref().map(load_metric).transpose()?;
    let loaded = load_condition(condition, metric.as_ref())?;
    if verify {
        let yr = match loaded {
            Loaded::YR(c) => c,
            Loaded::CB(c) => {
                c.check_self_adjoint(config.tol("hermitian", 1e-10))?;
                cb_to_yr(&c)?
            }
        };
        let cert = certify(&yr)?;
        let ok = cert.passes(1e-9, 1e-9);
        let summary = format!(
            "rank {}/{}, Hermiticity defect {:.1e}, roundtrip angle {:.1e}: {}",
            cert.rank,
            cert.trace_dim,
            cert.hermiticity_defect,
            cert.roundtrip_angle,
            if ok { "self-adjoint" } else { "NOT self-adjoint" }
        );
        if !ok {
            return Err(ConditionError::NotSelfAdjoint(summary).into());
        }
        let result = json!({ "certificate": cert, "dim_Y": yr.dim_y(), "dissipative": yr.is_dissipative() });
        Ok(Output { name: "verify.json", text: json_document(config, &result), summary })
    } else {
        let (result, summary) = match loaded {
            Loaded::YR(c) => {
                let cb = yr_to_cb(&c);
                (condition_cb_to_json(&cb), format!("(Y, R) with dim Y = {} converted to (C, B)", c.dim_y()))
            }
            Loaded::CB(c) => {
                let yr = cb_to_yr(&c)?;
                (condition_yr_to_json(&yr), format!("(C, B) converted to (Y, R) with dim Y = {}", yr.dim_y()))
            }
        };
        Ok(Output { name: "converted.json", text: json_document(config, &result), summary })
    }
}

fn run(cli: &Cli) -> Result<Option<Output>, Error> {
    let mut config = RunConfig::new("");
    config.seed = cli.seed;
    config.out = cli.out.as_ref().map(|p| p.display().to_string());
    for t in &cli.tol {
        let (name, value) = parse_tolerance(t)?;
        config.tolerances.insert(name, value);
    }
    let output = match &cli.command {
        Command::Discrete(c) => run_discrete(c, &mut config)?,
        Command::Metric(c) => run_metric(c, &mut config)?,
        Command::Conditions(c) => run_conditions(c, &mut config)?,
        Command::ReproducePaper => return Ok(None),
    };
    if let Some(dir) = &cli.out {
        write_file(dir, output.name, &output.text)?;
    }
    Ok(Some(output))
}

fn reproduce(cli: &Cli) -> ExitCode {
    let mut config = RunConfig::new("reproduce-paper");
    config.seed = cli.seed;
    let results = run_all();
    for r in &results {
        println!("{}", format_line(r));
    }
    match identity_crossing_note() {
        Ok(note) => println!("note: {note}"),
        Err(e) => println!("note: identity probe failed: {e}"),
    }
    if let Ok(growth) = transition_growth(8) {
        println!("experiment: path transition times (n, t*): {growth:?}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    if let Some(dir) = &cli.out {
        if let Err(e) = write_file(dir, "reproduce.json", &json_document(&config, &results)) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::ReproducePaper) {
        return reproduce(&cli);
    }
    match run(&cli) {
        Ok(Some(out)) => {
            print!("{}", out.text);
            if !out.text.ends_with('\n') {
                println!();
            }
            eprintln!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
