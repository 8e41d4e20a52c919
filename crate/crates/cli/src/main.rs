mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};
use thiserror::Error;

use carat_core::atombill::{FileProvider, HttpProvider, MappingCache, MappingError, MappingProvider};
use carat_core::pipeline::{self, PipelineError, Trace, TraceOptions};
use carat_core::report::{compare, scenario_override, write_comparison_csv, Override, ScenarioError};
use carat_core::valuechain::{
    load_graph, read_csv, Bundle, Diagnostic, GraphError, InletAttributeTable, InletError, InletRecord, LoadOptions,
    ValueChainGraph,
};

use config::{ConfigError, FileConfig, Inputs, Mapper, RunArgs, RunConfig};

/// Slack below this counts as zero for the exit status.
const SLACK_ZERO: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "carat", version, about = "Trace elemental attributes through a chemical value chain")]
struct Cli {
    /// TOML file with defaults for any flag
    #[arg(long, global = true, env = "CARAT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the graph and list diagnostics
    Validate(RunArgs),
    /// Build reaction strings and fill the mapping cache
    Map {
        #[command(flatten)]
        run: RunArgs,
        /// Write unmapped strings still lacking a mapping to this CSV
        #[arg(long)]
        pending: Option<PathBuf>,
    },
    /// Run the full pipeline and write all outputs
    Trace(RunArgs),
    /// Trace with inlet overrides and compare against the base run
    Scenario {
        #[command(flatten)]
        run: RunArgs,
        /// c,p,smiles,attribute,share (repeatable)
        #[arg(long = "override")]
        overrides: Vec<String>,
        /// Subdirectory of --out for this scenario
        #[arg(long)]
        name: Option<String>,
    },
    /// Write outputs and print the ranked slack list without gating on slack
    Report(RunArgs),
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Inlet(#[from] InletError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let io_graph = |g: &GraphError| matches!(g, GraphError::Io { .. } | GraphError::Schema { .. });
        let io_mapping = |m: &MappingError| {
            matches!(m, MappingError::Io { .. } | MappingError::Format { .. } | MappingError::Transport(_))
        };
        let io = match self {
            CliError::Config(_) => true,
            CliError::Graph(g) => io_graph(g),
            CliError::Mapping(m) => io_mapping(m),
            CliError::Pipeline(PipelineError::Graph(g)) => io_graph(g),
            CliError::Pipeline(PipelineError::Mapping(m)) => io_mapping(m),
            _ => false,
        };
        if io {
            2
        } else {
            1
        }
    }
}

struct Loaded {
    graph: ValueChainGraph,
    warnings: Vec<Diagnostic>,
    inlet: Option<Vec<InletRecord>>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let (bom, bos, mix, bundled_inlet) = match &cfg.inputs {
        Inputs::Bundle(path) => {
            let b = Bundle::read(path)?;
            let inlet = (!b.inlet.is_empty()).then_some(b.inlet);
            (b.bom, b.bos, b.mix, inlet)
        }
        Inputs::Tables { bom, bos, mix } => {
            let mix = match mix {
                Some(p) => read_csv(p)?,
                None => Vec::new(),
            };
            (read_csv(bom)?, read_csv(bos)?, mix, None)
        }
    };
    let inlet = match &cfg.inlet {
        Some(p) => Some(read_csv(p)?),
        None => bundled_inlet,
    };
    let loaded = load_graph(&bom, &bos, &mix, LoadOptions::default())?;
    Ok(Loaded { graph: loaded.graph, warnings: loaded.warnings, inlet })
}

fn inlet_table(loaded: &Loaded) -> Result<InletAttributeTable, CliError> {
    match &loaded.inlet {
        Some(rows) => Ok(InletAttributeTable::from_records(rows)?),
        None => Err(ConfigError::Invalid("no inlet table: pass --inlet or a bundle with inlet rows".into()).into()),
    }
}

fn provider(cfg: &RunConfig) -> Result<Option<Box<dyn MappingProvider>>, CliError> {
    Ok(match &cfg.mapper {
        None => None,
        Some(Mapper::File(p)) => Some(Box::new(FileProvider::open(p)?)),
        Some(Mapper::Http(url)) => Some(Box::new(HttpProvider::new(url)?)),
    })
}

fn options(cfg: &RunConfig) -> TraceOptions {
    TraceOptions {
        elements: cfg.elements.clone(),
        attributes: cfg.attributes.clone(),
        threshold: cfg.threshold,
        ..TraceOptions::default()
    }
}

fn run_trace(cfg: &RunConfig, loaded: &Loaded, inlets: &InletAttributeTable) -> Result<Trace, CliError> {
    for w in &loaded.warnings {
        warn!("{w}");
    }
    let cache_path = cfg.cache_path();
    let cache = MappingCache::load(&cache_path)?;
    let provider = provider(cfg)?;
    let before = cache.len();
    let result = pipeline::trace(&loaded.graph, inlets, &cache, provider.as_deref(), &options(cfg));
    if cache.len() != before {
        cache.save(&cache_path)?;
        info!("mapping cache {} now holds {} reaction(s)", cache_path.display(), cache.len());
    }
    Ok(result?)
}

fn headline_attribute(cfg: &RunConfig) -> Option<&str> {
    cfg.attributes.iter().find(|a| a.as_str() == "biogenic").map(String::as_str)
}

/// Writes outputs, prints headlines; returns whether the run counts as clean.
fn finish(cfg: &RunConfig, trace: &Trace, dir: &Path) -> Result<bool, CliError> {
    let attribute = headline_attribute(cfg).unwrap_or(&cfg.attributes[cfg.attributes.len() - 1]);
    let element = cfg.elements.iter().find(|e| e.as_str() == "C").unwrap_or(&cfg.elements[0]);
    for w in trace.write_outputs(dir, attribute, element)? {
        warn!("{w}");
    }
    if headline_attribute(cfg).is_some() && element == "C" {
        for h in trace.headlines(attribute, element) {
            println!("{}", h.line("BCC"));
        }
    } else {
        for h in trace.headlines(attribute, element) {
            println!("{}", h.line(&format!("{attribute}:{element}")));
        }
    }
    let sol = &trace.solution;
    println!("status: {}, total slack: {:.3e}", sol.status, sol.total_slack.max(0.0));
    Ok(sol.is_optimal() && sol.total_slack < SLACK_ZERO)
}

fn cmd_validate(cfg: &RunConfig) -> Result<bool, CliError> {
    let loaded = match load_inputs(cfg) {
        Err(CliError::Graph(e @ (GraphError::DanglingReference(_) | GraphError::DuplicateDefinition(_)))) => {
            println!("error [load] {e}");
            return Ok(false);
        }
        other => other?,
    };
    let mut diags = loaded.warnings.clone();
    diags.extend(loaded.graph.validate());
    let mut ok = !diags.iter().any(Diagnostic::is_error);
    for d in &diags {
        println!("{d}");
    }
    if loaded.inlet.is_some() {
        if let Err(e) = inlet_table(&loaded) {
            println!("error [inlet] {e}");
            ok = false;
        }
    }
    println!(
        "{} mix node(s), {} production node(s), {} edge(s); {}",
        loaded.graph.mix_nodes().len(),
        loaded.graph.bills().len(),
        loaded.graph.edges().len(),
        if ok { "ok" } else { "errors found" }
    );
    Ok(ok)
}

fn cmd_map(cfg: &RunConfig, pending: Option<&Path>) -> Result<bool, CliError> {
    let loaded = load_inputs(cfg)?;
    let (graph, _) = pipeline::prepare_graph(&loaded.graph, cfg.threshold)?;
    let requests = pipeline::reaction_requests(&graph, &options(cfg))?;
    let cache_path = cfg.cache_path();
    let cache = MappingCache::load(&cache_path)?;
    let texts: Vec<String> = requests.iter().map(|r| r.text.clone()).collect();
    if let Some(p) = provider(cfg)? {
        match cache.resolve(p.as_ref(), &texts) {
            Ok(_) | Err(MappingError::Missing(_)) => {}
            Err(e) => return Err(e.into()),
        }
        cache.save(&cache_path)?;
    }
    let mut missing: Vec<&str> = Vec::new();
    for r in &requests {
        let state = if cache.get(&r.text).is_some() { "mapped" } else { "missing" };
        if state == "missing" && !missing.contains(&r.text.as_str()) {
            missing.push(&r.text);
        }
        println!("{}\t{}\t{state}\t{}", r.node, r.product, r.text);
    }
    if let Some(path) = pending {
        let mut text = String::from("unmapped,mapped\n");
        for m in &missing {
            text.push_str(&format!("{m},\n"));
        }
        std::fs::write(path, text).map_err(|e| ConfigError::File { path: path.to_path_buf(), message: e.to_string() })?;
    }
    println!("{} reaction(s), {} missing", requests.len(), missing.len());
    Ok(missing.is_empty())
}

fn cmd_trace(cfg: &RunConfig) -> Result<bool, CliError> {
    let loaded = load_inputs(cfg)?;
    let inlets = inlet_table(&loaded)?;
    let trace = run_trace(cfg, &loaded, &inlets)?;
    finish(cfg, &trace, &cfg.out)
}

fn cmd_scenario(cfg: &RunConfig, overrides: &[String], name: &str) -> Result<bool, CliError> {
    let loaded = load_inputs(cfg)?;
    let base_inlets = inlet_table(&loaded)?;
    let parsed: Vec<Override> = overrides.iter().map(|o| o.parse()).collect::<Result<_, _>>()?;
    let inlets = scenario_override(&loaded.graph, &base_inlets, &parsed)?;
    let base = run_trace(cfg, &loaded, &base_inlets)?;
    let scenario = run_trace(cfg, &loaded, &inlets)?;
    let dir = cfg.out.join(name);
    let ok = finish(cfg, &scenario, &dir)?;
    let path = dir.join("comparison.csv");
    write_comparison_csv(&path, &compare(&base.solution, &scenario.solution))?;
    Ok(ok)
}

fn cmd_report(cfg: &RunConfig) -> Result<bool, CliError> {
    let loaded = load_inputs(cfg)?;
    let inlets = inlet_table(&loaded)?;
    let trace = run_trace(cfg, &loaded, &inlets)?;
    finish(cfg, &trace, &cfg.out)?;
    for d in &trace.diagnostics {
        println!("{d}");
    }
    let report = trace.solution.slack_report();
    if report.is_empty() {
        println!("no slack");
    }
    for e in report {
        println!("{:.6e}\tz={:.6e}\tq={:.6e}\t{}", e.magnitude, e.z, e.q, e.location);
    }
    Ok(trace.solution.is_optimal())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Validate(args) => cmd_validate(&RunConfig::resolve(args, file)?),
        Command::Map { run, pending } => cmd_map(&RunConfig::resolve(run, file)?, pending.as_deref()),
        Command::Trace(args) => cmd_trace(&RunConfig::resolve(args, file)?),
        Command::Scenario { run, overrides, name } => {
            let cfg = RunConfig::resolve(run, file)?;
            let overrides = if overrides.is_empty() { cfg.overrides.clone() } else { overrides };
            let name = name.unwrap_or_else(|| cfg.scenario.clone());
            cmd_scenario(&cfg, &overrides, &name)
        }
        Command::Report(args) => cmd_report(&RunConfig::resolve(args, file)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
