use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use algcon::classify::{i_primary_certificate, pd_primary_certificate, CoreRef};
use algcon::constraint::{CovarianceMatrix, GraphicalConstraint};
use algcon::construct::derive_constraint;
use algcon::error::{Error, Result};
use algcon::graph::{MixedGraph, Name};
use algcon::htc::{constraint_pairs, find_identifying_family, IdentifyingFamily};
use algcon::oracle::vanishing_battery;
use algcon::poly::{Polynomial, DEFAULT_EXPANSION_CAP};
use algcon::search::{match_target, Bounds, MatchMode, Target};
use algcon::study::{
    census, codimension, interpolate_generator, report_render, CensusConfig, EdgeMode,
    FamilyChoice, ReportFormat,
};
use algcon::transform::{product_fingerprint, simplify, simplify_all_orders};

#[derive(Parser)]
#[command(name = "algcon", version, about = "Graphical constraints of linear structural equation models")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Edges {
    Exact,
    AtLeast,
}

#[derive(Clone, Copy, ValueEnum)]
enum Families {
    Parents,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Derive graphical constraints of a graph.
    Derive {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        family: Option<PathBuf>,
        /// Restrict to one pair, as `v,w`.
        #[arg(long)]
        pair: Option<String>,
    },
    /// Test a constraint on model and generic covariance matrices.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        constraint: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Also evaluate the constraint at this covariance matrix.
        #[arg(long)]
        covariance: Option<PathBuf>,
    },
    /// Remove spurious factors from a constraint.
    Transform {
        #[arg(long)]
        constraint: PathBuf,
        /// Report every fixpoint reachable in any rewrite order.
        #[arg(long)]
        all_orders: bool,
        #[arg(long, default_value_t = 64)]
        limit: usize,
    },
    /// Certify the ideal generated by the derived constraints.
    Classify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        family: Option<PathBuf>,
        /// Reference constraint; by default the generator of the model.
        #[arg(long)]
        core: Option<PathBuf>,
        #[arg(long, default_value_t = 14)]
        max_degree: u32,
    },
    /// Find graphical constraints with a given determinant.
    Search {
        /// Polynomial in the form `+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]`.
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_delimiter = ',')]
        vars: Vec<String>,
        #[arg(long, default_value_t = 6)]
        max_slots: usize,
        #[arg(long, default_value_t = 6)]
        max_nodes: usize,
        #[arg(long)]
        trees_only: bool,
        /// Accept matches off by a constant factor.
        #[arg(long)]
        up_to_scalar: bool,
    },
    /// Group all graphs of a size into algebraic equivalence classes.
    Census {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        edges: usize,
        #[arg(long, value_enum, default_value_t = Edges::Exact)]
        edge_mode: Edges,
        #[arg(long)]
        bow_free: bool,
        #[arg(long)]
        acyclic: bool,
        #[arg(long, value_enum, default_value_t = Families::All)]
        families: Families,
        #[arg(long, default_value_t = 32)]
        family_limit: usize,
        #[arg(long, default_value_t = 14)]
        max_degree: u32,
        /// Search for graphical forms with at most this many slots.
        #[arg(long)]
        search_slots: Option<usize>,
        /// Stop after this many graphs up to isomorphism.
        #[arg(long)]
        budget: Option<usize>,
        /// JSON-lines file for resuming an interrupted run.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn load_graph(path: &Path) -> Result<MixedGraph> {
    MixedGraph::parse(&read(path)?)
}

fn load_family(g: &MixedGraph, path: Option<&Path>) -> Result<IdentifyingFamily> {
    match path {
        Some(p) => IdentifyingFamily::from_json(g, &read(p)?),
        None => find_identifying_family(g)
            .ok_or_else(|| Error::InvalidFamily("graph is not half-trek identifiable".into())),
    }
}

fn print_constraint(gc: &GraphicalConstraint, format: Format) {
    match format {
        Format::Json => println!("{}", gc.to_json()),
        Format::Text => println!("{}\n", gc.render_text()),
    }
}

fn print_value(v: &serde_json::Value, format: Format) {
    match format {
        Format::Json => println!("{v}"),
        Format::Text => println!("{}", serde_json::to_string_pretty(v).expect("value serializes")),
    }
}

/// Runs the command; `Ok(false)` when an internal check failed.
fn run(cli: &Cli) -> Result<bool> {
    let seed = cli.seed;
    match &cli.command {
        Command::Derive {
            graph,
            family,
            pair,
        } => {
            let g = load_graph(graph)?;
            let fam = load_family(&g, family.as_deref())?;
            let pairs = match pair {
                Some(p) => {
                    let (v, w) = p
                        .split_once(',')
                        .ok_or_else(|| Error::Unsupported(format!("pair `{p}` is not `v,w`")))?;
                    vec![(g.index(v.trim())?, g.index(w.trim())?)]
                }
                None => constraint_pairs(&g, &fam),
            };
            for p in pairs {
                print_constraint(&derive_constraint(&g, &fam, p)?, cli.format);
            }
            Ok(true)
        }
        Command::Verify {
            graph,
            constraint,
            trials,
            covariance,
        } => {
            let g = load_graph(graph)?;
            let gc = GraphicalConstraint::from_json(&read(constraint)?)?;
            let report = vanishing_battery(&gc, &g, *trials, seed)?;
            let mut v = serde_json::to_value(&report)?;
            if let Some(path) = covariance {
                let sigma = CovarianceMatrix::parse(&read(path)?)?;
                v["satisfied_at_covariance"] = json!(gc.satisfies(&sigma)?);
            }
            print_value(&v, cli.format);
            Ok(report.model_pass == report.trials)
        }
        Command::Transform {
            constraint,
            all_orders,
            limit,
        } => {
            let gc = GraphicalConstraint::from_json(&read(constraint)?)?;
            let original = gc.fingerprint(seed)?;
            let results: Vec<Vec<GraphicalConstraint>> = if *all_orders {
                simplify_all_orders(&gc, *limit)?
            } else {
                vec![simplify(&gc)?.all()]
            };
            let mut ok = true;
            for parts in &results {
                ok &= product_fingerprint(parts, seed)?.equal_up_to_sign(&original)?;
                match cli.format {
                    Format::Json => {
                        let parts: Vec<serde_json::Value> = parts
                            .iter()
                            .map(|c| serde_json::from_str(&c.to_json()))
                            .collect::<std::result::Result<_, _>>()?;
                        println!("{}", json!({ "core": parts[0], "factors": parts[1..] }));
                    }
                    Format::Text => {
                        for (i, c) in parts.iter().enumerate() {
                            println!("{}", if i == 0 { "core:" } else { "factor:" });
                            println!("{}\n", c.render_text());
                        }
                    }
                }
            }
            Ok(ok)
        }
        Command::Classify {
            graph,
            family,
            core,
            max_degree,
        } => {
            let g = load_graph(graph)?;
            let fam = load_family(&g, family.as_deref())?;
            let given = match core {
                Some(p) => Some(GraphicalConstraint::from_json(&read(p)?)?),
                None => None,
            };
            let generator = if given.is_none() && codimension(&g, seed) == 1 {
                let raw = derive_constraint(&g, &fam, constraint_pairs(&g, &fam)[0])?;
                interpolate_generator(&g, Some(&raw.slot_signature()), *max_degree, seed)?
            } else {
                None
            };
            for pair in constraint_pairs(&g, &fam) {
                let raw = derive_constraint(&g, &fam, pair)?;
                let (reference, source) = match (&given, &generator) {
                    (Some(c), _) => (CoreRef::from_constraint(c)?, "given"),
                    (None, Some(p)) => (CoreRef::Exact(p.clone()), "generator"),
                    (None, None) => (CoreRef::from_constraint(&simplify(&raw)?.core)?, "simplified"),
                };
                let pd = match pd_primary_certificate(&raw, &reference, DEFAULT_EXPANSION_CAP) {
                    Ok(v) => serde_json::to_value(v)?,
                    Err(Error::Degenerate) => json!({ "verdict": "degenerate" }),
                    Err(e) => return Err(e),
                };
                let i = i_primary_certificate(&g, &fam, pair, DEFAULT_EXPANSION_CAP)?;
                let v = json!({
                    "pair": [g.name(pair.0).to_string(), g.name(pair.1).to_string()],
                    "reference": source,
                    "pd_primary": pd,
                    "i_primary": i,
                });
                print_value(&v, cli.format);
            }
            Ok(true)
        }
        Command::Search {
            target,
            vars,
            max_slots,
            max_nodes,
            trees_only,
            up_to_scalar,
        } => {
            let p: Polynomial = read(target)?.trim().parse()?;
            let mut names: Vec<Name> = vars.iter().map(|v| Name::from(v.trim())).collect();
            if names.is_empty() {
                names = p.nodes();
            }
            let bounds = Bounds {
                max_nodes: *max_nodes,
                max_slots: *max_slots,
                trees_only: *trees_only,
            };
            let mode = if *up_to_scalar {
                MatchMode::UpToScalar
            } else {
                MatchMode::Exact
            };
            let found = match_target(&Target::from_polynomial(&p)?, &names, bounds, mode)?;
            if found.is_empty() {
                eprintln!("no match within bounds");
            }
            for gc in &found {
                print_constraint(gc, cli.format);
            }
            Ok(true)
        }
        Command::Census {
            nodes,
            edges,
            edge_mode,
            bow_free,
            acyclic,
            families,
            family_limit,
            max_degree,
            search_slots,
            budget,
            checkpoint,
        } => {
            let mode = match edge_mode {
                Edges::Exact => EdgeMode::Exact,
                Edges::AtLeast => EdgeMode::AtLeast,
            };
            let mut cfg = CensusConfig::new(*nodes, *edges, mode);
            cfg.allow_bows = !bow_free;
            cfg.allow_cycles = !acyclic;
            cfg.families = match families {
                Families::Parents => FamilyChoice::Parents,
                Families::All => FamilyChoice::All,
            };
            cfg.family_limit = *family_limit;
            cfg.max_degree = *max_degree;
            cfg.search = search_slots.map(|s| Bounds {
                max_nodes: 2 * s,
                max_slots: s,
                trees_only: false,
            });
            cfg.graph_budget = *budget;
            cfg.seed = seed;
            let report = census(&cfg, checkpoint.as_deref())?;
            let format = match cli.format {
                Format::Json => ReportFormat::Json,
                Format::Text => ReportFormat::Text,
            };
            println!("{}", report_render(&report, format)?);
            Ok(report.invariants_ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("internal checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
