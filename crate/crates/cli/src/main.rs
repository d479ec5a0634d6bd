mod config;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use procurekg::analytics::{
    above_average_contracts, canned_report, institution_iri, institution_trend, quarterly_stats, quarterly_to_csv,
    render_svg_chart, report_to_csv, trend_to_csv, ChartInput, ReportParams,
};
use procurekg::estimator::{
    evaluate_estimator, evaluate_with, load_vectors, predict_amount, Embedder, NgramEmbedder, VectorIndex, DEFAULT_K,
};
use procurekg::ingest::{merge_tables, normalize, read_csv, read_normalized, ContractRecord, Encoding};
use procurekg::mapping::{execute_mapping, parse_mapping, MappingOptions, MappingSpec, Vocabulary, DEFAULT_BASE_IRI};
use procurekg::query::{evaluate, parse_query_with_prefixes};
use procurekg::rdf::{parse_ntriples, serialize_ntriples, Graph};
use procurekg::shapes::{builtin_shapes, parse_shapes, validate, ShapeSet, ValidationReport};

use config::PipelineConfig;

const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "procurekg", version, about = "Public procurement CSV to RDF pipeline with analytics")]
struct Cli {
    /// Pipeline config file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Merge and normalize raw CSV exports into one canonical CSV
    Ingest {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Source encoding: utf-8 or windows-1251
        #[arg(long, default_value = "utf-8")]
        encoding: String,
    },
    /// Map a normalized CSV to N-Triples
    Map {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip rows flagged during normalization
        #[arg(long)]
        exclude_flagged: bool,
    },
    /// Check a graph against shapes; exits with 1 when it does not conform
    Validate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        shapes: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a query file against a graph
    Query {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Canned procurement statistics
    Report {
        #[command(flatten)]
        graph: GraphArgs,
        /// Year for the per-year institution ranking (default: latest)
        #[arg(long)]
        year: Option<i32>,
        /// Also list contracts above the mean amount
        #[arg(long)]
        above_average: bool,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Quarterly amount statistics over the most recent years
    Stats {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 5, allow_negative_numbers = true)]
        window_years: i64,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Contract history of one institution
    Trend {
        #[command(flatten)]
        graph: GraphArgs,
        /// Institution IRI or name
        #[arg(long)]
        institution: String,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate a contract amount from its description
    Predict {
        /// Normalized CSV of known contracts
        #[arg(long)]
        input: PathBuf,
        description: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare kNN estimation with the median baseline on a held-out split
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        /// Precomputed vectors (dimension line, then `record_id<TAB>values`)
        #[arg(long)]
        vectors: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// N-Triples graph file
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    shapes: Option<PathBuf>,
    /// Proceed even when the graph does not conform to the shapes
    #[arg(long)]
    warn_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
struct NotConforming(usize);

impl fmt::Display for NotConforming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "graph does not conform to the shapes ({} violations)", self.0)
    }
}

impl std::error::Error for NotConforming {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) if e.downcast_ref::<NotConforming>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

fn load_mapping(flag: Option<&Path>, config: &PipelineConfig) -> Result<MappingSpec> {
    match flag.or(config.mapping.as_deref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            parse_mapping(&text).with_context(|| format!("invalid mapping {}", path.display()))
        }
        None => Ok(MappingSpec::standard(config.base_iri.as_deref().unwrap_or(DEFAULT_BASE_IRI))?),
    }
}

fn load_shapes(flag: Option<&Path>, config: &PipelineConfig, vocab: &Vocabulary) -> Result<ShapeSet> {
    match flag.or(config.shapes.as_deref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            parse_shapes(&text).with_context(|| format!("invalid shapes {}", path.display()))
        }
        None => Ok(builtin_shapes(vocab)),
    }
}

fn load_graph(path: &Path) -> Result<Graph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_ntriples(&text).with_context(|| format!("invalid N-Triples in {}", path.display()))
}

fn load_records(path: &Path) -> Result<Vec<ContractRecord>> {
    let table = read_normalized(path)?;
    let skipped = table.flagged().count();
    if skipped > 0 {
        eprintln!("note: {skipped} flagged rows ignored");
    }
    Ok(table.records())
}

fn summarize(report: &ValidationReport) {
    for v in report.violations.iter().take(20) {
        eprintln!("  {} {} [{}]: {}", v.focus_node, v.path, v.constraint_kind, v.message);
    }
    if report.violations.len() > 20 {
        eprintln!("  ... {} more", report.violations.len() - 20);
    }
}

/// Loads the graph and checks it against the shapes before any analysis.
fn checked_graph(args: &GraphArgs, config: &PipelineConfig) -> Result<(Graph, Vocabulary)> {
    let vocab = load_mapping(args.mapping.as_deref(), config)?.vocabulary();
    let graph = load_graph(&args.graph)?;
    let shapes = load_shapes(args.shapes.as_deref(), config, &vocab)?;
    let report = validate(&graph, &shapes);
    if !report.conforms {
        summarize(&report);
        if !args.warn_only {
            return Err(NotConforming(report.violations.len()).into());
        }
        eprintln!("warning: continuing with a non-conforming graph");
    }
    Ok((graph, vocab))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Ingest {
            input,
            output,
            encoding,
        } => {
            let encoding: Encoding = encoding.parse().map_err(anyhow::Error::msg)?;
            let tables = input
                .iter()
                .map(|p| read_csv(p, encoding))
                .collect::<Result<Vec<_>, _>>()?;
            let merged = merge_tables(tables)?;
            let table = normalize(&merged, &config.drop_patterns, &config.aliases)?;
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            write_output(output.as_deref(), &String::from_utf8(buf).expect("csv output is utf-8"))?;
            eprintln!("{} rows, {} flagged", table.len(), table.flagged().count());
        }
        Command::Map {
            input,
            mapping,
            output,
            exclude_flagged,
        } => {
            let spec = load_mapping(mapping.as_deref(), &config)?;
            let table = read_normalized(&input)?;
            let out = execute_mapping(
                &table,
                &spec,
                MappingOptions {
                    include_flagged: !exclude_flagged,
                },
            )?;
            for e in &out.row_errors {
                eprintln!("warning: row {}: {}", e.record_id, e.message);
            }
            if !out.skipped.is_empty() {
                eprintln!("note: {} flagged rows skipped", out.skipped.len());
            }
            write_output(output.as_deref(), &serialize_ntriples(&out.graph))?;
            eprintln!("{} triples", out.graph.len());
        }
        Command::Validate {
            graph,
            shapes,
            mapping,
            format,
            output,
        } => {
            let vocab = load_mapping(mapping.as_deref(), &config)?.vocabulary();
            let graph = load_graph(&graph)?;
            let shapes = load_shapes(shapes.as_deref(), &config, &vocab)?;
            let report = validate(&graph, &shapes);
            let text = match format {
                Format::Json => report.to_json() + "\n",
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["focus_node", "path", "constraint", "message", "value"])?;
                    for v in &report.violations {
                        w.write_record([
                            v.focus_node.as_str(),
                            v.path.as_str(),
                            v.constraint_kind,
                            v.message.as_str(),
                            v.value.as_deref().unwrap_or(""),
                        ])?;
                    }
                    String::from_utf8(w.into_inner()?).expect("csv output is utf-8")
                }
            };
            write_output(output.as_deref(), &text)?;
            if !report.conforms {
                eprintln!("{} violations", report.violations.len());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Query {
            graph,
            query,
            format,
            output,
        } => {
            let (g, vocab) = checked_graph(&graph, &config)?;
            let text = std::fs::read_to_string(&query).with_context(|| format!("cannot read {}", query.display()))?;
            let prefixes = [(String::new(), vocab.base.clone())].into_iter().collect();
            let plan = parse_query_with_prefixes(&text, &prefixes)?;
            let table = evaluate(&g, &plan)?;
            let rendered = match format {
                Format::Csv => table.to_csv(),
                Format::Json => to_json(&table.to_json()),
            };
            write_output(output.as_deref(), &rendered)?;
        }
        Command::Report {
            graph,
            year,
            above_average,
            format,
            output,
        } => {
            let (g, vocab) = checked_graph(&graph, &config)?;
            let params = ReportParams {
                year,
                ..ReportParams::default()
            };
            let rows = canned_report(&g, &vocab, &params)?;
            let above = if above_average {
                Some(above_average_contracts(&g, &vocab)?)
            } else {
                None
            };
            let rendered = match format {
                Format::Csv => {
                    let mut text = report_to_csv(&rows);
                    if let Some(above) = &above {
                        text.push_str("\ncontract,amount\n");
                        for (c, a) in above {
                            text.push_str(&format!("{c},{}\n", a.normalize()));
                        }
                    }
                    text
                }
                Format::Json => {
                    let above: Option<Vec<serde_json::Value>> = above.map(|list| {
                        list.iter()
                            .map(|(c, a)| serde_json::json!({ "contract": c, "amount": a }))
                            .collect()
                    });
                    to_json(&serde_json::json!({ "metrics": rows, "above_average": above }))
                }
            };
            write_output(output.as_deref(), &rendered)?;
        }
        Command::Stats {
            graph,
            window_years,
            svg,
            format,
            output,
        } => {
            let (g, vocab) = checked_graph(&graph, &config)?;
            let rows = quarterly_stats(&g, &vocab, window_years)?;
            if let Some(path) = svg {
                let chart = render_svg_chart(ChartInput::Quarters(&rows))?;
                write_output(Some(&path), &chart)?;
            }
            let rendered = match format {
                Format::Csv => quarterly_to_csv(&rows),
                Format::Json => to_json(&rows),
            };
            write_output(output.as_deref(), &rendered)?;
        }
        Command::Trend {
            graph,
            institution,
            svg,
            format,
            output,
        } => {
            let (g, vocab) = checked_graph(&graph, &config)?;
            let iri = institution_iri(&vocab, &institution)?;
            let series = institution_trend(&g, &vocab, &iri)?;
            if let Some(path) = svg {
                let chart = render_svg_chart(ChartInput::Trend(&series))?;
                write_output(Some(&path), &chart)?;
            }
            let rendered = match format {
                Format::Csv => trend_to_csv(&series),
                Format::Json => to_json(&series),
            };
            write_output(output.as_deref(), &rendered)?;
        }
        Command::Predict {
            input,
            description,
            k,
            format,
        } => {
            if description.trim().is_empty() {
                bail!("description must not be empty");
            }
            let k = k.or(config.k).unwrap_or(DEFAULT_K);
            if k == 0 {
                bail!("--k must be at least 1");
            }
            let records = load_records(&input)?;
            let embedder = NgramEmbedder::default();
            let index = VectorIndex::from_records(&records, &embedder)?;
            let amount = predict_amount(&description, &index, &embedder, k)?;
            let neighbors = index.knn(&embedder.embed(&description)?, k)?;
            match format {
                Format::Csv => println!("{amount}"),
                Format::Json => print!(
                    "{}",
                    to_json(&serde_json::json!({ "amount": amount, "k": k, "neighbors": neighbors }))
                ),
            }
        }
        Command::Evaluate {
            input,
            split,
            seed,
            k,
            vectors,
            format,
            output,
        } => {
            let k = k.or(config.k).unwrap_or(DEFAULT_K);
            let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            let records = load_records(&input)?;
            let result = match vectors {
                Some(path) => {
                    let amounts: HashMap<String, u64> =
                        records.iter().map(|r| (r.record_id.clone(), r.amount)).collect();
                    let index = load_vectors(&path, &amounts)?;
                    evaluate_with(&records, split, seed, k, index.dimension(), |r| {
                        index
                            .get(&r.record_id)
                            .map(|e| e.vector.clone())
                            .ok_or_else(|| procurekg::estimator::EstimatorError::MissingVector(r.record_id.clone()))
                    })?
                }
                None => evaluate_estimator(&records, split, seed, k, &NgramEmbedder::default())?,
            };
            let rendered = match format {
                Format::Json => to_json(&result),
                Format::Csv => {
                    let r2 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "undefined".into());
                    format!(
                        "method,rmse,mae,r2,n\nknn,{},{},{},{}\nmedian_baseline,{},{},{},{}\n",
                        result.knn.rmse,
                        result.knn.mae,
                        r2(result.knn.r2),
                        result.knn.n,
                        result.baseline.rmse,
                        result.baseline.mae,
                        r2(result.baseline.r2),
                        result.baseline.n
                    )
                }
            };
            write_output(output.as_deref(), &rendered)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
