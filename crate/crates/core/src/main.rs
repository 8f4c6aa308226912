use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use bpmn_eval::bpmn::to_bpmn_xml;
use bpmn_eval::dataset::{
    corpus_stats, filter_corpus, read_corpus, split_corpus, stratified_sample, write_jsonl, EvalRecord, FilterConfig,
    WordHeuristic,
};
use bpmn_eval::ged::{ged, r_ged, SearchBudget};
use bpmn_eval::graph::{graph_stats, parse_dot, render_canonical, sanitize_dot};
use bpmn_eval::guidelines::{aggregate_reports, rule_title, verify_model, GuidelineConfig};
use bpmn_eval::harness::client::{generate_completion, DecodingConfig, EndpointConfig};
use bpmn_eval::harness::evaluate::{run_evaluation, EvalConfig, ModelRun};
use bpmn_eval::harness::extract::extract_dot;
use bpmn_eval::harness::prompt::{build_prompt, PromptMode};
use bpmn_eval::harness::report::{emit_reports, ReportFormat};
use bpmn_eval::stats::{bootstrap_ci, friedman_test, wilson_interval};

#[derive(Parser)]
#[command(name = "bpmn-eval", version, about = "Evaluate generated BPMN process diagrams written in DOT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the DOT repairs and print the result.
    Sanitize { input: PathBuf },
    /// Parse a DOT file and print the typed graph as JSON.
    Parse {
        input: PathBuf,
        /// Print node, edge and gateway counts instead of the graph.
        #[arg(long)]
        stats: bool,
        /// Print the canonical DOT rendering instead of JSON.
        #[arg(long, conflicts_with = "stats")]
        canonical: bool,
    },
    /// Graph edit distance and R-GED between a reference and a generated diagram.
    Ged {
        reference: PathBuf,
        generated: PathBuf,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// Convert a DOT diagram to BPMN 2.0 XML.
    Export {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check guideline rules on a directory of .dot files or a JSONL corpus.
    Guidelines {
        input: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 31)]
        size_threshold: usize,
    },
    /// Statistical utilities.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// Drop malformed, over-long, disconnected and duplicate records.
    Filter {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        rejects: Option<PathBuf>,
        #[arg(long, default_value_t = 2048)]
        token_limit: usize,
        #[arg(long)]
        keep_duplicates: bool,
        #[arg(long)]
        keep_disconnected: bool,
        /// Prompt whose instruction text counts against the token limit.
        #[arg(long, default_value = "tuned")]
        mode: PromptMode,
    },
    /// Draw a difficulty-stratified sample per domain.
    Sample {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        per_bucket: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Seeded 80/10/10 train/validation/test split.
    Split {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Mean graph size and description length of a corpus.
    CorpusStats { input: PathBuf },
    /// Print the prompt for a description read from a file or stdin (`-`).
    Prompt {
        #[arg(long, default_value = "tuned")]
        mode: PromptMode,
        input: PathBuf,
    },
    /// Generate candidates for every record through a chat-completion endpoint.
    Infer {
        input: PathBuf,
        #[arg(long, default_value = "tuned")]
        mode: PromptMode,
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value = "default")]
        model: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long, default_value_t = 120)]
        timeout_secs: u64,
        #[arg(long, default_value_t = 0.1)]
        temperature: f64,
        #[arg(long, default_value_t = 1.0)]
        top_p: f64,
        #[arg(long, default_value_t = 2048)]
        max_tokens: u32,
    },
    /// Score candidate files against a corpus and write report tables.
    Eval {
        corpus: PathBuf,
        /// One JSONL file per model; the file stem names the model.
        #[arg(long, num_args = 1.., required = true)]
        candidates: Vec<PathBuf>,
        #[arg(long)]
        report_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        /// Comma-separated list of md, csv, json.
        #[arg(long, default_value = "md,csv,json", value_delimiter = ',')]
        format: Vec<ReportFormat>,
        /// Take the last diagram in each completion (reasoning prompts).
        #[arg(long)]
        last_block: bool,
        #[command(flatten)]
        budget: BudgetArgs,
    },
}

#[derive(Args)]
struct BudgetArgs {
    /// Maximum A* expansions before falling back to an upper bound.
    #[arg(long, default_value_t = 10_000)]
    budget_states: usize,
    #[arg(long, default_value_t = 2_000)]
    budget_ms: u64,
}

impl BudgetArgs {
    fn budget(&self) -> SearchBudget {
        SearchBudget { max_expanded: self.budget_states, max_time: Duration::from_millis(self.budget_ms) }
    }
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Friedman test over a blocks x treatments CSV matrix.
    Friedman { matrix: PathBuf },
    /// Wilson score interval for k successes out of n trials.
    Wilson {
        successes: u64,
        trials: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Percentile bootstrap interval of the mean of a CSV column of values.
    Bootstrap {
        values: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

/// Numeric CSV rows; a non-numeric first row is treated as a header.
fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_input(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().filter(|c| !c.is_empty()).map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) if !row.is_empty() => rows.push(row),
            Ok(_) => {}
            Err(_) if i == 0 => {}
            Err(e) => bail!("{}: row {}: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

/// Diagrams to check: `.dot` files of a directory, or the candidate (else
/// reference) DOT of each JSONL record.
fn load_diagrams(input: &Path) -> Result<Vec<(String, String)>> {
    if input.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "dot" || x == "gv"))
            .collect();
        paths.sort();
        paths
            .into_iter()
            .map(|p| {
                let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok((id, fs::read_to_string(&p)?))
            })
            .collect()
    } else {
        Ok(read_corpus(input)?
            .into_iter()
            .map(|r| (r.id, r.candidate_dot.unwrap_or(r.reference_dot)))
            .collect())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sanitize { input } => print!("{}", sanitize_dot(&read_input(&input)?)),
        Command::Parse { input, stats, canonical } => {
            let g = parse_dot(&sanitize_dot(&read_input(&input)?))?;
            if stats {
                print_json(&graph_stats(&g))?;
            } else if canonical {
                println!("{}", render_canonical(&g));
            } else {
                print_json(&g)?;
            }
        }
        Command::Ged { reference, generated, budget } => {
            let a = parse_dot(&sanitize_dot(&read_input(&reference)?)).context("reference")?;
            let b = parse_dot(&sanitize_dot(&read_input(&generated)?)).context("generated")?;
            let budget = budget.budget();
            let d = ged(&a, &b, &budget);
            let r = r_ged(&a, &b, &budget);
            print_json(&json!({
                "ged": d.cost,
                "exact": d.exact,
                "expanded_states": d.expanded_states,
                "r_ged": r.value,
                "r_ged_percent": r.percent,
            }))?;
        }
        Command::Export { input, output } => {
            let g = parse_dot(&sanitize_dot(&read_input(&input)?))?;
            let doc = to_bpmn_xml(&g)?;
            fs::write(&output, doc.xml).with_context(|| format!("writing {}", output.display()))?;
        }
        Command::Guidelines { input, report, size_threshold } => {
            let cfg = GuidelineConfig { size_threshold };
            let diagrams = load_diagrams(&input)?;
            let reports: Vec<_> = diagrams
                .par_iter()
                .map(|(id, dot)| {
                    let g = extract_dot(dot).ok().and_then(|d| parse_dot(&d).ok());
                    verify_model(id, g.as_ref(), &cfg)
                })
                .collect();
            let aggregates = aggregate_reports(&reports)?;
            println!("| Rule | Guideline | OK | KO | Missing | Pass (%) |");
            println!("|---|---|---|---|---|---|");
            for a in &aggregates {
                let pass = a.pass_percent.map(|p| format!("{p:.2}")).unwrap_or_else(|| "-".into());
                println!("| {} | {} | {} | {} | {} | {pass} |", a.rule, rule_title(a.rule), a.ok, a.ko, a.missing);
            }
            if let Some(path) = report {
                let body = json!({ "reports": reports, "aggregates": aggregates });
                fs::write(&path, serde_json::to_string_pretty(&body)?)?;
            }
        }
        Command::Stats { command } => match command {
            StatsCommand::Friedman { matrix } => print_json(&friedman_test(&read_numeric_csv(&matrix)?)?)?,
            StatsCommand::Wilson { successes, trials, confidence } => {
                print_json(&wilson_interval(successes, trials, confidence)?)?
            }
            StatsCommand::Bootstrap { values, seed, resamples, confidence } => {
                let values: Vec<f64> = read_numeric_csv(&values)?.into_iter().flatten().collect();
                print_json(&bootstrap_ci(&values, resamples, confidence, seed)?)?;
            }
        },
        Command::Filter { input, output, rejects, token_limit, keep_duplicates, keep_disconnected, mode } => {
            if token_limit == 0 {
                bail!("--token-limit must be positive");
            }
            let records = read_corpus(&input)?;
            let cfg = FilterConfig {
                token_limit,
                drop_duplicates: !keep_duplicates,
                drop_disconnected: !keep_disconnected,
                prompt_mode: mode,
            };
            let out = filter_corpus(&records, &cfg, &WordHeuristic);
            write_jsonl(&output, &out.kept)?;
            if let Some(path) = rejects {
                write_jsonl(&path, &out.rejected)?;
            }
            eprintln!("kept {} of {} records, rejected {}", out.kept.len(), records.len(), out.rejected.len());
        }
        Command::Sample { input, per_bucket, seed, output } => {
            let records = read_corpus(&input)?;
            let s = stratified_sample(&records, per_bucket, seed)?;
            write_jsonl(&output, &s.records)?;
            eprintln!("selected {} records ({} short buckets)", s.records.len(), s.shortfalls.len());
        }
        Command::Split { input, seed, out_dir } => {
            let s = split_corpus(&read_corpus(&input)?, seed);
            fs::create_dir_all(&out_dir)?;
            for (name, part) in [("train", &s.train), ("validation", &s.validation), ("test", &s.test)] {
                write_jsonl(&out_dir.join(format!("{name}.jsonl")), part)?;
            }
        }
        Command::CorpusStats { input } => print_json(&corpus_stats(&read_corpus(&input)?)?)?,
        Command::Prompt { mode, input } => println!("{}", build_prompt(mode, read_input(&input)?.trim())?),
        Command::Infer {
            input,
            mode,
            endpoint,
            model,
            output,
            concurrency,
            timeout_secs,
            temperature,
            top_p,
            max_tokens,
        } => {
            let records = read_corpus(&input)?;
            let decoding = DecodingConfig { temperature, top_p, max_new_tokens: max_tokens };
            decoding.validate().map_err(anyhow::Error::msg)?;
            let mut ep = EndpointConfig::new(endpoint, model);
            ep.timeout = Duration::from_secs(timeout_secs);
            let pool = rayon::ThreadPoolBuilder::new().num_threads(concurrency.max(1)).build()?;
            let results: Vec<(EvalRecord, bool)> = pool.install(|| {
                records
                    .par_iter()
                    .map(|r| {
                        let prompt = build_prompt(mode, &r.description);
                        let completion = prompt
                            .map_err(anyhow::Error::from)
                            .and_then(|p| generate_completion(&ep, &p, &decoding).map_err(anyhow::Error::from));
                        let ok = completion.is_ok();
                        let text = completion.unwrap_or_else(|e| {
                            log::error!("record {}: {e}", r.id);
                            String::new()
                        });
                        (EvalRecord { candidate_dot: Some(text), ..r.clone() }, ok)
                    })
                    .collect()
            });
            let failed = results.iter().filter(|(_, ok)| !ok).count();
            let out: Vec<EvalRecord> = results.into_iter().map(|(r, _)| r).collect();
            write_jsonl(&output, &out)?;
            eprintln!("wrote {} candidates ({failed} failed requests)", out.len());
        }
        Command::Eval { corpus, candidates, report_dir, seed, resamples, format, last_block, budget } => {
            let corpus = read_corpus(&corpus)?;
            let runs = candidates
                .iter()
                .map(|path| {
                    let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                    Ok(ModelRun::from_records(name, &read_corpus(path)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let cfg = EvalConfig { budget: budget.budget(), last_block, resamples, seed, ..Default::default() };
            let rs = run_evaluation(&corpus, &runs, &cfg)?;
            for f in format {
                for path in emit_reports(&rs, f, &report_dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            for m in &rs.models {
                let s = &m.macro_summary;
                println!(
                    "{}: BLEU {:.2} ROUGE-L {:.2} METEOR {:.2} R-GED {:.2} (parsed {}/{})",
                    m.model, s.bleu.point, s.rouge_l.point, s.meteor.point, s.r_ged.point, m.parse_ok, m.records
                );
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
