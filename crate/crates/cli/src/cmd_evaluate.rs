//! `tandem evaluate`: score TREC run files against qrels at one or more
//! depths, compare them to the first run, and optionally add the
//! ground-truth merge upper bound of a lexical/semantic run pair.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use tandem::eval::{
    compare_runs, evaluate_run, EvalReport, Qrels, Run, RunComparison,
};
use tandem::hybrid::oracle_merge;

use crate::manifest;

#[derive(Args)]
pub struct EvaluateArgs {
    /// TREC run files; the first is the comparison baseline.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,

    /// TREC qrels file.
    #[arg(long)]
    pub qrels: PathBuf,

    /// Result-list depths to evaluate, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = tandem::defaults::RESULT_DEPTHS)]
    pub c: Vec<usize>,

    /// Write the full JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Also evaluate the ground-truth merge upper bound of these two
    /// runs (a lexical baseline and a semantic run).
    #[arg(long, num_args = 2, value_names = ["LEXICAL_RUN", "SEMANTIC_RUN"])]
    pub oracle: Option<Vec<PathBuf>>,
}

#[derive(Serialize)]
struct ComparisonRow {
    baseline: String,
    test: String,
    c: usize,
    #[serde(flatten)]
    comparison: RunComparison,
}

#[derive(Serialize)]
struct EvalOutput {
    qrels: String,
    depths: Vec<usize>,
    reports: Vec<EvalReport>,
    comparisons: Vec<ComparisonRow>,
}

pub fn run(args: EvaluateArgs) -> anyhow::Result<ExitCode> {
    let qrels = Qrels::read_trec(&args.qrels)?;
    let mut runs = Vec::new();
    for path in &args.runs {
        runs.push((path.clone(), Run::read_trec(path)?));
    }
    let oracle_pair = match &args.oracle {
        Some(paths) => Some((Run::read_trec(&paths[0])?, Run::read_trec(&paths[1])?)),
        None => None,
    };

    let mut reports: Vec<EvalReport> = Vec::new();
    let mut comparisons: Vec<ComparisonRow> = Vec::new();
    for &c in &args.c {
        let mut at_depth: Vec<EvalReport> = Vec::new();
        for (path, run) in &runs {
            match evaluate_run(run, &qrels, c) {
                Ok(r) => at_depth.push(r),
                Err(e) => eprintln!("note: {} at c={c}: {e}", path.display()),
            }
        }
        if let Some((lexical, semantic)) = &oracle_pair {
            let merged = oracle_run(lexical, semantic, &qrels, c);
            match evaluate_run(&merged, &qrels, c) {
                Ok(r) => at_depth.push(r),
                Err(e) => eprintln!("note: oracle merge at c={c}: {e}"),
            }
        }
        for test in at_depth.iter().skip(1) {
            match compare_runs(&at_depth[0], test) {
                Ok(cmp) => comparisons.push(ComparisonRow {
                    baseline: at_depth[0].tag.clone(),
                    test: test.tag.clone(),
                    c,
                    comparison: cmp,
                }),
                Err(e) => eprintln!("note: comparing {} at c={c}: {e}", test.tag),
            }
        }
        reports.extend(at_depth);
    }

    if reports.is_empty() {
        eprintln!(
            "warning: no run has a query with relevant documents in {}",
            args.qrels.display()
        );
        return Ok(ExitCode::from(crate::EMPTY_RESULT));
    }

    print_report_table(&reports);
    if !comparisons.is_empty() {
        println!();
        print_comparison_table(&comparisons);
    }

    if let Some(out) = &args.report {
        let output = EvalOutput {
            qrels: args.qrels.display().to_string(),
            depths: args.c.clone(),
            reports,
            comparisons,
        };
        let file = File::create(out).with_context(|| format!("writing {}", out.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &output)?;
        let mut inputs: Vec<&Path> = vec![&args.qrels];
        inputs.extend(args.runs.iter().map(PathBuf::as_path));
        manifest::write_for(
            "evaluate",
            serde_json::json!({ "c": args.c, "oracle": args.oracle.is_some() }),
            &inputs,
            out,
        )?;
        println!("\nreport -> {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Merge each query of the lexical run with the semantic run under the
/// ground-truth judgments.
fn oracle_run(lexical: &Run, semantic: &Run, qrels: &Qrels, c: usize) -> Run {
    let mut merged = Run::new("oracle");
    for (qid, lex_list) in &lexical.lists {
        let relevant = qrels.relevant(qid).cloned().unwrap_or_default();
        let sem_list = semantic.lists.get(qid).cloned().unwrap_or_default();
        merged
            .lists
            .insert(qid.clone(), oracle_merge(lex_list, &sem_list, &relevant, c));
    }
    merged
}

fn print_report_table(reports: &[EvalReport]) {
    let tag_w = reports.iter().map(|r| r.tag.len()).max().unwrap_or(3).max(3);
    println!(
        "{:<tag_w$}  {:>6}  {:>7}  {:>8}  {:>8}  {:>8}  {:>7}",
        "run", "c", "queries", "recall", "MAP", "rel_ret", "skipped"
    );
    for r in reports {
        println!(
            "{:<tag_w$}  {:>6}  {:>7}  {:>8.4}  {:>8.4}  {:>8}  {:>7}",
            r.tag,
            r.c,
            r.per_query.len(),
            r.mean_recall,
            r.mean_map,
            r.total_relevant_retrieved,
            r.skipped_no_relevant.len()
        );
    }
}

fn print_comparison_table(rows: &[ComparisonRow]) {
    let tag_w = rows.iter().map(|r| r.test.len()).max().unwrap_or(3).max(4);
    println!(
        "{:<tag_w$}  {:>6}  {:>5}  {:>5}  {:>5}  {:>10}  {:>8}  {:>8}",
        "test", "c", "+", "-", "=", "d(recall)", "RI(rec)", "RI(MAP)"
    );
    for r in rows {
        println!(
            "{:<tag_w$}  {:>6}  {:>5}  {:>5}  {:>5}  {:>+10.4}  {:>8.3}  {:>8.3}",
            r.test,
            r.c,
            r.comparison.improved,
            r.comparison.degraded,
            r.comparison.unchanged,
            r.comparison.mean_recall_delta,
            r.comparison.recall_ri,
            r.comparison.map_ri
        );
    }
    println!("(deltas and RI are against the first run at the same depth)");
}
