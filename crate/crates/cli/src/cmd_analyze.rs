//! `tandem analyze`: diagnostic slices of run files. Recall quartiles,
//! improvement histograms, query idf statistics, representative terms,
//! and relevant-document length profiles.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Subcommand};
use tandem::corpus::{self, NormalizeConfig};
use tandem::eval::{
    improvement_histogram, jaccard, lengths_csv, quartile_analysis, query_properties,
    relevant_length_profile, representative_terms, Qrels, Run,
};

use crate::manifest;
use crate::store;

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(subcommand)]
    pub kind: AnalyzeKind,
}

#[derive(Subcommand)]
pub enum AnalyzeKind {
    /// Mean recall per baseline-recall quartile, for two runs.
    Quartiles {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Result-list depth for the recall computation.
        #[arg(long, default_value_t = tandem::defaults::RESULT_DEPTHS[1])]
        c: usize,
        /// Write the groups as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Histogram of per-query percentage recall change.
    Histogram {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, default_value_t = tandem::defaults::RESULT_DEPTHS[1])]
        c: usize,
        /// Bucket edges in percent, ascending.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_values_t = vec![-100.0, -50.0, -25.0, -10.0, -1.0, 1.0, 10.0, 25.0, 50.0, 100.0]
        )]
        edges: Vec<f64>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Per-query idf statistics (mean, max, population std).
    Properties {
        /// Index directory from `tandem index`.
        #[arg(long)]
        index: PathBuf,
        /// Queries TSV: `query_id<TAB>text`.
        #[arg(long)]
        queries: PathBuf,
        /// Write the rows as CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Representative terms of each query's top documents; with
    /// --compare, the term-set Jaccard overlap between two runs.
    Terms {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        run: PathBuf,
        /// Documents per query feeding the term profile.
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Terms kept per query.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Second run to compare term profiles against.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Sorted token-length pools of the relevant documents two runs
    /// retrieved, as CSV scatter-plot data.
    Lengths {
        #[arg(long)]
        run_a: PathBuf,
        #[arg(long)]
        run_b: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long)]
        index: PathBuf,
        /// Relevant documents counted per query per run.
        #[arg(long, default_value_t = 5)]
        per_query: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

pub fn run(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    match args.kind {
        AnalyzeKind::Quartiles {
            baseline,
            test,
            qrels,
            c,
            json,
        } => {
            let groups = quartile_analysis(
                &Run::read_trec(&baseline)?,
                &Run::read_trec(&test)?,
                &Qrels::read_trec(&qrels)?,
                c,
            )?;
            println!("{:<10}  {:>4}  {:>9}  {:>9}", "quartile", "n", "baseline", "test");
            for (i, g) in groups.iter().enumerate() {
                println!(
                    "{:<10}  {:>4}  {:>9.4}  {:>9.4}",
                    format!("q{} {}", i + 1, if i == 0 { "(hardest)" } else { "" }).trim_end(),
                    g.n,
                    g.baseline_mean,
                    g.test_mean
                );
            }
            if let Some(out) = json {
                write_json(&out, &groups)?;
                sidecar(
                    "analyze-quartiles",
                    serde_json::json!({"c": c}),
                    &[&baseline, &test, &qrels],
                    &out,
                )?;
            }
        }
        AnalyzeKind::Histogram {
            baseline,
            test,
            qrels,
            c,
            edges,
            json,
        } => {
            let hist = improvement_histogram(
                &Run::read_trec(&baseline)?,
                &Run::read_trec(&test)?,
                &Qrels::read_trec(&qrels)?,
                c,
                &edges,
            )?;
            println!("{:<16}  {:>6}", "recall change", "count");
            println!("{:<16}  {:>6}", format!("< {}%", hist.edges[0]), hist.counts[0]);
            for i in 1..hist.edges.len() {
                println!(
                    "{:<16}  {:>6}",
                    format!("[{}%, {}%)", hist.edges[i - 1], hist.edges[i]),
                    hist.counts[i]
                );
            }
            println!(
                "{:<16}  {:>6}",
                format!(">= {}%", hist.edges[hist.edges.len() - 1]),
                hist.counts[hist.edges.len()]
            );
            println!("{:<16}  {:>6}", "unchanged", hist.zeros);
            println!("{:<16}  {:>6}", "total", hist.total());
            if let Some(out) = json {
                write_json(&out, &hist)?;
                sidecar(
                    "analyze-histogram",
                    serde_json::json!({"c": c, "edges": edges}),
                    &[&baseline, &test, &qrels],
                    &out,
                )?;
            }
        }
        AnalyzeKind::Properties {
            index,
            queries,
            csv,
        } => {
            let idx = store::load_index(&index)?;
            let qs = corpus::read_queries_tsv(&queries, &NormalizeConfig::default())?;
            let mut rows = String::from("query_id,n_terms,mean_idf,max_idf,std_idf\n");
            for q in &qs {
                let p = query_properties(q, &idx)?;
                rows.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6}\n",
                    q.query_id, p.n_terms, p.mean_idf, p.max_idf, p.std_idf
                ));
            }
            emit(&rows, csv.as_deref())?;
            if let Some(out) = &csv {
                sidecar(
                    "analyze-properties",
                    serde_json::json!({}),
                    &[&queries],
                    out,
                )?;
            }
        }
        AnalyzeKind::Terms {
            index,
            run,
            depth,
            n,
            compare,
        } => {
            let idx = store::load_index(&index)?;
            let run_a = Run::read_trec(&run)?;
            let run_b = compare.as_ref().map(|p| Run::read_trec(p)).transpose()?;
            let mut overlaps = Vec::new();
            for (qid, list) in &run_a.lists {
                let ids: Vec<&str> = list.doc_ids().take(depth).collect();
                if ids.is_empty() {
                    println!("{qid}\t(no results)");
                    continue;
                }
                let terms = representative_terms(&ids, &idx, n)?;
                match &run_b {
                    None => println!("{qid}\t{}", terms.join(" ")),
                    Some(other) => {
                        let other_ids: Vec<&str> = other
                            .lists
                            .get(qid)
                            .map(|l| l.doc_ids().take(depth).collect())
                            .unwrap_or_default();
                        let other_terms = if other_ids.is_empty() {
                            Vec::new()
                        } else {
                            representative_terms(&other_ids, &idx, n)?
                        };
                        let j = jaccard(&terms, &other_terms);
                        overlaps.push(j);
                        println!(
                            "{qid}\t{j:.4}\t{}\t{}",
                            terms.join(" "),
                            other_terms.join(" ")
                        );
                    }
                }
            }
            if !overlaps.is_empty() {
                println!(
                    "mean jaccard over {} queries: {:.4}",
                    overlaps.len(),
                    overlaps.iter().sum::<f64>() / overlaps.len() as f64
                );
            }
        }
        AnalyzeKind::Lengths {
            run_a,
            run_b,
            qrels,
            index,
            per_query,
            csv,
        } => {
            let a = Run::read_trec(&run_a)?;
            let b = Run::read_trec(&run_b)?;
            let (la, lb) = relevant_length_profile(
                &a,
                &b,
                &Qrels::read_trec(&qrels)?,
                &store::load_index(&index)?,
                per_query,
            )?;
            println!(
                "pooled {} ({}) vs {} ({}) relevant document lengths",
                la.len(),
                a.tag,
                lb.len(),
                b.tag
            );
            let text = lengths_csv(&a.tag, &la, &b.tag, &lb);
            emit(&text, csv.as_deref())?;
            if let Some(out) = &csv {
                sidecar(
                    "analyze-lengths",
                    serde_json::json!({"per_query": per_query}),
                    &[&run_a, &run_b, &qrels],
                    out,
                )?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Print `text` or write it to `path` when given.
fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            println!("-> {}", p.display());
            Ok(())
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("-> {}", path.display());
    Ok(())
}

fn sidecar(
    command: &str,
    config: serde_json::Value,
    inputs: &[&PathBuf],
    artifact: &Path,
) -> anyhow::Result<()> {
    let paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    manifest::write_for(command, config, &paths, artifact)
}
