//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 usage or configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::data::{generate, load_rows, DatasetSpec};
use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::structures::graph::{graph_train, ArchitectureGraph, GraphConfig, TrainedGraph};
use crate::verify::run_all;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "drf", version, about = "Train and verify archetype-based discriminatory structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (data.csv + data.json).
    Gen {
        /// Dataset spec (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Replaces modality seeds with seed, seed+1, ...
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train an architecture on a dataset and write the model.
    Train {
        /// Architecture config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory or data.csv path.
        #[arg(long)]
        data: PathBuf,
        /// Model output path.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Encode one input tuple and print the sink archetype.
    Encode {
        #[arg(long)]
        model: PathBuf,
        /// `source=v1,v2,...`, one per source.
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
    },
    /// Complete the unknown sources of a tuple from the known ones.
    Complete {
        #[arg(long)]
        model: PathBuf,
        /// `source=v1,v2,...`, repeatable.
        #[arg(long = "known", required = true)]
        known: Vec<String>,
    },
    /// Run every property check against a trained model.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report output path (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt the sink codebook before checking (testing aid).
        #[arg(long)]
        inject_fault: bool,
    },
    /// Compare input and output diversity across models.
    Report {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Also write the table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail unless output diversity is non-increasing in the listed order.
        #[arg(long)]
        assert_monotone: bool,
    },
}

#[derive(Debug, Serialize)]
struct ReportRow {
    model: String,
    rows: usize,
    fingerprint: String,
    input_diversity: usize,
    output_diversity: usize,
    reduction: usize,
}

#[derive(Debug, Serialize)]
struct ReportTable {
    models: Vec<ReportRow>,
    same_dataset: bool,
    monotone: bool,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Gen { config, out: dir, seed } => {
            let mut spec: DatasetSpec = serde_json::from_str(&read(&config)?)?;
            if let Some(s) = seed {
                for (k, m) in spec.modalities.iter_mut().enumerate() {
                    m.seed = s.wrapping_add(k as u64);
                }
            }
            let ds = generate(&spec)?;
            ds.write(&dir)?;
            writeln!(out, "wrote {} rows to {}", ds.rows(), dir.display())?;
            Ok(EXIT_OK)
        }
        Command::Train {
            config,
            data,
            out: model_out,
            seed,
        } => {
            let mut cfg = GraphConfig::from_json(&read(&config)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let graph = ArchitectureGraph::new(cfg)?;
            let ds = load_rows(&data)?;
            let trained = graph_train(&graph, &ds)?;
            fs::write(&model_out, trained.to_json()?)?;
            writeln!(out, "{:<16} {:<18} {:>8} {:>8}  levels", "node", "kind", "|I|", "|O|")?;
            for (node, cfg) in trained.nodes.iter().zip(&trained.config().nodes) {
                let kind = serde_json::to_value(cfg.kind)?;
                writeln!(
                    out,
                    "{:<16} {:<18} {:>8} {:>8}  {:?}",
                    node.name,
                    kind.as_str().unwrap_or_default(),
                    node.stats.input_diversity,
                    node.stats.output_diversity,
                    node.stats.level_diversity
                )?;
            }
            writeln!(
                out,
                "rows {}, distinct source tuples {}, sink archetypes {}",
                trained.dataset.rows,
                trained.dataset.input_diversity,
                trained.sink().stats.output_diversity
            )?;
            Ok(EXIT_OK)
        }
        Command::Encode { model, inputs } => {
            let trained = load_model(&model)?;
            let bound = parse_bindings(&trained, &inputs)?;
            let (id, archetype) = trained.encode(&bound)?;
            let line = serde_json::json!({ "archetype": id.0, "value": archetype });
            writeln!(out, "{line}")?;
            Ok(EXIT_OK)
        }
        Command::Complete { model, known } => {
            let trained = load_model(&model)?;
            let bound = parse_bindings(&trained, &known)?;
            let done = trained.complete(&bound)?;
            writeln!(out, "{}", serde_json::to_string(&done)?)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            model,
            data,
            out: report_out,
            seed,
            inject_fault,
        } => {
            let mut trained = load_model(&model)?;
            let ds = load_rows(&data)?;
            if ds.fingerprint() != trained.dataset.fingerprint {
                writeln!(err, "warning: dataset differs from the one the model was trained on")?;
            }
            if inject_fault {
                let node = trained.inject_fault()?;
                writeln!(err, "injected fault into node {node}")?;
            }
            let report = run_all(&trained, &ds, seed)?;
            fs::write(&report_out, report.to_json()?)?;
            for c in &report.checks {
                let status = serde_json::to_value(c.status)?;
                writeln!(
                    out,
                    "{:<28} {:<14} {:<18} cases {}",
                    c.theorem_id,
                    c.subject,
                    status.as_str().unwrap_or_default(),
                    c.cases_run
                )?;
            }
            let failed = report.failures().count();
            writeln!(out, "{} checks, {failed} failed", report.checks.len())?;
            Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Report {
            models,
            out: json_out,
            assert_monotone,
        } => {
            let mut rows = Vec::new();
            for path in &models {
                let m = load_model(path)?;
                let output = m.sink().stats.output_diversity;
                rows.push(ReportRow {
                    model: path.display().to_string(),
                    rows: m.dataset.rows,
                    fingerprint: m.dataset.fingerprint.clone(),
                    input_diversity: m.dataset.input_diversity,
                    output_diversity: output,
                    reduction: m.dataset.input_diversity.saturating_sub(output),
                });
            }
            let same_dataset = rows.windows(2).all(|w| w[0].fingerprint == w[1].fingerprint);
            if !same_dataset {
                writeln!(err, "warning: models were trained on different datasets")?;
            }
            let monotone = rows.windows(2).all(|w| w[1].output_diversity <= w[0].output_diversity);
            writeln!(out, "{:<40} {:>8} {:>8} {:>8}", "model", "|I|", "|O|", "reduced")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:<40} {:>8} {:>8} {:>8}",
                    r.model, r.input_diversity, r.output_diversity, r.reduction
                )?;
            }
            let table = ReportTable {
                models: rows,
                same_dataset,
                monotone,
            };
            if let Some(p) = json_out {
                let mut s = serde_json::to_string_pretty(&table)?;
                s.push('\n');
                fs::write(p, s)?;
            }
            if assert_monotone && !monotone {
                writeln!(err, "output diversity increases along the listed models")?;
                return Ok(EXIT_FAILED);
            }
            Ok(EXIT_OK)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<TrainedGraph> {
    TrainedGraph::from_json(&read(path)?)
}

/// Parses `name=v1,v2,...` against the model's source shapes.
fn parse_bindings(model: &TrainedGraph, items: &[String]) -> Result<BTreeMap<String, Sample>> {
    let sources = &model.config().sources;
    let mut out = BTreeMap::new();
    for item in items {
        let (name, values) = item
            .split_once('=')
            .ok_or_else(|| Error::Io(format!("expected name=v1,v2,... but got {item:?}")))?;
        let k = sources
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::Graph(format!("unknown source {name}")))?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Io(format!("{name}: bad number {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let sample = Sample::new(model.source_shapes[k].clone(), values)?.quantize(model.config().grid)?;
        if out.insert(name.to_string(), sample).is_some() {
            return Err(Error::Io(format!("source {name} given twice")));
        }
    }
    Ok(out)
}
