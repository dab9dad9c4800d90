use std::fs;
use std::path::{Path, PathBuf};

use aeronet::metrics::{compare_to_baseline, latency_table, summarize_records, summarize_trace};
use aeronet::protocol::trace_text;
use aeronet::sim::{run_simulation, Experiment};
use aeronet::topology::{
    assign_neurons_sharded, check_connectivity, export_formation, plan_formation, required_edges, Assignment,
    FormationPlan,
};
use serde_json::{json, Value};

use crate::config::{load_experiment, ExperimentConfig, Overrides};
use crate::dataset::load_dataset;
use crate::CliError;

pub const FORMATION_FILE: &str = "formation.jsonl";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const LATENCY_FILE: &str = "latency.csv";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Plan,
    Validate,
    Simulate,
    Report,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub overrides: Overrides,
    /// Trace to summarize for `report`; defaults to the output directory's.
    pub trace: Option<PathBuf>,
}

fn prepare(inv: &Invocation) -> Result<(ExperimentConfig, Experiment), CliError> {
    let mut config = load_experiment(&inv.config)?;
    config.apply(&inv.overrides);
    let errors = config.validate();
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let config = config.effective();
    let sizes = &config.network.layer_sizes;
    let dataset = load_dataset(&config.dataset.path, sizes[0], sizes[sizes.len() - 1])?;
    let experiment = config.experiment(dataset)?;
    let errors = experiment.validate();
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    Ok((config, experiment))
}

fn layout(experiment: &Experiment) -> (Assignment, FormationPlan) {
    let assignment = assign_neurons_sharded(&experiment.spec, experiment.design, experiment.controllers_per_layer);
    let plan = plan_formation(&assignment, &experiment.spec, &experiment.formation, experiment.link);
    (assignment, plan)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

/// Runs one subcommand and returns the JSON summary printed on stdout.
pub fn run_command(inv: &Invocation) -> Result<Value, CliError> {
    let (config, experiment) = prepare(inv)?;
    let out = &config.output_dir;
    match inv.command {
        Command::Plan => {
            let (assignment, plan) = layout(&experiment);
            let path = write(out, FORMATION_FILE, &export_formation(&plan, &assignment))?;
            Ok(json!({ "command": "plan", "devices": assignment.device_count(), "formation": path }))
        }
        Command::Validate => {
            let (assignment, plan) = layout(&experiment);
            check_connectivity(&plan, &assignment, &experiment.spec).map_err(CliError::Connectivity)?;
            Ok(json!({
                "command": "validate",
                "status": "ok",
                "devices": assignment.device_count(),
                "required_links": required_edges(&assignment, &experiment.spec).len(),
            }))
        }
        Command::Simulate => {
            let outcome = run_simulation(&experiment)?;
            let summary = summarize_records(&outcome.trace);
            let sizes = &experiment.spec.layer_sizes;
            let baseline = config
                .baseline
                .as_ref()
                .and_then(|b| compare_to_baseline(&summary, b, 8 * sizes[0], 8 * sizes[sizes.len() - 1]));
            let report = json!({
                "config": config,
                "training": outcome.report,
                "latency": summary,
                "baseline": baseline,
            });
            write(out, TRACE_FILE, &trace_text(&outcome.trace))?;
            write(out, FORMATION_FILE, &export_formation(&outcome.plan, &outcome.assignment))?;
            write(out, LATENCY_FILE, &latency_table(&outcome.report.epoch_makespans, &outcome.report.epoch_losses))?;
            write(out, EFFECTIVE_CONFIG_FILE, &config.to_toml())?;
            write(out, REPORT_FILE, &pretty(&report))?;
            Ok(json!({
                "command": "simulate",
                "trace_hash": outcome.report.trace_hash,
                "epochs": outcome.report.epoch_losses.len(),
                "final_loss": outcome.report.epoch_losses.last(),
                "messages": summary.total_messages,
                "protocol_errors": outcome.report.protocol_errors,
            }))
        }
        Command::Report => {
            let trace_path = inv.trace.clone().unwrap_or_else(|| out.join(TRACE_FILE));
            let text = fs::read_to_string(&trace_path)
                .map_err(|e| CliError::Config(vec![format!("cannot read trace {}: {e}", trace_path.display())]))?;
            let summary = summarize_trace(&text)?;
            let sizes = &experiment.spec.layer_sizes;
            let baseline = config
                .baseline
                .as_ref()
                .and_then(|b| compare_to_baseline(&summary, b, 8 * sizes[0], 8 * sizes[sizes.len() - 1]));
            let value = json!({ "latency": summary, "baseline": baseline });
            write(out, SUMMARY_FILE, &pretty(&value))?;
            Ok(json!({
                "command": "report",
                "messages": summary.total_messages,
                "bytes": summary.total_bytes,
                "epochs": summary.epoch_makespans.len(),
                "airborne_faster": baseline.map(|b| b.airborne_faster),
            }))
        }
    }
}
