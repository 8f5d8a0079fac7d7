//! CSV/JSON renderers for experiment results. Column sets are fixed per
//! experiment id and stamped with a schema version; float formatting is
//! deterministic (shortest round-trip, scientific only outside
//! [1e-4, 1e7)), so identical runs produce identical bytes.

use super::{ExperimentError, ExperimentId, InstanceRow, ResultTable, SummaryRow};
use serde_json::json;
use std::path::{Path, PathBuf};

/// Deterministic float formatting: lossless and stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs();
    if (1e-4..1e7).contains(&magnitude) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Per-id instance columns, `(header, extractor)`.
fn instance_columns(id: ExperimentId) -> Vec<(&'static str, fn(&InstanceRow) -> String)> {
    let sweep_users: fn(&InstanceRow) -> String = |r| fmt_f64(r.sweep_value);
    let family: fn(&InstanceRow) -> String = |r| r.family.clone().unwrap_or_default();
    let replication: fn(&InstanceRow) -> String = |r| r.replication.to_string();
    let seed: fn(&InstanceRow) -> String = |r| r.seed.to_string();
    let feasible: fn(&InstanceRow) -> String = |r| (r.feasible as u8).to_string();
    let energy: fn(&InstanceRow) -> String = |r| fmt_f64(r.energy_mj);
    let comp_time: fn(&InstanceRow) -> String = |r| fmt_f64(r.mean_comp_time_ms);
    let fairness: fn(&InstanceRow) -> String = |r| fmt_opt(r.fairness_index);
    let se: fn(&InstanceRow) -> String = |r| fmt_f64(r.spectral_eff_bps_hz);
    let oracle: fn(&InstanceRow) -> String = |r| fmt_opt(r.oracle_energy_mj);
    let gap: fn(&InstanceRow) -> String = |r| fmt_opt(r.gap_pct);
    match id {
        ExperimentId::Fig1 => vec![
            ("users", sweep_users),
            ("replication", replication),
            ("seed", seed),
            ("feasible", feasible),
            ("heuristic_energy_mj", energy),
            ("oracle_energy_mj", oracle),
            ("gap_pct", gap),
        ],
        ExperimentId::Fig2 => vec![
            ("u_max", family),
            ("num_freq_rbs", sweep_users),
            ("replication", replication),
            ("seed", seed),
            ("feasible", feasible),
            ("energy_mj", energy),
        ],
        ExperimentId::Fig3 => vec![
            ("avg_input_bits", sweep_users),
            ("replication", replication),
            ("seed", seed),
            ("feasible", feasible),
            ("spectral_eff_bps_hz", se),
            ("energy_mj", energy),
        ],
        ExperimentId::Fig4 => vec![
            ("scenario", family),
            ("users", sweep_users),
            ("replication", replication),
            ("seed", seed),
            ("feasible", feasible),
            ("mean_comp_time_ms", comp_time),
        ],
        ExperimentId::Fig5 => vec![
            ("scenario", family),
            ("users", sweep_users),
            ("replication", replication),
            ("seed", seed),
            ("feasible", feasible),
            ("fairness_index", fairness),
        ],
        ExperimentId::Custom => vec![
            ("sweep_value", sweep_users),
            ("family", family),
            ("replication", replication),
            ("seed", seed),
            ("feasible", feasible),
            ("energy_mj", energy),
            ("mean_comp_time_ms", comp_time),
            ("fairness_index", fairness),
            ("spectral_eff_bps_hz", se),
        ],
    }
}

fn summary_columns(id: ExperimentId) -> Vec<(&'static str, fn(&SummaryRow) -> String)> {
    let sweep: fn(&SummaryRow) -> String = |r| fmt_f64(r.sweep_value);
    let family: fn(&SummaryRow) -> String = |r| r.family.clone().unwrap_or_default();
    let n: fn(&SummaryRow) -> String = |r| r.n.to_string();
    let n_feasible: fn(&SummaryRow) -> String = |r| r.n_feasible.to_string();
    let mean_energy: fn(&SummaryRow) -> String = |r| fmt_f64(r.mean_energy_mj);
    let std_energy: fn(&SummaryRow) -> String = |r| fmt_f64(r.std_energy_mj);
    let comp_time: fn(&SummaryRow) -> String = |r| fmt_f64(r.mean_comp_time_ms);
    let fairness: fn(&SummaryRow) -> String = |r| fmt_opt(r.mean_fairness);
    let se: fn(&SummaryRow) -> String = |r| fmt_f64(r.mean_spectral_eff);
    let oracle: fn(&SummaryRow) -> String = |r| fmt_opt(r.mean_oracle_energy_mj);
    let median_gap: fn(&SummaryRow) -> String = |r| fmt_opt(r.median_gap_pct);
    let max_gap: fn(&SummaryRow) -> String = |r| fmt_opt(r.max_gap_pct);
    match id {
        ExperimentId::Fig1 => vec![
            ("users", sweep),
            ("n", n),
            ("n_feasible", n_feasible),
            ("mean_heuristic_energy_mj", mean_energy),
            ("mean_oracle_energy_mj", oracle),
            ("median_gap_pct", median_gap),
            ("max_gap_pct", max_gap),
        ],
        ExperimentId::Fig2 => vec![
            ("u_max", family),
            ("num_freq_rbs", sweep),
            ("n", n),
            ("n_feasible", n_feasible),
            ("mean_energy_mj", mean_energy),
            ("std_energy_mj", std_energy),
        ],
        ExperimentId::Fig3 => vec![
            ("avg_input_bits", sweep),
            ("n", n),
            ("n_feasible", n_feasible),
            ("mean_spectral_eff", se),
            ("mean_energy_mj", mean_energy),
        ],
        ExperimentId::Fig4 => vec![
            ("scenario", family),
            ("users", sweep),
            ("n", n),
            ("n_feasible", n_feasible),
            ("mean_comp_time_ms", comp_time),
        ],
        ExperimentId::Fig5 => vec![
            ("scenario", family),
            ("users", sweep),
            ("n", n),
            ("n_feasible", n_feasible),
            ("mean_fairness", fairness),
        ],
        ExperimentId::Custom => vec![
            ("sweep_value", sweep),
            ("family", family),
            ("n", n),
            ("n_feasible", n_feasible),
            ("mean_energy_mj", mean_energy),
            ("std_energy_mj", std_energy),
            ("mean_comp_time_ms", comp_time),
            ("mean_fairness", fairness),
            ("mean_spectral_eff", se),
        ],
    }
}

const SCHEMA_VERSION: u32 = 1;

pub fn render_instances_csv(table: &ResultTable) -> String {
    let columns = instance_columns(table.id);
    let mut out = format!(
        "# noma-mec {} instances v{SCHEMA_VERSION} seed={}\n",
        table.id, table.master_seed
    );
    out.push_str(&columns.iter().map(|(h, _)| *h).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in &table.instances {
        let fields: Vec<String> = columns.iter().map(|(_, f)| f(row)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn render_summary_csv(table: &ResultTable) -> String {
    let columns = summary_columns(table.id);
    let mut out = format!(
        "# noma-mec {} summary v{SCHEMA_VERSION} seed={}\n",
        table.id, table.master_seed
    );
    out.push_str(&columns.iter().map(|(h, _)| *h).collect::<Vec<_>>().join(","));
    out.push('\n');
    for row in &table.summary {
        let fields: Vec<String> = columns.iter().map(|(_, f)| f(row)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// JSON with the same field names as the structs (nulls for absent values).
pub fn render_json(table: &ResultTable) -> String {
    let doc = json!({
        "schema": format!("noma-mec/{}/v{SCHEMA_VERSION}", table.id),
        "sweep": table.sweep.as_str(),
        "seed": table.master_seed,
        "instances": table.instances,
        "summary": table.summary,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable rows");
    text.push('\n');
    text
}

/// Writes `{id}_instances.csv` + `{id}_summary.csv`, or `{id}_results.json`.
pub fn write_result_files(
    table: &ResultTable,
    out_dir: &Path,
    json: bool,
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    if json {
        let path = out_dir.join(format!("{}_results.json", table.id));
        std::fs::write(&path, render_json(table))?;
        written.push(path);
    } else {
        let instances = out_dir.join(format!("{}_instances.csv", table.id));
        std::fs::write(&instances, render_instances_csv(table))?;
        written.push(instances);
        let summary = out_dir.join(format!("{}_summary.csv", table.id));
        std::fs::write(&summary, render_summary_csv(table))?;
        written.push(summary);
    }
    Ok(written)
}
