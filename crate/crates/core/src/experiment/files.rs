//! On-disk formats for replaying pieces of a run elsewhere: task tables,
//! full assignments, and standalone cluster power problems. All indices are
//! 0-based; order 0 is decoded first.

use super::ExperimentError;
use crate::model::{Assignment, ClusterSlot, SystemConfig, TaskSpec};
use crate::power::{ClusterProblem, MemberSpec};
use crate::units::{db_to_linear, linear_to_db};
use std::io::{BufRead, Write};

fn parse_err(line: usize, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Parse { line, message: message.into() }
}

/// `user,workload_cycles,input_bits,deadline_s,power_budget_w` rows.
pub fn write_tasks_csv<W: Write>(tasks: &[TaskSpec], mut out: W) -> Result<(), ExperimentError> {
    writeln!(out, "user,workload_cycles,input_bits,deadline_s,power_budget_w")?;
    for (u, t) in tasks.iter().enumerate() {
        writeln!(
            out,
            "{u},{},{},{},{}",
            t.workload_cycles, t.input_bits, t.deadline_s, t.power_budget_w
        )?;
    }
    Ok(())
}

pub fn read_tasks_csv<R: BufRead>(input: R) -> Result<Vec<TaskSpec>, ExperimentError> {
    let mut rows: Vec<(usize, TaskSpec)> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("user") {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(parse_err(idx + 1, format!("expected 5 fields, got {}", parts.len())));
        }
        let field = |i: usize| -> Result<f64, ExperimentError> {
            parts[i].parse().map_err(|e| parse_err(idx + 1, format!("field {i}: {e}")))
        };
        let user: usize =
            parts[0].parse().map_err(|e| parse_err(idx + 1, format!("user: {e}")))?;
        rows.push((
            user,
            TaskSpec {
                workload_cycles: field(1)?,
                input_bits: field(2)?,
                deadline_s: field(3)?,
                power_budget_w: field(4)?,
            },
        ));
    }
    rows.sort_by_key(|(u, _)| *u);
    for (expected, (u, _)) in rows.iter().enumerate() {
        if *u != expected {
            return Err(ExperimentError::Validation(format!(
                "task rows must cover users 0..n contiguously; missing user {expected}"
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, t)| t).collect())
}

/// Sectioned assignment dump: cluster/order per user, owning cluster per
/// RB, computing split per slot, and nonzero powers.
pub fn write_assignment<W: Write>(
    assignment: &Assignment,
    mut out: W,
) -> Result<(), ExperimentError> {
    writeln!(out, "# noma-mec assignment v1")?;
    writeln!(out, "[cluster_order]")?;
    writeln!(out, "user,cluster,order")?;
    for (u, slot) in assignment.cluster_order.iter().enumerate() {
        if let Some(s) = slot {
            writeln!(out, "{u},{},{}", s.cluster, s.order)?;
        }
    }
    writeln!(out, "[freq_map]")?;
    writeln!(out, "rb,cluster")?;
    for (r, owner) in assignment.freq_map.iter().enumerate() {
        if let Some(c) = owner {
            writeln!(out, "{r},{c}")?;
        }
    }
    writeln!(out, "[comp_alloc]")?;
    writeln!(out, "cluster,order,count")?;
    for (i, row) in assignment.comp_alloc.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x > 0 {
                writeln!(out, "{i},{j},{x}")?;
            }
        }
    }
    writeln!(out, "[powers]")?;
    writeln!(out, "user,rb,watts")?;
    for (u, row) in assignment.powers.iter().enumerate() {
        for (r, &p) in row.iter().enumerate() {
            if p != 0.0 {
                writeln!(out, "{u},{r},{p}")?;
            }
        }
    }
    Ok(())
}

pub fn read_assignment<R: BufRead>(
    input: R,
    config: &SystemConfig,
) -> Result<Assignment, ExperimentError> {
    let mut assignment = Assignment::empty(config);
    let mut section = String::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            section = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section"))?
                .to_string();
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        // Header rows inside sections are recognizable by non-numeric lead.
        if parts[0].parse::<usize>().is_err() {
            continue;
        }
        let int = |i: usize| -> Result<usize, ExperimentError> {
            parts[i].parse().map_err(|e| parse_err(line_no, format!("field {i}: {e}")))
        };
        match section.as_str() {
            "cluster_order" => {
                if parts.len() != 3 {
                    return Err(parse_err(line_no, "cluster_order rows need user,cluster,order"));
                }
                let (u, c, o) = (int(0)?, int(1)?, int(2)?);
                if u >= config.num_users {
                    return Err(parse_err(line_no, format!("user {u} out of range")));
                }
                assignment.cluster_order[u] = Some(ClusterSlot { cluster: c, order: o });
            }
            "freq_map" => {
                if parts.len() != 2 {
                    return Err(parse_err(line_no, "freq_map rows need rb,cluster"));
                }
                let (r, c) = (int(0)?, int(1)?);
                if r >= config.num_freq_rbs {
                    return Err(parse_err(line_no, format!("RB {r} out of range")));
                }
                assignment.freq_map[r] = Some(c);
            }
            "comp_alloc" => {
                if parts.len() != 3 {
                    return Err(parse_err(line_no, "comp_alloc rows need cluster,order,count"));
                }
                let (i, j, x) = (int(0)?, int(1)?, int(2)?);
                if i >= assignment.comp_alloc.len() || j >= assignment.comp_alloc[i].len() {
                    return Err(parse_err(line_no, format!("slot ({i},{j}) out of range")));
                }
                assignment.comp_alloc[i][j] = x as u32;
            }
            "powers" => {
                if parts.len() != 3 {
                    return Err(parse_err(line_no, "powers rows need user,rb,watts"));
                }
                let (u, r) = (int(0)?, int(1)?);
                let p: f64 =
                    parts[2].parse().map_err(|e| parse_err(line_no, format!("watts: {e}")))?;
                if u >= config.num_users || r >= config.num_freq_rbs {
                    return Err(parse_err(line_no, format!("power entry ({u},{r}) out of range")));
                }
                assignment.powers[u][r] = p;
            }
            other => {
                return Err(parse_err(line_no, format!("row outside a known section `{other}`")))
            }
        }
    }
    Ok(assignment)
}

/// Standalone cluster power problem, for `solve` runs.
pub fn write_cluster_problem<W: Write>(
    cluster: &ClusterProblem,
    mut out: W,
) -> Result<(), ExperimentError> {
    writeln!(out, "# noma-mec cluster v1")?;
    writeln!(out, "[cluster]")?;
    writeln!(out, "noise_w = {}", cluster.noise_w)?;
    writeln!(out, "rb_bandwidth_hz = {}", cluster.rb_bandwidth_hz)?;
    writeln!(out, "[users]")?;
    writeln!(out, "user,order,min_rate_bps,power_budget_w")?;
    for (order, m) in cluster.members.iter().enumerate() {
        writeln!(out, "{},{order},{},{}", m.user, m.min_rate_bps, m.power_budget_w)?;
    }
    writeln!(out, "[gains]")?;
    writeln!(out, "user,rb,gain_db")?;
    for (j, m) in cluster.members.iter().enumerate() {
        for (k, &rb) in cluster.rb_ids.iter().enumerate() {
            writeln!(out, "{},{rb},{}", m.user, linear_to_db(cluster.gains[j][k]))?;
        }
    }
    Ok(())
}

pub fn read_cluster_problem<R: BufRead>(input: R) -> Result<ClusterProblem, ExperimentError> {
    let mut noise_w = None;
    let mut bandwidth = None;
    let mut users: Vec<(usize, usize, f64, f64)> = Vec::new(); // user, order, rate, budget
    let mut gains: Vec<(usize, usize, f64)> = Vec::new(); // user, rb, linear
    let mut section = String::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            section = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section"))?
                .to_string();
            continue;
        }
        match section.as_str() {
            "cluster" => {
                let (key, value) = trimmed
                    .split_once('=')
                    .ok_or_else(|| parse_err(line_no, "expected key = value"))?;
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("{}: {e}", key.trim())))?;
                match key.trim() {
                    "noise_w" => noise_w = Some(v),
                    "rb_bandwidth_hz" => bandwidth = Some(v),
                    other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
                }
            }
            "users" | "gains" => {
                let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
                if parts[0].parse::<usize>().is_err() {
                    continue; // header row
                }
                if section == "users" {
                    if parts.len() != 4 {
                        return Err(parse_err(line_no, "users rows need 4 fields"));
                    }
                    let parse_f = |i: usize| -> Result<f64, ExperimentError> {
                        parts[i].parse().map_err(|e| parse_err(line_no, format!("field {i}: {e}")))
                    };
                    users.push((
                        parts[0].parse().map_err(|e| parse_err(line_no, format!("user: {e}")))?,
                        parts[1].parse().map_err(|e| parse_err(line_no, format!("order: {e}")))?,
                        parse_f(2)?,
                        parse_f(3)?,
                    ));
                } else {
                    if parts.len() != 3 {
                        return Err(parse_err(line_no, "gains rows need 3 fields"));
                    }
                    let db: f64 = parts[2]
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("gain_db: {e}")))?;
                    gains.push((
                        parts[0].parse().map_err(|e| parse_err(line_no, format!("user: {e}")))?,
                        parts[1].parse().map_err(|e| parse_err(line_no, format!("rb: {e}")))?,
                        db_to_linear(db),
                    ));
                }
            }
            other => return Err(parse_err(line_no, format!("unknown section `{other}`"))),
        }
    }
    let noise_w =
        noise_w.ok_or_else(|| ExperimentError::Validation("missing noise_w".into()))?;
    let rb_bandwidth_hz =
        bandwidth.ok_or_else(|| ExperimentError::Validation("missing rb_bandwidth_hz".into()))?;
    users.sort_by_key(|&(_, order, _, _)| order);
    for (expected, &(_, order, _, _)) in users.iter().enumerate() {
        if order != expected {
            return Err(ExperimentError::Validation(
                "orders must form a contiguous run from 0".into(),
            ));
        }
    }
    let mut rb_ids: Vec<usize> = gains.iter().map(|&(_, rb, _)| rb).collect();
    rb_ids.sort_unstable();
    rb_ids.dedup();
    let mut gain_matrix = vec![vec![f64::NAN; rb_ids.len()]; users.len()];
    for &(user, rb, linear) in &gains {
        let j = users
            .iter()
            .position(|&(u, ..)| u == user)
            .ok_or_else(|| ExperimentError::Validation(format!("gain row for unknown user {user}")))?;
        let k = rb_ids.binary_search(&rb).expect("deduped ids");
        gain_matrix[j][k] = linear;
    }
    for (j, row) in gain_matrix.iter().enumerate() {
        for (k, g) in row.iter().enumerate() {
            if g.is_nan() {
                return Err(ExperimentError::Validation(format!(
                    "missing gain for user {} on RB {}",
                    users[j].0, rb_ids[k]
                )));
            }
        }
    }
    Ok(ClusterProblem {
        members: users
            .into_iter()
            .map(|(user, _, min_rate_bps, power_budget_w)| MemberSpec {
                user,
                min_rate_bps,
                power_budget_w,
            })
            .collect(),
        rb_ids,
        gains: gain_matrix,
        noise_w,
        rb_bandwidth_hz,
    })
}
