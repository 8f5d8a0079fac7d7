//! Experiment configuration: `[section]` / `key = value` text files with
//! per-experiment defaults.
//!
//! Unspecified fields fall back to the stock single-cell setup: 1 W budget,
//! 30 frequency RBs of 180 kHz, -173 dBm/Hz noise density, 30 computing RBs
//! of 10 Gcycles/s, workloads uniform in [0.5, 1] Gcycles, inputs in
//! [5000, 7000] bits, deadlines in [400, 500] ms, u_max = 3, 1 km cell.

use super::ExperimentError;
use crate::channel::{ChannelModel, CostHataParams};
use crate::model::SystemConfig;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    /// Heuristic vs exhaustive-oracle energy on tiny instances.
    Fig1,
    /// Energy vs number of frequency RBs for several u_max values.
    Fig2,
    /// Spectral efficiency vs average task input size.
    Fig3,
    /// Computing time vs users for different computing-RB granularities.
    Fig4,
    /// Computing-time fairness vs users for the same granularities.
    Fig5,
    Custom,
}

impl ExperimentId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fig1" => Some(ExperimentId::Fig1),
            "fig2" => Some(ExperimentId::Fig2),
            "fig3" => Some(ExperimentId::Fig3),
            "fig4" => Some(ExperimentId::Fig4),
            "fig5" => Some(ExperimentId::Fig5),
            "custom" => Some(ExperimentId::Custom),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    NumUsers,
    NumFreqRbs,
    AvgInputBits,
}

impl SweepVar {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "num_users" | "users" => Some(SweepVar::NumUsers),
            "num_freq_rbs" | "freq_rbs" => Some(SweepVar::NumFreqRbs),
            "avg_input_bits" | "avg_input" => Some(SweepVar::AvgInputBits),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVar::NumUsers => "num_users",
            SweepVar::NumFreqRbs => "num_freq_rbs",
            SweepVar::AvgInputBits => "avg_input_bits",
        }
    }
}

/// Uniform bounds for task generation.
#[derive(Debug, Clone)]
pub struct TaskBounds {
    pub workload_cycles: (f64, f64),
    pub input_bits: (f64, f64),
    pub deadline_s: (f64, f64),
    pub power_budget_w: f64,
}

impl Default for TaskBounds {
    fn default() -> Self {
        TaskBounds {
            workload_cycles: (0.5e9, 1e9),
            input_bits: (5000.0, 7000.0),
            deadline_s: (0.4, 0.5),
            power_budget_w: 1.0,
        }
    }
}

/// One cloudlet division scenario: RB count x per-RB capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompScenario {
    pub num_comp_rbs: usize,
    pub capacity_cps: f64,
}

impl CompScenario {
    /// Label like `30x3` (RBs x Gcycles/s).
    pub fn label(&self) -> String {
        let gcps = self.capacity_cps / 1e9;
        if (gcps - gcps.round()).abs() < 1e-9 {
            format!("{}x{}", self.num_comp_rbs, gcps.round() as u64)
        } else {
            format!("{}x{gcps}", self.num_comp_rbs)
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let (rbs, cap) = s.split_once('x')?;
        Some(CompScenario {
            num_comp_rbs: rbs.trim().parse().ok()?,
            capacity_cps: cap.trim().parse::<f64>().ok()? * 1e9,
        })
    }
}

/// A fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    /// u_max family (one experiment pass per entry); meaningful for fig2.
    pub umax_values: Vec<usize>,
    /// Cloudlet division scenarios; meaningful for fig4/fig5.
    pub comp_scenarios: Vec<CompScenario>,
    pub replications: usize,
    /// Seed from the config file, if present (resolution order: config,
    /// then the NOMA_MEC_SEED environment variable, then --seed, then 0).
    pub seed: Option<u64>,
    pub base: SystemConfig,
    /// `num_clusters = 0` in the file: derive per instance.
    pub auto_clusters: bool,
    pub tasks: TaskBounds,
    pub channel: ChannelModel,
}

fn base_system_defaults() -> SystemConfig {
    SystemConfig {
        num_users: 10,
        num_freq_rbs: 30,
        rb_bandwidth_hz: 180e3,
        num_comp_rbs: 30,
        comp_rb_capacity_cps: 10e9,
        max_users_per_rb: 3,
        num_clusters: 0, // derived unless the file pins it
        noise_psd_dbm_per_hz: -173.0,
        cell_radius_m: 1000.0,
    }
}

impl ExperimentSpec {
    /// Stock spec for an experiment id, before file overrides.
    pub fn defaults(id: ExperimentId) -> Self {
        let mut spec = ExperimentSpec {
            id,
            sweep: SweepVar::NumUsers,
            values: vec![10.0],
            umax_values: Vec::new(),
            comp_scenarios: Vec::new(),
            replications: 1,
            seed: None,
            base: base_system_defaults(),
            auto_clusters: true,
            tasks: TaskBounds::default(),
            channel: ChannelModel::default(),
        };
        match id {
            ExperimentId::Fig1 => {
                // Oracle-bearing runs stay tiny so enumeration finishes.
                spec.sweep = SweepVar::NumUsers;
                spec.values = vec![4.0, 5.0, 6.0];
                spec.replications = 5;
                spec.base.num_freq_rbs = 4;
                spec.base.num_comp_rbs = 8;
            }
            ExperimentId::Fig2 => {
                spec.sweep = SweepVar::NumFreqRbs;
                spec.values = vec![6.0, 8.0, 10.0, 12.0];
                spec.umax_values = vec![1, 2, 3];
                spec.base.num_users = 6;
                spec.replications = 50;
            }
            ExperimentId::Fig3 => {
                spec.sweep = SweepVar::AvgInputBits;
                spec.values = vec![4000.0, 5500.0, 7000.0, 8500.0, 10000.0];
                spec.replications = 20;
            }
            ExperimentId::Fig4 | ExperimentId::Fig5 => {
                spec.sweep = SweepVar::NumUsers;
                spec.values = vec![6.0, 9.0, 12.0];
                spec.comp_scenarios = [(30, 3.0), (90, 1.0), (30, 4.0), (120, 1.0)]
                    .iter()
                    .map(|&(n, g)| CompScenario { num_comp_rbs: n, capacity_cps: g * 1e9 })
                    .collect();
                spec.base.num_freq_rbs = 12;
                spec.replications = 50;
            }
            ExperimentId::Custom => {}
        }
        spec
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: String| Err(ExperimentError::Validation(m));
        if self.values.is_empty() {
            return invalid("sweep values must be nonempty".into());
        }
        if self.replications < 1 {
            return invalid("replications must be >= 1".into());
        }
        for &v in &self.values {
            if !(v > 0.0) {
                return invalid(format!("sweep value {v} must be positive"));
            }
        }
        let ranges = [
            ("workload_cycles", self.tasks.workload_cycles),
            ("input_bits", self.tasks.input_bits),
            ("deadline_s", self.tasks.deadline_s),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo > 0.0) || !(hi >= lo) {
                return invalid(format!("{name} range [{lo}, {hi}] invalid"));
            }
        }
        if !(self.tasks.power_budget_w > 0.0) {
            return invalid("power_budget_w must be positive".into());
        }
        if self.umax_values.iter().any(|&u| u < 1) {
            return invalid("umax_values entries must be >= 1".into());
        }
        if matches!(self.id, ExperimentId::Fig4 | ExperimentId::Fig5)
            && self.comp_scenarios.is_empty()
        {
            return invalid("fig4/fig5 need at least one computing scenario".into());
        }
        Ok(())
    }
}

/// Raw parsed file: section -> key -> (value, line number).
type Sections = BTreeMap<String, BTreeMap<String, (String, usize)>>;

fn parse_sections(text: &str) -> Result<Sections, ExperimentError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current = String::from("");
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(ExperimentError::Parse {
                line: line_no,
                message: "unterminated section header".into(),
            })?;
            current = name.trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ExperimentError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        // Inline comments after the value.
        let value = match value.find('#') {
            Some(pos) => &value[..pos],
            None => value,
        };
        sections
            .entry(current.clone())
            .or_default()
            .insert(key.trim().to_string(), (value.trim().to_string(), line_no));
    }
    Ok(sections)
}

struct SectionReader<'a> {
    map: Option<&'a BTreeMap<String, (String, usize)>>,
}

impl<'a> SectionReader<'a> {
    fn get(&self, key: &str) -> Option<&'a (String, usize)> {
        self.map.and_then(|m| m.get(key))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ExperimentError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse().map(Some).map_err(|e| ExperimentError::Parse {
                line: *line,
                message: format!("{key}: {e}"),
            }),
        }
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ExperimentError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|e| ExperimentError::Parse {
                        line: *line,
                        message: format!("{key}: `{}`: {e}", item.trim()),
                    })
                })
                .collect::<Result<Vec<T>, _>>()
                .map(Some),
        }
    }

    fn parse_pair(&self, key: &str) -> Result<Option<(f64, f64)>, ExperimentError> {
        match self.parse_list::<f64>(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some((v[0], v[1]))),
            Some(v) if v.len() == 1 => Ok(Some((v[0], v[0]))),
            Some(v) => Err(ExperimentError::Parse {
                line: self.get(key).map(|(_, l)| *l).unwrap_or(0),
                message: format!("{key}: expected `low, high`, got {} values", v.len()),
            }),
        }
    }
}

/// Parses an experiment spec from config text.
pub fn parse_config_text(text: &str) -> Result<ExperimentSpec, ExperimentError> {
    let sections = parse_sections(text)?;
    let section = |name: &str| SectionReader { map: sections.get(name) };

    let exp = section("experiment");
    let id = match exp.get("id") {
        None => ExperimentId::Custom,
        Some((raw, line)) => ExperimentId::parse(raw).ok_or(ExperimentError::Parse {
            line: *line,
            message: format!("unknown experiment id `{raw}`"),
        })?,
    };
    let mut spec = ExperimentSpec::defaults(id);

    if let Some((raw, line)) = exp.get("sweep") {
        spec.sweep = SweepVar::parse(raw).ok_or(ExperimentError::Parse {
            line: *line,
            message: format!("unknown sweep variable `{raw}`"),
        })?;
    }
    if let Some(values) = exp.parse_list::<f64>("values")? {
        spec.values = values;
    }
    if let Some(umax) = exp.parse_list::<usize>("umax_values")? {
        spec.umax_values = umax;
    }
    if let Some(reps) = exp.parse::<usize>("replications")? {
        spec.replications = reps;
    }
    if let Some(seed) = exp.parse::<u64>("seed")? {
        spec.seed = Some(seed);
    }

    let sys = section("system");
    if let Some(v) = sys.parse::<usize>("num_users")? {
        spec.base.num_users = v;
    }
    if let Some(v) = sys.parse::<usize>("num_freq_rbs")? {
        spec.base.num_freq_rbs = v;
    }
    if let Some(v) = sys.parse::<f64>("rb_bandwidth_hz")? {
        spec.base.rb_bandwidth_hz = v;
    }
    if let Some(v) = sys.parse::<usize>("num_comp_rbs")? {
        spec.base.num_comp_rbs = v;
    }
    if let Some(v) = sys.parse::<f64>("comp_rb_capacity_cps")? {
        spec.base.comp_rb_capacity_cps = v;
    }
    if let Some(v) = sys.parse::<usize>("max_users_per_rb")? {
        spec.base.max_users_per_rb = v;
    }
    if let Some(v) = sys.parse::<usize>("num_clusters")? {
        spec.base.num_clusters = v;
        spec.auto_clusters = v == 0;
    }
    if let Some(v) = sys.parse::<f64>("noise_psd_dbm_per_hz")? {
        spec.base.noise_psd_dbm_per_hz = v;
    }
    if let Some(v) = sys.parse::<f64>("cell_radius_m")? {
        spec.base.cell_radius_m = v;
    }

    let tasks = section("tasks");
    if let Some(p) = tasks.parse_pair("workload_cycles")? {
        spec.tasks.workload_cycles = p;
    }
    if let Some(p) = tasks.parse_pair("input_bits")? {
        spec.tasks.input_bits = p;
    }
    if let Some(p) = tasks.parse_pair("deadline_s")? {
        spec.tasks.deadline_s = p;
    }
    if let Some(v) = tasks.parse::<f64>("power_budget_w")? {
        spec.tasks.power_budget_w = v;
    }

    let channel = section("channel");
    let mut path_loss = CostHataParams::default();
    if let Some(v) = channel.parse::<f64>("carrier_freq_mhz")? {
        path_loss.carrier_freq_mhz = v;
    }
    if let Some(v) = channel.parse::<f64>("bs_height_m")? {
        path_loss.bs_height_m = v;
    }
    if let Some(v) = channel.parse::<f64>("ue_height_m")? {
        path_loss.ue_height_m = v;
    }
    if let Some(v) = channel.parse::<f64>("area_correction_db")? {
        path_loss.area_correction_db = v;
    }
    if let Some(v) = channel.parse::<f64>("min_distance_m")? {
        path_loss.min_distance_m = v;
    }
    spec.channel.path_loss = path_loss;
    if let Some(v) = channel.parse::<f64>("shadowing_sigma_db")? {
        spec.channel.shadowing_sigma_db = v;
    }
    if let Some((raw, line)) = channel.get("fading") {
        spec.channel.fading = match raw.as_str() {
            "on" | "true" | "1" => true,
            "off" | "false" | "0" => false,
            other => {
                return Err(ExperimentError::Parse {
                    line: *line,
                    message: format!("fading: expected on/off, got `{other}`"),
                })
            }
        };
    }

    let scen = section("scenarios");
    if let Some((raw, line)) = scen.get("comp_scenarios") {
        let parsed: Result<Vec<CompScenario>, ExperimentError> = raw
            .split(',')
            .map(|item| {
                CompScenario::parse(item.trim()).ok_or(ExperimentError::Parse {
                    line: *line,
                    message: format!("comp_scenarios: bad entry `{}`", item.trim()),
                })
            })
            .collect();
        spec.comp_scenarios = parsed?;
    }

    spec.validate()?;
    Ok(spec)
}

/// Reads and parses a config file.
pub fn parse_config(path: &std::path::Path) -> Result<ExperimentSpec, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Validation(format!(
        "cannot read config `{}`: {e}",
        path.display()
    )))?;
    parse_config_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_custom_config_takes_stock_defaults() {
        let spec = parse_config_text("").unwrap();
        assert_eq!(spec.id, ExperimentId::Custom);
        assert_eq!(spec.base.num_freq_rbs, 30);
        assert!((spec.base.rb_bandwidth_hz - 180e3).abs() < 1e-9);
        assert_eq!(spec.base.num_comp_rbs, 30);
        assert!((spec.base.comp_rb_capacity_cps - 10e9).abs() < 1.0);
        assert!((spec.base.noise_psd_dbm_per_hz + 173.0).abs() < 1e-12);
        assert!((spec.channel.shadowing_sigma_db - 8.0).abs() < 1e-12);
        assert!((spec.tasks.power_budget_w - 1.0).abs() < 1e-12);
        assert_eq!(spec.tasks.workload_cycles, (0.5e9, 1e9));
        assert_eq!(spec.tasks.input_bits, (5000.0, 7000.0));
        assert_eq!(spec.tasks.deadline_s, (0.4, 0.5));
        assert_eq!(spec.replications, 1);
    }

    #[test]
    fn sweep_list_parses_into_families() {
        let spec = parse_config_text(
            "[experiment]\nsweep = num_users\nvalues = 4, 6, 8\nreplications = 3\n",
        )
        .unwrap();
        assert_eq!(spec.sweep, SweepVar::NumUsers);
        assert_eq!(spec.values, vec![4.0, 6.0, 8.0]);
        assert_eq!(spec.replications, 3);
    }

    #[test]
    fn zero_replications_rejected() {
        let err = parse_config_text("[experiment]\nreplications = 0\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Validation(_)));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config_text("[experiment]\nid fig2\n").unwrap_err();
        match err {
            ExperimentError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let err = parse_config_text("[experiment]\nreplications = many\n").unwrap_err();
        match err {
            ExperimentError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn fig_defaults_differ() {
        let fig1 = parse_config_text("[experiment]\nid = fig1\n").unwrap();
        assert_eq!(fig1.base.num_freq_rbs, 4);
        assert_eq!(fig1.base.num_comp_rbs, 8);
        let fig2 = parse_config_text("[experiment]\nid = fig2\n").unwrap();
        assert_eq!(fig2.umax_values, vec![1, 2, 3]);
        assert_eq!(fig2.values, vec![6.0, 8.0, 10.0, 12.0]);
        let fig4 = parse_config_text("[experiment]\nid = fig4\n").unwrap();
        assert_eq!(fig4.comp_scenarios.len(), 4);
        assert_eq!(fig4.comp_scenarios[0].label(), "30x3");
    }

    #[test]
    fn scenario_labels_round_trip() {
        let s = CompScenario::parse("120x1").unwrap();
        assert_eq!(s.num_comp_rbs, 120);
        assert!((s.capacity_cps - 1e9).abs() < 1.0);
        assert_eq!(s.label(), "120x1");
    }

    #[test]
    fn inline_comments_and_overrides() {
        let text = "\
[experiment]
id = fig2          # energy vs spectrum
seed = 7
[system]
num_users = 8      # desk scale
[channel]
fading = off
";
        let spec = parse_config_text(text).unwrap();
        assert_eq!(spec.base.num_users, 8);
        assert_eq!(spec.seed, Some(7));
        assert!(!spec.channel.fading);
    }
}
