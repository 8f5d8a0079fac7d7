//! Reproducible single-cell scenarios and per-user per-RB channel gains.
//!
//! Gains combine COST231-Hata path loss, lognormal shadowing and i.i.d.
//! Rayleigh fading per (user, RB) — exponential(1) power fading standing in
//! for a tapped-delay-line model, since only per-RB gain diversity matters
//! here. Positions, shadowing and fading each draw from their own seeded
//! stream, so disabling one source never shifts another.

use crate::model::{ModelError, SystemConfig};
use crate::seed::stream;
use crate::units::db_to_linear;
use rand::Rng;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel csv parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("channel csv is missing entry for user {user}, rb {rb}")]
    MissingEntry { user: usize, rb: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// User drop for one cell: positions in meters relative to the base station.
#[derive(Debug, Clone)]
pub struct CellScenario {
    pub positions: Vec<(f64, f64)>,
    pub seed: u64,
}

impl CellScenario {
    pub fn distance_m(&self, user: usize) -> f64 {
        let (x, y) = self.positions[user];
        x.hypot(y)
    }
}

/// Linear power gain per (user, frequency RB) plus per-user averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub gains: Vec<Vec<f64>>,
    pub avg_gains: Vec<f64>,
}

impl ChannelMatrix {
    pub fn from_gains(gains: Vec<Vec<f64>>) -> Self {
        let avg_gains = gains
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len().max(1) as f64)
            .collect();
        ChannelMatrix { gains, avg_gains }
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    /// Writes `user,rb,gain_db` rows for cross-implementation comparison.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ChannelError> {
        writeln!(out, "user,rb,gain_db")?;
        for (u, row) in self.gains.iter().enumerate() {
            for (r, &g) in row.iter().enumerate() {
                writeln!(out, "{u},{r},{}", 10.0 * g.log10())?;
            }
        }
        Ok(())
    }

    /// Reads the matrix back from `user,rb,gain_db` rows.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, ChannelError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let (mut max_u, mut max_r) = (0usize, 0usize);
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || (idx == 0 && trimmed.starts_with("user")) {
                continue;
            }
            let parts: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(ChannelError::Parse {
                    line: idx + 1,
                    message: format!("expected 3 fields, got {}", parts.len()),
                });
            }
            let parse_err = |message: String| ChannelError::Parse { line: idx + 1, message };
            let u: usize = parts[0].parse().map_err(|e| parse_err(format!("user: {e}")))?;
            let r: usize = parts[1].parse().map_err(|e| parse_err(format!("rb: {e}")))?;
            let db: f64 = parts[2].parse().map_err(|e| parse_err(format!("gain_db: {e}")))?;
            max_u = max_u.max(u);
            max_r = max_r.max(r);
            entries.push((u, r, db));
        }
        let mut gains = vec![vec![f64::NAN; max_r + 1]; max_u + 1];
        for (u, r, db) in entries {
            gains[u][r] = db_to_linear(db);
        }
        for (u, row) in gains.iter().enumerate() {
            for (r, g) in row.iter().enumerate() {
                if g.is_nan() {
                    return Err(ChannelError::MissingEntry { user: u, rb: r });
                }
            }
        }
        Ok(ChannelMatrix::from_gains(gains))
    }
}

/// COST231-Hata micro-cell propagation parameters.
#[derive(Debug, Clone)]
pub struct CostHataParams {
    pub carrier_freq_mhz: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    /// Area correction term (0 dB for medium city / suburban).
    pub area_correction_db: f64,
    /// Distances below this are clamped before evaluating the model.
    pub min_distance_m: f64,
}

impl Default for CostHataParams {
    fn default() -> Self {
        CostHataParams {
            carrier_freq_mhz: 2000.0,
            bs_height_m: 15.0,
            ue_height_m: 1.5,
            area_correction_db: 0.0,
            min_distance_m: 10.0,
        }
    }
}

impl CostHataParams {
    /// Mobile-antenna correction for a small/medium city.
    fn antenna_correction_db(&self) -> f64 {
        let lf = self.carrier_freq_mhz.log10();
        (1.1 * lf - 0.7) * self.ue_height_m - (1.56 * lf - 0.8)
    }

    /// Path loss in dB at `distance_m`, clamped to `min_distance_m` and to
    /// nonnegative loss.
    pub fn path_loss_db(&self, distance_m: f64) -> f64 {
        let d_km = distance_m.max(self.min_distance_m) / 1000.0;
        let lf = self.carrier_freq_mhz.log10();
        let lh = self.bs_height_m.log10();
        let pl = 46.3 + 33.9 * lf - 13.82 * lh - self.antenna_correction_db()
            + (44.9 - 6.55 * lh) * d_km.log10()
            + self.area_correction_db;
        pl.max(0.0)
    }
}

/// Full channel model: path loss plus optional shadowing and fast fading.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub path_loss: CostHataParams,
    pub shadowing_sigma_db: f64,
    pub fading: bool,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            path_loss: CostHataParams::default(),
            shadowing_sigma_db: 8.0,
            fading: true,
        }
    }
}

/// Standard normal via Box-Muller; `u1` kept away from zero.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Exponential(1) power fade, floored to keep linear gains positive.
fn rayleigh_power_fade<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    (-(1.0 - u).ln()).max(1e-12)
}

/// Drops `config.num_users` users uniformly over the cell disk.
///
/// Polar sampling with the square-root radial transform; the same seed
/// reproduces the same drop bit for bit. Each user draws from its own
/// stream, so user `u`'s position does not depend on how many users the
/// scenario holds — growing a sweep keeps the common prefix.
pub fn generate_scenario(config: &SystemConfig, seed: u64) -> Result<CellScenario, ModelError> {
    config.validate()?;
    let positions = (0..config.num_users)
        .map(|u| {
            let mut rng = stream(seed, "positions", &[u as u64]);
            let radius = config.cell_radius_m * rng.gen::<f64>().sqrt();
            let angle = 2.0 * PI * rng.gen::<f64>();
            (radius * angle.cos(), radius * angle.sin())
        })
        .collect();
    Ok(CellScenario { positions, seed })
}

impl ChannelModel {
    /// Builds the gain matrix for a scenario: `-PL(d) + X + F` in dB per
    /// (user, RB), converted to linear. Deterministic per `seed`.
    ///
    /// Shadowing and fading draw from per-user streams, so the gain of
    /// (user, RB) is independent of the matrix dimensions: a matrix over
    /// fewer RBs or users is a sub-block of the larger one under the same
    /// seed, which keeps sweep comparisons paired.
    pub fn generate(
        &self,
        scenario: &CellScenario,
        config: &SystemConfig,
        seed: u64,
    ) -> ChannelMatrix {
        let num_rbs = config.num_freq_rbs;
        let mut gains = Vec::with_capacity(scenario.positions.len());
        for u in 0..scenario.positions.len() {
            let mut shadow_rng = stream(seed, "shadowing", &[u as u64]);
            let mut fade_rng = stream(seed, "fading", &[u as u64]);
            let pl_db = self.path_loss.path_loss_db(scenario.distance_m(u));
            let shadow_db = self.shadowing_sigma_db * standard_normal(&mut shadow_rng);
            let row = (0..num_rbs)
                .map(|_| {
                    let fade = if self.fading { rayleigh_power_fade(&mut fade_rng) } else { 1.0 };
                    db_to_linear(-pl_db + shadow_db) * fade
                })
                .collect();
            gains.push(row);
        }
        ChannelMatrix::from_gains(gains)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(num_users: usize, num_rbs: usize) -> SystemConfig {
        SystemConfig {
            num_users,
            num_freq_rbs: num_rbs,
            rb_bandwidth_hz: 180e3,
            num_comp_rbs: 30,
            comp_rb_capacity_cps: 10e9,
            max_users_per_rb: 3,
            num_clusters: crate::model::default_num_clusters(num_users, 3),
            noise_psd_dbm_per_hz: -173.0,
            cell_radius_m: 1000.0,
        }
    }

    #[test]
    fn scenario_deterministic_and_in_disk() {
        let cfg = config(100, 4);
        let a = generate_scenario(&cfg, 11).unwrap();
        let b = generate_scenario(&cfg, 11).unwrap();
        assert_eq!(a.positions, b.positions);
        for u in 0..100 {
            assert!(a.distance_m(u) <= 1000.0 + 1e-9);
        }
        let c = generate_scenario(&cfg, 12).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn uniform_disk_mean_distance() {
        // E[r] = 2R/3 for a uniform disk.
        let cfg = config(10_000, 1);
        let s = generate_scenario(&cfg, 5).unwrap();
        let mean: f64 = (0..10_000).map(|u| s.distance_m(u)).sum::<f64>() / 1e4;
        let expected = 2.0 / 3.0 * 1000.0;
        assert!((mean - expected).abs() / expected < 0.02, "mean {mean}");
    }

    #[test]
    fn cost_hata_reference_value() {
        // Hand evaluation at f = 2000 MHz, hb = 15 m, hm = 1.5 m, d = 1 km.
        let p = CostHataParams::default();
        assert!((p.path_loss_db(1000.0) - 141.9042429532497).abs() < 1e-9);
    }

    #[test]
    fn cost_hata_monotone_and_decade_slope() {
        let p = CostHataParams::default();
        assert!(p.path_loss_db(2000.0) > p.path_loss_db(1000.0));
        let slope = p.path_loss_db(10_000.0) - p.path_loss_db(1000.0);
        assert!((slope - (44.9 - 6.55 * 15f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn distances_below_clamp_saturate() {
        let p = CostHataParams::default();
        assert_eq!(p.path_loss_db(3.0), p.path_loss_db(10.0));
        assert!(p.path_loss_db(0.0) >= 0.0);
    }

    #[test]
    fn gains_deterministic_per_seed() {
        let cfg = config(8, 4);
        let s = generate_scenario(&cfg, 3).unwrap();
        let model = ChannelModel::default();
        let a = model.generate(&s, &cfg, 21);
        let b = model.generate(&s, &cfg, 21);
        assert_eq!(a, b);
        let c = model.generate(&s, &cfg, 22);
        assert_ne!(a, c);
    }

    #[test]
    fn disabled_randomness_leaves_pure_path_loss() {
        let cfg = config(5, 6);
        let s = generate_scenario(&cfg, 9).unwrap();
        let model = ChannelModel {
            shadowing_sigma_db: 0.0,
            fading: false,
            ..ChannelModel::default()
        };
        let m = model.generate(&s, &cfg, 1);
        for u in 0..5 {
            let expected = db_to_linear(-model.path_loss.path_loss_db(s.distance_m(u)));
            for r in 0..6 {
                assert!((m.gains[u][r] - expected).abs() / expected < 1e-12);
            }
        }
    }

    #[test]
    fn shadowing_std_matches_sigma() {
        let cfg = config(10_000, 1);
        let s = generate_scenario(&cfg, 2).unwrap();
        let model = ChannelModel { fading: false, ..ChannelModel::default() };
        let m = model.generate(&s, &cfg, 7);
        // Recover the shadowing sample in dB from each user's gain.
        let samples: Vec<f64> = (0..10_000)
            .map(|u| {
                10.0 * m.gains[u][0].log10() + model.path_loss.path_loss_db(s.distance_m(u))
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
            / (samples.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 8.0).abs() < 0.2, "std {std}");
    }

    #[test]
    fn all_gains_positive_and_averages_consistent() {
        let cfg = config(50, 8);
        let s = generate_scenario(&cfg, 4).unwrap();
        let m = ChannelModel::default().generate(&s, &cfg, 4);
        for u in 0..50 {
            let mut sum = 0.0;
            for r in 0..8 {
                assert!(m.gains[u][r] > 0.0);
                sum += m.gains[u][r];
            }
            let avg = sum / 8.0;
            assert!((avg - m.avg_gains[u]).abs() / avg < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let cfg = config(4, 3);
        let s = generate_scenario(&cfg, 6).unwrap();
        let m = ChannelModel::default().generate(&s, &cfg, 6);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = ChannelMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.num_users(), 4);
        assert_eq!(back.num_rbs(), 3);
        for u in 0..4 {
            for r in 0..3 {
                let rel = (back.gains[u][r] - m.gains[u][r]).abs() / m.gains[u][r];
                assert!(rel < 1e-12);
            }
        }
    }

    #[test]
    fn smaller_matrices_are_sub_blocks_of_larger_ones() {
        // Same seed, fewer RBs or users: the gains must be the common
        // prefix, so sweep points share their randomness.
        let small_cfg = config(4, 3);
        let large_cfg = config(6, 8);
        let model = ChannelModel::default();
        let small_s = generate_scenario(&small_cfg, 31).unwrap();
        let large_s = generate_scenario(&large_cfg, 31).unwrap();
        for u in 0..4 {
            assert_eq!(small_s.positions[u], large_s.positions[u]);
        }
        let small = model.generate(&small_s, &small_cfg, 5);
        let large = model.generate(&large_s, &large_cfg, 5);
        for u in 0..4 {
            for r in 0..3 {
                assert_eq!(small.gains[u][r], large.gains[u][r]);
            }
        }
    }

    #[test]
    fn fading_toggle_does_not_shift_shadowing() {
        let cfg = config(6, 2);
        let s = generate_scenario(&cfg, 8).unwrap();
        let with = ChannelModel { fading: true, ..ChannelModel::default() };
        let without = ChannelModel { fading: false, ..ChannelModel::default() };
        let a = with.generate(&s, &cfg, 5);
        let b = without.generate(&s, &cfg, 5);
        // Same shadowing realization: the per-user average over many RBs is
        // not comparable, but the fade-free gain must divide out exactly.
        for u in 0..6 {
            let ratio0 = a.gains[u][0] / b.gains[u][0];
            assert!(ratio0 > 0.0);
            // b has no fading: both RBs equal.
            assert!((b.gains[u][0] - b.gains[u][1]).abs() / b.gains[u][0] < 1e-12);
        }
    }
}
