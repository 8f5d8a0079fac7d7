//! Desk-scale simulator for uplink NOMA with edge-computing offload.
//!
//! Users in a single cell offload compute tasks to a cloudlet at the base
//! station. Spectrum is split into frequency resource blocks (RBs) shared by
//! NOMA clusters with SIC decoding; cloudlet capacity is split into computing
//! RBs. The crate provides:
//!
//! - [`model`]: domain types, achievable rates, times, energies, the
//!   feasibility audit and evaluation metrics;
//! - [`channel`]: reproducible cell scenarios and channel gain matrices
//!   (COST231-Hata path loss, lognormal shadowing, Rayleigh fading);
//! - [`heuristic`]: greedy user clustering and computing/frequency RB
//!   allocation;
//! - [`power`]: per-cluster transmit-power minimization via a log-domain
//!   convex reformulation solved with a barrier interior-point method;
//! - [`oracle`]: exhaustive-enumeration optimal baseline for tiny instances
//!   and grid-search power oracles;
//! - [`experiment`]: seeded experiment sweeps with CSV/JSON output;
//! - [`cli`]: the `noma-mec` command-line entry points.

pub mod channel;
pub mod cli;
pub mod experiment;
pub mod heuristic;
pub mod model;
pub mod oracle;
pub mod power;
pub mod seed;
pub mod units;
