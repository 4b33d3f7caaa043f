//! Uplink user capacity of a two-tier CDMA system.
//!
//! One macrocell contains one embedded hotspot microcell; both serve every
//! uplink user on the same band. This crate answers one question about that
//! system: how many users can be power-controlled to a target SINR with a
//! given success probability over random placements and shadow fading, and
//! how much does soft handoff (maximal ratio combining of the two received
//! copies) buy over picking the single strongest base?
//!
//! Four methods are implemented:
//!
//! * `exact_soft` — sign of the determinant of the full interference matrix
//!   ([`feasibility::exact_feasible`]), the reference answer;
//! * `hard` — strongest-base assignment with a per-base power solve
//!   ([`feasibility::hard_feasible`]);
//! * `approx1` — averaged combining weights, reducing feasibility to a
//!   scalar comparison ([`approx::approx1_feasible`]);
//! * `approx2` — Gaussian closed form over the gain-share moments
//!   ([`approx::approx2_capacity`]), no per-trial work at all.
//!
//! All Monte Carlo machinery is deterministic: every trial owns a ChaCha
//! stream derived from `(master seed, method, density index, trial index)`,
//! so results do not depend on thread count or scheduling.
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --release --example path_gain          # propagation law
//! cargo run --release --example single_trial       # one user set end to end
//! cargo run --release --example feasibility_curve  # success fraction vs N
//! cargo run --release --example capacity_search    # N* for every method
//! cargo run --release --example moment_estimation  # gain-share moments, closed form
//! cargo run --release --example density_sweep      # full curve, CSV output
//! ```
//!
//! The `two-tier-cdma` binary drives the same sweep from a config file or
//! `--key value` flags; see the crate README.
//!
//! # Quick start
//!
//! ```
//! use two_tier_cdma::capacity::{find_capacity, Method, SeedGrid};
//! use two_tier_cdma::params::SystemParams;
//!
//! let params = SystemParams {
//!     hotspot_density: 0.5,
//!     trials: 200, // keep the doctest fast; default is 10_000
//!     ..SystemParams::default()
//! };
//! let grid = SeedGrid::new(42);
//! let result = find_capacity(&params, Method::Approx1, &grid, 0, 0);
//! assert!(result.capacity > 0);
//! assert!(result.p_hat_at_capacity.unwrap() >= params.confidence);
//! ```

pub mod approx;
pub mod capacity;
pub mod config;
pub mod feasibility;
pub mod geometry;
pub mod linalg;
pub mod params;
pub mod runner;

pub use approx::{approx1_feasible, approx2_capacity, estimate_moments, MomentEstimate};
pub use capacity::{
    feasibility_probability, find_capacity, sweep_hotspot_density, CapacityResult,
    FeasibilityCurvePoint, Method, SeedGrid,
};
pub use config::{parse_config, RunConfig};
pub use feasibility::{
    exact_feasible, hard_feasible, solve_powers, FeasibilityVerdict, GainTable,
};
pub use geometry::{path_gain, sample_trial, sample_user, TrialSeed, TrialSet, UserSample};
pub use params::SystemParams;
pub use runner::{run, run_cli};
