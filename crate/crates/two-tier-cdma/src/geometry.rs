//! User placement and radio propagation.
//!
//! Users come from two populations: low-density users uniform over the whole
//! coverage square, and high-density users uniform over the hotspot square
//! around the microcell base. Each user gets one shadowing draw per base and
//! a dual-slope path gain to each base: inverse-square out to the breakpoint
//! distance, inverse-fourth beyond it, times a lognormal shadowing factor.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::params::SystemParams;

/// Users closer to a base than this are treated as exactly this far away.
/// The propagation law diverges at zero distance; 1 m is far below any
/// realistic breakpoint, so the clamp is statistically invisible.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Which population a sampled user was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    /// Uniform over the whole coverage region.
    LowDensity,
    /// Uniform over the hotspot square around the microcell base.
    HighDensity,
}

/// One sampled user: position, per-base shadowing draws, and the resulting
/// linear path gains to the macrocell (`t_macro`) and microcell (`t_micro`).
#[derive(Debug, Clone)]
pub struct UserSample {
    pub position: (f64, f64),
    pub chi_macro_db: f64,
    pub chi_micro_db: f64,
    pub t_macro: f64,
    pub t_micro: f64,
    pub population: Population,
}

/// Identifies the deterministic random stream a trial is drawn from.
///
/// A trial is a pure function of this pair: the same `(master_seed, stream)`
/// always reproduces the same users, regardless of thread count or of how
/// many other trials ran before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeed {
    pub master_seed: u64,
    pub stream: u64,
}

impl TrialSeed {
    /// Instantiates the generator for this trial.
    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// The users of one Monte Carlo trial, plus the stream that produced them.
#[derive(Debug, Clone)]
pub struct TrialSet {
    pub users: Vec<UserSample>,
    pub seed_info: TrialSeed,
}

/// Dual-slope path gain with lognormal shadowing, in linear units.
///
/// Inverse-square law out to the breakpoint `b_m`, inverse-fourth beyond it;
/// `h` is the proportionality constant of the link and `chi_db` the shadowing
/// draw in dB. Distances below [`MIN_DISTANCE_M`] are clamped up to it.
/// The two branches agree at `d_m == b_m`.
pub fn path_gain(d_m: f64, b_m: f64, h: f64, chi_db: f64) -> f64 {
    assert!(d_m > 0.0, "path_gain: distance must be positive, got {d_m}");
    assert!(b_m > 0.0, "path_gain: breakpoint must be positive, got {b_m}");
    assert!(h > 0.0, "path_gain: scale must be positive, got {h}");
    let d = d_m.max(MIN_DISTANCE_M);
    let ratio = b_m / d;
    let slope = if d <= b_m { ratio * ratio } else { ratio.powi(4) };
    h * slope * 10f64.powf(chi_db / 10.0)
}

/// Draws one user: population, position, shadowing, and both path gains.
///
/// With probability `hotspot_density` the position is uniform on the hotspot
/// square centered at `(x0_m, 0)`; otherwise uniform on the coverage square
/// centered at the origin. Both squares are sampled half-open on each axis.
/// Shadowing draws for the two bases are independent.
pub fn sample_user<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> UserSample {
    let population = if rng.random::<f64>() < params.hotspot_density {
        Population::HighDensity
    } else {
        Population::LowDensity
    };

    let (cx, half) = match population {
        Population::HighDensity => (params.x0_m, params.hotspot_side_m / 2.0),
        Population::LowDensity => (0.0, params.region_side_m / 2.0),
    };
    let x = rng.random_range(cx - half..cx + half);
    let y = rng.random_range(-half..half);

    let chi_macro_db = Normal::new(0.0, params.sigma_macro_db)
        .expect("sigma_macro_db validated nonnegative")
        .sample(rng);
    let chi_micro_db = Normal::new(0.0, params.sigma_micro_db)
        .expect("sigma_micro_db validated nonnegative")
        .sample(rng);

    let d_macro = (x * x + y * y).sqrt().max(MIN_DISTANCE_M);
    let dx = x - params.x0_m;
    let d_micro = (dx * dx + y * y).sqrt().max(MIN_DISTANCE_M);

    UserSample {
        position: (x, y),
        chi_macro_db,
        chi_micro_db,
        t_macro: path_gain(d_macro, params.b_macro_m, params.h_ratio, chi_macro_db),
        t_micro: path_gain(d_micro, params.b_micro_m, 1.0, chi_micro_db),
        population,
    }
}

/// Draws the `n` users of one trial from the given stream.
pub fn sample_trial(params: &SystemParams, n: usize, seed: TrialSeed) -> TrialSet {
    assert!(n >= 1, "sample_trial: need at least one user");
    let mut rng = seed.rng();
    let users = (0..n).map(|_| sample_user(params, &mut rng)).collect();
    TrialSet {
        users,
        seed_info: seed,
    }
}
