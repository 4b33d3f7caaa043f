//! Approximate capacity methods.
//!
//! Two shortcuts to the exact determinant test, both built on the per-user
//! macro gain share `r = T_M / (T_M + T_u)`:
//!
//! * **Averaged weights** ([`approx1_feasible`]): replace every user's
//!   combining weights in the interference term by their population averages.
//!   Feasibility then reduces to `A^2 + B^2 < N K'`, where `A` is the sum of
//!   the gain shares and `B = N - A`.
//! * **Gaussian closed form** ([`approx2_capacity`]): treat the fluctuation
//!   of `A` around its mean as Gaussian and keep only the in-phase part,
//!   which yields a closed-form capacity from the mean and standard
//!   deviation of `r` alone.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::feasibility::{Diagnostic, FeasibilityVerdict, GainTable};
use crate::geometry::sample_user;
use crate::params::SystemParams;

/// Samples processed per parallel chunk during moment estimation.
const MOMENT_CHUNK: usize = 8192;

/// Mean and standard deviation of the per-user macro gain share
/// `r = T_M / (T_M + T_u)`, estimated by simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mu: f64,
    pub sigma: f64,
    pub samples: usize,
}

/// Averaged-weight feasibility test.
///
/// `A` sums the macro gain shares, `B = N - A` the micro shares; the user
/// set passes when `A^2 + B^2 < N K'`. The verdict's margin diagnostic is
/// `N K' - (A^2 + B^2)`.
pub fn approx1_feasible(gains: &GainTable, k_prime: f64) -> FeasibilityVerdict {
    assert!(k_prime > 0.0, "k_prime must be positive");
    let n = gains.n() as f64;
    let a: f64 = gains
        .t_macro()
        .iter()
        .zip(gains.t_micro())
        .map(|(&m, &u)| m / (m + u))
        .sum();
    let b = n - a;
    let margin = n * k_prime - (a * a + b * b);
    FeasibilityVerdict {
        feasible: margin > 0.0,
        indeterminate: false,
        diagnostic: Diagnostic::Margin(margin),
        powers: None,
    }
}

/// Running mean / second central moment, mergeable across chunks.
#[derive(Debug, Clone, Copy)]
struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Self { count, mean, m2 }
    }
}

/// Estimates the gain-share moments by drawing fresh users.
///
/// Sampling is chunked; chunk `c` draws from stream `c` of `seed`, and the
/// chunk results are merged in index order, so the estimate is a pure
/// function of `(params, sample_count, seed)` whatever the thread count.
/// The stream is the caller's to dedicate: capacity sweeps derive one per
/// density, separate from every trial stream.
pub fn estimate_moments(
    params: &SystemParams,
    sample_count: usize,
    seed: u64,
) -> MomentEstimate {
    assert!(sample_count >= 2, "need at least two samples for a variance");
    let chunks = sample_count.div_ceil(MOMENT_CHUNK);
    let partials: Vec<RunningMoments> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let take = MOMENT_CHUNK.min(sample_count - chunk * MOMENT_CHUNK);
            let mut acc = RunningMoments::new();
            for _ in 0..take {
                let user = sample_user(params, &mut rng);
                acc.push(user.t_macro / (user.t_macro + user.t_micro));
            }
            acc
        })
        .collect();
    let total = partials
        .into_iter()
        .fold(RunningMoments::new(), RunningMoments::merge);

    let mu = total.mean;
    let sigma = (total.m2 / (total.count - 1) as f64).sqrt();
    debug_assert!(mu > 0.0 && mu < 1.0, "gain share mean out of (0,1): {mu}");
    MomentEstimate {
        mu,
        sigma,
        samples: total.count,
    }
}

/// Closed-form capacity from the gain-share moments.
///
/// Returns the largest user count for which the Gaussian model of the
/// averaged-weight sum keeps the feasibility probability at `alpha` or
/// better, rounded down; zero when even one user fails the bound.
pub fn approx2_capacity(moments: &MomentEstimate, k_prime: f64, alpha: f64) -> usize {
    assert!(k_prime > 0.0, "k_prime must be positive");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    let mu = moments.mu;
    let spread = (1.0 - 2.0 * mu + 2.0 * mu * mu).sqrt();
    let u_alpha = normal_quantile(alpha);
    let numerator = k_prime.sqrt() - u_alpha * moments.sigma * (2.0 * mu - 1.0).abs() / spread;
    if numerator <= 0.0 {
        return 0;
    }
    let bound = (numerator / spread).powi(2);
    bound.floor() as usize
}

/// Gaussian model of the probability that `n` users pass the
/// averaged-weight test: the in-phase fluctuation of the share sum is
/// normal with mean `n * spread` and deviation `sqrt(n) * sigma * |2 mu - 1|
/// / spread`. Degenerates to a step when that deviation vanishes.
pub fn gaussian_feasibility_probability(
    moments: &MomentEstimate,
    n: usize,
    k_prime: f64,
) -> f64 {
    let mu = moments.mu;
    let spread = (1.0 - 2.0 * mu + 2.0 * mu * mu).sqrt();
    let mean_z = n as f64 * spread;
    let sd_z = (n as f64).sqrt() * moments.sigma * (2.0 * mu - 1.0).abs() / spread;
    let threshold = (n as f64 * k_prime).sqrt();
    if sd_z == 0.0 {
        return if mean_z < threshold { 1.0 } else { 0.0 };
    }
    normal_cdf((threshold - mean_z) / sd_z)
}

/// Standard normal quantile (inverse CDF) by Acklam's rational
/// approximation, accurate to about 1e-9 relative over (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 error-function fit
/// (absolute error below 1.5e-7).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    const A1: f64 = 0.254829592;
    const A2: f64 = -0.284496736;
    const A3: f64 = 1.421413741;
    const A4: f64 = -1.453152027;
    const A5: f64 = 1.061405429;
    const P: f64 = 0.3275911;

    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + P * x);
    let y = 1.0 - ((((A5 * t + A4) * t + A3) * t + A2) * t + A1) * t * (-x * x).exp();
    sign * y
}
