//! Monte Carlo capacity search.
//!
//! For a given user count the trial protocol draws many independent user
//! sets, applies one of the feasibility tests to each, and reports the
//! success fraction. The capacity at a confidence level `alpha` is the
//! largest user count whose success fraction still reaches `alpha`; it is
//! located by exponential bracketing, binary search, and a confirmation scan
//! around the candidate.
//!
//! Every trial draws from its own counter-derived ChaCha stream, so all
//! results are pure functions of `(parameters, master seed)` no matter how
//! many worker threads run or in what order trials complete.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::approx::{approx1_feasible, approx2_capacity, estimate_moments, MomentEstimate};
use crate::approx::normal_quantile;
use crate::feasibility::{exact_feasible, hard_feasible, GainTable};
use crate::geometry::{sample_trial, TrialSeed};
use crate::params::{ParamError, SystemParams};

/// Capacity evaluation method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Soft handoff, determinant sign of the full interference matrix.
    ExactSoft,
    /// Strongest-base hard handoff, power solve.
    Hard,
    /// Averaged-weight feasibility sum.
    Approx1,
    /// Gaussian closed form; no trials, only moment estimation.
    Approx2,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ExactSoft,
        Method::Hard,
        Method::Approx1,
        Method::Approx2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ExactSoft => "exact_soft",
            Method::Hard => "hard",
            Method::Approx1 => "approx1",
            Method::Approx2 => "approx2",
        }
    }

    /// Whether capacity comes from Monte Carlo trials (everything but the
    /// closed-form method).
    pub fn is_simulated(self) -> bool {
        !matches!(self, Method::Approx2)
    }

    fn lane(self) -> u64 {
        match self {
            Method::ExactSoft => 0,
            Method::Hard => 1,
            Method::Approx1 => 2,
            Method::Approx2 => 3,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact_soft" => Ok(Method::ExactSoft),
            "hard" => Ok(Method::Hard),
            "approx1" => Ok(Method::Approx1),
            "approx2" => Ok(Method::Approx2),
            other => Err(format!(
                "unknown method `{other}` (expected exact_soft, hard, approx1 or approx2)"
            )),
        }
    }
}

/// Lane reserved for moment-estimation streams, distinct from every method.
const MOMENT_LANE: u64 = 0x4D;

/// Derives independent random streams from one master seed.
///
/// Stream ids pack `(lane, density index, trial index)` into a u64:
/// bits 56..64 the lane (method, or [`MOMENT_LANE`]), bits 40..56 the
/// density index, bits 0..40 the trial index. The packing is injective, so
/// no two cells of a sweep ever share a stream. The trial index is the only
/// per-trial component: a trial keeps the same stream whatever user count is
/// being tested, which nests the drawn user sets across counts.
#[derive(Debug, Clone, Copy)]
pub struct SeedGrid {
    pub master_seed: u64,
}

impl SeedGrid {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn trial_seed(&self, method: Method, density_index: usize, trial: usize) -> TrialSeed {
        TrialSeed {
            master_seed: self.master_seed,
            stream: pack_stream(method.lane(), density_index, trial),
        }
    }

    /// Seed for the chunked moment sampler at one density. Runs through a
    /// mixer so that chunk streams cannot collide with trial streams.
    pub fn moment_seed(&self, density_index: usize) -> u64 {
        splitmix64(self.master_seed ^ pack_stream(MOMENT_LANE, density_index, 0))
    }
}

fn pack_stream(lane: u64, density_index: usize, trial: usize) -> u64 {
    assert!(lane < 1 << 8, "lane out of range");
    assert!((density_index as u64) < 1 << 16, "density index out of range");
    assert!((trial as u64) < 1 << 40, "trial index out of range");
    (lane << 56) | ((density_index as u64) << 40) | trial as u64
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Produces the gain table of one trial. The simulation source draws users
/// from the system geometry; tests substitute synthetic sources with known
/// feasibility thresholds.
pub trait GainSource: Sync {
    fn gains(&self, n: usize, seed: TrialSeed) -> GainTable;
}

/// Gains drawn from the two-population geometry of a parameter set.
pub struct SampledGains<'a>(pub &'a SystemParams);

impl GainSource for SampledGains<'_> {
    fn gains(&self, n: usize, seed: TrialSeed) -> GainTable {
        GainTable::from_trial(&sample_trial(self.0, n, seed))
    }
}

/// Every user sees the same two gains; feasibility is deterministic with
/// closed-form thresholds. Testing hook.
pub struct IdenticalGains {
    pub t_macro: f64,
    pub t_micro: f64,
}

impl GainSource for IdenticalGains {
    fn gains(&self, n: usize, _seed: TrialSeed) -> GainTable {
        GainTable::identical(n, self.t_macro, self.t_micro)
    }
}

/// Success tally of one `(method, user count)` Monte Carlo cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibilityCurvePoint {
    pub method: Method,
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    /// Trials whose linear algebra was singular to working precision;
    /// counted infeasible, reported separately.
    pub indeterminate: usize,
}

impl FeasibilityCurvePoint {
    pub fn p_hat(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Runs the trial protocol for one user count: `trials` independent user
/// sets, one feasibility test each.
pub fn feasibility_probability(
    source: &impl GainSource,
    method: Method,
    k_prime: f64,
    n: usize,
    trials: usize,
    grid: &SeedGrid,
    density_index: usize,
) -> FeasibilityCurvePoint {
    assert!(n >= 1, "need at least one user");
    assert!(trials >= 1, "need at least one trial");
    assert!(
        method.is_simulated(),
        "the closed-form method has no trial protocol"
    );
    let (successes, indeterminate) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let gains = source.gains(n, grid.trial_seed(method, density_index, trial));
            let verdict = match method {
                Method::ExactSoft => exact_feasible(&gains, k_prime),
                Method::Hard => hard_feasible(&gains, k_prime),
                Method::Approx1 => approx1_feasible(&gains, k_prime),
                Method::Approx2 => unreachable!(),
            };
            (verdict.feasible as usize, verdict.indeterminate as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    FeasibilityCurvePoint {
        method,
        n,
        successes,
        trials,
        indeterminate,
    }
}

/// Capacity of one `(hotspot density, method)` cell.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub hotspot_density: f64,
    pub method: Method,
    /// Largest user count meeting the confidence level (N*).
    pub capacity: usize,
    /// Success fraction measured at N*; absent for the closed form.
    pub p_hat_at_capacity: Option<f64>,
    /// Success fraction measured at N* + 1; absent for the closed form.
    pub p_hat_above: Option<f64>,
    /// 95% Wilson half-width of `p_hat_at_capacity`.
    pub wilson_half_width: Option<f64>,
    /// Indeterminate trials at N*.
    pub indeterminate_at_capacity: usize,
    /// Trials per user count, or moment samples for the closed form.
    pub trials: usize,
    /// Gain-share moments; populated by the closed form only.
    pub moments: Option<MomentEstimate>,
    pub seed: u64,
}

/// Half-width of the 95% Wilson score interval for a binomial fraction.
pub fn wilson_half_width(p_hat: f64, trials: usize) -> f64 {
    let z = normal_quantile(0.975);
    let n = trials as f64;
    let z2 = z * z;
    z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Monte Carlo capacity search over an arbitrary gain source.
///
/// Brackets the threshold by doubling, narrows it by bisection, then
/// confirms with a +/-2 linear scan (success fractions are treated as
/// nonincreasing in the user count; the scan guards against Monte Carlo
/// wobble). The returned capacity N* satisfies the measured conditions
/// `p_hat(N*) >= alpha` and `p_hat(N* + 1) < alpha`.
pub fn simulated_capacity(
    source: &impl GainSource,
    method: Method,
    k_prime: f64,
    alpha: f64,
    trials: usize,
    grid: &SeedGrid,
    density_index: usize,
) -> CapacityResult {
    assert!(method.is_simulated(), "closed-form method has no search");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");

    let mut cache: BTreeMap<usize, FeasibilityCurvePoint> = BTreeMap::new();
    let eval = |n: usize, cache: &mut BTreeMap<usize, FeasibilityCurvePoint>| {
        *cache.entry(n).or_insert_with(|| {
            feasibility_probability(source, method, k_prime, n, trials, grid, density_index)
        })
    };

    let result = |capacity: usize, cache: &BTreeMap<usize, FeasibilityCurvePoint>| {
        let at = cache.get(&capacity);
        let above = cache.get(&(capacity + 1));
        CapacityResult {
            hotspot_density: f64::NAN, // caller's to fill in
            method,
            capacity,
            p_hat_at_capacity: at.map(|p| p.p_hat()),
            p_hat_above: above.map(|p| p.p_hat()),
            wilson_half_width: at.map(|p| wilson_half_width(p.p_hat(), p.trials)),
            indeterminate_at_capacity: at.map_or(0, |p| p.indeterminate),
            trials,
            moments: None,
            seed: grid.master_seed,
        }
    };

    if eval(1, &mut cache).p_hat() < alpha {
        return result(0, &cache);
    }

    // Exponential bracket: lo passes, hi fails.
    let mut lo = 1usize;
    let mut hi = 2usize;
    while eval(hi, &mut cache).p_hat() >= alpha {
        lo = hi;
        hi *= 2;
    }

    // Bisect down to adjacent counts.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval(mid, &mut cache).p_hat() >= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Confirmation scan around the candidate, largest count first.
    let bottom = lo.saturating_sub(2).max(1);
    for n in (bottom..=lo + 2).rev() {
        if eval(n, &mut cache).p_hat() >= alpha && eval(n + 1, &mut cache).p_hat() < alpha {
            return result(n, &cache);
        }
    }
    // Unreachable: `lo` itself satisfies the scan condition.
    result(lo, &cache)
}

/// Capacity of one parameter point under one method.
///
/// Simulated methods run the trial protocol at the parameter set's trial
/// count and confidence; the closed form estimates gain-share moments from
/// `moment_samples` fresh draws on its own stream and applies the formula.
pub fn find_capacity(
    params: &SystemParams,
    method: Method,
    grid: &SeedGrid,
    density_index: usize,
    moment_samples: usize,
) -> CapacityResult {
    let k_prime = params.k_prime();
    match method {
        Method::Approx2 => {
            let moments =
                estimate_moments(params, moment_samples, grid.moment_seed(density_index));
            CapacityResult {
                hotspot_density: params.hotspot_density,
                method,
                capacity: approx2_capacity(&moments, k_prime, params.confidence),
                p_hat_at_capacity: None,
                p_hat_above: None,
                wilson_half_width: None,
                indeterminate_at_capacity: 0,
                trials: moment_samples,
                moments: Some(moments),
                seed: grid.master_seed,
            }
        }
        _ => {
            let source = SampledGains(params);
            let mut result = simulated_capacity(
                &source,
                method,
                k_prime,
                params.confidence,
                params.trials,
                grid,
                density_index,
            );
            result.hotspot_density = params.hotspot_density;
            result
        }
    }
}

/// Capacity at every hotspot density, for every requested method.
///
/// Results are ordered by density (then by the given method order), and each
/// `(density, method)` cell runs on its own seed streams.
pub fn sweep_hotspot_density(
    params: &SystemParams,
    densities: &[f64],
    methods: &[Method],
    seed: u64,
    moment_samples: usize,
) -> Result<Vec<CapacityResult>, ParamError> {
    assert!(!densities.is_empty(), "need at least one density");
    assert!(!methods.is_empty(), "need at least one method");
    let grid = SeedGrid::new(seed);
    let mut results = Vec::with_capacity(densities.len() * methods.len());
    for (density_index, &p_h) in densities.iter().enumerate() {
        let point = params.with_hotspot_density(p_h);
        point.validate()?;
        for &method in methods {
            results.push(find_capacity(&point, method, &grid, density_index, moment_samples));
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_k() -> f64 {
        SystemParams::default().k_prime()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("soft".parse::<Method>().is_err());
    }

    #[test]
    fn stream_ids_are_distinct_across_cells() {
        let grid = SeedGrid::new(7);
        let mut seen = std::collections::HashSet::new();
        for method in [Method::ExactSoft, Method::Hard, Method::Approx1] {
            for density in 0..4 {
                for trial in 0..50 {
                    assert!(seen.insert(grid.trial_seed(method, density, trial).stream));
                }
            }
        }
    }

    #[test]
    fn single_user_always_succeeds() {
        let params = SystemParams::default();
        let grid = SeedGrid::new(11);
        let source = SampledGains(&params);
        for method in [Method::ExactSoft, Method::Hard, Method::Approx1] {
            let point =
                feasibility_probability(&source, method, params.k_prime(), 1, 200, &grid, 0);
            assert_eq!(point.p_hat(), 1.0, "{method}");
            assert_eq!(point.indeterminate, 0);
        }
    }

    #[test]
    fn far_above_pole_capacity_never_succeeds() {
        // n = 100 is far beyond 2K' + 1 = 52; the averaged-weight bound
        // fails identically there and the determinant test follows suit.
        let params = SystemParams::default();
        let grid = SeedGrid::new(13);
        let source = SampledGains(&params);
        for method in [Method::ExactSoft, Method::Approx1] {
            let point =
                feasibility_probability(&source, method, params.k_prime(), 100, 100, &grid, 0);
            assert_eq!(point.p_hat(), 0.0, "{method}");
        }
    }

    #[test]
    fn tallies_are_deterministic_across_worker_counts() {
        let params = SystemParams::default();
        let grid = SeedGrid::new(99);
        let source = SampledGains(&params);
        let base =
            feasibility_probability(&source, Method::ExactSoft, params.k_prime(), 30, 300, &grid, 2);
        let again =
            feasibility_probability(&source, Method::ExactSoft, params.k_prime(), 30, 300, &grid, 2);
        assert_eq!(base, again);
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let from_pool = pool.install(|| {
                feasibility_probability(
                    &source,
                    Method::ExactSoft,
                    params.k_prime(),
                    30,
                    300,
                    &grid,
                    2,
                )
            });
            assert_eq!(base, from_pool, "{threads} threads");
        }
    }

    /// The identical-gain source has deterministic thresholds, so the whole
    /// search machinery can be checked exactly: 52 users under the soft
    /// determinant test, 51 under averaged weights, 26 under hard handoff.
    #[test]
    fn search_recovers_analytic_thresholds() {
        let grid = SeedGrid::new(5);
        let source = IdenticalGains {
            t_macro: 1.0,
            t_micro: 1.0,
        };
        let cases = [
            (Method::ExactSoft, 52),
            (Method::Approx1, 51),
            (Method::Hard, 26),
        ];
        for (method, expected) in cases {
            let result = simulated_capacity(&source, method, table1_k(), 0.95, 8, &grid, 0);
            assert_eq!(result.capacity, expected, "{method}");
            assert_eq!(result.p_hat_at_capacity, Some(1.0));
            assert_eq!(result.p_hat_above, Some(0.0));
        }
    }

    #[test]
    fn search_postconditions_hold_on_sampled_geometry() {
        let params = SystemParams {
            trials: 200,
            ..SystemParams::default()
        };
        let grid = SeedGrid::new(2024);
        let result = find_capacity(&params, Method::Approx1, &grid, 0, 0);
        assert!(result.capacity > 0);
        assert!(result.p_hat_at_capacity.unwrap() >= 0.95);
        assert!(result.p_hat_above.unwrap() < 0.95);
        // Re-measure both counts directly; caching must not have lied.
        let source = SampledGains(&params);
        let at = feasibility_probability(
            &source,
            Method::Approx1,
            params.k_prime(),
            result.capacity,
            200,
            &grid,
            0,
        );
        assert_eq!(Some(at.p_hat()), result.p_hat_at_capacity);
        let above = feasibility_probability(
            &source,
            Method::Approx1,
            params.k_prime(),
            result.capacity + 1,
            200,
            &grid,
            0,
        );
        assert_eq!(Some(above.p_hat()), result.p_hat_above);
    }

    #[test]
    fn closed_form_capacity_comes_from_moments() {
        let params = SystemParams::default();
        let grid = SeedGrid::new(31);
        let result = find_capacity(&params, Method::Approx2, &grid, 0, 40_000);
        let moments = result.moments.expect("closed form records moments");
        assert_eq!(
            result.capacity,
            crate::approx::approx2_capacity(&moments, params.k_prime(), params.confidence)
        );
        assert!(result.p_hat_at_capacity.is_none());
        assert_eq!(result.trials, 40_000);
    }

    #[test]
    fn wilson_half_width_is_tight_at_protocol_scale() {
        assert!(wilson_half_width(0.95, 10_000) < 0.005);
        assert!(wilson_half_width(0.95, 2_000) <= 0.01);
        assert!(wilson_half_width(0.5, 100) > wilson_half_width(0.5, 10_000));
    }

    #[test]
    fn sweep_orders_by_density_and_validates() {
        let params = SystemParams {
            trials: 60,
            ..SystemParams::default()
        };
        let methods = [Method::Approx1];
        let curve =
            sweep_hotspot_density(&params, &[0.0, 0.5, 1.0], &methods, 3, 20_000).unwrap();
        assert_eq!(curve.len(), 3);
        assert_eq!(curve[0].hotspot_density, 0.0);
        assert_eq!(curve[2].hotspot_density, 1.0);

        let err = sweep_hotspot_density(&params, &[1.5], &methods, 3, 0);
        assert!(err.is_err());
    }
}
