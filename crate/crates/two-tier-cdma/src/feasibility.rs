//! Power-control feasibility tests.
//!
//! Under soft handoff every user is received by both bases and the two
//! despread streams are co-phased and summed with gain-proportional weights.
//! Requiring every user's combined SINR to equal the target turns into a
//! linear system `A P = (eta W / K') 1` over the transmit powers, where `A`
//! has the per-user total gain on the diagonal and scaled cross-gain products
//! off it. The user set is supportable exactly when that system has an
//! all-positive solution, which for this matrix family coincides with
//! `det(A) > 0`; both routes are implemented here and checked against each
//! other in the test suites.
//!
//! The hard-handoff baseline assigns each user the single base with the
//! larger path gain and solves the analogous single-serving-base system.

use nalgebra::{DMatrix, DVector};

use crate::geometry::TrialSet;
use crate::linalg::{sign_log_det, DetSign, SignedLogDet};

/// Thermal noise power in internal units. Verdicts are invariant under its
/// value (it cancels from every sign test); it only scales reported powers.
pub const NOISE_POWER: f64 = 1.0;

/// Relative SINR tolerance a returned power vector must satisfy when the
/// target SINR is recomputed from it.
pub const SINR_REL_TOL: f64 = 1e-8;

/// Per-user linear path gains to the two bases, extracted from a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    t_macro: Vec<f64>,
    t_micro: Vec<f64>,
}

impl GainTable {
    pub fn new(t_macro: Vec<f64>, t_micro: Vec<f64>) -> Self {
        assert_eq!(t_macro.len(), t_micro.len(), "gain arrays differ in length");
        assert!(!t_macro.is_empty(), "gain table needs at least one user");
        for (&m, &u) in t_macro.iter().zip(&t_micro) {
            assert!(
                m > 0.0 && m.is_finite() && u > 0.0 && u.is_finite(),
                "path gains must be positive and finite, got ({m}, {u})"
            );
        }
        Self { t_macro, t_micro }
    }

    pub fn from_trial(trial: &TrialSet) -> Self {
        Self::new(
            trial.users.iter().map(|u| u.t_macro).collect(),
            trial.users.iter().map(|u| u.t_micro).collect(),
        )
    }

    /// Synthetic table where every user sees the same two gains. Used as a
    /// deterministic source with known feasibility thresholds.
    pub fn identical(n: usize, t_macro: f64, t_micro: f64) -> Self {
        Self::new(vec![t_macro; n], vec![t_micro; n])
    }

    pub fn n(&self) -> usize {
        self.t_macro.len()
    }

    pub fn t_macro(&self) -> &[f64] {
        &self.t_macro
    }

    pub fn t_micro(&self) -> &[f64] {
        &self.t_micro
    }

    /// Every gain multiplied by a common factor.
    pub fn scaled(&self, c: f64) -> Self {
        Self::new(
            self.t_macro.iter().map(|v| v * c).collect(),
            self.t_micro.iter().map(|v| v * c).collect(),
        )
    }

    /// Users reordered by `perm` (`perm[i]` is the old index of new user `i`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n());
        Self::new(
            perm.iter().map(|&i| self.t_macro[i]).collect(),
            perm.iter().map(|&i| self.t_micro[i]).collect(),
        )
    }

    /// Table with user `drop_index` removed. Needs at least two users.
    pub fn without_user(&self, drop_index: usize) -> Self {
        assert!(self.n() >= 2 && drop_index < self.n());
        let keep = |v: &[f64]| {
            v.iter()
                .enumerate()
                .filter(|(i, _)| *i != drop_index)
                .map(|(_, &g)| g)
                .collect()
        };
        Self::new(keep(&self.t_macro), keep(&self.t_micro))
    }
}

/// Which base serves a user under hard handoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Base {
    Macro,
    Micro,
}

/// Evidence backing a feasibility verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diagnostic {
    /// Determinant of the interference matrix, in sign/log form.
    Determinant(SignedLogDet),
    /// Smallest entry of the solved power vector; positive iff feasible.
    MinPower(f64),
    /// Averaged-weight margin `N K' - (A^2 + B^2)`; positive iff feasible.
    Margin(f64),
}

/// Outcome of one feasibility test.
///
/// `indeterminate` marks trials where the linear algebra lost all significant
/// digits (singular to working precision); such trials are conservatively
/// counted infeasible but kept distinguishable so callers can report them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub indeterminate: bool,
    pub diagnostic: Diagnostic,
    pub powers: Option<Vec<f64>>,
}

/// Squared combining weights `(w_macro^2, w_micro^2)` for one user.
///
/// Gain-proportional combining: each squared weight is that base's share of
/// the user's total path gain, so the pair sums to 1.
pub fn combining_weights(t_macro: f64, t_micro: f64) -> (f64, f64) {
    assert!(
        t_macro > 0.0 && t_micro > 0.0,
        "combining_weights: gains must be positive, got ({t_macro}, {t_micro})"
    );
    let total = t_macro + t_micro;
    (t_macro / total, t_micro / total)
}

/// Builds the soft-handoff interference matrix, row-major.
///
/// Diagonal: the user's total gain. Off-diagonal `(i, j)`: the weighted
/// cross-gain `-(T_Mi T_Mj + T_ui T_uj) / (K' (T_Mi + T_ui))`.
pub fn interference_matrix(gains: &GainTable, k_prime: f64) -> Vec<f64> {
    assert!(k_prime > 0.0, "k_prime must be positive");
    let n = gains.n();
    let tm = gains.t_macro();
    let tu = gains.t_micro();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let total_i = tm[i] + tu[i];
        for j in 0..n {
            a[i * n + j] = if i == j {
                total_i
            } else {
                -(tm[i] * tm[j] + tu[i] * tu[j]) / (k_prime * total_i)
            };
        }
    }
    a
}

/// Serving base per user under hard handoff: the larger path gain wins,
/// exact ties go to the macrocell.
pub fn serving_bases(gains: &GainTable) -> Vec<Base> {
    gains
        .t_macro()
        .iter()
        .zip(gains.t_micro())
        .map(|(&m, &u)| if m >= u { Base::Macro } else { Base::Micro })
        .collect()
}

/// Builds the hard-handoff matrix, row-major: row `i` uses only the gains
/// seen at user `i`'s serving base (combining weights degenerate to 1 and 0).
pub fn hard_matrix(gains: &GainTable, serving: &[Base], k_prime: f64) -> Vec<f64> {
    assert!(k_prime > 0.0, "k_prime must be positive");
    let n = gains.n();
    assert_eq!(serving.len(), n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let row_gains = match serving[i] {
            Base::Macro => gains.t_macro(),
            Base::Micro => gains.t_micro(),
        };
        for j in 0..n {
            a[i * n + j] = if i == j {
                row_gains[i]
            } else {
                -row_gains[j] / k_prime
            };
        }
    }
    a
}

/// Soft-handoff feasibility by determinant sign.
///
/// Feasible exactly when `det(A) > 0`. A determinant that vanishes to
/// working precision yields an indeterminate verdict, counted infeasible.
pub fn exact_feasible(gains: &GainTable, k_prime: f64) -> FeasibilityVerdict {
    let det = sign_log_det(interference_matrix(gains, k_prime), gains.n());
    FeasibilityVerdict {
        feasible: det.sign == DetSign::Positive,
        indeterminate: det.sign == DetSign::Zero,
        diagnostic: Diagnostic::Determinant(det),
        powers: None,
    }
}

/// Solves a dense system with one step of iterative refinement.
fn solve_refined(a: &[f64], n: usize, rhs: f64) -> Option<Vec<f64>> {
    let mat = DMatrix::from_row_slice(n, n, a);
    let b = DVector::from_element(n, rhs);
    let lu = mat.clone().lu();
    let mut p = lu.solve(&b)?;
    let residual = &mat * &p - &b;
    if let Some(correction) = lu.solve(&residual) {
        p -= correction;
    }
    if p.iter().all(|v| v.is_finite()) {
        Some(p.data.into())
    } else {
        None
    }
}

/// Soft-handoff feasibility by solving for the transmit powers.
///
/// Returns the power vector when it exists and is strictly positive; the
/// recomputed per-user SINR then matches the target within [`SINR_REL_TOL`].
/// This route shares no code with [`exact_feasible`], so the two act as
/// independent checks on each other.
pub fn solve_powers(gains: &GainTable, k_prime: f64) -> FeasibilityVerdict {
    let n = gains.n();
    let a = interference_matrix(gains, k_prime);
    let Some(powers) = solve_refined(&a, n, NOISE_POWER / k_prime) else {
        return FeasibilityVerdict {
            feasible: false,
            indeterminate: true,
            diagnostic: Diagnostic::MinPower(0.0),
            powers: None,
        };
    };
    let min_power = powers.iter().copied().fold(f64::INFINITY, f64::min);
    if min_power <= 0.0 {
        return FeasibilityVerdict {
            feasible: false,
            indeterminate: false,
            diagnostic: Diagnostic::MinPower(min_power),
            powers: None,
        };
    }
    // A positive solution from a nearly singular system can still be noise;
    // accept it only if it actually meets the SINR target.
    let sinr_ok = sinr_over_gamma(gains, &powers, k_prime)
        .iter()
        .all(|r| (r - 1.0).abs() <= SINR_REL_TOL);
    if sinr_ok {
        FeasibilityVerdict {
            feasible: true,
            indeterminate: false,
            diagnostic: Diagnostic::MinPower(min_power),
            powers: Some(powers),
        }
    } else {
        FeasibilityVerdict {
            feasible: false,
            indeterminate: true,
            diagnostic: Diagnostic::MinPower(min_power),
            powers: None,
        }
    }
}

/// Hard-handoff feasibility: serve each user from its strongest base and
/// solve the single-base power-control system.
pub fn hard_feasible(gains: &GainTable, k_prime: f64) -> FeasibilityVerdict {
    let n = gains.n();
    let serving = serving_bases(gains);
    let a = hard_matrix(gains, &serving, k_prime);
    let Some(powers) = solve_refined(&a, n, NOISE_POWER / k_prime) else {
        return FeasibilityVerdict {
            feasible: false,
            indeterminate: true,
            diagnostic: Diagnostic::MinPower(0.0),
            powers: None,
        };
    };
    let min_power = powers.iter().copied().fold(f64::INFINITY, f64::min);
    if min_power <= 0.0 {
        return FeasibilityVerdict {
            feasible: false,
            indeterminate: false,
            diagnostic: Diagnostic::MinPower(min_power),
            powers: None,
        };
    }
    let sinr_ok = hard_sinr_over_gamma(gains, &serving, &powers, k_prime)
        .iter()
        .all(|r| (r - 1.0).abs() <= SINR_REL_TOL);
    if sinr_ok {
        FeasibilityVerdict {
            feasible: true,
            indeterminate: false,
            diagnostic: Diagnostic::MinPower(min_power),
            powers: Some(powers),
        }
    } else {
        FeasibilityVerdict {
            feasible: false,
            indeterminate: true,
            diagnostic: Diagnostic::MinPower(min_power),
            powers: None,
        }
    }
}

/// Recomputes each user's combined SINR over the target, given transmit
/// powers. Equals 1 for every user when the powers solve the system.
pub fn sinr_over_gamma(gains: &GainTable, powers: &[f64], k_prime: f64) -> Vec<f64> {
    let n = gains.n();
    assert_eq!(powers.len(), n);
    let tm = gains.t_macro();
    let tu = gains.t_micro();
    let macro_rx: f64 = (0..n).map(|j| powers[j] * tm[j]).sum();
    let micro_rx: f64 = (0..n).map(|j| powers[j] * tu[j]).sum();
    (0..n)
        .map(|i| {
            let (w_m2, w_u2) = combining_weights(tm[i], tu[i]);
            let interference = w_m2 * (macro_rx - powers[i] * tm[i])
                + w_u2 * (micro_rx - powers[i] * tu[i])
                + NOISE_POWER;
            k_prime * powers[i] * (tm[i] + tu[i]) / interference
        })
        .collect()
}

/// Hard-handoff counterpart of [`sinr_over_gamma`]: single serving base,
/// interference summed at that base only.
pub fn hard_sinr_over_gamma(
    gains: &GainTable,
    serving: &[Base],
    powers: &[f64],
    k_prime: f64,
) -> Vec<f64> {
    let n = gains.n();
    assert_eq!(powers.len(), n);
    assert_eq!(serving.len(), n);
    let tm = gains.t_macro();
    let tu = gains.t_micro();
    let macro_rx: f64 = (0..n).map(|j| powers[j] * tm[j]).sum();
    let micro_rx: f64 = (0..n).map(|j| powers[j] * tu[j]).sum();
    (0..n)
        .map(|i| {
            let (own, rx_total) = match serving[i] {
                Base::Macro => (tm[i], macro_rx),
                Base::Micro => (tu[i], micro_rx),
            };
            let interference = rx_total - powers[i] * own + NOISE_POWER;
            k_prime * powers[i] * own / interference
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_trial, TrialSeed};
    use crate::params::SystemParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const K: f64 = 25.54;

    fn k_table1() -> f64 {
        SystemParams::default().k_prime()
    }

    fn random_table(stream: u64, n: usize) -> GainTable {
        let params = SystemParams::default();
        GainTable::from_trial(&sample_trial(
            &params,
            n,
            TrialSeed {
                master_seed: 0xFEA5,
                stream,
            },
        ))
    }

    #[test]
    fn weights_split_gain_share() {
        assert_eq!(combining_weights(3.0, 3.0), (0.5, 0.5));
        assert_eq!(combining_weights(3.0, 1.0), (0.75, 0.25));
        let (wm, wu) = combining_weights(1.0, 1e-300);
        assert_relative_eq!(wm, 1.0, epsilon = 1e-12);
        assert!(wu >= 0.0 && wu < 1e-12);
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(m in 1e-12f64..1e12, u in 1e-12f64..1e12) {
            let (wm, wu) = combining_weights(m, u);
            prop_assert!((wm + wu - 1.0).abs() < 1e-12);
            prop_assert!(wm > 0.0 && wu > 0.0);
        }
    }

    #[test]
    fn single_user_matrix_is_total_gain() {
        let gains = GainTable::new(vec![2.0], vec![3.0]);
        assert_eq!(interference_matrix(&gains, K), vec![5.0]);
    }

    #[test]
    fn two_user_matrix_entries() {
        // Unit gains: diagonal 2, off-diagonal -(1*1 + 1*1) / (K * 2) = -1/K.
        let gains = GainTable::identical(2, 1.0, 1.0);
        let a = interference_matrix(&gains, K);
        assert_relative_eq!(a[0], 2.0);
        assert_relative_eq!(a[3], 2.0);
        assert_relative_eq!(a[1], -1.0 / K, epsilon = 1e-15);
        assert_relative_eq!(a[2], -1.0 / K, epsilon = 1e-15);
    }

    #[test]
    fn matrix_is_homogeneous_in_gains() {
        let gains = random_table(1, 6);
        let a = interference_matrix(&gains, K);
        let a_scaled = interference_matrix(&gains.scaled(3.5), K);
        for (x, y) in a.iter().zip(&a_scaled) {
            assert_relative_eq!(3.5 * x, *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn matrix_signs() {
        let gains = random_table(2, 8);
        let n = gains.n();
        let a = interference_matrix(&gains, k_table1());
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    assert!(a[i * n + j] > 0.0);
                } else {
                    assert!(a[i * n + j] < 0.0);
                }
            }
        }
    }

    #[test]
    fn single_user_is_always_feasible() {
        let gains = GainTable::new(vec![0.02], vec![7.0]);
        assert!(exact_feasible(&gains, k_table1()).feasible);
        assert!(solve_powers(&gains, k_table1()).feasible);
        assert!(hard_feasible(&gains, k_table1()).feasible);
    }

    /// Identical users make the matrix a scaled combination of the identity
    /// and the all-ones matrix, so the determinant sign is known in closed
    /// form: positive exactly while n < 2 K' + 1.
    #[test]
    fn identical_users_flip_at_known_threshold() {
        let k = k_table1(); // 2K' + 1 = 52.08
        for (n, want) in [(51, true), (52, true), (53, false), (60, false)] {
            let gains = GainTable::identical(n, 1.0, 1.0);
            let verdict = exact_feasible(&gains, k);
            assert_eq!(verdict.feasible, want, "n = {n}");
            assert!(!verdict.indeterminate);
        }
    }

    #[test]
    fn identical_user_log_determinant_matches_eigenvalues() {
        // Eigenvalues of A/t: 2 + 1/K' with multiplicity n-1, and
        // 2 - (n-1)/K' once; t scales the determinant by t^n.
        let k = k_table1();
        for (n, t) in [(10usize, 1.0), (40, 1e-3), (52, 1.0), (53, 2.0)] {
            let gains = GainTable::identical(n, t, t);
            let det = match exact_feasible(&gains, k).diagnostic {
                Diagnostic::Determinant(d) => d,
                other => panic!("expected determinant diagnostic, got {other:?}"),
            };
            let bulk = 2.0 + 1.0 / k;
            let edge = 2.0 - (n as f64 - 1.0) / k;
            let expected_ln =
                n as f64 * t.ln() + (n as f64 - 1.0) * bulk.ln() + edge.abs().ln();
            let expected_sign = if edge > 0.0 {
                DetSign::Positive
            } else {
                DetSign::Negative
            };
            assert_eq!(det.sign, expected_sign, "n = {n}");
            assert_relative_eq!(det.ln_abs, expected_ln, max_relative = 1e-9);
        }
    }

    #[test]
    fn scalar_power_solution() {
        let gains = GainTable::new(vec![2.0], vec![3.0]);
        let verdict = solve_powers(&gains, K);
        let powers = verdict.powers.expect("single user is feasible");
        assert_relative_eq!(powers[0], 1.0 / (K * 5.0), max_relative = 1e-12);
    }

    #[test]
    fn identical_users_power_solution_at_threshold() {
        let k = k_table1();
        // Symmetric system: every power equals 1 / (2K' - n + 1).
        let verdict = solve_powers(&GainTable::identical(52, 1.0, 1.0), k);
        assert!(verdict.feasible);
        let powers = verdict.powers.unwrap();
        let expected = NOISE_POWER / (2.0 * k - 51.0);
        for p in &powers {
            assert_relative_eq!(*p, expected, max_relative = 1e-9);
        }

        let verdict = solve_powers(&GainTable::identical(53, 1.0, 1.0), k);
        assert!(!verdict.feasible);
        assert!(verdict.powers.is_none());
        match verdict.diagnostic {
            Diagnostic::MinPower(m) => assert!(m < 0.0),
            other => panic!("expected min-power diagnostic, got {other:?}"),
        }
    }

    #[test]
    fn feasible_powers_meet_sinr_target() {
        let k = k_table1();
        for stream in 0..50 {
            let gains = random_table(stream, 20);
            let verdict = solve_powers(&gains, k);
            if let Some(powers) = &verdict.powers {
                for r in sinr_over_gamma(&gains, powers, k) {
                    assert!((r - 1.0).abs() <= SINR_REL_TOL, "sinr/gamma = {r}");
                }
            }
        }
    }

    #[test]
    fn det_sign_agrees_with_power_solve() {
        let k = k_table1();
        let mut checked = 0;
        for stream in 0..300 {
            let n = 1 + (stream as usize % 20);
            let gains = random_table(stream, n);
            let by_det = exact_feasible(&gains, k);
            let by_solve = solve_powers(&gains, k);
            if by_det.indeterminate || by_solve.indeterminate {
                continue;
            }
            assert_eq!(by_det.feasible, by_solve.feasible, "stream {stream}");
            checked += 1;
        }
        assert!(checked >= 290, "too many indeterminate trials: {checked}");
    }

    #[test]
    fn ties_serve_the_macrocell() {
        let gains = GainTable::new(vec![1.0, 2.0, 0.5], vec![1.0, 1.0, 1.0]);
        assert_eq!(
            serving_bases(&gains),
            vec![Base::Macro, Base::Macro, Base::Micro]
        );
    }

    #[test]
    fn hard_matrix_uses_serving_base_row() {
        let gains = GainTable::new(vec![4.0, 1.0], vec![1.0, 3.0]);
        let serving = serving_bases(&gains);
        let a = hard_matrix(&gains, &serving, K);
        assert_relative_eq!(a[0], 4.0); // user 0 served by macro
        assert_relative_eq!(a[1], -1.0 / K, epsilon = 1e-15);
        assert_relative_eq!(a[3], 3.0); // user 1 served by micro
        assert_relative_eq!(a[2], -1.0 / K, epsilon = 1e-15);
    }

    /// All-tie identical users collapse hard handoff to a single cell whose
    /// pole sits at K' + 1 users: 26 fit, 27 do not.
    #[test]
    fn hard_handoff_single_cell_threshold() {
        let k = k_table1();
        for (n, want) in [(25, true), (26, true), (27, false), (40, false)] {
            let gains = GainTable::identical(n, 1.0, 1.0);
            let verdict = hard_feasible(&gains, k);
            assert_eq!(verdict.feasible, want, "n = {n}");
        }
    }

    #[test]
    fn hard_powers_meet_sinr_target() {
        let k = k_table1();
        for stream in 100..140 {
            let gains = random_table(stream, 15);
            let verdict = hard_feasible(&gains, k);
            if let Some(powers) = &verdict.powers {
                let serving = serving_bases(&gains);
                for r in hard_sinr_over_gamma(&gains, &serving, powers, k) {
                    assert!((r - 1.0).abs() <= SINR_REL_TOL, "sinr/gamma = {r}");
                }
            }
        }
    }

    #[test]
    fn verdicts_invariant_under_common_gain_scale() {
        let k = k_table1();
        for stream in 0..40 {
            let gains = random_table(stream, 12);
            for c in [1e-6, 1e-2, 1e3, 1e6] {
                let scaled = gains.scaled(c);
                assert_eq!(
                    exact_feasible(&gains, k).feasible,
                    exact_feasible(&scaled, k).feasible,
                    "exact, stream {stream}, c {c}"
                );
                assert_eq!(
                    hard_feasible(&gains, k).feasible,
                    hard_feasible(&scaled, k).feasible,
                    "hard, stream {stream}, c {c}"
                );
            }
        }
    }

    #[test]
    fn verdicts_invariant_under_user_permutation() {
        let k = k_table1();
        for stream in 0..30 {
            let n = 10;
            let gains = random_table(stream, n);
            // Deterministic shuffle: rotate and swap.
            let mut perm: Vec<usize> = (0..n).map(|i| (i + 3) % n).collect();
            perm.swap(0, 5);
            let permuted = gains.permuted(&perm);
            assert_eq!(
                exact_feasible(&gains, k).feasible,
                exact_feasible(&permuted, k).feasible
            );
            assert_eq!(
                hard_feasible(&gains, k).feasible,
                hard_feasible(&permuted, k).feasible
            );
        }
    }

    #[test]
    fn removing_a_user_preserves_feasibility() {
        let k = k_table1();
        let mut feasible_seen = 0;
        for stream in 0..60 {
            let gains = random_table(stream, 14);
            if !exact_feasible(&gains, k).feasible {
                continue;
            }
            feasible_seen += 1;
            for drop in [0, 7, 13] {
                let smaller = gains.without_user(drop);
                assert!(
                    exact_feasible(&smaller, k).feasible,
                    "stream {stream}, dropped {drop}"
                );
                assert!(
                    hard_feasible(&smaller, k).feasible
                        || !hard_feasible(&gains, k).feasible,
                    "hard regressed on user removal, stream {stream}"
                );
            }
        }
        assert!(feasible_seen > 30, "too few feasible instances to test");
    }
}
