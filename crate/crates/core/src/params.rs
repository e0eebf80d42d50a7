//! Closed-form schedule and bound calculator.
//!
//! All logarithms are natural. Turn and move budgets are the ceilings of the
//! real-valued formulas, floored at 1; the integer budgets are what the
//! engines use and what the noise calibration is computed from.

use serde::{Deserialize, Serialize};

use crate::counter::error_bound;
use crate::error::{Error, Result};
use crate::game::Game;

/// Ceiling with a floor of 1. Values within 1e-9 above an integer round down
/// to it so that float noise in the formulas does not add a spurious unit.
pub fn budget_from(x: f64) -> u64 {
    let c = (x - 1e-9).ceil();
    if c < 1.0 {
        1
    } else {
        c as u64
    }
}

/// `α > 4·Δ_T(β)`: the precondition of the private engine.
pub fn is_feasible(alpha: f64, delta_t: f64) -> bool {
    alpha > 4.0 * delta_t
}

/// The four game quantities every formula needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameDims {
    pub n: usize,
    pub m: usize,
    pub max_route_len: usize,
    pub sensitivity: f64,
}

impl GameDims {
    pub fn of(game: &Game) -> Self {
        Self {
            n: game.n(),
            m: game.m(),
            max_route_len: game.max_route_len(),
            sensitivity: game.sensitivity(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::param("n", 0.0, "must be positive"));
        }
        if self.m == 0 {
            return Err(Error::param("m", 0.0, "must be positive"));
        }
        if self.max_route_len == 0 {
            return Err(Error::param("L", 0.0, "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sensitivity) {
            return Err(Error::param("delta_ell", self.sensitivity, "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn mn(&self) -> f64 {
        self.m as f64 * self.n as f64
    }

    fn l(&self) -> f64 {
        self.max_route_len as f64
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha <= 0.0 || alpha.is_infinite() {
        return Err(Error::param("alpha", alpha, "must be positive and finite"));
    }
    Ok(())
}

/// Derived schedule and bounds for the private engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateParams {
    pub dims: GameDims,
    pub alpha: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// `2mn/α` before rounding.
    pub t_formula: f64,
    /// Number of round-robin rounds; the engine plays `n·T` turns.
    pub t: u64,
    /// `8LmnΔℓ/α²` before rounding.
    pub k_formula: f64,
    /// Per-player move budget.
    pub k: u64,
    /// `ε / (4 k L ln T)`.
    pub epsilon_prime: f64,
    /// `E_T(β) = sqrt(8 ln T) ln(2m/β) / ε′`.
    pub count_error: f64,
    /// `Δ_T(β) = L Δℓ E_T(β)`.
    pub cost_error: f64,
    pub feasible: bool,
    /// `α + 2Δ_T(β)`.
    pub eta: f64,
    /// `η + 2Lε + Lβ + β`.
    pub eta_prime: f64,
    pub reference: ReferenceScalings,
}

/// Order-of-magnitude settings with all hidden constants set to one.
/// Reported for orientation only; none of them is a tested bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScalings {
    /// `L (mn ln^{3/2}(n) Δℓ² ln(1/β) / ε)^{1/3}`: the α that balances η.
    pub alpha_order: f64,
    /// `(mn ln^{3/2}(n) Δℓ² ln(1/β))^{1/4}`
    pub epsilon_order: f64,
    /// `n ln^{3/2}(n) Δℓ²`
    pub beta_order: f64,
}

/// `ln T` with `T` floored at 2 so the calibration stays finite.
fn log_t(t: u64) -> f64 {
    (t.max(2) as f64).ln()
}

/// Derives `T`, `k`, `ε′`, `E_T(β)`, `Δ_T(β)`, feasibility, `η` and `η′`.
pub fn derive_private_params(dims: GameDims, alpha: f64, epsilon: f64, beta: f64) -> Result<PrivateParams> {
    dims.check()?;
    check_alpha(alpha)?;
    if epsilon.is_nan() || epsilon <= 0.0 || epsilon.is_infinite() {
        return Err(Error::param("epsilon", epsilon, "must be positive and finite"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::param("beta", beta, "must lie in (0, 1)"));
    }
    let l = dims.l();
    let t_formula = 2.0 * dims.mn() / alpha;
    let t = budget_from(t_formula);
    let k_formula = 8.0 * l * dims.mn() * dims.sensitivity / (alpha * alpha);
    let k = budget_from(k_formula);
    let epsilon_prime = epsilon / (4.0 * k as f64 * l * log_t(t));
    let count_error = error_bound(t.max(2), beta / dims.m as f64, epsilon_prime)?;
    let cost_error = l * dims.sensitivity * count_error;
    let eta = alpha + 2.0 * cost_error;
    Ok(PrivateParams {
        dims,
        alpha,
        epsilon,
        beta,
        t_formula,
        t,
        k_formula,
        k,
        epsilon_prime,
        count_error,
        cost_error,
        feasible: is_feasible(alpha, cost_error),
        eta,
        eta_prime: eta_prime_bound(eta, dims.max_route_len, epsilon, beta),
        reference: reference_scalings(dims, epsilon, beta),
    })
}

impl PrivateParams {
    pub fn for_game(game: &Game, alpha: f64, epsilon: f64, beta: f64) -> Result<Self> {
        derive_private_params(GameDims::of(game), alpha, epsilon, beta)
    }

    /// Errors with `infeasible-alpha` unless `α > 4Δ_T(β)`.
    pub fn require_feasible(&self) -> Result<()> {
        if self.feasible {
            Ok(())
        } else {
            Err(Error::InfeasibleAlpha {
                alpha: self.alpha,
                delta_t: self.cost_error,
                threshold: 4.0 * self.cost_error,
            })
        }
    }

    /// Stream budget per edge counter: `n` placement symbols plus `n·T` turns.
    pub fn stream_budget(&self) -> u64 {
        self.dims.n as u64 * (self.t + 1)
    }
}

/// Accuracy bound of a converged private run: `α + 2Δ_T(β)`.
pub fn eta_bound(params: &PrivateParams) -> Result<f64> {
    params.require_feasible()?;
    Ok(params.alpha + 2.0 * params.cost_error)
}

/// Truthfulness bound `η + 2Lε + Lβ + β` (the mechanism's δ equals β).
pub fn eta_prime_bound(eta: f64, max_route_len: usize, epsilon: f64, beta: f64) -> f64 {
    let l = max_route_len as f64;
    eta + 2.0 * l * epsilon + l * beta + beta
}

pub fn reference_scalings(dims: GameDims, epsilon: f64, beta: f64) -> ReferenceScalings {
    let n = dims.n as f64;
    let ln_n15 = n.ln().max(0.0).powf(1.5);
    let d2 = dims.sensitivity * dims.sensitivity;
    let core = dims.mn() * ln_n15 * d2 * (1.0 / beta).ln();
    ReferenceScalings {
        alpha_order: dims.l() * (core / epsilon).cbrt(),
        epsilon_order: core.powf(0.25),
        beta_order: n * ln_n15 * d2,
    }
}

/// Schedule for the exact engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactParams {
    /// `mn/α` before rounding.
    pub t_formula: f64,
    pub t: u64,
    /// `2LmnΔℓ/α²`, the value the gap argument shows suffices.
    pub k_lemma_formula: f64,
    pub k_lemma: u64,
    /// `4LmnΔℓ/α²`, the value the exact algorithm is stated with. Engine default.
    pub k_algorithm_formula: f64,
    pub k_algorithm: u64,
}

pub fn exact_params(dims: GameDims, alpha: f64) -> Result<ExactParams> {
    dims.check()?;
    check_alpha(alpha)?;
    let t_formula = dims.mn() / alpha;
    let k_lemma_formula = 2.0 * dims.l() * dims.mn() * dims.sensitivity / (alpha * alpha);
    let k_algorithm_formula = 2.0 * k_lemma_formula;
    Ok(ExactParams {
        t_formula,
        t: budget_from(t_formula),
        k_lemma_formula,
        k_lemma: budget_from(k_lemma_formula),
        k_algorithm_formula,
        k_algorithm: budget_from(k_algorithm_formula),
    })
}
