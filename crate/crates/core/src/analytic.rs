//! Closed-form performance of the legitimate SPRT and the eavesdropper's
//! mismatched SPRT.
//!
//! The eavesdropper computes its log-likelihood ratio with the unencrypted
//! model, so its statistic is `η` times a ±1 random walk whose up-probability
//! is `q̃` under H0 and `p̃` under H1. Its thresholds are therefore integer
//! step counts `(m_a, m_b)` and its error probabilities and expected sample
//! sizes follow from gambler's-ruin absorption. The legitimate detector's
//! statistic is not a lattice walk in general; only its dominant terms and
//! Wald-style approximations are available in closed form.

use alloc::vec;

use crate::error::{Error, Result};
use crate::math::{central_difference, exp, expm1, ln, log1p};
use crate::model::{
    effective_probs, encrypted_pair, BitChannelModel, EffectiveModel, EncryptionParams, Priors,
};

/// `|x - 1/2|` below which the symmetric-walk formulas are used.
pub const HALF_BRANCH_TOLERANCE: f64 = 1e-9;

/// Step count limit of the integer threshold search.
pub const THRESHOLD_SEARCH_CAP: u64 = 1_000_000;

/// Step used for finite-difference gradients.
pub const FD_STEP: f64 = 1e-7;

/// Target false-alarm and miss probabilities shared by both detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorTargets {
    pub alpha: f64,
    pub beta: f64,
}

impl ErrorTargets {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument("error targets must lie in (0, 1)"));
        }
        if !(alpha + beta < 1.0) {
            return Err(Error::InvalidArgument("require alpha + beta < 1"));
        }
        Ok(Self { alpha, beta })
    }

    /// `alpha = beta = bound`.
    pub fn equal(bound: f64) -> Result<Self> {
        Self::new(bound, bound)
    }
}

/// Log-thresholds `(A_L, B_L)` of the legitimate SPRT; it stops once its
/// statistic leaves `(-A_L, B_L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LfcThresholds {
    pub a_l: f64,
    pub b_l: f64,
}

/// Step thresholds of the eavesdropper: `A_E = m_a η`, `B_E = m_b η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EfcThresholds {
    pub m_a: u32,
    pub m_b: u32,
}

impl EfcThresholds {
    pub fn new(m_a: u32, m_b: u32) -> Result<Self> {
        if m_a == 0 || m_b == 0 {
            return Err(Error::InvalidArgument("step thresholds must be at least 1"));
        }
        Ok(Self { m_a, m_b })
    }
}

/// Thresholds of both detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorThresholds {
    pub lfc: LfcThresholds,
    pub efc: EfcThresholds,
}

/// A quantity evaluated under each hypothesis; usually an expected sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EssPair {
    pub under_h0: f64,
    pub under_h1: f64,
}

impl EssPair {
    pub fn weighted(&self, priors: &Priors) -> f64 {
        priors.pi0 * self.under_h0 + priors.pi1 * self.under_h1
    }
}

/// False-alarm and miss probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorPair {
    pub alpha: f64,
    pub beta: f64,
}

/// Kullback-Leibler divergence between Bernoulli(x) and Bernoulli(y).
pub fn kl_bernoulli(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0) {
        return Err(Error::InvalidArgument("KL arguments must lie in (0, 1)"));
    }
    Ok(kl(x, y))
}

#[inline]
pub(crate) fn kl(x: f64, y: f64) -> f64 {
    x * ln(x / y) + (1.0 - x) * ln((1.0 - x) / (1.0 - y))
}

/// Wald's thresholds `B_L = ln((1-β)/α)`, `A_L = ln((1-α)/β)`.
pub fn lfc_wald_thresholds(targets: &ErrorTargets) -> LfcThresholds {
    let ErrorTargets { alpha, beta } = *targets;
    LfcThresholds {
        a_l: ln((1.0 - alpha) / beta),
        b_l: ln((1.0 - beta) / alpha),
    }
}

/// Dominant terms `M_L⁽⁰⁾`, `M_L⁽¹⁾` of the legitimate SPRT's expected sample
/// sizes as the error targets vanish.
pub fn lfc_dominant_ess(eff: &EffectiveModel, targets: &ErrorTargets) -> Result<EssPair> {
    eff.require_admissible()?;
    let ErrorTargets { alpha, beta } = *targets;
    let num0 = alpha * ln(alpha / (1.0 - beta)) + (1.0 - alpha) * ln((1.0 - alpha) / beta);
    let num1 = beta * ln(beta / (1.0 - alpha)) + (1.0 - beta) * ln((1.0 - beta) / alpha);
    Ok(EssPair {
        under_h0: num0 / kl(eff.q_tilde, eff.p_tilde),
        under_h1: num1 / kl(eff.p_tilde, eff.q_tilde),
    })
}

/// Wald's approximations `T̂_L⁽⁰⁾ = -ln β / H(q̃, p̃)` and `T̂_L⁽¹⁾ = -ln α / H(p̃, q̃)`.
pub fn lfc_asymptotic_ess(eff: &EffectiveModel, targets: &ErrorTargets) -> Result<EssPair> {
    eff.require_admissible()?;
    Ok(EssPair {
        under_h0: -ln(targets.beta) / kl(eff.q_tilde, eff.p_tilde),
        under_h1: -ln(targets.alpha) / kl(eff.p_tilde, eff.q_tilde),
    })
}

/// Probability that a ±1 walk with up-probability `up`, started `below` steps
/// above the lower barrier and `above` steps below the upper one, is absorbed
/// at the upper barrier.
fn upper_exit_prob(up: f64, below: u32, above: u32) -> f64 {
    let total = f64::from(below) + f64::from(above);
    let below = f64::from(below);
    if (up - 0.5).abs() < HALF_BRANCH_TOLERANCE {
        return below / total;
    }
    // r = (1 - up) / up; the probability is (1 - r^below) / (1 - r^total).
    let log_r = log_ratio(up);
    if log_r < 0.0 {
        expm1(below * log_r) / expm1(total * log_r)
    } else {
        let above = total - below;
        exp(-above * log_r) * expm1(-below * log_r) / expm1(-total * log_r)
    }
}

/// `ln((1 - up) / up)`, accurate near `up = 1/2`.
fn log_ratio(up: f64) -> f64 {
    log1p((1.0 - 2.0 * up) / up)
}

/// Expected absorption time of the same walk.
fn expected_exit_time(up: f64, below: u32, above: u32) -> f64 {
    if (up - 0.5).abs() < HALF_BRANCH_TOLERANCE {
        return f64::from(below) * f64::from(above);
    }
    let total = f64::from(below) + f64::from(above);
    let a = f64::from(below);
    let log_r = log_ratio(up);
    if (total * log_r).abs() < 0.5 {
        // Optional stopping gives E[T] = (N P - a) / (2 up - 1); near the
        // symmetric walk N(1 - r^a) - a(1 - r^N) cancels to O(ln² r), so it
        // is summed as a power series in ln r instead.
        let (mut a_pow, mut n_pow) = (a * a, total * total);
        let (mut log_pow, mut factorial) = (1.0, 2.0);
        let mut series = 0.0;
        for j in 2..60 {
            let term = (total * a_pow - a * n_pow) * log_pow / factorial;
            series += term;
            if term.abs() <= 1e-17 * series.abs() {
                break;
            }
            a_pow *= a;
            n_pow *= total;
            log_pow *= log_r;
            factorial *= f64::from(j + 1);
        }
        let numerator = -series * log_r * log_r;
        return numerator / (-expm1(total * log_r) * (2.0 * up - 1.0));
    }
    let hit_upper = upper_exit_prob(up, below, above);
    (total * hit_upper - a) / (2.0 * up - 1.0)
}

fn check_unit_interval(eff: &EffectiveModel) -> Result<()> {
    let inside = |x: f64| x > 0.0 && x < 1.0;
    if inside(eff.p_tilde) && inside(eff.q_tilde) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "encrypted probabilities must lie in (0, 1)",
        ))
    }
}

/// Exact false-alarm and miss probabilities of the mismatched SPRT with step
/// thresholds `(m_a, m_b)`.
pub fn efc_exact_errors(eff: &EffectiveModel, thresholds: EfcThresholds) -> Result<ErrorPair> {
    check_unit_interval(eff)?;
    let EfcThresholds { m_a, m_b } = EfcThresholds::new(thresholds.m_a, thresholds.m_b)?;
    Ok(ErrorPair {
        alpha: upper_exit_prob(eff.q_tilde, m_a, m_b),
        // Lower exit under H1 is the upper exit of the mirrored walk.
        beta: upper_exit_prob(1.0 - eff.p_tilde, m_b, m_a),
    })
}

/// Exact expected sample sizes of the mismatched SPRT.
pub fn efc_exact_ess(eff: &EffectiveModel, thresholds: EfcThresholds) -> Result<EssPair> {
    check_unit_interval(eff)?;
    let EfcThresholds { m_a, m_b } = EfcThresholds::new(thresholds.m_a, thresholds.m_b)?;
    Ok(EssPair {
        under_h0: expected_exit_time(eff.q_tilde, m_a, m_b),
        under_h1: expected_exit_time(eff.p_tilde, m_a, m_b),
    })
}

/// Step thresholds together with the error probabilities they realize.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EfcDesign {
    pub thresholds: EfcThresholds,
    pub realized: ErrorPair,
}

/// Componentwise-smallest `(m_a, m_b)` with `α_E <= alpha` and `β_E <= beta`.
///
/// `α_E` falls in `m_b` and rises in `m_a`, `β_E` the other way round, so
/// each constraint is a lower bound on one coordinate that grows with the
/// other. Alternately raising `m_b` and `m_a` from `(1, 1)` climbs to the
/// least fixed point, which is the componentwise minimum of the feasible set.
pub fn efc_thresholds_for_targets(
    eff: &EffectiveModel,
    targets: &ErrorTargets,
) -> Result<EfcDesign> {
    eff.require_admissible()?;
    let alpha_at = |m_a, m_b| upper_exit_prob(eff.q_tilde, m_a, m_b);
    let beta_at = |m_a, m_b| upper_exit_prob(1.0 - eff.p_tilde, m_b, m_a);
    let (mut m_a, mut m_b) = (1u32, 1u32);
    let mut steps = 0u64;
    loop {
        while alpha_at(m_a, m_b) > targets.alpha {
            m_b += 1;
            steps += 1;
            if steps > THRESHOLD_SEARCH_CAP {
                return Err(Error::SearchFailure { steps });
            }
        }
        while beta_at(m_a, m_b) > targets.beta {
            m_a += 1;
            steps += 1;
            if steps > THRESHOLD_SEARCH_CAP {
                return Err(Error::SearchFailure { steps });
            }
        }
        if alpha_at(m_a, m_b) <= targets.alpha {
            break;
        }
    }
    Ok(EfcDesign {
        thresholds: EfcThresholds { m_a, m_b },
        realized: ErrorPair {
            alpha: alpha_at(m_a, m_b),
            beta: beta_at(m_a, m_b),
        },
    })
}

/// Thresholds from the leading-order maps `m_b ≈ log_ν(1/α)`,
/// `m_a ≈ log_μ(1/β)`, rounded up.
///
/// The realized errors are reported and may exceed the targets.
pub fn efc_asymptotic_thresholds(
    eff: &EffectiveModel,
    targets: &ErrorTargets,
) -> Result<EfcDesign> {
    eff.require_admissible()?;
    let steps = |bound: f64, base: f64| {
        let m = crate::math::ceil(ln(1.0 / bound) / ln(base));
        if m < 1.0 {
            1
        } else if m >= f64::from(u32::MAX) {
            u32::MAX
        } else {
            m as u32
        }
    };
    let thresholds = EfcThresholds {
        m_a: steps(targets.beta, eff.mu),
        m_b: steps(targets.alpha, eff.nu),
    };
    Ok(EfcDesign {
        thresholds,
        realized: efc_exact_errors(eff, thresholds)?,
    })
}

fn check_error_arguments(alpha_e: f64, beta_e: f64) -> Result<()> {
    if alpha_e > 0.0 && alpha_e < 1.0 && beta_e > 0.0 && beta_e < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "error probabilities must lie in (0, 1)",
        ))
    }
}

/// Dominant terms `M_E⁽⁰⁾`, `M_E⁽¹⁾` of the mismatched SPRT's expected sample
/// sizes in terms of its own error probabilities.
pub fn efc_dominant_ess(eff: &EffectiveModel, alpha_e: f64, beta_e: f64) -> Result<EssPair> {
    eff.require_admissible()?;
    check_error_arguments(alpha_e, beta_e)?;
    let (ln_mu, ln_nu) = (ln(eff.mu), ln(eff.nu));
    let steps_lower = ln(1.0 / beta_e) / ln_mu;
    let steps_upper = ln(1.0 / alpha_e) / ln_nu;
    Ok(EssPair {
        under_h0: ((1.0 - alpha_e) * steps_lower - alpha_e * steps_upper)
            / (1.0 - 2.0 * eff.q_tilde),
        under_h1: ((1.0 - beta_e) * steps_upper - beta_e * steps_lower) / (2.0 * eff.p_tilde - 1.0),
    })
}

/// Partial derivatives of `M_E⁽⁰⁾` and `M_E⁽¹⁾` with respect to the error
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantEssGradient {
    pub h0_d_alpha: f64,
    pub h0_d_beta: f64,
    pub h1_d_alpha: f64,
    pub h1_d_beta: f64,
}

pub fn efc_dominant_ess_gradient(
    eff: &EffectiveModel,
    alpha_e: f64,
    beta_e: f64,
) -> Result<DominantEssGradient> {
    eff.require_admissible()?;
    check_error_arguments(alpha_e, beta_e)?;
    let (ln_mu, ln_nu) = (ln(eff.mu), ln(eff.nu));
    let (la, lb) = (ln(1.0 / alpha_e), ln(1.0 / beta_e));
    let s0 = 1.0 - 2.0 * eff.q_tilde;
    let s1 = 2.0 * eff.p_tilde - 1.0;
    Ok(DominantEssGradient {
        h0_d_alpha: (1.0 - (ln_nu / ln_mu) * lb - la) / (s0 * ln_nu),
        h0_d_beta: -(1.0 - alpha_e) / (beta_e * ln_mu * s0),
        h1_d_alpha: -(1.0 - beta_e) / (alpha_e * ln_nu * s1),
        h1_d_beta: (1.0 - (ln_mu / ln_nu) * la - lb) / (s1 * ln_mu),
    })
}

/// Leading-order approximations `T̂_E⁽⁰⁾ = log_μ(1/β)/(1-2q̃)` and
/// `T̂_E⁽¹⁾ = log_ν(1/α)/(2p̃-1)` with the eavesdropper's errors set to the targets.
pub fn efc_asymptotic_ess(eff: &EffectiveModel, targets: &ErrorTargets) -> Result<EssPair> {
    eff.require_admissible()?;
    Ok(EssPair {
        under_h0: ln(1.0 / targets.beta) / ln(eff.mu) / (1.0 - 2.0 * eff.q_tilde),
        under_h1: ln(1.0 / targets.alpha) / ln(eff.nu) / (2.0 * eff.p_tilde - 1.0),
    })
}

/// Relative increases `λ̂₀`, `λ̂₁` of the legitimate detector's approximate
/// expected sample size caused by the encryption.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaHat {
    pub lambda0: f64,
    pub lambda1: f64,
}

impl LambdaHat {
    pub fn get(&self, hypothesis: usize) -> f64 {
        if hypothesis == 0 {
            self.lambda0
        } else {
            self.lambda1
        }
    }
}

/// `λ̂₀ = H(q,p)/H(q̃,p̃) - 1`, `λ̂₁ = H(p,q)/H(p̃,q̃) - 1`.
pub fn lambda_hat(model: &BitChannelModel, enc: &EncryptionParams) -> Result<LambdaHat> {
    let eff = effective_probs(model, enc);
    eff.require_admissible()?;
    Ok(lambda_hat_raw(model.p(), model.q(), enc.psi0(), enc.psi1()))
}

pub(crate) fn lambda_hat_raw(p: f64, q: f64, psi0: f64, psi1: f64) -> LambdaHat {
    let (pt, qt) = encrypted_pair(p, q, psi0, psi1);
    LambdaHat {
        lambda0: kl(q, p) / kl(qt, pt) - 1.0,
        lambda1: kl(p, q) / kl(pt, qt) - 1.0,
    }
}

/// Per-hypothesis gap between the approximate expected sample sizes of the
/// eavesdropper and the legitimate detector, per unit of `ln(1/β*)` (H0) and
/// `ln(1/α*)` (H1).
///
/// The H0 rate is `1/G(q̃,p̃) - 1/H(q̃,p̃)` with `G = (1-2q̃) ln μ`; since
/// `H(q̃,p̃) - G(q̃,p̃) = H(1-q̃, p̃)` it is evaluated as
/// `H(1-q̃,p̃) / (G H)`, which is exactly zero when `p̃ + q̃ = 1`.
pub(crate) fn gap_rates_raw(p: f64, q: f64, psi0: f64, psi1: f64) -> (f64, f64) {
    let (pt, qt) = encrypted_pair(p, q, psi0, psi1);
    let g0 = (1.0 - 2.0 * qt) * ln(pt / (1.0 - pt));
    let g1 = (2.0 * pt - 1.0) * ln((1.0 - qt) / qt);
    let rate0 = kl(1.0 - qt, pt) / (g0 * kl(qt, pt));
    let rate1 = kl(pt, 1.0 - qt) / (g1 * kl(pt, qt));
    (rate0, rate1)
}

/// `T̂_E⁽ⁱ⁾ - T̂_L⁽ⁱ⁾` for both hypotheses.
pub fn ess_gap(
    model: &BitChannelModel,
    enc: &EncryptionParams,
    targets: &ErrorTargets,
) -> Result<EssPair> {
    effective_probs(model, enc).require_admissible()?;
    let (rate0, rate1) = gap_rates_raw(model.p(), model.q(), enc.psi0(), enc.psi1());
    Ok(EssPair {
        under_h0: rate0 * ln(1.0 / targets.beta),
        under_h1: rate1 * ln(1.0 / targets.alpha),
    })
}

/// Design objective `π0 [T̂_E⁽⁰⁾ - T̂_L⁽⁰⁾] + π1 [T̂_E⁽¹⁾ - T̂_L⁽¹⁾]`.
pub fn objective(
    model: &BitChannelModel,
    enc: &EncryptionParams,
    targets: &ErrorTargets,
    priors: &Priors,
) -> Result<f64> {
    Ok(ess_gap(model, enc, targets)?.weighted(priors))
}

pub(crate) fn objective_raw(
    p: f64,
    q: f64,
    psi0: f64,
    psi1: f64,
    targets: &ErrorTargets,
    priors: &Priors,
) -> f64 {
    let (rate0, rate1) = gap_rates_raw(p, q, psi0, psi1);
    priors.pi0 * rate0 * ln(1.0 / targets.beta) + priors.pi1 * rate1 * ln(1.0 / targets.alpha)
}

/// Closed-form gradient `(∂f/∂ψ0, ∂f/∂ψ1)` of the H0 gap rate
/// `f = 1/G(q̃,p̃) - 1/H(q̃,p̃)`.
pub fn objective_grad_h0(model: &BitChannelModel, enc: &EncryptionParams) -> Result<[f64; 2]> {
    effective_probs(model, enc).require_admissible()?;
    Ok(grad_h0_raw(model.p(), model.q(), enc.psi0(), enc.psi1()))
}

pub(crate) fn grad_h0_raw(p: f64, q: f64, psi0: f64, psi1: f64) -> [f64; 2] {
    let (pt, qt) = encrypted_pair(p, q, psi0, psi1);
    let h = kl(qt, pt);
    let log_odds = ln(pt / (1.0 - pt));
    let g = (1.0 - 2.0 * qt) * log_odds;
    let pvar = pt * (1.0 - pt);
    // ∂f/∂p̃ and ∂f/∂q̃.
    let y1 = (pt - qt) / (h * h * pvar) - (1.0 - 2.0 * qt) / (g * g * pvar);
    let y2 = 2.0 * log_odds / (g * g) - ln(pt * (1.0 - qt) / (qt * (1.0 - pt))) / (h * h);
    // p̃ and q̃ move by (1-p, 1-q) along ψ0 and by (-p, -q) along ψ1.
    [(1.0 - p) * y1 + (1.0 - q) * y2, -(p * y1 + q * y2)]
}

/// Gradient of the H1 gap rate by central differences with step [`FD_STEP`].
pub fn objective_grad_h1(model: &BitChannelModel, enc: &EncryptionParams) -> Result<[f64; 2]> {
    effective_probs(model, enc).require_admissible()?;
    Ok(grad_h1_raw(model.p(), model.q(), enc.psi0(), enc.psi1()))
}

pub(crate) fn grad_h1_raw(p: f64, q: f64, psi0: f64, psi1: f64) -> [f64; 2] {
    let rate1 = |a: f64, b: f64| gap_rates_raw(p, q, a, b).1;
    [
        central_difference(|x| rate1(x, psi1), psi0, FD_STEP),
        central_difference(|x| rate1(psi0, x), psi1, FD_STEP),
    ]
}

/// Absorption probability and expected absorption time of a ±1 walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpAbsorption {
    pub absorb_upper: f64,
    pub expected_steps: f64,
}

/// Solves the one-step recursions of a ±1 walk on `-m_a..=m_b` started at 0
/// directly as a tridiagonal linear system.
///
/// Serves as an oracle for the closed-form absorption formulas.
pub fn dp_absorption_oracle(up_prob: f64, m_a: u32, m_b: u32) -> Result<DpAbsorption> {
    if !(up_prob > 0.0 && up_prob < 1.0) {
        return Err(Error::InvalidArgument("up probability must lie in (0, 1)"));
    }
    EfcThresholds::new(m_a, m_b)?;
    let interior = (m_a + m_b - 1) as usize;
    let down = 1.0 - up_prob;
    // Row k: x_k - up x_{k+1} - down x_{k-1} = rhs_k, with state k - m_a + 1.
    let mut absorb_rhs = vec![0.0; interior];
    absorb_rhs[interior - 1] = up_prob;
    let time_rhs = vec![1.0; interior];
    let absorb = solve_walk_system(up_prob, down, absorb_rhs);
    let time = solve_walk_system(up_prob, down, time_rhs);
    let start = (m_a - 1) as usize;
    Ok(DpAbsorption {
        absorb_upper: absorb[start],
        expected_steps: time[start],
    })
}

/// Thomas algorithm for the constant-coefficient system
/// `x_k - up x_{k+1} - down x_{k-1} = rhs_k` with zero outside the range.
fn solve_walk_system(up: f64, down: f64, mut rhs: alloc::vec::Vec<f64>) -> alloc::vec::Vec<f64> {
    let n = rhs.len();
    let mut upper = vec![0.0; n];
    let mut pivot = 1.0;
    upper[0] = -up / pivot;
    rhs[0] /= pivot;
    for k in 1..n {
        pivot = 1.0 + down * upper[k - 1];
        upper[k] = -up / pivot;
        rhs[k] = (rhs[k] + down * rhs[k - 1]) / pivot;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= upper[k] * rhs[k + 1];
    }
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BitChannelModel;

    fn eff(p_tilde: f64, q_tilde: f64) -> EffectiveModel {
        EffectiveModel::from_parts(0.7, p_tilde, q_tilde)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_bernoulli(0.3, 0.3).unwrap(), 0.0);
        // 0.4 ln(7/3)
        assert!((kl_bernoulli(0.7, 0.3).unwrap() - 0.338_919_144_154_881_4).abs() < 1e-15);
        for p in [0.51, 0.6, 0.93] {
            let d = kl_bernoulli(p, 1.0 - p).unwrap() - kl_bernoulli(1.0 - p, p).unwrap();
            assert!(d.abs() < 1e-15);
        }
        assert!(kl_bernoulli(0.0, 0.5).is_err());
        assert!(kl_bernoulli(0.5, 1.0).is_err());
    }

    #[test]
    fn wald_threshold_examples() {
        let t = lfc_wald_thresholds(&ErrorTargets::equal(0.01).unwrap());
        assert!((t.a_l - 99f64.ln()).abs() < 1e-14 && (t.b_l - 99f64.ln()).abs() < 1e-14);
        let t = lfc_wald_thresholds(&ErrorTargets::new(1e-6, 1e-3).unwrap());
        assert!((t.b_l - (0.999f64 / 1e-6).ln()).abs() < 1e-12);
        assert!((t.b_l - 13.814_50).abs() < 1e-4);
        assert!((t.a_l - 6.907_76).abs() < 1e-4);
        let loose = lfc_wald_thresholds(&ErrorTargets::equal(0.499).unwrap());
        assert!(loose.a_l > 0.0 && loose.a_l < 0.01);
    }

    #[test]
    fn error_targets_validation() {
        assert!(ErrorTargets::new(0.0, 0.1).is_err());
        assert!(ErrorTargets::new(0.6, 0.5).is_err());
        assert!(ErrorTargets::new(0.3, 0.3).is_ok());
    }

    #[test]
    fn lfc_dominant_examples() {
        let e = eff(0.7, 0.3);
        let t = ErrorTargets::equal(1e-4).unwrap();
        let m = lfc_dominant_ess(&e, &t).unwrap();
        assert!(rel(m.under_h0, m.under_h1) < 1e-14);
        let num = 1e-4 * (1e-4f64 / 0.9999).ln() + 0.9999 * (0.9999f64 / 1e-4).ln();
        let den = 0.3 * (0.3f64 / 0.7).ln() + 0.7 * (0.7f64 / 0.3).ln();
        assert!(rel(m.under_h0, num / den) < 1e-13);
        assert!((m.under_h0 - 27.17).abs() < 0.01);
        // Decreasing in each target.
        let looser_a = lfc_dominant_ess(&e, &ErrorTargets::new(2e-4, 1e-4).unwrap()).unwrap();
        let looser_b = lfc_dominant_ess(&e, &ErrorTargets::new(1e-4, 2e-4).unwrap()).unwrap();
        assert!(looser_a.under_h0 < m.under_h0 && looser_a.under_h1 < m.under_h1);
        assert!(looser_b.under_h0 < m.under_h0 && looser_b.under_h1 < m.under_h1);
        assert!(lfc_dominant_ess(&eff(0.4, 0.3), &t).is_err());
    }

    #[test]
    fn lfc_asymptotic_examples() {
        let e = eff(0.7, 0.3);
        let t = lfc_asymptotic_ess(&e, &ErrorTargets::equal(1e-4).unwrap()).unwrap();
        assert!((t.under_h0 - 27.1757).abs() < 1e-3 && (t.under_h1 - 27.1757).abs() < 1e-3);
        let a = lfc_asymptotic_ess(&e, &ErrorTargets::new(0.1, 1e-3).unwrap()).unwrap();
        let b = lfc_asymptotic_ess(&e, &ErrorTargets::new(0.1, 1e-6).unwrap()).unwrap();
        assert!(rel(a.under_h0 / b.under_h0, 1e-3f64.ln() / 1e-6f64.ln()) < 1e-14);
    }

    #[test]
    fn efc_exact_branch_and_examples() {
        let half = eff(0.7, 0.5);
        let th = EfcThresholds::new(3, 3).unwrap();
        assert_eq!(efc_exact_errors(&half, th).unwrap().alpha, 0.5);
        assert_eq!(efc_exact_ess(&half, th).unwrap().under_h0, 9.0);
        let e = eff(0.6, 0.4);
        let err = efc_exact_errors(&e, th).unwrap();
        assert!((err.alpha - 2.375 / 10.390_625).abs() < 1e-14);
        assert!((err.beta - err.alpha).abs() < 1e-14);
        let ess = efc_exact_ess(&e, th).unwrap();
        assert!((ess.under_h0 - 8.142_857_142_857).abs() < 1e-9);
        assert!((ess.under_h1 - ess.under_h0).abs() < 1e-12);
        let err8 = efc_exact_errors(&e, EfcThresholds::new(8, 8).unwrap()).unwrap();
        assert!((err8.alpha - 1.0 / (1.5f64.powi(8) + 1.0)).abs() < 1e-14);
        assert!(efc_exact_errors(&e, EfcThresholds { m_a: 0, m_b: 3 }).is_err());
    }

    #[test]
    fn efc_exact_survives_huge_thresholds() {
        let e = eff(0.6, 0.4);
        let th = EfcThresholds::new(5000, 5000).unwrap();
        let err = efc_exact_errors(&e, th).unwrap();
        assert!(err.alpha >= 0.0 && err.alpha < 1e-300);
        let ess = efc_exact_ess(&e, th).unwrap();
        assert!((ess.under_h0 - 5000.0 / 0.2).abs() < 1e-6);
    }

    #[test]
    fn threshold_search_examples() {
        let e = eff(0.6, 0.4);
        let d = efc_thresholds_for_targets(&e, &ErrorTargets::equal(0.05).unwrap()).unwrap();
        assert_eq!(d.thresholds, EfcThresholds { m_a: 8, m_b: 8 });
        assert!((d.realized.alpha - 1.0 / (1.5f64.powi(8) + 1.0)).abs() < 1e-14);
        let d = efc_thresholds_for_targets(&eff(0.7, 0.3), &ErrorTargets::equal(0.49).unwrap())
            .unwrap();
        assert_eq!(d.thresholds, EfcThresholds { m_a: 1, m_b: 1 });
    }

    #[test]
    fn threshold_search_is_componentwise_minimal() {
        // Exhaustive enumeration over m <= 40 as the oracle.
        for &(pt, qt) in &[(0.6, 0.4), (0.56, 0.24), (0.8, 0.45), (0.52, 0.3)] {
            let e = eff(pt, qt);
            for &(a, b) in &[(0.05, 0.05), (0.1, 0.01), (0.02, 0.2)] {
                let targets = ErrorTargets::new(a, b).unwrap();
                let d = efc_thresholds_for_targets(&e, &targets).unwrap();
                let feasible = |m_a, m_b| {
                    let r = efc_exact_errors(&e, EfcThresholds { m_a, m_b }).unwrap();
                    r.alpha <= a && r.beta <= b
                };
                assert!(feasible(d.thresholds.m_a, d.thresholds.m_b));
                for m_a in 1..=40 {
                    for m_b in 1..=40 {
                        if feasible(m_a, m_b) {
                            assert!(m_a >= d.thresholds.m_a && m_b >= d.thresholds.m_b);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn asymptotic_thresholds_track_the_log_maps() {
        let e = eff(0.6, 0.4);
        let d = efc_asymptotic_thresholds(&e, &ErrorTargets::equal(1e-6).unwrap()).unwrap();
        let expect = (1e6f64.ln() / 1.5f64.ln()).ceil() as u32;
        assert_eq!(
            d.thresholds,
            EfcThresholds {
                m_a: expect,
                m_b: expect
            }
        );
    }

    #[test]
    fn efc_dominant_symmetric_case_matches_lfc() {
        let e = eff(0.68, 0.32);
        let t = ErrorTargets::equal(1e-6).unwrap();
        let me = efc_dominant_ess(&e, 1e-6, 1e-6).unwrap();
        let ml = lfc_dominant_ess(&e, &t).unwrap();
        assert!(rel(me.under_h0, me.under_h1) < 1e-12);
        assert!(rel(me.under_h0, ml.under_h0) < 1e-3);
        let te = efc_asymptotic_ess(&e, &t).unwrap();
        let tl = lfc_asymptotic_ess(&e, &t).unwrap();
        assert!(rel(te.under_h0, tl.under_h0) < 1e-12 && rel(te.under_h1, tl.under_h1) < 1e-12);
    }

    #[test]
    fn dominant_gradient_matches_finite_differences() {
        let e = eff(0.56, 0.24);
        for &(a, b) in &[(1e-3, 1e-4), (0.01, 0.2), (0.3, 0.05)] {
            let g = efc_dominant_ess_gradient(&e, a, b).unwrap();
            let m = |a, b| efc_dominant_ess(&e, a, b).unwrap();
            let ha = a * 1e-5;
            let hb = b * 1e-5;
            let fd_h0_a = (m(a + ha, b).under_h0 - m(a - ha, b).under_h0) / (2.0 * ha);
            let fd_h0_b = (m(a, b + hb).under_h0 - m(a, b - hb).under_h0) / (2.0 * hb);
            let fd_h1_a = (m(a + ha, b).under_h1 - m(a - ha, b).under_h1) / (2.0 * ha);
            let fd_h1_b = (m(a, b + hb).under_h1 - m(a, b - hb).under_h1) / (2.0 * hb);
            assert!(
                rel(g.h0_d_alpha, fd_h0_a) < 1e-6,
                "{} {}",
                g.h0_d_alpha,
                fd_h0_a
            );
            assert!(rel(g.h0_d_beta, fd_h0_b) < 1e-6);
            assert!(rel(g.h1_d_alpha, fd_h1_a) < 1e-6);
            assert!(rel(g.h1_d_beta, fd_h1_b) < 1e-6);
        }
    }

    #[test]
    fn efc_asymptotic_exceeds_lfc_for_asymmetric_flip() {
        let m = BitChannelModel::new(0.7, 0.3).unwrap();
        let e = effective_probs(&m, &EncryptionParams::new(0.0, 0.2).unwrap());
        let t = ErrorTargets::equal(1e-6).unwrap();
        let te = efc_asymptotic_ess(&e, &t).unwrap();
        let tl = lfc_asymptotic_ess(&e, &t).unwrap();
        assert!(te.under_h0 > tl.under_h0 && te.under_h1 > tl.under_h1);
        let none = effective_probs(&m, &EncryptionParams::NONE);
        let te = efc_asymptotic_ess(&none, &t).unwrap();
        let tl = lfc_asymptotic_ess(&none, &t).unwrap();
        assert!(rel(te.under_h0, tl.under_h0) < 1e-12);
    }

    #[test]
    fn gap_rates_match_direct_formula() {
        let m = BitChannelModel::from_p(0.7).unwrap();
        let t = ErrorTargets::new(1e-5, 1e-7).unwrap();
        for &(a, b) in &[(0.0, 0.2), (0.1, 0.0), (0.03, 0.07), (0.12, 0.01)] {
            let enc = EncryptionParams::new(a, b).unwrap();
            let e = effective_probs(&m, &enc);
            let direct0 = efc_asymptotic_ess(&e, &t).unwrap().under_h0
                - lfc_asymptotic_ess(&e, &t).unwrap().under_h0;
            let direct1 = efc_asymptotic_ess(&e, &t).unwrap().under_h1
                - lfc_asymptotic_ess(&e, &t).unwrap().under_h1;
            let gap = ess_gap(&m, &enc, &t).unwrap();
            assert!(rel(gap.under_h0, direct0) < 1e-10);
            assert!(rel(gap.under_h1, direct1) < 1e-10);
        }
    }

    #[test]
    fn lambda_hat_zero_without_encryption() {
        let m = BitChannelModel::from_p(0.8).unwrap();
        let l = lambda_hat(&m, &EncryptionParams::NONE).unwrap();
        assert_eq!((l.lambda0, l.lambda1), (0.0, 0.0));
        assert!(lambda_hat(&m, &EncryptionParams::new(0.9, 0.0).unwrap()).is_err());
    }

    #[test]
    fn h1_gradient_matches_mirrored_h0_closed_form() {
        // Swapping the roles of the two bit values maps the H1 gap rate at
        // (ψ0, ψ1) to the H0 rate at (ψ1, ψ0).
        let m = BitChannelModel::from_p(0.69).unwrap();
        for &(a, b) in &[(0.0, 0.1), (0.08, 0.0), (0.02, 0.05), (0.06, 0.01)] {
            let fd = grad_h1_raw(m.p(), m.q(), a, b);
            let mirrored = grad_h0_raw(m.p(), m.q(), b, a);
            assert!(rel(fd[0], mirrored[1]) < 1e-5, "{fd:?} {mirrored:?}");
            assert!(rel(fd[1], mirrored[0]) < 1e-5);
        }
    }

    #[test]
    fn dp_oracle_examples() {
        let r = dp_absorption_oracle(0.5, 3, 3).unwrap();
        assert!((r.absorb_upper - 0.5).abs() < 1e-14 && (r.expected_steps - 9.0).abs() < 1e-12);
        let r = dp_absorption_oracle(0.4, 1, 1).unwrap();
        assert!((r.absorb_upper - 0.4).abs() < 1e-15 && (r.expected_steps - 1.0).abs() < 1e-15);
        let r = dp_absorption_oracle(0.4, 3, 3).unwrap();
        assert!((r.absorb_upper - 0.228_571_428_571).abs() < 1e-11);
        assert!((r.expected_steps - 8.142_857_142_857).abs() < 1e-11);
        assert!(dp_absorption_oracle(1.0, 3, 3).is_err());
    }
}
