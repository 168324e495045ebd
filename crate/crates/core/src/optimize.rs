//! Design of the flip probabilities: axis caps, the corner-optimality
//! conditions, the two-candidate selection and a brute-force grid search.

use alloc::vec::Vec;
use core::fmt;

use crate::analytic::{grad_h0_raw, grad_h1_raw, lambda_hat_raw, objective_raw, ErrorTargets};
use crate::error::{Error, Result};
use crate::model::{
    encrypted_pair, BitChannelModel, EncryptionParams, Priors, ToleranceSpec, ADMISSIBILITY_MARGIN,
};

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-10;

/// Grid resolution used by [`algorithm1`] for the gradient sign check.
pub const DEFAULT_CONDITION_RESOLUTION: u32 = 200;

/// Points with `|ψ1 - ψ0|` below this are skipped by the gradient sign check.
pub const DIAGONAL_BAND: f64 = 1e-6;

/// Corner objective values closer than this count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Axis {
    Psi0,
    Psi1,
}

impl Axis {
    fn point(self, value: f64) -> (f64, f64) {
        match self {
            Axis::Psi0 => (value, 0.0),
            Axis::Psi1 => (0.0, value),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Psi0 => "psi0",
            Axis::Psi1 => "psi1",
        })
    }
}

/// One of the two tolerance constraints `λ̂ᵢ(Ψ) <= κᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Constraint {
    Lambda0,
    Lambda1,
}

impl Constraint {
    fn index(self) -> usize {
        match self {
            Constraint::Lambda0 => 0,
            Constraint::Lambda1 => 1,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Lambda0 => "lambda0",
            Constraint::Lambda1 => "lambda1",
        })
    }
}

/// Where an axis leaves the admissible region: `(1-2q)/(2(1-q))` on the
/// ψ0-axis (`q̃` reaches 1/2) and `1 - 1/(2p)` on the ψ1-axis (`p̃` reaches 1/2).
pub fn axis_limit(model: &BitChannelModel, axis: Axis) -> f64 {
    let limit = match axis {
        Axis::Psi0 => (1.0 - 2.0 * model.q()) / (2.0 * (1.0 - model.q())),
        Axis::Psi1 => 1.0 - 1.0 / (2.0 * model.p()),
    };
    limit.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisCap {
    pub cap: f64,
    pub binding: Constraint,
}

/// Largest flip probability on one axis that satisfies both tolerance
/// constraints, and the constraint that stops it.
///
/// `λ̂ᵢ` increases along each axis, so each constraint has at most one root
/// on `[0, limit)`. A constraint whose supremum over the segment stays below
/// `κᵢ` does not restrict the axis; an error is returned only when neither
/// constraint does.
pub fn axis_cap(model: &BitChannelModel, tol: &ToleranceSpec, axis: Axis) -> Result<AxisCap> {
    let limit = axis_limit(model, axis);
    let lambda = |value: f64, constraint: Constraint| {
        let (a, b) = axis.point(value);
        lambda_hat_raw(model.p(), model.q(), a, b).get(constraint.index())
    };
    let kappa = |c: Constraint| match c {
        Constraint::Lambda0 => tol.kappa0,
        Constraint::Lambda1 => tol.kappa1,
    };

    let mut best: Option<AxisCap> = None;
    let mut unbounded = None;
    for constraint in [Constraint::Lambda0, Constraint::Lambda1] {
        let k = kappa(constraint);
        let root = if k <= 0.0 {
            0.0
        } else {
            let supremum = lambda(limit, constraint);
            if !(k < supremum) {
                unbounded.get_or_insert((constraint, k, supremum));
                continue;
            }
            bisect(|v| lambda(v, constraint) - k, 0.0, limit)
        };
        if best.is_none_or(|b| root < b.cap) {
            best = Some(AxisCap {
                cap: root,
                binding: constraint,
            });
        }
    }
    match (best, unbounded) {
        (Some(cap), _) => Ok(cap),
        (None, Some((constraint, kappa, supremum))) => Err(Error::NoRoot {
            axis,
            constraint,
            kappa,
            supremum,
        }),
        (None, None) => unreachable!("each constraint yields a root or a supremum"),
    }
}

/// Root of an increasing function with `f(lo) <= 0 < f(hi)`; returns the
/// lower end of the final bracket so the result is on the feasible side.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Caps on both axes; the candidates are `[psi0_cap, 0]` and `[0, psi1_cap]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisCaps {
    pub psi0_cap: f64,
    pub psi1_cap: f64,
    pub psi0_binding: Constraint,
    pub psi1_binding: Constraint,
}

pub fn axis_caps(model: &BitChannelModel, tol: &ToleranceSpec) -> Result<AxisCaps> {
    let c0 = axis_cap(model, tol, Axis::Psi0)?;
    let c1 = axis_cap(model, tol, Axis::Psi1)?;
    Ok(AxisCaps {
        psi0_cap: c0.cap,
        psi1_cap: c1.cap,
        psi0_binding: c0.binding,
        psi1_binding: c1.binding,
    })
}

/// A grid point where a gap-rate gradient has the wrong sign.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SignViolation {
    pub psi0: f64,
    pub psi1: f64,
    /// 0 for the H0 gap rate, 1 for the H1 gap rate.
    pub hypothesis: u8,
    pub gradient: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionReport {
    pub c1_holds: bool,
    pub c2_holds: bool,
    /// `axis_limit - cap` for the ψ0 and ψ1 axes.
    pub c1_margins: [f64; 2],
    pub c2_violations: Vec<SignViolation>,
}

fn is_feasible(model: &BitChannelModel, tol: &ToleranceSpec, psi0: f64, psi1: f64) -> bool {
    let (pt, qt) = encrypted_pair(model.p(), model.q(), psi0, psi1);
    if !(pt > 0.5 + ADMISSIBILITY_MARGIN && qt < 0.5 - ADMISSIBILITY_MARGIN) {
        return false;
    }
    let l = lambda_hat_raw(model.p(), model.q(), psi0, psi1);
    l.lambda0 <= tol.kappa0 && l.lambda1 <= tol.kappa1
}

/// Checks the cap inequalities and, on a `(resolution+1)²` grid over
/// `[0, psi0_cap] × [0, psi1_cap]` restricted to the feasible set, that both
/// gap rates decrease in ψ0 and increase in ψ1 above the diagonal and the
/// reverse below it.
pub fn check_conditions(
    model: &BitChannelModel,
    tol: &ToleranceSpec,
    caps: &AxisCaps,
    resolution: u32,
) -> ConditionReport {
    let c1_margins = [
        axis_limit(model, Axis::Psi0) - caps.psi0_cap,
        axis_limit(model, Axis::Psi1) - caps.psi1_cap,
    ];
    let c1_holds = c1_margins[0] >= 0.0 && c1_margins[1] >= 0.0;

    let n = resolution.max(1);
    let mut c2_violations = Vec::new();
    for i in 0..=n {
        let psi0 = caps.psi0_cap * f64::from(i) / f64::from(n);
        for j in 0..=n {
            let psi1 = caps.psi1_cap * f64::from(j) / f64::from(n);
            if (psi1 - psi0).abs() < DIAGONAL_BAND || !is_feasible(model, tol, psi0, psi1) {
                continue;
            }
            // Expected signs of (∂/∂ψ0, ∂/∂ψ1).
            let sign = if psi1 > psi0 {
                [-1.0, 1.0]
            } else {
                [1.0, -1.0]
            };
            let grads = [
                grad_h0_raw(model.p(), model.q(), psi0, psi1),
                grad_h1_raw(model.p(), model.q(), psi0, psi1),
            ];
            for (h, g) in grads.iter().enumerate() {
                if !(g[0] * sign[0] > 0.0 && g[1] * sign[1] > 0.0) {
                    c2_violations.push(SignViolation {
                        psi0,
                        psi1,
                        hypothesis: h as u8,
                        gradient: *g,
                    });
                }
            }
        }
    }
    ConditionReport {
        c1_holds,
        c2_holds: c2_violations.is_empty(),
        c1_margins,
        c2_violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Algorithm1,
    GridSearch,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptResult {
    /// `None` when the corner-optimality conditions fail.
    pub psi_star: Option<EncryptionParams>,
    pub objective_value: f64,
    /// Objective at `[psi0_cap, 0]` and `[0, psi1_cap]`.
    pub candidate_values: Option<[f64; 2]>,
    pub caps: Option<AxisCaps>,
    pub conditions: Option<ConditionReport>,
    pub method: Method,
}

/// Picks the better of the two axis corners when the corner-optimality
/// conditions hold; otherwise reports the conditions without a choice so the
/// caller can fall back to [`grid_search`]. Ties go to `[0, psi1_cap]`.
pub fn algorithm1(
    model: &BitChannelModel,
    tol: &ToleranceSpec,
    targets: &ErrorTargets,
    priors: &Priors,
) -> Result<OptResult> {
    algorithm1_at_resolution(model, tol, targets, priors, DEFAULT_CONDITION_RESOLUTION)
}

/// [`algorithm1`] with a chosen grid resolution for the gradient sign check.
pub fn algorithm1_at_resolution(
    model: &BitChannelModel,
    tol: &ToleranceSpec,
    targets: &ErrorTargets,
    priors: &Priors,
    resolution: u32,
) -> Result<OptResult> {
    if tol.kappa0 <= 0.0 || tol.kappa1 <= 0.0 {
        return Ok(OptResult {
            psi_star: Some(EncryptionParams::NONE),
            objective_value: 0.0,
            candidate_values: None,
            caps: None,
            conditions: None,
            method: Method::Algorithm1,
        });
    }
    let caps = axis_caps(model, tol)?;
    let conditions = check_conditions(model, tol, &caps, resolution);
    let value = |a, b| objective_raw(model.p(), model.q(), a, b, targets, priors);
    let candidates = [value(caps.psi0_cap, 0.0), value(0.0, caps.psi1_cap)];
    let (psi_star, objective_value) = if conditions.c1_holds && conditions.c2_holds {
        if candidates[0] > candidates[1] + TIE_TOLERANCE {
            (
                Some(EncryptionParams::new(caps.psi0_cap, 0.0)?),
                candidates[0],
            )
        } else {
            (
                Some(EncryptionParams::new(0.0, caps.psi1_cap)?),
                candidates[1],
            )
        }
    } else {
        (None, candidates[0].max(candidates[1]))
    };
    Ok(OptResult {
        psi_star,
        objective_value,
        candidate_values: Some(candidates),
        caps: Some(caps),
        conditions: Some(conditions),
        method: Method::Algorithm1,
    })
}

/// Maximizes the objective over the feasible points of the grid
/// `{0, 1/res, ..., 1}²`. Ties go to the smaller ψ0, then the smaller ψ1.
pub fn grid_search(
    model: &BitChannelModel,
    tol: &ToleranceSpec,
    targets: &ErrorTargets,
    priors: &Priors,
    resolution: u32,
) -> Result<OptResult> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be positive"));
    }
    let n = f64::from(resolution);
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..=resolution {
        let psi0 = f64::from(i) / n;
        for j in 0..=resolution {
            let psi1 = f64::from(j) / n;
            if !is_feasible(model, tol, psi0, psi1) {
                continue;
            }
            let v = objective_raw(model.p(), model.q(), psi0, psi1, targets, priors);
            if best.is_none_or(|(_, _, bv)| v > bv) {
                best = Some((psi0, psi1, v));
            }
        }
    }
    let (psi0, psi1, objective_value) = best.ok_or(Error::NoFeasiblePoint)?;
    Ok(OptResult {
        psi_star: Some(EncryptionParams::new(psi0, psi1)?),
        objective_value,
        candidate_values: None,
        caps: None,
        conditions: None,
        method: Method::GridSearch,
    })
}
