//! Channel and encryption domain types.
//!
//! A quantizer turns each observation into one bit with `P{1 | H1} = p` and
//! `P{1 | H0} = q = 1 - p`. The stochastic encryption flips a `0` to `1`
//! with probability `psi0` and a `1` to `0` with probability `psi1`, which
//! maps `(p, q)` to the encrypted pair `(p̃, q̃)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ln, normal_cdf};

/// Margin used for the strict inequalities `p̃ > 1/2 > q̃`.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-12;

/// Tolerance on `p + q = 1`.
pub const COMPLEMENT_TOLERANCE: f64 = 1e-12;

/// Bernoulli bit probabilities of a symmetric one-bit quantizer.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BitChannelModel {
    p: f64,
    q: f64,
}

impl BitChannelModel {
    /// Requires `0 < q < 1/2 < p < 1` and `|p + q - 1| <= 1e-12`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidArgument("p and q must be finite"));
        }
        if !(0.0 < q && q < 0.5 && 0.5 < p && p < 1.0) {
            return Err(Error::InvalidArgument("require 0 < q < 0.5 < p < 1"));
        }
        if (p + q - 1.0).abs() > COMPLEMENT_TOLERANCE {
            return Err(Error::InvalidArgument("require p + q = 1"));
        }
        Ok(Self { p, q })
    }

    /// Model with `q = 1 - p`.
    pub fn from_p(p: f64) -> Result<Self> {
        Self::new(p, 1.0 - p)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Per-bit log-likelihood magnitude `ln(p / (1 - p))` of the unencrypted model.
    pub fn eta(&self) -> f64 {
        ln(self.p / (1.0 - self.p))
    }
}

/// Mean-shift detection in Gaussian noise with the midpoint quantizer.
///
/// Returns `p = Φ(theta / (2 sigma))` and `q = 1 - p`.
pub fn gaussian_shift_preset(theta: f64, sigma: f64) -> Result<BitChannelModel> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument("theta must be positive"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument("sigma must be positive"));
    }
    let p = normal_cdf(theta / (2.0 * sigma));
    BitChannelModel::new(p, 1.0 - p)
}

/// Flip probabilities of the stochastic encryption channel.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncryptionParams {
    psi0: f64,
    psi1: f64,
}

impl EncryptionParams {
    /// The identity channel.
    pub const NONE: Self = Self {
        psi0: 0.0,
        psi1: 0.0,
    };

    pub fn new(psi0: f64, psi1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&psi0) || !(0.0..=1.0).contains(&psi1) {
            return Err(Error::InvalidArgument(
                "flip probabilities must lie in [0, 1]",
            ));
        }
        Ok(Self { psi0, psi1 })
    }

    /// Probability that a `0` is reported as `1`.
    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    /// Probability that a `1` is reported as `0`.
    pub fn psi1(&self) -> f64 {
        self.psi1
    }

    pub fn is_symmetric(&self) -> bool {
        self.psi0 == self.psi1
    }
}

/// Post-encryption bit probabilities and the constants derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EffectiveModel {
    /// `P{encrypted bit = 1 | H1}`.
    pub p_tilde: f64,
    /// `P{encrypted bit = 1 | H0}`.
    pub q_tilde: f64,
    /// `ln(p / (1 - p))` of the unencrypted model; the eavesdropper's step size.
    pub eta: f64,
    /// `ln(p̃ / (1 - p̃))`.
    pub eta_tilde: f64,
    /// `p̃ / (1 - p̃)`.
    pub mu: f64,
    /// `(1 - q̃) / q̃`.
    pub nu: f64,
}

impl EffectiveModel {
    /// Builds the derived constants from raw probabilities.
    ///
    /// `p_tilde` and `q_tilde` must lie in `[0, 1]`; `p` is the unencrypted
    /// `P{1 | H1}`.
    pub fn from_parts(p: f64, p_tilde: f64, q_tilde: f64) -> Self {
        let mu = p_tilde / (1.0 - p_tilde);
        Self {
            p_tilde,
            q_tilde,
            eta: ln(p / (1.0 - p)),
            eta_tilde: ln(mu),
            mu,
            nu: (1.0 - q_tilde) / q_tilde,
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.p_tilde > 0.5 + ADMISSIBILITY_MARGIN && self.q_tilde < 0.5 - ADMISSIBILITY_MARGIN
    }

    /// Fails with [`Error::Inadmissible`] unless `p̃ > 1/2 > q̃`.
    pub fn require_admissible(&self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                p_tilde: self.p_tilde,
                q_tilde: self.q_tilde,
            })
        }
    }
}

/// Affine map `x -> (1 - psi0 - psi1) x + psi0` applied to both probabilities.
pub fn effective_probs(model: &BitChannelModel, enc: &EncryptionParams) -> EffectiveModel {
    let (p_tilde, q_tilde) = encrypted_pair(model.p, model.q, enc.psi0, enc.psi1);
    EffectiveModel::from_parts(model.p, p_tilde, q_tilde)
}

/// Unvalidated form of the encryption map, used by the derivative code which
/// needs to step slightly outside `[0, 1]`.
#[inline]
pub(crate) fn encrypted_pair(p: f64, q: f64, psi0: f64, psi1: f64) -> (f64, f64) {
    let keep = 1.0 - psi0 - psi1;
    (keep * p + psi0, keep * q + psi0)
}

/// One violated inequality of the admissibility condition.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AdmissibilityViolation {
    /// `p̃ > 1/2` fails.
    PTildeNotAboveHalf { p_tilde: f64 },
    /// `q̃ < 1/2` fails.
    QTildeNotBelowHalf { q_tilde: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdmissibilityReport {
    pub violations: Vec<AdmissibilityViolation>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the encryption keeps `p̃ > 1/2 + 1e-12` and `q̃ < 1/2 - 1e-12`,
/// so an eavesdropper running the unencrypted test still sees its error
/// probabilities vanish as its thresholds grow.
pub fn validate_admissible(model: &BitChannelModel, enc: &EncryptionParams) -> AdmissibilityReport {
    let eff = effective_probs(model, enc);
    let mut violations = Vec::new();
    if !(eff.p_tilde > 0.5 + ADMISSIBILITY_MARGIN) {
        violations.push(AdmissibilityViolation::PTildeNotAboveHalf {
            p_tilde: eff.p_tilde,
        });
    }
    if !(eff.q_tilde < 0.5 - ADMISSIBILITY_MARGIN) {
        violations.push(AdmissibilityViolation::QTildeNotBelowHalf {
            q_tilde: eff.q_tilde,
        });
    }
    AdmissibilityReport { violations }
}

/// Prior probabilities of the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Priors {
    pub pi0: f64,
    pub pi1: f64,
}

impl Priors {
    pub const EQUAL: Self = Self { pi0: 0.5, pi1: 0.5 };

    /// Priors `(pi0, 1 - pi0)`.
    pub fn new(pi0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi0) {
            return Err(Error::InvalidArgument("pi0 must lie in [0, 1]"));
        }
        Ok(Self {
            pi0,
            pi1: 1.0 - pi0,
        })
    }
}

/// Acceptable relative increases `kappa0`, `kappa1` of the legitimate
/// detector's expected sample size under each hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToleranceSpec {
    pub kappa0: f64,
    pub kappa1: f64,
}

impl ToleranceSpec {
    pub fn new(kappa0: f64, kappa1: f64) -> Result<Self> {
        if !(kappa0 >= 0.0 && kappa1 >= 0.0 && kappa0.is_finite() && kappa1.is_finite()) {
            return Err(Error::InvalidArgument(
                "tolerances must be finite and nonnegative",
            ));
        }
        Ok(Self { kappa0, kappa1 })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa0.max(self.kappa1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn model_rejects_bad_probabilities() {
        assert!(BitChannelModel::new(0.7, 0.3).is_ok());
        assert!(BitChannelModel::new(0.5, 0.5).is_err());
        assert!(BitChannelModel::new(0.7, 0.2).is_err());
        assert!(BitChannelModel::new(0.3, 0.7).is_err());
        assert!(BitChannelModel::new(1.0, 0.0).is_err());
        assert!(BitChannelModel::new(f64::NAN, 0.3).is_err());
    }

    #[test]
    fn gaussian_preset_rejects_nonpositive_inputs() {
        assert!(gaussian_shift_preset(0.0, 1.0).is_err());
        assert!(gaussian_shift_preset(1.0, 0.0).is_err());
        assert!(gaussian_shift_preset(-1.0, 1.0).is_err());
        // Φ(tiny) rounds to exactly 0.5, which the model rejects.
        assert!(gaussian_shift_preset(1e-300, 1.0).is_err());
        let m = gaussian_shift_preset(1e-6, 1.0).unwrap();
        assert!(m.p() > 0.5 && m.p() - 0.5 < 1e-6);
    }

    #[test]
    fn effective_probs_examples() {
        let m = BitChannelModel::new(0.7, 0.3).unwrap();
        let e = effective_probs(&m, &EncryptionParams::NONE);
        assert_eq!((e.p_tilde, e.q_tilde), (0.7, 0.3));
        let e = effective_probs(&m, &EncryptionParams::new(0.05, 0.05).unwrap());
        assert!(close(e.p_tilde, 0.68, 1e-15) && close(e.q_tilde, 0.32, 1e-15));
        let e = effective_probs(&m, &EncryptionParams::new(0.0, 0.2).unwrap());
        assert!(close(e.p_tilde, 0.56, 1e-15) && close(e.q_tilde, 0.24, 1e-15));
        assert!(close(e.eta, (0.7f64 / 0.3).ln(), 1e-15));
        assert!(close(e.mu, 0.56 / 0.44, 1e-14));
        assert!(close(e.nu, 0.76 / 0.24, 1e-14));
    }

    #[test]
    fn admissibility_examples() {
        let m = BitChannelModel::new(0.7, 0.3).unwrap();
        assert!(validate_admissible(&m, &EncryptionParams::new(0.0, 0.2).unwrap()).is_admissible());
        assert!(validate_admissible(&m, &EncryptionParams::NONE).is_admissible());
        let r = validate_admissible(&m, &EncryptionParams::new(0.6, 0.0).unwrap());
        assert!(!r.is_admissible());
        assert_eq!(r.violations.len(), 1);
        match r.violations[0] {
            AdmissibilityViolation::QTildeNotBelowHalf { q_tilde } => {
                assert!(close(q_tilde, 0.72, 1e-12))
            }
            other => panic!("unexpected violation {other:?}"),
        }
        // ψ = [0.5, 0.5] sends both probabilities to exactly 1/2.
        let r = validate_admissible(&m, &EncryptionParams::new(0.5, 0.5).unwrap());
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn encryption_params_domain() {
        assert!(EncryptionParams::new(-0.1, 0.0).is_err());
        assert!(EncryptionParams::new(0.0, 1.1).is_err());
        assert!(EncryptionParams::new(1.0, 1.0).is_ok());
        assert!(Priors::new(1.5).is_err());
        assert!(ToleranceSpec::new(-1.0, 0.0).is_err());
        assert_eq!(ToleranceSpec::new(0.1, 0.3).unwrap().kappa(), 0.3);
    }
}
