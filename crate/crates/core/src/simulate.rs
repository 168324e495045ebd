//! Seeded Monte Carlo runs of both detectors on a shared encrypted bit stream.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`, so each replication is reproducible on its own and the
//! replications can run in any order or in parallel.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{
    efc_asymptotic_thresholds, efc_thresholds_for_targets, lfc_wald_thresholds, DetectorThresholds,
    EfcThresholds, ErrorTargets, LfcThresholds,
};
use crate::error::{Error, Result};
use crate::math::{sqrt, CompensatedSum};
use crate::model::{effective_probs, BitChannelModel, EncryptionParams, Priors};

/// Default cap on the number of observations of a single path.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Relative slack in the threshold comparison; absorbs rounding when the
/// statistic lands exactly on a threshold.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// Log-likelihood ratio increment of a single bit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoValuedLlr {
    pub if_one: f64,
    pub if_zero: f64,
}

impl TwoValuedLlr {
    /// LLR of H1 `P{1} = p1` against H0 `P{1} = p0`.
    pub fn bernoulli(p1: f64, p0: f64) -> Self {
        Self {
            if_one: crate::math::ln(p1 / p0),
            if_zero: crate::math::ln((1.0 - p1) / (1.0 - p0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Decision {
    AcceptH0,
    AcceptH1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SprtOutcome {
    Decided { decision: Decision, steps: u64 },
    Truncated { steps: u64 },
}

impl SprtOutcome {
    pub fn steps(&self) -> u64 {
        match *self {
            SprtOutcome::Decided { steps, .. } | SprtOutcome::Truncated { steps } => steps,
        }
    }

    pub fn decision(&self) -> Option<Decision> {
        match *self {
            SprtOutcome::Decided { decision, .. } => Some(decision),
            SprtOutcome::Truncated { .. } => None,
        }
    }
}

/// Running SPRT that stops once its statistic leaves `(lower, upper)`.
#[derive(Debug, Clone)]
pub struct SequentialTest {
    llr: TwoValuedLlr,
    lower: f64,
    upper: f64,
    statistic: CompensatedSum,
    steps: u64,
    decision: Option<Decision>,
}

impl SequentialTest {
    pub fn new(llr: TwoValuedLlr, lower: f64, upper: f64) -> Result<Self> {
        if !(lower < 0.0 && upper > 0.0 && lower.is_finite() && upper.is_finite()) {
            return Err(Error::InvalidArgument("require lower < 0 < upper"));
        }
        Ok(Self {
            llr,
            lower,
            upper,
            statistic: CompensatedSum::default(),
            steps: 0,
            decision: None,
        })
    }

    /// Feeds one bit unless a decision has already been made.
    pub fn observe(&mut self, bit: bool) -> Option<Decision> {
        if self.decision.is_some() {
            return self.decision;
        }
        self.statistic.add(if bit {
            self.llr.if_one
        } else {
            self.llr.if_zero
        });
        self.steps += 1;
        let s = self.statistic.value();
        if s >= self.upper * (1.0 - THRESHOLD_SLACK) {
            self.decision = Some(Decision::AcceptH1);
        } else if s <= self.lower * (1.0 - THRESHOLD_SLACK) {
            self.decision = Some(Decision::AcceptH0);
        }
        self.decision
    }

    pub fn statistic(&self) -> f64 {
        self.statistic.value()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn decision(&self) -> Option<Decision> {
        self.decision
    }

    fn outcome(&self) -> SprtOutcome {
        match self.decision {
            Some(decision) => SprtOutcome::Decided {
                decision,
                steps: self.steps,
            },
            None => SprtOutcome::Truncated { steps: self.steps },
        }
    }
}

/// Runs one SPRT path on i.i.d. bits with `P{bit = 1} = one_prob`.
pub fn run_sprt_path<R: Rng + ?Sized>(
    llr: TwoValuedLlr,
    one_prob: f64,
    lower: f64,
    upper: f64,
    max_steps: u64,
    rng: &mut R,
) -> Result<SprtOutcome> {
    if !(one_prob > 0.0 && one_prob < 1.0) {
        return Err(Error::InvalidArgument("bit probability must lie in (0, 1)"));
    }
    let mut test = SequentialTest::new(llr, lower, upper)?;
    while test.steps() < max_steps {
        if test.observe(rng.random::<f64>() < one_prob).is_some() {
            break;
        }
    }
    Ok(test.outcome())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Hypothesis {
    H0,
    H1,
    /// Each replication draws H1 with probability `pi1`.
    PriorMixed,
}

/// Outcome of both detectors on one shared bit stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairedTrial {
    pub h1_true: bool,
    pub lfc: SprtOutcome,
    pub efc: SprtOutcome,
}

/// Draws quantized bits under the given hypothesis, flips them with the
/// encryption probabilities and feeds every encrypted bit to both the
/// legitimate SPRT and the eavesdropper's mismatched SPRT until both stop.
pub fn run_paired_trial<R: Rng + ?Sized>(
    model: &BitChannelModel,
    enc: &EncryptionParams,
    h1_true: bool,
    thresholds: &DetectorThresholds,
    max_steps: u64,
    rng: &mut R,
) -> Result<PairedTrial> {
    let eff = effective_probs(model, enc);
    let lfc_llr = TwoValuedLlr::bernoulli(eff.p_tilde, eff.q_tilde);
    let efc_llr = TwoValuedLlr {
        if_one: eff.eta,
        if_zero: -eff.eta,
    };
    let mut lfc = SequentialTest::new(lfc_llr, -thresholds.lfc.a_l, thresholds.lfc.b_l)?;
    let efc_th = EfcThresholds::new(thresholds.efc.m_a, thresholds.efc.m_b)?;
    let mut efc = SequentialTest::new(
        efc_llr,
        -f64::from(efc_th.m_a) * eff.eta,
        f64::from(efc_th.m_b) * eff.eta,
    )?;
    let one_prob = if h1_true { model.p() } else { model.q() };
    let mut steps = 0;
    while steps < max_steps && (lfc.decision().is_none() || efc.decision().is_none()) {
        let raw = rng.random::<f64>() < one_prob;
        let flip = rng.random::<f64>() < if raw { enc.psi1() } else { enc.psi0() };
        let bit = raw != flip;
        lfc.observe(bit);
        efc.observe(bit);
        steps += 1;
    }
    Ok(PairedTrial {
        h1_true,
        lfc: lfc.outcome(),
        efc: efc.outcome(),
    })
}

/// How the legitimate detector's thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LfcThresholdRule {
    /// Wald's thresholds for the error targets.
    Wald,
    /// `A_L = m_a η̃`, `B_L = m_b η̃` from the eavesdropper's step thresholds,
    /// which makes both detectors stop together under symmetric encryption.
    LatticeScaled,
    Explicit(LfcThresholds),
}

/// How the eavesdropper's step thresholds are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EfcThresholdRule {
    /// Smallest thresholds whose exact errors meet the targets.
    ExactSearch,
    /// Rounded-up leading-order logarithms.
    Asymptotic,
    Explicit(EfcThresholds),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub model: BitChannelModel,
    pub enc: EncryptionParams,
    pub targets: ErrorTargets,
    pub priors: Priors,
    pub hypothesis: Hypothesis,
    pub replications: u64,
    pub seed: u64,
    pub max_steps: u64,
    pub lfc_rule: LfcThresholdRule,
    pub efc_rule: EfcThresholdRule,
}

impl Scenario {
    /// Equal priors, prior-mixed hypothesis, 10⁴ replications, seed 0,
    /// Wald thresholds for the legitimate detector and searched thresholds
    /// for the eavesdropper.
    pub fn new(model: BitChannelModel, enc: EncryptionParams, targets: ErrorTargets) -> Self {
        Self {
            model,
            enc,
            targets,
            priors: Priors::EQUAL,
            hypothesis: Hypothesis::PriorMixed,
            replications: 10_000,
            seed: 0,
            max_steps: DEFAULT_MAX_STEPS,
            lfc_rule: LfcThresholdRule::Wald,
            efc_rule: EfcThresholdRule::ExactSearch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Result<DetectorThresholds> {
        let eff = effective_probs(&self.model, &self.enc);
        let efc = match self.efc_rule {
            EfcThresholdRule::ExactSearch => {
                efc_thresholds_for_targets(&eff, &self.targets)?.thresholds
            }
            EfcThresholdRule::Asymptotic => {
                efc_asymptotic_thresholds(&eff, &self.targets)?.thresholds
            }
            EfcThresholdRule::Explicit(t) => EfcThresholds::new(t.m_a, t.m_b)?,
        };
        let lfc = match self.lfc_rule {
            LfcThresholdRule::Wald => lfc_wald_thresholds(&self.targets),
            LfcThresholdRule::LatticeScaled => {
                eff.require_admissible()?;
                LfcThresholds {
                    a_l: f64::from(efc.m_a) * eff.eta_tilde,
                    b_l: f64::from(efc.m_b) * eff.eta_tilde,
                }
            }
            LfcThresholdRule::Explicit(t) => t,
        };
        Ok(DetectorThresholds { lfc, efc })
    }
}

/// Runs replication `r` of the scenario with the given thresholds.
pub fn replicate(
    scenario: &Scenario,
    thresholds: &DetectorThresholds,
    r: u64,
) -> Result<PairedTrial> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(r);
    let h1_true = match scenario.hypothesis {
        Hypothesis::H0 => false,
        Hypothesis::H1 => true,
        Hypothesis::PriorMixed => rng.random::<f64>() < scenario.priors.pi1,
    };
    run_paired_trial(
        &scenario.model,
        &scenario.enc,
        h1_true,
        thresholds,
        scenario.max_steps,
        &mut rng,
    )
}

/// Sample mean with its standard error `s / √n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    fn estimate(&self) -> Option<Estimate> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let mean = self.sum.value() / n;
        let stderr = if self.count > 1 {
            let var = ((self.sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
            sqrt(var / n)
        } else {
            0.0
        };
        Some(Estimate {
            mean,
            stderr,
            count: self.count,
        })
    }
}

/// Monte Carlo estimates for one detector. Truncated paths are excluded from
/// every estimate and counted separately.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerfEstimate {
    pub ess_h0: Option<Estimate>,
    pub ess_h1: Option<Estimate>,
    pub fa_rate: Option<Estimate>,
    pub miss_rate: Option<Estimate>,
    pub truncated_count: u64,
}

#[derive(Default)]
struct DetectorTally {
    ess: [Moments; 2],
    wrong: [Moments; 2],
    truncated: u64,
}

impl DetectorTally {
    fn push(&mut self, h1_true: bool, outcome: &SprtOutcome) {
        let h = usize::from(h1_true);
        match *outcome {
            SprtOutcome::Decided { decision, steps } => {
                self.ess[h].push(steps as f64);
                let wrong = (decision == Decision::AcceptH1) != h1_true;
                self.wrong[h].push(if wrong { 1.0 } else { 0.0 });
            }
            SprtOutcome::Truncated { .. } => self.truncated += 1,
        }
    }

    fn finish(&self) -> PerfEstimate {
        PerfEstimate {
            ess_h0: self.ess[0].estimate(),
            ess_h1: self.ess[1].estimate(),
            fa_rate: self.wrong[0].estimate(),
            miss_rate: self.wrong[1].estimate(),
            truncated_count: self.truncated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarloReport {
    pub thresholds: DetectorThresholds,
    pub replications: u64,
    pub lfc: PerfEstimate,
    pub efc: PerfEstimate,
    /// Paths on which both detectors decided but differ in stopping time or
    /// decision.
    pub pathwise_mismatches: u64,
}

/// Aggregates trials in slice order.
pub fn aggregate(
    thresholds: DetectorThresholds,
    trials: &[PairedTrial],
) -> Result<MonteCarloReport> {
    let mut lfc = DetectorTally::default();
    let mut efc = DetectorTally::default();
    let mut pathwise_mismatches = 0;
    for t in trials {
        lfc.push(t.h1_true, &t.lfc);
        efc.push(t.h1_true, &t.efc);
        if let (SprtOutcome::Decided { .. }, SprtOutcome::Decided { .. }) = (t.lfc, t.efc) {
            if t.lfc != t.efc {
                pathwise_mismatches += 1;
            }
        }
    }
    let replications = trials.len() as u64;
    for tally in [&lfc, &efc] {
        if tally.truncated == replications {
            return Err(Error::EstimationFailure {
                truncated: tally.truncated,
            });
        }
    }
    Ok(MonteCarloReport {
        thresholds,
        replications,
        lfc: lfc.finish(),
        efc: efc.finish(),
        pathwise_mismatches,
    })
}

/// Runs every replication in order and aggregates them.
pub fn monte_carlo(scenario: &Scenario) -> Result<MonteCarloReport> {
    scenario.validate()?;
    let thresholds = scenario.thresholds()?;
    let trials = (0..scenario.replications)
        .map(|r| replicate(scenario, &thresholds, r))
        .collect::<Result<Vec<_>>>()?;
    aggregate(thresholds, &trials)
}
