//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use seqcrypt_core::analytic::ErrorTargets;
use seqcrypt_core::simulate::{EfcThresholdRule, Hypothesis, LfcThresholdRule};
use seqcrypt_core::{
    gaussian_shift_preset, BitChannelModel, EncryptionParams, Priors, ToleranceSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SEQCRYPT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Simulate,
    Optimize,
    Figure,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Optimize => "optimize",
            Command::Figure => "figure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FigureName {
    FigMlMe,
    FigLambda0Contour,
    FigLambda1Contour,
    FigObjectiveSurface,
    FigObjectiveContour,
    FigSimSymmetric,
    FigSimOptimal,
}

impl FigureName {
    pub fn name(self) -> &'static str {
        match self {
            FigureName::FigMlMe => "fig_ml_me",
            FigureName::FigLambda0Contour => "fig_lambda0_contour",
            FigureName::FigLambda1Contour => "fig_lambda1_contour",
            FigureName::FigObjectiveSurface => "fig_objective_surface",
            FigureName::FigObjectiveContour => "fig_objective_contour",
            FigureName::FigSimSymmetric => "fig_sim_symmetric",
            FigureName::FigSimOptimal => "fig_sim_optimal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum HypothesisArg {
    H0,
    H1,
    PriorMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfcRuleArg {
    /// Wald's thresholds for the error targets.
    Wald,
    /// Eavesdropper step thresholds scaled by the encrypted log-odds.
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfcRuleArg {
    /// Smallest step thresholds meeting the targets exactly.
    Search,
    /// Rounded-up leading-order logarithms.
    Asymptotic,
}

/// Every field is optional so that flags can be layered over a file.
#[derive(Debug, Clone, Default, PartialEq, Parser, Serialize, Deserialize)]
#[command(
    name = "seqcrypt",
    version,
    about = "Stochastic bit-flip encryption against an eavesdropping sequential detector"
)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML file with the same keys as the long flags (snake_case).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// P{bit = 1 | H1}.
    #[arg(long)]
    pub p: Option<f64>,
    /// P{bit = 1 | H0}; defaults to 1 - p.
    #[arg(long)]
    pub q: Option<f64>,
    /// Mean shift of the Gaussian preset.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Noise level of the Gaussian preset.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub psi0: Option<f64>,
    #[arg(long)]
    pub psi1: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub kappa0: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub pi0: Option<f64>,
    #[arg(long = "reps")]
    pub replications: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long, value_enum)]
    pub hypothesis: Option<HypothesisArg>,
    #[arg(long, value_enum)]
    pub lfc_thresholds: Option<LfcRuleArg>,
    #[arg(long, value_enum)]
    pub efc_thresholds: Option<EfcRuleArg>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
    #[arg(long = "figure", value_enum)]
    pub figure_name: Option<FigureName>,
    /// Grid points per axis.
    #[arg(long)]
    pub resolution: Option<u32>,
    /// Error-bound exponents d, giving alpha = beta = 10^-d per row.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sweep: Option<Vec<f64>>,
}

macro_rules! layer {
    ($top:expr, $base:expr, $($field:ident),*) => {
        RunConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Values set in `self` win over those in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        layer!(
            self,
            base,
            command,
            config,
            p,
            q,
            theta,
            sigma,
            psi0,
            psi1,
            alpha,
            beta,
            kappa0,
            kappa1,
            pi0,
            replications,
            seed,
            max_steps,
            hypothesis,
            lfc_thresholds,
            efc_thresholds,
            output_path,
            figure_name,
            resolution,
            sweep
        )
    }

    /// Reads the file named by `--config`, if any, under the flags.
    pub fn load(self) -> CliResult<RunConfig> {
        match &self.config {
            Some(path) => {
                let file = Self::from_toml_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }
}

/// Fully resolved inputs; this is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub figure_name: Option<FigureName>,
    pub model_source: String,
    pub model_explicit: bool,
    pub p: f64,
    pub q: f64,
    pub psi0: f64,
    pub psi1: f64,
    pub enc_explicit: bool,
    pub alpha: f64,
    pub beta: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    pub pi0: f64,
    pub replications: u64,
    pub seed: u64,
    pub max_steps: u64,
    pub hypothesis: HypothesisArg,
    pub lfc_thresholds: LfcRuleArg,
    pub efc_thresholds: EfcRuleArg,
    pub output_path: PathBuf,
    pub resolution: Option<u32>,
    pub sweep: Option<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Resolved {
    pub fn from_config(cfg: RunConfig, env_out_dir: Option<PathBuf>) -> CliResult<Self> {
        let command = cfg
            .command
            .ok_or_else(|| bad("a command is required: analyze, simulate, optimize or figure"))?;
        match (command, cfg.figure_name) {
            (Command::Figure, None) => return Err(bad("the figure command needs --figure")),
            (Command::Figure, _) | (_, None) => {}
            (_, Some(_)) => return Err(bad("--figure is only valid with the figure command")),
        }

        let model_explicit =
            cfg.p.is_some() || cfg.q.is_some() || cfg.theta.is_some() || cfg.sigma.is_some();
        let (model, model_source) = match (cfg.p, cfg.q, cfg.theta, cfg.sigma) {
            (p, q, None, None) if p.is_some() || q.is_some() => {
                let p = p.or(q.map(|q| 1.0 - q)).unwrap();
                let q = q.unwrap_or(1.0 - p);
                (BitChannelModel::new(p, q)?, "explicit".to_string())
            }
            (None, None, theta, sigma) => {
                let (theta, sigma) = (theta.unwrap_or(1.0), sigma.unwrap_or(1.0));
                let default_model =
                    matches!(cfg.figure_name, Some(FigureName::FigMlMe)) && !model_explicit;
                if default_model {
                    (
                        BitChannelModel::new(0.7, 0.3)?,
                        "fig_ml_me default".to_string(),
                    )
                } else {
                    (
                        gaussian_shift_preset(theta, sigma)?,
                        format!("gaussian_shift(theta = {theta}, sigma = {sigma})"),
                    )
                }
            }
            _ => return Err(bad("give either --p/--q or --theta/--sigma, not both")),
        };

        let enc_explicit = cfg.psi0.is_some() || cfg.psi1.is_some();
        let enc = EncryptionParams::new(cfg.psi0.unwrap_or(0.0), cfg.psi1.unwrap_or(0.0))?;
        let targets = ErrorTargets::new(cfg.alpha.unwrap_or(1e-6), cfg.beta.unwrap_or(1e-6))?;
        let tol = ToleranceSpec::new(cfg.kappa0.unwrap_or(0.265), cfg.kappa1.unwrap_or(0.2077))?;
        let priors = Priors::new(cfg.pi0.unwrap_or(0.5))?;
        let replications = cfg.replications.unwrap_or(10_000);
        if replications == 0 {
            return Err(bad("--reps must be at least 1"));
        }
        let max_steps = cfg
            .max_steps
            .unwrap_or(seqcrypt_core::simulate::DEFAULT_MAX_STEPS);
        if max_steps == 0 {
            return Err(bad("--max-steps must be at least 1"));
        }
        if cfg.resolution == Some(0) {
            return Err(bad("--resolution must be at least 1"));
        }
        if let Some(sweep) = &cfg.sweep {
            if sweep.is_empty() || sweep.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                return Err(bad("--sweep takes positive exponents, e.g. 3,4,5"));
            }
        }
        let output_path = cfg
            .output_path
            .or(env_out_dir)
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(Resolved {
            command,
            figure_name: cfg.figure_name,
            model_source,
            model_explicit,
            p: model.p(),
            q: model.q(),
            psi0: enc.psi0(),
            psi1: enc.psi1(),
            enc_explicit,
            alpha: targets.alpha,
            beta: targets.beta,
            kappa0: tol.kappa0,
            kappa1: tol.kappa1,
            pi0: priors.pi0,
            replications,
            seed: cfg.seed.unwrap_or(0),
            max_steps,
            hypothesis: cfg.hypothesis.unwrap_or(HypothesisArg::PriorMixed),
            lfc_thresholds: cfg.lfc_thresholds.unwrap_or(LfcRuleArg::Wald),
            efc_thresholds: cfg.efc_thresholds.unwrap_or(EfcRuleArg::Search),
            output_path,
            resolution: cfg.resolution,
            sweep: cfg.sweep,
        })
    }

    pub fn model(&self) -> BitChannelModel {
        BitChannelModel::new(self.p, self.q).expect("validated")
    }

    pub fn enc(&self) -> EncryptionParams {
        EncryptionParams::new(self.psi0, self.psi1).expect("validated")
    }

    pub fn targets(&self) -> ErrorTargets {
        ErrorTargets::new(self.alpha, self.beta).expect("validated")
    }

    pub fn tolerance(&self) -> ToleranceSpec {
        ToleranceSpec::new(self.kappa0, self.kappa1).expect("validated")
    }

    pub fn priors(&self) -> Priors {
        Priors::new(self.pi0).expect("validated")
    }

    pub fn hypothesis(&self) -> Hypothesis {
        match self.hypothesis {
            HypothesisArg::H0 => Hypothesis::H0,
            HypothesisArg::H1 => Hypothesis::H1,
            HypothesisArg::PriorMixed => Hypothesis::PriorMixed,
        }
    }

    pub fn lfc_rule(&self) -> LfcThresholdRule {
        match self.lfc_thresholds {
            LfcRuleArg::Wald => LfcThresholdRule::Wald,
            LfcRuleArg::Lattice => LfcThresholdRule::LatticeScaled,
        }
    }

    pub fn efc_rule(&self) -> EfcThresholdRule {
        match self.efc_thresholds {
            EfcRuleArg::Search => EfcThresholdRule::ExactSearch,
            EfcRuleArg::Asymptotic => EfcThresholdRule::Asymptotic,
        }
    }

    /// Error bounds per row: the sweep if given, else the single target pair.
    pub fn bounds(&self, default_sweep: Option<&[f64]>) -> Vec<ErrorTargets> {
        match self.sweep.as_deref().or(default_sweep) {
            Some(exps) => exps
                .iter()
                .map(|d| ErrorTargets::equal(10f64.powf(-d)).expect("positive exponent"))
                .collect(),
            None => vec![self.targets()],
        }
    }
}
