//! The four subcommands. Each builds one table and a JSON block of results.

use rayon::prelude::*;
use seqcrypt_core::analytic::{
    efc_asymptotic_ess, efc_asymptotic_thresholds, efc_dominant_ess, efc_exact_ess,
    efc_thresholds_for_targets, lambda_hat, lfc_asymptotic_ess, lfc_dominant_ess, objective,
    EfcDesign, ErrorTargets,
};
use seqcrypt_core::optimize::{
    algorithm1_at_resolution, grid_search, OptResult, DEFAULT_CONDITION_RESOLUTION,
};
use seqcrypt_core::simulate::{aggregate, replicate, Estimate, MonteCarloReport, Scenario};
use seqcrypt_core::{effective_probs, BitChannelModel, EffectiveModel, EncryptionParams, Priors};
use serde_json::json;

use crate::config::{EfcRuleArg, Resolved};
use crate::error::CliResult;
use crate::output::{num, Table};

/// Grid resolution of the fallback search when the corner conditions fail.
pub const DEFAULT_GRID_RESOLUTION: u32 = 400;

pub struct CommandOutput {
    pub name: String,
    pub table: Table,
    pub results: serde_json::Value,
}

pub fn efc_design(
    cfg: &Resolved,
    eff: &EffectiveModel,
    targets: &ErrorTargets,
) -> CliResult<EfcDesign> {
    Ok(match cfg.efc_thresholds {
        EfcRuleArg::Search => efc_thresholds_for_targets(eff, targets)?,
        EfcRuleArg::Asymptotic => efc_asymptotic_thresholds(eff, targets)?,
    })
}

pub const ANALYZE_COLUMNS: [&str; 21] = [
    "alpha_star",
    "beta_star",
    "p_tilde",
    "q_tilde",
    "lambda0",
    "lambda1",
    "m_l_h0",
    "m_l_h1",
    "t_hat_l_h0",
    "t_hat_l_h1",
    "m_a",
    "m_b",
    "alpha_e",
    "beta_e",
    "ess_e_h0",
    "ess_e_h1",
    "m_e_h0",
    "m_e_h1",
    "t_hat_e_h0",
    "t_hat_e_h1",
    "objective",
];

fn arg_name(v: impl clap::ValueEnum) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

fn model_comments(table: &mut Table, cfg: &Resolved, model: &BitChannelModel) {
    table.comment(
        "tool",
        format!("{} {}", crate::output::TOOL, crate::output::VERSION),
    );
    table.comment("model", &cfg.model_source);
    table.comment("p", num(model.p()));
    table.comment("q", num(model.q()));
    table.comment("pi0", num(cfg.pi0));
}

pub fn analyze(cfg: &Resolved) -> CliResult<CommandOutput> {
    let model = cfg.model();
    let enc = cfg.enc();
    let priors = cfg.priors();
    let eff = effective_probs(&model, &enc);
    eff.require_admissible()?;
    let lambda = lambda_hat(&model, &enc)?;
    let mut table = Table::new(&ANALYZE_COLUMNS);
    model_comments(&mut table, cfg, &model);
    table.comment("psi0", num(enc.psi0()));
    table.comment("psi1", num(enc.psi1()));
    table.comment("efc_thresholds", arg_name(cfg.efc_thresholds));
    for targets in cfg.bounds(None) {
        let ml = lfc_dominant_ess(&eff, &targets)?;
        let tl = lfc_asymptotic_ess(&eff, &targets)?;
        let design = efc_design(cfg, &eff, &targets)?;
        let ess = efc_exact_ess(&eff, design.thresholds)?;
        let me = efc_dominant_ess(&eff, design.realized.alpha, design.realized.beta)?;
        let te = efc_asymptotic_ess(&eff, &targets)?;
        let obj = objective(&model, &enc, &targets, &priors)?;
        table.push(vec![
            num(targets.alpha),
            num(targets.beta),
            num(eff.p_tilde),
            num(eff.q_tilde),
            num(lambda.lambda0),
            num(lambda.lambda1),
            num(ml.under_h0),
            num(ml.under_h1),
            num(tl.under_h0),
            num(tl.under_h1),
            design.thresholds.m_a.to_string(),
            design.thresholds.m_b.to_string(),
            num(design.realized.alpha),
            num(design.realized.beta),
            num(ess.under_h0),
            num(ess.under_h1),
            num(me.under_h0),
            num(me.under_h1),
            num(te.under_h0),
            num(te.under_h1),
            num(obj),
        ]);
    }
    let rows = table.rows.len();
    Ok(CommandOutput {
        name: "analyze".into(),
        table,
        results: json!({ "rows": rows }),
    })
}

/// Monte Carlo with replications fanned out over the rayon pool. Each
/// replication owns its random stream and the trials are aggregated in
/// index order, so the result equals the serial run.
pub fn monte_carlo_parallel(scenario: &Scenario) -> CliResult<MonteCarloReport> {
    scenario.validate()?;
    let thresholds = scenario.thresholds()?;
    let trials = (0..scenario.replications)
        .into_par_iter()
        .map(|r| replicate(scenario, &thresholds, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(thresholds, &trials)?)
}

pub fn scenario(
    cfg: &Resolved,
    enc: EncryptionParams,
    targets: ErrorTargets,
    seed: u64,
) -> Scenario {
    let mut s = Scenario::new(cfg.model(), enc, targets);
    s.priors = cfg.priors();
    s.hypothesis = cfg.hypothesis();
    s.replications = cfg.replications;
    s.seed = seed;
    s.max_steps = cfg.max_steps;
    s.lfc_rule = cfg.lfc_rule();
    s.efc_rule = cfg.efc_rule();
    s
}

fn mean_cells(e: Option<Estimate>) -> [String; 2] {
    match e {
        Some(e) => [num(e.mean), num(e.stderr)],
        None => [num(f64::NAN), num(f64::NAN)],
    }
}

pub fn simulate(cfg: &Resolved) -> CliResult<CommandOutput> {
    let model = cfg.model();
    let enc = cfg.enc();
    let mut columns = vec![
        "alpha_star",
        "beta_star",
        "m_a",
        "m_b",
        "a_l",
        "b_l",
        "replications",
        "pathwise_mismatches",
    ];
    let per_detector = [
        "ess_h0",
        "ess_h0_stderr",
        "ess_h1",
        "ess_h1_stderr",
        "fa_rate",
        "fa_rate_stderr",
        "miss_rate",
        "miss_rate_stderr",
        "truncated",
    ];
    let names: Vec<String> = ["lfc", "efc"]
        .iter()
        .flat_map(|d| per_detector.iter().map(move |c| format!("{d}_{c}")))
        .collect();
    columns.extend(names.iter().map(String::as_str));
    let mut table = Table::new(&columns);
    model_comments(&mut table, cfg, &model);
    table.comment("psi0", num(enc.psi0()));
    table.comment("psi1", num(enc.psi1()));
    table.comment("hypothesis", arg_name(cfg.hypothesis));
    table.comment("seed", cfg.seed);
    for (k, targets) in cfg.bounds(None).into_iter().enumerate() {
        let s = scenario(cfg, enc, targets, cfg.seed.wrapping_add(k as u64));
        let r = monte_carlo_parallel(&s)?;
        let mut row = vec![
            num(targets.alpha),
            num(targets.beta),
            r.thresholds.efc.m_a.to_string(),
            r.thresholds.efc.m_b.to_string(),
            num(r.thresholds.lfc.a_l),
            num(r.thresholds.lfc.b_l),
            r.replications.to_string(),
            r.pathwise_mismatches.to_string(),
        ];
        for perf in [r.lfc, r.efc] {
            for e in [perf.ess_h0, perf.ess_h1, perf.fa_rate, perf.miss_rate] {
                row.extend(mean_cells(e));
            }
            row.push(perf.truncated_count.to_string());
        }
        table.push(row);
    }
    let rows = table.rows.len();
    Ok(CommandOutput {
        name: "simulate".into(),
        table,
        results: json!({
            "rows": rows,
            "seed_rule": "row k uses seed + k; replication r uses ChaCha8 stream r of that seed",
        }),
    })
}

fn opt_json(r: &OptResult) -> serde_json::Value {
    json!({
        "psi_star": r.psi_star.map(|p| [p.psi0(), p.psi1()]),
        "method": r.method,
        "objective_value": r.objective_value,
        "candidate_values": r.candidate_values,
        "caps": r.caps,
        "conditions": r.conditions.as_ref().map(|c| json!({
            "c1_holds": c.c1_holds,
            "c2_holds": c.c2_holds,
            "c1_margins": c.c1_margins,
            "c2_violation_count": c.c2_violations.len(),
        })),
    })
}

pub fn optimize(cfg: &Resolved) -> CliResult<CommandOutput> {
    let model = cfg.model();
    let tol = cfg.tolerance();
    let targets = cfg.targets();
    let priors = cfg.priors();
    let corner = algorithm1_at_resolution(
        &model,
        &tol,
        &targets,
        &priors,
        cfg.resolution.unwrap_or(DEFAULT_CONDITION_RESOLUTION),
    )?;
    let fallback = match corner.psi_star {
        Some(_) => None,
        None => Some(grid_search(
            &model,
            &tol,
            &targets,
            &priors,
            cfg.resolution.unwrap_or(DEFAULT_GRID_RESOLUTION),
        )?),
    };
    let chosen = fallback.as_ref().unwrap_or(&corner);
    let psi_star = chosen.psi_star.expect("both methods return a point here");

    let mut table = Table::new(&[
        "candidate",
        "psi0",
        "psi1",
        "lambda0",
        "lambda1",
        "objective",
    ]);
    model_comments(&mut table, cfg, &model);
    table.comment("kappa0", num(tol.kappa0));
    table.comment("kappa1", num(tol.kappa1));
    table.comment("alpha_star", num(targets.alpha));
    table.comment("beta_star", num(targets.beta));
    let mut row = |label: &str, enc: EncryptionParams| -> CliResult<()> {
        let l = lambda_hat(&model, &enc)?;
        let v = objective(&model, &enc, &targets, &priors)?;
        table.push(vec![
            label.to_string(),
            num(enc.psi0()),
            num(enc.psi1()),
            num(l.lambda0),
            num(l.lambda1),
            num(v),
        ]);
        Ok(())
    };
    if let Some(caps) = corner.caps {
        row("psi0_corner", EncryptionParams::new(caps.psi0_cap, 0.0)?)?;
        row("psi1_corner", EncryptionParams::new(0.0, caps.psi1_cap)?)?;
    }
    row("selected", psi_star)?;

    let ratio = corner.candidate_values.map(|[a, b]| b / a);
    Ok(CommandOutput {
        name: "optimize".into(),
        table,
        results: json!({
            "psi_star": [psi_star.psi0(), psi_star.psi1()],
            "method": chosen.method,
            "heuristic": fallback.is_some(),
            "objective_value": chosen.objective_value,
            "corner_ratio_psi1_over_psi0": ratio,
            "algorithm1": opt_json(&corner),
            "grid_search": fallback.as_ref().map(opt_json),
        }),
    })
}

pub(crate) fn weighted(priors: &Priors, h0: Option<Estimate>, h1: Option<Estimate>) -> (f64, f64) {
    match (h0, h1) {
        (Some(a), Some(b)) => (
            priors.pi0 * a.mean + priors.pi1 * b.mean,
            (priors.pi0 * priors.pi0 * a.stderr * a.stderr
                + priors.pi1 * priors.pi1 * b.stderr * b.stderr)
                .sqrt(),
        ),
        _ => (f64::NAN, f64::NAN),
    }
}

pub(crate) fn exact_weighted(
    eff: &EffectiveModel,
    design: &EfcDesign,
    priors: &Priors,
) -> CliResult<f64> {
    Ok(efc_exact_ess(eff, design.thresholds)?.weighted(priors))
}
