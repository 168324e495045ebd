//! Data tables behind the figures. Grids are dense; contour extraction is
//! left to the plotting tool.

use seqcrypt_core::analytic::{efc_dominant_ess, ess_gap, lambda_hat, lfc_dominant_ess, objective};
use seqcrypt_core::optimize::{axis_limit, Axis};
use seqcrypt_core::simulate::Hypothesis;
use seqcrypt_core::{effective_probs, EncryptionParams};
use serde_json::json;

use crate::commands::{
    efc_design, exact_weighted, monte_carlo_parallel, scenario, weighted, CommandOutput,
};
use crate::config::{FigureName, Resolved};
use crate::error::CliResult;
use crate::output::{num, Table};

pub const DEFAULT_GRID_POINTS: u32 = 101;

/// Ten log-spaced bounds from 1e-10 up to 1e-3, as decades.
pub fn ml_me_decades() -> Vec<f64> {
    (0..10).map(|k| 10.0 - 7.0 * k as f64 / 9.0).collect()
}

pub fn sim_decades() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

fn psi_set(cfg: &Resolved, defaults: &[[f64; 2]]) -> CliResult<Vec<EncryptionParams>> {
    if cfg.enc_explicit {
        return Ok(vec![cfg.enc()]);
    }
    defaults
        .iter()
        .map(|&[a, b]| Ok(EncryptionParams::new(a, b)?))
        .collect()
}

fn header(cfg: &Resolved, columns: &[&str]) -> Table {
    let model = cfg.model();
    let mut t = Table::new(columns);
    t.comment(
        "tool",
        format!("{} {}", crate::output::TOOL, crate::output::VERSION),
    );
    t.comment("model", &cfg.model_source);
    t.comment("p", num(model.p()));
    t.comment("q", num(model.q()));
    t.comment("pi0", num(cfg.pi0));
    t
}

pub fn figure(cfg: &Resolved, name: FigureName) -> CliResult<CommandOutput> {
    let (table, results) = match name {
        FigureName::FigMlMe => ml_me(cfg)?,
        FigureName::FigLambda0Contour
        | FigureName::FigLambda1Contour
        | FigureName::FigObjectiveSurface
        | FigureName::FigObjectiveContour => grid(cfg, name)?,
        FigureName::FigSimSymmetric => sim(cfg, &[[0.0, 0.0], [0.05, 0.05]])?,
        FigureName::FigSimOptimal => sim(cfg, &[[0.0, 0.1], [0.0, 0.05]])?,
    };
    Ok(CommandOutput {
        name: name.name().into(),
        table,
        results,
    })
}

fn ml_me(cfg: &Resolved) -> CliResult<(Table, serde_json::Value)> {
    let model = cfg.model();
    let priors = cfg.priors();
    let mut t = header(
        cfg,
        &[
            "psi0",
            "psi1",
            "alpha_star",
            "M_L",
            "M_E",
            "m_l_h0",
            "m_l_h1",
            "m_e_h0",
            "m_e_h1",
        ],
    );
    let decades = ml_me_decades();
    for enc in psi_set(cfg, &[[0.0, 0.0], [0.05, 0.05], [0.0, 0.2]])? {
        let eff = effective_probs(&model, &enc);
        eff.require_admissible()?;
        for targets in cfg.bounds(Some(&decades)) {
            let ml = lfc_dominant_ess(&eff, &targets)?;
            let me = efc_dominant_ess(&eff, targets.alpha, targets.beta)?;
            t.push(vec![
                num(enc.psi0()),
                num(enc.psi1()),
                num(targets.alpha),
                num(ml.weighted(&priors)),
                num(me.weighted(&priors)),
                num(ml.under_h0),
                num(ml.under_h1),
                num(me.under_h0),
                num(me.under_h1),
            ]);
        }
    }
    let rows = t.rows.len();
    Ok((t, json!({ "rows": rows })))
}

fn grid(cfg: &Resolved, name: FigureName) -> CliResult<(Table, serde_json::Value)> {
    let model = cfg.model();
    let targets = cfg.targets();
    let priors = cfg.priors();
    let n = cfg.resolution.unwrap_or(DEFAULT_GRID_POINTS);
    let lim0 = axis_limit(&model, Axis::Psi0);
    let lim1 = axis_limit(&model, Axis::Psi1);
    let columns: &[&str] = match name {
        FigureName::FigObjectiveSurface => &["psi0", "psi1", "value", "gap_h0", "gap_h1"],
        _ => &["psi0", "psi1", "value"],
    };
    let mut t = header(cfg, columns);
    t.comment(
        "value",
        match name {
            FigureName::FigLambda0Contour => "lambda0",
            FigureName::FigLambda1Contour => "lambda1",
            _ => "objective",
        },
    );
    t.comment("alpha_star", num(targets.alpha));
    t.comment("beta_star", num(targets.beta));
    t.comment("psi0_limit", num(lim0));
    t.comment("psi1_limit", num(lim1));
    for i in 0..n {
        for j in 0..n {
            let enc = EncryptionParams::new(
                lim0 * f64::from(i) / f64::from(n),
                lim1 * f64::from(j) / f64::from(n),
            )?;
            let mut row = vec![num(enc.psi0()), num(enc.psi1())];
            match name {
                FigureName::FigLambda0Contour => row.push(num(lambda_hat(&model, &enc)?.lambda0)),
                FigureName::FigLambda1Contour => row.push(num(lambda_hat(&model, &enc)?.lambda1)),
                FigureName::FigObjectiveSurface => {
                    let gap = ess_gap(&model, &enc, &targets)?;
                    row.push(num(objective(&model, &enc, &targets, &priors)?));
                    row.push(num(gap.under_h0));
                    row.push(num(gap.under_h1));
                }
                _ => row.push(num(objective(&model, &enc, &targets, &priors)?)),
            }
            t.push(row);
        }
    }
    Ok((
        t,
        json!({ "grid_points_per_axis": n, "psi0_limit": lim0, "psi1_limit": lim1 }),
    ))
}

fn sim(cfg: &Resolved, defaults: &[[f64; 2]]) -> CliResult<(Table, serde_json::Value)> {
    let model = cfg.model();
    let priors = cfg.priors();
    let mut t = header(
        cfg,
        &[
            "psi0",
            "psi1",
            "alpha_star",
            "m_a",
            "m_b",
            "a_l",
            "b_l",
            "ess_lfc",
            "ess_lfc_stderr",
            "ess_efc",
            "ess_efc_stderr",
            "ess_efc_exact",
            "truncated",
        ],
    );
    t.comment("replications_per_hypothesis", cfg.replications);
    t.comment("seed", cfg.seed);
    let decades = sim_decades();
    let mut k: u64 = 0;
    for enc in psi_set(cfg, defaults)? {
        let eff = effective_probs(&model, &enc);
        eff.require_admissible()?;
        for targets in cfg.bounds(Some(&decades)) {
            let row_seed = cfg.seed.wrapping_add(2 * k);
            let mut reports = Vec::with_capacity(2);
            for (h, hypothesis) in [Hypothesis::H0, Hypothesis::H1].into_iter().enumerate() {
                let mut s = scenario(cfg, enc, targets, row_seed.wrapping_add(h as u64));
                s.hypothesis = hypothesis;
                reports.push(monte_carlo_parallel(&s)?);
            }
            let (r0, r1) = (&reports[0], &reports[1]);
            let (lfc, lfc_se) = weighted(&priors, r0.lfc.ess_h0, r1.lfc.ess_h1);
            let (efc, efc_se) = weighted(&priors, r0.efc.ess_h0, r1.efc.ess_h1);
            let design = efc_design(cfg, &eff, &targets)?;
            let th = r0.thresholds;
            t.push(vec![
                num(enc.psi0()),
                num(enc.psi1()),
                num(targets.alpha),
                th.efc.m_a.to_string(),
                th.efc.m_b.to_string(),
                num(th.lfc.a_l),
                num(th.lfc.b_l),
                num(lfc),
                num(lfc_se),
                num(efc),
                num(efc_se),
                num(exact_weighted(&eff, &design, &priors)?),
                (r0.lfc.truncated_count
                    + r0.efc.truncated_count
                    + r1.lfc.truncated_count
                    + r1.efc.truncated_count)
                    .to_string(),
            ]);
            k += 1;
        }
    }
    let rows = t.rows.len();
    Ok((
        t,
        json!({
            "rows": rows,
            "seed_rule": "row k under hypothesis h uses seed + 2k + h; replication r uses ChaCha8 stream r",
        }),
    ))
}
