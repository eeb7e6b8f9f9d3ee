//! Subcommand implementations.

use crate::config::RunConfig;
use crate::output::{num, opt, OutputDir};
use fesh3b::converge::{run_ladder, LadderBase, Observable};
use fesh3b::quadrature::MomentumGrid;
use fesh3b::recomb::{alpha_deep, alpha_effective_range_reference, alpha_feshbach, RecombGrid, RecombinationResult};
use fesh3b::trimers::{scan_branches, threshold_fields, TracePolicy, TrimerBranch, TrimerSolver, DEFAULT_THETA};
use fesh3b::twobody::{dimer_spectrum_scan, AmplitudeContext, PairInteraction};
use fesh3b::units::{derive_couplings, Calibration};
use fesh3b::Result;
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;

fn calibration(cfg: &RunConfig) -> Result<Calibration> {
    cfg.validate()?;
    derive_couplings(&cfg.resonance_params()?)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Serialize)]
struct CalibrationReport {
    label: String,
    b_a0: f64,
    b_over_rvdw: f64,
    length_unit_a0: f64,
    energy_unit_joule: f64,
    g0: f64,
    g0_crit: f64,
    lambda: f64,
    width: f64,
    e_mol_offset: f64,
    r_star_a0: f64,
    r_e_at_resonance_a0: f64,
    deep_background_dimer: bool,
    sign_rule: String,
}

pub fn calibrate(cfg: &RunConfig) -> Result<()> {
    let cal = calibration(cfg)?;
    let c = &cal.couplings;
    // r_e at nu = 0 from the large-a expansion: 4b/sqrt(pi) - 2R*
    let r_e = 4.0 * c.b / std::f64::consts::PI.sqrt() - 2.0 * c.r_star();
    let report = CalibrationReport {
        label: cal.res.label.clone(),
        b_a0: cal.res.range_a0(),
        b_over_rvdw: cal.res.range_a0() / cal.res.r_vdw,
        length_unit_a0: cal.units.length_unit,
        energy_unit_joule: cal.units.energy_unit,
        g0: c.g0,
        g0_crit: c.g0_crit,
        lambda: c.lambda,
        width: c.width,
        e_mol_offset: c.e_mol_offset,
        r_star_a0: cal.r_star_a0(),
        r_e_at_resonance_a0: cal.units.length_to_a0(r_e),
        deep_background_dimer: c.a_bg > c.b * std::f64::consts::PI.sqrt(),
        sign_rule: format!(
            "ok: delta_mu*deltaB = {:.6} and a_bg = {} a0 share a sign",
            cal.res.delta_mu * cal.res.delta_b,
            cal.res.a_bg
        ),
    };
    println!("resonance        {}", report.label);
    println!("B0, deltaB       {} G, {} G", cal.res.b0, cal.res.delta_b);
    println!("a_bg             {} a0", cal.res.a_bg);
    println!("delta_mu         {} mu_B", cal.res.delta_mu);
    println!("R_vdW            {} a0", cal.res.r_vdw);
    println!("b                {} a0 ({:.4} R_vdW)", report.b_a0, report.b_over_rvdw);
    println!("energy unit      {:.6e} J", report.energy_unit_joule);
    println!("g0, g0_crit      {:.6e}, {:.6e}", c.g0, c.g0_crit);
    println!("Lambda           {:.6e}", c.lambda);
    println!("W                {:.6e}", c.width);
    println!("E_mol - nu       {:.6e}", c.e_mol_offset);
    println!("R*               {:.6e} a0", report.r_star_a0);
    println!("r_e (nu = 0)     {:.6e} a0", report.r_e_at_resonance_a0);
    println!("a(B0 - 1 G)      {:.6e} a0", cal.units.length_to_a0(AmplitudeContext::at_field(c, cal.res.b0 - 1.0).scattering_length()));
    println!("deep bg dimer    {}", report.deep_background_dimer);
    println!("sign rule        {}", report.sign_rule);
    if let Some(dir) = &cfg.out {
        let mut out = OutputDir::create(dir)?;
        out.json("calibration.json", &report)?;
        out.manifest("calibrate", cfg, &serde_json::json!({}))?;
    }
    Ok(())
}

pub fn dimer_scan(cfg: &RunConfig) -> Result<()> {
    let cal = calibration(cfg)?;
    let scan = cfg.scan_or_default(&cal.res);
    let rows = dimer_spectrum_scan(&cal, scan.b_from, scan.b_to, scan.nb)?;
    let mut csv = Vec::new();
    for r in &rows {
        let a0 = cal.units.length_to_a0(r.a);
        if r.dimers.is_empty() {
            csv.push(vec![num(r.field), num(a0), String::new(), String::new(), String::new(), String::new(), String::new(), r.avoided_crossing.to_string()]);
        }
        for d in &r.dimers {
            csv.push(vec![
                num(r.field),
                num(a0),
                d.branch.as_str().into(),
                num(d.energy),
                num(cal.units.energy_to_mhz(d.energy)),
                num(d.p_closed),
                num(d.energy * r.a * r.a),
                r.avoided_crossing.to_string(),
            ]);
        }
    }
    let mut out = OutputDir::create(&out_dir(cfg))?;
    out.csv(
        "dimers.csv",
        &["B_gauss", "a_over_a0", "branch", "E_dim_reduced", "E_dim_MHz", "p_closed", "E_dim_a2", "avoided_crossing"],
        &csv,
    )?;
    out.manifest("dimer-scan", cfg, &serde_json::json!({ "fields": scan.nb, "b_a0": cal.res.range_a0() }))?;
    println!("dimer-scan: {} fields, {} rows -> {}", rows.len(), csv.len(), out.path("dimers.csv").display());
    Ok(())
}

fn trimer_solver(cfg: &RunConfig, b: f64) -> TrimerSolver {
    let g = &cfg.grid;
    TrimerSolver::new(MomentumGrid::log_panels(g.n, g.k_min / b, g.k_max / b), DEFAULT_THETA)
}

#[derive(Serialize)]
struct ThresholdRecord {
    branch: usize,
    kind: &'static str,
    #[serde(rename = "B_star_gauss")]
    b_star_gauss: f64,
    uncertainty_gauss: f64,
    in_window: bool,
}

/// Points of the two half-branches of one level, ordered by 1/a.
fn joined_points(branches: &[TrimerBranch], index: usize) -> Vec<fesh3b::trimers::BranchPoint> {
    let mut pts: Vec<_> = branches.iter().filter(|b| b.index == index).flat_map(|b| b.points.iter().copied()).collect();
    pts.sort_by(|p, q| p.inv_a.partial_cmp(&q.inv_a).unwrap());
    pts.dedup_by(|p, q| p.inv_a == q.inv_a);
    pts
}

pub fn trimer_scan(cfg: &RunConfig) -> Result<()> {
    let cal = calibration(cfg)?;
    let scan = cfg.scan_or_default(&cal.res);
    let c = &cal.couplings;
    let solver = trimer_solver(cfg, c.b);
    let mut policy = TracePolicy::for_range(c.b);
    policy.step = cfg.trimer.step / c.b;
    let result = scan_branches(c, cfg.trimer.levels, &policy, &solver);
    let in_window = |f: f64| f.is_finite() && f >= scan.b_from && f <= scan.b_to;
    let mut csv = Vec::new();
    for level in 0..cfg.trimer.levels {
        for p in joined_points(&result.branches, level) {
            if in_window(p.field) {
                csv.push(vec![num(p.field), num(p.energy), num(p.energy - p.threshold), level.to_string(), p.qualitative.to_string()]);
            }
        }
    }
    let thresholds: Vec<ThresholdRecord> = result
        .branches
        .iter()
        .flat_map(|b| threshold_fields(b).into_iter().map(move |t| (b.index, t)))
        .map(|(i, t)| ThresholdRecord {
            branch: i,
            kind: t.kind.as_str(),
            b_star_gauss: t.field,
            uncertainty_gauss: t.uncertainty,
            in_window: in_window(t.field),
        })
        .collect();
    let mut out = OutputDir::create(&out_dir(cfg))?;
    out.csv(
        "trimer_branches.csv",
        &["B_gauss", "E_reduced", "E_minus_Edim_reduced", "branch_index", "qualitative_flag"],
        &csv,
    )?;
    out.json(
        "thresholds.json",
        &serde_json::json!({
            "thresholds": thresholds,
            "observed": cal.res.observed,
            "efimov_energies": result.spectrum.energies,
            "efimov_ratios": result.spectrum.ratios(),
            "failures": result.failures,
        }),
    )?;
    out.manifest("trimer-scan", cfg, &serde_json::json!({ "b_a0": cal.res.range_a0(), "n": solver.grid.n(), "theta": solver.theta }))?;
    for t in &thresholds {
        println!("branch {} {:<10} B* = {:.4} G (+- {:.2e})", t.branch, t.kind, t.b_star_gauss, t.uncertainty_gauss);
    }
    for (i, d, m) in &result.failures {
        eprintln!("branch {i} direction {d}: {m}");
    }
    Ok(())
}

struct RecombRow {
    field: f64,
    a_a0: f64,
    result: Result<RecombinationResult>,
    reference: Option<f64>,
    by_cut: Vec<(f64, f64)>,
}

pub fn recomb_scan(cfg: &RunConfig) -> Result<()> {
    let cal = calibration(cfg)?;
    let scan = cfg.scan_or_default(&cal.res);
    let c = &cal.couplings;
    let rg = RecombGrid {
        k_min: cfg.grid.k_min / c.b,
        k_max: cfg.grid.k_max / c.b,
        per_decade: cfg.recomb.per_decade,
        order: cfg.recomb.order,
    };
    let r_vdw = cal.units.length_from_a0(cal.res.r_vdw);
    let factors = &cfg.recomb.r_cut_factors;
    let main_cut = if factors.contains(&1.0) { 1.0 } else { factors[0] };
    let fields: Vec<f64> = (0..scan.nb)
        .map(|i| scan.b_from + (scan.b_to - scan.b_from) * i as f64 / (scan.nb - 1) as f64)
        .collect();
    let rows: Vec<RecombRow> = fields
        .par_iter()
        .map(|&field| {
            let ctx = AmplitudeContext::at_field(c, field);
            let a = ctx.scattering_length();
            let mut reference = None;
            let mut by_cut = Vec::new();
            let result = if ctx.shallow_dimer().is_some() {
                reference = alpha_effective_range_reference(a, c.r_star()).ok();
                alpha_feshbach(&ctx, &rg)
            } else {
                let mut main = None;
                let mut err = None;
                for &f in factors {
                    match alpha_deep(&ctx, r_vdw, f, cfg.recomb.box_l, &rg) {
                        Ok(r) => {
                            by_cut.push((f, cal.units.rate6_to_cm6_per_s(r.alpha)));
                            if f == main_cut {
                                main = Some(r);
                            }
                        }
                        Err(e) => err = Some(e),
                    }
                }
                match (main, err) {
                    (Some(r), _) => Ok(r),
                    (None, Some(e)) => Err(e),
                    (None, None) => Err(fesh3b::Error::Numerical("no cutoff evaluated".into())),
                }
            };
            RecombRow {
                field,
                a_a0: cal.units.length_to_a0(a),
                result: result.map(|r| r.in_units(&cal.units)),
                reference: reference.map(|v| cal.units.rate6_to_cm6_per_s(v)),
                by_cut,
            }
        })
        .collect();
    let mut csv = Vec::new();
    let mut failures = 0;
    for r in &rows {
        let cuts = r.by_cut.iter().map(|(f, v)| format!("{f}:{v:e}")).collect::<Vec<_>>().join(";");
        match &r.result {
            Ok(res) => csv.push(vec![
                num(r.field),
                opt(res.alpha_cm6),
                res.regime.as_str().into(),
                opt(res.gamma_abs),
                opt(res.p_closed),
                opt(res.p_less),
                num(r.a_a0),
                opt(r.reference),
                cuts,
                opt(res.residue_mismatch),
                String::new(),
            ]),
            Err(e) => {
                failures += 1;
                csv.push(vec![
                    num(r.field),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(r.a_a0),
                    opt(r.reference),
                    cuts,
                    String::new(),
                    e.to_string(),
                ])
            }
        }
    }
    let mut out = OutputDir::create(&out_dir(cfg))?;
    out.csv(
        "recomb.csv",
        &[
            "B_gauss",
            "alpha_cm6_per_s",
            "regime",
            "gamma_abs",
            "p_closed",
            "P_less",
            "a_over_a0",
            "alpha_reference_cm6_per_s",
            "alpha_deep_by_cut",
            "residue_mismatch",
            "error",
        ],
        &csv,
    )?;
    out.manifest(
        "recomb-scan",
        cfg,
        &serde_json::json!({ "b_a0": cal.res.range_a0(), "grid": rg, "r_vdw_reduced": r_vdw }),
    )?;
    println!("recomb-scan: {} fields ({} failed) -> {}", rows.len(), failures, out.path("recomb.csv").display());
    Ok(())
}

pub fn converge(cfg: &RunConfig) -> Result<()> {
    let cal = calibration(cfg)?;
    let obs = Observable::parse(&cfg.converge.observable)?;
    let base = LadderBase {
        n: cfg.grid.n,
        k_min: cfg.grid.k_min,
        k_max: cfg.grid.k_max,
    };
    let report = run_ladder(&cal.couplings, obs, &cfg.converge.ladder, &base)?;
    println!("{} vs {}", report.observable, report.parameter);
    for i in 0..report.values.len() {
        println!("{:>10} {:>22.14e} {:>10.3e}", report.ladder[i], report.values[i], report.deltas[i]);
    }
    if let Some(dir) = &cfg.out {
        let mut out = OutputDir::create(dir)?;
        out.json("converge.json", &report)?;
        out.manifest("converge", cfg, &serde_json::json!({}))?;
    }
    Ok(())
}
