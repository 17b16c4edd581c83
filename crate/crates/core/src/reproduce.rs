//! The desk-scale acceptance battery: one check per criterion, each with
//! its pinned tolerance, plus two data-only experiments.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::conditions::{
    admissible_from_yr, cb_to_yr, preset_conditions, trace_space_distance, yr_to_cb, ConditionError,
    ConditionPreset, OuterBoundary,
};
use crate::discrete::{
    bilaplacian_closed_form, bilaplacian_closed_form_int, discrete_semigroup, discrete_transition_time,
    exhaustive_failures, geometric_grid, kappa, markov_character, spectral_gap_bounds_check,
};
use crate::fem::{
    assemble, assemble_laplacian_ck, eigensolve, kernel_dimension, kernel_sup_bound, spectral_data, FemEvolver,
    Mesh, ReducedSystem,
};
use crate::graph::{incidence_matrix, preset_graph, Graph, MetricGraph, PresetKind};
use crate::qualitative::{
    classify, dissipativity_identity_probe, last_sign_change, loglog_slope, positive_cosine_battery, Profile,
    SpectralData, TransitionOptions, Verdict,
};
use crate::Error;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(bool, String), Error>;

/// The thirteen criteria in order.
pub fn criteria() -> Vec<(usize, &'static str, Check)> {
    vec![
        (1, "closed form equals (I I^T)^2, n <= 6", closed_form as Check),
        (2, "exp(-0.1 L^2) on P3 matches the reference matrix", reference_matrix),
        (3, "positivity <=> l-inf contractivity <=> completeness, n <= 6", completeness),
        (4, "kappa values on the two-edge star", kappa_values),
        (5, "spectral gap bounds, n <= 6", gap_bounds),
        (6, "interval spectra, sliding and hinged", interval_spectra),
        (7, "kernel dimension table, mesh independent", kernel_table),
        (8, "square relation on the equilateral 3-star", square_relation),
        (9, "self-adjointness roundtrip for every preset", self_adjoint_roundtrip),
        (10, "eventual positivity verdict table", verdict_table),
        (11, "transition times", transition_times),
        (12, "ultracontractivity slope", ultracontractivity_slope),
        (13, "dissipativity identity probe battery", identity_battery),
    ]
}

pub fn run_criterion(id: usize, name: &'static str, check: Check) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all() -> Vec<CriterionResult> {
    criteria()
        .into_iter()
        .map(|(id, name, check)| run_criterion(id, name, check))
        .collect()
}

pub fn format_line(r: &CriterionResult) -> String {
    format!(
        "[{}] {:>2}. {} ({:.2}s): {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.id,
        r.name,
        r.seconds,
        r.detail
    )
}

fn equilateral(kind: PresetKind, n: usize) -> Result<MetricGraph, Error> {
    Ok(MetricGraph::equilateral(preset_graph(kind, n)?, 1.0)?)
}

fn unit_interval() -> Result<MetricGraph, Error> {
    Ok(MetricGraph::equilateral(Graph::new(2, vec![(0, 1)])?, 1.0)?)
}

fn fem_system(g: &MetricGraph, preset: &ConditionPreset, n: usize) -> Result<ReducedSystem, Error> {
    let cond = preset_conditions(g, preset)?;
    Ok(assemble(g, &Mesh::uniform(g.edge_count(), n)?, &cond)?)
}

fn hinged_interval(n: usize) -> Result<ReducedSystem, Error> {
    use crate::conditions::{ConditionYR, LocalSpace, VertexRule};
    let g = unit_interval()?;
    let rule = VertexRule::new(LocalSpace::Zero, LocalSpace::Full);
    let cond = ConditionYR::from_vertex_rules(g.graph(), &[rule.clone(), rule], None, "hinged")?;
    Ok(assemble(&g, &Mesh::uniform(1, n)?, &cond)?)
}

fn closed_form() -> Result<(bool, String), Error> {
    let mut total = 0;
    let mut bad = 0;
    for n in 1..=6 {
        let (count, failures) = exhaustive_failures(n, |g| {
            let inc = incidence_matrix(g);
            let lap = &inc * inc.transpose();
            bilaplacian_closed_form_int(g) == &lap * &lap
        })?;
        total += count;
        bad += failures.len();
    }
    Ok((bad == 0, format!("{total} graphs, {bad} mismatches")))
}

fn reference_matrix() -> Result<(bool, String), Error> {
    let reference = DMatrix::from_row_slice(3, 3, &[
        0.8535, 0.1978, -0.0513, //
        0.1978, 0.6048, 0.1978, //
        -0.0513, 0.1978, 0.8535,
    ]);
    let op = bilaplacian_closed_form(&preset_graph(PresetKind::Path, 3)?);
    let s = discrete_semigroup(&op, 0.1)?;
    let err = (s - reference).amax();
    Ok((err <= 5e-4, format!("max entry deviation {err:.2e} (tol 5e-4)")))
}

fn completeness() -> Result<(bool, String), Error> {
    let grid = geometric_grid(1e-3, 10.0, 13);
    let mut total = 0;
    let mut bad = 0;
    for n in 1..=6 {
        let (count, failures) = exhaustive_failures(n, |g| {
            markov_character(g, &grid).map(|r| !r.disagreement).unwrap_or(false)
        })?;
        total += count;
        bad += failures.len();
    }
    Ok((bad == 0, format!("{total} graphs, {bad} disagreements")))
}

fn kappa_values() -> Result<(bool, String), Error> {
    let star = preset_graph(PresetKind::Star, 2)?;
    let f = [1.0, 1.75, -1.0];
    let k2 = kappa(&star, &f, 2.0)?.kappa;
    let lo = kappa(&star, &f, 5.71)?.kappa;
    let hi = kappa(&star, &f, 5.72)?.kappa;
    let ok = k2 == 49.0 / 8.0 && lo > 0.0 && hi < 0.0;
    Ok((ok, format!("kappa(2) = {k2}, kappa(5.71) = {lo:.4}, kappa(5.72) = {hi:.4}")))
}

fn gap_bounds() -> Result<(bool, String), Error> {
    let mut total = 0;
    let mut bad = 0;
    for n in 2..=6 {
        let (count, failures) = exhaustive_failures(n, |g| spectral_gap_bounds_check(g).within)?;
        total += count;
        bad += failures.len();
    }
    let mut sharp = true;
    for n in 2..=6 {
        let p = spectral_gap_bounds_check(&preset_graph(PresetKind::Path, n)?);
        let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let k = spectral_gap_bounds_check(&Graph::new(n, pairs)?);
        sharp &= (p.lambda2 - p.lower).abs() <= 1e-9 && (k.lambda2 - k.upper).abs() <= 1e-9;
    }
    Ok((
        bad == 0 && sharp,
        format!("{total} graphs, {bad} outside the bounds, equality for P_V and K_V: {sharp}"),
    ))
}

fn interval_spectra() -> Result<(bool, String), Error> {
    let p4 = PI.powi(4);
    let sliding = eigensolve(&fem_system(&unit_interval()?, &ConditionPreset::Friedrichs, 64)?, Some(3))?;
    let hinged = eigensolve(&hinged_interval(64)?, Some(2))?;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let errs = [
        rel(sliding.values[1], p4),
        rel(sliding.values[2], 16.0 * p4),
        rel(hinged.values[0], p4),
        rel(hinged.values[1], 16.0 * p4),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let zero = sliding.values[0].abs() <= 1e-3 * p4;
    Ok((
        worst <= 1e-3 && zero,
        format!("sliding lambda_1 = {:.1e}, worst relative error {worst:.2e} (tol 1e-3)", sliding.values[0]),
    ))
}

fn kernel_table() -> Result<(bool, String), Error> {
    let edge = unit_interval()?;
    let p3 = equilateral(PresetKind::Path, 3)?;
    let star = equilateral(PresetKind::Star, 3)?;
    let c3 = equilateral(PresetKind::Cycle, 3)?;
    let c4 = equilateral(PresetKind::Cycle, 4)?;
    let mut cases: Vec<(&str, &MetricGraph, ConditionPreset, usize)> = Vec::new();
    for (name, g) in [("edge", &edge), ("P3", &p3), ("star3", &star), ("C4", &c4)] {
        cases.push((name, g, ConditionPreset::Friedrichs, 1));
        cases.push((name, g, ConditionPreset::ContFree, g.vertex_count()));
    }
    for (name, g) in [("P3", &p3), ("star3", &star), ("C4", &c4)] {
        cases.push((name, g, ConditionPreset::Krein, g.edge_count() + g.vertex_count()));
    }
    cases.push(("C3", &c3, ConditionPreset::ContDeriv, 1));
    cases.push(("C4", &c4, ConditionPreset::ContDeriv, 2));
    let mut failures = Vec::new();
    for (name, g, preset, expected) in &cases {
        for n in [1, 4, 16] {
            let eig = eigensolve(&fem_system(g, preset, n)?, None)?;
            let got = kernel_dimension(&eig);
            if got != Ok(*expected) {
                failures.push(format!("{} on {name}, n={n}: {got:?} (expected {expected})", preset.name()));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{} cases x 3 meshes agree (krein: P3 5, star3 7, C4 8)", cases.len())
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

fn square_relation() -> Result<(bool, String), Error> {
    let g = equilateral(PresetKind::Star, 3)?;
    let bi = eigensolve(&fem_system(&g, &ConditionPreset::SlidingKirchhoff, 64)?, Some(5))?;
    let ck = eigensolve(&assemble_laplacian_ck(&g, &Mesh::uniform(3, 256)?)?, Some(5))?;
    let mut worst: f64 = 0.0;
    for j in 0..5 {
        let sq = ck.values[j] * ck.values[j];
        worst = worst.max((bi.values[j] - sq).abs() / sq.abs().max(1.0));
    }
    Ok((worst <= 1e-2, format!("worst relative deviation {worst:.2e} (tol 1e-2)")))
}

fn self_adjoint_roundtrip() -> Result<(bool, String), Error> {
    let graphs = [
        ("edge", unit_interval()?),
        ("P3", equilateral(PresetKind::Path, 3)?),
        ("star3", equilateral(PresetKind::Star, 3)?),
        ("C4", equilateral(PresetKind::Cycle, 4)?),
    ];
    let mut presets: Vec<ConditionPreset> = ConditionPreset::standard().to_vec();
    for outer in [OuterBoundary::Clamped, OuterBoundary::Hinged, OuterBoundary::Sliding] {
        presets.push(ConditionPreset::Kiik { alpha: 2.0, beta: 2.3, gamma: 1.9, outer });
    }
    let mut checked = 0;
    let mut failures = Vec::new();
    let (mut worst_herm, mut worst_angle): (f64, f64) = (0.0, 0.0);
    for (name, g) in &graphs {
        for preset in &presets {
            let cond = match preset_conditions(g, preset) {
                Ok(c) => c,
                Err(ConditionError::UnsupportedGraphForPreset { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            checked += 1;
            let cb = yr_to_cb(&cond);
            let herm = cb.hermiticity_defect();
            let back = cb_to_yr(&cb)?;
            let angle = trace_space_distance(&admissible_from_yr(&cond), &admissible_from_yr(&back));
            worst_herm = worst_herm.max(herm);
            worst_angle = worst_angle.max(angle);
            if cb.rank() != cb.trace_dim() || herm > 1e-9 || angle > 1e-9 {
                failures.push(format!("{} on {name}", preset.name()));
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "{checked} conditions, worst Hermiticity defect {worst_herm:.1e}, worst angle {worst_angle:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    ))
}

fn verdict_table() -> Result<(bool, String), Error> {
    let mut total = 0;
    let mut bad = 0;
    for n in 2..=6 {
        let (count, failures) = exhaustive_failures(n, |g| {
            let op = bilaplacian_closed_form(g);
            let data = SpectralData::euclidean(op.eigenvalues().clone(), op.eigenvectors().clone());
            matches!(classify(&data, 1e-9, 42), Ok(c) if c.verdict == Verdict::EventuallySubMarkovian)
        })?;
        total += count;
        bad += failures.len();
    }
    let star = equilateral(PresetKind::Star, 3)?;
    let p3 = equilateral(PresetKind::Path, 3)?;
    let c3 = equilateral(PresetKind::Cycle, 3)?;
    let c4 = equilateral(PresetKind::Cycle, 4)?;
    let cases: Vec<(&str, &MetricGraph, ConditionPreset, bool)> = vec![
        ("star3", &star, ConditionPreset::Friedrichs, true),
        ("P3", &p3, ConditionPreset::Friedrichs, true),
        ("star3", &star, ConditionPreset::SlidingKirchhoff, true),
        ("P3", &p3, ConditionPreset::SlidingKirchhoff, true),
        ("star3", &star, ConditionPreset::Krein, false),
        ("star3", &star, ConditionPreset::ContFree, false),
        ("C3", &c3, ConditionPreset::ContDeriv, true),
        ("C4", &c4, ConditionPreset::ContDeriv, false),
    ];
    let mut mismatches = Vec::new();
    let mut table = Vec::new();
    for (name, g, preset, irreducible) in cases {
        let sys = fem_system(g, &preset, 8)?;
        let eig = eigensolve(&sys, None)?;
        let c = classify(&spectral_data(&sys, &eig), 1e-9, 42)?;
        let ok = if irreducible {
            c.verdict.is_eventually_irreducible()
        } else {
            c.verdict == Verdict::None
        };
        table.push(format!("{}/{name}: {}", preset.name(), c.verdict.name()));
        if !ok {
            mismatches.push(format!("{}/{name}", preset.name()));
        }
    }
    Ok((
        bad == 0 && mismatches.is_empty(),
        format!("discrete: {total} graphs, {bad} mismatches; FEM: {}", table.join(", ")),
    ))
}

/// Root of `2 - 3 e^{-t} + e^{-9t}` on `(0.1, 2)`, where the last component
/// of the closed-form P3 solution from `(1, 0, 0)` changes sign.
fn p3_transition_oracle() -> f64 {
    let g = |t: f64| 2.0 - 3.0 * (-t).exp() + (-9.0 * t).exp();
    let (mut lo, mut hi) = (0.1, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smooth nonnegative bump of half-width `w` centred at `c`.
pub fn bump(c: f64, w: f64) -> impl Fn(usize, f64) -> f64 {
    move |_, x| {
        let s = (x - c) / w;
        if s.abs() < 1.0 {
            (1.0 - s * s).powi(2)
        } else {
            0.0
        }
    }
}

fn transition_times() -> Result<(bool, String), Error> {
    let oracle = p3_transition_oracle();
    let r = discrete_transition_time(&preset_graph(PresetKind::Path, 3)?, &[1.0, 0.0, 0.0], 1e-12)?;
    let discrete_ok = (r.t_star - 0.39).abs() <= 0.01 && (r.t_star - oracle).abs() <= 1e-3 * oracle;

    let sys = fem_system(&unit_interval()?, &ConditionPreset::Friedrichs, 64)?;
    let eig = eigensolve(&sys, None)?;
    let f0 = bump(0.2, 0.05);
    let ev = FemEvolver::new(&sys, &eig, &f0);
    let fr = last_sign_change(&ev, 1e-10, &TransitionOptions::default())?;
    let dip = fr.most_negative.filter(|&(t, m)| t < fr.t_star && m < 0.0);
    let horizon = fr.t_star + 10.0 / eig.spectral_gap();
    let fem_ok = fr.t_star > 0.0 && dip.is_some() && fr.certified_until >= horizon * (1.0 - 1e-12);
    Ok((
        discrete_ok && fem_ok,
        format!(
            "P3: t* = {:.5} (oracle {oracle:.5}); bump: t* = {:.3e}, most negative {:?}, nonnegative until {:.3e}",
            r.t_star, fr.t_star, dip, fr.certified_until
        ),
    ))
}

fn ultracontractivity_slope() -> Result<(bool, String), Error> {
    let sys = fem_system(&unit_interval()?, &ConditionPreset::Friedrichs, 128)?;
    let eig = eigensolve(&sys, None)?;
    let samples = geometric_grid(1e-4, 1e-2, 21)
        .into_iter()
        .map(|t| kernel_sup_bound(&sys, &eig, t).map(|k| (t, k)))
        .collect::<Result<Vec<_>, _>>()?;
    let slope = loglog_slope(&samples);
    Ok((
        (-0.33..=-0.17).contains(&slope),
        format!("slope {slope:.4} on [1e-4, 1e-2] (window [-0.33, -0.17])"),
    ))
}

fn identity_battery() -> Result<(bool, String), Error> {
    let mut worst: f64 = 0.0;
    for u in positive_cosine_battery(20, 1.0, 42) {
        worst = worst.max(dissipativity_identity_probe(&[u], 64)?.residual);
    }
    Ok((worst <= 1e-6, format!("20 strictly positive profiles, worst residual {worst:.2e} (tol 1e-6)")))
}

/// The identity probe on `cos(pi x)`, which changes sign at `x = 1/2`.
pub fn identity_crossing_note() -> Result<String, Error> {
    let u = Profile::Cosine { length: 1.0, c0: 0.0, coeffs: vec![1.0] };
    let r = dissipativity_identity_probe(&[u], 64)?;
    Ok(format!(
        "cos(pi x): a(u,|u|u) = {:.6}, 2 int |u| u''^2 = {:.6}, residual {:.3e}; crossing term {:.6}, corrected residual {:.1e}",
        r.lhs, r.rhs, r.residual, r.crossing_term, r.corrected_residual
    ))
}

/// Transition times of `exp(-t L^2)` from the indicator of an end vertex of
/// the path `P_n`, for `n = 3..=max_n`. Data only.
pub fn transition_growth(max_n: usize) -> Result<Vec<(usize, f64)>, Error> {
    (3..=max_n)
        .map(|n| {
            let g = preset_graph(PresetKind::Path, n)?;
            let mut f0 = vec![0.0; n];
            f0[0] = 1.0;
            Ok((n, discrete_transition_time(&g, &f0, 1e-12)?.t_star))
        })
        .collect()
}
