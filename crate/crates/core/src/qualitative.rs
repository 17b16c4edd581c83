//! Eventual positivity diagnostics on spectral data: classification of the
//! semigroup, transition times, decay rates and an energy identity probe.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::gauss_on;

/// Ground-state positivity threshold relative to the sup norm.
pub const SIGN_TOL: f64 = 1e-6;
/// Relative variation below which a ground state counts as constant.
pub const CONSTANT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need more than {cluster} modes, got {available}")]
    InsufficientModes { cluster: usize, available: usize },
    #[error("no clear gap above the lowest cluster ({below:.3e} vs {above:.3e})")]
    AmbiguousGap { below: f64, above: f64 },
    #[error("ground state sign is ambiguous at row {row} (ratio {ratio:.3e})")]
    AmbiguousSign { row: usize, ratio: f64 },
    #[error("solution still negative ({min_value:.3e}) at the horizon t = {horizon}")]
    NeverPositiveWithinHorizon { horizon: f64, min_value: f64 },
    #[error("trajectory decays by a factor of {ratio:.3}, need at least 10")]
    InsufficientDecay { ratio: f64 },
    #[error("u' = {derivative:.3e} at endpoint x = {x} of edge {edge}")]
    BoundaryConditionViolated { edge: usize, x: f64, derivative: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Eigenpairs of a self-adjoint generator `A` (the semigroup is `exp(-tA)`),
/// with eigenvectors orthonormal in the inner product given by `mass`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: DVector<f64>,
    /// One column per eigenvalue.
    pub modes: DMatrix<f64>,
    /// `None` means the Euclidean inner product.
    pub mass: Option<DMatrix<f64>>,
    /// Rows of `modes` that are point values of a function.
    pub value_rows: Vec<usize>,
    /// Absolute accuracy of the eigenvalues.
    pub noise: f64,
}

impl SpectralData {
    pub fn euclidean(eigenvalues: DVector<f64>, modes: DMatrix<f64>) -> Self {
        let value_rows = (0..modes.nrows()).collect();
        let noise = 64.0 * f64::EPSILON * eigenvalues.amax().max(f64::MIN_POSITIVE);
        SpectralData {
            eigenvalues,
            modes,
            mass: None,
            value_rows,
            noise,
        }
    }

    /// The same data for `c A`.
    pub fn scaled(&self, c: f64) -> Self {
        SpectralData {
            eigenvalues: &self.eigenvalues * c,
            noise: self.noise * c,
            ..self.clone()
        }
    }

    /// Size of the cluster containing the lowest eigenvalue.
    pub fn lowest_cluster(&self) -> Result<usize, AnalysisError> {
        let n = self.eigenvalues.len();
        if n == 0 {
            return Err(AnalysisError::InsufficientModes { cluster: 0, available: 0 });
        }
        let l0 = self.eigenvalues[0];
        let width = (10.0 * self.noise).max(1e-9 * l0.abs());
        let size = self.eigenvalues.iter().take_while(|&&l| l - l0 <= width).count();
        if size >= n {
            return Err(AnalysisError::InsufficientModes { cluster: size, available: n });
        }
        let spread = self.eigenvalues.iter().take(size).fold(0.0_f64, |a, &l| a.max(l - l0));
        let gap = self.eigenvalues[size] - l0;
        if gap < 1e3 * spread.max(self.noise) {
            return Err(AnalysisError::AmbiguousGap {
                below: spread.max(self.noise),
                above: gap,
            });
        }
        Ok(size)
    }

    fn apply_mass(&self, f: &DVector<f64>) -> DVector<f64> {
        match &self.mass {
            Some(m) => m * f,
            None => f.clone(),
        }
    }

    /// Spectral projector onto the first `size` modes applied to `f`.
    pub fn project(&self, size: usize, f: &DVector<f64>) -> DVector<f64> {
        let basis = self.modes.columns(0, size);
        let mf = self.apply_mass(f);
        basis * (basis.transpose() * mf)
    }

    /// Rows whose value vanishes in every mode (forced to zero by the
    /// vertex conditions).
    fn structural_zeros(&self) -> Vec<bool> {
        let scale = self.modes.amax().max(f64::MIN_POSITIVE);
        self.value_rows
            .iter()
            .map(|&r| self.modes.row(r).amax() <= 1e-12 * scale)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Eventually irreducible with a constant ground state.
    EventuallySubMarkovian,
    EventuallyIrreducible,
    IndividuallyAsymptoticallyPositive,
    None,
}

impl Verdict {
    pub fn is_eventually_irreducible(self) -> bool {
        matches!(self, Verdict::EventuallySubMarkovian | Verdict::EventuallyIrreducible)
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::EventuallySubMarkovian => "eventually_sub_markovian",
            Verdict::EventuallyIrreducible => "eventually_irreducible",
            Verdict::IndividuallyAsymptoticallyPositive => "individually_asymptotically_positive",
            Verdict::None => "none",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub lowest_eigenvalue: f64,
    pub lowest_multiplicity: usize,
    /// `min / max` of the sign-normalised ground state when the lowest
    /// eigenvalue is simple.
    pub ground_min_ratio: Option<f64>,
    pub ground_relative_variation: Option<f64>,
    /// Smallest entry of `P f / |f|_inf` over the battery.
    pub projector_min: f64,
    pub battery_size: usize,
    /// Index in the battery of the first vector with a negative projection.
    pub witness: Option<usize>,
}

/// Nonnegative test vectors: indicators of every value row, the constant
/// vector and `random` seeded random nonnegative vectors.
fn battery(data: &SpectralData, random: usize, seed: u64) -> Vec<DVector<f64>> {
    let n = data.modes.nrows();
    let mut out = Vec::with_capacity(data.value_rows.len() + random + 1);
    for &r in &data.value_rows {
        let mut f = DVector::zeros(n);
        f[r] = 1.0;
        out.push(f);
    }
    let mut ones = DVector::zeros(n);
    for &r in &data.value_rows {
        ones[r] = 1.0;
    }
    out.push(ones);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let mut f = DVector::zeros(n);
        for &r in &data.value_rows {
            if rng.gen_bool(0.3) {
                f[r] = rng.gen::<f64>();
            }
        }
        out.push(f);
    }
    out
}

pub fn classify(data: &SpectralData, tol: f64, seed: u64) -> Result<Classification, AnalysisError> {
    let size = data.lowest_cluster()?;
    let zeros = data.structural_zeros();
    let mut ground_min_ratio = None;
    let mut ground_relative_variation = None;

    if size == 1 {
        let mut values: Vec<f64> = data
            .value_rows
            .iter()
            .zip(&zeros)
            .filter(|(_, &z)| !z)
            .map(|(&r, _)| data.modes[(r, 0)])
            .collect();
        let sum: f64 = values.iter().sum();
        if sum < 0.0 {
            values.iter_mut().for_each(|v| *v = -*v);
        }
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        let ratio = min / max;
        ground_min_ratio = Some(ratio);
        if ratio.abs() < SIGN_TOL {
            let row = values.iter().position(|&v| v == min).unwrap_or(0);
            return Err(AnalysisError::AmbiguousSign { row, ratio });
        }
        if ratio >= SIGN_TOL {
            let variation = (max - min) / max;
            ground_relative_variation = Some(variation);
            let verdict = if variation <= CONSTANT_TOL {
                Verdict::EventuallySubMarkovian
            } else {
                Verdict::EventuallyIrreducible
            };
            return Ok(Classification {
                verdict,
                lowest_eigenvalue: data.eigenvalues[0],
                lowest_multiplicity: 1,
                ground_min_ratio,
                ground_relative_variation,
                projector_min: ratio,
                battery_size: 0,
                witness: None,
            });
        }
    }

    let tests = battery(data, 64, seed);
    let results: Vec<f64> = tests
        .par_iter()
        .map(|f| {
            let pf = data.project(size, f);
            let scale = f.amax().max(f64::MIN_POSITIVE);
            data.value_rows
                .iter()
                .zip(&zeros)
                .filter(|(_, &z)| !z)
                .map(|(&r, _)| pf[r] / scale)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let projector_min = results.iter().cloned().fold(f64::INFINITY, f64::min);
    let witness = results.iter().position(|&m| m < -tol);
    let verdict = if witness.is_none() {
        Verdict::IndividuallyAsymptoticallyPositive
    } else {
        Verdict::None
    };
    Ok(Classification {
        verdict,
        lowest_eigenvalue: data.eigenvalues[0],
        lowest_multiplicity: size,
        ground_min_ratio,
        ground_relative_variation,
        projector_min,
        battery_size: tests.len(),
        witness,
    })
}

/// A solution `t -> u(t)` of a linear evolution whose sign is tracked.
pub trait Evolver {
    /// Minimum of the sampled values of `u(t)`.
    fn min_value(&self, t: f64) -> f64;
    /// Rate of convergence to the long-time limit (the spectral gap).
    fn decay_rate(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct TransitionOptions {
    /// First grid point, in units of `1 / decay_rate`.
    pub start: f64,
    /// Last grid point, in units of `1 / decay_rate`.
    pub end: f64,
    pub grid_points: usize,
    /// Relative tolerance of the bisection.
    pub rel_tol: f64,
    /// Certification horizon beyond `t*`, in units of `1 / decay_rate`.
    pub horizon: f64,
    pub certify_points: usize,
}

impl Default for TransitionOptions {
    fn default() -> Self {
        TransitionOptions {
            start: 1e-6,
            end: 40.0,
            grid_points: 400,
            rel_tol: 1e-9,
            horizon: 10.0,
            certify_points: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionReport {
    /// Time after which the sampled minimum stays `>= -tol`.
    pub t_star: f64,
    /// `(t, min value)` on the search grid.
    pub samples: Vec<(f64, f64)>,
    /// Largest time up to which nonnegativity was checked.
    pub certified_until: f64,
    /// Most negative sampled value before `t*`, if any.
    pub most_negative: Option<(f64, f64)>,
}

/// Last time at which the minimum of the evolution is below `-tol`.
///
/// The minimum is sampled at `t = 0` and on a geometric grid, the last
/// sign change is refined by bisection and nonnegativity is then checked on
/// a fine grid up to `t* + horizon / decay_rate`.
pub fn last_sign_change<E: Evolver + ?Sized>(
    evolver: &E,
    tol: f64,
    opts: &TransitionOptions,
) -> Result<TransitionReport, AnalysisError> {
    let rate = evolver.decay_rate();
    let rate = if rate > 0.0 && rate.is_finite() { rate } else { 1.0 };
    let mut times = vec![0.0];
    times.extend(crate::discrete::geometric_grid(
        opts.start / rate,
        opts.end / rate,
        opts.grid_points.max(2),
    ));
    let samples: Vec<(f64, f64)> = times.iter().map(|&t| (t, evolver.min_value(t))).collect();
    let (t_last, m_last) = *samples.last().expect("nonempty grid");
    if m_last < -tol {
        return Err(AnalysisError::NeverPositiveWithinHorizon {
            horizon: t_last,
            min_value: m_last,
        });
    }
    let most_negative = samples
        .iter()
        .filter(|(_, m)| *m < -tol)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .copied();

    let bisect = |mut lo: f64, mut hi: f64| {
        while hi - lo > opts.rel_tol * hi {
            let mid = 0.5 * (lo + hi);
            if evolver.min_value(mid) < -tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut t_star = match samples.iter().rposition(|(_, m)| *m < -tol) {
        None => 0.0,
        Some(i) => bisect(samples[i].0, samples[i + 1].0),
    };
    let step = opts.horizon / rate / opts.certify_points as f64;
    // A dip between grid points moves t* forward; give up after a few.
    for _ in 0..16 {
        let end = t_star + opts.horizon / rate;
        let dip = (1..=opts.certify_points)
            .map(|k| t_star + k as f64 * step)
            .find(|&t| evolver.min_value(t) < -tol);
        let Some(t_neg) = dip else {
            return Ok(TransitionReport {
                t_star,
                samples,
                certified_until: end,
                most_negative,
            });
        };
        let limit = t_last.max(end);
        let mut t_pos = t_neg + step;
        while evolver.min_value(t_pos) < -tol {
            t_pos += step;
            if t_pos > limit {
                return Err(AnalysisError::NeverPositiveWithinHorizon {
                    horizon: limit,
                    min_value: evolver.min_value(limit),
                });
            }
        }
        t_star = bisect(t_pos - step, t_pos);
    }
    Err(AnalysisError::NeverPositiveWithinHorizon {
        horizon: t_star,
        min_value: evolver.min_value(t_star),
    })
}

/// Least-squares decay rate `rho` of `(t, |u(t) - mean|)` samples, fitted as
/// `log d = c - rho t`.
pub fn convergence_rate_fit(trajectory: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    let pts: Vec<(f64, f64)> = trajectory.iter().filter(|(_, d)| *d > 0.0).copied().collect();
    if pts.len() < 2 {
        return Err(AnalysisError::InsufficientDecay { ratio: 1.0 });
    }
    let first = pts.first().unwrap().1;
    let last = pts.last().unwrap().1;
    let ratio = first / last;
    if ratio.is_nan() || ratio < 10.0 {
        return Err(AnalysisError::InsufficientDecay { ratio });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, d) in &pts {
        sxy += (t - mt) * (d.ln() - ml);
        sxx += (t - mt) * (t - mt);
    }
    Ok(-sxy / sxx)
}

/// Least-squares slope of `log y` against `log t`.
pub fn loglog_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = samples.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in samples {
        sxy += (t.ln() - mx) * (y.ln() - my);
        sxx += (t.ln() - mx) * (t.ln() - mx);
    }
    sxy / sxx
}

/// Smooth closed-form function on one edge `[0, length]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Profile {
    /// `c0 + sum_k a_k cos(k pi x / length)`, `k = 1, 2, ...`.
    Cosine { length: f64, c0: f64, coeffs: Vec<f64> },
    /// `sum_k c_k x^k`.
    Polynomial { length: f64, coeffs: Vec<f64> },
}

impl Profile {
    pub fn length(&self) -> f64 {
        match self {
            Profile::Cosine { length, .. } | Profile::Polynomial { length, .. } => *length,
        }
    }

    /// Derivative of order `d` (0 to 4) at `x`.
    pub fn eval(&self, x: f64, d: u32) -> f64 {
        match self {
            Profile::Cosine { length, c0, coeffs } => {
                let mut s = if d == 0 { *c0 } else { 0.0 };
                for (i, a) in coeffs.iter().enumerate() {
                    let w = (i + 1) as f64 * std::f64::consts::PI / length;
                    let phase = w * x;
                    // d-th derivative of cos(w x)
                    let v = match d % 4 {
                        0 => phase.cos(),
                        1 => -phase.sin(),
                        2 => -phase.cos(),
                        _ => phase.sin(),
                    };
                    s += a * w.powi(d as i32) * v;
                }
                s
            }
            Profile::Polynomial { coeffs, .. } => {
                let mut s = 0.0;
                for (k, c) in coeffs.iter().enumerate() {
                    let k = k as u32;
                    if k >= d {
                        let falling: f64 = (0..d).map(|j| (k - j) as f64).product();
                        s += c * falling * x.powi((k - d) as i32);
                    }
                }
                s
            }
        }
    }

    /// Sign changes of the function, located by bisection.
    pub fn zeros(&self) -> Vec<f64> {
        let len = self.length();
        let n = 4096;
        let mut out = Vec::new();
        let mut prev = self.eval(0.0, 0);
        for i in 1..=n {
            let x = len * i as f64 / n as f64;
            let cur = self.eval(x, 0);
            if prev != 0.0 && (prev < 0.0) != (cur < 0.0) && cur != 0.0 {
                let (mut lo, mut hi) = (len * (i - 1) as f64 / n as f64, x);
                let s_lo = prev < 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if (self.eval(mid, 0) < 0.0) == s_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * len {
                        break;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            if cur != 0.0 {
                prev = cur;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityProbe {
    /// `a(u, |u|u)` computed after integrating by parts to `u''''`.
    pub lhs: f64,
    /// `2 ∫ |u| (u'')^2`.
    pub rhs: f64,
    /// `-(4/3) sum |u'(z)|^3` over interior zeros `z` of `u`.
    pub crossing_term: f64,
    /// Sign changes of `u`, per edge.
    pub zeros: Vec<Vec<f64>>,
    /// `|lhs - rhs|`, relative to `max(|lhs|, |rhs|)` when that is positive.
    pub residual: f64,
    /// Same with the crossing term added to the right-hand side.
    pub corrected_residual: f64,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale > 0.0 {
        (a - b).abs() / scale
    } else {
        0.0
    }
}

/// Compares `a(u, |u|u) = ∫ u'' (|u|u)''` with `2 ∫ |u| (u'')^2` for `u`
/// given edgewise with `u' = 0` at every endpoint.
///
/// The left side is evaluated as `∫ u'''' |u|u - [u''' |u|u]` (the other
/// boundary term vanishes with `u'`). Quadrature uses `points` Gauss nodes on
/// each piece between sign changes of `u`.
pub fn dissipativity_identity_probe(edges: &[Profile], points: usize) -> Result<IdentityProbe, AnalysisError> {
    if edges.is_empty() || points == 0 {
        return Err(AnalysisError::InvalidInput("need at least one edge and one node".into()));
    }
    let (mut lhs, mut rhs, mut crossing) = (0.0, 0.0, 0.0);
    let mut zeros = Vec::with_capacity(edges.len());
    for (e, u) in edges.iter().enumerate() {
        let len = u.length();
        if len <= 0.0 {
            return Err(AnalysisError::InvalidInput(format!("edge {e} has length {len}")));
        }
        for x in [0.0, len] {
            let d = u.eval(x, 1);
            if d.abs() > 1e-10 {
                return Err(AnalysisError::BoundaryConditionViolated { edge: e, x, derivative: d });
            }
        }
        let z = u.zeros();
        let mut cuts = vec![0.0];
        cuts.extend(&z);
        cuts.push(len);
        for w in cuts.windows(2) {
            for (x, wt) in gauss_on(w[0], w[1], points) {
                let v = u.eval(x, 0);
                lhs += wt * u.eval(x, 4) * v.abs() * v;
                rhs += wt * 2.0 * v.abs() * u.eval(x, 2).powi(2);
            }
        }
        let w0 = u.eval(0.0, 0).abs() * u.eval(0.0, 0);
        let wl = u.eval(len, 0).abs() * u.eval(len, 0);
        lhs -= u.eval(len, 3) * wl - u.eval(0.0, 3) * w0;
        crossing -= 4.0 / 3.0 * z.iter().map(|&x| u.eval(x, 1).abs().powi(3)).sum::<f64>();
        zeros.push(z);
    }
    Ok(IdentityProbe {
        lhs,
        rhs,
        crossing_term: crossing,
        zeros,
        residual: relative_gap(lhs, rhs),
        corrected_residual: relative_gap(lhs, rhs + crossing),
    })
}

/// `count` strictly positive cosine series on `[0, length]` with up to five
/// modes.
pub fn positive_cosine_battery(count: usize, length: f64, seed: u64) -> Vec<Profile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let modes = rng.gen_range(1..=5);
            let coeffs: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c0 = coeffs.iter().map(|a: &f64| a.abs()).sum::<f64>() + rng.gen_range(0.1..1.0);
            Profile::Cosine { length, c0, coeffs }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{bilaplacian_closed_form, laplacian};
    use crate::graph::{preset_graph, PresetKind};
    use std::f64::consts::PI;

    fn discrete_data(kind: PresetKind, n: usize) -> SpectralData {
        let op = bilaplacian_closed_form(&preset_graph(kind, n).unwrap());
        SpectralData::euclidean(op.eigenvalues().clone(), op.eigenvectors().clone())
    }

    #[test]
    fn discrete_path_is_sub_markovian_and_scale_invariant() {
        let data = discrete_data(PresetKind::Path, 3);
        let c = classify(&data, 1e-9, 42).unwrap();
        assert_eq!(c.verdict, Verdict::EventuallySubMarkovian);
        assert_eq!(c.lowest_multiplicity, 1);
        for s in [1e-3, 7.0, 1e4] {
            assert_eq!(classify(&data.scaled(s), 1e-9, 42).unwrap().verdict, c.verdict);
        }
    }

    #[test]
    fn sign_changing_kernel_is_not_positive() {
        // Two-dimensional kernel spanned by 1 and a sign-changing ramp.
        let span = DMatrix::from_row_slice(4, 4, &[
            1.0, 3.0, 0.3, 0.1, //
            1.0, 1.0, -0.7, 0.4, //
            1.0, -1.0, 0.2, -0.9, //
            1.0, -3.0, 0.5, 0.6,
        ]);
        let e = span.qr().q();
        let data = SpectralData::euclidean(DVector::from_vec(vec![0.0, 0.0, 2.0, 3.0]), e);
        let c = classify(&data, 1e-9, 1).unwrap();
        assert_eq!(c.lowest_multiplicity, 2);
        assert_eq!(c.verdict, Verdict::None);
        assert!(c.witness.is_some() && c.projector_min < 0.0);
    }

    #[test]
    fn degenerate_positive_projection() {
        // Kernel spanned by two disjointly supported nonnegative vectors.
        let modes = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let data = SpectralData::euclidean(DVector::from_vec(vec![0.0, 0.0, 5.0]), modes);
        let c = classify(&data, 1e-9, 1).unwrap();
        assert_eq!(c.verdict, Verdict::IndividuallyAsymptoticallyPositive);
    }

    #[test]
    fn clusters_need_a_gap() {
        let modes = DMatrix::identity(3, 3);
        let close = SpectralData::euclidean(DVector::from_vec(vec![0.0, 1e-12, 1.0]), modes.clone());
        assert!(matches!(close.lowest_cluster(), Err(AnalysisError::AmbiguousGap { .. })));
        let all = SpectralData::euclidean(DVector::from_vec(vec![0.0, 0.0, 0.0]), modes);
        assert!(matches!(all.lowest_cluster(), Err(AnalysisError::InsufficientModes { .. })));
    }

    #[test]
    fn rate_fits() {
        let traj: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = 1.0 + 0.2 * i as f64;
            (t, 3.0 * (-t).exp() + 0.1 * (-9.0 * t).exp())
        }).collect();
        let rho = convergence_rate_fit(&traj).unwrap();
        assert!((rho - 1.0).abs() < 1e-3);
        let flat = vec![(0.0, 1.0), (1.0, 0.5)];
        assert!(matches!(convergence_rate_fit(&flat), Err(AnalysisError::InsufficientDecay { .. })));
    }

    #[test]
    fn discrete_rates_match_the_gap() {
        for (kind, n, gap) in [(PresetKind::Path, 3, 1.0), (PresetKind::Complete, 3, 9.0)] {
            let g = preset_graph(kind, n).unwrap();
            let ev = crate::discrete::DiscreteEvolver::new(&g, &[1.0, 0.3, 0.0]).unwrap();
            let mean = 1.3 / 3.0;
            let traj: Vec<(f64, f64)> = (0..40)
                .map(|i| {
                    let t = (1.0 + 0.25 * i as f64) / gap;
                    (t, ev.state(t).map(|v| v - mean).norm())
                })
                .collect();
            let rho = convergence_rate_fit(&traj).unwrap();
            assert!((rho - gap).abs() <= 0.05 * gap, "{rho}");
        }
        let _ = laplacian(&preset_graph(PresetKind::Path, 2).unwrap());
    }

    struct Shifted;

    impl Evolver for Shifted {
        fn min_value(&self, t: f64) -> f64 {
            // negative on (0, 1), on (2, 2.5), positive afterwards
            if t < 1.0 || (2.0..2.5).contains(&t) {
                -1.0
            } else {
                1.0
            }
        }

        fn decay_rate(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn transition_finds_the_last_crossing() {
        let r = last_sign_change(&Shifted, 1e-12, &TransitionOptions::default()).unwrap();
        assert!((r.t_star - 2.5).abs() < 1e-6, "{}", r.t_star);
        assert!(r.certified_until >= r.t_star + 10.0);
        assert!(r.most_negative.is_some());
    }

    struct Never;

    impl Evolver for Never {
        fn min_value(&self, _: f64) -> f64 {
            -1.0
        }

        fn decay_rate(&self) -> f64 {
            2.0
        }
    }

    #[test]
    fn never_positive_is_reported() {
        assert!(matches!(
            last_sign_change(&Never, 1e-12, &TransitionOptions::default()),
            Err(AnalysisError::NeverPositiveWithinHorizon { .. })
        ));
    }

    #[test]
    fn profile_derivatives() {
        let p = Profile::Polynomial { length: 1.0, coeffs: vec![1.0, 0.0, -3.0, 2.0] };
        assert_eq!(p.eval(0.5, 0), 1.0 - 0.75 + 0.25);
        assert_eq!(p.eval(1.0, 1), -6.0 + 6.0);
        assert_eq!(p.eval(0.0, 3), 12.0);
        assert_eq!(p.eval(0.3, 4), 0.0);
        let c = Profile::Cosine { length: 2.0, c0: 0.5, coeffs: vec![1.0] };
        let h = 1e-4;
        let fd = (c.eval(0.7 + h, 2) - c.eval(0.7 - h, 2)) / (2.0 * h);
        assert!((fd - c.eval(0.7, 3)).abs() < 1e-6);
        assert!((c.eval(0.3, 4) - (PI / 2.0).powi(4) * (PI * 0.15).cos()).abs() < 1e-12);
    }

    #[test]
    fn identity_holds_without_sign_changes() {
        let one = Profile::Cosine { length: 1.0, c0: 1.0, coeffs: vec![] };
        let r = dissipativity_identity_probe(&[one], 64).unwrap();
        assert_eq!((r.lhs, r.rhs, r.residual), (0.0, 0.0, 0.0));
        let shifted = Profile::Cosine { length: 1.0, c0: 2.0, coeffs: vec![1.0] };
        let r = dissipativity_identity_probe(&[shifted], 64).unwrap();
        assert!(r.residual <= 1e-10, "{}", r.residual);
        for u in positive_cosine_battery(20, 1.0, 42) {
            let r = dissipativity_identity_probe(&[u], 64).unwrap();
            assert!(r.residual <= 1e-6);
        }
    }

    #[test]
    fn sign_changes_add_a_crossing_term() {
        let u = Profile::Cosine { length: 1.0, c0: 0.0, coeffs: vec![1.0] };
        let r = dissipativity_identity_probe(&[u], 64).unwrap();
        assert_eq!(r.zeros[0].len(), 1);
        assert!((r.zeros[0][0] - 0.5).abs() < 1e-14);
        assert!((r.crossing_term + 4.0 / 3.0 * PI.powi(3)).abs() < 1e-9);
        assert!(r.residual > 0.1);
        assert!(r.corrected_residual <= 1e-10, "{}", r.corrected_residual);
    }

    #[test]
    fn boundary_derivative_is_checked() {
        let u = Profile::Polynomial { length: 1.0, coeffs: vec![0.0, 1.0] };
        assert!(matches!(
            dissipativity_identity_probe(&[u], 64),
            Err(AnalysisError::BoundaryConditionViolated { edge: 0, .. })
        ));
    }
}
