//! The discrete Laplacian `L = I I^T` of a graph, its square, and the
//! semigroup `exp(-t L^2)` together with the positivity and contractivity
//! checks that go with it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{incidence_matrix, Graph};
use crate::linalg::{max_abs, sym_eigen_sorted};
use crate::qualitative::{last_sign_change, TransitionOptions, TransitionReport};

/// Entries above this (negated) threshold count as nonnegative.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscreteError {
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("exponent p must exceed 1, got {0}")]
    InvalidExponent(f64),
    #[error("time grid is empty")]
    EmptyGrid,
    #[error("vector has length {got}, graph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("initial datum must be nonnegative and nonzero")]
    NotApplicable,
    #[error(transparent)]
    Transition(#[from] crate::qualitative::AnalysisError),
}

/// Dense real symmetric matrix with its spectral decomposition.
#[derive(Debug, Clone)]
pub struct SymmetricOperator {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SymmetricOperator {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let (eigenvalues, eigenvectors) = sym_eigen_sorted(&matrix);
        SymmetricOperator {
            matrix,
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn from_integer(matrix: &DMatrix<i64>) -> Self {
        Self::new(matrix.map(|v| v as f64))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal, column `j` belongs to eigenvalue `j`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn symmetry_defect(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.transpose()))
    }

    pub fn reconstruction_error(&self) -> f64 {
        let q = &self.eigenvectors;
        let rebuilt = q * DMatrix::from_diagonal(&self.eigenvalues) * q.transpose();
        max_abs(&(rebuilt - &self.matrix))
    }

    /// `Q f(Lambda) Q^T`.
    pub fn spectral_function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(lambda));
        }
        scaled * q.transpose()
    }

    /// Scale of the spectrum, used as the noise reference for cluster detection.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn laplacian_int(graph: &Graph) -> DMatrix<i64> {
    let inc = incidence_matrix(graph);
    &inc * inc.transpose()
}

pub fn laplacian(graph: &Graph) -> SymmetricOperator {
    SymmetricOperator::from_integer(&laplacian_int(graph))
}

/// `L^2` from the combinatorial entry rule: `deg(v)^2 + deg(v)` on the
/// diagonal, `|N_v ∩ N_w| - deg(v) - deg(w)` for neighbours and
/// `|N_v ∩ N_w|` for non-adjacent pairs.
pub fn bilaplacian_closed_form_int(graph: &Graph) -> DMatrix<i64> {
    let n = graph.vertex_count();
    let deg = graph.degrees();
    let adj = graph.adjacency();
    let mut out = DMatrix::zeros(n, n);
    for v in 0..n {
        for w in 0..n {
            let entry = if v == w {
                deg[v] * deg[v] + deg[v]
            } else {
                let common = (0..n).filter(|&z| adj[v][z] && adj[w][z]).count();
                if adj[v][w] {
                    out[(v, w)] = common as i64 - deg[v] as i64 - deg[w] as i64;
                    continue;
                }
                common
            };
            out[(v, w)] = entry as i64;
        }
    }
    out
}

pub fn bilaplacian_closed_form(graph: &Graph) -> SymmetricOperator {
    SymmetricOperator::from_integer(&bilaplacian_closed_form_int(graph))
}

/// `exp(-t op)` through the spectral decomposition.
pub fn discrete_semigroup(op: &SymmetricOperator, t: f64) -> Result<DMatrix<f64>, DiscreteError> {
    if t < 0.0 || t.is_nan() {
        return Err(DiscreteError::NegativeTime(t));
    }
    Ok(op.spectral_function(|lambda| (-t * lambda).exp()))
}

/// Row `v` passes iff `-m_vv + sum_{z != v} |m_vz| <= 0`.
pub fn linf_generator_row_condition(m: &DMatrix<f64>) -> Vec<bool> {
    (0..m.nrows())
        .map(|v| {
            let off: f64 = (0..m.ncols()).filter(|&z| z != v).map(|z| m[(v, z)].abs()).sum();
            -m[(v, v)] + off <= 1e-12 * m[(v, v)].abs().max(1.0)
        })
        .collect()
}

pub fn min_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest absolute row sum, i.e. the `l^inf -> l^inf` operator norm.
pub fn row_sup_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeSample {
    pub t: f64,
    pub min_entry: f64,
    pub row_sup_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovReport {
    pub is_complete: bool,
    pub positive_all_t: bool,
    pub linf_contractive: bool,
    pub rows_passing: Vec<bool>,
    /// Set when the three flags disagree with each other.
    pub disagreement: bool,
    pub samples: Vec<TimeSample>,
}

/// Compares completeness with positivity and `l^inf`-contractivity of
/// `exp(-t L^2)` sampled on `t_grid`.
pub fn markov_character(graph: &Graph, t_grid: &[f64]) -> Result<MarkovReport, DiscreteError> {
    if t_grid.is_empty() {
        return Err(DiscreteError::EmptyGrid);
    }
    let op = bilaplacian_closed_form(graph);
    let rows_passing = linf_generator_row_condition(op.matrix());
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let s = discrete_semigroup(&op, t)?;
        samples.push(TimeSample {
            t,
            min_entry: min_entry(&s),
            row_sup_norm: row_sup_norm(&s),
        });
    }
    let is_complete = graph.is_complete();
    let positive_all_t = samples.iter().all(|s| s.min_entry >= -POSITIVITY_TOL);
    let linf_contractive = rows_passing.iter().all(|&r| r)
        && samples.iter().all(|s| s.row_sup_norm <= 1.0 + POSITIVITY_TOL);
    let disagreement = !(is_complete == positive_all_t && is_complete == linf_contractive);
    Ok(MarkovReport {
        is_complete,
        positive_all_t,
        linf_contractive,
        rows_passing,
        disagreement,
        samples,
    })
}

/// Geometric grid of `n` points from `a` to `b` inclusive.
pub fn geometric_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let ratio = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| a * (ratio * i as f64).exp()).collect()
}

/// `|x|^{p-2} x`, extended by 0 at `x = 0`.
pub fn duality_map(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p - 2.0) * x
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipativityReport {
    pub p: f64,
    pub f: Vec<f64>,
    pub kappa: f64,
    /// `kappa >= 0`: no obstruction to `l^p`-dissipativity from this `f`.
    pub nonnegative: bool,
}

fn kappa_with(lap: &DMatrix<f64>, f: &DVector<f64>, p: f64) -> f64 {
    let g = f.map(|x| duality_map(x, p));
    (lap * f).dot(&(lap * g))
}

/// `kappa_f(p) = (L f, L |f|^{p-2} f)`.
pub fn kappa(graph: &Graph, f: &[f64], p: f64) -> Result<DissipativityReport, DiscreteError> {
    if !(p > 1.0) {
        return Err(DiscreteError::InvalidExponent(p));
    }
    if f.len() != graph.vertex_count() {
        return Err(DiscreteError::LengthMismatch {
            expected: graph.vertex_count(),
            got: f.len(),
        });
    }
    let lap = laplacian(graph).matrix().clone();
    let k = kappa_with(&lap, &DVector::from_column_slice(f), p);
    Ok(DissipativityReport {
        p,
        f: f.to_vec(),
        kappa: k,
        nonnegative: k >= 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanOutcome {
    /// First grid exponent with a witness; `None` means no counterexample
    /// was found, which is not a proof of contractivity.
    pub witness: Option<DissipativityReport>,
    pub exponents_tried: Vec<f64>,
}

/// Searches for `f` on the unit sphere with `kappa_f(p) < 0`, walking the
/// ascending `p_grid` and stopping at the first exponent with a witness.
///
/// Each trial draws a random start and refines it by a shrinking random
/// walk that only accepts decreases of `kappa`. Deterministic for a seed.
pub fn lp_dissipativity_scan(graph: &Graph, p_grid: &[f64], trials: usize, seed: u64) -> ScanOutcome {
    let lap = laplacian(graph).matrix().clone();
    let n = graph.vertex_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = Vec::new();
    let unit = |v: DVector<f64>| {
        let norm = v.norm();
        if norm > 0.0 {
            v / norm
        } else {
            v
        }
    };
    for &p in p_grid {
        tried.push(p);
        for _ in 0..trials.max(1) {
            let start = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let mut f = unit(start);
            let mut best = kappa_with(&lap, &f, p);
            let mut step = 0.5;
            for _ in 0..300 {
                if best < 0.0 {
                    break;
                }
                let probe = unit(&f + DVector::from_fn(n, |_, _| rng.gen_range(-step..step)));
                let value = kappa_with(&lap, &probe, p);
                if value < best {
                    best = value;
                    f = probe;
                } else {
                    step *= 0.98;
                }
            }
            if best < 0.0 {
                return ScanOutcome {
                    witness: Some(DissipativityReport {
                        p,
                        f: f.iter().cloned().collect(),
                        kappa: best,
                        nonnegative: false,
                    }),
                    exponents_tried: tried,
                };
            }
        }
    }
    ScanOutcome {
        witness: None,
        exponents_tried: tried,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    pub lambda2: f64,
    pub lower: f64,
    pub upper: f64,
    pub within: bool,
    /// Largest deviation between the spectrum of `L^2` and the squared spectrum of `L`.
    pub spectral_mapping_error: f64,
}

pub fn spectral_gap_bounds_check(graph: &Graph) -> GapReport {
    let v = graph.vertex_count() as f64;
    let lap = laplacian(graph);
    let bilap = bilaplacian_closed_form(graph);
    let mut squared: Vec<f64> = lap.eigenvalues().iter().map(|l| l * l).collect();
    squared.sort_by(f64::total_cmp);
    let spectral_mapping_error = squared
        .iter()
        .zip(bilap.eigenvalues().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let lambda2 = if bilap.dim() > 1 { bilap.eigenvalues()[1] } else { 0.0 };
    let lower = 4.0 * (1.0 - (std::f64::consts::PI / v).cos()).powi(2);
    let upper = v * v;
    GapReport {
        lambda2,
        lower,
        upper,
        within: lower - 1e-9 <= lambda2 && lambda2 <= upper + 1e-9,
        spectral_mapping_error,
    }
}

/// Solution `exp(-t L^2) f0` of the discrete fourth-order heat equation.
pub struct DiscreteEvolver {
    op: SymmetricOperator,
    coefficients: DVector<f64>,
}

impl DiscreteEvolver {
    pub fn new(graph: &Graph, f0: &[f64]) -> Result<Self, DiscreteError> {
        if f0.len() != graph.vertex_count() {
            return Err(DiscreteError::LengthMismatch {
                expected: graph.vertex_count(),
                got: f0.len(),
            });
        }
        let op = bilaplacian_closed_form(graph);
        let coefficients = op.eigenvectors().transpose() * DVector::from_column_slice(f0);
        Ok(DiscreteEvolver { op, coefficients })
    }

    pub fn state(&self, t: f64) -> DVector<f64> {
        let decayed = DVector::from_iterator(
            self.coefficients.len(),
            self.coefficients
                .iter()
                .zip(self.op.eigenvalues().iter())
                .map(|(c, l)| c * (-t * l).exp()),
        );
        self.op.eigenvectors() * decayed
    }

    pub fn spectral_gap(&self) -> f64 {
        if self.op.dim() > 1 {
            self.op.eigenvalues()[1]
        } else {
            0.0
        }
    }
}

impl crate::qualitative::Evolver for DiscreteEvolver {
    fn min_value(&self, t: f64) -> f64 {
        self.state(t).min()
    }

    fn decay_rate(&self) -> f64 {
        self.spectral_gap()
    }
}

/// Time after which `exp(-t L^2) f0` stays entrywise `>= -tol`.
pub fn discrete_transition_time(
    graph: &Graph,
    f0: &[f64],
    tol: f64,
) -> Result<TransitionReport, DiscreteError> {
    if f0.iter().any(|&x| x < 0.0) || f0.iter().all(|&x| x == 0.0) {
        return Err(DiscreteError::NotApplicable);
    }
    let evolver = DiscreteEvolver::new(graph, f0)?;
    Ok(last_sign_change(&evolver, tol, &TransitionOptions::default())?)
}

/// Runs `check` on every connected graph with `n` vertices in parallel and
/// returns the graphs for which it fails.
pub fn exhaustive_failures<F>(n: usize, check: F) -> Result<(usize, Vec<Graph>), crate::graph::GraphError>
where
    F: Fn(&Graph) -> bool + Sync,
{
    let graphs: Vec<Graph> = crate::graph::enumerate_connected_graphs(n)?.collect();
    let failures: Vec<Graph> = graphs.par_iter().filter(|g| !check(g)).cloned().collect();
    Ok((graphs.len(), failures))
}
