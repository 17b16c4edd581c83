//! Self-adjoint vertex conditions for fourth-order operators on metric graphs.
//!
//! Boundary data of a function on the edges are collected in two trace
//! vectors of length `4E` (see [`TraceConvention`]). A condition is either
//! the pair `(Y, R)`, meaning `u01 ∈ Y` and `u32 + R u01 ∈ Y^⊥`, or the pair
//! `(C, B)`, meaning `C u01 + B u32 = 0`. Both encodings are canonicalised into the
//! subspace of admissible `(u01, u32)` pairs, which is what equality checks
//! compare.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, MetricGraph};
use crate::linalg::{
    cmax_abs, column_space, largest_principal_angle_sin, null_space, numerical_rank,
    orthogonal_complement, to_complex, CMatrix,
};

/// Largest principal angle (as a sine) below which two trace spaces are equal.
pub const SPACE_EQUALITY_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionError {
    #[error("preset {preset} is not supported on this graph: {reason}")]
    UnsupportedGraphForPreset { preset: String, reason: String },
    #[error("angle {0} is degenerate (0 or pi)")]
    DegenerateAngle(f64),
    #[error("conditions are not self-adjoint: {0}")]
    NotSelfAdjoint(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("missing parameter '{0}'")]
    MissingParameter(String),
}

/// Index bookkeeping for the trace vectors.
///
/// `u01 = (u(0) | u(ℓ) | -u'(0) | u'(ℓ))` and
/// `u32 = (-u'''(0) | u'''(ℓ) | -u''(0) | -u''(ℓ))`, each block holding one
/// entry per edge in edge order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceConvention {
    pub edges: usize,
}

/// Which end of an oriented edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum End {
    Start,
    Finish,
}

/// Value and first three derivatives of an edge function at one end.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EndpointJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl TraceConvention {
    pub fn new(edges: usize) -> Self {
        TraceConvention { edges }
    }

    pub fn dim(&self) -> usize {
        4 * self.edges
    }

    /// Block offsets `0, E, 2E, 3E`.
    pub fn block_offsets(&self) -> [usize; 4] {
        let e = self.edges;
        [0, e, 2 * e, 3 * e]
    }

    /// Endpoint slot in `C^{2E}`: starts first, then finishes.
    pub fn slot(&self, edge: usize, end: End) -> usize {
        match end {
            End::Start => edge,
            End::Finish => self.edges + edge,
        }
    }

    /// Position of the value entry of `u01` for this endpoint.
    pub fn value_index(&self, edge: usize, end: End) -> usize {
        self.slot(edge, end)
    }

    /// Position of the first-derivative entry of `u01`; the stored quantity is
    /// the outward normal derivative.
    pub fn derivative_index(&self, edge: usize, end: End) -> usize {
        2 * self.edges + self.slot(edge, end)
    }

    /// Sign turning `u'` at this end into the stored `u01` entry.
    pub fn derivative_sign(&self, end: End) -> f64 {
        match end {
            End::Start => -1.0,
            End::Finish => 1.0,
        }
    }

    /// Assembles `(u01, u32)` from per-edge jets at both ends.
    pub fn traces(&self, jets: &[(EndpointJet, EndpointJet)]) -> (Vec<f64>, Vec<f64>) {
        let e = self.edges;
        assert_eq!(jets.len(), e, "one jet pair per edge");
        let mut u01 = vec![0.0; 4 * e];
        let mut u32 = vec![0.0; 4 * e];
        for (k, (a, b)) in jets.iter().enumerate() {
            u01[k] = a.value;
            u01[e + k] = b.value;
            u01[2 * e + k] = -a.d1;
            u01[3 * e + k] = b.d1;
            u32[k] = -a.d3;
            u32[e + k] = b.d3;
            u32[2 * e + k] = -a.d2;
            u32[3 * e + k] = -b.d2;
        }
        (u01, u32)
    }
}

/// Endpoint slots (in `C^{2E}`) meeting at each vertex, in edge order.
pub fn vertex_slots(graph: &Graph) -> Vec<Vec<usize>> {
    let conv = TraceConvention::new(graph.edge_count());
    let mut slots = vec![Vec::new(); graph.vertex_count()];
    for (e, &(s, t)) in graph.edges().iter().enumerate() {
        slots[s].push(conv.slot(e, End::Start));
        slots[t].push(conv.slot(e, End::Finish));
    }
    for list in &mut slots {
        list.sort_unstable();
    }
    slots
}

/// Orthonormal basis (2E x V) of the vertex-wise constant endpoint vectors.
pub fn cv_basis(metric: &MetricGraph) -> DMatrix<f64> {
    let graph = metric.graph();
    let slots = vertex_slots(graph);
    let mut basis = DMatrix::zeros(2 * graph.edge_count(), graph.vertex_count());
    for (v, list) in slots.iter().enumerate() {
        let w = 1.0 / (list.len() as f64).sqrt();
        for &s in list {
            basis[(s, v)] = w;
        }
    }
    basis
}

/// Local subspace of `C^{deg(v)}` for one vertex and one trace block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSpace {
    Zero,
    Full,
    Constants,
    ConstantsComplement,
    Span(Vec<f64>),
    Complement(Vec<f64>),
}

impl LocalSpace {
    fn basis(&self, deg: usize) -> CMatrix {
        let ones = || to_complex(&DMatrix::from_element(deg, 1, 1.0 / (deg as f64).sqrt()));
        let normalized = |v: &[f64]| {
            let m = DMatrix::from_column_slice(deg, 1, v);
            let n = m.norm();
            to_complex(&(m / n))
        };
        match self {
            LocalSpace::Zero => CMatrix::zeros(deg, 0),
            LocalSpace::Full => CMatrix::identity(deg, deg),
            LocalSpace::Constants => ones(),
            LocalSpace::ConstantsComplement => orthogonal_complement(&ones(), deg),
            LocalSpace::Span(v) => normalized(v),
            LocalSpace::Complement(v) => orthogonal_complement(&normalized(v), deg),
        }
    }
}

/// Conditions at one vertex: a subspace for the values and one for the
/// outward derivatives at the endpoint slots meeting there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRule {
    pub value: LocalSpace,
    pub derivative: LocalSpace,
}

impl VertexRule {
    pub fn new(value: LocalSpace, derivative: LocalSpace) -> Self {
        VertexRule { value, derivative }
    }
}

/// `u01 ∈ Y`, `u32 + R u01 ∈ Y^⊥`, with `Y` stored by an orthonormal basis
/// and `R` as a `k x k` matrix in that basis.
#[derive(Debug, Clone)]
pub struct ConditionYR {
    pub y_basis: CMatrix,
    pub r: CMatrix,
    pub name: String,
    /// One entry per vertex describing where its rows came from.
    pub provenance: Vec<String>,
}

/// `C u01 + B u32 = 0`.
#[derive(Debug, Clone)]
pub struct ConditionCB {
    pub c: CMatrix,
    pub b: CMatrix,
}

/// Orthonormal basis of `{(u01, u32)}` satisfying a condition, as columns of
/// an `8E x d` matrix (`d = 4E` for self-adjoint conditions).
#[derive(Debug, Clone)]
pub struct AdmissibleTraceSpace {
    pub basis: CMatrix,
}

impl AdmissibleTraceSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

impl ConditionYR {
    pub fn new(y_basis: CMatrix, r: CMatrix, name: impl Into<String>) -> Result<Self, ConditionError> {
        let k = y_basis.ncols();
        if r.nrows() != k || r.ncols() != k {
            return Err(ConditionError::DimensionMismatch(format!(
                "R is {}x{} but Y has dimension {k}",
                r.nrows(),
                r.ncols()
            )));
        }
        if !y_basis.nrows().is_multiple_of(4) {
            return Err(ConditionError::DimensionMismatch(format!(
                "trace dimension {} is not a multiple of 4",
                y_basis.nrows()
            )));
        }
        let gram = y_basis.adjoint() * &y_basis;
        if cmax_abs(&(gram - CMatrix::identity(k, k))) > 1e-10 {
            return Err(ConditionError::DimensionMismatch(
                "Y basis is not orthonormal".into(),
            ));
        }
        Ok(ConditionYR {
            y_basis,
            r,
            name: name.into(),
            provenance: Vec::new(),
        })
    }

    /// Orthonormalises an arbitrary spanning set first; `r` must then be
    /// given as a `4E x 4E` operator and is compressed onto the new basis.
    pub fn from_spanning_set(span: &CMatrix, r_full: &CMatrix, name: impl Into<String>) -> Result<Self, ConditionError> {
        let y = column_space(span, RANK_TOL);
        if r_full.nrows() != span.nrows() || r_full.ncols() != span.nrows() {
            return Err(ConditionError::DimensionMismatch("R must be 4E x 4E".into()));
        }
        let r = y.adjoint() * r_full * &y;
        Self::new(y, r, name)
    }

    pub fn trace_dim(&self) -> usize {
        self.y_basis.nrows()
    }

    pub fn edges(&self) -> usize {
        self.trace_dim() / 4
    }

    pub fn dim_y(&self) -> usize {
        self.y_basis.ncols()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        cmax_abs(&(&self.r - self.r.adjoint()))
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.hermiticity_defect() <= 1e-12 * cmax_abs(&self.r).max(1.0)
    }

    /// `Re (R x, x) <= 0` for all `x ∈ Y`.
    pub fn is_dissipative(&self) -> bool {
        let herm = (&self.r + self.r.adjoint()) * Complex64::new(0.5, 0.0);
        if herm.nrows() == 0 {
            return true;
        }
        let scale = cmax_abs(&herm).max(1.0);
        herm.symmetric_eigenvalues().iter().all(|&v| v <= 1e-12 * scale)
    }

    /// The orthogonal projector onto `Y`.
    pub fn projector(&self) -> CMatrix {
        &self.y_basis * self.y_basis.adjoint()
    }

    /// `R` extended by zero to a `4E x 4E` operator.
    pub fn r_extended(&self) -> CMatrix {
        &self.y_basis * &self.r * self.y_basis.adjoint()
    }

    /// Real basis of `Y` and `R` in that basis, when both are real.
    ///
    /// A basis computed from complex data may carry arbitrary phases; this
    /// recovers a real one from the projector when the subspace itself is real.
    pub fn real_form(&self) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let p = self.projector();
        let r_ext = self.r_extended();
        let imag = p.iter().chain(r_ext.iter()).fold(0.0, |a: f64, v| a.max(v.im.abs()));
        if imag > 1e-10 {
            return None;
        }
        let n = self.trace_dim();
        let k = self.dim_y();
        let p_re = p.map(|v| v.re);
        let p_sym = (&p_re + p_re.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(p_sym);
        let mut keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        keep.sort_unstable();
        if keep.len() != k {
            return None;
        }
        let mut y = DMatrix::zeros(n, k);
        for (dst, &src) in keep.iter().enumerate() {
            y.set_column(dst, &eig.eigenvectors.column(src));
        }
        let r = y.transpose() * r_ext.map(|v| v.re) * &y;
        Some((y, r))
    }

    /// Builds `Y` from per-vertex rules; `r_full` (4E x 4E) is compressed onto `Y`.
    pub fn from_vertex_rules(
        graph: &Graph,
        rules: &[VertexRule],
        r_full: Option<&CMatrix>,
        name: impl Into<String>,
    ) -> Result<Self, ConditionError> {
        if rules.len() != graph.vertex_count() {
            return Err(ConditionError::DimensionMismatch(format!(
                "{} vertex rules for {} vertices",
                rules.len(),
                graph.vertex_count()
            )));
        }
        let e = graph.edge_count();
        let slots = vertex_slots(graph);
        let mut value_cols: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        let mut deriv_cols: Vec<nalgebra::DVector<Complex64>> = Vec::new();
        let mut provenance = Vec::with_capacity(rules.len());
        for (v, rule) in rules.iter().enumerate() {
            let local = &slots[v];
            let deg = local.len();
            for (space, offset, sink) in [
                (&rule.value, 0, &mut value_cols),
                (&rule.derivative, 2 * e, &mut deriv_cols),
            ] {
                let basis = space.basis(deg);
                for j in 0..basis.ncols() {
                    let mut col = nalgebra::DVector::zeros(4 * e);
                    for (i, &s) in local.iter().enumerate() {
                        col[offset + s] = basis[(i, j)];
                    }
                    sink.push(col);
                }
            }
            provenance.push(format!("vertex {v}: value {:?}, derivative {:?}", rule.value, rule.derivative));
        }
        let cols: Vec<_> = value_cols.into_iter().chain(deriv_cols).collect();
        let y = if cols.is_empty() {
            CMatrix::zeros(4 * e, 0)
        } else {
            CMatrix::from_columns(&cols)
        };
        let r = match r_full {
            Some(full) => y.adjoint() * full * &y,
            None => CMatrix::zeros(y.ncols(), y.ncols()),
        };
        let mut cond = Self::new(y, r, name)?;
        cond.provenance = provenance;
        Ok(cond)
    }
}

impl ConditionCB {
    pub fn trace_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn rank(&self) -> usize {
        let n = self.trace_dim();
        let mut joined = CMatrix::zeros(n, 2 * n);
        joined.view_mut((0, 0), (n, n)).copy_from(&self.c);
        joined.view_mut((0, n), (n, n)).copy_from(&self.b);
        numerical_rank(&joined, RANK_TOL)
    }

    /// `max |C B^* - (C B^*)^*|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let h = &self.c * self.b.adjoint();
        cmax_abs(&(&h - h.adjoint()))
    }

    fn hermiticity_scale(&self) -> f64 {
        (cmax_abs(&self.c) * cmax_abs(&self.b)).max(1.0)
    }

    /// Rank and Hermiticity requirements for self-adjointness.
    pub fn check_self_adjoint(&self, herm_tol: f64) -> Result<(), ConditionError> {
        let n = self.trace_dim();
        if self.c.ncols() != n || self.b.nrows() != n || self.b.ncols() != n || !n.is_multiple_of(4) {
            return Err(ConditionError::DimensionMismatch(format!(
                "C is {}x{}, B is {}x{}",
                self.c.nrows(),
                self.c.ncols(),
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        let rank = self.rank();
        if rank != n {
            return Err(ConditionError::NotSelfAdjoint(format!(
                "rank([C B]) = {rank}, expected {n}"
            )));
        }
        let defect = self.hermiticity_defect();
        if defect > herm_tol * self.hermiticity_scale() {
            return Err(ConditionError::NotSelfAdjoint(format!(
                "CB* not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(())
    }
}

/// Boundary behaviour imposed at the leaves of a star-shaped junction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBoundary {
    /// `u = 0`, `u' = 0`.
    Clamped,
    /// `u = 0`, derivative free (natural `u'' = 0`).
    Hinged,
    /// `u' = 0`, value free.
    Sliding,
}

impl OuterBoundary {
    fn rule(self) -> VertexRule {
        match self {
            OuterBoundary::Clamped => VertexRule::new(LocalSpace::Zero, LocalSpace::Zero),
            OuterBoundary::Hinged => VertexRule::new(LocalSpace::Zero, LocalSpace::Full),
            OuterBoundary::Sliding => VertexRule::new(LocalSpace::Full, LocalSpace::Zero),
        }
    }
}

impl std::str::FromStr for OuterBoundary {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clamped" => Ok(OuterBoundary::Clamped),
            "hinged" => Ok(OuterBoundary::Hinged),
            "sliding" => Ok(OuterBoundary::Sliding),
            other => Err(ConditionError::UnknownPreset(other.to_string())),
        }
    }
}

/// Named vertex conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ConditionPreset {
    /// Continuity of values, Kirchhoff on first derivatives: `Y = c_V x c_V^⊥`.
    SlidingKirchhoff,
    /// Continuity of values and of normal derivatives: `Y = c_V x c_V`.
    ContDeriv,
    /// Continuity of values only: `Y = c_V x C^{2E}`.
    ContFree,
    /// Continuity, vanishing normal derivatives: `Y = c_V x {0}`.
    Friedrichs,
    /// `Y = c_V x C^{2E}` with the non-local `R = Λ`.
    Krein,
    /// Angle-weighted junction on a three-edge star.
    Kiik {
        alpha: f64,
        beta: f64,
        gamma: f64,
        outer: OuterBoundary,
    },
}

impl ConditionPreset {
    pub fn name(&self) -> &'static str {
        match self {
            ConditionPreset::SlidingKirchhoff => "sliding_kirchhoff",
            ConditionPreset::ContDeriv => "cont_deriv",
            ConditionPreset::ContFree => "cont_free",
            ConditionPreset::Friedrichs => "friedrichs",
            ConditionPreset::Krein => "krein",
            ConditionPreset::Kiik { .. } => "kiik",
        }
    }

    /// All parameter-free presets.
    pub fn standard() -> [ConditionPreset; 5] {
        [
            ConditionPreset::SlidingKirchhoff,
            ConditionPreset::ContDeriv,
            ConditionPreset::ContFree,
            ConditionPreset::Friedrichs,
            ConditionPreset::Krein,
        ]
    }

    pub fn from_name(name: &str) -> Result<Self, ConditionError> {
        match name {
            "sliding_kirchhoff" => Ok(ConditionPreset::SlidingKirchhoff),
            "cont_deriv" => Ok(ConditionPreset::ContDeriv),
            "cont_free" => Ok(ConditionPreset::ContFree),
            "friedrichs" => Ok(ConditionPreset::Friedrichs),
            "krein" => Ok(ConditionPreset::Krein),
            "kiik" => Err(ConditionError::MissingParameter("alpha, beta, gamma".into())),
            other => Err(ConditionError::UnknownPreset(other.to_string())),
        }
    }
}

/// The derivative block `Λ0 = ½ J L^{-1} J` of the Krein–von Neumann
/// conditions, `J = [[I, I], [I, I]]`, `L = diag(ℓ, ℓ)`.
pub fn krein_lambda0(lengths: &[f64]) -> DMatrix<f64> {
    let e = lengths.len();
    let mut j = DMatrix::zeros(2 * e, 2 * e);
    let mut l_inv = DMatrix::zeros(2 * e, 2 * e);
    for k in 0..e {
        for (a, b) in [(k, k), (k, e + k), (e + k, k), (e + k, e + k)] {
            j[(a, b)] = 1.0;
        }
        l_inv[(k, k)] = 1.0 / lengths[k];
        l_inv[(e + k, e + k)] = 1.0 / lengths[k];
    }
    (&j * l_inv * &j) * 0.5
}

/// `Λ` on `C^{4E}`: zero except for the derivative block.
pub fn krein_lambda(lengths: &[f64]) -> DMatrix<f64> {
    let e = lengths.len();
    let mut full = DMatrix::zeros(4 * e, 4 * e);
    full.view_mut((2 * e, 2 * e), (2 * e, 2 * e))
        .copy_from(&krein_lambda0(lengths));
    full
}

fn star_center(graph: &Graph, preset: &str) -> Result<usize, ConditionError> {
    let deg = graph.degrees();
    let unsupported = |reason: &str| ConditionError::UnsupportedGraphForPreset {
        preset: preset.to_string(),
        reason: reason.to_string(),
    };
    if graph.vertex_count() != 4 || graph.edge_count() != 3 {
        return Err(unsupported("requires a star with three edges"));
    }
    deg.iter()
        .position(|&d| d == 3)
        .ok_or_else(|| unsupported("no vertex of degree 3"))
}

pub fn preset_conditions(metric: &MetricGraph, preset: &ConditionPreset) -> Result<ConditionYR, ConditionError> {
    let graph = metric.graph();
    let v = graph.vertex_count();
    let uniform = |derivative: LocalSpace| vec![VertexRule::new(LocalSpace::Constants, derivative); v];
    let name = preset.name();
    match *preset {
        ConditionPreset::SlidingKirchhoff => {
            ConditionYR::from_vertex_rules(graph, &uniform(LocalSpace::ConstantsComplement), None, name)
        }
        ConditionPreset::ContDeriv => {
            ConditionYR::from_vertex_rules(graph, &uniform(LocalSpace::Constants), None, name)
        }
        ConditionPreset::ContFree => ConditionYR::from_vertex_rules(graph, &uniform(LocalSpace::Full), None, name),
        ConditionPreset::Friedrichs => ConditionYR::from_vertex_rules(graph, &uniform(LocalSpace::Zero), None, name),
        ConditionPreset::Krein => {
            let lambda = to_complex(&krein_lambda(metric.lengths()));
            ConditionYR::from_vertex_rules(graph, &uniform(LocalSpace::Full), Some(&lambda), name)
        }
        ConditionPreset::Kiik {
            alpha,
            beta,
            gamma,
            outer,
        } => {
            for angle in [alpha, beta, gamma] {
                if angle.sin().abs() < 1e-12 {
                    return Err(ConditionError::DegenerateAngle(angle));
                }
            }
            let center = star_center(graph, name)?;
            // Incident edges of the centre are visited in edge order, which
            // is also the slot order used by the local bases.
            let weights = vec![alpha.sin(), beta.sin(), gamma.sin()];
            let rules: Vec<VertexRule> = (0..v)
                .map(|u| {
                    if u == center {
                        VertexRule::new(LocalSpace::Constants, LocalSpace::Complement(weights.clone()))
                    } else {
                        outer.rule()
                    }
                })
                .collect();
            ConditionYR::from_vertex_rules(graph, &rules, None, name)
        }
    }
}

/// `B = P_Y`, `C = R̃ + (I - P_Y)` with `R̃` the zero extension of `R`.
///
/// Then `Y = Rg B^*`, `Y^⊥ = ker B`, and `C B^* = R̃`.
pub fn yr_to_cb(cond: &ConditionYR) -> ConditionCB {
    let n = cond.trace_dim();
    let p = cond.projector();
    let c = cond.r_extended() + (CMatrix::identity(n, n) - &p);
    ConditionCB { c, b: p }
}

/// `Y = Rg B^*` and `R = B^+ C` compressed to `Y`.
pub fn cb_to_yr(cond: &ConditionCB) -> Result<ConditionYR, ConditionError> {
    cond.check_self_adjoint(1e-10)?;
    let y = column_space(&cond.b.adjoint(), RANK_TOL);
    let b_pinv = cond
        .b
        .clone()
        .pseudo_inverse(RANK_TOL * cmax_abs(&cond.b).max(f64::MIN_POSITIVE))
        .map_err(|e| ConditionError::DimensionMismatch(e.to_string()))?;
    let r = y.adjoint() * b_pinv * &cond.c * &y;
    let r = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
    ConditionYR::new(y, r, "from_cb")
}

pub fn admissible_from_yr(cond: &ConditionYR) -> AdmissibleTraceSpace {
    let n = cond.trace_dim();
    let k = cond.dim_y();
    let y = &cond.y_basis;
    let y_perp = orthogonal_complement(y, n);
    let mut span = CMatrix::zeros(2 * n, n);
    span.view_mut((0, 0), (n, k)).copy_from(y);
    span.view_mut((n, 0), (n, k)).copy_from(&(-(y * &cond.r)));
    span.view_mut((n, k), (n, n - k)).copy_from(&y_perp);
    AdmissibleTraceSpace {
        basis: column_space(&span, RANK_TOL),
    }
}

pub fn admissible_from_cb(cond: &ConditionCB) -> Result<AdmissibleTraceSpace, ConditionError> {
    let n = cond.trace_dim();
    let mut joined = CMatrix::zeros(n, 2 * n);
    joined.view_mut((0, 0), (n, n)).copy_from(&cond.c);
    joined.view_mut((0, n), (n, n)).copy_from(&cond.b);
    let basis = null_space(&joined, RANK_TOL);
    if basis.ncols() != n {
        return Err(ConditionError::DimensionMismatch(format!(
            "admissible space has dimension {}, expected {n}",
            basis.ncols()
        )));
    }
    Ok(AdmissibleTraceSpace { basis })
}

/// Either encoding of a vertex condition.
#[derive(Debug, Clone)]
pub enum Condition {
    YR(ConditionYR),
    CB(ConditionCB),
}

pub fn admissible_trace_space(cond: &Condition) -> Result<AdmissibleTraceSpace, ConditionError> {
    match cond {
        Condition::YR(c) => {
            let space = admissible_from_yr(c);
            if space.dim() != c.trace_dim() {
                return Err(ConditionError::DimensionMismatch(format!(
                    "admissible space has dimension {}, expected {}",
                    space.dim(),
                    c.trace_dim()
                )));
            }
            Ok(space)
        }
        Condition::CB(c) => admissible_from_cb(c),
    }
}

pub fn trace_space_distance(a: &AdmissibleTraceSpace, b: &AdmissibleTraceSpace) -> f64 {
    largest_principal_angle_sin(&a.basis, &b.basis)
}

pub fn conditions_equal(a: &Condition, b: &Condition) -> bool {
    match (admissible_trace_space(a), admissible_trace_space(b)) {
        (Ok(sa), Ok(sb)) => trace_space_distance(&sa, &sb) <= SPACE_EQUALITY_TOL,
        _ => false,
    }
}

/// Self-adjointness evidence for one condition.
#[derive(Debug, Clone, Serialize)]
pub struct SelfAdjointCertificate {
    pub rank: usize,
    pub trace_dim: usize,
    pub hermiticity_defect: f64,
    pub roundtrip_angle: f64,
}

impl SelfAdjointCertificate {
    pub fn passes(&self, herm_tol: f64, angle_tol: f64) -> bool {
        self.rank == self.trace_dim && self.hermiticity_defect <= herm_tol && self.roundtrip_angle <= angle_tol
    }
}

pub fn certify(cond: &ConditionYR) -> Result<SelfAdjointCertificate, ConditionError> {
    let cb = yr_to_cb(cond);
    let back = cb_to_yr(&cb)?;
    let angle = trace_space_distance(&admissible_from_yr(cond), &admissible_from_yr(&back));
    Ok(SelfAdjointCertificate {
        rank: cb.rank(),
        trace_dim: cb.trace_dim(),
        hermiticity_defect: cb.hermiticity_defect(),
        roundtrip_angle: angle,
    })
}
