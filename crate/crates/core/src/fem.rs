//! Hermite-cubic finite elements for the fourth-order operator on a metric
//! graph, with vertex conditions imposed on the trace vector through an
//! explicit constraint basis, plus a piecewise-linear companion assembly for
//! the second-order Laplacian with continuity and Kirchhoff conditions.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::Serialize;
use thiserror::Error;

use crate::conditions::{ConditionError, ConditionYR};
use crate::graph::MetricGraph;
use crate::linalg::{gauss_on, generalized_sym_eigen, max_abs};
use crate::qualitative::{AnalysisError, Evolver, SpectralData};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("element length must be positive, got {0}")]
    NonpositiveLength(f64),
    #[error("mesh has {mesh} edges, graph has {graph}")]
    MeshGraphMismatch { mesh: usize, graph: usize },
    #[error("every edge needs at least one element")]
    EmptyEdge,
    #[error("condition has trace dimension {trace_dim}, graph needs {expected}")]
    ConditionGraphMismatch { trace_dim: usize, expected: usize },
    #[error("the finite element solver handles real conditions only ({0})")]
    ComplexCondition(String),
    #[error("generalized eigensolver failed: {0}")]
    SolverFailure(String),
    #[error("no 10^3 gap between the kernel cluster ({below:.3e}) and the next eigenvalue ({above:.3e})")]
    AmbiguousGap { below: f64, above: f64 },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("time must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error(transparent)]
    Condition(#[from] ConditionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Uniform subdivision of each edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mesh {
    elements: Vec<usize>,
}

impl Mesh {
    pub fn new(elements: Vec<usize>) -> Result<Self, FemError> {
        if elements.contains(&0) {
            return Err(FemError::EmptyEdge);
        }
        Ok(Mesh { elements })
    }

    pub fn uniform(edges: usize, per_edge: usize) -> Result<Self, FemError> {
        Self::new(vec![per_edge; edges])
    }

    pub fn elements(&self, edge: usize) -> usize {
        self.elements[edge]
    }

    pub fn edge_count(&self) -> usize {
        self.elements.len()
    }
}

/// A mesh node on one edge and the degree of freedom holding its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeInfo {
    pub edge: usize,
    pub x: f64,
    pub value_dof: usize,
}

/// Value and slope unknowns per node per edge; edges share nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    offsets: Vec<usize>,
    elements: Vec<usize>,
    total: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut offsets = Vec::with_capacity(mesh.edge_count());
        let mut total = 0;
        for &n in &mesh.elements {
            offsets.push(total);
            total += 2 * (n + 1);
        }
        DofMap {
            offsets,
            elements: mesh.elements.clone(),
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn value_dof(&self, edge: usize, node: usize) -> usize {
        self.offsets[edge] + 2 * node
    }

    pub fn slope_dof(&self, edge: usize, node: usize) -> usize {
        self.offsets[edge] + 2 * node + 1
    }

    /// `(dof, sign)` for every trace index, in trace order.
    pub fn trace_entries(&self) -> Vec<(usize, f64)> {
        let e = self.elements.len();
        let mut out = vec![(0, 0.0); 4 * e];
        for k in 0..e {
            let last = self.elements[k];
            out[k] = (self.value_dof(k, 0), 1.0);
            out[e + k] = (self.value_dof(k, last), 1.0);
            out[2 * e + k] = (self.slope_dof(k, 0), -1.0);
            out[3 * e + k] = (self.slope_dof(k, last), 1.0);
        }
        out
    }

    /// The trace map `T` (4E x dofs): `T x = u01`.
    pub fn trace_matrix(&self) -> DMatrix<f64> {
        let entries = self.trace_entries();
        let mut t = DMatrix::zeros(entries.len(), self.total);
        for (row, (dof, sign)) in entries.into_iter().enumerate() {
            t[(row, dof)] = sign;
        }
        t
    }

    fn element_dofs(&self, edge: usize, element: usize) -> [usize; 4] {
        [
            self.value_dof(edge, element),
            self.slope_dof(edge, element),
            self.value_dof(edge, element + 1),
            self.slope_dof(edge, element + 1),
        ]
    }
}

/// Order of the differential operator a system discretises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    Second,
    Fourth,
}

/// Real condition data in the trace coordinates.
#[derive(Debug, Clone)]
pub struct RealCondition {
    pub name: String,
    pub y: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// `K_Y a = λ M_Y a` on the constrained space `x = Z a`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub k: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub m_full: DMatrix<f64>,
    pub order: Order,
    pub nodes: Vec<NodeInfo>,
    pub dof_map: Option<DofMap>,
    pub mesh: Mesh,
    pub lengths: Vec<f64>,
    pub condition: Option<RealCondition>,
    pub ck: Option<CkNodes>,
}

impl ReducedSystem {
    pub fn reduced_dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn full_dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn trace_matrix(&self) -> Option<DMatrix<f64>> {
        self.dof_map.as_ref().map(DofMap::trace_matrix)
    }

    fn element_length(&self, edge: usize) -> f64 {
        self.lengths[edge] / self.mesh.elements(edge) as f64
    }

    /// Global dofs of one element and the shape functions (derivative
    /// order `d`) at local coordinate `xi` in `[0, 1]`.
    fn element_shapes(&self, edge: usize, element: usize, xi: f64, d: usize) -> (Vec<usize>, Vec<f64>) {
        let h = self.element_length(edge);
        match self.order {
            Order::Fourth => {
                let dofs = self.dof_map.as_ref().expect("fourth-order systems carry a dof map");
                (dofs.element_dofs(edge, element).to_vec(), hermite_shapes(xi, h)[d].to_vec())
            }
            Order::Second => {
                let n = self.mesh.elements(edge);
                let dofs = vec![ck_node(self, edge, element), ck_node(self, edge, element + 1)];
                let shapes = match d {
                    0 => vec![1.0 - xi, xi],
                    1 => vec![-1.0 / h, 1.0 / h],
                    _ => vec![0.0, 0.0],
                };
                debug_assert!(element < n);
                (dofs, shapes)
            }
        }
    }

    fn locate(&self, edge: usize, x: f64) -> (usize, f64) {
        let n = self.mesh.elements(edge);
        let s = (x / self.element_length(edge)).clamp(0.0, n as f64);
        let j = (s.floor() as usize).min(n - 1);
        (j, s - j as f64)
    }

    /// Derivative of order `d` of the finite element function with full
    /// coefficients `u` at position `x` on `edge`.
    pub fn evaluate(&self, u: &DVector<f64>, edge: usize, x: f64, d: usize) -> f64 {
        let (j, xi) = self.locate(edge, x);
        let (dofs, shapes) = self.element_shapes(edge, j, xi, d);
        dofs.iter().zip(shapes).map(|(&i, s)| u[i] * s).sum()
    }

    /// `(∫ f φ_i)_i` over all full dofs, with a Gauss rule per element.
    pub fn load_vector(&self, f: &dyn Fn(usize, f64) -> f64) -> DVector<f64> {
        let mut b = DVector::zeros(self.full_dim());
        for edge in 0..self.lengths.len() {
            let h = self.element_length(edge);
            for j in 0..self.mesh.elements(edge) {
                let x0 = j as f64 * h;
                for (x, w) in gauss_on(x0, x0 + h, 8) {
                    let (dofs, shapes) = self.element_shapes(edge, j, (x - x0) / h, 0);
                    let fx = f(edge, x);
                    for (&i, s) in dofs.iter().zip(shapes) {
                        b[i] += w * fx * s;
                    }
                }
            }
        }
        b
    }

    /// Values at the mesh nodes.
    pub fn nodal_values(&self, u: &DVector<f64>) -> Vec<f64> {
        self.nodes.iter().map(|n| u[n.value_dof]).collect()
    }
}

fn ck_node(sys: &ReducedSystem, edge: usize, node: usize) -> usize {
    let ck = sys.ck.as_ref().expect("second-order systems carry node tables");
    ck.node(edge, node)
}

/// Values and derivatives (rows: order 0..=3) of the four cubic Hermite
/// shape functions on an element of length `h`, at local coordinate `xi`.
pub fn hermite_shapes(xi: f64, h: f64) -> [[f64; 4]; 4] {
    let (x, x2, x3) = (xi, xi * xi, xi * xi * xi);
    [
        [
            1.0 - 3.0 * x2 + 2.0 * x3,
            h * (x - 2.0 * x2 + x3),
            3.0 * x2 - 2.0 * x3,
            h * (-x2 + x3),
        ],
        [
            (-6.0 * x + 6.0 * x2) / h,
            1.0 - 4.0 * x + 3.0 * x2,
            (6.0 * x - 6.0 * x2) / h,
            -2.0 * x + 3.0 * x2,
        ],
        [
            (-6.0 + 12.0 * x) / (h * h),
            (-4.0 + 6.0 * x) / h,
            (6.0 - 12.0 * x) / (h * h),
            (-2.0 + 6.0 * x) / h,
        ],
        [12.0 / (h * h * h), 6.0 / (h * h), -12.0 / (h * h * h), 6.0 / (h * h)],
    ]
}

/// Bending stiffness `∫ φ_i'' φ_j''` and consistent mass `∫ φ_i φ_j`.
pub fn hermite_element_matrices(h: f64) -> Result<(Matrix4<f64>, Matrix4<f64>), FemError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FemError::NonpositiveLength(h));
    }
    let h2 = h * h;
    let k = Matrix4::new(
        12.0, 6.0 * h, -12.0, 6.0 * h,
        6.0 * h, 4.0 * h2, -6.0 * h, 2.0 * h2,
        -12.0, -6.0 * h, 12.0, -6.0 * h,
        6.0 * h, 2.0 * h2, -6.0 * h, 4.0 * h2,
    ) / (h2 * h);
    let m = Matrix4::new(
        156.0, 22.0 * h, 54.0, -13.0 * h,
        22.0 * h, 4.0 * h2, 13.0 * h, -3.0 * h2,
        54.0, 13.0 * h, 156.0, -22.0 * h,
        -13.0 * h, -3.0 * h2, -22.0 * h, 4.0 * h2,
    ) * (h / 420.0);
    Ok((k, m))
}

fn check_mesh(metric: &MetricGraph, mesh: &Mesh) -> Result<(), FemError> {
    if mesh.edge_count() != metric.edge_count() {
        return Err(FemError::MeshGraphMismatch {
            mesh: mesh.edge_count(),
            graph: metric.edge_count(),
        });
    }
    Ok(())
}

/// Assembles `a(u, v) = Σ ∫ u'' v'' - (R u01, v01)` and the `L^2` product on
/// `{x : T x ∈ Y}`. Conditions on `u32` are natural and are not imposed.
pub fn assemble(metric: &MetricGraph, mesh: &Mesh, cond: &ConditionYR) -> Result<ReducedSystem, FemError> {
    check_mesh(metric, mesh)?;
    let e = metric.edge_count();
    if cond.trace_dim() != 4 * e {
        return Err(FemError::ConditionGraphMismatch {
            trace_dim: cond.trace_dim(),
            expected: 4 * e,
        });
    }
    let (y, r) = cond
        .real_form()
        .ok_or_else(|| FemError::ComplexCondition(cond.name.clone()))?;
    let dofs = DofMap::new(mesh);
    let n = dofs.total();
    let mut k_full = DMatrix::zeros(n, n);
    let mut m_full = DMatrix::zeros(n, n);
    let mut nodes = Vec::new();
    for edge in 0..e {
        let ne = mesh.elements(edge);
        let h = metric.lengths()[edge] / ne as f64;
        let (ke, me) = hermite_element_matrices(h)?;
        for j in 0..ne {
            let idx = dofs.element_dofs(edge, j);
            for a in 0..4 {
                for b in 0..4 {
                    k_full[(idx[a], idx[b])] += ke[(a, b)];
                    m_full[(idx[a], idx[b])] += me[(a, b)];
                }
            }
        }
        for i in 0..=ne {
            nodes.push(NodeInfo {
                edge,
                x: i as f64 * h,
                value_dof: dofs.value_dof(edge, i),
            });
        }
    }

    // Z: identity on interior dofs, T^T Y on the boundary dofs.
    let entries = dofs.trace_entries();
    let mut is_boundary = vec![false; n];
    for &(d, _) in &entries {
        is_boundary[d] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&d| !is_boundary[d]).collect();
    let k_y = y.ncols();
    let r_dim = interior.len() + k_y;
    let mut z = DMatrix::zeros(n, r_dim);
    for (col, &d) in interior.iter().enumerate() {
        z[(d, col)] = 1.0;
    }
    for j in 0..k_y {
        for (row, &(d, sign)) in entries.iter().enumerate() {
            z[(d, interior.len() + j)] = sign * y[(row, j)];
        }
    }
    let mut k_red = z.transpose() * &k_full * &z;
    let m_red = z.transpose() * &m_full * &z;
    let off = interior.len();
    for a in 0..k_y {
        for b in 0..k_y {
            k_red[(off + a, off + b)] -= r[(a, b)];
        }
    }
    Ok(ReducedSystem {
        k: symmetrize(k_red),
        m: symmetrize(m_red),
        z,
        m_full,
        order: Order::Fourth,
        nodes,
        dof_map: Some(dofs),
        mesh: mesh.clone(),
        lengths: metric.lengths().to_vec(),
        condition: Some(RealCondition {
            name: cond.name.clone(),
            y,
            r,
        }),
        ck: None,
    })
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Node numbering of the piecewise-linear companion: vertices first, then
/// interior nodes edge by edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CkNodes {
    ends: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    elements: Vec<usize>,
    vertices: usize,
}

impl CkNodes {
    fn new(metric: &MetricGraph, mesh: &Mesh) -> Self {
        let mut offsets = Vec::with_capacity(mesh.edge_count());
        let mut total = 0;
        for &n in &mesh.elements {
            offsets.push(total);
            total += n - 1;
        }
        CkNodes {
            ends: metric.graph().edges().to_vec(),
            offsets,
            elements: mesh.elements.clone(),
            vertices: metric.vertex_count(),
        }
    }

    pub fn node(&self, edge: usize, i: usize) -> usize {
        if i == 0 {
            self.ends[edge].0
        } else if i == self.elements[edge] {
            self.ends[edge].1
        } else {
            self.vertices + self.offsets[edge] + i - 1
        }
    }

    pub fn total(&self) -> usize {
        self.vertices + self.elements.iter().map(|n| n - 1).sum::<usize>()
    }
}

/// Piecewise-linear `∫ u' v'` and `∫ u v` with shared vertex nodes, i.e. the
/// Laplacian with continuity and (natural) Kirchhoff conditions.
pub fn assemble_laplacian_ck(metric: &MetricGraph, mesh: &Mesh) -> Result<ReducedSystem, FemError> {
    check_mesh(metric, mesh)?;
    let ck = CkNodes::new(metric, mesh);
    let n = ck.total();
    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    let mut nodes = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for edge in 0..metric.edge_count() {
        let ne = mesh.elements(edge);
        let h = metric.lengths()[edge] / ne as f64;
        for j in 0..ne {
            let (a, b) = (ck.node(edge, j), ck.node(edge, j + 1));
            for (p, q, kv, mv) in [
                (a, a, 1.0, 2.0),
                (b, b, 1.0, 2.0),
                (a, b, -1.0, 1.0),
                (b, a, -1.0, 1.0),
            ] {
                k[(p, q)] += kv / h;
                m[(p, q)] += mv * h / 6.0;
            }
        }
        for i in 0..=ne {
            let node = ck.node(edge, i);
            if !seen[node] {
                seen[node] = true;
                nodes.push(NodeInfo {
                    edge,
                    x: i as f64 * h,
                    value_dof: node,
                });
            }
        }
    }
    nodes.sort_by_key(|n| n.value_dof);
    Ok(ReducedSystem {
        k,
        m: m.clone(),
        z: DMatrix::identity(n, n),
        m_full: m,
        order: Order::Second,
        nodes,
        dof_map: None,
        mesh: mesh.clone(),
        lengths: metric.lengths().to_vec(),
        condition: None,
        ck: Some(ck),
    })
}

/// Generalized eigenpairs, ascending, with modes in reduced and full
/// coordinates.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    /// `M_Y`-orthonormal columns.
    pub reduced: DMatrix<f64>,
    /// `Z * reduced`, orthonormal for the full mass matrix.
    pub full: DMatrix<f64>,
    /// Absolute accuracy estimate of the eigenvalues.
    pub noise: f64,
}

impl EigenDecomposition {
    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn residual(&self, sys: &ReducedSystem, j: usize) -> f64 {
        let v = self.reduced.column(j);
        (&sys.k * v - self.values[j] * (&sys.m * v)).amax()
    }

    /// First eigenvalue above the kernel (falls back to the first one above noise).
    pub fn spectral_gap(&self) -> f64 {
        let kernel = kernel_dimension(self).unwrap_or_else(|_| {
            self.values.iter().take_while(|&&l| l <= 10.0 * self.noise).count()
        });
        self.values.get(kernel).copied().unwrap_or(0.0)
    }
}

/// The `k` smallest eigenpairs (all of them for `None`).
pub fn eigensolve(sys: &ReducedSystem, k: Option<usize>) -> Result<EigenDecomposition, FemError> {
    let r = sys.reduced_dim();
    let k = k.unwrap_or(r);
    if k > r {
        return Err(FemError::SolverFailure(format!("requested {k} modes of {r}")));
    }
    let (values, vectors) = generalized_sym_eigen(&sys.k, &sys.m)
        .ok_or_else(|| FemError::SolverFailure("mass matrix is not positive definite".into()))?;
    let scale = values.amax().max(max_abs(&sys.k)).max(f64::MIN_POSITIVE);
    let reduced = vectors.columns(0, k).into_owned();
    let full = &sys.z * &reduced;
    Ok(EigenDecomposition {
        values: values.rows(0, k).into_owned(),
        reduced,
        full,
        noise: 64.0 * f64::EPSILON * scale,
    })
}

/// Number of eigenvalues in the cluster at zero.
///
/// `τ = 1e-7 max(1, λ)` with `λ` the first eigenvalue clearly above the
/// noise; a gap of `10^3` above the cluster is required.
pub fn kernel_dimension(eig: &EigenDecomposition) -> Result<usize, FemError> {
    let floor = 10.0 * eig.noise;
    let values = &eig.values;
    let first = values.iter().copied().find(|&l| l > floor);
    let tau = match first {
        Some(l) => floor.max(1e-7 * l.max(1.0)),
        None => floor,
    };
    let count = values.iter().take_while(|&&l| l < tau).count();
    if count > 0 && count < values.len() {
        let below = values.iter().take(count).fold(eig.noise, |a, l| a.max(l.abs()));
        let above = values[count];
        if above < 1e3 * below {
            return Err(FemError::AmbiguousGap { below, above });
        }
    }
    Ok(count)
}

/// Eigendata in the form used by the positivity classifier.
pub fn spectral_data(sys: &ReducedSystem, eig: &EigenDecomposition) -> SpectralData {
    let mut value_rows: Vec<usize> = sys.nodes.iter().map(|n| n.value_dof).collect();
    value_rows.sort_unstable();
    value_rows.dedup();
    SpectralData {
        eigenvalues: eig.values.clone(),
        modes: eig.full.clone(),
        mass: Some(sys.m_full.clone()),
        value_rows,
        noise: eig.noise,
    }
}

/// `exp(-tA) f0` through the spectral expansion, in full coordinates.
#[derive(Debug, Clone)]
pub struct FemEvolver<'a> {
    pub system: &'a ReducedSystem,
    pub eig: &'a EigenDecomposition,
    /// `(f0, φ_j)` for every computed mode.
    pub coefficients: DVector<f64>,
    /// Sup norm of the projected initial datum at the nodes.
    pub scale: f64,
}

impl<'a> FemEvolver<'a> {
    /// Projects `f0(edge, x)` onto the span of the computed modes.
    pub fn new(system: &'a ReducedSystem, eig: &'a EigenDecomposition, f0: &dyn Fn(usize, f64) -> f64) -> Self {
        let b = system.load_vector(f0);
        let coefficients = eig.full.transpose() * b;
        let mut ev = FemEvolver {
            system,
            eig,
            coefficients,
            scale: 1.0,
        };
        let u0 = ev.state(0.0);
        ev.scale = system.nodal_values(&u0).iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        ev
    }

    pub fn state(&self, t: f64) -> DVector<f64> {
        let decayed = DVector::from_iterator(
            self.coefficients.len(),
            self.coefficients
                .iter()
                .zip(self.eig.values.iter())
                .map(|(c, l)| c * (-t * l).exp()),
        );
        &self.eig.full * decayed
    }

    /// Mean of the initial datum, i.e. its projection onto the constants
    /// divided by the constant.
    pub fn mean(&self) -> f64 {
        let total: f64 = self.system.lengths.iter().sum();
        self.system.load_vector(&|_, _| 1.0).dot(&self.state(0.0)) / total
    }
}

impl Evolver for FemEvolver<'_> {
    fn min_value(&self, t: f64) -> f64 {
        self.system
            .nodal_values(&self.state(t))
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            / self.scale
    }

    fn decay_rate(&self) -> f64 {
        self.eig.spectral_gap()
    }
}

/// Nodal values of `exp(-tA) f0` at each time.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub nodes: Vec<NodeInfo>,
    pub values: Vec<Vec<f64>>,
}

pub fn evolve(
    sys: &ReducedSystem,
    eig: &EigenDecomposition,
    f0: &dyn Fn(usize, f64) -> f64,
    times: &[f64],
) -> Result<Trajectory, FemError> {
    if let Some(&t) = times.iter().find(|&&t| t < 0.0) {
        return Err(FemError::NegativeTime(t));
    }
    let ev = FemEvolver::new(sys, eig, f0);
    let values = times.iter().map(|&t| sys.nodal_values(&ev.state(t))).collect();
    Ok(Trajectory {
        times: times.to_vec(),
        nodes: sys.nodes.clone(),
        values,
    })
}

/// `max_x Σ_j exp(-λ_j t) φ_j(x)^2` over mesh nodes, which bounds
/// `|k_t(x, y)|` for the positive semidefinite heat kernel.
pub fn kernel_sup_bound(sys: &ReducedSystem, eig: &EigenDecomposition, t: f64) -> Result<f64, FemError> {
    if !(t > 0.0) {
        return Err(FemError::NonpositiveTime(t));
    }
    let weights: Vec<f64> = eig.values.iter().map(|l| (-t * l).exp()).collect();
    let best = sys
        .nodes
        .iter()
        .map(|n| {
            eig.full
                .row(n.value_dof)
                .iter()
                .zip(&weights)
                .map(|(p, w)| w * p * p)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    Ok(best)
}

/// `|P_Y (u32 + R u01)|` for a fourth-order finite element function, which
/// vanishes for exact solutions satisfying the natural conditions.
pub fn natural_condition_residual(sys: &ReducedSystem, u: &DVector<f64>) -> Option<f64> {
    let cond = sys.condition.as_ref()?;
    let e = sys.lengths.len();
    let mut u01 = DVector::zeros(4 * e);
    let mut u32 = DVector::zeros(4 * e);
    for edge in 0..e {
        let l = sys.lengths[edge];
        let d = |x: f64, k: usize| sys.evaluate(u, edge, x, k);
        u01[edge] = d(0.0, 0);
        u01[e + edge] = d(l, 0);
        u01[2 * e + edge] = -d(0.0, 1);
        u01[3 * e + edge] = d(l, 1);
        u32[edge] = -d(0.0, 3);
        u32[e + edge] = d(l, 3);
        u32[2 * e + edge] = -d(0.0, 2);
        u32[3 * e + edge] = -d(l, 2);
    }
    let r_ext = &cond.y * &cond.r * cond.y.transpose();
    let w = u32 + r_ext * u01;
    Some((&cond.y * (cond.y.transpose() * w)).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{preset_conditions, ConditionPreset, LocalSpace, VertexRule};
    use crate::graph::{preset_graph, Graph, PresetKind};
    use std::f64::consts::PI;

    fn metric(kind: PresetKind, n: usize) -> MetricGraph {
        MetricGraph::equilateral(preset_graph(kind, n).unwrap(), 1.0).unwrap()
    }

    fn interval(length: f64) -> MetricGraph {
        MetricGraph::new(Graph::new(2, vec![(0, 1)]).unwrap(), vec![length]).unwrap()
    }

    fn system(g: &MetricGraph, preset: ConditionPreset, n: usize) -> ReducedSystem {
        let cond = preset_conditions(g, &preset).unwrap();
        assemble(g, &Mesh::uniform(g.edge_count(), n).unwrap(), &cond).unwrap()
    }

    fn hinged(g: &MetricGraph, n: usize) -> ReducedSystem {
        let rule = VertexRule::new(LocalSpace::Zero, LocalSpace::Full);
        let cond = ConditionYR::from_vertex_rules(g.graph(), &[rule.clone(), rule], None, "hinged").unwrap();
        assemble(g, &Mesh::uniform(1, n).unwrap(), &cond).unwrap()
    }

    #[test]
    fn element_matrices_match_quadrature() {
        for h in [0.3, 1.0, 2.5] {
            let (k, m) = hermite_element_matrices(h).unwrap();
            let mut kq = Matrix4::zeros();
            let mut mq = Matrix4::zeros();
            for (x, w) in gauss_on(0.0, h, 5) {
                let s = hermite_shapes(x / h, h);
                for a in 0..4 {
                    for b in 0..4 {
                        kq[(a, b)] += w * s[2][a] * s[2][b];
                        mq[(a, b)] += w * s[0][a] * s[0][b];
                    }
                }
            }
            assert!((k - kq).amax() < 1e-12 * k.amax());
            assert!((m - mq).amax() < 1e-12 * m.amax().max(1.0));
            let ramp = nalgebra::Vector4::new(0.0, 1.0, h, 1.0);
            let one = nalgebra::Vector4::new(1.0, 0.0, 1.0, 0.0);
            assert!((k * ramp).amax() < 1e-12 && (k * one).amax() < 1e-12);
            assert!(((m * one)[0] + (m * one)[2] - h).abs() < 1e-14);
        }
        assert_eq!(hermite_element_matrices(0.0), Err(FemError::NonpositiveLength(0.0)));
    }

    #[test]
    fn reduced_dimensions() {
        let sys = system(&interval(1.0), ConditionPreset::Friedrichs, 8);
        assert_eq!(sys.reduced_dim(), sys.full_dim() - 2);
        let star = metric(PresetKind::Star, 3);
        let sys = system(&star, ConditionPreset::ContFree, 4);
        assert_eq!(sys.reduced_dim(), sys.full_dim() - 2);
        let t = sys.trace_matrix().unwrap();
        assert!(t.row_iter().all(|r| r.iter().filter(|v| **v != 0.0).count() == 1));
        let other = preset_conditions(&metric(PresetKind::Path, 3), &ConditionPreset::Friedrichs).unwrap();
        assert!(matches!(
            assemble(&star, &Mesh::uniform(3, 2).unwrap(), &other),
            Err(FemError::ConditionGraphMismatch { .. })
        ));
    }

    #[test]
    fn interval_spectra() {
        let eig = eigensolve(&system(&interval(1.0), ConditionPreset::Friedrichs, 64), Some(3)).unwrap();
        let p4 = PI.powi(4);
        assert!(eig.values[0].abs() < 1e-6);
        assert!((eig.values[1] / p4 - 1.0).abs() < 1e-3);
        assert!((eig.values[2] / (16.0 * p4) - 1.0).abs() < 1e-3);
        let eig = eigensolve(&hinged(&interval(1.0), 64), Some(2)).unwrap();
        assert!((eig.values[0] / p4 - 1.0).abs() < 1e-3);
        assert!((eig.values[1] / (16.0 * p4) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn refinement_converges_at_high_order() {
        let err = |n| {
            let eig = eigensolve(&system(&interval(1.0), ConditionPreset::Friedrichs, n), Some(2)).unwrap();
            (eig.values[1] - PI.powi(4)).abs()
        };
        let (a, b, c) = (err(2), err(4), err(8));
        assert!(a / b >= 8.0 && b / c >= 8.0, "{a} {b} {c}");
    }

    #[test]
    fn kernel_table_is_mesh_independent() {
        let cases: Vec<(MetricGraph, ConditionPreset, usize)> = vec![
            (metric(PresetKind::Path, 3), ConditionPreset::Friedrichs, 1),
            (metric(PresetKind::Star, 3), ConditionPreset::Friedrichs, 1),
            (metric(PresetKind::Path, 3), ConditionPreset::Krein, 5),
            (metric(PresetKind::Star, 3), ConditionPreset::Krein, 7),
            (metric(PresetKind::Cycle, 4), ConditionPreset::Krein, 8),
            (metric(PresetKind::Star, 3), ConditionPreset::ContFree, 4),
            (metric(PresetKind::Cycle, 3), ConditionPreset::ContDeriv, 1),
            (metric(PresetKind::Cycle, 4), ConditionPreset::ContDeriv, 2),
            (metric(PresetKind::Star, 3), ConditionPreset::SlidingKirchhoff, 1),
        ];
        for (g, preset, expected) in cases {
            for n in [1, 4, 16] {
                let eig = eigensolve(&system(&g, preset, n), None).unwrap();
                let k = kernel_dimension(&eig);
                assert_eq!(k, Ok(expected), "{} n={n} values {:?}", preset.name(), &eig.values.as_slice()[..expected + 1]);
            }
        }
    }

    #[test]
    fn krein_form_is_nonnegative() {
        for g in [metric(PresetKind::Star, 3), metric(PresetKind::Cycle, 4)] {
            let eig = eigensolve(&system(&g, ConditionPreset::Krein, 4), None).unwrap();
            assert!(eig.values[0] >= -1e-8 * eig.values.amax());
        }
    }

    #[test]
    fn friedrichs_dominates_cont_free() {
        let g = metric(PresetKind::Star, 3);
        let f = eigensolve(&system(&g, ConditionPreset::Friedrichs, 8), Some(10)).unwrap();
        let c = eigensolve(&system(&g, ConditionPreset::ContFree, 8), Some(10)).unwrap();
        for j in 0..10 {
            assert!(f.values[j] >= c.values[j] - 1e-8);
        }
    }

    #[test]
    fn eigenpairs_are_accurate() {
        let sys = system(&metric(PresetKind::Star, 3), ConditionPreset::Krein, 8);
        let eig = eigensolve(&sys, None).unwrap();
        let kn = max_abs(&sys.k);
        for j in 0..eig.count() {
            assert!(eig.residual(&sys, j) <= 1e-8 * kn);
        }
        let gram = eig.reduced.transpose() * &sys.m * &eig.reduced;
        assert!((gram - DMatrix::identity(eig.count(), eig.count())).amax() < 1e-9);
        assert!(max_abs(&(&sys.k - sys.k.transpose())) == 0.0);
    }

    #[test]
    fn square_relation_on_the_star() {
        let g = metric(PresetKind::Star, 3);
        let bi = eigensolve(&system(&g, ConditionPreset::SlidingKirchhoff, 64), Some(5)).unwrap();
        let ck_sys = assemble_laplacian_ck(&g, &Mesh::uniform(3, 256).unwrap()).unwrap();
        let ck = eigensolve(&ck_sys, Some(5)).unwrap();
        let exact = [0.0, PI * PI / 4.0, PI * PI / 4.0, PI * PI, 9.0 * PI * PI / 4.0];
        for (j, e) in exact.iter().enumerate() {
            let sq = ck.values[j] * ck.values[j];
            assert!((bi.values[j] - sq).abs() <= 1e-2 * sq.max(1.0), "{j}: {} vs {sq}", bi.values[j]);
            assert!((ck.values[j] - e).abs() <= 1e-3 * e.max(1.0));
        }
    }

    #[test]
    fn ck_interval_is_neumann() {
        let sys = assemble_laplacian_ck(&interval(1.0), &Mesh::uniform(1, 256).unwrap()).unwrap();
        let eig = eigensolve(&sys, Some(3)).unwrap();
        assert_eq!(kernel_dimension(&eig), Ok(1));
        assert!((eig.values[1] / (PI * PI) - 1.0).abs() < 1e-3);
        assert!((eig.values[2] / (4.0 * PI * PI) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn evolution_of_an_exact_mode() {
        let sys = system(&interval(1.0), ConditionPreset::Friedrichs, 64);
        let eig = eigensolve(&sys, None).unwrap();
        let f0 = |_: usize, x: f64| (PI * x).cos();
        let traj = evolve(&sys, &eig, &f0, &[0.0, 1e-3, 5e-3]).unwrap();
        for (t, vals) in traj.times.iter().zip(&traj.values) {
            let decay = (-PI.powi(4) * t).exp();
            for (node, v) in traj.nodes.iter().zip(vals) {
                assert!((v - decay * (PI * node.x).cos()).abs() <= 1e-3 * decay);
            }
        }
        assert!(matches!(evolve(&sys, &eig, &f0, &[-1.0]), Err(FemError::NegativeTime(_))));
    }

    #[test]
    fn long_time_limit_is_the_mean() {
        let g = metric(PresetKind::Star, 3);
        let sys = system(&g, ConditionPreset::SlidingKirchhoff, 16);
        let eig = eigensolve(&sys, None).unwrap();
        let f0 = |e: usize, x: f64| (e as f64 + 1.0) * x * x;
        let ev = FemEvolver::new(&sys, &eig, &f0);
        let mean = (1.0 + 2.0 + 3.0) / 3.0 / 3.0;
        assert!((ev.mean() - mean).abs() < 1e-10);
        let t = 20.0 / eig.spectral_gap();
        let u = ev.state(t);
        assert!(sys.nodal_values(&u).iter().all(|v| (v - mean).abs() < 1e-6));
    }

    #[test]
    fn kernel_sup_bound_behaviour() {
        let sys = system(&interval(1.0), ConditionPreset::Friedrichs, 32);
        let eig = eigensolve(&sys, None).unwrap();
        assert!((kernel_sup_bound(&sys, &eig, 10.0).unwrap() - 1.0).abs() < 1e-3);
        assert!(kernel_sup_bound(&sys, &eig, 1e-3).unwrap() > kernel_sup_bound(&sys, &eig, 1e-1).unwrap());
        assert!(matches!(kernel_sup_bound(&sys, &eig, 0.0), Err(FemError::NonpositiveTime(_))));
    }

    #[test]
    fn natural_residual_shrinks_under_refinement() {
        let g = metric(PresetKind::Star, 3);
        let res: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let sys = system(&g, ConditionPreset::SlidingKirchhoff, n);
                let eig = eigensolve(&sys, Some(2)).unwrap();
                natural_condition_residual(&sys, &eig.full.column(1).into_owned()).unwrap()
            })
            .collect();
        assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
    }
}
