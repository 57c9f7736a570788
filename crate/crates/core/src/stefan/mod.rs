//! Finite-difference solver for the clamped value-function PDE of planar
//! reset systems
//!
//! ```text
//! xᵀQx − J + (Ax)·∇V + ½Tr(R∇²V) = ∂V/∂t,   V := min(V, 0)
//! ```
//!
//! stepped in pseudo-time with backward Euler (BTCS) on a uniform grid.
//! The continuation region `Ω = {V < 0}` is a free boundary; sampling fires
//! when the state leaves it.

mod contour;

pub use contour::{
    convex_hull, convexity_defect, extract_boundary, hausdorff_distance, polygon_area, BoundaryPolyline,
};

use std::collections::HashSet;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::solve_riccati_like;
use crate::linalg::{require_pd, sym_eig_range};
use crate::lqg::ResetSystem;

/// Uniform grid on `[−w₁, w₁] × [−w₂, w₂]` plus pseudo-time parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: [f64; 2],
    pub n_cells: [usize; 2],
    pub dt: f64,
    pub stationarity_tol: f64,
    pub max_steps: usize,
}

impl GridSpec {
    pub const DEFAULT_CELLS: usize = 256;
    pub const DEFAULT_MAX_STEPS: usize = 200_000;

    /// Default grid: a square domain three times the radius of the ellipse
    /// obtained by ignoring the drift, 256 cells per axis, diffusive `dt`
    /// and `tol = 1e-6·J`.
    pub fn auto(sys: &ResetSystem, j: f64) -> Result<Self> {
        let w = auto_half_width(sys, j)?;
        Self::with_defaults(sys, j, [w, w], [Self::DEFAULT_CELLS; 2])
    }

    /// Grid with the given extent and resolution; `dt`, tolerance and step
    /// budget follow the default rules.
    pub fn with_defaults(
        sys: &ResetSystem,
        j: f64,
        half_width: [f64; 2],
        n_cells: [usize; 2],
    ) -> Result<Self> {
        check_system(sys)?;
        check_j(j)?;
        let (r_min, _) = sym_eig_range(&sys.r);
        let dx = [2.0 * half_width[0] / n_cells[0] as f64, 2.0 * half_width[1] / n_cells[1] as f64];
        let spec = Self {
            half_width,
            n_cells,
            dt: dx[0].min(dx[1]).powi(2) / r_min,
            stationarity_tol: 1e-6 * j,
            max_steps: Self::DEFAULT_MAX_STEPS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..2 {
            if self.n_cells[k] < 32 || !self.n_cells[k].is_multiple_of(2) {
                return Err(Error::InvalidGrid(format!(
                    "n_cells must be even and at least 32, got {:?}",
                    self.n_cells
                )));
            }
            if !(self.half_width[k] > 0.0) || !self.half_width[k].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "half_width must be positive, got {:?}",
                    self.half_width
                )));
            }
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.stationarity_tol > 0.0) {
            return Err(Error::InvalidGrid("stationarity_tol must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidGrid("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> [f64; 2] {
        [2.0 * self.half_width[0] / self.n_cells[0] as f64, 2.0 * self.half_width[1] / self.n_cells[1] as f64]
    }

    /// Node counts per axis (`n_cells + 1`).
    pub fn n_nodes(&self) -> [usize; 2] {
        [self.n_cells[0] + 1, self.n_cells[1] + 1]
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        let dx = self.dx();
        [-self.half_width[0] + i as f64 * dx[0], -self.half_width[1] + j as f64 * dx[1]]
    }

    /// Index of the node at the origin.
    pub fn origin(&self) -> (usize, usize) {
        (self.n_cells[0] / 2, self.n_cells[1] / 2)
    }

    fn flat(&self, i: usize, j: usize) -> usize {
        i * self.n_nodes()[1] + j
    }

    fn is_edge(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n_cells[0] || j == self.n_cells[1]
    }
}

/// Partial grid settings; unset fields take the defaults of [`GridSpec::auto`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub half_width: Option<[f64; 2]>,
    pub n_cells: Option<[usize; 2]>,
    pub dt: Option<f64>,
    pub stationarity_tol: Option<f64>,
    pub max_steps: Option<usize>,
}

impl GridOptions {
    pub fn resolve(&self, sys: &ResetSystem, j: f64) -> Result<GridSpec> {
        let half_width = match self.half_width {
            Some(w) => w,
            None => {
                let w = auto_half_width(sys, j)?;
                [w, w]
            }
        };
        let n_cells = self.n_cells.unwrap_or([GridSpec::DEFAULT_CELLS; 2]);
        let mut spec = GridSpec::with_defaults(sys, j, half_width, n_cells)?;
        if let Some(dt) = self.dt {
            spec.dt = dt;
        }
        if let Some(tol) = self.stationarity_tol {
            spec.stationarity_tol = tol;
        }
        if let Some(m) = self.max_steps {
            spec.max_steps = m;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Radius of the drift-free optimal ellipse at `ρ = (J/Tr(RP))²`, times three.
pub fn auto_half_width(sys: &ResetSystem, j: f64) -> Result<f64> {
    check_system(sys)?;
    check_j(j)?;
    let sol = solve_riccati_like(&sys.q, &sys.r)?;
    let rho = (j / (&sys.r * &sol.p).trace()).powi(2);
    let (p_min, _) = sym_eig_range(&sol.p);
    Ok(3.0 * (2.0 * rho.sqrt() / p_min).sqrt())
}

fn check_system(sys: &ResetSystem) -> Result<()> {
    if sys.dim() != 2 {
        return Err(Error::Dimension(format!(
            "the grid solver needs a planar system, got n = {}",
            sys.dim()
        )));
    }
    require_pd(&sys.q, "Q")?;
    require_pd(&sys.r, "R")
}

fn check_j(j: f64) -> Result<()> {
    if !(j > 0.0) || !j.is_finite() {
        return Err(Error::Domain(format!("sampling cost J must be positive, got {j}")));
    }
    Ok(())
}

/// Row-compressed discretization of `L[V] = (Ax)·∇V + ½Tr(R∇²V)`.
/// Edge rows are empty; the linear systems replace them by identity rows.
#[derive(Debug, Clone)]
pub struct GridOperator {
    spec: GridSpec,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl GridOperator {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// `L v` for a field stored row-major (`i` along x₁).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|k| self.row(k).map(|(c, a)| a * v[c]).sum()).collect()
    }

    /// `L V` on a grid-shaped field.
    pub fn apply_grid(&self, v: &Array2<f64>) -> Array2<f64> {
        let flat: Vec<f64> = v.iter().copied().collect();
        let nn = self.spec.n_nodes();
        Array2::from_shape_vec((nn[0], nn[1]), self.apply(&flat)).expect("shape matches")
    }

    /// Triplets of `diag(d) − s·L`, with identity rows on the grid edge.
    /// The sparsity pattern does not depend on `d` or `s`.
    fn shifted(&self, diag: impl Fn(usize) -> f64, s: f64) -> Vec<Triplet<usize, usize, f64>> {
        let nn = self.spec.n_nodes();
        let mut out = Vec::with_capacity(self.vals.len() + self.len());
        for i in 0..nn[0] {
            for j in 0..nn[1] {
                let k = self.spec.flat(i, j);
                if self.spec.is_edge(i, j) {
                    out.push(Triplet::new(k, k, 1.0));
                    continue;
                }
                for (c, a) in self.row(k) {
                    let d = if c == k { diag(k) } else { 0.0 };
                    out.push(Triplet::new(k, c, d - s * a));
                }
            }
        }
        out
    }
}

/// Central differences for the drift and the axial second derivatives and
/// the four-corner stencil for the mixed derivative.
pub fn assemble_operator(sys: &ResetSystem, spec: &GridSpec) -> Result<GridOperator> {
    if sys.dim() != 2 {
        return Err(Error::Dimension(format!(
            "the grid solver needs a planar system, got n = {}",
            sys.dim()
        )));
    }
    spec.validate()?;
    let nn = spec.n_nodes();
    let [h1, h2] = spec.dx();
    let (r11, r12, r22) = (sys.r[(0, 0)], 0.5 * (sys.r[(0, 1)] + sys.r[(1, 0)]), sys.r[(1, 1)]);
    let a = &sys.a;

    let mut row_ptr = Vec::with_capacity(nn[0] * nn[1] + 1);
    let mut cols = Vec::with_capacity(9 * nn[0] * nn[1]);
    let mut vals = Vec::with_capacity(9 * nn[0] * nn[1]);
    row_ptr.push(0);
    for i in 0..nn[0] {
        for j in 0..nn[1] {
            if !spec.is_edge(i, j) {
                let [x1, x2] = spec.coord(i, j);
                let b1 = a[(0, 0)] * x1 + a[(0, 1)] * x2;
                let b2 = a[(1, 0)] * x1 + a[(1, 1)] * x2;
                let ax1 = 0.5 * r11 / (h1 * h1);
                let ax2 = 0.5 * r22 / (h2 * h2);
                let cross = r12 / (4.0 * h1 * h2);
                // sorted by column index
                let stencil = [
                    (i - 1, j - 1, cross),
                    (i - 1, j, ax1 - b1 / (2.0 * h1)),
                    (i - 1, j + 1, -cross),
                    (i, j - 1, ax2 - b2 / (2.0 * h2)),
                    (i, j, -2.0 * (ax1 + ax2)),
                    (i, j + 1, ax2 + b2 / (2.0 * h2)),
                    (i + 1, j - 1, -cross),
                    (i + 1, j, ax1 + b1 / (2.0 * h1)),
                    (i + 1, j + 1, cross),
                ];
                for (ii, jj, w) in stencil {
                    cols.push(spec.flat(ii, jj));
                    vals.push(w);
                }
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(GridOperator { spec: spec.clone(), row_ptr, cols, vals })
}

/// Source term `xᵀQx − J` at every node.
fn source(sys: &ResetSystem, spec: &GridSpec, j: f64) -> Vec<f64> {
    let nn = spec.n_nodes();
    let q = &sys.q;
    let mut g = Vec::with_capacity(nn[0] * nn[1]);
    for i in 0..nn[0] {
        for jj in 0..nn[1] {
            let [x1, x2] = spec.coord(i, jj);
            g.push(q[(0, 0)] * x1 * x1 + 2.0 * q[(0, 1)] * x1 * x2 + q[(1, 1)] * x2 * x2 - j);
        }
    }
    g
}

fn to_sparse(n: usize, triplets: &[Triplet<usize, usize, f64>]) -> Result<SparseColMat<usize, f64>> {
    SparseColMat::try_new_from_triplets(n, n, triplets).map_err(|e| Error::Factorization(format!("{e:?}")))
}

/// Pseudo-time iteration with the implicit matrix factored once.
pub struct StefanStepper {
    spec: GridSpec,
    g: Vec<f64>,
    lu: Lu<usize, f64>,
    v: Vec<f64>,
    steps: usize,
}

impl StefanStepper {
    /// Starts from `V₀ = 0`.
    pub fn new(sys: &ResetSystem, j: f64, spec: &GridSpec) -> Result<Self> {
        check_j(j)?;
        let op = assemble_operator(sys, spec)?;
        Self::from_operator(&op, source(sys, spec, j), None)
    }

    fn from_operator(op: &GridOperator, g: Vec<f64>, v0: Option<Vec<f64>>) -> Result<Self> {
        let n = op.len();
        let mat = to_sparse(n, &op.shifted(|_| 1.0, op.spec.dt))?;
        let lu = mat.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { spec: op.spec.clone(), g, lu, v: v0.unwrap_or_else(|| vec![0.0; n]), steps: 0 })
    }

    /// One BTCS step followed by the clamp; returns `max|ΔV|/dt`.
    pub fn step(&mut self) -> Result<f64> {
        let dt = self.spec.dt;
        let nn = self.spec.n_nodes();
        let mut rhs = Mat::<f64>::zeros(self.v.len(), 1);
        for i in 0..nn[0] {
            for j in 0..nn[1] {
                let k = self.spec.flat(i, j);
                if !self.spec.is_edge(i, j) {
                    rhs[(k, 0)] = self.v[k] + dt * self.g[k];
                }
            }
        }
        self.lu.solve_in_place(rhs.as_mut());
        let mut change = 0.0f64;
        for k in 0..self.v.len() {
            let w = rhs[(k, 0)];
            if !w.is_finite() {
                return Err(Error::NonFiniteValue);
            }
            let next = w.min(0.0);
            change = change.max((next - self.v[k]).abs());
            self.v[k] = next;
        }
        self.steps += 1;
        Ok(change / dt)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> Array2<f64> {
        let nn = self.spec.n_nodes();
        Array2::from_shape_vec((nn[0], nn[1]), self.v.clone()).expect("shape matches")
    }

    /// Steps until `max|ΔV|/dt < tol`, counting against `max_steps`.
    fn run(&mut self) -> Result<()> {
        let mut rate = f64::INFINITY;
        while self.steps < self.spec.max_steps {
            rate = self.step()?;
            if rate < self.spec.stationarity_tol {
                return Ok(());
            }
        }
        Err(Error::NotStationary { steps: self.steps, rate })
    }
}

/// How the stationary point of the pseudo-time iteration is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStrategy {
    /// Plain BTCS stepping with the clamp.
    PseudoTime,
    /// Solve directly for the fixed point of the clamped step by iterating on
    /// the clamp pattern, then certify it with BTCS steps.
    #[default]
    ActiveSet,
}

/// Converged value function on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunctionGrid {
    pub spec: GridSpec,
    pub v: Array2<f64>,
    pub omega_mask: Array2<bool>,
    pub j: f64,
    pub rho_effective: f64,
    /// Pseudo-time steps spent certifying stationarity.
    pub steps: usize,
    phi: Array2<f64>,
}

impl ValueFunctionGrid {
    /// Values above `−τ` are treated as zero.
    pub fn zero_tolerance(&self) -> f64 {
        1e-12 * self.j.max(self.rho_effective)
    }

    /// Distance-like field negative inside Ω whose zero level is ∂Ω; see
    /// [`extract_boundary`].
    pub fn boundary_field(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn omega_size(&self) -> usize {
        self.omega_mask.iter().filter(|&&m| m).count()
    }

    /// Bilinear interpolation of V; `None` outside the domain.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        self.bilinear(&self.v, x)
    }

    fn bilinear(&self, v: &Array2<f64>, x: &[f64]) -> Option<f64> {
        let [w1, w2] = self.spec.half_width;
        if x.len() != 2 || !(x[0].abs() <= w1 && x[1].abs() <= w2) {
            return None;
        }
        let [h1, h2] = self.spec.dx();
        let [c1, c2] = self.spec.n_cells;
        let s1 = (x[0] + w1) / h1;
        let s2 = (x[1] + w2) / h2;
        let i = (s1.floor() as usize).min(c1 - 1);
        let j = (s2.floor() as usize).min(c2 - 1);
        let (t1, t2) = (s1 - i as f64, s2 - j as f64);
        Some(
            (1.0 - t1) * (1.0 - t2) * v[[i, j]]
                + t1 * (1.0 - t2) * v[[i + 1, j]]
                + (1.0 - t1) * t2 * v[[i, j + 1]]
                + t1 * t2 * v[[i + 1, j + 1]],
        )
    }

    /// Builds a grid from stored values, re-deriving the mask and ρ.
    pub fn from_values(spec: GridSpec, v: Array2<f64>, j: f64) -> Result<Self> {
        spec.validate()?;
        let nn = spec.n_nodes();
        if v.dim() != (nn[0], nn[1]) {
            return Err(Error::InvalidGrid(format!(
                "value array is {:?}, expected {:?}",
                v.dim(),
                (nn[0], nn[1])
            )));
        }
        let (oi, oj) = spec.origin();
        let rho_effective = -v[[oi, oj]];
        let omega_mask = v.mapv(|x| x < 0.0);
        let phi = contour::boundary_field(&v, &omega_mask);
        Ok(Self { spec, v, omega_mask, j, rho_effective, steps: 0, phi })
    }
}

/// Stationary clamped solution for fixed sampling cost `J`.
pub fn stefan_solve(sys: &ResetSystem, j: f64, spec: &GridSpec) -> Result<ValueFunctionGrid> {
    stefan_solve_with(sys, j, spec, SolveStrategy::default())
}

pub fn stefan_solve_with(
    sys: &ResetSystem,
    j: f64,
    spec: &GridSpec,
    strategy: SolveStrategy,
) -> Result<ValueFunctionGrid> {
    check_j(j)?;
    let op = assemble_operator(sys, spec)?;
    let g = source(sys, spec, j);
    let start = match strategy {
        SolveStrategy::PseudoTime => None,
        SolveStrategy::ActiveSet => active_set_fixed_point(&op, &g)?,
    };
    let mut stepper = StefanStepper::from_operator(&op, g, start)?;
    stepper.run()?;
    finish(stepper, j)
}

/// Fixed point `u` of the clamped step: `(I − dt L)u = min(u, 0) + dt·g`.
/// Returns `None` when the clamp pattern cycles.
fn active_set_fixed_point(op: &GridOperator, g: &[f64]) -> Result<Option<Vec<f64>>> {
    let spec = &op.spec;
    let n = op.len();
    let dt = spec.dt;
    let nn = spec.n_nodes();
    let mut free: Vec<bool> = (0..n).map(|k| g[k] < 0.0).collect();
    let mut seen = HashSet::new();
    let mut symbolic: Option<SymbolicLu<usize>> = None;

    for _ in 0..200 {
        if !seen.insert(free.clone()) {
            return Ok(None);
        }
        let mat = to_sparse(n, &op.shifted(|k| if free[k] { 0.0 } else { 1.0 }, dt))?;
        let sym = match &symbolic {
            Some(s) => s.clone(),
            None => {
                let s = SymbolicLu::try_new(mat.symbolic())
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?;
                symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(sym, mat.as_ref())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let mut u = Mat::<f64>::zeros(n, 1);
        for i in 0..nn[0] {
            for j in 0..nn[1] {
                if !spec.is_edge(i, j) {
                    let k = spec.flat(i, j);
                    u[(k, 0)] = dt * g[k];
                }
            }
        }
        lu.solve_in_place(u.as_mut());
        let u: Vec<f64> = (0..n).map(|k| u[(k, 0)]).collect();
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        let next: Vec<bool> = u.iter().map(|&x| x < 0.0).collect();
        if next == free {
            return Ok(Some(u.into_iter().map(|x| x.min(0.0)).collect()));
        }
        free = next;
    }
    Ok(None)
}

fn finish(stepper: StefanStepper, j: f64) -> Result<ValueFunctionGrid> {
    let spec = stepper.spec.clone();
    let steps = stepper.steps;
    let mut v = stepper.values();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let (oi, oj) = spec.origin();
    let rho_effective = -v[[oi, oj]];
    let tau = 1e-12 * j.max(rho_effective);
    v.mapv_inplace(|x| if x > -tau { 0.0 } else { x });
    let omega_mask = v.mapv(|x| x < 0.0);

    let [c1, c2] = spec.n_cells;
    let touches =
        omega_mask.indexed_iter().any(|((i, j), &m)| m && (i <= 1 || j <= 1 || i + 1 >= c1 || j + 1 >= c2));
    if touches {
        return Err(Error::OmegaTouchesBoundary);
    }
    let phi = contour::boundary_field(&v, &omega_mask);
    Ok(ValueFunctionGrid { spec, v, omega_mask, j, rho_effective, steps, phi })
}

/// Fires when the state is on or outside ∂Ω (the zero level of the boundary
/// field, interpolated bilinearly) or outside the domain.
pub fn grid_trigger(x: &[f64], grid: &ValueFunctionGrid) -> bool {
    match grid.bilinear(&grid.phi, x) {
        None => true,
        Some(phi) => phi >= -1e-12 * (1.0 + grid.rho_effective.sqrt()),
    }
}
