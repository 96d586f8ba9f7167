//! FHBVM(k, s) for `D^α y = g(t, y)`, `y(0) = y0`, on a [`MixedMesh`].
//!
//! On each step the vector field is replaced by its truncated expansion in the
//! orthonormal `α`-Jacobi basis, `g ≈ Σ_{μ<s} P_μ(c) γ_μ`, with the coefficients
//! `γ_μ` approximated by the `k`-point Gauss-Jacobi rule. The history of all
//! previous steps enters through the memory term
//! `φ_n(c) = y0 + Σ_{p<n} h_p^α Σ_μ J_μ^α(x_{p,n}(c)) γ_μ^p`,
//! and the current step through `h_n^α Σ_μ I^αP_μ(c) γ_μ^n`.
//!
//! Coefficients of one step are stored as a `d × s` matrix `Γ` (column `μ` is `γ_μ`),
//! stage values as `d × k` matrices (column `l` at `c_l`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::special::gamma;
use crate::timegrid::{MixedMesh, Step, StepKind};
use crate::weighted_jacobi::{build_tables, FhbvmTables};

/// Right-hand side `g(t, y)` of a Caputo system.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn eval(&self, t: f64, y: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, t: f64, y: &DVector<f64>) -> DMatrix<f64>;

    /// `A` when `g(t, y) = A y + b(t)`; lets the solver reuse `b` and the factored
    /// iteration matrix across iterations and steps.
    fn linear_part(&self) -> Option<&DMatrix<f64>> {
        None
    }

    /// `b(t)` for affine fields.
    fn offset(&self, t: f64) -> DVector<f64> {
        self.eval(t, &DVector::zeros(self.dim()))
    }
}

/// Scalar or vector field given by a closure plus its Jacobian.
pub struct FnField<F, J> {
    dim: usize,
    f: F,
    jac: J,
}

impl<F, J> FnField<F, J>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    J: Fn(f64, &DVector<f64>) -> DMatrix<f64>,
{
    pub fn new(dim: usize, f: F, jac: J) -> Self {
        Self { dim, f, jac }
    }
}

impl<F, J> VectorField for FnField<F, J>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
    J: Fn(f64, &DVector<f64>) -> DMatrix<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, y)
    }

    fn jacobian(&self, t: f64, y: &DVector<f64>) -> DMatrix<f64> {
        (self.jac)(t, y)
    }
}

/// `g(t, y) = A y + b(t)`.
pub struct AffineField<B> {
    a: DMatrix<f64>,
    b: B,
}

impl<B: Fn(f64) -> DVector<f64>> AffineField<B> {
    pub fn new(a: DMatrix<f64>, b: B) -> Self {
        assert!(a.is_square(), "affine field needs a square matrix");
        Self { a, b }
    }
}

impl<B: Fn(f64) -> DVector<f64>> VectorField for AffineField<B> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y + (self.b)(t)
    }

    fn jacobian(&self, _t: f64, _y: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn linear_part(&self) -> Option<&DMatrix<f64>> {
        Some(&self.a)
    }

    fn offset(&self, t: f64) -> DVector<f64> {
        (self.b)(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub k: usize,
    pub s: usize,
    /// fixed-point iteration when `h^α‖g0'‖‖𝒫ᵀΩ‖‖ℐ‖ ≤ switch_tol`, blended otherwise
    pub switch_tol: f64,
    pub iter_atol: f64,
    pub iter_rtol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 22,
            s: 22,
            switch_tol: 0.1,
            iter_atol: 1e-14,
            iter_rtol: 1e-12,
            max_iters: 100,
        }
    }
}

impl SolverConfig {
    pub fn with_ks(k: usize, s: usize) -> Self {
        Self {
            k,
            s,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.k < self.s {
            return Err(Error::InvalidParameter(format!(
                "need k >= s >= 1 (k={}, s={})",
                self.k, self.s
            )));
        }
        if !(self.switch_tol > 0.0 && self.switch_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "switch_tol must lie in (0, 1), got {}",
                self.switch_tol
            )));
        }
        if !(self.iter_atol >= 0.0 && self.iter_rtol >= 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "inner tolerances must be >= 0 and max_iters >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IterationKind {
    FixedPoint,
    Blended,
}

impl IterationKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed-point",
            Self::Blended => "blended",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepStats {
    pub kind: IterationKind,
    pub iterations: usize,
    /// `‖Δγ‖∞` after each iteration
    pub increments: Vec<f64>,
}

/// The `s` coefficient blocks of one step, as a `d × s` matrix.
pub type StageCoefficients = DMatrix<f64>;

/// Step-by-step integrator; history is append-only.
pub struct Integrator<'a, F: VectorField + ?Sized> {
    field: &'a F,
    tables: Arc<FhbvmTables>,
    config: SolverConfig,
    y0: DVector<f64>,
    gammas: Vec<StageCoefficients>,
    node_values: Vec<DVector<f64>>,
    stats: Vec<StepStats>,
    h_alpha: Vec<f64>,
    norm_pto_is: f64,
    const_jac_norm: Option<f64>,
    blended_cache: Option<(u64, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    xinv_t: DMatrix<f64>,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl<'a, F: VectorField + ?Sized> Integrator<'a, F> {
    pub fn new(
        field: &'a F,
        tables: Arc<FhbvmTables>,
        config: SolverConfig,
        y0: DVector<f64>,
    ) -> Result<Self> {
        config.validate()?;
        if config.k != tables.k() || config.s != tables.s() {
            return Err(Error::InvalidParameter(format!(
                "tables built for (k, s) = ({}, {}), config asks for ({}, {})",
                tables.k(),
                tables.s(),
                config.k,
                config.s
            )));
        }
        if y0.len() != field.dim() {
            return Err(Error::InvalidParameter(format!(
                "initial value has length {}, field dimension is {}",
                y0.len(),
                field.dim()
            )));
        }
        let alpha = tables.alpha();
        let h_alpha = tables.mesh().steps().map(|st| st.h.powf(alpha)).collect();
        let norm_pto_is = inf_norm(tables.pto()) * inf_norm(tables.is_alpha());
        let const_jac_norm = field.linear_part().map(inf_norm);
        let xinv_t = tables
            .xs_alpha()
            .clone()
            .try_inverse()
            .ok_or(Error::ZeroEigenvalue)?
            .transpose();
        Ok(Self {
            field,
            tables,
            config,
            y0,
            gammas: Vec::new(),
            node_values: Vec::new(),
            stats: Vec::new(),
            h_alpha,
            norm_pto_is,
            const_jac_norm,
            blended_cache: None,
            xinv_t,
        })
    }

    pub fn tables(&self) -> &FhbvmTables {
        &self.tables
    }

    pub fn mesh(&self) -> &MixedMesh {
        self.tables.mesh()
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    /// Number of completed steps.
    pub fn completed(&self) -> usize {
        self.gammas.len()
    }

    pub fn coefficients(&self) -> &[StageCoefficients] {
        &self.gammas
    }

    pub fn node_values(&self) -> &[DVector<f64>] {
        &self.node_values
    }

    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    fn require_history(&self, n: usize) -> Result<()> {
        if n >= self.mesh().num_steps() {
            return Err(Error::InvalidParameter(format!(
                "step {n} is beyond the mesh"
            )));
        }
        if self.gammas.len() < n {
            return Err(Error::MissingHistory { step: n });
        }
        Ok(())
    }

    /// Memory term at every Gauss abscissa and at `c = 1` (`d × (k+1)`), from the tables.
    pub fn memory_nodes(&self, n: usize) -> Result<DMatrix<f64>> {
        self.require_history(n)?;
        let k = self.tables.k();
        let mut phi = DMatrix::from_fn(self.y0.len(), k + 1, |i, _| self.y0[i]);
        for p in 0..n {
            let (family, row) = self.tables.slot(p, n).expect("past step precedes current");
            let jmat = self.tables.family(family).row_matrix(row);
            phi.gemm(self.h_alpha[p], &self.gammas[p], &jmat, 1.0);
        }
        Ok(phi)
    }

    /// Memory term of step `n` at an arbitrary `c ∈ [0, 1]`, with `J` computed on demand.
    pub fn memory(&self, n: usize, c: f64) -> Result<DVector<f64>> {
        self.require_history(n)?;
        memory_on_demand(&self.tables, &self.y0, &self.gammas, &self.h_alpha, n, c)
    }

    /// Memory term of graded step `i` (1-based).
    pub fn memory_graded(&self, i: usize, c: f64) -> Result<DVector<f64>> {
        if i == 0 || i > self.mesh().v() {
            return Err(Error::InvalidParameter(format!(
                "graded step {i} out of 1..={}",
                self.mesh().v()
            )));
        }
        self.memory(i - 1, c)
    }

    /// Memory term of uniform step `j` (`m+1 ≤ j ≤ M`).
    pub fn memory_uniform(&self, j: usize, c: f64) -> Result<DVector<f64>> {
        let mesh = self.mesh();
        if j <= mesh.m() || j > mesh.big_m() {
            return Err(Error::InvalidParameter(format!(
                "uniform step {j} out of {}..={}",
                mesh.m() + 1,
                mesh.big_m()
            )));
        }
        self.memory(mesh.v() + j - mesh.m() - 1, c)
    }

    fn stage_times(&self, step: &Step) -> Vec<f64> {
        self.tables
            .rule()
            .nodes()
            .iter()
            .map(|&c| step.t_start + c * step.h)
            .collect()
    }

    /// `G_l = g(t_l, Y_l)` for all stages.
    fn eval_stages(
        &self,
        times: &[f64],
        offsets: Option<&DMatrix<f64>>,
        y: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        match (self.field.linear_part(), offsets) {
            (Some(a), Some(b)) => a * y + b,
            _ => {
                let mut g = DMatrix::zeros(y.nrows(), y.ncols());
                for (l, &t) in times.iter().enumerate() {
                    let col = self.field.eval(t, &y.column(l).into_owned());
                    g.column_mut(l).copy_from(&col);
                }
                g
            }
        }
    }

    /// Solves the stage equation of step `n`; does not modify the history.
    pub fn solve_stage(&mut self, n: usize) -> Result<(StageCoefficients, StepStats)> {
        let phi_all = self.memory_nodes(n)?;
        let k = self.tables.k();
        let phi = phi_all.columns(0, k).into_owned();
        self.solve_stage_with(n, &phi)
    }

    fn solve_stage_with(
        &mut self,
        n: usize,
        phi: &DMatrix<f64>,
    ) -> Result<(StageCoefficients, StepStats)> {
        let step = self.mesh().step(n);
        let ha = self.h_alpha[n];
        let (d, s) = (self.y0.len(), self.tables.s());
        let times = self.stage_times(&step);
        let offsets = self.field.linear_part().map(|_| {
            let mut b = DMatrix::zeros(d, times.len());
            for (l, &t) in times.iter().enumerate() {
                b.column_mut(l).copy_from(&self.field.offset(t));
            }
            b
        });
        let omega_p = self.tables.pto().transpose();
        let is_t = self.tables.is_alpha().transpose();

        // g0' at the first memory entry
        let (jac_norm, jac) = match self.const_jac_norm {
            Some(norm) => (norm, None),
            None => {
                let j = self.field.jacobian(times[0], &phi.column(0).into_owned());
                (inf_norm(&j), Some(j))
            }
        };
        let kind = if ha * jac_norm * self.norm_pto_is <= self.config.switch_tol {
            IterationKind::FixedPoint
        } else {
            IterationKind::Blended
        };

        let rho = self.tables.rho_s();
        let lu = match kind {
            IterationKind::Blended => Some(self.blended_factor(step.h, ha, rho, jac)?),
            IterationKind::FixedPoint => None,
        };

        let stage_residual = |gamma: &DMatrix<f64>| -> DMatrix<f64> {
            let y = phi + gamma * &is_t * ha;
            self.eval_stages(&times, offsets.as_ref(), &y) * &omega_p
        };

        let mut gamma = DMatrix::zeros(d, s);
        let mut increments = Vec::new();
        match kind {
            IterationKind::FixedPoint => {
                for _ in 0..self.config.max_iters {
                    let next = stage_residual(&gamma);
                    let delta = (&next - &gamma).amax();
                    gamma = next;
                    increments.push(delta);
                    if self.converged(delta, &gamma) {
                        break;
                    }
                }
            }
            IterationKind::Blended => {
                let lu = lu.expect("factored above");
                for _ in 0..self.config.max_iters {
                    let theta1 = stage_residual(&gamma) - &gamma;
                    let theta2 = &theta1 * &self.xinv_t * rho;
                    let u = lu
                        .solve(&(&theta1 - &theta2))
                        .ok_or(Error::SingularIterationMatrix { step: n })?;
                    let delta = lu
                        .solve(&(theta2 + u))
                        .ok_or(Error::SingularIterationMatrix { step: n })?;
                    gamma += &delta;
                    let dn = delta.amax();
                    increments.push(dn);
                    if self.converged(dn, &gamma) {
                        break;
                    }
                }
            }
        }
        let last = increments.last().copied().unwrap_or(0.0);
        if !self.converged(last, &gamma) || gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                step: n,
                method: kind.name(),
                residual: last,
            });
        }
        let stats = StepStats {
            kind,
            iterations: increments.len(),
            increments,
        };
        Ok((gamma, stats))
    }

    fn converged(&self, delta: f64, gamma: &DMatrix<f64>) -> bool {
        delta
            <= self
                .config
                .iter_atol
                .max(self.config.iter_rtol * gamma.amax())
    }

    /// LU of `I - h^α ρ g0'`, reused while `h` and a constant Jacobian stay the same.
    fn blended_factor(
        &mut self,
        h: f64,
        ha: f64,
        rho: f64,
        jac: Option<DMatrix<f64>>,
    ) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let key = h.to_bits();
        if jac.is_none() {
            if let Some((cached, lu)) = &self.blended_cache {
                if *cached == key {
                    return Ok(lu.clone());
                }
            }
        }
        let g0 = match jac {
            Some(j) => j,
            None => self.field.linear_part().expect("constant Jacobian").clone(),
        };
        let d = g0.nrows();
        let m = DMatrix::<f64>::identity(d, d) - g0 * (ha * rho);
        let lu = m.lu();
        if self.field.linear_part().is_some() {
            self.blended_cache = Some((key, lu.clone()));
        }
        Ok(lu)
    }

    /// Node value `y_{n+1} = φ_n(1) + h_n^α γ_0 / Γ(α+1)`; appends step `n` to the history.
    pub fn advance(
        &mut self,
        n: usize,
        gamma: StageCoefficients,
        memory_at_one: &DVector<f64>,
    ) -> DVector<f64> {
        assert_eq!(n, self.gammas.len(), "steps must be appended in order");
        let y = memory_at_one
            + gamma.column(0) * (self.h_alpha[n] / gamma_fn_alpha1(self.tables.alpha()));
        self.gammas.push(gamma);
        self.node_values.push(y.clone());
        y
    }

    /// Solves and appends the next step.
    pub fn step(&mut self) -> Result<DVector<f64>> {
        let n = self.gammas.len();
        let phi_all = self.memory_nodes(n)?;
        let k = self.tables.k();
        let phi = phi_all.columns(0, k).into_owned();
        let (gamma, stats) = self.solve_stage_with(n, &phi)?;
        log::trace!("step {n}: {} x{}", stats.kind.name(), stats.iterations);
        self.stats.push(stats);
        let at_one = phi_all.column(k).into_owned();
        Ok(self.advance(n, gamma, &at_one))
    }

    /// `‖Y - φ - h^α G(Y) (ℐ𝒫ᵀΩ)ᵀ‖∞` for coefficients `gamma` of step `n`.
    pub fn rk_stage_check(&self, n: usize, gamma: &StageCoefficients) -> Result<f64> {
        let phi_all = self.memory_nodes(n)?;
        let k = self.tables.k();
        let phi = phi_all.columns(0, k).into_owned();
        let step = self.mesh().step(n);
        let ha = self.h_alpha[n];
        let times = self.stage_times(&step);
        let y = &phi + gamma * self.tables.is_alpha().transpose() * ha;
        let g = self.eval_stages(&times, None, &y);
        let res = &y - &phi - g * self.tables.butcher().transpose() * ha;
        Ok(res.amax())
    }

    pub fn finish(self) -> DenseSolution {
        DenseSolution {
            tables: self.tables,
            y0: self.y0,
            gammas: self.gammas,
            node_values: self.node_values,
            stats: self.stats,
            h_alpha: self.h_alpha,
        }
    }
}

fn gamma_fn_alpha1(alpha: f64) -> f64 {
    gamma(alpha + 1.0)
}

fn memory_on_demand(
    tables: &FhbvmTables,
    y0: &DVector<f64>,
    gammas: &[StageCoefficients],
    h_alpha: &[f64],
    n: usize,
    c: f64,
) -> Result<DVector<f64>> {
    let mesh = tables.mesh();
    let ints = tables.integrals();
    let mut out = y0.clone();
    let mut j = DVector::zeros(tables.s());
    for p in 0..n {
        ints.j_offset_into(mesh.memory_offset(p, n, c), j.as_mut_slice());
        out.gemv(h_alpha[p], &gammas[p], &j, 1.0);
    }
    Ok(out)
}

/// Builds the tables for `(α, mesh, k, s)` and integrates over the whole mesh.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    alpha: f64,
    mesh: &MixedMesh,
    config: &SolverConfig,
    y0: DVector<f64>,
) -> Result<DenseSolution> {
    config.validate()?;
    let tables = Arc::new(build_tables(alpha, config.k, config.s, mesh)?);
    integrate_with_tables(field, tables, config, y0)
}

/// [`integrate`] with precomputed tables.
pub fn integrate_with_tables<F: VectorField + ?Sized>(
    field: &F,
    tables: Arc<FhbvmTables>,
    config: &SolverConfig,
    y0: DVector<f64>,
) -> Result<DenseSolution> {
    let mut it = Integrator::new(field, tables, config.clone(), y0)?;
    for _ in 0..it.mesh().num_steps() {
        it.step()?;
    }
    Ok(it.finish())
}

/// Completed integration: stage coefficients of every step plus node values.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    tables: Arc<FhbvmTables>,
    y0: DVector<f64>,
    gammas: Vec<StageCoefficients>,
    node_values: Vec<DVector<f64>>,
    stats: Vec<StepStats>,
    h_alpha: Vec<f64>,
}

impl DenseSolution {
    pub fn mesh(&self) -> &MixedMesh {
        self.tables.mesh()
    }

    pub fn tables(&self) -> &FhbvmTables {
        &self.tables
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn coefficients(&self) -> &[StageCoefficients] {
        &self.gammas
    }

    /// Values at node times `t_1..t_end` (`node_values()[n]` is at `mesh().node_time(n+1)`).
    pub fn node_values(&self) -> &[DVector<f64>] {
        &self.node_values
    }

    /// Value at `mesh().node_time(n)`, including `n = 0`.
    pub fn node_value(&self, n: usize) -> &DVector<f64> {
        if n == 0 {
            &self.y0
        } else {
            &self.node_values[n - 1]
        }
    }

    pub fn final_value(&self) -> &DVector<f64> {
        self.node_values.last().unwrap_or(&self.y0)
    }

    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    /// `(fixed-point steps, blended steps)`.
    pub fn iteration_counts(&self) -> (usize, usize) {
        let fp = self
            .stats
            .iter()
            .filter(|s| s.kind == IterationKind::FixedPoint)
            .count();
        (fp, self.stats.len() - fp)
    }

    /// `σ(t) = φ_n(c) + h_n^α Σ_μ I^αP_μ(c) γ_μ^n` for the step containing `t`.
    pub fn dense_eval(&self, t: f64) -> Result<DVector<f64>> {
        let (n, c) = self.mesh().locate(t)?;
        if t == 0.0 {
            return Ok(self.y0.clone());
        }
        let mut out = memory_on_demand(&self.tables, &self.y0, &self.gammas, &self.h_alpha, n, c)?;
        let ia = self.tables.integrals().frac_int(c);
        let iv = DVector::from_vec(ia);
        out.gemv(self.h_alpha[n], &self.gammas[n], &iv, 1.0);
        Ok(out)
    }

    /// Which step kind step `n` belongs to.
    pub fn step_kind(&self, n: usize) -> StepKind {
        self.mesh().step(n).kind
    }
}
