//! Method-of-lines reduction of
//!
//! ```text
//! D_t^α u = u_xx - c(x) u + f(x, t),   x ∈ (a, b), 0 < t ≤ T,
//! σ0 u(a) + β0 u_x(a) = 0,   σ1 u(b) + β1 u_x(b) = 0,   u(x, 0) = u0(x)
//! ```
//!
//! to a Caputo system `D^α y = A y + Ψ⁻¹F(t)` for the coefficients of
//! `u_N(x, t) = Σ_k y_k(t) φ_k(x)`, by collocation at the zeros of `T*_{N+1}`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::fhbvm::VectorField;
use crate::polycore::Interval;
use crate::rmcp1::{build_basis, collocation_points, Rmcp1Basis, RobinBC};

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Largest accepted condition number of the collocation matrix `Ψ`.
pub const DEFAULT_COND_LIMIT: f64 = 1e13;

/// A time-fractional reaction-diffusion problem with Robin boundary conditions.
#[derive(Clone)]
pub struct TfrdeProblem {
    pub iv: Interval,
    pub t_final: f64,
    pub alpha: f64,
    pub bc: RobinBC,
    pub c: SpaceFn,
    pub f: SpaceTimeFn,
    pub u0: SpaceFn,
    pub exact: Option<SpaceTimeFn>,
}

impl fmt::Debug for TfrdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TfrdeProblem")
            .field("iv", &self.iv)
            .field("t_final", &self.t_final)
            .field("alpha", &self.alpha)
            .field("bc", &self.bc)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl TfrdeProblem {
    pub fn new(
        iv: Interval,
        t_final: f64,
        alpha: f64,
        bc: RobinBC,
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        u0: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let c: SpaceFn = Arc::new(c);
        // c ≥ 0 on a sample grid
        for i in 0..=64 {
            let x = iv.a() + iv.length() * i as f64 / 64.0;
            let cx = c(x);
            if !(cx >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "reaction coefficient c({x}) = {cx} is negative"
                )));
            }
        }
        Ok(Self {
            iv,
            t_final,
            alpha,
            bc,
            c,
            f: Arc::new(f),
            u0: Arc::new(u0),
            exact: None,
        })
    }

    pub fn with_exact(mut self, exact: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        self.alpha = alpha;
        Ok(self)
    }
}

/// Assembled semi-discrete system; immutable after [`assemble`].
#[derive(Clone)]
pub struct SemiDiscreteSystem {
    problem: TfrdeProblem,
    basis: Rmcp1Basis,
    nodes: Vec<f64>,
    psi: DMatrix<f64>,
    psi_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    psi_cond: f64,
    lambda: DMatrix<f64>,
    c_diag: DVector<f64>,
    a: DMatrix<f64>,
    y0: DVector<f64>,
}

impl fmt::Debug for SemiDiscreteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemiDiscreteSystem")
            .field("degree", &self.basis.degree())
            .field("psi_cond", &self.psi_cond)
            .finish_non_exhaustive()
    }
}

/// Collocates the problem with `φ_0..φ_N`.
pub fn assemble(p: &TfrdeProblem, n: usize) -> Result<SemiDiscreteSystem> {
    assemble_with_limit(p, n, DEFAULT_COND_LIMIT)
}

/// [`assemble`] with a custom bound on the condition number of `Ψ`.
pub fn assemble_with_limit(
    p: &TfrdeProblem,
    n: usize,
    cond_limit: f64,
) -> Result<SemiDiscreteSystem> {
    let basis = build_basis(n, &p.bc, &p.iv)?;
    let nodes = collocation_points(n, &p.iv);
    let dim = n + 1;
    let psi = DMatrix::from_fn(dim, dim, |k, j| basis.phi(j).eval(nodes[k]));

    let sv = psi.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let psi_cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    log::debug!("collocation matrix N={n}: condition estimate {psi_cond:.3e}");
    if !(psi_cond <= cond_limit) {
        return Err(Error::IllConditionedCollocation {
            cond: psi_cond,
            limit: cond_limit,
        });
    }
    let psi_lu = psi.clone().lu();

    let op = basis.operational_matrix(2)?;
    let mut lambda = DMatrix::zeros(dim, dim);
    for (k, &x) in nodes.iter().enumerate() {
        lambda.row_mut(k).copy_from(&op.eta(x).transpose());
    }
    let c_diag = DVector::from_iterator(dim, nodes.iter().map(|&x| (p.c)(x)));

    let mut rhs = lambda.clone();
    for k in 0..dim {
        let ck = c_diag[k];
        for j in 0..dim {
            rhs[(k, j)] -= ck * psi[(k, j)];
        }
    }
    let solved = psi_lu.solve(&rhs).ok_or(Error::IllConditionedCollocation {
        cond: f64::INFINITY,
        limit: cond_limit,
    })?;
    let a = op.hm().transpose() + solved;

    let u0 = DVector::from_iterator(dim, nodes.iter().map(|&x| (p.u0)(x)));
    let y0 = psi_lu.solve(&u0).expect("Ψ already factored");

    Ok(SemiDiscreteSystem {
        problem: p.clone(),
        basis,
        nodes,
        psi,
        psi_lu,
        psi_cond,
        lambda,
        c_diag,
        a,
        y0,
    })
}

impl SemiDiscreteSystem {
    pub fn problem(&self) -> &TfrdeProblem {
        &self.problem
    }

    pub fn basis(&self) -> &Rmcp1Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Collocation points `x_0 > x_1 > ... > x_N`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `Ψ_{kj} = φ_j(x_k)`.
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn psi_condition(&self) -> f64 {
        self.psi_cond
    }

    /// `Λ_{kj} = η_j^(2)(x_k)`.
    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Diagonal of `C_N`.
    pub fn c_diag(&self) -> &DVector<f64> {
        &self.c_diag
    }

    /// `A = (H²)ᵀ + Ψ⁻¹Λ - Ψ⁻¹C_NΨ`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    /// `Ψ⁻¹F(t)` with `F_k(t) = f(x_k, t)`.
    pub fn forcing(&self, t: f64) -> DVector<f64> {
        let f = DVector::from_iterator(
            self.dim(),
            self.nodes.iter().map(|&x| (self.problem.f)(x, t)),
        );
        self.psi_lu.solve(&f).expect("Ψ already factored")
    }

    /// `g(t, y) = A y + Ψ⁻¹F(t)`.
    pub fn vector_field(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        &self.a * y + self.forcing(t)
    }

    /// The (constant) Jacobian `A` of [`SemiDiscreteSystem::vector_field`].
    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `u_N(x) = Σ_k y_k φ_k(x)`.
    pub fn reconstruct(&self, y: &DVector<f64>, x: f64) -> f64 {
        self.basis.eval_all(x).dot(y)
    }

    /// `∂_x u_N(x)`.
    pub fn reconstruct_dx(&self, y: &DVector<f64>, x: f64) -> f64 {
        self.basis.eval_deriv_all(x).dot(y)
    }

    /// PDE residual at `x` for coefficients `y` whose Caputo derivative is `dy`:
    /// `Φ(x)·dy - u_N''(x) + c(x) u_N(x) - f(x, t)`.
    pub fn residual(&self, y: &DVector<f64>, dy: &DVector<f64>, x: f64, t: f64) -> f64 {
        let phi = self.basis.eval_all(x);
        let d2: f64 = (0..self.dim())
            .map(|k| self.basis.dphi(k).diff().eval(x) * y[k])
            .sum();
        phi.dot(dy) - d2 + (self.problem.c)(x) * phi.dot(y) - (self.problem.f)(x, t)
    }
}

impl VectorField for SemiDiscreteSystem {
    fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn eval(&self, t: f64, y: &DVector<f64>) -> DVector<f64> {
        self.vector_field(t, y)
    }

    fn jacobian(&self, _t: f64, _y: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn linear_part(&self) -> Option<&DMatrix<f64>> {
        Some(&self.a)
    }

    fn offset(&self, t: f64) -> DVector<f64> {
        self.forcing(t)
    }
}
