//! Orthonormal Jacobi polynomials for the weight `ω(x) = α (1 - x)^{α-1}` on `[0, 1]`,
//! their Gauss rule, and the fractional integrals the time stepper needs.
//!
//! Two integrals of a basis polynomial show up in the scheme:
//!
//! * the Riemann-Liouville integral `I^α P_μ(c) = (1/Γ(α)) ∫_0^c (c - τ)^{α-1} P_μ(τ) dτ`,
//! * the memory kernel `J_μ^α(x) = (1/Γ(α)) ∫_0^1 (x - τ)^{α-1} P_μ(τ) dτ`, `x ≥ 1`.
//!
//! Substituting `τ = c t` in the first one turns the kernel into `ω` itself, so the
//! `k`-point Gauss rule evaluates it exactly for `μ ≤ 2k - 1`:
//! `I^α P_μ(c) = c^α / Γ(α+1) · Σ_i b_i P_μ(c c_i)`.
//! Writing `J_μ^α(x) = I^α P_μ(x) - (RL integral over [1, x])` gives an equally exact
//! formula, used when `x` is close to 1. Farther away the polynomial grows too fast
//! outside `[0, 1]` for that difference to be accurate, and `J` is computed with
//! composite Gauss-Legendre panels that shrink geometrically towards the kernel's
//! near-singularity at `τ = 1`.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};

use crate::error::{Error, Result};
use crate::special::gamma;
use crate::timegrid::{MixedMesh, StepKind};

/// Recurrence of an orthonormal family on `[0, 1]` with unit total mass:
/// `b_{n+1} P_{n+1} = (x - a_n) P_n - b_n P_{n-1}`, `P_0 = 1`.
#[derive(Clone, Debug)]
struct Recurrence {
    diag: Vec<f64>,
    /// `off[n] = b_{n+1}`
    off: Vec<f64>,
}

impl Recurrence {
    /// Weight `∝ (1 - x)^ea x^eb`, first `n` coefficient pairs.
    fn jacobi(ea: f64, eb: f64, n: usize) -> Self {
        let ab = ea + eb;
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n);
        for k in 0..n {
            let kf = k as f64;
            // monic coefficients on [-1, 1], parameters (ea, eb)
            let alpha_k = if k == 0 {
                (eb - ea) / (ab + 2.0)
            } else {
                (eb * eb - ea * ea) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            let n1 = kf + 1.0;
            let t = 2.0 * n1 + ab;
            let beta_next =
                4.0 * n1 * (n1 + ea) * (n1 + eb) * (n1 + ab) / (t * t * (t + 1.0) * (t - 1.0));
            diag.push(0.5 * (1.0 + alpha_k));
            off.push(0.5 * beta_next.sqrt());
        }
        Self { diag, off }
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    /// Fills `out[0..len]` with `P_0(x)..P_{len-1}(x)`.
    fn eval_into(&self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        let mut prev = 0.0;
        for n in 1..out.len() {
            let next = ((x - self.diag[n - 1]) * out[n - 1]
                - if n >= 2 { self.off[n - 2] * prev } else { 0.0 })
                / self.off[n - 1];
            prev = out[n - 1];
            out[n] = next;
        }
    }

    /// `(P_n(x), P_n'(x))`.
    fn eval_with_deriv(&self, n: usize, x: f64) -> (f64, f64) {
        let (mut p0, mut p1) = (0.0, 1.0);
        let (mut d0, mut d1) = (0.0, 0.0);
        for k in 0..n {
            let bk = if k == 0 { 0.0 } else { self.off[k - 1] };
            let p2 = ((x - self.diag[k]) * p1 - bk * p0) / self.off[k];
            let d2 = (p1 + (x - self.diag[k]) * d1 - bk * d0) / self.off[k];
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
        }
        (p1, d1)
    }

    /// Golub-Welsch nodes polished by Newton on `P_k`, Christoffel weights.
    fn gauss(&self, k: usize) -> Result<QuadratureRule> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidParameter(format!(
                "Gauss rule with {k} points needs 1 <= k <= {}",
                self.len()
            )));
        }
        let jm = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                self.diag[i]
            } else if i == j + 1 {
                self.off[j]
            } else if j == i + 1 {
                self.off[i]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(jm, 1e-15, 10_000)
            .ok_or_else(|| Error::EigenSolver("tridiagonal Jacobi matrix".into()))?;
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = self.eval_with_deriv(k, *x);
                if dp == 0.0 {
                    break;
                }
                let step = p / dp;
                let cand = *x - step;
                let (pc, _) = self.eval_with_deriv(k, cand);
                if pc.abs() < p.abs() {
                    *x = cand;
                } else {
                    break;
                }
            }
        }
        let mut buf = vec![0.0; k];
        let weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                self.eval_into(x, &mut buf);
                1.0 / buf.iter().map(|p| p * p).sum::<f64>()
            })
            .collect();
        Ok(QuadratureRule { nodes, weights })
    }
}

/// Gauss nodes and weights on `[0, 1]`, weights summing to the weight's mass (1).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ b_i f(c_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `n`-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    Recurrence::jacobi(0.0, 0.0, n)
        .gauss(n)
        .expect("Legendre rule")
}

/// The orthonormal family `P_0..P_max` for `ω(x) = α (1 - x)^{α-1}`.
#[derive(Clone, Debug)]
pub struct AlphaJacobiBasis {
    alpha: f64,
    rec: Recurrence,
}

/// Three-term recurrence for the `α`-weighted orthonormal polynomials up to `max_degree`.
pub fn build_basis(alpha: f64, max_degree: usize) -> Result<AlphaJacobiBasis> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(AlphaJacobiBasis {
        alpha,
        rec: Recurrence::jacobi(alpha - 1.0, 0.0, max_degree + 1),
    })
}

impl AlphaJacobiBasis {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn max_degree(&self) -> usize {
        self.rec.len() - 1
    }

    /// `P_0(x)..P_{out.len()-1}(x)`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        assert!(
            out.len() <= self.rec.len(),
            "degree above the basis maximum"
        );
        self.rec.eval_into(x, out);
    }

    pub fn eval(&self, mu: usize, x: f64) -> f64 {
        let mut buf = vec![0.0; mu + 1];
        self.eval_into(x, &mut buf);
        buf[mu]
    }

    /// `(a_n, b_{n+1})` recurrence coefficients.
    pub fn recurrence(&self, n: usize) -> (f64, f64) {
        (self.rec.diag[n], self.rec.off[n])
    }

    /// The `k`-point Gauss-Jacobi rule (nodes are the zeros of `P_k`).
    pub fn gauss_rule(&self, k: usize) -> Result<QuadratureRule> {
        self.rec.gauss(k)
    }
}

/// Default offset `x - 1` below which `J` uses the exact Gauss-Jacobi difference formula.
pub const DEFAULT_J_SWITCH: f64 = 1.0 / 256.0;
const PANEL_POINTS: usize = 30;

/// Evaluator for `I^α P_μ` and `J_μ^α` over `μ = 0..s`.
#[derive(Clone, Debug)]
pub struct JacobiIntegrals {
    basis: AlphaJacobiBasis,
    rule: QuadratureRule,
    legendre: QuadratureRule,
    switch: f64,
    s: usize,
    gamma_alpha: f64,
    gamma_alpha1: f64,
}

impl JacobiIntegrals {
    /// Integrals of `P_0..P_{s-1}` using the `k`-point Gauss-Jacobi rule (`2k - 1 ≥ s - 1`).
    pub fn new(alpha: f64, k: usize, s: usize) -> Result<Self> {
        if s == 0 || 2 * k < s {
            return Err(Error::InvalidParameter(format!(
                "need s >= 1 and 2k - 1 >= s - 1 (k={k}, s={s})"
            )));
        }
        let basis = build_basis(alpha, k.max(s))?;
        let rule = basis.gauss_rule(k)?;
        Ok(Self {
            basis,
            rule,
            legendre: gauss_legendre(PANEL_POINTS),
            switch: DEFAULT_J_SWITCH,
            s,
            gamma_alpha: gamma(alpha),
            gamma_alpha1: gamma(alpha + 1.0),
        })
    }

    /// Offset `x - 1` at which `J` switches from the exact formula to panels.
    pub fn with_switch(mut self, switch: f64) -> Self {
        self.switch = switch;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.basis.alpha
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn basis(&self) -> &AlphaJacobiBasis {
        &self.basis
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `I^α P_μ(c)` for `μ = 0..s`, written to `out`.
    pub fn frac_int_into(&self, c: f64, out: &mut [f64]) {
        let s = out.len();
        out.fill(0.0);
        if c == 0.0 {
            return;
        }
        let mut p = vec![0.0; s];
        for (&ci, &bi) in self.rule.nodes.iter().zip(&self.rule.weights) {
            self.basis.eval_into(c * ci, &mut p);
            for (o, pm) in out.iter_mut().zip(&p) {
                *o += bi * pm;
            }
        }
        let f = c.powf(self.alpha()) / self.gamma_alpha1;
        out.iter_mut().for_each(|o| *o *= f);
    }

    pub fn frac_int(&self, c: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.s];
        self.frac_int_into(c, &mut out);
        out
    }

    /// `J_μ^α(1 + d)` for `μ = 0..out.len()`, `d ≥ 0`.
    pub fn j_offset_into(&self, d: f64, out: &mut [f64]) {
        if d == 0.0 {
            out.fill(0.0);
            if let Some(o) = out.first_mut() {
                *o = 1.0 / self.gamma_alpha1;
            }
        } else if d < self.switch {
            self.j_exact_into(d, out);
        } else {
            self.j_panels_into(d, out);
        }
    }

    /// `J_μ^α(x)` for `x ≥ 1`, all `μ < s`.
    pub fn j_values(&self, x: f64) -> Result<Vec<f64>> {
        if !(x >= 1.0) || !x.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "J-function needs x >= 1, got {x}"
            )));
        }
        let mut out = vec![0.0; self.s];
        self.j_offset_into(x - 1.0, &mut out);
        Ok(out)
    }

    /// `[x^α Σ b_i P(x c_i) - d^α Σ b_i P(1 + d c_i)] / Γ(α+1)`; exact, but loses
    /// accuracy as `P_μ` grows outside `[0, 1]`.
    pub fn j_exact_into(&self, d: f64, out: &mut [f64]) {
        let s = out.len();
        let x = 1.0 + d;
        let alpha = self.alpha();
        let (fx, fd) = (x.powf(alpha), d.powf(alpha));
        let mut p = vec![0.0; s];
        let mut q = vec![0.0; s];
        out.fill(0.0);
        for (&ci, &bi) in self.rule.nodes.iter().zip(&self.rule.weights) {
            self.basis.eval_into(x * ci, &mut p);
            self.basis.eval_into(1.0 + d * ci, &mut q);
            for mu in 0..s {
                out[mu] += bi * (fx * p[mu] - fd * q[mu]);
            }
        }
        out.iter_mut().for_each(|o| *o /= self.gamma_alpha1);
    }

    /// Composite Gauss-Legendre in `σ = 1 - τ`; each panel is no longer than its
    /// distance to the kernel singularity at `σ = -d`.
    pub fn j_panels_into(&self, d: f64, out: &mut [f64]) {
        let s = out.len();
        let am1 = self.alpha() - 1.0;
        let mut p = vec![0.0; s];
        out.fill(0.0);
        let mut lo = 0.0f64;
        while lo < 1.0 {
            let hi = (lo + d + lo).min(1.0);
            let len = hi - lo;
            for (&u, &w) in self.legendre.nodes.iter().zip(&self.legendre.weights) {
                let sigma = lo + len * u;
                let kern = w * len * (d + sigma).powf(am1);
                self.basis.eval_into(1.0 - sigma, &mut p);
                for (o, pm) in out.iter_mut().zip(&p) {
                    *o += kern * pm;
                }
            }
            lo = hi;
        }
        out.iter_mut().for_each(|o| *o /= self.gamma_alpha);
    }
}

/// `I^α P_μ(c)`, exact for `μ ≤ 2k - 1` with a `k`-point rule.
pub fn frac_int_p(basis: &AlphaJacobiBasis, rule: &QuadratureRule, mu: usize, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let mut p = vec![0.0; mu + 1];
    let sum: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&ci, &bi)| {
            basis.eval_into(c * ci, &mut p);
            bi * p[mu]
        })
        .sum();
    c.powf(basis.alpha) / gamma(basis.alpha + 1.0) * sum
}

/// `J_μ^α(x)` for `x ≥ 1`.
pub fn j_function(basis: &AlphaJacobiBasis, mu: usize, x: f64) -> Result<f64> {
    let k = (mu / 2 + 1).max(2);
    let ints = JacobiIntegrals::new(basis.alpha, k, mu + 1)?;
    Ok(ints.j_values(x)?[mu])
}

/// `J` values for one table row: `cols × s`, row-major by column.
#[derive(Clone, Debug, PartialEq)]
pub struct JTable {
    rows: usize,
    cols: usize,
    s: usize,
    data: Vec<f64>,
}

impl JTable {
    fn new(rows: usize, cols: usize, s: usize) -> Self {
        Self {
            rows,
            cols,
            s,
            data: vec![0.0; rows * cols * s],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// `J_μ` for `μ = 0..s` at row `row`, column `col` (`col == k` is `c = 1`).
    pub fn get(&self, row: usize, col: usize) -> &[f64] {
        let off = (row * self.cols + col) * self.s;
        &self.data[off..off + self.s]
    }

    /// Row `row` as an `s × cols` matrix (column `col` holds `get(row, col)`).
    pub fn row_matrix(&self, row: usize) -> DMatrixView<'_, f64> {
        let off = row * self.cols * self.s;
        DMatrixView::from_slice(&self.data[off..off + self.cols * self.s], self.s, self.cols)
    }

    fn get_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let off = (row * self.cols + col) * self.s;
        &mut self.data[off..off + self.s]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Which precomputed family a `(past, current)` step pair reads from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JFamily {
    /// graded history, graded current step: lag `i - ι`
    Graded,
    /// uniform history, uniform current step: lag `j - ῑ`
    Uniform,
    /// graded history, uniform current step
    Cross,
}

/// Everything the FHBVM(k, s) stepper precomputes for one `(α, mesh)` pair.
#[derive(Clone, Debug)]
pub struct FhbvmTables {
    k: usize,
    s: usize,
    ints: Arc<JacobiIntegrals>,
    mesh: MixedMesh,
    ps: DMatrix<f64>,
    is_alpha: DMatrix<f64>,
    pto: DMatrix<f64>,
    xs_alpha: DMatrix<f64>,
    rho_s: f64,
    graded: JTable,
    uniform: JTable,
    cross: JTable,
}

/// Precomputes the Gauss rule, `𝒫_s`, `ℐ_s^α`, `X_s^α`, `ρ_s` and every memory-kernel
/// value the mesh will ask for (at the `k` abscissae and at `c = 1`).
pub fn build_tables(alpha: f64, k: usize, s: usize, mesh: &MixedMesh) -> Result<FhbvmTables> {
    if s == 0 || k < s {
        return Err(Error::InvalidParameter(format!(
            "need k >= s >= 1 (k={k}, s={s})"
        )));
    }
    let ints = JacobiIntegrals::new(alpha, k, s)?;
    build_tables_with(Arc::new(ints), k, mesh)
}

fn build_tables_with(
    ints: Arc<JacobiIntegrals>,
    k: usize,
    mesh: &MixedMesh,
) -> Result<FhbvmTables> {
    let s = ints.s;
    let rule = ints.rule.clone();
    let mut buf = vec![0.0; s];
    let mut ps = DMatrix::zeros(k, s);
    let mut is_alpha = DMatrix::zeros(k, s);
    for i in 0..k {
        ints.basis.eval_into(rule.nodes[i], &mut buf);
        for mu in 0..s {
            ps[(i, mu)] = buf[mu];
        }
        ints.frac_int_into(rule.nodes[i], &mut buf);
        for mu in 0..s {
            is_alpha[(i, mu)] = buf[mu];
        }
    }
    let pto = DMatrix::from_fn(s, k, |mu, i| ps[(i, mu)] * rule.weights[i]);
    let xs_alpha = &pto * &is_alpha;
    let rho_s = rho_param(&xs_alpha)?;

    let (v, m, big_m) = (mesh.v(), mesh.m(), mesh.big_m());
    let cols = k + 1;
    let cvals: Vec<f64> = rule
        .nodes
        .iter()
        .copied()
        .chain(std::iter::once(1.0))
        .collect();
    let fill = |table: &mut JTable, pairs: &[(usize, usize)]| {
        for (row, &(p, n)) in pairs.iter().enumerate() {
            for (col, &c) in cvals.iter().enumerate() {
                ints.j_offset_into(mesh.memory_offset(p, n, c), table.get_mut(row, col));
            }
        }
    };
    // graded lags L = 1..v-1  -> (past 0, current L)
    let graded_pairs: Vec<_> = (1..v).map(|lag| (0, lag)).collect();
    // uniform lags L = 1..M-m-1 -> (past v, current v + L)
    let uniform_pairs: Vec<_> = (1..big_m.saturating_sub(m))
        .map(|lag| (v, v + lag))
        .collect();
    // graded step ι-1 = p, uniform j-1 = m..M-1 -> current v + (j-1-m)
    let cross_pairs: Vec<_> = (0..v)
        .flat_map(|p| (0..big_m - m).map(move |q| (p, v + q)))
        .collect();
    let mut graded = JTable::new(graded_pairs.len(), cols, s);
    let mut uniform = JTable::new(uniform_pairs.len(), cols, s);
    let mut cross = JTable::new(cross_pairs.len(), cols, s);
    fill(&mut graded, &graded_pairs);
    fill(&mut uniform, &uniform_pairs);
    fill(&mut cross, &cross_pairs);

    Ok(FhbvmTables {
        k,
        s,
        ints,
        mesh: mesh.clone(),
        ps,
        is_alpha,
        pto,
        xs_alpha,
        rho_s,
        graded,
        uniform,
        cross,
    })
}

impl FhbvmTables {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn alpha(&self) -> f64 {
        self.ints.alpha()
    }

    pub fn mesh(&self) -> &MixedMesh {
        &self.mesh
    }

    pub fn integrals(&self) -> &JacobiIntegrals {
        &self.ints
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.ints.rule
    }

    /// `𝒫_s` (`k × s`, entries `P_μ(c_i)`).
    pub fn ps(&self) -> &DMatrix<f64> {
        &self.ps
    }

    /// `ℐ_s^α` (`k × s`, entries `I^α P_μ(c_i)`).
    pub fn is_alpha(&self) -> &DMatrix<f64> {
        &self.is_alpha
    }

    /// `𝒫_sᵀ Ω` (`s × k`).
    pub fn pto(&self) -> &DMatrix<f64> {
        &self.pto
    }

    /// `X_s^α = 𝒫_sᵀ Ω ℐ_s^α`.
    pub fn xs_alpha(&self) -> &DMatrix<f64> {
        &self.xs_alpha
    }

    pub fn rho_s(&self) -> f64 {
        self.rho_s
    }

    /// Butcher matrix `ℐ_s^α 𝒫_sᵀ Ω` of the equivalent `k`-stage Runge-Kutta method.
    pub fn butcher(&self) -> DMatrix<f64> {
        &self.is_alpha * &self.pto
    }

    pub fn family(&self, family: JFamily) -> &JTable {
        match family {
            JFamily::Graded => &self.graded,
            JFamily::Uniform => &self.uniform,
            JFamily::Cross => &self.cross,
        }
    }

    /// Table slot for the memory contribution of step `past` to step `current`.
    pub fn slot(&self, past: usize, current: usize) -> Option<(JFamily, usize)> {
        let mesh = &self.mesh;
        if past >= current || current >= mesh.num_steps() {
            return None;
        }
        match (mesh.step(past).kind, mesh.step(current).kind) {
            (StepKind::Graded(iota), StepKind::Graded(i)) => Some((JFamily::Graded, i - iota - 1)),
            (StepKind::Uniform(jbar), StepKind::Uniform(j)) => {
                Some((JFamily::Uniform, j - jbar - 1))
            }
            (StepKind::Graded(iota), StepKind::Uniform(j)) => Some((
                JFamily::Cross,
                (iota - 1) * (mesh.big_m() - mesh.m()) + (j - 1 - mesh.m()),
            )),
            (StepKind::Uniform(_), StepKind::Graded(_)) => None,
        }
    }

    /// Precomputed `J_μ` values (`μ = 0..s`) for a step pair at abscissa column `col`.
    pub fn lookup(&self, past: usize, current: usize, col: usize) -> Option<&[f64]> {
        let (family, row) = self.slot(past, current)?;
        Some(self.family(family).get(row, col))
    }

    /// Writes the tables in a line-oriented text format (17 significant digits).
    pub fn dump(&self) -> String {
        let mesh = &self.mesh;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# fhbvm-tables v1 alpha={:.16e} k={} s={} T={:.16e} M={} m={} v={}",
            self.alpha(),
            self.k,
            self.s,
            mesh.t_final(),
            mesh.big_m(),
            mesh.m(),
            mesh.v()
        );
        let rule = self.rule();
        for i in 0..self.k {
            let _ = writeln!(out, "node {i} {:.16e}", rule.nodes[i]);
            let _ = writeln!(out, "weight {i} {:.16e}", rule.weights[i]);
        }
        for i in 0..self.k {
            for mu in 0..self.s {
                let _ = writeln!(out, "P {i} {mu} {:.16e}", self.ps[(i, mu)]);
                let _ = writeln!(out, "I {i} {mu} {:.16e}", self.is_alpha[(i, mu)]);
            }
        }
        for a in 0..self.s {
            for b in 0..self.s {
                let _ = writeln!(out, "X {a} {b} {:.16e}", self.xs_alpha[(a, b)]);
            }
        }
        let _ = writeln!(out, "rho {:.16e}", self.rho_s);
        for (name, table) in [
            ("graded", &self.graded),
            ("uniform", &self.uniform),
            ("cross", &self.cross),
        ] {
            for row in 0..table.rows {
                for col in 0..table.cols {
                    for (mu, val) in table.get(row, col).iter().enumerate() {
                        let _ = writeln!(out, "{name} {row} {col} {mu} {val:.16e}");
                    }
                }
            }
        }
        out
    }

    /// Parses the output of [`FhbvmTables::dump`].
    pub fn load(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
        let header = header
            .strip_prefix("# fhbvm-tables v1")
            .ok_or_else(|| perr(1, "missing `# fhbvm-tables v1` header"))?;
        let mut kv = std::collections::HashMap::new();
        for tok in header.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| perr(1, "bad header token"))?;
            kv.insert(key, val);
        }
        let get = |key: &str| {
            kv.get(key)
                .copied()
                .ok_or_else(|| perr(1, &format!("header lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| perr(1, &format!("bad {key}")))
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| perr(1, &format!("bad {key}")))
        };
        let (alpha, k, s) = (num("alpha")?, int("k")?, int("s")?);
        let mesh = MixedMesh::build(num("T")?, int("M")?, int("m")?, int("v")?)?;
        // rebuild the shapes from scratch, then overwrite every stored value
        let mut tables = build_tables_shapes(alpha, k, s, &mesh)?;
        let mut rule = tables.ints.rule.clone();
        let mut seen = 0usize;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let mut parts = line.split_whitespace();
            let Some(tag) = parts.next() else { continue };
            let fields: Vec<&str> = parts.collect();
            let ix = |i: usize| -> Result<usize> {
                fields
                    .get(i)
                    .and_then(|f| f.parse().ok())
                    .ok_or_else(|| perr(lineno, "bad index"))
            };
            let val = fields
                .last()
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| perr(lineno, "bad value"))?;
            let oob = || perr(lineno, "index out of range");
            match tag {
                "node" => *rule.nodes.get_mut(ix(0)?).ok_or_else(oob)? = val,
                "weight" => *rule.weights.get_mut(ix(0)?).ok_or_else(oob)? = val,
                "P" | "I" | "X" => {
                    let (a, b) = (ix(0)?, ix(1)?);
                    let mat = match tag {
                        "P" => &mut tables.ps,
                        "I" => &mut tables.is_alpha,
                        _ => &mut tables.xs_alpha,
                    };
                    if a >= mat.nrows() || b >= mat.ncols() {
                        return Err(oob());
                    }
                    mat[(a, b)] = val;
                }
                "rho" => tables.rho_s = val,
                "graded" | "uniform" | "cross" => {
                    let table = match tag {
                        "graded" => &mut tables.graded,
                        "uniform" => &mut tables.uniform,
                        _ => &mut tables.cross,
                    };
                    let (row, col, mu) = (ix(0)?, ix(1)?, ix(2)?);
                    if row >= table.rows || col >= table.cols || mu >= table.s {
                        return Err(oob());
                    }
                    table.get_mut(row, col)[mu] = val;
                }
                _ => return Err(perr(lineno, &format!("unknown record `{tag}`"))),
            }
            seen += 1;
        }
        let expected = 2 * k
            + 2 * k * s
            + s * s
            + 1
            + tables.graded.data.len()
            + tables.uniform.data.len()
            + tables.cross.data.len();
        if seen != expected {
            return Err(perr(
                0,
                &format!("expected {expected} records, found {seen}"),
            ));
        }
        let mut ints = (*tables.ints).clone();
        ints.rule = rule;
        tables.ints = Arc::new(ints);
        tables.pto = DMatrix::from_fn(s, k, |mu, i| {
            tables.ps[(i, mu)] * tables.ints.rule.weights[i]
        });
        Ok(tables)
    }

    /// Copy with `P_μ` replaced by `sign[μ]·P_μ` in every table.
    #[cfg(test)]
    pub(crate) fn with_signs(&self, sign: &[f64]) -> Self {
        let mut t = self.clone();
        for mu in 0..self.s {
            t.ps.column_mut(mu).scale_mut(sign[mu]);
            t.is_alpha.column_mut(mu).scale_mut(sign[mu]);
            t.pto.row_mut(mu).scale_mut(sign[mu]);
        }
        for table in [&mut t.graded, &mut t.uniform, &mut t.cross] {
            for chunk in table.data.chunks_mut(self.s) {
                for (v, sg) in chunk.iter_mut().zip(sign) {
                    *v *= sg;
                }
            }
        }
        t.xs_alpha = &t.pto * &t.is_alpha;
        t
    }
}

/// Table skeleton with the right shapes but no J values computed.
fn build_tables_shapes(alpha: f64, k: usize, s: usize, mesh: &MixedMesh) -> Result<FhbvmTables> {
    if s == 0 || k < s {
        return Err(Error::InvalidParameter(format!(
            "need k >= s >= 1 (k={k}, s={s})"
        )));
    }
    let ints = Arc::new(JacobiIntegrals::new(alpha, k, s)?);
    let (v, m, big_m) = (mesh.v(), mesh.m(), mesh.big_m());
    Ok(FhbvmTables {
        k,
        s,
        ints,
        mesh: mesh.clone(),
        ps: DMatrix::zeros(k, s),
        is_alpha: DMatrix::zeros(k, s),
        pto: DMatrix::zeros(s, k),
        xs_alpha: DMatrix::zeros(s, s),
        rho_s: 0.0,
        graded: JTable::new(v - 1, k + 1, s),
        uniform: JTable::new(big_m.saturating_sub(m).saturating_sub(1), k + 1, s),
        cross: JTable::new(v * (big_m - m), k + 1, s),
    })
}

/// `ρ_s = |μ*|`, `μ* = argmin_{μ ∈ σ(X)} max_{λ ∈ σ(X)} |λ - |μ||² / (2|μ||λ|)`.
///
/// Ties go to the smallest modulus.
pub fn rho_param(xs_alpha: &DMatrix<f64>) -> Result<f64> {
    let eigs = xs_alpha.clone().complex_eigenvalues();
    let scale = xs_alpha.amax().max(f64::MIN_POSITIVE);
    if eigs.iter().any(|l| !(l.norm() > 1e-14 * scale)) {
        return Err(Error::ZeroEigenvalue);
    }
    let mut best: Option<(f64, f64)> = None; // (objective, |μ|)
    for mu in eigs.iter() {
        let mm = mu.norm();
        let obj = eigs
            .iter()
            .map(|lam| (lam - mm).norm_sqr() / (2.0 * mm * lam.norm()))
            .fold(0.0, f64::max);
        best = match best {
            None => Some((obj, mm)),
            Some((bo, bm)) => {
                let tie = (obj - bo).abs() <= 1e-12 * bo.abs().max(1e-300);
                if (tie && mm < bm) || (!tie && obj < bo) {
                    Some((obj, mm))
                } else {
                    Some((bo, bm))
                }
            }
        };
    }
    best.map(|(_, m)| m).ok_or(Error::ZeroEigenvalue)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p0_is_one_and_p1_matches_moments() {
        let basis = build_basis(0.5, 10).unwrap();
        for x in [0.0, 0.3, 1.0, 2.5] {
            assert_eq!(basis.eval(0, x), 1.0);
        }
        // mean 1/(α+1), second moment 2/((α+1)(α+2))
        let want = |x: f64| 1.5 * 5f64.sqrt() * (x - 2.0 / 3.0);
        for x in [0.0, 0.25, 0.9] {
            assert!((basis.eval(1, x) - want(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_range() {
        assert!(build_basis(0.0, 3).is_err());
        assert!(build_basis(1.0, 3).is_err());
    }

    fn beta_fn(a: f64, b: f64) -> f64 {
        gamma(a) * gamma(b) / gamma(a + b)
    }

    #[test]
    fn gauss_rule_properties() {
        for alpha in [0.1, 0.5, 0.9] {
            let basis = build_basis(alpha, 30).unwrap();
            let one = basis.gauss_rule(1).unwrap();
            assert!((one.nodes()[0] - 1.0 / (alpha + 1.0)).abs() < 1e-15);
            assert!((one.weights()[0] - 1.0).abs() < 1e-15);
            for k in [2usize, 5, 11, 22] {
                let rule = basis.gauss_rule(k).unwrap();
                assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
                assert!(rule.weights().iter().all(|&w| w > 0.0));
                assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
                assert!(rule.nodes()[0] > 0.0 && rule.nodes()[k - 1] < 1.0);
                let deg = 2 * k - 1;
                let got = rule.integrate(|x| x.powi(deg as i32));
                let want = alpha * beta_fn(deg as f64 + 1.0, alpha);
                assert!(((got - want) / want).abs() < 1e-12, "alpha={alpha} k={k}");
                let (pk, _) = basis.rec.eval_with_deriv(k, rule.nodes()[k / 2]);
                assert!(pk.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orthonormality_under_the_rule() {
        for alpha in [0.1, 0.5, 0.9] {
            let ints = JacobiIntegrals::new(alpha, 22, 22).unwrap();
            let mesh = MixedMesh::uniform(1.0, 2).unwrap();
            let t = build_tables_with(Arc::new(ints), 22, &mesh).unwrap();
            let gram = t.pto() * t.ps();
            let err = (gram - DMatrix::<f64>::identity(22, 22)).amax();
            assert!(err < 1e-12, "alpha={alpha}: {err}");
        }
    }

    #[test]
    fn p3_p5_orthogonal() {
        let basis = build_basis(0.3, 40).unwrap();
        let rule = basis.gauss_rule(40).unwrap();
        let v = rule.integrate(|x| basis.eval(3, x) * basis.eval(5, x));
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let rule = gauss_legendre(12);
        let got = rule.integrate(|x| x.powi(23));
        assert!((got - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn frac_int_examples() {
        let alpha = 0.37;
        let basis = build_basis(alpha, 22).unwrap();
        let rule = basis.gauss_rule(22).unwrap();
        for c in [0.1f64, 0.5, 0.77] {
            let want = c.powf(alpha) / gamma(alpha + 1.0);
            assert!((frac_int_p(&basis, &rule, 0, c) - want).abs() < 1e-15);
        }
        assert!((frac_int_p(&basis, &rule, 0, 1.0) - 1.0 / gamma(alpha + 1.0)).abs() < 1e-15);
        for mu in 1..22 {
            assert!(frac_int_p(&basis, &rule, mu, 1.0).abs() < 1e-14, "mu={mu}");
        }
    }

    #[test]
    fn j_function_simple_cases() {
        let alpha = 0.6;
        let ints = JacobiIntegrals::new(alpha, 22, 22).unwrap();
        let at_one = ints.j_values(1.0).unwrap();
        assert!((at_one[0] - 1.0 / gamma(alpha + 1.0)).abs() < 1e-15);
        assert!(at_one[1..].iter().all(|&v| v == 0.0));
        for x in [1.001, 1.2, 2.0, 7.5, 1e6] {
            let j: f64 = ints.j_values(x).unwrap()[0];
            let want = -x.powf(alpha) * (alpha * (-1.0 / x).ln_1p()).exp_m1() / gamma(alpha + 1.0);
            assert!((j - want).abs() <= 1e-14 * want, "x={x}: {j} vs {want}");
        }
        assert!(ints.j_values(0.5).is_err());
    }

    #[test]
    fn j_branches_agree_on_overlap() {
        for alpha in [0.1, 0.5, 0.9] {
            let ints = JacobiIntegrals::new(alpha, 22, 22).unwrap();
            let (mut a, mut b) = (vec![0.0; 22], vec![0.0; 22]);
            for d in [1e-3, 2e-3, 1.0 / 256.0, 6e-3, 1e-2] {
                ints.j_exact_into(d, &mut a);
                ints.j_panels_into(d, &mut b);
                for mu in 0..22 {
                    let diff = (a[mu] - b[mu]).abs();
                    assert!(
                        diff <= 1e-14_f64.max(1e-9 * b[mu].abs()),
                        "alpha={alpha} d={d} mu={mu}: {} vs {}",
                        a[mu],
                        b[mu]
                    );
                }
            }
            // low degrees: the exact formula stays accurate much farther out
            let (mut a, mut b) = (vec![0.0; 4], vec![0.0; 4]);
            for d in [0.9, 1.0, 1.1] {
                ints.j_exact_into(d, &mut a);
                ints.j_panels_into(d, &mut b);
                for mu in 0..4 {
                    assert!((a[mu] - b[mu]).abs() <= 1e-9 * b[mu].abs().max(1e-5));
                }
            }
        }
    }

    #[test]
    fn j_decays_for_large_arguments() {
        let ints = JacobiIntegrals::new(0.4, 12, 12).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| 2.0 * 1.25f64.powi(i)).collect();
        let vals: Vec<Vec<f64>> = xs.iter().map(|&x| ints.j_values(x).unwrap()).collect();
        for mu in 0..12 {
            for w in vals.windows(2) {
                assert!(w[1][mu].abs() < w[0][mu].abs(), "mu={mu}");
            }
        }
    }

    #[test]
    fn rho_examples() {
        let one = DMatrix::from_row_slice(1, 1, &[-0.7]);
        assert!((rho_param(&one).unwrap() - 0.7).abs() < 1e-15);
        let two = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert!((rho_param(&two).unwrap() - 2.0).abs() < 1e-14);
        let tie = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
        assert!((rho_param(&tie).unwrap() - 1.0).abs() < 1e-14);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(rho_param(&sing), Err(Error::ZeroEigenvalue)));
    }

    #[test]
    fn table_shapes_and_trivial_entries() {
        let mesh = MixedMesh::uniform(1.0, 5).unwrap();
        let t = build_tables(0.5, 4, 3, &mesh).unwrap();
        assert!(t.family(JFamily::Graded).is_empty());
        assert_eq!(t.family(JFamily::Uniform).rows(), 3);
        assert_eq!(t.family(JFamily::Cross).rows(), 4);
        assert_eq!(t.xs_alpha().shape(), (3, 3));
        // s = 1: X = Σ b_i c_i^α / Γ(α+1)
        let t1 = build_tables(0.5, 3, 1, &mesh).unwrap();
        let want: f64 = t1.rule().integrate(|c| c.powf(0.5)) / gamma(1.5);
        assert!((t1.xs_alpha()[(0, 0)] - want).abs() < 1e-15 && want > 0.0);
        assert!((t1.rho_s() - want).abs() < 1e-15);
    }

    #[test]
    fn cross_arguments_never_below_one() {
        let mesh = MixedMesh::build(1.0, 30, 2, 7).unwrap();
        let mut min_d = f64::INFINITY;
        for p in 0..mesh.v() {
            for n in mesh.v()..mesh.num_steps() {
                for c in [0.0, 0.5, 1.0] {
                    min_d = min_d.min(mesh.memory_offset(p, n, c));
                }
            }
        }
        assert_eq!(min_d, 0.0);
    }

    #[test]
    fn dump_load_round_trip() {
        let mesh = MixedMesh::build(1.0, 6, 2, 3).unwrap();
        let t = build_tables(0.3, 5, 4, &mesh).unwrap();
        let text = t.dump();
        let back = FhbvmTables::load(&text).unwrap();
        assert_eq!(back.ps, t.ps);
        assert_eq!(back.is_alpha, t.is_alpha);
        assert_eq!(back.xs_alpha, t.xs_alpha);
        assert_eq!(back.pto, t.pto);
        assert_eq!(back.rho_s, t.rho_s);
        assert_eq!(back.graded, t.graded);
        assert_eq!(back.uniform, t.uniform);
        assert_eq!(back.cross, t.cross);
        assert_eq!(back.rule(), t.rule());
        assert_eq!(back.dump(), text);

        let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(FhbvmTables::load(&truncated).is_err());
        assert!(FhbvmTables::load("garbage").is_err());
    }
}
