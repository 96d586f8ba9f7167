//! Benchmark problems, error norms, sweeps and the text formats the command-line
//! tool reads and writes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fhbvm::{integrate, DenseSolution, IterationKind, SolverConfig};
use crate::mlf::mittag_leffler1;
use crate::polycore::Interval;
use crate::rmcp1::RobinBC;
use crate::spacedisc::{assemble, SemiDiscreteSystem, TfrdeProblem};
use crate::special::gamma;
use crate::timegrid::MixedMesh;
use crate::weighted_jacobi::gauss_legendre;

pub const PROBLEMS: [&str; 3] = ["example1", "example2", "example3"];

fn ml(alpha: f64, z: f64) -> f64 {
    mittag_leffler1(alpha, z).expect("Mittag-Leffler argument inside the supported range")
}

/// One of the three reference problems at fractional order `alpha`, final time `t_final`.
pub fn problem(id: &str, alpha: f64, t_final: f64) -> Result<TfrdeProblem> {
    match id {
        "example1" => {
            // u = x²(1-x)² e^x t^{α+2}, c = 2x + 1, u(0) - 2u'(0) = 0, u(1) + 2u'(1) = 0
            let iv = Interval::new(0.0, 1.0)?;
            let bc = RobinBC::new(1.0, 1.0, -2.0, 2.0)?;
            let g3 = gamma(alpha + 3.0);
            let f = move |x: f64, t: f64| {
                let p = x * x * (1.0 - x) * (1.0 - x);
                // (p e^x)'' = e^x (x⁴ + 6x³ + x² - 8x + 2)
                let p2 = x.powi(4) + 6.0 * x.powi(3) + x * x - 8.0 * x + 2.0;
                x.exp() * t * t * (0.5 * g3 * p - (p2 - (2.0 * x + 1.0) * p) * t.powf(alpha))
            };
            let p = TfrdeProblem::new(iv, t_final, alpha, bc, |x| 2.0 * x + 1.0, f, |_| 0.0)?;
            Ok(p.with_exact(move |x, t| {
                x * x * (1.0 - x) * (1.0 - x) * x.exp() * t.powf(alpha + 2.0)
            }))
        }
        "example2" => {
            // u = -0.05 E_α(-t^α) sin x on (π/4, 3π/4), c = x - π/4
            let iv = Interval::new(PI / 4.0, 3.0 * PI / 4.0)?;
            let bc = RobinBC::new(1.0, 1.0, -1.0, 1.0)?;
            let f =
                move |x: f64, t: f64| -0.05 * ml(alpha, -t.powf(alpha)) * (x - PI / 4.0) * x.sin();
            let p = TfrdeProblem::new(
                iv,
                t_final,
                alpha,
                bc,
                |x| x - PI / 4.0,
                f,
                |x| -0.05 * x.sin(),
            )?;
            Ok(p.with_exact(move |x, t| -0.05 * ml(alpha, -t.powf(alpha)) * x.sin()))
        }
        "example3" => {
            // u = t² sin(2πx), homogeneous Dirichlet, c = 0
            let iv = Interval::new(0.0, 1.0)?;
            let g = gamma(3.0 - alpha);
            let f = move |x: f64, t: f64| {
                (2.0 * PI * x).sin() * (2.0 / g * t.powf(2.0 - alpha) + 4.0 * PI * PI * t * t)
            };
            let p = TfrdeProblem::new(
                iv,
                t_final,
                alpha,
                RobinBC::dirichlet(),
                |_| 0.0,
                f,
                |_| 0.0,
            )?;
            Ok(p.with_exact(|x, t| t * t * (2.0 * PI * x).sin()))
        }
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// Parameters of one benchmark run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub alpha: f64,
    pub n: usize,
    pub t_final: f64,
    pub big_m: usize,
    pub m: usize,
    pub v: usize,
    pub k: usize,
    pub s: usize,
    pub switch_tol: f64,
    /// CSV file receiving one row per case
    pub out: Option<PathBuf>,
    /// surface data `x t u_num u_exact abs_err`
    pub grid: Option<PathBuf>,
    /// write `seconds = 0` so that repeated runs give identical files
    pub no_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "example1".into(),
            alpha: 0.5,
            n: 10,
            t_final: 1.0,
            big_m: 6,
            m: 1,
            v: 1,
            k: 22,
            s: 22,
            switch_tol: 0.1,
            out: None,
            grid: None,
            no_timing: false,
        }
    }
}

impl RunConfig {
    pub fn mesh(&self) -> Result<MixedMesh> {
        MixedMesh::build(self.t_final, self.big_m, self.m, self.v)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            k: self.k,
            s: self.s,
            switch_tol: self.switch_tol,
            ..SolverConfig::default()
        }
    }

    /// Applies one `key = value` setting (keys as in the CLI flags).
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("invalid value `{v}` for `{key}`"))
        }
        match key {
            "problem" => self.problem = value.to_string(),
            "alpha" => self.alpha = num(key, value)?,
            "N" => self.n = num(key, value)?,
            "T" => self.t_final = num(key, value)?,
            "M" => self.big_m = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "v" => self.v = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "s" => self.s = num(key, value)?,
            "switch_tol" => self.switch_tol = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "grid" => self.grid = Some(PathBuf::from(value)),
            "no_timing" => self.no_timing = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Reads a flat `key = value` file (`#` starts a comment) on top of `self`.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|msg| Error::Parse { line: i + 1, msg })?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_config_text(&text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// max over collocation nodes and mesh node times
    pub e_inf: f64,
    /// space-time L² error by tensor Gauss quadrature
    pub e_2: f64,
    /// `(t_n, max_k |u - u_N|)` at each node time
    pub profile: Vec<(f64, f64)>,
    /// largest error seen at the quadrature points used for `e_2` (diagnostic)
    pub dense_max: f64,
    pub seconds: f64,
    pub fixed_point_steps: usize,
    pub blended_steps: usize,
    /// method and iteration count per step
    pub iterations: Vec<(IterationKind, usize)>,
}

/// `e_inf`, `e_2`, per-node profile and the largest error at the `e_2` quadrature points.
#[derive(Clone, Debug, PartialEq)]
pub struct Norms {
    pub e_inf: f64,
    pub e_2: f64,
    pub profile: Vec<(f64, f64)>,
    pub dense_max: f64,
}

/// Error norms of `u_num(x, t)` against the problem's exact solution.
///
/// `u_num` receives a time and a set of abscissae and returns the values there.
pub fn error_norms_with(
    p: &TfrdeProblem,
    xs_nodes: &[f64],
    mesh: &MixedMesh,
    time_points: usize,
    space_points: usize,
    mut u_num: impl FnMut(f64, &[f64]) -> Result<Vec<f64>>,
) -> Result<Norms> {
    let exact = p.exact.clone().ok_or(Error::MissingExactSolution)?;
    let mut e_inf = 0.0f64;
    let mut profile = Vec::with_capacity(mesh.num_steps() + 1);
    for t in mesh.node_times() {
        let u = u_num(t, xs_nodes)?;
        let err = xs_nodes
            .iter()
            .zip(&u)
            .map(|(&x, &un)| (exact(x, t) - un).abs())
            .fold(0.0, f64::max);
        e_inf = e_inf.max(err);
        profile.push((t, err));
    }

    let gt = gauss_legendre(time_points);
    let gx = gauss_legendre(space_points);
    let (a, len) = (p.iv.a(), p.iv.length());
    let xq: Vec<f64> = gx.nodes().iter().map(|&u| a + len * u).collect();
    let mut sum = 0.0;
    let mut dense_max = 0.0f64;
    for step in mesh.steps() {
        for (&ct, &wt) in gt.nodes().iter().zip(gt.weights()) {
            let t = step.t_start + ct * step.h;
            let u = u_num(t, &xq)?;
            for ((&x, &wx), &un) in xq.iter().zip(gx.weights()).zip(&u) {
                let e = exact(x, t) - un;
                dense_max = dense_max.max(e.abs());
                sum += wt * step.h * wx * len * e * e;
            }
        }
    }
    Ok(Norms {
        e_inf,
        e_2: sum.sqrt(),
        profile,
        dense_max,
    })
}

/// [`ErrorReport`] of an integrated semi-discrete system (timing left at 0).
pub fn error_norms(
    sol: &DenseSolution,
    sys: &SemiDiscreteSystem,
    p: &TfrdeProblem,
) -> Result<ErrorReport> {
    let s = sol.tables().s();
    let n = sys.dim() - 1;
    let Norms {
        e_inf,
        e_2,
        profile,
        dense_max,
    } = error_norms_with(
        p,
        sys.nodes(),
        sol.mesh(),
        2 * s,
        (2 * n).max(2),
        |t, xs| {
            let y = sol.dense_eval(t)?;
            Ok(xs.iter().map(|&x| sys.reconstruct(&y, x)).collect())
        },
    )?;
    let (fixed_point_steps, blended_steps) = sol.iteration_counts();
    Ok(ErrorReport {
        e_inf,
        e_2,
        profile,
        dense_max,
        seconds: 0.0,
        fixed_point_steps,
        blended_steps,
        iterations: sol
            .stats()
            .iter()
            .map(|st| (st.kind, st.iterations))
            .collect(),
    })
}

/// Largest `|u_N|` over collocation nodes and node times against
/// `‖u0‖∞ + T^α M_f / Γ(1+α)`, with `M_f = max |f|` sampled on a grid.
pub fn sanity_bound(sol: &DenseSolution, sys: &SemiDiscreteSystem, p: &TfrdeProblem) -> bool {
    let (a, len, tf) = (p.iv.a(), p.iv.length(), p.t_final);
    let grid = 100;
    let mut mf = 0.0f64;
    let mut m0 = 0.0f64;
    for i in 0..=grid {
        let x = a + len * i as f64 / grid as f64;
        m0 = m0.max((p.u0)(x).abs());
        for j in 0..=grid {
            let t = tf * j as f64 / grid as f64;
            mf = mf.max((p.f)(x, t).abs());
        }
    }
    let bound = m0 + tf.powf(p.alpha) * mf / gamma(1.0 + p.alpha);
    let mut lhs = 0.0f64;
    for n in 0..=sol.mesh().num_steps() {
        let y = sol.node_value(n);
        for &x in sys.nodes() {
            lhs = lhs.max(sys.reconstruct(y, x).abs());
        }
    }
    lhs <= bound + 1e-6 * bound.max(1.0)
}

/// Everything one case produces.
#[derive(Debug)]
pub struct CaseResult {
    pub config: RunConfig,
    pub report: ErrorReport,
    pub solution: DenseSolution,
    pub system: SemiDiscreteSystem,
    pub problem: TfrdeProblem,
}

/// Assemble, integrate and measure one configuration; writes the grid file if requested.
pub fn run_case(cfg: &RunConfig) -> Result<CaseResult> {
    let p = problem(&cfg.problem, cfg.alpha, cfg.t_final)?;
    run_problem(cfg, p)
}

/// [`run_case`] for a caller-supplied problem.
pub fn run_problem(cfg: &RunConfig, p: TfrdeProblem) -> Result<CaseResult> {
    let start = Instant::now();
    let sys = assemble(&p, cfg.n)?;
    let mesh = cfg.mesh()?;
    let sol = integrate(&sys, p.alpha, &mesh, &cfg.solver(), sys.y0().clone())?;
    let seconds = start.elapsed().as_secs_f64();
    let mut report = error_norms(&sol, &sys, &p)?;
    report.seconds = if cfg.no_timing { 0.0 } else { seconds };
    log::info!(
        "{} alpha={} N={} M={} m={} v={}: e_inf={:.3e} e_2={:.3e} ({:.2}s)",
        cfg.problem,
        cfg.alpha,
        cfg.n,
        cfg.big_m,
        cfg.m,
        cfg.v,
        report.e_inf,
        report.e_2,
        seconds
    );
    let result = CaseResult {
        config: cfg.clone(),
        report,
        solution: sol,
        system: sys,
        problem: p,
    };
    if let Some(path) = &cfg.grid {
        write_atomic(path, &grid_text(&result, 41)?)?;
    }
    Ok(result)
}

/// Runs `cfg` once per spatial degree.
pub fn sweep_spatial(cfg: &RunConfig, n_list: &[usize]) -> Result<Vec<CaseResult>> {
    n_list
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.n = n;
            c.grid = None;
            run_case(&c)
        })
        .collect()
}

/// Runs `cfg` once per number of uniform steps `M`.
pub fn sweep_time(cfg: &RunConfig, m_list: &[usize]) -> Result<Vec<CaseResult>> {
    m_list
        .iter()
        .map(|&big_m| {
            let mut c = cfg.clone();
            c.big_m = big_m;
            c.grid = None;
            run_case(&c)
        })
        .collect()
}

pub const CSV_HEADER: &str =
    "problem,alpha,N,M,m,v,k,s,e_inf,e_2,seconds,fixed_point_steps,blended_steps";

pub fn csv_row(cfg: &RunConfig, r: &ErrorReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{:.16e},{:.16e},{:.16e},{},{}",
        cfg.problem,
        cfg.alpha,
        cfg.n,
        cfg.big_m,
        cfg.m,
        cfg.v,
        cfg.k,
        cfg.s,
        r.e_inf,
        r.e_2,
        r.seconds,
        r.fixed_point_steps,
        r.blended_steps
    )
}

/// Header plus one row per case.
pub fn csv_table(cases: &[CaseResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cases {
        out.push_str(&csv_row(&c.config, &c.report));
        out.push('\n');
    }
    out
}

/// `x t u_num u_exact abs_err` on `nx` equispaced abscissae times every node time.
pub fn grid_text(case: &CaseResult, nx: usize) -> Result<String> {
    let p = &case.problem;
    let exact = p.exact.clone().ok_or(Error::MissingExactSolution)?;
    let mut out = String::from("# x t u_num u_exact abs_err\n");
    let nx = nx.max(2);
    for n in 0..=case.solution.mesh().num_steps() {
        let t = case.solution.mesh().node_time(n);
        let y = case.solution.node_value(n);
        for i in 0..nx {
            let x = p.iv.a() + p.iv.length() * i as f64 / (nx - 1) as f64;
            let un = case.system.reconstruct(y, x);
            let ue = exact(x, t);
            let _ = writeln!(
                out,
                "{x:.16e} {t:.16e} {un:.16e} {ue:.16e} {:.16e}",
                (un - ue).abs()
            );
        }
    }
    Ok(out)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Coefficient vector of the exact solution at time `t` (interpolated at the nodes).
pub fn exact_coefficients(sys: &SemiDiscreteSystem, t: f64) -> Result<DVector<f64>> {
    let exact = sys
        .problem()
        .exact
        .clone()
        .ok_or(Error::MissingExactSolution)?;
    let u = DVector::from_iterator(sys.dim(), sys.nodes().iter().map(|&x| exact(x, t)));
    sys.psi()
        .clone()
        .lu()
        .solve(&u)
        .ok_or(Error::IllConditionedCollocation {
            cond: f64::INFINITY,
            limit: crate::spacedisc::DEFAULT_COND_LIMIT,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solutions_at_sample_points() {
        let p1 = problem("example1", 0.37, 1.0).unwrap();
        let e1 = p1.exact.as_ref().unwrap()(0.5, 1.0);
        assert!((e1 - 0.0625 * 0.5f64.exp()).abs() < 1e-15);
        assert!((e1 - 0.10304507942).abs() < 1e-10);
        let p3 = problem("example3", 0.5, 1.0).unwrap();
        for x in [0.1, 0.4, 0.9] {
            assert_eq!(p3.exact.as_ref().unwrap()(x, 0.0), 0.0);
        }
        let p2 = problem("example2", 0.5, 1.0).unwrap();
        assert!((p2.exact.as_ref().unwrap()(PI / 2.0, 0.0) + 0.05).abs() < 1e-16);
        assert!(matches!(
            problem("example4", 0.5, 1.0),
            Err(Error::UnknownProblem(_))
        ));
    }

    #[test]
    fn forcing_matches_the_exact_solution() {
        // D^α u - u_xx + c u at a few points, with D^α of t^β by the power rule
        let alpha = 0.6;
        let p = problem("example1", alpha, 1.0).unwrap();
        for (x, t) in [(0.2, 0.5), (0.7, 0.9)] {
            let e = 1e-4;
            let u = |x: f64| p.exact.as_ref().unwrap()(x, t);
            let uxx = (u(x + e) - 2.0 * u(x) + u(x - e)) / (e * e);
            let space = x * x * (1.0 - x) * (1.0 - x) * f64::exp(x);
            let dt = space * gamma(alpha + 3.0) / gamma(3.0) * t * t;
            let want = dt - uxx + (2.0 * x + 1.0) * u(x);
            assert!(((p.f)(x, t) - want).abs() < 1e-6);
        }
        let p = problem("example3", alpha, 1.0).unwrap();
        let (x, t) = (0.3f64, 0.8f64);
        let want = (2.0 * PI * x).sin()
            * (2.0 / gamma(3.0 - alpha) * t.powf(2.0 - alpha) + 4.0 * PI * PI * t * t);
        assert_eq!((p.f)(x, t), want);
    }

    #[test]
    fn exact_solution_has_zero_error() {
        let p = problem("example3", 0.5, 1.0).unwrap();
        let mesh = MixedMesh::build(1.0, 3, 1, 2).unwrap();
        let xs = [0.1, 0.5, 0.8];
        let ex = p.exact.clone().unwrap();
        let norms = error_norms_with(&p, &xs, &mesh, 4, 4, |t, xs| {
            Ok(xs.iter().map(|&x| ex(x, t)).collect())
        })
        .unwrap();
        assert_eq!((norms.e_inf, norms.e_2), (0.0, 0.0));
        assert_eq!(norms.profile.len(), mesh.num_steps() + 1);
    }

    #[test]
    fn zero_problem_gives_zero_error() {
        let iv = Interval::new(0.0, 1.0).unwrap();
        let bc = RobinBC::new(1.0, 1.0, -2.0, 2.0).unwrap();
        let p = TfrdeProblem::new(iv, 1.0, 0.5, bc, |x| 2.0 * x + 1.0, |_, _| 0.0, |_| 0.0)
            .unwrap()
            .with_exact(|_, _| 0.0);
        let cfg = RunConfig {
            n: 6,
            big_m: 3,
            k: 8,
            s: 6,
            ..RunConfig::default()
        };
        let case = run_problem(&cfg, p).unwrap();
        assert_eq!(case.report.e_inf, 0.0);
        assert_eq!(case.report.e_2, 0.0);
        assert!(sanity_bound(&case.solution, &case.system, &case.problem));
    }

    #[test]
    fn config_text_parsing() {
        let mut cfg = RunConfig::default();
        cfg.apply_config_text(
            "# comment\nproblem = example2\nalpha=0.1\nN = 8 # trailing\n\nM=100\nv=15\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, "example2");
        assert_eq!((cfg.alpha, cfg.n, cfg.big_m, cfg.v), (0.1, 8, 100, 15));
        let err = cfg.apply_config_text("alpha = 0.5\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(cfg.apply_config_text("N = ten").is_err());
        assert!(cfg.apply_config_text("colour = red").is_err());
    }

    #[test]
    fn csv_rows_are_deterministic() {
        let cfg = RunConfig {
            problem: "example3".into(),
            n: 5,
            big_m: 2,
            k: 8,
            s: 6,
            no_timing: true,
            ..RunConfig::default()
        };
        let a = csv_table(&[run_case(&cfg).unwrap()]);
        let b = csv_table(&[run_case(&cfg).unwrap()]);
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        let row = a.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), 13);
        assert!(row.starts_with("example3,0.5,5,2,1,1,8,6,"));
    }

    #[test]
    fn grid_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("surface.txt");
        let cfg = RunConfig {
            problem: "example3".into(),
            n: 5,
            big_m: 2,
            k: 6,
            s: 4,
            grid: Some(path.clone()),
            ..RunConfig::default()
        };
        run_case(&cfg).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 41 * 3);
        for r in rows {
            let v: Vec<f64> = r.split_whitespace().map(|s| s.parse().unwrap()).collect();
            assert_eq!(v.len(), 5);
            assert!((v[4] - (v[2] - v[3]).abs()).abs() < 1e-15);
        }
    }
}
