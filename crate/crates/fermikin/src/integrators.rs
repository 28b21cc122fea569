//! Two independent time-evolution engines.
//!
//! `integrate_rk4` is a plain explicit integrator applied to any
//! matrix right-hand side. `integrate_picard` is the constructive
//! fixed-point scheme: freeze the diagonal loss/gain operators at the
//! previous iterate, solve the resulting linear equation through the
//! non-hermitian propagator and a Duhamel integral, and repeat until
//! the iterates stop moving. The two agree on smooth scenarios and
//! serve as cross-checks of one another.

use ndarray::Array2;

use crate::core::{
    adjoint, hermitize, offdiag_max, spectral_bounds, sup_norm_diff, C64, DensityMatrix,
    HamiltonianSpec, HermitianOperator, Matrix, RateTable,
};
use crate::generators::{build_a1_from_diag, build_a2_from_diag, transition_bound_m, RelaxationPair};
use crate::{Error, Result};

/// RK4 substeps per grid interval inside the propagator integration.
const PROPAGATOR_SUBSTEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Picard,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrationConfig {
    pub t0: f64,
    pub tf: f64,
    pub dt: f64,
    pub method: Method,
    /// Sup-norm-over-window convergence threshold for the Picard loop.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Window length is window_safety / (4 M).
    pub window_safety: f64,
    pub admissibility_tol: f64,
}

impl IntegrationConfig {
    pub fn new(t0: f64, tf: f64, dt: f64) -> Result<Self> {
        let cfg = IntegrationConfig {
            t0,
            tf,
            dt,
            method: Method::Rk4,
            picard_tol: 1e-10,
            picard_max_iter: 50,
            window_safety: 0.5,
            admissibility_tol: crate::core::ADMISSIBILITY_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 < self.tf) {
            return Err(Error::config(format!("t0 = {} must precede tf = {}", self.t0, self.tf)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt must be a positive finite step"));
        }
        if !(self.window_safety > 0.0 && self.window_safety < 1.0) {
            return Err(Error::config("window_safety must lie in (0, 1)"));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::config("picard_max_iter must be positive"));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.tf - self.t0
    }

    /// Step bound for the direct integrator: within the contraction
    /// window and resolving the fastest unitary rotation.
    pub fn check_rk4_step(&self, rate_bound: f64, h_norm: f64) -> Result<()> {
        let mut limit = 0.05 / h_norm.max(1.0);
        if rate_bound > 0.0 {
            limit = limit.min(self.window_safety / (4.0 * rate_bound));
        }
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt = {} exceeds the step limit {limit:.3e} for M = {rate_bound}, |H| = {h_norm}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Per-sample spectral/trace record kept alongside the states.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SampleDiagnostics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub trace: f64,
    pub offdiag_norm: f64,
}

/// Time-ordered density matrices on a grid, with per-sample
/// diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    diagnostics: Vec<SampleDiagnostics>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory { times: Vec::new(), states: Vec::new(), diagnostics: Vec::new() }
    }

    pub fn push(&mut self, t: f64, state: DensityMatrix) {
        let d = diagnostics_for(&state);
        if let Some(last) = self.times.last() {
            assert!(t > *last, "trajectory times must be strictly increasing");
        }
        self.times.push(t);
        self.states.push(state);
        self.diagnostics.push(d);
    }

    /// Constant-in-time trajectory on a uniform grid; the seed of the
    /// Picard sequence.
    pub fn constant(state: &DensityMatrix, times: &[f64]) -> Self {
        let mut traj = Trajectory::new();
        for &t in times {
            traj.push(t, state.clone());
        }
        traj
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn diagnostics(&self) -> &[SampleDiagnostics] {
        &self.diagnostics
    }

    pub fn first(&self) -> &DensityMatrix {
        &self.states[0]
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    /// Occupation diagonal at an arbitrary time, piecewise-linear
    /// between samples and clamped to the span.
    pub fn diag_at(&self, t: f64) -> Vec<f64> {
        let times = &self.times;
        if t <= times[0] {
            return self.states[0].occupations();
        }
        if t >= *times.last().unwrap() {
            return self.states.last().unwrap().occupations();
        }
        let idx = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.states[i].occupations(),
            Err(i) => i,
        };
        let (t0, t1) = (times[idx - 1], times[idx]);
        let w = (t - t0) / (t1 - t0);
        let a = self.states[idx - 1].occupations();
        let b = self.states[idx].occupations();
        a.iter().zip(b).map(|(x, y)| x * (1.0 - w) + y * w).collect()
    }

    /// Largest sup-norm distance between matching samples.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        assert_eq!(self.len(), other.len(), "trajectories must share a grid");
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| sup_norm_diff(a.matrix(), b.matrix()))
            .fold(0.0, f64::max)
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::new()
    }
}

fn diagnostics_for(state: &DensityMatrix) -> SampleDiagnostics {
    let (lambda_min, lambda_max) = spectral_bounds(state.op());
    SampleDiagnostics {
        lambda_min,
        lambda_max,
        trace: state.trace(),
        offdiag_norm: offdiag_max(state.matrix()),
    }
}

/// Uniform grid from t0 to tf with spacing at most `dt`.
pub fn uniform_grid(t0: f64, tf: f64, dt: f64) -> Vec<f64> {
    let span = tf - t0;
    let n = ((span / dt) - 1e-12).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut times: Vec<f64> = (0..=n).map(|k| t0 + h * k as f64).collect();
    *times.last_mut().unwrap() = tf;
    times
}

/// Classical fourth-order Runge-Kutta on the matrix ODE
/// d rho / dt = rhs(t, rho); stored states are re-hermitized each step
/// and the spectrum is watched for admissibility violations.
pub fn integrate_rk4<F>(rhs: F, rho0: &DensityMatrix, cfg: &IntegrationConfig) -> Result<Trajectory>
where
    F: Fn(f64, &Matrix) -> Matrix,
{
    cfg.validate()?;
    let times = uniform_grid(cfg.t0, cfg.tf, cfg.dt);
    let mut traj = Trajectory::new();
    traj.push(cfg.t0, rho0.clone());
    check_state(&traj, cfg)?;

    let mut y = rho0.matrix().clone();
    for k in 1..times.len() {
        let t = times[k - 1];
        let h = times[k] - t;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &(&y + &k1.mapv(|z| z * (0.5 * h))));
        let k3 = rhs(t + 0.5 * h, &(&y + &k2.mapv(|z| z * (0.5 * h))));
        let k4 = rhs(t + h, &(&y + &k3.mapv(|z| z * h)));
        let incr = (k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        let (state, _) = hermitize(&(&y + &incr));
        y = state.matrix().clone();
        traj.push(times[k], DensityMatrix::new(state));
        check_state(&traj, cfg)?;
    }
    Ok(traj)
}

// hard failure only well beyond tolerance, so benign rounding never trips it
fn check_state(traj: &Trajectory, cfg: &IntegrationConfig) -> Result<()> {
    let d = traj.diagnostics().last().unwrap();
    let slack = 100.0 * cfg.admissibility_tol;
    if d.lambda_min < -slack || d.lambda_max > 1.0 + slack {
        return Err(Error::IntegrationDiverged {
            t: *traj.times().last().unwrap(),
            reason: format!(
                "state left the admissible window: spectrum [{:.3e}, {:.3e}]",
                d.lambda_min, d.lambda_max
            ),
        });
    }
    Ok(())
}

/// Non-hermitian generator H - i A1 - i A2.
pub fn effective_hamiltonian(h: &HermitianOperator, pair: &RelaxationPair) -> Matrix {
    let mut out = h.matrix().clone();
    for (i, a) in pair.sum_diag().iter().enumerate() {
        out[(i, i)] -= C64::new(0.0, *a);
    }
    out
}

// Generator evaluation along an interpolated reference trajectory.
struct FrozenGenerator<'a> {
    omega_traj: &'a Trajectory,
    hamiltonian: &'a HamiltonianSpec,
    rates: &'a RateTable,
}

impl FrozenGenerator<'_> {
    fn a2_diag(&self, t: f64) -> Vec<f64> {
        build_a2_from_diag(self.rates, &self.omega_traj.diag_at(t)).real_diag()
    }

    /// H(t) - i [A1 + A2](Omega(t)).
    fn h_eff(&self, t: f64) -> Matrix {
        let diag = self.omega_traj.diag_at(t);
        let a1 = build_a1_from_diag(self.rates, &diag);
        let a2 = build_a2_from_diag(self.rates, &diag);
        let mut out = self.hamiltonian.evaluate(t).into_matrix();
        for (i, (x, y)) in a1.real_diag().iter().zip(a2.real_diag()).enumerate() {
            out[(i, i)] -= C64::new(0.0, x + y);
        }
        out
    }

    /// RK4 on i dK/dt = H_eff(t) K over [ta, tb], left-multiplying
    /// onto `k0`.
    fn propagate(&self, k0: Matrix, ta: f64, tb: f64, substep: f64) -> Matrix {
        if tb <= ta {
            return k0;
        }
        let n = (((tb - ta) / substep) - 1e-12).ceil().max(1.0) as usize;
        let h = (tb - ta) / n as f64;
        let mi = C64::new(0.0, -1.0);
        let mut k = k0;
        for step in 0..n {
            let t = ta + h * step as f64;
            let g1 = self.h_eff(t).mapv(|z| mi * z);
            let g2 = self.h_eff(t + 0.5 * h).mapv(|z| mi * z);
            let g3 = self.h_eff(t + h).mapv(|z| mi * z);
            let k1 = g1.dot(&k);
            let k2 = g2.dot(&(&k + &k1.mapv(|z| z * (0.5 * h))));
            let k3 = g2.dot(&(&k + &k2.mapv(|z| z * (0.5 * h))));
            let k4 = g3.dot(&(&k + &k3.mapv(|z| z * h)));
            k = &k + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        }
        k
    }
}

/// The two-parameter propagator K(t; t') of the frozen linear
/// equation, I at t <= t'.
pub fn propagate_k(
    omega_traj: &Trajectory,
    hamiltonian: &HamiltonianSpec,
    rates: &RateTable,
    t: f64,
    t_prime: f64,
    substep: f64,
) -> Result<Matrix> {
    let dim = hamiltonian.dim();
    if t <= t_prime {
        return Ok(Array2::eye(dim));
    }
    let slack = 1e-9 * (1.0 + omega_traj.t_end().abs());
    if t_prime < omega_traj.t_start() - slack || t > omega_traj.t_end() + slack {
        return Err(Error::config(format!(
            "propagation interval [{t_prime}, {t}] outside the reference span [{}, {}]",
            omega_traj.t_start(),
            omega_traj.t_end()
        )));
    }
    if !(substep > 0.0) {
        return Err(Error::config("substep must be positive"));
    }
    let gen = FrozenGenerator { omega_traj, hamiltonian, rates };
    Ok(gen.propagate(Array2::eye(dim), t_prime, t, substep))
}

/// One application of the fixed-point mapping: propagate the initial
/// state with K and accumulate the gain source through the Duhamel
/// integral, stepping interval by interval with a midpoint Simpson
/// rule (the propagator composes across subintervals, so the running
/// product realizes the full two-parameter family).
pub fn duhamel_apply(
    omega_traj: &Trajectory,
    rho0: &DensityMatrix,
    hamiltonian: &HamiltonianSpec,
    rates: &RateTable,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let slack = 1e-9 * (1.0 + cfg.tf.abs());
    if omega_traj.t_start() > cfg.t0 + slack || omega_traj.t_end() < cfg.tf - slack {
        return Err(Error::config(format!(
            "reference trajectory [{}, {}] does not span [{}, {}]",
            omega_traj.t_start(),
            omega_traj.t_end(),
            cfg.t0,
            cfg.tf
        )));
    }
    let gen = FrozenGenerator { omega_traj, hamiltonian, rates };
    let times = uniform_grid(cfg.t0, cfg.tf, cfg.dt);
    let mut traj = Trajectory::new();
    traj.push(cfg.t0, rho0.clone());

    let mut lambda = rho0.matrix().clone();
    for k in 1..times.len() {
        let (ta, tb) = (times[k - 1], times[k]);
        let h = tb - ta;
        let tm = ta + 0.5 * h;
        let substep = 0.5 * h / PROPAGATOR_SUBSTEPS as f64;
        let dim = lambda.nrows();
        let k_start_mid = gen.propagate(Array2::eye(dim), ta, tm, substep);
        let k_mid_end = gen.propagate(Array2::eye(dim), tm, tb, substep);
        let k_full = k_mid_end.dot(&k_start_mid);

        let a2_start = diag_matrix(&gen.a2_diag(ta));
        let a2_mid = diag_matrix(&gen.a2_diag(tm));
        let a2_end = diag_matrix(&gen.a2_diag(tb));
        let g_start = conjugate(&k_full, &a2_start);
        let g_mid = conjugate(&k_mid_end, &a2_mid);
        let simpson = (g_start + g_mid.mapv(|z| z * 4.0) + a2_end).mapv(|z| z * (h / 6.0));

        lambda = conjugate(&k_full, &lambda) + simpson.mapv(|z| z * 2.0);
        let (state, _) = hermitize(&lambda);
        lambda = state.matrix().clone();
        traj.push(tb, DensityMatrix::new(state));
        check_state(&traj, cfg)?;
    }
    Ok(traj)
}

fn diag_matrix(diag: &[f64]) -> Matrix {
    let n = diag.len();
    let mut m = Matrix::zeros((n, n));
    for (i, d) in diag.iter().enumerate() {
        m[(i, i)] = C64::new(*d, 0.0);
    }
    m
}

/// K X K^dagger.
fn conjugate(k: &Matrix, x: &Matrix) -> Matrix {
    k.dot(x).dot(&adjoint(k))
}

/// Per-window iteration counts and observed contraction ratios.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WindowReport {
    pub t_start: f64,
    pub t_end: f64,
    pub iterations: usize,
    /// sup-over-window distances between consecutive iterates.
    pub deltas: Vec<f64>,
    /// deltas[j+1] / deltas[j].
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PicardReport {
    pub windows: Vec<WindowReport>,
}

/// Contraction-mapping solution of the fermionic equation: the span
/// is split into windows no longer than window_safety / (4 M), and on
/// each window the sequence rho_1 = rho(window start),
/// rho_{j+1} = F(rho_j) is iterated to the fixed point.
pub fn integrate_picard(
    rho0: &DensityMatrix,
    hamiltonian: &HamiltonianSpec,
    rates: &RateTable,
    cfg: &IntegrationConfig,
) -> Result<(Trajectory, PicardReport)> {
    cfg.validate()?;
    let m = transition_bound_m(rates);
    let span = cfg.span();
    let window_max = if m > 0.0 { cfg.window_safety / (4.0 * m) } else { span };
    let n_windows = ((span / window_max) - 1e-12).ceil().max(1.0) as usize;
    let wlen = span / n_windows as f64;

    let mut report = PicardReport { windows: Vec::new() };
    let mut full = Trajectory::new();
    let mut start_state = rho0.clone();

    for w in 0..n_windows {
        let ta = cfg.t0 + wlen * w as f64;
        let tb = if w + 1 == n_windows { cfg.tf } else { cfg.t0 + wlen * (w + 1) as f64 };
        let dt = cfg.dt.min((tb - ta) / 20.0);
        let wcfg = IntegrationConfig { t0: ta, tf: tb, dt, ..*cfg };

        let times = uniform_grid(ta, tb, dt);
        let mut omega = Trajectory::constant(&start_state, &times);
        let mut deltas = Vec::new();
        let mut converged = None;
        for _ in 0..cfg.picard_max_iter {
            let next = duhamel_apply(&omega, &start_state, hamiltonian, rates, &wcfg)?;
            let delta = next.sup_distance(&omega);
            deltas.push(delta);
            omega = next;
            if delta <= cfg.picard_tol {
                converged = Some(());
                break;
            }
        }
        let ratios: Vec<f64> = deltas
            .windows(2)
            .filter(|p| p[0] > 0.0)
            .map(|p| p[1] / p[0])
            .collect();
        if converged.is_none() {
            return Err(Error::PicardNonConvergence {
                max_iter: cfg.picard_max_iter,
                last_ratio: ratios.last().copied().unwrap_or(f64::NAN),
            });
        }
        report.windows.push(WindowReport {
            t_start: ta,
            t_end: tb,
            iterations: deltas.len(),
            deltas,
            ratios,
        });

        start_state = omega.last().clone();
        let skip = usize::from(!full.is_empty());
        for (&t, s) in omega.times().iter().zip(omega.states()).skip(skip) {
            full.push(t, s.clone());
        }
    }
    Ok((full, report))
}
