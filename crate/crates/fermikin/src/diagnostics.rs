//! Certification of trajectory invariants: admissibility, trace
//! balance, coherence bounds, and off-diagonal decay laws.

use serde::Serialize;

use crate::core::{spectral_bounds, DensityMatrix, OrbitalBasis, RateTable};
use crate::generators::gain_factor;
use crate::integrators::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub admissibility: f64,
    pub trace: f64,
    pub coherence: f64,
}

impl Tolerances {
    pub fn defaults(dim: usize) -> Self {
        Tolerances { admissibility: 1e-8, trace: 1e-8 * dim as f64, coherence: 1e-8 }
    }

    /// Uniform override used by exploratory runs.
    pub fn uniform(tol: f64) -> Self {
        Tolerances { admissibility: tol, trace: tol, coherence: tol }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantRecord {
    pub t: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub trace: f64,
    pub max_coherence_violation: f64,
    pub trace_balance_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantSummary {
    pub worst_lambda_min: f64,
    pub worst_lambda_max: f64,
    pub worst_trace_drift: f64,
    pub worst_coherence_violation: f64,
    pub worst_trace_balance_residual: f64,
    pub pass: bool,
    pub first_failure_t: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub records: Vec<InvariantRecord>,
    pub summary: InvariantSummary,
}

/// Spectrum check against the admissible window [0, 1].
pub fn check_admissible(rho: &DensityMatrix, tol: f64) -> (bool, f64, f64) {
    let (lo, hi) = spectral_bounds(rho.op());
    (lo >= -tol && hi <= 1.0 + tol, lo, hi)
}

/// Worst violation of |rho[n][n']| <= sqrt(rho[n][n] rho[n'][n'])
/// over the off-diagonal entries; non-positive when the bound holds.
pub fn coherence_violation(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let cap = (m[(i, i)].re.max(0.0) * m[(j, j)].re.max(0.0)).sqrt();
                worst = worst.max(m[(i, j)].norm() - cap);
            }
        }
    }
    worst
}

/// Max over the grid of |tr rho(t) - tr rho(t0) - (gain - loss)|,
/// with both integrals taken by Simpson quadrature on the diagonal
/// history. Evaluated on the trajectory itself the two integrands
/// coincide, so the residual measures trace drift of the solver.
pub fn trace_balance_residual(traj: &Trajectory, rates: &RateTable) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::contract("trace balance needs at least three samples"));
    }
    let residuals = trace_balance_residuals(traj, rates);
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

fn trace_balance_residuals(traj: &Trajectory, rates: &RateTable) -> Vec<f64> {
    let w = rates.omega();
    let n = traj.first().dim();
    let trace0 = traj.first().trace();
    // d/dt tr = sum_n 2(1 - f(n)) A2(n) - sum_n 2 f(n) A1(n);
    // gain and loss integrands, kept separate as in the balance law
    let integrand = |f: &[f64]| -> (f64, f64) {
        let mut gain = 0.0;
        let mut loss = 0.0;
        for i in 0..n {
            let a2: f64 = (0..n).map(|j| 0.5 * w[(i, j)] * f[j]).sum();
            let a1: f64 = (0..n).map(|j| 0.5 * w[(j, i)] * (1.0 - f[j])).sum();
            gain += 2.0 * (1.0 - f[i]) * a2;
            loss += 2.0 * f[i] * a1;
        }
        (gain, loss)
    };

    let times = traj.times();
    let mut out = vec![0.0];
    let mut gain_acc = 0.0;
    let mut loss_acc = 0.0;
    for k in 1..times.len() {
        let (ta, tb) = (times[k - 1], times[k]);
        let h = tb - ta;
        let fa = traj.states()[k - 1].occupations();
        let fm = traj.diag_at(ta + 0.5 * h);
        let fb = traj.states()[k].occupations();
        let (ga, la) = integrand(&fa);
        let (gm, lm) = integrand(&fm);
        let (gb, lb) = integrand(&fb);
        gain_acc += h / 6.0 * (ga + 4.0 * gm + gb);
        loss_acc += h / 6.0 * (la + 4.0 * lm + lb);
        let predicted = trace0 + gain_acc - loss_acc;
        out.push((traj.states()[k].trace() - predicted).abs());
    }
    out
}

/// Full invariant report for a trajectory.
pub fn invariant_report(
    traj: &Trajectory,
    rates: Option<&RateTable>,
    tol: &Tolerances,
) -> InvariantReport {
    let balance = match rates {
        Some(r) if traj.len() >= 3 => trace_balance_residuals(traj, r),
        _ => vec![0.0; traj.len()],
    };
    let trace0 = traj.first().trace();
    let mut records = Vec::with_capacity(traj.len());
    let mut summary = InvariantSummary {
        worst_lambda_min: f64::INFINITY,
        worst_lambda_max: f64::NEG_INFINITY,
        worst_trace_drift: 0.0,
        worst_coherence_violation: f64::NEG_INFINITY,
        worst_trace_balance_residual: 0.0,
        pass: true,
        first_failure_t: None,
    };
    for (k, ((&t, state), d)) in traj
        .times()
        .iter()
        .zip(traj.states())
        .zip(traj.diagnostics())
        .enumerate()
    {
        let viol = coherence_violation(state);
        let rec = InvariantRecord {
            t,
            lambda_min: d.lambda_min,
            lambda_max: d.lambda_max,
            trace: d.trace,
            max_coherence_violation: viol,
            trace_balance_residual: balance[k],
        };
        summary.worst_lambda_min = summary.worst_lambda_min.min(d.lambda_min);
        summary.worst_lambda_max = summary.worst_lambda_max.max(d.lambda_max);
        summary.worst_trace_drift = summary.worst_trace_drift.max((d.trace - trace0).abs());
        summary.worst_coherence_violation = summary.worst_coherence_violation.max(viol);
        summary.worst_trace_balance_residual =
            summary.worst_trace_balance_residual.max(balance[k]);
        let ok = d.lambda_min >= -tol.admissibility
            && d.lambda_max <= 1.0 + tol.admissibility
            && (d.trace - trace0).abs() <= tol.trace
            && viol <= tol.coherence;
        if !ok && summary.first_failure_t.is_none() {
            summary.pass = false;
            summary.first_failure_t = Some(t);
        }
        records.push(rec);
    }
    InvariantReport { records, summary }
}

/// Worst relative error of the transition-mode off-diagonal law:
/// |rho[n][n']|(t) decays at rate (1/2) sum_m (w[m][n'] + w[m][n])
/// (plus gamma[n][n'] when dephasing is on) while the phase rotates
/// at E_n' - E_n.
pub fn phase_decay_check(
    traj: &Trajectory,
    rates: &RateTable,
    basis: &OrbitalBasis,
    include_dephasing: bool,
) -> Result<f64> {
    if traj.len() < 3 {
        return Err(Error::contract("phase decay fit needs at least three samples"));
    }
    let n = traj.first().dim();
    if basis.n_orbitals() != n || rates.dim() != n {
        return Err(Error::dims("phase_decay_check: basis/rates vs trajectory", basis.n_orbitals(), n));
    }
    let w = rates.omega();
    let energies = basis.energies();
    let times = traj.times();
    let t0 = times[0];
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let z0 = traj.first().matrix()[(i, j)];
            if z0.norm() <= 1e-6 {
                continue;
            }
            // log-linear least squares on |rho_ij|(t), skipping
            // samples too small for a safe logarithm
            let mut sx = 0.0;
            let mut sy = 0.0;
            let mut sxx = 0.0;
            let mut sxy = 0.0;
            let mut count = 0.0;
            let mut phase_worst = 0.0f64;
            let mut predicted_rate = 0.5 * (0..n).map(|m| w[(m, j)] + w[(m, i)]).sum::<f64>();
            if include_dephasing {
                if let Some(g) = rates.gamma() {
                    predicted_rate += g[(i, j)];
                }
            }
            let freq = energies[j] - energies[i];
            for (&t, state) in times.iter().zip(traj.states()) {
                let z = state.matrix()[(i, j)];
                if z.norm() <= 1e-10 {
                    continue;
                }
                let x = t - t0;
                let y = z.norm().ln();
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                count += 1.0;
                // observed phase against the free rotation
                let expected = z0 * crate::core::C64::new(0.0, freq * x).exp();
                let dphi = (z * expected.conj()).arg();
                let denom = (freq * x).abs().max(1.0);
                phase_worst = phase_worst.max(dphi.abs() / denom);
            }
            if count < 3.0 {
                continue;
            }
            let det = count * sxx - sx * sx;
            if det.abs() < 1e-30 {
                continue;
            }
            let slope = (count * sxy - sx * sy) / det;
            let fitted_rate = -slope;
            let rate_err = (fitted_rate - predicted_rate).abs() / predicted_rate.abs().max(1.0);
            worst = worst.max(rate_err).max(phase_worst);
        }
    }
    Ok(worst)
}

/// Off-diagonal damping carried by the gain term: the nonlinear gain
/// has off-diagonal content in general, the transition-equation gain
/// never does.
pub fn decoherence_from_gain(rho: &DensityMatrix, rates: &RateTable) -> Result<(f64, f64)> {
    let gain = gain_factor(rho, rates)?;
    let fermion = crate::core::offdiag_max(gain.matrix());
    // the linear counterpart acts on the diagonal alone by construction
    Ok((fermion, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{C64, HamiltonianSpec, Matrix};
    use crate::generators::{fermion_rhs_matrix, markoff_rhs_matrix};
    use crate::integrators::{integrate_rk4, IntegrationConfig};
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_level_rates() -> RateTable {
        RateTable::from_omega(array![[0.0, 1.0], [2.0, 0.0]]).unwrap()
    }

    #[test]
    fn admissibility_examples() {
        let half = DensityMatrix::from_occupations(&[0.5, 0.5]).unwrap();
        assert_eq!(check_admissible(&half, 1e-8), (true, 0.5, 0.5));

        let over = DensityMatrix::new(crate::core::HermitianOperator::from_real_diag(&[1.2, 0.0]));
        let (ok, _, hi) = check_admissible(&over, 1e-8);
        assert!(!ok);
        assert!((hi - 1.2).abs() < 1e-12);

        let mat: Matrix = array![[c(0.5, 0.0), c(0.6, 0.0)], [c(0.6, 0.0), c(0.5, 0.0)]];
        let rho = DensityMatrix::new(crate::core::HermitianOperator::new(mat).unwrap());
        let (ok, lo, hi) = check_admissible(&rho, 1e-8);
        assert!(!ok);
        assert!((lo + 0.1).abs() < 1e-12 && (hi - 1.1).abs() < 1e-12);
    }

    #[test]
    fn trace_balance_on_fermion_run() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let h = basis.h0().into_matrix();
        let rho0 = DensityMatrix::from_occupations(&[0.5, 0.25]).unwrap();
        // span within one contraction window: M = 2, 1/(8M) = 1/16
        let cfg = IntegrationConfig::new(0.0, 1.0 / 16.0, 1e-4).unwrap();
        let traj = integrate_rk4(|_, r| fermion_rhs_matrix(r, &h, &rates), &rho0, &cfg).unwrap();
        let res = trace_balance_residual(&traj, &rates).unwrap();
        assert!(res <= 1e-8, "residual {res}");

        let none = RateTable::from_omega(ndarray::Array2::zeros((2, 2))).unwrap();
        let traj = integrate_rk4(
            |_, r| crate::core::unitary_term(r, &h),
            &rho0,
            &cfg,
        )
        .unwrap();
        assert!(trace_balance_residual(&traj, &none).unwrap() <= 1e-10);
    }

    #[test]
    fn trace_balance_stationary_full_shell() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let h = basis.h0().into_matrix();
        let rho0 = DensityMatrix::from_occupations(&[1.0, 1.0]).unwrap();
        let cfg = IntegrationConfig::new(0.0, 0.05, 1e-3).unwrap();
        let traj = integrate_rk4(|_, r| fermion_rhs_matrix(r, &h, &rates), &rho0, &cfg).unwrap();
        assert!(trace_balance_residual(&traj, &rates).unwrap() <= 1e-12);
    }

    #[test]
    fn invariant_report_is_deterministic_and_passes() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let h = basis.h0().into_matrix();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(0.25, 0.0)]];
        let rho0 = DensityMatrix::from_matrix(mat).unwrap();
        let cfg = IntegrationConfig::new(0.0, 0.05, 1e-4).unwrap();
        let traj = integrate_rk4(|_, r| fermion_rhs_matrix(r, &h, &rates), &rho0, &cfg).unwrap();
        let tol = Tolerances::defaults(2);
        let a = invariant_report(&traj, Some(&rates), &tol);
        let b = invariant_report(&traj, Some(&rates), &tol);
        assert!(a.summary.pass);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.records.len(), traj.len());
    }

    #[test]
    fn phase_decay_markoff_two_level() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let h = basis.h0().into_matrix();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.0)], [c(0.2, 0.0), c(0.25, 0.0)]];
        let rho0 = DensityMatrix::from_matrix(mat).unwrap();
        let cfg = IntegrationConfig::new(0.0, 0.5, 2e-4).unwrap();
        let traj =
            integrate_rk4(|_, r| markoff_rhs_matrix(r, &h, &rates, false), &rho0, &cfg).unwrap();
        // predicted off-diagonal decay rate (1/2)(1 + 2)
        let err = phase_decay_check(&traj, &rates, &basis, false).unwrap();
        assert!(err <= 1e-6, "relative error {err}");

        // dephasing shifts the rate by gamma12 exactly
        let gamma = array![[0.0, 0.7], [0.7, 0.0]];
        let with_g = RateTable::new(array![[0.0, 1.0], [2.0, 0.0]], Some(gamma)).unwrap();
        let traj =
            integrate_rk4(|_, r| markoff_rhs_matrix(r, &h, &with_g, true), &rho0, &cfg).unwrap();
        let err = phase_decay_check(&traj, &with_g, &basis, true).unwrap();
        assert!(err <= 1e-6, "relative error with dephasing {err}");
    }

    #[test]
    fn phase_decay_zero_rates() {
        let none = RateTable::from_omega(ndarray::Array2::zeros((2, 2))).unwrap();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let hspec = HamiltonianSpec::free(basis.clone());
        let h = hspec.evaluate(0.0).into_matrix();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.0)], [c(0.2, 0.0), c(0.25, 0.0)]];
        let rho0 = DensityMatrix::from_matrix(mat).unwrap();
        let cfg = IntegrationConfig::new(0.0, 0.5, 2e-4).unwrap();
        let traj =
            integrate_rk4(|_, r| crate::core::unitary_term(r, &h), &rho0, &cfg).unwrap();
        let err = phase_decay_check(&traj, &none, &basis, false).unwrap();
        assert!(err <= 1e-8, "free rotation error {err}");
    }

    #[test]
    fn gain_decoherence_example() {
        let rates = two_level_rates();
        let mat = array![[c(0.5, 0.0), c(0.2, 0.0)], [c(0.2, 0.0), c(0.25, 0.0)]];
        let rho = DensityMatrix::from_matrix(mat).unwrap();
        let (f, m) = decoherence_from_gain(&rho, &rates).unwrap();
        // off-diagonal of {I - rho, A2} with A2 = diag(0.125, 0.5):
        // -(0.2 * 0.5 + 0.125 * 0.2) = -0.125
        assert!((f - 0.125).abs() < 1e-15);
        assert_eq!(m, 0.0);

        let diag = DensityMatrix::from_occupations(&[0.5, 0.25]).unwrap();
        let (f, m) = decoherence_from_gain(&diag, &rates).unwrap();
        assert_eq!((f, m), (0.0, 0.0));
    }

    #[test]
    fn coherence_violation_sign() {
        let ok = array![[c(0.5, 0.0), c(0.2, 0.0)], [c(0.2, 0.0), c(0.25, 0.0)]];
        let rho = DensityMatrix::from_matrix(ok).unwrap();
        assert!(coherence_violation(&rho) <= 0.0);

        let bad = array![[c(0.5, 0.0), c(0.6, 0.0)], [c(0.6, 0.0), c(0.5, 0.0)]];
        let rho = DensityMatrix::new(crate::core::HermitianOperator::new(bad).unwrap());
        assert!((coherence_violation(&rho) - 0.1).abs() < 1e-12);
    }
}
