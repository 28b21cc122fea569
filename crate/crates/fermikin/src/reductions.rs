//! Limiting and dual pictures of the fermionic equation: diagonal
//! rate equations, the hole transform, and low-density comparisons.
//! Each one doubles as an independent oracle against the full solver.

use crate::core::{
    sup_norm_diff, C64, DensityMatrix, HamiltonianSpec, HermitianOperator, RateTable,
};
use crate::generators::{fermion_rhs_matrix, markoff_rhs_matrix, transition_bound_m};
use crate::integrators::{integrate_rk4, uniform_grid, IntegrationConfig};
use crate::{Error, Result};

/// Occupation numbers f(n) in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationVector {
    f: Vec<f64>,
}

impl OccupationVector {
    pub fn new(f: Vec<f64>) -> Result<Self> {
        for (n, x) in f.iter().enumerate() {
            if !x.is_finite() || *x < -1e-12 || *x > 1.0 + 1e-12 {
                return Err(Error::config(format!("occupation f[{n}] = {x} outside [0, 1]")));
            }
        }
        Ok(OccupationVector { f })
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.f.iter().sum()
    }
}

/// Classical rate equation:
/// df(n)/dt = -sum_n' w[n'][n] f(n) + sum_n' w[n][n'] f(n').
pub fn pauli_rhs(f: &OccupationVector, rates: &RateTable) -> Vec<f64> {
    let w = rates.omega();
    let n = f.len();
    assert_eq!(n, rates.dim(), "pauli_rhs dimension mismatch");
    let fv = f.values();
    (0..n)
        .map(|i| {
            let loss: f64 = (0..n).map(|j| w[(j, i)]).sum::<f64>() * fv[i];
            let gain: f64 = (0..n).map(|j| w[(i, j)] * fv[j]).sum();
            gain - loss
        })
        .collect()
}

/// Exclusion-corrected rate equation:
/// df(n)/dt = -sum_n' omega[n'][n](1-f(n')) f(n)
///            + sum_n' omega[n][n'](1-f(n)) f(n').
pub fn fermi_pauli_rhs(f: &OccupationVector, rates: &RateTable) -> Vec<f64> {
    let w = rates.omega();
    let n = f.len();
    assert_eq!(n, rates.dim(), "fermi_pauli_rhs dimension mismatch");
    let fv = f.values();
    (0..n)
        .map(|i| {
            let loss: f64 = (0..n).map(|j| w[(j, i)] * (1.0 - fv[j])).sum::<f64>() * fv[i];
            let gain: f64 = (0..n).map(|j| w[(i, j)] * fv[j]).sum::<f64>() * (1.0 - fv[i]);
            gain - loss
        })
        .collect()
}

/// Occupation history on the integration grid.
#[derive(Debug, Clone)]
pub struct OccupationTrajectory {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl OccupationTrajectory {
    pub fn last(&self) -> &[f64] {
        self.samples.last().expect("non-empty trajectory")
    }
}

/// RK4 on the N-dimensional real occupation ODE, with a bounds watch.
pub fn integrate_occupations<F>(
    rhs: F,
    f0: &OccupationVector,
    cfg: &IntegrationConfig,
) -> Result<OccupationTrajectory>
where
    F: Fn(&OccupationVector) -> Vec<f64>,
{
    cfg.validate()?;
    let eval = |f: &[f64]| -> Vec<f64> {
        // intermediate RK4 stages may graze the bounds; clamp only for
        // rhs evaluation, never for the stored state
        let clamped: Vec<f64> = f.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        rhs(&OccupationVector { f: clamped })
    };
    let times = uniform_grid(cfg.t0, cfg.tf, cfg.dt);
    let mut samples = vec![f0.values().to_vec()];
    let mut y = f0.values().to_vec();
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let k1 = eval(&y);
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = eval(&y2);
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = eval(&y3);
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = eval(&y4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        for (n, x) in y.iter().enumerate() {
            if *x < -1e-9 || *x > 1.0 + 1e-9 {
                return Err(Error::IntegrationDiverged {
                    t: times[k],
                    reason: format!("occupation f[{n}] = {x} left [0, 1]"),
                });
            }
        }
        samples.push(y.clone());
    }
    Ok(OccupationTrajectory { times, samples })
}

/// The vacancy picture: rho_bar = I - rho.
pub fn hole_transform(rho: &DensityMatrix) -> DensityMatrix {
    let mut m = rho.matrix().mapv(|z| -z);
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(1.0, 0.0);
    }
    DensityMatrix::new(HermitianOperator::wrap(m))
}

/// Master equation for the hole matrix: same form as the fermion
/// equation with the transition table transposed.
pub fn hole_rhs(
    rho_bar: &DensityMatrix,
    h: &HermitianOperator,
    rates: &RateTable,
) -> Result<HermitianOperator> {
    if h.dim() != rho_bar.dim() {
        return Err(Error::dims("hole_rhs: hamiltonian vs state", h.dim(), rho_bar.dim()));
    }
    if rates.dim() != rho_bar.dim() {
        return Err(Error::dims("hole_rhs: rates vs state", rates.dim(), rho_bar.dim()));
    }
    Ok(HermitianOperator::wrap(hole_rhs_matrix(rho_bar.matrix(), h.matrix(), rates)))
}

pub fn hole_rhs_matrix(
    rho_bar: &crate::core::Matrix,
    h: &crate::core::Matrix,
    rates: &RateTable,
) -> crate::core::Matrix {
    fermion_rhs_matrix(rho_bar, h, &rates.transposed())
}

/// Which side of the particle-hole mirror the low-density comparison
/// runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowDensitySide {
    Particle,
    Hole,
}

/// Scale an admissible seed by eps, evolve it under both the
/// nonlinear fermionic equation and the linear transition equation,
/// and report the largest sup-norm gap over the grid. The gap shrinks
/// quadratically as eps does, which is what makes the linear equation
/// the dilute limit.
pub fn low_density_gap(
    eps: f64,
    sigma: &DensityMatrix,
    hamiltonian: &HamiltonianSpec,
    rates: &RateTable,
    cfg: &IntegrationConfig,
) -> Result<f64> {
    low_density_gap_side(eps, sigma, hamiltonian, rates, cfg, LowDensitySide::Particle)
}

pub fn low_density_gap_side(
    eps: f64,
    sigma: &DensityMatrix,
    hamiltonian: &HamiltonianSpec,
    rates: &RateTable,
    cfg: &IntegrationConfig,
    side: LowDensitySide,
) -> Result<f64> {
    if !(eps >= 0.0 && eps <= 1.0) {
        return Err(Error::config(format!("eps = {eps} must lie in [0, 1]")));
    }
    if !sigma.is_admissible(crate::core::ADMISSIBILITY_TOL) {
        return Err(Error::contract("low_density_gap needs an admissible seed"));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let scaled = DensityMatrix::new(HermitianOperator::wrap(sigma.matrix().mapv(|z| z * eps)));
    // hole side: dilute vacancies instead of dilute particles, with
    // the transposed transition table
    let (rho0, eff_rates) = match side {
        LowDensitySide::Particle => (scaled, rates.clone()),
        LowDensitySide::Hole => (scaled, rates.transposed()),
    };
    let full = integrate_rk4(
        |t, rho| fermion_rhs_matrix(rho, hamiltonian.evaluate(t).matrix(), &eff_rates),
        &rho0,
        cfg,
    )?;
    let linear = integrate_rk4(
        |t, rho| markoff_rhs_matrix(rho, hamiltonian.evaluate(t).matrix(), &eff_rates, false),
        &rho0,
        cfg,
    )?;
    let gap = full
        .states()
        .iter()
        .zip(linear.states())
        .map(|(a, b)| sup_norm_diff(a.matrix(), b.matrix()))
        .fold(0.0, f64::max);
    Ok(gap)
}

/// Run until the motion stalls or the horizon 50/M, whichever first;
/// used by steady-state oracles.
pub fn relax_occupations<F>(
    rhs: F,
    f0: &OccupationVector,
    rates: &RateTable,
    dt: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&OccupationVector) -> Vec<f64>,
{
    let m = transition_bound_m(rates).max(1e-6);
    let horizon = 50.0 / m;
    let mut f = f0.clone();
    let mut t = 0.0;
    let chunk = (horizon / 50.0).max(dt);
    while t < horizon {
        let cfg = IntegrationConfig::new(t, t + chunk, dt)?;
        let traj = integrate_occupations(&rhs, &f, &cfg)?;
        f = OccupationVector { f: traj.last().to_vec() };
        t += chunk;
        let speed = rhs(&f).iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if speed < 1e-12 {
            break;
        }
    }
    Ok(f.f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{offdiag_max, OrbitalBasis};
    use ndarray::array;

    fn two_level_rates() -> RateTable {
        RateTable::from_omega(array![[0.0, 1.0], [2.0, 0.0]]).unwrap()
    }

    #[test]
    fn pauli_rhs_examples() {
        let rates = two_level_rates();
        let zero = OccupationVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(pauli_rhs(&zero, &rates), vec![0.0, 0.0]);

        let f = OccupationVector::new(vec![1.0, 0.0]).unwrap();
        let d = pauli_rhs(&f, &rates);
        assert_eq!(d, vec![-2.0, 2.0]);

        // uniform w, uniform f: gain balances loss
        let uni = RateTable::from_omega(array![[0.0, 0.7], [0.7, 0.0]]).unwrap();
        let f = OccupationVector::new(vec![0.4, 0.4]).unwrap();
        for x in pauli_rhs(&f, &uni) {
            assert!(x.abs() < 1e-15);
        }
    }

    #[test]
    fn fermi_pauli_rhs_examples() {
        let rates = two_level_rates();
        for f in [vec![0.0, 0.0], vec![1.0, 1.0]] {
            let f = OccupationVector::new(f).unwrap();
            for x in fermi_pauli_rhs(&f, &rates) {
                assert!(x.abs() < 1e-15);
            }
        }
        let f = OccupationVector::new(vec![0.5, 0.25]).unwrap();
        let d = fermi_pauli_rhs(&f, &rates);
        assert!((d[0] + 0.625).abs() < 1e-15);
        assert!((d[1] - 0.625).abs() < 1e-15);
    }

    #[test]
    fn occupation_integration_conserves_total() {
        let rates = two_level_rates();
        let f0 = OccupationVector::new(vec![0.9, 0.1]).unwrap();
        let cfg = IntegrationConfig::new(0.0, 2.0, 1e-3).unwrap();
        for eq in [true, false] {
            let traj = integrate_occupations(
                |f| if eq { fermi_pauli_rhs(f, &rates) } else { pauli_rhs(f, &rates) },
                &f0,
                &cfg,
            )
            .unwrap();
            for s in &traj.samples {
                assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                for x in s {
                    assert!(*x >= -1e-10 && *x <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn classical_two_state_limit() {
        // w = [[0,1],[2,0]], f0 = (1,0): f1 relaxes to
        // w12/(w12+w21) * total = 1/3
        let rates = two_level_rates();
        let f0 = OccupationVector::new(vec![1.0, 0.0]).unwrap();
        let cfg = IntegrationConfig::new(0.0, 10.0, 1e-3).unwrap();
        let traj = integrate_occupations(|f| pauli_rhs(f, &rates), &f0, &cfg).unwrap();
        let last = traj.last();
        assert!((last[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((last[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn fermi_steady_state_balance() {
        // long-time state satisfies
        // omega12 (1 - f1*) f2* = omega21 (1 - f2*) f1* with total 0.75
        let rates = two_level_rates();
        let f0 = OccupationVector::new(vec![0.5, 0.25]).unwrap();
        let f = relax_occupations(|f| fermi_pauli_rhs(f, &rates), &f0, &rates, 1e-3).unwrap();
        assert!((f[0] + f[1] - 0.75).abs() < 1e-9);
        let lhs = 1.0 * (1.0 - f[0]) * f[1];
        let rhs = 2.0 * (1.0 - f[1]) * f[0];
        assert!((lhs - rhs).abs() < 1e-8, "balance residual {}", lhs - rhs);
    }

    #[test]
    fn hole_transform_involution() {
        let rho = DensityMatrix::from_occupations(&[0.5, 0.25]).unwrap();
        let bar = hole_transform(&rho);
        assert_eq!(bar.occupations(), vec![0.5, 0.75]);
        let back = hole_transform(&bar);
        assert!(sup_norm_diff(back.matrix(), rho.matrix()) == 0.0);

        let zero = DensityMatrix::from_occupations(&[0.0, 0.0]).unwrap();
        assert_eq!(hole_transform(&zero).occupations(), vec![1.0, 1.0]);
    }

    #[test]
    fn hole_duality_pointwise() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let h = basis.h0();
        let mat = array![
            [C64::new(0.5, 0.0), C64::new(0.2, 0.1)],
            [C64::new(0.2, -0.1), C64::new(0.25, 0.0)]
        ];
        let rho = DensityMatrix::from_matrix(mat).unwrap();
        let bar = hole_transform(&rho);
        let lhs = hole_rhs(&bar, &h, &rates).unwrap();
        let rhs = crate::generators::fermion_rhs(&rho, &h, &rates).unwrap();
        let neg = rhs.matrix().mapv(|z| -z);
        assert!(sup_norm_diff(lhs.matrix(), &neg) < 1e-13);
    }

    #[test]
    fn hole_rhs_vacuum_of_holes_is_stationary() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let bar = DensityMatrix::from_occupations(&[1.0, 1.0]).unwrap();
        let d = hole_rhs(&bar, &basis.h0(), &rates).unwrap();
        assert!(crate::core::sup_norm(&d) < 1e-14);
    }

    #[test]
    fn incoherent_limit_matches_full_solver() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let hspec = HamiltonianSpec::free(basis);
        let h = hspec.evaluate(0.0).into_matrix();
        let rho0 = DensityMatrix::from_occupations(&[0.5, 0.25]).unwrap();
        let cfg = IntegrationConfig::new(0.0, 0.5, 1e-3).unwrap();
        let full = integrate_rk4(|_, rho| fermion_rhs_matrix(rho, &h, &rates), &rho0, &cfg).unwrap();
        let f0 = OccupationVector::new(vec![0.5, 0.25]).unwrap();
        let diag = integrate_occupations(|f| fermi_pauli_rhs(f, &rates), &f0, &cfg).unwrap();
        for (s, d) in full.states().iter().zip(&diag.samples) {
            let occ = s.occupations();
            for (a, b) in occ.iter().zip(d) {
                assert!((a - b).abs() < 1e-8);
            }
            assert!(offdiag_max(s.matrix()) < 1e-12);
        }
    }

    #[test]
    fn low_density_gap_quadratic() {
        let rates = two_level_rates();
        let basis = OrbitalBasis::new(vec![0.0, 1.0]).unwrap();
        let hspec = HamiltonianSpec::free(basis);
        let mat = array![
            [C64::new(0.6, 0.0), C64::new(0.2, 0.1)],
            [C64::new(0.2, -0.1), C64::new(0.5, 0.0)]
        ];
        let sigma = DensityMatrix::from_matrix(mat).unwrap();
        let cfg = IntegrationConfig::new(0.0, 0.2, 1e-3).unwrap();
        for side in [LowDensitySide::Particle, LowDensitySide::Hole] {
            let mut gaps = Vec::new();
            for eps in [0.2, 0.1, 0.05, 0.025] {
                gaps.push(low_density_gap_side(eps, &sigma, &hspec, &rates, &cfg, side).unwrap());
            }
            for pair in gaps.windows(2) {
                let ratio = pair[1] / pair[0];
                assert!(ratio <= 0.35, "{side:?}: ratio {ratio} too large for quadratic decay");
                assert!(ratio >= 0.15, "{side:?}: ratio {ratio} suspiciously small");
            }
        }
        assert_eq!(low_density_gap(0.0, &sigma, &hspec, &rates, &cfg).unwrap(), 0.0);
        let no_rates = RateTable::from_omega(ndarray::Array2::zeros((2, 2))).unwrap();
        let g = low_density_gap(0.5, &sigma, &hspec, &no_rates, &cfg).unwrap();
        assert!(g < 1e-12);
    }
}
