//! Quasiparticle block structure: density matrices of the form
//! [[rho_s, kappa_s], [-kappa_s*, I - rho_s*]], the particle-hole
//! swap, the relaxation constraint that keeps the block form closed
//! under evolution, and the constrained integrator.

use ndarray::s;

use crate::core::{
    anticommutator, hermitize, unitary_term, C64, DensityMatrix, HamiltonianSpec,
    HermitianOperator, Matrix,
};
use crate::generators::validate_negative_semidefinite;
use crate::integrators::{uniform_grid, IntegrationConfig, Trajectory};
use crate::{Error, Result};

const ANTISYMMETRY_TOL: f64 = 1e-12;
const STRUCTURE_TOL: f64 = 1e-8;

/// Block density matrix over particle and hole sectors.
#[derive(Debug, Clone)]
pub struct QuasiparticleMatrix {
    rho_s: DensityMatrix,
    kappa_s: Matrix,
    assembled: HermitianOperator,
}

impl QuasiparticleMatrix {
    pub fn n_s(&self) -> usize {
        self.rho_s.dim()
    }

    pub fn rho_s(&self) -> &DensityMatrix {
        &self.rho_s
    }

    pub fn kappa_s(&self) -> &Matrix {
        &self.kappa_s
    }

    pub fn assembled(&self) -> &HermitianOperator {
        &self.assembled
    }
}

/// The sector swap [[0, I], [I, 0]].
#[derive(Debug, Clone)]
pub struct SwapOperator {
    mat: Matrix,
}

impl SwapOperator {
    pub fn new(n_s: usize) -> Self {
        let mut mat = Matrix::zeros((2 * n_s, 2 * n_s));
        for i in 0..n_s {
            mat[(i, n_s + i)] = C64::new(1.0, 0.0);
            mat[(n_s + i, i)] = C64::new(1.0, 0.0);
        }
        SwapOperator { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    /// S conj(X) S.
    pub fn conjugate_swap(&self, x: &Matrix) -> Matrix {
        self.mat.dot(&x.mapv(|z| z.conj())).dot(&self.mat)
    }
}

fn check_antisymmetric(kappa: &Matrix) -> Result<()> {
    let n = kappa.nrows();
    for i in 0..n {
        for j in 0..n {
            if (kappa[(i, j)] + kappa[(j, i)]).norm() > ANTISYMMETRY_TOL {
                return Err(Error::contract(format!(
                    "pairing block not antisymmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn assemble_blocks(rho_s: &Matrix, kappa_s: &Matrix) -> Matrix {
    let n = rho_s.nrows();
    let mut m = Matrix::zeros((2 * n, 2 * n));
    m.slice_mut(s![..n, ..n]).assign(rho_s);
    m.slice_mut(s![..n, n..]).assign(kappa_s);
    m.slice_mut(s![n.., ..n]).assign(&kappa_s.mapv(|z| -z.conj()));
    let mut lower = rho_s.mapv(|z| -z.conj());
    for i in 0..n {
        lower[(i, i)] += C64::new(1.0, 0.0);
    }
    m.slice_mut(s![n.., n..]).assign(&lower);
    m
}

/// Build and validate the block matrix from its particle-sector
/// pieces.
pub fn assemble_quasiparticle(rho_s: &DensityMatrix, kappa_s: &Matrix) -> Result<QuasiparticleMatrix> {
    let n = rho_s.dim();
    if kappa_s.nrows() != n || kappa_s.ncols() != n {
        return Err(Error::dims("assemble_quasiparticle: kappa vs rho_s", kappa_s.nrows(), n));
    }
    check_antisymmetric(kappa_s)?;
    let m = assemble_blocks(rho_s.matrix(), kappa_s);
    let assembled = HermitianOperator::new(m)?;
    Ok(QuasiparticleMatrix {
        rho_s: rho_s.clone(),
        kappa_s: kappa_s.clone(),
        assembled,
    })
}

/// sup_norm(S conj(H) S + H); zero for a valid quasiparticle
/// Hamiltonian.
pub fn check_ph_symmetry_hamiltonian(h: &HermitianOperator, swap: &SwapOperator) -> f64 {
    let v = swap.conjugate_swap(h.matrix()) + h.matrix();
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// The hole-sector relaxation dictated by the particle sector:
/// a_pbar = S conj(a_p) S.
pub fn constrain_relaxation(a_p: &HermitianOperator, swap: &SwapOperator) -> Result<HermitianOperator> {
    if a_p.dim() != swap.dim() {
        return Err(Error::dims("constrain_relaxation: a_p vs swap", a_p.dim(), swap.dim()));
    }
    let m = swap.conjugate_swap(a_p.matrix());
    Ok(HermitianOperator::wrap(m))
}

/// Structure defect sup_norm(rho_q + S conj(rho_q) S - I).
pub fn structure_defect(rho_q: &Matrix, swap: &SwapOperator) -> f64 {
    let mut v = rho_q + &swap.conjugate_swap(rho_q);
    for i in 0..v.nrows() {
        v[(i, i)] -= C64::new(1.0, 0.0);
    }
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Relaxation schedule: the particle-sector operator A_p(t).
pub enum RelaxationSchedule<'a> {
    Constant(&'a HermitianOperator),
    Piecewise(&'a [(f64, HermitianOperator)]),
}

impl RelaxationSchedule<'_> {
    fn at(&self, t: f64) -> &HermitianOperator {
        match self {
            RelaxationSchedule::Constant(op) => op,
            RelaxationSchedule::Piecewise(table) => {
                let mut current = &table[0].1;
                for (start, op) in *table {
                    if t >= *start - 1e-15 {
                        current = op;
                    }
                }
                current
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let check = |op: &HermitianOperator| -> Result<()> {
            if op.dim() != dim {
                return Err(Error::dims("relaxation schedule dim", op.dim(), dim));
            }
            validate_negative_semidefinite(op, "a_p")
        };
        match self {
            RelaxationSchedule::Constant(op) => check(op),
            RelaxationSchedule::Piecewise(table) => {
                if table.is_empty() {
                    return Err(Error::config("empty relaxation schedule"));
                }
                table.iter().try_for_each(|(_, op)| check(op))
            }
        }
    }
}

fn bcs_rhs(rho: &Matrix, h: &Matrix, a_p: &Matrix, a_pbar: &Matrix) -> Matrix {
    // i[rho, H] + {rho, A_p} - {I - rho, A_pbar}
    let mut hole = rho.mapv(|z| -z);
    for i in 0..hole.nrows() {
        hole[(i, i)] += C64::new(1.0, 0.0);
    }
    unitary_term(rho, h) + anticommutator(rho, a_p) - anticommutator(&hole, a_pbar)
}

/// Constrained evolution of the block matrix. The hole-sector
/// relaxation is derived from the particle sector at every stage, and
/// the block-structure identity rho_q + S conj(rho_q) S = I is
/// watched along the way.
pub fn evolve_bcs(
    q0: &QuasiparticleMatrix,
    hamiltonian: &HamiltonianSpec,
    a_p_schedule: &RelaxationSchedule<'_>,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let dim = 2 * q0.n_s();
    if hamiltonian.dim() != dim {
        return Err(Error::dims("evolve_bcs: hamiltonian vs state", hamiltonian.dim(), dim));
    }
    a_p_schedule.validate(dim)?;
    let swap = SwapOperator::new(q0.n_s());
    for &t in &[cfg.t0, 0.5 * (cfg.t0 + cfg.tf), cfg.tf] {
        let v = check_ph_symmetry_hamiltonian(&hamiltonian.evaluate(t), &swap);
        if v > 1e-10 {
            return Err(Error::contract(format!(
                "hamiltonian breaks particle-hole symmetry at t = {t}: violation {v:.3e}"
            )));
        }
    }
    if !DensityMatrix::new(q0.assembled().clone()).is_admissible(cfg.admissibility_tol) {
        return Err(Error::contract("initial quasiparticle matrix is not admissible"));
    }

    let times = uniform_grid(cfg.t0, cfg.tf, cfg.dt);
    let mut traj = Trajectory::new();
    traj.push(cfg.t0, DensityMatrix::new(q0.assembled().clone()));
    let mut y = q0.assembled().matrix().clone();

    for k in 1..times.len() {
        let t = times[k - 1];
        let h = times[k] - t;
        let stage = |tt: f64, rho: &Matrix| -> Matrix {
            let hm = hamiltonian.evaluate(tt).into_matrix();
            let a_p = a_p_schedule.at(tt).matrix().clone();
            let a_pbar = swap.conjugate_swap(&a_p);
            bcs_rhs(rho, &hm, &a_p, &a_pbar)
        };
        let k1 = stage(t, &y);
        let k2 = stage(t + 0.5 * h, &(&y + &k1.mapv(|z| z * (0.5 * h))));
        let k3 = stage(t + 0.5 * h, &(&y + &k2.mapv(|z| z * (0.5 * h))));
        let k4 = stage(t + h, &(&y + &k3.mapv(|z| z * h)));
        let incr = (k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0));
        let (state, _) = hermitize(&(&y + &incr));
        y = state.matrix().clone();

        let defect = structure_defect(&y, &swap);
        if defect > STRUCTURE_TOL {
            return Err(Error::IntegrationDiverged {
                t: times[k],
                reason: format!("block structure defect {defect:.3e} exceeds {STRUCTURE_TOL:.0e}"),
            });
        }
        traj.push(times[k], DensityMatrix::new(state));
    }
    Ok(traj)
}

/// Next level of the block hierarchy: embed the previous assembled
/// matrix as the particle sector of a doubled system with a fresh
/// pairing block.
pub fn chain_level(previous: &QuasiparticleMatrix, kappa_q: &Matrix) -> Result<QuasiparticleMatrix> {
    let rho_q = DensityMatrix::new(previous.assembled().clone());
    let n = rho_q.dim();
    if kappa_q.nrows() != n || kappa_q.ncols() != n {
        return Err(Error::dims("chain_level: kappa vs assembled", kappa_q.nrows(), n));
    }
    assemble_quasiparticle(&rho_q, kappa_q)
}
