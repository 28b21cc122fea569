//! Scenario files: a JSON description of basis, rates, drive,
//! initial state, model, and integrator settings, plus the runner
//! that turns one into a trajectory CSV and an invariant report.
//!
//! Complex entries are written as `[re, im]`; matrices are row-major
//! arrays of arrays. The transition table is oriented as
//! `omega[to][from]`, matching the library convention, and this fact
//! is echoed in the report metadata.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bcs::{assemble_quasiparticle, evolve_bcs, RelaxationSchedule};
use crate::core::{
    offdiag_max, sup_norm, sup_norm_diff, C64, DensityMatrix, Drive, HamiltonianSpec,
    HermitianOperator, Matrix, OrbitalBasis, RateTable,
};
use crate::diagnostics::{invariant_report, InvariantReport, Tolerances};
use crate::generators::{
    fermion_rhs_matrix, general_rhs_matrix, jump_ops_from_rates, lindblad_fermion_rhs_matrix,
    lindblad_rhs_matrix, markoff_rhs_matrix, transition_bound_m, validate_negative_semidefinite,
};
use crate::integrators::{
    integrate_picard, integrate_rk4, IntegrationConfig, Method, PicardReport, Trajectory,
};
use crate::reductions::{
    fermi_pauli_rhs, hole_rhs_matrix, integrate_occupations, low_density_gap_side, pauli_rhs,
    LowDensitySide, OccupationVector,
};
use crate::{Error, Result};

pub const TOL_ENV_VAR: &str = "FERMIKIN_TOL_OVERRIDE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Fermion,
    Markoff,
    Lindblad,
    LindbladFermion,
    General,
    Pauli,
    FermiPauli,
    Hole,
    Bcs,
}

impl Model {
    fn parse(s: &str) -> Option<Model> {
        Some(match s {
            "fermion" => Model::Fermion,
            "markoff" => Model::Markoff,
            "lindblad" => Model::Lindblad,
            "lindblad_fermion" => Model::LindbladFermion,
            "general" => Model::General,
            "pauli" => Model::Pauli,
            "fermi_pauli" => Model::FermiPauli,
            "hole" => Model::Hole,
            "bcs" => Model::Bcs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BcsSection {
    pub rho_s: DensityMatrix,
    pub kappa_s: Matrix,
    pub a_p: HermitianOperator,
}

#[derive(Debug, Clone)]
pub struct GeneralSection {
    pub a_p: HermitianOperator,
    pub a_pbar: HermitianOperator,
}

/// A fully validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub hamiltonian: HamiltonianSpec,
    pub rates: RateTable,
    pub initial: DensityMatrix,
    pub integrator: IntegrationConfig,
    pub tolerances: Tolerances,
    pub dephasing: bool,
    pub bcs: Option<BcsSection>,
    pub general: Option<GeneralSection>,
    /// SHA-256 of the scenario file bytes, for reproducibility.
    pub scenario_hash: String,
    /// Whether dt was defaulted from the step-limit rule.
    pub dt_defaulted: bool,
}

// --- JSON helpers with pointer-carrying errors ----------------------

fn err_at<T>(pointer: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::scenario(pointer, message))
}

fn get_obj<'a>(v: &'a Value, pointer: &str) -> Result<&'a serde_json::Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::scenario(pointer, "expected a JSON object"))
}

fn field<'a>(
    obj: &'a serde_json::Map<String, Value>,
    parent: &str,
    key: &str,
) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::scenario(format!("{parent}/{key}"), "missing required field"))
}

fn as_f64(v: &Value, pointer: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::scenario(pointer, "expected a number"))
}

fn as_usize(v: &Value, pointer: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::scenario(pointer, "expected a non-negative integer"))
}

fn as_str<'a>(v: &'a Value, pointer: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::scenario(pointer, "expected a string"))
}

fn as_bool(v: &Value, pointer: &str) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::scenario(pointer, "expected a boolean"))
}

fn parse_real_vec(v: &Value, pointer: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| Error::scenario(pointer, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{pointer}/{i}")))
        .collect()
}

fn parse_real_matrix(v: &Value, pointer: &str) -> Result<Array2<f64>> {
    let rows = v.as_array().ok_or_else(|| Error::scenario(pointer, "expected an array of rows"))?;
    let n = rows.len();
    if n == 0 {
        return err_at(pointer, "matrix must be non-empty");
    }
    let mut out = Array2::<f64>::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        let cells = parse_real_vec(row, &format!("{pointer}/{i}"))?;
        if cells.len() != n {
            return err_at(
                &format!("{pointer}/{i}"),
                format!("row length {} does not match {n} rows", cells.len()),
            );
        }
        for (j, x) in cells.into_iter().enumerate() {
            out[(i, j)] = x;
        }
    }
    Ok(out)
}

/// One complex entry encoded as [re, im]; a bare number is accepted
/// as a real entry.
fn parse_complex(v: &Value, pointer: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(C64::new(x, 0.0));
    }
    let pair = v
        .as_array()
        .ok_or_else(|| Error::scenario(pointer, "expected [re, im] or a number"))?;
    if pair.len() != 2 {
        return err_at(pointer, "complex entry must have exactly two components");
    }
    Ok(C64::new(
        as_f64(&pair[0], &format!("{pointer}/0"))?,
        as_f64(&pair[1], &format!("{pointer}/1"))?,
    ))
}

fn parse_complex_matrix(v: &Value, pointer: &str) -> Result<Matrix> {
    let rows = v.as_array().ok_or_else(|| Error::scenario(pointer, "expected an array of rows"))?;
    let n = rows.len();
    if n == 0 {
        return err_at(pointer, "matrix must be non-empty");
    }
    let mut out = Matrix::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{pointer}/{i}");
        let cells = row.as_array().ok_or_else(|| Error::scenario(&rp, "expected a row array"))?;
        if cells.len() != n {
            return err_at(&rp, format!("row length {} does not match {n} rows", cells.len()));
        }
        for (j, cell) in cells.iter().enumerate() {
            out[(i, j)] = parse_complex(cell, &format!("{rp}/{j}"))?;
        }
    }
    Ok(out)
}

fn parse_hermitian(v: &Value, pointer: &str) -> Result<HermitianOperator> {
    let m = parse_complex_matrix(v, pointer)?;
    HermitianOperator::new(m).map_err(|e| Error::scenario(pointer, format!("{e}")))
}

// --- section parsers ------------------------------------------------

fn parse_rates(root: &serde_json::Map<String, Value>, dim: usize) -> Result<RateTable> {
    let rv = field(root, "", "rates")?;
    let robj = get_obj(rv, "/rates")?;
    let omega_v = field(robj, "/rates", "omega")?;
    let omega = parse_real_matrix(omega_v, "/rates/omega")?;
    if omega.nrows() != dim {
        return err_at("/rates/omega", format!("dimension {} vs basis {dim}", omega.nrows()));
    }
    for i in 0..dim {
        for j in 0..dim {
            if omega[(i, j)] < 0.0 {
                return err_at(&format!("/rates/omega/{i}/{j}"), "rate must be non-negative");
            }
        }
    }
    let gamma = match robj.get("gamma") {
        Some(gv) => {
            let g = parse_real_matrix(gv, "/rates/gamma")?;
            if g.nrows() != dim {
                return err_at("/rates/gamma", format!("dimension {} vs basis {dim}", g.nrows()));
            }
            Some(g)
        }
        None => None,
    };
    RateTable::new(omega, gamma).map_err(|e| Error::scenario("/rates", format!("{e}")))
}

fn parse_drive(root: &serde_json::Map<String, Value>, dim: usize) -> Result<Drive> {
    let Some(dv) = root.get("drive") else {
        return Ok(Drive::None);
    };
    let dobj = get_obj(dv, "/drive")?;
    let kind = as_str(field(dobj, "/drive", "kind")?, "/drive/kind")?;
    let check_dim = |op: &HermitianOperator, ptr: &str| -> Result<()> {
        if op.dim() != dim {
            return err_at(ptr, format!("dimension {} vs basis {dim}", op.dim()));
        }
        Ok(())
    };
    match kind {
        "none" => Ok(Drive::None),
        "constant" => {
            let m = parse_hermitian(field(dobj, "/drive", "matrix")?, "/drive/matrix")?;
            check_dim(&m, "/drive/matrix")?;
            Ok(Drive::Constant(m))
        }
        "sinusoidal" => {
            let amp = parse_hermitian(field(dobj, "/drive", "amplitude")?, "/drive/amplitude")?;
            check_dim(&amp, "/drive/amplitude")?;
            let frequency = as_f64(field(dobj, "/drive", "frequency")?, "/drive/frequency")?;
            let phase = match dobj.get("phase") {
                Some(p) => as_f64(p, "/drive/phase")?,
                None => 0.0,
            };
            Ok(Drive::Sinusoidal { amplitude: amp, frequency, phase })
        }
        "piecewise" => {
            let pieces = field(dobj, "/drive", "pieces")?
                .as_array()
                .ok_or_else(|| Error::scenario("/drive/pieces", "expected an array"))?;
            if pieces.is_empty() {
                return err_at("/drive/pieces", "piecewise drive needs at least one piece");
            }
            let mut table = Vec::with_capacity(pieces.len());
            for (k, piece) in pieces.iter().enumerate() {
                let pp = format!("/drive/pieces/{k}");
                let pobj = get_obj(piece, &pp)?;
                let t = as_f64(field(pobj, &pp, "t")?, &format!("{pp}/t"))?;
                let m = parse_hermitian(field(pobj, &pp, "matrix")?, &format!("{pp}/matrix"))?;
                check_dim(&m, &format!("{pp}/matrix"))?;
                table.push((t, m));
            }
            Ok(Drive::Piecewise(table))
        }
        other => err_at("/drive/kind", format!("unknown drive kind '{other}'")),
    }
}

fn parse_initial(root: &serde_json::Map<String, Value>, dim: usize) -> Result<DensityMatrix> {
    let iv = field(root, "", "initial")?;
    let iobj = get_obj(iv, "/initial")?;
    if let Some(occ) = iobj.get("occupations") {
        let f = parse_real_vec(occ, "/initial/occupations")?;
        if f.len() != dim {
            return err_at("/initial/occupations", format!("length {} vs basis {dim}", f.len()));
        }
        return DensityMatrix::from_occupations(&f)
            .map_err(|e| Error::scenario("/initial/occupations", format!("{e}")));
    }
    if let Some(mat) = iobj.get("matrix") {
        let m = parse_complex_matrix(mat, "/initial/matrix")?;
        if m.nrows() != dim {
            return err_at("/initial/matrix", format!("dimension {} vs basis {dim}", m.nrows()));
        }
        return DensityMatrix::from_matrix(m)
            .map_err(|e| Error::scenario("/initial/matrix", format!("{e}")));
    }
    err_at("/initial", "need either 'occupations' or 'matrix'")
}

fn parse_bcs(root: &serde_json::Map<String, Value>, dim: usize) -> Result<BcsSection> {
    let bv = field(root, "", "bcs")?;
    let bobj = get_obj(bv, "/bcs")?;
    let rho_m = parse_complex_matrix(field(bobj, "/bcs", "rho_s")?, "/bcs/rho_s")?;
    let n_s = rho_m.nrows();
    if 2 * n_s != dim {
        return err_at("/bcs/rho_s", format!("particle sector {n_s} vs basis {dim} (need 2x)"));
    }
    let rho_s = DensityMatrix::from_matrix(rho_m)
        .map_err(|e| Error::scenario("/bcs/rho_s", format!("{e}")))?;
    let kappa_s = parse_complex_matrix(field(bobj, "/bcs", "kappa_s")?, "/bcs/kappa_s")?;
    if kappa_s.nrows() != n_s {
        return err_at("/bcs/kappa_s", format!("dimension {} vs {n_s}", kappa_s.nrows()));
    }
    let a_p = parse_hermitian(field(bobj, "/bcs", "a_p")?, "/bcs/a_p")?;
    if a_p.dim() != dim {
        return err_at("/bcs/a_p", format!("dimension {} vs {dim}", a_p.dim()));
    }
    validate_negative_semidefinite(&a_p, "a_p")
        .map_err(|e| Error::scenario("/bcs/a_p", format!("{e}")))?;
    Ok(BcsSection { rho_s, kappa_s, a_p })
}

fn parse_general(root: &serde_json::Map<String, Value>, dim: usize) -> Result<GeneralSection> {
    let gv = field(root, "", "general")?;
    let gobj = get_obj(gv, "/general")?;
    let a_p = parse_hermitian(field(gobj, "/general", "a_p")?, "/general/a_p")?;
    let a_pbar = parse_hermitian(field(gobj, "/general", "a_pbar")?, "/general/a_pbar")?;
    for (op, ptr) in [(&a_p, "/general/a_p"), (&a_pbar, "/general/a_pbar")] {
        if op.dim() != dim {
            return err_at(ptr, format!("dimension {} vs {dim}", op.dim()));
        }
        validate_negative_semidefinite(op, "relaxation operator")
            .map_err(|e| Error::scenario(ptr, format!("{e}")))?;
    }
    Ok(GeneralSection { a_p, a_pbar })
}

// --- top-level parse ------------------------------------------------

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let bytes = std::fs::read(path)?;
    let hash = {
        let digest = Sha256::digest(&bytes);
        let mut s = String::with_capacity(64);
        for b in digest {
            let _ = write!(s, "{b:02x}");
        }
        s
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::scenario("", "scenario file is not UTF-8"))?;
    let root_v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::scenario("", format!("invalid JSON: {e}")))?;
    parse_scenario_value(&root_v, name, hash)
}

pub fn parse_scenario_value(root_v: &Value, name: String, hash: String) -> Result<Scenario> {
    let root = get_obj(root_v, "")?;

    let model_s = as_str(field(root, "", "model")?, "/model")?;
    let model = Model::parse(model_s)
        .ok_or_else(|| Error::scenario("/model", format!("unknown model '{model_s}'")))?;

    let bv = field(root, "", "basis")?;
    let bobj = get_obj(bv, "/basis")?;
    let energies = parse_real_vec(field(bobj, "/basis", "energies")?, "/basis/energies")?;
    if let Some(nv) = bobj.get("n") {
        let n = as_usize(nv, "/basis/n")?;
        if n != energies.len() {
            return err_at("/basis/n", format!("n = {n} vs {} energies", energies.len()));
        }
    }
    let basis = OrbitalBasis::new(energies)
        .map_err(|e| Error::scenario("/basis/energies", format!("{e}")))?;
    let dim = basis.n_orbitals();

    let rates = parse_rates(root, dim)?;
    let drive = parse_drive(root, dim)?;
    let hamiltonian = HamiltonianSpec::new(basis, drive)
        .map_err(|e| Error::scenario("/drive", format!("{e}")))?;

    let bcs = if model == Model::Bcs { Some(parse_bcs(root, dim)?) } else { None };
    let general = if model == Model::General { Some(parse_general(root, dim)?) } else { None };

    let initial = if model == Model::Bcs {
        let section = bcs.as_ref().expect("parsed above");
        let q = assemble_quasiparticle(&section.rho_s, &section.kappa_s)
            .map_err(|e| Error::scenario("/bcs", format!("{e}")))?;
        DensityMatrix::new(q.assembled().clone())
    } else {
        parse_initial(root, dim)?
    };

    let dephasing = match root.get("dephasing") {
        Some(v) => as_bool(v, "/dephasing")?,
        None => false,
    };
    if dephasing && rates.gamma().is_none() {
        return err_at("/dephasing", "dephasing requested but /rates/gamma is absent");
    }
    if matches!(model, Model::Pauli | Model::FermiPauli) && offdiag_max(initial.matrix()) > 1e-12 {
        return err_at("/initial", "diagonal rate-equation models need a diagonal initial state");
    }

    // integrator section with defaults
    let iv = field(root, "", "integrator")?;
    let iobj = get_obj(iv, "/integrator")?;
    let t0 = match iobj.get("t0") {
        Some(v) => as_f64(v, "/integrator/t0")?,
        None => 0.0,
    };
    let tf = as_f64(field(iobj, "/integrator", "tf")?, "/integrator/tf")?;
    let m_bound = transition_bound_m(&rates);
    let h_norm = sup_norm(&hamiltonian.evaluate(t0));
    let mut step_limit = 0.05 / h_norm.max(1.0);
    if m_bound > 0.0 {
        step_limit = step_limit.min(0.5 / (4.0 * m_bound));
    }
    let (dt, dt_defaulted) = match iobj.get("dt") {
        Some(v) => (as_f64(v, "/integrator/dt")?, false),
        None => (step_limit / 4.0, true),
    };
    let method = match iobj.get("method") {
        Some(v) => match as_str(v, "/integrator/method")? {
            "rk4" => Method::Rk4,
            "picard" => Method::Picard,
            other => return err_at("/integrator/method", format!("unknown method '{other}'")),
        },
        None => Method::Rk4,
    };
    if method == Method::Picard && model != Model::Fermion {
        return err_at("/integrator/method", "the picard engine only applies to the fermion model");
    }
    let mut cfg = IntegrationConfig::new(t0, tf, dt)
        .map_err(|e| Error::scenario("/integrator", format!("{e}")))?;
    cfg.method = method;
    if let Some(v) = iobj.get("picard_tol") {
        cfg.picard_tol = as_f64(v, "/integrator/picard_tol")?;
    }
    if let Some(v) = iobj.get("picard_max_iter") {
        cfg.picard_max_iter = as_usize(v, "/integrator/picard_max_iter")?;
    }
    if let Some(v) = iobj.get("window_safety") {
        cfg.window_safety = as_f64(v, "/integrator/window_safety")?;
    }
    cfg.validate().map_err(|e| Error::scenario("/integrator", format!("{e}")))?;

    // tolerances with defaults, then the environment override
    let mut tolerances = Tolerances::defaults(dim);
    if let Some(tv) = root.get("tolerances") {
        let tobj = get_obj(tv, "/tolerances")?;
        if let Some(v) = tobj.get("admissibility") {
            tolerances.admissibility = as_f64(v, "/tolerances/admissibility")?;
        }
        if let Some(v) = tobj.get("trace") {
            tolerances.trace = as_f64(v, "/tolerances/trace")?;
        }
        if let Some(v) = tobj.get("coherence") {
            tolerances.coherence = as_f64(v, "/tolerances/coherence")?;
        }
    }
    if let Ok(raw) = std::env::var(TOL_ENV_VAR) {
        let tol: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("{TOL_ENV_VAR} must be a number, got '{raw}'")))?;
        tolerances = Tolerances::uniform(tol);
    }

    Ok(Scenario {
        name,
        model,
        hamiltonian,
        rates,
        initial,
        integrator: cfg,
        tolerances,
        dephasing,
        bcs,
        general,
        scenario_hash: hash,
        dt_defaulted,
    })
}

// --- simulation -----------------------------------------------------

pub struct SimulationResult {
    pub trajectory: Trajectory,
    pub picard: Option<PicardReport>,
}

/// Run the scenario's model and produce the trajectory.
pub fn simulate(scenario: &Scenario) -> Result<SimulationResult> {
    let cfg = &scenario.integrator;
    let hspec = &scenario.hamiltonian;
    let rates = &scenario.rates;
    let rho0 = &scenario.initial;
    let h_at = |t: f64| hspec.evaluate(t).into_matrix();

    let traj = match scenario.model {
        Model::Fermion => {
            if cfg.method == Method::Picard {
                let (traj, report) = integrate_picard(rho0, hspec, rates, cfg)?;
                return Ok(SimulationResult { trajectory: traj, picard: Some(report) });
            }
            cfg.check_rk4_step(transition_bound_m(rates), sup_norm(&hspec.evaluate(cfg.t0)))?;
            integrate_rk4(|t, r| fermion_rhs_matrix(r, &h_at(t), rates), rho0, cfg)?
        }
        Model::Markoff => integrate_rk4(
            |t, r| markoff_rhs_matrix(r, &h_at(t), rates, scenario.dephasing),
            rho0,
            cfg,
        )?,
        Model::Lindblad => {
            let jumps = jump_ops_from_rates(rates);
            integrate_rk4(|t, r| lindblad_rhs_matrix(r, &h_at(t), &jumps), rho0, cfg)?
        }
        Model::LindbladFermion => {
            let jumps = jump_ops_from_rates(rates);
            integrate_rk4(|t, r| lindblad_fermion_rhs_matrix(r, &h_at(t), &jumps), rho0, cfg)?
        }
        Model::General => {
            let section = scenario.general.as_ref().expect("validated at parse");
            let a_p = section.a_p.matrix().clone();
            let a_pbar = section.a_pbar.matrix().clone();
            integrate_rk4(|t, r| general_rhs_matrix(r, &h_at(t), &a_p, &a_pbar), rho0, cfg)?
        }
        Model::Hole => integrate_rk4(|t, r| hole_rhs_matrix(r, &h_at(t), rates), rho0, cfg)?,
        Model::Pauli | Model::FermiPauli => {
            let f0 = OccupationVector::new(rho0.occupations())
                .map_err(|e| Error::scenario("/initial/occupations", format!("{e}")))?;
            let fermi = scenario.model == Model::FermiPauli;
            let occ = integrate_occupations(
                |f| if fermi { fermi_pauli_rhs(f, rates) } else { pauli_rhs(f, rates) },
                &f0,
                cfg,
            )?;
            let mut traj = Trajectory::new();
            for (&t, f) in occ.times.iter().zip(&occ.samples) {
                let clamped: Vec<f64> = f.iter().map(|x| x.clamp(0.0, 1.0)).collect();
                traj.push(t, DensityMatrix::from_occupations(&clamped)?);
            }
            traj
        }
        Model::Bcs => {
            let section = scenario.bcs.as_ref().expect("validated at parse");
            let q = assemble_quasiparticle(&section.rho_s, &section.kappa_s)?;
            let sched = RelaxationSchedule::Constant(&section.a_p);
            evolve_bcs(&q, hspec, &sched, cfg)?
        }
    };
    Ok(SimulationResult { trajectory: traj, picard: None })
}

// --- output ---------------------------------------------------------

/// CSV with header `t, f_1..f_N, lambda_min, lambda_max, trace,
/// offdiag_norm`, occupations expanded per orbital and values printed
/// as shortest round-trip decimals.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.first().dim();
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        let _ = write!(out, ", f_{i}");
    }
    out.push_str(", lambda_min, lambda_max, trace, offdiag_norm\n");
    for ((&t, state), d) in traj.times().iter().zip(traj.states()).zip(traj.diagnostics()) {
        let _ = write!(out, "{t}");
        for f in state.occupations() {
            let _ = write!(out, ", {f}");
        }
        let _ = writeln!(
            out,
            ", {}, {}, {}, {}",
            d.lambda_min, d.lambda_max, d.trace, d.offdiag_norm
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub scenario_sha256: String,
    pub model: Model,
    pub rate_orientation: &'static str,
    pub t0: f64,
    pub tf: f64,
    pub dt: f64,
    pub dt_defaulted: bool,
    pub method: &'static str,
    pub tolerances: ReportTolerances,
    pub samples: usize,
    pub invariants: InvariantReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardReport>,
}

#[derive(Debug, Serialize)]
pub struct ReportTolerances {
    pub admissibility: f64,
    pub trace: f64,
    pub coherence: f64,
}

pub struct RunOutcome {
    pub exit_code: i32,
    pub csv_path: PathBuf,
    pub report_path: PathBuf,
    pub pass: bool,
    pub first_failure_t: Option<f64>,
}

/// Execute a scenario and write `<out>/<name>.csv` plus
/// `<out>/<name>.report.json`. Exit code 0 when all invariants hold,
/// 2 when any fails; errors bubble up for the caller to map to 1, and
/// no partial files are left behind in that case.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", scenario.name));
    let report_path = out_dir.join(format!("{}.report.json", scenario.name));

    let sim = match simulate(scenario) {
        Ok(s) => s,
        Err(e) => {
            let _ = std::fs::remove_file(&csv_path);
            let _ = std::fs::remove_file(&report_path);
            return Err(e);
        }
    };
    let rates_for_balance =
        matches!(scenario.model, Model::Fermion | Model::FermiPauli).then_some(&scenario.rates);
    let invariants = invariant_report(&sim.trajectory, rates_for_balance, &scenario.tolerances);
    let pass = invariants.summary.pass;
    let first_failure_t = invariants.summary.first_failure_t;

    let report = RunReport {
        scenario: scenario.name.clone(),
        scenario_sha256: scenario.scenario_hash.clone(),
        model: scenario.model,
        rate_orientation: "omega[to][from]",
        t0: scenario.integrator.t0,
        tf: scenario.integrator.tf,
        dt: scenario.integrator.dt,
        dt_defaulted: scenario.dt_defaulted,
        method: match scenario.integrator.method {
            Method::Rk4 => "rk4",
            Method::Picard => "picard",
        },
        tolerances: ReportTolerances {
            admissibility: scenario.tolerances.admissibility,
            trace: scenario.tolerances.trace,
            coherence: scenario.tolerances.coherence,
        },
        samples: sim.trajectory.len(),
        invariants,
        picard: sim.picard,
    };

    let csv = trajectory_csv(&sim.trajectory);
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    if let Err(e) = std::fs::write(&csv_path, csv).and_then(|_| std::fs::write(&report_path, json))
    {
        let _ = std::fs::remove_file(&csv_path);
        let _ = std::fs::remove_file(&report_path);
        return Err(e.into());
    }

    Ok(RunOutcome {
        exit_code: if pass { 0 } else { 2 },
        csv_path,
        report_path,
        pass,
        first_failure_t,
    })
}

// --- compare --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareVariant {
    LowDensity,
    HoleDual,
    PicardVsRk4,
    MarkoffVsLindblad,
    Incoherent,
}

impl CompareVariant {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "low_density" => CompareVariant::LowDensity,
            "hole_dual" => CompareVariant::HoleDual,
            "picard_vs_rk4" => CompareVariant::PicardVsRk4,
            "markoff_vs_lindblad" => CompareVariant::MarkoffVsLindblad,
            "incoherent" => CompareVariant::Incoherent,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CompareVariant::LowDensity => "low_density",
            CompareVariant::HoleDual => "hole_dual",
            CompareVariant::PicardVsRk4 => "picard_vs_rk4",
            CompareVariant::MarkoffVsLindblad => "markoff_vs_lindblad",
            CompareVariant::Incoherent => "incoherent",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub scenario_sha256: String,
    pub variant: &'static str,
    pub max_gap: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_time_gap: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eps_gaps: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eps_ratios: Vec<f64>,
}

pub fn compare(scenario: &Scenario, variant: CompareVariant, out_dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let cfg = &scenario.integrator;
    let hspec = &scenario.hamiltonian;
    let rates = &scenario.rates;
    let h_at = |t: f64| hspec.evaluate(t).into_matrix();

    let mut per_time_gap = Vec::new();
    let mut eps_gaps = Vec::new();
    let mut eps_ratios = Vec::new();
    let (max_gap, threshold) = match variant {
        CompareVariant::LowDensity => {
            let mut worst_ratio = 0.0f64;
            for side in [LowDensitySide::Particle, LowDensitySide::Hole] {
                let mut gaps = Vec::new();
                for eps in [0.2, 0.1, 0.05] {
                    let g = low_density_gap_side(eps, &scenario.initial, hspec, rates, cfg, side)?;
                    eps_gaps.push((eps, g));
                    gaps.push(g);
                }
                for pair in gaps.windows(2) {
                    let r = if pair[0] > 0.0 { pair[1] / pair[0] } else { 0.0 };
                    eps_ratios.push(r);
                    worst_ratio = worst_ratio.max(r);
                }
            }
            (worst_ratio, 0.35)
        }
        CompareVariant::HoleDual => {
            let particle =
                integrate_rk4(|t, r| fermion_rhs_matrix(r, &h_at(t), rates), &scenario.initial, cfg)?;
            let bar0 = crate::reductions::hole_transform(&scenario.initial);
            let hole = integrate_rk4(|t, r| hole_rhs_matrix(r, &h_at(t), rates), &bar0, cfg)?;
            per_time_gap = particle
                .times()
                .iter()
                .zip(particle.states())
                .zip(hole.states())
                .map(|((&t, p), hbar)| {
                    let complement = crate::reductions::hole_transform(p);
                    (t, sup_norm_diff(hbar.matrix(), complement.matrix()))
                })
                .collect();
            let worst = per_time_gap.iter().map(|(_, g)| *g).fold(0.0, f64::max);
            (worst, 1e-9)
        }
        CompareVariant::PicardVsRk4 => {
            if scenario.model != Model::Fermion {
                return Err(Error::config("picard_vs_rk4 needs a fermion-model scenario"));
            }
            let (picard, _) = integrate_picard(&scenario.initial, hspec, rates, cfg)?;
            let rk4cfg = IntegrationConfig { dt: cfg.dt.min(1e-3), ..*cfg };
            let rk4 = integrate_rk4(
                |t, r| fermion_rhs_matrix(r, &h_at(t), rates),
                &scenario.initial,
                &rk4cfg,
            )?;
            let gap = sup_norm_diff(picard.last().matrix(), rk4.last().matrix());
            per_time_gap.push((picard.t_end(), gap));
            (gap, 1e-6)
        }
        CompareVariant::MarkoffVsLindblad => {
            let traj = integrate_rk4(
                |t, r| markoff_rhs_matrix(r, &h_at(t), rates, false),
                &scenario.initial,
                cfg,
            )?;
            let jumps = jump_ops_from_rates(rates);
            per_time_gap = traj
                .times()
                .iter()
                .zip(traj.states())
                .map(|(&t, s)| {
                    let a = markoff_rhs_matrix(s.matrix(), &h_at(t), rates, false);
                    let b = lindblad_rhs_matrix(s.matrix(), &h_at(t), &jumps);
                    (t, sup_norm_diff(&a, &b))
                })
                .collect();
            let worst = per_time_gap.iter().map(|(_, g)| *g).fold(0.0, f64::max);
            (worst, 1e-13)
        }
        CompareVariant::Incoherent => {
            if offdiag_max(scenario.initial.matrix()) > 1e-12 {
                return Err(Error::config("incoherent comparison needs a diagonal initial state"));
            }
            if !matches!(hspec.drive(), Drive::None) {
                return Err(Error::config("incoherent comparison needs a drive-free scenario"));
            }
            let full = integrate_rk4(
                |t, r| fermion_rhs_matrix(r, &h_at(t), rates),
                &scenario.initial,
                cfg,
            )?;
            let f0 = OccupationVector::new(scenario.initial.occupations())?;
            let occ = integrate_occupations(|f| fermi_pauli_rhs(f, rates), &f0, cfg)?;
            per_time_gap = full
                .times()
                .iter()
                .zip(full.states())
                .zip(&occ.samples)
                .map(|((&t, s), f)| {
                    let diag_gap = s
                        .occupations()
                        .iter()
                        .zip(f)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    (t, diag_gap.max(offdiag_max(s.matrix())))
                })
                .collect();
            let worst = per_time_gap.iter().map(|(_, g)| *g).fold(0.0, f64::max);
            (worst, 1e-8)
        }
    };

    let pass = max_gap <= threshold;
    let report = CompareReport {
        scenario: scenario.name.clone(),
        scenario_sha256: scenario.scenario_hash.clone(),
        variant: variant.name(),
        max_gap,
        threshold,
        pass,
        per_time_gap,
        eps_gaps,
        eps_ratios,
    };
    let report_path = out_dir.join(format!("{}.compare.{}.json", scenario.name, variant.name()));
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    Ok(RunOutcome {
        exit_code: if pass { 0 } else { 2 },
        csv_path: report_path.clone(),
        report_path,
        pass,
        first_failure_t: None,
    })
}

// --- check ----------------------------------------------------------

/// Re-run the scenario and verify a previously written CSV against
/// it. Values must agree to 1e-9 relative; exit 0 on agreement, 2 on
/// mismatch.
pub fn check(csv_path: &Path, scenario: &Scenario) -> Result<i32> {
    let text = std::fs::read_to_string(csv_path)?;
    let sim = simulate(scenario)?;
    let expected = trajectory_csv(&sim.trajectory);

    let parse_rows = |s: &str| -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for (k, line) in s.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|_| {
                Error::config(format!("unparseable CSV row {k} in {}", csv_path.display()))
            })?);
        }
        Ok(rows)
    };
    let got_header = text.lines().next().unwrap_or("");
    let want_header = expected.lines().next().unwrap_or("");
    if got_header != want_header {
        return Ok(2);
    }
    let got = parse_rows(&text)?;
    let want = parse_rows(&expected)?;
    if got.len() != want.len() {
        return Ok(2);
    }
    for (gr, wr) in got.iter().zip(&want) {
        if gr.len() != wr.len() {
            return Ok(2);
        }
        for (a, b) in gr.iter().zip(wr) {
            if (a - b).abs() > 1e-9 * b.abs().max(1.0) {
                return Ok(2);
            }
        }
    }
    Ok(0)
}
