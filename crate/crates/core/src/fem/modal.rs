//! Generalised symmetric eigen-solve `K phi = w^2 M phi` on the free DOFs.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use super::assembly::{build_system, AssembledSystem, DOF_PER_NODE};
use super::template::{FoundationModel, StructureTemplate};
use super::FemError;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;
const RIGID_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ModalResult {
    /// Natural frequencies in Hz, ascending.
    pub frequencies: Vec<f64>,
    /// Mass-normalised eigenvectors over the free DOFs, one column per mode.
    pub mode_shapes: DMatrix<f64>,
    pub free_dofs: Vec<usize>,
}

impl ModalResult {
    /// Lateral displacement of every node for `mode`, zero where constrained.
    pub fn lateral_shape(&self, mode: usize, n_nodes: usize) -> Vec<f64> {
        let mut full = vec![0.0; DOF_PER_NODE * n_nodes];
        for (row, &dof) in self.free_dofs.iter().enumerate() {
            full[dof] = self.mode_shapes[(row, mode)];
        }
        full.into_iter().step_by(DOF_PER_NODE).collect()
    }
}

pub fn solve_modes(system: &AssembledSystem, n_modes: usize) -> Result<ModalResult, FemError> {
    let n_free = system.free_dofs.len();
    if n_modes == 0 || n_modes > n_free {
        return Err(FemError::ModeCount { requested: n_modes, available: n_free });
    }
    let rigid = rigid_body_stiffness(system);
    if rigid <= RIGID_TOL {
        return Err(FemError::Mechanism(rigid));
    }
    let k = system.free_stiffness();
    let m = system.free_mass();

    // M = L L^T; solve the standard problem for A = L^-1 K L^-T.
    let chol = m.cholesky().ok_or(FemError::MassNotPositiveDefinite)?;
    let l = chol.l();
    let linv_k = l.solve_lower_triangular(&k).ok_or(FemError::MassNotPositiveDefinite)?;
    let a = l.solve_lower_triangular(&linv_k.transpose()).ok_or(FemError::MassNotPositiveDefinite)?;
    let a = 0.5 * (&a + a.transpose());

    let eig = a.try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER).ok_or(FemError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n_free).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut frequencies = Vec::with_capacity(n_modes);
    let mut shapes = DMatrix::zeros(n_free, n_modes);
    for (col, &idx) in order.iter().take(n_modes).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            return Err(FemError::Mechanism(lambda));
        }
        frequencies.push(lambda.sqrt() / (2.0 * PI));
        let y: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        let phi = lt.solve_upper_triangular(&y).ok_or(FemError::MassNotPositiveDefinite)?;
        shapes.set_column(col, &phi);
    }

    Ok(ModalResult { frequencies, mode_shapes: shapes, free_dofs: system.free_dofs.clone() })
}

/// Smallest stiffness the structure offers against any admissible rigid
/// motion (translation plus rotation about the toe), relative to the
/// diagonal of K. Zero up to round-off for an unsupported structure.
fn rigid_body_stiffness(system: &AssembledSystem) -> f64 {
    let n = system.stiffness.nrows();
    let mut rigid = DMatrix::zeros(n, 2);
    for (node, &z) in system.node_z.iter().enumerate() {
        rigid[(DOF_PER_NODE * node, 0)] = 1.0;
        rigid[(DOF_PER_NODE * node, 1)] = z;
        rigid[(DOF_PER_NODE * node + 1, 1)] = 1.0;
    }
    let fixed: Vec<usize> = (0..n).filter(|d| system.free_dofs.binary_search(d).is_err()).collect();
    let c = rigid.select_rows(&fixed);
    let ctc = c.transpose() * &c;
    let basis = if ctc.trace() == 0.0 {
        rigid
    } else {
        let eig = ctc.clone().symmetric_eigen();
        let cols: Vec<usize> = (0..2).filter(|&i| eig.eigenvalues[i] <= 1e-12 * ctc.trace()).collect();
        if cols.is_empty() {
            return f64::INFINITY;
        }
        rigid * eig.eigenvectors.select_columns(&cols)
    };
    let g = basis.transpose() * &system.stiffness * &basis;
    let diag = DMatrix::from_diagonal(&system.stiffness.diagonal().map(f64::abs));
    let d = basis.transpose() * diag * &basis;
    let Some(chol) = d.cholesky() else { return 0.0 };
    let l = chol.l();
    let Some(a) = l.solve_lower_triangular(&g) else { return 0.0 };
    let Some(a) = l.solve_lower_triangular(&a.transpose()) else { return 0.0 };
    let a = 0.5 * (&a + a.transpose());
    a.symmetric_eigen().eigenvalues.min()
}

/// Lowest bending frequency in Hz.
pub fn first_frequency(
    template: &StructureTemplate,
    foundation: &FoundationModel,
    n_elements: usize,
    seawater_density: f64,
) -> Result<f64, FemError> {
    let system = build_system(template, foundation, n_elements, seawater_density)?;
    Ok(solve_modes(&system, 1)?.frequencies[0])
}

/// First `n_modes` bending frequencies in Hz.
pub fn frequencies(
    template: &StructureTemplate,
    foundation: &FoundationModel,
    n_elements: usize,
    seawater_density: f64,
    n_modes: usize,
) -> Result<Vec<f64>, FemError> {
    let system = build_system(template, foundation, n_elements, seawater_density)?;
    Ok(solve_modes(&system, n_modes)?.frequencies)
}

/// Uniform cantilever with an end mass:
/// `f = sqrt(3 E I / (L^3 (M + 0.24 M_b))) / (2 pi)`.
pub fn cantilever_estimate(
    youngs_modulus: f64,
    second_moment: f64,
    length: f64,
    end_mass: f64,
    beam_mass: f64,
) -> Result<f64, FemError> {
    let inputs = [youngs_modulus, second_moment, length, end_mass, beam_mass];
    // A massless beam is allowed; everything else must be strictly positive.
    let positive = inputs[..4].iter().all(|v| v.is_finite() && *v > 0.0);
    if !positive || !(beam_mass.is_finite() && beam_mass >= 0.0) {
        return Err(FemError::NonPositiveInput(inputs.to_vec()));
    }
    let k = 3.0 * youngs_modulus * second_moment / length.powi(3);
    Ok((k / (end_mass + 0.24 * beam_mass)).sqrt() / (2.0 * PI))
}
