//! Lindblad master equation `drho/dt = -i[H, rho] + sum_k D[L_k] rho`.
//!
//! Hamiltonians are in rad/us, collapse operators in us^(-1/2).

use nalgebra::{DVector, SVD};
use num_complex::Complex64;

use super::integrator::{Dopri5, Tolerances};
use super::space::{max_abs, CMatrix, DensityMatrix, HilbertSpace, Operator};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Time-independent Hamiltonian plus collapse operators on one space.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: Operator,
    collapse_ops: Vec<Operator>,
    // H - (i/2) sum L^dag L
    h_eff: CMatrix,
    h_eff_dag: CMatrix,
    jumps: Vec<(CMatrix, CMatrix)>,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, collapse_ops: Vec<Operator>) -> Result<Self> {
        let herm = hamiltonian.hermiticity_error();
        if herm > super::space::HERMITIAN_TOL {
            return Err(Error::Argument(format!("Hamiltonian is not Hermitian (deviation {herm:.3e})")));
        }
        for op in &collapse_ops {
            hamiltonian.check_same_space(op)?;
        }
        let mut h_eff = hamiltonian.matrix().clone();
        let mut jumps = Vec::with_capacity(collapse_ops.len());
        for op in &collapse_ops {
            let l = op.matrix().clone();
            let l_dag = l.adjoint();
            h_eff -= (&l_dag * &l) * Complex64::new(0.0, 0.5);
            jumps.push((l, l_dag));
        }
        let h_eff_dag = h_eff.adjoint();
        Ok(Self { hamiltonian, collapse_ops, h_eff, h_eff_dag, jumps })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[Operator] {
        &self.collapse_ops
    }

    pub fn space(&self) -> &HilbertSpace {
        self.hamiltonian.space()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Applies the Liouvillian to an arbitrary (not necessarily physical) matrix.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = (&self.h_eff * x - x * &self.h_eff_dag) * (-I);
        for (l, l_dag) in &self.jumps {
            out += l * x * l_dag;
        }
        out
    }

    /// Superoperator matrix acting on column-stacked `vec(rho)`.
    pub fn liouvillian(&self) -> CMatrix {
        let d = self.dim();
        let id = CMatrix::identity(d, d);
        // vec(A X B) = (B^T (x) A) vec(X)
        let mut sup = id.kronecker(&self.h_eff) * (-I) + self.h_eff_dag.transpose().kronecker(&id) * I;
        for (l, l_dag) in &self.jumps {
            sup += l_dag.transpose().kronecker(l);
        }
        sup
    }
}

/// Time derivative of `rho` under `model`.
pub fn lindblad_rhs(model: &LindbladModel, rho: &DensityMatrix) -> Result<CMatrix> {
    if rho.space() != model.space() {
        return Err(Error::Dimension(format!(
            "state on {:?}, model on {:?}",
            rho.space().dims(),
            model.space().dims()
        )));
    }
    Ok(model.apply(rho.matrix()))
}

/// Evolves a density matrix and returns the state at each point of `grid`.
pub fn evolve(model: &LindbladModel, rho0: &DensityMatrix, grid: &UniformGrid) -> Result<Vec<DensityMatrix>> {
    evolve_with(model, rho0, grid, Tolerances::default())
}

pub fn evolve_with(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    grid: &UniformGrid,
    tol: Tolerances,
) -> Result<Vec<DensityMatrix>> {
    if rho0.space() != model.space() {
        return Err(Error::Dimension("initial state and model live on different spaces".into()));
    }
    let states = propagate_with(model, rho0.matrix(), grid, tol)?;
    states.into_iter().map(|m| DensityMatrix::unchecked(model.space().clone(), m)).collect()
}

/// Propagates an arbitrary operator `x` under the Liouvillian. Used for
/// two-time correlators where the seed `B rho` is not a state.
pub fn propagate(model: &LindbladModel, x0: &CMatrix, grid: &UniformGrid) -> Result<Vec<CMatrix>> {
    propagate_with(model, x0, grid, Tolerances::default())
}

pub fn propagate_with(
    model: &LindbladModel,
    x0: &CMatrix,
    grid: &UniformGrid,
    tol: Tolerances,
) -> Result<Vec<CMatrix>> {
    let d = model.dim();
    if x0.nrows() != d || x0.ncols() != d {
        return Err(Error::Dimension(format!("{}x{} seed for dimension {d}", x0.nrows(), x0.ncols())));
    }
    let (out, _) = Dopri5::new(tol).integrate(|_, x| model.apply(x), x0, grid)?;
    Ok(out)
}

/// Unique stationary state of `model`.
pub fn steady_state(model: &LindbladModel) -> Result<DensityMatrix> {
    let d = model.dim();
    let sup = model.liouvillian();

    let svd = SVD::new(sup.clone(), false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    let largest = *sv.last().unwrap_or(&0.0);
    if sv.len() > 1 && largest > 0.0 {
        let ratio = sv[1] / largest;
        if ratio < 1e-10 {
            return Err(Error::NonUniqueSteadyState { ratio });
        }
    }

    // row (0,0) is linearly dependent on the other diagonal rows
    // (trace preservation); replace it with the normalization condition
    let mut m = sup;
    for col in 0..d * d {
        m[(0, col)] = Complex64::new(0.0, 0.0);
    }
    for i in 0..d {
        m[(0, i * (d + 1))] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(d * d);
    rhs[0] = Complex64::new(1.0, 0.0);
    let x = m.lu().solve(&rhs).ok_or(Error::NonUniqueSteadyState { ratio: 0.0 })?;
    let rho = CMatrix::from_column_slice(d, d, x.as_slice());
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let rho = DensityMatrix::new(model.space().clone(), rho)?;
    Ok(rho)
}

/// Largest element of `drho/dt`, a stationarity measure.
pub fn stationarity_residual(model: &LindbladModel, rho: &DensityMatrix) -> Result<f64> {
    Ok(max_abs(&lindblad_rhs(model, rho)?))
}
