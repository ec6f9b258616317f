//! Hilbert spaces, operators and density matrices over truncated
//! tensor-product spaces.
//!
//! Level ordering for atoms is `0 = g`, `1 = e`, `2 = f`. Cavity modes use
//! the Fock basis `|0>, |1>, ...`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const DENSITY_TOL: f64 = 1e-9;

/// Ordered list of subsystem dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    dims: Vec<usize>,
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Argument("Hilbert space needs at least one subsystem".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::Argument(format!("subsystem dimension {d} is not allowed")));
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Dense complex operator acting on a [`HilbertSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, space has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Operator on a single subsystem of dimension `matrix.nrows()`.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let space = HilbertSpace::single(matrix.nrows())?;
        Self::new(space, matrix)
    }

    pub fn from_real(rows: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != rows * rows {
            return Err(Error::Dimension(format!("{} entries for a {rows}x{rows} matrix", entries.len())));
        }
        Self::from_matrix(CMatrix::from_row_iterator(rows, rows, entries.iter().map(|&x| Complex64::new(x, 0.0))))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(CMatrix::identity(dim, dim)).expect("identity is square")
    }

    pub fn zeros_like(&self) -> Self {
        let d = self.dim();
        Self { space: self.space.clone(), matrix: CMatrix::zeros(d, d) }
    }

    /// Annihilation operator truncated to `dim` Fock states.
    pub fn destroy(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        for n in 1..dim {
            m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        Self::from_matrix(m).expect("square")
    }

    pub fn create(dim: usize) -> Self {
        Self::destroy(dim).dag()
    }

    pub fn number(dim: usize) -> Self {
        let m =
            CMatrix::from_fn(
                dim,
                dim,
                |i, j| {
                    if i == j {
                        Complex64::new(i as f64, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                },
            );
        Self::from_matrix(m).expect("square")
    }

    /// `|to><from|` on a `dim`-level system.
    pub fn transition(dim: usize, to: usize, from: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(to, from)] = Complex64::new(1.0, 0.0);
        Self::from_matrix(m).expect("square")
    }

    /// Lowering operator `|g><e|` of a two-level atom.
    pub fn sigma_minus() -> Self {
        Self::transition(2, 0, 1)
    }

    pub fn sigma_plus() -> Self {
        Self::transition(2, 1, 0)
    }

    pub fn pauli_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("2x2")
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        Self::from_matrix(CMatrix::from_row_slice(2, 2, &[z, -i, i, z])).expect("2x2")
    }

    /// Pauli Z matrix, `diag(1, -1)`.
    pub fn pauli_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("2x2")
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dag(&self) -> Self {
        Self { space: self.space.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { space: self.space.clone(), matrix: &self.matrix * Complex64::new(c, 0.0) }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self { space: self.space.clone(), matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix })
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= HERMITIAN_TOL
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub(crate) fn check_same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Dimension(format!(
                "operators act on different spaces {:?} and {:?}",
                self.space.dims(),
                other.space.dims()
            )));
        }
        Ok(())
    }
}

/// Kronecker product of the factors in the listed order.
pub fn tensor(factors: &[Operator]) -> Result<Operator> {
    let (first, rest) =
        factors.split_first().ok_or_else(|| Error::Argument("tensor product of an empty list".into()))?;
    let mut dims = first.space.dims().to_vec();
    let mut matrix = first.matrix.clone();
    for f in rest {
        dims.extend_from_slice(f.space.dims());
        matrix = matrix.kronecker(&f.matrix);
    }
    Operator::new(HilbertSpace::new(dims)?, matrix)
}

/// Places `op` on subsystem `index` of `space`, identities elsewhere.
pub fn embed(op: &Operator, space: &HilbertSpace, index: usize) -> Result<Operator> {
    let dims = space.dims();
    if index >= dims.len() {
        return Err(Error::Argument(format!("subsystem {index} out of range for {dims:?}")));
    }
    if op.dim() != dims[index] {
        return Err(Error::Dimension(format!(
            "operator of dimension {} placed on subsystem of dimension {}",
            op.dim(),
            dims[index]
        )));
    }
    let factors: Vec<Operator> =
        dims.iter().enumerate().map(|(k, &d)| if k == index { op.clone() } else { Operator::identity(d) }).collect();
    tensor(&factors)
}

/// A valid quantum state: unit trace, Hermitian, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Checks trace, Hermiticity and positivity to within `1e-9`.
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let rho = Self::unchecked(space, matrix)?;
        rho.validate(DENSITY_TOL)?;
        Ok(rho)
    }

    pub(crate) fn unchecked(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension(format!(
                "density matrix is {}x{}, space has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Pure state `|k><k|` in the product basis.
    pub fn basis(space: HilbertSpace, k: usize) -> Result<Self> {
        let d = space.total_dim();
        if k >= d {
            return Err(Error::Argument(format!("basis index {k} out of range for dimension {d}")));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = Complex64::new(1.0, 0.0);
        Self::new(space, m)
    }

    /// Projector onto a normalized state vector.
    pub fn pure(space: HilbertSpace, amplitudes: &[Complex64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.len() != space.total_dim() || norm == 0.0 {
            return Err(Error::Argument("state vector has wrong length or zero norm".into()));
        }
        let v = nalgebra::DVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|a| a / norm));
        Self::new(space, &v * v.adjoint())
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let tr = self.matrix.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Argument(format!("trace is {tr}, expected 1")));
        }
        let herm = max_abs(&(&self.matrix - self.matrix.adjoint()));
        if herm > tol {
            return Err(Error::Argument(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::Argument(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(op rho)`.
    pub fn expect(&self, op: &Operator) -> Result<Complex64> {
        if op.space() != &self.space {
            return Err(Error::Dimension("operator and state live on different spaces".into()));
        }
        Ok((op.matrix() * &self.matrix).trace())
    }

    /// Population of basis state `k`.
    pub fn population(&self, k: usize) -> f64 {
        self.matrix[(k, k)].re
    }
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
