//! Plant and closed-loop realizations for static output feedback.
//!
//! The plant is
//!
//! ```text
//! dx/dt = A x + B1 w + B u
//!     z = C1 x + D11 w + D12 u
//!     y = C x
//! ```
//!
//! and the controller is the constant gain `u = F y`. A gain matrix is
//! flattened into the optimizer's decision vector by column-major stacking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions of a plant realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// State count.
    pub n_x: usize,
    /// Exogenous (disturbance) input count.
    pub n_w: usize,
    /// Control input count.
    pub n_u: usize,
    /// Measured output count.
    pub n_y: usize,
    /// Performance output count.
    pub n_z: usize,
}

impl Dims {
    pub fn new(n_x: usize, n_w: usize, n_u: usize, n_y: usize, n_z: usize) -> Result<Self> {
        let dims = Self {
            n_x,
            n_w,
            n_u,
            n_y,
            n_z,
        };
        dims.check()?;
        Ok(dims)
    }

    fn check(&self) -> Result<()> {
        for (label, v) in [
            ("n_x", self.n_x),
            ("n_w", self.n_w),
            ("n_u", self.n_u),
            ("n_y", self.n_y),
            ("n_z", self.n_z),
        ] {
            if v == 0 {
                return Err(Error::InvalidDims(format!("{label} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Decision dimension `n_u * n_y`.
    pub fn decision_len(&self) -> usize {
        self.n_u * self.n_y
    }
}

/// The seven plant matrices plus a name and the declared dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRealization {
    pub name: String,
    pub dims: Dims,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub d11: DMatrix<f64>,
    pub d12: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl PlantRealization {
    /// Builds a plant with dimensions inferred from the matrix shapes, then
    /// validates it.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b: DMatrix<f64>,
        c1: DMatrix<f64>,
        d11: DMatrix<f64>,
        d12: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self> {
        let dims = Dims::new(a.nrows(), b1.ncols(), b.ncols(), c.nrows(), c1.nrows())?;
        validate_plant(Self {
            name: name.into(),
            dims,
            a,
            b1,
            b,
            c1,
            d11,
            d12,
            c,
        })
    }

    /// Iterates over `(name, matrix, expected rows, expected cols)`.
    pub fn blocks(&self) -> [(&'static str, &DMatrix<f64>, usize, usize); 7] {
        let d = self.dims;
        [
            ("A", &self.a, d.n_x, d.n_x),
            ("B1", &self.b1, d.n_x, d.n_w),
            ("B", &self.b, d.n_x, d.n_u),
            ("C1", &self.c1, d.n_z, d.n_x),
            ("D11", &self.d11, d.n_z, d.n_w),
            ("D12", &self.d12, d.n_z, d.n_u),
            ("C", &self.c, d.n_y, d.n_x),
        ]
    }
}

/// Checks shapes against the declared dimensions and rejects non-finite
/// entries. Returns the plant unchanged on success.
pub fn validate_plant(plant: PlantRealization) -> Result<PlantRealization> {
    plant.dims.check()?;
    for (matrix, m, rows, cols) in plant.blocks() {
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::DimensionMismatch {
                matrix,
                expected_rows: rows,
                expected_cols: cols,
                found_rows: m.nrows(),
                found_cols: m.ncols(),
            });
        }
    }
    for (matrix, m, _, _) in plant.blocks() {
        check_finite(matrix, m)?;
    }
    Ok(plant)
}

pub(crate) fn check_finite(matrix: &'static str, m: &DMatrix<f64>) -> Result<()> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            if !m[(row, col)].is_finite() {
                return Err(Error::NonFinite { matrix, row, col });
            }
        }
    }
    Ok(())
}

/// Static output feedback gain `F` (`n_u x n_y`).
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix(pub DMatrix<f64>);

impl GainMatrix {
    pub fn zeros(dims: &Dims) -> Self {
        Self(DMatrix::zeros(dims.n_u, dims.n_y))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Column-major stacking of the gain entries.
pub fn flatten_gain(gain: &GainMatrix) -> Vec<f64> {
    // nalgebra storage is column-major already
    gain.0.as_slice().to_vec()
}

/// Inverse of [`flatten_gain`].
pub fn unflatten_gain(alpha: &[f64], dims: &Dims) -> Result<GainMatrix> {
    let expected = dims.decision_len();
    if alpha.len() != expected {
        return Err(Error::DecisionLength {
            expected,
            found: alpha.len(),
        });
    }
    Ok(GainMatrix(DMatrix::from_column_slice(
        dims.n_u, dims.n_y, alpha,
    )))
}

/// Closed-loop realization `(A_F, B1, C_F, D11)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRealization {
    pub a_f: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub c_f: DMatrix<f64>,
    pub d11: DMatrix<f64>,
}

impl ClosedLoopRealization {
    /// Assembles a closed loop directly; shapes must agree.
    pub fn new(
        a_f: DMatrix<f64>,
        b1: DMatrix<f64>,
        c_f: DMatrix<f64>,
        d11: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a_f.nrows();
        let checks: [(&'static str, &DMatrix<f64>, usize, usize); 4] = [
            ("A_F", &a_f, n, n),
            ("B1", &b1, n, b1.ncols()),
            ("C_F", &c_f, c_f.nrows(), n),
            ("D11", &d11, c_f.nrows(), b1.ncols()),
        ];
        for (matrix, m, rows, cols) in checks {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::DimensionMismatch {
                    matrix,
                    expected_rows: rows,
                    expected_cols: cols,
                    found_rows: m.nrows(),
                    found_cols: m.ncols(),
                });
            }
            check_finite(matrix, m)?;
        }
        Ok(Self { a_f, b1, c_f, d11 })
    }

    pub fn n_states(&self) -> usize {
        self.a_f.nrows()
    }
}

/// `A_F = A + B F C`, `C_F = C1 + D12 F C`.
pub fn close_loop(plant: &PlantRealization, gain: &GainMatrix) -> Result<ClosedLoopRealization> {
    let d = plant.dims;
    let f = &gain.0;
    if f.nrows() != d.n_u || f.ncols() != d.n_y {
        return Err(Error::DimensionMismatch {
            matrix: "F",
            expected_rows: d.n_u,
            expected_cols: d.n_y,
            found_rows: f.nrows(),
            found_cols: f.ncols(),
        });
    }
    let fc = f * &plant.c;
    let a_f = &plant.a + &plant.b * &fc;
    let c_f = &plant.c1 + &plant.d12 * &fc;
    Ok(ClosedLoopRealization {
        a_f,
        b1: plant.b1.clone(),
        c_f,
        d11: plant.d11.clone(),
    })
}

/// Closed-loop state matrix only, for the decision vector `alpha`.
pub fn closed_loop_state_matrix(plant: &PlantRealization, alpha: &[f64]) -> Result<DMatrix<f64>> {
    let gain = unflatten_gain(alpha, &plant.dims)?;
    Ok(&plant.a + &plant.b * (&gain.0 * &plant.c))
}

/// Euclidean norm of a decision vector.
pub fn gain_norm(alpha: &[f64]) -> f64 {
    DVector::from_column_slice(alpha).norm()
}
