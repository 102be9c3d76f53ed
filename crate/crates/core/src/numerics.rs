//! Complex linear algebra used by every scheme.
//!
//! Everything here goes through a singular value decomposition: rank
//! decisions, minimum-norm solves of the beamformer constraint stacks and the
//! relay's zero-forcing decoder. Tolerances are relative to the largest
//! singular value, so results do not depend on the overall scale of a matrix.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative tolerance for rank decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// An equation system `A x = b` over complex scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: CMatrix,
    b: CVector,
}

impl LinearSystem {
    pub fn new(a: CMatrix, b: CVector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "matrix has {} rows but right-hand side has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Dimension("linear system must be nonempty".into()));
        }
        Ok(Self { a, b })
    }

    /// Builds a system from constraint rows `row · x = rhs`.
    pub fn from_rows(n: usize, rows: &[(Vec<Complex64>, Complex64)]) -> Result<Self> {
        let a = CMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
        let b = CVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        Self::new(a, b)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &CVector {
        &self.b
    }
}

/// Rank and 2-norm condition number of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankCondition {
    pub rank: usize,
    pub cond: f64,
}

struct Decomposition {
    u: CMatrix,
    v_t: CMatrix,
    singular: Vec<f64>,
}

impl Decomposition {
    fn of(a: &CMatrix) -> Self {
        let svd = SVD::new(a.clone(), true, true);
        Decomposition {
            u: svd.u.expect("left singular vectors requested"),
            v_t: svd.v_t.expect("right singular vectors requested"),
            singular: svd.singular_values.iter().copied().collect(),
        }
    }

    fn max_singular(&self) -> f64 {
        self.singular.iter().copied().fold(0.0, f64::max)
    }

    fn rank(&self, tol: f64) -> usize {
        let threshold = tol * self.max_singular();
        if self.max_singular() == 0.0 {
            return 0;
        }
        self.singular.iter().filter(|&&s| s > threshold).count()
    }

    /// `V Σ⁺ Uᴴ y`, assuming every retained singular value is nonzero.
    fn apply_pinv(&self, y: &CVector) -> CVector {
        let mut coeffs = self.u.adjoint() * y;
        for (c, s) in coeffs.iter_mut().zip(&self.singular) {
            *c /= *s;
        }
        self.v_t.adjoint() * coeffs
    }

    fn pinv(&self) -> CMatrix {
        let mut scaled = self.u.adjoint();
        for (i, s) in self.singular.iter().enumerate() {
            scaled.row_mut(i).scale_mut(1.0 / s);
        }
        self.v_t.adjoint() * scaled
    }
}

/// Minimum-norm solution of an underdetermined (or square) system with
/// linearly independent rows.
pub fn least_norm_solve(sys: &LinearSystem, tol: f64) -> Result<CVector> {
    let (rows, cols) = sys.a.shape();
    if rows > cols {
        return Err(Error::RankDeficient {
            rank: cols,
            required: rows,
        });
    }
    let dec = Decomposition::of(&sys.a);
    let rank = dec.rank(tol);
    if rank < rows {
        return Err(Error::RankDeficient {
            rank,
            required: rows,
        });
    }
    Ok(dec.apply_pinv(&sys.b))
}

/// Least-squares estimate `x̂ = A⁺ y` for a matrix with full column rank.
/// This is the zero-forcing decoder used at the relay.
pub fn pinv_apply(a: &CMatrix, y: &CVector, tol: f64) -> Result<CVector> {
    if a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows but observation has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(CVector::zeros(0));
    }
    let dec = require_full_column_rank(a, tol)?;
    Ok(dec.apply_pinv(y))
}

/// Explicit pseudo-inverse of a full-column-rank matrix.
pub fn pseudo_inverse(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    if a.ncols() == 0 {
        return Ok(CMatrix::zeros(0, a.nrows()));
    }
    Ok(require_full_column_rank(a, tol)?.pinv())
}

fn require_full_column_rank(a: &CMatrix, tol: f64) -> Result<Decomposition> {
    let cols = a.ncols();
    if cols > a.nrows() {
        return Err(Error::RankDeficient {
            rank: a.nrows(),
            required: cols,
        });
    }
    let dec = Decomposition::of(a);
    let rank = dec.rank(tol);
    if rank < cols {
        return Err(Error::RankDeficient {
            rank,
            required: cols,
        });
    }
    Ok(dec)
}

/// Numerical rank (singular values above `tol · σ_max`) and condition number
/// `σ_max / σ_min`, infinite when `σ_min` falls below the threshold.
pub fn rank_and_condition(a: &CMatrix, tol: f64) -> RankCondition {
    if a.nrows() == 0 || a.ncols() == 0 {
        return RankCondition {
            rank: 0,
            cond: f64::INFINITY,
        };
    }
    let dec = Decomposition::of(a);
    let rank = dec.rank(tol);
    let min_dim = a.nrows().min(a.ncols());
    let cond = if rank < min_dim {
        f64::INFINITY
    } else {
        let smin = dec.singular.iter().copied().fold(f64::INFINITY, f64::min);
        dec.max_singular() / smin
    };
    RankCondition { rank, cond }
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// `hᴴ u`, the scalar a single-antenna node receives from relay beam `u`
/// through relay-to-node channel `h`.
pub fn hermitian_dot(h: &CVector, u: &CVector) -> Complex64 {
    h.dotc(u)
}
