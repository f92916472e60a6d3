//! Dense quadratic-form oracle for small dimensions.
//!
//! These routines build the augmented `(d+1)×(d+1)` matrix
//!
//! ```text
//! C = | A   w |
//!     | wᵀ  b |
//! ```
//!
//! from an expanded weight vector and evaluate `½ x̂ᵀ C x̂` directly. They are
//! O(d²) and exist to check the sparse expansion path, so they refuse
//! dimensions above [`MAX_ORACLE_DIM`].

use crate::error::{Error, Result};
use crate::expansion::PqrIndexMap;

pub const MAX_ORACLE_DIM: usize = 2000;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}×{} by {}×{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for m in 0..self.cols {
                let a = self.get(r, m);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(m, c);
                }
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn convex_combination(&self, other: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension("shape mismatch".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

/// Augmented symmetric matrix of a PQR model.
#[derive(Debug, Clone, PartialEq)]
pub struct PqrMatrix {
    d: usize,
    c: DenseMatrix,
}

impl PqrMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn augmented(&self) -> &DenseMatrix {
        &self.c
    }

    /// `A[i][j]` for 1-based feature indices.
    pub fn interaction(&self, i: u32, j: u32) -> f64 {
        self.c.get(i as usize - 1, j as usize - 1)
    }

    /// The `d×d` interaction block `A`.
    pub fn interaction_block(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.d, self.d);
        for r in 0..self.d {
            for col in 0..self.d {
                a.set(r, col, self.c.get(r, col));
            }
        }
        a
    }

    pub fn linear(&self, i: u32) -> f64 {
        self.c.get(i as usize - 1, self.d)
    }

    /// Bottom-right entry `b`.
    pub fn bias(&self) -> f64 {
        self.c.get(self.d, self.d)
    }

    pub fn convex_combination(&self, other: &PqrMatrix, lambda: f64) -> Result<PqrMatrix> {
        Ok(PqrMatrix {
            d: self.d,
            c: self.c.convex_combination(&other.c, lambda)?,
        })
    }

    /// Checks membership in the PQR feasible set of `map`'s separation:
    /// symmetry, zero diagonal, zero low-low block, constant shared rows.
    /// Everything is compared exactly.
    pub fn check_structure(&self, map: &PqrIndexMap) -> std::result::Result<(), String> {
        if !self.c.is_symmetric() {
            return Err("matrix is not symmetric".into());
        }
        let sep = map.separation();
        let d = self.d as u32;
        for i in 1..=d {
            if self.interaction(i, i) != 0.0 {
                return Err(format!("nonzero diagonal at {i}"));
            }
        }
        let low: Vec<u32> = (1..=d).filter(|&i| sep.is_low(i)).collect();
        for (n, &i) in low.iter().enumerate() {
            for &j in &low[n + 1..] {
                if self.interaction(i, j) != 0.0 {
                    return Err(format!("nonzero low-low entry at ({i}, {j})"));
                }
            }
        }
        for &h in sep.high() {
            if let Some((&first, rest)) = low.split_first() {
                let q = self.interaction(h, first);
                if let Some(&j) = rest.iter().find(|&&j| self.interaction(h, j) != q) {
                    return Err(format!("shared row {h} not constant at column {j}"));
                }
            }
        }
        Ok(())
    }
}

fn check_weights(weights: &[f64], map: &PqrIndexMap) -> Result<()> {
    if weights.len() != map.expanded_dim() {
        return Err(Error::Dimension(format!(
            "weight vector has {} entries, expanded dimension is {}",
            weights.len(),
            map.expanded_dim()
        )));
    }
    if map.dim() > MAX_ORACLE_DIM {
        return Err(Error::InvalidArgument(format!(
            "dense oracle limited to d <= {MAX_ORACLE_DIM}, got {}",
            map.dim()
        )));
    }
    Ok(())
}

/// Builds the augmented matrix `C` from an expanded weight vector. The
/// bias entry stores twice the bias weight so that `½ x̂ᵀ C x̂` reproduces
/// the linear prediction exactly.
pub fn assemble_matrix(weights: &[f64], map: &PqrIndexMap) -> Result<PqrMatrix> {
    check_weights(weights, map)?;
    let d = map.dim();
    let sep = map.separation();
    let mut c = DenseMatrix::zeros(d + 1, d + 1);

    let high = sep.high();
    for (a, &i) in high.iter().enumerate() {
        for &j in &high[a + 1..] {
            let p = weights[map.pair_slot(i, j).expect("both high")];
            c.set(i as usize - 1, j as usize - 1, p);
            c.set(j as usize - 1, i as usize - 1, p);
        }
        let q = weights[map.shared_slot(i).expect("high")];
        for j in (1..=d as u32).filter(|&j| sep.is_low(j)) {
            c.set(i as usize - 1, j as usize - 1, q);
            c.set(j as usize - 1, i as usize - 1, q);
        }
    }
    for (i, &w) in weights[..d].iter().enumerate() {
        c.set(i, d, w);
        c.set(d, i, w);
    }
    c.set(d, d, 2.0 * weights[map.bias_slot()]);
    Ok(PqrMatrix { d, c })
}

/// Dense evaluation of `½ x̂ᵀ C x̂` with `x̂ = (x, 1)`.
pub fn predict_quadratic_form(matrix: &PqrMatrix, features: &[(u32, f64)]) -> Result<f64> {
    let d = matrix.d;
    let mut xhat = vec![0.0; d + 1];
    for &(i, v) in features {
        if i == 0 || i as usize > d {
            return Err(Error::Dimension(format!("feature index {i} outside [1, {d}]")));
        }
        xhat[i as usize - 1] = v;
    }
    xhat[d] = 1.0;
    let mut total = 0.0;
    for r in 0..=d {
        let row: f64 = matrix.c.row(r).iter().zip(&xhat).map(|(c, x)| c * x).sum();
        total += xhat[r] * row;
    }
    Ok(0.5 * total)
}

/// Factorization `A = Pᵀ M P` of the interaction block.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionDecomposition {
    /// `(k+1)×d`: rows `0..k` select the high features by rank, row `k`
    /// is the indicator of the low-frequency set.
    pub projection: DenseMatrix,
    /// `(k+1)×(k+1)` symmetric, zero diagonal.
    pub core: DenseMatrix,
}

impl ProjectionDecomposition {
    /// `Pᵀ M P`.
    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        self.projection
            .transpose()
            .matmul(&self.core)?
            .matmul(&self.projection)
    }
}

pub fn decompose_projection(weights: &[f64], map: &PqrIndexMap) -> Result<ProjectionDecomposition> {
    check_weights(weights, map)?;
    let d = map.dim();
    let k = map.k();
    let sep = map.separation();

    let mut projection = DenseMatrix::zeros(k + 1, d);
    for (r, &i) in sep.high().iter().enumerate() {
        projection.set(r, i as usize - 1, 1.0);
    }
    for j in (1..=d as u32).filter(|&j| sep.is_low(j)) {
        projection.set(k, j as usize - 1, 1.0);
    }

    let mut core = DenseMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in a + 1..k {
            let p = weights[map.pair_slot_by_rank(a, b)];
            core.set(a, b, p);
            core.set(b, a, p);
        }
        let q = weights[map.shared_slot(sep.high()[a]).expect("high")];
        core.set(a, k, q);
        core.set(k, a, q);
    }
    Ok(ProjectionDecomposition { projection, core })
}
