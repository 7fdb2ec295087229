//! Banded LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i − kl ..= i + kl + ku`; the extra `kl`
//! superdiagonals hold the fill created by row interchanges. Multipliers
//! are stored in place of the eliminated entries and are not permuted
//! afterwards, so the factorization is `P₁L₁P₂L₂…U`, as in LAPACK's `gbtrf`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum BandError {
    Singular { column: usize },
    OutOfBand { row: usize, col: usize },
    Dimension,
}

impl fmt::Display for BandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandError::Singular { column } => write!(f, "Jacobian singular (zero pivot in column {column})"),
            BandError::OutOfBand { row, col } => write!(f, "entry ({row}, {col}) lies outside the band"),
            BandError::Dimension => write!(f, "right-hand side length does not match the matrix"),
        }
    }
}

impl core::error::Error for BandError {}

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width], pivots: Vec::new(), factored: false }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        row * self.width + (col + self.kl - row)
    }

    /// Whether `(row, col)` may be set before factorization.
    pub fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && col + self.kl >= row && col <= row + self.ku
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.kl >= row && col <= row + self.kl + self.ku && row < self.n && col < self.n {
            self.data[self.slot(row, col)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<(), BandError> {
        if !self.in_band(row, col) {
            return Err(BandError::OutOfBand { row, col });
        }
        let k = self.slot(row, col);
        self.data[k] = value;
        Ok(())
    }

    /// Factor in place.
    pub fn factor(&mut self) -> Result<(), BandError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        self.pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(BandError::Singular { column: k });
            }
            self.pivots[k] = piv;
            if piv != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let b = self.slot(piv, j);
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(k, k)];
            for r in k + 1..=last_row {
                let rk = self.slot(r, k);
                let l = self.data[rk] / d;
                self.data[rk] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = self.data[self.slot(k, j)];
                    let rj = self.slot(r, j);
                    self.data[rj] -= l * kj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solve `A x = b` in place; factors first if needed.
    pub fn solve(&mut self, b: &mut [f64]) -> Result<(), BandError> {
        if b.len() != self.n {
            return Err(BandError::Dimension);
        }
        if !self.factored {
            self.factor()?;
        }
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let piv = self.pivots[k];
            if piv != k {
                b.swap(k, piv);
            }
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                b[r] -= self.data[self.slot(r, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.data[self.slot(k, j)] * b[j];
            }
            b[k] = s / self.data[self.slot(k, k)];
        }
        Ok(())
    }
}
