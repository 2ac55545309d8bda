// SPDX-License-Identifier: Apache-2.0

//! Pricing matrices, cointegration vectors and the cointegration space.

use crate::error::{Error, Result};
use crate::numerics::{least_squares, norm2, null_space, numerical_rank, DenseMatrix};

/// Absolute zero threshold for minimality and membership.
pub const ZERO_TOL: f64 = 1e-12;
/// Relative singular-value threshold for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-12;
/// Relative residual below which `P^T c = a` counts as solved.
pub const EXACT_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalityCheck {
    pub minimal: bool,
    /// Zero-based indices of zero columns.
    pub offending: Vec<usize>,
}

/// True iff every column of `P` has sup-norm above [`ZERO_TOL`].
pub fn check_minimal(p: &DenseMatrix) -> MinimalityCheck {
    let offending: Vec<usize> = (0..p.cols())
        .filter(|&j| p.col(j).iter().all(|v| v.abs() <= ZERO_TOL))
        .collect();
    MinimalityCheck {
        minimal: offending.is_empty(),
        offending,
    }
}

pub fn check_rank(p: &DenseMatrix) -> usize {
    numerical_rank(p, RANK_REL_TOL)
}

/// Orthonormal basis of `ker P`.
pub fn kernel_basis(p: &DenseMatrix) -> Vec<Vec<f64>> {
    null_space(p, RANK_REL_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CointPairCheck {
    pub yes: bool,
    /// `(P^T c)_j` for `j = m+1..n`.
    pub residual: Vec<f64>,
}

/// Whether `P^T c` lies in `C_X^m`.
pub fn is_coint_pair(p: &DenseMatrix, c: &[f64], m: usize) -> Result<CointPairCheck> {
    if c.len() != p.rows() {
        return Err(Error::dim("c", p.rows(), c.len()));
    }
    if m > p.cols() {
        return Err(Error::Range(format!("m={m} exceeds factor dimension {}", p.cols())));
    }
    let a = p.tmatvec(c)?;
    let residual = a[m..].to_vec();
    Ok(CointPairCheck {
        yes: residual.iter().all(|v| v.abs() <= ZERO_TOL),
        residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    /// Least-squares solution.
    pub c: Vec<f64>,
    pub residual_norm: f64,
    pub exact: bool,
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<&[f64]> {
        self.exact.then_some(self.c.as_slice())
    }
}

/// Least-squares solve of `P^T c = a`; exact when the residual is at most
/// `1e-10 ‖a‖`.
pub fn solve_for_c(p: &DenseMatrix, a: &[f64]) -> Result<SolveOutcome> {
    if a.len() != p.cols() {
        return Err(Error::dim("a", p.cols(), a.len()));
    }
    let rank = check_rank(p);
    if rank != p.rows() {
        return Err(Error::Precondition(format!(
            "pricing matrix has rank {rank}, expected full row rank {}",
            p.rows()
        )));
    }
    let pt = p.transpose();
    let c = least_squares(&pt, a)?;
    let fitted = pt.matvec_unchecked(&c);
    let diff: Vec<f64> = fitted.iter().zip(a).map(|(x, y)| x - y).collect();
    let residual_norm = norm2(&diff);
    Ok(SolveOutcome {
        exact: residual_norm <= EXACT_REL_TOL * norm2(a) || residual_norm <= ZERO_TOL,
        c,
        residual_norm,
    })
}

/// Spanning set of `C_X^m`, optionally extended by declared extra
/// stationary directions among the non-stationary coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CointSpaceBasis {
    pub n: usize,
    pub m: usize,
    pub basis: Vec<Vec<f64>>,
    /// Number of trailing basis entries that were declared, not derived.
    pub n_declared: usize,
}

impl CointSpaceBasis {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(Error::Range(format!("m={m} exceeds n={n}")));
        }
        let basis = (0..m)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        Ok(Self {
            n,
            m,
            basis,
            n_declared: 0,
        })
    }

    pub fn with_declared(mut self, directions: &[Vec<f64>]) -> Result<Self> {
        for d in directions {
            if d.len() != self.n {
                return Err(Error::dim("declared stationary direction", self.n, d.len()));
            }
            self.basis.push(d.clone());
            self.n_declared += 1;
        }
        Ok(self)
    }

    /// Exact linear containment of `a` in the span, by least squares.
    pub fn contains(&self, a: &[f64]) -> Result<bool> {
        if a.len() != self.n {
            return Err(Error::dim("vector", self.n, a.len()));
        }
        if norm2(a) <= ZERO_TOL {
            return Ok(true);
        }
        if self.basis.is_empty() {
            return Ok(false);
        }
        let k = self.basis.len();
        let mut b = DenseMatrix::zeros(self.n, k);
        for (j, v) in self.basis.iter().enumerate() {
            for i in 0..self.n {
                b[(i, j)] = v[i];
            }
        }
        let x = least_squares(&b, a)?;
        let fitted = b.matvec_unchecked(&x);
        let diff: Vec<f64> = fitted.iter().zip(a).map(|(x, y)| x - y).collect();
        Ok(norm2(&diff) <= EXACT_REL_TOL * norm2(a).max(1.0))
    }
}

/// A pricing matrix with an optional cointegration vector and declared
/// stationary block size.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingSystem {
    pub p: DenseMatrix,
    pub c: Option<Vec<f64>>,
    pub m: Option<usize>,
    /// Extra stationary factor-space directions outside `C_X^m`.
    pub declared_directions: Vec<Vec<f64>>,
}

impl PricingSystem {
    /// Validates `d <= n`, full row rank and minimality.
    pub fn new(p: DenseMatrix, c: Option<Vec<f64>>, m: Option<usize>) -> Result<Self> {
        let (d, n) = (p.rows(), p.cols());
        if d > n {
            return Err(Error::Parameter(format!(
                "pricing matrix has more rows ({d}) than factors ({n})"
            )));
        }
        let mc = check_minimal(&p);
        if !mc.minimal {
            return Err(Error::Parameter(format!(
                "pricing matrix is not minimal: zero columns {:?}",
                mc.offending
            )));
        }
        let rank = check_rank(&p);
        if rank != d {
            return Err(Error::Parameter(format!(
                "pricing matrix rank {rank} below row count {d}"
            )));
        }
        if let Some(c) = &c {
            if c.len() != d {
                return Err(Error::dim("c", d, c.len()));
            }
        }
        if let Some(m) = m {
            if m > n {
                return Err(Error::Range(format!("m={m} exceeds factor dimension {n}")));
            }
        }
        Ok(Self {
            p,
            c,
            m,
            declared_directions: vec![],
        })
    }

    pub fn with_declared_directions(mut self, dirs: Vec<Vec<f64>>) -> Result<Self> {
        for d in &dirs {
            if d.len() != self.p.cols() {
                return Err(Error::dim("declared stationary direction", self.p.cols(), d.len()));
            }
        }
        self.declared_directions = dirs;
        Ok(self)
    }

    pub fn with_c(&self, c: Vec<f64>) -> Result<Self> {
        if c.len() != self.d() {
            return Err(Error::dim("c", self.d(), c.len()));
        }
        let mut out = self.clone();
        out.c = Some(c);
        Ok(out)
    }

    pub fn d(&self) -> usize {
        self.p.rows()
    }

    pub fn n(&self) -> usize {
        self.p.cols()
    }

    pub fn require_c(&self) -> Result<&[f64]> {
        self.c
            .as_deref()
            .ok_or_else(|| Error::Precondition("pricing system has no cointegration vector".into()))
    }

    pub fn require_m(&self) -> Result<usize> {
        self.m
            .ok_or_else(|| Error::Precondition("stationary block size m is not declared".into()))
    }

    /// `P^T c`.
    pub fn factor_loading(&self) -> Result<Vec<f64>> {
        self.p.tmatvec(self.require_c()?)
    }

    pub fn coint_space(&self) -> Result<CointSpaceBasis> {
        CointSpaceBasis::new(self.n(), self.require_m()?)?.with_declared(&self.declared_directions)
    }
}
