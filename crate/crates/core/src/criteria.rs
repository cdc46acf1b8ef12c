//! Partial transposition, the PPT test, realignment and the cross-norm test.
//!
//! A `d = N*M` matrix can be read two ways. `InnerBlocks` reads it as `N (x) M`
//! and transposes each of the `N^2` blocks of size `M x M` in place (transpose on
//! the second factor). `OuterBlocks` reads it as `M (x) N` and transposes each of
//! the `M^2` blocks of size `N x N`. For `N != M` the two are inequivalent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_psd_shifted, min_hermitian_eigenvalue, trace_norm, CMatrix};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[serde(rename = "inner")]
    InnerBlocks,
    #[serde(rename = "outer")]
    OuterBlocks,
}

impl Convention {
    pub fn as_str(self) -> &'static str {
        match self {
            Convention::InnerBlocks => "inner",
            Convention::OuterBlocks => "outer",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Ppt,
    CrossNorm,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Ppt => "ppt",
            Criterion::CrossNorm => "cross_norm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub d_a: usize,
    pub d_b: usize,
    pub convention: Convention,
}

impl Split {
    pub fn new(d_a: usize, d_b: usize, convention: Convention) -> Self {
        Split { d_a, d_b, convention }
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.d_b
    }

    /// `(outer, inner)` factor sizes of the reading this convention uses.
    pub fn reading(&self) -> (usize, usize) {
        match self.convention {
            Convention::InnerBlocks => (self.d_a, self.d_b),
            Convention::OuterBlocks => (self.d_b, self.d_a),
        }
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        if self.d_a == 0 || self.d_b == 0 {
            return Err(Error::Domain("subsystem dimensions must be positive".into()));
        }
        if !m.is_square() || m.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: m.nrows(),
            });
        }
        Ok(())
    }
}

/// Transposes every `inner x inner` block of `m` in place.
fn transpose_blocks(m: &CMatrix, outer: usize, inner: usize) -> CMatrix {
    let d = outer * inner;
    CMatrix::from_fn(d, d, |r, c| {
        let (i, k) = (r / inner, r % inner);
        let (j, l) = (c / inner, c % inner);
        m[(i * inner + l, j * inner + k)]
    })
}

/// Partial transpose on the second factor of the reading selected by `split`.
pub fn partial_transpose(rho: &CMatrix, split: Split) -> Result<CMatrix> {
    split.check(rho)?;
    let (outer, inner) = split.reading();
    Ok(transpose_blocks(rho, outer, inner))
}

/// Partial transpose on the first factor of the same reading: swaps blocks
/// `(i, j)` and `(j, i)` without transposing their contents.
pub fn partial_transpose_first(rho: &CMatrix, split: Split) -> Result<CMatrix> {
    split.check(rho)?;
    let (outer, inner) = split.reading();
    let d = outer * inner;
    Ok(CMatrix::from_fn(d, d, |r, c| {
        let (i, k) = (r / inner, r % inner);
        let (j, l) = (c / inner, c % inner);
        rho[(j * inner + k, i * inner + l)]
    }))
}

/// `(passes, smallest eigenvalue of the partial transpose)`.
pub fn is_ppt(rho: &CMatrix, split: Split, tol: f64) -> Result<(bool, f64)> {
    let pt = partial_transpose(rho, split)?;
    let min = min_hermitian_eigenvalue(&pt);
    Ok((min >= -tol, min))
}

/// Realignment in the reading selected by `split`: each `inner x inner` block
/// `(i, k)` of `rho` becomes row `i*outer + k`, flattened row-major.
pub fn realign(rho: &CMatrix, split: Split) -> Result<CMatrix> {
    split.check(rho)?;
    let (outer, inner) = split.reading();
    Ok(CMatrix::from_fn(outer * outer, inner * inner, |r, c| {
        let (i, k) = (r / outer, r % outer);
        let (j, l) = (c / inner, c % inner);
        rho[(i * inner + j, k * inner + l)]
    }))
}

/// `(passes, trace norm of the realigned matrix)`; separable states have norm at most 1.
pub fn cross_norm_pass(rho: &CMatrix, split: Split, tol: f64) -> Result<(bool, f64)> {
    let value = trace_norm(&realign(rho, split)?);
    Ok((value <= 1.0 + tol, value))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionOutcome {
    pub convention: Convention,
    pub pass: bool,
    /// Minimum PT eigenvalue (PPT) or realignment trace norm (cross-norm).
    /// NaN for PPT outcomes from [`CriteriaPlan::decide`].
    pub value: f64,
}

/// Results of every requested criterion for one state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub ppt: Vec<ConventionOutcome>,
    pub cross_norm: Vec<ConventionOutcome>,
}

impl CriterionOutcome {
    pub fn get(&self, criterion: Criterion, convention: Convention) -> Option<&ConventionOutcome> {
        let list = match criterion {
            Criterion::Ppt => &self.ppt,
            Criterion::CrossNorm => &self.cross_norm,
        };
        list.iter().find(|o| o.convention == convention)
    }

    pub fn passes(&self, criterion: Criterion, convention: Convention) -> bool {
        self.get(criterion, convention).is_some_and(|o| o.pass)
    }
}

/// Conventions worth computing for an `N (x) M` system: both when `N != M`,
/// one when the two readings coincide.
pub fn conventions_for(d_a: usize, d_b: usize) -> Vec<Convention> {
    if d_a == d_b {
        vec![Convention::InnerBlocks]
    } else {
        vec![Convention::InnerBlocks, Convention::OuterBlocks]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaPlan {
    pub d_a: usize,
    pub d_b: usize,
    pub criteria: Vec<Criterion>,
    pub conventions: Vec<Convention>,
    pub ppt_tolerance: f64,
    pub cross_norm_tolerance: f64,
}

impl CriteriaPlan {
    pub fn new(d_a: usize, d_b: usize, criteria: Vec<Criterion>) -> Self {
        CriteriaPlan {
            d_a,
            d_b,
            criteria,
            conventions: conventions_for(d_a, d_b),
            ppt_tolerance: DEFAULT_TOLERANCE,
            cross_norm_tolerance: DEFAULT_TOLERANCE,
        }
    }

    /// Full outcomes, including the minimum PT eigenvalue.
    pub fn evaluate(&self, rho: &CMatrix) -> Result<CriterionOutcome> {
        self.run(rho, true)
    }

    /// Pass/fail outcomes. The PPT test uses a shifted Cholesky factorization
    /// instead of an eigendecomposition and leaves the value as NaN.
    pub fn decide(&self, rho: &CMatrix) -> Result<CriterionOutcome> {
        self.run(rho, false)
    }

    fn run(&self, rho: &CMatrix, values: bool) -> Result<CriterionOutcome> {
        let mut out = CriterionOutcome::default();
        for &criterion in &self.criteria {
            for &convention in &self.conventions {
                let split = Split::new(self.d_a, self.d_b, convention);
                let (pass, value) = match criterion {
                    Criterion::Ppt if values => is_ppt(rho, split, self.ppt_tolerance)?,
                    Criterion::Ppt => {
                        let pt = partial_transpose(rho, split)?;
                        (is_psd_shifted(&pt, self.ppt_tolerance), f64::NAN)
                    }
                    Criterion::CrossNorm => cross_norm_pass(rho, split, self.cross_norm_tolerance)?,
                };
                let o = ConventionOutcome { convention, pass, value };
                match criterion {
                    Criterion::Ppt => out.ppt.push(o),
                    Criterion::CrossNorm => out.cross_norm.push(o),
                }
            }
        }
        Ok(out)
    }
}
