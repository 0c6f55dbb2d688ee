//! Fixed spaces of kernel operators and the mutual separation test.
//!
//! The fixed space on the function side is the numerical null space of
//! `I - S` on the truncation, on the measure side that of `I - S'`; both are
//! computed through a dense singular value decomposition with a relative
//! threshold. Bases returned here are orthonormal in the Euclidean sense and
//! carry their per-element residuals `||(I - S) b||`.
//!
//! The separation test forms the pairing Gram matrix between a function-side
//! and a measure-side basis. The fixed measures separate the fixed functions
//! when no nonzero combination of the function basis is annihilated by every
//! fixed measure, i.e. when the Gram matrix has full rank against the
//! function side; dually with the roles swapped. The smallest relevant
//! singular value is reported as the separation margin.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::KernelOperator;
use crate::measure::SignedMeasure;

/// Relative singular-value threshold for the numerical null space.
pub const NULLSPACE_RTOL: f64 = 1e-8;

/// Which side of the dual pair a basis lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Function,
    Measure,
}

/// Orthonormal numerical basis of a fixed space.
#[derive(Debug, Clone, Serialize)]
pub struct FixedSpaceBasis {
    pub side: Side,
    /// Basis vectors as dense coordinate vectors over the truncation.
    pub vectors: Vec<Vec<f64>>,
    /// `||(I - S) b||` per element (sup norm on the function side, variation
    /// norm on the measure side).
    pub residuals: Vec<f64>,
    /// All singular values of `I - S` (descending), for threshold audits.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Rows whose leak makes the truncated operator differ from the intended
    /// dynamics; nonempty lists usually mean the truncation is too small for
    /// the declared tail behavior.
    pub warnings: Vec<String>,
}

impl FixedSpaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Euclidean residual of `candidate` against the span of this basis.
    pub fn span_residual(&self, candidate: &[f64]) -> f64 {
        let mut rest: Vec<f64> = candidate.to_vec();
        let norm = rest.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        for b in &self.vectors {
            let dot: f64 = rest.iter().zip(b).map(|(a, c)| a * c).sum();
            for (r, c) in rest.iter_mut().zip(b) {
                *r -= dot * c;
            }
        }
        rest.iter().map(|v| v * v).sum::<f64>().sqrt() / norm
    }

    pub fn functions(&self, s: &KernelOperator) -> Result<Vec<BoundedFunction>> {
        if self.side != Side::Function {
            return Err(Error::Parameter("basis lives on the measure side".into()));
        }
        self.vectors
            .iter()
            .map(|v| {
                BoundedFunction::new(s.space().clone(), v.clone(), Some(crate::function::TailRule::Zero), None)
            })
            .collect()
    }

    pub fn measures(&self, s: &KernelOperator) -> Result<Vec<SignedMeasure>> {
        if self.side != Side::Measure {
            return Err(Error::Parameter("basis lives on the function side".into()));
        }
        self.vectors
            .iter()
            .map(|v| {
                let weights = v
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(i, &w)| (i, w))
                    .collect();
                SignedMeasure::new(s.space().clone(), weights)
            })
            .collect()
    }
}

/// Numerical null space of `I - S` (function side) or `I - S'` (measure side).
pub fn fixed_space(s: &KernelOperator, side: Side) -> Result<FixedSpaceBasis> {
    fixed_space_with_rtol(s, side, NULLSPACE_RTOL)
}

pub fn fixed_space_with_rtol(s: &KernelOperator, side: Side, rtol: f64) -> Result<FixedSpaceBasis> {
    let n = s.space().len();
    let k = s.kernel().to_matrix();
    let action = match side {
        Side::Function => k.clone(),
        Side::Measure => k.transpose(),
    };
    let m = DMatrix::identity(n, n) - &action;
    let svd = m.clone().svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Solver("SVD did not return right singular vectors".into()))?;
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let threshold = if sigma_max > 0.0 { rtol * sigma_max } else { rtol };

    let mut vectors = Vec::new();
    let mut residuals = Vec::new();
    for (i, sv) in svd.singular_values.iter().enumerate() {
        if *sv <= threshold {
            let b: Vec<f64> = (0..n).map(|j| v_t[(i, j)]).collect();
            let image = &m * DMatrix::from_column_slice(n, 1, &b);
            let residual = match side {
                Side::Function => image.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
                Side::Measure => image.iter().map(|v| v.abs()).sum(),
            };
            vectors.push(b);
            residuals.push(residual);
        }
    }

    let leaking = s.kernel().leaking_rows(crate::kernel::MARKOV_TOL);
    let warnings = if leaking.is_empty() {
        vec![]
    } else {
        vec![format!(
            "{} row(s) leak mass outside the truncation (first: {}); the computed fixed space \
             reflects the truncated dynamics",
            leaking.len(),
            s.space().name(leaking[0])
        )]
    };

    Ok(FixedSpaceBasis { side, vectors, residuals, singular_values, threshold, warnings })
}

/// Outcome of the mutual separation test.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationVerdict {
    /// Gram matrix entries `<b_i, m_j>`, rows over the function basis.
    pub gram: Vec<Vec<f64>>,
    /// Fixed measures separate fixed functions (no nonzero fixed function is
    /// annihilated by every fixed measure).
    pub measures_separate_functions: bool,
    /// Fixed functions separate fixed measures.
    pub functions_separate_measures: bool,
    /// Smallest singular value that had to be nonzero, or infinity when a
    /// direction holds trivially.
    pub margin: f64,
}

impl SeparationVerdict {
    pub fn separates_both_ways(&self) -> bool {
        self.measures_separate_functions && self.functions_separate_measures
    }
}

/// Tests whether two fixed-space bases separate each other through the
/// pairing. Empty bases separate trivially from their own side.
pub fn separation_test(
    function_basis: &[Vec<f64>],
    measure_basis: &[Vec<f64>],
) -> Result<SeparationVerdict> {
    let nf = function_basis.len();
    let nm = measure_basis.len();
    let gram: Vec<Vec<f64>> = function_basis
        .iter()
        .map(|f| {
            measure_basis
                .iter()
                .map(|m| f.iter().zip(m).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    if nf == 0 && nm == 0 {
        return Ok(SeparationVerdict {
            gram,
            measures_separate_functions: true,
            functions_separate_measures: true,
            margin: f64::INFINITY,
        });
    }
    if nf == 0 || nm == 0 {
        // a nonzero fixed element on the populated side is annihilated by
        // the empty opposite side
        return Ok(SeparationVerdict {
            gram,
            measures_separate_functions: nf == 0,
            functions_separate_measures: nm == 0,
            margin: 0.0,
        });
    }
    let g = DMatrix::from_fn(nf, nm, |i, j| gram[i][j]);
    let mut svals: Vec<f64> = g.svd(false, false).singular_values.iter().copied().collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma_max = svals.first().copied().unwrap_or(0.0);
    let tol = 1e-10 * sigma_max.max(1.0);
    let rank = svals.iter().filter(|&&s| s > tol).count();
    let measures_separate_functions = rank == nf;
    let functions_separate_measures = rank == nm;
    let margin = if rank == 0 { 0.0 } else { svals[rank.min(svals.len()) - 1] };
    Ok(SeparationVerdict { gram, measures_separate_functions, functions_separate_measures, margin })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::kernel::Kernel;
    use crate::space::{Metric, StateSpace};

    fn space(n: usize) -> Arc<StateSpace> {
        let names = (0..n).map(|i| format!("s{i}")).collect();
        StateSpace::new(
            names,
            Metric::Line { coords: (0..n).map(|i| i as f64).collect() },
            vec![(0..n).collect()],
            vec![],
        )
        .unwrap()
    }

    fn chain3() -> KernelOperator {
        KernelOperator::new(
            Kernel::from_matrix(
                space(3),
                &[
                    vec![0.5, 0.25, 0.25],
                    vec![0.2, 0.6, 0.2],
                    vec![0.3, 0.3, 0.4],
                ],
            )
            .unwrap(),
        )
    }

    /// Stationary distribution by an independent route: direct linear solve
    /// of the balance equations with the normalization row.
    fn stationary_by_solve(s: &KernelOperator) -> Vec<f64> {
        let n = s.space().len();
        let k = s.kernel().to_matrix();
        let mut a = k.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = nalgebra::DVector::zeros(n);
        b[n - 1] = 1.0;
        let sol = a.lu().solve(&b).unwrap();
        sol.iter().copied().collect()
    }

    #[test]
    fn identity_operator_has_full_fixed_space() {
        let id = KernelOperator::identity(space(4));
        let basis = fixed_space(&id, Side::Function).unwrap();
        assert_eq!(basis.dim(), 4);
        assert!(basis.residuals.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn irreducible_chain_fixed_spaces() {
        let s = chain3();
        let fun = fixed_space(&s, Side::Function).unwrap();
        assert_eq!(fun.dim(), 1);
        // span{1}: the normalized constant vector lies in the span
        let c = 1.0 / 3f64.sqrt();
        assert!(fun.span_residual(&[c, c, c]) < 1e-10);
        assert!(fun.residuals[0] < 1e-10);

        let meas = fixed_space(&s, Side::Measure).unwrap();
        assert_eq!(meas.dim(), 1);
        let pi = stationary_by_solve(&s);
        assert!(meas.span_residual(&pi) < 1e-10);
    }

    #[test]
    fn separation_of_irreducible_chain() {
        let s = chain3();
        let pi = stationary_by_solve(&s);
        let verdict = separation_test(&[vec![1.0, 1.0, 1.0]], &[pi]).unwrap();
        assert!(verdict.separates_both_ways());
        assert!((verdict.gram[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_measure_side_fails_to_separate() {
        let verdict = separation_test(&[vec![1.0, 1.0]], &[]).unwrap();
        assert!(!verdict.measures_separate_functions);
        assert!(verdict.functions_separate_measures);
    }

    #[test]
    fn rank_deficient_gram_detected() {
        // two fixed functions paired against a single measure cannot be separated
        let verdict =
            separation_test(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[vec![0.5, 0.5]]).unwrap();
        assert!(!verdict.measures_separate_functions);
        assert!(verdict.functions_separate_measures);
    }

    #[test]
    fn leaking_kernel_warns() {
        let sp = space(2);
        let k = Kernel::deterministic(sp, |x| if x == 0 { Some(1) } else { None }).unwrap();
        let s = KernelOperator::new(k);
        let basis = fixed_space(&s, Side::Function).unwrap();
        assert!(!basis.warnings.is_empty());
    }
}
