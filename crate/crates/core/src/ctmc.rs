//! Conservative rate matrices and their transition semigroups.
//!
//! A rate matrix `Q` (zero row sums, nonnegative off-diagonal entries)
//! generates the Markov semigroup `S(t) = exp(tQ)`. Two quantities are
//! computed here:
//!
//! * the transition matrix `S(t)`, by uniformization: with
//!   `lambda = max_i |q_ii|` and `P = I + Q/lambda`, the series
//!   `exp(tQ) = e^{-lambda t} sum_k (lambda t)^k / k! P^k` is summed with a
//!   certified Poisson tail; for `lambda t` beyond a base threshold the base
//!   matrix is squared up (`S(2t) = S(t)^2`), and
//! * the interval average `A_t = (1/t) int_0^t S(s) ds`, by composite
//!   Simpson quadrature on a base interval followed by the exact doubling
//!   `A_{2t} = (A_t + S(t) A_t)/2`.
//!
//! Every result carries an error estimate combining the series tail, the
//! quadrature error bound `(t h^4 / 180) * ||Q||^4` and the worst-case
//! doubling amplification.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelOperator};
use crate::space::{same_space, StateSpace};

/// Base-interval threshold for `lambda * t`.
const BASE_THRESHOLD: f64 = 1.0;
/// Relative Poisson tail kept per series evaluation.
const SERIES_TAIL: f64 = 1e-16;
/// Composite Simpson subintervals on the base interval.
const SIMPSON_INTERVALS: usize = 256;

/// A conservative rate matrix over a state space.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    space: Arc<StateSpace>,
    q: DMatrix<f64>,
}

impl RateMatrix {
    pub fn new(space: Arc<StateSpace>, entries: &[Vec<f64>]) -> Result<Self> {
        let n = space.len();
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidRate("shape mismatch".into()));
        }
        let mut q = DMatrix::zeros(n, n);
        for (i, row) in entries.iter().enumerate() {
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidRate("non-finite entry".into()));
                }
                if i != j && v < 0.0 {
                    return Err(Error::InvalidRate(format!(
                        "negative off-diagonal rate at ({i},{j})"
                    )));
                }
                q[(i, j)] = v;
                sum += v;
            }
            let scale = row.iter().map(|v| v.abs()).fold(1.0, f64::max);
            if sum.abs() > 1e-12 * scale {
                return Err(Error::InvalidRate(format!("row {i} sums to {sum}, not zero")));
            }
        }
        Ok(RateMatrix { space, q })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Uniformization rate `max_i |q_ii|`.
    pub fn uniform_rate(&self) -> f64 {
        (0..self.space.len()).map(|i| self.q[(i, i)].abs()).fold(0.0, f64::max)
    }

    /// Transition matrix `exp(tQ)` with its error estimate.
    pub fn transition(&self, t: f64) -> Result<MatrixWithError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Parameter(format!("time {t} must be nonnegative")));
        }
        let n = self.space.len();
        if t == 0.0 || self.uniform_rate() == 0.0 {
            return Ok(MatrixWithError { matrix: DMatrix::identity(n, n), error: 0.0, doublings: 0 });
        }
        let lambda = self.uniform_rate();
        let doublings = if lambda * t <= BASE_THRESHOLD {
            0
        } else {
            (lambda * t / BASE_THRESHOLD).log2().ceil() as u32
        };
        let base_t = t / 2f64.powi(doublings as i32);
        let (mut m, tail) = self.uniformized_exp(base_t);
        let mut err = tail;
        for _ in 0..doublings {
            m = &m * &m;
            err *= 2.0;
        }
        Ok(MatrixWithError { matrix: m, error: err, doublings })
    }

    /// Series evaluation of `exp(tQ)` for `lambda * t` at most the base
    /// threshold; returns the matrix and the certified tail.
    fn uniformized_exp(&self, t: f64) -> (DMatrix<f64>, f64) {
        let n = self.space.len();
        let lambda = self.uniform_rate();
        let p = DMatrix::identity(n, n) + &self.q / lambda;
        let lt = lambda * t;
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        let mut coeff = 1.0f64; // (lambda t)^k / k!
        let mut cumulative = 1.0f64;
        let mut k = 0u32;
        loop {
            k += 1;
            term = &term * &p;
            coeff *= lt / k as f64;
            sum += &term * coeff;
            cumulative += coeff;
            // remaining Poisson mass, bounded by a geometric tail once lt < k
            if k as f64 > lt && coeff * (lt / (k as f64 + 1.0 - lt)) < SERIES_TAIL * cumulative {
                break;
            }
            if k > 10_000 {
                break;
            }
        }
        let scale = (-lt).exp();
        (sum * scale, SERIES_TAIL)
    }

    /// Interval average `A_t = (1/t) int_0^t exp(sQ) ds` with error estimate.
    pub fn interval_average(&self, t: f64) -> Result<MatrixWithError> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Parameter(format!("time {t} must be positive")));
        }
        let n = self.space.len();
        let lambda = self.uniform_rate();
        if lambda == 0.0 {
            return Ok(MatrixWithError { matrix: DMatrix::identity(n, n), error: 0.0, doublings: 0 });
        }
        let doublings = if lambda * t <= BASE_THRESHOLD {
            0
        } else {
            (lambda * t / BASE_THRESHOLD).log2().ceil() as u32
        };
        let base_t = t / 2f64.powi(doublings as i32);

        // Composite Simpson on [0, base_t] with transition steps between nodes.
        let m = SIMPSON_INTERVALS;
        let h = base_t / m as f64;
        let (step, step_tail) = self.uniformized_exp(h);
        let mut node = DMatrix::identity(n, n); // S(0)
        let mut acc = node.clone(); // Simpson weights accumulate below
        let mut weight_sum = 1.0f64;
        for i in 1..=m {
            node = &node * &step;
            let w = if i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += &node * w;
            weight_sum += w;
        }
        // Simpson: integral ~ (h/3) * acc; average divides by base_t.
        let mut avg = acc * (h / (3.0 * base_t));
        debug_assert!((weight_sum - 3.0 * m as f64).abs() < 1e-9);
        // quadrature error: (len * h^4 / 180) * ||Q||^4, normalized by base_t
        let qn = 2.0 * lambda;
        let quad_err = base_t * h.powi(4) * qn.powi(4) / 180.0 / base_t;
        let series_err = (m as f64) * step_tail;

        let mut s_t = self.transition(base_t)?;
        let mut err = quad_err + series_err + s_t.error;
        let mut d = 0;
        while d < doublings {
            // A_{2t} = (A_t + S(t) A_t) / 2, S(2t) = S(t)^2
            avg = (&avg + &s_t.matrix * &avg) * 0.5;
            s_t.matrix = &s_t.matrix * &s_t.matrix;
            err *= 2.0;
            d += 1;
        }
        Ok(MatrixWithError { matrix: avg, error: err, doublings })
    }

    /// Wraps a dense transition-style matrix as a kernel on this space.
    pub fn kernel_from(&self, m: &DMatrix<f64>) -> Result<KernelOperator> {
        let rows: Vec<Vec<f64>> = (0..self.space.len())
            .map(|i| (0..self.space.len()).map(|j| m[(i, j)]).collect())
            .collect();
        Ok(KernelOperator::new(Kernel::from_matrix(self.space.clone(), &rows)?))
    }
}

/// A dense matrix with a tracked error estimate.
#[derive(Debug, Clone)]
pub struct MatrixWithError {
    pub matrix: DMatrix<f64>,
    pub error: f64,
    pub doublings: u32,
}

/// Applies a dense matrix to function values (row-wise action).
pub fn act_forward(m: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n).map(|i| (0..n).map(|j| m[(i, j)] * values[j]).sum()).collect()
}

/// Applies a dense matrix to measure weights (column-wise action).
pub fn act_adjoint(m: &DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    (0..n).map(|j| (0..n).map(|i| weights[i] * m[(i, j)]).sum()).collect()
}

/// Two-state symmetric rate model used widely in tests and fixtures.
pub fn symmetric_two_state(space: Arc<StateSpace>) -> Result<RateMatrix> {
    if space.len() != 2 {
        return Err(Error::InvalidRate("two-state builder needs two states".into()));
    }
    RateMatrix::new(space, &[vec![-1.0, 1.0], vec![1.0, -1.0]])
}

pub fn check_same_space(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}
