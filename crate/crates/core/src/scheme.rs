//! Averaging schemes over a kernel semigroup and their axioms.
//!
//! An *average scheme* pairs a semigroup of sigma-continuous operators with
//! a norm-bounded net of averaging operators built from convex orbit
//! combinations. Three axioms pin the notion down, and this module verifies
//! all three numerically on finite grids:
//!
//! * **AS1** (uniform norm bound): `||A_a|| <= M` across the grid, probed
//!   through function and measure suprema. Point masses realize the adjoint
//!   operator norm exactly, so the estimate is sharp on finite truncations.
//! * **AS2** (convex orbit hull): every average lies in the closed convex
//!   hull of the orbit. Closed-hull membership is not finitely decidable;
//!   the verifier checks the necessary finite-orbit condition that each
//!   computed average sits in the pointwise convex hull of the orbit
//!   segment it was built from.
//! * **AS3** (asymptotic annihilation): `A_a (S - I) x -> 0` in norm, on
//!   both the function and the measure side, with the scheme's exact
//!   algebraic identity tracked alongside the decay.
//!
//! Three scheme families are provided: Cesaro averages
//! `A_n = (1/n) sum_{k<n} S^k` (identity `A_n (S - I) = (S^n - I)/n`), Abel
//! averages `A_r = (1-r) sum r^k S^k` (identity
//! `||A_r S x - A_r x|| = (1-r) ||x - A_r S x||`), and continuous-time
//! interval averages `A_t = (1/t) int_0^t S(s) ds` (identity
//! `A_t S(s) - A_t = (s/t)(S(t) - I) A_s`).

use serde::{Deserialize, Serialize};

use crate::ctmc::{act_adjoint, act_forward, RateMatrix};
use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::KernelOperator;
use crate::measure::SignedMeasure;

/// Default geometric tail kept by the Abel series.
pub const ABEL_SERIES_EPS: f64 = 1e-12;
/// Series terms beyond which the Abel evaluator switches to a resolvent solve.
pub const ABEL_SERIES_LIMIT: u64 = 100_000;
/// Cesaro sums up to this length are accumulated term by term (integer-exact
/// for indicator orbits); longer sums use binary splitting on the power ladder.
pub const CESARO_DIRECT_LIMIT: u64 = 4096;

/// Grid family of an averaging scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    Cesaro { n_grid: Vec<u64> },
    Abel { r_grid: Vec<f64> },
    Time { t_grid: Vec<f64> },
}

/// A scheme declaration: the grid plus the claimed AS1 bound `M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub norm_bound: f64,
}

impl SchemeSpec {
    pub fn cesaro(n_grid: Vec<u64>, norm_bound: f64) -> Result<Self> {
        let spec = SchemeSpec { kind: SchemeKind::Cesaro { n_grid }, norm_bound };
        spec.validate()?;
        Ok(spec)
    }

    pub fn abel(r_grid: Vec<f64>, norm_bound: f64) -> Result<Self> {
        let spec = SchemeSpec { kind: SchemeKind::Abel { r_grid }, norm_bound };
        spec.validate()?;
        Ok(spec)
    }

    pub fn time(t_grid: Vec<f64>, norm_bound: f64) -> Result<Self> {
        let spec = SchemeSpec { kind: SchemeKind::Time { t_grid }, norm_bound };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.norm_bound.is_finite() && self.norm_bound > 0.0) {
            return Err(Error::InvalidGrid("norm bound must be positive".into()));
        }
        match &self.kind {
            SchemeKind::Cesaro { n_grid } => {
                if n_grid.is_empty() || n_grid[0] == 0 {
                    return Err(Error::InvalidGrid("Cesaro grid must start at n >= 1".into()));
                }
                if n_grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidGrid("Cesaro grid must be strictly increasing".into()));
                }
            }
            SchemeKind::Abel { r_grid } => {
                if r_grid.is_empty() {
                    return Err(Error::InvalidGrid("empty Abel grid".into()));
                }
                if r_grid.iter().any(|&r| !(0.0..1.0).contains(&r)) {
                    return Err(Error::InvalidGrid("Abel grid must lie in [0, 1)".into()));
                }
                if r_grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidGrid("Abel grid must be strictly increasing".into()));
                }
            }
            SchemeKind::Time { t_grid } => {
                if t_grid.is_empty() {
                    return Err(Error::InvalidGrid("empty time grid".into()));
                }
                if t_grid.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
                    return Err(Error::InvalidGrid("time grid must be positive".into()));
                }
                if t_grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidGrid("time grid must be strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Grid points as floating labels (n, r or t).
    pub fn grid_labels(&self) -> Vec<f64> {
        match &self.kind {
            SchemeKind::Cesaro { n_grid } => n_grid.iter().map(|&n| n as f64).collect(),
            SchemeKind::Abel { r_grid } => r_grid.clone(),
            SchemeKind::Time { t_grid } => t_grid.clone(),
        }
    }
}

/// `1, 2, 4, ..., 2^max_pow`.
pub fn dyadic_grid(max_pow: u32) -> Vec<u64> {
    (0..=max_pow).map(|k| 1u64 << k).collect()
}

// ---------------------------------------------------------------------------
// Cesaro averages
// ---------------------------------------------------------------------------

/// `A_n f = (1/n) sum_{k=0}^{n-1} S^k f`.
pub fn cesaro_avg(s: &KernelOperator, n: u64, f: &BoundedFunction) -> Result<BoundedFunction> {
    if n == 0 {
        return Err(Error::Parameter("Cesaro index must be >= 1".into()));
    }
    let sum = if n <= CESARO_DIRECT_LIMIT {
        let mut acc = f.values().to_vec();
        let mut g = f.clone();
        for _ in 1..n {
            g = s.forward_apply(&g)?;
            for (a, v) in acc.iter_mut().zip(g.values()) {
                *a += v;
            }
        }
        f.with_values(acc)
    } else {
        cesaro_sum_fn(s, n, f)?
    };
    // true division keeps integer-count orbits exact (3/5 vs 3 * (1/5))
    let d = n as f64;
    Ok(sum.with_values(sum.values().iter().map(|v| v / d).collect()))
}

/// Binary splitting for `sum_{k<n} S^k f` on the power ladder.
fn cesaro_sum_fn(s: &KernelOperator, n: u64, f: &BoundedFunction) -> Result<BoundedFunction> {
    if n == 1 {
        return Ok(f.clone());
    }
    if n % 2 == 0 {
        let half = cesaro_sum_fn(s, n / 2, f)?;
        let shifted = s.power(n / 2)?.forward_apply(&half)?;
        half.combine(1.0, &shifted, 1.0)
    } else {
        let even = cesaro_sum_fn(s, n - 1, f)?;
        let last = s.power(n - 1)?.forward_apply(f)?;
        even.combine(1.0, &last, 1.0)
    }
}

/// `A'_n mu = (1/n) sum_{k=0}^{n-1} (S')^k mu`.
pub fn cesaro_avg_adjoint(s: &KernelOperator, n: u64, mu: &SignedMeasure) -> Result<SignedMeasure> {
    if n == 0 {
        return Err(Error::Parameter("Cesaro index must be >= 1".into()));
    }
    let sum = if n <= CESARO_DIRECT_LIMIT {
        let mut acc = mu.clone();
        let mut nu = mu.clone();
        for _ in 1..n {
            nu = s.adjoint_apply(&nu)?;
            acc = acc.combine(1.0, &nu, 1.0)?;
        }
        acc
    } else {
        cesaro_sum_meas(s, n, mu)?
    };
    let d = n as f64;
    let weights = sum.weights().iter().map(|(&i, &w)| (i, w / d)).collect();
    SignedMeasure::new(s.space().clone(), weights)
}

fn cesaro_sum_meas(s: &KernelOperator, n: u64, mu: &SignedMeasure) -> Result<SignedMeasure> {
    if n == 1 {
        return Ok(mu.clone());
    }
    if n % 2 == 0 {
        let half = cesaro_sum_meas(s, n / 2, mu)?;
        let shifted = s.power(n / 2)?.adjoint_apply(&half)?;
        half.combine(1.0, &shifted, 1.0)
    } else {
        let even = cesaro_sum_meas(s, n - 1, mu)?;
        let last = s.power(n - 1)?.adjoint_apply(mu)?;
        even.combine(1.0, &last, 1.0)
    }
}

/// Materializes `A_n` itself as a kernel operator (rows are the adjoint
/// averages of point masses, with leak carried through). Binary splitting on
/// kernels keeps large dyadic indices affordable.
pub fn cesaro_kernel(s: &KernelOperator, n: u64) -> Result<KernelOperator> {
    use crate::kernel::{Kernel, Row};
    if n == 0 {
        return Err(Error::Parameter("Cesaro index must be >= 1".into()));
    }
    fn add_rows(a: &KernelOperator, b: &KernelOperator) -> Result<KernelOperator> {
        let rows: Vec<Row> = a
            .kernel()
            .rows()
            .iter()
            .zip(b.kernel().rows())
            .map(|(ra, rb)| {
                let mut weights = ra.weights.clone();
                for (&y, &w) in &rb.weights {
                    *weights.entry(y).or_insert(0.0) += w;
                }
                weights.retain(|_, w| *w != 0.0);
                Row { weights, leak: ra.leak + rb.leak }
            })
            .collect();
        Ok(KernelOperator::new(Kernel::new(a.space().clone(), rows)?))
    }
    fn sum_kernel(s: &KernelOperator, n: u64) -> Result<KernelOperator> {
        if n == 1 {
            return Ok(s.power(1)?);
        }
        if n % 2 == 0 {
            let half = sum_kernel(s, n / 2)?;
            let shifted = half.compose(&s.power(n / 2)?)?;
            add_rows(&half, &shifted)
        } else {
            let even = sum_kernel(s, n - 1)?;
            add_rows(&even, &s.power(n - 1)?)
        }
    }
    // sum over S^1..S^n shifted: the Cesaro sum starts at S^0 = I
    let tail = if n == 1 { None } else { Some(sum_kernel(s, n - 1)?) };
    let id = KernelOperator::identity(s.space().clone());
    let total = match tail {
        Some(t) => add_rows(&id, &t)?,
        None => id,
    };
    let d = n as f64;
    let rows: Vec<Row> = total
        .kernel()
        .rows()
        .iter()
        .map(|r| Row {
            weights: r.weights.iter().map(|(&y, &w)| (y, w / d)).collect(),
            leak: r.leak / d,
        })
        .collect();
    Ok(KernelOperator::new(Kernel::new(s.space().clone(), rows)?))
}

/// Residual of the exact identity `A_n (S - I) f = (S^n - I) f / n`.
pub fn cesaro_identity_residual(s: &KernelOperator, n: u64, f: &BoundedFunction) -> Result<f64> {
    let g = s.forward_apply(f)?.combine(1.0, f, -1.0)?;
    let lhs = cesaro_avg(s, n, &g)?;
    let pow = s.forward_power_apply(n, f)?;
    let rhs = pow.combine(1.0 / n as f64, f, -1.0 / n as f64)?;
    Ok(lhs.combine(1.0, &rhs, -1.0)?.sup_norm())
}

// ---------------------------------------------------------------------------
// Abel averages
// ---------------------------------------------------------------------------

/// Which evaluation route an Abel average took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbelRoute {
    /// Truncated geometric series with a certified tail.
    Series,
    /// Dense solve of `(I - rS) x = (1 - r) f`; exact up to roundoff.
    Resolvent,
}

#[derive(Debug, Clone)]
pub struct AbelFunctionAvg {
    pub result: BoundedFunction,
    pub route: AbelRoute,
    pub terms: u64,
    pub tail_bound: f64,
    /// Set when partial sums grew past the divergence guard (spectral radius
    /// above one); the result is the capped partial sum.
    pub diverged: bool,
}

/// `A_r f = (1 - r) sum_{k >= 0} r^k S^k f`, truncated at
/// `K(r) = ceil(log(eps) / log(r))` or solved through the resolvent when the
/// series would be longer than [`ABEL_SERIES_LIMIT`].
pub fn abel_avg_detailed(
    s: &KernelOperator,
    r: f64,
    f: &BoundedFunction,
    eps: f64,
) -> Result<AbelFunctionAvg> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Parameter(format!("Abel parameter {r} outside [0, 1)")));
    }
    if r == 0.0 {
        return Ok(AbelFunctionAvg {
            result: f.clone(),
            route: AbelRoute::Series,
            terms: 1,
            tail_bound: 0.0,
            diverged: false,
        });
    }
    let k_max = (eps.ln() / r.ln()).ceil() as u64;
    let contractive = r * s.operator_norm() < 1.0 - 1e-9;
    if k_max > ABEL_SERIES_LIMIT && contractive {
        let result = abel_resolvent_fn(s, r, f)?;
        return Ok(AbelFunctionAvg {
            result,
            route: AbelRoute::Resolvent,
            terms: 0,
            tail_bound: 0.0,
            diverged: false,
        });
    }
    let guard = 1e12 * f.sup_norm().max(1.0);
    let mut acc = f.values().to_vec();
    let mut g = f.clone();
    let mut weight = 1.0f64;
    let mut diverged = false;
    let mut terms = 1u64;
    for _ in 1..=k_max {
        g = s.forward_apply(&g)?;
        weight *= r;
        for (a, v) in acc.iter_mut().zip(g.values()) {
            *a += weight * v;
        }
        terms += 1;
        if weight * g.sup_norm() > guard {
            diverged = true;
            break;
        }
    }
    let scaled = f.with_values(acc.iter().map(|v| (1.0 - r) * v).collect());
    Ok(AbelFunctionAvg {
        result: scaled,
        route: AbelRoute::Series,
        terms,
        tail_bound: eps * f.sup_norm(),
        diverged,
    })
}

pub fn abel_avg(s: &KernelOperator, r: f64, f: &BoundedFunction) -> Result<BoundedFunction> {
    Ok(abel_avg_detailed(s, r, f, ABEL_SERIES_EPS)?.result)
}

/// Resolvent route: `(I - rK) x = (1 - r) f + r c L`, where `K` is the
/// retained matrix, `L` the leak vector and `c` the constant tail value the
/// leaked mass resolves to.
fn abel_resolvent_fn(s: &KernelOperator, r: f64, f: &BoundedFunction) -> Result<BoundedFunction> {
    let n = s.space().len();
    let k = s.kernel().to_matrix();
    let tail_c = if s.kernel().max_leak() == 0.0 {
        0.0
    } else {
        resolvable_tail_constant(s, f)?
    };
    let mut rhs = nalgebra::DVector::from_iterator(n, f.values().iter().map(|v| (1.0 - r) * v));
    if tail_c != 0.0 {
        for x in 0..n {
            rhs[x] += r * tail_c * s.kernel().row(x).leak;
        }
    }
    let a = nalgebra::DMatrix::identity(n, n) - k * r;
    let solved = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("Abel resolvent solve failed (singular system)".into()))?;
    Ok(f.with_values(solved.iter().copied().collect()))
}

/// Tail constants stay fixed along orbits only when the rule is a constant
/// or refers to a kernel-fixed compactification point.
fn resolvable_tail_constant(s: &KernelOperator, f: &BoundedFunction) -> Result<f64> {
    use crate::function::TailRule;
    match f.tail() {
        Some(TailRule::Zero) => Ok(0.0),
        Some(TailRule::Constant(c)) => Ok(c),
        Some(TailRule::AtInfinity) => {
            let inf = s.space().infinity().ok_or_else(|| Error::UnresolvableState {
                state: "<tail>".into(),
                reason: "tail refers to a compactification point but the space has none".into(),
            })?;
            let row = s.kernel().row(inf);
            let fixed = row.leak == 0.0
                && row.weights.len() == 1
                && row.weights.get(&inf).copied() == Some(1.0);
            if fixed {
                Ok(f.value(inf))
            } else {
                Err(Error::UnresolvableState {
                    state: s.space().name(inf).to_string(),
                    reason: "at-infinity tail requires the compactification point to be fixed"
                        .into(),
                })
            }
        }
        None => {
            if s.kernel().max_leak() == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::UnresolvableState {
                    state: "<tail>".into(),
                    reason: "leaking kernel applied to a function without a tail rule".into(),
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AbelMeasureAvg {
    pub result: SignedMeasure,
    pub route: AbelRoute,
    pub terms: u64,
    pub tail_bound: f64,
    pub diverged: bool,
}

/// Adjoint Abel average `A'_r mu = (1 - r) sum r^k (S')^k mu`.
pub fn abel_avg_adjoint_detailed(
    s: &KernelOperator,
    r: f64,
    mu: &SignedMeasure,
    eps: f64,
) -> Result<AbelMeasureAvg> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Parameter(format!("Abel parameter {r} outside [0, 1)")));
    }
    if r == 0.0 {
        return Ok(AbelMeasureAvg {
            result: mu.clone(),
            route: AbelRoute::Series,
            terms: 1,
            tail_bound: 0.0,
            diverged: false,
        });
    }
    let k_max = (eps.ln() / r.ln()).ceil() as u64;
    let contractive = r * s.operator_norm() < 1.0 - 1e-9;
    if k_max > ABEL_SERIES_LIMIT && contractive {
        let n = s.space().len();
        let kt = s.kernel().to_matrix().transpose();
        let mut w = vec![0.0; n];
        for (&i, &v) in mu.weights() {
            w[i] = v;
        }
        let rhs = nalgebra::DVector::from_iterator(n, w.iter().map(|v| (1.0 - r) * v));
        let a = nalgebra::DMatrix::identity(n, n) - kt * r;
        let solved = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("adjoint Abel resolvent solve failed".into()))?;
        let weights = solved
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        return Ok(AbelMeasureAvg {
            result: SignedMeasure::new(s.space().clone(), weights)?,
            route: AbelRoute::Resolvent,
            terms: 0,
            tail_bound: 0.0,
            diverged: false,
        });
    }
    let guard = 1e12 * mu.tv_norm().max(1.0);
    let mut acc = mu.clone();
    let mut nu = mu.clone();
    let mut weight = 1.0f64;
    let mut diverged = false;
    let mut terms = 1u64;
    for _ in 1..=k_max {
        nu = s.adjoint_apply(&nu)?;
        weight *= r;
        acc = acc.combine(1.0, &nu, weight)?;
        terms += 1;
        if weight * nu.tv_norm() > guard {
            diverged = true;
            break;
        }
    }
    Ok(AbelMeasureAvg {
        result: acc.scale(1.0 - r),
        route: AbelRoute::Series,
        terms,
        tail_bound: eps * mu.tv_norm(),
        diverged,
    })
}

pub fn abel_avg_adjoint(s: &KernelOperator, r: f64, mu: &SignedMeasure) -> Result<SignedMeasure> {
    Ok(abel_avg_adjoint_detailed(s, r, mu, ABEL_SERIES_EPS)?.result)
}

/// `| ||A_r S f - A_r f|| - (1 - r) ||f - A_r S f|| |`; the two sides agree
/// exactly for the Abel average, so the residual is bounded by series
/// truncation error alone.
pub fn abel_identity_check(s: &KernelOperator, r: f64, f: &BoundedFunction) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Parameter(format!("Abel identity needs r in (0, 1), got {r}")));
    }
    let sf = s.forward_apply(f)?;
    let a_r_sf = abel_avg(s, r, &sf)?;
    let a_r_f = abel_avg(s, r, f)?;
    let lhs = a_r_sf.combine(1.0, &a_r_f, -1.0)?.sup_norm();
    let rhs = (1.0 - r) * f.combine(1.0, &a_r_sf, -1.0)?.sup_norm();
    Ok((lhs - rhs).abs())
}

// ---------------------------------------------------------------------------
// Time averages
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TimeAvg<T> {
    pub result: T,
    pub error_estimate: f64,
}

/// `A_t f = (1/t) int_0^t exp(sQ) f ds` by uniformized quadrature.
pub fn time_avg(q: &RateMatrix, t: f64, f: &BoundedFunction) -> Result<TimeAvg<BoundedFunction>> {
    crate::ctmc::check_same_space(q.space(), f.space())?;
    let avg = q.interval_average(t)?;
    let values = act_forward(&avg.matrix, f.values());
    Ok(TimeAvg { result: f.with_values(values), error_estimate: avg.error * f.sup_norm().max(1.0) })
}

/// Adjoint time average on measures.
pub fn time_avg_adjoint(q: &RateMatrix, t: f64, mu: &SignedMeasure) -> Result<TimeAvg<SignedMeasure>> {
    crate::ctmc::check_same_space(q.space(), mu.space())?;
    let avg = q.interval_average(t)?;
    let n = q.space().len();
    let mut w = vec![0.0; n];
    for (&i, &v) in mu.weights() {
        w[i] = v;
    }
    let pushed = act_adjoint(&avg.matrix, &w);
    let weights = pushed
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, &v)| (i, v))
        .collect();
    Ok(TimeAvg {
        result: SignedMeasure::new(q.space().clone(), weights)?,
        error_estimate: avg.error * mu.tv_norm().max(1.0),
    })
}

/// Sup-norm residual of `A_t S(s) f - A_t f = (s/t)(S(t) - I) A_s f`,
/// the semigroup-law identity behind the time scheme's AS3 decay.
pub fn time_identity_check(q: &RateMatrix, t: f64, s_time: f64, f: &BoundedFunction) -> Result<f64> {
    if !(t > 0.0 && s_time > 0.0) {
        return Err(Error::Parameter("identity check needs t, s > 0".into()));
    }
    let s_s = q.transition(s_time)?;
    let s_t = q.transition(t)?;
    let a_t = q.interval_average(t)?;
    let a_s = q.interval_average(s_time)?;

    let sf = act_forward(&s_s.matrix, f.values());
    let lhs: Vec<f64> = act_forward(&a_t.matrix, &sf)
        .iter()
        .zip(act_forward(&a_t.matrix, f.values()))
        .map(|(a, b)| a - b)
        .collect();
    let asf = act_forward(&a_s.matrix, f.values());
    let st_asf = act_forward(&s_t.matrix, &asf);
    let factor = s_time / t;
    let rhs: Vec<f64> = st_asf.iter().zip(&asf).map(|(a, b)| factor * (a - b)).collect();
    Ok(lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Axiom verification
// ---------------------------------------------------------------------------

/// The operator material a scheme runs on.
#[derive(Clone, Copy)]
pub enum SchemeOperators<'a> {
    /// Powers of a single kernel operator (Cesaro and Abel schemes).
    Discrete(&'a KernelOperator),
    /// An integrable semigroup generated by a rate matrix (time schemes).
    Continuous(&'a RateMatrix),
}

/// One grid point of a diagnostic series.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IndexedValue {
    pub index: f64,
    pub value: f64,
}

/// AS1 verification: probe-supremum norm estimates per grid point.
#[derive(Debug, Clone, Serialize)]
pub struct As1Report {
    pub bound: f64,
    pub per_index: Vec<IndexedValue>,
    pub max_estimate: f64,
    pub pass: bool,
    /// For Markovian material the estimate must be exactly one.
    pub markovian: bool,
    pub markovian_norm_exact: Option<bool>,
}

/// Default probe functions: the constant one plus each row's sign pattern
/// (which realizes the forward operator norm of the generator).
fn default_fn_probes(s: &KernelOperator) -> Vec<BoundedFunction> {
    use crate::function::TailRule;
    let space = s.space().clone();
    let mut probes = vec![BoundedFunction::one(space.clone())];
    for x in 0..space.len() {
        let row = s.kernel().row(x);
        if row.weights.is_empty() {
            continue;
        }
        let mut values = vec![0.0; space.len()];
        for (&y, &w) in &row.weights {
            values[y] = if w >= 0.0 { 1.0 } else { -1.0 };
        }
        if let Ok(p) = BoundedFunction::new(space.clone(), values, Some(TailRule::Zero), None) {
            probes.push(p);
        }
    }
    probes
}

fn default_meas_probes(space: &std::sync::Arc<crate::space::StateSpace>) -> Vec<SignedMeasure> {
    (0..space.len())
        .filter_map(|x| SignedMeasure::dirac(space.clone(), x).ok())
        .collect()
}

pub fn verify_as1(
    spec: &SchemeSpec,
    ops: SchemeOperators<'_>,
    extra_fns: &[BoundedFunction],
    extra_meas: &[SignedMeasure],
) -> Result<As1Report> {
    spec.validate()?;
    let (fn_probes, meas_probes, markovian) = match ops {
        SchemeOperators::Discrete(s) => {
            (default_fn_probes(s), default_meas_probes(s.space()), s.is_markovian())
        }
        SchemeOperators::Continuous(q) => {
            let space = q.space().clone();
            (vec![BoundedFunction::one(space.clone())], default_meas_probes(&space), true)
        }
    };
    if markovian && spec.norm_bound < 1.0 {
        return Err(Error::InvalidGrid(
            "Markovian schemes have norm exactly one; the bound M must be at least 1".into(),
        ));
    }
    let mut per_index = Vec::new();
    let mut max_estimate = 0.0f64;
    for &label in &spec.grid_labels() {
        let mut estimate = 0.0f64;
        for f in fn_probes.iter().chain(extra_fns) {
            let denom = f.sup_norm();
            if denom == 0.0 {
                continue;
            }
            let out = apply_scheme_fn(spec, ops, label, f)?;
            estimate = estimate.max(out.sup_norm() / denom);
        }
        for mu in meas_probes.iter().chain(extra_meas) {
            let denom = mu.tv_norm();
            if denom == 0.0 {
                continue;
            }
            let out = apply_scheme_meas(spec, ops, label, mu)?;
            estimate = estimate.max(out.tv_norm() / denom);
        }
        per_index.push(IndexedValue { index: label, value: estimate });
        max_estimate = max_estimate.max(estimate);
    }
    let pass = max_estimate <= spec.norm_bound * (1.0 + 1e-12);
    let markovian_norm_exact = if markovian {
        // leak-free Markovian averages preserve the constant one exactly
        Some(per_index.iter().all(|iv| (iv.value - 1.0).abs() <= 1e-9))
    } else {
        None
    };
    Ok(As1Report { bound: spec.norm_bound, per_index, max_estimate, pass, markovian, markovian_norm_exact })
}

fn apply_scheme_fn(
    spec: &SchemeSpec,
    ops: SchemeOperators<'_>,
    label: f64,
    f: &BoundedFunction,
) -> Result<BoundedFunction> {
    match (&spec.kind, ops) {
        (SchemeKind::Cesaro { .. }, SchemeOperators::Discrete(s)) => cesaro_avg(s, label as u64, f),
        (SchemeKind::Abel { .. }, SchemeOperators::Discrete(s)) => abel_avg(s, label, f),
        (SchemeKind::Time { .. }, SchemeOperators::Continuous(q)) => Ok(time_avg(q, label, f)?.result),
        _ => Err(Error::Parameter("scheme kind does not match operator material".into())),
    }
}

fn apply_scheme_meas(
    spec: &SchemeSpec,
    ops: SchemeOperators<'_>,
    label: f64,
    mu: &SignedMeasure,
) -> Result<SignedMeasure> {
    match (&spec.kind, ops) {
        (SchemeKind::Cesaro { .. }, SchemeOperators::Discrete(s)) => {
            cesaro_avg_adjoint(s, label as u64, mu)
        }
        (SchemeKind::Abel { .. }, SchemeOperators::Discrete(s)) => abel_avg_adjoint(s, label, mu),
        (SchemeKind::Time { .. }, SchemeOperators::Continuous(q)) => {
            Ok(time_avg_adjoint(q, label, mu)?.result)
        }
        _ => Err(Error::Parameter("scheme kind does not match operator material".into())),
    }
}

/// AS3 verification: annihilation decay plus the scheme's exact identity.
#[derive(Debug, Clone, Serialize)]
pub struct As3Report {
    pub function_decay: Vec<IndexedValue>,
    pub measure_decay: Vec<IndexedValue>,
    pub identity_residuals: Vec<IndexedValue>,
    pub max_identity_residual: f64,
    /// Whether the Markovian bound `2 ||f|| / n` was checked and held.
    pub markov_bound_checked: bool,
    pub markov_bound_ok: bool,
}

pub fn verify_as3(
    spec: &SchemeSpec,
    ops: SchemeOperators<'_>,
    f: &BoundedFunction,
    mu: &SignedMeasure,
) -> Result<As3Report> {
    spec.validate()?;
    let mut function_decay = Vec::new();
    let mut measure_decay = Vec::new();
    let mut identity_residuals = Vec::new();
    let mut markov_bound_checked = false;
    let mut markov_bound_ok = true;

    match (&spec.kind, ops) {
        (SchemeKind::Cesaro { n_grid }, SchemeOperators::Discrete(s)) => {
            let g = s.forward_apply(f)?.combine(1.0, f, -1.0)?;
            let gm = s.adjoint_apply(mu)?.combine(1.0, mu, -1.0)?;
            let markov = s.is_markovian();
            for &n in n_grid {
                let fn_val = cesaro_avg(s, n, &g)?.sup_norm();
                let meas_val = cesaro_avg_adjoint(s, n, &gm)?.tv_norm();
                function_decay.push(IndexedValue { index: n as f64, value: fn_val });
                measure_decay.push(IndexedValue { index: n as f64, value: meas_val });
                identity_residuals.push(IndexedValue {
                    index: n as f64,
                    value: cesaro_identity_residual(s, n, f)?,
                });
                if markov {
                    markov_bound_checked = true;
                    let bound = 2.0 * f.sup_norm() / n as f64;
                    if fn_val > bound * (1.0 + 1e-9) + 1e-15 {
                        markov_bound_ok = false;
                    }
                }
            }
        }
        (SchemeKind::Abel { r_grid }, SchemeOperators::Discrete(s)) => {
            let g = s.forward_apply(f)?.combine(1.0, f, -1.0)?;
            let gm = s.adjoint_apply(mu)?.combine(1.0, mu, -1.0)?;
            for &r in r_grid {
                function_decay.push(IndexedValue { index: r, value: abel_avg(s, r, &g)?.sup_norm() });
                measure_decay.push(IndexedValue {
                    index: r,
                    value: abel_avg_adjoint(s, r, &gm)?.tv_norm(),
                });
                if r > 0.0 {
                    identity_residuals.push(IndexedValue {
                        index: r,
                        value: abel_identity_check(s, r, f)?,
                    });
                }
            }
        }
        (SchemeKind::Time { t_grid }, SchemeOperators::Continuous(q)) => {
            let probe_s = 1.0f64;
            let step = q.transition(probe_s)?;
            let sf = act_forward(&step.matrix, f.values());
            let g = f.with_values(sf.iter().zip(f.values()).map(|(a, b)| a - b).collect());
            let n = q.space().len();
            let mut w = vec![0.0; n];
            for (&i, &v) in mu.weights() {
                w[i] = v;
            }
            let sm = act_adjoint(&step.matrix, &w);
            let gm_weights = sm
                .iter()
                .zip(&w)
                .enumerate()
                .map(|(i, (a, b))| (i, a - b))
                .filter(|(_, v)| *v != 0.0)
                .collect();
            let gm = SignedMeasure::new(q.space().clone(), gm_weights)?;
            for &t in t_grid {
                function_decay.push(IndexedValue { index: t, value: time_avg(q, t, &g)?.result.sup_norm() });
                measure_decay.push(IndexedValue {
                    index: t,
                    value: time_avg_adjoint(q, t, &gm)?.result.tv_norm(),
                });
                identity_residuals.push(IndexedValue {
                    index: t,
                    value: time_identity_check(q, t, probe_s.min(t), f)?,
                });
            }
        }
        _ => return Err(Error::Parameter("scheme kind does not match operator material".into())),
    }

    let max_identity_residual =
        identity_residuals.iter().map(|iv| iv.value).fold(0.0, f64::max);
    Ok(As3Report {
        function_decay,
        measure_decay,
        identity_residuals,
        max_identity_residual,
        markov_bound_checked,
        markov_bound_ok,
    })
}

/// Finite AS2 surrogate: the computed average must lie in the pointwise
/// convex hull of the orbit segment that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ConvexHullReport {
    pub per_index: Vec<IndexedValue>,
    pub max_violation: f64,
}

pub fn verify_as2_surrogate(
    spec: &SchemeSpec,
    s: &KernelOperator,
    f: &BoundedFunction,
) -> Result<ConvexHullReport> {
    spec.validate()?;
    let horizon_for = |label: f64| -> u64 {
        match &spec.kind {
            SchemeKind::Cesaro { .. } => (label as u64).min(CESARO_DIRECT_LIMIT),
            SchemeKind::Abel { .. } => {
                ((ABEL_SERIES_EPS.ln() / label.max(1e-9).ln()).ceil() as u64).min(CESARO_DIRECT_LIMIT)
            }
            SchemeKind::Time { .. } => 0,
        }
    };
    let mut per_index = Vec::new();
    let mut max_violation = 0.0f64;
    for &label in &spec.grid_labels() {
        let horizon = horizon_for(label);
        if horizon == 0 {
            continue;
        }
        let mut lo = f.values().to_vec();
        let mut hi = f.values().to_vec();
        let mut g = f.clone();
        for _ in 1..horizon {
            g = s.forward_apply(&g)?;
            for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(g.values()) {
                *l = l.min(*v);
                *h = h.max(*v);
            }
        }
        let avg = match &spec.kind {
            SchemeKind::Cesaro { .. } => cesaro_avg(s, label as u64, f)?,
            SchemeKind::Abel { .. } => abel_avg(s, label, f)?,
            SchemeKind::Time { .. } => unreachable!(),
        };
        let violation = avg
            .values()
            .iter()
            .zip(lo.iter().zip(&hi))
            .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
            .fold(0.0, f64::max);
        per_index.push(IndexedValue { index: label, value: violation });
        max_violation = max_violation.max(violation);
    }
    Ok(ConvexHullReport { per_index, max_violation })
}

/// Aggregated scheme verification.
#[derive(Debug, Clone, Serialize)]
pub struct SchemeReport {
    pub spec: SchemeSpec,
    pub as1: As1Report,
    pub as3: As3Report,
    pub convex_hull: Option<ConvexHullReport>,
    pub max_leak: f64,
}

pub fn scheme_report(
    spec: &SchemeSpec,
    ops: SchemeOperators<'_>,
    f: &BoundedFunction,
    mu: &SignedMeasure,
) -> Result<SchemeReport> {
    let as1 = verify_as1(spec, ops, &[], &[])?;
    let as3 = verify_as3(spec, ops, f, mu)?;
    let (convex_hull, max_leak) = match ops {
        SchemeOperators::Discrete(s) => {
            (Some(verify_as2_surrogate(spec, s, f)?), s.kernel().max_leak())
        }
        SchemeOperators::Continuous(_) => (None, 0.0),
    };
    Ok(SchemeReport { spec: spec.clone(), as1, as3, convex_hull, max_leak })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ctmc::symmetric_two_state;
    use crate::function::TailRule;
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

    fn swap() -> KernelOperator {
        KernelOperator::new(Kernel::deterministic(space(2), |x| Some(1 - x)).unwrap())
    }

    fn f10(sp: &Arc<StateSpace>) -> BoundedFunction {
        BoundedFunction::new(sp.clone(), vec![1.0, 0.0], Some(TailRule::Zero), None).unwrap()
    }

    #[test]
    fn cesaro_identity_on_identity_kernel() {
        let sp = space(3);
        let id = KernelOperator::identity(sp.clone());
        let f = BoundedFunction::new(sp, vec![0.2, -0.4, 1.0], Some(TailRule::Zero), None).unwrap();
        for n in [1, 5, 16] {
            let a = cesaro_avg(&id, n, &f).unwrap();
            for (x, y) in a.values().iter().zip(f.values()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cesaro_swap_two_steps_averages() {
        let s = swap();
        let f = f10(s.space());
        assert_eq!(cesaro_avg(&s, 2, &f).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn cesaro_binary_splitting_matches_direct() {
        let sp = space(3);
        let s = KernelOperator::new(
            Kernel::from_matrix(
                sp.clone(),
                &[
                    vec![0.5, 0.25, 0.25],
                    vec![0.2, 0.6, 0.2],
                    vec![0.3, 0.3, 0.4],
                ],
            )
            .unwrap(),
        );
        let f = BoundedFunction::new(sp, vec![1.0, -1.0, 0.5], Some(TailRule::Zero), None).unwrap();
        // force the splitting path and compare against plain accumulation
        let n = 6000u64;
        let split = cesaro_avg(&s, n, &f).unwrap();
        let mut acc = f.values().to_vec();
        let mut g = f.clone();
        for _ in 1..n {
            g = s.forward_apply(&g).unwrap();
            for (a, v) in acc.iter_mut().zip(g.values()) {
                *a += v;
            }
        }
        for (a, b) in split.values().iter().zip(acc.iter().map(|v| v / n as f64)) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn cesaro_recursion_consistency() {
        // (n+1) A_{n+1} f = n A_n f + S^n f
        let s = swap();
        let f = f10(s.space());
        for n in 1..10u64 {
            let lhs = cesaro_avg(&s, n + 1, &f).unwrap();
            let a_n = cesaro_avg(&s, n, &f).unwrap();
            let pow = s.forward_power_apply(n, &f).unwrap();
            for i in 0..2 {
                let rhs = (n as f64 * a_n.value(i) + pow.value(i)) / (n as f64 + 1.0);
                assert!((lhs.value(i) - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn abel_identity_for_identity_kernel() {
        let sp = space(2);
        let id = KernelOperator::identity(sp.clone());
        let f = f10(&sp);
        for r in [0.0, 0.3, 0.9] {
            let a = abel_avg(&id, r, &f).unwrap();
            for (x, y) in a.values().iter().zip(f.values()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn abel_swap_closed_form() {
        // A_r f = (f + r S f) / (1 + r); at r = 1/2 and f = (1,0): (2/3, 1/3)
        let s = swap();
        let f = f10(s.space());
        let a = abel_avg(&s, 0.5, &f).unwrap();
        assert!((a.value(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((a.value(1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn abel_series_and_resolvent_agree() {
        let sp = space(3);
        let s = KernelOperator::new(
            Kernel::from_matrix(
                sp.clone(),
                &[
                    vec![0.5, 0.25, 0.25],
                    vec![0.2, 0.6, 0.2],
                    vec![0.3, 0.3, 0.4],
                ],
            )
            .unwrap(),
        );
        let f = BoundedFunction::new(sp, vec![1.0, 0.0, -0.5], Some(TailRule::Zero), None).unwrap();
        let r = 0.99;
        let series = abel_avg_detailed(&s, r, &f, 1e-13).unwrap();
        assert_eq!(series.route, AbelRoute::Series);
        let resolvent = abel_resolvent_fn(&s, r, &f).unwrap();
        for (a, b) in series.result.values().iter().zip(resolvent.values()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn abel_swap_identity_both_sides_third() {
        let s = swap();
        let f = f10(s.space());
        let sf = s.forward_apply(&f).unwrap();
        let a_r_sf = abel_avg(&s, 0.5, &sf).unwrap();
        let a_r_f = abel_avg(&s, 0.5, &f).unwrap();
        let lhs = a_r_sf.combine(1.0, &a_r_f, -1.0).unwrap().sup_norm();
        assert!((lhs - 1.0 / 3.0).abs() < 1e-11);
        assert!(abel_identity_check(&s, 0.5, &f).unwrap() < 1e-11);
    }

    #[test]
    fn abel_fixed_point_is_invariant() {
        let s = swap();
        let one = BoundedFunction::one(s.space().clone());
        let a = abel_avg(&s, 0.7, &one).unwrap();
        for v in a.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(abel_identity_check(&s, 0.5, &one).unwrap() < 1e-12);
    }

    #[test]
    fn time_scheme_trivial_and_closed_form() {
        let sp = space(2);
        let q0 = RateMatrix::new(sp.clone(), &[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let f = f10(&sp);
        let a = time_avg(&q0, 5.0, &f).unwrap();
        assert_eq!(a.result.values(), f.values());
        assert!(time_identity_check(&q0, 2.0, 1.0, &f).unwrap() < 1e-15);

        let q = symmetric_two_state(sp.clone()).unwrap();
        let t = 2.0;
        let a = time_avg(&q, t, &f).unwrap();
        let expect = 0.5 * (1.0 + (1.0 - (-2.0 * t).exp()) / (2.0 * t));
        assert!((a.result.value(0) - expect).abs() < 1e-9);
        assert!((a.result.value(1) - (1.0 - expect)).abs() < 1e-9);
    }

    #[test]
    fn time_identity_two_state() {
        let sp = space(2);
        let q = symmetric_two_state(sp.clone()).unwrap();
        let f = f10(&sp);
        let res = time_identity_check(&q, 2.0, 1.0, &f).unwrap();
        assert!(res < 1e-8, "residual {res}");
        // both sides vanish linearly as s -> 0
        let small = time_identity_check(&q, 2.0, 1e-4, &f).unwrap();
        assert!(small < 1e-8);
    }

    #[test]
    fn as1_markovian_cesaro_is_exactly_one() {
        let s = swap();
        let spec = SchemeSpec::cesaro(vec![1, 2, 4, 8], 1.0).unwrap();
        let report = verify_as1(&spec, SchemeOperators::Discrete(&s), &[], &[]).unwrap();
        assert!(report.pass);
        assert_eq!(report.markovian_norm_exact, Some(true));
    }

    #[test]
    fn as1_fails_for_doubling_kernel_under_abel() {
        let sp = space(2);
        let doubling = KernelOperator::new(
            Kernel::from_matrix(sp, &[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap(),
        );
        let spec = SchemeSpec::abel(vec![0.5, 0.9], 10.0).unwrap();
        let report = verify_as1(&spec, SchemeOperators::Discrete(&doubling), &[], &[]).unwrap();
        assert!(!report.pass, "max estimate {}", report.max_estimate);
    }

    #[test]
    fn as3_cesaro_swap_values() {
        // ||A_3 (S - I) f|| = ||(S^3 - I) f|| / 3 = 1/3 for f = (1, 0)
        let s = swap();
        let f = f10(s.space());
        let mu = SignedMeasure::dirac(s.space().clone(), 0).unwrap();
        let spec = SchemeSpec::cesaro(vec![3], 1.0).unwrap();
        let report = verify_as3(&spec, SchemeOperators::Discrete(&s), &f, &mu).unwrap();
        assert!((report.function_decay[0].value - 1.0 / 3.0).abs() < 1e-12);
        assert!(report.max_identity_residual < 1e-12);
        assert!(report.markov_bound_checked && report.markov_bound_ok);
    }

    #[test]
    fn as3_fixed_point_decays_to_zero_exactly() {
        let s = swap();
        let one = BoundedFunction::one(s.space().clone());
        let mu = SignedMeasure::dirac(s.space().clone(), 0).unwrap();
        let spec = SchemeSpec::cesaro(vec![1, 2, 7], 1.0).unwrap();
        let report = verify_as3(&spec, SchemeOperators::Discrete(&s), &one, &mu).unwrap();
        for iv in &report.function_decay {
            assert_eq!(iv.value, 0.0);
        }
    }

    #[test]
    fn convex_hull_surrogate_holds() {
        let s = swap();
        let f = f10(s.space());
        let spec = SchemeSpec::cesaro(vec![1, 2, 3, 8, 17], 1.0).unwrap();
        let report = verify_as2_surrogate(&spec, &s, &f).unwrap();
        assert!(report.max_violation < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(SchemeSpec::cesaro(vec![], 1.0).is_err());
        assert!(SchemeSpec::cesaro(vec![0, 1], 1.0).is_err());
        assert!(SchemeSpec::cesaro(vec![2, 2], 1.0).is_err());
        assert!(SchemeSpec::abel(vec![0.5, 1.0], 1.0).is_err());
        assert!(SchemeSpec::abel(vec![0.9, 0.5], 1.0).is_err());
        assert!(SchemeSpec::time(vec![0.0, 1.0], 1.0).is_err());
        assert!(abel_avg(&swap(), 1.0, &f10(swap().space())).is_err());
    }
}
