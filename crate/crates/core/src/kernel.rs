//! Bounded kernels and the operators they induce.
//!
//! A kernel assigns to every state `x` a finitely supported row measure
//! `k(x, .)`. The induced operator acts forward on functions,
//! `(Sf)(x) = <f, k(x, .)>`, and by its sigma-adjoint on measures,
//! `(S'mu)({y}) = sum_x mu({x}) k(x, {y})`, so that `<Sf, mu> = <f, S'mu>`
//! holds on finite instances. The operator norm of both actions is the
//! supremum of the row variation norms.
//!
//! Rows may assign mass outside the enumerated truncation. That *leakage* is
//! tracked per row rather than discarded: forward application resolves it
//! against the function's tail rule, adjoint application reports it, and
//! composition treats it as absorbing (mass that has left the truncation
//! never returns, which is exact for the shift-style dynamics shipped with
//! this crate). Markovianity is judged on retained mass, with leakage shown
//! separately.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::measure::SignedMeasure;
use crate::pairing::pairing;
use crate::space::{same_space, StateSpace};

/// Tolerance for the cached Markovianity flag and leakage classification.
pub const MARKOV_TOL: f64 = 1e-12;

/// One kernel row: retained weights plus mass assigned outside the truncation.
#[derive(Debug, Clone, Default)]
pub struct Row {
    pub weights: BTreeMap<usize, f64>,
    pub leak: f64,
}

impl Row {
    pub fn dirac(target: usize) -> Row {
        let mut weights = BTreeMap::new();
        weights.insert(target, 1.0);
        Row { weights, leak: 0.0 }
    }

    pub fn leak_all() -> Row {
        Row { weights: BTreeMap::new(), leak: 1.0 }
    }

    /// Variation of the row including leaked mass.
    pub fn tv(&self) -> f64 {
        self.weights.values().map(|w| w.abs()).sum::<f64>() + self.leak.abs()
    }

    /// Retained (in-truncation) signed mass.
    pub fn retained_mass(&self) -> f64 {
        self.weights.values().sum()
    }

    fn is_probability(&self, tol: f64) -> bool {
        self.weights.values().all(|&w| w >= -tol)
            && (self.retained_mass() - 1.0).abs() <= tol
            && self.leak.abs() <= tol
    }
}

/// A bounded kernel on a truncated state space.
#[derive(Debug)]
pub struct Kernel {
    space: Arc<StateSpace>,
    rows: Vec<Row>,
}

impl Kernel {
    pub fn new(space: Arc<StateSpace>, rows: Vec<Row>) -> Result<Self> {
        if rows.len() != space.len() {
            return Err(Error::InvalidKernel(format!(
                "{} rows for {} states",
                rows.len(),
                space.len()
            )));
        }
        for (x, row) in rows.iter().enumerate() {
            if !row.leak.is_finite() {
                return Err(Error::InvalidKernel(format!("row {x} has non-finite leak")));
            }
            for (&y, w) in &row.weights {
                if y >= space.len() {
                    return Err(Error::InvalidKernel(format!(
                        "row {} targets state index {y} out of range",
                        space.name(x)
                    )));
                }
                if !w.is_finite() {
                    return Err(Error::InvalidKernel(format!(
                        "row {} has non-finite weight",
                        space.name(x)
                    )));
                }
            }
        }
        Ok(Kernel { space, rows })
    }

    /// Identity kernel (every row a point mass at its own state).
    pub fn identity(space: Arc<StateSpace>) -> Kernel {
        let rows = (0..space.len()).map(Row::dirac).collect();
        Kernel { space, rows }
    }

    /// Kernel of a deterministic map given as `state -> Some(target)`,
    /// `None` meaning the image lies outside the truncation.
    pub fn deterministic(space: Arc<StateSpace>, map: impl Fn(usize) -> Option<usize>) -> Result<Kernel> {
        let rows = (0..space.len())
            .map(|x| match map(x) {
                Some(y) => {
                    if y < space.len() {
                        Ok(Row::dirac(y))
                    } else {
                        Err(Error::InvalidKernel(format!("map image {y} out of range")))
                    }
                }
                None => Ok(Row::leak_all()),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel { space, rows })
    }

    /// Dense row-stochastic-style kernel from a matrix (row x, column y).
    pub fn from_matrix(space: Arc<StateSpace>, matrix: &[Vec<f64>]) -> Result<Kernel> {
        let n = space.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidKernel("matrix shape mismatch".into()));
        }
        let rows = matrix
            .iter()
            .map(|r| {
                let weights = r
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(y, &w)| (y, w))
                    .collect();
                Row { weights, leak: 0.0 }
            })
            .collect();
        Kernel::new(space, rows)
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn row(&self, x: usize) -> &Row {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// `sup_x |k|(x, E)`, leak included.
    pub fn bound(&self) -> f64 {
        self.rows.iter().map(Row::tv).fold(0.0, f64::max)
    }

    /// Largest absolute leak over rows.
    pub fn max_leak(&self) -> f64 {
        self.rows.iter().map(|r| r.leak.abs()).fold(0.0, f64::max)
    }

    /// Indices of rows with leak above `tol`.
    pub fn leaking_rows(&self, tol: f64) -> Vec<usize> {
        (0..self.rows.len()).filter(|&x| self.rows[x].leak.abs() > tol).collect()
    }

    /// Row measure as a [`SignedMeasure`] (retained part).
    pub fn row_measure(&self, x: usize) -> Result<SignedMeasure> {
        SignedMeasure::new(self.space.clone(), self.rows[x].weights.clone())
    }

    /// Dense matrix of the retained part (row x, column y).
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.space.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (x, row) in self.rows.iter().enumerate() {
            for (&y, &w) in &row.weights {
                m[(x, y)] = w;
            }
        }
        m
    }
}

/// A kernel together with its cached Markovianity flag and power ladder.
#[derive(Clone)]
pub struct KernelOperator {
    kernel: Arc<Kernel>,
    markovian: bool,
    powers: Arc<Mutex<BTreeMap<u64, Arc<Kernel>>>>,
}

impl std::fmt::Debug for KernelOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelOperator")
            .field("states", &self.kernel.space().len())
            .field("bound", &self.kernel.bound())
            .field("markovian", &self.markovian)
            .finish()
    }
}

impl KernelOperator {
    pub fn new(kernel: Kernel) -> Self {
        let markovian = kernel.rows.iter().all(|r| r.is_probability(MARKOV_TOL));
        KernelOperator {
            kernel: Arc::new(kernel),
            markovian,
            powers: Arc::new(Mutex::new(BTreeMap::new())),
        }
    }

    pub fn identity(space: Arc<StateSpace>) -> Self {
        KernelOperator::new(Kernel::identity(space))
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        self.kernel.space()
    }

    /// Operator norm of both the forward and the adjoint action.
    pub fn operator_norm(&self) -> f64 {
        self.kernel.bound()
    }

    /// Every row a probability measure with negligible leak (cached at
    /// [`MARKOV_TOL`]).
    pub fn is_markovian(&self) -> bool {
        self.markovian
    }

    /// Markovianity at a caller-chosen tolerance.
    pub fn is_markovian_at(&self, tol: f64) -> bool {
        self.kernel.rows.iter().all(|r| r.is_probability(tol))
    }

    /// Rows are probability measures on their retained mass; leaking rows
    /// are ignored here and reported through [`Kernel::leaking_rows`].
    pub fn is_interior_markovian(&self, tol: f64) -> bool {
        self.kernel.rows.iter().all(|r| {
            r.leak.abs() > tol || r.is_probability(tol)
        })
    }

    /// `(Sf)(x) = <f, k(x, .)>`, leaked mass resolved by the tail rule.
    pub fn forward_apply(&self, f: &BoundedFunction) -> Result<BoundedFunction> {
        if !same_space(self.space(), f.space()) {
            return Err(Error::SpaceMismatch);
        }
        let mut values = Vec::with_capacity(self.kernel.rows.len());
        for (x, row) in self.kernel.rows.iter().enumerate() {
            let mut acc = 0.0;
            for (&y, &w) in &row.weights {
                acc += w * f.value(y);
            }
            if row.leak != 0.0 {
                acc += row.leak * f.tail_value(self.space().name(x))?;
            }
            values.push(acc);
        }
        Ok(f.with_values(values))
    }

    /// `(S'mu)({y}) = sum_x mu({x}) k(x, {y})`; leaked mass is dropped from
    /// the result and returned separately by [`Self::adjoint_apply_with_leak`].
    pub fn adjoint_apply(&self, mu: &SignedMeasure) -> Result<SignedMeasure> {
        Ok(self.adjoint_apply_with_leak(mu)?.0)
    }

    /// Adjoint action together with the signed mass pushed outside the
    /// truncation.
    pub fn adjoint_apply_with_leak(&self, mu: &SignedMeasure) -> Result<(SignedMeasure, f64)> {
        if !same_space(self.space(), mu.space()) {
            return Err(Error::SpaceMismatch);
        }
        let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
        let mut leaked = 0.0;
        for (&x, &m) in mu.weights() {
            let row = &self.kernel.rows[x];
            for (&y, &w) in &row.weights {
                *weights.entry(y).or_insert(0.0) += m * w;
            }
            leaked += m * row.leak;
        }
        Ok((SignedMeasure::new(self.space().clone(), weights)?, leaked))
    }

    /// Kernel of the operator product `self . other` (apply `other` first on
    /// functions): `k(x, A) = integral of k_other(y, A) against k_self(x, dy)`.
    pub fn compose(&self, other: &KernelOperator) -> Result<KernelOperator> {
        if !same_space(self.space(), other.space()) {
            return Err(Error::SpaceMismatch);
        }
        // Products of Markovian kernels are Markovian; renormalizing each row
        // stops the one-ulp mass drift from compounding along power ladders.
        let renormalize = self.markovian && other.markovian;
        let rows = self
            .kernel
            .rows
            .iter()
            .map(|row| {
                let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
                let mut leak = row.leak; // absorbing: leaked mass stays leaked
                for (&y, &w) in &row.weights {
                    let target = &other.kernel.rows[y];
                    for (&z, &v) in &target.weights {
                        *weights.entry(z).or_insert(0.0) += w * v;
                    }
                    leak += w * target.leak;
                }
                weights.retain(|_, w| *w != 0.0);
                if renormalize {
                    let total = weights.values().sum::<f64>() + leak;
                    if total != 1.0 && (total - 1.0).abs() < 1e-6 {
                        let inv = 1.0 / total;
                        for w in weights.values_mut() {
                            *w *= inv;
                        }
                        leak *= inv;
                    }
                }
                Row { weights, leak }
            })
            .collect();
        Ok(KernelOperator::new(Kernel { space: self.space().clone(), rows: rows }))
    }

    /// `S^n` through a cached doubling ladder; `power(0)` is the identity.
    pub fn power(&self, n: u64) -> Result<KernelOperator> {
        if n == 0 {
            return Ok(KernelOperator::identity(self.space().clone()));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let kernel = self.power_kernel(n)?;
        Ok(KernelOperator {
            markovian: self.markovian,
            kernel,
            powers: Arc::new(Mutex::new(BTreeMap::new())),
        })
    }

    fn power_kernel(&self, n: u64) -> Result<Arc<Kernel>> {
        debug_assert!(n >= 1);
        if n == 1 {
            return Ok(self.kernel.clone());
        }
        if let Some(k) = self.powers.lock().unwrap().get(&n) {
            return Ok(k.clone());
        }
        let half = self.power_kernel(n / 2)?;
        let half_op = KernelOperator {
            kernel: half,
            markovian: self.markovian,
            powers: Arc::new(Mutex::new(BTreeMap::new())),
        };
        let mut result = half_op.compose(&half_op)?.kernel.clone();
        if n % 2 == 1 {
            let odd_op = KernelOperator {
                kernel: result,
                markovian: self.markovian,
                powers: Arc::new(Mutex::new(BTreeMap::new())),
            };
            result = odd_op.compose(self)?.kernel.clone();
        }
        self.powers.lock().unwrap().insert(n, result.clone());
        Ok(result)
    }

    /// Applies `S^n` to a function without materializing the power kernel
    /// when `n` is small.
    pub fn forward_power_apply(&self, n: u64, f: &BoundedFunction) -> Result<BoundedFunction> {
        if n <= 64 {
            let mut g = f.clone();
            for _ in 0..n {
                g = self.forward_apply(&g)?;
            }
            Ok(g)
        } else {
            self.power(n)?.forward_apply(f)
        }
    }

    pub fn adjoint_power_apply(&self, n: u64, mu: &SignedMeasure) -> Result<SignedMeasure> {
        if n <= 64 {
            let mut nu = mu.clone();
            for _ in 0..n {
                nu = self.adjoint_apply(&nu)?;
            }
            Ok(nu)
        } else {
            self.power(n)?.adjoint_apply(mu)
        }
    }
}

/// Both routes of `<Sf, mu> = <f, S'mu>` evaluated independently.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub forward_side: f64,
    pub adjoint_side: f64,
    pub residual: f64,
    pub scale: f64,
    pub pass: bool,
}

/// Checks the defining adjointness identity on a finite instance.
pub fn duality_consistency(
    s: &KernelOperator,
    f: &BoundedFunction,
    mu: &SignedMeasure,
) -> Result<DualityReport> {
    let forward_side = pairing(&s.forward_apply(f)?, mu)?;
    let adjoint_side = pairing(f, &s.adjoint_apply(mu)?)?;
    let scale = (s.operator_norm() * f.sup_norm() * mu.tv_norm()).max(1.0);
    let residual = (forward_side - adjoint_side).abs();
    Ok(DualityReport {
        forward_side,
        adjoint_side,
        residual,
        scale,
        pass: residual <= 1e-12 * scale,
    })
}

/// Serialized kernel: source state to a list of `{target, weight}` entries.
/// A `null` target denotes mass assigned outside the truncation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelData(pub BTreeMap<String, Vec<KernelEntry>>);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelEntry {
    pub target: Option<String>,
    pub weight: f64,
}

impl KernelData {
    pub fn from_kernel(k: &Kernel) -> Self {
        let mut map = BTreeMap::new();
        for (x, row) in k.rows.iter().enumerate() {
            let mut entries: Vec<KernelEntry> = row
                .weights
                .iter()
                .map(|(&y, &w)| KernelEntry { target: Some(k.space.name(y).to_string()), weight: w })
                .collect();
            if row.leak != 0.0 {
                entries.push(KernelEntry { target: None, weight: row.leak });
            }
            map.insert(k.space.name(x).to_string(), entries);
        }
        KernelData(map)
    }

    pub fn into_kernel(self, space: Arc<StateSpace>) -> Result<Kernel> {
        let mut rows = vec![Row::default(); space.len()];
        for (state, entries) in self.0 {
            let x = space.index_of(&state)?;
            let mut row = Row::default();
            for e in entries {
                match e.target {
                    Some(t) => {
                        *row.weights.entry(space.index_of(&t)?).or_insert(0.0) += e.weight;
                    }
                    None => row.leak += e.weight,
                }
            }
            rows[x] = row;
        }
        Kernel::new(space, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::TailRule;
    use crate::space::Metric;

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

    fn swap_kernel() -> KernelOperator {
        let sp = space(2);
        KernelOperator::new(Kernel::deterministic(sp, |x| Some(1 - x)).unwrap())
    }

    fn stochastic2() -> KernelOperator {
        let sp = space(2);
        KernelOperator::new(
            Kernel::from_matrix(sp, &[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap(),
        )
    }

    fn f10(sp: &Arc<StateSpace>) -> BoundedFunction {
        BoundedFunction::new(sp.clone(), vec![1.0, 0.0], Some(TailRule::Zero), None).unwrap()
    }

    #[test]
    fn identity_kernel_fixes_everything() {
        let sp = space(3);
        let id = KernelOperator::identity(sp.clone());
        let f = BoundedFunction::new(sp.clone(), vec![0.3, -1.0, 2.0], Some(TailRule::Zero), None)
            .unwrap();
        assert_eq!(id.forward_apply(&f).unwrap().values(), f.values());
        let mu = SignedMeasure::uniform(sp, &[0, 2]).unwrap();
        assert_eq!(id.adjoint_apply(&mu).unwrap().weights(), mu.weights());
    }

    #[test]
    fn swap_kernel_swaps() {
        let s = swap_kernel();
        let f = f10(s.space());
        assert_eq!(s.forward_apply(&f).unwrap().values(), &[0.0, 1.0]);
        let d1 = SignedMeasure::dirac(s.space().clone(), 0).unwrap();
        let pushed = s.adjoint_apply(&d1).unwrap();
        assert_eq!(pushed.weight(1), 1.0);
        assert_eq!(pushed.weight(0), 0.0);
    }

    #[test]
    fn stochastic_forward_matches_matrix_vector_product() {
        let s = stochastic2();
        let f = f10(s.space());
        assert_eq!(s.forward_apply(&f).unwrap().values(), &[0.5, 0.25]);
        let d1 = SignedMeasure::dirac(s.space().clone(), 0).unwrap();
        let pushed = s.adjoint_apply(&d1).unwrap();
        assert_eq!(pushed.weight(0), 0.5);
        assert_eq!(pushed.weight(1), 0.5);
    }

    #[test]
    fn power_zero_is_identity_and_swap_squares_to_identity() {
        let s = swap_kernel();
        let p0 = s.power(0).unwrap();
        let f = f10(s.space());
        assert_eq!(p0.forward_apply(&f).unwrap().values(), f.values());
        let p2 = s.power(2).unwrap();
        assert_eq!(p2.forward_apply(&f).unwrap().values(), f.values());
    }

    #[test]
    fn power_matches_matrix_product_oracle() {
        // [[.5,.5],[.25,.75]]^2 = [[.375,.625],[.3125,.6875]]
        let s = stochastic2();
        let p2 = s.power(2).unwrap();
        let m = p2.kernel().to_matrix();
        assert!((m[(0, 0)] - 0.375).abs() < 1e-15);
        assert!((m[(0, 1)] - 0.625).abs() < 1e-15);
        assert!((m[(1, 0)] - 0.3125).abs() < 1e-15);
        assert!((m[(1, 1)] - 0.6875).abs() < 1e-15);
    }

    #[test]
    fn power_is_additive() {
        let s = stochastic2();
        let lhs = s.power(5).unwrap().kernel().to_matrix();
        let rhs = (s.power(2).unwrap().compose(&s.power(3).unwrap()).unwrap())
            .kernel()
            .to_matrix();
        assert!((lhs - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn markovian_detection() {
        assert!(stochastic2().is_markovian());
        assert!(swap_kernel().is_markovian());
        let sp = space(2);
        let neg = KernelOperator::new(
            Kernel::from_matrix(sp.clone(), &[vec![1.5, -0.5], vec![0.0, 1.0]]).unwrap(),
        );
        assert!(!neg.is_markovian());
        let shy = KernelOperator::new(
            Kernel::from_matrix(sp, &[vec![0.999, 0.0], vec![0.0, 0.999]]).unwrap(),
        );
        assert!(!shy.is_markovian());
    }

    #[test]
    fn duality_holds_for_identity_and_stochastic() {
        let s = stochastic2();
        let f = f10(s.space());
        let mu = SignedMeasure::uniform(s.space().clone(), &[0, 1]).unwrap();
        let rep = duality_consistency(&s, &f, &mu).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);
    }

    #[test]
    fn leak_resolves_against_tail_rule() {
        let sp = space(2);
        // map both states to the right: s1 exits the truncation
        let k = Kernel::deterministic(sp.clone(), |x| if x == 0 { Some(1) } else { None }).unwrap();
        let s = KernelOperator::new(k);
        assert_eq!(s.kernel().leaking_rows(0.0), vec![1]);
        let f = BoundedFunction::new(sp.clone(), vec![1.0, 2.0], Some(TailRule::Constant(7.0)), None)
            .unwrap();
        assert_eq!(s.forward_apply(&f).unwrap().values(), &[2.0, 7.0]);
        let bare = BoundedFunction::new(sp.clone(), vec![1.0, 2.0], None, None).unwrap();
        assert!(s.forward_apply(&bare).is_err());
        let mu = SignedMeasure::dirac(sp, 1).unwrap();
        let (pushed, leaked) = s.adjoint_apply_with_leak(&mu).unwrap();
        assert_eq!(pushed.tv_norm(), 0.0);
        assert_eq!(leaked, 1.0);
    }

    #[test]
    fn kernel_json_round_trip_is_bit_exact() {
        let s = stochastic2();
        let data = KernelData::from_kernel(s.kernel());
        let json = serde_json::to_string(&data).unwrap();
        let back: KernelData = serde_json::from_str(&json).unwrap();
        let k2 = back.into_kernel(s.space().clone()).unwrap();
        for x in 0..2 {
            assert_eq!(k2.row(x).weights, s.kernel().row(x).weights);
        }
        // an awkward weight round-trips through the shortest-representation encoder
        let sp = space(2);
        let mut rows = vec![Row::dirac(0), Row::default()];
        rows[1].weights.insert(0, 0.1 + 0.2); // 0.30000000000000004
        rows[1].leak = 1.0 - (0.1 + 0.2);
        let k = Kernel::new(sp.clone(), rows).unwrap();
        let json = serde_json::to_string(&KernelData::from_kernel(&k)).unwrap();
        let back: KernelData = serde_json::from_str(&json).unwrap();
        let k2 = back.into_kernel(sp).unwrap();
        assert_eq!(k2.row(1).weights[&0].to_bits(), k.row(1).weights[&0].to_bits());
        assert_eq!(k2.row(1).leak.to_bits(), k.row(1).leak.to_bits());
    }
}
