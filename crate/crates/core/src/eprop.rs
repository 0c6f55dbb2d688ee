//! Equicontinuity probes: the e-property and strict-topology
//! equicontinuity of operator families.
//!
//! A family has the *e-property* when the orbit of every bounded Lipschitz
//! function is equicontinuous: at each probe point `x` the modulus
//! `sup over the family and over y with d(x, y) < delta of |Tf(x) - Tf(y)|`
//! must shrink to zero with the radius. The modulus table records that
//! surface over probe points and a radius grid.
//!
//! Strict-topology equicontinuity of Markovian families reduces to a kernel
//! mass condition: for every compact probe set and every `eps` there must be
//! an exhaustion set outside of which every kernel row based in the probe
//! set carries at most `eps` mass. Leaked mass counts as outside every
//! exhaustion set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::BoundedFunction;
use crate::kernel::KernelOperator;
use crate::space::StateSpace;

/// Modulus-of-continuity surface of a function family.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusTable {
    pub probes: Vec<usize>,
    pub radii: Vec<f64>,
    /// `values[p][r]` = modulus at probe `p`, radius `r`.
    pub values: Vec<Vec<f64>>,
    pub family_size: usize,
}

impl ModulusTable {
    /// Modulus at the smallest radius, per probe.
    pub fn floor(&self) -> Vec<f64> {
        let last = self.radii.len() - 1;
        self.values.iter().map(|row| row[last]).collect()
    }

    /// True if the modulus at the smallest radius is below `target`
    /// at every probe.
    pub fn decays_below(&self, target: f64) -> bool {
        self.floor().iter().all(|&v| v <= target)
    }

    /// Largest entry-wise ratio against another table (for inheritance
    /// bounds); radii and probes must match.
    pub fn max_ratio_against(&self, other: &ModulusTable) -> f64 {
        let mut ratio = 0.0f64;
        for (r1, r2) in self.values.iter().zip(&other.values) {
            for (&a, &b) in r1.iter().zip(r2) {
                if b > 0.0 {
                    ratio = ratio.max(a / b);
                } else if a > 1e-14 {
                    ratio = f64::INFINITY;
                }
            }
        }
        ratio
    }
}

/// Modulus table of an explicit function family.
pub fn modulus_table(
    family: &[BoundedFunction],
    space: &StateSpace,
    probes: &[usize],
    radii: &[f64],
) -> Result<ModulusTable> {
    if family.is_empty() {
        return Err(Error::Parameter("modulus table of an empty family".into()));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Parameter("radii must be strictly decreasing".into()));
    }
    let mut values = Vec::with_capacity(probes.len());
    for &x in probes {
        if x >= space.len() {
            return Err(Error::Parameter(format!("probe index {x} out of range")));
        }
        let mut row = Vec::with_capacity(radii.len());
        for &delta in radii {
            let mut m = 0.0f64;
            for y in 0..space.len() {
                if y == x || space.distance(x, y) >= delta {
                    continue;
                }
                for g in family {
                    m = m.max((g.value(x) - g.value(y)).abs());
                }
            }
            row.push(m);
        }
        values.push(row);
    }
    Ok(ModulusTable { probes: probes.to_vec(), radii: radii.to_vec(), values, family_size: family.len() })
}

/// Modulus table of the orbit `{T f : T in operators}`.
pub fn e_property_probe(
    operators: &[KernelOperator],
    f: &BoundedFunction,
    probes: &[usize],
    radii: &[f64],
) -> Result<ModulusTable> {
    let family = operators
        .iter()
        .map(|t| t.forward_apply(f))
        .collect::<Result<Vec<_>>>()?;
    let space = f.space().clone();
    modulus_table(&family, &space, probes, radii)
}

/// Strict-topology equicontinuity profile of an operator family.
#[derive(Debug, Clone, Serialize)]
pub struct Beta0Profile {
    /// Per `eps`: the smallest exhaustion level confining the kernel mass,
    /// or `None` when no level within the truncation works.
    pub per_eps: Vec<(f64, Option<usize>)>,
    pub equicontinuous: bool,
}

/// For each `eps`, finds the smallest exhaustion level `m` such that every
/// kernel row based in `compact` keeps all but `eps` of its mass inside
/// `K_m`. Leak always counts as escaped mass.
pub fn beta0_equicontinuity_probe(
    operators: &[KernelOperator],
    compact: &[usize],
    eps_grid: &[f64],
) -> Result<Beta0Profile> {
    if operators.is_empty() {
        return Err(Error::Parameter("equicontinuity probe of an empty family".into()));
    }
    let space = operators[0].space().clone();
    let mut per_eps = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !(eps > 0.0) {
            return Err(Error::Parameter("eps grid must be positive".into()));
        }
        let mut found = None;
        'levels: for level in 0..space.exhaustion_levels() {
            for op in operators {
                for &x in compact {
                    let row = op.kernel().row(x);
                    let outside: f64 = row
                        .weights
                        .iter()
                        .filter(|(&y, _)| !space.in_exhaustion(y, level))
                        .map(|(_, w)| w.abs())
                        .sum::<f64>()
                        + row.leak.abs();
                    if outside > eps {
                        continue 'levels;
                    }
                }
            }
            found = Some(level);
            break;
        }
        per_eps.push((eps, found));
    }
    let equicontinuous = per_eps.iter().all(|(_, lvl)| lvl.is_some());
    Ok(Beta0Profile { per_eps, equicontinuous })
}
