//! Finite-sample cluster detection for sequences of functions or measures.
//!
//! The topological notion "every subsequence has a convergent subnet" is
//! probed through a total-boundedness surrogate: a greedy epsilon-net is
//! grown over increasing prefixes of the sample. A net whose cardinality
//! keeps growing with the sample length witnesses escape to infinity; a
//! stabilized net with a small tail diameter witnesses convergence; a
//! stabilized net with recurring but distinct centers witnesses multiple
//! cluster points.
//!
//! When the sequence is an orbit of averages, any certified witness must be
//! an approximate fixed point of the underlying operator; the caller can
//! request that residual check.

use serde::Serialize;

use crate::bl::bl_distance;
use crate::error::Result;
use crate::function::{BoundedFunction, VanishingWeight};
use crate::kernel::KernelOperator;
use crate::measure::SignedMeasure;
use crate::pairing::strict_seminorm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterStatus {
    /// Tail contracts to a single point at the requested tolerance.
    Convergent,
    /// Relatively compact but not convergent: several recurring witnesses.
    Clusters,
    /// Net cardinality grows with the sample; mass or oscillation escapes.
    Escapes,
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterOptions {
    /// Net resolution.
    pub eps: f64,
    /// Number of trailing elements that must agree for convergence.
    pub tail_window: usize,
    /// Tail diameter tolerance for the convergent verdict.
    pub tol: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions { eps: 0.25, tail_window: 5, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterVerdict {
    pub status: ClusterStatus,
    /// Sample indices of the cluster witnesses.
    pub witness_indices: Vec<usize>,
    /// (prefix length, net cardinality) pairs.
    pub net_profile: Vec<(usize, usize)>,
    /// Largest fixed-point residual over witnesses, when requested.
    pub fixed_residual: Option<f64>,
}

impl ClusterVerdict {
    pub fn clusters(&self) -> bool {
        matches!(self.status, ClusterStatus::Convergent | ClusterStatus::Clusters)
    }
}

/// Core detector over an abstract pairwise distance.
pub fn detect_clusters(
    len: usize,
    mut dist: impl FnMut(usize, usize) -> Result<f64>,
    opts: &ClusterOptions,
) -> Result<ClusterVerdict> {
    assert!(len >= 2, "cluster detection needs at least two samples");
    // greedy net grown element by element, cardinality recorded at quarters
    let mut centers: Vec<usize> = Vec::new();
    let mut net_profile = Vec::new();
    let checkpoints = [len / 4, len / 2, 3 * len / 4, len];
    for i in 0..len {
        let mut covered = false;
        for &c in &centers {
            if dist(i, c)? <= opts.eps {
                covered = true;
                break;
            }
        }
        if !covered {
            centers.push(i);
        }
        if checkpoints.contains(&(i + 1)) {
            net_profile.push((i + 1, centers.len()));
        }
    }

    let window = opts.tail_window.min(len).max(2);
    let tail_start = len - window;
    let mut tail_diameter = 0.0f64;
    for i in tail_start..len {
        for j in (i + 1)..len {
            tail_diameter = tail_diameter.max(dist(i, j)?);
        }
    }

    if tail_diameter <= opts.tol {
        return Ok(ClusterVerdict {
            status: ClusterStatus::Convergent,
            witness_indices: vec![len - 1],
            net_profile,
            fixed_residual: None,
        });
    }

    let halfway_card = net_profile
        .iter()
        .rev()
        .find(|(l, _)| *l <= len / 2)
        .map(|(_, c)| *c)
        .unwrap_or(0);
    let final_card = centers.len();
    if final_card > halfway_card {
        return Ok(ClusterVerdict {
            status: ClusterStatus::Escapes,
            witness_indices: vec![],
            net_profile,
            fixed_residual: None,
        });
    }

    // recurring centers: those revisited by the tail half of the sample
    let mut witnesses = Vec::new();
    for &c in &centers {
        let mut recurs = false;
        for i in (len / 2)..len {
            if dist(i, c)? <= opts.eps {
                recurs = true;
                break;
            }
        }
        if recurs {
            witnesses.push(c);
        }
    }
    if witnesses.is_empty() {
        witnesses = centers.clone();
    }
    Ok(ClusterVerdict {
        status: ClusterStatus::Clusters,
        witness_indices: witnesses,
        net_profile,
        fixed_residual: None,
    })
}

/// Metric used for function sequences.
pub enum FunctionMetric<'a> {
    /// Sup norm over the whole truncation.
    SupEverywhere,
    /// Sup over one exhaustion set.
    SupOnExhaustion(usize),
    /// Max of strict seminorms over a weight dictionary.
    Seminorms(&'a [VanishingWeight]),
}

pub fn cluster_functions(
    sample: &[BoundedFunction],
    metric: &FunctionMetric<'_>,
    opts: &ClusterOptions,
    fix_check: Option<&KernelOperator>,
) -> Result<ClusterVerdict> {
    let d = |i: usize, j: usize| -> Result<f64> {
        let diff = sample[i].combine(1.0, &sample[j], -1.0)?;
        match metric {
            FunctionMetric::SupEverywhere => {
                Ok(diff.values().iter().fold(0.0f64, |m, v| m.max(v.abs())))
            }
            FunctionMetric::SupOnExhaustion(level) => {
                let space = diff.space();
                Ok(space
                    .exhaustion_set(*level)
                    .iter()
                    .map(|&x| diff.value(x).abs())
                    .fold(0.0, f64::max))
            }
            FunctionMetric::Seminorms(weights) => {
                let mut m = 0.0f64;
                for w in weights.iter() {
                    m = m.max(strict_seminorm(&diff, w)?);
                }
                Ok(m)
            }
        }
    };
    let mut verdict = detect_clusters(sample.len(), d, opts)?;
    if let Some(s) = fix_check {
        let mut worst = 0.0f64;
        for &w in &verdict.witness_indices {
            let image = s.forward_apply(&sample[w])?;
            worst = worst.max(image.combine(1.0, &sample[w], -1.0)?.sup_norm());
        }
        verdict.fixed_residual = Some(worst);
    }
    Ok(verdict)
}

pub fn cluster_measures(
    sample: &[SignedMeasure],
    opts: &ClusterOptions,
    fix_check: Option<&KernelOperator>,
) -> Result<ClusterVerdict> {
    // variation dominates the bounded-Lipschitz distance: when it already
    // sits below every decision threshold, the LP solve is unnecessary
    let shortcut = opts.tol.min(opts.eps);
    let d = |i: usize, j: usize| -> Result<f64> {
        let tv = sample[i].combine(1.0, &sample[j], -1.0)?.tv_norm();
        if tv <= shortcut {
            Ok(tv)
        } else {
            bl_distance(&sample[i], &sample[j])
        }
    };
    let mut verdict = detect_clusters(sample.len(), d, opts)?;
    if let Some(s) = fix_check {
        let mut worst = 0.0f64;
        for &w in &verdict.witness_indices {
            let image = s.adjoint_apply(&sample[w])?;
            worst = worst.max(image.combine(1.0, &sample[w], -1.0)?.tv_norm());
        }
        verdict.fixed_residual = Some(worst);
    }
    Ok(verdict)
}
