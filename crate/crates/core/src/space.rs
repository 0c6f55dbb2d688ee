//! Countable metric state spaces with compact exhaustions.
//!
//! A [`StateSpace`] is a finite truncation of a countable metric space: an
//! ordered enumeration of states, a metric, an increasing chain of finite
//! "exhaustion" sets standing in for compact subsets, and an optional set of
//! compactification points (one-point-at-infinity style states that belong to
//! every exhaustion set, encoding "mass accumulating there never escapes").

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How distances between enumerated states are obtained.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    /// States embedded on the real line; distance is `|a - b|`.
    Line { coords: Vec<f64> },
    /// States embedded in the plane; distance is Euclidean.
    Plane { coords: Vec<(f64, f64)> },
    /// Discrete metric: distance 1 between distinct states.
    Discrete,
    /// Explicit symmetric distance matrix, row-major.
    Dense { matrix: Vec<Vec<f64>> },
}

impl Metric {
    fn len_hint(&self) -> Option<usize> {
        match self {
            Metric::Line { coords } => Some(coords.len()),
            Metric::Plane { coords } => Some(coords.len()),
            Metric::Discrete => None,
            Metric::Dense { matrix } => Some(matrix.len()),
        }
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            Metric::Line { coords } => (coords[a] - coords[b]).abs(),
            Metric::Plane { coords } => {
                let (xa, ya) = coords[a];
                let (xb, yb) = coords[b];
                ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
            }
            Metric::Discrete => 1.0,
            Metric::Dense { matrix } => matrix[a][b],
        }
    }
}

/// Finite truncation of a countable metric space.
#[derive(Debug)]
pub struct StateSpace {
    names: Vec<String>,
    metric: Metric,
    /// Nested exhaustion sets as sorted index lists.
    exhaustion: Vec<Vec<usize>>,
    /// Per-level membership masks, same length as `exhaustion`.
    exhaustion_mask: Vec<Vec<bool>>,
    infinity_points: Vec<usize>,
}

impl StateSpace {
    /// Builds and validates a state space.
    ///
    /// Validation covers metric axioms (symmetry is structural for all
    /// variants except `Dense`, positivity and the triangle inequality are
    /// checked on enumerated triples, exhaustively for small spaces and on a
    /// deterministic sample above [`TRIANGLE_EXHAUSTIVE_LIMIT`] states),
    /// nesting of the exhaustion chain, and the requirement that every
    /// compactification point lies in every exhaustion set.
    pub fn new(
        names: Vec<String>,
        metric: Metric,
        exhaustion: Vec<Vec<usize>>,
        infinity_points: Vec<usize>,
    ) -> Result<Arc<Self>> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidSpace("empty enumeration".into()));
        }
        {
            let mut sorted = names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != n {
                return Err(Error::InvalidSpace("duplicate state names".into()));
            }
        }
        if let Some(m) = metric.len_hint() {
            if m != n {
                return Err(Error::InvalidSpace(format!(
                    "metric describes {m} states, enumeration has {n}"
                )));
            }
        }
        if let Metric::Dense { matrix } = &metric {
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::InvalidSpace("distance matrix is not square".into()));
                }
                for (j, &d) in row.iter().enumerate() {
                    if !d.is_finite() || (i == j && d != 0.0) || (i != j && d <= 0.0) {
                        return Err(Error::InvalidSpace(format!(
                            "distance matrix entry ({i},{j}) = {d} violates metric axioms"
                        )));
                    }
                    if (d - matrix[j][i]).abs() > 0.0 {
                        return Err(Error::InvalidSpace("distance matrix not symmetric".into()));
                    }
                }
            }
        }
        validate_positivity(&metric, n)?;
        validate_triangle(&metric, n)?;

        if exhaustion.is_empty() {
            return Err(Error::InvalidSpace("empty exhaustion chain".into()));
        }
        let mut masks: Vec<Vec<bool>> = Vec::with_capacity(exhaustion.len());
        let mut sorted_sets: Vec<Vec<usize>> = Vec::with_capacity(exhaustion.len());
        for (level, set) in exhaustion.iter().enumerate() {
            let mut mask = vec![false; n];
            for &idx in set {
                if idx >= n {
                    return Err(Error::InvalidSpace(format!(
                        "exhaustion level {level} references state index {idx} out of range"
                    )));
                }
                mask[idx] = true;
            }
            if let Some(prev) = masks.last() {
                if prev.iter().zip(&mask).any(|(&p, &c)| p && !c) {
                    return Err(Error::InvalidSpace(format!(
                        "exhaustion level {level} is not a superset of level {}",
                        level - 1
                    )));
                }
            }
            let mut sorted: Vec<usize> =
                mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
            sorted.dedup();
            sorted_sets.push(sorted);
            masks.push(mask);
        }
        if masks.last().map(|m| m.iter().any(|&b| !b)) == Some(true) {
            return Err(Error::InvalidSpace(
                "top exhaustion level must cover the whole truncation".into(),
            ));
        }
        for &inf in &infinity_points {
            if inf >= n {
                return Err(Error::InvalidSpace("infinity point index out of range".into()));
            }
            if masks.iter().any(|mask| !mask[inf]) {
                return Err(Error::InvalidSpace(format!(
                    "compactification point `{}` must belong to every exhaustion set",
                    names[inf]
                )));
            }
        }

        Ok(Arc::new(StateSpace {
            names,
            metric,
            exhaustion: sorted_sets,
            exhaustion_mask: masks,
            infinity_points,
        }))
    }

    /// Number of enumerated states (the truncation level).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.metric.distance(a, b)
    }

    /// Number of exhaustion levels.
    pub fn exhaustion_levels(&self) -> usize {
        self.exhaustion.len()
    }

    /// Sorted indices of the states in exhaustion set `level` (0-based).
    pub fn exhaustion_set(&self, level: usize) -> &[usize] {
        &self.exhaustion[level]
    }

    pub fn in_exhaustion(&self, idx: usize, level: usize) -> bool {
        self.exhaustion_mask[level][idx]
    }

    pub fn infinity_points(&self) -> &[usize] {
        &self.infinity_points
    }

    pub fn is_infinity(&self, idx: usize) -> bool {
        self.infinity_points.contains(&idx)
    }

    /// First declared compactification point, if any.
    pub fn infinity(&self) -> Option<usize> {
        self.infinity_points.first().copied()
    }
}

/// Two handles address the same space if they share the allocation or agree
/// on the enumeration.
pub fn same_space(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> bool {
    Arc::ptr_eq(a, b) || a.names == b.names
}

/// Above this size, metric validation samples triples instead of
/// enumerating all of them.
pub const TRIANGLE_EXHAUSTIVE_LIMIT: usize = 300;

fn validate_positivity(metric: &Metric, n: usize) -> Result<()> {
    // Embedded metrics satisfy the axioms structurally except for
    // coincident coordinates, which a sort detects in O(n log n).
    match metric {
        Metric::Line { coords } => {
            let mut sorted: Vec<f64> = coords.clone();
            if sorted.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSpace("non-finite coordinate".into()));
            }
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSpace(
                    "coincident coordinates give zero distance between distinct states".into(),
                ));
            }
        }
        Metric::Plane { coords } => {
            let mut sorted: Vec<(f64, f64)> = coords.clone();
            if sorted.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::InvalidSpace("non-finite coordinate".into()));
            }
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidSpace(
                    "coincident coordinates give zero distance between distinct states".into(),
                ));
            }
        }
        Metric::Discrete => {}
        Metric::Dense { .. } => {
            // positivity already checked entrywise by the caller
            let _ = n;
        }
    }
    Ok(())
}

fn validate_triangle(metric: &Metric, n: usize) -> Result<()> {
    let dense = matches!(metric, Metric::Dense { .. });
    if !dense {
        return Ok(()); // embeddings and the discrete metric satisfy it structurally
    }
    let check = |i: usize, j: usize, k: usize| -> Result<()> {
        let dij = metric.distance(i, j);
        let djk = metric.distance(j, k);
        let dik = metric.distance(i, k);
        if dik > dij + djk + 1e-12 * (dij + djk) {
            return Err(Error::InvalidSpace(format!(
                "triangle inequality violated on ({i},{j},{k})"
            )));
        }
        Ok(())
    };
    if n <= TRIANGLE_EXHAUSTIVE_LIMIT {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    if k != i && k != j {
                        check(i, j, k)?;
                    }
                }
            }
        }
    } else {
        // Deterministic congruential sweep, ~TRIANGLE_EXHAUSTIVE_LIMIT^3 / 64 triples.
        let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
        let budget = 400_000usize;
        for _ in 0..budget {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let i = (state >> 33) as usize % n;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % n;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let k = (state >> 33) as usize % n;
            if i != j && j != k && i != k {
                check(i, j, k)?;
            }
        }
    }
    Ok(())
}

/// Serialized form of a state space (states as strings).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceData {
    pub states: Vec<String>,
    pub metric: Metric,
    pub exhaustion: Vec<Vec<String>>,
    #[serde(default)]
    pub infinity_points: Vec<String>,
}

impl SpaceData {
    pub fn from_space(space: &StateSpace) -> Self {
        SpaceData {
            states: space.names.clone(),
            metric: space.metric.clone(),
            exhaustion: space
                .exhaustion
                .iter()
                .map(|set| set.iter().map(|&i| space.names[i].clone()).collect())
                .collect(),
            infinity_points: space
                .infinity_points
                .iter()
                .map(|&i| space.names[i].clone())
                .collect(),
        }
    }

    pub fn into_space(self) -> Result<Arc<StateSpace>> {
        let index = |name: &str| -> Result<usize> {
            self.states
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownState(name.to_string()))
        };
        let exhaustion = self
            .exhaustion
            .iter()
            .map(|set| set.iter().map(|s| index(s)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let infinity = self
            .infinity_points
            .iter()
            .map(|s| index(s))
            .collect::<Result<Vec<_>>>()?;
        StateSpace::new(self.states, self.metric, exhaustion, infinity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_space(coords: &[f64]) -> Arc<StateSpace> {
        let names = (0..coords.len()).map(|i| format!("s{i}")).collect();
        let n = coords.len();
        StateSpace::new(
            names,
            Metric::Line { coords: coords.to_vec() },
            vec![(0..n).collect()],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn builds_line_space() {
        let sp = line_space(&[0.0, 1.0, 3.0]);
        assert_eq!(sp.len(), 3);
        assert_eq!(sp.distance(0, 2), 3.0);
        assert_eq!(sp.distance(2, 0), 3.0);
        assert_eq!(sp.distance(1, 1), 0.0);
    }

    #[test]
    fn rejects_coincident_coordinates() {
        let err = StateSpace::new(
            vec!["a".into(), "b".into()],
            Metric::Line { coords: vec![1.0, 1.0] },
            vec![vec![0, 1]],
            vec![],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_non_nested_exhaustion() {
        let err = StateSpace::new(
            vec!["a".into(), "b".into()],
            Metric::Discrete,
            vec![vec![0], vec![1]],
            vec![],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_infinity_point_outside_base_level() {
        let err = StateSpace::new(
            vec!["a".into(), "b".into()],
            Metric::Discrete,
            vec![vec![0], vec![0, 1]],
            vec![1],
        );
        assert!(err.is_err());
    }

    #[test]
    fn rejects_triangle_violation() {
        let matrix = vec![
            vec![0.0, 1.0, 5.0],
            vec![1.0, 0.0, 1.0],
            vec![5.0, 1.0, 0.0],
        ];
        let err = StateSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            Metric::Dense { matrix },
            vec![vec![0, 1, 2]],
            vec![],
        );
        assert!(err.is_err());
    }

    #[test]
    fn space_data_round_trip() {
        let sp = line_space(&[0.0, 0.5, 2.0]);
        let data = SpaceData::from_space(&sp);
        let json = serde_json::to_string(&data).unwrap();
        let back: SpaceData = serde_json::from_str(&json).unwrap();
        let sp2 = back.into_space().unwrap();
        assert_eq!(sp2.names(), sp.names());
        assert_eq!(sp2.distance(0, 2), sp.distance(0, 2));
    }
}
