//! `ℓ_p` norms and finite metric spaces built from snapshots and from the
//! limit space.

use alloc::vec::Vec;

use crate::analytic_limits::LimitSpace;
use crate::numeric::AbsPow;
use crate::walk_engine::GridSnapshot;
use crate::{Error, Result};

/// `(Σ|v_i|^p)^{1/p}`, computed as `max · (Σ(|v_i|/max)^p)^{1/p}` so that
/// coordinates near the overflow or underflow threshold survive.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    let max = v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let pow = AbsPow::new(p);
    let inv = 1.0 / max;
    let sum: f64 = v.iter().map(|&x| pow.eval(x * inv)).sum();
    max * pow.root(sum)
}

// Below this the unscaled power sum may have lost bits to underflow.
const UNSCALED_FLOOR: f64 = 1e-250;

/// `‖a − b‖_p`. Sums unscaled powers first and falls back to the rescaled
/// form of [`lp_norm`] only when the plain sum is out of the safe range;
/// distance matrices are the dominant cost of every sweep.
pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let pow = AbsPow::new(p);
    let sum = match pow {
        // Dispatch once so the inner loops vectorize.
        AbsPow::One => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        AbsPow::Two => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        AbsPow::Three => a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let t = (x - y).abs();
                t * t * t
            })
            .sum(),
        _ => a.iter().zip(b).map(|(x, y)| pow.eval(x - y)).sum::<f64>(),
    };
    if sum.is_finite() && sum > UNSCALED_FLOOR {
        return pow.root(sum);
    }
    let max = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if max == 0.0 || !max.is_finite() {
        return max;
    }
    let inv = 1.0 / max;
    let scaled: f64 = a.iter().zip(b).map(|(x, y)| pow.eval((x - y) * inv)).sum();
    max * pow.root(scaled)
}

/// A finite metric space stored as a strictly lower-triangular distance
/// matrix, optionally labeled with times in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    k: usize,
    labels: Option<Vec<f64>>,
    lower: Vec<f64>,
}

#[inline]
fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

impl FiniteMetricSpace {
    /// Builds the space from `dist(i, j)` evaluated for `i > j`.
    pub fn from_fn(k: usize, mut dist: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("a metric space needs at least one point"));
        }
        let mut lower = Vec::with_capacity(k * (k - 1) / 2);
        for i in 1..k {
            for j in 0..i {
                let v = dist(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(alloc::format!("distance ({i},{j}) = {v} is not a nonnegative real")));
                }
                lower.push(v);
            }
        }
        Ok(Self { k, labels: None, lower })
    }

    /// Row `i` holds the `i` distances to points `0..i`.
    pub fn from_lower_rows(rows: &[Vec<f64>]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i {
                return Err(Error::invalid(alloc::format!("row {i} has {} entries, expected {i}", row.len())));
            }
        }
        Self::from_fn(rows.len(), |i, j| rows[i][j])
    }

    /// Builds the space from a full square matrix, which must be symmetric
    /// with a zero diagonal.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid("distance matrix is not square"));
            }
            if row[i] != 0.0 {
                return Err(Error::invalid(alloc::format!("nonzero diagonal entry at {i}")));
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::invalid(alloc::format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Self::from_fn(k, |i, j| rows[i][j])
    }

    pub fn single_point() -> Self {
        Self { k: 1, labels: None, lower: Vec::new() }
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.k {
            return Err(Error::invalid(alloc::format!("{} labels for {} points", labels.len(), self.k)));
        }
        if labels.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("time labels must lie in [0, 1]"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        use core::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => 0.0,
            Ordering::Greater => self.lower[tri_index(i, j)],
            Ordering::Less => self.lower[tri_index(j, i)],
        }
    }

    pub fn diameter(&self) -> f64 {
        self.lower.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// Row `i` of the lower triangle, distances to points `0..i`.
    pub fn lower_row(&self, i: usize) -> &[f64] {
        let start = i * i.saturating_sub(1) / 2;
        &self.lower[start..start + i]
    }

    /// Checks the triangle inequality on every triple, to `rel_tol · diameter`.
    /// Symmetry and the zero diagonal hold by construction.
    pub fn check_metric_axioms(&self, rel_tol: f64) -> Result<()> {
        let tol = rel_tol * self.diameter();
        for a in 0..self.k {
            for b in 0..a {
                let ab = self.dist(a, b);
                for c in 0..self.k {
                    if ab > self.dist(a, c) + self.dist(c, b) + tol {
                        return Err(Error::invalid(alloc::format!(
                            "triangle inequality fails for ({a},{b}) via {c}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The `(m+1)`-point space of a snapshot, `dist(i, j) = ‖point_j − point_i‖_p`,
/// labeled with the grid times.
pub fn path_metric_space(snapshot: &GridSnapshot) -> FiniteMetricSpace {
    let p = snapshot.p();
    let k = snapshot.m() + 1;
    let mut lower = Vec::with_capacity(k * (k - 1) / 2);
    for i in 1..k {
        let pi = snapshot.point(i);
        lower.extend((0..i).map(|j| lp_distance(pi, snapshot.point(j), p)));
    }
    FiniteMetricSpace { k, labels: Some(snapshot.times().to_vec()), lower }
}

/// The limit space sampled at `i/m`, `i = 0..=m`.
pub fn limit_sample_space(m: usize, space: &LimitSpace) -> Result<FiniteMetricSpace> {
    if m == 0 {
        return Err(Error::invalid("m must be >= 1"));
    }
    let times: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    FiniteMetricSpace::from_fn(m + 1, |i, j| space.distance_unchecked(times[i], times[j]))?.with_labels(times)
}

/// `sup |d_path(i, j) − r(t_i, t_j)|` over labeled pairs, optionally also
/// against the cell corners `r(t_{j+1}, t_i)` and `r(t_j, t_{i+1})` where
/// `t_{k+1}` is the next label (1 past the last). Labels must be increasing.
pub fn labeled_difference_sup(path: &FiniteMetricSpace, limit: &LimitSpace, corners: bool) -> Result<f64> {
    let labels = path.labels().ok_or(Error::Unlabeled)?;
    if labels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("time labels must be strictly increasing"));
    }
    let k = path.k();
    let next = |i: usize| if i + 1 < k { labels[i + 1] } else { 1.0 };
    let mut best = 0.0f64;
    for j in 0..k {
        for i in 0..=j {
            let dist = path.dist(j, i);
            best = best.max((dist - limit.distance_unchecked(labels[j], labels[i])).abs());
            if corners {
                best = best.max((dist - limit.distance_unchecked(next(j), labels[i])).abs());
                best = best.max((dist - limit.distance_unchecked(labels[j], next(i))).abs());
            }
        }
    }
    Ok(best)
}
