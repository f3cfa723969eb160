//! Gromov–Hausdorff tools for finite metric spaces.
//!
//! `d_GH(A, B) = ½ inf_R dis(R)` over correspondences `R ⊆ A × B` that are
//! total on both sides, with `dis(R) = max |d_A(a, a') − d_B(b, b')|` over
//! related pairs.

use alloc::vec::Vec;

use crate::analytic_limits::LimitSpace;
use crate::path_metrics::{labeled_difference_sup, FiniteMetricSpace};
use crate::{Error, Result};

/// Largest space accepted by [`gh_exact_small`].
pub const EXACT_GH_CAP: usize = 5;

/// A relation between `0..ka` and `0..kb` that covers both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correspondence {
    ka: usize,
    kb: usize,
    pairs: Vec<(usize, usize)>,
}

impl Correspondence {
    pub fn new(ka: usize, kb: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen_a = alloc::vec![false; ka];
        let mut seen_b = alloc::vec![false; kb];
        for &(a, b) in &pairs {
            if a >= ka || b >= kb {
                return Err(Error::NonTotalCorrespondence(alloc::format!("pair ({a},{b}) is out of range")));
            }
            seen_a[a] = true;
            seen_b[b] = true;
        }
        if let Some(a) = seen_a.iter().position(|s| !s) {
            return Err(Error::NonTotalCorrespondence(alloc::format!("point {a} of the first space is unrelated")));
        }
        if let Some(b) = seen_b.iter().position(|s| !s) {
            return Err(Error::NonTotalCorrespondence(alloc::format!("point {b} of the second space is unrelated")));
        }
        Ok(Self { ka, kb, pairs })
    }

    /// `i ↔ i` between two spaces of equal size.
    pub fn identity(k: usize) -> Self {
        Self { ka: k, kb: k, pairs: (0..k).map(|i| (i, i)).collect() }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

pub fn distortion(corr: &Correspondence, a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> Result<f64> {
    if corr.ka != a.k() || corr.kb != b.k() {
        return Err(Error::NonTotalCorrespondence(alloc::format!(
            "correspondence is between {}- and {}-point sets, spaces have {} and {} points",
            corr.ka,
            corr.kb,
            a.k(),
            b.k()
        )));
    }
    let mut worst = 0.0f64;
    for (idx, &(x, y)) in corr.pairs.iter().enumerate() {
        for &(x2, y2) in &corr.pairs[..idx] {
            worst = worst.max((a.dist(x, x2) - b.dist(y, y2)).abs());
        }
    }
    Ok(worst)
}

/// Exact GH distance for spaces of at most [`EXACT_GH_CAP`] points.
///
/// Every correspondence contains one of the form
/// `{(a, f(a))} ∪ {(g(b), b)}` for maps `f: A → B`, `g: B → A`, and shrinking
/// a relation cannot increase its distortion, so the infimum is a minimum
/// over those `|B|^|A| · |A|^|B|` relations. The search assigns `f` then `g`
/// and prunes branches whose partial distortion already reaches the best
/// value found.
pub fn gh_exact_small(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> Result<f64> {
    let (ka, kb) = (a.k(), b.k());
    if ka > EXACT_GH_CAP || kb > EXACT_GH_CAP {
        return Err(Error::TooLarge { ka, kb, cap: EXACT_GH_CAP });
    }
    let mut search = Search { a, b, pairs: Vec::with_capacity(ka + kb), best: f64::INFINITY };
    search.run(0, 0.0);
    Ok(0.5 * search.best)
}

struct Search<'s> {
    a: &'s FiniteMetricSpace,
    b: &'s FiniteMetricSpace,
    pairs: Vec<(usize, usize)>,
    best: f64,
}

impl Search<'_> {
    /// Slot `s < ka` chooses `f(s)`, slot `ka + t` chooses `g(t)`.
    fn run(&mut self, slot: usize, current: f64) {
        let (ka, kb) = (self.a.k(), self.b.k());
        if slot == ka + kb {
            self.best = self.best.min(current);
            return;
        }
        let choices = if slot < ka { kb } else { ka };
        for c in 0..choices {
            let pair = if slot < ka { (slot, c) } else { (c, slot - ka) };
            let mut dis = current;
            for &(x, y) in &self.pairs {
                dis = dis.max((self.a.dist(pair.0, x) - self.b.dist(pair.1, y)).abs());
                if dis >= self.best {
                    break;
                }
            }
            if dis >= self.best {
                continue;
            }
            self.pairs.push(pair);
            self.run(slot + 1, dis);
            self.pairs.pop();
            if self.best == 0.0 {
                return;
            }
        }
    }
}

/// `½ |diam A − diam B| ≤ d_GH(A, B)`.
pub fn gh_lower_bound_diameter(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> f64 {
    0.5 * (a.diameter() - b.diameter()).abs()
}

/// Upper bounds on the GH distance between a time-labeled path space and the
/// limit space `([0,1], σ M_p^{1/p} √|t−s|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhUpperBound {
    /// `D`: sup over labeled pairs of `|d_path(i, j) − r(t_i, t_j)|`.
    pub grid_sup: f64,
    /// `σ M_p^{1/p} √(2/m)` with `m = k − 1`.
    pub allowance: f64,
    /// `2 (D + allowance)`.
    pub paper_bound: f64,
    /// `(D + allowance) / 2`, realized by mapping each time to its nearest
    /// label.
    pub corr_bound: f64,
}

impl GhUpperBound {
    /// `2 D`, before the discretization allowance.
    pub fn grid_paper_bound(&self) -> f64 {
        2.0 * self.grid_sup
    }

    /// `D / 2`, before the discretization allowance.
    pub fn grid_corr_bound(&self) -> f64 {
        0.5 * self.grid_sup
    }
}

pub fn gh_upper_bound_to_limit(path: &FiniteMetricSpace, limit: &LimitSpace) -> Result<GhUpperBound> {
    if path.k() < 2 {
        return Err(Error::invalid("path space needs at least two labeled points"));
    }
    let grid_sup = labeled_difference_sup(path, limit, false)?;
    let allowance = limit.discretization_allowance(path.k() - 1);
    let total = grid_sup + allowance;
    Ok(GhUpperBound { grid_sup, allowance, paper_bound: 2.0 * total, corr_bound: 0.5 * total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_metrics::{limit_sample_space, lp_norm};
    use alloc::vec;

    fn two_point(delta: f64) -> FiniteMetricSpace {
        FiniteMetricSpace::from_lower_rows(&[vec![], vec![delta]]).unwrap()
    }

    #[test]
    fn correspondence_totality() {
        assert!(Correspondence::new(2, 2, vec![(0, 0), (1, 1)]).is_ok());
        assert!(matches!(
            Correspondence::new(2, 2, vec![(0, 0), (1, 0)]),
            Err(Error::NonTotalCorrespondence(_))
        ));
        assert!(Correspondence::new(2, 2, vec![(0, 0), (1, 2)]).is_err());
    }

    #[test]
    fn distortion_examples() {
        let a = two_point(1.5);
        assert_eq!(distortion(&Correspondence::identity(2), &a, &a).unwrap(), 0.0);
        let b = two_point(0.25);
        assert_eq!(distortion(&Correspondence::identity(2), &a, &b).unwrap(), 1.25);
        assert!(distortion(&Correspondence::identity(3), &a, &b).is_err());
    }

    // A: 0–1: 1, 0–2: 2, 1–2: 2.5.  B: 0–1: 1.2, 0–2: 1.9, 1–2: 3.
    // R = {(0,0), (1,1), (2,2), (2,1)}; related pairs and discrepancies:
    // (0,0)-(1,1): |1-1.2| = .2, (0,0)-(2,2): |2-1.9| = .1, (0,0)-(2,1): |2-1.2| = .8,
    // (1,1)-(2,2): |2.5-3| = .5, (1,1)-(2,1): |2.5-0| = 2.5, (2,2)-(2,1): |0-3| = 3.
    #[test]
    fn distortion_three_point_hand_example() {
        let a = FiniteMetricSpace::from_lower_rows(&[vec![], vec![1.0], vec![2.0, 2.5]]).unwrap();
        let b = FiniteMetricSpace::from_lower_rows(&[vec![], vec![1.2], vec![1.9, 3.0]]).unwrap();
        let r = Correspondence::new(3, 3, vec![(0, 0), (1, 1), (2, 2), (2, 1)]).unwrap();
        assert!((distortion(&r, &a, &b).unwrap() - 3.0).abs() < 1e-15);
        let r = Correspondence::identity(3);
        assert!((distortion(&r, &a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_gh_small_cases() {
        let a = FiniteMetricSpace::from_lower_rows(&[vec![], vec![1.0], vec![2.0, 2.5]]).unwrap();
        assert_eq!(gh_exact_small(&a, &a).unwrap(), 0.0);
        let one = FiniteMetricSpace::single_point();
        let delta = 0.37;
        assert!((gh_exact_small(&one, &two_point(delta)).unwrap() - delta / 2.0).abs() < 1e-15);
        assert!((gh_exact_small(&two_point(delta), &one).unwrap() - delta / 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_isometric_example() {
        for &p in &[1.0, 1.5, 2.0, 3.0] {
            for &a in &[0.25, 0.5, 0.9] {
                let f = two_point(lp_norm(&[1.0, 0.0, 0.0], p));
                let h = two_point(lp_norm(&[libm::pow(a, 1.0 / p), libm::pow(1.0 - a, 1.0 / p), 0.0], p));
                let gh = gh_exact_small(&f, &h).unwrap();
                assert!(gh <= 1e-15, "p={p} a={a}: {gh}");
            }
        }
    }

    #[test]
    fn exact_gh_refuses_large_input() {
        let big = FiniteMetricSpace::from_fn(6, |i, j| (i - j) as f64).unwrap();
        assert_eq!(
            gh_exact_small(&big, &big),
            Err(Error::TooLarge { ka: 6, kb: 6, cap: EXACT_GH_CAP })
        );
    }

    #[test]
    fn five_point_cap_is_usable() {
        let a = FiniteMetricSpace::from_fn(5, |i, j| (i - j) as f64).unwrap();
        let b = FiniteMetricSpace::from_fn(5, |i, j| libm::sqrt((i - j) as f64)).unwrap();
        let gh = gh_exact_small(&a, &b).unwrap();
        assert!(gh >= gh_lower_bound_diameter(&a, &b));
        assert!(gh <= 0.5 * distortion(&Correspondence::identity(5), &a, &b).unwrap());
    }

    #[test]
    fn lower_bound_examples() {
        let a = two_point(2.0);
        assert_eq!(gh_lower_bound_diameter(&a, &a), 0.0);
        assert_eq!(gh_lower_bound_diameter(&FiniteMetricSpace::single_point(), &two_point(0.6)), 0.3);
    }

    #[test]
    fn upper_bound_examples() {
        let limit = LimitSpace::new(1.0, 2.0).unwrap();

        let exact = limit_sample_space(8, &limit).unwrap();
        let ub = gh_upper_bound_to_limit(&exact, &limit).unwrap();
        assert!(ub.grid_sup < 1e-15);
        assert!((ub.paper_bound - 2.0 * ub.allowance).abs() < 1e-15);
        assert!((ub.corr_bound - 0.5 * ub.allowance).abs() < 1e-15);

        let zero = FiniteMetricSpace::from_fn(5, |_, _| 0.0).unwrap().with_labels(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let ub = gh_upper_bound_to_limit(&zero, &limit).unwrap();
        assert!((ub.grid_sup - 1.0).abs() < 1e-15);
        assert!((ub.grid_paper_bound() - 2.0).abs() < 1e-15);
        assert!((ub.grid_corr_bound() - 0.5).abs() < 1e-15);

        let path = two_point(0.9).with_labels(vec![0.0, 1.0]).unwrap();
        let ub = gh_upper_bound_to_limit(&path, &limit).unwrap();
        assert!((ub.grid_sup - 0.1).abs() < 1e-15);
        assert!((ub.grid_paper_bound() - 0.2).abs() < 1e-15);
        assert!((ub.grid_corr_bound() - 0.05).abs() < 1e-15);
        assert!((ub.allowance - libm::sqrt(2.0)).abs() < 1e-15);
        assert_eq!(ub.paper_bound, 4.0 * ub.corr_bound);

        assert_eq!(gh_upper_bound_to_limit(&two_point(0.9), &limit), Err(Error::Unlabeled));
    }
}
