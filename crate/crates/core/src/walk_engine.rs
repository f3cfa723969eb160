//! Streaming simulation of `S_j = X_1 + … + X_j` with
//! `X_j = d^{-1/p} (ξ_{j,1}, …, ξ_{j,d})`.
//!
//! The engine never stores the path. It keeps the running coordinate sums in
//! raw `ξ` units (`S_j = d^{-1/p} R_j`), which keeps Rademacher walks exact
//! integers so that returns to zero are detected exactly.
//!
//! For the decomposition `‖S_j‖_p^p = T_j + Q_j` with
//! `Q_j = p Σ_{k≤j} Σ_i X_{k,i} ψ_p(S_{k−1,i})`, `ψ_p(s) = s|s|^{p−2}` and
//! `ψ_p(0) = 0`, every term scales by `d^{-1}` out of raw units, so
//! `Q_j = d^{-1} p Σ ξ ψ_p(R)`. `T_j` is derived as `‖S_j‖_p^p − Q_j`; its
//! monotonicity is then a property of the walk, not of the bookkeeping.

use alloc::vec;
use alloc::vec::Vec;

use crate::analytic_limits::{mp_closed_form, LimitSpace};
use crate::increments::{IncrementLaw, SeedSpec, XiStream};
use crate::numeric::{check_p, AbsPow, NeumaierSum};
use crate::path_metrics::{lp_distance, lp_norm};
use crate::{Error, Result};

/// Default cap on stored reals, `(m + 1) · d`.
pub const DEFAULT_MEM_CAP: u128 = 200_000_000;
/// Default grid resolution is `min(n, DEFAULT_MAX_GRID)`.
pub const DEFAULT_MAX_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub law: IncrementLaw,
    pub seed: SeedSpec,
    /// Number of subintervals of `[0, 1]` in the snapshot grid.
    pub m: usize,
    pub mem_cap: u128,
}

impl WalkConfig {
    pub fn new(n: usize, d: usize, p: f64, law: IncrementLaw, seed: SeedSpec) -> Self {
        Self { n, d, p, law, seed, m: n.clamp(1, DEFAULT_MAX_GRID), mem_cap: DEFAULT_MEM_CAP }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_mem_cap(mut self, cap: u128) -> Self {
        self.mem_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d must be >= 1"));
        }
        check_p(self.p)?;
        self.law.validate()?;
        if self.m == 0 || self.m > self.n {
            return Err(Error::invalid(alloc::format!(
                "grid size must satisfy 1 <= m <= n, got m={} n={}",
                self.m,
                self.n
            )));
        }
        let requested = (self.m as u128 + 1) * self.d as u128;
        if requested > self.mem_cap {
            return Err(Error::ResourceLimit { requested, cap: self.mem_cap });
        }
        Ok(())
    }

    /// Walk index `⌊n i / m⌋` recorded at grid time `i / m`.
    pub fn grid_step(&self, i: usize) -> usize {
        ((self.n as u128 * i as u128) / self.m as u128) as usize
    }

    /// `d^{-1/p}`.
    pub fn increment_scale(&self) -> f64 {
        libm::pow(self.d as f64, -1.0 / self.p)
    }

    pub fn sigma(&self) -> f64 {
        self.law.sigma()
    }

    pub fn limit_space(&self) -> Result<LimitSpace> {
        LimitSpace::new(self.sigma(), self.p)
    }
}

/// Normalized positions `n^{-1/2} S_{⌊n t_i⌋}` at `t_i = i/m`, `i = 0..=m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSnapshot {
    config: Option<WalkConfig>,
    p: f64,
    m_p: f64,
    m: usize,
    d: usize,
    times: Vec<f64>,
    points: Vec<f64>,
}

impl GridSnapshot {
    /// Snapshot from explicit points, one per grid time. Point 0 must be the
    /// origin.
    pub fn synthetic(p: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        check_p(p)?;
        if points.len() < 2 {
            return Err(Error::invalid("a snapshot needs at least the points at t=0 and t=1"));
        }
        let d = points[0].len();
        if d == 0 || points.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("snapshot points must share a positive dimension"));
        }
        if points[0].iter().any(|&x| x != 0.0) {
            return Err(Error::invalid("snapshot point at t=0 must be the origin"));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("snapshot points must be finite"));
        }
        let m = points.len() - 1;
        Ok(Self {
            config: None,
            p,
            m_p: mp_closed_form(p)?,
            m,
            d,
            times: grid_times(m),
            points: points.into_iter().flatten().collect(),
        })
    }

    pub fn config(&self) -> Option<&WalkConfig> {
        self.config.as_ref()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.d)
    }

    /// The same snapshot with the coordinates of every point permuted by
    /// `perm` (new coordinate `k` is old coordinate `perm[k]`).
    pub fn permute_coordinates(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.d];
        if perm.len() != self.d || perm.iter().any(|&k| k >= self.d || core::mem::replace(&mut seen[k], true)) {
            return Err(Error::invalid("not a permutation of the coordinates"));
        }
        let mut out = self.clone();
        for (dst, src) in out.points.chunks_exact_mut(self.d).zip(self.points.chunks_exact(self.d)) {
            for (k, &from) in perm.iter().enumerate() {
                dst[k] = src[from];
            }
        }
        Ok(out)
    }
}

fn grid_times(m: usize) -> Vec<f64> {
    (0..=m).map(|i| i as f64 / m as f64).collect()
}

pub fn simulate_grid(config: &WalkConfig) -> Result<GridSnapshot> {
    config.validate()?;
    let (n, d, m) = (config.n, config.d, config.m);
    let scale = config.increment_scale() / libm::sqrt(n as f64);

    let mut stream = XiStream::new(config.law, config.seed);
    let mut raw = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut points = Vec::with_capacity((m + 1) * d);
    points.resize(d, 0.0);

    let mut next = 1;
    let mut next_step = config.grid_step(1);
    for j in 1..=n {
        stream.fill(&mut xi);
        raw.iter_mut().zip(&xi).for_each(|(r, x)| *r += x);
        if j == next_step {
            points.extend(raw.iter().map(|r| r * scale));
            next += 1;
            if next <= m {
                next_step = config.grid_step(next);
            }
        }
    }
    debug_assert_eq!(points.len(), (m + 1) * d);

    Ok(GridSnapshot {
        config: Some(*config),
        p: config.p,
        m_p: mp_closed_form(config.p)?,
        m,
        d,
        times: grid_times(m),
        points,
    })
}

/// `T_j`, `Q_j` and `‖S_j‖_p^p` for `j = 0..=n` along one walk.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTrace {
    pub p: f64,
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub norm_pp: Vec<f64>,
}

impl DecompositionTrace {
    pub fn n(&self) -> usize {
        self.t.len() - 1
    }

    pub fn final_norm_pp(&self) -> f64 {
        self.norm_pp[self.n()]
    }

    pub fn final_t(&self) -> f64 {
        self.t[self.n()]
    }

    pub fn final_q(&self) -> f64 {
        self.q[self.n()]
    }

    /// `max_j |T_j + Q_j − ‖S_j‖_p^p| / max_j ‖S_j‖_p^p`.
    pub fn identity_residual(&self) -> f64 {
        let scale = self.norm_pp.iter().fold(0.0f64, |a, &b| a.max(b));
        let worst = self
            .t
            .iter()
            .zip(&self.q)
            .zip(&self.norm_pp)
            .map(|((t, q), s)| (t + q - s).abs())
            .fold(0.0f64, f64::max);
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Steps with `T_j − T_{j−1} < −rel_tol · |T_j|`.
    pub fn monotonicity_violations(&self, rel_tol: f64) -> usize {
        self.t.windows(2).filter(|w| w[1] - w[0] < -rel_tol * w[1].abs()).count()
    }

    /// `max_{j ≤ n} |Q_j|`.
    pub fn max_abs_q(&self) -> f64 {
        self.q.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    /// `(j, T_j, Q_j)` at the grid steps `⌊n i / m⌋`, `i = 0..=m`.
    pub fn thinned(&self, m: usize) -> Vec<(usize, f64, f64)> {
        let n = self.n();
        (0..=m)
            .map(|i| {
                let j = ((n as u128 * i as u128) / m.max(1) as u128) as usize;
                (j, self.t[j], self.q[j])
            })
            .collect()
    }
}

pub fn simulate_decomposition(config: &WalkConfig) -> Result<DecompositionTrace> {
    config.validate()?;
    let (n, d, p) = (config.n, config.d, config.p);
    let pow = AbsPow::new(p);
    let to_real = 1.0 / d as f64;

    let mut stream = XiStream::new(config.law, config.seed);
    let mut raw = vec![0.0; d];
    // |R_i|^p, cached from the previous step.
    let mut raw_pow = vec![0.0; d];
    let mut xi = vec![0.0; d];

    let mut t = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    let mut norm_pp = Vec::with_capacity(n + 1);
    t.push(0.0);
    q.push(0.0);
    norm_pp.push(0.0);

    let mut q_raw = NeumaierSum::new();
    for _ in 0..n {
        stream.fill(&mut xi);
        let mut dq = NeumaierSum::new();
        let mut norm = NeumaierSum::new();
        for ((r, a), &x) in raw.iter_mut().zip(raw_pow.iter_mut()).zip(&xi) {
            // ψ_p(R) = |R|^p / R, with ψ_p(0) = 0
            if *r != 0.0 {
                dq.add(x * (*a / *r));
            }
            *r += x;
            *a = pow.eval(*r);
            norm.add(*a);
        }
        q_raw.add(p * dq.value());
        let s = norm.value() * to_real;
        let qj = q_raw.value() * to_real;
        norm_pp.push(s);
        q.push(qj);
        t.push(s - qj);
    }

    Ok(DecompositionTrace { p, t, q, norm_pp })
}

/// `|‖point_i‖_p^p − t_i^{p/2} σ^p M_p|` for every grid time.
pub fn pointwise_norm_statistic(snapshot: &GridSnapshot, sigma: f64) -> Vec<f64> {
    let p = snapshot.p;
    let limit = libm::pow(sigma, p) * snapshot.m_p;
    snapshot
        .points()
        .zip(&snapshot.times)
        .map(|(v, &t)| (libm::pow(lp_norm(v, p), p) - libm::pow(t, 0.5 * p) * limit).abs())
        .collect()
}

/// Grid sup of the pointwise statistic; inside each cell `[t_i, t_{i+1})` the
/// walk term is held at its left value and the deterministic term is
/// evaluated at both cell ends.
pub fn sup_norm_statistic(snapshot: &GridSnapshot, sigma: f64) -> f64 {
    let p = snapshot.p;
    let limit = libm::pow(sigma, p) * snapshot.m_p;
    let det: Vec<f64> = snapshot.times.iter().map(|&t| libm::pow(t, 0.5 * p) * limit).collect();
    let mut best = 0.0f64;
    for (i, v) in snapshot.points().enumerate() {
        let walk = libm::pow(lp_norm(v, p), p);
        best = best.max((walk - det[i]).abs());
        if i < snapshot.m {
            best = best.max((walk - det[i + 1]).abs());
        }
    }
    best
}

/// `max_{i ≤ j} |‖point_j − point_i‖_p − r(t_j, t_i)|` with the limit metric
/// also evaluated at the cell corners `(t_{j+1}, t_i)` and `(t_j, t_{i+1})`
/// (clipped to 1). Costs `O(m² d)`.
pub fn sup_difference_statistic(snapshot: &GridSnapshot, space: &LimitSpace) -> Result<f64> {
    difference_sup(snapshot, space, true)
}

/// Like [`sup_difference_statistic`] but only at matching grid times, with no
/// corner evaluation.
pub fn grid_difference_statistic(snapshot: &GridSnapshot, space: &LimitSpace) -> Result<f64> {
    difference_sup(snapshot, space, false)
}

fn difference_sup(snapshot: &GridSnapshot, space: &LimitSpace, corners: bool) -> Result<f64> {
    if space.p() != snapshot.p {
        return Err(Error::invalid(alloc::format!(
            "limit space has p={} but the snapshot has p={}",
            space.p(),
            snapshot.p
        )));
    }
    let m = snapshot.m;
    let times = &snapshot.times;
    let next = |i: usize| times[(i + 1).min(m)];
    let mut best = 0.0f64;
    for j in 0..=m {
        let pj = snapshot.point(j);
        for i in 0..=j {
            let dist = if i == j { 0.0 } else { lp_distance(pj, snapshot.point(i), snapshot.p) };
            best = best.max((dist - space.distance_unchecked(times[j], times[i])).abs());
            if corners {
                best = best.max((dist - space.distance_unchecked(next(j), times[i])).abs());
                best = best.max((dist - space.distance_unchecked(times[j], next(i))).abs());
            }
        }
    }
    Ok(best)
}
