//! Replicated Monte Carlo experiments.
//!
//! Every replicate owns one counter-based stream `SeedSpec(master_seed, id)`
//! with an id fixed by its position in the plan, so results do not depend on
//! how work is spread over threads. Workers only compute; rows are merged in
//! plan order on the calling thread.

use std::fmt;
use std::str::FromStr;

use lpwalk_core::gh_metrics::GhUpperBound;
use lpwalk_core::walk_engine::DEFAULT_MEM_CAP;
use lpwalk_core::{
    bivariate_gaussian_abs_moment, gh_upper_bound_to_limit, mp_closed_form, path_metric_space,
    pointwise_norm_statistic, simulate_decomposition, simulate_grid, sup_difference_statistic,
    sup_norm_statistic, CovarianceMatrix2, IncrementLaw, NeumaierSum, SeedSpec, WalkConfig, XiStream,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{Cell, ConfigEcho, Table};
use crate::{Error, Result};

pub const REPORT_HEADER: [&str; 9] = ["law", "p", "n", "d", "m", "replicate", "seed", "statistic", "value"];
pub const AGGREGATE_HEADER: [&str; 10] =
    ["law", "p", "n", "d", "m", "statistic", "median", "mean", "stderr", "allowance"];

/// Relative tolerance for a decrease of `T_j` to count as a violation.
pub const T_MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// `|‖S_n/√n‖_p^p − σ^p M_p|`.
    PointwiseT1,
    SupNorm,
    SupDifference,
    /// `2 D` with `D` the labeled grid sup.
    GhPaperBound,
    /// `D / 2`.
    GhCorrBound,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::PointwiseT1,
        Statistic::SupNorm,
        Statistic::SupDifference,
        Statistic::GhPaperBound,
        Statistic::GhCorrBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::PointwiseT1 => "pointwise_t1",
            Statistic::SupNorm => "sup_norm",
            Statistic::SupDifference => "sup_difference",
            Statistic::GhPaperBound => "gh_paper_bound",
            Statistic::GhCorrBound => "gh_corr_bound",
        }
    }

    /// Additive term that turns the grid value into a bound on its continuum
    /// counterpart; 0 where no such term is tracked.
    pub fn allowance(self, a: f64) -> f64 {
        match self {
            Statistic::PointwiseT1 | Statistic::SupNorm => 0.0,
            Statistic::SupDifference => a,
            Statistic::GhPaperBound => 2.0 * a,
            Statistic::GhCorrBound => 0.5 * a,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown statistic `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanPoint {
    pub n: usize,
    pub d: usize,
}

impl FromStr for PlanPoint {
    type Err = Error;

    /// `NxD`, e.g. `400x400`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sweep point `{s}` is not of the form NxD"));
        let (n, d) = s.trim().split_once('x').ok_or_else(bad)?;
        Ok(PlanPoint { n: n.parse().map_err(|_| bad())?, d: d.parse().map_err(|_| bad())? })
    }
}

impl fmt::Display for PlanPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n, self.d)
    }
}

mod law_string {
    use super::IncrementLaw;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(law: &IncrementLaw, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(law)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<IncrementLaw, D::Error> {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

fn all_statistics() -> Vec<Statistic> {
    Statistic::ALL.to_vec()
}

/// A convergence sweep. As JSON:
///
/// ```json
/// {"points": [{"n": 100, "d": 100}, {"n": 400, "d": 400}],
///  "p": [1.0, 2.0], "law": "rademacher", "replicates": 100,
///  "master_seed": 7, "m": null, "statistics": ["sup_difference"]}
/// ```
///
/// `m` may be omitted or null for `min(n, 512)` at each point; `statistics`
/// may be omitted for all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub points: Vec<PlanPoint>,
    pub p: Vec<f64>,
    #[serde(with = "law_string")]
    pub law: IncrementLaw,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "all_statistics")]
    pub statistics: Vec<Statistic>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.points.is_empty() {
            return bad("the sweep needs at least one (n, d) point".into());
        }
        if self.p.is_empty() {
            return bad("the sweep needs at least one p".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.statistics.is_empty() {
            return bad("select at least one statistic".into());
        }
        for (i, s) in self.statistics.iter().enumerate() {
            if self.statistics[..i].contains(s) {
                return bad(format!("statistic {s} selected twice"));
            }
        }
        for &p in &self.p {
            if !(p.is_finite() && p >= 1.0) {
                return bad(format!("p must be finite and >= 1, got {p}"));
            }
        }
        self.law.validate()?;
        for pt in &self.points {
            if pt.n == 0 || pt.d == 0 {
                return bad(format!("sweep point {pt} must have n >= 1 and d >= 1"));
            }
            if let Some(m) = self.m {
                if m == 0 || m > pt.n {
                    return bad(format!("grid size must satisfy 1 <= m <= n, got m={m} at point {pt}"));
                }
            }
        }
        if self.points.windows(2).any(|w| w[1].d < w[0].d) {
            return bad("d must be nondecreasing along the sweep points".into());
        }
        Ok(())
    }

    pub fn m_at(&self, pt: PlanPoint) -> usize {
        self.m.unwrap_or_else(|| WalkConfig::new(pt.n, pt.d, 2.0, self.law, SeedSpec::new(0, 0)).m)
    }

    /// Stream id of replicate `r` at `(p_idx, point_idx)`.
    pub fn stream_id(&self, p_idx: usize, point_idx: usize, r: usize) -> u64 {
        ((p_idx * self.points.len() + point_idx) * self.replicates + r) as u64
    }

    pub fn echo(&self, cfg: &mut ConfigEcho) {
        cfg.set("law", self.law.to_string());
        cfg.set("p", join(&self.p, |p| crate::report::fmt_real(*p)));
        cfg.set("points", join(&self.points, PlanPoint::to_string));
        cfg.set("replicates", self.replicates);
        cfg.set("master_seed", self.master_seed);
        cfg.set("m", self.m.map_or_else(|| "min(n,512)".to_string(), |m| m.to_string()));
        cfg.set("statistics", join(&self.statistics, Statistic::to_string));
        if self.points.iter().all(|pt| pt.n == pt.d) {
            cfg.set("schedule", "diagonal d=n");
        }
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

/// How to run, as opposed to what to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Execution {
    pub threads: usize,
    pub mem_cap: u128,
}

impl Default for Execution {
    fn default() -> Self {
        Self { threads: 1, mem_cap: DEFAULT_MEM_CAP }
    }
}

impl Execution {
    pub fn with_threads(threads: usize) -> Self {
        Self { threads, ..Self::default() }
    }

    /// Runs `f(0..count)` on a pool of `threads` workers, results in index
    /// order.
    fn map<T: Send>(&self, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.threads == 1 {
            return Ok((0..count).map(f).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", self.threads)))?;
        Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueRow {
    pub law: IncrementLaw,
    pub p: f64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub replicate: usize,
    pub seed: u64,
    pub statistic: Statistic,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub law: IncrementLaw,
    pub p: f64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub statistic: Statistic,
    pub median: f64,
    pub mean: f64,
    pub stderr: f64,
    pub allowance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub plan: SweepPlan,
    pub rows: Vec<ValueRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ConvergenceReport {
    pub fn values_table(&self) -> Table {
        let mut t = Table::new(&REPORT_HEADER);
        for r in &self.rows {
            t.push(vec![
                r.law.to_string().into(),
                r.p.into(),
                r.n.into(),
                r.d.into(),
                r.m.into(),
                r.replicate.into(),
                r.seed.into(),
                r.statistic.name().into(),
                r.value.into(),
            ]);
        }
        t
    }

    pub fn aggregates_table(&self) -> Table {
        let mut t = Table::new(&AGGREGATE_HEADER);
        for a in &self.aggregates {
            t.push(vec![
                a.law.to_string().into(),
                a.p.into(),
                a.n.into(),
                a.d.into(),
                a.m.into(),
                a.statistic.name().into(),
                a.median.into(),
                a.mean.into(),
                a.stderr.into(),
                a.allowance.into(),
            ]);
        }
        t
    }

    /// Replicate values of `statistic` at `(p, point)`, in replicate order.
    pub fn values(&self, p: f64, pt: PlanPoint, statistic: Statistic) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.p == p && r.n == pt.n && r.d == pt.d && r.statistic == statistic)
            .map(|r| r.value)
            .collect()
    }

    pub fn aggregate(&self, p: f64, pt: PlanPoint, statistic: Statistic) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.p == p && a.n == pt.n && a.d == pt.d && a.statistic == statistic)
    }
}

/// Median, mean and standard error of the mean (0 for a single value).
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len();
    assert!(n > 0, "summary of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let mean = values.iter().copied().collect::<NeumaierSum>().value() / n as f64;
    let stderr = if n > 1 {
        let ss: NeumaierSum = values.iter().map(|x| (x - mean) * (x - mean)).collect();
        (ss.value() / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    (median, mean, stderr)
}

fn replicate_values(cfg: &WalkConfig, statistics: &[Statistic]) -> lpwalk_core::Result<Vec<f64>> {
    let snap = simulate_grid(cfg)?;
    let space = cfg.limit_space()?;
    let sigma = cfg.sigma();
    let mut gh: Option<GhUpperBound> = None;
    let mut gh_bound = |snap: &lpwalk_core::GridSnapshot| -> lpwalk_core::Result<GhUpperBound> {
        if gh.is_none() {
            gh = Some(gh_upper_bound_to_limit(&path_metric_space(snap), &space)?);
        }
        Ok(gh.unwrap())
    };
    statistics
        .iter()
        .map(|s| {
            Ok(match s {
                Statistic::PointwiseT1 => *pointwise_norm_statistic(&snap, sigma).last().unwrap(),
                Statistic::SupNorm => sup_norm_statistic(&snap, sigma),
                Statistic::SupDifference => sup_difference_statistic(&snap, &space)?,
                Statistic::GhPaperBound => gh_bound(&snap)?.grid_paper_bound(),
                Statistic::GhCorrBound => gh_bound(&snap)?.grid_corr_bound(),
            })
        })
        .collect()
}

pub fn run_convergence_sweep(plan: &SweepPlan, exec: &Execution) -> Result<ConvergenceReport> {
    plan.validate()?;
    let (np, nr) = (plan.points.len(), plan.replicates);
    let config = |p_idx: usize, k: usize, r: usize| {
        let pt = plan.points[k];
        let seed = SeedSpec::new(plan.master_seed, plan.stream_id(p_idx, k, r));
        WalkConfig::new(pt.n, pt.d, plan.p[p_idx], plan.law, seed).with_m(plan.m_at(pt)).with_mem_cap(exec.mem_cap)
    };
    // Refuse up front rather than after part of the sweep has run.
    for p_idx in 0..plan.p.len() {
        for (k, pt) in plan.points.iter().enumerate() {
            config(p_idx, k, 0).validate().map_err(|source| Error::AtPoint { n: pt.n, d: pt.d, source })?;
        }
    }

    let tasks = plan.p.len() * np * nr;
    let results = exec.map(tasks, |task| {
        let (p_idx, k, r) = (task / (np * nr), task / nr % np, task % nr);
        replicate_values(&config(p_idx, k, r), &plan.statistics)
    })?;

    let mut rows = Vec::with_capacity(tasks * plan.statistics.len());
    let mut aggregates = Vec::new();
    for p_idx in 0..plan.p.len() {
        let p = plan.p[p_idx];
        let a = lpwalk_core::LimitSpace::new(plan.law.sigma(), p)?;
        for (k, pt) in plan.points.iter().enumerate() {
            let m = plan.m_at(*pt);
            let block = &results[(p_idx * np + k) * nr..][..nr];
            let mut columns = vec![Vec::with_capacity(nr); plan.statistics.len()];
            for (r, res) in block.iter().enumerate() {
                let values = res.as_ref().map_err(|e| Error::AtPoint { n: pt.n, d: pt.d, source: e.clone() })?;
                for (s, (&statistic, &value)) in plan.statistics.iter().zip(values).enumerate() {
                    columns[s].push(value);
                    rows.push(ValueRow {
                        law: plan.law,
                        p,
                        n: pt.n,
                        d: pt.d,
                        m,
                        replicate: r,
                        seed: plan.stream_id(p_idx, k, r),
                        statistic,
                        value,
                    });
                }
            }
            for (&statistic, column) in plan.statistics.iter().zip(&columns) {
                let (median, mean, stderr) = summarize(column);
                aggregates.push(AggregateRow {
                    law: plan.law,
                    p,
                    n: pt.n,
                    d: pt.d,
                    m,
                    statistic,
                    median,
                    mean,
                    stderr,
                    allowance: statistic.allowance(a.discretization_allowance(m)),
                });
            }
        }
    }
    Ok(ConvergenceReport { plan: plan.clone(), rows, aggregates })
}

/// One-sided sign test of "`after` tends to be smaller than `before`" on
/// paired samples. Returns `(decreases, pairs, p-value)` with the p-value
/// `P(Bin(pairs, ½) ≥ decreases)`; ties count against the alternative.
pub fn sign_test_decrease(before: &[f64], after: &[f64]) -> (usize, usize, f64) {
    assert_eq!(before.len(), after.len(), "sign test needs paired samples");
    let n = before.len();
    let k = before.iter().zip(after).filter(|(b, a)| a < b).count();
    (k, n, binomial_upper_tail(n, k))
}

/// `P(Bin(n, ½) ≥ k)`. Weights are built outward from the mode by their
/// ratios and normalized by their total.
pub fn binomial_upper_tail(n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let mode = n / 2;
    let mut w = vec![0.0f64; n + 1];
    w[mode] = 1.0;
    for j in mode + 1..=n {
        w[j] = w[j - 1] * (n - j + 1) as f64 / j as f64;
    }
    for j in (0..mode).rev() {
        w[j] = w[j + 1] * (j + 1) as f64 / (n - j) as f64;
    }
    let total: NeumaierSum = w.iter().copied().collect();
    let tail: NeumaierSum = w[k..].iter().copied().collect();
    (tail.value() / total.value()).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub n: usize,
    pub replicates: usize,
    pub mean: f64,
    pub stderr: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub law: IncrementLaw,
    pub p: f64,
    /// Correlation of the pair for bivariate tables.
    pub rho: Option<f64>,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn table(&self) -> Table {
        let mut t = match self.rho {
            None => Table::new(&["law", "p", "n", "replicates", "mean", "stderr", "limit"]),
            Some(_) => Table::new(&["law", "p", "rho", "n", "replicates", "mean", "stderr", "limit"]),
        };
        for r in &self.rows {
            let mut row: Vec<Cell> = vec![self.law.to_string().into(), self.p.into()];
            if let Some(rho) = self.rho {
                row.push(rho.into());
            }
            row.extend([r.n.into(), r.replicates.into(), r.mean.into(), r.stderr.into(), r.limit.into()]);
            t.push(row);
        }
        t
    }
}

fn check_moment_args(law: &IncrementLaw, p: f64, n_list: &[usize], replicates: usize) -> Result<()> {
    law.validate()?;
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Config(format!("p must be finite and > 0, got {p}")));
    }
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::Config("n list must be nonempty with every n >= 1".into()));
    }
    if replicates < 100 {
        return Err(Error::Config(format!("moment tables need replicates >= 100, got {replicates}")));
    }
    Ok(())
}

/// `E|S_n / (σ√n)|^p` over one-dimensional walks, against `M_p`.
pub fn run_moment_convergence(
    law: IncrementLaw,
    p: f64,
    n_list: &[usize],
    replicates: usize,
    master_seed: u64,
    exec: &Execution,
) -> Result<MomentTable> {
    check_moment_args(&law, p, n_list, replicates)?;
    let limit = mp_closed_form(p)?;
    let sigma = law.sigma();
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let scale = 1.0 / (sigma * (n as f64).sqrt());
        let values = exec.map(replicates, |r| {
            let mut xi = XiStream::new(law, SeedSpec::new(master_seed, (i * replicates + r) as u64));
            (xi.sum(n) * scale).abs().powf(p)
        })?;
        let (_, mean, stderr) = summarize(&values);
        rows.push(MomentRow { n, replicates, mean, stderr, limit });
    }
    Ok(MomentTable { law, p, rho: None, rows })
}

/// `E|S_n/(σ√n)|^p |Z_n/(σ√n)|^p` for the pair `(X, ρX + √(1−ρ²)X′)` with
/// `X, X′` i.i.d. from `law`, against the Gaussian limit `E|η₁η₂|^p`.
pub fn run_bivariate_moment_convergence(
    law: IncrementLaw,
    rho: f64,
    p: f64,
    n_list: &[usize],
    replicates: usize,
    master_seed: u64,
    exec: &Execution,
) -> Result<MomentTable> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("correlation must satisfy |rho| <= 1, got {rho}")));
    }
    check_moment_args(&law, p, n_list, replicates)?;
    let limit = bivariate_gaussian_abs_moment(p, &CovarianceMatrix2::correlation(rho)?)?;
    let sigma = law.sigma();
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut rows = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        let scale = 1.0 / (sigma * (n as f64).sqrt());
        let values = exec.map(replicates, |r| {
            let id = 2 * (i * replicates + r) as u64;
            let s = XiStream::new(law, SeedSpec::new(master_seed, id)).sum(n);
            let s2 = XiStream::new(law, SeedSpec::new(master_seed, id + 1)).sum(n);
            // Z_n = Σ (ρ X_k + √(1−ρ²) X′_k) = ρ S_n + √(1−ρ²) S′_n
            let z = rho * s + rho_c * s2;
            ((s * scale) * (z * scale)).abs().powf(p)
        })?;
        let (_, mean, stderr) = summarize(&values);
        rows.push(MomentRow { n, replicates, mean, stderr, limit });
    }
    Ok(MomentTable { law, p, rho: Some(rho), rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoobRow {
    pub epsilon: f64,
    /// Fraction of replicates with `max_{j ≤ n} |Q_j| ≥ n^{p/2} ε`.
    pub frequency: f64,
    /// `n^{-p} ε^{-2} (mean Q_n² + 4 SE)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDiagnostics {
    pub config: WalkConfig,
    pub replicates: usize,
    /// Fraction of replicates with at least one `T` decrease beyond
    /// [`T_MONOTONE_TOL`].
    pub violation_fraction: f64,
    pub max_residual: f64,
    pub mean_q: f64,
    pub se_q: f64,
    pub mean_q2: f64,
    pub se_q2: f64,
    /// `E Q_n²` in closed form, for Rademacher laws.
    pub exact_q2: Option<f64>,
    pub doob: Vec<DoobRow>,
    /// `(j, corr(Q_j, Q_n − Q_j))` across replicates; martingale increments
    /// are orthogonal so these sit near 0 within about `1/√R`.
    pub increment_correlations: Vec<(usize, f64)>,
}

pub const DOOB_EPSILONS: [f64; 2] = [0.5, 1.0];
const PROBES: usize = 5;

struct TraceSummary {
    violated: bool,
    residual: f64,
    q_n: f64,
    max_abs_q: f64,
    probes: [f64; PROBES],
}

pub fn run_martingale_check(config: &WalkConfig, replicates: usize, exec: &Execution) -> Result<MartingaleDiagnostics> {
    if replicates < 500 {
        return Err(Error::Config(format!("martingale check needs replicates >= 500, got {replicates}")));
    }
    config.validate()?;
    let n = config.n;
    let probe_steps: Vec<usize> = (1..=PROBES).map(|i| n * i / (PROBES + 1)).collect();
    let summaries = exec.map(replicates, |r| {
        let cfg = WalkConfig { seed: SeedSpec::new(config.seed.master_seed, r as u64), ..*config };
        let trace = simulate_decomposition(&cfg)?;
        let mut probes = [0.0; PROBES];
        for (slot, &j) in probes.iter_mut().zip(&probe_steps) {
            *slot = trace.q[j];
        }
        Ok::<_, lpwalk_core::Error>(TraceSummary {
            violated: trace.monotonicity_violations(T_MONOTONE_TOL) > 0,
            residual: trace.identity_residual(),
            q_n: trace.final_q(),
            max_abs_q: trace.max_abs_q(),
            probes,
        })
    })?
    .into_iter()
    .collect::<lpwalk_core::Result<Vec<_>>>()?;

    let rf = replicates as f64;
    let violation_fraction = summaries.iter().filter(|s| s.violated).count() as f64 / rf;
    let max_residual = summaries.iter().fold(0.0f64, |a, s| a.max(s.residual));
    let q: Vec<f64> = summaries.iter().map(|s| s.q_n).collect();
    let q2: Vec<f64> = q.iter().map(|x| x * x).collect();
    let (_, mean_q, se_q) = summarize(&q);
    let (_, mean_q2, se_q2) = summarize(&q2);
    let p = config.p;
    let doob = DOOB_EPSILONS
        .iter()
        .map(|&epsilon| {
            let level = (n as f64).powf(0.5 * p) * epsilon;
            let hits = summaries.iter().filter(|s| s.max_abs_q >= level).count();
            let bound = (n as f64).powf(-p) / (epsilon * epsilon) * (mean_q2 + 4.0 * se_q2);
            DoobRow { epsilon, frequency: hits as f64 / rf, bound }
        })
        .collect();
    let increment_correlations = probe_steps
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let head: Vec<f64> = summaries.iter().map(|s| s.probes[k]).collect();
            let tail: Vec<f64> = summaries.iter().map(|s| s.q_n - s.probes[k]).collect();
            (j, correlation(&head, &tail))
        })
        .collect();
    let exact_q2 = match config.law {
        IncrementLaw::Rademacher => Some(rademacher_q2_exact(n, config.d, p, 1.0)),
        IncrementLaw::ScaledRademacher(c) => Some(rademacher_q2_exact(n, config.d, p, c)),
        _ => None,
    };
    Ok(MartingaleDiagnostics {
        config: *config,
        replicates,
        violation_fraction,
        max_residual,
        mean_q,
        se_q,
        mean_q2,
        se_q2,
        exact_q2,
        doob,
        increment_correlations,
    })
}

impl MartingaleDiagnostics {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["quantity", "value"]);
        let mut put = |k: String, v: f64| t.push(vec![k.into(), v.into()]);
        put("violation_fraction".into(), self.violation_fraction);
        put("max_residual".into(), self.max_residual);
        put("mean_q_n".into(), self.mean_q);
        put("se_q_n".into(), self.se_q);
        put("mean_q_n_sq".into(), self.mean_q2);
        put("se_q_n_sq".into(), self.se_q2);
        if let Some(x) = self.exact_q2 {
            put("exact_q_n_sq".into(), x);
        }
        for row in &self.doob {
            let eps = crate::report::fmt_real(row.epsilon);
            put(format!("doob_frequency_eps={eps}"), row.frequency);
            put(format!("doob_bound_eps={eps}"), row.bound);
        }
        for &(j, c) in &self.increment_correlations {
            put(format!("increment_correlation_j={j}"), c);
        }
        t
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (_, ma, _) = summarize(a);
    let (_, mb, _) = summarize(b);
    let mut sab = NeumaierSum::new();
    let mut saa = NeumaierSum::new();
    let mut sbb = NeumaierSum::new();
    for (x, y) in a.iter().zip(b) {
        sab.add((x - ma) * (y - mb));
        saa.add((x - ma) * (x - ma));
        sbb.add((y - mb) * (y - mb));
    }
    let den = (saa.value() * sbb.value()).sqrt();
    if den > 0.0 {
        sab.value() / den
    } else {
        0.0
    }
}

/// Exact `E Q_n²` for `c`-scaled Rademacher increments:
/// `p² c^{2p} / d · Σ_{k<n} E[|R_k|^{2p−2}; R_k ≠ 0]` with `R_k` a sum of `k`
/// signs, by enumerating the binomial law of `R_k`. Costs `O(n²)`.
pub fn rademacher_q2_exact(n: usize, d: usize, p: f64, c: f64) -> f64 {
    let mut pmf = vec![1.0f64];
    let mut total = NeumaierSum::new();
    for k in 0..n {
        // pmf[j] = P(R_k = 2j − k)
        let mut e = NeumaierSum::new();
        for (j, &w) in pmf.iter().enumerate() {
            let r = (2 * j) as f64 - k as f64;
            if r != 0.0 {
                e.add(w * r.abs().powf(2.0 * p - 2.0));
            }
        }
        total.add(e.value());
        let mut next = vec![0.0; k + 2];
        for (j, &w) in pmf.iter().enumerate() {
            next[j] += 0.5 * w;
            next[j + 1] += 0.5 * w;
        }
        pmf = next;
    }
    p * p * c.abs().powf(2.0 * p) / d as f64 * total.value()
}
