//! Acceptance checks, one `[PASS]`/`[FAIL]` line each. Exits nonzero if any
//! check fails.

use std::process::Command;
use std::time::Instant;

use lpwalk::experiments::{
    run_bivariate_moment_convergence, run_convergence_sweep, run_martingale_check, run_moment_convergence,
    sign_test_decrease, Execution, PlanPoint, Statistic, SweepPlan, T_MONOTONE_TOL,
};
use lpwalk::report::split_body;
use lpwalk_core::{
    bivariate_gaussian_abs_moment, bivariate_moment_mc_oracle, distortion, gh_exact_small, gh_lower_bound_diameter,
    lp_norm, mp_closed_form, sample_xi_block, simulate_decomposition, Correspondence, CovarianceMatrix2,
    FiniteMetricSpace, IncrementLaw, NeumaierSum, SeedSpec, WalkConfig, XiStream,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mp_values() -> Check {
    let cases = [(2.0, 1.0), (1.0, (2.0 / std::f64::consts::PI).sqrt()), (4.0, 3.0)];
    let mut worst = 0.0f64;
    for (p, want) in cases {
        let got = mp_closed_form(p).map_err(|e| e.to_string())?;
        worst = worst.max(((got - want) / want).abs());
    }
    ensure(worst <= 1e-12, format!("max relative error {worst:.2e} over p = 2, 1, 4"))
}

fn univariate_moment() -> Check {
    let t = run_moment_convergence(IncrementLaw::Rademacher, 1.0, &[10_000], 100_000, 101, &Execution::default())
        .map_err(|e| e.to_string())?;
    let r = &t.rows[0];
    let want = (2.0 / std::f64::consts::PI).sqrt();
    let tol = (4.0 * r.stderr).max(0.01);
    ensure(
        (r.mean - want).abs() <= tol,
        format!("mean {:.6} vs sqrt(2/pi) {want:.6}, |diff| {:.2e} <= {tol:.2e}", r.mean, (r.mean - want).abs()),
    )
}

fn bivariate_moment() -> Check {
    let t = run_bivariate_moment_convergence(
        IncrementLaw::Rademacher,
        0.5,
        2.0,
        &[10_000],
        100_000,
        202,
        &Execution::default(),
    )
    .map_err(|e| e.to_string())?;
    let r = &t.rows[0];
    let tol = (4.0 * r.stderr).max(0.02);
    let mc_ok = (r.mean - 1.5).abs() <= tol;
    let mut worst_z = 0.0f64;
    for p in [1.0, 1.5, 2.0, 3.0] {
        for rho in [-0.9, 0.0, 0.5, 0.9] {
            let cov = CovarianceMatrix2::correlation(rho).map_err(|e| e.to_string())?;
            let quad = bivariate_gaussian_abs_moment(p, &cov).map_err(|e| e.to_string())?;
            let (mean, se) = bivariate_moment_mc_oracle(p, &cov, 200_000, 303).map_err(|e| e.to_string())?;
            worst_z = worst_z.max((quad - mean).abs() / se);
        }
    }
    ensure(
        mc_ok && worst_z <= 4.0,
        format!(
            "walk pair mean {:.5} vs 1.5 within {tol:.3e}: {mc_ok}; quadrature vs MC worst |z| {worst_z:.2} on 16 (p, rho)",
            r.mean
        ),
    )
}

fn decomposition_invariants() -> Check {
    let mut violations = 0usize;
    let mut worst_residual = 0.0f64;
    let mut worst_z = 0.0f64;
    for law in [IncrementLaw::Rademacher, IncrementLaw::UniformSym, IncrementLaw::CenteredExponential] {
        for p in [1.0, 1.5, 2.0, 3.0] {
            let mut q = Vec::with_capacity(200);
            for r in 0..200 {
                let cfg = WalkConfig::new(2000, 500, p, law, SeedSpec::new(404, r));
                let trace = simulate_decomposition(&cfg).map_err(|e| e.to_string())?;
                violations += trace.monotonicity_violations(T_MONOTONE_TOL);
                worst_residual = worst_residual.max(trace.identity_residual());
                q.push(trace.final_q());
            }
            let mean = q.iter().sum::<f64>() / 200.0;
            let var = q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0;
            worst_z = worst_z.max(mean.abs() / (var / 200.0).sqrt());
        }
    }
    ensure(
        violations == 0 && worst_residual <= 1e-9 && worst_z <= 4.0,
        format!(
            "12 (law, p) x 200 replicates: {violations} T decreases, max residual {worst_residual:.2e}, max |mean Q_n|/SE {worst_z:.2}"
        ),
    )
}

fn p2_cross_check() -> Check {
    let (n, d) = (1000, 200);
    let mut worst = 0.0f64;
    let mut count = 0;
    for law in [IncrementLaw::Rademacher, IncrementLaw::UniformSym, IncrementLaw::CenteredExponential] {
        for r in 0..40 {
            let seed = SeedSpec::new(505, r);
            let trace = simulate_decomposition(&WalkConfig::new(n, d, 2.0, law, seed)).map_err(|e| e.to_string())?;
            // Σ_j ‖X_j‖₂² with X_j = d^{-1/2} ξ_j, from the same stream.
            let xi = sample_xi_block(&law, n * d, seed);
            let direct = xi.iter().map(|x| x * x).collect::<NeumaierSum>().value() / d as f64;
            worst = worst.max(((trace.final_t() - direct) / direct).abs());
            count += 1;
        }
    }
    ensure(worst <= 1e-9, format!("{count} replicates, max relative gap {worst:.2e}"))
}

fn diagonal_trend() -> Check {
    let ns = [100usize, 400, 1600];
    let points: Vec<PlanPoint> = ns.iter().map(|&n| PlanPoint { n, d: n }).collect();
    let plan = SweepPlan {
        points: points.clone(),
        p: vec![1.0, 2.0, 3.0],
        law: IncrementLaw::Rademacher,
        replicates: 100,
        master_seed: 606,
        m: None,
        statistics: vec![Statistic::SupDifference, Statistic::GhPaperBound, Statistic::GhCorrBound],
    };
    let report = run_convergence_sweep(&plan, &Execution::default()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut notes = Vec::new();
    for &p in &plan.p {
        let medians: Vec<f64> = points
            .iter()
            .map(|&pt| report.aggregate(p, pt, Statistic::SupDifference).unwrap().median)
            .collect();
        let mut worst_pv = 0.0f64;
        for w in points.windows(2) {
            let before = report.values(p, w[0], Statistic::SupDifference);
            let after = report.values(p, w[1], Statistic::SupDifference);
            worst_pv = worst_pv.max(sign_test_decrease(&before, &after).2);
        }
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing && worst_pv < 0.01;
        notes.push(format!(
            "p={p}: medians {:.4}/{:.4}/{:.4}, sign-test p <= {worst_pv:.1e}",
            medians[0], medians[1], medians[2]
        ));
    }
    let mut factor_ok = true;
    for pair in report.rows.chunks(3) {
        let (paper, corr) = (pair[1].value, pair[2].value);
        factor_ok &= paper == 4.0 * corr && paper >= corr;
    }
    ok &= factor_ok;
    notes.push(format!("paper_bound = 4 corr_bound on all {} replicates: {factor_ok}", report.rows.len() / 3));
    ensure(ok, notes.join("; "))
}

/// Uniform draws on `[0, 1)` from the crate's own streams.
struct Unit(XiStream);

impl Unit {
    fn new(seed: u64) -> Self {
        Unit(XiStream::new(IncrementLaw::UniformSym, SeedSpec::new(seed, 0)))
    }

    fn next(&mut self) -> f64 {
        (self.0.next_xi() / 3f64.sqrt() + 1.0) / 2.0
    }

    fn below(&mut self, k: usize) -> usize {
        ((self.next() * k as f64) as usize).min(k - 1)
    }
}

#[allow(clippy::needless_range_loop)]
fn random_metric(rng: &mut Unit) -> FiniteMetricSpace {
    let k = 1 + rng.below(4);
    let mut d = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..i {
            let x = 0.05 + 2.0 * rng.next();
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    for m in 0..k {
        for i in 0..k {
            for j in 0..k {
                d[i][j] = d[i][j].min(d[i][m] + d[m][j]);
            }
        }
    }
    FiniteMetricSpace::from_matrix(&d).unwrap()
}

fn gh_oracle() -> Check {
    let mut two_point_max = 0.0f64;
    for p in [1.0, 1.5, 2.0, 3.0] {
        for a in [0.25f64, 0.5, 0.9] {
            let two = |dist| FiniteMetricSpace::from_fn(2, |_, _| dist).unwrap();
            let f = two(lp_norm(&[1.0, 0.0, 0.0], p));
            let h = two(lp_norm(&[a.powf(1.0 / p), (1.0 - a).powf(1.0 / p), 0.0], p));
            two_point_max = two_point_max.max(gh_exact_small(&f, &h).map_err(|e| e.to_string())?);
        }
    }
    // a^{1/p} is rounded, so the second distance lands within an ulp of 1
    // and GH within half an ulp.
    let two_point_ok = two_point_max <= f64::EPSILON / 2.0;

    let mut delta_err = 0.0f64;
    for delta in [0.1, 0.7, 1.0, 3.25] {
        let one = FiniteMetricSpace::single_point();
        let two = FiniteMetricSpace::from_fn(2, |_, _| delta).unwrap();
        delta_err = delta_err.max((gh_exact_small(&one, &two).unwrap() - delta / 2.0).abs());
    }

    let mut rng = Unit::new(707);
    let mut sandwich_fail = 0;
    let mut relations = 0usize;
    for _ in 0..200 {
        let (a, b) = (random_metric(&mut rng), random_metric(&mut rng));
        let exact = gh_exact_small(&a, &b).unwrap();
        if gh_lower_bound_diameter(&a, &b) > exact {
            sandwich_fail += 1;
        }
        let (ka, kb) = (a.k(), b.k());
        let cells: Vec<(usize, usize)> = (0..ka).flat_map(|i| (0..kb).map(move |j| (i, j))).collect();
        let masks: Vec<u32> = if cells.len() <= 12 {
            (1..1u32 << cells.len()).collect()
        } else {
            (0..4000).map(|_| (rng.next() * (1u64 << cells.len()) as f64) as u32).collect()
        };
        for mask in masks {
            let pairs: Vec<_> = cells.iter().enumerate().filter(|(c, _)| mask >> c & 1 == 1).map(|(_, &x)| x).collect();
            if let Ok(corr) = Correspondence::new(ka, kb, pairs) {
                relations += 1;
                if exact > 0.5 * distortion(&corr, &a, &b).unwrap() {
                    sandwich_fail += 1;
                }
            }
        }
    }
    ensure(
        two_point_ok && delta_err <= 1e-12 && sandwich_fail == 0,
        format!(
            "two-point example max GH {two_point_max:.2e} over 12 (p, a); one-vs-two error {delta_err:.1e}; \
             200 instances, {relations} total relations, {sandwich_fail} sandwich violations"
        ),
    )
}

fn doob_bound() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for p in [1.0, 1.5, 2.0, 3.0] {
        let cfg = WalkConfig::new(1000, 200, p, IncrementLaw::Rademacher, SeedSpec::new(808, 0));
        let diag = run_martingale_check(&cfg, 2000, &Execution::default()).map_err(|e| e.to_string())?;
        for row in &diag.doob {
            ok &= row.frequency <= row.bound;
            notes.push(format!("p={p} eps={}: {:.4} <= {:.4}", row.epsilon, row.frequency, row.bound));
        }
    }
    ensure(ok, notes.join("; "))
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bodies = Vec::new();
    for threads in ["1", "2", "4"] {
        let out = dir.path().join(format!("t{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_lpwalk"))
            .args(["converge", "--points", "64x64,256x256", "--p", "1,1.5,3", "--law", "cexp", "--replicates", "6"])
            .args(["--seed", "909", "--threads", threads, "--out", out.to_str().unwrap()])
            .env_remove("LPWALK_MEM_CAP")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("lpwalk exited with {status}"));
        }
        let report = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
        let aggregates = std::fs::read_to_string(lpwalk::cli::aggregates_path(&out)).map_err(|e| e.to_string())?;
        bodies.push(format!("{}{}", split_body(&report).1, split_body(&aggregates).1));
    }
    let same = bodies.windows(2).all(|w| w[0] == w[1]);
    ensure(same, format!("--threads 1/2/4 give {} byte-identical report bodies: {same}", bodies.len()))
}

fn main() {
    let checks: [Criterion; 9] = [
        ("M_p closed form", mp_values),
        ("univariate moment convergence", univariate_moment),
        ("bivariate moment convergence", bivariate_moment),
        ("decomposition invariants", decomposition_invariants),
        ("p = 2 closed-form cross-check", p2_cross_check),
        ("diagonal sweep trend and GH factor", diagonal_trend),
        ("GH oracle", gh_oracle),
        ("Doob-bound sanity", doob_bound),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
