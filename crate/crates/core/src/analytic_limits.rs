//! Deterministic limit quantities.
//!
//! `M_p = E|N(0,1)|^p = 2^{p/2} Γ((p+1)/2) / √π`, the limit metric
//! `r(t, s) = σ M_p^{1/p} √|t − s|` on `[0, 1]`, and `E|η₁η₂|^p` for a
//! centered bivariate normal pair.
//!
//! The bivariate moment is reduced to polar coordinates. Writing
//! `(η₁, η₂) = r (u·e_θ, v·e_θ)` with `u`, `v` the rows of a Cholesky factor
//! of `Σ`, the radial integral is `∫ r^{2p+1} e^{−r²/2} dr = 2^p Γ(p+1)`, so
//!
//! ```text
//! E|η₁η₂|^p = 2^p Γ(p+1) / π · ∫_0^π |u·e_θ|^p |v·e_θ|^p dθ.
//! ```
//!
//! The angular integrand is analytic except at the two zeros of `u·e_θ` and
//! `v·e_θ`, where it behaves like `|θ − θ₀|^p`. The interval is split at
//! those points and each piece is integrated with tanh-sinh.

use core::f64::consts::{FRAC_PI_2, LN_2, PI};

use crate::increments::{IncrementLaw, SeedSpec, XiStream};
use crate::numeric::{check_p, NeumaierSum};
use crate::quadrature::tanh_sinh;
use crate::{Error, Result};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// `E|N(0,1)|^p`, evaluated in log space.
pub fn mp_closed_form(p: f64) -> Result<f64> {
    if !p.is_finite() || p < 0.0 {
        return Err(Error::invalid(alloc::format!("M_p needs finite p >= 0, got {p}")));
    }
    Ok(libm::exp(0.5 * p * LN_2 + libm::lgamma(0.5 * (p + 1.0)) - 0.5 * LN_PI))
}

/// The deterministic limit space `([0,1], σ M_p^{1/p} √|t−s|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitSpace {
    sigma: f64,
    p: f64,
    m_p: f64,
}

impl LimitSpace {
    pub fn new(sigma: f64, p: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(alloc::format!("sigma must be positive, got {sigma}")));
        }
        check_p(p)?;
        Ok(Self { sigma, p, m_p: mp_closed_form(p)? })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m_p(&self) -> f64 {
        self.m_p
    }

    /// `σ M_p^{1/p}`, the diameter of the space.
    pub fn scale(&self) -> f64 {
        self.sigma * libm::pow(self.m_p, 1.0 / self.p)
    }

    /// `σ^p M_p`, the limit of `n^{-p/2} ‖S_n‖_p^p`.
    pub fn norm_pp_limit(&self) -> f64 {
        libm::pow(self.sigma, self.p) * self.m_p
    }

    pub fn distance(&self, t: f64, s: f64) -> Result<f64> {
        limit_distance(t, s, self)
    }

    /// Distance without range checks, for hot loops over validated grids.
    #[inline]
    pub(crate) fn distance_unchecked(&self, t: f64, s: f64) -> f64 {
        self.scale() * libm::sqrt((t - s).abs())
    }

    /// Additive gap between grid-level sup-statistics at resolution `m` and
    /// their continuum counterparts: `σ M_p^{1/p} √(2/m)`.
    pub fn discretization_allowance(&self, m: usize) -> f64 {
        self.scale() * libm::sqrt(2.0 / m as f64)
    }
}

pub fn limit_distance(t: f64, s: f64, space: &LimitSpace) -> Result<f64> {
    for (name, x) in [("t", t), ("s", s)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(alloc::format!("{name} = {x} lies outside [0, 1]")));
        }
    }
    Ok(space.distance_unchecked(t, s))
}

/// Symmetric 2×2 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl CovarianceMatrix2 {
    pub fn new(s11: f64, s12: f64, s22: f64) -> Result<Self> {
        let psd = s11.is_finite()
            && s12.is_finite()
            && s22.is_finite()
            && s11 >= 0.0
            && s22 >= 0.0
            && s11 * s22 - s12 * s12 >= -1e-12;
        if psd {
            Ok(Self { s11, s12, s22 })
        } else {
            Err(Error::NotPositiveSemidefinite { s11, s12, s22 })
        }
    }

    pub fn identity() -> Self {
        Self { s11: 1.0, s12: 0.0, s22: 1.0 }
    }

    /// Unit variances with correlation `rho`.
    pub fn correlation(rho: f64) -> Result<Self> {
        Self::new(1.0, rho, 1.0)
    }

    pub fn determinant(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    fn is_rank_deficient(&self) -> bool {
        self.determinant() < 1e-12 * self.s11 * self.s22
    }

    /// Lower Cholesky factor `(l11, l21, l22)`; `l22 = 0` for singular input.
    fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = libm::sqrt(self.s11);
        if l11 == 0.0 {
            return (0.0, 0.0, libm::sqrt(self.s22));
        }
        let l21 = self.s12 / l11;
        let l22 = libm::sqrt((self.s22 - l21 * l21).max(0.0));
        (l11, l21, l22)
    }
}

/// `E|η₁η₂|^p` for `(η₁, η₂) ~ N(0, Σ)`.
pub fn bivariate_gaussian_abs_moment(p: f64, cov: &CovarianceMatrix2) -> Result<f64> {
    check_p(p)?;
    let cov = CovarianceMatrix2::new(cov.s11, cov.s12, cov.s22)?;
    if cov.s11 == 0.0 || cov.s22 == 0.0 {
        return Ok(0.0);
    }
    if cov.is_rank_deficient() {
        // η₂ = (s12/s11) η₁, so |η₁η₂|^p = |s12/s11|^p |η₁|^{2p}.
        return Ok(libm::pow(cov.s12.abs(), p) * mp_closed_form(2.0 * p)?);
    }

    let (l11, l21, l22) = cov.cholesky();
    // u·e_θ = l11 cos θ, v·e_θ = l21 cos θ + l22 sin θ
    let integrand = |theta: f64| {
        let (s, c) = libm::sincos(theta);
        libm::pow((l11 * c).abs() * (l21 * c + l22 * s).abs(), p)
    };

    // Zeros in [0, π): π/2 for u, atan(−l21/l22) mod π for v.
    let mut v_zero = libm::atan(-l21 / l22);
    if v_zero < 0.0 {
        v_zero += PI;
    }
    let mut cuts = [0.0, FRAC_PI_2, v_zero, PI];
    cuts.sort_by(|a, b| a.total_cmp(b));

    let angular: NeumaierSum = cuts
        .windows(2)
        .map(|w| tanh_sinh(integrand, w[0], w[1], 1e-15))
        .collect();
    let radial = libm::exp(p * LN_2 + libm::lgamma(p + 1.0));
    Ok(radial / PI * angular.value())
}

/// Monte Carlo estimate of `E|η₁η₂|^p` with its standard error.
///
/// Independent of the quadrature path: draws `z₁, z₂` from the crate's normal
/// sampler and maps them through the Cholesky factor.
pub fn bivariate_moment_mc_oracle(
    p: f64,
    cov: &CovarianceMatrix2,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::invalid(alloc::format!("p must be finite and >= 0, got {p}")));
    }
    if reps < 10_000 {
        return Err(Error::invalid(alloc::format!("need at least 10^4 replicates, got {reps}")));
    }
    let cov = CovarianceMatrix2::new(cov.s11, cov.s12, cov.s22)?;
    let (l11, l21, l22) = cov.cholesky();
    let mut z = XiStream::new(IncrementLaw::StandardNormal, SeedSpec::new(seed, 0));

    let mut sum = NeumaierSum::new();
    let mut sum_sq = NeumaierSum::new();
    for _ in 0..reps {
        let z1 = z.next_xi();
        let z2 = z.next_xi();
        let v = libm::pow((l11 * z1 * (l21 * z1 + l22 * z2)).abs(), p);
        sum.add(v);
        sum_sq.add(v * v);
    }
    let r = reps as f64;
    let mean = sum.value() / r;
    let var = ((sum_sq.value() - r * mean * mean) / (r - 1.0)).max(0.0);
    Ok((mean, libm::sqrt(var / r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn mp_examples() {
        assert!(rel(mp_closed_form(2.0).unwrap(), 1.0) < 1e-13);
        assert!(rel(mp_closed_form(1.0).unwrap(), 0.797_884_560_802_865_4) < 1e-13);
        assert!(rel(mp_closed_form(4.0).unwrap(), 3.0) < 1e-13);
        assert!(rel(mp_closed_form(0.0).unwrap(), 1.0) < 1e-13);
    }

    // Reference values from mpmath at 50 digits.
    #[test]
    fn mp_matches_high_precision_reference() {
        let table = [
            (0.5, 0.8221789586624586),
            (3.0, 1.595_769_121_605_730_7),
            (7.3, 51.46738441951351),
            (25.0, 1_565_441_971_158.506_7),
            (50.0, 5.843584144594727e31),
        ];
        for (p, want) in table {
            assert!(rel(mp_closed_form(p).unwrap(), want) < 1e-13, "p={p}");
        }
    }

    #[test]
    fn mp_even_orders_are_double_factorials() {
        let mut df = 1.0;
        for k in 1..=5u32 {
            df *= f64::from(2 * k - 1);
            assert!(rel(mp_closed_form(f64::from(2 * k)).unwrap(), df) < 1e-12);
        }
    }

    #[test]
    fn mp_rejects_bad_input() {
        assert!(mp_closed_form(-0.5).is_err());
        assert!(mp_closed_form(f64::NAN).is_err());
        assert!(mp_closed_form(f64::INFINITY).is_err());
    }

    #[test]
    fn mp_increasing_on_grid() {
        let mut prev = mp_closed_form(1.0).unwrap();
        for i in 1..=400 {
            let cur = mp_closed_form(1.0 + f64::from(i) * 0.1).unwrap();
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn limit_distance_examples() {
        let s = LimitSpace::new(1.0, 2.0).unwrap();
        assert_eq!(limit_distance(0.3, 0.3, &s).unwrap(), 0.0);
        assert!((limit_distance(0.0, 1.0, &s).unwrap() - 1.0).abs() < 1e-15);
        let s = LimitSpace::new(2.0, 1.0).unwrap();
        // 2 · √(2/π) · √(1/4)
        let want = 2.0 * libm::sqrt(2.0 / PI) * 0.5;
        assert!((limit_distance(0.0, 0.25, &s).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.797_884_560_8).abs() < 1e-10);
        assert!(limit_distance(-0.1, 0.5, &s).is_err());
        assert!(limit_distance(0.1, 1.5, &s).is_err());
    }

    #[test]
    fn limit_space_validates() {
        assert!(LimitSpace::new(0.0, 2.0).is_err());
        assert!(LimitSpace::new(1.0, 0.5).is_err());
        let s = LimitSpace::new(1.0, 3.0).unwrap();
        assert!(rel(s.m_p(), mp_closed_form(3.0).unwrap()) < 1e-14);
    }

    #[test]
    fn limit_metric_triangle_inequality_on_grid() {
        let s = LimitSpace::new(1.3, 1.5).unwrap();
        let t: alloc::vec::Vec<f64> = (0..=100).map(|i| f64::from(i) / 100.0).collect();
        for &a in &t {
            for &b in &t {
                let ab = s.distance(a, b).unwrap();
                assert_eq!(ab, s.distance(b, a).unwrap());
                for &c in &t {
                    let via = s.distance(a, c).unwrap() + s.distance(c, b).unwrap();
                    assert!(ab <= via + 1e-15);
                }
            }
        }
    }

    #[test]
    fn covariance_psd_checks() {
        assert!(CovarianceMatrix2::new(1.0, 1.0, 1.0).is_ok());
        assert!(CovarianceMatrix2::new(1.0, 1.1, 1.0).is_err());
        assert!(CovarianceMatrix2::new(-1.0, 0.0, 1.0).is_err());
        assert!(CovarianceMatrix2::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn bivariate_identity_factorizes() {
        for &p in &[1.0, 1.5, 2.0, 3.0, 5.5, 8.0] {
            let got = bivariate_gaussian_abs_moment(p, &CovarianceMatrix2::identity()).unwrap();
            let mp = mp_closed_form(p).unwrap();
            assert!((got - mp * mp).abs() < 1e-8, "p={p}: {got} vs {}", mp * mp);
        }
        let got = bivariate_gaussian_abs_moment(3.0, &CovarianceMatrix2::identity()).unwrap();
        assert!((got - 8.0 / PI).abs() < 1e-10);
    }

    #[test]
    fn bivariate_perfect_correlation_is_m_2p() {
        for &p in &[1.0, 2.5, 4.0] {
            let cov = CovarianceMatrix2::new(1.0, 1.0, 1.0).unwrap();
            let got = bivariate_gaussian_abs_moment(p, &cov).unwrap();
            assert!(rel(got, mp_closed_form(2.0 * p).unwrap()) < 1e-12);
            let cov = CovarianceMatrix2::new(1.0, -1.0, 1.0).unwrap();
            let got = bivariate_gaussian_abs_moment(p, &cov).unwrap();
            assert!(rel(got, mp_closed_form(2.0 * p).unwrap()) < 1e-12);
        }
    }

    // Wick: E η₁²η₂² = s11 s22 + 2 s12²
    #[test]
    fn bivariate_p2_matches_wick() {
        for &(s11, s12, s22) in &[(1.0, 0.5, 1.0), (2.0, -1.2, 3.5), (4.0, 3.9, 4.0), (0.3, 0.0, 2.0)] {
            let cov = CovarianceMatrix2::new(s11, s12, s22).unwrap();
            let got = bivariate_gaussian_abs_moment(2.0, &cov).unwrap();
            let want = s11 * s22 + 2.0 * s12 * s12;
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    // E η₁⁴η₂⁴ = 9 s11² s22² + 72 s11 s22 s12² + 24 s12⁴ (Isserlis).
    #[test]
    fn bivariate_p4_matches_isserlis() {
        for &(s11, s12, s22) in &[(1.0, 0.5, 1.0), (2.0, -1.2, 3.5), (4.0, -3.0, 4.0)] {
            let cov = CovarianceMatrix2::new(s11, s12, s22).unwrap();
            let got = bivariate_gaussian_abs_moment(4.0, &cov).unwrap();
            let want = 9.0 * s11 * s11 * s22 * s22 + 72.0 * s11 * s22 * s12 * s12
                + 24.0 * s12 * s12 * s12 * s12;
            assert!((got - want).abs() < 1e-8 * want.max(1.0), "{got} vs {want}");
        }
    }

    // E|η₁η₂| for unit variances and correlation ρ: (2/π)(√(1−ρ²) + ρ asin ρ).
    #[test]
    fn bivariate_p1_matches_closed_form() {
        for &rho in &[-0.9, -0.3, 0.0, 0.5, 0.9, 0.999] {
            let cov = CovarianceMatrix2::correlation(rho).unwrap();
            let got = bivariate_gaussian_abs_moment(1.0, &cov).unwrap();
            let want = 2.0 / PI * (libm::sqrt(1.0 - rho * rho) + rho * libm::asin(rho));
            assert!((got - want).abs() < 1e-12, "rho={rho}: {got} vs {want}");
        }
    }

    #[test]
    fn bivariate_zero_variance_and_errors() {
        let cov = CovarianceMatrix2::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(bivariate_gaussian_abs_moment(2.0, &cov).unwrap(), 0.0);
        assert!(bivariate_gaussian_abs_moment(0.5, &CovarianceMatrix2::identity()).is_err());
        let bad = CovarianceMatrix2 { s11: 1.0, s12: 2.0, s22: 1.0 };
        assert!(matches!(
            bivariate_gaussian_abs_moment(2.0, &bad),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn mc_oracle_examples() {
        let (m, se) = bivariate_moment_mc_oracle(2.0, &CovarianceMatrix2::identity(), 200_000, 7).unwrap();
        assert!((m - 1.0).abs() <= 4.0 * se, "{m} ± {se}");
        let cov = CovarianceMatrix2::new(1.0, 1.0, 1.0).unwrap();
        let (m, se) = bivariate_moment_mc_oracle(1.0, &cov, 200_000, 8).unwrap();
        assert!((m - 1.0).abs() <= 4.0 * se, "{m} ± {se}");
        let cov = CovarianceMatrix2::correlation(0.5).unwrap();
        let (m, se) = bivariate_moment_mc_oracle(2.0, &cov, 200_000, 9).unwrap();
        assert!((m - 1.5).abs() <= 4.0 * se, "{m} ± {se}");
        assert!(bivariate_moment_mc_oracle(2.0, &cov, 100, 9).is_err());
        let bad = CovarianceMatrix2 { s11: 1.0, s12: 2.0, s22: 1.0 };
        assert!(bivariate_moment_mc_oracle(2.0, &bad, 10_000, 9).is_err());
    }

    #[test]
    fn mc_oracle_is_deterministic() {
        let cov = CovarianceMatrix2::correlation(0.3).unwrap();
        let a = bivariate_moment_mc_oracle(1.5, &cov, 10_000, 42).unwrap();
        let b = bivariate_moment_mc_oracle(1.5, &cov, 10_000, 42).unwrap();
        assert_eq!(a, b);
    }
}
