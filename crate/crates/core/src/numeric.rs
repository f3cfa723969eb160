/// Neumaier (improved Kahan–Babuška) compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl core::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `|x|^p` with the common exponents special-cased; `powf` is the slow path
/// in every hot loop of the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum AbsPow {
    One,
    ThreeHalves,
    Two,
    Three,
    Four,
    General(f64),
}

impl AbsPow {
    pub(crate) fn new(p: f64) -> Self {
        if p == 1.0 {
            AbsPow::One
        } else if p == 1.5 {
            AbsPow::ThreeHalves
        } else if p == 2.0 {
            AbsPow::Two
        } else if p == 3.0 {
            AbsPow::Three
        } else if p == 4.0 {
            AbsPow::Four
        } else {
            AbsPow::General(p)
        }
    }

    #[inline(always)]
    pub(crate) fn eval(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            AbsPow::One => a,
            AbsPow::ThreeHalves => a * libm::sqrt(a),
            AbsPow::Two => a * a,
            AbsPow::Three => a * a * a,
            AbsPow::Four => {
                let s = a * a;
                s * s
            }
            AbsPow::General(p) => libm::pow(a, p),
        }
    }

    /// `y^{1/p}` for `y ≥ 0`.
    #[inline]
    pub(crate) fn root(self, y: f64) -> f64 {
        match self {
            AbsPow::One => y,
            AbsPow::Two => libm::sqrt(y),
            AbsPow::Three => libm::cbrt(y),
            AbsPow::Four => libm::sqrt(libm::sqrt(y)),
            AbsPow::ThreeHalves => libm::cbrt(y * y),
            AbsPow::General(p) => libm::pow(y, 1.0 / p),
        }
    }
}

pub(crate) fn check_p(p: f64) -> crate::Result<()> {
    if p.is_finite() && p >= 1.0 {
        Ok(())
    } else {
        Err(crate::Error::invalid(alloc::format!("p must be finite and >= 1, got {p}")))
    }
}
