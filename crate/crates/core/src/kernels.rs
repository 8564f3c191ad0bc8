//! Covariance kernels with closed-form evaluation.
//!
//! The eigensolvers never see a [`KernelSpec`] directly: they take a symmetric
//! callback (`Fn(f64, f64) -> f64` in 1D, `Fn([f64; 2], [f64; 2]) -> f64` in 2D),
//! so non-stationary user kernels work as well.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-integer Matérn smoothness with a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(Smoothness::Half),
            1.5 => Ok(Smoothness::ThreeHalves),
            2.5 => Ok(Smoothness::FiveHalves),
            other => Err(Error::UnsupportedSmoothness(other)),
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }

    /// `⌊ν⌋`, the number of continuous derivatives at `r = 0`.
    pub fn derivatives(self) -> usize {
        self.nu().floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    SquaredExponential,
    Matern(Smoothness),
    /// `k ≡ α`; rank one.
    Constant,
    /// `α · min(x, x')`, 1D only.
    Brownian,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "se",
            KernelFamily::Matern(_) => "matern",
            KernelFamily::Constant => "constant",
            KernelFamily::Brownian => "brownian",
        }
    }

    /// Whether the kernel is infinitely smooth across the diagonal `x = x'`.
    pub fn is_smooth(&self) -> bool {
        matches!(
            self,
            KernelFamily::SquaredExponential | KernelFamily::Constant
        )
    }

    /// Continuous derivatives at the diagonal; `None` means infinitely many.
    pub fn diagonal_derivatives(&self) -> Option<usize> {
        match self {
            KernelFamily::SquaredExponential | KernelFamily::Constant => None,
            KernelFamily::Matern(s) => Some(s.derivatives()),
            KernelFamily::Brownian => Some(0),
        }
    }

    fn uses_lengthscale(&self) -> bool {
        matches!(
            self,
            KernelFamily::SquaredExponential | KernelFamily::Matern(_)
        )
    }
}

/// A kernel family plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<T = f64> {
    family: KernelFamily,
    amplitude: T,
    lengthscale: T,
    dimension: usize,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(
        family: KernelFamily,
        amplitude: T,
        lengthscale: T,
        dimension: usize,
    ) -> Result<Self> {
        if !(amplitude >= T::zero() && amplitude.is_finite()) {
            return Err(Error::contract(format!(
                "amplitude must be finite and non-negative, got {amplitude}"
            )));
        }
        if family.uses_lengthscale() && !(lengthscale > T::zero() && lengthscale.is_finite()) {
            return Err(Error::contract(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        if !(1..=2).contains(&dimension) {
            return Err(Error::contract(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if family == KernelFamily::Brownian && dimension != 1 {
            return Err(Error::contract("the Brownian kernel is one-dimensional"));
        }
        Ok(Self {
            family,
            amplitude,
            lengthscale,
            dimension,
        })
    }

    pub fn squared_exponential(amplitude: T, lengthscale: T, dimension: usize) -> Result<Self> {
        Self::new(
            KernelFamily::SquaredExponential,
            amplitude,
            lengthscale,
            dimension,
        )
    }

    /// Matérn kernel; `nu` must be 1/2, 3/2 or 5/2.
    pub fn matern(nu: f64, amplitude: T, lengthscale: T, dimension: usize) -> Result<Self> {
        Self::new(
            KernelFamily::Matern(Smoothness::from_nu(nu)?),
            amplitude,
            lengthscale,
            dimension,
        )
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    pub fn lengthscale(&self) -> T {
        self.lengthscale
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_smooth(&self) -> bool {
        self.family.is_smooth()
    }

    pub fn with_amplitude(mut self, amplitude: T) -> Result<Self> {
        self.amplitude = amplitude;
        Self::new(
            self.family,
            self.amplitude,
            self.lengthscale,
            self.dimension,
        )
    }

    pub fn with_lengthscale(mut self, lengthscale: T) -> Result<Self> {
        self.lengthscale = lengthscale;
        Self::new(
            self.family,
            self.amplitude,
            self.lengthscale,
            self.dimension,
        )
    }

    /// Stationary profile as a function of distance `r >= 0`.
    /// Not meaningful for the Brownian kernel.
    pub fn profile(&self, r: T) -> T {
        let a = self.amplitude;
        let l = self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => a * (-(r * r) / (T::lit(2.0) * l * l)).exp(),
            KernelFamily::Matern(Smoothness::Half) => a * (-r / l).exp(),
            KernelFamily::Matern(Smoothness::ThreeHalves) => {
                let s = T::lit(3.0).sqrt() * r / l;
                a * (T::one() + s) * (-s).exp()
            }
            KernelFamily::Matern(Smoothness::FiveHalves) => {
                let s = T::lit(5.0).sqrt() * r / l;
                a * (T::one() + s + s * s / T::lit(3.0)) * (-s).exp()
            }
            KernelFamily::Constant => a,
            KernelFamily::Brownian => T::nan(),
        }
    }

    pub fn eval1(&self, x: T, y: T) -> T {
        match self.family {
            KernelFamily::Brownian => self.amplitude * x.min(y),
            _ => self.profile((x - y).abs()),
        }
    }

    pub fn eval2(&self, p: [T; 2], q: [T; 2]) -> T {
        let dx = p[0] - q[0];
        let dy = p[1] - q[1];
        self.profile((dx * dx + dy * dy).sqrt())
    }

    /// Evaluation at points given as slices of the declared dimension.
    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != self.dimension || y.len() != self.dimension {
            return Err(Error::contract(format!(
                "kernel of dimension {} evaluated at points of length {} and {}",
                self.dimension,
                x.len(),
                y.len()
            )));
        }
        Ok(match self.dimension {
            1 => self.eval1(x[0], y[0]),
            _ => self.eval2([x[0], x[1]], [y[0], y[1]]),
        })
    }
}

impl KernelSpec<f64> {
    /// Flat key-value record: `family`, `amplitude`, `lengthscale`, `nu`, `dimension`.
    pub fn to_record(&self) -> BTreeMap<&'static str, String> {
        let mut out = BTreeMap::new();
        out.insert("family", self.family.name().to_string());
        out.insert("amplitude", format!("{:e}", self.amplitude));
        out.insert("lengthscale", format!("{:e}", self.lengthscale));
        if let KernelFamily::Matern(s) = self.family {
            out.insert("nu", format!("{}", s.nu()));
        }
        out.insert("dimension", self.dimension.to_string());
        out
    }

    /// Inverse of [`KernelSpec::to_record`]. Unknown keys are rejected.
    /// Missing `amplitude` defaults to 1 and `dimension` to 1.
    pub fn from_record<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut family = None;
        let mut amplitude = 1.0;
        let mut lengthscale = None;
        let mut nu = None;
        let mut dimension = 1usize;
        let num = |key: &str, value: &str| {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::contract(format!("{key}: not a number: {value:?}")))
        };
        for (key, value) in entries {
            match key.trim() {
                "family" => family = Some(value.trim().to_string()),
                "amplitude" => amplitude = num(key, value)?,
                "lengthscale" => lengthscale = Some(num(key, value)?),
                "nu" => nu = Some(num(key, value)?),
                "dimension" => {
                    dimension = value.trim().parse().map_err(|_| {
                        Error::contract(format!("dimension: not an integer: {value:?}"))
                    })?
                }
                other => return Err(Error::contract(format!("unknown kernel key {other:?}"))),
            }
        }
        let family = family.ok_or_else(|| Error::contract("kernel record lacks `family`"))?;
        let family = match family.parse::<FamilyName>()? {
            FamilyName::Matern => KernelFamily::Matern(Smoothness::from_nu(
                nu.ok_or_else(|| Error::contract("matern kernel needs `nu`"))?,
            )?),
            FamilyName::Plain(f) => {
                if nu.is_some() {
                    return Err(Error::contract(format!(
                        "`nu` given for {} kernel",
                        f.name()
                    )));
                }
                f
            }
        };
        let lengthscale = match (family.uses_lengthscale(), lengthscale) {
            (true, Some(l)) => l,
            (true, None) => return Err(Error::contract("kernel record lacks `lengthscale`")),
            (false, l) => l.unwrap_or(1.0),
        };
        Self::new(family, amplitude, lengthscale, dimension)
    }
}

enum FamilyName {
    Matern,
    Plain(KernelFamily),
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "squared-exponential" | "squared_exponential" | "rbf" => {
                Ok(FamilyName::Plain(KernelFamily::SquaredExponential))
            }
            "matern" => Ok(FamilyName::Matern),
            "constant" => Ok(FamilyName::Plain(KernelFamily::Constant)),
            "brownian" => Ok(FamilyName::Plain(KernelFamily::Brownian)),
            other => Err(Error::contract(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl fmt::Display for KernelSpec<f64> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Matern(s) => write!(
                f,
                "matern(nu={}, amplitude={}, lengthscale={}, d={})",
                s.nu(),
                self.amplitude,
                self.lengthscale,
                self.dimension
            ),
            fam => write!(
                f,
                "{}(amplitude={}, lengthscale={}, d={})",
                fam.name(),
                self.amplitude,
                self.lengthscale,
                self.dimension
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        let se = KernelSpec::squared_exponential(1.7, 0.2, 1).unwrap();
        assert_eq!(se.eval1(0.3, 0.3), 1.7);
        let se = se.with_amplitude(1.0).unwrap();
        assert_abs_diff_eq!(se.eval1(0.0, 0.4), 0.1353352832366127, epsilon = 1e-15);

        // (1 + √3) e^{−√3} at r = ℓ.
        let expected = (1.0 + 3f64.sqrt()) * (-(3f64.sqrt())).exp();
        assert_abs_diff_eq!(expected, 0.4833577245965077, epsilon = 1e-15);
        let m32 = KernelSpec::matern(1.5, 1.0, 0.2, 1).unwrap();
        assert_abs_diff_eq!(m32.eval1(-0.1, 0.1), expected, epsilon = 1e-15);
    }

    #[test]
    fn unsupported_nu() {
        assert_eq!(
            KernelSpec::<f64>::matern(0.7, 1.0, 0.2, 1),
            Err(Error::UnsupportedSmoothness(0.7))
        );
    }

    #[test]
    fn matern_half_is_exponential() {
        let k = KernelSpec::matern(0.5, 1.0, 0.3, 1).unwrap();
        for r in [0.0, 0.1, 0.77, 3.0] {
            assert_eq!(k.eval1(0.0, r), (-r / 0.3f64).exp());
        }
    }

    #[test]
    fn smoothness_flags() {
        assert!(KernelFamily::SquaredExponential.is_smooth());
        assert!(!KernelFamily::Matern(Smoothness::FiveHalves).is_smooth());
        assert_eq!(Smoothness::ThreeHalves.derivatives(), 1);
        assert_eq!(KernelFamily::Brownian.diagonal_derivatives(), Some(0));
    }

    #[test]
    fn record_round_trip() {
        let k = KernelSpec::matern(2.5, 0.8, 0.25, 2).unwrap();
        let record = k.to_record();
        let back = KernelSpec::from_record(record.iter().map(|(k, v)| (*k, v.as_str()))).unwrap();
        assert_eq!(k, back);
        assert!(KernelSpec::from_record([("family", "se"), ("colour", "red")]).is_err());
        assert!(KernelSpec::from_record([("family", "matern"), ("lengthscale", "1")]).is_err());
    }

    #[test]
    fn dimension_checks() {
        let k = KernelSpec::squared_exponential(1.0, 0.5, 2).unwrap();
        assert!(k.eval(&[0.0], &[0.0]).is_err());
        assert_abs_diff_eq!(
            k.eval(&[0.0, 0.0], &[0.3, 0.4]).unwrap(),
            (-0.25f64 / 0.5).exp(),
            epsilon = 1e-15
        );
        assert!(KernelSpec::<f64>::new(KernelFamily::Brownian, 1.0, 1.0, 2).is_err());
    }

    fn families() -> impl Strategy<Value = KernelSpec> {
        (0usize..4, 0.05f64..2.0, 0.1f64..3.0).prop_map(|(f, l, a)| match f {
            0 => KernelSpec::squared_exponential(a, l, 1).unwrap(),
            1 => KernelSpec::matern(0.5, a, l, 1).unwrap(),
            2 => KernelSpec::matern(1.5, a, l, 1).unwrap(),
            _ => KernelSpec::matern(2.5, a, l, 1).unwrap(),
        })
    }

    proptest! {
        #[test]
        fn gram_matrices_are_psd(
            k in families(),
            points in proptest::collection::vec(-1.0f64..1.0, 1..=8),
        ) {
            let n = points.len();
            let gram = DMatrix::from_fn(n, n, |i, j| k.eval1(points[i], points[j]));
            let eig = SymmetricEigen::new(gram);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-10 * k.amplitude());
        }

        #[test]
        fn symmetric_stationary_monotone(k in families(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            prop_assert_eq!(k.eval1(x, y), k.eval1(y, x));
            prop_assert_eq!(k.eval1(x, x), k.amplitude());
            let shifted = k.eval1(x + 0.5, y + 0.5);
            prop_assert!((k.eval1(x, y) - shifted).abs() <= 1e-12 * k.amplitude());
            let r = (x - y).abs();
            prop_assert!(k.profile(r + 0.01) <= k.profile(r));
        }

        #[test]
        fn amplitude_is_linear(k in families(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let unit = k.with_amplitude(1.0).unwrap();
            let lhs = k.eval1(x, y);
            let rhs = k.amplitude() * unit.eval1(x, y);
            prop_assert!((lhs - rhs).abs() <= 1e-15 * k.amplitude());
        }
    }
}
