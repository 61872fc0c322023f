//! Second-order symmetric kernels and their analytic constants.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `3/4 (1 - u^2)` on `[-1, 1]`.
    Epanechnikov,
    /// Standard normal density.
    Gaussian,
}

/// `(mu_2(K), R(K))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub mu2: f64,
    pub roughness: f64,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
        }
    }

    /// Order of the kernel (index of the first non-vanishing moment).
    pub fn order(self) -> u32 {
        2
    }

    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => std_normal_pdf(u),
        }
    }

    /// Distribution function `int_{-inf}^u K`.
    pub fn cdf(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                let u = u.clamp(-1.0, 1.0);
                0.25 * (2.0 + 3.0 * u - u * u * u)
            }
            Kernel::Gaussian => std_normal_cdf(u),
        }
    }

    /// Half-width of the support, `None` for unbounded support.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            Kernel::Epanechnikov => Some(1.0),
            Kernel::Gaussian => None,
        }
    }

    /// Radius outside which the kernel is treated as zero when windowing sums
    /// and laying out grids. For the Gaussian the neglected mass is below 1e-15.
    pub fn effective_radius(self) -> f64 {
        self.support_radius().unwrap_or(8.0)
    }

    pub fn mu2(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.2,
            Kernel::Gaussian => 1.0,
        }
    }

    /// `R(K) = int K^2`.
    pub fn roughness(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 0.6,
            Kernel::Gaussian => 0.5 / SQRT_PI,
        }
    }

    pub fn constants(self) -> KernelConstants {
        KernelConstants {
            mu2: self.mu2(),
            roughness: self.roughness(),
        }
    }

    /// `(K o K)(v) = int K(u) K(v - u) du`.
    pub fn self_convolution(self, v: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                let a = v.abs();
                if a >= 2.0 {
                    0.0
                } else {
                    let w = 2.0 - a;
                    3.0 / 160.0 * w * w * w * (a * a + 6.0 * a + 4.0)
                }
            }
            Kernel::Gaussian => 0.5 / SQRT_PI * (-0.25 * v * v).exp(),
        }
    }

    pub fn is_twice_differentiable(self) -> bool {
        matches!(self, Kernel::Gaussian)
    }

    fn require_smooth(self) -> Result<()> {
        if self.is_twice_differentiable() {
            Ok(())
        } else {
            Err(Error::PilotKernelUnsuitable(self))
        }
    }

    /// `K''(u)`.
    pub fn second_derivative(self, u: f64) -> Result<f64> {
        self.require_smooth()?;
        Ok((u * u - 1.0) * std_normal_pdf(u))
    }

    /// `int (K'')^2`.
    pub fn second_derivative_roughness(self) -> Result<f64> {
        self.require_smooth()?;
        Ok(3.0 / (8.0 * SQRT_PI))
    }

    /// `int K''((y - a) / g) K''((y - b) / g) dy` with `delta = a - b`.
    ///
    /// Substituting `u = (y - a) / g` gives `g (K'' * K'')(delta / g)`, and for
    /// the Gaussian the self-convolution of `phi''` is the fourth derivative of
    /// the N(0, 2) density.
    pub fn second_derivative_cross_integral(self, delta: f64, g: f64) -> Result<f64> {
        self.require_smooth()?;
        Ok(g * gaussian_second_derivative_autocorrelation(delta / g))
    }

    /// Draws one variate with density `K`.
    pub fn sample_noise<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                // Inverse of F(u) = (2 + 3u - u^3) / 4 on [-1, 1].
                let p: f64 = rng.random();
                2.0 * ((2.0 * p - 1.0).asin() / 3.0).sin()
            }
            Kernel::Gaussian => rng.sample(StandardNormal),
        }
    }
}

/// `(phi'' * phi'')(t) = d^4/dt^4 [phi(t / sqrt 2) / sqrt 2]`.
#[inline]
pub(crate) fn gaussian_second_derivative_autocorrelation(t: f64) -> f64 {
    let x = t * std::f64::consts::FRAC_1_SQRT_2;
    let x2 = x * x;
    (x2 * x2 - 6.0 * x2 + 3.0) * std_normal_pdf(x) / (4.0 * std::f64::consts::SQRT_2)
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" | "epa" => Ok(Kernel::Epanechnikov),
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
        }
    }
}
