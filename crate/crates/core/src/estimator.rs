//! The weighted (Jones) kernel density estimator and the plug-in functionals
//! the bandwidth selectors consume.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numerics::{integrate, Grid};

/// `Phi^-1(0.75) - Phi^-1(0.25)`.
pub const NORMAL_IQR: f64 = 1.348_979_500_392_163_4;

/// Default number of points for estimate grids.
pub const DEFAULT_GRID_POINTS: usize = 513;

/// Known biasing function `w` of the sampling scheme: `f_Y(y) = w(y) f(y) / mu_w`.
#[derive(Clone, Copy)]
pub enum Weight {
    /// `w(y) = y`, length-biased sampling.
    Length,
    /// `w(y) = 1`, ordinary unbiased sampling.
    Unit,
    /// `w(y) = y^p`.
    Power(f64),
    Custom(fn(f64) -> f64),
}

impl Weight {
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Weight::Length => y,
            Weight::Unit => 1.0,
            Weight::Power(p) => y.powf(p),
            Weight::Custom(f) => f(y),
        }
    }
}

impl PartialEq for Weight {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Weight::Length, Weight::Length) | (Weight::Unit, Weight::Unit) => true,
            (Weight::Power(a), Weight::Power(b)) => a == b,
            (Weight::Custom(f), Weight::Custom(g)) => *f as usize == *g as usize,
            _ => false,
        }
    }
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Length
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Length => f.write_str("Length"),
            Weight::Unit => f.write_str("Unit"),
            Weight::Power(p) => write!(f, "Power({p})"),
            Weight::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Observations `Y_1..Y_n` drawn under a known weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    weight: Weight,
}

impl Sample {
    /// A length-biased sample.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_weight(values, Weight::Length)
    }

    pub fn with_weight(values: Vec<f64>, weight: Weight) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSample(format!(
                "need at least 2 observations, got {}",
                values.len()
            )));
        }
        for (i, &y) in values.iter().enumerate() {
            if !(y.is_finite() && y > 0.0) {
                return Err(Error::InvalidSample(format!(
                    "observation {} is {y}; values must be strictly positive and finite",
                    i + 1
                )));
            }
            let w = weight.eval(y);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidSample(format!(
                    "weight at observation {} ({y}) is {w}; weights must be positive and finite",
                    i + 1
                )));
            }
        }
        Ok(Sample { values, weight })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The sample multiplied by `lambda`, keeping the weight function.
    pub fn scaled(&self, lambda: f64) -> Result<Sample> {
        Sample::with_weight(self.values.iter().map(|y| y * lambda).collect(), self.weight)
    }

    /// `mu_hat_w = (n^-1 sum 1/w(Y_i))^-1`.
    pub fn mu_hat(&self) -> f64 {
        let n = self.len() as f64;
        n / self.values.iter().map(|&y| 1.0 / self.weight.eval(y)).sum::<f64>()
    }

    /// Estimator coefficients `mu_hat / (n w(Y_i))`; they sum to one.
    pub fn coefficients(&self) -> Vec<f64> {
        let scale = self.mu_hat() / self.len() as f64;
        self.values.iter().map(|&y| scale / self.weight.eval(y)).collect()
    }
}

/// Plug-in moment estimates of the unobserved distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedStats {
    pub mu_hat: f64,
    pub c_hat: f64,
    /// Moment-based scale estimate, clamped at zero.
    pub sigma_hat: f64,
    /// IQR of the bias-corrected empirical distribution over the normal IQR.
    pub sigma_hat_iqr: f64,
    /// The moment variance estimate was non-positive and got clamped.
    pub sigma_degenerate: bool,
}

impl WeightedStats {
    /// `sigma_hat`, or `sigma_hat_iqr` when the moment estimate degenerated.
    /// The flag reports whether the fallback was taken.
    pub fn scale(&self) -> Result<(f64, bool)> {
        if !self.sigma_degenerate && self.sigma_hat > 0.0 {
            Ok((self.sigma_hat, false))
        } else if self.sigma_hat_iqr > 0.0 {
            Ok((self.sigma_hat_iqr, true))
        } else {
            Err(Error::DegenerateSample)
        }
    }
}

/// Computes `mu_hat`, `c_hat`, `sigma_hat` and `sigma_hat_iqr`.
///
/// With `v_i = 1 / w(Y_i)`:
/// `mu_hat = n / sum v_i`, `c_hat = mu_hat mean(v_i^2)`, and the first two
/// moments of X are `mu_hat mean(Y_i v_i)` and `mu_hat mean(Y_i^2 v_i)`.
/// For length bias these reduce to `mu_hat`, `mu_hat mean(1/Y_i^2)` and
/// `sigma^2 = mu_hat mean(Y_i) - mu_hat^2`.
pub fn weighted_stats(sample: &Sample) -> WeightedStats {
    let n = sample.len() as f64;
    let w = sample.weight();
    let inv: Vec<f64> = sample.values().iter().map(|&y| 1.0 / w.eval(y)).collect();
    let mu_hat = n / inv.iter().sum::<f64>();
    let c_hat = mu_hat * inv.iter().map(|v| v * v).sum::<f64>() / n;

    let (m1, m2) = match w {
        // Exact form for length bias: mean of X is mu_hat itself.
        Weight::Length => (mu_hat, mu_hat * sample.values().iter().sum::<f64>() / n),
        _ => {
            let m1 = mu_hat * sample.values().iter().zip(&inv).map(|(y, v)| y * v).sum::<f64>() / n;
            let m2 = mu_hat
                * sample.values().iter().zip(&inv).map(|(y, v)| y * y * v).sum::<f64>()
                / n;
            (m1, m2)
        }
    };
    let var = m2 - m1 * m1;
    // Cancellation noise of a few ulps of m2 counts as zero spread.
    let sigma_degenerate = var <= 8.0 * f64::EPSILON * m2.abs();
    let sigma_hat = if sigma_degenerate { 0.0 } else { var.sqrt() };

    let q25 = weighted_quantile(sample.values(), &inv, 0.25);
    let q75 = weighted_quantile(sample.values(), &inv, 0.75);

    WeightedStats {
        mu_hat,
        c_hat,
        sigma_hat,
        sigma_hat_iqr: (q75 - q25) / NORMAL_IQR,
        sigma_degenerate,
    }
}

/// Inverse of the weighted empirical distribution function (lower quantile).
fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|(_, w)| w).sum();
    let target = p * total;
    let mut running = 0.0;
    for &(y, w) in &pairs {
        running += w;
        if running >= target * (1.0 - 1e-12) {
            return y;
        }
    }
    pairs.last().unwrap().0
}

/// Reusable evaluator for `f_h(y) = sum_i c_i K_h(y - Y_i)` with
/// `c_i = mu_hat / (n w(Y_i))`.
#[derive(Debug, Clone)]
pub struct JonesEstimator {
    points: Vec<f64>,
    coefs: Vec<f64>,
    h: f64,
    kernel: Kernel,
}

impl JonesEstimator {
    pub fn new(sample: &Sample, h: f64, kernel: Kernel) -> Result<Self> {
        Self::from_parts(sample.values(), &sample.coefficients(), h, kernel)
    }

    /// Builds from raw support points and their coefficients.
    pub fn from_parts(points: &[f64], coefs: &[f64], h: f64, kernel: Kernel) -> Result<Self> {
        check_bandwidth(h)?;
        let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(coefs.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, coefs) = pairs.into_iter().unzip();
        Ok(JonesEstimator {
            points,
            coefs,
            h,
            kernel,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Same support points and coefficients, different bandwidth.
    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        check_bandwidth(h)?;
        Ok(JonesEstimator { h, ..self.clone() })
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        let reach = self.kernel.effective_radius() * self.h;
        let start = self.points.partition_point(|&x| x < y - reach);
        let end = self.points.partition_point(|&x| x <= y + reach);
        let inv_h = 1.0 / self.h;
        let mut sum = 0.0;
        for i in start..end {
            sum += self.coefs[i] * self.kernel.eval((y - self.points[i]) * inv_h);
        }
        sum * inv_h
    }

    pub fn eval_grid(&self, grid: &Grid) -> Vec<f64> {
        grid.map(|y| self.eval(y))
    }

    /// Second derivative `sum_i c_i h^-3 K''((y - Y_i) / h)`.
    pub fn second_derivative(&self, y: f64) -> Result<f64> {
        let inv_h = 1.0 / self.h;
        let mut sum = 0.0;
        for (x, c) in self.points.iter().zip(&self.coefs) {
            sum += c * self.kernel.second_derivative((y - x) * inv_h)?;
        }
        Ok(sum * inv_h * inv_h * inv_h)
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("bandwidth must be positive and finite, got {h}")))
    }
}

/// Density estimate tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub h: f64,
    pub kernel: Kernel,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        integrate(&self.values, &self.grid)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().zip(self.values.iter().copied())
    }
}

/// Grid over the data range widened by the kernel reach `radius * h` on both sides.
pub fn default_grid(sample: &Sample, h: f64, kernel: Kernel, points: usize) -> Result<Grid> {
    let reach = kernel.effective_radius() * h;
    Grid::new(sample.min() - reach, sample.max() + reach, points)
}

/// Evaluates the weighted kernel estimator on `grid`.
pub fn jones_estimate(sample: &Sample, h: f64, kernel: Kernel, grid: &Grid) -> Result<DensityEstimate> {
    let est = JonesEstimator::new(sample, h, kernel)?;
    Ok(DensityEstimate {
        grid: *grid,
        values: est.eval_grid(grid),
        h,
        kernel,
    })
}

/// `gamma_hat_g(y) = mu_hat f_g(y) / w(y)`.
pub fn gamma_hat(sample: &Sample, g: f64, kernel: Kernel, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_hat needs y > 0, got {y}")));
    }
    let est = JonesEstimator::new(sample, g, kernel)?;
    Ok(sample.mu_hat() * est.eval(y) / sample.weight().eval(y))
}

/// `R(f_g'') = int (f_g''(y))^2 dy`, evaluated exactly as the double sum
/// `sum_i sum_j c_i c_j g^-6 int L''((y - Y_i)/g) L''((y - Y_j)/g) dy`.
pub fn curvature_functional(sample: &Sample, g: f64, pilot: Kernel) -> Result<f64> {
    check_bandwidth(g)?;
    let roughness = pilot.second_derivative_roughness()?;
    let coefs = sample.coefficients();
    let values = sample.values();

    let diagonal: f64 = coefs.iter().map(|c| c * c).sum::<f64>() * roughness * g;
    let mut off_diagonal = 0.0;
    for i in 0..values.len() {
        let mut row = 0.0;
        for j in (i + 1)..values.len() {
            row += coefs[j] * pilot.second_derivative_cross_integral(values[i] - values[j], g)?;
        }
        off_diagonal += coefs[i] * row;
    }
    let total = (diagonal + 2.0 * off_diagonal) / g.powi(6);
    // The integral of a square: negative values are rounding residue.
    Ok(total.max(0.0))
}
