use std::f64::consts::PI;

use crate::error::Result;
use crate::estimator::{weighted_stats, Sample, WeightedStats};
use crate::kernels::Kernel;

use super::{BandwidthResult, Flag, Method};

/// `(R(K) mu c 8 sqrt(pi) / (3 n mu2(K)^2))^(1/5) sigma`, with the flag set
/// when the IQR scale replaced a degenerate moment scale.
pub fn rt_from_stats(stats: &WeightedStats, n: usize, kernel: Kernel) -> Result<(f64, bool)> {
    let (sigma, fallback) = stats.scale()?;
    let factor = kernel.roughness() * stats.mu_hat * stats.c_hat * 8.0 * PI.sqrt()
        / (3.0 * n as f64 * kernel.mu2().powi(2));
    Ok((factor.powf(0.2) * sigma, fallback))
}

pub fn h_rt(sample: &Sample, kernel: Kernel) -> Result<BandwidthResult> {
    let (h, fallback) = rt_from_stats(&weighted_stats(sample), sample.len(), kernel)?;
    let mut r = BandwidthResult::new(h, Method::Rt);
    if fallback {
        r.flags.insert(Flag::DegenerateSigmaFallback);
    }
    Ok(r)
}

/// Normal-reference `int (f''')^2 = 15 / (16 sqrt(pi)) sigma^-7`.
pub fn normal_reference_r_f3(sigma: f64) -> f64 {
    15.0 / (16.0 * PI.sqrt()) * sigma.powi(-7)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::numerics::adaptive_simpson;

    #[test]
    fn two_point_hand_value() {
        let s = Sample::new(vec![1.0, 2.0]).unwrap();
        let h = h_rt(&s, Kernel::Epanechnikov).unwrap().h;
        let expected = ((3.0 / 5.0) * (4.0 / 3.0) * (5.0 / 6.0) * 8.0 * PI.sqrt()
            / (2.0 * (1.0 / 25.0) * 3.0))
            .powf(0.2)
            * (2.0f64 / 9.0).sqrt();
        assert!((h - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn scale_and_rate() {
        let stats = weighted_stats(&Sample::new(vec![0.3, 0.7, 1.2, 1.9]).unwrap());
        let (h, _) = rt_from_stats(&stats, 50, Kernel::Epanechnikov).unwrap();
        let doubled = WeightedStats {
            sigma_hat: 2.0 * stats.sigma_hat,
            ..stats
        };
        let (h2, _) = rt_from_stats(&doubled, 50, Kernel::Epanechnikov).unwrap();
        assert!((h2 / h - 2.0).abs() < 1e-14);
        let (h100, _) = rt_from_stats(&stats, 5000, Kernel::Epanechnikov).unwrap();
        assert!((h100 / h - 100f64.powf(-0.2)).abs() < 1e-14);
    }

    #[test]
    fn fallback_and_degenerate() {
        let stats = WeightedStats {
            mu_hat: 1.0,
            c_hat: 1.0,
            sigma_hat: 0.0,
            sigma_hat_iqr: 0.4,
            sigma_degenerate: true,
        };
        let (h, fallback) = rt_from_stats(&stats, 10, Kernel::Gaussian).unwrap();
        assert!(fallback && h > 0.0);
        let s = Sample::new(vec![3.0; 4]).unwrap();
        assert!(matches!(h_rt(&s, Kernel::Gaussian), Err(Error::DegenerateSample)));
    }

    #[test]
    fn normal_reference_third_derivative() {
        let sigma: f64 = 0.7;
        let f3 = |x: f64| {
            let z = x / sigma;
            -(z * z * z - 3.0 * z) * crate::kernels::std_normal_pdf(z) / sigma.powi(4)
        };
        let q = adaptive_simpson(|x| f3(x).powi(2), -12.0 * sigma, 12.0 * sigma, 1e-12);
        assert!((q / normal_reference_r_f3(sigma) - 1.0).abs() < 1e-9);
    }
}
