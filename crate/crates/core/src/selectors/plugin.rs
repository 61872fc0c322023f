use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{curvature_functional, weighted_stats, Sample};
use crate::kernels::Kernel;

use super::{normal_reference_r_f3, rt_from_stats, BandwidthResult, Flag, Method};

/// Pilot rule for the closed-form bootstrap selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PilotRule {
    /// AMSE-optimal pilot for the curvature functional.
    G0,
    /// Rule of thumb inflated to the pilot rate.
    GRt,
}

/// `((5/2) A / B)^(1/7) n^(-1/7)`, the minimiser of `(A n^-1 g^-5 + B g^2)^2`.
pub fn pilot_g0_from_constants(a: f64, b: f64, n: usize) -> f64 {
    (2.5 * a / b).powf(1.0 / 7.0) * (n as f64).powf(-1.0 / 7.0)
}

/// Plug-in `g0` with `A = c mu int (L'')^2` and `B = mu2(L) R(f''')`,
/// `R(f''')` by normal reference. Returns `g0` and whether the IQR scale was used.
pub fn pilot_g0(sample: &Sample, pilot: Kernel) -> Result<(f64, bool)> {
    let stats = weighted_stats(sample);
    let (sigma, fallback) = stats.scale()?;
    let a = stats.c_hat * stats.mu_hat * pilot.second_derivative_roughness()?;
    let b = pilot.mu2() * normal_reference_r_f3(sigma);
    Ok((pilot_g0_from_constants(a, b, sample.len()), fallback))
}

/// `n^(2/35)` times the rule of thumb computed with `kernel`.
pub fn pilot_g1(sample: &Sample, kernel: Kernel) -> Result<(f64, bool)> {
    let (h, fallback) = rt_from_stats(&weighted_stats(sample), sample.len(), kernel)?;
    Ok(((sample.len() as f64).powf(2.0 / 35.0) * h, fallback))
}

/// `h^4 mu2(K)^2 R(f_g'') / 4 + R(K) mu c / (n h)`.
pub fn amise_star(sample: &Sample, h: f64, kernel: Kernel, g: f64, pilot: Kernel) -> Result<f64> {
    let stats = weighted_stats(sample);
    let r = curvature_functional(sample, g, pilot)?;
    Ok(0.25 * h.powi(4) * kernel.mu2().powi(2) * r
        + kernel.roughness() * stats.mu_hat * stats.c_hat / (sample.len() as f64 * h))
}

/// Closed-form minimiser of [`amise_star`].
pub fn h_amise_star(sample: &Sample, kernel: Kernel, g: f64, pilot: Kernel) -> Result<f64> {
    let r = curvature_functional(sample, g, pilot)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::DegenerateCurvature { g });
    }
    let stats = weighted_stats(sample);
    Ok((kernel.roughness() * stats.mu_hat * stats.c_hat
        / (sample.len() as f64 * kernel.mu2().powi(2) * r))
        .powf(0.2))
}

/// Bootstrap bandwidth from the closed-form AMISE*, with no resampling.
///
/// The bootstrap estimator is built with the pilot kernel, so both the
/// curvature estimate and the bandwidth constants are those of `pilot`.
pub fn h_boot_plugin(sample: &Sample, pilot: Kernel, rule: PilotRule) -> Result<BandwidthResult> {
    let (g, fallback) = match rule {
        PilotRule::G0 => pilot_g0(sample, pilot)?,
        PilotRule::GRt => pilot_g1(sample, pilot)?,
    };
    let h = h_amise_star(sample, pilot, g, pilot)?;
    let method = match rule {
        PilotRule::G0 => Method::Bopt,
        PilotRule::GRt => Method::BRt,
    };
    let mut r = BandwidthResult::new(h, method);
    r.pilot_g = Some(g);
    if fallback {
        r.flags.insert(Flag::DegenerateSigmaFallback);
    }
    Ok(r)
}

/// `(gamma(y) R(K) / (n f''(y)^2 mu2(K)^2))^(1/5)`.
pub fn local_h_amse(gamma_y: f64, f2_y: f64, n: usize, kernel: Kernel) -> Result<f64> {
    if f2_y == 0.0 {
        return Err(Error::InflectionPoint);
    }
    Ok((gamma_y * kernel.roughness() / (n as f64 * f2_y * f2_y * kernel.mu2().powi(2))).powf(0.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DensityModel;
    use crate::numerics::minimize_scalar;
    use crate::seed::rng_for;

    #[test]
    fn g0_minimises_pilot_amse() {
        let (a, b, n) = (0.7, 3.2, 150);
        let g0 = pilot_g0_from_constants(a, b, n);
        let amse = |g: f64| (a / (n as f64 * g.powi(5)) + b * g * g).powi(2);
        let m = minimize_scalar(amse, (g0 / 10.0, g0 * 10.0), 400, 1e-10).unwrap();
        assert!((m.argmin / g0 - 1.0).abs() < 1e-6);
        assert!((pilot_g0_from_constants(a, b / 2.0, n) / g0 - 2f64.powf(1.0 / 7.0)).abs() < 1e-14);
        assert!((pilot_g0_from_constants(a, b, 128 * n) / g0 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn g1_factor() {
        let s = Sample::new((1..=100).map(|i| 0.1 + i as f64 / 100.0).collect()).unwrap();
        let (g, _) = pilot_g1(&s, Kernel::Gaussian).unwrap();
        let h = super::super::h_rt(&s, Kernel::Gaussian).unwrap().h;
        assert!((g / h - 100f64.powf(2.0 / 35.0)).abs() < 1e-12);
        assert!((100f64.powf(2.0 / 35.0) - 1.301).abs() < 1e-3);
    }

    #[test]
    fn tight_cluster_uses_atom_curvature() {
        let s = Sample::new(vec![1.0, 1.0 + 1e-9, 1.0 - 1e-9, 1.0 + 2e-9]).unwrap();
        let g = 0.3;
        let h = h_amise_star(&s, Kernel::Epanechnikov, g, Kernel::Gaussian).unwrap();
        let stats = weighted_stats(&s);
        let atom = 3.0 / (8.0 * std::f64::consts::PI.sqrt());
        let expected = (0.6 * stats.mu_hat * stats.c_hat * g.powi(5) / (4.0 * 0.04 * atom)).powf(0.2);
        assert!((h / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn plugin_selectors_are_deterministic_and_positive() {
        let s = DensityModel::get(1)
            .unwrap()
            .sample_length_biased(100, &mut rng_for(2, &[]))
            .unwrap();
        for rule in [PilotRule::G0, PilotRule::GRt] {
            let a = h_boot_plugin(&s, Kernel::Gaussian, rule).unwrap();
            let b = h_boot_plugin(&s, Kernel::Gaussian, rule).unwrap();
            assert_eq!(a, b);
            assert!(a.h > 0.0 && a.pilot_g.unwrap() > 0.0);
        }
        assert!(h_boot_plugin(&s, Kernel::Epanechnikov, PilotRule::G0).is_err());
    }

    #[test]
    fn local_bandwidth() {
        let m = DensityModel::get(1).unwrap();
        let y = 0.5;
        let f = m.pdf(y);
        let f2 = -f / 0.04;
        let gamma = m.constants().mu * f / y;
        let h = local_h_amse(gamma, f2, 100, Kernel::Epanechnikov).unwrap();
        let expected = (gamma * 0.6 / (100.0 * f2 * f2 * 0.04)).powf(0.2);
        assert!((h - expected).abs() < 1e-15);
        let h32 = local_h_amse(32.0 * gamma, f2, 100, Kernel::Epanechnikov).unwrap();
        assert!((h32 / h - 2.0).abs() < 1e-13);
        assert!(matches!(local_h_amse(gamma, 0.0, 100, Kernel::Epanechnikov), Err(Error::InflectionPoint)));
    }
}
