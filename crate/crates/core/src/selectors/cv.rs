use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::kernels::Kernel;

use super::{h_rt, BandwidthResult, BracketPolicy, Method};

struct Sorted {
    y: Vec<f64>,
    v: Vec<f64>,
}

fn sorted(sample: &Sample) -> Sorted {
    let w = sample.weight();
    let mut pairs: Vec<(f64, f64)> = sample.values().iter().map(|&y| (y, 1.0 / w.eval(y))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (y, v) = pairs.into_iter().unzip();
    Sorted { y, v }
}

/// `mu_hat n^-1 sum_i f_{-i}(Y_i) / w(Y_i)`, the estimate of `int f_h f`.
///
/// `f_{-i}(Y_i) = (sum_{j != i} v_j)^-1 sum_{j != i} v_j K_h(Y_i - Y_j)` with
/// `v_j = 1 / w(Y_j)`.
pub fn leave_one_out_term(sample: &Sample, h: f64, kernel: Kernel) -> Result<f64> {
    check(sample, h)?;
    let Sorted { y, v } = sorted(sample);
    Ok(loo(&y, &v, h, kernel))
}

fn loo(y: &[f64], v: &[f64], h: f64, kernel: Kernel) -> f64 {
    let n = y.len();
    let total_v: f64 = v.iter().sum();
    let mu_hat = n as f64 / total_v;
    let reach = kernel.effective_radius() * h;
    let mut row = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = y[j] - y[i];
            if d > reach {
                break;
            }
            let k = kernel.eval(d / h);
            row[i] += v[j] * k;
            row[j] += v[i] * k;
        }
    }
    let mut sum = 0.0;
    for i in 0..n {
        let f_minus_i = row[i] / (h * (total_v - v[i]));
        sum += v[i] * f_minus_i;
    }
    mu_hat * sum / n as f64
}

/// `int f_h^2 - 2 mu_hat n^-1 sum_i f_{-i}(Y_i) / w(Y_i)`, with the first
/// term as the exact double sum over the kernel self-convolution.
pub fn cv_score(sample: &Sample, h: f64, kernel: Kernel) -> Result<f64> {
    check(sample, h)?;
    let Sorted { y, v } = sorted(sample);
    Ok(score_sorted(&y, &v, h, kernel))
}

fn score_sorted(y: &[f64], v: &[f64], h: f64, kernel: Kernel) -> f64 {
    let n = y.len();
    let mu_hat = n as f64 / v.iter().sum::<f64>();
    let reach = 2.0 * kernel.effective_radius() * h;
    let diag: f64 = v.iter().map(|x| x * x).sum::<f64>() * kernel.self_convolution(0.0);
    let mut off = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in (i + 1)..n {
            let d = y[j] - y[i];
            if d > reach {
                break;
            }
            acc += v[j] * kernel.self_convolution(d / h);
        }
        off += v[i] * acc;
    }
    let square = mu_hat * mu_hat * (diag + 2.0 * off) / (n as f64 * n as f64 * h);
    square - 2.0 * loo(y, v, h, kernel)
}

fn check(sample: &Sample, h: f64) -> Result<()> {
    if sample.len() < 3 {
        return Err(Error::InvalidSample(format!(
            "cross-validation needs at least 3 observations, got {}",
            sample.len()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

/// Minimises [`cv_score`] over `bracket`, by default `policy` around the rule of thumb.
pub fn h_cv(
    sample: &Sample,
    kernel: Kernel,
    bracket: Option<(f64, f64)>,
    policy: &BracketPolicy,
) -> Result<BandwidthResult> {
    let bracket = match bracket {
        Some(b) => b,
        None => policy.bracket(h_rt(sample, kernel)?.h),
    };
    check(sample, bracket.0)?;
    let Sorted { y, v } = sorted(sample);
    let min = policy.minimize(|h| score_sorted(&y, &v, h, kernel), bracket)?;
    Ok(BandwidthResult::from_minimum(min, Method::Cv, bracket))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{jones_estimate, Weight};
    use crate::numerics::{integrate, Grid};

    #[test]
    fn three_point_hand_expansion() {
        let y = [1.0, 2.0, 3.0];
        let s = Sample::new(y.to_vec()).unwrap();
        let h = 10.0;
        let k = Kernel::Epanechnikov;
        let mu = 3.0 / (1.0 + 0.5 + 1.0 / 3.0);
        let mut square = 0.0;
        for a in y {
            for b in y {
                square += k.self_convolution((a - b) / h) / (a * b);
            }
        }
        square *= mu * mu / (9.0 * h);
        let mut loo = 0.0;
        for i in 0..3 {
            let (mut num, mut den) = (0.0, 0.0);
            for j in 0..3 {
                if i != j {
                    num += k.eval((y[i] - y[j]) / h) / h / y[j];
                    den += 1.0 / y[j];
                }
            }
            loo += num / den / y[i];
        }
        let expected = square - 2.0 * mu * loo / 3.0;
        assert!((cv_score(&s, h, k).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn unit_weight_matches_classical_lscv() {
        let y = [0.2, 0.5, 0.9, 1.0, 1.6, 2.2];
        let s = Sample::with_weight(y.to_vec(), Weight::Unit).unwrap();
        let h = 0.4;
        let k = Kernel::Gaussian;
        let n = y.len() as f64;
        let mut square = 0.0;
        let mut loo = 0.0;
        for a in y {
            for b in y {
                square += k.self_convolution((a - b) / h);
                if a != b {
                    loo += k.eval((a - b) / h) / h;
                }
            }
        }
        let classical = square / (n * n * h) - 2.0 * loo / (n * (n - 1.0));
        assert!((cv_score(&s, h, k).unwrap() - classical).abs() < 1e-14);
    }

    #[test]
    fn first_term_is_integral_of_square() {
        let s = Sample::new(vec![0.3, 0.35, 0.6, 0.8, 1.2, 1.25, 1.9]).unwrap();
        for k in [Kernel::Epanechnikov, Kernel::Gaussian] {
            let h = 0.2;
            let grid = Grid::new(0.3 - 8.0 * h, 1.9 + 8.0 * h, 16385).unwrap();
            let est = jones_estimate(&s, h, k, &grid).unwrap();
            let sq: Vec<f64> = est.values.iter().map(|v| v * v).collect();
            let direct = integrate(&sq, &grid) - 2.0 * leave_one_out_term(&s, h, k).unwrap();
            assert!((cv_score(&s, h, k).unwrap() - direct).abs() < 1e-6);
        }
    }

    #[test]
    fn needs_three_points() {
        let s = Sample::new(vec![1.0, 2.0]).unwrap();
        assert!(cv_score(&s, 0.5, Kernel::Gaussian).is_err());
    }
}
