//! Smooth-bootstrap resampling and Monte Carlo bootstrap error criteria.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{JonesEstimator, Sample, Weight};
use crate::kernels::Kernel;
use crate::numerics::{integrate, simpson_uniform, CdfTable, Grid};
use crate::seed::rng_for;

/// Cells of the inverse-cdf table used by the Jones pilot scheme.
pub const JONES_PILOT_CELLS: usize = 1 << 14;
/// Attempts per value before a rejection loop gives up.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Draw from `w(y) f_g(y) / mu_hat`, the observed-scale version of the
    /// weighted estimate.
    JonesPilot,
    /// Draw from an ordinary kernel estimate of the observed data.
    CommonKdePilot,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::JonesPilot => "jones-pilot",
            SchemeKind::CommonKdePilot => "common-kde-pilot",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jones-pilot" | "jones" => Ok(SchemeKind::JonesPilot),
            "common-kde-pilot" | "common" => Ok(SchemeKind::CommonKdePilot),
            other => Err(Error::InvalidArgument(format!("unknown bootstrap scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapScheme {
    pub kind: SchemeKind,
    pub pilot_g: f64,
    pub pilot_kernel: Kernel,
}

impl BootstrapScheme {
    pub fn new(kind: SchemeKind, pilot_g: f64, pilot_kernel: Kernel) -> Result<Self> {
        if !(pilot_g > 0.0 && pilot_g.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "pilot bandwidth must be positive and finite, got {pilot_g}"
            )));
        }
        Ok(BootstrapScheme {
            kind,
            pilot_g,
            pilot_kernel,
        })
    }
}

/// The bootstrap world of the common-KDE scheme.
///
/// The pilot `f~(z) = n^-1 sum L_g(z - Y_i)` is restricted to `z >= floor`
/// with `floor = min(Y) / 2` and renormalised, so that `int f~ / w(z)^2` is
/// finite. The bias target is the debiased density
/// `f+(y) = (f~(y) / w(y)) / int f~(z) / w(z) dz`.
#[derive(Debug, Clone)]
pub struct CommonPilotWorld {
    points: Vec<f64>,
    g: f64,
    kernel: Kernel,
    weight: Weight,
    floor: f64,
    mass: f64,
    top: f64,
    xi_bar: f64,
}

impl CommonPilotWorld {
    pub fn new(sample: &Sample, g: f64, kernel: Kernel) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidArgument(format!("pilot bandwidth must be positive, got {g}")));
        }
        let mut points = sample.values().to_vec();
        points.sort_by(f64::total_cmp);
        let floor = 0.5 * points[0];
        let n = points.len() as f64;
        let mass = points.iter().map(|y| 1.0 - kernel.cdf((floor - y) / g)).sum::<f64>() / n;
        let top = points[points.len() - 1] + kernel.effective_radius() * g;
        let mut world = CommonPilotWorld {
            points,
            g,
            kernel,
            weight: sample.weight(),
            floor,
            mass,
            top,
            xi_bar: 1.0,
        };
        let cells = 1 << 14;
        let step = (top - floor) / cells as f64;
        let q1: Vec<f64> = (0..=cells)
            .map(|j| {
                let z = if j == cells { top } else { floor + j as f64 * step };
                world.pdf(z) / world.weight.eval(z)
            })
            .collect();
        world.xi_bar = simpson_uniform(&q1, step);
        Ok(world)
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Upper end of the effective support.
    pub fn top(&self) -> f64 {
        self.top
    }

    pub fn pilot_g(&self) -> f64 {
        self.g
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    /// `int_floor f~(z) / w(z) dz`.
    pub fn xi_bar(&self) -> f64 {
        self.xi_bar
    }

    /// Truncated and renormalised pilot density.
    pub fn pdf(&self, z: f64) -> f64 {
        if z < self.floor {
            return 0.0;
        }
        let reach = self.kernel.effective_radius() * self.g;
        let start = self.points.partition_point(|&x| x < z - reach);
        let end = self.points.partition_point(|&x| x <= z + reach);
        let sum: f64 = self.points[start..end]
            .iter()
            .map(|x| self.kernel.eval((z - x) / self.g))
            .sum();
        sum / (self.g * self.points.len() as f64 * self.mass)
    }

    /// Density playing the role of the unobserved `f` in this world.
    pub fn debiased_target(&self, y: f64) -> f64 {
        if y < self.floor {
            return 0.0;
        }
        self.pdf(y) / self.weight.eval(y) / self.xi_bar
    }
}

#[derive(Debug, Clone)]
enum Source {
    Table(CdfTable),
    Mixture {
        points: Vec<f64>,
        g: f64,
        kernel: Kernel,
        floor: f64,
    },
}

/// Draws bootstrap samples of the original size under one scheme.
#[derive(Debug, Clone)]
pub struct Resampler {
    n: usize,
    weight: Weight,
    source: Source,
}

impl Resampler {
    pub fn new(sample: &Sample, scheme: &BootstrapScheme) -> Result<Self> {
        let g = scheme.pilot_g;
        let kernel = scheme.pilot_kernel;
        let weight = sample.weight();
        let source = match scheme.kind {
            SchemeKind::JonesPilot => {
                let est = JonesEstimator::new(sample, g, kernel)?;
                let mu = sample.mu_hat();
                let reach = kernel.effective_radius() * g;
                let lo = (sample.min() - reach).max(0.0);
                let hi = sample.max() + reach;
                let density = |y: f64| {
                    if y > 0.0 {
                        weight.eval(y) * est.eval(y) / mu
                    } else {
                        0.0
                    }
                };
                Source::Table(CdfTable::from_density(density, lo, hi, JONES_PILOT_CELLS)?)
            }
            SchemeKind::CommonKdePilot => Source::Mixture {
                points: sample.values().to_vec(),
                g,
                kernel,
                floor: 0.5 * sample.min(),
            },
        };
        Ok(Resampler {
            n: sample.len(),
            weight,
            source,
        })
    }

    fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        for _ in 0..MAX_ATTEMPTS {
            let (y, floor) = match &self.source {
                Source::Table(table) => (table.quantile(rng.random::<f64>()), 0.0),
                Source::Mixture {
                    points,
                    g,
                    kernel,
                    floor,
                } => {
                    let i = rng.random_range(0..points.len());
                    (points[i] + g * kernel.sample_noise(rng), *floor)
                }
            };
            if y > 0.0 && y >= floor {
                return Ok(y);
            }
        }
        Err(Error::RejectionLimit {
            attempts: MAX_ATTEMPTS,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        let values = (0..self.n).map(|_| self.draw_one(rng)).collect::<Result<Vec<_>>>()?;
        Sample::with_weight(values, self.weight)
    }

    /// `b` replicates; replicate `k` uses the stream `path ++ [k]` below `master`.
    pub fn draw_replicates(&self, b: usize, master: u64, path: &[u64]) -> Result<Vec<Sample>> {
        let mut key = path.to_vec();
        key.push(0);
        (0..b)
            .map(|k| {
                *key.last_mut().unwrap() = k as u64;
                self.draw(&mut rng_for(master, &key))
            })
            .collect()
    }
}

/// One bootstrap sample under `scheme`.
pub fn resample<R: Rng + ?Sized>(sample: &Sample, scheme: &BootstrapScheme, rng: &mut R) -> Result<Sample> {
    Resampler::new(sample, scheme)?.draw(rng)
}

/// What the bootstrap estimates are compared against.
#[derive(Debug, Clone, PartialEq)]
pub enum MiseTarget {
    /// The density of the bootstrap world: `f_g` for the Jones pilot, the
    /// debiased common pilot for the common-KDE scheme.
    SchemeTruth,
    /// The estimate on the original sample at the candidate bandwidth.
    CandidateEstimate,
    /// Explicit values on the evaluation grid.
    Values(Vec<f64>),
}

/// `int (f*_h - target)^2` for one bootstrap replicate.
pub fn replicate_ise(replicate: &Sample, h: f64, kernel: Kernel, target: &[f64], grid: &Grid) -> Result<f64> {
    if target.len() != grid.len() {
        return Err(Error::InvalidArgument("target values must match the grid".into()));
    }
    let est = JonesEstimator::new(replicate, h, kernel)?;
    let sq: Vec<f64> = grid
        .iter()
        .zip(target)
        .map(|(y, t)| (est.eval(y) - t).powi(2))
        .collect();
    Ok(integrate(&sq, grid).max(0.0))
}

fn scheme_truth(sample: &Sample, scheme: &BootstrapScheme, grid: &Grid) -> Result<Vec<f64>> {
    Ok(match scheme.kind {
        SchemeKind::JonesPilot => {
            JonesEstimator::new(sample, scheme.pilot_g, scheme.pilot_kernel)?.eval_grid(grid)
        }
        SchemeKind::CommonKdePilot => {
            let world = CommonPilotWorld::new(sample, scheme.pilot_g, scheme.pilot_kernel)?;
            grid.map(|y| world.debiased_target(y))
        }
    })
}

/// Monte Carlo bootstrap MISE with the replicates drawn once, so that the
/// criterion can be evaluated at many bandwidths on common random numbers.
#[derive(Debug, Clone)]
pub struct McMiseStar {
    sample: Sample,
    replicates: Vec<Sample>,
    kernel: Kernel,
    grid: Grid,
    target: MiseTarget,
    fixed: Option<Vec<f64>>,
}

impl McMiseStar {
    pub fn new<R: Rng + ?Sized>(
        sample: &Sample,
        scheme: &BootstrapScheme,
        kernel: Kernel,
        b: usize,
        grid: &Grid,
        target: MiseTarget,
        rng: &mut R,
    ) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidArgument("need at least one bootstrap replicate".into()));
        }
        let resampler = Resampler::new(sample, scheme)?;
        let replicates = (0..b).map(|_| resampler.draw(rng)).collect::<Result<Vec<_>>>()?;
        Self::from_replicates(sample, replicates, kernel, grid, target, Some(scheme))
    }

    /// Uses caller-supplied replicates. `SchemeTruth` needs the scheme.
    pub fn from_replicates(
        sample: &Sample,
        replicates: Vec<Sample>,
        kernel: Kernel,
        grid: &Grid,
        target: MiseTarget,
        scheme: Option<&BootstrapScheme>,
    ) -> Result<Self> {
        let fixed = match &target {
            MiseTarget::SchemeTruth => {
                let scheme = scheme.ok_or_else(|| {
                    Error::InvalidArgument("scheme truth target needs a scheme".into())
                })?;
                Some(scheme_truth(sample, scheme, grid)?)
            }
            MiseTarget::Values(v) => {
                if v.len() != grid.len() {
                    return Err(Error::InvalidArgument("target values must match the grid".into()));
                }
                Some(v.clone())
            }
            MiseTarget::CandidateEstimate => None,
        };
        Ok(McMiseStar {
            sample: sample.clone(),
            replicates,
            kernel,
            grid: *grid,
            target,
            fixed,
        })
    }

    pub fn replicates(&self) -> &[Sample] {
        &self.replicates
    }

    pub fn target(&self) -> &MiseTarget {
        &self.target
    }

    pub fn eval(&self, h: f64) -> Result<f64> {
        let candidate;
        let target = match &self.fixed {
            Some(v) => v,
            None => {
                candidate = JonesEstimator::new(&self.sample, h, self.kernel)?.eval_grid(&self.grid);
                &candidate
            }
        };
        let mut total = 0.0;
        for rep in &self.replicates {
            total += replicate_ise(rep, h, self.kernel, target, &self.grid)?;
        }
        Ok(total / self.replicates.len() as f64)
    }
}

/// `B^-1 sum_b int (f*_{h,b} - target)^2` over `b` fresh replicates.
#[allow(clippy::too_many_arguments)]
pub fn mc_mise_star<R: Rng + ?Sized>(
    sample: &Sample,
    h: f64,
    scheme: &BootstrapScheme,
    kernel: Kernel,
    b: usize,
    grid: &Grid,
    target: MiseTarget,
    rng: &mut R,
) -> Result<f64> {
    McMiseStar::new(sample, scheme, kernel, b, grid, target, rng)?.eval(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::default_grid;
    use crate::models::DensityModel;

    fn model1(n: usize, seed: u64) -> Sample {
        DensityModel::get(1)
            .unwrap()
            .sample_length_biased(n, &mut rng_for(seed, &[0]))
            .unwrap()
    }

    #[test]
    fn tiny_pilot_reproduces_the_data() {
        let s = Sample::new(vec![0.4, 0.9, 1.3]).unwrap();
        let scheme = BootstrapScheme::new(SchemeKind::CommonKdePilot, 1e-12, Kernel::Gaussian).unwrap();
        let r = resample(&s, &scheme, &mut rng_for(1, &[])).unwrap();
        for y in r.values() {
            assert!(s.values().iter().any(|x| (x - y).abs() < 1e-9));
        }
    }

    #[test]
    fn jones_pilot_components_have_equal_mass_at_small_g() {
        let s = Sample::new(vec![1.0, 2.0]).unwrap();
        let scheme = BootstrapScheme::new(SchemeKind::JonesPilot, 0.01, Kernel::Gaussian).unwrap();
        let r = Resampler::new(&s, &scheme).unwrap();
        let Source::Table(table) = &r.source else { unreachable!() };
        assert!((table.cdf(1.5) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn jones_pilot_inverse_moment() {
        let s = model1(100, 4);
        let scheme = BootstrapScheme::new(SchemeKind::JonesPilot, 0.08, Kernel::Gaussian).unwrap();
        let r = Resampler::new(&s, &scheme).unwrap();
        let mut rng = rng_for(5, &[]);
        let mut total = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            total += r.draw(&mut rng).unwrap().values().iter().map(|y| 1.0 / y).sum::<f64>();
        }
        let mean = total / (draws * 100) as f64;
        assert!((mean * s.mu_hat() - 1.0).abs() < 0.02, "{mean} vs {}", 1.0 / s.mu_hat());
    }

    #[test]
    fn common_pilot_mean_matches_sample_mean() {
        let s = model1(200, 6);
        let scheme = BootstrapScheme::new(SchemeKind::CommonKdePilot, 0.05, Kernel::Gaussian).unwrap();
        let r = Resampler::new(&s, &scheme).unwrap();
        let mut rng = rng_for(7, &[]);
        let mut draws = Vec::new();
        while draws.len() < 100_000 {
            draws.extend_from_slice(r.draw(&mut rng).unwrap().values());
        }
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd = (draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let target = s.values().iter().sum::<f64>() / s.len() as f64;
        assert!((mean - target).abs() < 3.0 * sd / n.sqrt(), "{mean} vs {target}");
        assert!(draws.iter().all(|&y| y >= 0.5 * s.min()));
    }

    #[test]
    fn replicates_are_reproducible() {
        let s = model1(50, 8);
        let scheme = BootstrapScheme::new(SchemeKind::JonesPilot, 0.1, Kernel::Gaussian).unwrap();
        let r = Resampler::new(&s, &scheme).unwrap();
        let a = r.draw_replicates(3, 11, &[2]).unwrap();
        let b = r.draw_replicates(3, 11, &[2]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(a.iter().all(|x| x.values().iter().all(|&y| y > 0.0)));
    }

    #[test]
    fn world_pdf_has_unit_mass_and_target_integrates() {
        let s = model1(80, 9);
        let world = CommonPilotWorld::new(&s, 0.07, Kernel::Gaussian).unwrap();
        let grid = Grid::new(world.floor(), world.top(), 8193).unwrap();
        let mass = integrate(&grid.map(|z| world.pdf(z)), &grid);
        assert!((mass - 1.0).abs() < 1e-6);
        let target = integrate(&grid.map(|z| world.debiased_target(z)), &grid);
        assert!((target - 1.0).abs() < 1e-4);
    }

    #[test]
    fn forced_replicate_gives_zero() {
        let s = model1(60, 10);
        let g = 0.1;
        let grid = default_grid(&s, g, Kernel::Gaussian, 513).unwrap();
        let mc = McMiseStar::from_replicates(
            &s,
            vec![s.clone()],
            Kernel::Gaussian,
            &grid,
            MiseTarget::CandidateEstimate,
            None,
        )
        .unwrap();
        assert_eq!(mc.eval(g).unwrap(), 0.0);
    }

    #[test]
    fn mc_mise_is_nonnegative() {
        let s = model1(40, 12);
        let scheme = BootstrapScheme::new(SchemeKind::CommonKdePilot, 0.08, Kernel::Gaussian).unwrap();
        let grid = Grid::new(0.0, 2.0, 257).unwrap();
        for target in [MiseTarget::SchemeTruth, MiseTarget::CandidateEstimate] {
            let v = mc_mise_star(&s, 0.1, &scheme, Kernel::Epanechnikov, 5, &grid, target, &mut rng_for(1, &[]))
                .unwrap();
            assert!(v >= 0.0 && v.is_finite());
        }
    }
}
