//! The six benchmark densities on `(0, inf)`, their derivatives, population
//! constants and length-biased samplers.
//!
//! Normal mixtures are truncated to `[1e-4, 1 + 4 sigma_max]` and gamma models
//! to `[1e-4, q]` with `q` the `1 - 1e-8` quantile, then renormalised.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::kernels::{std_normal_cdf, std_normal_pdf, Kernel};
use crate::numerics::{adaptive_simpson, CdfTable};

pub const LOWER_CUTOFF: f64 = 1e-4;
const GAMMA_TAIL: f64 = 1e-8;
pub const SAMPLER_CELLS: usize = 1 << 14;
pub const CONSTANTS_TOL: f64 = 1e-10;

static CONSTANTS_JSON: &str = include_str!("../data/model_constants.json");

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component {
    Normal { mean: f64, sd: f64 },
    /// `Gamma(shape, rate)` applied to `scale * x`.
    Gamma { shape: f64, rate: f64, scale: f64 },
}

impl Component {
    fn pdf_deriv(&self, x: f64, order: u32) -> f64 {
        match *self {
            Component::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                let he = match order {
                    0 => 1.0,
                    1 => -z,
                    2 => z * z - 1.0,
                    _ => -(z * z * z - 3.0 * z),
                };
                he * std_normal_pdf(z) / sd.powi(order as i32 + 1)
            }
            Component::Gamma { shape, rate, scale } => {
                let t = scale * x;
                if t <= 0.0 {
                    return 0.0;
                }
                let log_p = shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * t.ln() - rate * t;
                let p = scale * log_p.exp();
                let a1 = shape - 1.0;
                let u = a1 / t - rate;
                let du = -a1 / (t * t);
                let ddu = 2.0 * a1 / (t * t * t);
                let q = match order {
                    0 => 1.0,
                    1 => u,
                    2 => u * u + du,
                    _ => u * u * u + 3.0 * u * du + ddu,
                };
                p * q * scale.powi(order as i32)
            }
        }
    }

    /// `int_lo^hi x^k f_j(x) dx` for `k` in `{-1, 0, 1}`.
    fn partial_moment(&self, k: i32, lo: f64, hi: f64) -> f64 {
        match *self {
            Component::Normal { mean, sd } => {
                let (za, zb) = ((lo - mean) / sd, (hi - mean) / sd);
                let mass = std_normal_cdf(zb) - std_normal_cdf(za);
                match k {
                    0 => mass,
                    1 => mean * mass - sd * (std_normal_pdf(zb) - std_normal_pdf(za)),
                    _ => unreachable!("no closed form for inverse moments of a normal"),
                }
            }
            Component::Gamma { shape, rate, scale } => {
                let (ta, tb) = (rate * scale * lo, rate * scale * hi);
                let reg = |a: f64| gamma_lr(a, tb) - gamma_lr(a, ta);
                match k {
                    0 => reg(shape),
                    1 => shape / rate / scale * reg(shape + 1.0),
                    _ => scale * rate / (shape - 1.0) * reg(shape - 1.0),
                }
            }
        }
    }

    fn spread(&self) -> f64 {
        match *self {
            Component::Normal { sd, .. } => sd,
            Component::Gamma { shape, rate, scale } => shape.sqrt() / rate / scale,
        }
    }

    fn centre(&self) -> f64 {
        match *self {
            Component::Normal { mean, .. } => mean,
            Component::Gamma { shape, rate, scale } => shape / rate / scale,
        }
    }
}

/// Population constants on the truncated support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    /// `int y f`
    pub mu: f64,
    /// `int f / y`
    pub c: f64,
    /// `int (f'')^2`
    pub r_f2: f64,
    /// `int (f''')^2`
    pub r_f3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: u32,
    pub description: String,
    pub support: (f64, f64),
    /// Mass of the untruncated mixture lost outside the support.
    pub truncation_mass: f64,
    #[serde(flatten)]
    pub constants: ModelConstants,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsFile {
    #[serde(rename = "_provenance")]
    pub provenance: String,
    pub models: Vec<ModelRecord>,
}

#[derive(Debug)]
pub struct DensityModel {
    id: u32,
    description: &'static str,
    components: Vec<Component>,
    numerators: Vec<u32>,
    denominator: u32,
    lo: f64,
    hi: f64,
    /// Mass of the untruncated mixture inside `[lo, hi]`.
    inside: f64,
    constants: OnceLock<ModelConstants>,
    sampler: OnceLock<CdfTable>,
}

fn normals(params: &[(f64, f64)]) -> Vec<Component> {
    params.iter().map(|&(mean, sd)| Component::Normal { mean, sd }).collect()
}

fn gammas(rates: &[f64], scale: f64) -> Vec<Component> {
    rates
        .iter()
        .map(|&b| Component::Gamma { shape: b * b, rate: b, scale })
        .collect()
}

impl DensityModel {
    fn build(
        id: u32,
        description: &'static str,
        components: Vec<Component>,
        numerators: Vec<u32>,
        denominator: u32,
    ) -> Self {
        assert_eq!(numerators.iter().sum::<u32>(), denominator);
        let mut m = DensityModel {
            id,
            description,
            components,
            numerators,
            denominator,
            lo: LOWER_CUTOFF,
            hi: f64::INFINITY,
            inside: 1.0,
            constants: OnceLock::new(),
            sampler: OnceLock::new(),
        };
        m.hi = match m.components[0] {
            Component::Normal { .. } => {
                let max_sd = m.components.iter().map(Component::spread).fold(0.0, f64::max);
                1.0 + 4.0 * max_sd
            }
            Component::Gamma { .. } => m.gamma_upper_quantile(),
        };
        m.inside = m.raw_moment(0, m.lo, m.hi);
        m
    }

    fn gamma_upper_quantile(&self) -> f64 {
        let tail = |x: f64| -> f64 {
            self.weighted(|c| match *c {
                Component::Gamma { shape, rate, scale } => gamma_ur(shape, rate * scale * x),
                Component::Normal { .. } => unreachable!(),
            })
        };
        let mut hi = 1.0;
        while tail(hi) > GAMMA_TAIL {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) > GAMMA_TAIL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn weighted<F: Fn(&Component) -> f64>(&self, f: F) -> f64 {
        self.components
            .iter()
            .zip(&self.numerators)
            .map(|(c, &w)| w as f64 * f(c))
            .sum::<f64>()
            / self.denominator as f64
    }

    fn raw_moment(&self, k: i32, lo: f64, hi: f64) -> f64 {
        self.weighted(|c| c.partial_moment(k, lo, hi))
    }

    /// Model `id` in 1..=6.
    pub fn get(id: u32) -> Result<&'static DensityModel> {
        if (1..=6).contains(&id) {
            Ok(&Self::all()[id as usize - 1])
        } else {
            Err(Error::UnknownModel(id))
        }
    }

    pub fn all() -> &'static [DensityModel] {
        static MODELS: OnceLock<Vec<DensityModel>> = OnceLock::new();
        MODELS.get_or_init(|| {
            let s = 3.0 / 40.0;
            vec![
                Self::build(1, "N(0.5, 0.2^2)", normals(&[(0.5, 0.2)]), vec![1], 1),
                Self::build(
                    2,
                    "trimodal normal mixture",
                    normals(&[(0.25, 0.075), (0.5, 0.075), (0.75, 0.075)]),
                    vec![1, 1, 1],
                    3,
                ),
                Self::build(3, "Gamma(2.25, 1.5) on 5x", gammas(&[1.5], 5.0), vec![1], 1),
                Self::build(
                    4,
                    "gamma mixture on 8x",
                    gammas(&[1.5, 3.0, 6.0], 8.0),
                    vec![1, 1, 1],
                    3,
                ),
                Self::build(
                    5,
                    "bimodal normal mixture with a sharp centre spike",
                    normals(&[(0.3, s), (0.7, s), (0.5, 1.0 / 32.0)]),
                    vec![9, 9, 2],
                    20,
                ),
                Self::build(
                    6,
                    "normal with five narrow bumps",
                    normals(&[
                        (0.5, 0.125),
                        (1.0 / 3.0, 1.0 / 80.0),
                        (5.0 / 12.0, 1.0 / 80.0),
                        (0.5, 1.0 / 80.0),
                        (7.0 / 12.0, 1.0 / 80.0),
                        (2.0 / 3.0, 1.0 / 80.0),
                    ]),
                    vec![10, 2, 2, 2, 2, 2],
                    20,
                ),
            ]
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn description(&self) -> &'static str {
        self.description
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Mixture weights as `(numerators, denominator)`.
    pub fn weights(&self) -> (&[u32], u32) {
        (&self.numerators, self.denominator)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn truncation_mass(&self) -> f64 {
        1.0 - self.inside
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.pdf_deriv_unchecked(y, 0)
    }

    /// Derivative of order 0..=3 of the truncated density; zero off the support.
    pub fn pdf_deriv(&self, y: f64, order: u32) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidArgument(format!(
                "derivative order must be at most 3, got {order}"
            )));
        }
        Ok(self.pdf_deriv_unchecked(y, order))
    }

    fn pdf_deriv_unchecked(&self, y: f64, order: u32) -> f64 {
        if !(y >= self.lo && y <= self.hi) {
            return 0.0;
        }
        self.weighted(|c| c.pdf_deriv(y, order)) / self.inside
    }

    /// `mu f(y) / y`.
    pub fn gamma(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        self.constants().mu * self.pdf(y) / y
    }

    /// `y f(y) / mu`.
    pub fn length_biased_pdf(&self, y: f64) -> f64 {
        y * self.pdf(y) / self.constants().mu
    }

    /// Closed-form cdf of the truncated density.
    pub fn cdf(&self, y: f64) -> f64 {
        let y = y.clamp(self.lo, self.hi);
        (self.raw_moment(0, self.lo, y) / self.inside).clamp(0.0, 1.0)
    }

    /// Closed-form cdf of the length-biased density `y f(y) / mu`.
    pub fn length_biased_cdf(&self, y: f64) -> f64 {
        let y = y.clamp(self.lo, self.hi);
        (self.raw_moment(1, self.lo, y) / self.raw_moment(1, self.lo, self.hi)).clamp(0.0, 1.0)
    }

    /// Population constants, read from the generated constants file.
    pub fn constants(&self) -> ModelConstants {
        *self.constants.get_or_init(|| {
            let file: ConstantsFile =
                serde_json::from_str(CONSTANTS_JSON).expect("bundled model constants parse");
            file.models
                .iter()
                .find(|r| r.id == self.id)
                .map(|r| r.constants)
                .unwrap_or_else(|| compute_constants(self))
        })
    }

    pub fn record(&self) -> ModelRecord {
        ModelRecord {
            id: self.id,
            description: self.description.to_string(),
            support: self.support(),
            truncation_mass: self.truncation_mass(),
            constants: self.constants(),
        }
    }

    fn sampler(&self) -> &CdfTable {
        self.sampler.get_or_init(|| {
            CdfTable::from_density(|y| y * self.pdf(y), self.lo, self.hi, SAMPLER_CELLS)
                .expect("model density has positive mass")
        })
    }

    /// `n` draws from `y f(y) / mu` by inverting the tabulated cdf.
    pub fn sample_length_biased<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Sample> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("sample size must be at least 2, got {n}")));
        }
        let table = self.sampler();
        let values = (0..n)
            .map(|_| table.quantile(rng.random::<f64>()).clamp(self.lo, self.hi))
            .collect();
        Sample::new(values)
    }

    /// `(R(K) mu c / (n mu2(K)^2 R(f'')))^(1/5)`.
    pub fn h_amise_oracle(&self, n: usize, kernel: Kernel) -> f64 {
        let k = self.constants();
        (kernel.roughness() * k.mu * k.c / (n as f64 * kernel.mu2().powi(2) * k.r_f2)).powf(0.2)
    }

    /// `AMISE(h) = h^4 mu2^2 R(f'') / 4 + R(K) mu c / (n h)`.
    pub fn amise(&self, h: f64, n: usize, kernel: Kernel) -> f64 {
        let k = self.constants();
        0.25 * h.powi(4) * kernel.mu2().powi(2) * k.r_f2
            + kernel.roughness() * k.mu * k.c / (n as f64 * h)
    }

    /// Integration breakpoints: support ends and component centres +- a few spreads.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.lo, self.hi];
        for c in &self.components {
            for k in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
                let x = c.centre() + k * c.spread();
                if x > self.lo && x < self.hi {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Adaptive Simpson between consecutive breakpoints, to `tol` relative to a
/// coarse first pass.
fn piecewise<F: Fn(f64) -> f64>(f: F, pts: &[f64], tol: f64) -> f64 {
    let rough: f64 = pts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-3).abs()).sum();
    let abs_tol = tol * rough.max(f64::MIN_POSITIVE) / (pts.len() - 1) as f64;
    pts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], abs_tol)).sum()
}

/// Recomputes the constants of `model` by adaptive Simpson quadrature
/// (relative tolerance [`CONSTANTS_TOL`]).
/// `c` is integrated in `log y`, which removes the `1/y` growth near the cutoff.
pub fn compute_constants(model: &DensityModel) -> ModelConstants {
    let pts = model.breakpoints();
    let tol = CONSTANTS_TOL;
    let f = |y: f64| model.pdf_deriv_unchecked(y, 0);
    let mu = piecewise(|y| y * f(y), &pts, tol);
    let log_pts: Vec<f64> = pts.iter().map(|y| y.ln()).collect();
    let c = piecewise(|u| f(u.exp()), &log_pts, tol);
    let r_f2 = piecewise(|y| model.pdf_deriv_unchecked(y, 2).powi(2), &pts, tol);
    let r_f3 = piecewise(|y| model.pdf_deriv_unchecked(y, 3).powi(2), &pts, tol);
    ModelConstants { mu, c, r_f2, r_f3 }
}

/// Constants file contents; `recompute` bypasses the bundled values.
pub fn constants_file(recompute: bool) -> ConstantsFile {
    let models = DensityModel::all()
        .iter()
        .map(|m| {
            let mut r = m.record();
            if recompute {
                r.constants = compute_constants(m);
            }
            r
        })
        .collect();
    ConstantsFile {
        provenance: format!(
            "generated by `lbkde constants --recompute`; adaptive Simpson, relative tol {CONSTANTS_TOL:e}, \
             lower cutoff {LOWER_CUTOFF:e}; c integrated in log y"
        ),
        models,
    }
}
