use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{JonesEstimator, Sample};
use crate::kernels::Kernel;
use crate::numerics::{simpson_uniform, simpson_weights};
use crate::resampling::CommonPilotWorld;

use super::{h_rt, BandwidthResult, BracketPolicy, Method};

/// Lattice cells per smallest bandwidth in the quadrature.
const CELLS_PER_BANDWIDTH: f64 = 16.0;

/// What the bootstrap expectation is compared against in the squared bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasTarget {
    /// The debiased pilot density of the bootstrap world.
    #[default]
    Debiased,
    /// The estimate on the original sample at the candidate bandwidth.
    Literal,
}

/// `(1/8) n^(-1/(2p + 2s + 1))` for kernel orders `p` and `s`.
pub fn bose_pilot_g(n: usize, p: u32, s: u32) -> f64 {
    0.125 * (n as f64).powf(-1.0 / (2 * p + 2 * s + 1) as f64)
}

/// Bootstrap MISE of the weighted estimator under the common-KDE scheme,
/// evaluated by quadrature on a lattice anchored at the pilot floor.
///
/// With `q1 = f~ / w`, `q2 = f~ / w^2` and `xi = int q1`:
/// `m(y) = E*(y) = (K_h * q1)(y) / xi`. The variance linearises the ratio
/// estimator, so the random normalising constant is accounted for:
/// `Var*(y) = ((K_h^2 * q2) - 2 m (K_h * q2) + m^2 int q2) / (n xi^2)`.
#[derive(Debug, Clone)]
pub struct MiseStarObjective {
    world: CommonPilotWorld,
    sample: Sample,
    kernel: Kernel,
    target: BiasTarget,
    dz: f64,
    /// `q1` times the Simpson node weight and `dz`, on the lattice.
    q1_weighted: Vec<f64>,
    /// Same for `q2`.
    q2_weighted: Vec<f64>,
    q1: Vec<f64>,
    int_q2: f64,
    xi: f64,
}

impl MiseStarObjective {
    /// `h_min` is the smallest bandwidth that will be evaluated; it sets the
    /// lattice spacing.
    pub fn new(
        sample: &Sample,
        kernel: Kernel,
        pilot: Kernel,
        g: f64,
        h_min: f64,
        target: BiasTarget,
    ) -> Result<Self> {
        if !(h_min > 0.0 && h_min.is_finite()) {
            return Err(Error::InvalidArgument(format!("h_min must be positive, got {h_min}")));
        }
        let world = CommonPilotWorld::new(sample, g, pilot)?;
        let weight = sample.weight();
        let span = world.top() - world.floor();
        let cells = ((span * CELLS_PER_BANDWIDTH / h_min.min(g)).ceil() as usize).max(8);
        let dz = span / cells as f64;
        let z = |j: usize| world.floor() + j as f64 * dz;
        let q1: Vec<f64> = (0..=cells).map(|j| world.pdf(z(j)) / weight.eval(z(j))).collect();
        let q2: Vec<f64> = (0..=cells).map(|j| q1[j] / weight.eval(z(j))).collect();
        let xi = simpson_uniform(&q1, dz);
        let int_q2 = simpson_uniform(&q2, dz);
        let nodes = simpson_weights(cells + 1);
        let q1_weighted = nodes.iter().zip(&q1).map(|(w, q)| w * dz * q).collect();
        let q2_weighted = nodes.iter().zip(&q2).map(|(w, q)| w * dz * q).collect();
        Ok(MiseStarObjective {
            world,
            sample: sample.clone(),
            kernel,
            target,
            dz,
            q1_weighted,
            q2_weighted,
            q1,
            int_q2,
            xi,
        })
    }

    pub fn pilot_g(&self) -> f64 {
        self.world.pilot_g()
    }

    pub fn world(&self) -> &CommonPilotWorld {
        &self.world
    }

    fn kernel_row(&self, h: f64) -> (usize, Vec<f64>) {
        let reach = self.kernel.effective_radius() * h;
        let ext = (reach / self.dz).ceil() as usize;
        let row = (0..=ext).map(|d| self.kernel.eval(d as f64 * self.dz / h) / h).collect();
        (ext, row)
    }

    /// `(K_h * q)` for node-weighted `q` on the lattice extended by the
    /// kernel reach; entry `k` sits at `floor + (k - ext) dz`.
    fn convolution(&self, row: &[f64], weighted: &[f64]) -> Vec<f64> {
        let ext = row.len() - 1;
        let mut out = vec![0.0; weighted.len() + 2 * ext];
        for (j, &a) in weighted.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let centre = j + ext;
            out[centre] += a * row[0];
            for d in 1..=ext {
                let r = row[d] * a;
                out[centre - d] += r;
                out[centre + d] += r;
            }
        }
        out
    }

    /// Bootstrap MISE at bandwidth `h`.
    pub fn eval(&self, h: f64) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
        }
        let (ext, row) = self.kernel_row(h);
        let conv = self.convolution(&row, &self.q1_weighted);
        let conv2 = self.convolution(&row, &self.q2_weighted);
        let xi = self.xi;
        let m = self.q1.len();
        let floor = self.world.floor();

        let bias = match self.target {
            BiasTarget::Debiased => {
                // The target jumps at the floor node, so integrate each side separately.
                let below: Vec<f64> = conv[..=ext].iter().map(|c| (c / xi).powi(2)).collect();
                let above: Vec<f64> = conv[ext..]
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let t = if k < m { self.q1[k] / xi } else { 0.0 };
                        (c / xi - t).powi(2)
                    })
                    .collect();
                simpson_uniform(&below, self.dz) + simpson_uniform(&above, self.dz)
            }
            BiasTarget::Literal => {
                let est = JonesEstimator::new(&self.sample, h, self.kernel)?;
                let sq: Vec<f64> = conv
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let y = floor + (k as f64 - ext as f64) * self.dz;
                        (c / xi - est.eval(y)).powi(2)
                    })
                    .collect();
                simpson_uniform(&sq, self.dz)
            }
        };

        let cross: Vec<f64> = conv
            .iter()
            .zip(&conv2)
            .map(|(c, c2)| {
                let mean = c / xi;
                mean * mean * self.int_q2 - 2.0 * mean * c2
            })
            .collect();
        let n = self.sample.len() as f64;
        let var = (self.kernel.roughness() * self.int_q2 / h + simpson_uniform(&cross, self.dz))
            / (n * xi * xi);
        Ok(bias + var.max(0.0))
    }

    /// Bootstrap mean and variance of the estimate at a single point `y`.
    pub fn pointwise(&self, h: f64, y: f64) -> (f64, f64) {
        let floor = self.world.floor();
        let mut first = 0.0;
        let mut first2 = 0.0;
        let mut second = 0.0;
        let weights = simpson_weights(self.q1.len());
        let weight = self.sample.weight();
        for (j, (&q, w)) in self.q1.iter().zip(&weights).enumerate() {
            let z = floor + j as f64 * self.dz;
            let k = self.kernel.eval((y - z) / h) / h;
            let q2 = q / weight.eval(z);
            first += w * self.dz * k * q;
            first2 += w * self.dz * k * q2;
            second += w * self.dz * k * k * q2;
        }
        let n = self.sample.len() as f64;
        let mean = first / self.xi;
        let var = (second - 2.0 * mean * first2 + mean * mean * self.int_q2) / (n * self.xi * self.xi);
        (mean, var)
    }
}

/// Bootstrap MISE at `h` with pilot bandwidth `g`.
pub fn mise_star_quadrature(
    sample: &Sample,
    h: f64,
    kernel: Kernel,
    pilot: Kernel,
    g: f64,
    target: BiasTarget,
) -> Result<f64> {
    MiseStarObjective::new(sample, kernel, pilot, g, h, target)?.eval(h)
}

/// Minimises the bootstrap MISE over `bracket` (default: `policy` around the
/// rule of thumb) with the fixed pilot `(1/8) n^(-1/9)`.
pub fn h_boot_bose(
    sample: &Sample,
    kernel: Kernel,
    pilot: Kernel,
    bracket: Option<(f64, f64)>,
    target: BiasTarget,
    policy: &BracketPolicy,
) -> Result<BandwidthResult> {
    let bracket = match bracket {
        Some(b) => b,
        None => policy.bracket(h_rt(sample, kernel)?.h),
    };
    let g = bose_pilot_g(sample.len(), kernel.order(), pilot.order());
    let objective = MiseStarObjective::new(sample, kernel, pilot, g, bracket.0, target)?;
    let min = policy.minimize(|h| objective.eval(h).unwrap_or(f64::NAN), bracket)?;
    let mut r = BandwidthResult::from_minimum(min, Method::B, bracket);
    r.pilot_g = Some(g);
    Ok(r)
}
