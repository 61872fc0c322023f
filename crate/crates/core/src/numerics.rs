//! Quadrature, scalar minimisation and tabulated inverse-CDF sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform evaluation grid on `[lo, hi]`.
///
/// Odd point counts (`2^k + 1` in particular) integrate with plain composite
/// Simpson; even counts fall back to Simpson plus a 3/8 end panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 9;

    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        if points < Self::MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} points, got {points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Grid { lo, hi, points })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.x(i))
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.lo <= lo && self.hi >= hi
    }

    pub fn map<F: FnMut(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.iter().map(f).collect()
    }
}

/// Composite Simpson integral of `values` sampled on `grid`.
pub fn integrate(values: &[f64], grid: &Grid) -> f64 {
    assert_eq!(values.len(), grid.len(), "values must match the grid");
    simpson_uniform(values, grid.step())
}

/// Composite Simpson on uniformly spaced samples; any length >= 4 works.
pub fn simpson_uniform(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    assert!(n >= 4, "need at least four samples");
    let intervals = n - 1;
    if intervals % 2 == 0 {
        simpson_even(values) * step
    } else {
        // Simpson on the leading even block, Simpson 3/8 on the last three intervals.
        let head = &values[..n - 3];
        let tail = &values[n - 4..];
        let three_eighths = 3.0 / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3]);
        let head_sum = if head.len() >= 3 { simpson_even(head) } else { 0.0 };
        (head_sum + three_eighths) * step
    }
}

/// Node weights `w` such that `simpson_uniform(v, step) == step * sum w_i v_i`.
pub fn simpson_weights(n: usize) -> Vec<f64> {
    assert!(n >= 4, "need at least four samples");
    let mut w = vec![0.0; n];
    let even_block = if (n - 1) % 2 == 0 { n } else { n - 3 };
    if even_block >= 3 {
        for (i, wi) in w.iter_mut().enumerate().take(even_block) {
            *wi = if i == 0 || i + 1 == even_block {
                1.0 / 3.0
            } else if i % 2 == 1 {
                4.0 / 3.0
            } else {
                2.0 / 3.0
            };
        }
    }
    if even_block != n {
        for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[n - 4 + k] += 3.0 / 8.0 * c;
        }
    }
    w
}

fn simpson_even(values: &[f64]) -> f64 {
    let n = values.len();
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even) / 3.0
}

/// Adaptive Simpson quadrature with an absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // Stop once the refinement is below rounding noise.
        let noise = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if depth == 0 || delta.abs() <= (15.0 * tol).max(noise) {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }

    if a == b {
        return 0.0;
    }
    // Start from a few panels so narrow features are not skipped by the first estimate.
    const PANELS: usize = 16;
    let width = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let lo = a + k as f64 * width;
            let hi = if k + 1 == PANELS { b } else { lo + width };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            recurse(&f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 48)
        })
        .sum()
}

/// Outcome of [`minimize_scalar`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub argmin: f64,
    pub value: f64,
    /// The scanned `(h, objective)` pairs in increasing `h`.
    pub curve: Vec<(f64, f64)>,
    /// The best scan point was the first or last one.
    pub at_boundary: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Log-spaced scan of `[lo, hi]` followed by golden-section refinement around
/// the best scan point.
///
/// Ties on the scan resolve to the smallest `h`; the refined point replaces
/// the scan point only when it is strictly better.
pub fn minimize_scalar<F>(
    mut objective: F,
    bracket: (f64, f64),
    grid_points: usize,
    tol: f64,
) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "minimisation bracket must be positive and increasing, got [{lo}, {hi}]"
        )));
    }
    if grid_points < 3 || !(tol > 0.0) {
        return Err(Error::InvalidArgument(
            "minimisation needs at least 3 scan points and tol > 0".into(),
        ));
    }

    let mut eval = |h: f64| -> Result<f64> {
        let v = objective(h);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteObjective { h, value: v })
        }
    };

    let ratio = (hi / lo).ln() / (grid_points - 1) as f64;
    let mut curve = Vec::with_capacity(grid_points);
    for k in 0..grid_points {
        let h = if k + 1 == grid_points {
            hi
        } else {
            lo * (ratio * k as f64).exp()
        };
        curve.push((h, eval(h)?));
    }

    let mut best = 0;
    for (k, &(_, v)) in curve.iter().enumerate() {
        if v < curve[best].1 {
            best = k;
        }
    }
    let at_boundary = best == 0 || best + 1 == grid_points;

    let mut a = curve[best.saturating_sub(1)].0;
    let mut b = curve[(best + 1).min(grid_points - 1)].0;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut iterations = 0;
    while (b - a) > tol * 0.5 * (a + b) && iterations < 200 {
        // `<=` keeps the lower sub-interval on ties.
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        iterations += 1;
    }
    let (refined, refined_value) = if fc <= fd { (c, fc) } else { (d, fd) };

    let (argmin, value) = if refined_value < curve[best].1 {
        (refined, refined_value)
    } else {
        curve[best]
    };
    Ok(Minimum {
        argmin,
        value,
        curve,
        at_boundary,
    })
}

/// Piecewise-linear CDF tabulated from a density on `[lo, hi]`; inverting it
/// samples a piecewise-constant approximation of the density.
#[derive(Debug, Clone)]
pub struct CdfTable {
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    mass: f64,
}

impl CdfTable {
    /// Tabulates `density` over `cells` equal cells. Cell masses use Simpson's
    /// rule with the midpoint, so `2 * cells + 1` density evaluations occur.
    pub fn from_density<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(lo < hi) || cells == 0 {
            return Err(Error::InvalidArgument(format!(
                "cdf table needs lo < hi and cells > 0, got [{lo}, {hi}] with {cells}"
            )));
        }
        let dx = (hi - lo) / cells as f64;
        let mut nodes = Vec::with_capacity(cells + 1);
        let mut cumulative = Vec::with_capacity(cells + 1);
        let mut running = 0.0;
        let mut f_left = density(lo).max(0.0);
        nodes.push(lo);
        cumulative.push(0.0);
        for i in 0..cells {
            let left = lo + i as f64 * dx;
            let right = if i + 1 == cells { hi } else { left + dx };
            let f_mid = density(0.5 * (left + right)).max(0.0);
            let f_right = density(right).max(0.0);
            running += (right - left) / 6.0 * (f_left + 4.0 * f_mid + f_right);
            nodes.push(right);
            cumulative.push(running);
            f_left = f_right;
        }
        if !(running > 0.0 && running.is_finite()) {
            return Err(Error::InvalidArgument(
                "density has no positive finite mass on the table range".into(),
            ));
        }
        for c in cumulative.iter_mut() {
            *c /= running;
        }
        Ok(CdfTable {
            nodes,
            cumulative,
            mass: running,
        })
    }

    /// Unnormalised mass of the tabulated density.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo() {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let i = self.nodes.partition_point(|&t| t <= x) - 1;
        let t = (x - self.nodes[i]) / (self.nodes[i + 1] - self.nodes[i]);
        self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i])
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        // First node whose cumulative mass reaches u; zero-mass cells are skipped.
        let j = self.cumulative.partition_point(|&c| c < u).clamp(1, self.nodes.len() - 1);
        let (c0, c1) = (self.cumulative[j - 1], self.cumulative[j]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.nodes[j - 1] + t * (self.nodes[j] - self.nodes[j - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_weights_reproduce_rule() {
        for n in 4..40 {
            let v: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 * 0.1 + 0.3).collect();
            let w = simpson_weights(n);
            let dot: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((dot * 0.01 - simpson_uniform(&v, 0.01)).abs() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid::new(1.0, 0.0, 33).is_err());
        assert!(Grid::new(0.0, 1.0, 8).is_err());
        let g = Grid::new(0.0, 1.0, 9).unwrap();
        assert_eq!(g.x(8), 1.0);
        assert_eq!(g.step(), 0.125);
    }

    #[test]
    fn integrates_constant() {
        let g = Grid::new(0.0, 1.0, 9).unwrap();
        assert!((integrate(&g.map(|_| 1.0), &g) - 1.0).abs() < 1e-15);
        let g = Grid::new(0.0, 1.0, 10).unwrap();
        assert!((integrate(&g.map(|_| 1.0), &g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrates_sine() {
        let g = Grid::new(0.0, PI, 513).unwrap();
        assert!((integrate(&g.map(f64::sin), &g) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn integrates_gaussian_mass() {
        let g = Grid::new(-8.0, 8.0, 1025).unwrap();
        let v = g.map(|x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt());
        assert!((integrate(&v, &g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn even_point_counts_stay_fourth_order() {
        let f = |x: f64| x.exp();
        let exact = 1f64.exp() - 1.0;
        let g = Grid::new(0.0, 1.0, 512).unwrap();
        assert!((integrate(&g.map(f), &g) - exact).abs() < 1e-12);
    }

    #[test]
    fn simpson_error_decays_at_fourth_order() {
        let exact = 1.0 - (-3.0f64).exp();
        let err = |points: usize| {
            let g = Grid::new(0.0, 3.0, points).unwrap();
            (integrate(&g.map(|x| (-x).exp()), &g) - exact).abs()
        };
        let coarse = err(17);
        let fine = err(33);
        let ratio = coarse / fine;
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn adaptive_simpson_is_accurate() {
        let v = adaptive_simpson(|x| x.sin(), 0.0, PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(|x| 1.0 / x, 1e-4, 1.0, 1e-12);
        assert!((v - 1e4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn minimises_parabola() {
        let m = minimize_scalar(|h| (h - 2.0).powi(2), (0.1, 10.0), 60, 1e-6).unwrap();
        assert!((m.argmin - 2.0).abs() < 1e-5);
        assert!(!m.at_boundary);
        assert_eq!(m.curve.len(), 60);
        assert_eq!(m.curve[0].0, 0.1);
        assert_eq!(m.curve[59].0, 10.0);
    }

    #[test]
    fn monotone_objective_flags_upper_boundary() {
        let m = minimize_scalar(|h| -h, (0.1, 10.0), 60, 1e-4).unwrap();
        assert!(m.at_boundary);
        assert_eq!(m.argmin, 10.0);
    }

    #[test]
    fn equal_minima_resolve_to_smaller_h() {
        let m = minimize_scalar(|h| ((h - 1.0) * (h - 4.0)).powi(2), (1.0, 4.0), 31, 1e-4).unwrap();
        assert_eq!(m.argmin, 1.0);
        let flat = minimize_scalar(|_| 3.0, (0.5, 2.0), 20, 1e-4).unwrap();
        assert_eq!(flat.argmin, 0.5);
    }

    #[test]
    fn non_finite_objective_names_h() {
        let err = minimize_scalar(|h| if h > 1.0 { f64::NAN } else { h }, (0.5, 2.0), 10, 1e-4)
            .unwrap_err();
        match err {
            Error::NonFiniteObjective { h, .. } => assert!(h > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimisation_is_deterministic() {
        let f = |h: f64| (h.ln() - 0.3).powi(2) + 0.01 * (7.0 * h).sin();
        let a = minimize_scalar(f, (0.2, 5.0), 40, 1e-4).unwrap();
        let b = minimize_scalar(f, (0.2, 5.0), 40, 1e-4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cdf_table_inverts() {
        let t = CdfTable::from_density(|x| 2.0 * x, 0.0, 1.0, 1024).unwrap();
        assert!((t.mass() - 1.0).abs() < 1e-12);
        for &u in &[0.01, 0.25, 0.5, 0.9] {
            let q = t.quantile(u);
            assert!((q - u.sqrt()).abs() < 1e-3, "u={u} q={q}");
            assert!((t.cdf(q) - u).abs() < 1e-12);
        }
        assert!(t.cumulative().windows(2).all(|w| w[1] > w[0]));
    }
}
