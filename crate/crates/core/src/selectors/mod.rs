//! Bandwidth selectors and their objective functions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{minimize_scalar, Minimum};

mod bootstrap;
mod cv;
mod plugin;
mod rule_of_thumb;

pub use bootstrap::{bose_pilot_g, h_boot_bose, mise_star_quadrature, BiasTarget, MiseStarObjective};
pub use cv::{cv_score, h_cv, leave_one_out_term};
pub use plugin::{
    amise_star, h_amise_star, h_boot_plugin, local_h_amse, pilot_g0, pilot_g0_from_constants,
    pilot_g1, PilotRule,
};
pub use rule_of_thumb::{h_rt, normal_reference_r_f3, rt_from_stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RT")]
    Rt,
    #[serde(rename = "CV")]
    Cv,
    #[serde(rename = "Bopt")]
    Bopt,
    #[serde(rename = "B_RT")]
    BRt,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "AMISE_oracle")]
    AmiseOracle,
    #[serde(rename = "ISE_oracle")]
    IseOracle,
    #[serde(rename = "MISE_oracle")]
    MiseOracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Rt => "RT",
            Method::Cv => "CV",
            Method::Bopt => "Bopt",
            Method::BRt => "B_RT",
            Method::B => "B",
            Method::AmiseOracle => "AMISE_oracle",
            Method::IseOracle => "ISE_oracle",
            Method::MiseOracle => "MISE_oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rt" => Ok(Method::Rt),
            "cv" => Ok(Method::Cv),
            "bopt" => Ok(Method::Bopt),
            "brt" | "b_rt" => Ok(Method::BRt),
            "b" | "boot" => Ok(Method::B),
            other => Err(Error::InvalidArgument(format!("unknown selector '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// The minimiser sat on an end of the scan.
    BoundaryMinimum,
    /// The moment scale estimate was degenerate and the IQR scale was used.
    DegenerateSigmaFallback,
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flag::BoundaryMinimum => "boundary-minimum",
            Flag::DegenerateSigmaFallback => "degenerate-sigma-fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthResult {
    pub h: f64,
    pub method: Method,
    pub objective_curve: Option<Vec<(f64, f64)>>,
    pub pilot_g: Option<f64>,
    pub bracket: Option<(f64, f64)>,
    pub flags: BTreeSet<Flag>,
}

impl BandwidthResult {
    pub fn new(h: f64, method: Method) -> Self {
        BandwidthResult {
            h,
            method,
            objective_curve: None,
            pilot_g: None,
            bracket: None,
            flags: BTreeSet::new(),
        }
    }

    pub(crate) fn from_minimum(min: Minimum, method: Method, bracket: (f64, f64)) -> Self {
        let mut r = BandwidthResult::new(min.argmin, method);
        if min.at_boundary {
            r.flags.insert(Flag::BoundaryMinimum);
        }
        r.objective_curve = Some(min.curve);
        r.bracket = Some(bracket);
        r
    }

    pub fn has_flag(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Scan bracket around the rule of thumb and the minimiser settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BracketPolicy {
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub grid_points: usize,
    pub tol: f64,
}

impl Default for BracketPolicy {
    fn default() -> Self {
        BracketPolicy {
            lo_factor: 0.1,
            hi_factor: 3.0,
            grid_points: 60,
            tol: 1e-4,
        }
    }
}

impl BracketPolicy {
    pub fn bracket(&self, h_rt: f64) -> (f64, f64) {
        (self.lo_factor * h_rt, self.hi_factor * h_rt)
    }

    pub fn minimize<F: FnMut(f64) -> f64>(&self, objective: F, bracket: (f64, f64)) -> Result<Minimum> {
        minimize_scalar(objective, bracket, self.grid_points, self.tol)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo_factor > 0.0 && self.hi_factor > self.lo_factor && self.grid_points >= 3 && self.tol > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid bracket policy {self:?}")))
        }
    }
}
