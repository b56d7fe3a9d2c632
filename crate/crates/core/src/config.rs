//! Serializable run configuration for the command-line front end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::canonical_json;
use crate::graph::{waves_families, GraphSpec, Lift, DEFAULT_EPSILON};

/// Square lattice extent used when no graph is given.
pub const DEFAULT_EXTENT: i32 = 140;
/// Extent of the waves preset.
pub const WAVES_EXTENT: i32 = 64;

/// Parameter family for the `params` subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ParamsFamily {
    Square,
    Triangular,
}

/// Everything a run depends on. Two runs with equal configurations write
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSpec,
    /// Elliptic modulus.
    pub k: f64,
    /// Pass threshold; each subcommand has its own default.
    pub tolerance: Option<f64>,
    /// Largest Euclidean distance of the pairs compared by `green`.
    pub max_distance: f64,
    /// Oracle ball radius; derived from the decay rate when absent.
    pub oracle_radius: Option<f64>,
    /// Base vertex; the primal vertex nearest the origin when absent.
    pub x0: Option<Lift>,
    /// Second vertex of the Martin ratio; a neighbor of `x0` when absent.
    pub x1: Option<Lift>,
    /// Lift-space directions for the Martin audit.
    pub directions: Vec<Vec<f64>>,
    /// Embedded ray angles, used when `directions` is empty.
    pub ray_angles: Vec<f64>,
    pub radii: Vec<f64>,
    /// Direction count for `boundary`, oval samples for `amoeba`, random
    /// pairs for `params`.
    pub samples: usize,
    /// Grid size of the exported amoeba points.
    pub resolution: usize,
    /// Moduli swept by `amoeba` and by `params` for the triangular family.
    pub moduli: Vec<f64>,
    pub family: ParamsFamily,
    pub q1: Vec<f64>,
    pub t: Vec<f64>,
    pub order: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            graph: default_spec("square", None).expect("square preset exists"),
            k: 0.5,
            tolerance: None,
            max_distance: 8.0,
            oracle_radius: None,
            x0: None,
            x1: None,
            directions: Vec::new(),
            ray_angles: Vec::new(),
            radii: Vec::new(),
            samples: 0,
            resolution: 64,
            moduli: Vec::new(),
            family: ParamsFamily::Square,
            q1: Vec::new(),
            t: Vec::new(),
            order: 200,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Canonical JSON text; the configuration hash is taken over it.
    pub fn to_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("config serializes"))
    }
}

/// Graph preset by builder name with its default parameters.
pub fn default_spec(builder: &str, extent: Option<i32>) -> Result<GraphSpec> {
    let q = std::f64::consts::FRAC_PI_4;
    Ok(match builder {
        "square" => GraphSpec::Square {
            theta_bar: q,
            extent: extent.unwrap_or(DEFAULT_EXTENT),
            epsilon: DEFAULT_EPSILON,
            flips: Vec::new(),
        },
        "triangular" => GraphSpec::Triangular {
            extent: extent.unwrap_or(DEFAULT_EXTENT),
            epsilon: DEFAULT_EPSILON,
            flips: Vec::new(),
        },
        "alternating" => GraphSpec::Alternating {
            delta: 0.2,
            extent: extent.unwrap_or(DEFAULT_EXTENT),
            epsilon: DEFAULT_EPSILON,
            flips: Vec::new(),
        },
        "waves" => {
            let e = extent.unwrap_or(WAVES_EXTENT);
            GraphSpec::Tracks {
                families: waves_families(-q - 0.35, -q + 0.35, q + 0.1, e),
                extent: e,
                epsilon: DEFAULT_EPSILON,
                primal_parity: 0,
                flips: Vec::new(),
            }
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown builder {other:?}; expected square, triangular, alternating or waves"
            )))
        }
    })
}
