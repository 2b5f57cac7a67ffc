//! Run configuration: schema-validated JSON describing the layout, radio
//! parameters, faulty designations, adversary strategies, detector choice,
//! scheduler policy and outputs. Unknown keys are rejected.

use sand_core::adversary::AdversaryStrategy;
use sand_core::detector::{
    OracleDetector, QuiescenceDetector, TopologyDetector, TopologyFamily, TrustedSetDetector,
    UniverseDetector,
};
use sand_core::geometry::{LayoutSpec, NodeSpec, Point, RadioParams, Role};
use sand_core::layout_gen::{grid_layout, mark_faulty, random_layout};
use sand_core::sim::{ProblemVariant, SchedulerPolicy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] sand_core::geometry::GeometryError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LayoutSource {
    Grid { rows: usize, cols: usize, spacing: f64 },
    Random { n: usize, width: f64, height: f64, min_sep: f64, seed: u64 },
    Inline { nodes: Vec<NodeSpec> },
}

/// Radio parameters; either `t_r` or the derived `r_t` must be given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub t_r: Option<f64>,
    #[serde(default)]
    pub r_t: Option<f64>,
    #[serde(default)]
    pub r_min: Option<f64>,
    pub d_n: f64,
    #[serde(default)]
    pub r_min_sep: Option<f64>,
}

impl ParamsConfig {
    pub fn resolve(&self) -> Result<RadioParams, ConfigError> {
        let c = self.c.unwrap_or(1.0);
        let r_min = self.r_min.unwrap_or(1.0);
        let t_r = match (self.t_r, self.r_t) {
            (Some(t), None) => t,
            (None, Some(r)) => r * r * r_min / c,
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("give either t_r or r_t, not both".into()))
            }
            (None, None) => {
                return Err(ConfigError::Invalid("one of t_r or r_t is required".into()))
            }
        };
        let params = RadioParams {
            c,
            t_r,
            r_min,
            d_n: self.d_n,
            r_min_sep: self.r_min_sep.unwrap_or(1e-6 * self.d_n),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum TrustedMode {
    /// Each node trusts its full correct neighborhood (surveyed deployment).
    #[default]
    AllCorrectNeighbors,
    /// Explicit per-node trusted sets, keyed by layout index.
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyFamilyConfig {
    Grid { spacing: f64, origin_x: f64, origin_y: f64 },
    /// Surveyed site map taken from the layout itself.
    SiteMapLayout,
    SiteMapExplicit { sites: Vec<Point> },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorConfig {
    None,
    #[default]
    Oracle,
    Quiescence {
        #[serde(default)]
        window: Option<u64>,
    },
    Trusted {
        #[serde(default)]
        mode: TrustedMode,
        /// Per-node trusted sets, keyed by layout index.
        #[serde(default)]
        sets: BTreeMap<String, Vec<Point>>,
    },
    Topology {
        family: TopologyFamilyConfig,
    },
}

fn default_max_epochs() -> u64 {
    1_000_000
}

fn default_resolution() -> f64 {
    0.01
}

fn default_variants() -> Vec<ProblemVariant> {
    vec![ProblemVariant::Sndp]
}

fn default_scheduler() -> SchedulerPolicy {
    SchedulerPolicy::RoundRobin
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub max_participants: Option<usize>,
    /// Layout indices to analyze; every correct node when empty.
    #[serde(default)]
    pub foci: Vec<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { resolution: default_resolution(), max_participants: None, foci: vec![] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub layout: LayoutSource,
    pub params: ParamsConfig,
    /// Layout indices turned faulty (in addition to inline roles).
    #[serde(default)]
    pub faulty: Vec<usize>,
    #[serde(default)]
    pub adversaries: Vec<AdversaryStrategy>,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerPolicy,
    #[serde(default)]
    pub fairness_bound: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: u64,
    #[serde(default = "default_variants")]
    pub variants: Vec<ProblemVariant>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build_layout(&self) -> Result<LayoutSpec, ConfigError> {
        let params = self.params.resolve()?;
        let mut layout = match &self.layout {
            LayoutSource::Grid { rows, cols, spacing } => {
                grid_layout(*rows, *cols, *spacing, params)?
            }
            LayoutSource::Random { n, width, height, min_sep, seed } => {
                random_layout(*n, *width, *height, *min_sep, *seed, params)?
            }
            LayoutSource::Inline { nodes } => LayoutSpec::new(nodes.clone(), params)?,
        };
        mark_faulty(&mut layout, &self.faulty)?;
        Ok(layout)
    }

    /// One detector per correct node, in layout order.
    pub fn build_detectors(
        &self,
        layout: &LayoutSpec,
    ) -> Result<Vec<Option<Box<dyn UniverseDetector>>>, ConfigError> {
        let fairness = self
            .fairness_bound
            .unwrap_or(4 * layout.nodes.len().max(1) as u64);
        let mut out: Vec<Option<Box<dyn UniverseDetector>>> = Vec::new();
        for (idx, n) in layout.nodes.iter().enumerate() {
            if n.role != Role::Correct {
                continue;
            }
            let det: Option<Box<dyn UniverseDetector>> = match &self.detector {
                DetectorConfig::None => None,
                DetectorConfig::Oracle => Some(Box::new(OracleDetector::new(
                    layout.correct_neighbors(n.position),
                ))),
                DetectorConfig::Quiescence { window } => Some(Box::new(QuiescenceDetector {
                    window: window.unwrap_or(fairness + 1),
                })),
                DetectorConfig::Trusted { mode, sets } => {
                    let trusted: Vec<Point> = match mode {
                        TrustedMode::AllCorrectNeighbors => {
                            layout.correct_neighbors(n.position)
                        }
                        TrustedMode::Explicit => {
                            sets.get(&idx.to_string()).cloned().unwrap_or_default()
                        }
                    };
                    if trusted.is_empty() {
                        return Err(ConfigError::Invalid(format!(
                            "node {idx} has an empty trusted set"
                        )));
                    }
                    for t in &trusted {
                        if t.distance(n.position) > layout.params.d_n {
                            return Err(ConfigError::Invalid(format!(
                                "trusted identity {t} is outside node {idx}'s neighborhood"
                            )));
                        }
                    }
                    Some(Box::new(TrustedSetDetector {
                        trusted: trusted.into_iter().collect(),
                    }))
                }
                DetectorConfig::Topology { family } => {
                    let family = match family {
                        TopologyFamilyConfig::Grid { spacing, origin_x, origin_y } => {
                            TopologyFamily::Grid {
                                spacing: *spacing,
                                origin: Point::new(*origin_x, *origin_y),
                            }
                        }
                        TopologyFamilyConfig::SiteMapLayout => TopologyFamily::SiteMap {
                            sites: layout.correct_positions(),
                            d_n: layout.params.d_n,
                        },
                        TopologyFamilyConfig::SiteMapExplicit { sites } => {
                            TopologyFamily::SiteMap {
                                sites: sites.clone(),
                                d_n: layout.params.d_n,
                            }
                        }
                    };
                    Some(Box::new(TopologyDetector { family }))
                }
            };
            out.push(det);
        }
        Ok(out)
    }
}
