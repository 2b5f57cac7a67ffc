//! The three commands: layout generation, layout analysis, and protocol
//! simulation. Each returns the process exit code.
//!
//! Exit codes: 0 success / conditions hold, 1 usage or configuration error,
//! 2 layout condition violated (analyze), 3 a checked property failed
//! (simulate), 4 inconclusive because the run never quiesced (simulate).

use crate::config::{ConfigError, RunConfig};
use crate::svg;
use sand_core::deception::{check_range_condition, find_snares_with, SnareReport, SnareSearchConfig};
use sand_core::geometry::{LayoutSpec, RadioParams, Role};
use sand_core::layout_gen::{grid_layout, random_layout};
use sand_core::sim::{check_problem, ProblemReport, SimConfig, WorldState};
use serde::Serialize;
use std::fs;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONDITION_VIOLATED: i32 = 2;
pub const EXIT_PROPERTY_FAILED: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Serialize)]
pub struct AnalysisParameters {
    pub c: f64,
    pub t_r: f64,
    pub r_min: f64,
    pub d_n: f64,
    pub r_min_sep: f64,
    pub r_t: f64,
    pub resolution: f64,
}

#[derive(Debug, Serialize)]
pub struct FocusSummary {
    pub node: usize,
    pub snare_count: usize,
    pub perfect_count: usize,
}

/// The analyze report: every snare found across the requested foci plus the
/// transmission-range verdict. The two conditions are reported separately.
#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub parameters: AnalysisParameters,
    pub range_condition_ok: bool,
    pub snare_free: bool,
    pub foci: Vec<FocusSummary>,
    pub snares: Vec<SnareReport>,
}

pub fn analyze_layout(
    layout: &LayoutSpec,
    resolution: f64,
    max_participants: Option<usize>,
    foci: &[usize],
) -> Result<AnalysisReport, ConfigError> {
    let params = layout.params;
    let focus_indices: Vec<usize> = if foci.is_empty() {
        layout
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.role == Role::Correct)
            .map(|(i, _)| i)
            .collect()
    } else {
        foci.to_vec()
    };
    let search = SnareSearchConfig {
        max_participants: max_participants
            .unwrap_or_else(|| SnareSearchConfig::default().max_participants),
    };
    let mut all = Vec::new();
    let mut summaries = Vec::new();
    for &idx in &focus_indices {
        let node = layout
            .nodes
            .get(idx)
            .ok_or_else(|| ConfigError::Invalid(format!("focus index {idx} out of range")))?;
        if node.role != Role::Correct {
            return Err(ConfigError::Invalid(format!("focus index {idx} is not correct")));
        }
        let reports = find_snares_with(layout, node.position, resolution, &search)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        summaries.push(FocusSummary {
            node: idx,
            snare_count: reports.len(),
            perfect_count: reports
                .iter()
                .filter(|r| r.kind == sand_core::deception::SnareKind::Perfect)
                .count(),
        });
        all.extend(reports);
    }
    Ok(AnalysisReport {
        parameters: AnalysisParameters {
            c: params.c,
            t_r: params.t_r,
            r_min: params.r_min,
            d_n: params.d_n,
            r_min_sep: params.r_min_sep,
            r_t: params.range(),
            resolution,
        },
        range_condition_ok: check_range_condition(&params),
        snare_free: all.is_empty(),
        foci: summaries,
        snares: all,
    })
}

pub fn cmd_analyze(
    config: &RunConfig,
    resolution_override: Option<f64>,
    out_dir: &Path,
    emit_svg: bool,
) -> Result<i32, ConfigError> {
    let layout = config.build_layout()?;
    let resolution = resolution_override.unwrap_or(config.analysis.resolution);
    let report = analyze_layout(
        &layout,
        resolution,
        config.analysis.max_participants,
        &config.analysis.foci,
    )?;
    fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError::Invalid(format!("cannot create {out_dir:?}: {e}")))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(out_dir.join("analysis.json"), json)
        .map_err(|e| ConfigError::Invalid(format!("cannot write report: {e}")))?;
    if emit_svg {
        let drawing = svg::render_layout(&layout, &report.snares);
        fs::write(out_dir.join("layout.svg"), drawing)
            .map_err(|e| ConfigError::Invalid(format!("cannot write svg: {e}")))?;
    }
    if report.range_condition_ok && report.snare_free {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_CONDITION_VIOLATED)
    }
}

#[derive(Debug, Serialize)]
pub struct NodeOutputSummary {
    pub node: usize,
    pub output: Option<Vec<sand_core::geometry::Point>>,
    pub conflicts_recorded: usize,
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub quiesced: bool,
    pub quiescence_epoch: Option<u64>,
    pub final_epoch: u64,
    pub fairness_bound: u64,
    pub max_observed_delay: u64,
    pub outputs: Vec<NodeOutputSummary>,
    pub verdicts: Vec<ProblemReport>,
}

pub fn run_simulation(
    config: &RunConfig,
    seed_override: Option<u64>,
    max_epochs_override: Option<u64>,
) -> Result<(WorldState, SimulationReport, bool), ConfigError> {
    let layout = config.build_layout()?;
    let detectors = config.build_detectors(&layout)?;
    let sim_config = SimConfig {
        fairness_bound: config.fairness_bound,
        universe_cap: sand_core::protocol::DEFAULT_UNIVERSE_CAP,
        seed: seed_override.unwrap_or(config.seed),
    };
    let mut world = WorldState::new(
        layout,
        detectors,
        &config.adversaries,
        config.scheduler.clone(),
        sim_config,
    )
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let max_epochs = max_epochs_override.unwrap_or(config.max_epochs);
    let quiesced = world
        .run_until_quiescent(max_epochs)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let verdicts: Vec<ProblemReport> =
        config.variants.iter().map(|&v| check_problem(&world, v)).collect();
    let outputs = world
        .nodes
        .iter()
        .map(|n| NodeOutputSummary {
            node: n.layout_index,
            output: n
                .state
                .output
                .as_ref()
                .map(|u| u.identities.iter().copied().collect()),
            conflicts_recorded: n.state.conflicts.len(),
        })
        .collect();
    let report = SimulationReport {
        quiesced,
        quiescence_epoch: world.quiescence_epoch,
        final_epoch: world.epoch,
        fairness_bound: world.fairness_bound(),
        max_observed_delay: world.max_observed_delay(),
        outputs,
        verdicts,
    };
    Ok((world, report, quiesced))
}

pub fn cmd_simulate(
    config: &RunConfig,
    seed_override: Option<u64>,
    max_epochs_override: Option<u64>,
    out_dir: &Path,
) -> Result<i32, ConfigError> {
    let (world, report, quiesced) = run_simulation(config, seed_override, max_epochs_override)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError::Invalid(format!("cannot create {out_dir:?}: {e}")))?;
    fs::write(out_dir.join("trace.jsonl"), world.trace_jsonl())
        .map_err(|e| ConfigError::Invalid(format!("cannot write trace: {e}")))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(out_dir.join("verdicts.json"), json)
        .map_err(|e| ConfigError::Invalid(format!("cannot write verdicts: {e}")))?;
    if report.verdicts.iter().any(|r| r.any_fail()) {
        return Ok(EXIT_PROPERTY_FAILED);
    }
    if !quiesced || !report.verdicts.iter().all(|r| r.all_pass()) {
        return Ok(EXIT_INCONCLUSIVE);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone)]
pub enum GeneratorKind {
    Grid { rows: usize, cols: usize, spacing: f64 },
    Random { n: usize, width: f64, height: f64, min_sep: f64 },
}

pub fn cmd_generate(
    kind: &GeneratorKind,
    params: RadioParams,
    seed: u64,
    out_dir: &Path,
) -> Result<i32, ConfigError> {
    let layout = match kind {
        GeneratorKind::Grid { rows, cols, spacing } => grid_layout(*rows, *cols, *spacing, params)?,
        GeneratorKind::Random { n, width, height, min_sep } => {
            random_layout(*n, *width, *height, *min_sep, seed, params)?
        }
    };
    fs::create_dir_all(out_dir)
        .map_err(|e| ConfigError::Invalid(format!("cannot create {out_dir:?}: {e}")))?;
    let json = serde_json::to_string_pretty(&layout).expect("layout serializes");
    fs::write(out_dir.join("layout.json"), json)
        .map_err(|e| ConfigError::Invalid(format!("cannot write layout: {e}")))?;
    Ok(EXIT_OK)
}
