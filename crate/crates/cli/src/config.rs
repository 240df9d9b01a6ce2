//! Experiment configuration schema.
//!
//! Configs are strict JSON: unknown keys are rejected everywhere and the
//! seed is mandatory. Estimator sections are optional and fall back to the
//! defaults below.

use anyhow::{bail, Context};
use serde::Deserialize;

use hmdim_core::sl2::Sl2Matrix;
use hmdim_core::walk::MeasureSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    pub model: ModelSpec,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub drift: DriftConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub dimension: DimensionConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub continuity: ContinuityConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Free {
        rank: u8,
    },
    Sl2z {
        /// Named generating set, used for the freeness sanity check.
        generators: Vec<Sl2Matrix>,
    },
}

impl ExperimentConfig {
    /// Cross-field validation beyond what serde enforces.
    pub fn validate(&self) -> anyhow::Result<()> {
        match (&self.model, &self.measure) {
            (ModelSpec::Free { rank }, MeasureSpec::Free { .. }) => {
                let group = hmdim_core::free::FreeGroup::new(*rank)
                    .map_err(|e| anyhow::anyhow!(e.to_string()))?;
                let mu = self.measure.free_distribution().map_err(usage)?;
                for (g, _) in mu.atoms() {
                    if !group.contains(g) {
                        bail!("measure atom {g:?} uses generators outside rank {rank}");
                    }
                }
            }
            (ModelSpec::Sl2z { generators }, MeasureSpec::Sl2z { .. }) => {
                if generators.is_empty() {
                    bail!("sl2z model needs at least one named generator");
                }
                self.measure.sl2_distribution().map_err(usage)?;
            }
            _ => bail!("model kind and measure model disagree"),
        }
        self.dimension.radii().context("dimension.radii")?;
        Ok(())
    }
}

fn usage(e: hmdim_core::Error) -> anyhow::Error {
    anyhow::anyhow!(e.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    #[serde(default = "default_drift_horizon")]
    pub horizon: usize,
    #[serde(default = "default_drift_trajectories")]
    pub trajectories: usize,
    /// Caps for the exact table route on free nearest-neighbor models.
    #[serde(default = "default_table_n_max")]
    pub table_n_max: usize,
    #[serde(default = "default_mc_horizon")]
    pub exact_mc_horizon: usize,
    #[serde(default = "default_mc_trajectories")]
    pub exact_mc_trajectories: usize,
}

fn default_drift_horizon() -> usize {
    10_000
}
fn default_drift_trajectories() -> usize {
    1_000
}
fn default_table_n_max() -> usize {
    12
}
fn default_mc_horizon() -> usize {
    10_000
}
fn default_mc_trajectories() -> usize {
    10_000
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            horizon: default_drift_horizon(),
            trajectories: default_drift_trajectories(),
            table_n_max: default_table_n_max(),
            exact_mc_horizon: default_mc_horizon(),
            exact_mc_trajectories: default_mc_trajectories(),
        }
    }
}

impl DriftConfig {
    pub fn exact(&self, seed: u64) -> hmdim_core::oracle::DriftConfig {
        hmdim_core::oracle::DriftConfig {
            table_n_max: self.table_n_max,
            mc_horizon: self.exact_mc_horizon,
            mc_trajectories: self.exact_mc_trajectories,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    #[serde(default = "default_entropy_n_max")]
    pub n_max: usize,
    #[serde(default = "default_shannon_trajectories")]
    pub shannon_trajectories: usize,
    #[serde(default)]
    pub prune_threshold: f64,
    #[serde(default)]
    pub prune_budget: f64,
}

fn default_entropy_n_max() -> usize {
    12
}
fn default_shannon_trajectories() -> usize {
    10_000
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            n_max: default_entropy_n_max(),
            shannon_trajectories: default_shannon_trajectories(),
            prune_threshold: 0.0,
            prune_budget: 0.0,
        }
    }
}

impl EntropyConfig {
    pub fn prune(&self) -> hmdim_core::estimators::PruneConfig {
        hmdim_core::estimators::PruneConfig {
            threshold: self.prune_threshold,
            budget: self.prune_budget,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    #[serde(default = "default_cloud_size")]
    pub cloud_size: usize,
    /// Free model: prefix depth. Sl2z: target hyperbolic depth.
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default = "default_min_proxy_depth")]
    pub min_proxy_depth: f64,
    #[serde(default)]
    pub radii: RadiiSpec,
}

fn default_cloud_size() -> usize {
    100_000
}
fn default_depth() -> f64 {
    40.0
}
fn default_min_proxy_depth() -> f64 {
    hmdim_core::sl2::DEFAULT_MIN_PROXY_DEPTH
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            cloud_size: default_cloud_size(),
            depth: default_depth(),
            min_proxy_depth: default_min_proxy_depth(),
            radii: RadiiSpec::default(),
        }
    }
}

/// Radii grids: `e^{-t}` over a half-step `t` ladder (tree models) or
/// `2^{-j}` chordal (circle), or explicit values.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RadiiSpec {
    Log { t_start: f64, t_end: f64, t_step: f64 },
    Chord { j_start: u32, j_end: u32 },
    Explicit { values: Vec<f64> },
}

impl Default for RadiiSpec {
    fn default() -> Self {
        RadiiSpec::Log { t_start: 3.0, t_end: 8.0, t_step: 0.5 }
    }
}

impl RadiiSpec {
    pub fn chord_default() -> Self {
        RadiiSpec::Chord { j_start: 2, j_end: 11 }
    }
}

impl DimensionConfig {
    pub fn radii(&self) -> anyhow::Result<Vec<f64>> {
        let out = match &self.radii {
            RadiiSpec::Log { t_start, t_end, t_step } => {
                if !(t_step > &0.0) || t_end < t_start {
                    bail!("log radii ladder must increase");
                }
                let mut out = Vec::new();
                let mut t = *t_start;
                while t <= t_end + 1e-9 {
                    out.push((-t).exp());
                    t += t_step;
                }
                out
            }
            RadiiSpec::Chord { j_start, j_end } => {
                if j_end < j_start {
                    bail!("chordal radii ladder must increase");
                }
                (*j_start..=*j_end).map(|j| 2f64.powi(-(j as i32))).collect()
            }
            RadiiSpec::Explicit { values } => values.clone(),
        };
        if out.len() < 10 {
            bail!("radii grid has {} entries; need at least 10", out.len());
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_tracking_eps")]
    pub tracking_epsilon: f64,
    #[serde(default = "default_tracking_horizon")]
    pub tracking_horizon: usize,
    #[serde(default = "default_tracking_trajectories")]
    pub tracking_trajectories: usize,
    #[serde(default = "default_event_eps")]
    pub event_epsilon: f64,
    #[serde(default = "default_event_horizon")]
    pub event_horizon: usize,
    #[serde(default = "default_event_trajectories")]
    pub event_trajectories: usize,
    #[serde(default = "default_shadow_thickness")]
    pub shadow_thickness: f64,
    #[serde(default = "default_shadow_eps")]
    pub shadow_epsilon: f64,
    #[serde(default = "default_shadow_horizon")]
    pub shadow_horizon: usize,
    #[serde(default = "default_shadow_trajectories")]
    pub shadow_trajectories: usize,
    #[serde(default = "default_stationarity_cloud")]
    pub stationarity_cloud_size: usize,
}

fn default_tracking_eps() -> f64 {
    0.2
}
fn default_tracking_horizon() -> usize {
    1_000
}
fn default_tracking_trajectories() -> usize {
    1_000
}
fn default_event_eps() -> f64 {
    0.3
}
fn default_event_horizon() -> usize {
    12
}
fn default_event_trajectories() -> usize {
    10_000
}
fn default_shadow_thickness() -> f64 {
    2.0
}
fn default_shadow_eps() -> f64 {
    0.3
}
fn default_shadow_horizon() -> usize {
    1_000
}
fn default_shadow_trajectories() -> usize {
    1_000
}
fn default_stationarity_cloud() -> usize {
    100_000
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            tracking_epsilon: default_tracking_eps(),
            tracking_horizon: default_tracking_horizon(),
            tracking_trajectories: default_tracking_trajectories(),
            event_epsilon: default_event_eps(),
            event_horizon: default_event_horizon(),
            event_trajectories: default_event_trajectories(),
            shadow_thickness: default_shadow_thickness(),
            shadow_epsilon: default_shadow_eps(),
            shadow_horizon: default_shadow_horizon(),
            shadow_trajectories: default_shadow_trajectories(),
            stationarity_cloud_size: default_stationarity_cloud(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuityConfig {
    #[serde(default = "default_perturbations")]
    pub perturbations: Vec<f64>,
    #[serde(default = "default_continuity_cloud")]
    pub cloud_size: usize,
    #[serde(default = "default_continuity_depth")]
    pub depth: usize,
}

fn default_perturbations() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}
fn default_continuity_cloud() -> usize {
    20_000
}
fn default_continuity_depth() -> usize {
    40
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        ContinuityConfig {
            perturbations: default_perturbations(),
            cloud_size: default_continuity_cloud(),
            depth: default_continuity_depth(),
        }
    }
}
