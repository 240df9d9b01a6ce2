//! Experiment orchestration: wires configs into the core estimators and
//! writes deterministic artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};

use hmdim_core::estimators::{
    self, continuity_experiment, drift_mc, entropy_shannon_mc, entropy_subadditive,
    event_a_profile, local_dimension_report, sample_circle_cloud, sample_free_cloud,
    shadow_hit_diagnostic, stationarity_test, tracking_diagnostic, upper_bound_check,
    BoundaryCloud, ContinuityRow, EstimateWithError, LocalDimReport, PruneConfig,
    ShadowHitMode, Sl2Model,
};
use hmdim_core::free::FreeGroup;
use hmdim_core::oracle::{
    solve_first_passage, solve_stationary_markov, DriftResult, NearestNeighborMeasure,
};
use hmdim_core::sl2::verify_free_up_to;
use hmdim_core::Error as CoreError;

use crate::config::{ExperimentConfig, ModelSpec};
use crate::output;
use crate::{Kind, RunArgs};

pub enum Outcome {
    Clean,
    ChecksFailed(Vec<String>),
}

/// Systematic allowance (relative) for comparing a finite-scale dimension
/// estimate against h/l; covers proxy depth and staircase effects.
const DIM_SYSTEMATIC: f64 = 0.05;
/// Looser allowance for the circle model, whose visual metric is only
/// comparable (not equal) to the exact quasi-metric.
const DIM_SYSTEMATIC_CIRCLE: f64 = 0.15;

#[derive(Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<DimSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_h_over_l: Option<f64>,
    pub checks: Checks,
    pub failed_checks: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity: Option<Vec<ContinuityRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
}

#[derive(Serialize)]
pub struct ErrorInfo {
    pub code: String,
    pub reason: String,
}

#[derive(Serialize)]
pub struct DriftSection {
    pub mc: EstimateWithError,
    /// Exact-route `[value, lo, hi]` on free nearest-neighbor models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<[f64; 3]>,
}

#[derive(Serialize)]
pub struct EntropySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<EstimateWithError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subadditive: Option<EstimateWithError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub furstenberg: Option<f64>,
}

#[derive(Serialize)]
pub struct DimSection {
    pub pooled: f64,
    pub median: f64,
    pub iqr: f64,
    pub r2: f64,
    pub samples: usize,
}

#[derive(Serialize, Default)]
pub struct Checks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper_bound: Option<estimators::UpperBoundCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<StationaritySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<estimators::TrackingReport>,
    #[serde(rename = "eventA", skip_serializing_if = "Option::is_none")]
    pub event_a: Option<EventASummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shadow_hit: Option<ShadowSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift_routes_agree: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_routes_agree: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_matches_ratio: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freeness: Option<bool>,
}

#[derive(Serialize)]
pub struct StationaritySummary {
    pub max_z: f64,
    pub pass: bool,
    pub low_power: bool,
}

#[derive(Serialize)]
pub struct EventASummary {
    pub fractions: Vec<(usize, f64)>,
    pub nondecreasing: bool,
    pub final_fraction: f64,
}

#[derive(Serialize)]
pub struct ShadowSummary {
    pub fraction: f64,
    pub control_fraction: f64,
    pub conditioned: usize,
    pub vacuous: bool,
}

pub fn run(kind: Kind, args: &RunArgs) -> anyhow::Result<Outcome> {
    let raw = fs::read(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let config_hash = hex_digest(&raw);
    let config: ExperimentConfig =
        serde_json::from_slice(&raw).context("parsing experiment config")?;
    config.validate()?;

    let out_dir: PathBuf = match (&args.out, &config.output_dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => bail!("no output directory: pass --out or set output_dir"),
    };
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let threads = args
        .threads
        .or_else(|| std::env::var("HMDIM_THREADS").ok().and_then(|v| v.parse().ok()));
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t);
        }
        builder.build().context("building worker pool")?
    };

    let mut summary = Summary {
        config_hash,
        seed: config.seed,
        model: match &config.model {
            ModelSpec::Free { rank } => format!("free-{rank}"),
            ModelSpec::Sl2z { .. } => "sl2z".into(),
        },
        command: match kind {
            Kind::Drift => "drift",
            Kind::Entropy => "entropy",
            Kind::Dimension => "dimension",
            Kind::VerifyFormula => "verify-formula",
            Kind::Oracle => "oracle",
            Kind::Diagnostics => "diagnostics",
            Kind::Continuity => "continuity",
        }
        .to_string(),
        drift: None,
        entropy: None,
        dim: None,
        ratio_h_over_l: None,
        checks: Checks::default(),
        failed_checks: Vec::new(),
        warnings: Vec::new(),
        continuity: None,
        error: None,
    };

    let result = pool.install(|| dispatch(kind, &config, &out_dir, &mut summary));
    match result {
        Ok(()) => {
            output::write_summary(&out_dir, &summary)?;
            output::write_metadata(&out_dir, threads)?;
            output::write_summaries_csv(&out_dir, &summary)?;
            if summary.failed_checks.is_empty() {
                Ok(Outcome::Clean)
            } else {
                Ok(Outcome::ChecksFailed(summary.failed_checks.clone()))
            }
        }
        Err(RunError::Consistency(e)) => {
            summary.failed_checks.push(e.code().to_string());
            summary.error = Some(ErrorInfo { code: e.code().into(), reason: e.to_string() });
            output::write_summary(&out_dir, &summary)?;
            output::write_metadata(&out_dir, threads)?;
            Ok(Outcome::ChecksFailed(summary.failed_checks.clone()))
        }
        Err(RunError::Usage(e)) => {
            summary.error = Some(ErrorInfo { code: "usage".into(), reason: e.to_string() });
            let _ = output::write_summary(&out_dir, &summary);
            Err(e)
        }
    }
}

enum RunError {
    Usage(anyhow::Error),
    Consistency(CoreError),
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::OracleInconsistent(_) => RunError::Consistency(e),
            other => RunError::Usage(anyhow!(other.to_string())),
        }
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Usage(e)
    }
}

type RunResult = Result<(), RunError>;

fn dispatch(
    kind: Kind,
    config: &ExperimentConfig,
    out_dir: &Path,
    summary: &mut Summary,
) -> RunResult {
    match (&config.model, kind) {
        (ModelSpec::Free { rank }, _) => free_pipeline(kind, config, *rank, out_dir, summary),
        (ModelSpec::Sl2z { generators }, kind) => {
            sl2_pipeline(kind, config, generators, out_dir, summary)
        }
    }
}

/// Oracle pieces available on free nearest-neighbor models.
struct FreeOracle {
    nn: NearestNeighborMeasure,
    harmonic: hmdim_core::oracle::BoundaryMarkovMeasure,
    drift: DriftResult,
    entropy: f64,
}

fn try_oracle(
    config: &ExperimentConfig,
    rank: u8,
) -> Result<Option<FreeOracle>, RunError> {
    let mu = config.measure.free_distribution()?;
    let nn = match NearestNeighborMeasure::from_distribution(&mu, rank) {
        Ok(nn) => nn,
        Err(CoreError::UnsupportedModel(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if !nn.is_non_elementary() {
        return Err(RunError::Usage(anyhow!(
            "measure is elementary; the oracle (and the dimension formula) need a non-elementary walk"
        )));
    }
    let q = solve_first_passage(&nn)?;
    let harmonic = solve_stationary_markov(&nn, &q)?;
    let drift = hmdim_core::oracle::exact_drift(&nn, &config.drift.exact(config.seed))?;
    let entropy = hmdim_core::oracle::furstenberg_entropy(&nn, &harmonic)?;
    Ok(Some(FreeOracle { nn, harmonic, drift, entropy }))
}

fn free_pipeline(
    kind: Kind,
    config: &ExperimentConfig,
    rank: u8,
    out_dir: &Path,
    summary: &mut Summary,
) -> RunResult {
    let group = FreeGroup::new(rank)?;
    let mu = config.measure.free_distribution()?;
    let seed = config.seed;

    if kind == Kind::Oracle {
        let oracle = try_oracle(config, rank)?.ok_or_else(|| {
            RunError::Usage(anyhow!("the oracle needs a nearest-neighbor measure"))
        })?;
        let q = solve_first_passage(&oracle.nn)?;
        output::write_oracle_json(out_dir, &group, &q, &oracle.harmonic, &oracle.drift, oracle.entropy)
            .map_err(RunError::Usage)?;
        summary.drift = Some(DriftSection {
            mc: EstimateWithError {
                value: oracle.drift.mc_mean,
                stderr: oracle.drift.mc_stderr,
                n_samples: config.drift.exact_mc_trajectories,
                method: estimators::Method::Mc,
            },
            exact: Some([oracle.drift.value, oracle.drift.lo, oracle.drift.hi]),
        });
        summary.entropy = Some(EntropySection {
            mc: None,
            subadditive: None,
            furstenberg: Some(oracle.entropy),
        });
        summary.ratio_h_over_l = Some(oracle.entropy / oracle.drift.value);
        return Ok(());
    }

    if kind == Kind::Continuity {
        let cfg = estimators::ContinuityConfig {
            depth: config.continuity.depth,
            cloud_size: config.continuity.cloud_size,
            radii: config.dimension.radii().map_err(RunError::Usage)?,
            seed,
        };
        let rows = continuity_experiment(&group, &mu, &config.continuity.perturbations, &cfg)?;
        output::write_continuity_csv(out_dir, &rows).map_err(RunError::Usage)?;
        let mut sorted: Vec<&ContinuityRow> =
            rows.iter().filter(|r| r.perturbation > 0.0).collect();
        sorted.sort_by(|a, b| b.perturbation.partial_cmp(&a.perturbation).unwrap());
        for pair in sorted.windows(2) {
            let slack = 3.0 * (pair[0].dim_stderr + pair[1].dim_stderr);
            if pair[1].diff_from_base > pair[0].diff_from_base + slack {
                summary.failed_checks.push("continuity-not-decreasing".into());
            }
        }
        summary.continuity = Some(rows);
        return Ok(());
    }

    if kind == Kind::Diagnostics {
        let oracle = try_oracle(config, rank)?.ok_or_else(|| {
            RunError::Usage(anyhow!("diagnostics need a nearest-neighbor measure"))
        })?;
        run_free_diagnostics(config, &group, &mu, &oracle, summary)?;
        output::write_event_a_csv(out_dir, summary.checks.event_a.as_ref().unwrap())
            .map_err(RunError::Usage)?;
        return Ok(());
    }

    // drift / entropy / dimension / verify-formula share their pieces
    let oracle = try_oracle(config, rank)?;
    let want_drift = matches!(kind, Kind::Drift | Kind::VerifyFormula);
    let want_entropy = matches!(kind, Kind::Entropy | Kind::VerifyFormula);
    let want_dim = matches!(kind, Kind::Dimension | Kind::VerifyFormula);

    let mut h_best: Option<(f64, f64)> = None; // (value, stderr)
    let mut l_best: Option<(f64, f64)> = None;

    if want_drift {
        let mc = drift_mc(&group, &mu, config.drift.horizon, config.drift.trajectories, seed);
        let exact = oracle.as_ref().map(|o| [o.drift.value, o.drift.lo, o.drift.hi]);
        if let Some(o) = oracle.as_ref() {
            let gap = (o.drift.value - mc.value).abs();
            let agree = gap <= 3.0 * (o.drift.table_route.error + mc.stderr) + 1e-9;
            summary.checks.drift_routes_agree = Some(agree);
            if !agree {
                summary.failed_checks.push("drift-routes-disagree".into());
            }
            l_best = Some((o.drift.value, o.drift.table_route.error));
        } else {
            l_best = Some((mc.value, mc.stderr));
        }
        summary.drift = Some(DriftSection { mc, exact });
    }

    if want_entropy {
        let prune = config.entropy.prune();
        let tables = estimators::convolution_ladder(&mu, config.entropy.n_max, prune)?;
        let sub = entropy_subadditive(&mu, config.entropy.n_max, prune)?;
        let shannon = entropy_shannon_mc(
            &mu,
            &tables,
            prune.threshold,
            config.entropy.shannon_trajectories,
            seed,
        )?;
        let furstenberg = oracle.as_ref().map(|o| o.entropy);
        let mut routes = vec![shannon.estimate, sub.estimate];
        if let Some(h) = furstenberg {
            routes.push(EstimateWithError {
                value: h,
                stderr: 1e-10,
                n_samples: 1,
                method: estimators::Method::ExactTable,
            });
            h_best = Some((h, 1e-10));
        } else {
            h_best = Some((sub.estimate.value, sub.estimate.stderr));
        }
        let mut agree = true;
        for i in 0..routes.len() {
            for j in i + 1..routes.len() {
                if !routes[i].agrees_with(&routes[j], 3.0) {
                    agree = false;
                }
            }
        }
        summary.checks.entropy_routes_agree = Some(agree);
        if !agree {
            summary.failed_checks.push("entropy-routes-disagree".into());
        }
        summary.entropy = Some(EntropySection {
            mc: Some(shannon.estimate),
            subadditive: Some(sub.estimate),
            furstenberg,
        });
    }

    if want_dim {
        if oracle.is_none() && !hmdim_core::walk::non_elementarity_heuristic(&mu) {
            return Err(RunError::Usage(anyhow!(
                "measure looks elementary (no free sub-semigroup pair found); boundary estimates are meaningless"
            )));
        }
        let radii = config.dimension.radii().map_err(RunError::Usage)?;
        let cloud = sample_free_cloud(
            &group,
            &mu,
            config.dimension.depth as usize,
            config.dimension.cloud_size,
            seed,
        )?;
        if cloud.resampled as f64 > 0.01 * cloud.samples.len() as f64 {
            summary.warnings.push("cloud resample rate above 1%".into());
        }
        let exact_nu = oracle.as_ref().map(|o| &o.harmonic);
        let mut report =
            local_dimension_report(&BoundaryCloud::Free(cloud.clone()), &radii, exact_nu)?;

        if let Some(o) = oracle.as_ref() {
            let stat = stationarity_test(&cloud, &o.nn)?;
            summary.checks.stationarity = Some(StationaritySummary {
                max_z: stat.max_z,
                pass: stat.pass,
                low_power: stat.low_power,
            });
            if !stat.pass {
                summary.failed_checks.push("stationarity".into());
            }
        }
        summary.dim = Some(DimSection {
            pooled: report.pooled_slope,
            median: report.median_slope,
            iqr: report.spread,
            r2: report.r_squared,
            samples: report.per_point_slopes.len(),
        });

        if kind == Kind::VerifyFormula {
            if let (Some((h, h_se)), Some((l, l_se))) = (h_best, l_best) {
                let ratio = h / l;
                report.h_over_l = Some(ratio);
                summary.ratio_h_over_l = Some(ratio);
                let check = upper_bound_check(&report, h, l, h_se, l_se)?;
                if !check.pass {
                    summary.failed_checks.push("upper-bound".into());
                }
                summary.checks.upper_bound = Some(check);
                let se_dim = robust_dim_stderr(&report);
                let tol = DIM_SYSTEMATIC * ratio
                    + 3.0 * (se_dim + ratio * (h_se / h + l_se / l));
                let matches = (report.median_slope - ratio).abs() <= tol;
                summary.checks.dim_matches_ratio = Some(matches);
                if !matches {
                    summary.failed_checks.push("dimension-vs-ratio".into());
                }
            }
        }
        output::write_dimension_csvs(out_dir, &report).map_err(RunError::Usage)?;
    }

    Ok(())
}

fn robust_dim_stderr(report: &LocalDimReport) -> f64 {
    let n = report.per_point_slopes.len() as f64;
    // stderr of the median of a roughly normal sample
    1.2533 * report.spread / 1.349 / n.sqrt()
}

fn run_free_diagnostics(
    config: &ExperimentConfig,
    group: &FreeGroup,
    mu: &hmdim_core::walk::StepDistribution<hmdim_core::free::ReducedWord>,
    oracle: &FreeOracle,
    summary: &mut Summary,
) -> RunResult {
    let d = &config.diagnostics;
    let seed = config.seed;

    let tracking = tracking_diagnostic(
        group,
        mu,
        oracle.drift.value,
        d.tracking_horizon,
        d.tracking_trajectories,
        d.tracking_epsilon,
        seed,
    )?;
    summary.checks.tracking = Some(tracking);

    let tables = estimators::convolution_ladder(mu, d.event_horizon, PruneConfig::EXACT)?;
    let profile = event_a_profile(
        group,
        mu,
        &tables,
        oracle.entropy,
        oracle.drift.value,
        d.event_epsilon,
        d.event_horizon,
        d.event_trajectories,
        seed,
    )?;
    let nondecreasing = profile.fractions.windows(2).all(|w| w[1].1 >= w[0].1);
    let final_fraction = profile.fractions.last().map(|(_, f)| *f).unwrap_or(f64::NAN);
    if final_fraction < 1.0 - 2.0 * d.event_epsilon {
        summary.failed_checks.push("event-a-probability".into());
    }
    summary.checks.event_a = Some(EventASummary {
        fractions: profile.fractions.clone(),
        nondecreasing,
        final_fraction,
    });

    let shadow = shadow_hit_diagnostic(
        group,
        mu,
        oracle.drift.value,
        d.shadow_thickness,
        d.shadow_epsilon,
        d.shadow_horizon,
        d.shadow_trajectories,
        ShadowHitMode::OnGeodesic,
        seed,
    )?;
    let control = shadow_hit_diagnostic(
        group,
        mu,
        oracle.drift.value,
        d.shadow_thickness,
        d.shadow_epsilon,
        d.shadow_horizon,
        d.shadow_trajectories,
        ShadowHitMode::OffGeodesic,
        seed,
    )?;
    if shadow.fraction < 1.0 {
        summary.failed_checks.push("shadow-hit".into());
    }
    if control.fraction >= 1.0 {
        summary.failed_checks.push("shadow-hit-control".into());
    }
    summary.checks.shadow_hit = Some(ShadowSummary {
        fraction: shadow.fraction,
        control_fraction: control.fraction,
        conditioned: shadow.conditioned,
        vacuous: shadow.vacuous,
    });

    let cloud = sample_free_cloud(group, mu, 8, d.stationarity_cloud_size, seed)?;
    let stat = stationarity_test(&cloud, &oracle.nn)?;
    if !stat.pass {
        summary.failed_checks.push("stationarity".into());
    }
    summary.checks.stationarity = Some(StationaritySummary {
        max_z: stat.max_z,
        pass: stat.pass,
        low_power: stat.low_power,
    });
    Ok(())
}

fn sl2_pipeline(
    kind: Kind,
    config: &ExperimentConfig,
    generators: &[hmdim_core::sl2::Sl2Matrix],
    out_dir: &Path,
    summary: &mut Summary,
) -> RunResult {
    match kind {
        Kind::Oracle | Kind::Diagnostics | Kind::Continuity => {
            return Err(RunError::Usage(anyhow!(
                "{:?} is only available on free-group models",
                kind
            )));
        }
        _ => {}
    }
    let mu = config.measure.sl2_distribution()?;
    let seed = config.seed;
    let model = Sl2Model;

    // freeness sanity of the named generating pair
    if generators.len() >= 2 {
        let free = verify_free_up_to(&generators[0], &generators[1], 12).is_ok();
        summary.checks.freeness = Some(free);
        if !free {
            summary.failed_checks.push("freeness".into());
        }
    }

    let want_drift = matches!(kind, Kind::Drift | Kind::VerifyFormula);
    let want_entropy = matches!(kind, Kind::Entropy | Kind::VerifyFormula);
    let want_dim = matches!(kind, Kind::Dimension | Kind::VerifyFormula);

    let mut h_best: Option<(f64, f64)> = None;
    let mut l_best: Option<(f64, f64)> = None;

    if want_drift {
        let mc = drift_mc(&model, &mu, config.drift.horizon, config.drift.trajectories, seed);
        l_best = Some((mc.value, mc.stderr));
        summary.drift = Some(DriftSection { mc, exact: None });
    }

    if want_entropy {
        let prune = config.entropy.prune();
        let tables = estimators::convolution_ladder(&mu, config.entropy.n_max, prune)?;
        let sub = entropy_subadditive(&mu, config.entropy.n_max, prune)?;
        let shannon = entropy_shannon_mc(
            &mu,
            &tables,
            prune.threshold,
            config.entropy.shannon_trajectories,
            seed,
        )?;
        let agree = shannon.estimate.agrees_with(&sub.estimate, 3.0);
        summary.checks.entropy_routes_agree = Some(agree);
        if !agree {
            summary.failed_checks.push("entropy-routes-disagree".into());
        }
        h_best = Some((sub.estimate.value, sub.estimate.stderr));
        summary.entropy = Some(EntropySection {
            mc: Some(shannon.estimate),
            subadditive: Some(sub.estimate),
            furstenberg: None,
        });
    }

    if want_dim {
        let radii = match &config.dimension.radii {
            crate::config::RadiiSpec::Log { .. } => {
                // tree ladders make no sense on the circle; use the chordal default
                let spec = crate::config::RadiiSpec::chord_default();
                match spec {
                    crate::config::RadiiSpec::Chord { j_start, j_end } => {
                        (j_start..=j_end).map(|j| 2f64.powi(-(j as i32))).collect()
                    }
                    _ => unreachable!(),
                }
            }
            _ => config.dimension.radii().map_err(RunError::Usage)?,
        };
        if !hmdim_core::walk::non_elementarity_heuristic(&mu) {
            return Err(RunError::Usage(anyhow!(
                "measure looks elementary (no free sub-semigroup pair found); boundary estimates are meaningless"
            )));
        }
        let cloud = sample_circle_cloud(
            &mu,
            config.dimension.depth,
            config.dimension.min_proxy_depth,
            config.dimension.cloud_size,
            seed,
        )?;
        if cloud.resampled as f64 > 0.01 * cloud.samples.len() as f64 {
            summary.warnings.push("cloud resample rate above 1%".into());
        }
        let mut report =
            local_dimension_report(&BoundaryCloud::Circle(cloud), &radii, None)?;
        summary.dim = Some(DimSection {
            pooled: report.pooled_slope,
            median: report.median_slope,
            iqr: report.spread,
            r2: report.r_squared,
            samples: report.per_point_slopes.len(),
        });

        if kind == Kind::VerifyFormula {
            if let (Some((h, h_se)), Some((l, l_se))) = (h_best, l_best) {
                let ratio = h / l;
                report.h_over_l = Some(ratio);
                summary.ratio_h_over_l = Some(ratio);
                let check = upper_bound_check(&report, h, l, h_se, l_se)?;
                if !check.pass {
                    summary.failed_checks.push("upper-bound".into());
                }
                summary.checks.upper_bound = Some(check);
                let se_dim = robust_dim_stderr(&report);
                let tol = DIM_SYSTEMATIC_CIRCLE * ratio
                    + 3.0 * (se_dim + ratio * (h_se / h + l_se / l));
                let matches = (report.median_slope - ratio).abs() <= tol;
                summary.checks.dim_matches_ratio = Some(matches);
                if !matches {
                    summary.failed_checks.push("dimension-vs-ratio".into());
                }
            }
        }
        output::write_dimension_csvs(out_dir, &report).map_err(RunError::Usage)?;
    }

    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
