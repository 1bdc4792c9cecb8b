//! Monte-Carlo experiment harness: scripted presets, sweeps over a scenario
//! parameter, per-run metrics and cross-rep summary statistics.
//!
//! Every rep derives its own seed from `(root_seed, sweep_index, rep)`, so
//! editing one sweep point never perturbs another, and all methods within a
//! rep consume the identical dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{iw_mean, BetaParams, GaussianBelief, InverseWishartParams};
use crate::error::{Error, Result};
use crate::filter::{
    kalman_oracle, kalman_static, run_filter, CorruptionMode, VbHyperParams,
};
use crate::numerics::{Matrix, Vector};
use crate::simulator::{derive_seed, generate, RegimeSegment, ScenarioConfig};

/// Which baselines run alongside the variational filter.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineFlags {
    #[serde(default)]
    pub oracle: bool,
    #[serde(default, rename = "static")]
    pub static_kf: bool,
}

/// The scenario field a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Number of sensors; values must be positive integers.
    NSensors,
    /// Baseline observation noise: every segment's r_true becomes v*I.
    RTrue,
    /// Corruption covariance: scenario e and filter e both become v*I.
    E,
    /// Process noise: every segment's q_true becomes v*I.
    QTrue,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A complete experiment: scenario, filter configuration, replication plan.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub hyper: VbHyperParams,
    pub x0: GaussianBelief,
    pub mc_reps: usize,
    pub root_seed: u64,
    #[serde(default)]
    pub baselines: BaselineFlags,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

/// One time step of one run, with everything the output series needs.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub k: usize,
    pub x_true: Vector,
    pub xhat_vb: Vector,
    pub p_vb: Matrix,
    pub xhat_oracle: Option<Vector>,
    pub p_oracle: Option<Matrix>,
    pub xhat_static: Option<Vector>,
    pub p_static: Option<Matrix>,
    /// Posterior-mean plug-in for the process noise covariance.
    pub eq_plugin: Matrix,
    /// Posterior-mean plug-in for the observation noise covariance.
    pub er_plugin: Matrix,
    pub dropout_est: f64,
    pub corruption_est: f64,
}

/// One Monte-Carlo rep at one sweep point.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub sweep_index: usize,
    pub sweep_value: Option<f64>,
    pub rep: usize,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub rmse_vb: f64,
    pub rmse_oracle: Option<f64>,
    pub rmse_static: Option<f64>,
    /// RMSE of the corruption-rate estimate against its scheduled truth.
    pub rate_rmse: f64,
}

/// Mean/sd/percentile summary of one metric at one sweep point.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub sweep_value: Option<f64>,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Root-mean-square error between paired vector series.
pub fn rmse(estimates: &[Vector], truths: &[Vector]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch(estimates.len(), truths.len()));
    }
    if estimates.is_empty() {
        return Err(Error::EmptyInput("rmse over empty series"));
    }
    let total: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| {
            let d = e.sub(t);
            d.dot(&d)
        })
        .sum();
    Ok((total / estimates.len() as f64).sqrt())
}

fn rmse_scalar(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch(estimates.len(), truths.len()));
    }
    if estimates.is_empty() {
        return Err(Error::EmptyInput("rmse over empty series"));
    }
    let total: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok((total / estimates.len() as f64).sqrt())
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.hyper.validate(self.scenario.d_x, self.scenario.d_y)?;
        if self.x0.dim() != self.scenario.d_x {
            return Err(Error::Config("x0 dimension must equal d_x".into()));
        }
        if self.mc_reps == 0 {
            return Err(Error::Config("mc_reps must be at least 1".into()));
        }
        // The output series records the plug-in mean of the process-noise
        // posterior, which has dof nu_0 + 1.
        if self.hyper.q_prior.dof + 1.0 <= self.scenario.d_x as f64 + 1.0 {
            return Err(Error::Config(
                "q_prior dof must exceed d_x so the posterior plug-in mean exists".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep values must be nonempty".into()));
            }
            for &v in &sweep.values {
                match sweep.parameter {
                    SweepParameter::NSensors => {
                        if v < 1.0 || v.fract() != 0.0 {
                            return Err(Error::Config(format!(
                                "n_sensors sweep value {v} must be a positive integer"
                            )));
                        }
                    }
                    _ => {
                        if !(v > 0.0) {
                            return Err(Error::Config(format!(
                                "sweep value {v} must be positive"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn at_sweep_point(&self, value: f64) -> (ScenarioConfig, VbHyperParams) {
        let mut scenario = self.scenario.clone();
        let mut hyper = self.hyper.clone();
        match self.sweep.as_ref().map(|s| s.parameter) {
            Some(SweepParameter::NSensors) => scenario.n_sensors = value as usize,
            Some(SweepParameter::RTrue) => {
                for seg in &mut scenario.segments {
                    seg.r_true = Matrix::identity(scenario.d_y).scale(value);
                }
            }
            Some(SweepParameter::E) => {
                scenario.e = Matrix::identity(scenario.d_y).scale(value);
                hyper.e = scenario.e.clone();
            }
            Some(SweepParameter::QTrue) => {
                for seg in &mut scenario.segments {
                    seg.q_true = Matrix::identity(scenario.d_x).scale(value);
                }
            }
            None => {}
        }
        (scenario, hyper)
    }
}

fn run_one_rep(
    spec: &ExperimentSpec,
    sweep_index: usize,
    sweep_value: Option<f64>,
    rep: usize,
) -> Result<RunResult> {
    let (scenario, hyper) = match sweep_value {
        Some(v) => spec.at_sweep_point(v),
        None => (spec.scenario.clone(), spec.hyper.clone()),
    };
    let seed = derive_seed(
        derive_seed(spec.root_seed, "sweep", sweep_index as u64),
        "rep",
        rep as u64,
    );
    let dataset = generate(&scenario, seed)?;
    let posts = run_filter(&dataset, &hyper, &spec.x0)?;

    let oracle = if spec.baselines.oracle {
        Some(kalman_oracle(&dataset, &spec.x0)?)
    } else {
        None
    };
    let static_kf = if spec.baselines.static_kf {
        // Nominal values are the first segment's baseline covariances.
        let nominal = &scenario.segments[0];
        Some(kalman_static(
            &dataset,
            &nominal.q_true,
            &nominal.r_true,
            &spec.x0,
        )?)
    } else {
        None
    };

    let t = dataset.horizon();
    let mut steps = Vec::with_capacity(t);
    for k in 0..t {
        let post = &posts[k];
        steps.push(StepRecord {
            k,
            x_true: dataset.x_true[k].clone(),
            xhat_vb: post.belief.mean.clone(),
            p_vb: post.belief.cov.clone(),
            xhat_oracle: oracle.as_ref().map(|o| o[k].mean.clone()),
            p_oracle: oracle.as_ref().map(|o| o[k].cov.clone()),
            xhat_static: static_kf.as_ref().map(|s| s[k].mean.clone()),
            p_static: static_kf.as_ref().map(|s| s[k].cov.clone()),
            eq_plugin: iw_mean(&post.q_post)?,
            er_plugin: iw_mean(&post.r_post)?,
            dropout_est: post.dropout_rate_est,
            corruption_est: post.corruption_rate_est,
        });
    }

    let vb_means: Vec<Vector> = posts.iter().map(|p| p.belief.mean.clone()).collect();
    let rmse_vb = rmse(&vb_means, &dataset.x_true)?;
    let rmse_oracle = oracle
        .as_ref()
        .map(|o| {
            let means: Vec<Vector> = o.iter().map(|b| b.mean.clone()).collect();
            rmse(&means, &dataset.x_true)
        })
        .transpose()?;
    let rmse_static = static_kf
        .as_ref()
        .map(|s| {
            let means: Vec<Vector> = s.iter().map(|b| b.mean.clone()).collect();
            rmse(&means, &dataset.x_true)
        })
        .transpose()?;
    let est_series: Vec<f64> = posts.iter().map(|p| p.corruption_rate_est).collect();
    let rate_rmse = rmse_scalar(&est_series, &scenario.corruption_schedule())?;

    Ok(RunResult {
        sweep_index,
        sweep_value,
        rep,
        seed,
        steps,
        rmse_vb,
        rmse_oracle,
        rmse_static,
        rate_rmse,
    })
}

/// Run every (sweep point, rep) pair; results are ordered by
/// `(sweep_index, rep)` regardless of execution parallelism.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let sweep_values: Vec<Option<f64>> = match &spec.sweep {
        Some(s) => s.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let jobs: Vec<(usize, Option<f64>, usize)> = sweep_values
        .iter()
        .enumerate()
        .flat_map(|(si, v)| (0..spec.mc_reps).map(move |rep| (si, *v, rep)))
        .collect();
    jobs.par_iter()
        .map(|&(si, v, rep)| {
            run_one_rep(spec, si, v, rep).map_err(|e| Error::ExperimentRep {
                sweep_index: si,
                rep,
                source: Box::new(e),
            })
        })
        .collect()
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    // Linear interpolation between closest ranks.
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn summarize_metric(
    rows: &mut Vec<SummaryRow>,
    sweep_value: Option<f64>,
    metric: &str,
    values: &[f64],
) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows.push(SummaryRow {
        sweep_value,
        metric: metric.to_string(),
        mean,
        sd,
        p10: percentile(&sorted, 10.0),
        p90: percentile(&sorted, 90.0),
    });
}

/// Per sweep point: mean, (n-1)-convention standard deviation, and 10/90
/// percentiles of every metric across reps.
pub fn summarize(results: &[RunResult]) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::EmptyInput("summarize over no results"));
    }
    let mut indices: Vec<usize> = results.iter().map(|r| r.sweep_index).collect();
    indices.sort_unstable();
    indices.dedup();
    let mut rows = Vec::new();
    for si in indices {
        let group: Vec<&RunResult> = results.iter().filter(|r| r.sweep_index == si).collect();
        let sweep_value = group[0].sweep_value;
        let vb: Vec<f64> = group.iter().map(|r| r.rmse_vb).collect();
        summarize_metric(&mut rows, sweep_value, "rmse_vb", &vb);
        let oracle: Vec<f64> = group.iter().filter_map(|r| r.rmse_oracle).collect();
        summarize_metric(&mut rows, sweep_value, "rmse_oracle", &oracle);
        let st: Vec<f64> = group.iter().filter_map(|r| r.rmse_static).collect();
        summarize_metric(&mut rows, sweep_value, "rmse_static", &st);
        let rate: Vec<f64> = group.iter().map(|r| r.rate_rmse).collect();
        summarize_metric(&mut rows, sweep_value, "rate_rmse", &rate);
    }
    Ok(rows)
}

/// All preset names, in canonical order.
pub const PRESET_NAMES: [&str; 6] = ["exp1", "exp2", "exp3", "exp4a", "exp4b", "exp4c"];

fn scalar_segments(spans: &[(usize, usize, f64, f64, f64, f64)]) -> Vec<RegimeSegment> {
    spans
        .iter()
        .map(
            |&(start_k, end_k, q, r, dropout_rate, corruption_rate)| RegimeSegment {
                start_k,
                end_k,
                q_true: Matrix::scalar(q),
                r_true: Matrix::scalar(r),
                dropout_rate,
                corruption_rate,
            },
        )
        .collect()
}

fn scalar_scenario(n_sensors: usize, e: f64, segments: Vec<RegimeSegment>) -> ScenarioConfig {
    ScenarioConfig {
        d_x: 1,
        d_y: 1,
        f: Matrix::scalar(1.0),
        h: Matrix::scalar(1.0),
        e: Matrix::scalar(e),
        n_sensors,
        horizon: 120,
        segments,
        x0_mean: Vector::scalar(0.0),
        x0_cov: Matrix::scalar(1.0),
    }
}

/// Scalar filter hyper-parameters for the presets. Both noise priors carry
/// modest pseudo-observation weight so the per-step conjugate updates can
/// move them; the uniform Beta priors leave the rates to the data.
fn preset_hyper(
    q_prior: (f64, f64),
    r_prior: (f64, f64),
    e: f64,
    corruption: CorruptionMode,
) -> VbHyperParams {
    VbHyperParams {
        q_prior: InverseWishartParams {
            dof: q_prior.0,
            scale: Matrix::scalar(q_prior.1),
        },
        r_prior: InverseWishartParams {
            dof: r_prior.0,
            scale: Matrix::scalar(r_prior.1),
        },
        rho_prior: BetaParams::uniform(),
        beta_prior: BetaParams::uniform(),
        e: Matrix::scalar(e),
        n_iters: 20,
        corruption,
    }
}

fn unit_x0() -> GaussianBelief {
    GaussianBelief {
        mean: Vector::scalar(0.0),
        cov: Matrix::scalar(1.0),
    }
}

/// Built-in experiment definitions.
///
/// All presets share F = H = 1, T = 120, J = 20 and a standard-normal
/// initial belief. Corruption handling is disabled for exp1/exp2, whose
/// scenarios never corrupt an observation.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    match name {
        // Sensor-count sweep on a stationary scenario against the oracle.
        "exp1" => Ok(ExperimentSpec {
            scenario: scalar_scenario(100, 10.0, scalar_segments(&[(0, 120, 0.1, 1.0, 0.0, 0.0)])),
            hyper: preset_hyper((3.0, 0.15), (12.0, 10.0), 10.0, CorruptionMode::Disabled),
            x0: unit_x0(),
            mc_reps: 50,
            root_seed: 1001,
            baselines: BaselineFlags {
                oracle: true,
                static_kf: false,
            },
            sweep: Some(Sweep {
                parameter: SweepParameter::NSensors,
                values: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            }),
        }),
        // Persistent variance spikes: Q jumps to 30 at k=40, R to 60 at k=80.
        "exp2" => Ok(ExperimentSpec {
            scenario: scalar_scenario(
                5,
                10.0,
                scalar_segments(&[
                    (0, 40, 0.1, 1.0, 0.0, 0.0),
                    (40, 80, 30.0, 1.0, 0.0, 0.0),
                    (80, 120, 30.0, 60.0, 0.0, 0.0),
                ]),
            ),
            hyper: preset_hyper((3.0, 0.1), (4.0, 2.0), 10.0, CorruptionMode::Disabled),
            x0: unit_x0(),
            mc_reps: 20,
            root_seed: 1002,
            baselines: BaselineFlags {
                oracle: true,
                static_kf: true,
            },
            sweep: None,
        }),
        // Degradation window [50,100): dropout and corruption both at 60%.
        "exp3" => Ok(ExperimentSpec {
            scenario: scalar_scenario(
                200,
                10.0,
                scalar_segments(&[
                    (0, 50, 0.05, 1.0, 0.05, 0.05),
                    (50, 100, 0.05, 1.0, 0.60, 0.60),
                    (100, 120, 0.05, 1.0, 0.05, 0.05),
                ]),
            ),
            hyper: preset_hyper((3.0, 0.05), (4.0, 2.0), 10.0, CorruptionMode::Infer),
            x0: unit_x0(),
            mc_reps: 20,
            root_seed: 1003,
            baselines: BaselineFlags::default(),
            sweep: None,
        }),
        // Ablations: corruption-rate identifiability at 30% corruption.
        "exp4a" => Ok(exp4_spec(
            1004,
            Some(Sweep {
                parameter: SweepParameter::RTrue,
                values: vec![0.05, 0.2, 1.0, 5.0, 10.0],
            }),
        )),
        "exp4b" => Ok(exp4_spec(
            1005,
            Some(Sweep {
                parameter: SweepParameter::E,
                values: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            }),
        )),
        "exp4c" => Ok(exp4_spec(
            1006,
            Some(Sweep {
                parameter: SweepParameter::QTrue,
                values: vec![0.001, 0.01, 0.1, 1.0],
            }),
        )),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

fn exp4_spec(root_seed: u64, sweep: Option<Sweep>) -> ExperimentSpec {
    ExperimentSpec {
        scenario: scalar_scenario(200, 10.0, scalar_segments(&[(0, 120, 0.05, 1.0, 0.0, 0.30)])),
        hyper: preset_hyper((3.0, 0.05), (4.0, 2.0), 10.0, CorruptionMode::Infer),
        x0: unit_x0(),
        mc_reps: 20,
        root_seed,
        baselines: BaselineFlags::default(),
        sweep,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_trivial_cases() {
        let a = vec![Vector::scalar(1.0), Vector::scalar(2.0)];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);

        let zeros = vec![Vector::scalar(0.0), Vector::scalar(0.0)];
        let tgt = vec![Vector::scalar(3.0), Vector::scalar(4.0)];
        assert!((rmse(&zeros, &tgt).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);

        assert!(matches!(
            rmse(&a, &zeros[..1].to_vec()),
            Err(Error::LengthMismatch(2, 1))
        ));
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn rmse_permutation_invariant() {
        let est = vec![Vector::scalar(0.1), Vector::scalar(2.0), Vector::scalar(-1.0)];
        let tru = vec![Vector::scalar(0.0), Vector::scalar(1.5), Vector::scalar(-0.5)];
        let direct = rmse(&est, &tru).unwrap();
        let perm = [2usize, 0, 1];
        let est_p: Vec<Vector> = perm.iter().map(|&i| est[i].clone()).collect();
        let tru_p: Vec<Vector> = perm.iter().map(|&i| tru[i].clone()).collect();
        assert!((rmse(&est_p, &tru_p).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn presets_match_published_parameters() {
        let e1 = preset("exp1").unwrap();
        assert_eq!(e1.scenario.horizon, 120);
        assert_eq!(e1.hyper.n_iters, 20);
        assert_eq!(
            e1.sweep.as_ref().unwrap().values,
            vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
        );

        let e2 = preset("exp2").unwrap();
        assert_eq!(e2.scenario.n_sensors, 5);
        assert_eq!(crate::simulator::regime_at(&e2.scenario, 39).unwrap().q_true.get(0, 0), 0.1);
        assert_eq!(crate::simulator::regime_at(&e2.scenario, 40).unwrap().q_true.get(0, 0), 30.0);
        assert_eq!(crate::simulator::regime_at(&e2.scenario, 80).unwrap().r_true.get(0, 0), 60.0);

        let e3 = preset("exp3").unwrap();
        assert_eq!(e3.scenario.n_sensors, 200);
        let win = crate::simulator::regime_at(&e3.scenario, 75).unwrap();
        assert_eq!(win.dropout_rate, 0.60);
        assert_eq!(win.corruption_rate, 0.60);
        assert_eq!(e3.scenario.e.get(0, 0), 10.0);

        assert!(matches!(preset("exp9"), Err(Error::UnknownPreset(_))));
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn run_experiment_is_deterministic() {
        let mut spec = preset("exp2").unwrap();
        spec.mc_reps = 1;
        spec.scenario.horizon = 30;
        spec.scenario.segments = scalar_segments(&[(0, 30, 0.1, 1.0, 0.0, 0.0)]);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].seed, b[0].seed);
        assert_eq!(a[0].rmse_vb.to_bits(), b[0].rmse_vb.to_bits());
        for (sa, sb) in a[0].steps.iter().zip(&b[0].steps) {
            assert_eq!(sa.xhat_vb, sb.xhat_vb);
            assert_eq!(sa.eq_plugin, sb.eq_plugin);
        }
    }

    #[test]
    fn sweep_produces_point_by_rep_grid() {
        let mut spec = preset("exp1").unwrap();
        spec.mc_reps = 1;
        spec.scenario.horizon = 10;
        spec.scenario.segments = scalar_segments(&[(0, 10, 0.1, 1.0, 0.0, 0.0)]);
        let results = run_experiment(&spec).unwrap();
        assert_eq!(results.len(), 7);
        let ns: Vec<f64> = results.iter().map(|r| r.sweep_value.unwrap()).collect();
        assert_eq!(ns, vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]);
        // Each sweep point carries its own derived dataset seed.
        let mut seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 7);
    }

    #[test]
    fn editing_one_sweep_point_leaves_others_alone() {
        let mut spec = preset("exp4b").unwrap();
        spec.mc_reps = 1;
        spec.scenario.horizon = 12;
        spec.scenario.segments = scalar_segments(&[(0, 12, 0.05, 1.0, 0.0, 0.3)]);
        let base = run_experiment(&spec).unwrap();
        spec.sweep.as_mut().unwrap().values[0] = 0.7;
        let edited = run_experiment(&spec).unwrap();
        for i in 1..base.len() {
            assert_eq!(base[i].seed, edited[i].seed);
            assert_eq!(base[i].rmse_vb.to_bits(), edited[i].rmse_vb.to_bits());
        }
    }

    #[test]
    fn summarize_conventions() {
        let mk = |si: usize, v: f64| RunResult {
            sweep_index: si,
            sweep_value: Some(1.0),
            rep: 0,
            seed: 0,
            steps: vec![],
            rmse_vb: v,
            rmse_oracle: None,
            rmse_static: None,
            rate_rmse: v,
        };
        let single = summarize(&[mk(0, 2.5)]).unwrap();
        let row = single.iter().find(|r| r.metric == "rmse_vb").unwrap();
        assert_eq!((row.mean, row.sd), (2.5, 0.0));

        let same = summarize(&[mk(0, 1.5), mk(0, 1.5), mk(0, 1.5)]).unwrap();
        let row = same.iter().find(|r| r.metric == "rmse_vb").unwrap();
        assert_eq!(row.sd, 0.0);

        let spread = summarize(&[mk(0, 1.0), mk(0, 2.0), mk(0, 3.0)]).unwrap();
        let row = spread.iter().find(|r| r.metric == "rmse_vb").unwrap();
        assert_eq!(row.mean, 2.0);
        assert!((row.sd - 1.0).abs() < 1e-15);
        assert!((row.p10 - 1.2).abs() < 1e-12);
        assert!((row.p90 - 2.8).abs() < 1e-12);

        assert!(matches!(summarize(&[]), Err(Error::EmptyInput(_))));
    }
}
