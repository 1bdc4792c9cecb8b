//! Generative model: a linear-Gaussian state space observed by N sensors,
//! each draw gated by an observable reception indicator (packet dropout) and
//! a hidden cleanliness indicator (corruption by heavy extra noise).
//!
//! Noise variances and both Bernoulli rates follow piecewise-constant
//! schedules over the horizon, expressed as an ordered list of segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{gaussian_sample, GaussianBelief};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, Matrix, Vector};

/// One regime of the schedule: true noise covariances and failure rates on
/// the half-open time window `[start_k, end_k)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSegment {
    pub start_k: usize,
    pub end_k: usize,
    pub q_true: Matrix,
    pub r_true: Matrix,
    /// P(packet lost) = 1 - survival rate.
    pub dropout_rate: f64,
    /// P(observation corrupted | received) = 1 - clean rate.
    pub corruption_rate: f64,
}

/// Full generative specification.
///
/// Serializes field-for-field as JSON with matrices as nested row-major
/// arrays; unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub d_x: usize,
    pub d_y: usize,
    pub f: Matrix,
    pub h: Matrix,
    /// Corruption noise covariance (known to the filter).
    pub e: Matrix,
    pub n_sensors: usize,
    pub horizon: usize,
    pub segments: Vec<RegimeSegment>,
    pub x0_mean: Vector,
    pub x0_cov: Matrix,
}

/// Simulated truth plus per-sensor observations.
///
/// `y[i][k]` is `None` exactly where `gamma[i][k]` is false — absent
/// observations carry no value at all. The corruption mask is kept private;
/// it exists for evaluation and is never visible to filtering code paths.
#[derive(Clone, Debug)]
pub struct SensorDataset {
    pub x_true: Vec<Vector>,
    /// Indexed `[sensor][time]`.
    pub y: Vec<Vec<Option<Vector>>>,
    /// Reception mask, indexed `[sensor][time]`; observable by the filter.
    pub gamma: Vec<Vec<bool>>,
    pub config: ScenarioConfig,
    pub seed: u64,
    z_hidden: Option<Vec<Vec<bool>>>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d_x == 0 || self.d_y == 0 {
            return fail("state and observation dimensions must be positive".into());
        }
        if self.n_sensors == 0 {
            return fail("n_sensors must be positive".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        if self.f.rows() != self.d_x || self.f.cols() != self.d_x {
            return fail(format!("f must be {0}x{0}", self.d_x));
        }
        if self.h.rows() != self.d_y || self.h.cols() != self.d_x {
            return fail(format!("h must be {}x{}", self.d_y, self.d_x));
        }
        if self.e.rows() != self.d_y || !self.e.is_square() {
            return fail(format!("e must be {0}x{0}", self.d_y));
        }
        cholesky(&self.e).map_err(|_| Error::Config("e must be SPD".into()))?;
        if self.x0_mean.dim() != self.d_x {
            return fail("x0_mean dimension must equal d_x".into());
        }
        if self.x0_cov.rows() != self.d_x || !self.x0_cov.is_square() {
            return fail("x0_cov must be d_x x d_x".into());
        }
        cholesky(&self.x0_cov).map_err(|_| Error::Config("x0_cov must be SPD".into()))?;

        if self.segments.is_empty() {
            return fail("segments must be nonempty".into());
        }
        let mut cursor = 0usize;
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.start_k != cursor {
                return fail(format!(
                    "segment {i} starts at {} but [0,horizon) coverage requires {cursor}",
                    seg.start_k
                ));
            }
            if seg.end_k <= seg.start_k {
                return fail(format!("segment {i} has empty or inverted window"));
            }
            if !(0.0..=1.0).contains(&seg.dropout_rate)
                || !(0.0..=1.0).contains(&seg.corruption_rate)
            {
                return fail(format!("segment {i} rates must lie in [0,1]"));
            }
            if seg.q_true.rows() != self.d_x || !seg.q_true.is_square() {
                return fail(format!("segment {i} q_true must be d_x x d_x"));
            }
            if seg.r_true.rows() != self.d_y || !seg.r_true.is_square() {
                return fail(format!("segment {i} r_true must be d_y x d_y"));
            }
            cholesky(&seg.q_true)
                .map_err(|_| Error::Config(format!("segment {i} q_true must be SPD")))?;
            cholesky(&seg.r_true)
                .map_err(|_| Error::Config(format!("segment {i} r_true must be SPD")))?;
            cursor = seg.end_k;
        }
        if cursor != self.horizon {
            return fail(format!(
                "segments cover [0,{cursor}) but horizon is {}",
                self.horizon
            ));
        }
        Ok(())
    }

    /// Per-step true noise covariances, useful for baselines and metrics.
    pub fn q_schedule(&self) -> Vec<Matrix> {
        (0..self.horizon)
            .map(|k| self.segment_at(k).unwrap().q_true.clone())
            .collect()
    }

    pub fn r_schedule(&self) -> Vec<Matrix> {
        (0..self.horizon)
            .map(|k| self.segment_at(k).unwrap().r_true.clone())
            .collect()
    }

    /// Scheduled true corruption rate (1 - clean rate) per step.
    pub fn corruption_schedule(&self) -> Vec<f64> {
        (0..self.horizon)
            .map(|k| self.segment_at(k).unwrap().corruption_rate)
            .collect()
    }

    fn segment_at(&self, k: usize) -> Result<&RegimeSegment> {
        self.segments
            .iter()
            .find(|s| s.start_k <= k && k < s.end_k)
            .ok_or_else(|| {
                Error::Config(format!("time index {k} is not covered by any segment"))
            })
    }
}

/// The unique segment whose window contains `k`.
pub fn regime_at(config: &ScenarioConfig, k: usize) -> Result<&RegimeSegment> {
    if k >= config.horizon {
        return Err(Error::Config(format!(
            "time index {k} outside horizon {}",
            config.horizon
        )));
    }
    config.segment_at(k)
}

/// Derive an independent substream seed from a root seed, a stream label and
/// an index. Splitmix64 finalization over the FNV-1a label hash; adding
/// sensors or streams never perturbs previously derived streams.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in label.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = root ^ splitmix64(h) ^ splitmix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15));
    z = splitmix64(z);
    splitmix64(z)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generate a dataset under `config`, fully determined by `seed`.
///
/// The truth trajectory and each sensor own independent derived streams, and
/// every sensor draws its full (gamma, z, v, eps) tuple at every step
/// regardless of the masks, so editing rates or adding sensors never
/// perturbs the other draws.
pub fn generate(config: &ScenarioConfig, seed: u64) -> Result<SensorDataset> {
    config.validate()?;
    let t = config.horizon;

    let mut truth_rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "truth", 0));
    let x0 = GaussianBelief::new(config.x0_mean.clone(), config.x0_cov.clone())?;
    let mut x_prev = gaussian_sample(&x0, &mut truth_rng)?;
    let mut x_true = Vec::with_capacity(t);
    for k in 0..t {
        let seg = config.segment_at(k)?;
        let w = gaussian_sample(
            &GaussianBelief::new(Vector::zeros(config.d_x), seg.q_true.clone())?,
            &mut truth_rng,
        )?;
        let x_k = config.f.mul_vec(&x_prev).add(&w);
        x_true.push(x_k.clone());
        x_prev = x_k;
    }

    let zero_y = Vector::zeros(config.d_y);
    let mut y = Vec::with_capacity(config.n_sensors);
    let mut gamma = Vec::with_capacity(config.n_sensors);
    let mut z_hidden = Vec::with_capacity(config.n_sensors);
    for i in 0..config.n_sensors {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, "sensor", i as u64));
        let mut y_i = Vec::with_capacity(t);
        let mut g_i = Vec::with_capacity(t);
        let mut z_i = Vec::with_capacity(t);
        for k in 0..t {
            let seg = config.segment_at(k)?;
            let received = rng.random::<f64>() >= seg.dropout_rate;
            let clean = rng.random::<f64>() >= seg.corruption_rate;
            let v = gaussian_sample(
                &GaussianBelief::new(zero_y.clone(), seg.r_true.clone())?,
                &mut rng,
            )?;
            let eps = gaussian_sample(
                &GaussianBelief::new(zero_y.clone(), config.e.clone())?,
                &mut rng,
            )?;
            g_i.push(received);
            z_i.push(clean);
            if received {
                let mut obs = config.h.mul_vec(&x_true[k]).add(&v);
                if !clean {
                    obs = obs.add(&eps);
                }
                y_i.push(Some(obs));
            } else {
                y_i.push(None);
            }
        }
        y.push(y_i);
        gamma.push(g_i);
        z_hidden.push(z_i);
    }

    Ok(SensorDataset {
        x_true,
        y,
        gamma,
        config: config.clone(),
        seed,
        z_hidden: Some(z_hidden),
    })
}

impl SensorDataset {
    /// Rebuild a dataset from externally stored observations (e.g. CSV); the
    /// corruption mask is unknown in that case.
    pub fn from_parts(
        config: ScenarioConfig,
        seed: u64,
        x_true: Vec<Vector>,
        y: Vec<Vec<Option<Vector>>>,
        gamma: Vec<Vec<bool>>,
    ) -> Result<Self> {
        config.validate()?;
        if x_true.len() != config.horizon {
            return Err(Error::Config("truth length must equal horizon".into()));
        }
        if y.len() != config.n_sensors || gamma.len() != config.n_sensors {
            return Err(Error::Config("sensor count mismatch".into()));
        }
        for i in 0..config.n_sensors {
            if y[i].len() != config.horizon || gamma[i].len() != config.horizon {
                return Err(Error::Config(format!("sensor {i} series length mismatch")));
            }
            for k in 0..config.horizon {
                if gamma[i][k] != y[i][k].is_some() {
                    return Err(Error::Config(format!(
                        "sensor {i} at k={k}: observation presence must match gamma"
                    )));
                }
            }
        }
        Ok(Self {
            x_true,
            y,
            gamma,
            config,
            seed,
            z_hidden: None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn n_sensors(&self) -> usize {
        self.config.n_sensors
    }

    /// Hidden corruption mask, for evaluation only. Filtering code must not
    /// consume this; it is `None` for datasets loaded from external files.
    pub fn eval_corruption_mask(&self) -> Option<&Vec<Vec<bool>>> {
        self.z_hidden.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn scalar_scenario(
        n_sensors: usize,
        horizon: usize,
        q: f64,
        r: f64,
        dropout: f64,
        corruption: f64,
        e: f64,
    ) -> ScenarioConfig {
        ScenarioConfig {
            d_x: 1,
            d_y: 1,
            f: Matrix::scalar(1.0),
            h: Matrix::scalar(1.0),
            e: Matrix::scalar(e),
            n_sensors,
            horizon,
            segments: vec![RegimeSegment {
                start_k: 0,
                end_k: horizon,
                q_true: Matrix::scalar(q),
                r_true: Matrix::scalar(r),
                dropout_rate: dropout,
                corruption_rate: corruption,
            }],
            x0_mean: Vector::scalar(0.0),
            x0_cov: Matrix::scalar(1.0),
        }
    }

    #[test]
    fn zero_dropout_keeps_every_packet() {
        let cfg = scalar_scenario(8, 50, 0.1, 1.0, 0.0, 0.0, 10.0);
        let ds = generate(&cfg, 3).unwrap();
        assert!(ds.gamma.iter().flatten().all(|&g| g));
        assert!(ds.y.iter().flatten().all(|o| o.is_some()));
    }

    #[test]
    fn observation_noise_variance_matches_schedule() {
        // Clean scalar observations: Var(y - H x) should match r_true.
        let r_true = 2.3;
        let cfg = scalar_scenario(100, 120, 0.1, r_true, 0.0, 0.0, 10.0);
        let ds = generate(&cfg, 11).unwrap();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut n = 0usize;
        for i in 0..cfg.n_sensors {
            for k in 0..cfg.horizon {
                let resid = ds.y[i][k].as_ref().unwrap().get(0) - ds.x_true[k].get(0);
                sum += resid;
                sumsq += resid * resid;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(n >= 10_000);
        assert!(
            (var - r_true).abs() / r_true < 0.05,
            "empirical var {var} vs true {r_true}"
        );
    }

    #[test]
    fn regime_lookup() {
        let cfg = scalar_scenario(1, 20, 0.1, 1.0, 0.0, 0.0, 10.0);
        for k in 0..20 {
            assert_eq!(regime_at(&cfg, k).unwrap().start_k, 0);
        }
        assert!(matches!(regime_at(&cfg, 20), Err(Error::Config(_))));

        let mut two = cfg.clone();
        two.segments = vec![
            RegimeSegment {
                start_k: 0,
                end_k: 10,
                q_true: Matrix::scalar(0.1),
                r_true: Matrix::scalar(1.0),
                dropout_rate: 0.0,
                corruption_rate: 0.0,
            },
            RegimeSegment {
                start_k: 10,
                end_k: 20,
                q_true: Matrix::scalar(30.0),
                r_true: Matrix::scalar(1.0),
                dropout_rate: 0.0,
                corruption_rate: 0.0,
            },
        ];
        assert_eq!(regime_at(&two, 9).unwrap().q_true.get(0, 0), 0.1);
        assert_eq!(regime_at(&two, 10).unwrap().q_true.get(0, 0), 30.0);
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let cfg = scalar_scenario(4, 30, 0.1, 1.0, 0.3, 0.2, 10.0);
        let a = generate(&cfg, 99).unwrap();
        let b = generate(&cfg, 99).unwrap();
        assert_eq!(a.x_true, b.x_true);
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.y, b.y);
        assert_eq!(a.eval_corruption_mask(), b.eval_corruption_mask());

        for s in 0..10u64 {
            let c = generate(&cfg, 2 * s).unwrap();
            let d = generate(&cfg, 2 * s + 1).unwrap();
            assert_ne!(c.gamma, d.gamma, "seed pair {s} produced identical masks");
        }
    }

    #[test]
    fn adding_sensors_preserves_existing_streams() {
        let small = scalar_scenario(3, 40, 0.1, 1.0, 0.2, 0.1, 10.0);
        let mut big = small.clone();
        big.n_sensors = 6;
        let a = generate(&small, 5).unwrap();
        let b = generate(&big, 5).unwrap();
        assert_eq!(a.x_true, b.x_true);
        for i in 0..3 {
            assert_eq!(a.y[i], b.y[i]);
            assert_eq!(a.gamma[i], b.gamma[i]);
        }
    }

    #[test]
    fn masks_are_uncorrelated() {
        let cfg = scalar_scenario(200, 60, 0.1, 1.0, 0.4, 0.35, 10.0);
        let ds = generate(&cfg, 17).unwrap();
        let z = ds.eval_corruption_mask().unwrap();
        let n = (cfg.n_sensors * cfg.horizon) as f64;
        let mut mg = 0.0;
        let mut mz = 0.0;
        for i in 0..cfg.n_sensors {
            for k in 0..cfg.horizon {
                mg += ds.gamma[i][k] as u8 as f64;
                mz += z[i][k] as u8 as f64;
            }
        }
        mg /= n;
        mz /= n;
        let mut cov = 0.0;
        let mut vg = 0.0;
        let mut vz = 0.0;
        for i in 0..cfg.n_sensors {
            for k in 0..cfg.horizon {
                let g = ds.gamma[i][k] as u8 as f64 - mg;
                let c = z[i][k] as u8 as f64 - mz;
                cov += g * c;
                vg += g * g;
                vz += c * c;
            }
        }
        let corr = cov / (vg.sqrt() * vz.sqrt());
        assert!(n >= 10_000.0);
        assert!(corr.abs() < 0.02, "mask correlation {corr}");
    }

    #[test]
    fn dimensions_conserved() {
        let cfg = ScenarioConfig {
            d_x: 2,
            d_y: 1,
            f: Matrix::from_nested(&[vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap(),
            h: Matrix::new(1, 2, vec![1.0, 0.0]).unwrap(),
            e: Matrix::scalar(5.0),
            n_sensors: 3,
            horizon: 25,
            segments: vec![RegimeSegment {
                start_k: 0,
                end_k: 25,
                q_true: Matrix::diag(&[0.1, 0.05]),
                r_true: Matrix::scalar(1.0),
                dropout_rate: 0.1,
                corruption_rate: 0.1,
            }],
            x0_mean: Vector::zeros(2),
            x0_cov: Matrix::identity(2),
        };
        let ds = generate(&cfg, 1).unwrap();
        assert!(ds.x_true.iter().all(|x| x.dim() == 2));
        assert!(ds
            .y
            .iter()
            .flatten()
            .flatten()
            .all(|obs| obs.dim() == 1));
    }

    #[test]
    fn invalid_segment_coverage_rejected() {
        let mut cfg = scalar_scenario(1, 20, 0.1, 1.0, 0.0, 0.0, 10.0);
        cfg.segments[0].end_k = 15;
        assert!(matches!(generate(&cfg, 0), Err(Error::Config(_))));
        let mut gap = scalar_scenario(1, 20, 0.1, 1.0, 0.0, 0.0, 10.0);
        gap.segments = vec![
            RegimeSegment {
                start_k: 0,
                end_k: 8,
                q_true: Matrix::scalar(0.1),
                r_true: Matrix::scalar(1.0),
                dropout_rate: 0.0,
                corruption_rate: 0.0,
            },
            RegimeSegment {
                start_k: 10,
                end_k: 20,
                q_true: Matrix::scalar(0.1),
                r_true: Matrix::scalar(1.0),
                dropout_rate: 0.0,
                corruption_rate: 0.0,
            },
        ];
        assert!(matches!(gap.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn scenario_json_round_trip_rejects_unknown_keys() {
        let cfg = scalar_scenario(2, 10, 0.1, 1.0, 0.0, 0.0, 10.0);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("tpyo".into(), serde_json::json!(1));
        let err = serde_json::from_value::<ScenarioConfig>(v);
        assert!(err.is_err());
    }
}
