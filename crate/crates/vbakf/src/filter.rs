//! The adaptive filter: per-step variational iteration with responsibility
//! gating and sequential multi-sensor fusion, plus two Kalman baselines.
//!
//! Each time step runs the reception-rate update once, then `n_iters` rounds
//! of: prediction using the current expected process precision, per-sensor
//! clean/corrupt responsibilities evaluated at the predictive belief, gated
//! sequential fusion across sensors, and conjugate refreshes of the clean
//! rate, the observation-noise posterior and the process-noise posterior.
//! Conjugate priors re-anchor at the static hyper-parameters every step.

use serde::{Deserialize, Serialize};

use crate::distributions::{
    beta_expected_log, beta_expected_log_complement, beta_mean, beta_posterior, iw_expected_logdet,
    iw_mean, iw_mean_precision, BetaParams, GaussianBelief, InverseWishartParams,
};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, logdet_spd, spd_inverse, symmetrize, Matrix, Vector};
use crate::simulator::SensorDataset;

/// Whether the filter models the corruption channel.
///
/// `Infer` runs the full dual-mask machinery. `Disabled` treats every
/// received observation as clean (responsibilities pinned to one, clean-rate
/// posterior left at its prior), which is the right configuration for
/// scenarios where corruption is out of the picture entirely.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    #[default]
    Infer,
    Disabled,
}

/// Static hyper-parameters of the variational filter.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VbHyperParams {
    /// Process-noise prior (nu_0, V_0).
    pub q_prior: InverseWishartParams,
    /// Observation-noise prior (u_0, U_0).
    pub r_prior: InverseWishartParams,
    /// Reception-rate prior.
    pub rho_prior: BetaParams,
    /// Clean-rate prior.
    pub beta_prior: BetaParams,
    /// Corruption noise covariance (known).
    pub e: Matrix,
    /// Number of VI iterations per time step.
    pub n_iters: usize,
    #[serde(default)]
    pub corruption: CorruptionMode,
}

impl VbHyperParams {
    /// Weakly informative defaults: prior means I for R and 0.5 I for Q,
    /// uniform Beta priors, 20 VI iterations.
    pub fn defaults(d_x: usize, d_y: usize, e: Matrix) -> Self {
        let u0 = d_y as f64 + 3.0;
        let nu0 = d_x as f64 + 3.0;
        Self {
            q_prior: InverseWishartParams {
                dof: nu0,
                scale: Matrix::identity(d_x).scale(0.5 * (nu0 - d_x as f64 - 1.0)),
            },
            r_prior: InverseWishartParams {
                dof: u0,
                scale: Matrix::identity(d_y).scale(u0 - d_y as f64 - 1.0),
            },
            rho_prior: BetaParams::uniform(),
            beta_prior: BetaParams::uniform(),
            e,
            n_iters: 20,
            corruption: CorruptionMode::Infer,
        }
    }

    pub fn validate(&self, d_x: usize, d_y: usize) -> Result<()> {
        self.q_prior.validate()?;
        self.r_prior.validate()?;
        if self.q_prior.dim() != d_x {
            return Err(Error::Config("q_prior dimension must equal d_x".into()));
        }
        if self.r_prior.dim() != d_y {
            return Err(Error::Config("r_prior dimension must equal d_y".into()));
        }
        // The corrupt-branch statistics plug in the posterior mean of R,
        // which only exists for dof > d_y + 1.
        if self.r_prior.dof <= d_y as f64 + 1.0 {
            return Err(Error::Config(format!(
                "r_prior dof {} must exceed d_y + 1 so the plug-in mean exists",
                self.r_prior.dof
            )));
        }
        BetaParams::new(self.rho_prior.a, self.rho_prior.b)?;
        BetaParams::new(self.beta_prior.a, self.beta_prior.b)?;
        if self.e.rows() != d_y || !self.e.is_square() {
            return Err(Error::Config("e must be d_y x d_y".into()));
        }
        cholesky(&self.e).map_err(|_| Error::Config("e must be SPD".into()))?;
        if self.n_iters == 0 {
            return Err(Error::Config("n_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Quantities carried across VI iterations within one time step.
#[derive(Clone, Debug)]
pub struct IterationState {
    /// Current expected process precision E[Q^-1].
    pub eq_inv: Matrix,
    /// Current expected observation precision E[R^-1].
    pub er_inv: Matrix,
    /// Current observation-noise posterior.
    pub r_post: InverseWishartParams,
    /// Current clean-rate posterior.
    pub beta_post: BetaParams,
    /// Per-sensor responsibilities; meaningful where the packet arrived.
    pub pi: Vec<f64>,
}

/// Per-step inference output.
#[derive(Clone, Debug)]
pub struct VbPosterior {
    pub belief: GaussianBelief,
    pub q_post: InverseWishartParams,
    pub r_post: InverseWishartParams,
    pub rho_post: BetaParams,
    pub beta_post: BetaParams,
    pub pi: Vec<f64>,
    /// E[1 - rho]: posterior mean dropout rate.
    pub dropout_rate_est: f64,
    /// E[1 - beta]: posterior mean corruption rate.
    pub corruption_rate_est: f64,
}

/// Time update: mean through the dynamics, covariance inflated by the
/// inverse of the expected process precision.
pub fn predict(prev: &GaussianBelief, f: &Matrix, eq_inv: &Matrix) -> Result<GaussianBelief> {
    let mean = f.mul_vec(&prev.mean);
    let process_cov = spd_inverse(eq_inv)?;
    let cov = symmetrize(
        &f.matmul(&prev.cov)
            .matmul(&f.transpose())
            .add(&process_cov),
    );
    Ok(GaussianBelief { mean, cov })
}

#[inline]
fn delta_statistic(rate_term: f64, logdet_term: f64, quad: f64, trace_term: f64) -> f64 {
    rate_term - 0.5 * logdet_term - 0.5 * quad - 0.5 * trace_term
}

/// Log-evidence statistic for the clean hypothesis, up to the shared
/// Gaussian normalization constant.
pub fn delta_clean(
    y: &Vector,
    pred: &GaussianBelief,
    h: &Matrix,
    er_inv: &Matrix,
    e_logdet_r: f64,
    e_log_beta: f64,
) -> f64 {
    let resid = y.sub(&h.mul_vec(&pred.mean));
    let hpht = h.matmul(&pred.cov).matmul(&h.transpose());
    let tr = er_inv.matmul(&hpht).trace();
    delta_statistic(e_log_beta, e_logdet_r, er_inv.quadratic_form(&resid), tr)
}

/// Log-evidence statistic for the corrupt hypothesis with the posterior-mean
/// plug-ins for (R + E).
pub fn delta_corrupt(
    y: &Vector,
    pred: &GaussianBelief,
    h: &Matrix,
    r_mean_plus_e_inv: &Matrix,
    logdet_r_plus_e: f64,
    e_log_1mbeta: f64,
) -> f64 {
    let resid = y.sub(&h.mul_vec(&pred.mean));
    let hpht = h.matmul(&pred.cov).matmul(&h.transpose());
    let tr = r_mean_plus_e_inv.matmul(&hpht).trace();
    delta_statistic(
        e_log_1mbeta,
        logdet_r_plus_e,
        r_mean_plus_e_inv.quadratic_form(&resid),
        tr,
    )
}

/// Responsibility of the clean hypothesis from its log-evidence statistics,
/// exp-normalized with a log-sum-exp shift so extreme magnitudes saturate
/// to 0 or 1 instead of overflowing.
pub fn responsibility(d1: f64, d0: f64) -> f64 {
    let m = d1.max(d0);
    let e1 = (d1 - m).exp();
    let e0 = (d0 - m).exp();
    e1 / (e1 + e0)
}

/// Per-sensor observation precision: convex combination of the clean and
/// corrupted precisions weighted by the responsibility.
pub fn effective_precision(pi: f64, er_inv: &Matrix, r_plus_e_inv: &Matrix) -> Matrix {
    debug_assert!((0.0..=1.0).contains(&pi));
    symmetrize(&er_inv.scale(pi).add(&r_plus_e_inv.scale(1.0 - pi)))
}

/// Measurement update gated by the reception indicator: a dropped packet
/// contributes a zero gain and leaves the belief untouched.
pub fn gated_update(
    inter: &GaussianBelief,
    y: Option<&Vector>,
    gamma: bool,
    omega: &Matrix,
    h: &Matrix,
) -> Result<GaussianBelief> {
    if !gamma {
        return Ok(inter.clone());
    }
    let y = y.expect("a received observation must carry a value");
    let omega_inv = spd_inverse(omega)?;
    let pht = inter.cov.matmul(&h.transpose());
    let s = symmetrize(&h.matmul(&pht).add(&omega_inv));
    let gain = pht.matmul(&spd_inverse(&s)?);
    let resid = y.sub(&h.mul_vec(&inter.mean));
    let mean = inter.mean.add(&gain.mul_vec(&resid));
    let d = inter.dim();
    let i_kh = Matrix::identity(d).sub(&gain.matmul(h));
    let cov = symmetrize(&i_kh.matmul(&inter.cov));
    Ok(GaussianBelief { mean, cov })
}

/// Reception-rate conjugate update from the observed packet counts. Runs
/// once per time step, outside the VI loop.
pub fn update_rho(prior: &BetaParams, received_count: usize, n_sensors: usize) -> BetaParams {
    debug_assert!(received_count <= n_sensors);
    beta_posterior(
        prior,
        received_count as f64,
        (n_sensors - received_count) as f64,
    )
}

/// Clean-rate conjugate update with responsibility soft counts over the
/// received sensors only.
pub fn update_beta(prior: &BetaParams, gammas: &[bool], pis: &[f64]) -> BetaParams {
    assert_eq!(gammas.len(), pis.len());
    let mut successes = 0.0;
    let mut failures = 0.0;
    for (g, p) in gammas.iter().zip(pis) {
        if *g {
            successes += p;
            failures += 1.0 - p;
        }
    }
    beta_posterior(prior, successes, failures)
}

/// Observation-noise conjugate update: residuals at the fused posterior
/// mean, each sensor's contribution gated by its responsibility.
pub fn update_r(
    prior: &InverseWishartParams,
    post_belief: &GaussianBelief,
    ys: &[Option<&Vector>],
    gammas: &[bool],
    pis: &[f64],
    h: &Matrix,
) -> InverseWishartParams {
    assert_eq!(ys.len(), gammas.len());
    assert_eq!(ys.len(), pis.len());
    let hx = h.mul_vec(&post_belief.mean);
    let hpht = h.matmul(&post_belief.cov).matmul(&h.transpose());
    let mut dof = prior.dof;
    let mut scale = prior.scale.clone();
    for i in 0..ys.len() {
        if !gammas[i] || pis[i] == 0.0 {
            continue;
        }
        let resid = ys[i]
            .expect("a received observation must carry a value")
            .sub(&hx);
        dof += pis[i];
        scale.add_scaled_assign(&resid.outer(&resid), pis[i]);
        scale.add_scaled_assign(&hpht, pis[i]);
    }
    InverseWishartParams {
        dof,
        scale: symmetrize(&scale),
    }
}

/// Process-noise conjugate update with the single-lag smoother cross term
/// P_cross = P_post * P_pred^-1 * F * P_prev.
///
/// If inverting the predictive covariance fails even with jitter, the cross
/// term is dropped for this iteration (logged as a warning); the remaining
/// terms keep the scale SPD.
pub fn update_q(
    prior: &InverseWishartParams,
    post_belief: &GaussianBelief,
    prev_belief: &GaussianBelief,
    pred_cov: &Matrix,
    f: &Matrix,
) -> Result<InverseWishartParams> {
    let innovation = post_belief.mean.sub(&f.mul_vec(&prev_belief.mean));
    let f_prev_ft = f.matmul(&prev_belief.cov).matmul(&f.transpose());
    let mut scale = prior
        .scale
        .add(&innovation.outer(&innovation))
        .add(&post_belief.cov)
        .add(&f_prev_ft);
    match spd_inverse(pred_cov) {
        Ok(pred_inv) => {
            let cross = post_belief
                .cov
                .matmul(&pred_inv)
                .matmul(f)
                .matmul(&prev_belief.cov);
            let sym_cross = f
                .matmul(&cross.transpose())
                .add(&cross.matmul(&f.transpose()));
            scale = scale.sub(&sym_cross);
        }
        Err(e) => {
            log::warn!("process-noise update dropped its smoother cross term: {e}");
        }
    }
    let scale = symmetrize(&scale);
    cholesky(&scale)?;
    Ok(InverseWishartParams {
        dof: prior.dof + 1.0,
        scale,
    })
}

struct StepOverrides<'a> {
    /// Freeze (E[Q^-1], E[R^-1]) at these values instead of refreshing them
    /// from the conjugate posteriors.
    frozen_precisions: Option<(&'a Matrix, &'a Matrix)>,
}

/// One full time step of the variational filter.
pub fn vb_step(
    prev: &GaussianBelief,
    ys: &[Option<&Vector>],
    gammas: &[bool],
    hyper: &VbHyperParams,
    f: &Matrix,
    h: &Matrix,
) -> Result<VbPosterior> {
    vb_step_impl(
        prev,
        ys,
        gammas,
        hyper,
        f,
        h,
        &StepOverrides {
            frozen_precisions: None,
        },
        0,
    )
}

#[allow(clippy::too_many_arguments)]
fn vb_step_impl(
    prev: &GaussianBelief,
    ys: &[Option<&Vector>],
    gammas: &[bool],
    hyper: &VbHyperParams,
    f: &Matrix,
    h: &Matrix,
    overrides: &StepOverrides,
    step: usize,
) -> Result<VbPosterior> {
    let n = gammas.len();
    assert_eq!(ys.len(), n, "observation and gamma lengths disagree");
    let ctx = |e: Error, j: usize, sensor: Option<usize>| e.at_step(step, j, sensor);

    let received = gammas.iter().filter(|g| **g).count();
    let rho_post = update_rho(&hyper.rho_prior, received, n);
    let dropout_rate_est = 1.0 - beta_mean(&rho_post);

    let infer_corruption = hyper.corruption == CorruptionMode::Infer;
    let mut state = IterationState {
        eq_inv: match overrides.frozen_precisions {
            Some((eq, _)) => eq.clone(),
            None => iw_mean_precision(&hyper.q_prior).map_err(|e| ctx(e, 0, None))?,
        },
        er_inv: match overrides.frozen_precisions {
            Some((_, er)) => er.clone(),
            None => iw_mean_precision(&hyper.r_prior).map_err(|e| ctx(e, 0, None))?,
        },
        r_post: hyper.r_prior.clone(),
        beta_post: hyper.beta_prior,
        pi: vec![1.0; n],
    };
    let mut q_post = hyper.q_prior.clone();
    let mut belief = prev.clone();

    for j in 1..=hyper.n_iters {
        let pred = predict(prev, f, &state.eq_inv).map_err(|e| ctx(e, j, None))?;

        // Corrupt-branch plug-ins and the predictive-trace penalties are
        // shared across sensors within an iteration; hoist them so the
        // sensor loop only touches its own residual.
        let mut r_plus_e_inv = None;
        if infer_corruption {
            let e_log_beta = beta_expected_log(&state.beta_post);
            let e_log_1mbeta = beta_expected_log_complement(&state.beta_post);
            let e_logdet_r = iw_expected_logdet(&state.r_post).map_err(|e| ctx(e, j, None))?;
            let r_bar = iw_mean(&state.r_post).map_err(|e| ctx(e, j, None))?;
            let r_plus_e = r_bar.add(&hyper.e);
            let rpe_inv = spd_inverse(&r_plus_e).map_err(|e| ctx(e, j, None))?;
            let logdet_r_plus_e = logdet_spd(&r_plus_e).map_err(|e| ctx(e, j, None))?;
            let hpht = h.matmul(&pred.cov).matmul(&h.transpose());
            let tr_clean = state.er_inv.matmul(&hpht).trace();
            let tr_corrupt = rpe_inv.matmul(&hpht).trace();
            let hx_pred = h.mul_vec(&pred.mean);
            for i in 0..n {
                state.pi[i] = if gammas[i] {
                    let y = ys[i].expect("a received observation must carry a value");
                    let resid = y.sub(&hx_pred);
                    let d1 = delta_statistic(
                        e_log_beta,
                        e_logdet_r,
                        state.er_inv.quadratic_form(&resid),
                        tr_clean,
                    );
                    let d0 = delta_statistic(
                        e_log_1mbeta,
                        logdet_r_plus_e,
                        rpe_inv.quadratic_form(&resid),
                        tr_corrupt,
                    );
                    responsibility(d1, d0)
                } else {
                    // No observation: the cleanliness posterior carries only
                    // the rate prior terms.
                    responsibility(e_log_beta, e_log_1mbeta)
                };
            }
            r_plus_e_inv = Some(rpe_inv);
        }

        // Gated sequential fusion; a dropped packet leaves the intermediate
        // belief exactly as it was.
        let mut inter = pred.clone();
        for i in 0..n {
            if !gammas[i] {
                continue;
            }
            let omega = r_plus_e_inv
                .as_ref()
                .map(|rpe_inv| effective_precision(state.pi[i], &state.er_inv, rpe_inv));
            inter = gated_update(&inter, ys[i], true, omega.as_ref().unwrap_or(&state.er_inv), h)
                .map_err(|e| ctx(e, j, Some(i)))?;
        }

        if infer_corruption {
            state.beta_post = update_beta(&hyper.beta_prior, gammas, &state.pi);
        }
        state.r_post = update_r(&hyper.r_prior, &inter, ys, gammas, &state.pi, h);
        q_post =
            update_q(&hyper.q_prior, &inter, prev, &pred.cov, f).map_err(|e| ctx(e, j, None))?;

        if overrides.frozen_precisions.is_none() {
            state.er_inv = iw_mean_precision(&state.r_post).map_err(|e| ctx(e, j, None))?;
            state.eq_inv = iw_mean_precision(&q_post).map_err(|e| ctx(e, j, None))?;
        }
        belief = inter;
    }

    let corruption_rate_est = 1.0 - beta_mean(&state.beta_post);
    Ok(VbPosterior {
        belief,
        q_post,
        r_post: state.r_post,
        rho_post,
        beta_post: state.beta_post,
        pi: state.pi,
        dropout_rate_est,
        corruption_rate_est,
    })
}

fn step_observations(dataset: &SensorDataset, k: usize) -> (Vec<Option<&Vector>>, Vec<bool>) {
    let n = dataset.n_sensors();
    let mut ys = Vec::with_capacity(n);
    let mut gs = Vec::with_capacity(n);
    for i in 0..n {
        ys.push(dataset.y[i][k].as_ref());
        gs.push(dataset.gamma[i][k]);
    }
    (ys, gs)
}

/// Run the variational filter over a full dataset.
pub fn run_filter(
    dataset: &SensorDataset,
    hyper: &VbHyperParams,
    x0: &GaussianBelief,
) -> Result<Vec<VbPosterior>> {
    hyper.validate(dataset.config.d_x, dataset.config.d_y)?;
    if x0.dim() != dataset.config.d_x {
        return Err(Error::Config("x0 dimension must equal d_x".into()));
    }
    let f = &dataset.config.f;
    let h = &dataset.config.h;
    let mut belief = x0.clone();
    let mut out = Vec::with_capacity(dataset.horizon());
    for k in 0..dataset.horizon() {
        let (ys, gs) = step_observations(dataset, k);
        let post = vb_step_impl(
            &belief,
            &ys,
            &gs,
            hyper,
            f,
            h,
            &StepOverrides {
                frozen_precisions: None,
            },
            k,
        )?;
        belief = post.belief.clone();
        out.push(post);
    }
    Ok(out)
}

/// Diagnostic mode: responsibilities pinned to one, expected precisions
/// frozen at the true per-step values, a single VI iteration. With these
/// settings the variational step collapses to a sequential Kalman update,
/// which [`kalman_oracle`] implements independently.
pub fn run_filter_degenerate(
    dataset: &SensorDataset,
    x0: &GaussianBelief,
) -> Result<Vec<VbPosterior>> {
    let cfg = &dataset.config;
    let mut hyper = VbHyperParams::defaults(cfg.d_x, cfg.d_y, cfg.e.clone());
    hyper.n_iters = 1;
    hyper.corruption = CorruptionMode::Disabled;
    let qs = cfg.q_schedule();
    let rs = cfg.r_schedule();
    let mut belief = x0.clone();
    let mut out = Vec::with_capacity(dataset.horizon());
    for k in 0..dataset.horizon() {
        let eq_inv = spd_inverse(&qs[k])?;
        let er_inv = spd_inverse(&rs[k])?;
        let (ys, gs) = step_observations(dataset, k);
        let post = vb_step_impl(
            &belief,
            &ys,
            &gs,
            &hyper,
            &cfg.f,
            &cfg.h,
            &StepOverrides {
                frozen_precisions: Some((&eq_inv, &er_inv)),
            },
            k,
        )?;
        belief = post.belief.clone();
        out.push(post);
    }
    Ok(out)
}

/// Textbook sequential Kalman filter over the received observations with
/// explicit per-step noise covariances. Corruption is not modeled.
pub fn kalman_with_schedules(
    dataset: &SensorDataset,
    q_schedule: &[Matrix],
    r_schedule: &[Matrix],
    x0: &GaussianBelief,
) -> Result<Vec<GaussianBelief>> {
    let cfg = &dataset.config;
    let t = dataset.horizon();
    if q_schedule.len() != t || r_schedule.len() != t {
        return Err(Error::LengthMismatch(q_schedule.len(), t));
    }
    let f = &cfg.f;
    let h = &cfg.h;
    let d = cfg.d_x;
    let mut belief = x0.clone();
    let mut out = Vec::with_capacity(t);
    for k in 0..t {
        let mean = f.mul_vec(&belief.mean);
        let cov = symmetrize(
            &f.matmul(&belief.cov)
                .matmul(&f.transpose())
                .add(&q_schedule[k]),
        );
        let mut inter = GaussianBelief { mean, cov };
        for i in 0..dataset.n_sensors() {
            if !dataset.gamma[i][k] {
                continue;
            }
            let y = dataset.y[i][k].as_ref().expect("received packet has value");
            let pht = inter.cov.matmul(&h.transpose());
            let s = symmetrize(&h.matmul(&pht).add(&r_schedule[k]));
            let gain = pht.matmul(&spd_inverse(&s)?);
            let resid = y.sub(&h.mul_vec(&inter.mean));
            let mean = inter.mean.add(&gain.mul_vec(&resid));
            let cov = symmetrize(&Matrix::identity(d).sub(&gain.matmul(h)).matmul(&inter.cov));
            inter = GaussianBelief { mean, cov };
        }
        belief = inter.clone();
        out.push(inter);
    }
    Ok(out)
}

/// Kalman baseline with full knowledge of the true noise schedules.
pub fn kalman_oracle(dataset: &SensorDataset, x0: &GaussianBelief) -> Result<Vec<GaussianBelief>> {
    kalman_with_schedules(
        dataset,
        &dataset.config.q_schedule(),
        &dataset.config.r_schedule(),
        x0,
    )
}

/// Kalman baseline locked to fixed nominal noise covariances.
pub fn kalman_static(
    dataset: &SensorDataset,
    q_nominal: &Matrix,
    r_nominal: &Matrix,
    x0: &GaussianBelief,
) -> Result<Vec<GaussianBelief>> {
    let t = dataset.horizon();
    kalman_with_schedules(
        dataset,
        &vec![q_nominal.clone(); t],
        &vec![r_nominal.clone(); t],
        x0,
    )
}
