//! Conjugate-family parameter containers and posterior expectations.
//!
//! Convention for the inverse-Wishart: `IW(dof, scale)` is parameterized so
//! that the precision follows `Wishart(dof, scale^-1)`, hence
//! `E[X^-1] = dof * scale^-1` and `E[X] = scale / (dof - dim - 1)`. The
//! adaptive filter's expected-precision refresh fixes this convention and
//! everything else here is consistent with it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, digamma, logdet_spd, spd_inverse, Matrix, Vector};

/// Inverse-Wishart hyper-parameters (degrees of freedom, SPD scale matrix).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseWishartParams {
    pub dof: f64,
    pub scale: Matrix,
}

/// Beta hyper-parameters (success/failure pseudo-counts).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

/// Gaussian state belief: mean and SPD covariance.
///
/// Plays both the predictive role (x_pred, P_pred) and the posterior role
/// (x_post, P_post) depending on where it sits in the filter recursion.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl InverseWishartParams {
    pub fn new(dof: f64, scale: Matrix) -> Result<Self> {
        if !scale.is_square() {
            return Err(Error::Config("inverse-Wishart scale must be square".into()));
        }
        let dim = scale.rows() as f64;
        if !(dof > dim - 1.0) {
            return Err(Error::Config(format!(
                "inverse-Wishart dof {dof} must exceed dim - 1 = {}",
                dim - 1.0
            )));
        }
        cholesky(&scale)?;
        Ok(Self { dof, scale })
    }

    pub fn dim(&self) -> usize {
        self.scale.rows()
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.dof, self.scale.clone()).map(|_| ())
    }
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::Config(format!(
                "Beta parameters must be positive, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    /// Uniform prior Beta(1, 1).
    pub fn uniform() -> Self {
        Self { a: 1.0, b: 1.0 }
    }
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self> {
        if cov.rows() != mean.dim() || !cov.is_square() {
            return Err(Error::Config(
                "belief mean/covariance dimensions disagree".into(),
            ));
        }
        cholesky(&cov)?;
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }
}

/// E[X] = scale / (dof - dim - 1); defined only for dof > dim + 1.
pub fn iw_mean(p: &InverseWishartParams) -> Result<Matrix> {
    let dim = p.dim();
    let denom = p.dof - dim as f64 - 1.0;
    if denom <= 0.0 {
        return Err(Error::MeanUndefined { dof: p.dof, dim });
    }
    Ok(p.scale.scale(1.0 / denom))
}

/// E[X^-1] = dof * scale^-1.
pub fn iw_mean_precision(p: &InverseWishartParams) -> Result<Matrix> {
    Ok(spd_inverse(&p.scale)?.scale(p.dof))
}

/// E[ln |X|] = ln|scale| - dim*ln 2 - sum_j psi((dof + 1 - j)/2).
pub fn iw_expected_logdet(p: &InverseWishartParams) -> Result<f64> {
    let dim = p.dim();
    let mut acc = logdet_spd(&p.scale)? - dim as f64 * std::f64::consts::LN_2;
    for j in 1..=dim {
        acc -= digamma((p.dof + 1.0 - j as f64) / 2.0)?;
    }
    Ok(acc)
}

/// E[beta] = a / (a + b).
pub fn beta_mean(p: &BetaParams) -> f64 {
    p.a / (p.a + p.b)
}

/// E[ln beta] = psi(a) - psi(a + b).
pub fn beta_expected_log(p: &BetaParams) -> f64 {
    // Parameters are validated positive at construction.
    digamma(p.a).unwrap() - digamma(p.a + p.b).unwrap()
}

/// E[ln(1 - beta)] = psi(b) - psi(a + b).
pub fn beta_expected_log_complement(p: &BetaParams) -> f64 {
    digamma(p.b).unwrap() - digamma(p.a + p.b).unwrap()
}

/// Conjugate Beta update with (possibly fractional) success/failure counts.
pub fn beta_posterior(prior: &BetaParams, successes: f64, failures: f64) -> BetaParams {
    debug_assert!(successes >= 0.0 && failures >= 0.0);
    BetaParams {
        a: prior.a + successes,
        b: prior.b + failures,
    }
}

/// Draw from N(mean, cov) as mean + L z with L the Cholesky factor of cov.
pub fn gaussian_sample<R: Rng + ?Sized>(belief: &GaussianBelief, rng: &mut R) -> Result<Vector> {
    let l = cholesky(&belief.cov)?;
    let d = belief.dim();
    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = belief.mean.as_slice().to_vec();
    for i in 0..d {
        for j in 0..=i {
            out[i] += l.get(i, j) * z[j];
        }
    }
    Vector::new(out)
}
