//! Per-class GMM-HMM models: scoring, classification, confidence.
//!
//! Each class is modeled by a left-to-right hidden Markov model with
//! self-loops and diagonal-covariance Gaussian-mixture emissions. Decoding
//! uses the forward likelihood; confidence is the winning class's
//! length-normalized log posterior over the six class likelihoods.

mod io;
mod train;

pub use io::{load_model_set, save_model_set, MODEL_FORMAT_VERSION};
pub use train::{baum_welch, init_model, total_log_likelihood, TrainOptions};

use ndarray::{Array2, ArrayView2};

use crate::corpus::{LabelClass, PerClass};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;

/// One per-class hidden Markov model with GMM emissions.
///
/// Transition structure is left-to-right with self-loops: `A[i][j] == 0`
/// unless `j == i` or `j == i + 1`. Mixtures with zero weight are dead slots
/// kept for shape stability; they never contribute to emission densities.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmHmm {
    pub class: LabelClass,
    pub num_states: usize,
    pub num_mixtures: usize,
    pub feature_dim: usize,
    /// Initial state distribution, length S.
    pub initial: Vec<f64>,
    /// Transition matrix, S x S.
    pub transitions: Vec<Vec<f64>>,
    /// Mixture weights, S x M; every row sums to 1.
    pub weights: Vec<Vec<f64>>,
    /// Mixture means, S x M x D.
    pub means: Vec<Vec<Vec<f64>>>,
    /// Diagonal variances, S x M x D, floored away from zero.
    pub variances: Vec<Vec<Vec<f64>>>,
}

const PROB_TOL: f64 = 1e-9;

fn is_distribution(row: &[f64]) -> bool {
    row.iter().all(|p| (0.0..=1.0 + PROB_TOL).contains(p))
        && (row.iter().sum::<f64>() - 1.0).abs() <= PROB_TOL
}

impl GmmHmm {
    /// Check every structural invariant; used after init and each EM step.
    pub fn validate(&self) -> Result<()> {
        let (s, m, d) = (self.num_states, self.num_mixtures, self.feature_dim);
        let fail = |msg: String| Err(Error::Validation(format!("model {}: {msg}", self.class)));
        if self.initial.len() != s
            || self.transitions.len() != s
            || self.weights.len() != s
            || self.means.len() != s
            || self.variances.len() != s
        {
            return fail("state dimension mismatch".into());
        }
        if !is_distribution(&self.initial) {
            return fail(format!("initial distribution sums to {}", self.initial.iter().sum::<f64>()));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row.len() != s || !is_distribution(row) {
                return fail(format!("transition row {i} is not a distribution"));
            }
            for (j, &p) in row.iter().enumerate() {
                if (j < i || j > i + 1) && p != 0.0 {
                    return fail(format!("transition {i}->{j} breaks left-to-right structure"));
                }
            }
        }
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != m || !is_distribution(row) {
                return fail(format!("mixture weights of state {i} are not a distribution"));
            }
        }
        for st in 0..s {
            for mi in 0..m {
                if self.means[st][mi].len() != d || self.variances[st][mi].len() != d {
                    return fail(format!("emission shapes of state {st} mixture {mi}"));
                }
                for &v in &self.variances[st][mi] {
                    if v <= 0.0 || !v.is_finite() {
                        return fail(format!("non-positive variance in state {st} mixture {mi}"));
                    }
                }
                if self.means[st][mi].iter().any(|x| !x.is_finite()) {
                    return fail(format!("non-finite mean in state {st} mixture {mi}"));
                }
            }
        }
        Ok(())
    }
}

/// Precomputed per-mixture constants for fast emission scoring.
pub(crate) struct Emitter {
    num_states: usize,
    num_mixtures: usize,
    dim: usize,
    /// ln w[s][m] - 0.5 * (D ln 2pi + sum ln var); -inf for dead mixtures.
    gconst: Vec<f64>,
    means: Vec<f64>,
    half_inv_var: Vec<f64>,
}

impl Emitter {
    pub(crate) fn new(model: &GmmHmm) -> Emitter {
        let (s, m, d) = (model.num_states, model.num_mixtures, model.feature_dim);
        let mut gconst = vec![f64::NEG_INFINITY; s * m];
        let mut means = vec![0.0; s * m * d];
        let mut half_inv_var = vec![0.0; s * m * d];
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        for st in 0..s {
            for mi in 0..m {
                let w = model.weights[st][mi];
                let base = (st * m + mi) * d;
                for di in 0..d {
                    means[base + di] = model.means[st][mi][di];
                    half_inv_var[base + di] = 0.5 / model.variances[st][mi][di];
                }
                if w > 0.0 {
                    let sum_ln_var: f64 =
                        model.variances[st][mi].iter().map(|v| v.ln()).sum();
                    gconst[st * m + mi] = w.ln() - 0.5 * (d as f64 * ln_2pi + sum_ln_var);
                }
            }
        }
        Emitter {
            num_states: s,
            num_mixtures: m,
            dim: d,
            gconst,
            means,
            half_inv_var,
        }
    }

    /// Log density of `frame` under state `st`'s mixture.
    pub(crate) fn log_emission(&self, st: usize, frame: &[f64]) -> f64 {
        let mut buf = [0.0f64; 32];
        let scratch = &mut buf[..self.num_mixtures.min(32)];
        if self.num_mixtures <= 32 {
            for mi in 0..self.num_mixtures {
                scratch[mi] = self.mixture_log_density(st, mi, frame);
            }
            logsumexp(scratch)
        } else {
            let vals: Vec<f64> = (0..self.num_mixtures)
                .map(|mi| self.mixture_log_density(st, mi, frame))
                .collect();
            logsumexp(&vals)
        }
    }

    /// ln(w_m N_m(frame)), -inf when the mixture is dead.
    pub(crate) fn mixture_log_density(&self, st: usize, mi: usize, frame: &[f64]) -> f64 {
        let g = self.gconst[st * self.num_mixtures + mi];
        if g == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let base = (st * self.num_mixtures + mi) * self.dim;
        let mut acc = 0.0;
        for di in 0..self.dim {
            let diff = frame[di] - self.means[base + di];
            acc += diff * diff * self.half_inv_var[base + di];
        }
        g - acc
    }

    /// T x S matrix of state log emissions.
    pub(crate) fn log_emission_matrix(&self, frames: &ArrayView2<f64>) -> Array2<f64> {
        let t = frames.nrows();
        let mut out = Array2::zeros((t, self.num_states));
        for ti in 0..t {
            let frame = frames.row(ti);
            let slice = frame.as_slice().expect("frames are row-major");
            for st in 0..self.num_states {
                out[[ti, st]] = self.log_emission(st, slice);
            }
        }
        out
    }
}

/// Numerically stable log(sum(exp(xs))). Empty or all -inf gives -inf.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Scaled forward pass over a precomputed log-emission matrix.
/// Returns the total log likelihood, which may be -inf.
pub(crate) fn forward_ll(model: &GmmHmm, log_b: &Array2<f64>) -> f64 {
    let (t_len, s) = (log_b.nrows(), model.num_states);
    let mut alpha = vec![0.0f64; s];
    let mut next = vec![0.0f64; s];
    let mut ll = 0.0;
    for t in 0..t_len {
        let c = (0..s).fold(f64::NEG_INFINITY, |m, j| m.max(log_b[[t, j]]));
        if c == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        for j in 0..s {
            let b = (log_b[[t, j]] - c).exp();
            let inflow = if t == 0 {
                model.initial[j]
            } else {
                let mut acc = alpha[j] * model.transitions[j][j];
                if j > 0 {
                    acc += alpha[j - 1] * model.transitions[j - 1][j];
                }
                acc
            };
            next[j] = inflow * b;
        }
        let norm: f64 = next.iter().sum();
        if norm <= 0.0 {
            return f64::NEG_INFINITY;
        }
        for j in 0..s {
            alpha[j] = next[j] / norm;
        }
        ll += norm.ln() + c;
    }
    ll
}

/// Log likelihood of a frame sequence under one model (forward algorithm).
pub fn log_likelihood(model: &GmmHmm, frames: &ArrayView2<f64>) -> Result<f64> {
    check_shape(model, frames)?;
    let emitter = Emitter::new(model);
    Ok(forward_ll(model, &emitter.log_emission_matrix(frames)))
}

fn check_shape(model: &GmmHmm, frames: &ArrayView2<f64>) -> Result<()> {
    if frames.ncols() != model.feature_dim {
        return Err(Error::Decode(format!(
            "shape mismatch: frames have dim {}, model {} has dim {}",
            frames.ncols(),
            model.class,
            model.feature_dim
        )));
    }
    if frames.nrows() == 0 {
        return Err(Error::Decode("empty frame sequence".into()));
    }
    Ok(())
}

/// Scaled forward-backward: total log likelihood and the T x S state
/// posterior matrix (each row sums to 1).
pub fn forward_backward(model: &GmmHmm, frames: &ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    check_shape(model, frames)?;
    let emitter = Emitter::new(model);
    let log_b = emitter.log_emission_matrix(frames);
    let passes = ForwardBackward::run(model, &log_b)?;
    Ok((passes.log_likelihood, passes.gamma()))
}

/// Shared scaled forward/backward machinery, also used by training.
pub(crate) struct ForwardBackward {
    pub log_likelihood: f64,
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    /// Per-frame normalizers of the scaled forward recursion.
    pub norms: Vec<f64>,
    /// Per-frame shifted emissions exp(log_b - c_t).
    pub b: Array2<f64>,
}

impl ForwardBackward {
    pub(crate) fn run(model: &GmmHmm, log_b: &Array2<f64>) -> Result<ForwardBackward> {
        let (t_len, s) = (log_b.nrows(), model.num_states);
        let mut alpha = Array2::zeros((t_len, s));
        let mut b = Array2::zeros((t_len, s));
        let mut norms = vec![0.0f64; t_len];
        let mut ll = 0.0;
        for t in 0..t_len {
            let c = (0..s).fold(f64::NEG_INFINITY, |m, j| m.max(log_b[[t, j]]));
            if c == f64::NEG_INFINITY {
                return Err(Error::Decode(
                    "sequence has zero probability under the model".into(),
                ));
            }
            for j in 0..s {
                b[[t, j]] = (log_b[[t, j]] - c).exp();
                let inflow = if t == 0 {
                    model.initial[j]
                } else {
                    let mut acc = alpha[[t - 1, j]] * model.transitions[j][j];
                    if j > 0 {
                        acc += alpha[[t - 1, j - 1]] * model.transitions[j - 1][j];
                    }
                    acc
                };
                alpha[[t, j]] = inflow * b[[t, j]];
            }
            let norm: f64 = (0..s).map(|j| alpha[[t, j]]).sum();
            if norm <= 0.0 {
                return Err(Error::Decode(
                    "sequence has zero probability under the model".into(),
                ));
            }
            for j in 0..s {
                alpha[[t, j]] /= norm;
            }
            norms[t] = norm;
            ll += norm.ln() + c;
        }

        let mut beta = Array2::zeros((t_len, s));
        for j in 0..s {
            beta[[t_len - 1, j]] = 1.0;
        }
        for t in (0..t_len - 1).rev() {
            for i in 0..s {
                let mut acc = model.transitions[i][i] * b[[t + 1, i]] * beta[[t + 1, i]];
                if i + 1 < s {
                    acc += model.transitions[i][i + 1] * b[[t + 1, i + 1]] * beta[[t + 1, i + 1]];
                }
                beta[[t, i]] = acc / norms[t + 1];
            }
        }
        Ok(ForwardBackward {
            log_likelihood: ll,
            alpha,
            beta,
            norms,
            b,
        })
    }

    /// State posteriors gamma[t][s] = alpha_hat * beta_hat.
    pub(crate) fn gamma(&self) -> Array2<f64> {
        let mut g = &self.alpha * &self.beta;
        // The scaled product sums to 1 per row analytically; renormalize to
        // keep the invariant tight after long sequences.
        for mut row in g.rows_mut() {
            let s: f64 = row.sum();
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
            }
        }
        g
    }
}

/// Exactly six models, one per class, sharing a feature fingerprint.
#[derive(Debug, Clone)]
pub struct ModelSet {
    /// Indexed by [`LabelClass::index`].
    pub models: Vec<GmmHmm>,
    pub fingerprint: String,
}

impl ModelSet {
    pub fn new(models: Vec<GmmHmm>, fingerprint: String) -> Result<ModelSet> {
        if models.len() != 6 {
            return Err(Error::Validation(format!(
                "a model set needs six models, got {}",
                models.len()
            )));
        }
        for (i, m) in models.iter().enumerate() {
            if m.class.index() != i {
                return Err(Error::Validation(format!(
                    "model {i} is for class {}, expected {}",
                    m.class,
                    LabelClass::from_index(i).unwrap()
                )));
            }
            m.validate()?;
        }
        let d = models[0].feature_dim;
        if models.iter().any(|m| m.feature_dim != d) {
            return Err(Error::Validation(
                "models disagree on feature dimension".into(),
            ));
        }
        Ok(ModelSet {
            models,
            fingerprint,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.models[0].feature_dim
    }

    /// Reject decode requests whose front-end config differs from training.
    pub fn check_fingerprint(&self, cfg: &FeatureConfig) -> Result<()> {
        let data = cfg.fingerprint();
        if self.fingerprint != data {
            return Err(Error::Fingerprint {
                model: self.fingerprint.clone(),
                data,
            });
        }
        Ok(())
    }
}

/// Per-class forward log likelihoods plus the winning class.
#[derive(Debug, Clone, Copy)]
pub struct Classification {
    pub scores: PerClass<f64>,
    pub winner: LabelClass,
}

/// Score an epoch's frames under all six models. Ties break toward the
/// rarer class so results are deterministic.
pub fn classify(models: &ModelSet, frames: &ArrayView2<f64>) -> Result<Classification> {
    let mut scores = [f64::NEG_INFINITY; 6];
    for model in &models.models {
        check_shape(model, frames)?;
        let emitter = Emitter::new(model);
        scores[model.class.index()] = forward_ll(model, &emitter.log_emission_matrix(frames));
    }
    let mut winner: Option<LabelClass> = None;
    for c in LabelClass::ALL {
        let s = scores[c.index()];
        if s == f64::NEG_INFINITY {
            continue;
        }
        winner = match winner {
            None => Some(c),
            Some(w) => {
                let sw = scores[w.index()];
                if s > sw || (s == sw && c.rarity_rank() < w.rarity_rank()) {
                    Some(c)
                } else {
                    Some(w)
                }
            }
        };
    }
    let winner = winner.ok_or_else(|| {
        Error::Decode("all six class likelihoods are -inf".into())
    })?;
    Ok(Classification { scores, winner })
}

/// Length-normalized log posterior of the winning class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceScore {
    pub value: f64,
    pub class: LabelClass,
}

/// value = (ll_winner - logsumexp(all six)) / T, in (-inf, 0].
pub fn confidence(scores: &PerClass<f64>, t_frames: usize) -> Result<ConfidenceScore> {
    if t_frames == 0 {
        return Err(Error::Confidence("frame count is zero".into()));
    }
    if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
        return Err(Error::Confidence("scores must be finite or -inf".into()));
    }
    let denom = logsumexp(scores);
    if denom == f64::NEG_INFINITY {
        return Err(Error::Confidence(
            "all six class likelihoods are -inf".into(),
        ));
    }
    let mut best = LabelClass::Spsw;
    for c in LabelClass::ALL {
        let (s, b) = (scores[c.index()], scores[best.index()]);
        if s > b || (s == b && c.rarity_rank() < best.rarity_rank()) {
            best = c;
        }
    }
    let value = (scores[best.index()] - denom) / t_frames as f64;
    Ok(ConfidenceScore {
        value: value.min(0.0),
        class: best,
    })
}
