//! Model initialization and Baum-Welch training.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::{Emitter, ForwardBackward, GmmHmm};
use crate::corpus::LabelClass;
use crate::error::{Error, Result};
use crate::seed;

/// Variance floor = FLOOR_SCALE * per-dimension variance of the training
/// data, never below ABS_FLOOR (identical frames would otherwise collapse
/// the densities entirely).
const FLOOR_SCALE: f64 = 1e-3;
const ABS_FLOOR: f64 = 1e-12;

/// Mixtures whose reestimated weight falls below this are dropped (weight
/// zeroed, remaining weights renormalized).
const WEIGHT_FLOOR: f64 = 1e-8;

/// EM stopping controls.
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Relative improvement below which EM stops early.
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iters: 20,
            tol: 1e-5,
        }
    }
}

fn data_stats(sequences: &[&Array2<f64>]) -> Result<(usize, usize, Vec<f64>, Vec<f64>)> {
    let first = sequences
        .first()
        .ok_or_else(|| Error::Train("no training sequences".into()))?;
    let d = first.ncols();
    let mut n = 0usize;
    let mut sum = vec![0.0f64; d];
    let mut sumsq = vec![0.0f64; d];
    for seq in sequences {
        if seq.ncols() != d {
            return Err(Error::Train(format!(
                "sequence dimension {} does not match {}",
                seq.ncols(),
                d
            )));
        }
        for row in seq.rows() {
            for (di, &x) in row.iter().enumerate() {
                sum[di] += x;
                sumsq[di] += x * x;
            }
            n += 1;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let var: Vec<f64> = sumsq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq / n as f64 - m * m).max(0.0))
        .collect();
    Ok((n, d, mean, var))
}

fn variance_floor(var: &[f64]) -> Vec<f64> {
    var.iter().map(|v| (FLOOR_SCALE * v).max(ABS_FLOOR)).collect()
}

/// Fixed-round Lloyd k-means used to seed per-state mixtures.
/// Returns (assignment, centroids). Deterministic under the provided rng.
fn kmeans(
    frames: &[&[f64]],
    k: usize,
    rounds: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Vec<usize>, Vec<Vec<f64>>) {
    let d = frames[0].len();
    let picks = sample(rng, frames.len(), k.min(frames.len()));
    let mut centroids: Vec<Vec<f64>> = picks.iter().map(|i| frames[i].to_vec()).collect();
    while centroids.len() < k {
        centroids.push(frames[0].to_vec());
    }
    let mut assign = vec![0usize; frames.len()];
    for _ in 0..rounds {
        for (fi, frame) in frames.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (ci, c) in centroids.iter().enumerate() {
                let dist: f64 = frame
                    .iter()
                    .zip(c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if dist < best_d {
                    best_d = dist;
                    best = ci;
                }
            }
            assign[fi] = best;
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0f64; d]; k];
        for (fi, &ci) in assign.iter().enumerate() {
            counts[ci] += 1;
            for (di, &x) in frames[fi].iter().enumerate() {
                sums[ci][di] += x;
            }
        }
        for ci in 0..k {
            if counts[ci] > 0 {
                for di in 0..d {
                    centroids[ci][di] = sums[ci][di] / counts[ci] as f64;
                }
            }
            // Empty clusters keep their previous centroid.
        }
    }
    (assign, centroids)
}

/// Build a left-to-right model from labeled sequences.
///
/// States are seeded by slicing every sequence into `num_states` uniform
/// temporal segments; each state's mixtures come from a seeded 10-round
/// k-means over that state's frames. Variances are floored.
pub fn init_model(
    class: LabelClass,
    sequences: &[&Array2<f64>],
    num_states: usize,
    num_mixtures: usize,
    seed_value: u64,
) -> Result<GmmHmm> {
    if num_states == 0 || num_mixtures == 0 {
        return Err(Error::Init {
            class: class.name().into(),
            message: "states and mixtures must be positive".into(),
        });
    }
    let (n, d, global_mean, global_var) = data_stats(sequences).map_err(|e| Error::Init {
        class: class.name().into(),
        message: e.to_string(),
    })?;
    if n < num_states * num_mixtures {
        return Err(Error::Init {
            class: class.name().into(),
            message: format!(
                "{n} frames available but {num_states} states x {num_mixtures} mixtures require at least {}",
                num_states * num_mixtures
            ),
        });
    }
    let floor = variance_floor(&global_var);

    // Temporal slicing: frame t of a T-frame sequence belongs to state
    // floor(t * S / T).
    let mut state_frames: Vec<Vec<&[f64]>> = vec![Vec::new(); num_states];
    for seq in sequences {
        let t_len = seq.nrows();
        for t in 0..t_len {
            let st = (t * num_states) / t_len.max(1);
            let row = seq.row(t);
            state_frames[st.min(num_states - 1)]
                .push(row.to_slice().expect("frames are row-major"));
        }
    }

    let mut rng = seed::rng_for(seed_value, &format!("hmm/init/{}", class.name()));
    let mut weights = Vec::with_capacity(num_states);
    let mut means = Vec::with_capacity(num_states);
    let mut variances = Vec::with_capacity(num_states);
    for st in 0..num_states {
        let frames = &state_frames[st];
        if frames.is_empty() {
            return Err(Error::Init {
                class: class.name().into(),
                message: format!("state {st} received no frames from temporal slicing"),
            });
        }
        let (assign, centroids) = kmeans(frames, num_mixtures, 10, &mut rng);
        let mut w = vec![0.0f64; num_mixtures];
        let mut mu = vec![vec![0.0f64; d]; num_mixtures];
        let mut var = vec![vec![0.0f64; d]; num_mixtures];
        let mut counts = vec![0usize; num_mixtures];
        for (fi, &ci) in assign.iter().enumerate() {
            counts[ci] += 1;
            for (di, &x) in frames[fi].iter().enumerate() {
                mu[ci][di] += x;
                var[ci][di] += x * x;
            }
        }
        let total: usize = counts.iter().sum();
        for mi in 0..num_mixtures {
            if counts[mi] == 0 {
                // Dead at init: centroid placeholder with zero weight.
                w[mi] = 0.0;
                mu[mi] = centroids[mi].clone();
                var[mi] = global_var.clone();
            } else {
                w[mi] = counts[mi] as f64 / total as f64;
                for di in 0..d {
                    let m = mu[mi][di] / counts[mi] as f64;
                    let v = var[mi][di] / counts[mi] as f64 - m * m;
                    mu[mi][di] = m;
                    var[mi][di] = v;
                }
            }
            for di in 0..d {
                var[mi][di] = var[mi][di].max(floor[di]);
            }
        }
        // Guard against an all-dead state.
        if w.iter().sum::<f64>() <= 0.0 {
            w[0] = 1.0;
            mu[0] = global_mean.clone();
            var[0] = global_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
        } else {
            let s: f64 = w.iter().sum();
            for wi in w.iter_mut() {
                *wi /= s;
            }
        }
        weights.push(w);
        means.push(mu);
        variances.push(var);
    }

    let mut initial = vec![0.0; num_states];
    initial[0] = 1.0;
    let mut transitions = vec![vec![0.0; num_states]; num_states];
    for i in 0..num_states {
        if i + 1 < num_states {
            transitions[i][i] = 0.5;
            transitions[i][i + 1] = 0.5;
        } else {
            transitions[i][i] = 1.0;
        }
    }

    let model = GmmHmm {
        class,
        num_states,
        num_mixtures,
        feature_dim: d,
        initial,
        transitions,
        weights,
        means,
        variances,
    };
    model.validate()?;
    Ok(model)
}

/// Per-sequence sufficient statistics. Merging is plain elementwise
/// addition, so accumulation order cannot change results beyond rounding;
/// the parallel path collects per-sequence stats and folds them in input
/// order, which is bit-identical to the sequential path.
#[derive(Clone)]
struct Stats {
    log_likelihood: f64,
    initial: Vec<f64>,
    trans: Vec<Vec<f64>>,
    mix_occ: Vec<Vec<f64>>,
    mix_sum: Vec<Vec<Vec<f64>>>,
    mix_sumsq: Vec<Vec<Vec<f64>>>,
}

impl Stats {
    fn zero(s: usize, m: usize, d: usize) -> Stats {
        Stats {
            log_likelihood: 0.0,
            initial: vec![0.0; s],
            trans: vec![vec![0.0; s]; s],
            mix_occ: vec![vec![0.0; m]; s],
            mix_sum: vec![vec![vec![0.0; d]; m]; s],
            mix_sumsq: vec![vec![vec![0.0; d]; m]; s],
        }
    }

    fn merge(&mut self, other: &Stats) {
        self.log_likelihood += other.log_likelihood;
        for (a, b) in self.initial.iter_mut().zip(&other.initial) {
            *a += b;
        }
        for (ra, rb) in self.trans.iter_mut().zip(&other.trans) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        for st in 0..self.mix_occ.len() {
            for mi in 0..self.mix_occ[st].len() {
                self.mix_occ[st][mi] += other.mix_occ[st][mi];
                for di in 0..self.mix_sum[st][mi].len() {
                    self.mix_sum[st][mi][di] += other.mix_sum[st][mi][di];
                    self.mix_sumsq[st][mi][di] += other.mix_sumsq[st][mi][di];
                }
            }
        }
    }
}

fn accumulate_sequence(model: &GmmHmm, emitter: &Emitter, seq: &Array2<f64>) -> Result<Stats> {
    let (s, m, d) = (model.num_states, model.num_mixtures, model.feature_dim);
    let t_len = seq.nrows();
    let view: ArrayView2<f64> = seq.view();
    let log_b = emitter.log_emission_matrix(&view);
    let fb = ForwardBackward::run(model, &log_b)?;
    let gamma = fb.gamma();

    let mut stats = Stats::zero(s, m, d);
    stats.log_likelihood = fb.log_likelihood;
    for st in 0..s {
        stats.initial[st] += gamma[[0, st]];
    }
    // Transition expectations under the scaled recursion.
    for t in 0..t_len - 1 {
        for i in 0..s {
            for j in [i, i + 1] {
                if j >= s {
                    continue;
                }
                let a = model.transitions[i][j];
                if a == 0.0 {
                    continue;
                }
                let xi = fb.alpha[[t, i]] * a * fb.b[[t + 1, j]] * fb.beta[[t + 1, j]]
                    / fb.norms[t + 1];
                stats.trans[i][j] += xi;
            }
        }
    }
    // Mixture responsibilities within each state.
    let mut logs = vec![0.0f64; m];
    for t in 0..t_len {
        let frame = seq.row(t);
        let frame = frame.as_slice().expect("frames are row-major");
        for st in 0..s {
            let g = gamma[[t, st]];
            if g == 0.0 {
                continue;
            }
            for mi in 0..m {
                logs[mi] = emitter.mixture_log_density(st, mi, frame);
            }
            let denom = super::logsumexp(&logs);
            if denom == f64::NEG_INFINITY {
                continue;
            }
            for mi in 0..m {
                let r = g * (logs[mi] - denom).exp();
                if r == 0.0 {
                    continue;
                }
                stats.mix_occ[st][mi] += r;
                for (di, &x) in frame.iter().enumerate() {
                    stats.mix_sum[st][mi][di] += r * x;
                    stats.mix_sumsq[st][mi][di] += r * x * x;
                }
            }
        }
    }
    Ok(stats)
}

fn e_step(model: &GmmHmm, sequences: &[&Array2<f64>]) -> Result<Stats> {
    let emitter = Emitter::new(model);
    let per_seq: Vec<Stats> = sequences
        .par_iter()
        .map(|seq| accumulate_sequence(model, &emitter, seq))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Stats::zero(model.num_states, model.num_mixtures, model.feature_dim);
    for s in &per_seq {
        total.merge(s);
    }
    Ok(total)
}

fn m_step(model: &GmmHmm, stats: &Stats, floor: &[f64], n_seqs: usize) -> GmmHmm {
    let (s, m, d) = (model.num_states, model.num_mixtures, model.feature_dim);
    let mut out = model.clone();

    for st in 0..s {
        out.initial[st] = stats.initial[st] / n_seqs as f64;
    }
    normalize_in_place(&mut out.initial);

    for i in 0..s {
        let row_sum: f64 = stats.trans[i].iter().sum();
        if row_sum > 0.0 {
            for j in 0..s {
                out.transitions[i][j] = stats.trans[i][j] / row_sum;
            }
        }
        // Unvisited states keep their previous row.
    }
    // The last state can only self-loop.
    out.transitions[s - 1] = {
        let mut row = vec![0.0; s];
        row[s - 1] = 1.0;
        row
    };

    for st in 0..s {
        let occ: f64 = stats.mix_occ[st].iter().sum();
        if occ <= 0.0 {
            continue; // state never occupied; keep previous emission
        }
        let mut w: Vec<f64> = stats.mix_occ[st].iter().map(|o| o / occ).collect();
        let mut dropped = 0;
        for wi in w.iter_mut() {
            if *wi > 0.0 && *wi < WEIGHT_FLOOR {
                *wi = 0.0;
                dropped += 1;
            }
        }
        let w_sum: f64 = w.iter().sum();
        if w_sum <= 0.0 {
            continue;
        }
        if dropped > 0 {
            log::warn!(
                "model {}: dropped {dropped} collapsed mixture(s) in state {st}",
                model.class
            );
        }
        for wi in w.iter_mut() {
            *wi /= w_sum;
        }
        for mi in 0..m {
            out.weights[st][mi] = w[mi];
            if w[mi] == 0.0 || stats.mix_occ[st][mi] <= 0.0 {
                continue;
            }
            let o = stats.mix_occ[st][mi];
            for di in 0..d {
                let mean = stats.mix_sum[st][mi][di] / o;
                let var = (stats.mix_sumsq[st][mi][di] / o - mean * mean).max(floor[di]);
                out.means[st][mi][di] = mean;
                out.variances[st][mi][di] = var;
            }
        }
        normalize_in_place(&mut out.weights[st]);
    }
    out
}

fn normalize_in_place(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        for v in row.iter_mut() {
            *v /= s;
        }
    }
}

/// Total forward log likelihood of all sequences under one model.
pub fn total_log_likelihood(model: &GmmHmm, sequences: &[&Array2<f64>]) -> Result<f64> {
    let emitter = Emitter::new(model);
    let lls: Vec<f64> = sequences
        .par_iter()
        .map(|seq| {
            let view: ArrayView2<f64> = seq.view();
            let log_b = emitter.log_emission_matrix(&view);
            super::forward_ll(model, &log_b)
        })
        .collect();
    Ok(lls.iter().sum())
}

/// Baum-Welch reestimation over multiple sequences.
///
/// Returns the trained model and the log-likelihood history: one entry per
/// E-step plus, when the iteration budget is exhausted, a final evaluation
/// of the returned model. The history is non-decreasing up to rounding.
pub fn baum_welch(
    model: &GmmHmm,
    sequences: &[&Array2<f64>],
    options: &TrainOptions,
) -> Result<(GmmHmm, Vec<f64>)> {
    if sequences.is_empty() {
        return Err(Error::Train("empty sequence list".into()));
    }
    if options.max_iters == 0 {
        return Err(Error::Train("max_iters must be at least 1".into()));
    }
    let (_, d, _, global_var) = data_stats(sequences)?;
    if d != model.feature_dim {
        return Err(Error::Train(format!(
            "data dimension {d} does not match model dimension {}",
            model.feature_dim
        )));
    }
    let floor = variance_floor(&global_var);

    let mut current = model.clone();
    let mut history = Vec::with_capacity(options.max_iters + 1);
    for it in 0..options.max_iters {
        let stats = e_step(&current, sequences)?;
        history.push(stats.log_likelihood);
        if it > 0 {
            let prev = history[it - 1];
            let rel = (stats.log_likelihood - prev) / prev.abs().max(1.0);
            if rel < options.tol {
                // Converged: the last history entry is the returned model's.
                current.validate()?;
                return Ok((current, history));
            }
        }
        current = m_step(&current, &stats, &floor, sequences.len());
        current.validate()?;
    }
    history.push(total_log_likelihood(&current, sequences)?);
    Ok((current, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn constant_sequences(n: usize, t: usize, d: usize, value: f64) -> Vec<Array2<f64>> {
        (0..n).map(|_| Array2::from_elem((t, d), value)).collect()
    }

    fn noisy_sequences(n: usize, t: usize, d: usize, seed_value: u64) -> Vec<Array2<f64>> {
        let mut rng = seed::rng_for(seed_value, "test/noisy");
        (0..n)
            .map(|_| {
                Array2::from_shape_fn((t, d), |(ti, _)| {
                    let base = if ti < t / 2 { -1.0 } else { 1.5 };
                    base + rng.random_range(-0.5..0.5)
                })
            })
            .collect()
    }

    #[test]
    fn degenerate_init_is_the_sample_gaussian() {
        let seqs = noisy_sequences(5, 8, 2, 1);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let model = init_model(LabelClass::Bckg, &refs, 1, 1, 7).unwrap();
        let (n, _, mean, var) = data_stats(&refs).unwrap();
        assert!(n > 0);
        for di in 0..2 {
            assert!((model.means[0][0][di] - mean[di]).abs() < 1e-12);
            let floored = var[di].max(FLOOR_SCALE * var[di]);
            assert!((model.variances[0][0][di] - floored).abs() < 1e-12);
        }
        assert_eq!(model.initial, vec![1.0]);
        assert_eq!(model.transitions, vec![vec![1.0]]);
    }

    #[test]
    fn identical_frames_hit_the_floor() {
        let seqs = constant_sequences(4, 10, 3, 2.5);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let model = init_model(LabelClass::Artf, &refs, 2, 2, 3).unwrap();
        for st in 0..2 {
            for mi in 0..2 {
                for di in 0..3 {
                    assert_eq!(model.variances[st][mi][di], ABS_FLOOR);
                }
            }
        }
    }

    #[test]
    fn full_sized_init_is_valid() {
        let seqs = noisy_sequences(8, 10, 4, 11);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let model = init_model(LabelClass::Gped, &refs, 5, 8, 42).unwrap();
        model.validate().unwrap();
        assert_eq!(model.num_states, 5);
        assert_eq!(model.num_mixtures, 8);
    }

    #[test]
    fn too_few_frames_is_an_init_error() {
        let seqs = noisy_sequences(1, 10, 2, 5);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let err = init_model(LabelClass::Spsw, &refs, 5, 8, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("SPSW") && msg.contains("10"), "{msg}");
    }

    #[test]
    fn one_step_history_is_monotone() {
        let seqs = noisy_sequences(10, 10, 2, 21);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let model = init_model(LabelClass::Pled, &refs, 3, 2, 9).unwrap();
        let (_, history) = baum_welch(
            &model,
            &refs,
            &TrainOptions {
                max_iters: 1,
                tol: 1e-8,
            },
        )
        .unwrap();
        assert!(history.len() <= 2);
        assert!(history.last().unwrap() >= &(history[0] - 1e-8));
    }

    #[test]
    fn empty_sequences_error() {
        let seqs = noisy_sequences(4, 10, 2, 2);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let model = init_model(LabelClass::Pled, &refs, 2, 1, 1).unwrap();
        assert!(baum_welch(&model, &[], &TrainOptions::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let seqs = noisy_sequences(12, 10, 3, 33);
        let refs: Vec<&Array2<f64>> = seqs.iter().collect();
        let m0 = init_model(LabelClass::Eyem, &refs, 3, 2, 17).unwrap();
        let (a, ha) = baum_welch(&m0, &refs, &TrainOptions::default()).unwrap();
        let (b, hb) = baum_welch(&m0, &refs, &TrainOptions::default()).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }
}
