//! Shared test oracles, independent of the library's scoring path.
//!
//! The enumeration oracle computes sequence likelihood and state posteriors
//! by brute force over all S^T state paths, with its own Gaussian-mixture
//! density code, so it shares nothing with the scaled forward-backward
//! implementation it checks.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use selftrain_core::corpus::LabelClass;
use selftrain_core::hmm::GmmHmm;

/// Naive mixture density in linear probability space.
fn mixture_density(model: &GmmHmm, state: usize, frame: &[f64]) -> f64 {
    let mut total = 0.0;
    for m in 0..model.num_mixtures {
        let w = model.weights[state][m];
        if w == 0.0 {
            continue;
        }
        let mut p = w;
        for d in 0..model.feature_dim {
            let mean = model.means[state][m][d];
            let var = model.variances[state][m][d];
            let diff = frame[d] - mean;
            p *= (-0.5 * diff * diff / var).exp()
                / (2.0 * std::f64::consts::PI * var).sqrt();
        }
        total += p;
    }
    total
}

/// Brute-force log likelihood and posteriors over every state path.
pub fn enumerate_paths(model: &GmmHmm, frames: &Array2<f64>) -> (f64, Array2<f64>) {
    let t_len = frames.nrows();
    let s = model.num_states;
    let b: Vec<Vec<f64>> = (0..t_len)
        .map(|t| {
            let row: Vec<f64> = frames.row(t).to_vec();
            (0..s).map(|st| mixture_density(model, st, &row)).collect()
        })
        .collect();

    let n_paths = s.pow(t_len as u32);
    let mut total = 0.0;
    let mut occupancy = Array2::<f64>::zeros((t_len, s));
    for code in 0..n_paths {
        let mut path = Vec::with_capacity(t_len);
        let mut rest = code;
        for _ in 0..t_len {
            path.push(rest % s);
            rest /= s;
        }
        let mut p = model.initial[path[0]] * b[0][path[0]];
        for t in 1..t_len {
            p *= model.transitions[path[t - 1]][path[t]] * b[t][path[t]];
        }
        if p > 0.0 {
            total += p;
            for (t, &st) in path.iter().enumerate() {
                occupancy[[t, st]] += p;
            }
        }
    }
    let gamma = occupancy.mapv(|x| x / total);
    (total.ln(), gamma)
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// A random valid left-to-right model with the given shape.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    class: LabelClass,
    s: usize,
    m: usize,
    d: usize,
) -> GmmHmm {
    let initial = random_simplex(rng, s);
    let mut transitions = vec![vec![0.0; s]; s];
    for i in 0..s {
        if i + 1 < s {
            let stay = rng.random_range(0.1..0.9);
            transitions[i][i] = stay;
            transitions[i][i + 1] = 1.0 - stay;
        } else {
            transitions[i][i] = 1.0;
        }
    }
    let weights: Vec<Vec<f64>> = (0..s).map(|_| random_simplex(rng, m)).collect();
    let means: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|_| {
            (0..m)
                .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect()
        })
        .collect();
    let variances: Vec<Vec<Vec<f64>>> = (0..s)
        .map(|_| {
            (0..m)
                .map(|_| (0..d).map(|_| rng.random_range(0.2..2.0)).collect())
                .collect()
        })
        .collect();
    GmmHmm {
        class,
        num_states: s,
        num_mixtures: m,
        feature_dim: d,
        initial,
        transitions,
        weights,
        means,
        variances,
    }
}

pub fn random_frames(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((t, d), |_| rng.random_range(-3.0..3.0))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample sequences from a model (for generate-then-fit checks).
pub fn sample_sequences(
    model: &GmmHmm,
    n_seqs: usize,
    t_len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Array2<f64>> {
    let pick = |dist: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        for (i, p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        dist.len() - 1
    };
    (0..n_seqs)
        .map(|_| {
            let mut frames = Array2::zeros((t_len, model.feature_dim));
            let mut state = pick(&model.initial, rng);
            for t in 0..t_len {
                if t > 0 {
                    state = pick(&model.transitions[state], rng);
                }
                let mixture = pick(&model.weights[state], rng);
                for d in 0..model.feature_dim {
                    let mean = model.means[state][mixture][d];
                    let std = model.variances[state][mixture][d].sqrt();
                    // Box-Muller keeps the oracle free of sampling crates.
                    let u1: f64 = rng.random_range(1e-12..1.0);
                    let u2: f64 = rng.random_range(0.0..1.0);
                    let z = (-2.0 * u1.ln()).sqrt()
                        * (2.0 * std::f64::consts::PI * u2).cos();
                    frames[[t, d]] = mean + std * z;
                }
            }
            frames
        })
        .collect()
}

/// Relative closeness with a unit floor, for log-scale quantities.
pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
