//! Seeded synthetic corpus generator.
//!
//! Each record is a tiling of second-aligned spans: planted class events
//! separated by background fill. Every class has a distinct waveform family
//! (transients, burst trains at different rates, a slow wave, noise bursts)
//! with per-event amplitude/frequency jitter and additive Gaussian noise, so
//! classes are separable but confusable: the regime where confidence-based
//! selection has real work to do.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Corpus, CorpusRecord, LabelClass, LabelSpan, PerClass, Role, SignalRecord};
use crate::error::{Error, Result};
use crate::seed;
use rand::seq::SliceRandom;

/// Waveform parameters for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSignature {
    pub base_freq: f64,
    pub amplitude: f64,
    pub noise_std: f64,
}

/// How many events of a class to plant and how long they run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSpec {
    pub events: usize,
    /// Event duration bounds in whole seconds, inclusive.
    pub duration_min: u32,
    pub duration_max: u32,
    pub signature: ClassSignature,
}

impl ClassSpec {
    /// Total planted seconds when the duration is fixed (min == max).
    pub fn fixed_total_secs(&self) -> Option<u64> {
        (self.duration_min == self.duration_max)
            .then(|| self.events as u64 * u64::from(self.duration_min))
    }
}

/// Full generator specification. Same (spec, seed) regenerates a
/// byte-identical corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: PerClass<ClassSpec>,
    /// Fraction of every record reserved for background fill, in [0, 1).
    pub background_fill: f64,
    /// Seconds per generated record.
    pub record_duration: u32,
    pub channels: usize,
    pub sample_rate: f64,
    /// Prefix for generated record ids, e.g. `gold_r`.
    pub record_prefix: String,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.background_fill) {
            return Err(Error::Validation(format!(
                "background_fill must lie in [0,1), got {}",
                self.background_fill
            )));
        }
        if self.record_duration == 0 || self.channels == 0 || self.sample_rate <= 0.0 {
            return Err(Error::Validation(
                "record_duration, channels and sample_rate must be positive".into(),
            ));
        }
        for (i, c) in self.classes.iter().enumerate() {
            let name = LabelClass::from_index(i).unwrap().name();
            if c.duration_min < 1 || c.duration_min > c.duration_max {
                return Err(Error::Validation(format!(
                    "class {name}: need 1 <= duration_min <= duration_max"
                )));
            }
        }
        Ok(())
    }

    /// Event-seconds available per timeline after the background reservation.
    fn capacity_secs(&self) -> u32 {
        (f64::from(self.record_duration) * (1.0 - self.background_fill)).floor() as u32
    }

    /// Scale every class's event count by `factor`, rounding half-up.
    pub fn scaled(&self, factor: f64) -> SynthSpec {
        let mut out = self.clone();
        for c in &mut out.classes {
            c.events = (c.events as f64 * factor + 0.5).floor() as usize;
        }
        out
    }

    /// The tuned default corpus: SPSW is the rarest class at roughly a tenth
    /// of the GPED epoch volume, backgrounds are plentiful, and noise levels
    /// leave headroom between chance and ceiling for every class.
    pub fn default_spec() -> SynthSpec {
        let class = |events, dmin, dmax, f, a, n| ClassSpec {
            events,
            duration_min: dmin,
            duration_max: dmax,
            signature: ClassSignature {
                base_freq: f,
                amplitude: a,
                noise_std: n,
            },
        };
        SynthSpec {
            classes: [
                // SPSW: brief high-amplitude transients, rare.
                class(14, 1, 2, 14.0, 36.0, 15.0),
                // PLED: one burst per second.
                class(70, 2, 3, 6.0, 19.0, 19.0),
                // GPED: two bursts per second.
                class(80, 2, 3, 7.0, 15.0, 19.0),
                // ARTF: broadband noise bursts.
                class(50, 1, 3, 22.0, 30.0, 18.0),
                // EYEM: slow large-amplitude wave.
                class(24, 1, 2, 0.6, 40.0, 14.0),
                // BCKG: no planted events; fill covers it.
                class(0, 1, 1, 2.0, 9.0, 10.0),
            ],
            background_fill: 0.3,
            record_duration: 60,
            channels: 1,
            sample_rate: super::DEFAULT_SAMPLE_RATE,
            record_prefix: "r".into(),
            seed: 0,
        }
    }
}

/// The standard three-role world: gold at the base spec's scale, eval and
/// unlabeled scaled, each role with its own record prefix and a sub-seed
/// derived from the root. Both the CLI and in-memory experiments build
/// corpora through this function so results agree.
pub fn generate_roles(
    base: &SynthSpec,
    root_seed: u64,
    eval_scale: f64,
    unlabeled_scale: f64,
) -> Result<(Corpus, Corpus, Corpus)> {
    let make = |role: Role, prefix: &str, scale: f64| -> Result<Corpus> {
        let mut spec = base.scaled(scale);
        spec.record_prefix = format!("{prefix}_r");
        spec.seed = crate::seed::derive_seed(root_seed, &format!("synth/{prefix}"));
        generate_synthetic(&spec, role)
    };
    Ok((
        make(Role::GoldTrain, "gold", 1.0)?,
        make(Role::Eval, "eval", eval_scale)?,
        make(Role::Unlabeled, "unl", unlabeled_scale)?,
    ))
}

/// Generate records with planted, non-overlapping, second-aligned events and
/// ground-truth spans covering the whole timeline (fill spans are BCKG).
pub fn generate_synthetic(spec: &SynthSpec, role: Role) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, "corpus/synth");
    let cap = spec.capacity_secs();

    // Draw event durations per class in code order, then shuffle placement.
    let mut events: Vec<(LabelClass, u32)> = Vec::new();
    for (i, c) in spec.classes.iter().enumerate() {
        let label = LabelClass::from_index(i).unwrap();
        for _ in 0..c.events {
            let d = if c.duration_min == c.duration_max {
                c.duration_min
            } else {
                rng.random_range(c.duration_min..=c.duration_max)
            };
            if d > cap {
                return Err(Error::Capacity {
                    class: label.name().into(),
                    message: format!(
                        "event of {d} s exceeds per-record capacity {cap} s \
                         ({} s records, background fill {})",
                        spec.record_duration, spec.background_fill
                    ),
                });
            }
            events.push((label, d));
        }
    }
    events.shuffle(&mut rng);

    // Greedy packing into per-channel timelines.
    let mut timelines: Vec<Vec<(LabelClass, u32)>> = vec![Vec::new()];
    let mut used = 0u32;
    for ev in events {
        if used + ev.1 > cap {
            timelines.push(Vec::new());
            used = 0;
        }
        used += ev.1;
        timelines.last_mut().unwrap().push(ev);
    }

    let n_records = timelines.len().div_ceil(spec.channels);
    let mut records = Vec::with_capacity(n_records);
    let mut tl_iter = timelines.into_iter();
    for rec_idx in 0..n_records {
        let record_id = format!("{}{rec_idx:03}", spec.record_prefix);
        let mut channels = Vec::with_capacity(spec.channels);
        let mut samples = Vec::with_capacity(spec.channels);
        let mut spans = Vec::new();
        for ch in 0..spec.channels {
            channels.push(format!("c{}", ch + 1));
            let timeline = tl_iter.next().unwrap_or_default();
            let (wave, ch_spans) =
                render_timeline(spec, &record_id, ch, &timeline, &mut rng);
            samples.push(wave);
            spans.extend(ch_spans);
        }
        let record = SignalRecord {
            record_id,
            sample_rate: spec.sample_rate,
            channels,
            samples,
        };
        record.validate()?;
        records.push(CorpusRecord {
            record,
            spans,
            role,
        });
    }
    Ok(Corpus { records })
}

/// Lay one channel's events onto its background, returning samples and the
/// ground-truth spans that tile the record duration exactly.
fn render_timeline(
    spec: &SynthSpec,
    record_id: &str,
    channel: usize,
    timeline: &[(LabelClass, u32)],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<LabelSpan>) {
    let total = spec.record_duration;
    let used: u32 = timeline.iter().map(|e| e.1).sum();
    let background = total - used;

    // k+1 gap lengths summing to the background budget, via sorted cut points.
    let k = timeline.len();
    let mut cuts: Vec<u32> = (0..k).map(|_| rng.random_range(0..=background)).collect();
    cuts.sort_unstable();
    cuts.push(background);
    let mut gaps = Vec::with_capacity(k + 1);
    let mut prev = 0;
    for c in cuts {
        gaps.push(c - prev);
        prev = c;
    }

    let fs = spec.sample_rate;
    let mut wave = Vec::with_capacity((f64::from(total) * fs) as usize);
    let mut spans = Vec::new();
    let mut cursor = 0u32;
    let emit = |label: LabelClass, dur: u32, cursor: &mut u32, wave: &mut Vec<f64>,
                    spans: &mut Vec<LabelSpan>, rng: &mut ChaCha8Rng| {
        if dur == 0 {
            return;
        }
        let sig = spec.classes[label.index()].signature;
        wave.extend(event_samples(label, sig, dur, fs, rng));
        spans.push(LabelSpan {
            record_id: record_id.to_string(),
            channel_index: channel,
            start: f64::from(*cursor),
            stop: f64::from(*cursor + dur),
            label,
        });
        *cursor += dur;
    };

    for (i, &(label, dur)) in timeline.iter().enumerate() {
        emit(LabelClass::Bckg, gaps[i], &mut cursor, &mut wave, &mut spans, rng);
        emit(label, dur, &mut cursor, &mut wave, &mut spans, rng);
    }
    emit(
        LabelClass::Bckg,
        gaps[k],
        &mut cursor,
        &mut wave,
        &mut spans,
        rng,
    );
    debug_assert_eq!(cursor, total);
    (wave, spans)
}

/// Samples for one event. Jitter is drawn once per event so the class has
/// genuine intra-class spread; additive white noise is drawn per sample.
fn event_samples(
    class: LabelClass,
    sig: ClassSignature,
    dur_secs: u32,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = (f64::from(dur_secs) * fs).round() as usize;
    // Log-uniform amplitude jitter: every class is a continuum from faint
    // to strong events with faint ones far more numerous, the way weak
    // events dominate recorded corpora. Small gold seeds cover the strong
    // shell well and the faint mass poorly.
    let amp = sig.amplitude * 0.4 * 3.5f64.powf(rng.random_range(0.0..1.0));
    let freq = sig.base_freq * rng.random_range(0.9..1.1);
    let phase = rng.random_range(0.0..TAU);
    let noise = Normal::new(0.0, sig.noise_std.max(1e-12)).unwrap();
    let mut x = vec![0.0f64; n];

    match class {
        LabelClass::Bckg => {
            // One-pole lowpassed white noise, rescaled to std ~= amp.
            let a = 0.92f64;
            let gain = amp * (1.0 - a * a).sqrt();
            let mut state = 0.0;
            let unit = Normal::new(0.0, 1.0).unwrap();
            for v in x.iter_mut() {
                state = a * state + unit.sample(rng);
                *v = gain * state;
            }
        }
        LabelClass::Eyem => {
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / fs;
                *v = amp * (TAU * freq * t + phase).sin();
            }
        }
        LabelClass::Spsw => {
            // One sharp transient per second at a jittered position.
            let width = 0.05;
            for sec in 0..dur_secs {
                let center = f64::from(sec) + rng.random_range(0.25..0.75);
                add_gaussian_burst(&mut x, fs, center, width, amp, freq, phase);
            }
        }
        LabelClass::Pled => {
            // One broad burst per second.
            for sec in 0..dur_secs {
                let center = f64::from(sec) + 0.5;
                add_gaussian_burst(&mut x, fs, center, 0.12, amp, freq, phase);
            }
        }
        LabelClass::Gped => {
            // Two bursts per second.
            for sec in 0..dur_secs {
                for j in 0..2 {
                    let center = f64::from(sec) + (f64::from(j) + 0.5) / 2.0;
                    add_gaussian_burst(&mut x, fs, center, 0.08, amp, freq, phase);
                }
            }
        }
        LabelClass::Artf => {
            // Broadband noise bursts: 0.25 s on, 0.25 s off. Artifacts are
            // heterogeneous: about half the seconds also carry a sharp
            // spike-like transient that imitates SPSW.
            let burst = Normal::new(0.0, amp * 0.5).unwrap();
            let off = rng.random_range(0.0..0.5);
            for (i, v) in x.iter_mut().enumerate() {
                let t = i as f64 / fs + off;
                if (t * 2.0).fract() < 0.5 {
                    *v = burst.sample(rng);
                }
            }
            for sec in 0..dur_secs {
                if rng.random_range(0.0..1.0) < 0.6 {
                    let center = f64::from(sec) + rng.random_range(0.25..0.75);
                    let spike_freq = freq * rng.random_range(0.55..0.75);
                    add_gaussian_burst(&mut x, fs, center, 0.05, amp * 1.4, spike_freq, phase);
                }
            }
        }
    }

    for v in x.iter_mut() {
        *v += noise.sample(rng);
    }
    x
}

fn add_gaussian_burst(
    x: &mut [f64],
    fs: f64,
    center: f64,
    width: f64,
    amp: f64,
    freq: f64,
    phase: f64,
) {
    let lo = ((center - 4.0 * width) * fs).floor().max(0.0) as usize;
    let hi = (((center + 4.0 * width) * fs).ceil() as usize).min(x.len());
    for i in lo..hi {
        let t = i as f64 / fs;
        let env = (-(t - center) * (t - center) / (2.0 * width * width)).exp();
        x[i] += amp * env * (TAU * freq * t + phase).sin();
    }
}
