//! Epoch segmentation and the frame-feature front end.
//!
//! Records are cut into non-overlapping fixed-length epochs per channel.
//! Each epoch yields `T` frames of `D = num_cepstral + energy flag +
//! differential-energy flag` features:
//!
//! * energy: `ln(sum(x^2) + eps)` over the raw frame window;
//! * `c1..c_nc`: leading real-cepstrum coefficients of the Hamming-windowed
//!   frame (the zeroth coefficient is skipped; it duplicates energy);
//! * differential energy: max minus min of log mean-square energy across
//!   the frame's step-sized sub-windows, a transientness measure.
//!
//! Frame `t` starts at `t * frame_step` within its epoch and is clipped at
//! the epoch boundary, so an epoch's features depend only on its own samples.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::corpus::{LabelClass, LabelSpan, SignalRecord};
use crate::error::{Error, Result};

/// Floor added inside every logarithm.
pub const LOG_EPS: f64 = 1e-12;

/// Front-end configuration. The fingerprint of this struct is stored in
/// model files and must match at decode time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub epoch_duration: f64,
    pub frame_step: f64,
    pub window_length: f64,
    pub num_cepstral: usize,
    pub include_energy: bool,
    pub include_differential_energy: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            epoch_duration: 1.0,
            frame_step: 0.1,
            window_length: 0.2,
            num_cepstral: 7,
            include_energy: true,
            include_differential_energy: true,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_step > 0.0 && self.window_length >= self.frame_step) {
            return Err(Error::Feature(
                "need window_length >= frame_step > 0".into(),
            ));
        }
        let ratio = self.epoch_duration / self.frame_step;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Feature(format!(
                "epoch_duration {} is not an integer multiple of frame_step {}",
                self.epoch_duration, self.frame_step
            )));
        }
        if self.dim() == 0 {
            return Err(Error::Feature("feature dimension is zero".into()));
        }
        Ok(())
    }

    /// Frames per epoch (`T`).
    pub fn frames_per_epoch(&self) -> usize {
        (self.epoch_duration / self.frame_step).round() as usize
    }

    /// Feature dimension (`D`).
    pub fn dim(&self) -> usize {
        self.num_cepstral
            + usize::from(self.include_energy)
            + usize::from(self.include_differential_energy)
    }

    /// Stable identifier stored in model files to reject mismatched fronts.
    pub fn fingerprint(&self) -> String {
        format!(
            "fe1;ep={};fs={};wl={};nc={};e={};de={}",
            self.epoch_duration,
            self.frame_step,
            self.window_length,
            self.num_cepstral,
            u8::from(self.include_energy),
            u8::from(self.include_differential_energy)
        )
    }
}

/// Identity of one epoch: record, channel, and ordinal position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EpochId {
    pub record_id: String,
    pub channel: usize,
    pub index: usize,
}

impl fmt::Display for EpochId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ch{} #{}", self.record_id, self.channel, self.index)
    }
}

/// A pseudo-label attached by the self-training loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoLabel {
    pub class: LabelClass,
    pub confidence: f64,
    pub iteration: usize,
}

/// One 1-second (by default) window of one channel with its feature matrix.
#[derive(Debug, Clone)]
pub struct Epoch {
    pub id: EpochId,
    pub start: f64,
    /// `T x D` feature matrix; empty until `extract_frames` fills it.
    pub frames: Array2<f64>,
    pub gold_label: Option<LabelClass>,
    pub auto_label: Option<AutoLabel>,
}

impl Epoch {
    /// The label that rules training membership: gold wins over auto.
    pub fn training_label(&self) -> Option<LabelClass> {
        self.gold_label.or(self.auto_label.map(|a| a.class))
    }
}

/// Cut a record into contiguous non-overlapping epochs per channel, starting
/// at t = 0. A trailing partial epoch is discarded. Features are unfilled.
pub fn segment(record: &SignalRecord, cfg: &FeatureConfig) -> Result<Vec<Epoch>> {
    cfg.validate()?;
    record.validate()?;
    let epoch_samples = (cfg.epoch_duration * record.sample_rate).round() as usize;
    if epoch_samples == 0 {
        return Err(Error::Feature("epoch shorter than one sample".into()));
    }
    let n = record.samples.first().map_or(0, Vec::len);
    let per_channel = n / epoch_samples;
    if per_channel == 0 {
        return Err(Error::Feature(format!(
            "record {} is shorter than one epoch",
            record.record_id
        )));
    }
    let mut epochs = Vec::with_capacity(per_channel * record.channels.len());
    for ch in 0..record.channels.len() {
        for index in 0..per_channel {
            epochs.push(Epoch {
                id: EpochId {
                    record_id: record.record_id.clone(),
                    channel: ch,
                    index,
                },
                start: index as f64 * cfg.epoch_duration,
                frames: Array2::zeros((0, 0)),
                gold_label: None,
                auto_label: None,
            });
        }
    }
    Ok(epochs)
}

/// Windowing and cepstrum tables for one frame length.
struct FramePlan {
    n: usize,
    hamming: Vec<f64>,
    /// cos/sin twiddles for the magnitude spectrum, indexed [k][j].
    cos_t: Vec<Vec<f64>>,
    sin_t: Vec<Vec<f64>>,
    /// Cepstral projection table, indexed [q-1][k] over the full spectrum.
    ceps_t: Vec<Vec<f64>>,
}

impl FramePlan {
    fn new(n: usize, num_cepstral: usize) -> FramePlan {
        let hamming: Vec<f64> = if n == 1 {
            vec![1.0]
        } else {
            (0..n)
                .map(|j| 0.54 - 0.46 * (TAU * j as f64 / (n as f64 - 1.0)).cos())
                .collect()
        };
        let half = n / 2;
        let mut cos_t = Vec::with_capacity(half + 1);
        let mut sin_t = Vec::with_capacity(half + 1);
        for k in 0..=half {
            let w = TAU * k as f64 / n as f64;
            cos_t.push((0..n).map(|j| (w * j as f64).cos()).collect());
            sin_t.push((0..n).map(|j| (w * j as f64).sin()).collect());
        }
        let mut ceps_t = Vec::with_capacity(num_cepstral);
        for q in 1..=num_cepstral {
            let w = TAU * q as f64 / n as f64;
            ceps_t.push((0..n).map(|k| (w * k as f64).cos()).collect());
        }
        FramePlan {
            n,
            hamming,
            cos_t,
            sin_t,
            ceps_t,
        }
    }

    /// Leading real-cepstrum coefficients c_1..c_nc of the windowed frame.
    fn cepstra(&self, frame: &[f64], out: &mut [f64]) {
        let n = self.n;
        let windowed: Vec<f64> = frame
            .iter()
            .zip(&self.hamming)
            .map(|(x, w)| x * w)
            .collect();
        // Magnitude spectrum; real input so |X[k]| = |X[n-k]|.
        let half = n / 2;
        let mut logmag = vec![0.0f64; n];
        for k in 0..=half {
            let (mut re, mut im) = (0.0, 0.0);
            let (ck, sk) = (&self.cos_t[k], &self.sin_t[k]);
            for j in 0..n {
                re += windowed[j] * ck[j];
                im -= windowed[j] * sk[j];
            }
            let lm = ((re * re + im * im).sqrt() + LOG_EPS).ln();
            logmag[k] = lm;
            if k != 0 && k != n - k {
                logmag[n - k] = lm;
            }
        }
        for (q, slot) in out.iter_mut().enumerate() {
            let table = &self.ceps_t[q];
            let mut acc = 0.0;
            for k in 0..n {
                acc += logmag[k] * table[k];
            }
            *slot = acc / n as f64;
        }
    }
}

/// Reusable frame extractor: caches DFT plans across epochs of a record.
pub struct FrameExtractor {
    cfg: FeatureConfig,
    plans: Vec<FramePlan>,
}

impl FrameExtractor {
    pub fn new(cfg: &FeatureConfig) -> Result<FrameExtractor> {
        cfg.validate()?;
        Ok(FrameExtractor {
            cfg: cfg.clone(),
            plans: Vec::new(),
        })
    }

    fn plan(&mut self, n: usize) -> &FramePlan {
        if let Some(pos) = self.plans.iter().position(|p| p.n == n) {
            return &self.plans[pos];
        }
        self.plans.push(FramePlan::new(n, self.cfg.num_cepstral));
        self.plans.last().unwrap()
    }

    /// Fill `epoch.frames` from the record's samples.
    pub fn extract(&mut self, record: &SignalRecord, epoch: &mut Epoch) -> Result<()> {
        let cfg = self.cfg.clone();
        let fs = record.sample_rate;
        let t_frames = cfg.frames_per_epoch();
        let d = cfg.dim();
        let step = (cfg.frame_step * fs).round() as usize;
        let win = (cfg.window_length * fs).round() as usize;
        let epoch_samples = (cfg.epoch_duration * fs).round() as usize;
        let start_sample = (epoch.start * fs).round() as usize;
        let channel = record
            .samples
            .get(epoch.id.channel)
            .ok_or_else(|| Error::Feature(format!("epoch {}: no such channel", epoch.id)))?;
        if start_sample + epoch_samples > channel.len() {
            return Err(Error::Feature(format!(
                "epoch {} does not lie within its record",
                epoch.id
            )));
        }
        if step == 0 || win < step {
            return Err(Error::Feature("window/step resolve to zero samples".into()));
        }

        let mut frames = Array2::zeros((t_frames, d));
        let mut ceps = vec![0.0f64; cfg.num_cepstral];
        for t in 0..t_frames {
            let begin = start_sample + t * step;
            let end = (begin + win).min(start_sample + epoch_samples);
            let frame = &channel[begin..end];
            if frame.iter().any(|x| !x.is_finite()) {
                return Err(Error::Feature(format!(
                    "non-finite sample in epoch {} frame {t}",
                    epoch.id
                )));
            }

            let mut col = 0;
            if cfg.include_energy {
                let e: f64 = frame.iter().map(|x| x * x).sum();
                frames[[t, col]] = (e + LOG_EPS).ln();
                col += 1;
            }
            self.plan(frame.len()).cepstra(frame, &mut ceps);
            for c in &ceps {
                frames[[t, col]] = *c;
                col += 1;
            }
            if cfg.include_differential_energy {
                let chunks = frame.len() / step;
                let mut emin = f64::INFINITY;
                let mut emax = f64::NEG_INFINITY;
                for j in 0..chunks.max(1) {
                    let lo = j * step;
                    let hi = ((j + 1) * step).min(frame.len());
                    let ms: f64 =
                        frame[lo..hi].iter().map(|x| x * x).sum::<f64>() / (hi - lo) as f64;
                    let le = (ms + LOG_EPS).ln();
                    emin = emin.min(le);
                    emax = emax.max(le);
                }
                frames[[t, col]] = emax - emin;
            }
        }
        if frames.iter().any(|x| !x.is_finite()) {
            return Err(Error::Feature(format!(
                "non-finite feature in epoch {}",
                epoch.id
            )));
        }
        epoch.frames = frames;
        Ok(())
    }
}

/// One-shot variant of [`FrameExtractor::extract`].
pub fn extract_frames(record: &SignalRecord, epoch: &mut Epoch, cfg: &FeatureConfig) -> Result<()> {
    FrameExtractor::new(cfg)?.extract(record, epoch)
}

/// Segment a record and fill every epoch's features.
pub fn segment_and_extract(record: &SignalRecord, cfg: &FeatureConfig) -> Result<Vec<Epoch>> {
    let mut epochs = segment(record, cfg)?;
    let mut extractor = FrameExtractor::new(cfg)?;
    for e in &mut epochs {
        extractor.extract(record, e)?;
    }
    Ok(epochs)
}

/// Assign gold labels to epochs from spans.
///
/// An epoch takes the class covering at least `min_overlap` of its duration;
/// coverage ties break toward the rarer class. Epochs no span covers enough
/// default to BCKG.
pub fn label_epochs(
    epochs: &mut [Epoch],
    spans: &[LabelSpan],
    min_overlap: f64,
    cfg: &FeatureConfig,
) -> Result<()> {
    if !(min_overlap > 0.0 && min_overlap <= 1.0) {
        return Err(Error::Validation(format!(
            "min_overlap must lie in (0,1], got {min_overlap}"
        )));
    }
    let need = min_overlap * cfg.epoch_duration;
    for epoch in epochs.iter_mut() {
        let e_start = epoch.start;
        let e_stop = epoch.start + cfg.epoch_duration;
        let mut coverage = [0.0f64; 6];
        for s in spans {
            if s.record_id != epoch.id.record_id || s.channel_index != epoch.id.channel {
                continue;
            }
            let ov = (s.stop.min(e_stop) - s.start.max(e_start)).max(0.0);
            coverage[s.label.index()] += ov;
        }
        let mut best: Option<LabelClass> = None;
        for c in LabelClass::ALL {
            if coverage[c.index()] + 1e-12 < need {
                continue;
            }
            best = match best {
                None => Some(c),
                Some(b) => {
                    let (cb, cc) = (coverage[b.index()], coverage[c.index()]);
                    if cc > cb + 1e-12 {
                        Some(c)
                    } else if (cc - cb).abs() <= 1e-12 {
                        if c.rarity_rank() == b.rarity_rank() && c != b {
                            return Err(Error::AmbiguousLabel(epoch.id.to_string()));
                        }
                        Some(if c.rarity_rank() < b.rarity_rank() { c } else { b })
                    } else {
                        Some(b)
                    }
                }
            };
        }
        epoch.gold_label = Some(best.unwrap_or(LabelClass::Bckg));
    }
    Ok(())
}

/// Write epochs with features to the cache format: one line per epoch,
/// `record_id,channel,start_s,label_code_or_0,conf_or_0,f_1,...` with floats
/// at nine significant digits. A zero confidence marks a gold label.
pub fn write_epoch_cache(path: &Path, epochs: &[Epoch]) -> Result<()> {
    let mut out = String::new();
    for e in epochs {
        let (code, conf) = match (e.gold_label, e.auto_label) {
            (Some(g), _) => (g.code(), 0.0),
            (None, Some(a)) => (a.class.code(), a.confidence),
            (None, None) => (0, 0.0),
        };
        out.push_str(&format!(
            "{},{},{},{},{:.8e}",
            e.id.record_id, e.id.channel, e.start, code, conf
        ));
        for v in e.frames.iter() {
            out.push_str(&format!(",{v:.8e}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read an epoch cache written by [`write_epoch_cache`].
pub fn read_epoch_cache(path: &Path, cfg: &FeatureConfig) -> Result<Vec<Epoch>> {
    cfg.validate()?;
    let (t, d) = (cfg.frames_per_epoch(), cfg.dim());
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut epochs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 + t * d {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {} fields, got {}", 5 + t * d, fields.len()),
            ));
        }
        let bad = |what: &str| Error::parse(path, lineno + 1, format!("bad {what}"));
        let channel: usize = fields[1].parse().map_err(|_| bad("channel"))?;
        let start: f64 = fields[2].parse().map_err(|_| bad("start"))?;
        let code: u8 = fields[3].parse().map_err(|_| bad("label code"))?;
        let conf: f64 = fields[4].parse().map_err(|_| bad("confidence"))?;
        let mut frames = Array2::zeros((t, d));
        for (i, v) in fields[5..].iter().enumerate() {
            frames[[i / d, i % d]] = v.parse().map_err(|_| bad("feature"))?;
        }
        let label = if code == 0 {
            None
        } else {
            Some(
                LabelClass::from_code(code)
                    .ok_or_else(|| bad(&format!("label code {code}")))?,
            )
        };
        let (gold, auto) = if conf == 0.0 {
            (label, None)
        } else {
            (
                None,
                label.map(|class| AutoLabel {
                    class,
                    confidence: conf,
                    iteration: 0,
                }),
            )
        };
        epochs.push(Epoch {
            id: EpochId {
                record_id: fields[0].to_string(),
                channel,
                index: (start / cfg.epoch_duration).round() as usize,
            },
            start,
            frames,
            gold_label: gold,
            auto_label: auto,
        });
    }
    Ok(epochs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DEFAULT_SAMPLE_RATE;

    fn record_from(samples: Vec<Vec<f64>>) -> SignalRecord {
        SignalRecord {
            record_id: "rec".into(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            channels: (0..samples.len()).map(|i| format!("c{}", i + 1)).collect(),
            samples,
        }
    }

    fn sine(secs: f64, freq: f64, amp: f64) -> Vec<f64> {
        let n = (secs * DEFAULT_SAMPLE_RATE) as usize;
        (0..n)
            .map(|i| amp * (TAU * freq * i as f64 / DEFAULT_SAMPLE_RATE).sin())
            .collect()
    }

    #[test]
    fn segment_counts() {
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![vec![0.0; 2500]]);
        let epochs = segment(&rec, &cfg).unwrap();
        assert_eq!(epochs.len(), 10);
        let starts: Vec<f64> = epochs.iter().map(|e| e.start).collect();
        assert_eq!(starts, (0..10).map(f64::from).collect::<Vec<_>>());

        // Trailing partial epoch dropped.
        let rec = record_from(vec![vec![0.0; 2625]]);
        assert_eq!(segment(&rec, &cfg).unwrap().len(), 10);

        // Per-channel count.
        let rec = record_from(vec![vec![0.0; 2500]; 22]);
        assert_eq!(segment(&rec, &cfg).unwrap().len(), 220);

        // Shorter than one epoch.
        let rec = record_from(vec![vec![0.0; 100]]);
        assert!(segment(&rec, &cfg).is_err());
    }

    #[test]
    fn zero_signal_features() {
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![vec![0.0; 250]]);
        let epochs = segment_and_extract(&rec, &cfg).unwrap();
        let f = &epochs[0].frames;
        assert_eq!(f.shape(), &[10, 9]);
        for t in 0..10 {
            assert!((f[[t, 0]] - LOG_EPS.ln()).abs() < 1e-12, "energy");
            for c in 1..8 {
                assert!(f[[t, c]].abs() < 1e-9, "cepstra finite and zero");
            }
            assert_eq!(f[[t, 8]], 0.0, "differential energy");
        }
    }

    #[test]
    fn constant_sinusoid_has_no_differential_energy() {
        // 10 Hz at 250 Hz: each 25-sample sub-window spans one full period,
        // so sub-window energies agree exactly for any phase.
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![sine(2.0, 10.0, 5.0)]);
        let epochs = segment_and_extract(&rec, &cfg).unwrap();
        for e in &epochs {
            for t in 0..cfg.frames_per_epoch() {
                let energy = e.frames[[t, 0]];
                let de = e.frames[[t, 8]];
                assert!(
                    de.abs() < 1e-6 * energy.abs(),
                    "diff energy {de} vs energy {energy}"
                );
            }
        }
    }

    #[test]
    fn default_shape_is_10_by_9() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.frames_per_epoch(), 10);
        assert_eq!(cfg.dim(), 9);
        let rec = record_from(vec![sine(1.0, 7.0, 2.0)]);
        let epochs = segment_and_extract(&rec, &cfg).unwrap();
        assert_eq!(epochs[0].frames.shape(), &[10, 9]);
    }

    #[test]
    fn translation_by_whole_epochs_permutes_features() {
        let cfg = FeatureConfig::default();
        let mut a = sine(1.0, 9.0, 3.0);
        let b = sine(1.0, 17.0, 1.5);
        let mut swapped = b.clone();
        swapped.extend_from_slice(&a);
        a.extend_from_slice(&b);

        let ea = segment_and_extract(&record_from(vec![a]), &cfg).unwrap();
        let eb = segment_and_extract(&record_from(vec![swapped]), &cfg).unwrap();
        for (x, y) in ea[0].frames.iter().zip(eb[1].frames.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in ea[1].frames.iter().zip(eb[0].frames.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_shifts_energy_by_2_log_a() {
        let cfg = FeatureConfig::default();
        // Ramp the amplitude so frame energies are clearly distinct.
        let base: Vec<f64> = sine(1.0, 9.0, 3.0)
            .iter()
            .enumerate()
            .map(|(i, x)| x * (1.0 + i as f64 / 125.0))
            .collect();
        let scaled: Vec<f64> = base.iter().map(|x| 2.5 * x).collect();
        let ea = segment_and_extract(&record_from(vec![base]), &cfg).unwrap();
        let eb = segment_and_extract(&record_from(vec![scaled]), &cfg).unwrap();
        let shift = 2.0 * 2.5f64.ln();
        for t in 0..10 {
            let d = eb[0].frames[[t, 0]] - ea[0].frames[[t, 0]];
            assert!((d - shift).abs() < 1e-9, "got {d}, want {shift}");
        }
        // Ordering of frames by energy is unchanged.
        let order = |e: &Epoch| {
            let mut idx: Vec<usize> = (0..10).collect();
            idx.sort_by(|&i, &j| e.frames[[i, 0]].total_cmp(&e.frames[[j, 0]]));
            idx
        };
        assert_eq!(order(&ea[0]), order(&eb[0]));
    }

    #[test]
    fn determinism_bit_for_bit() {
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![sine(3.0, 11.0, 4.0)]);
        let a = segment_and_extract(&rec, &cfg).unwrap();
        let b = segment_and_extract(&rec, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.frames, y.frames);
        }
    }

    #[test]
    fn non_finite_sample_is_a_feature_error() {
        let cfg = FeatureConfig::default();
        let mut samples = vec![0.5; 250];
        samples[100] = f64::NAN;
        let rec = record_from(vec![samples]);
        let err = segment_and_extract(&rec, &cfg).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    fn span(label: LabelClass, ch: usize, start: f64, stop: f64) -> LabelSpan {
        LabelSpan {
            record_id: "rec".into(),
            channel_index: ch,
            start,
            stop,
            label,
        }
    }

    #[test]
    fn labeling_rules() {
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![vec![0.0; 750]]);
        let mut epochs = segment(&rec, &cfg).unwrap();
        let spans = vec![
            // Epoch 0 fully inside a GPED span.
            span(LabelClass::Gped, 0, 0.0, 1.0),
            // Epoch 1: 0.6 s SPSW vs 0.4 s BCKG.
            span(LabelClass::Spsw, 0, 1.0, 1.6),
            span(LabelClass::Bckg, 0, 1.6, 2.0),
            // Epoch 2 uncovered.
        ];
        label_epochs(&mut epochs, &spans, 0.5, &cfg).unwrap();
        assert_eq!(epochs[0].gold_label, Some(LabelClass::Gped));
        assert_eq!(epochs[1].gold_label, Some(LabelClass::Spsw));
        assert_eq!(epochs[2].gold_label, Some(LabelClass::Bckg));
    }

    #[test]
    fn label_tie_breaks_to_rarer_class() {
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![vec![0.0; 250]]);
        let mut epochs = segment(&rec, &cfg).unwrap();
        let spans = vec![
            span(LabelClass::Gped, 0, 0.0, 0.5),
            span(LabelClass::Pled, 0, 0.5, 1.0),
        ];
        label_epochs(&mut epochs, &spans, 0.5, &cfg).unwrap();
        assert_eq!(epochs[0].gold_label, Some(LabelClass::Pled));
    }

    #[test]
    fn epoch_cache_round_trip() {
        let cfg = FeatureConfig::default();
        let rec = record_from(vec![sine(2.0, 8.0, 2.0)]);
        let mut epochs = segment_and_extract(&rec, &cfg).unwrap();
        epochs[0].gold_label = Some(LabelClass::Eyem);
        epochs[1].auto_label = Some(AutoLabel {
            class: LabelClass::Spsw,
            confidence: -0.25,
            iteration: 0,
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cache.csv");
        write_epoch_cache(&p, &epochs).unwrap();
        let loaded = read_epoch_cache(&p, &cfg).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].gold_label, Some(LabelClass::Eyem));
        let auto = loaded[1].auto_label.unwrap();
        assert_eq!(auto.class, LabelClass::Spsw);
        assert!((auto.confidence + 0.25).abs() < 1e-9);
        for (a, b) in epochs[0].frames.iter().zip(loaded[0].frames.iter()) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        }
    }
}
