//! Corpus data model and ingestion.
//!
//! A corpus is a set of multichannel signal records with label spans attached,
//! grouped into three roles: `gold-train` (seed labels), `eval` (held-out
//! labels), and `unlabeled` (to be annotated by the self-training loop).
//!
//! File formats:
//! * signal file: CSV with header `time,<ch1>,...,<chN>`, one row per sample;
//! * label file: headerless CSV rows `record_id,channel_index,start_s,stop_s,label_code`;
//! * manifest: line-oriented, one entry per line `role<TAB>signal_path<TAB>[label_path]`,
//!   with an optional `@sample_rate<TAB>HZ` directive line (default 250 Hz).

pub mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::seed;
use rand::seq::SliceRandom;

/// Hz assumed when a manifest carries no `@sample_rate` directive.
pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;

/// The six event classes. Codes 1..6 are stable and used in label files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LabelClass {
    Spsw,
    Pled,
    Gped,
    Artf,
    Eyem,
    Bckg,
}

impl LabelClass {
    /// All classes in code order (1..6).
    pub const ALL: [LabelClass; 6] = [
        LabelClass::Spsw,
        LabelClass::Pled,
        LabelClass::Gped,
        LabelClass::Artf,
        LabelClass::Eyem,
        LabelClass::Bckg,
    ];

    /// Stable integer code, 1..6.
    pub fn code(self) -> u8 {
        match self {
            LabelClass::Spsw => 1,
            LabelClass::Pled => 2,
            LabelClass::Gped => 3,
            LabelClass::Artf => 4,
            LabelClass::Eyem => 5,
            LabelClass::Bckg => 6,
        }
    }

    /// Zero-based dense index (code − 1), for array-backed per-class tables.
    pub fn index(self) -> usize {
        self.code() as usize - 1
    }

    pub fn from_code(code: u8) -> Option<LabelClass> {
        LabelClass::ALL.get(code.checked_sub(1)? as usize).copied()
    }

    pub fn from_index(index: usize) -> Option<LabelClass> {
        LabelClass::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelClass::Spsw => "SPSW",
            LabelClass::Pled => "PLED",
            LabelClass::Gped => "GPED",
            LabelClass::Artf => "ARTF",
            LabelClass::Eyem => "EYEM",
            LabelClass::Bckg => "BCKG",
        }
    }

    pub fn from_name(name: &str) -> Option<LabelClass> {
        LabelClass::ALL.iter().copied().find(|c| c.name() == name)
    }

    /// True for the three classes of clinical interest.
    pub fn is_signal(self) -> bool {
        matches!(self, LabelClass::Spsw | LabelClass::Pled | LabelClass::Gped)
    }

    /// True for the three classes that absorb non-events.
    pub fn is_background(self) -> bool {
        !self.is_signal()
    }

    /// Position in the rarity order SPSW > PLED > GPED > EYEM > ARTF > BCKG.
    /// Lower rank means rarer; ties in labeling and classification break
    /// toward the rarer class.
    pub fn rarity_rank(self) -> usize {
        match self {
            LabelClass::Spsw => 0,
            LabelClass::Pled => 1,
            LabelClass::Gped => 2,
            LabelClass::Eyem => 3,
            LabelClass::Artf => 4,
            LabelClass::Bckg => 5,
        }
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dense per-class table indexed by [`LabelClass::index`].
pub type PerClass<T> = [T; 6];

/// One multichannel recording.
#[derive(Debug, Clone)]
pub struct SignalRecord {
    pub record_id: String,
    pub sample_rate: f64,
    pub channels: Vec<String>,
    /// Per-channel amplitude sequences, all of equal length.
    pub samples: Vec<Vec<f64>>,
}

impl SignalRecord {
    pub fn duration_secs(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples[0].len() as f64 / self.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate <= 0.0 {
            return Err(Error::Validation(format!(
                "record {}: sample_rate must be positive",
                self.record_id
            )));
        }
        if self.channels.len() != self.samples.len() {
            return Err(Error::Validation(format!(
                "record {}: {} channel names but {} sample sequences",
                self.record_id,
                self.channels.len(),
                self.samples.len()
            )));
        }
        let n = self.samples.first().map_or(0, Vec::len);
        if self.samples.iter().any(|s| s.len() != n) {
            return Err(Error::Validation(format!(
                "record {}: channels have unequal lengths",
                self.record_id
            )));
        }
        Ok(())
    }
}

/// A labeled time interval on one channel of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpan {
    pub record_id: String,
    pub channel_index: usize,
    pub start: f64,
    pub stop: f64,
    pub label: LabelClass,
}

impl LabelSpan {
    fn describe(&self) -> String {
        format!(
            "{} ch{} [{}, {}) {}",
            self.record_id, self.channel_index, self.start, self.stop, self.label
        )
    }

    pub fn validate_against(&self, record: &SignalRecord) -> Result<()> {
        if !(self.start >= 0.0 && self.start < self.stop) {
            return Err(Error::Validation(format!(
                "span {}: need 0 <= start < stop",
                self.describe()
            )));
        }
        let dur = record.duration_secs();
        if self.stop > dur + 1e-9 {
            return Err(Error::Validation(format!(
                "span {}: stop exceeds record duration {dur}",
                self.describe()
            )));
        }
        if self.channel_index >= record.channels.len() {
            return Err(Error::Validation(format!(
                "span {}: channel index out of range ({} channels)",
                self.describe(),
                record.channels.len()
            )));
        }
        Ok(())
    }
}

/// Role a record plays in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    GoldTrain,
    Eval,
    Unlabeled,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::GoldTrain => "gold-train",
            Role::Eval => "eval",
            Role::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "gold-train" => Some(Role::GoldTrain),
            "eval" => Some(Role::Eval),
            "unlabeled" => Some(Role::Unlabeled),
            _ => None,
        }
    }
}

/// One manifest line: a signal file, its role, and an optional label file.
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub role: Role,
    pub signal_path: PathBuf,
    pub label_path: Option<PathBuf>,
}

/// Parsed manifest: entries plus the declared sample rate.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    pub sample_rate: f64,
}

impl CorpusManifest {
    /// Parse a manifest file. Relative paths are resolved against the
    /// manifest's own directory.
    pub fn load(path: &Path) -> Result<CorpusManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut entries = Vec::new();
        let mut sample_rate = DEFAULT_SAMPLE_RATE;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields[0] == "@sample_rate" {
                if fields.len() != 2 {
                    return Err(Error::parse(path, lineno + 1, "@sample_rate needs one value"));
                }
                sample_rate = fields[1].parse().map_err(|_| {
                    Error::parse(path, lineno + 1, format!("bad sample rate {:?}", fields[1]))
                })?;
                continue;
            }
            let role = Role::parse(fields[0]).ok_or_else(|| {
                Error::parse(path, lineno + 1, format!("unknown role {:?}", fields[0]))
            })?;
            if fields.len() < 2 || fields.len() > 3 {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    "expected role<TAB>signal_path<TAB>[label_path]",
                ));
            }
            let signal_path = base.join(fields[1]);
            let label_path = fields.get(2).map(|p| base.join(p));
            match (role, &label_path) {
                (Role::Unlabeled, Some(_)) => {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        "unlabeled entries must not carry a label file",
                    ))
                }
                (Role::GoldTrain | Role::Eval, None) => {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("{} entries require a label file", role.as_str()),
                    ))
                }
                _ => {}
            }
            entries.push(ManifestEntry {
                role,
                signal_path,
                label_path,
            });
        }
        Ok(CorpusManifest {
            entries,
            sample_rate,
        })
    }

    /// Write a manifest with paths relative to `base`.
    pub fn write(&self, path: &Path, base: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("@sample_rate\t{}\n", self.sample_rate));
        for e in &self.entries {
            let sig = e
                .signal_path
                .strip_prefix(base)
                .unwrap_or(&e.signal_path)
                .to_string_lossy()
                .into_owned();
            match &e.label_path {
                Some(lp) => {
                    let lab = lp.strip_prefix(base).unwrap_or(lp).to_string_lossy();
                    out.push_str(&format!("{}\t{}\t{}\n", e.role.as_str(), sig, lab));
                }
                None => out.push_str(&format!("{}\t{}\n", e.role.as_str(), sig)),
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// One record with its spans and role.
#[derive(Debug, Clone)]
pub struct CorpusRecord {
    pub record: SignalRecord,
    pub spans: Vec<LabelSpan>,
    pub role: Role,
}

/// An immutable set of records grouped by role.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub records: Vec<CorpusRecord>,
}

impl Corpus {
    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &CorpusRecord> {
        self.records.iter().filter(move |r| r.role == role)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sum of span durations per class, in seconds.
    pub fn duration_summary(&self) -> PerClass<f64> {
        duration_summary(self.records.iter().flat_map(|r| r.spans.iter()))
    }
}

/// Sum of span durations per class over any span collection.
pub fn duration_summary<'a>(spans: impl Iterator<Item = &'a LabelSpan>) -> PerClass<f64> {
    let mut totals = [0.0; 6];
    for s in spans {
        totals[s.label.index()] += s.stop - s.start;
    }
    totals
}

/// Read a signal CSV. The record id is the file stem.
pub fn load_signal(path: &Path, sample_rate: f64) -> Result<SignalRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty signal file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "time" {
        return Err(Error::parse(path, 1, "header must be time,<ch1>,...,<chN>"));
    }
    let channels: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let _time = fields.next();
        let mut got = 0;
        for (ch, f) in fields.enumerate() {
            if ch >= channels.len() {
                return Err(Error::parse(path, lineno + 1, "too many columns"));
            }
            let v: f64 = f.parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("bad amplitude {f:?}"))
            })?;
            samples[ch].push(v);
            got += 1;
        }
        if got != channels.len() {
            return Err(Error::parse(path, lineno + 1, "too few columns"));
        }
    }
    let record_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let record = SignalRecord {
        record_id,
        sample_rate,
        channels,
        samples,
    };
    record.validate()?;
    Ok(record)
}

/// Write a signal CSV with six-decimal amplitudes.
pub fn write_signal(path: &Path, record: &SignalRecord) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut run = || -> std::io::Result<()> {
        write!(w, "time")?;
        for ch in &record.channels {
            write!(w, ",{ch}")?;
        }
        writeln!(w)?;
        let n = record.samples.first().map_or(0, Vec::len);
        for i in 0..n {
            write!(w, "{:.6}", i as f64 / record.sample_rate)?;
            for ch in &record.samples {
                write!(w, ",{:.6}", ch[i])?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    run().map_err(|e| Error::io(path, e))
}

/// Read a label CSV into spans.
pub fn load_labels(path: &Path) -> Result<Vec<LabelSpan>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut spans = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(path, lineno + 1, "expected 5 fields"));
        }
        let channel_index: usize = f[1]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad channel {:?}", f[1])))?;
        let start: f64 = f[2]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad start {:?}", f[2])))?;
        let stop: f64 = f[3]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad stop {:?}", f[3])))?;
        let code: u8 = f[4]
            .parse()
            .map_err(|_| Error::parse(path, lineno + 1, format!("bad label code {:?}", f[4])))?;
        let label = LabelClass::from_code(code).ok_or_else(|| {
            Error::Validation(format!("unknown label code {code} at {}:{}", path.display(), lineno + 1))
        })?;
        spans.push(LabelSpan {
            record_id: f[0].to_string(),
            channel_index,
            start,
            stop,
            label,
        });
    }
    Ok(spans)
}

/// Canonical label CSV: floats in shortest round-trip form, one span per line.
pub fn format_labels(spans: &[LabelSpan]) -> String {
    let mut out = String::new();
    for s in spans {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.record_id,
            s.channel_index,
            s.start,
            s.stop,
            s.label.code()
        ));
    }
    out
}

pub fn write_labels(path: &Path, spans: &[LabelSpan]) -> Result<()> {
    fs::write(path, format_labels(spans)).map_err(|e| Error::io(path, e))
}

/// Load every record named in a manifest, attach and validate its spans.
pub fn load_corpus(manifest: &CorpusManifest) -> Result<Corpus> {
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for entry in &manifest.entries {
        let record = load_signal(&entry.signal_path, manifest.sample_rate)?;
        if !seen.insert(record.record_id.clone()) {
            return Err(Error::Validation(format!(
                "record_id {} appears more than once in the manifest",
                record.record_id
            )));
        }
        let spans = match &entry.label_path {
            Some(lp) => {
                let spans = load_labels(lp)?;
                for s in &spans {
                    if s.record_id != record.record_id {
                        return Err(Error::Validation(format!(
                            "label file {} names record {} but is paired with {}",
                            lp.display(),
                            s.record_id,
                            record.record_id
                        )));
                    }
                    s.validate_against(&record)?;
                }
                spans
            }
            None => Vec::new(),
        };
        records.push(CorpusRecord {
            record,
            spans,
            role: entry.role,
        });
    }
    Ok(Corpus { records })
}

/// Partition a corpus by record id into train and eval sides.
///
/// Never splits within a record, so no epoch of one recording can appear on
/// both sides. Deterministic under `seed`.
pub fn split(corpus: &Corpus, eval_fraction: f64, seed_value: u64) -> Result<(Corpus, Corpus)> {
    if corpus.len() < 2 {
        return Err(Error::Split("need at least 2 records to split".into()));
    }
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Split(format!(
            "eval_fraction must lie in (0,1), got {eval_fraction}"
        )));
    }
    let n = corpus.len();
    let n_eval = (n as f64 * eval_fraction).round() as usize;
    if n_eval == 0 || n_eval == n {
        return Err(Error::Split(format!(
            "eval_fraction {eval_fraction} leaves an empty side for {n} records"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| corpus.records[a].record.record_id.cmp(&corpus.records[b].record.record_id));
    let mut rng = seed::rng_for(seed_value, "corpus/split");
    order.shuffle(&mut rng);
    let eval_idx: BTreeSet<usize> = order[..n_eval].iter().copied().collect();
    let mut train = Corpus::default();
    let mut eval = Corpus::default();
    for (i, rec) in corpus.records.iter().enumerate() {
        if eval_idx.contains(&i) {
            eval.records.push(rec.clone());
        } else {
            train.records.push(rec.clone());
        }
    }
    Ok((train, eval))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_record(id: &str, secs: f64, channels: usize) -> SignalRecord {
        let n = (secs * DEFAULT_SAMPLE_RATE) as usize;
        SignalRecord {
            record_id: id.to_string(),
            sample_rate: DEFAULT_SAMPLE_RATE,
            channels: (0..channels).map(|i| format!("c{}", i + 1)).collect(),
            samples: vec![vec![0.0; n]; channels],
        }
    }

    #[test]
    fn codes_are_a_bijection_onto_1_to_6() {
        let mut seen = BTreeSet::new();
        for c in LabelClass::ALL {
            let code = c.code();
            assert!((1..=6).contains(&code));
            assert!(seen.insert(code));
            assert_eq!(LabelClass::from_code(code), Some(c));
        }
        assert_eq!(LabelClass::from_code(0), None);
        assert_eq!(LabelClass::from_code(7), None);
    }

    #[test]
    fn signal_and_background_partition() {
        let signal: Vec<_> = LabelClass::ALL.iter().filter(|c| c.is_signal()).collect();
        assert_eq!(
            signal,
            vec![&LabelClass::Spsw, &LabelClass::Pled, &LabelClass::Gped]
        );
        for c in LabelClass::ALL {
            assert_ne!(c.is_signal(), c.is_background());
        }
    }

    #[test]
    fn rarity_order_is_strict() {
        let mut ranks: Vec<usize> = LabelClass::ALL.iter().map(|c| c.rarity_rank()).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, vec![0, 1, 2, 3, 4, 5]);
        assert!(LabelClass::Spsw.rarity_rank() < LabelClass::Bckg.rarity_rank());
    }

    #[test]
    fn span_validation_catches_out_of_range() {
        let rec = flat_record("e1", 60.0, 2);
        let ok = LabelSpan {
            record_id: "e1".into(),
            channel_index: 0,
            start: 0.0,
            stop: 10.0,
            label: LabelClass::Gped,
        };
        ok.validate_against(&rec).unwrap();

        let bad = LabelSpan {
            stop: 999.0,
            ..ok.clone()
        };
        let err = bad.validate_against(&rec).unwrap_err();
        assert!(err.to_string().contains("999"), "{err}");

        let bad_ch = LabelSpan {
            channel_index: 5,
            ..ok
        };
        assert!(bad_ch.validate_against(&rec).is_err());
    }

    #[test]
    fn label_round_trip_is_byte_identical() {
        let spans = vec![
            LabelSpan {
                record_id: "e1".into(),
                channel_index: 0,
                start: 0.0,
                stop: 10.0,
                label: LabelClass::Gped,
            },
            LabelSpan {
                record_id: "e1".into(),
                channel_index: 1,
                start: 2.5,
                stop: 4.0,
                label: LabelClass::Spsw,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        write_labels(&p, &spans).unwrap();
        let original = fs::read_to_string(&p).unwrap();
        let loaded = load_labels(&p).unwrap();
        assert_eq!(loaded, spans);
        write_labels(&p, &loaded).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), original);
    }

    #[test]
    fn signal_round_trip_preserves_shape() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sig.csv");
        let mut rec = flat_record("sig", 2.0, 3);
        rec.samples[1][17] = 42.25;
        write_signal(&p, &rec).unwrap();
        let loaded = load_signal(&p, DEFAULT_SAMPLE_RATE).unwrap();
        assert_eq!(loaded.record_id, "sig");
        assert_eq!(loaded.channels, rec.channels);
        assert_eq!(loaded.samples[1][17], 42.25);
        assert_eq!(loaded.samples[0].len(), 500);
    }

    #[test]
    fn manifest_role_label_rules() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.tsv");
        fs::write(&p, "gold-train\tsig.csv\n").unwrap();
        assert!(CorpusManifest::load(&p).is_err());
        fs::write(&p, "unlabeled\tsig.csv\tlabels.csv\n").unwrap();
        assert!(CorpusManifest::load(&p).is_err());
        fs::write(&p, "@sample_rate\t200\nunlabeled\tsig.csv\n").unwrap();
        let m = CorpusManifest::load(&p).unwrap();
        assert_eq!(m.sample_rate, 200.0);
        assert_eq!(m.entries.len(), 1);
    }

    #[test]
    fn load_corpus_minimal_and_invalid_span() {
        let dir = tempfile::tempdir().unwrap();
        let rec = flat_record("e1", 60.0, 1);
        write_signal(&dir.path().join("e1.csv"), &rec).unwrap();
        write_labels(
            &dir.path().join("e1_labels.csv"),
            &[LabelSpan {
                record_id: "e1".into(),
                channel_index: 0,
                start: 0.0,
                stop: 10.0,
                label: LabelClass::Gped,
            }],
        )
        .unwrap();
        let mp = dir.path().join("manifest.tsv");
        fs::write(&mp, "gold-train\te1.csv\te1_labels.csv\n").unwrap();
        let corpus = load_corpus(&CorpusManifest::load(&mp).unwrap()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.records[0].spans.len(), 1);

        write_labels(
            &dir.path().join("e1_labels.csv"),
            &[LabelSpan {
                record_id: "e1".into(),
                channel_index: 0,
                start: 0.0,
                stop: 999.0,
                label: LabelClass::Gped,
            }],
        )
        .unwrap();
        let err = load_corpus(&CorpusManifest::load(&mp).unwrap()).unwrap_err();
        assert!(err.to_string().contains("999"), "{err}");
    }

    #[test]
    fn missing_file_is_an_ingestion_error_naming_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let mp = dir.path().join("manifest.tsv");
        fs::write(&mp, "unlabeled\tnope.csv\n").unwrap();
        let err = load_corpus(&CorpusManifest::load(&mp).unwrap()).unwrap_err();
        assert!(err.to_string().contains("nope.csv"), "{err}");
    }

    #[test]
    fn duration_summary_matches_class_volumes() {
        // Totals shaped like a clinical corpus: PLED 11,253 s, GPED 6,161 s,
        // SPSW 643 s, BCKG 53,726 s, ARTF 11,053 s, EYEM 1,070 s.
        let mk = |label, secs: f64| LabelSpan {
            record_id: "r".into(),
            channel_index: 0,
            start: 0.0,
            stop: secs,
            label,
        };
        let spans = [
            mk(LabelClass::Pled, 11_253.0),
            mk(LabelClass::Gped, 6_161.0),
            mk(LabelClass::Spsw, 643.0),
            mk(LabelClass::Bckg, 53_726.0),
            mk(LabelClass::Artf, 11_053.0),
            mk(LabelClass::Eyem, 1_070.0),
        ];
        let totals = duration_summary(spans.iter());
        assert_eq!(totals[LabelClass::Pled.index()], 11_253.0);
        assert_eq!(totals[LabelClass::Gped.index()], 6_161.0);
        assert_eq!(totals[LabelClass::Spsw.index()], 643.0);
        assert_eq!(totals[LabelClass::Bckg.index()], 53_726.0);
        assert_eq!(totals[LabelClass::Artf.index()], 11_053.0);
        assert_eq!(totals[LabelClass::Eyem.index()], 1_070.0);
    }

    fn corpus_of(n: usize) -> Corpus {
        Corpus {
            records: (0..n)
                .map(|i| CorpusRecord {
                    record: flat_record(&format!("r{i:03}"), 4.0, 1),
                    spans: Vec::new(),
                    role: Role::GoldTrain,
                })
                .collect(),
        }
    }

    #[test]
    fn split_partitions_by_record() {
        let corpus = corpus_of(10);
        let (train, eval) = split(&corpus, 0.2, 7).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(eval.len(), 2);
        let train_ids: BTreeSet<_> = train.records.iter().map(|r| &r.record.record_id).collect();
        let eval_ids: BTreeSet<_> = eval.records.iter().map(|r| &r.record.record_id).collect();
        assert!(train_ids.is_disjoint(&eval_ids));
        assert_eq!(train_ids.len() + eval_ids.len(), 10);

        // Determinism.
        let (t2, e2) = split(&corpus, 0.2, 7).unwrap();
        let ids = |c: &Corpus| -> Vec<String> {
            c.records.iter().map(|r| r.record.record_id.clone()).collect()
        };
        assert_eq!(ids(&train), ids(&t2));
        assert_eq!(ids(&eval), ids(&e2));
    }

    #[test]
    fn split_minimal_and_degenerate() {
        let (train, eval) = split(&corpus_of(2), 0.5, 1).unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(eval.len(), 1);
        assert!(split(&corpus_of(1), 0.5, 1).is_err());
        assert!(split(&corpus_of(10), 0.01, 1).is_err());
    }
}
