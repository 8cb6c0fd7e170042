//! Versioned model file format.
//!
//! Plain nested key-value text, one `[model CLASS]` section per class, floats
//! at 17 significant digits so every parameter round-trips exactly.

use std::fs;
use std::path::Path;

use super::{GmmHmm, ModelSet};
use crate::corpus::LabelClass;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn fmt_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Serialize a model set.
pub fn save_model_set(path: &Path, set: &ModelSet) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("format_version = {MODEL_FORMAT_VERSION}\n"));
    out.push_str(&format!("feature_fingerprint = {}\n", set.fingerprint));
    out.push_str(&format!("models = {}\n", set.models.len()));
    for model in &set.models {
        out.push('\n');
        out.push_str(&format!("[model {}]\n", model.class));
        out.push_str(&format!("states = {}\n", model.num_states));
        out.push_str(&format!("mixtures = {}\n", model.num_mixtures));
        out.push_str(&format!("dim = {}\n", model.feature_dim));
        out.push_str(&format!("pi = {}\n", fmt_floats(&model.initial)));
        for (i, row) in model.transitions.iter().enumerate() {
            out.push_str(&format!("A {i} = {}\n", fmt_floats(row)));
        }
        for (s, row) in model.weights.iter().enumerate() {
            out.push_str(&format!("w {s} = {}\n", fmt_floats(row)));
        }
        for (s, mixes) in model.means.iter().enumerate() {
            for (m, mu) in mixes.iter().enumerate() {
                out.push_str(&format!("mu {s} {m} = {}\n", fmt_floats(mu)));
            }
        }
        for (s, mixes) in model.variances.iter().enumerate() {
            for (m, var) in mixes.iter().enumerate() {
                out.push_str(&format!("var {s} {m} = {}\n", fmt_floats(var)));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Feature dimension implied by a front-end fingerprint string.
fn fingerprint_dim(fp: &str) -> Option<usize> {
    let mut nc = None;
    let mut e = None;
    let mut de = None;
    for part in fp.split(';') {
        if let Some(v) = part.strip_prefix("nc=") {
            nc = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("e=") {
            e = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("de=") {
            de = v.parse::<usize>().ok();
        }
    }
    Some(nc? + e? + de?)
}

struct PartialModel {
    class: LabelClass,
    states: Option<usize>,
    mixtures: Option<usize>,
    dim: Option<usize>,
    pi: Option<Vec<f64>>,
    a: Vec<(usize, Vec<f64>)>,
    w: Vec<(usize, Vec<f64>)>,
    mu: Vec<(usize, usize, Vec<f64>)>,
    var: Vec<(usize, usize, Vec<f64>)>,
}

impl PartialModel {
    fn new(class: LabelClass) -> PartialModel {
        PartialModel {
            class,
            states: None,
            mixtures: None,
            dim: None,
            pi: None,
            a: Vec::new(),
            w: Vec::new(),
            mu: Vec::new(),
            var: Vec::new(),
        }
    }

    fn finish(self, path: &Path) -> Result<GmmHmm> {
        let incomplete = |what: &str| {
            Error::parse(
                path,
                0,
                format!("model {} is incomplete: missing {what}", self.class),
            )
        };
        let s = self.states.ok_or_else(|| incomplete("states"))?;
        let m = self.mixtures.ok_or_else(|| incomplete("mixtures"))?;
        let d = self.dim.ok_or_else(|| incomplete("dim"))?;
        let pi = self.pi.ok_or_else(|| incomplete("pi"))?;
        let gather_rows = |rows: &[(usize, Vec<f64>)], n, what: &str| -> Result<Vec<Vec<f64>>> {
            let mut out = vec![None; n];
            for (i, row) in rows {
                if *i < n {
                    out[*i] = Some(row.clone());
                }
            }
            out.into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| incomplete(what))
        };
        let a = gather_rows(&self.a, s, "transition rows")?;
        let w = gather_rows(&self.w, s, "weight rows")?;
        let gather_mix = |rows: &[(usize, usize, Vec<f64>)], what: &str| -> Result<Vec<Vec<Vec<f64>>>> {
            let mut out = vec![vec![None; m]; s];
            for (si, mi, row) in rows {
                if *si < s && *mi < m {
                    out[*si][*mi] = Some(row.clone());
                }
            }
            out.into_iter()
                .map(|state| state.into_iter().collect::<Option<Vec<_>>>())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| incomplete(what))
        };
        let mu = gather_mix(&self.mu, "means")?;
        let var = gather_mix(&self.var, "variances")?;
        let model = GmmHmm {
            class: self.class,
            num_states: s,
            num_mixtures: m,
            feature_dim: d,
            initial: pi,
            transitions: a,
            weights: w,
            means: mu,
            variances: var,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Parse a model set file. Refuses unknown versions and front ends whose
/// fingerprint does not match the stored dimensions; a truncated file yields
/// a parse error, never a partial model set.
pub fn load_model_set(path: &Path) -> Result<ModelSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut version: Option<u32> = None;
    let mut fingerprint: Option<String> = None;
    let mut declared_models: Option<usize> = None;
    let mut partials: Vec<PartialModel> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let badline = |msg: String| Error::parse(path, lineno + 1, msg);
        if let Some(name) = line.strip_prefix("[model ").and_then(|s| s.strip_suffix(']')) {
            let class = LabelClass::from_name(name)
                .ok_or_else(|| badline(format!("unknown class {name:?}")))?;
            partials.push(PartialModel::new(class));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| badline("expected key = value".into()))?;
        let key = key.trim();
        let value = value.trim();
        let parse_floats = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| badline(format!("bad float {f:?}")))
                })
                .collect()
        };
        match partials.last_mut() {
            None => match key {
                "format_version" => {
                    let v: u32 = value
                        .parse()
                        .map_err(|_| badline(format!("bad version {value:?}")))?;
                    if v != MODEL_FORMAT_VERSION {
                        return Err(Error::Version {
                            found: value.to_string(),
                            supported: MODEL_FORMAT_VERSION,
                        });
                    }
                    version = Some(v);
                }
                "feature_fingerprint" => fingerprint = Some(value.to_string()),
                "models" => declared_models = value.parse().ok(),
                other => return Err(badline(format!("unexpected key {other:?} in header"))),
            },
            Some(p) => {
                let mut parts = key.split_whitespace();
                let head = parts.next().unwrap_or_default();
                let idx: Vec<usize> = parts
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| badline(format!("bad index {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                match (head, idx.as_slice()) {
                    ("states", []) => p.states = value.parse().ok(),
                    ("mixtures", []) => p.mixtures = value.parse().ok(),
                    ("dim", []) => p.dim = value.parse().ok(),
                    ("pi", []) => p.pi = Some(parse_floats(value)?),
                    ("A", [i]) => p.a.push((*i, parse_floats(value)?)),
                    ("w", [s]) => p.w.push((*s, parse_floats(value)?)),
                    ("mu", [s, m]) => p.mu.push((*s, *m, parse_floats(value)?)),
                    ("var", [s, m]) => p.var.push((*s, *m, parse_floats(value)?)),
                    _ => return Err(badline(format!("unexpected key {key:?}"))),
                }
            }
        }
    }

    if version.is_none() {
        return Err(Error::parse(path, 1, "missing format_version"));
    }
    let fingerprint =
        fingerprint.ok_or_else(|| Error::parse(path, 1, "missing feature_fingerprint"))?;
    if let Some(n) = declared_models {
        if n != partials.len() {
            return Err(Error::parse(
                path,
                0,
                format!("file declares {n} models but contains {}", partials.len()),
            ));
        }
    }
    let mut models: Vec<GmmHmm> = partials
        .into_iter()
        .map(|p| p.finish(path))
        .collect::<Result<Vec<_>>>()?;
    models.sort_by_key(|m| m.class.index());

    if let Some(fp_dim) = fingerprint_dim(&fingerprint) {
        for m in &models {
            if m.feature_dim != fp_dim {
                return Err(Error::Fingerprint {
                    model: format!("{fingerprint} (dim {fp_dim})"),
                    data: format!("model {} has dim {}", m.class, m.feature_dim),
                });
            }
        }
    }
    ModelSet::new(models, fingerprint)
}
