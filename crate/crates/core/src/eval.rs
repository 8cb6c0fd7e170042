//! Scoring: confusion matrices, per-class sensitivity, six-way accuracy,
//! and the before/after sensitivity table.

use std::collections::BTreeMap;

use crate::corpus::LabelClass;
use crate::error::{Error, Result};
use crate::features::EpochId;

/// 6x6 confusion counts; rows are gold classes, columns predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 6]; 6],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, class: LabelClass) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..6).map(|i| self.counts[i][i]).sum()
    }

    /// Cell-wise sum; scoring is a pure fold over its input.
    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = self.clone();
        for g in 0..6 {
            for p in 0..6 {
                out.counts[g][p] += other.counts[g][p];
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for c in LabelClass::ALL {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for g in LabelClass::ALL {
            out.push_str(g.name());
            for p in LabelClass::ALL {
                out.push_str(&format!(",{}", self.counts[g.index()][p.index()]));
            }
            out.push('\n');
        }
        out
    }
}

/// Tally predictions against golds. Every prediction id must have exactly
/// one gold id; duplicates on either side are rejected.
pub fn score(
    predictions: &[(EpochId, LabelClass)],
    golds: &[(EpochId, LabelClass)],
) -> Result<ConfusionMatrix> {
    let mut gold_map: BTreeMap<&EpochId, LabelClass> = BTreeMap::new();
    for (id, class) in golds {
        if gold_map.insert(id, *class).is_some() {
            return Err(Error::Scoring(format!("duplicate gold id {id}")));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut matrix = ConfusionMatrix::default();
    for (id, predicted) in predictions {
        if !seen.insert(id) {
            return Err(Error::Scoring(format!("duplicate prediction id {id}")));
        }
        let gold = gold_map
            .get(id)
            .ok_or_else(|| Error::Scoring(format!("no gold label for predicted id {id}")))?;
        matrix.counts[gold.index()][predicted.index()] += 1;
    }
    Ok(matrix)
}

/// Per-class recall: diagonal cell over gold row total. A class with no
/// gold epochs has no sensitivity; that is an error, not a silent zero.
pub fn sensitivity(matrix: &ConfusionMatrix, class: LabelClass) -> Result<f64> {
    let row = matrix.row_total(class);
    if row == 0 {
        return Err(Error::Scoring(format!(
            "sensitivity of {class} is undefined: no gold epochs"
        )));
    }
    Ok(matrix.counts[class.index()][class.index()] as f64 / row as f64)
}

/// Six-way classification accuracy: trace over total.
pub fn accuracy(matrix: &ConfusionMatrix) -> Result<f64> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Scoring("accuracy of an empty matrix is undefined".into()));
    }
    Ok(matrix.trace() as f64 / total as f64)
}

/// Format a fraction as a percentage with one decimal, rounding half up.
pub fn pct(value: f64) -> String {
    let tenths = (value * 1000.0 + 0.5).floor() / 10.0;
    format!("{tenths:.1}%")
}

const TABLE_ORDER: [LabelClass; 6] = [
    LabelClass::Gped,
    LabelClass::Pled,
    LabelClass::Spsw,
    LabelClass::Eyem,
    LabelClass::Bckg,
    LabelClass::Artf,
];

/// Render the before/after per-class sensitivity table.
pub fn emit_table1(
    before: &BTreeMap<LabelClass, f64>,
    after: &BTreeMap<LabelClass, f64>,
) -> Result<String> {
    let mut out = format!("{:<8}{:>8}{:>8}\n", "Class", "Before", "After");
    for class in TABLE_ORDER {
        let get = |map: &BTreeMap<LabelClass, f64>, which: &str| -> Result<f64> {
            let v = *map
                .get(&class)
                .ok_or_else(|| Error::Validation(format!("{which} table misses {class}")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "{which} sensitivity for {class} is outside [0,1]: {v}"
                )));
            }
            Ok(v)
        };
        let b = get(before, "before")?;
        let a = get(after, "after")?;
        out.push_str(&format!("{:<8}{:>8}{:>8}\n", class.name(), pct(b), pct(a)));
    }
    Ok(out)
}
