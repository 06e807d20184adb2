//! Confusion matrices, classification metrics and the model comparison table.
//!
//! Micro-averaged precision, recall and F1 are computed from pooled counts,
//! which for single-label binary classification reduces to `trace / total`.
//! They are evaluated through that reduced form so the identity with accuracy
//! holds bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {value} at index {index} is not 0 or 1")]
    InvalidLabel { index: usize, value: u8 },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("malformed report: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 2×2 counts; rows are the true class, columns the predicted class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> [[u64; 2]; 2] {
        self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    /// `true\predicted,0,1` followed by one row per true class.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["true\\predicted", "0", "1"])?;
        for (t, row) in self.counts.iter().enumerate() {
            w.write_record([t.to_string(), row[0].to_string(), row[1].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, EvalError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(source);
        let mut counts = [[0u64; 2]; 2];
        let mut seen = [false; 2];
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<u64, EvalError> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| EvalError::Parse(format!("bad confusion cell in {:?}", rec)))
            };
            let t = parse(0)? as usize;
            if t > 1 {
                return Err(EvalError::Parse(format!("true class {t} out of range")));
            }
            counts[t] = [parse(1)?, parse(2)?];
            seen[t] = true;
        }
        if seen != [true, true] {
            return Err(EvalError::Parse("confusion matrix needs rows for classes 0 and 1".into()));
        }
        Ok(Self { counts })
    }
}

/// Count `(true, predicted)` pairs.
pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            predicted: y_pred.len(),
        });
    }
    let mut counts = [[0u64; 2]; 2];
    for (index, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        for value in [t, p] {
            if value > 1 {
                return Err(EvalError::InvalidLabel { index, value });
            }
        }
        counts[t as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// A metric with a zero denominator is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

fn ratio(num: u64, den: u64) -> Ratio {
    if den == 0 {
        Ratio {
            value: 0.0,
            undefined: true,
        }
    } else {
        Ratio {
            value: num as f64 / den as f64,
            undefined: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: Ratio,
    pub recall: Ratio,
    pub f1: Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averaged {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub accuracy: f64,
    /// Indexed by class, each class treated as the positive one in turn.
    pub per_class: [ClassMetrics; 2],
    pub micro: Averaged,
    pub macro_avg: Averaged,
}

impl MetricSet {
    /// Any per-class metric fell back to the zero convention.
    pub fn has_undefined(&self) -> bool {
        self.per_class
            .iter()
            .any(|c| c.precision.undefined || c.recall.undefined || c.f1.undefined)
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let per_class = [0, 1].map(|c| {
        let tp = cm.get(c, c);
        let predicted = cm.get(0, c) + cm.get(1, c);
        let actual = cm.get(c, 0) + cm.get(c, 1);
        ClassMetrics {
            precision: ratio(tp, predicted),
            recall: ratio(tp, actual),
            // 2·tp / (2·tp + fp + fn), the harmonic mean without the 0/0 trap.
            f1: ratio(2 * tp, predicted + actual),
        }
    });
    let accuracy = cm.correct() as f64 / total as f64;
    // Pooled over classes: Σtp = trace, Σ(tp + fp) = Σ(tp + fn) = total.
    let micro_f1 = (2 * cm.correct()) as f64 / (2 * total) as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| (f(&per_class[0]) + f(&per_class[1])) / 2.0;
    Ok(MetricSet {
        accuracy,
        per_class,
        micro: Averaged {
            precision: accuracy,
            recall: accuracy,
            f1: micro_f1,
        },
        macro_avg: Averaged {
            precision: mean(|c| c.precision.value),
            recall: mean(|c| c.recall.value),
            f1: mean(|c| c.f1.value),
        },
    })
}

/// Test-set evaluation of one model, traceable to the run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub model: String,
    /// Which split was evaluated, e.g. `test`.
    pub split: String,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub seed: u64,
    pub config_digest: String,
}

impl EvaluationReport {
    pub fn new(
        model: impl Into<String>,
        split: impl Into<String>,
        confusion: ConfusionMatrix,
        seed: u64,
        config_digest: impl Into<String>,
    ) -> Result<Self, EvalError> {
        Ok(Self {
            model: model.into(),
            split: split.into(),
            metrics: metrics(&confusion)?,
            confusion,
            seed,
            config_digest: config_digest.into(),
        })
    }

    /// Evaluate predictions against the truth.
    pub fn from_predictions(
        model: impl Into<String>,
        split: impl Into<String>,
        y_true: &[u8],
        y_pred: &[u8],
        seed: u64,
        config_digest: impl Into<String>,
    ) -> Result<Self, EvalError> {
        Self::new(model, split, confusion(y_true, y_pred)?, seed, config_digest)
    }

    fn entries(&self) -> Vec<(String, String)> {
        let m = &self.metrics;
        let c = self.confusion.counts();
        let mut out: Vec<(String, String)> = vec![
            ("model".into(), self.model.clone()),
            ("split".into(), self.split.clone()),
            ("seed".into(), self.seed.to_string()),
            ("config_digest".into(), self.config_digest.clone()),
            ("true0_pred0".into(), c[0][0].to_string()),
            ("true0_pred1".into(), c[0][1].to_string()),
            ("true1_pred0".into(), c[1][0].to_string()),
            ("true1_pred1".into(), c[1][1].to_string()),
            ("accuracy".into(), format!("{:.6}", m.accuracy)),
        ];
        for (tag, avg) in [("micro", &m.micro), ("macro", &m.macro_avg)] {
            out.push((format!("{tag}_precision"), format!("{:.6}", avg.precision)));
            out.push((format!("{tag}_recall"), format!("{:.6}", avg.recall)));
            out.push((format!("{tag}_f1"), format!("{:.6}", avg.f1)));
        }
        for (class, cm) in m.per_class.iter().enumerate() {
            for (name, r) in [("precision", cm.precision), ("recall", cm.recall), ("f1", cm.f1)] {
                out.push((format!("class{class}_{name}"), format!("{:.6}", r.value)));
                out.push((format!("class{class}_{name}_undefined"), r.undefined.to_string()));
            }
        }
        out
    }

    /// Two-column `key,value` CSV.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["key", "value"])?;
        for (k, v) in self.entries() {
            w.write_record([k, v])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a report written by [`write_csv`](Self::write_csv). Metrics are
    /// recomputed from the stored counts.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, EvalError> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(source);
        let mut map = BTreeMap::new();
        for rec in r.records() {
            let rec = rec?;
            if let (Some(k), Some(v)) = (rec.get(0), rec.get(1)) {
                map.insert(k.to_string(), v.to_string());
            }
        }
        let get = |k: &str| map.get(k).cloned().ok_or_else(|| EvalError::Parse(format!("missing key {k}")));
        let num = |k: &str| -> Result<u64, EvalError> {
            get(k)?.parse().map_err(|_| EvalError::Parse(format!("{k} is not an integer")))
        };
        let cm = ConfusionMatrix::from_counts([
            [num("true0_pred0")?, num("true0_pred1")?],
            [num("true1_pred0")?, num("true1_pred1")?],
        ]);
        Self::new(get("model")?, get("split")?, cm, num("seed")?, get("config_digest")?)
    }
}

/// One line of the comparison table; the metrics are the micro averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy difference between two models, in percentage points.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyDelta {
    pub higher: String,
    pub lower: String,
    pub points: f64,
}

impl AccuracyDelta {
    pub fn label(&self) -> String {
        format!("{:+.1} points", self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Every pair, ordered like the rows.
    pub deltas: Vec<AccuracyDelta>,
}

pub const COMPARISON_HEADER: [&str; 5] = ["model", "Accuracy", "Precision", "recall", "F1"];

/// Sort by accuracy, highest first (stable for ties), and list every pairwise
/// accuracy gap.
pub fn comparison_report(reports: &[EvaluationReport]) -> Comparison {
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            model: r.model.clone(),
            accuracy: r.metrics.accuracy,
            precision: r.metrics.micro.precision,
            recall: r.metrics.micro.recall,
            f1: r.metrics.micro.f1,
        })
        .collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    let mut deltas = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            deltas.push(AccuracyDelta {
                higher: rows[i].model.clone(),
                lower: rows[j].model.clone(),
                points: (rows[i].accuracy - rows[j].accuracy) * 100.0,
            });
        }
    }
    Comparison { rows, deltas }
}

impl Comparison {
    /// The metrics table alone, with the fixed header.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(COMPARISON_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                format!("{:.3}", r.accuracy),
                format!("{:.3}", r.precision),
                format!("{:.3}", r.recall),
                format!("{:.3}", r.f1),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pairwise deltas as `higher,lower,accuracy_delta`.
    pub fn write_deltas_csv<W: Write>(&self, sink: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["higher", "lower", "accuracy_delta"])?;
        for d in &self.deltas {
            w.write_record([d.higher.as_str(), d.lower.as_str(), d.label().as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned plain-text table followed by the deltas.
    pub fn to_text(&self) -> String {
        let mut cells: Vec<[String; 5]> = vec![COMPARISON_HEADER.map(String::from)];
        for r in &self.rows {
            cells.push([
                r.model.clone(),
                format!("{:.3}", r.accuracy),
                format!("{:.3}", r.precision),
                format!("{:.3}", r.recall),
                format!("{:.3}", r.f1),
            ]);
        }
        let widths: Vec<usize> = (0..5).map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        if !self.deltas.is_empty() {
            out.push_str("\naccuracy deltas\n");
            for d in &self.deltas {
                out.push_str(&format!("{} vs {}: {}\n", d.higher, d.lower, d.label()));
            }
        }
        out
    }
}
