//! Per-class precision, recall and F-measure, plus overall accuracy.
//!
//! A metric whose denominator is zero is reported as 0 with `defined = false`
//! instead of NaN.

use serde::Serialize;

use crate::error::{Error, Result};

pub const CLASSES: usize = 2;
pub const CLASS_NAMES: [&str; CLASSES] = ["Non-Singleton", "Singleton"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub classes: [ClassCounts; CLASSES],
    pub total: usize,
    pub correct: usize,
}

fn check_lengths(preds: &[usize], gold: &[usize]) -> Result<()> {
    if preds.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: gold.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&bad) = preds.iter().chain(gold).find(|&&c| c >= CLASSES) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            classes: CLASSES,
        });
    }
    Ok(())
}

/// Tabulate counts, treating each class in turn as the positive one.
pub fn confusion(preds: &[usize], gold: &[usize]) -> Result<ConfusionCounts> {
    check_lengths(preds, gold)?;
    let mut c = ConfusionCounts {
        total: preds.len(),
        ..ConfusionCounts::default()
    };
    for (&p, &g) in preds.iter().zip(gold) {
        if p == g {
            c.correct += 1;
            c.classes[p].tp += 1;
        } else {
            c.classes[p].fp += 1;
            c.classes[g].fn_ += 1;
        }
    }
    Ok(c)
}

/// A ratio that may have had a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

impl Ratio {
    pub fn of(num: usize, den: usize) -> Ratio {
        if den == 0 {
            Ratio {
                value: 0.0,
                defined: false,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                defined: true,
            }
        }
    }
}

impl ConfusionCounts {
    /// `tp / (tp + fp)` for `class`.
    pub fn precision(&self, class: usize) -> Ratio {
        let c = &self.classes[class];
        Ratio::of(c.tp, c.tp + c.fp)
    }

    /// `tp / (tp + fn)` for `class`.
    pub fn recall(&self, class: usize) -> Ratio {
        let c = &self.classes[class];
        Ratio::of(c.tp, c.tp + c.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        Ratio::of(self.correct, self.total).value
    }
}

/// `(1 + b^2) p r / (b^2 p + r)`, or 0 when the denominator vanishes.
pub fn f_measure(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * p + r;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / den
    }
}

pub fn accuracy(preds: &[usize], gold: &[usize]) -> Result<f64> {
    Ok(confusion(preds, gold)?.accuracy())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

impl ClassMetrics {
    pub fn from_ratios(p: Ratio, r: Ratio, beta: f64) -> ClassMetrics {
        ClassMetrics {
            precision: p.value,
            recall: r.value,
            f_measure: f_measure(p.value, r.value, beta),
            precision_defined: p.defined,
            recall_defined: r.defined,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub beta: f64,
    /// Indexed by class: 0 non-singleton, 1 singleton.
    pub classes: [ClassMetrics; CLASSES],
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

pub fn report(preds: &[usize], gold: &[usize], beta: f64) -> Result<ClassReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let counts = confusion(preds, gold)?;
    let metrics = |c: usize| ClassMetrics::from_ratios(counts.precision(c), counts.recall(c), beta);
    Ok(ClassReport {
        beta,
        classes: [metrics(0), metrics(1)],
        accuracy: counts.accuracy(),
        counts,
    })
}

/// Integer percentage as printed in result tables.
pub fn percent(v: f64) -> i64 {
    (v * 100.0).round() as i64
}

impl ClassReport {
    pub fn singleton(&self) -> &ClassMetrics {
        &self.classes[1]
    }

    /// One row: label, then P/R/F for each class in integer percent.
    pub fn table_row(&self, label: &str) -> String {
        let mut row = format!("{label:<28}");
        for m in &self.classes {
            let mark = |v: f64, defined: bool| {
                format!("{:>4}{}", percent(v), if defined { " " } else { "*" })
            };
            row.push_str(&mark(m.precision, m.precision_defined));
            row.push_str(&mark(m.recall, m.recall_defined));
            row.push_str(&format!("{:>4}  ", percent(m.f_measure)));
        }
        row.push_str(&format!("{:>6.2}", 100.0 * self.accuracy));
        row
    }

    pub fn table_header() -> String {
        let mut h = format!("{:<28}", "");
        for name in CLASS_NAMES {
            h.push_str(&format!("{name:^17}"));
        }
        h.push('\n');
        h.push_str(&format!("{:<28}", "features"));
        for _ in CLASS_NAMES {
            h.push_str("   P    R    F   ");
        }
        h.push_str("   Acc");
        h
    }

    /// Header plus one row; `*` marks a metric whose denominator was zero.
    pub fn render_table(&self, label: &str) -> String {
        format!("{}\n{}", ClassReport::table_header(), self.table_row(label))
    }
}
