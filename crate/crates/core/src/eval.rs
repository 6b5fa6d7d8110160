//! Confusion matrices and per-class precision, recall and F1.
//!
//! Matrices are indexed `[predicted][true]` with classes in the order
//! PERIOD, COMMA, QUESTION, EMPTY. Two macro averages are reported:
//! `macro_punct` over the three punctuation classes (the "Overall" column of
//! the results table) and `macro_all` over all four classes.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::PunctClass;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix4 {
    /// `counts[predicted][true]`, both in [`PunctClass::MATRIX_ORDER`].
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix4 {
    pub fn from_rows(counts: [[u64; 4]; 4]) -> Self {
        ConfusionMatrix4 { counts }
    }

    pub fn get(&self, predicted: PunctClass, truth: PunctClass) -> u64 {
        self.counts[predicted.matrix_index()][truth.matrix_index()]
    }

    pub fn record(&mut self, truth: PunctClass, predicted: PunctClass) {
        self.counts[predicted.matrix_index()][truth.matrix_index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// Predicted-as-`class` count (TP + FP).
    pub fn row_sum(&self, class: PunctClass) -> u64 {
        self.counts[class.matrix_index()].iter().sum()
    }

    /// Truly-`class` count (TP + FN).
    pub fn col_sum(&self, class: PunctClass) -> u64 {
        let j = class.matrix_index();
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn true_positives(&self, class: PunctClass) -> u64 {
        self.get(class, class)
    }

    pub fn false_positives(&self, class: PunctClass) -> u64 {
        self.row_sum(class) - self.true_positives(class)
    }

    pub fn false_negatives(&self, class: PunctClass) -> u64 {
        self.col_sum(class) - self.true_positives(class)
    }

    /// Grid with row/column headers, tab separated:
    ///
    /// ```text
    /// pred\true  PERIOD  COMMA  QUESTION  EMPTY
    /// PERIOD     524     11     0         66
    /// ...
    /// ```
    pub fn render(&self) -> String {
        let mut out = String::from("pred\\true");
        for c in PunctClass::MATRIX_ORDER {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
        for (i, c) in PunctClass::MATRIX_ORDER.iter().enumerate() {
            let _ = write!(out, "{c}");
            for v in self.counts[i] {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the grid written by [`ConfusionMatrix4::render`]. Cells may be
    /// separated by any whitespace; headers must be in the fixed order.
    pub fn parse<R: BufRead>(r: R, source_name: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source_name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push((i + 1, line));
        }
        let expected_names: Vec<&str> = PunctClass::MATRIX_ORDER.iter().map(|c| c.name()).collect();
        let Some((hl, header)) = rows.first() else {
            return Err(Error::parse(source_name, 1, "empty matrix file"));
        };
        let header: Vec<&str> = header.split_whitespace().skip(1).collect();
        if header != expected_names {
            return Err(Error::parse(
                source_name,
                *hl,
                format!("column header must be {}", expected_names.join(" ")),
            ));
        }
        if rows.len() != 5 {
            return Err(Error::parse(source_name, *hl, "expected a header and four rows"));
        }
        let mut counts = [[0u64; 4]; 4];
        for (i, (line_no, line)) in rows[1..].iter().enumerate() {
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != 5 || cells[0] != expected_names[i] {
                return Err(Error::parse(
                    source_name,
                    *line_no,
                    format!("expected row {} with four counts", expected_names[i]),
                ));
            }
            for (j, cell) in cells[1..].iter().enumerate() {
                counts[i][j] = cell
                    .parse()
                    .map_err(|_| Error::parse(source_name, *line_no, format!("bad count {cell:?}")))?;
            }
        }
        Ok(ConfusionMatrix4 { counts })
    }
}

impl Add for ConfusionMatrix4 {
    type Output = ConfusionMatrix4;

    fn add(mut self, rhs: ConfusionMatrix4) -> ConfusionMatrix4 {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionMatrix4 {
    fn add_assign(&mut self, rhs: ConfusionMatrix4) {
        for i in 0..4 {
            for j in 0..4 {
                self.counts[i][j] += rhs.counts[i][j];
            }
        }
    }
}

impl Sum for ConfusionMatrix4 {
    fn sum<I: Iterator<Item = ConfusionMatrix4>>(iter: I) -> Self {
        iter.fold(ConfusionMatrix4::default(), Add::add)
    }
}

pub fn confusion(gold: &[PunctClass], pred: &[PunctClass]) -> Result<ConfusionMatrix4> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut m = ConfusionMatrix4::default();
    for (&g, &p) in gold.iter().zip(pred) {
        m.record(g, p);
    }
    Ok(m)
}

/// Precision, recall and F1 on the [0, 1] scale. A 0/0 ratio is reported as
/// 0.0 and flagged as undefined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

impl ClassMetrics {
    pub fn of(m: &ConfusionMatrix4, class: PunctClass) -> Self {
        let tp = m.true_positives(class);
        let (precision, precision_defined) = ratio(tp, m.row_sum(class));
        let (recall, recall_defined) = ratio(tp, m.col_sum(class));
        ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
            precision_defined,
            recall_defined,
        }
    }
}

/// Unweighted mean of precision, recall and F1 over a set of classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Aggregate {
    pub fn mean_of(items: &[ClassMetrics]) -> Self {
        let n = items.len() as f64;
        Aggregate {
            precision: items.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: items.iter().map(|m| m.recall).sum::<f64>() / n,
            f1: items.iter().map(|m| m.f1).sum::<f64>() / n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub period: ClassMetrics,
    pub comma: ClassMetrics,
    pub question: ClassMetrics,
    pub empty: ClassMetrics,
    pub accuracy: f64,
    /// Mean over PERIOD, COMMA, QUESTION.
    pub macro_punct: Aggregate,
    /// Mean over all four classes.
    pub macro_all: Aggregate,
    pub total: u64,
}

impl EvalReport {
    pub fn class(&self, class: PunctClass) -> &ClassMetrics {
        match class {
            PunctClass::Period => &self.period,
            PunctClass::Comma => &self.comma,
            PunctClass::Question => &self.question,
            PunctClass::Empty => &self.empty,
        }
    }
}

pub fn metrics(m: &ConfusionMatrix4) -> Result<EvalReport> {
    let total = m.total();
    if total == 0 {
        return Err(Error::UndefinedMetrics);
    }
    let of = |c| ClassMetrics::of(m, c);
    let (period, comma, question, empty) = (
        of(PunctClass::Period),
        of(PunctClass::Comma),
        of(PunctClass::Question),
        of(PunctClass::Empty),
    );
    Ok(EvalReport {
        period,
        comma,
        question,
        empty,
        accuracy: m.trace() as f64 / total as f64,
        macro_punct: Aggregate::mean_of(&[period, comma, question]),
        macro_all: Aggregate::mean_of(&[period, comma, question, empty]),
        total,
    })
}

/// `(FP_EMPTY, FN_EMPTY)`: off-diagonal sums of EMPTY's predicted row and
/// true column.
pub fn empty_balance(m: &ConfusionMatrix4) -> (u64, u64) {
    (
        m.false_positives(PunctClass::Empty),
        m.false_negatives(PunctClass::Empty),
    )
}

/// Confusion matrix with the given word positions left out of scoring.
/// Used to discount the group-final words whose PERIOD is given away by the
/// `[SEP]` that follows them.
pub fn debias_batch_final(gold: &[PunctClass], pred: &[PunctClass], excluded: &[usize]) -> Result<ConfusionMatrix4> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut skip = vec![false; gold.len()];
    for &p in excluded {
        *skip.get_mut(p).ok_or_else(|| {
            Error::Argument(format!("excluded position {p} is out of range for {} words", gold.len()))
        })? = true;
    }
    let mut m = ConfusionMatrix4::default();
    for ((&g, &p), skipped) in gold.iter().zip(pred).zip(skip) {
        if !skipped {
            m.record(g, p);
        }
    }
    Ok(m)
}

/// Rounds half away from zero to one decimal.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// A [0, 1] value as a one-decimal percentage, e.g. `0.8364` → `"83.6"`.
pub fn pct(x: f64) -> String {
    format!("{:.1}", round1(x * 100.0))
}

fn pct_marked(x: f64, defined: bool) -> String {
    if defined {
        pct(x)
    } else {
        format!("{}*", pct(x))
    }
}

/// Results table in the layout `Comma | Period | Question | Overall`, each
/// with P, R and F1 as one-decimal percentages. Overall is `macro_punct`.
pub fn render_results_table(rows: &[(&str, &EvalReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = write!(out, "{:<name_w$}", "");
    for group in ["Comma", "Period", "Question", "Overall"] {
        let _ = write!(out, " | {group:<20}");
    }
    out.push('\n');
    let _ = write!(out, "{:<name_w$}", "Models");
    for _ in 0..4 {
        let _ = write!(out, " | {:>6} {:>6} {:>6}", "P", "R", "F1");
    }
    out.push('\n');
    let mut undefined = false;
    for (name, r) in rows {
        let _ = write!(out, "{name:<name_w$}");
        for c in [PunctClass::Comma, PunctClass::Period, PunctClass::Question] {
            let m = r.class(c);
            undefined |= !(m.precision_defined && m.recall_defined);
            let _ = write!(
                out,
                " | {:>6} {:>6} {:>6}",
                pct_marked(m.precision, m.precision_defined),
                pct_marked(m.recall, m.recall_defined),
                pct(m.f1)
            );
        }
        let a = r.macro_punct;
        let _ = write!(out, " | {:>6} {:>6} {:>6}", pct(a.precision), pct(a.recall), pct(a.f1));
        out.push('\n');
    }
    if undefined {
        out.push_str("* undefined (0/0), reported as 0.0\n");
    }
    out
}

/// Per-class and aggregate lines for a single report, EMPTY included.
pub fn render_report(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>6} {:>6} {:>6}", "class", "P", "R", "F1");
    for c in PunctClass::MATRIX_ORDER {
        let m = r.class(c);
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>6} {:>6}",
            c.name(),
            pct_marked(m.precision, m.precision_defined),
            pct_marked(m.recall, m.recall_defined),
            pct(m.f1)
        );
    }
    for (name, a) in [("macro_punct", r.macro_punct), ("macro_all", r.macro_all)] {
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>6} {:>6}",
            name,
            pct(a.precision),
            pct(a.recall),
            pct(a.f1)
        );
    }
    let _ = writeln!(out, "accuracy     {}  ({} words)", pct(r.accuracy), r.total);
    out
}

pub fn write_matrix<W: Write>(mut w: W, m: &ConfusionMatrix4) -> std::io::Result<()> {
    w.write_all(m.render().as_bytes())
}
