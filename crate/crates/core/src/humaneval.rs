//! Human baseline: fixed-length unpunctuated tests cut from the test set,
//! scoring of participants' annotated returns, and cohort statistics.
//!
//! Files written per test (`NNN` is the 1-based id, zero padded):
//!
//! * `test_NNN.txt`: the words, lowercase, separated by single spaces;
//! * `test_NNN.meta.json`: id, word list and provenance;
//! * `test_NNN.gold.tsv`: `word<TAB>LABEL` per word;
//! * `test_NNN.instructions.txt`: the participant instruction sheet.
//!
//! An annotated return is the same words as plain UTF-8 text with `.`, `,`
//! and `?` inserted.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::io::write_labels;
use crate::corpus::{extract_labels_from_text, io::read_labels, ClassCounts, Dataset, LabeledWord, Sentence};
use crate::error::{Error, Result};
use crate::eval::{confusion, metrics, pct, ConfusionMatrix4, EvalReport};
use crate::label::PunctClass;

pub const TEST_WORDS: usize = 650;

pub const INSTRUCTIONS: &str = "\
Punctuation test

The text below has had its punctuation removed. Read it through and add
periods (.), commas (,) and question marks (?) where you think they belong.

- Do not add, remove or change any words.
- Use only the three marks above; put each mark directly after a word.
- The text may start or stop in the middle of a sentence.
- The task takes about 10 to 15 minutes.

Return the punctuated text as a plain text file.
";

/// Where a run of test words came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub doc_id: String,
    /// Word offset within the document.
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HumanTest {
    /// 1-based.
    pub id: usize,
    pub words: Vec<String>,
    pub gold: Vec<PunctClass>,
    pub provenance: Vec<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedReturn {
    pub test_id: usize,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantReport {
    pub test_id: usize,
    pub matrix: ConfusionMatrix4,
    pub report: EvalReport,
    pub gold_counts: ClassCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Spread {
    pub class: PunctClass,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub participants: usize,
    /// PERIOD, COMMA, QUESTION, EMPTY.
    pub f1: Vec<F1Spread>,
    pub pooled: ConfusionMatrix4,
    pub pooled_report: EvalReport,
    pub pooled_gold_counts: ClassCounts,
}

/// Cuts the test-set word stream into tests of `TEST_WORDS` words.
pub fn generate_tests(ds: &Dataset) -> Vec<HumanTest> {
    generate_tests_sized(ds, TEST_WORDS)
}

/// Cuts every `size` words with no regard to sentence boundaries. The final
/// test holds the remainder and may be shorter.
pub fn generate_tests_sized(ds: &Dataset, size: usize) -> Vec<HumanTest> {
    assert!(size > 0, "test size must be positive");
    let mut tests = Vec::new();
    let mut cur = HumanTest {
        id: 1,
        words: Vec::with_capacity(size),
        gold: Vec::with_capacity(size),
        provenance: Vec::new(),
    };
    for doc in &ds.documents {
        for (offset, w) in doc.words().enumerate() {
            match cur.provenance.last_mut() {
                Some(p) if p.doc_id == doc.id && p.start + p.len == offset => p.len += 1,
                _ => cur.provenance.push(Provenance {
                    doc_id: doc.id.clone(),
                    start: offset,
                    len: 1,
                }),
            }
            cur.words.push(w.word.clone());
            cur.gold.push(w.label);
            if cur.words.len() == size {
                let next = HumanTest {
                    id: cur.id + 1,
                    words: Vec::with_capacity(size),
                    gold: Vec::with_capacity(size),
                    provenance: Vec::new(),
                };
                tests.push(std::mem::replace(&mut cur, next));
            }
        }
    }
    if !cur.words.is_empty() {
        tests.push(cur);
    }
    tests
}

fn align(expected: &[String], found: &[LabeledWord]) -> Result<()> {
    let n = expected.len().max(found.len());
    for i in 0..n {
        let e = expected.get(i).map(String::as_str);
        let f = found.get(i).map(|w| w.word.as_str());
        if e != f {
            return Err(Error::Alignment {
                position: i,
                expected: e.unwrap_or("<end of test>").to_string(),
                found: f.unwrap_or("<end of return>").to_string(),
            });
        }
    }
    Ok(())
}

/// Labels a return by the corpus extraction rules and scores it against the
/// test's gold labels. Word sequences must match exactly after lowercasing;
/// whitespace and line breaks are free.
pub fn score_annotation(test: &HumanTest, ret: &AnnotatedReturn) -> Result<ParticipantReport> {
    if ret.test_id != test.id {
        return Err(Error::Argument(format!(
            "return is for test {} but was scored against test {}",
            ret.test_id, test.id
        )));
    }
    let extraction = extract_labels_from_text(&ret.text.to_lowercase());
    let words: Vec<LabeledWord> = extraction.words().cloned().collect();
    align(&test.words, &words)?;
    let pred: Vec<PunctClass> = words.iter().map(|w| w.label).collect();
    let matrix = confusion(&test.gold, &pred)?;
    Ok(ParticipantReport {
        test_id: test.id,
        matrix,
        report: metrics(&matrix)?,
        gold_counts: ClassCounts::from_labels(test.gold.iter().copied()),
    })
}

/// Mean and population standard deviation.
pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cohort_stats(reports: &[ParticipantReport]) -> Result<CohortStats> {
    if reports.is_empty() {
        return Err(Error::Argument("cohort statistics need at least one report".into()));
    }
    let f1 = PunctClass::MATRIX_ORDER
        .iter()
        .map(|&class| {
            let values: Vec<f64> = reports.iter().map(|r| r.report.class(class).f1).collect();
            let (mean, stddev) = mean_stddev(&values);
            F1Spread { class, mean, stddev }
        })
        .collect();
    let pooled: ConfusionMatrix4 = reports.iter().map(|r| r.matrix).sum();
    let pooled_gold_counts = reports
        .iter()
        .fold(ClassCounts::default(), |acc, r| acc + r.gold_counts);
    Ok(CohortStats {
        participants: reports.len(),
        f1,
        pooled,
        pooled_report: metrics(&pooled)?,
        pooled_gold_counts,
    })
}

/// Per-participant table, F1 spread, then the pooled report.
pub fn render_cohort(reports: &[ParticipantReport], stats: &CohortStats) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "test", "words", "PERIOD", "COMMA", "QUESTION", "EMPTY", "overall"
    );
    for r in reports {
        let _ = write!(out, "{:<6} {:>6}", r.test_id, r.gold_counts.words);
        for c in PunctClass::MATRIX_ORDER {
            let _ = write!(out, " {:>8}", pct(r.report.class(c).f1));
        }
        let _ = writeln!(out, " {:>8}", pct(r.report.macro_punct.f1));
    }
    out.push('\n');
    let _ = writeln!(out, "F1 across {} participants (0-1 scale):", stats.participants);
    for s in &stats.f1 {
        let _ = writeln!(out, "{:<10} mean {:.4}  stddev {:.4}", s.class.name(), s.mean, s.stddev);
    }
    out.push('\n');
    let g = &stats.pooled_gold_counts;
    let _ = writeln!(
        out,
        "pooled gold labels: {} words, {} PERIOD, {} COMMA, {} QUESTION, {} EMPTY\n",
        g.words, g.period, g.comma, g.question, g.empty
    );
    out.push_str("pooled matrix (rows predicted, columns true):\n");
    out.push_str(&stats.pooled.render());
    out.push('\n');
    out.push_str(&crate::eval::render_report(&stats.pooled_report));
    out.push_str("\nstddev is the population form (divides by the number of participants).\n");
    out
}

pub fn test_stem(id: usize) -> String {
    format!("test_{id:03}")
}

#[derive(Serialize, Deserialize)]
struct TestMeta {
    id: usize,
    word_count: usize,
    words: Vec<String>,
    provenance: Vec<Provenance>,
}

/// Writes the four files of `test` into `dir`.
pub fn write_test_files(dir: &Path, test: &HumanTest) -> Result<()> {
    let stem = test_stem(test.id);
    let path = |ext: &str| dir.join(format!("{stem}.{ext}"));
    let write = |p: PathBuf, bytes: &[u8]| fs::write(&p, bytes).map_err(|e| Error::io(&p, e));

    write(path("txt"), format!("{}\n", test.words.join(" ")).as_bytes())?;
    let meta = TestMeta {
        id: test.id,
        word_count: test.words.len(),
        words: test.words.clone(),
        provenance: test.provenance.clone(),
    };
    write(path("meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    let words: Vec<LabeledWord> = test
        .words
        .iter()
        .zip(&test.gold)
        .map(|(w, &l)| LabeledWord::new(w.clone(), l))
        .collect();
    let mut gold = Vec::new();
    write_labels(&mut gold, &[Sentence::new(words)]).map_err(|e| Error::io(path("gold.tsv"), e))?;
    write(path("gold.tsv"), &gold)?;
    write(path("instructions.txt"), INSTRUCTIONS.as_bytes())
}

/// Loads test `id` from `dir` (metadata and gold labels).
pub fn read_test_files(dir: &Path, id: usize) -> Result<HumanTest> {
    let stem = test_stem(id);
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TestMeta = serde_json::from_str(&meta_text)?;
    let gold_path = dir.join(format!("{stem}.gold.tsv"));
    let file = fs::File::open(&gold_path).map_err(|e| Error::io(&gold_path, e))?;
    let labeled: Vec<LabeledWord> = read_labels(BufReader::new(file), &gold_path.display().to_string())?
        .into_iter()
        .flat_map(|s| s.words)
        .collect();
    let gold_words: Vec<String> = labeled.iter().map(|w| w.word.clone()).collect();
    if gold_words != meta.words || meta.id != id {
        return Err(Error::parse(gold_path.display(), 1, "gold labels do not match the test metadata"));
    }
    Ok(HumanTest {
        id,
        words: meta.words,
        gold: labeled.iter().map(|w| w.label).collect(),
        provenance: meta.provenance,
    })
}

/// Splits a test file into its words. The text must be non-empty and free
/// of punctuation marks.
pub fn parse_test_text(text: &str) -> Result<Vec<String>> {
    let words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if words.is_empty() {
        return Err(Error::Argument("test text has no words".into()));
    }
    if let Some(w) = words.iter().find(|w| w.contains(['.', ',', '?'])) {
        return Err(Error::Argument(format!("test word {w:?} contains punctuation")));
    }
    Ok(words)
}
