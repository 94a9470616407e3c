//! Tweet ingestion, normalization, vocabulary, padding and splitting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_CAPACITY: usize = 20_000;
pub const DEFAULT_MAXLEN: usize = 32;
pub const PAD_ID: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sentiment {
    Positive,
    Negative,
    Neutral,
}

impl Sentiment {
    fn parse(label: &str) -> Option<Sentiment> {
        match label.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(Sentiment::Positive),
            "negative" => Some(Sentiment::Negative),
            "neutral" => Some(Sentiment::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub text: String,
    pub label: Sentiment,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
}

impl ClassCounts {
    pub fn of(records: &[RawRecord]) -> Self {
        let mut c = ClassCounts::default();
        for r in records {
            match r.label {
                Sentiment::Positive => c.positive += 1,
                Sentiment::Negative => c.negative += 1,
                Sentiment::Neutral => c.neutral += 1,
            }
        }
        c
    }
}

/// Summary emitted alongside every ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total_rows: usize,
    pub skipped_rows: usize,
    pub class_counts: ClassCounts,
    /// Row numbers (1-based, header excluded) that were skipped, with why.
    pub skipped: Vec<(usize, String)>,
}

impl IngestReport {
    /// Records left after dropping neutral ones.
    pub fn binary_total(&self) -> usize {
        self.class_counts.positive + self.class_counts.negative
    }

    /// Negatives per positive.
    pub fn imbalance(&self) -> f64 {
        self.class_counts.negative as f64 / self.class_counts.positive.max(1) as f64
    }
}

/// Reads `path`, taking text and label from the named columns. Rows with a
/// missing field, empty text or an unrecognized label are skipped and
/// listed in the report.
pub fn ingest_csv(path: &Path, text_column: &str, label_column: &str) -> Result<(Vec<RawRecord>, IngestReport)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, text_column, label_column)
}

pub fn ingest_reader(
    reader: impl std::io::Read,
    text_column: &str,
    label_column: &str,
) -> Result<(Vec<RawRecord>, IngestReport)> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Ingest(format!("cannot read header row: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Ingest(format!("missing column {name:?} in header")))
    };
    let text_idx = column(text_column)?;
    let label_idx = column(label_column)?;

    let mut records = vec![];
    let mut skipped = vec![];
    let mut total = 0;
    for (i, row) in csv.records().enumerate() {
        total += 1;
        let row_no = i + 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                skipped.push((row_no, format!("malformed row: {e}")));
                continue;
            }
        };
        let (Some(text), Some(label)) = (row.get(text_idx), row.get(label_idx)) else {
            skipped.push((row_no, "missing field".to_string()));
            continue;
        };
        if text.trim().is_empty() {
            skipped.push((row_no, "empty text".to_string()));
            continue;
        }
        let Some(label) = Sentiment::parse(label) else {
            skipped.push((row_no, format!("unknown label {label:?}")));
            continue;
        };
        records.push(RawRecord {
            text: text.to_string(),
            label,
        });
    }
    let report = IngestReport {
        total_rows: total,
        skipped_rows: skipped.len(),
        class_counts: ClassCounts::of(&records),
        skipped,
    };
    Ok((records, report))
}

/// Drops neutral records, keeping order.
pub fn select_binary(records: Vec<RawRecord>) -> Result<Vec<RawRecord>> {
    let kept: Vec<RawRecord> = records
        .into_iter()
        .filter(|r| r.label != Sentiment::Neutral)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset(
            "no positive or negative records remain after dropping neutral ones".into(),
        ));
    }
    Ok(kept)
}

/// Lowercases, replaces everything but letters, digits and spaces with a
/// space, collapses runs of spaces and trims.
pub fn normalize_text(s: &str) -> String {
    let mapped: String = s
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Word-to-id map. Id 0 is padding; ids `1..` follow descending corpus
/// frequency, ties broken by first occurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StoredVocabulary")]
pub struct Vocabulary {
    capacity: usize,
    /// `words[k]` has id `k + 1`.
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct StoredVocabulary {
    capacity: usize,
    words: Vec<String>,
}

impl TryFrom<StoredVocabulary> for Vocabulary {
    type Error = Error;

    fn try_from(v: StoredVocabulary) -> Result<Self> {
        Vocabulary::from_words(v.words, v.capacity)
    }
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>, capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::Argument(format!("vocabulary capacity must be at least 2, got {capacity}")));
        }
        if words.len() >= capacity {
            return Err(Error::Argument(format!(
                "{} words do not fit a capacity of {capacity}",
                words.len()
            )));
        }
        let index: HashMap<String, usize> =
            words.iter().enumerate().map(|(k, w)| (w.clone(), k + 1)).collect();
        if index.len() != words.len() {
            return Err(Error::Argument("duplicate word in vocabulary".into()));
        }
        Ok(Vocabulary {
            capacity,
            words,
            index,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of ids in use, including padding.
    pub fn len(&self) -> usize {
        self.words.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        id.checked_sub(1).and_then(|k| self.words.get(k)).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

pub fn build_vocab<S: AsRef<str>>(texts: &[S], capacity: usize) -> Result<Vocabulary> {
    if capacity < 2 {
        return Err(Error::Argument(format!("vocabulary capacity must be at least 2, got {capacity}")));
    }
    // word → (count, first position)
    let mut stats: HashMap<String, (usize, usize)> = HashMap::new();
    let mut position = 0;
    for text in texts {
        for word in normalize_text(text.as_ref()).split(' ').filter(|w| !w.is_empty()) {
            stats.entry(word.to_string()).or_insert((0, position)).0 += 1;
            position += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> =
        stats.into_iter().map(|(w, (count, first))| (w, count, first)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.truncate(capacity - 1);
    Vocabulary::from_words(ranked.into_iter().map(|(w, _, _)| w).collect(), capacity)
}

/// Fixed-length id sequence, left-padded with [`PAD_ID`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<usize>);

impl TokenSeq {
    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_ids(ids: Vec<usize>) -> Self {
        TokenSeq(ids)
    }
}

/// Unknown words are dropped; longer texts keep their last `maxlen` ids.
pub fn tokenize(vocab: &Vocabulary, text: &str, maxlen: usize) -> TokenSeq {
    let ids: Vec<usize> = normalize_text(text)
        .split(' ')
        .filter_map(|w| vocab.id(w))
        .collect();
    let kept = &ids[ids.len().saturating_sub(maxlen)..];
    let mut seq = vec![PAD_ID; maxlen - kept.len()];
    seq.extend_from_slice(kept);
    TokenSeq(seq)
}

/// Token sequences with binary labels (0 negative, 1 positive).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledDataset {
    pub sequences: Vec<TokenSeq>,
    pub labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(sequences: Vec<TokenSeq>, labels: Vec<u8>) -> Result<Self> {
        if sequences.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} sequences but {} labels",
                sequences.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Argument("labels must be 0 or 1".into()));
        }
        Ok(LabeledDataset { sequences, labels })
    }

    pub fn from_records(records: &[RawRecord], vocab: &Vocabulary, maxlen: usize) -> Result<Self> {
        let mut sequences = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for r in records {
            let label = match r.label {
                Sentiment::Negative => 0,
                Sentiment::Positive => 1,
                Sentiment::Neutral => {
                    return Err(Error::Argument("neutral records must be removed first".into()))
                }
            };
            sequences.push(tokenize(vocab, &r.text, maxlen));
            labels.push(label);
        }
        Self::new(sequences, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.len() - pos, pos)
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Shuffles once and sends the last `⌈ratio · N⌉` samples to validation.
pub fn split_train_val(
    dataset: &LabeledDataset,
    ratio: f64,
    rng: &mut Rng,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n = dataset.len();
    // The small slack keeps e.g. 0.4 · 10 from rounding up to 5.
    let n_val = ((ratio * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::EmptyDataset(format!(
            "split ratio {ratio} on {n} samples leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let (train, val) = order.split_at(n - n_val);
    Ok((dataset.subset(train), dataset.subset(val)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_text("RT @GOP: Great!"), "rt gop great");
        assert_eq!(normalize_text("ABC123"), "abc123");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("  a--b   c  "), "a b c");
    }

    #[test]
    fn vocab_and_padding() {
        let vocab = build_vocab(&["good debate", "bad debate"], 20).unwrap();
        assert_eq!(vocab.id("debate"), Some(1));
        assert_eq!(vocab.id("good"), Some(2));
        assert_eq!(vocab.id("bad"), Some(3));
        assert_eq!(tokenize(&vocab, "bad debate", 4).ids(), &[0, 0, 3, 1]);
    }

    #[test]
    fn vocabulary_survives_json() {
        let vocab = build_vocab(&["good debate", "bad debate"], 20).unwrap();
        let back: Vocabulary = serde_json::from_str(&serde_json::to_string(&vocab).unwrap()).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.id("bad"), Some(3));
    }

    #[test]
    fn unknown_words_pad_out() {
        let vocab = build_vocab(&["good debate"], 20).unwrap();
        assert_eq!(tokenize(&vocab, "zebra", 3).ids(), &[0, 0, 0]);
    }

    #[test]
    fn long_texts_keep_the_tail() {
        let vocab = build_vocab(&["a b c d e"], 20).unwrap();
        assert_eq!(tokenize(&vocab, "a b c d e", 2).ids(), &[4, 5]);
    }

    #[test]
    fn capacity_caps_ids() {
        let vocab = build_vocab(&["x x x y y z"], 3).unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.id("z"), None);
        assert!(build_vocab(&["a"], 1).is_err());
    }

    #[test]
    fn select_drops_neutral() {
        let rec = |label| RawRecord {
            text: "t".into(),
            label,
        };
        let kept = select_binary(vec![
            rec(Sentiment::Positive),
            rec(Sentiment::Neutral),
            rec(Sentiment::Negative),
        ])
        .unwrap();
        assert_eq!(
            kept.iter().map(|r| r.label).collect::<Vec<_>>(),
            [Sentiment::Positive, Sentiment::Negative]
        );
        assert!(matches!(
            select_binary(vec![rec(Sentiment::Neutral)]),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn csv_parsing() {
        let csv = "id,text,sentiment\n1,\"Hello, world\",Positive\n2,meh,Neutral\n3,awful,Negative\n";
        let (records, report) = ingest_reader(csv.as_bytes(), "text", "sentiment").unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].text, "Hello, world");
        assert_eq!(report.class_counts.neutral, 1);
        assert_eq!(report.skipped_rows, 0);

        let err = ingest_reader(csv.as_bytes(), "text", "label").unwrap_err();
        assert!(err.to_string().contains("\"label\""), "{err}");
    }

    #[test]
    fn malformed_rows_are_skipped_and_reported() {
        let csv = "text,sentiment\nfine,Positive\nshort\n,Negative\nok,Angry\n";
        let (records, report) = ingest_reader(csv.as_bytes(), "text", "sentiment").unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(report.total_rows, 4);
        assert_eq!(report.skipped_rows, 3);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let data = LabeledDataset::new(
            (0..10).map(|i| TokenSeq(vec![i])).collect(),
            (0..10).map(|i| (i % 2) as u8).collect(),
        )
        .unwrap();
        let (train, val) = split_train_val(&data, 0.4, &mut Rng::new(1)).unwrap();
        assert_eq!((train.len(), val.len()), (6, 4));
        let again = split_train_val(&data, 0.4, &mut Rng::new(1)).unwrap();
        assert_eq!((train.clone(), val.clone()), again);
        let (tn, tp) = train.class_counts();
        let (vn, vp) = val.class_counts();
        assert_eq!((tn + vn, tp + vp), data.class_counts());

        split_train_val(&data, 0.33, &mut Rng::new(1)).unwrap();
        assert!(split_train_val(&data, 0.0, &mut Rng::new(1)).is_err());
        assert!(split_train_val(&data, 1.0, &mut Rng::new(1)).is_err());
        let tiny = data.subset(&[0]);
        assert!(split_train_val(&tiny, 0.5, &mut Rng::new(1)).is_err());
    }
}
