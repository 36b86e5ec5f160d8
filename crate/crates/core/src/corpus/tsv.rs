//! Canonical corpus files: a five-column TSV plus a JSON manifest sidecar.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::ingest::{csv_error, open_table, read_headers};
use super::normalize::clean_text;
use super::{Corpus, CorpusError, LabeledExample, Manifest, Split};

pub const CANONICAL_HEADER: [&str; 5] = ["id", "language", "label", "origin", "text"];

/// Escapes backslash, tab, newline and carriage return.
pub fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_field`]; unknown escapes are kept literally.
pub fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// `<file>.manifest.json`, next to the corpus file.
pub fn manifest_path(corpus_path: &Path) -> PathBuf {
    let mut name = corpus_path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    corpus_path.with_file_name(name)
}

/// Writes the corpus as canonical TSV and its manifest alongside.
pub fn write_canonical(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "{}", CANONICAL_HEADER.join("\t"))?;
        for ex in corpus {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                escape_field(&ex.id),
                ex.language,
                ex.label,
                ex.origin,
                escape_field(&ex.text)
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| CorpusError::io(path, e))?;
    write_manifest(corpus.manifest(), &manifest_path(path))
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), CorpusError> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| CorpusError::Manifest {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    fs::write(path, json + "\n").map_err(|e| CorpusError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.to_path_buf()),
        _ => CorpusError::io(path, e),
    })?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Manifest {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Reads a canonical TSV back, tagging every row with `dataset` and `split`.
/// Unlike ingestion, any invalid label is an error and rows may be in any of
/// the five languages.
pub fn read_canonical(path: &Path, dataset: &str, split: Split) -> Result<Corpus, CorpusError> {
    let mut reader = open_table(path, '\t', false)?;
    let headers = read_headers(&mut reader, path)?;
    if headers.iter().collect::<Vec<_>>() != CANONICAL_HEADER {
        return Err(CorpusError::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("expected {:?}", CANONICAL_HEADER),
        });
    }
    let mut examples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |e: CorpusError| CorpusError::MalformedRow {
            path: path.to_path_buf(),
            line,
            detail: e.to_string(),
        };
        examples.push(LabeledExample {
            id: unescape_field(&record[0]),
            language: record[1].parse().map_err(row_err)?,
            label: record[2].parse().map_err(row_err)?,
            origin: record[3].parse().map_err(row_err)?,
            text: clean_text(&unescape_field(&record[4])),
            dataset: dataset.to_string(),
            split,
        });
    }
    Corpus::new(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, FormatDescriptor, Language, Origin, SentimentLabel};
    use proptest::prelude::*;

    #[test]
    fn escapes_round_trip() {
        let s = "a\tb\nc\\d\re\\q";
        assert_eq!(unescape_field(&escape_field(s)), s);
        assert_eq!(escape_field("x\ty"), "x\\ty");
    }

    fn arb_example() -> impl Strategy<Value = (String, usize, bool)> {
        ("[a-zA-Zàéü😀 @#:/.\\\\]{1,40}", 0usize..3, any::<bool>())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn write_then_read_is_identity(rows in proptest::collection::vec(arb_example(), 0..30)) {
            let examples: Vec<LabeledExample> = rows
                .iter()
                .enumerate()
                .filter_map(|(i, (text, label, translated))| {
                    let text = clean_text(text);
                    if text.is_empty() {
                        return None;
                    }
                    let (language, origin) = if *translated {
                        (Language::De, Origin::Translated(Language::Fr))
                    } else {
                        (Language::Fr, Origin::Original)
                    };
                    Some(LabeledExample {
                        id: format!("id\t{i}"),
                        text,
                        language,
                        label: SentimentLabel::from_index(*label).unwrap(),
                        origin,
                        dataset: "deft2015".into(),
                        split: Split::Train,
                    })
                })
                .collect();
            let corpus = Corpus::new(examples).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.tsv");
            write_canonical(&corpus, &path).unwrap();

            let back = read_canonical(&path, "deft2015", Split::Train).unwrap();
            prop_assert_eq!(&back, &corpus);
            let (ingested, _) =
                ingest(&path, &FormatDescriptor::Canonical, "deft2015", Language::Fr, Split::Train)
                    .unwrap();
            prop_assert_eq!(&ingested, &corpus);
            prop_assert_eq!(read_manifest(&manifest_path(&path)).unwrap(), corpus.manifest().clone());
        }
    }

    #[test]
    fn manifest_sidecar_name() {
        assert_eq!(
            manifest_path(Path::new("out/train.tsv")),
            PathBuf::from("out/train.tsv.manifest.json")
        );
    }
}
