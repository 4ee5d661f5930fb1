//! LIBSVM sparse text format: `label idx:val idx:val ...`, 1-based indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{Dataset, Example, SparseVector};

/// Mapping from label values in the file to {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelMap {
    /// `+1`/`1` → 1 and `−1`/`0` → 0.
    #[default]
    Standard,
    /// Two explicit values, e.g. `{1, 2}` in some distributions.
    Custom { positive: f64, negative: f64 },
}

impl LabelMap {
    fn map(&self, value: f64) -> Option<u8> {
        match *self {
            LabelMap::Standard if value == 1.0 => Some(1),
            LabelMap::Standard if value == -1.0 || value == 0.0 => Some(0),
            LabelMap::Standard => None,
            LabelMap::Custom { positive, .. } if value == positive => Some(1),
            LabelMap::Custom { negative, .. } if value == negative => Some(0),
            LabelMap::Custom { .. } => None,
        }
    }
}

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    parse_libsvm_with(path, LabelMap::Standard)
}

pub fn parse_libsvm_with(path: &Path, labels: LabelMap) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_libsvm_str(&text, path, labels)
}

/// Parses LIBSVM text; `origin` only names the source in error messages.
pub fn parse_libsvm_str(text: &str, origin: &Path, labels: LabelMap) -> Result<Dataset> {
    let mut examples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let value: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("malformed label `{label_tok}`")))?;
        let label = labels
            .map(value)
            .ok_or_else(|| err(format!("unknown label value `{label_tok}`")))?;
        let mut pairs = Vec::new();
        let mut last: Option<u32> = None;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("malformed token `{tok}`")))?;
            let idx: u32 = idx
                .parse()
                .map_err(|_| err(format!("malformed index in `{tok}`")))?;
            if idx == 0 {
                return Err(err(format!("index 0 in `{tok}`; indices are 1-based")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("non-numeric value in `{tok}`")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value in `{tok}`")));
            }
            if last.is_some_and(|l| idx <= l) {
                return Err(err(format!("index {idx} does not increase")));
            }
            last = Some(idx);
            pairs.push((idx - 1, val));
        }
        let features = SparseVector::new(pairs).map_err(|e| err(e.to_string()))?;
        examples.push(Example::labeled(features, label));
    }
    Ok(Dataset::new(examples))
}

/// Writes labeled data with `+1`/`-1` labels and shortest round-trip values.
pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for (i, e) in data.iter().enumerate() {
        let Some(y) = e.label else {
            return Err(Error::Parameter(format!("example {i} has no label")));
        };
        write!(out, "{}", if y == 1 { "+1" } else { "-1" })?;
        for (idx, val) in e.features.iter() {
            write!(out, " {}:{}", idx + 1, val)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        parse_libsvm_str(text, Path::new("mem"), LabelMap::Standard)
    }

    #[test]
    fn format_definition() {
        let d = parse("+1 3:0.5 7:1\n").unwrap();
        assert_eq!(d.len(), 1);
        let e = &d.examples()[0];
        assert_eq!(e.label, Some(1));
        assert_eq!(e.features.iter().collect::<Vec<_>>(), vec![(2, 0.5), (6, 1.0)]);
        assert_eq!(d.dim(), 7);
    }

    #[test]
    fn labels_comments_and_blank_lines() {
        let d = parse("# header\n-1 1:2\n\n0 2:1 # trailing\n1\n").unwrap();
        assert_eq!(d.labels(), vec![Some(0), Some(0), Some(1)]);
        assert_eq!(d.examples()[2].features.nnz(), 0);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, line) in [
            ("1 5:abc\n", 1),
            ("1 1:1\n1 3:1 2:1\n", 2),
            ("1 1:1\n\n3 1:1\n", 3),
            ("1 x\n", 1),
            ("1 0:1\n", 1),
            ("1 2:1 2:3\n", 1),
        ] {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        let msg = parse("1 5:abc").unwrap_err().to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn custom_label_map() {
        let map = LabelMap::Custom { positive: 1.0, negative: 2.0 };
        let d = parse_libsvm_str("2 1:1\n1 2:1\n", Path::new("mem"), map).unwrap();
        assert_eq!(d.labels(), vec![Some(0), Some(1)]);
        assert!(parse("2 1:1\n").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let text = "+1 1:0.1 4:-2.5e-7 9:1\n-1 2:3\n+1\n";
        let d = parse(text).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&d, &mut buf).unwrap();
        let d2 = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(d.examples(), d2.examples());
        let mut buf2 = Vec::new();
        write_libsvm(&d2, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
