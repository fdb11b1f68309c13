//! Line-oriented dataset files.
//!
//! The first line is a header naming the task and format version; further
//! lines starting with `#` are comments. Each remaining line is one sample:
//!
//! * mirror: the input vectors as space-separated 3-digit hex words, e.g.
//!   `1a3 0ff 100` (bit `j` of a vector is bit `j` of its word);
//! * M10AE: `<expr>\t<label>\t<n_lpo>`, e.g. `8+6*3/2-4\t4\t2`. Label and
//!   #LPO are re-derived on read and must agree.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::m10ae::{self, M10aeSample};
use crate::mirror::{MirrorSample, WORD_MASK};
use crate::probe::word_digit;
use crate::{Result, TaskError, TaskKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Mirror(Vec<MirrorSample>),
    M10ae(Vec<M10aeSample>),
}

impl Dataset {
    pub fn task(&self) -> TaskKind {
        match self {
            Dataset::Mirror(_) => TaskKind::Mirror,
            Dataset::M10ae(_) => TaskKind::M10ae,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Mirror(s) => s.len(),
            Dataset::M10ae(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Difficulty of sample `i`: input length for mirror, #LPO for M10AE.
    pub fn difficulty(&self, i: usize) -> usize {
        match self {
            Dataset::Mirror(s) => s[i].len(),
            Dataset::M10ae(s) => s[i].n_lpo,
        }
    }

    /// Label of input position `i` of sample `sample`: the digit carried by
    /// a mirror probe vector, or the token text for M10AE.
    pub fn input_label(&self, sample: usize, i: usize) -> Option<String> {
        match self {
            Dataset::Mirror(s) => s[sample].input.get(i).and_then(|&w| word_digit(w)).map(|d| d.to_string()),
            Dataset::M10ae(s) => s[sample].tokens.get(i).map(|t| t.to_string()),
        }
    }

    pub fn header(&self) -> String {
        format!("# mannlab-dataset {} v{FORMAT_VERSION}", self.task())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        match self {
            Dataset::Mirror(samples) => {
                for s in samples {
                    let words: Vec<String> = s.input.iter().map(|w| format!("{w:03x}")).collect();
                    writeln!(w, "{}", words.join(" "))?;
                }
            }
            Dataset::M10ae(samples) => {
                for s in samples {
                    writeln!(w, "{}\t{}\t{}", s.expr(), s.label, s.n_lpo)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(TaskError::Parse { line: 1, reason: "missing header".into() })?;
        let header = header?;
        let mut parts = header.split_whitespace();
        let task = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("#"), Some("mannlab-dataset"), Some(task), Some(version))
                if version == format!("v{FORMAT_VERSION}") =>
            {
                task.parse::<TaskKind>()?
            }
            _ => return Err(TaskError::Parse { line: 1, reason: format!("unrecognized header {header:?}") }),
        };
        let body = lines.filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() || l.starts_with('#') => None,
            other => Some((i + 1, other)),
        });
        match task {
            TaskKind::Mirror => {
                body.map(|(line, l)| parse_mirror_line(line, &l?)).collect::<Result<Vec<_>>>().map(Dataset::Mirror)
            }
            TaskKind::M10ae => {
                body.map(|(line, l)| parse_m10ae_line(line, &l?)).collect::<Result<Vec<_>>>().map(Dataset::M10ae)
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn parse_mirror_line(line: usize, text: &str) -> Result<MirrorSample> {
    let words = text
        .split_whitespace()
        .map(|w| match u16::from_str_radix(w, 16) {
            Ok(v) if v <= WORD_MASK => Ok(v),
            _ => Err(TaskError::Parse { line, reason: format!("invalid 9-bit hex word {w:?}") }),
        })
        .collect::<Result<Vec<_>>>()?;
    MirrorSample::new(words).map_err(|e| TaskError::Parse { line, reason: e.to_string() })
}

fn parse_m10ae_line(line: usize, text: &str) -> Result<M10aeSample> {
    let err = |reason: String| TaskError::Parse { line, reason };
    let fields: Vec<&str> = text.split('\t').collect();
    let [expr, label, n_lpo] = fields[..] else {
        return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
    };
    let tokens = m10ae::parse(expr).map_err(|e| err(e.to_string()))?;
    let sample = M10aeSample::from_tokens(tokens).map_err(|e| err(e.to_string()))?;
    let label: u8 = label.trim().parse().map_err(|_| err(format!("bad label {label:?}")))?;
    let n_lpo: usize = n_lpo.trim().parse().map_err(|_| err(format!("bad #LPO {n_lpo:?}")))?;
    if label != sample.label || n_lpo != sample.n_lpo {
        return Err(err(format!(
            "{expr} evaluates to {} with #LPO {}, file says {label} and {n_lpo}",
            sample.label, sample.n_lpo
        )));
    }
    Ok(sample)
}
