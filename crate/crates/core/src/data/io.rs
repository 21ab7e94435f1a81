//! Line-oriented UTF-8 dataset files.
//!
//! ```text
//! BALDS v1 task=<multilabel|phase> F=<int> C=<int>
//! video <id> <length>
//! frame <video-id> <index> <F floats> | <labels>
//! ...
//! checksum sha256=<hex of every byte before this line>
//! ```
//!
//! Labels are `C` space-separated 0/1 flags (multilabel) or one phase index.
//! Floats carry 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use super::{Dataset, FrameLabel, TaskKind, Video};
use crate::error::{Error, Result};

pub const FORMAT_MAGIC: &str = "BALDS";
const VERSION: &str = "v1";

/// Serializes `dataset` into the text format.
pub fn write_dataset(dataset: &Dataset) -> Result<String> {
    dataset.validate()?;
    let mut out = String::new();
    writeln!(
        out,
        "{FORMAT_MAGIC} {VERSION} task={} F={} C={}",
        dataset.task, dataset.features, dataset.classes
    )
    .expect("write to string");
    for v in &dataset.videos {
        writeln!(out, "video {} {}", v.id, v.len()).expect("write to string");
        for (i, label) in v.labels.iter().enumerate() {
            write!(out, "frame {} {}", v.id, i).expect("write to string");
            for x in v.features.row(i) {
                write!(out, " {x:.8e}").expect("write to string");
            }
            out.push_str(" |");
            match label {
                FrameLabel::Multi(bits) => {
                    for b in bits {
                        write!(out, " {b}").expect("write to string");
                    }
                }
                FrameLabel::Phase(p) => write!(out, " {p}").expect("write to string"),
            }
            out.push('\n');
        }
    }
    let digest = hex::encode(Sha256::digest(out.as_bytes()));
    writeln!(out, "checksum sha256={digest}").expect("write to string");
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = write_dataset(dataset)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

struct Cursor {
    line: usize,
    offset: usize,
}

impl Cursor {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            offset: self.offset,
            message: message.into(),
        }
    }
}

fn parse_kv<'a>(cur: &Cursor, token: Option<&'a str>, key: &str) -> Result<&'a str> {
    let token = token.ok_or_else(|| cur.err(format!("header is missing {key}=")))?;
    token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| cur.err(format!("expected {key}=<value>, found '{token}'")))
}

fn parse_usize(cur: &Cursor, token: Option<&str>, what: &str) -> Result<usize> {
    let token = token.ok_or_else(|| cur.err(format!("missing {what}")))?;
    token.parse().map_err(|_| cur.err(format!("invalid {what} '{token}'")))
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut cur = Cursor { line: 0, offset: 0 };
    let mut header: Option<(TaskKind, usize, usize)> = None;
    let mut videos: Vec<(usize, usize, Vec<f64>, Vec<FrameLabel>)> = Vec::new();
    let mut checksum_seen = false;

    let mut pos = 0usize;
    while pos < text.len() {
        let end = text[pos..].find('\n').map(|i| pos + i);
        let raw = match end {
            Some(e) => &text[pos..e],
            None => &text[pos..],
        };
        cur.line += 1;
        cur.offset = pos;
        let next = end.map_or(text.len(), |e| e + 1);

        if checksum_seen {
            if raw.trim().is_empty() {
                pos = next;
                continue;
            }
            return Err(cur.err("content after checksum trailer"));
        }
        if end.is_none() {
            return Err(cur.err("truncated line (no terminating newline)"));
        }

        let mut tokens = raw.split_ascii_whitespace();
        let kind = tokens.next();
        match (kind, header) {
            (Some(FORMAT_MAGIC), None) => {
                let version = tokens.next().unwrap_or("");
                if version != VERSION {
                    return Err(cur.err(format!("unsupported version '{version}', expected {VERSION}")));
                }
                let task: TaskKind = parse_kv(&cur, tokens.next(), "task")?
                    .parse()
                    .map_err(|_| cur.err("unknown task"))?;
                let f = parse_kv(&cur, tokens.next(), "F")?
                    .parse()
                    .map_err(|_| cur.err("invalid F"))?;
                let c = parse_kv(&cur, tokens.next(), "C")?
                    .parse()
                    .map_err(|_| cur.err("invalid C"))?;
                if f == 0 || c == 0 {
                    return Err(cur.err("F and C must be positive"));
                }
                header = Some((task, f, c));
            }
            (_, None) => return Err(cur.err(format!("expected '{FORMAT_MAGIC} {VERSION}' header"))),
            (Some("video"), Some(_)) => {
                let id = parse_usize(&cur, tokens.next(), "video id")?;
                let len = parse_usize(&cur, tokens.next(), "video length")?;
                if videos.iter().any(|v| v.0 == id) {
                    return Err(cur.err(format!("duplicate video id {id}")));
                }
                videos.push((id, len, Vec::new(), Vec::new()));
            }
            (Some("frame"), Some((task, f, c))) => {
                let vid = parse_usize(&cur, tokens.next(), "frame video id")?;
                let index = parse_usize(&cur, tokens.next(), "frame index")?;
                let video = videos
                    .iter_mut()
                    .find(|v| v.0 == vid)
                    .ok_or_else(|| cur.err(format!("frame refers to undeclared video {vid}")))?;
                if index != video.3.len() {
                    return Err(cur.err(format!(
                        "video {vid}: expected frame index {}, found {index}",
                        video.3.len()
                    )));
                }
                if index >= video.1 {
                    return Err(cur.err(format!(
                        "video {vid}: frame {index} exceeds declared length {}",
                        video.1
                    )));
                }
                let mut n_feat = 0;
                for tok in tokens.by_ref() {
                    if tok == "|" {
                        break;
                    }
                    let x: f64 = tok.parse().map_err(|_| cur.err(format!("invalid float '{tok}'")))?;
                    video.2.push(x);
                    n_feat += 1;
                }
                if n_feat != f {
                    return Err(cur.err(format!(
                        "dimension mismatch: header says F={f}, frame has {n_feat} features"
                    )));
                }
                let labels: Vec<&str> = tokens.collect();
                let label = match task {
                    TaskKind::MultiLabel => {
                        if labels.len() != c {
                            return Err(cur.err(format!(
                                "dimension mismatch: header says C={c}, frame has {} labels",
                                labels.len()
                            )));
                        }
                        let bits = labels
                            .iter()
                            .map(|t| match *t {
                                "0" => Ok(0u8),
                                "1" => Ok(1u8),
                                other => Err(cur.err(format!("label flag must be 0 or 1, found '{other}'"))),
                            })
                            .collect::<Result<Vec<_>>>()?;
                        FrameLabel::Multi(bits)
                    }
                    TaskKind::Phase => {
                        if labels.len() != 1 {
                            return Err(cur.err(format!("phase frame needs exactly one label, found {}", labels.len())));
                        }
                        let p = parse_usize(&cur, Some(labels[0]), "phase")?;
                        if p >= c {
                            return Err(cur.err(format!("phase {p} out of range for C={c}")));
                        }
                        FrameLabel::Phase(p)
                    }
                };
                video.3.push(label);
            }
            (Some("checksum"), Some(_)) => {
                let token = tokens.next().unwrap_or("");
                let expected = token
                    .strip_prefix("sha256=")
                    .ok_or_else(|| cur.err("checksum must be sha256=<hex>"))?;
                let actual = hex::encode(Sha256::digest(&text.as_bytes()[..pos]));
                if expected != actual {
                    return Err(cur.err(format!(
                        "checksum mismatch: file says {expected}, content hashes to {actual}"
                    )));
                }
                checksum_seen = true;
            }
            (None, Some(_)) => return Err(cur.err("empty line")),
            (Some(other), Some(_)) => return Err(cur.err(format!("unknown record '{other}'"))),
        }
        pos = next;
    }

    let eof = Cursor {
        line: cur.line + 1,
        offset: text.len(),
    };
    let Some((task, features, classes)) = header else {
        return Err(eof.err("empty file"));
    };
    for v in &videos {
        if v.3.len() != v.1 {
            return Err(eof.err(format!(
                "unexpected end of data: video {} has {} of {} frames",
                v.0,
                v.3.len(),
                v.1
            )));
        }
    }
    if !checksum_seen {
        return Err(eof.err("unexpected end of data: missing checksum trailer"));
    }
    let videos = videos
        .into_iter()
        .map(|(id, len, feats, labels)| {
            Ok(Video {
                id,
                features: Array2::from_shape_vec((len, features), feats)
                    .map_err(|e| Error::Data(format!("video {id}: {e}")))?,
                labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset {
        task,
        features,
        classes,
        videos,
    };
    data.validate()?;
    Ok(data)
}
