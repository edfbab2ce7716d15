//! Versioned text format for trained models.
//!
//! ```text
//! asymboost-model 1
//! kind boost|cascade
//! hypotheses <n>
//! h <feature> <threshold> <+|->        (n lines)
//! # boost:
//! weights <w_1> ... <w_n>
//! offset <b>
//! # cascade:
//! nodes <k>
//! node <weak_count> <b> <d> <f> <w_1> ... <w_weak_count>   (k lines)
//! end
//! ```
//!
//! Floats carry 17 significant digits, which reproduces every `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::boost::BoostModel;
use crate::cascade::{CascadeModel, ExitNode};
use crate::data::{Polarity, WeakHypothesis};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "asymboost-model";

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Boost(BoostModel),
    Cascade(CascadeModel),
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_hypotheses(out: &mut String, hyps: &[WeakHypothesis]) {
    let _ = writeln!(out, "hypotheses {}", hyps.len());
    for h in hyps {
        let pol = match h.polarity {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
        };
        let _ = writeln!(out, "h {} {} {}", h.feature_index, num(h.threshold), pol);
    }
}

pub fn model_to_string(model: &Model) -> String {
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\n");
    match model {
        Model::Boost(m) => {
            out.push_str("kind boost\n");
            write_hypotheses(&mut out, &m.hypotheses);
            out.push_str("weights");
            for &w in &m.w {
                out.push(' ');
                out.push_str(&num(w));
            }
            let _ = writeln!(out, "\noffset {}", num(m.b));
        }
        Model::Cascade(c) => {
            out.push_str("kind cascade\n");
            write_hypotheses(&mut out, &c.hypotheses);
            let _ = writeln!(out, "nodes {}", c.nodes.len());
            for n in &c.nodes {
                let _ = write!(out, "node {} {} {} {}", n.weak_count, num(n.b), num(n.d), num(n.f));
                for &w in &n.w {
                    out.push(' ');
                    out.push_str(&num(w));
                }
                out.push('\n');
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    /// Next non-blank line split on whitespace; its first token must be `key`.
    fn expect(&mut self, key: &str) -> Result<Vec<&'a str>> {
        loop {
            let Some((i, l)) = self.inner.next() else {
                return Err(self.err(format!("file ends before the '{key}' section")));
            };
            self.line = i + 1;
            let mut toks = l.split_whitespace();
            match toks.next() {
                None => continue,
                Some(k) if k == key => return Ok(toks.collect()),
                Some(k) => return Err(self.err(format!("expected '{key}', found '{k}'"))),
            }
        }
    }

    fn float(&self, s: &str, field: &str) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| self.err(format!("{field}: '{s}' is not a number")))
    }

    fn count(&self, s: Option<&&str>, field: &str) -> Result<usize> {
        let s = s.ok_or_else(|| self.err(format!("missing {field}")))?;
        s.parse::<usize>()
            .map_err(|_| self.err(format!("{field}: '{s}' is not a count")))
    }

    fn floats(&self, toks: &[&str], field: &str) -> Result<Vec<f64>> {
        toks.iter().map(|t| self.float(t, field)).collect()
    }
}

fn read_hypotheses(lines: &mut Lines) -> Result<Vec<WeakHypothesis>> {
    let head = lines.expect("hypotheses")?;
    let n = lines.count(head.first(), "hypothesis count")?;
    let mut hyps = Vec::with_capacity(n);
    for k in 0..n {
        let t = lines
            .expect("h")
            .map_err(|e| with_context(e, &format!("hypothesis {k} of {n}")))?;
        if t.len() != 3 {
            return Err(lines.err(format!("hypothesis needs 3 fields, got {}", t.len())));
        }
        let feature = lines.count(t.first(), "feature index")?;
        let threshold = lines.float(t[1], "threshold")?;
        let polarity = match t[2] {
            "+" => Polarity::Positive,
            "-" => Polarity::Negative,
            p => return Err(lines.err(format!("polarity must be + or -, got '{p}'"))),
        };
        hyps.push(WeakHypothesis::new(feature, threshold, polarity));
    }
    Ok(hyps)
}

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{ctx}: {message}"),
        },
        other => other,
    }
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let v = lines.expect(MAGIC)?;
    let version = lines.count(v.first(), "format version")?;
    if version != FORMAT_VERSION as usize {
        return Err(lines.err(format!("unsupported format version {version}, expected {FORMAT_VERSION}")));
    }
    let kind = lines.expect("kind")?;
    let model = match kind.first().copied() {
        Some("boost") => {
            let hypotheses = read_hypotheses(&mut lines)?;
            let wt = lines.expect("weights")?;
            let w = lines.floats(&wt, "weight")?;
            if w.len() != hypotheses.len() {
                return Err(lines.err(format!("{} weights for {} hypotheses", w.len(), hypotheses.len())));
            }
            let ot = lines.expect("offset")?;
            if ot.len() != 1 {
                return Err(lines.err("offset needs exactly one value"));
            }
            let b = lines.float(ot[0], "offset")?;
            Model::Boost(BoostModel { hypotheses, w, b })
        }
        Some("cascade") => {
            let hypotheses = read_hypotheses(&mut lines)?;
            let nt = lines.expect("nodes")?;
            let k = lines.count(nt.first(), "node count")?;
            let mut nodes = Vec::with_capacity(k);
            for t in 0..k {
                let f = lines
                    .expect("node")
                    .map_err(|e| with_context(e, &format!("node {t} of {k}")))?;
                let weak_count = lines.count(f.first(), "weak count")?;
                if f.len() != 4 + weak_count {
                    return Err(lines.err(format!("node needs {} fields, got {}", 4 + weak_count, f.len())));
                }
                let vals = lines.floats(&f[1..], "node value")?;
                nodes.push(ExitNode {
                    weak_count,
                    b: vals[0],
                    d: vals[1],
                    f: vals[2],
                    w: vals[3..].to_vec(),
                });
            }
            let c = CascadeModel { hypotheses, nodes };
            c.validate().map_err(|e| lines.err(e.to_string()))?;
            Model::Cascade(c)
        }
        other => return Err(lines.err(format!("unknown model kind {other:?}"))),
    };
    lines.expect("end")?;
    Ok(model)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_str(&std::fs::read_to_string(path)?)
}
