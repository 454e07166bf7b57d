//! SVMlight-style feature files:
//! `<grade> qid:<query_id> 1:<v1> 2:<v2> ... # <doc_id>`.

use std::fmt::Write as _;
use std::path::Path;

use crate::{io, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub query_id: String,
    pub doc_id: String,
    pub grade: i32,
    pub features: Vec<f64>,
}

/// `printf("%g")`: six significant digits, trailing zeros removed,
/// scientific notation below 1e-4 or from 1e6 up.
pub fn format_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..6).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{v:.*}", (5 - exp) as usize))
    }
}

pub fn format_rows(rows: &[FeatureRow]) -> String {
    let mut out = String::new();
    for r in rows {
        write!(out, "{} qid:{}", r.grade, r.query_id).unwrap();
        for (i, v) in r.features.iter().enumerate() {
            write!(out, " {}:{}", i + 1, format_g(*v)).unwrap();
        }
        writeln!(out, " # {}", r.doc_id).unwrap();
    }
    out
}

/// Parses a feature file. Feature indices must be 1-based and increasing;
/// indices left out are zero. Every row is padded to the widest row.
pub fn parse_rows(path: &Path, text: &str) -> Result<Vec<FeatureRow>> {
    let mut rows = Vec::new();
    let mut width = 0;
    for (i, line) in text.lines().enumerate() {
        let bad = |m: String| Error::parse(path, i + 1, m);
        let (body, comment) = match line.split_once('#') {
            Some((b, c)) => (b, c.trim()),
            None => (line, ""),
        };
        let mut fields = body.split_whitespace();
        let Some(grade) = fields.next() else {
            continue;
        };
        if comment.is_empty() {
            return Err(bad("missing `# <doc_id>` comment".into()));
        }
        let grade: i32 = grade.parse().map_err(|_| bad(format!("bad grade `{grade}`")))?;
        let query_id = fields
            .next()
            .and_then(|q| q.strip_prefix("qid:"))
            .ok_or_else(|| bad("missing qid:<query_id>".into()))?
            .to_string();
        let mut features = Vec::new();
        for f in fields {
            let (idx, val) = f.split_once(':').ok_or_else(|| bad(format!("bad feature `{f}`")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad feature index `{idx}`")))?;
            let val: f64 = val.parse().map_err(|_| bad(format!("bad feature value `{val}`")))?;
            if idx <= features.len() {
                return Err(bad(format!("feature index {idx} out of order")));
            }
            features.resize(idx - 1, 0.0);
            features.push(val);
        }
        width = width.max(features.len());
        rows.push(FeatureRow {
            query_id,
            doc_id: comment.to_string(),
            grade,
            features,
        });
    }
    for r in &mut rows {
        r.features.resize(width, 0.0);
    }
    Ok(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<FeatureRow>> {
    parse_rows(path, &io::read_to_string(path)?)
}
