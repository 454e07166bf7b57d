//! Tab-separated prediction and metric files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{io, Error, Result};

/// One line of `doc_id<TAB>rank<TAB>entity<TAB>score`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub doc_id: String,
    pub rank: usize,
    pub entity: String,
    pub score: f64,
}

pub fn format_predictions(rows: &[Prediction]) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}", r.doc_id, r.rank, r.entity, r.score).unwrap();
    }
    out
}

pub fn parse_predictions(path: &Path, text: &str) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(path, i + 1, m.to_string());
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(bad("expected `doc_id<TAB>rank<TAB>entity<TAB>score`"));
        }
        out.push(Prediction {
            doc_id: f[0].to_string(),
            rank: f[1].parse().map_err(|_| bad("rank is not an integer"))?,
            entity: f[2].to_string(),
            score: f[3].parse().map_err(|_| bad("score is not a number"))?,
        });
    }
    Ok(out)
}

/// Entity rankings per document, ordered by rank.
pub fn read_rankings(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let rows = parse_predictions(path, &io::read_to_string(path)?)?;
    let mut by_doc: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for r in rows {
        by_doc.entry(r.doc_id).or_default().push((r.rank, r.entity));
    }
    Ok(by_doc
        .into_iter()
        .map(|(d, mut v)| {
            v.sort();
            (d, v.into_iter().map(|(_, e)| e).collect())
        })
        .collect())
}

/// One line of `unit<TAB>metric<TAB>value`; aggregates use the unit `ALL`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub unit: String,
    pub metric: String,
    pub value: f64,
}

pub const ALL_UNIT: &str = "ALL";

pub fn format_report(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{}\t{}\t{}", r.unit, r.metric, r.value).unwrap();
    }
    out
}

pub fn parse_report(path: &Path, text: &str) -> Result<Vec<ReportRow>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, i + 1, "expected `unit<TAB>metric<TAB>value`"));
        }
        out.push(ReportRow {
            unit: f[0].to_string(),
            metric: f[1].to_string(),
            value: f[2]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, "value is not a number"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_round_trip() {
        let rows = vec![
            Prediction { doc_id: "d".into(), rank: 1, entity: "A".into(), score: 0.1 + 0.2 },
            Prediction { doc_id: "d".into(), rank: 2, entity: "B".into(), score: -1.0 },
        ];
        let text = format_predictions(&rows);
        assert_eq!(parse_predictions(Path::new("p"), &text).unwrap(), rows);
    }

    #[test]
    fn report_round_trip() {
        let rows = vec![ReportRow { unit: ALL_UNIT.into(), metric: "NDCG@20".into(), value: 0.25 }];
        assert_eq!(format_report(&rows), "ALL\tNDCG@20\t0.25\n");
        assert_eq!(parse_report(Path::new("r"), &format_report(&rows)).unwrap(), rows);
    }
}
