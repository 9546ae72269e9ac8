//! CSV ingestion for votes and histograms.
//!
//! Vote files carry the header `user_id,item_id`, one row per vote; repeated
//! `(user, item)` rows collapse to a single count. Histogram files carry
//! `item_id,count`. Both are UTF-8, comma-separated, ids unquoted.

use std::path::Path;

use crate::error::{Error, Result};
use crate::histogram::Histogram;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a vote CSV into a histogram over `m` candidates. When `m` is `None`
/// the domain is sized to the largest item id seen plus one.
pub fn ingest_votes(path: &Path, m: Option<usize>) -> Result<Histogram> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut votes: Vec<(String, usize)> = Vec::new();
    let mut max_id = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if idx == 0 {
            let header: Vec<&str> = record.iter().map(str::trim).collect();
            if header != ["user_id", "item_id"] {
                return Err(parse_err(1, "expected header `user_id,item_id`"));
            }
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        let user = record[0].trim().to_string();
        if user.is_empty() {
            return Err(parse_err(line, "empty user_id"));
        }
        let item: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad item_id `{}`", &record[1])))?;
        max_id = max_id.max(item);
        votes.push((user, item));
    }
    let m = match m {
        Some(m) => m,
        None if votes.is_empty() => 1,
        None => max_id + 1,
    };
    Histogram::build(votes, m)
}

/// Reads a histogram CSV. Missing item ids count as zero; the domain is
/// `max(m, largest id + 1)` when `m` is given.
pub fn ingest_histogram(path: &Path, m: Option<usize>) -> Result<Histogram> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut pairs: Vec<(usize, u64)> = Vec::new();
    let mut max_id = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if idx == 0 {
            let header: Vec<&str> = record.iter().map(str::trim).collect();
            if header != ["item_id", "count"] {
                return Err(parse_err(1, "expected header `item_id,count`"));
            }
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        let item: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad item_id `{}`", &record[0])))?;
        let count: u64 = record[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad count `{}`", &record[1])))?;
        max_id = max_id.max(item);
        pairs.push((item, count));
    }
    let m = match m {
        Some(given) => given.max(max_id + 1),
        None if pairs.is_empty() => 1,
        None => max_id + 1,
    };
    let mut counts = vec![0u64; m];
    for (item, count) in pairs {
        counts[item] += count;
    }
    Histogram::from_counts(counts)
}

/// Writes a histogram in the `item_id,count` format.
pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["item_id", "count"])
        .map_err(|e| Error::Internal(e.to_string()))?;
    for (id, &count) in h.counts().iter().enumerate() {
        wtr.write_record([id.to_string(), count.to_string()])
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
