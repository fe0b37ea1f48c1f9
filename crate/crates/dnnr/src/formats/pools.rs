//! Pool files: newline-delimited JSON.
//!
//! The first line is a header
//! `{"format":"dnnr-pools","version":1,"sampler":..,"max_samples":..,"seed":..,"users":N,"skipped":M}`.
//! It is followed by `N` pool lines
//! `{"user":..,"kind":..,"positives":[..],"negatives":[..],"notes":[..]}`
//! and then `M` lines `{"user":..,"skip":reason}`, each group sorted by user id.
//! Positives are oldest first.

use std::io::{BufRead, BufReader};
use std::path::Path;

use dnnr_core::sampler::PoolNote;
use dnnr_core::{PoolEntry, SamplerKind, SyntheticPool};
use serde::{Deserialize, Serialize};

use crate::error::{DnnrError, Result};
use crate::fsutil;

pub const FORMAT: &str = "dnnr-pools";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolHeader {
    pub format: String,
    pub version: u32,
    pub sampler: String,
    pub max_samples: usize,
    pub seed: u64,
    pub users: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolFile {
    pub sampler: SamplerKind,
    pub max_samples: usize,
    pub seed: u64,
    pub pools: Vec<SyntheticPool>,
    /// Users without a pool and why.
    pub skipped: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct PoolLine {
    user: String,
    kind: String,
    positives: Vec<String>,
    negatives: Vec<String>,
    notes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SkipLine {
    user: String,
    skip: String,
}

fn note_text(note: &PoolNote) -> String {
    match note {
        PoolNote::RandomFallback => "random_fallback".into(),
        PoolNote::ShortOfNegatives { wanted, got } => format!("short_of_negatives:{wanted}:{got}"),
    }
}

fn parse_note(s: &str) -> Option<PoolNote> {
    if s == "random_fallback" {
        return Some(PoolNote::RandomFallback);
    }
    let rest = s.strip_prefix("short_of_negatives:")?;
    let (w, g) = rest.split_once(':')?;
    Some(PoolNote::ShortOfNegatives {
        wanted: w.parse().ok()?,
        got: g.parse().ok()?,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain structs serialize")
}

impl PoolFile {
    pub fn to_ndjson(&self) -> String {
        let header = PoolHeader {
            format: FORMAT.into(),
            version: VERSION,
            sampler: self.sampler.name().into(),
            max_samples: self.max_samples,
            seed: self.seed,
            users: self.pools.len(),
            skipped: self.skipped.len(),
        };
        let mut out = to_json(&header);
        out.push('\n');
        let mut pools: Vec<&SyntheticPool> = self.pools.iter().collect();
        pools.sort_by(|a, b| a.user_id.cmp(&b.user_id));
        for p in pools {
            let side = |label| {
                p.entries
                    .iter()
                    .filter(|e| e.label == label)
                    .map(|e| e.news_id.clone())
                    .collect()
            };
            let line = PoolLine {
                user: p.user_id.clone(),
                kind: p.kind.name().into(),
                positives: side(1),
                negatives: side(0),
                notes: p.notes.iter().map(note_text).collect(),
            };
            out.push_str(&to_json(&line));
            out.push('\n');
        }
        let mut skipped: Vec<&(String, String)> = self.skipped.iter().collect();
        skipped.sort();
        for (user, skip) in skipped {
            out.push_str(&to_json(&SkipLine {
                user: user.clone(),
                skip: skip.clone(),
            }));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: impl BufRead) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or("empty pool file")?;
        let header: PoolHeader = serde_json::from_str(&first.map_err(|e| e.to_string())?)
            .map_err(|e| format!("line 1: {e}"))?;
        if header.format != FORMAT {
            return Err(format!("not a pool file (format `{}`)", header.format));
        }
        if header.version != VERSION {
            return Err(format!("unsupported version {}", header.version));
        }
        let sampler: SamplerKind = header
            .sampler
            .parse()
            .map_err(|e: dnnr_core::Error| e.to_string())?;
        let mut file = PoolFile {
            sampler,
            max_samples: header.max_samples,
            seed: header.seed,
            pools: Vec::with_capacity(header.users),
            skipped: Vec::new(),
        };
        for (i, line) in lines {
            let line = line.map_err(|e| e.to_string())?;
            let at = |e: String| format!("line {}: {e}", i + 1);
            if file.pools.len() < header.users {
                let p: PoolLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
                let kind = p
                    .kind
                    .parse()
                    .map_err(|e: dnnr_core::Error| at(e.to_string()))?;
                let notes = p
                    .notes
                    .iter()
                    .map(|n| parse_note(n).ok_or_else(|| at(format!("unknown note `{n}`"))))
                    .collect::<Result<_, _>>()?;
                let label = |label| move |news_id: String| PoolEntry { news_id, label };
                let entries = p
                    .positives
                    .into_iter()
                    .map(label(1))
                    .chain(p.negatives.into_iter().map(label(0)))
                    .collect();
                file.pools.push(SyntheticPool {
                    user_id: p.user,
                    kind,
                    entries,
                    notes,
                });
            } else {
                let s: SkipLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
                file.skipped.push((s.user, s.skip));
            }
        }
        if file.pools.len() != header.users || file.skipped.len() != header.skipped {
            return Err(format!(
                "header promises {} pools and {} skips, found {} and {}",
                header.users,
                header.skipped,
                file.pools.len(),
                file.skipped.len()
            ));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_ndjson().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| DnnrError::io(path, e))?;
        Self::parse(BufReader::new(f)).map_err(|m| DnnrError::format(path, m))
    }
}
