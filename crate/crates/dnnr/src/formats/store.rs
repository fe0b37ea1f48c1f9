//! Ingested corpus as newline-delimited JSON.
//!
//! Header `{"format":"dnnr-store","version":1,"news":N,"behaviors":M}`, then
//! `N` lines `{"news":[id,type,category,title]}` in catalog order, then `M`
//! lines `{"behavior":row}` where `row` is the behaviors.tsv line that
//! reproduces the record exactly.

use std::io::{BufRead, BufReader};
use std::path::Path;

use dnnr_core::mind::parse_behavior_line;
use dnnr_core::NewsItem;
use serde::{Deserialize, Serialize};

use crate::error::{DnnrError, Result};
use crate::fsutil;
use crate::ingest::Corpus;

pub const FORMAT: &str = "dnnr-store";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    news: usize,
    behaviors: usize,
}

#[derive(Serialize, Deserialize)]
struct NewsLine {
    news: [String; 4],
}

#[derive(Serialize, Deserialize)]
struct BehaviorLine {
    behavior: String,
}

fn line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("plain structs serialize");
    s.push('\n');
    s
}

pub fn to_ndjson(corpus: &Corpus) -> String {
    let mut out = line(&Header {
        format: FORMAT.into(),
        version: VERSION,
        news: corpus.news.len(),
        behaviors: corpus.behaviors.len(),
    });
    for n in &corpus.news {
        out.push_str(&line(&NewsLine {
            news: [
                n.news_id.clone(),
                n.news_type.clone(),
                n.news_category.clone(),
                n.title.clone(),
            ],
        }));
    }
    for r in &corpus.behaviors {
        out.push_str(&line(&BehaviorLine {
            behavior: r.to_tsv_row(),
        }));
    }
    out
}

pub fn parse(text: impl BufRead) -> Result<Corpus, String> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or("empty store file")?
        .map_err(|e| e.to_string())?;
    let header: Header = serde_json::from_str(&first).map_err(|e| format!("line 1: {e}"))?;
    if header.format != FORMAT {
        return Err(format!("not a store file (format `{}`)", header.format));
    }
    if header.version != VERSION {
        return Err(format!("unsupported version {}", header.version));
    }
    let mut corpus = Corpus::default();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let at = |e: String| format!("line {}: {e}", i + 2);
        if corpus.news.len() < header.news {
            let NewsLine {
                news: [news_id, news_type, news_category, title],
            } = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
            corpus.news.push(NewsItem {
                news_id,
                news_type,
                news_category,
                title,
            });
        } else {
            let b: BehaviorLine = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
            corpus
                .behaviors
                .push(parse_behavior_line(&b.behavior).map_err(|e| at(e.to_string()))?);
        }
    }
    if corpus.news.len() != header.news || corpus.behaviors.len() != header.behaviors {
        return Err(format!(
            "header promises {} news and {} behaviors, found {} and {}",
            header.news,
            header.behaviors,
            corpus.news.len(),
            corpus.behaviors.len()
        ));
    }
    Ok(corpus)
}

pub fn save(path: &Path, corpus: &Corpus) -> Result<()> {
    fsutil::write_atomic(path, to_ndjson(corpus).as_bytes())
}

pub fn load(path: &Path) -> Result<Corpus> {
    let f = std::fs::File::open(path).map_err(|e| DnnrError::io(path, e))?;
    parse(BufReader::new(f)).map_err(|m| DnnrError::format(path, m))
}
