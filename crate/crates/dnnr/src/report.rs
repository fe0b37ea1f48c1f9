//! Evaluation reports: a JSON document (`dnnr-eval-report`, version 1) and a
//! per-user CSV with columns
//! `user_id,sampler,feature_set,max_samples,auc,skip_reason`.

use std::path::Path;

use dnnr_core::metrics::Summary;
use serde::{Deserialize, Serialize};

use crate::error::{DnnrError, Result};
use crate::fsutil;

pub const FORMAT: &str = "dnnr-eval-report";
pub const VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 6] = [
    "user_id",
    "sampler",
    "feature_set",
    "max_samples",
    "auc",
    "skip_reason",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub sampler: String,
    pub feature_set: String,
    pub max_samples: usize,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub merge_clicks: bool,
    pub exclude_test_candidates: bool,
    pub embedding: String,
    pub input_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl From<Summary> for Stats {
    fn from(s: Summary) -> Self {
        Stats {
            count: s.count,
            mean: s.mean,
            std: s.std,
            min: s.min,
            q1: s.q1,
            median: s.median,
            q3: s.q3,
            max: s.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub users: usize,
    pub evaluated: usize,
    pub skipped: usize,
    pub failed: usize,
    pub individual_auc: Option<Stats>,
    pub group_auc: Option<f64>,
    /// Share of trained users whose last-epoch loss is at most the first.
    pub loss_non_increasing: Option<f64>,
}

/// Wall-clock seconds per stage. `None` when the stage did not run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub users: usize,
    pub pooling_seconds: Option<f64>,
    pub train_seconds: Option<f64>,
    pub predict_seconds: Option<f64>,
    pub pooling_minutes_per_4000_users: Option<f64>,
    pub train_minutes_per_4000_users: Option<f64>,
    pub predict_minutes_per_4000_users: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResult {
    pub user_id: String,
    pub auc: Option<f64>,
    pub skip_reason: Option<String>,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub version: u32,
    pub run: RunMeta,
    pub summary: ReportSummary,
    pub timing: Timing,
    pub users: Vec<UserResult>,
}

impl EvalReport {
    pub fn aucs(&self) -> Vec<f64> {
        self.users.iter().filter_map(|u| u.auc).collect()
    }

    pub fn mean_auc(&self) -> Option<f64> {
        self.summary.individual_auc.as_ref().map(|s| s.mean)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for u in &self.users {
            w.write_record([
                u.user_id.as_str(),
                &self.run.sampler,
                &self.run.feature_set,
                &self.run.max_samples.to_string(),
                &u.auc.map(|a| a.to_string()).unwrap_or_default(),
                u.skip_reason.as_deref().unwrap_or(""),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 fields")
    }

    /// File stem used inside a reports directory.
    pub fn stem(&self) -> String {
        format!(
            "{}-{}-m{}",
            self.run.sampler,
            self.run.feature_set.to_lowercase(),
            self.run.max_samples
        )
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let stem = self.stem();
        fsutil::write_atomic(&dir.join(format!("{stem}.json")), self.to_json().as_bytes())?;
        fsutil::write_atomic(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read(path)?;
        let r: EvalReport =
            serde_json::from_slice(&bytes).map_err(|e| DnnrError::format(path, e.to_string()))?;
        if r.format != FORMAT || r.version != VERSION {
            return Err(DnnrError::format(
                path,
                format!("not a {FORMAT} v{VERSION} file"),
            ));
        }
        Ok(r)
    }
}
