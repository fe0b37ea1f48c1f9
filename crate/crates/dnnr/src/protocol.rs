//! Per-user train/test split.
//!
//! A user's most recent impression is held out for testing. Training
//! positives are the history columns of all the user's impressions followed,
//! when clicks are merged, by the ids clicked in the earlier impressions.
//! Held-out candidates that already appear among the training positives are
//! dropped from the test side.

use std::collections::BTreeSet;

use dnnr_core::mind::{records_by_user, Candidate, OrderedIds};
use dnnr_core::ImpressionRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSplit {
    pub user_id: String,
    /// Training positives, oldest first.
    pub history: Vec<String>,
    /// Indices of the training impressions, in time order.
    pub train_records: Vec<usize>,
    pub test_record: usize,
    pub test: Vec<Candidate>,
    /// Held-out candidates removed because they were in `history`.
    pub dropped_from_test: usize,
}

impl UserSplit {
    pub fn test_ids(&self) -> Vec<String> {
        self.test.iter().map(|c| c.news_id.clone()).collect()
    }
}

/// Splits every user, ordered by user id.
pub fn split_users(records: &[ImpressionRecord], merge_clicks: bool) -> Vec<UserSplit> {
    records_by_user(records)
        .into_iter()
        .map(|(user, idx)| {
            let (&test_record, train) = idx.split_last().expect("every user has a record");
            let mut history = OrderedIds::default();
            for &i in &idx {
                for id in &records[i].history {
                    history.push(id);
                }
            }
            if merge_clicks {
                for &i in train {
                    for id in records[i].clicked() {
                        history.push(id);
                    }
                }
            }
            let history = history.into_vec();
            let known: BTreeSet<&str> = history.iter().map(String::as_str).collect();
            let all = &records[test_record].candidates;
            let test: Vec<Candidate> = all
                .iter()
                .filter(|c| !known.contains(c.news_id.as_str()))
                .cloned()
                .collect();
            UserSplit {
                user_id: user.to_string(),
                dropped_from_test: all.len() - test.len(),
                history,
                train_records: train.to_vec(),
                test_record,
                test,
            }
        })
        .collect()
}
