use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic, with tied
/// scores counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dim("auc", (scores.len(), 1), (labels.len(), 1)));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 1) {
        return Err(Error::InvalidLabel { index, label });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric(format!(
            "score {s} is not comparable"
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks, doubled so tie groups stay integral
    let mut pos_rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                pos_rank_sum2 += twice_mid;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as u64;
    let twice_u = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / 2.0 / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch losses, plus per-fold AUCs for classification runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricLog {
    pub epochs: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_auc: Vec<f64>,
}

impl MetricLog {
    pub fn push(&mut self, train_loss: f64, val_loss: f64) {
        self.epochs.push(EpochRecord {
            epoch: self.epochs.len() + 1,
            train_loss,
            val_loss,
        });
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_loss)
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }

    /// First epoch (1-based) whose training loss is at or below `threshold`.
    pub fn epochs_to_train_loss(&self, threshold: f64) -> Option<usize> {
        self.epochs
            .iter()
            .find(|e| e.train_loss <= threshold)
            .map(|e| e.epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
        }
        out
    }
}
