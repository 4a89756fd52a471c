//! Bookkeeping around the weighted multi-task training loss
//! `L = a*L1 + b*L2 + g*L3 + d*L4 + e*L5`: training-log parsing, overfitting
//! detection and best-epoch selection. Component losses are inputs read from
//! logs; nothing here computes them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl LossWeights {
    pub fn uniform(w: f64) -> Self {
        Self {
            alpha: w,
            beta: w,
            gamma: w,
            delta: w,
            epsilon: w,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.alpha, self.beta, self.gamma, self.delta, self.epsilon]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "loss weights must be positive: {self:?}"
            )))
        }
    }
}

/// The five component losses, in log order: RPN class, RPN box, head class,
/// head box, mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub rpn_class: f64,
    pub rpn_bbox: f64,
    pub mrcnn_class: f64,
    pub mrcnn_bbox: f64,
    pub mrcnn_mask: f64,
}

impl LossComponents {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.rpn_class,
            self.rpn_bbox,
            self.mrcnn_class,
            self.mrcnn_bbox,
            self.mrcnn_mask,
        ]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            rpn_class: v[0],
            rpn_bbox: v[1],
            mrcnn_class: v[2],
            mrcnn_bbox: v[3],
            mrcnn_mask: v[4],
        }
    }
}

pub fn total_loss(w: &LossWeights, c: &LossComponents) -> f64 {
    w.as_array()
        .iter()
        .zip(c.as_array())
        .map(|(w, l)| w * l)
        .sum()
}

pub fn scale_weights(w: &LossWeights, n: f64) -> Result<LossWeights> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight scale must be positive, got {n}"
        )));
    }
    Ok(LossWeights {
        alpha: w.alpha * n,
        beta: w.beta * n,
        gamma: w.gamma * n,
        delta: w.delta * n,
        epsilon: w.epsilon * n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochEntry {
    pub epoch: u32,
    pub train: Option<LossComponents>,
    pub val: Option<LossComponents>,
}

/// Per-epoch losses in increasing epoch order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossSeries {
    pub weights: LossWeights,
    pub entries: Vec<EpochEntry>,
}

impl LossSeries {
    pub fn train_totals(&self) -> Vec<(u32, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.train.map(|c| (e.epoch, total_loss(&self.weights, &c))))
            .collect()
    }

    pub fn val_totals(&self) -> Vec<(u32, f64)> {
        self.entries
            .iter()
            .filter_map(|e| e.val.map(|c| (e.epoch, total_loss(&self.weights, &c))))
            .collect()
    }
}

pub const LOG_HEADER: [&str; 7] = [
    "epoch",
    "split",
    "rpn_class",
    "rpn_bbox",
    "mrcnn_class",
    "mrcnn_bbox",
    "mrcnn_mask",
];

/// Parses `epoch,split,rpn_class,rpn_bbox,mrcnn_class,mrcnn_bbox,mrcnn_mask`
/// rows where `split` is `train` or `val`. Row numbers in errors count the
/// header as row 1.
pub fn parse_training_log(text: &str, weights: LossWeights) -> Result<LossSeries> {
    weights.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if !header.is_empty() && header.iter().ne(LOG_HEADER) {
        return Err(Error::TrainingLog {
            row: 1,
            message: format!("expected header {}", LOG_HEADER.join(",")),
        });
    }
    let mut by_epoch: BTreeMap<u32, EpochEntry> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let err = |message: String| Error::TrainingLog { row, message };
        let epoch: u32 = rec[0]
            .parse()
            .map_err(|_| err(format!("bad epoch {:?}", &rec[0])))?;
        let mut v = [0.0f64; 5];
        for (k, slot) in v.iter_mut().enumerate() {
            let s = &rec[k + 2];
            *slot = s
                .parse()
                .map_err(|_| err(format!("bad {} value {s:?}", LOG_HEADER[k + 2])))?;
            if !slot.is_finite() || *slot < 0.0 {
                return Err(err(format!(
                    "{} must be finite and non-negative, got {s}",
                    LOG_HEADER[k + 2]
                )));
            }
        }
        let entry = by_epoch.entry(epoch).or_insert(EpochEntry {
            epoch,
            train: None,
            val: None,
        });
        let slot = match &rec[1] {
            "train" => &mut entry.train,
            "val" => &mut entry.val,
            other => return Err(err(format!("split must be train or val, got {other:?}"))),
        };
        if slot.is_some() {
            return Err(err(format!("duplicate {} row for epoch {epoch}", &rec[1])));
        }
        *slot = Some(LossComponents::from_array(v));
    }
    Ok(LossSeries {
        weights,
        entries: by_epoch.into_values().collect(),
    })
}

fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    v.windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}

/// First epoch at which the moving average (over `window` epochs) of the
/// training total is still falling while that of the validation total has
/// stopped falling, i.e. its slope is `>= slope_tol`. Only epochs carrying
/// both splits are considered; at least `2 * window` are required.
pub fn detect_overfit(s: &LossSeries, window: usize, slope_tol: f64) -> Result<Option<u32>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let both: Vec<(u32, f64, f64)> = s
        .entries
        .iter()
        .filter_map(|e| match (e.train, e.val) {
            (Some(t), Some(v)) => Some((
                e.epoch,
                total_loss(&s.weights, &t),
                total_loss(&s.weights, &v),
            )),
            _ => None,
        })
        .collect();
    if both.len() < 2 * window {
        return Err(Error::InsufficientData(format!(
            "overfitting check needs {} epochs with train and val losses, got {}",
            2 * window,
            both.len()
        )));
    }
    let train: Vec<f64> = both.iter().map(|b| b.1).collect();
    let val: Vec<f64> = both.iter().map(|b| b.2).collect();
    let (mt, mv) = (moving_average(&train, window), moving_average(&val, window));
    // mt[i] averages epochs i..i+window, so slope i compares the windows
    // ending at epoch indices i + window - 2 and i + window - 1.
    for i in 1..mt.len() {
        if mt[i] - mt[i - 1] < 0.0 && mv[i] - mv[i - 1] >= slope_tol {
            return Ok(Some(both[i + window - 1].0));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MinTrainTotal,
    MinValTotal,
    MaxExternalMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Selection {
    pub epoch: u32,
    pub criterion: Criterion,
    pub value: f64,
}

/// Arg-min of a loss total or arg-max of an external per-epoch metric such
/// as a fold's mAP. Ties go to the earliest epoch.
pub fn select_best_epoch(
    s: &LossSeries,
    criterion: Criterion,
    metrics: Option<&BTreeMap<u32, f64>>,
) -> Result<Selection> {
    let (candidates, maximise): (Vec<(u32, f64)>, bool) = match criterion {
        Criterion::MinTrainTotal => (s.train_totals(), false),
        Criterion::MinValTotal => (s.val_totals(), false),
        Criterion::MaxExternalMetric => {
            let m = metrics.ok_or_else(|| {
                Error::InvalidArgument("max_external_metric needs a per-epoch metric table".into())
            })?;
            (m.iter().map(|(&e, &v)| (e, v)).collect(), true)
        }
    };
    let mut best: Option<(u32, f64)> = None;
    for (epoch, v) in candidates {
        let better = match best {
            None => true,
            Some((_, b)) if maximise => v > b,
            Some((_, b)) => v < b,
        };
        if better {
            best = Some((epoch, v));
        }
    }
    let (epoch, value) =
        best.ok_or_else(|| Error::InsufficientData("no epochs to select from".into()))?;
    Ok(Selection {
        epoch,
        criterion,
        value,
    })
}
