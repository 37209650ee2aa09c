use serde::{Deserialize, Serialize};

/// How per-class F1 scores are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F1Average {
    #[default]
    Macro,
    /// Weighted by the number of true members of each class.
    Weighted,
}

impl std::str::FromStr for F1Average {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "macro" => Ok(F1Average::Macro),
            "weighted" => Ok(F1Average::Weighted),
            other => Err(format!("unknown F1 averaging {other:?} (macro|weighted)")),
        }
    }
}

/// F1 from raw counts; 0 when precision and recall are both undefined or zero.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Combines per-class F1 scores with their supports.
pub fn average_f1(scores: &[(f64, usize)], how: F1Average) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    match how {
        F1Average::Macro => scores.iter().map(|(f, _)| f).sum::<f64>() / scores.len() as f64,
        F1Average::Weighted => {
            let total: usize = scores.iter().map(|(_, s)| s).sum();
            if total == 0 {
                return 0.0;
            }
            scores.iter().map(|(f, s)| f * *s as f64).sum::<f64>() / total as f64
        }
    }
}

/// Confusion counts for a binary task where "positive" means selected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinaryConfusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryConfusion {
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.correct() as f64 / self.total() as f64
        }
    }

    /// F1 averaged over the positive and negative classes.
    pub fn f1(&self, how: F1Average) -> f64 {
        let positive = (f1(self.tp, self.fp, self.fn_), self.tp + self.fn_);
        let negative = (f1(self.tn, self.fn_, self.fp), self.tn + self.fp);
        average_f1(&[positive, negative], how)
    }
}
