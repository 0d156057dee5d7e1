use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::gen::{HmmSpec, ObsMatrix};
use crate::hqmm::{self, DensityMatrix, StackedKraus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trainer {
    Ila,
    Rila,
    Em,
}

impl Trainer {
    pub fn name(self) -> &'static str {
        match self {
            Trainer::Ila => "ila",
            Trainer::Rila => "rila",
            Trainer::Em => "em",
        }
    }
}

/// Training-batch log-likelihood after one iteration. For EM, `batch` is 0
/// and each row is one EM sweep of the best restart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRow {
    pub batch: usize,
    pub iteration: usize,
    pub batch_ll: f64,
}

/// Everything a training run produces.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub trainer: Trainer,
    pub seed: u64,
    /// Batch log-likelihood before the first iteration of each batch.
    pub start_ll: Vec<f64>,
    pub iterations: Vec<IterationRow>,
    /// Validation log-likelihood at the end of each batch.
    pub validation_ll: Vec<f64>,
    pub best_validation_ll: f64,
    pub kappa_best: StackedKraus,
    /// Fitted classical model (EM only).
    pub hmm: Option<HmmSpec>,
    /// Log-likelihood of `kappa_best` on the training rows the trainer used.
    pub train_ll_final: f64,
    pub train_seqs: usize,
    pub train_obs: usize,
    pub val_seqs: usize,
    pub val_obs: usize,
    /// Largest `max|κ†κ - I|` seen after any update or selection.
    pub max_deviation: f64,
    pub wall_time: Duration,
}

fn fmt_ll(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn ll_value(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(fmt_ll(v))
    }
}

fn per(v: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        v / count as f64
    }
}

impl RunRecord {
    pub(crate) fn new(trainer: Trainer, seed: u64, kappa: &StackedKraus) -> Self {
        Self {
            trainer,
            seed,
            start_ll: vec![],
            iterations: vec![],
            validation_ll: vec![],
            best_validation_ll: f64::NEG_INFINITY,
            kappa_best: kappa.clone(),
            hmm: None,
            train_ll_final: f64::NEG_INFINITY,
            train_seqs: 0,
            train_obs: 0,
            val_seqs: 0,
            val_obs: 0,
            max_deviation: kappa.completeness_deviation(),
            wall_time: Duration::ZERO,
        }
    }

    pub(crate) fn note_deviation(&mut self, d: f64) {
        self.max_deviation = self.max_deviation.max(d);
    }

    pub(crate) fn finish_batch(&mut self, h: f64, kappa: &StackedKraus) {
        self.validation_ll.push(h);
        if h > self.best_validation_ll {
            self.best_validation_ll = h;
            self.kappa_best = kappa.clone();
        }
    }

    pub(crate) fn finalize(&mut self, y: &ObsMatrix, y_val: &ObsMatrix, rho0: &DensityMatrix, started: Instant) {
        self.train_ll_final = hqmm::batch_loglik_unchecked(&self.kappa_best, rho0, y);
        self.train_seqs = y.n_seq();
        self.train_obs = y.n_obs();
        self.val_seqs = y_val.n_seq();
        self.val_obs = y_val.n_obs();
        self.wall_time = started.elapsed();
    }

    pub fn train_ll_per_obs(&self) -> f64 {
        per(self.train_ll_final, self.train_obs)
    }

    pub fn val_ll_per_obs(&self) -> f64 {
        per(self.best_validation_ll, self.val_obs)
    }

    /// Equal in every field except wall time.
    pub fn same_result(&self, other: &RunRecord) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.trainer == other.trainer
            && self.seed == other.seed
            && bits(&self.start_ll) == bits(&other.start_ll)
            && self.iterations == other.iterations
            && bits(&self.validation_ll) == bits(&other.validation_ll)
            && self.best_validation_ll.to_bits() == other.best_validation_ll.to_bits()
            && self.kappa_best == other.kappa_best
            && self.hmm == other.hmm
            && self.train_ll_final.to_bits() == other.train_ll_final.to_bits()
    }

    /// `batch,iteration,batch_ll,validation_ll`; the validation column is
    /// filled on the last row of each batch.
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from("batch,iteration,batch_ll,validation_ll\n");
        for (k, row) in self.iterations.iter().enumerate() {
            let last = self.iterations.get(k + 1).is_none_or(|next| next.batch != row.batch);
            let val = match (last, self.trainer) {
                (true, Trainer::Em) => fmt_ll(self.best_validation_ll),
                (true, _) => self.validation_ll.get(row.batch).map_or(String::new(), |v| fmt_ll(*v)),
                (false, _) => String::new(),
            };
            let _ = writeln!(out, "{},{},{},{val}", row.batch, row.iteration, fmt_ll(row.batch_ll));
        }
        out
    }

    /// Summary document. Contains no timing so it is reproducible byte for byte.
    pub fn summary(&self) -> Value {
        json!({
            "trainer": self.trainer.name(),
            "seed": self.seed,
            "train": {
                "sequences": self.train_seqs,
                "observations": self.train_obs,
                "ll_sum": ll_value(self.train_ll_final),
                "ll_per_obs": ll_value(self.train_ll_per_obs()),
            },
            "validation": {
                "sequences": self.val_seqs,
                "observations": self.val_obs,
                "ll_sum": ll_value(self.best_validation_ll),
                "ll_per_obs": ll_value(self.val_ll_per_obs()),
                "per_batch": self.validation_ll.iter().map(|v| ll_value(*v)).collect::<Vec<_>>(),
            },
            "batch_start_ll": self.start_ll.iter().map(|v| ll_value(*v)).collect::<Vec<_>>(),
            "max_completeness_deviation": self.max_deviation,
        })
    }
}

/// Scores, weights and selection of one resampling step.
#[derive(Clone, Debug, PartialEq)]
pub struct ResampleStep {
    pub batch: usize,
    pub iteration: usize,
    pub ll: Vec<f64>,
    pub weights: Vec<f64>,
    /// 0-based index of the selected proposal.
    pub chosen: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResampleTrace {
    pub steps: Vec<ResampleStep>,
}

impl ResampleTrace {
    /// `batch,iteration,proposal,ll,weight,chosen`, one row per proposal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch,iteration,proposal,ll,weight,chosen\n");
        for s in &self.steps {
            for (p, (l, w)) in s.ll.iter().zip(&s.weights).enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{p},{},{w},{}",
                    s.batch,
                    s.iteration,
                    fmt_ll(*l),
                    (p == s.chosen) as u8
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::CMatrix;

    fn record() -> RunRecord {
        let k = StackedKraus::new(1, 1, 1, CMatrix::identity(1)).unwrap();
        let mut r = RunRecord::new(Trainer::Rila, 3, &k);
        r.start_ll = vec![-5.0, -4.0];
        r.iterations = vec![
            IterationRow { batch: 0, iteration: 0, batch_ll: -4.5 },
            IterationRow { batch: 0, iteration: 1, batch_ll: -4.0 },
            IterationRow { batch: 1, iteration: 0, batch_ll: f64::NEG_INFINITY },
        ];
        r.finish_batch(-2.0, &k);
        r.finish_batch(-1.5, &k);
        r.val_obs = 3;
        r
    }

    #[test]
    fn iteration_csv_layout() {
        let csv = record().iterations_csv();
        assert_eq!(
            csv,
            "batch,iteration,batch_ll,validation_ll\n0,0,-4.5,\n0,1,-4,-2\n1,0,-inf,-1.5\n"
        );
    }

    #[test]
    fn summary_marks_impossible_values() {
        let r = record();
        let s = r.summary();
        assert_eq!(s["train"]["ll_sum"], "-inf");
        assert_eq!(s["validation"]["ll_sum"], -1.5);
        assert_eq!(s["validation"]["ll_per_obs"], -0.5);
    }

    #[test]
    fn resample_csv_flags_the_choice() {
        let t = ResampleTrace {
            steps: vec![ResampleStep {
                batch: 0,
                iteration: 2,
                ll: vec![-1.0, -2.0],
                weights: vec![0.75, 0.25],
                chosen: 1,
            }],
        };
        assert_eq!(
            t.to_csv(),
            "batch,iteration,proposal,ll,weight,chosen\n0,2,0,-1,0.75,0\n0,2,1,-2,0.25,1\n"
        );
    }
}
