//! Trainers: ILA (greedy row-pair rotations), RILA (filtering, proposals and
//! likelihood-weighted resampling) and a Baum-Welch baseline.

mod em;
mod record;

use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cxmat::{CMatrix, C64};
use crate::error::{Error, Result};
use crate::filter::{rcr_ef, FilterOptions, FilterStats};
use crate::gen::ObsMatrix;
use crate::hqmm::{self, DensityMatrix, StackedKraus};
use crate::optim::{apply_update_in_place, maximize, Objective, ObjectiveKind, SolverConfig};

pub use em::{em_rho0, train_em, EmConfig};
pub use record::{IterationRow, ResampleStep, ResampleTrace, RunRecord, Trainer};

/// Random valid stacked Kraus matrix: complex Gaussian entries, then
/// Gram-Schmidt on the columns.
pub fn random_kraus(n: usize, m: usize, w: usize, rng: &mut impl Rng) -> StackedKraus {
    let rows = n * m * w;
    assert!(rows >= n && n > 0, "need n·m·w >= n > 0");
    let g = CMatrix::from_fn(rows, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let q = g
        .orthonormalize_columns()
        .expect("Gaussian columns are independent with probability one");
    StackedKraus::new(n, m, w, q).expect("shape matches by construction")
}

/// How resampling weights are derived from proposal scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResampleScheme {
    /// `w ∝ exp(L - max L)`: better proposals get more weight.
    #[default]
    Softmax,
    /// `w ∝ exp(-L - min(-L))` taken literally, which favors worse proposals.
    Literal,
}

/// Gap below the worst finite score assigned to `-∞` proposals.
const NEG_INF_GAP: f64 = 50.0;

/// Normalized resampling weights. `-∞` scores are floored to the worst finite
/// score minus 50; if every score is `-∞` the weights are uniform.
pub fn resample_weights(ll: &[f64], scheme: ResampleScheme) -> Vec<f64> {
    let p = ll.len();
    if p == 0 {
        return vec![];
    }
    let finite_min = ll.iter().copied().filter(|v| v.is_finite()).reduce(f64::min);
    let Some(floor) = finite_min.map(|m| m - NEG_INF_GAP) else {
        return vec![1.0 / p as f64; p];
    };
    let l: Vec<f64> = ll.iter().map(|&v| if v.is_finite() { v } else { floor }).collect();
    let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = l.iter().copied().fold(f64::INFINITY, f64::min);
    // both exponents are shifted so the largest term is exp(0)
    let raw: Vec<f64> = match scheme {
        ResampleScheme::Softmax => l.iter().map(|v| (v - max).exp()).collect(),
        ResampleScheme::Literal => l.iter().map(|v| (min - v).exp()).collect(),
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Sequences per batch (`b`).
    pub batch_size: usize,
    /// Number of batches (`B`).
    pub batches: usize,
    /// Iterations per batch (`I`). ILA runs this many single updates.
    pub iterations: usize,
    /// Proposals per iteration (`P`, RILA only).
    pub proposals: usize,
    /// Rows removed by the filter (`C`, RILA only).
    pub filter_count: usize,
    pub filter: FilterOptions,
    pub objective: ObjectiveKind,
    pub solver: SolverConfig,
    pub resample: ResampleScheme,
    /// Start each proposal from the previous proposal's result instead of the
    /// iteration's base.
    pub chain_proposals: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 5,
            batches: 4,
            iterations: 6,
            proposals: 10,
            filter_count: 0,
            filter: FilterOptions::default(),
            objective: ObjectiveKind::Regular,
            solver: SolverConfig::default(),
            resample: ResampleScheme::Softmax,
            chain_proposals: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// ILA settings that spend the same number of solver calls as this RILA
    /// configuration: `I·P` single updates per batch.
    pub fn ila_matched(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations * self.proposals,
            proposals: 1,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.proposals == 0 {
            return Err(Error::Config("need at least one proposal per iteration".into()));
        }
        if let ObjectiveKind::L1 { lambda } = self.objective {
            if !(lambda >= 0.0) {
                return Err(Error::Config(format!("penalty weight {lambda} must be >= 0")));
            }
        }
        self.solver.validate()
    }
}

fn completeness(k: &StackedKraus) -> f64 {
    k.completeness_deviation()
}

/// Uniform unordered pair `i < j` of distinct rows.
fn random_pair(rng: &mut impl Rng, rows: usize) -> (usize, usize) {
    let v = rand::seq::index::sample(rng, rows, 2);
    let (a, b) = (v.index(0), v.index(1));
    (a.min(b), a.max(b))
}

struct Setup<'a> {
    y: &'a ObsMatrix,
    y_val: &'a ObsMatrix,
    rho0: &'a DensityMatrix,
    cfg: &'a TrainConfig,
}

impl Setup<'_> {
    fn check(&self, kappa: &StackedKraus, usable_rows: usize) -> Result<()> {
        self.cfg.validate()?;
        hqmm::validate(kappa, hqmm::DEFAULT_TOL).into_result()?;
        if self.rho0.dim() != kappa.n() {
            return Err(Error::Shape(format!(
                "initial state has dimension {}, operators act on {}",
                self.rho0.dim(),
                kappa.n()
            )));
        }
        hqmm::check_alphabet(kappa, self.y)?;
        hqmm::check_alphabet(kappa, self.y_val)?;
        if kappa.rows() < 2 && self.cfg.iterations > 0 {
            return Err(Error::Config("κ needs at least two rows to rotate".into()));
        }
        if self.cfg.batches > 0 && self.cfg.batch_size > usable_rows {
            return Err(Error::Config(format!(
                "batch size {} exceeds the {usable_rows} available training rows",
                self.cfg.batch_size
            )));
        }
        Ok(())
    }
}

/// Outcome of one proposal: the candidate `κ_p` and its objective value `L_p`.
struct Proposal {
    kappa: StackedKraus,
    score: f64,
    deviation: f64,
}

/// One maximize-and-maybe-accept step on rows `(i, j)` of `base`.
fn propose(obj: &Objective, base: &StackedKraus, i: usize, j: usize, solver: &SolverConfig) -> Proposal {
    let res = maximize(obj, base, i, j, solver).expect("inputs validated before training");
    let mut kappa = base.clone();
    let mut score = res.start;
    if res.value > res.start {
        apply_update_in_place(&mut kappa, res.theta, i, j).expect("row pair in range");
        score = res.value;
    }
    let deviation = completeness(&kappa);
    Proposal { kappa, score, deviation }
}

/// Greedy training: each iteration rotates one random row pair to a local optimum.
pub fn train_ila(
    y: &ObsMatrix,
    y_val: &ObsMatrix,
    kappa_init: &StackedKraus,
    rho0: &DensityMatrix,
    cfg: &TrainConfig,
) -> Result<RunRecord> {
    let setup = Setup { y, y_val, rho0, cfg };
    setup.check(kappa_init, y.n_seq())?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = RunRecord::new(Trainer::Ila, cfg.seed, kappa_init);
    let mut kappa = kappa_init.clone();
    let val_obj = Objective::regular(y_val, rho0);
    for batch in 0..cfg.batches {
        let idx = rand::seq::index::sample(&mut rng, y.n_seq(), cfg.batch_size).into_vec();
        let yb = y.select_rows(&idx);
        let obj = Objective::new(cfg.objective, &yb, rho0)?;
        let plain = Objective::regular(&yb, rho0);
        rec.start_ll.push(plain.loglik(&kappa));
        for iteration in 0..cfg.iterations {
            let (i, j) = random_pair(&mut rng, kappa.rows());
            let p = propose(&obj, &kappa, i, j, &cfg.solver);
            rec.note_deviation(p.deviation);
            kappa = p.kappa;
            rec.iterations.push(IterationRow {
                batch,
                iteration,
                batch_ll: plain.loglik(&kappa),
            });
        }
        rec.finish_batch(val_obj.loglik(&kappa), &kappa);
    }
    rec.finalize(y, y_val, rho0, started);
    Ok(rec)
}

/// Robust training: filter, then per iteration run `P` proposals and resample one.
pub fn train_rila(
    y: &ObsMatrix,
    y_val: &ObsMatrix,
    kappa_init: &StackedKraus,
    rho0: &DensityMatrix,
    cfg: &TrainConfig,
) -> Result<(RunRecord, FilterStats, ResampleTrace)> {
    if cfg.filter_count >= y.n_seq() && cfg.filter_count > 0 {
        return Err(Error::Config(format!(
            "cannot filter {} of {} rows",
            cfg.filter_count,
            y.n_seq()
        )));
    }
    let (clean, stats) = rcr_ef(y, cfg.filter_count, cfg.filter);
    let setup = Setup { y: &clean, y_val, rho0, cfg };
    setup.check(kappa_init, clean.n_seq())?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = RunRecord::new(Trainer::Rila, cfg.seed, kappa_init);
    let mut trace = ResampleTrace::default();
    let mut kappa = kappa_init.clone();
    let val_obj = Objective::regular(y_val, rho0);
    for batch in 0..cfg.batches {
        let idx = rand::seq::index::sample(&mut rng, clean.n_seq(), cfg.batch_size).into_vec();
        let yb = clean.select_rows(&idx);
        let obj = Objective::new(cfg.objective, &yb, rho0)?;
        let plain = Objective::regular(&yb, rho0);
        rec.start_ll.push(plain.loglik(&kappa));
        for iteration in 0..cfg.iterations {
            let pairs: Vec<(usize, usize)> =
                (0..cfg.proposals).map(|_| random_pair(&mut rng, kappa.rows())).collect();
            let proposals: Vec<Proposal> = if cfg.chain_proposals {
                let mut out: Vec<Proposal> = Vec::with_capacity(pairs.len());
                for &(i, j) in &pairs {
                    let base = out.last().map_or(&kappa, |p| &p.kappa);
                    let p = propose(&obj, base, i, j, &cfg.solver);
                    out.push(p);
                }
                out
            } else {
                pairs
                    .par_iter()
                    .map(|&(i, j)| propose(&obj, &kappa, i, j, &cfg.solver))
                    .collect()
            };
            let scores: Vec<f64> = proposals.iter().map(|p| p.score).collect();
            let weights = resample_weights(&scores, cfg.resample);
            let chosen = WeightedIndex::new(&weights)
                .expect("weights are a probability vector")
                .sample(&mut rng);
            for p in &proposals {
                rec.note_deviation(p.deviation);
            }
            kappa = proposals.into_iter().nth(chosen).expect("chosen < P").kappa;
            rec.note_deviation(completeness(&kappa));
            trace.steps.push(ResampleStep {
                batch,
                iteration,
                ll: scores,
                weights,
                chosen,
            });
            rec.iterations.push(IterationRow {
                batch,
                iteration,
                batch_ll: plain.loglik(&kappa),
            });
        }
        rec.finish_batch(val_obj.loglik(&kappa), &kappa);
    }
    rec.finalize(&clean, y_val, rho0, started);
    Ok((rec, stats, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::testutil::rng;
    use crate::gen::{benchmark, corrupt, generate, Benchmark, CorruptionPolicy};
    use crate::hqmm::validate;
    use proptest::prelude::*;

    fn close5(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 5e-6)
    }

    #[test]
    fn weight_examples() {
        let sym = [-10.0; 3];
        for s in [ResampleScheme::Softmax, ResampleScheme::Literal] {
            assert!(close5(&resample_weights(&sym, s), &[1.0 / 3.0; 3]));
        }
        let l = [-1.0, -2.0, -3.0];
        assert!(close5(&resample_weights(&l, ResampleScheme::Softmax), &[0.66524, 0.24473, 0.09003]));
        assert!(close5(&resample_weights(&l, ResampleScheme::Literal), &[0.09003, 0.24473, 0.66524]));
    }

    #[test]
    fn weights_with_impossible_proposals() {
        let w = resample_weights(&[f64::NEG_INFINITY; 4], ResampleScheme::Softmax);
        assert_eq!(w, vec![0.25; 4]);
        let w = resample_weights(&[-1.0, f64::NEG_INFINITY], ResampleScheme::Softmax);
        // the impossible proposal sits 50 nats below the other one
        assert!((w[1] - (-50f64).exp() / (1.0 + (-50f64).exp())).abs() < 1e-30);
    }

    proptest! {
        #[test]
        fn weights_form_a_distribution(l in proptest::collection::vec(-1e4f64..0.0, 1..20), literal in any::<bool>()) {
            let scheme = if literal { ResampleScheme::Literal } else { ResampleScheme::Softmax };
            let w = resample_weights(&l, scheme);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&v| (0.0..=1.0).contains(&v)));
            if !literal {
                let arg = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
                let best = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(l[arg(&w)], best);
            }
        }
    }

    #[test]
    fn random_kraus_is_valid() {
        let mut r = rng(1);
        for (n, m, w) in [(1, 1, 1), (2, 4, 1), (3, 2, 2), (8, 8, 1)] {
            let k = random_kraus(n, m, w, &mut r);
            assert!(validate(&k, 1e-12).is_valid());
            assert_eq!(k.rows(), n * m * w);
        }
    }

    fn m2010_data(seed: u64) -> (ObsMatrix, ObsMatrix, DensityMatrix) {
        let model = benchmark(Benchmark::M2010);
        let all = generate(&model, 35, 60, seed).unwrap();
        let train = all.select_rows(&(0..30).collect::<Vec<_>>());
        let val = all.select_rows(&(30..35).collect::<Vec<_>>());
        (train, val, model.rho0())
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batches: 2,
            iterations: 3,
            proposals: 4,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_iterations_keep_kappa() {
        let (y, yv, rho0) = m2010_data(1);
        let k = random_kraus(2, 4, 1, &mut rng(2));
        let cfg = TrainConfig { iterations: 0, ..small_cfg() };
        let rec = train_ila(&y, &yv, &k, &rho0, &cfg).unwrap();
        assert!(rec.iterations.is_empty());
        assert_eq!(rec.start_ll.len(), 2);
        assert_eq!(rec.kappa_best, k);
        let (rec, _, trace) = train_rila(&y, &yv, &k, &rho0, &cfg).unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(rec.kappa_best, k);
    }

    #[test]
    fn ila_trace_is_monotone_within_batches() {
        let (y, yv, rho0) = m2010_data(3);
        let k = random_kraus(2, 4, 1, &mut rng(4));
        for objective in [ObjectiveKind::Regular, ObjectiveKind::L1 { lambda: 0.05 }] {
            let cfg = TrainConfig { objective, iterations: 8, ..small_cfg() };
            let rec = train_ila(&y, &yv, &k, &rho0, &cfg).unwrap();
            for b in 0..cfg.batches {
                let mut prev = rec.start_ll[b];
                for row in rec.iterations.iter().filter(|r| r.batch == b) {
                    assert!(row.batch_ll >= prev - 1e-9);
                    prev = row.batch_ll;
                }
            }
            assert!(rec.max_deviation < 1e-9);
        }
    }

    #[test]
    fn trainers_are_deterministic() {
        let (y, yv, rho0) = m2010_data(5);
        let k = random_kraus(2, 4, 1, &mut rng(6));
        let cfg = small_cfg();
        let a = train_ila(&y, &yv, &k, &rho0, &cfg).unwrap();
        let b = train_ila(&y, &yv, &k, &rho0, &cfg).unwrap();
        assert!(a.same_result(&b));
        let (a, _, ta) = train_rila(&y, &yv, &k, &rho0, &cfg).unwrap();
        let (b, _, tb) = train_rila(&y, &yv, &k, &rho0, &cfg).unwrap();
        assert!(a.same_result(&b));
        assert_eq!(ta, tb);
    }

    #[test]
    fn rila_bookkeeping() {
        let (y, yv, rho0) = m2010_data(7);
        let k = random_kraus(2, 4, 1, &mut rng(8));
        let cfg = small_cfg();
        let (rec, stats, trace) = train_rila(&y, &yv, &k, &rho0, &cfg).unwrap();
        assert_eq!(rec.iterations.len(), cfg.batches * cfg.iterations);
        assert_eq!(trace.steps.len(), cfg.batches * cfg.iterations);
        assert_eq!(rec.validation_ll.len(), cfg.batches);
        let best = rec.validation_ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(rec.best_validation_ll, best);
        assert!(validate(&rec.kappa_best, 1e-9).is_valid());
        assert!(stats.passthrough);
        for s in &trace.steps {
            assert_eq!(s.ll.len(), cfg.proposals);
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(s.chosen < cfg.proposals);
        }
        let val = Objective::regular(&yv, &rho0).loglik(&rec.kappa_best);
        assert_eq!(val, rec.best_validation_ll);
    }

    #[test]
    fn single_proposal_matches_ila_step_structure() {
        let (y, yv, rho0) = m2010_data(9);
        let k = random_kraus(2, 4, 1, &mut rng(10));
        let cfg = TrainConfig { proposals: 1, ..small_cfg() };
        let (rec, _, trace) = train_rila(&y, &yv, &k, &rho0, &cfg).unwrap();
        assert!(trace.steps.iter().all(|s| s.weights == vec![1.0] && s.chosen == 0));
        // with one proposal every accepted step is an improvement
        for b in 0..cfg.batches {
            let mut prev = rec.start_ll[b];
            for row in rec.iterations.iter().filter(|r| r.batch == b) {
                assert!(row.batch_ll >= prev - 1e-9);
                prev = row.batch_ll;
            }
        }
    }

    #[test]
    fn rila_never_trains_on_filtered_rows() {
        let model = benchmark(Benchmark::M2010);
        let all = generate(&model, 35, 60, 11).unwrap();
        let train = all.select_rows(&(0..30).collect::<Vec<_>>());
        let val = all.select_rows(&(30..35).collect::<Vec<_>>());
        let bad = corrupt(&train, &CorruptionPolicy::constant(1.0 / 3.0, 4, 12)).unwrap();
        let k = random_kraus(2, 4, 1, &mut rng(13));
        let cfg = TrainConfig { filter_count: 10, ..small_cfg() };
        let (rec, stats, _) = train_rila(&bad, &val, &k, &model.rho0(), &cfg).unwrap();
        assert_eq!(stats.removed(), CorruptionPolicy::constant(1.0 / 3.0, 4, 12).rows(30).unwrap());
        assert_eq!(rec.train_seqs, 20);
    }

    #[test]
    fn chained_proposals_run() {
        let (y, yv, rho0) = m2010_data(14);
        let k = random_kraus(2, 4, 1, &mut rng(15));
        let cfg = TrainConfig { chain_proposals: true, ..small_cfg() };
        let (rec, _, trace) = train_rila(&y, &yv, &k, &rho0, &cfg).unwrap();
        // chained scores can only climb within an iteration
        for s in &trace.steps {
            assert!(s.ll.windows(2).all(|w| w[1] >= w[0]));
        }
        assert!(rec.max_deviation < 1e-9);
    }

    #[test]
    fn config_errors() {
        let (y, yv, rho0) = m2010_data(16);
        let k = random_kraus(2, 4, 1, &mut rng(17));
        let too_big = TrainConfig { batch_size: 31, ..small_cfg() };
        assert!(matches!(train_ila(&y, &yv, &k, &rho0, &too_big), Err(Error::Config(_))));
        let filtered = TrainConfig { batch_size: 25, filter_count: 10, ..small_cfg() };
        assert!(matches!(train_rila(&y, &yv, &k, &rho0, &filtered), Err(Error::Config(_))));
        let small_alphabet = random_kraus(2, 3, 1, &mut rng(18));
        assert!(matches!(train_ila(&y, &yv, &small_alphabet, &rho0, &small_cfg()), Err(Error::Config(_))));
        let invalid = StackedKraus::new(2, 4, 1, CMatrix::zeros(8, 2)).unwrap();
        assert!(matches!(train_ila(&y, &yv, &invalid, &rho0, &small_cfg()), Err(Error::Validation(_))));
    }
}
