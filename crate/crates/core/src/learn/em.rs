//! Baum-Welch for the classical HMM baseline, in the same convention as
//! [`HmmSpec`]: `s0 ~ x0` emits nothing, then each step transitions and emits.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::record::{IterationRow, RunRecord, Trainer};
use crate::circuit::hmm_to_hqmm;
use crate::error::{Error, Result};
use crate::gen::{HmmSpec, ObsMatrix};
use crate::hqmm::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub restarts: usize,
    /// Stop once an iteration gains less than this much log-likelihood.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

/// Row-major dense parameters used during fitting.
#[derive(Clone)]
struct Params {
    n: usize,
    m: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    x0: Vec<f64>,
}

fn random_simplex_columns(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>() + 1e-3).collect();
    for j in 0..cols {
        let s: f64 = (0..rows).map(|i| v[i * cols + j]).sum();
        for i in 0..rows {
            v[i * cols + j] /= s;
        }
    }
    v
}

impl Params {
    fn random(n: usize, m: usize, rng: &mut impl Rng) -> Self {
        Self {
            n,
            m,
            a: random_simplex_columns(rng, n, n),
            c: random_simplex_columns(rng, m, n),
            x0: random_simplex_columns(rng, n, 1),
        }
    }

    fn into_spec(self) -> Result<HmmSpec> {
        HmmSpec::normalized(self.n, self.m, self.a, self.c, self.x0)
    }
}

/// Expected counts accumulated over sequences.
struct Counts {
    trans: Vec<f64>,
    emit: Vec<f64>,
    init: Vec<f64>,
    ll: f64,
}

/// Scaled forward-backward on one sequence, adding expected counts into `acc`.
fn accumulate(p: &Params, ys: &[u32], acc: &mut Counts) {
    let (n, t) = (p.n, ys.len());
    let mut alpha = vec![0.0; (t + 1) * n];
    let mut scale = vec![1.0; t + 1];
    alpha[..n].copy_from_slice(&p.x0);
    for s in 1..=t {
        let y = ys[s - 1] as usize - 1;
        let (prev, cur) = alpha.split_at_mut(s * n);
        let prev = &prev[(s - 1) * n..];
        for i in 0..n {
            let mix: f64 = (0..n).map(|j| p.a[i * n + j] * prev[j]).sum();
            cur[i] = p.c[y * n + i] * mix;
        }
        let z: f64 = cur[..n].iter().sum();
        if !(z > 0.0) {
            acc.ll = f64::NEG_INFINITY;
            return;
        }
        scale[s] = z;
        for v in &mut cur[..n] {
            *v /= z;
        }
    }
    acc.ll += scale[1..].iter().map(|z| z.ln()).sum::<f64>();

    let mut beta = vec![1.0; n];
    let mut next = vec![0.0; n];
    // walk backwards; at step s, beta holds β_s
    for s in (1..=t).rev() {
        let y = ys[s - 1] as usize - 1;
        let a_prev = &alpha[(s - 1) * n..s * n];
        let a_cur = &alpha[s * n..(s + 1) * n];
        for i in 0..n {
            let g = a_cur[i] * beta[i];
            acc.emit[y * n + i] += g;
            let cb = p.c[y * n + i] * beta[i] / scale[s];
            for j in 0..n {
                acc.trans[i * n + j] += a_prev[j] * p.a[i * n + j] * cb;
            }
        }
        for (j, nj) in next.iter_mut().enumerate() {
            *nj = (0..n).map(|i| p.a[i * n + j] * p.c[y * n + i] * beta[i]).sum::<f64>() / scale[s];
        }
        std::mem::swap(&mut beta, &mut next);
    }
    for i in 0..n {
        acc.init[i] += alpha[i] * beta[i];
    }
}

/// One E-step and M-step. Returns the log-likelihood of the incoming parameters.
fn em_step(p: &mut Params, y: &ObsMatrix) -> f64 {
    let (n, m) = (p.n, p.m);
    let mut acc = Counts {
        trans: vec![0.0; n * n],
        emit: vec![0.0; m * n],
        init: vec![0.0; n],
        ll: 0.0,
    };
    for row in y.rows() {
        accumulate(p, row, &mut acc);
        if acc.ll == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
    }
    let normalize = |counts: &[f64], rows: usize, old: &mut [f64]| {
        for j in 0..n {
            let s: f64 = (0..rows).map(|i| counts[i * n + j]).sum();
            // an unvisited state keeps its old column
            if s > 0.0 {
                for i in 0..rows {
                    old[i * n + j] = counts[i * n + j] / s;
                }
            }
        }
    };
    normalize(&acc.trans, n, &mut p.a);
    normalize(&acc.emit, m, &mut p.c);
    let s: f64 = acc.init.iter().sum();
    if s > 0.0 {
        for (x, c) in p.x0.iter_mut().zip(&acc.init) {
            *x = c / s;
        }
    }
    acc.ll
}

fn forward_ll(p: &Params, y: &ObsMatrix) -> f64 {
    let mut acc = Counts {
        trans: vec![0.0; p.n * p.n],
        emit: vec![0.0; p.m * p.n],
        init: vec![0.0; p.n],
        ll: 0.0,
    };
    for row in y.rows() {
        accumulate(p, row, &mut acc);
    }
    acc.ll
}

/// Fits an `n_states`-state HMM over symbols `1..=n_symbols` by multi-restart
/// Baum-Welch and keeps the restart with the best training log-likelihood.
/// `kappa_best` in the record is the exact Kraus embedding of the fit.
pub fn train_em(
    y: &ObsMatrix,
    y_val: &ObsMatrix,
    n_states: usize,
    n_symbols: usize,
    cfg: &EmConfig,
) -> Result<RunRecord> {
    if n_states == 0 || n_symbols == 0 {
        return Err(Error::Config("EM needs at least one state and one symbol".into()));
    }
    if cfg.restarts == 0 {
        return Err(Error::Config("EM needs at least one restart".into()));
    }
    y.check_alphabet(n_symbols)?;
    y_val.check_alphabet(n_symbols)?;
    let started = Instant::now();

    let mut best: Option<(f64, Params, Vec<f64>)> = None;
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let mut p = Params::random(n_states, n_symbols, &mut rng);
        let mut trace = vec![];
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..cfg.max_iter {
            let ll = em_step(&mut p, y);
            trace.push(ll);
            if ll.is_finite() && prev.is_finite() && ll - prev < cfg.tol {
                break;
            }
            prev = ll;
        }
        let ll = forward_ll(&p, y);
        trace.push(ll);
        log::debug!("EM restart {r}: train LL {ll}");
        if best.as_ref().is_none_or(|(b, _, _)| ll > *b) {
            best = Some((ll, p, trace));
        }
    }
    let (train_ll, params, trace) = best.expect("at least one restart");
    let hmm = params.into_spec()?;
    let model = hmm_to_hqmm(&hmm, "em");
    let mut rec = RunRecord::new(Trainer::Em, cfg.seed, &model.kraus);
    rec.iterations = trace
        .iter()
        .enumerate()
        .map(|(k, &batch_ll)| IterationRow {
            batch: 0,
            iteration: k,
            batch_ll,
        })
        .collect();
    let val_ll = hmm.batch_loglik(y_val)?;
    rec.validation_ll = vec![val_ll];
    rec.best_validation_ll = val_ll;
    rec.train_ll_final = train_ll;
    rec.train_seqs = y.n_seq();
    rec.train_obs = y.n_obs();
    rec.val_seqs = y_val.n_seq();
    rec.val_obs = y_val.n_obs();
    rec.hmm = Some(hmm);
    rec.wall_time = started.elapsed();
    Ok(rec)
}

/// Initial state of the embedded model returned in a record's `kappa_best`.
pub fn em_rho0(hmm: &HmmSpec) -> DensityMatrix {
    DensityMatrix::diagonal(hmm.x0())
}
