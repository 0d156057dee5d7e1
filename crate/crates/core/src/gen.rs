//! Data generation: HQMM and classical HMM sampling, adversarial corruption,
//! and the hard-coded benchmark models.
//!
//! Randomness comes from ChaCha8 keyed by the caller's seed. Row `r` of a
//! generated matrix draws from stream `r`, so rows are independent of each
//! other and of the order (or thread) they are produced in. Corruption uses
//! stream [`CORRUPTION_STREAM`] of its own seed.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cxmat::{CMatrix, C64, ZERO};
use crate::error::{Error, Result};
use crate::hqmm::{self, DensityMatrix, HqmmModel, StackedKraus, ZERO_PROB_FLOOR};

pub const CORRUPTION_STREAM: u64 = u64::MAX;

/// RNG for row `row` of a matrix generated under `seed`.
pub fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    rng
}

/// `N x T` matrix of 1-based symbols; one row per sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObsMatrix {
    n_seq: usize,
    len: usize,
    data: Vec<u32>,
}

impl ObsMatrix {
    pub fn new(n_seq: usize, len: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != n_seq * len {
            return Err(Error::Shape(format!("{} symbols for a {n_seq}x{len} matrix", data.len())));
        }
        if data.contains(&0) {
            return Err(Error::Validation("symbols are 1-based; found 0".into()));
        }
        Ok(Self { n_seq, len, data })
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != len) {
            return Err(Error::Shape(format!("row {r} has length {}, expected {len}", rows[r].len())));
        }
        let n_seq = rows.len();
        Self::new(n_seq, len, rows.into_iter().flatten().collect())
    }

    pub fn n_seq(&self) -> usize {
        self.n_seq
    }

    /// Sequence length `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_obs(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.len..(r + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.n_seq).map(move |r| self.row(r))
    }

    pub fn max_symbol(&self) -> Option<u32> {
        self.data.iter().copied().max()
    }

    /// Errors unless every symbol lies in `1..=m`.
    pub fn check_alphabet(&self, m: usize) -> Result<()> {
        match self.max_symbol() {
            Some(s) if s as usize > m => Err(Error::Config(format!(
                "symbol {s} outside the alphabet 1..={m}"
            ))),
            _ => Ok(()),
        }
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> ObsMatrix {
        let data = idx.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        ObsMatrix {
            n_seq: idx.len(),
            len: self.len,
            data,
        }
    }

    /// Plain CSV: one sequence per line, no header.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 2 + self.n_seq);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(u32::to_string).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, line)| {
                line.split(',')
                    .map(|tok| {
                        tok.trim().parse::<u32>().map_err(|e| {
                            Error::Parse(format!("line {}: {tok:?}: {e}", i + 1))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Classical HMM with column-stochastic `A` (`n x n`) and `C` (`m x n`).
///
/// One step moves the hidden state with `A` and then emits with `C`, so a
/// sequence has probability `1ᵀ T_{y_T} ... T_{y_1} x0` with `T_y = diag(C[y,:]) A`.
#[derive(Clone, Debug, PartialEq)]
pub struct HmmSpec {
    n: usize,
    m: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    x0: Vec<f64>,
}

/// Column sums must hit 1 within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;

impl HmmSpec {
    /// Row-major `a` (`n x n`) and `c` (`m x n`); validated at [`STOCHASTIC_TOL`].
    pub fn new(n: usize, m: usize, a: Vec<f64>, c: Vec<f64>, x0: Vec<f64>) -> Result<Self> {
        let spec = Self { n, m, a, c, x0 };
        spec.check(STOCHASTIC_TOL)?;
        Ok(spec)
    }

    /// Like [`HmmSpec::new`] but rescales every column (and `x0`) to sum to one first.
    pub fn normalized(n: usize, m: usize, mut a: Vec<f64>, mut c: Vec<f64>, mut x0: Vec<f64>) -> Result<Self> {
        normalize_columns(&mut a, n, n);
        normalize_columns(&mut c, m, n);
        normalize_columns(&mut x0, n, 1);
        Self::new(n, m, a, c, x0)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let (n, m) = (self.n, self.m);
        if n == 0 || m == 0 {
            return Err(Error::Shape("HMM needs at least one state and one symbol".into()));
        }
        if self.a.len() != n * n || self.c.len() != m * n || self.x0.len() != n {
            return Err(Error::Shape(format!("HMM arrays do not match n={n}, m={m}")));
        }
        let all = self.a.iter().chain(&self.c).chain(&self.x0);
        if all.clone().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Validation("HMM entries must be finite and non-negative".into()));
        }
        for j in 0..n {
            let sa: f64 = (0..n).map(|i| self.a[i * n + j]).sum();
            let sc: f64 = (0..m).map(|y| self.c[y * n + j]).sum();
            if (sa - 1.0).abs() > tol || (sc - 1.0).abs() > tol {
                return Err(Error::Validation(format!(
                    "column {j} not stochastic (A sums to {sa}, C sums to {sc})"
                )));
            }
        }
        let s0: f64 = self.x0.iter().sum();
        if (s0 - 1.0).abs() > tol {
            return Err(Error::Validation(format!("x0 sums to {s0}")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `A[i, j] = P(next = i | current = j)`.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// `C[y, j] = P(symbol y | state j)`, with `y` 0-based.
    pub fn c(&self, y: usize, j: usize) -> f64 {
        self.c[y * self.n + j]
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    /// `T_y = diag(C[y,:]) A` for 0-based `y`, row-major.
    pub fn transfer(&self, y: usize) -> Vec<f64> {
        let n = self.n;
        let mut t = vec![0.0; n * n];
        for w in 0..n {
            for j in 0..n {
                t[w * n + j] = self.c(y, w) * self.a(w, j);
            }
        }
        t
    }

    /// Scaled forward algorithm; `-∞` for impossible sequences.
    pub fn seq_loglik(&self, ys: &[u32]) -> Result<f64> {
        let n = self.n;
        let mut x = self.x0.clone();
        let mut next = vec![0.0; n];
        let mut ll = 0.0;
        for &y in ys {
            if y == 0 || y as usize > self.m {
                return Err(Error::Index(format!("symbol {y} outside 1..={}", self.m)));
            }
            let y0 = y as usize - 1;
            for (i, v) in next.iter_mut().enumerate() {
                *v = self.c(y0, i) * (0..n).map(|j| self.a(i, j) * x[j]).sum::<f64>();
            }
            let p: f64 = next.iter().sum();
            if !(p > ZERO_PROB_FLOOR) {
                return Ok(f64::NEG_INFINITY);
            }
            ll += p.ln();
            for (xi, v) in x.iter_mut().zip(&next) {
                *xi = v / p;
            }
        }
        Ok(ll)
    }

    pub fn batch_loglik(&self, y: &ObsMatrix) -> Result<f64> {
        y.rows().map(|r| self.seq_loglik(r)).sum()
    }

    pub fn to_json(&self) -> String {
        let nested = |v: &[f64], rows: usize, cols: usize| -> Vec<Vec<f64>> {
            (0..rows).map(|r| v[r * cols..(r + 1) * cols].to_vec()).collect()
        };
        let f = HmmFile {
            n: self.n,
            m: self.m,
            a: nested(&self.a, self.n, self.n),
            c: nested(&self.c, self.m, self.n),
            x0: self.x0.clone(),
        };
        serde_json::to_string_pretty(&f).expect("HMM serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: HmmFile = serde_json::from_str(text)?;
        let flat = |rows: Vec<Vec<f64>>, r: usize, c: usize, what: &str| -> Result<Vec<f64>> {
            if rows.len() != r || rows.iter().any(|row| row.len() != c) {
                return Err(Error::Parse(format!("{what} must be {r}x{c}")));
            }
            Ok(rows.into_iter().flatten().collect())
        };
        let a = flat(f.a, f.n, f.n, "A")?;
        let c = flat(f.c, f.m, f.n, "C")?;
        Self::new(f.n, f.m, a, c, f.x0)
    }
}

#[derive(Serialize, Deserialize)]
struct HmmFile {
    n: usize,
    m: usize,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    x0: Vec<f64>,
}

fn normalize_columns(v: &mut [f64], rows: usize, cols: usize) {
    for j in 0..cols {
        let s: f64 = (0..rows).map(|i| v[i * cols + j]).sum();
        if s > 0.0 {
            for i in 0..rows {
                v[i * cols + j] /= s;
            }
        }
    }
}

/// A generative model: quantum Kraus set or classical HMM.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Quantum(HqmmModel),
    Classical { name: String, hmm: HmmSpec },
}

impl ModelSpec {
    pub fn name(&self) -> &str {
        match self {
            ModelSpec::Quantum(q) => &q.name,
            ModelSpec::Classical { name, .. } => name,
        }
    }

    pub fn quantum(&self) -> Option<&HqmmModel> {
        match self {
            ModelSpec::Quantum(q) => Some(q),
            ModelSpec::Classical { .. } => None,
        }
    }

    pub fn classical(&self) -> Option<&HmmSpec> {
        match self {
            ModelSpec::Quantum(_) => None,
            ModelSpec::Classical { hmm, .. } => Some(hmm),
        }
    }

    /// Hidden dimension.
    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Quantum(q) => q.kraus.n(),
            ModelSpec::Classical { hmm, .. } => hmm.n(),
        }
    }

    /// Alphabet size.
    pub fn m(&self) -> usize {
        match self {
            ModelSpec::Quantum(q) => q.kraus.m(),
            ModelSpec::Classical { hmm, .. } => hmm.m(),
        }
    }

    /// Initial state as a density matrix (`diag(x0)` for classical models).
    pub fn rho0(&self) -> DensityMatrix {
        match self {
            ModelSpec::Quantum(q) => q.rho0.clone(),
            ModelSpec::Classical { hmm, .. } => DensityMatrix::diagonal(hmm.x0()),
        }
    }

    pub fn batch_loglik(&self, y: &ObsMatrix) -> Result<f64> {
        match self {
            ModelSpec::Quantum(q) => hqmm::batch_loglik(&q.kraus, &q.rho0, y),
            ModelSpec::Classical { hmm, .. } => hmm.batch_loglik(y),
        }
    }
}

/// Samples `n_seq` sequences of length `t`, resetting to `ρ0` for every row.
pub fn generate_hqmm(model: &HqmmModel, n_seq: usize, t: usize, seed: u64) -> Result<ObsMatrix> {
    model.validate(hqmm::DEFAULT_TOL)?;
    let k = &model.kraus;
    let n = k.n();
    let rows: Vec<Vec<u32>> = (0..n_seq)
        .into_par_iter()
        .map(|r| {
            let mut rng = row_rng(seed, r);
            let mut rho = model.rho0.mat().data().to_vec();
            let mut outs = vec![vec![ZERO; n * n]; k.m()];
            let mut tmp = vec![ZERO; n * n];
            let mut probs = vec![0.0; k.m()];
            let mut row = Vec::with_capacity(t);
            for _ in 0..t {
                for (y0, out) in outs.iter_mut().enumerate() {
                    hqmm::apply_symbol(k, y0, &rho, out, &mut tmp);
                    probs[y0] = (0..n).map(|i| out[i * n + i].re).sum::<f64>().max(0.0);
                }
                let y0 = sample_index(&probs, rng.random::<f64>());
                let p = probs[y0];
                for (dst, src) in rho.iter_mut().zip(&outs[y0]) {
                    *dst = src / p;
                }
                row.push(y0 as u32 + 1);
            }
            row
        })
        .collect();
    if t == 0 {
        return Ok(ObsMatrix { n_seq, len: 0, data: vec![] });
    }
    ObsMatrix::from_rows(rows)
}

/// Index drawn by inverse CDF at `u ∈ [0,1)`, with the cumulative sum scaled
/// by its total. Never returns a zero-weight index.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Ancestral sampling: `s0 ~ x0`, then per step `s ~ A[:, s]` and `y ~ C[:, s]`.
pub fn generate_hmm(spec: &HmmSpec, n_seq: usize, t: usize, seed: u64) -> Result<ObsMatrix> {
    spec.check(STOCHASTIC_TOL)?;
    let n = spec.n();
    let rows: Vec<Vec<u32>> = (0..n_seq)
        .into_par_iter()
        .map(|r| {
            let mut rng = row_rng(seed, r);
            let mut s = sample_index(spec.x0(), rng.random::<f64>());
            let mut col = vec![0.0; n.max(spec.m())];
            (0..t)
                .map(|_| {
                    for i in 0..n {
                        col[i] = spec.a(i, s);
                    }
                    s = sample_index(&col[..n], rng.random::<f64>());
                    for y in 0..spec.m() {
                        col[y] = spec.c(y, s);
                    }
                    sample_index(&col[..spec.m()], rng.random::<f64>()) as u32 + 1
                })
                .collect()
        })
        .collect();
    if t == 0 {
        return Ok(ObsMatrix { n_seq, len: 0, data: vec![] });
    }
    ObsMatrix::from_rows(rows)
}

/// Samples from either kind of model.
pub fn generate(model: &ModelSpec, n_seq: usize, t: usize, seed: u64) -> Result<ObsMatrix> {
    match model {
        ModelSpec::Quantum(q) => generate_hqmm(q, n_seq, t, seed),
        ModelSpec::Classical { hmm, .. } => generate_hmm(hmm, n_seq, t, seed),
    }
}

/// Rewrites chosen rows of a clean matrix. Receives the full clean data and the
/// chosen row indices; returns one replacement row per index, same length `T`.
pub trait Adversary: Send + Sync {
    fn rewrite(&self, clean: &ObsMatrix, rows: &[usize]) -> Vec<Vec<u32>>;
}

#[derive(Clone)]
pub enum CorruptionMode {
    /// Every entry of a corrupted row becomes this symbol.
    ConstantSymbol(u32),
    Adversary(Arc<dyn Adversary>),
}

impl fmt::Debug for CorruptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorruptionMode::ConstantSymbol(v) => write!(f, "ConstantSymbol({v})"),
            CorruptionMode::Adversary(_) => write!(f, "Adversary(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorruptionPolicy {
    pub gamma: f64,
    pub mode: CorruptionMode,
    pub seed: u64,
}

impl CorruptionPolicy {
    pub fn constant(gamma: f64, symbol: u32, seed: u64) -> Self {
        Self {
            gamma,
            mode: CorruptionMode::ConstantSymbol(symbol),
            seed,
        }
    }

    /// `⌊N·γ⌋`, with a small slack so that e.g. `30 · (1/3)` counts as 10.
    pub fn count(&self, n_seq: usize) -> usize {
        (n_seq as f64 * self.gamma + 1e-9).floor() as usize
    }

    /// Sorted indices of the rows this policy corrupts in an `n_seq`-row matrix.
    pub fn rows(&self, n_seq: usize) -> Result<Vec<usize>> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("corruption fraction {} not in [0, 1)", self.gamma)));
        }
        let k = self.count(n_seq);
        let mut rng = row_rng(self.seed, 0);
        rng.set_stream(CORRUPTION_STREAM);
        let mut idx = rand::seq::index::sample(&mut rng, n_seq, k).into_vec();
        idx.sort_unstable();
        Ok(idx)
    }
}

/// Replaces `⌊N·γ⌋` distinct, seeded-random rows according to the policy.
pub fn corrupt(y: &ObsMatrix, policy: &CorruptionPolicy) -> Result<ObsMatrix> {
    let rows = policy.rows(y.n_seq())?;
    let mut out = y.clone();
    match &policy.mode {
        CorruptionMode::ConstantSymbol(v) => {
            if *v == 0 {
                return Err(Error::Config("corruption symbol must be >= 1".into()));
            }
            for &r in &rows {
                out.data[r * y.len..(r + 1) * y.len].fill(*v);
            }
        }
        CorruptionMode::Adversary(adv) => {
            let new_rows = adv.rewrite(y, &rows);
            if new_rows.len() != rows.len() {
                return Err(Error::Config(format!(
                    "adversary returned {} rows for {} targets",
                    new_rows.len(),
                    rows.len()
                )));
            }
            for (&r, new) in rows.iter().zip(new_rows) {
                if new.len() != y.len || new.contains(&0) {
                    return Err(Error::Config(format!("adversary produced an invalid row {r}")));
                }
                out.data[r * y.len..(r + 1) * y.len].copy_from_slice(&new);
            }
        }
    }
    Ok(out)
}

/// The three hard-coded benchmark models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Benchmark {
    /// 2-state, 4-output HQMM.
    M2010,
    /// 2-state, 6-output HQMM with complex entries.
    S2018,
    /// 8-state, 8-output classical HMM.
    Hmm88,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::M2010, Benchmark::S2018, Benchmark::Hmm88];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::M2010 => "m2010_24",
            Benchmark::S2018 => "s2018_26",
            Benchmark::Hmm88 => "hmm_88",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark {s:?} (expected m2010_24, s2018_26 or hmm_88)")))
    }
}

/// Looks a benchmark up by name.
pub fn benchmark_by_name(name: &str) -> Result<ModelSpec> {
    Ok(benchmark(name.parse()?))
}

pub fn benchmark(which: Benchmark) -> ModelSpec {
    match which {
        Benchmark::M2010 => ModelSpec::Quantum(m2010()),
        Benchmark::S2018 => ModelSpec::Quantum(s2018()),
        Benchmark::Hmm88 => ModelSpec::Classical {
            name: which.name().into(),
            hmm: hmm88(),
        },
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn single_operator_model(name: &str, blocks: Vec<[C64; 4]>) -> HqmmModel {
    let blocks: Vec<CMatrix> = blocks
        .into_iter()
        .map(|b| CMatrix::from_vec(2, 2, b.to_vec()).expect("2x2 literal"))
        .collect();
    let m = blocks.len();
    HqmmModel {
        name: name.into(),
        kraus: StackedKraus::from_blocks(m, 1, &blocks).expect("benchmark blocks"),
        rho0: DensityMatrix::basis(2, 0),
    }
}

fn m2010() -> HqmmModel {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let h = 1.0 / (2.0 * 2f64.sqrt());
    single_operator_model(
        "m2010_24",
        vec![
            [re(a), ZERO, ZERO, ZERO],
            [ZERO, ZERO, ZERO, re(a)],
            [re(h), re(h), re(h), re(h)],
            [re(h), re(-h), re(-h), re(h)],
        ],
    )
}

fn s2018() -> HqmmModel {
    let a = 1.0 / 3f64.sqrt();
    let h = 1.0 / (2.0 * 3f64.sqrt());
    let ih = C64::new(0.0, h);
    single_operator_model(
        "s2018_26",
        vec![
            [re(a), ZERO, ZERO, ZERO],
            [ZERO, ZERO, ZERO, re(a)],
            [re(h), re(h), re(h), re(h)],
            [re(h), re(-h), re(-h), re(h)],
            [re(h), -ih, ih, re(h)],
            [re(h), ih, -ih, re(h)],
        ],
    )
}

/// The 8-state HMM. The printed matrices are rounded to four decimals, so
/// columns are rescaled to sum to one exactly.
fn hmm88() -> HmmSpec {
    #[rustfmt::skip]
    let a = vec![
        0.1039, 0.1020, 0.2531, 0.2001, 0.2169, 0.1346, 0.1579, 0.0115,
        0.1410, 0.1366, 0.2584, 0.1114, 0.1641, 0.0608, 0.0404, 0.1236,
        0.1097, 0.0343, 0.0246, 0.1445, 0.0615, 0.0091, 0.1621, 0.1531,
        0.1794, 0.0484, 0.0113, 0.0659, 0.1731, 0.3175, 0.1925, 0.1187,
        0.0535, 0.1958, 0.0490, 0.1434, 0.0226, 0.0990, 0.0282, 0.2178,
        0.2298, 0.2368, 0.2536, 0.1743, 0.0982, 0.1242, 0.1139, 0.1353,
        0.0072, 0.0766, 0.0284, 0.0038, 0.1992, 0.2299, 0.1910, 0.2083,
        0.1755, 0.1693, 0.1216, 0.1567, 0.0644, 0.0250, 0.1139, 0.0317,
    ];
    #[rustfmt::skip]
    let c = vec![
        0.0327, 0.1710, 0.1649, 0.2154, 0.2030, 0.1879, 0.0064, 0.0348,
        0.1894, 0.1207, 0.1545, 0.1368, 0.1393, 0.1404, 0.0084, 0.0782,
        0.0933, 0.1454, 0.0285, 0.0007, 0.0035, 0.0133, 0.0091, 0.1640,
        0.0388, 0.0675, 0.2360, 0.1471, 0.2077, 0.1522, 0.0791, 0.2714,
        0.2176, 0.0523, 0.1118, 0.0779, 0.1544, 0.1519, 0.2762, 0.1571,
        0.0816, 0.1734, 0.1438, 0.1257, 0.2229, 0.1860, 0.1730, 0.0052,
        0.1762, 0.0829, 0.1015, 0.2112, 0.0385, 0.1433, 0.1775, 0.2241,
        0.1704, 0.1868, 0.0589, 0.0852, 0.0306, 0.0250, 0.2704, 0.0652,
    ];
    let mut x0 = vec![0.0; 8];
    x0[0] = 1.0;
    HmmSpec::normalized(8, 8, a, c, x0).expect("benchmark HMM is stochastic after rescaling")
}
