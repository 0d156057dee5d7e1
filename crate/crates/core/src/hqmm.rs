//! HQMM state, stacked Kraus operators, the forward update and sequence
//! log-likelihoods.
//!
//! Symbols are 1-based everywhere in the public API (`1..=m`), matching the
//! observation files. The stacked matrix `κ` holds the operator for symbol `y`
//! and copy `q` at rows `((y-1)·w + (q-1))·n .. +n`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cxmat::{tol, CMatrix, C64, ZERO};
use crate::error::{Error, Result};
use crate::gen::ObsMatrix;

/// Outcome probabilities at or below this are treated as exact zeros.
pub const ZERO_PROB_FLOOR: f64 = 1e-300;

/// A quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Checks the three density-matrix conditions at `tol`.
    pub fn new(mat: CMatrix, tol: f64) -> Result<Self> {
        let rho = Self(mat);
        rho.check(tol)?;
        Ok(rho)
    }

    pub fn new_unchecked(mat: CMatrix) -> Self {
        Self(mat)
    }

    /// `|k><k|` in dimension `n` (0-based `k`).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        m[(k, k)] = C64::new(1.0, 0.0);
        Self(m)
    }

    /// Diagonal (classical) state with the given probabilities.
    pub fn diagonal(probs: &[f64]) -> Self {
        Self(CMatrix::diag_real(probs))
    }

    pub fn mat(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_mat(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let m = &self.0;
        if !m.is_square() {
            return Err(Error::Shape(format!("density matrix is {}x{}", m.rows(), m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::Validation("density matrix has non-finite entries".into()));
        }
        let herm = m.max_abs_diff(&m.adjoint());
        if herm > tol {
            return Err(Error::Validation(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Validation(format!("trace is {tr} not 1")));
        }
        let min_ev = m.hermitian_eigenvalues()[0];
        if min_ev < -tol {
            return Err(Error::Validation(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(())
    }
}

/// The `(n·m·w) x n` vertical stack of all Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedKraus {
    n: usize,
    m: usize,
    w: usize,
    mat: CMatrix,
}

impl StackedKraus {
    /// Wraps a stacked matrix after a shape check. Completeness is not checked; see [`validate`].
    pub fn new(n: usize, m: usize, w: usize, mat: CMatrix) -> Result<Self> {
        if n == 0 || m == 0 || w == 0 {
            return Err(Error::Shape("n, m and w must all be positive".into()));
        }
        if mat.rows() != n * m * w || mat.cols() != n {
            return Err(Error::Shape(format!(
                "stacked Kraus matrix is {}x{}, expected {}x{n}",
                mat.rows(),
                mat.cols(),
                n * m * w
            )));
        }
        if !mat.is_finite() {
            return Err(Error::Validation("non-finite Kraus entry".into()));
        }
        Ok(Self { n, m, w, mat })
    }

    /// Stacks `m·w` square blocks, ordered symbol-major: block `y·w + q` (0-based).
    pub fn from_blocks(m: usize, w: usize, blocks: &[CMatrix]) -> Result<Self> {
        let n = blocks.first().map_or(0, CMatrix::rows);
        if blocks.len() != m * w {
            return Err(Error::Shape(format!("{} Kraus blocks for m={m}, w={w}", blocks.len())));
        }
        if let Some(b) = blocks.iter().find(|b| b.rows() != n || b.cols() != n) {
            return Err(Error::Shape(format!("Kraus block is {}x{}, expected {n}x{n}", b.rows(), b.cols())));
        }
        let data = blocks.iter().flat_map(|b| b.data().iter().copied()).collect();
        Self::new(n, m, w, CMatrix::from_vec(n * m * w, n, data)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub(crate) fn mat_mut(&mut self) -> &mut CMatrix {
        &mut self.mat
    }

    /// Number of stacked rows, `n·m·w`.
    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    /// Operator `K_{q,y}` for 1-based symbol `y` and copy `q`.
    pub fn operator(&self, y: usize, q: usize) -> CMatrix {
        assert!((1..=self.m).contains(&y) && (1..=self.w).contains(&q));
        self.mat.row_block(((y - 1) * self.w + (q - 1)) * self.n, self.n)
    }

    /// Row-major `n x n` slice of block `y0·w + q0` (0-based).
    fn block(&self, y0: usize, q0: usize) -> &[C64] {
        let nn = self.n * self.n;
        let start = (y0 * self.w + q0) * nn;
        &self.mat.data()[start..start + nn]
    }

    /// `max |κ†κ - I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let n = self.n;
        let data = self.mat.data();
        let mut dev: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let mut s = ZERO;
                for r in 0..self.rows() {
                    s += data[r * n + a].conj() * data[r * n + b];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                dev = dev.max((s - C64::new(target, 0.0)).norm());
            }
        }
        dev
    }
}

/// Result of the completeness check `κ†κ = I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityReport {
    pub deviation: f64,
    pub tol: f64,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.deviation <= self.tol
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "completeness violated: max|κ†κ - I| = {:.3e} > {:.1e}",
                self.deviation, self.tol
            )))
        }
    }
}

pub fn validate(kraus: &StackedKraus, tol: f64) -> ValidityReport {
    ValidityReport {
        deviation: kraus.completeness_deviation(),
        tol,
    }
}

/// One forward update. `state` is `None` when the outcome has zero probability.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub prob: f64,
    pub state: Option<DensityMatrix>,
}

impl StepResult {
    pub fn is_zero(&self) -> bool {
        self.state.is_none()
    }
}

/// `out = Σ_q K ρ K†` over the operators of symbol `y0` (0-based), skipping zero entries.
pub(crate) fn apply_symbol(kraus: &StackedKraus, y0: usize, rho: &[C64], out: &mut [C64], tmp: &mut [C64]) {
    let n = kraus.n;
    out.fill(ZERO);
    for q0 in 0..kraus.w {
        let k = kraus.block(y0, q0);
        tmp.fill(ZERO);
        for i in 0..n {
            let trow = &mut tmp[i * n..(i + 1) * n];
            for j in 0..n {
                let a = k[i * n + j];
                if a == ZERO {
                    continue;
                }
                for (t, &r) in trow.iter_mut().zip(&rho[j * n..(j + 1) * n]) {
                    *t += a * r;
                }
            }
        }
        for l in 0..n {
            for j in 0..n {
                let b = k[l * n + j];
                if b == ZERO {
                    continue;
                }
                let b = b.conj();
                for i in 0..n {
                    out[i * n + l] += tmp[i * n + j] * b;
                }
            }
        }
    }
}

fn real_trace(m: &[C64], n: usize) -> f64 {
    (0..n).map(|i| m[i * n + i].re).sum()
}

fn check_symbol(y: u32, m: usize) -> Result<usize> {
    if y == 0 || y as usize > m {
        return Err(Error::Index(format!("symbol {y} outside 1..={m}")));
    }
    Ok(y as usize - 1)
}

fn check_dims(kraus: &StackedKraus, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != kraus.n {
        return Err(Error::Shape(format!(
            "state has dimension {}, operators act on {}",
            rho.dim(),
            kraus.n
        )));
    }
    Ok(())
}

pub fn step(rho: &DensityMatrix, y: u32, kraus: &StackedKraus) -> Result<StepResult> {
    check_dims(kraus, rho)?;
    let y0 = check_symbol(y, kraus.m)?;
    let n = kraus.n;
    let mut out = vec![ZERO; n * n];
    let mut tmp = vec![ZERO; n * n];
    apply_symbol(kraus, y0, rho.mat().data(), &mut out, &mut tmp);
    let prob = real_trace(&out, n);
    if prob <= ZERO_PROB_FLOOR || !prob.is_finite() {
        return Ok(StepResult { prob: 0.0, state: None });
    }
    for z in &mut out {
        *z /= prob;
    }
    let state = DensityMatrix(CMatrix::from_vec(n, n, out)?);
    Ok(StepResult { prob, state: Some(state) })
}

/// Reusable buffers for repeated likelihood evaluations.
pub(crate) struct Scratch {
    rho: Vec<C64>,
    out: Vec<C64>,
    tmp: Vec<C64>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            rho: vec![ZERO; n * n],
            out: vec![ZERO; n * n],
            tmp: vec![ZERO; n * n],
        }
    }
}

/// Log-likelihood of one sequence with symbols already known to be in range.
pub(crate) fn seq_loglik_with(
    kraus: &StackedKraus,
    rho0: &DensityMatrix,
    ys: &[u32],
    s: &mut Scratch,
) -> f64 {
    let n = kraus.n;
    s.rho.copy_from_slice(rho0.mat().data());
    let mut ll = 0.0;
    for &y in ys {
        apply_symbol(kraus, y as usize - 1, &s.rho, &mut s.out, &mut s.tmp);
        let p = real_trace(&s.out, n);
        if !(p > ZERO_PROB_FLOOR) || !p.is_finite() {
            return f64::NEG_INFINITY;
        }
        ll += p.ln();
        let inv = 1.0 / p;
        for (r, o) in s.rho.iter_mut().zip(&s.out) {
            *r = o * inv;
        }
    }
    ll
}

/// `Σ_t ln P(y_t | y_<t)` with per-step renormalization; `-∞` if any step is impossible.
pub fn seq_loglik(kraus: &StackedKraus, rho0: &DensityMatrix, ys: &[u32]) -> Result<f64> {
    check_dims(kraus, rho0)?;
    for &y in ys {
        check_symbol(y, kraus.m)?;
    }
    Ok(seq_loglik_with(kraus, rho0, ys, &mut Scratch::new(kraus.n)))
}

/// Rows at or above this count are scored in parallel.
const PARALLEL_ROWS: usize = 16;

pub(crate) fn batch_loglik_unchecked(kraus: &StackedKraus, rho0: &DensityMatrix, y: &ObsMatrix) -> f64 {
    let per_row: Vec<f64> = if y.n_seq() >= PARALLEL_ROWS {
        use rayon::prelude::*;
        (0..y.n_seq())
            .into_par_iter()
            .map_init(
                || Scratch::new(kraus.n),
                |s, r| seq_loglik_with(kraus, rho0, y.row(r), s),
            )
            .collect()
    } else {
        let mut s = Scratch::new(kraus.n);
        (0..y.n_seq()).map(|r| seq_loglik_with(kraus, rho0, y.row(r), &mut s)).collect()
    };
    // fixed summation order so totals do not depend on the thread count
    per_row.into_iter().sum()
}

/// Sum of [`seq_loglik`] over the rows of `y`; zero for an empty matrix.
pub fn batch_loglik(kraus: &StackedKraus, rho0: &DensityMatrix, y: &ObsMatrix) -> Result<f64> {
    check_dims(kraus, rho0)?;
    check_alphabet(kraus, y)?;
    Ok(batch_loglik_unchecked(kraus, rho0, y))
}

pub(crate) fn check_alphabet(kraus: &StackedKraus, y: &ObsMatrix) -> Result<()> {
    if let Some(max) = y.max_symbol() {
        if max as usize > kraus.m {
            return Err(Error::Config(format!(
                "data uses symbol {max} but the model has only {} outputs",
                kraus.m
            )));
        }
    }
    Ok(())
}

/// A complete HQMM: stacked Kraus operators plus the initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct HqmmModel {
    pub name: String,
    pub kraus: StackedKraus,
    pub rho0: DensityMatrix,
}

type Entry = [f64; 2];

/// On-disk model document.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    name: String,
    n: usize,
    m: usize,
    w: usize,
    rho0: Vec<Vec<Entry>>,
    kraus: Vec<Vec<Vec<Entry>>>,
}

fn to_nested(m: &CMatrix) -> Vec<Vec<Entry>> {
    (0..m.rows()).map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect()).collect()
}

fn from_nested(rows: &[Vec<Entry>], n: usize, what: &str) -> Result<CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} must be {n}x{n}")));
    }
    let data = rows.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    CMatrix::from_vec(n, n, data)
}

impl HqmmModel {
    pub fn validate(&self, tol: f64) -> Result<()> {
        check_dims(&self.kraus, &self.rho0)?;
        validate(&self.kraus, tol).into_result()?;
        self.rho0.check(tol)
    }

    pub fn to_json(&self) -> String {
        let k = &self.kraus;
        let kraus = (1..=k.m)
            .flat_map(|y| (1..=k.w).map(move |q| (y, q)))
            .map(|(y, q)| to_nested(&k.operator(y, q)))
            .collect();
        let file = ModelFile {
            name: self.name.clone(),
            n: k.n,
            m: k.m,
            w: k.w,
            rho0: to_nested(self.rho0.mat()),
            kraus,
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    /// Parses a model document. Shapes are checked; physical validity is not.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.kraus.len() != f.m * f.w {
            return Err(Error::Parse(format!(
                "{} Kraus blocks listed, expected m·w = {}",
                f.kraus.len(),
                f.m * f.w
            )));
        }
        let blocks = f
            .kraus
            .iter()
            .enumerate()
            .map(|(i, b)| from_nested(b, f.n, &format!("kraus[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let kraus = StackedKraus::from_blocks(f.m, f.w, &blocks)?;
        let rho0 = DensityMatrix(from_nested(&f.rho0, f.n, "rho0")?);
        Ok(Self { name: f.name, kraus, rho0 })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Default tolerance for [`validate`] and state checks.
pub const DEFAULT_TOL: f64 = tol::VALIDITY;
