//! Two-row unitary updates of a stacked Kraus matrix and the local solvers
//! that choose their angles.
//!
//! Rows `i < j` of `κ` are replaced by
//!
//! ```text
//! κ̃_i = e^{iφ/2} ( e^{iψ} cos α · κ_i + e^{iδ} sin α · κ_j )
//! κ̃_j = e^{iφ/2} (-e^{-iδ} sin α · κ_i + e^{-iψ} cos α · κ_j )
//! ```
//!
//! computed from the old rows. The 2x2 block is unitary, so `κ†κ = I` survives.
//! Row indices are 0-based throughout.

use std::f64::consts::PI;

use crate::cxmat::C64;
use crate::error::{Error, Result};
use crate::gen::ObsMatrix;
use crate::hqmm::{self, DensityMatrix, StackedKraus};

/// Update angles `(α, φ, ψ, δ)` in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Theta {
    pub alpha: f64,
    pub phi: f64,
    pub psi: f64,
    pub delta: f64,
}

/// Solver box: every angle lies in `[-BOUND, BOUND]`.
pub const BOUND: f64 = PI;

impl Theta {
    pub const ZERO: Theta = Theta {
        alpha: 0.0,
        phi: 0.0,
        psi: 0.0,
        delta: 0.0,
    };

    pub fn new(alpha: f64, phi: f64, psi: f64, delta: f64) -> Self {
        Self { alpha, phi, psi, delta }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.alpha, self.phi, self.psi, self.delta]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn l1_norm(self) -> f64 {
        self.alpha.abs() + self.phi.abs() + self.psi.abs() + self.delta.abs()
    }

    /// Angles of the adjoint block, which undoes this update.
    pub fn inverse(self) -> Self {
        Self::new(-self.alpha, -self.phi, -self.psi, self.delta)
    }

    /// The 2x2 block `[[u00, u01], [u10, u11]]` acting on rows `(i, j)`.
    pub fn block(self) -> [[C64; 2]; 2] {
        let g = C64::from_polar(1.0, self.phi / 2.0);
        let (s, c) = self.alpha.sin_cos();
        [
            [g * C64::from_polar(c, self.psi), g * C64::from_polar(s, self.delta)],
            [-g * C64::from_polar(s, -self.delta), g * C64::from_polar(c, -self.psi)],
        ]
    }
}

fn check_rows(rows: usize, i: usize, j: usize) -> Result<()> {
    if i >= j || j >= rows {
        return Err(Error::Index(format!(
            "row pair ({i}, {j}) must satisfy i < j < {rows}"
        )));
    }
    Ok(())
}

/// Rotates rows `i` and `j` in place. Both new rows use the old values.
pub fn apply_update_in_place(kappa: &mut StackedKraus, theta: Theta, i: usize, j: usize) -> Result<()> {
    check_rows(kappa.rows(), i, j)?;
    let [[u00, u01], [u10, u11]] = theta.block();
    let n = kappa.n();
    let data = kappa.mat_mut().data_mut();
    let (head, tail) = data.split_at_mut(j * n);
    let ri = &mut head[i * n..(i + 1) * n];
    let rj = &mut tail[..n];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = u00 * x + u01 * y;
        *b = u10 * x + u11 * y;
    }
    Ok(())
}

pub fn apply_update(kappa: &StackedKraus, theta: Theta, i: usize, j: usize) -> Result<StackedKraus> {
    let mut out = kappa.clone();
    apply_update_in_place(&mut out, theta, i, j)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveKind {
    Regular,
    /// Log-likelihood minus `λ (|α| + |φ| + |ψ| + |δ|)`.
    L1 { lambda: f64 },
}

/// Default penalty weight for penalized runs.
pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Batch log-likelihood objective over a fixed data set and initial state.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    pub kind: ObjectiveKind,
    pub data: &'a ObsMatrix,
    pub rho0: &'a DensityMatrix,
}

impl<'a> Objective<'a> {
    pub fn new(kind: ObjectiveKind, data: &'a ObsMatrix, rho0: &'a DensityMatrix) -> Result<Self> {
        if let ObjectiveKind::L1 { lambda } = kind {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(Error::Config(format!("penalty weight {lambda} must be finite and >= 0")));
            }
        }
        Ok(Self { kind, data, rho0 })
    }

    pub fn regular(data: &'a ObsMatrix, rho0: &'a DensityMatrix) -> Self {
        Self {
            kind: ObjectiveKind::Regular,
            data,
            rho0,
        }
    }

    fn penalty(&self, theta: Theta) -> f64 {
        match self.kind {
            ObjectiveKind::Regular => 0.0,
            ObjectiveKind::L1 { lambda } => lambda * theta.l1_norm(),
        }
    }

    /// Log-likelihood of `κ` itself (no update, no penalty).
    pub fn loglik(&self, kappa: &StackedKraus) -> f64 {
        hqmm::batch_loglik_unchecked(kappa, self.rho0, self.data)
    }

    fn check(&self, kappa: &StackedKraus) -> Result<()> {
        if self.rho0.dim() != kappa.n() {
            return Err(Error::Shape(format!(
                "initial state has dimension {}, operators act on {}",
                self.rho0.dim(),
                kappa.n()
            )));
        }
        hqmm::check_alphabet(kappa, self.data)
    }
}

/// `f(θ)` for the update of rows `(i, j)`.
pub fn eval_objective(obj: &Objective, kappa: &StackedKraus, theta: Theta, i: usize, j: usize) -> Result<f64> {
    obj.check(kappa)?;
    let updated = apply_update(kappa, theta, i, j)?;
    Ok(obj.loglik(&updated) - obj.penalty(theta))
}

/// Evaluates `f` repeatedly for one row pair, reusing a working copy of `κ`.
struct Evaluator<'o, 'a> {
    obj: &'o Objective<'a>,
    base: &'o StackedKraus,
    work: StackedKraus,
    i: usize,
    j: usize,
    evals: usize,
}

impl<'o, 'a> Evaluator<'o, 'a> {
    fn new(obj: &'o Objective<'a>, base: &'o StackedKraus, i: usize, j: usize) -> Self {
        Self {
            obj,
            base,
            work: base.clone(),
            i,
            j,
            evals: 0,
        }
    }

    fn eval(&mut self, x: [f64; 4]) -> f64 {
        self.evals += 1;
        let n = self.base.n();
        let (i, j) = (self.i, self.j);
        // restore the two touched rows, then rotate
        let src = self.base.mat().data();
        let dst = self.work.mat_mut().data_mut();
        dst[i * n..(i + 1) * n].copy_from_slice(&src[i * n..(i + 1) * n]);
        dst[j * n..(j + 1) * n].copy_from_slice(&src[j * n..(j + 1) * n]);
        let theta = Theta::from_array(x);
        apply_update_in_place(&mut self.work, theta, i, j).expect("rows checked by caller");
        self.obj.loglik(&self.work) - self.obj.penalty(theta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Derivative-free coordinate pattern search. Use this for penalized objectives.
    PatternSearch,
    /// Central-difference gradients with a projected BFGS ascent. Assumes a
    /// smooth objective; the L1 kink at zero defeats it.
    FdLocal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Objective evaluations allowed per call, including the start point.
    pub max_evals: usize,
    /// Initial pattern-search mesh size (radians).
    pub mesh_start: f64,
    /// Pattern search stops once the mesh falls below this.
    pub mesh_tol: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Quasi-Newton stops when the projected gradient norm falls below this.
    pub grad_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::PatternSearch,
            max_evals: 400,
            mesh_start: 0.25,
            mesh_tol: 1e-4,
            fd_step: 1e-6,
            grad_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 1 {
            return Err(Error::Config("solver needs max_evals >= 1".into()));
        }
        let positive = [self.mesh_start, self.mesh_tol, self.fd_step, self.grad_tol];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("solver tolerances must be positive and finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maximum {
    pub theta: Theta,
    pub value: f64,
    /// Objective value at `θ = 0`.
    pub start: f64,
    pub evals: usize,
}

/// Smallest gain that counts as an improvement at objective level `f`.
fn min_gain(f: f64) -> f64 {
    1e-12 * f.abs().max(1.0)
}

fn improves(candidate: f64, current: f64) -> bool {
    if current == f64::NEG_INFINITY {
        return candidate > current;
    }
    candidate > current + min_gain(current)
}

fn clamp(x: [f64; 4]) -> [f64; 4] {
    x.map(|v| v.clamp(-BOUND, BOUND))
}

/// Local maximization of `f(θ)` from `θ = 0`. The result is never worse than
/// the start; a flat objective returns `θ = 0`.
pub fn maximize(obj: &Objective, kappa: &StackedKraus, i: usize, j: usize, cfg: &SolverConfig) -> Result<Maximum> {
    cfg.validate()?;
    check_rows(kappa.rows(), i, j)?;
    obj.check(kappa)?;
    let mut ev = Evaluator::new(obj, kappa, i, j);
    let start = ev.eval([0.0; 4]);
    let (x, value) = match cfg.kind {
        SolverKind::PatternSearch => pattern_search(&mut ev, start, cfg),
        SolverKind::FdLocal => fd_local(&mut ev, start, cfg),
    };
    Ok(Maximum {
        theta: Theta::from_array(x),
        value,
        start,
        evals: ev.evals,
    })
}

fn pattern_search(ev: &mut Evaluator, f0: f64, cfg: &SolverConfig) -> ([f64; 4], f64) {
    let mut x = [0.0; 4];
    let mut fx = f0;
    let mut mesh = cfg.mesh_start;
    while mesh >= cfg.mesh_tol && ev.evals < cfg.max_evals {
        let mut success = false;
        'poll: for axis in 0..4 {
            for sign in [1.0, -1.0] {
                let mut c = x;
                c[axis] += sign * mesh;
                let c = clamp(c);
                if c == x {
                    continue;
                }
                if ev.evals >= cfg.max_evals {
                    break 'poll;
                }
                let fc = ev.eval(c);
                if improves(fc, fx) {
                    x = c;
                    fx = fc;
                    success = true;
                    break 'poll;
                }
            }
        }
        if success {
            mesh = (mesh * 2.0).min(2.0 * BOUND);
        } else {
            mesh *= 0.5;
        }
    }
    (x, fx)
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with components pointing out of the box at an active bound zeroed.
fn projected(g: [f64; 4], x: &[f64; 4]) -> [f64; 4] {
    let mut p = g;
    for k in 0..4 {
        if (x[k] >= BOUND && g[k] > 0.0) || (x[k] <= -BOUND && g[k] < 0.0) {
            p[k] = 0.0;
        }
    }
    p
}

fn fd_local(ev: &mut Evaluator, f0: f64, cfg: &SolverConfig) -> ([f64; 4], f64) {
    let h = cfg.fd_step;
    let mut x = [0.0; 4];
    let mut fx = f0;
    if !fx.is_finite() {
        return (x, fx);
    }
    let gradient = |ev: &mut Evaluator, x: &[f64; 4]| -> Option<[f64; 4]> {
        let mut g = [0.0; 4];
        for k in 0..4 {
            let (mut up, mut dn) = (*x, *x);
            up[k] += h;
            dn[k] -= h;
            let (fu, fd) = (ev.eval(up), ev.eval(dn));
            if !fu.is_finite() || !fd.is_finite() {
                return None;
            }
            g[k] = (fu - fd) / (2.0 * h);
        }
        Some(g)
    };
    // inverse Hessian approximation of -f
    let mut hinv = [[0.0; 4]; 4];
    for (k, row) in hinv.iter_mut().enumerate() {
        row[k] = 1.0;
    }
    let Some(mut g) = gradient(ev, &x) else {
        return (x, fx);
    };
    while ev.evals + 8 < cfg.max_evals {
        let pg = projected(g, &x);
        if pg.iter().map(|v| v * v).sum::<f64>().sqrt() < cfg.grad_tol {
            break;
        }
        let mut d = [0.0; 4];
        for r in 0..4 {
            d[r] = (0..4).map(|c| hinv[r][c] * pg[c]).sum();
        }
        if dot(&d, &pg) <= 0.0 {
            d = pg;
            hinv = [[0.0; 4]; 4];
            for (k, row) in hinv.iter_mut().enumerate() {
                row[k] = 1.0;
            }
        }
        // cap the first trial step at one mesh of the pattern search
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut t = (cfg.mesh_start / norm).min(1.0);
        let mut accepted = None;
        while t * norm > 1e-12 && ev.evals < cfg.max_evals {
            let mut c = x;
            for k in 0..4 {
                c[k] += t * d[k];
            }
            let c = clamp(c);
            let fc = ev.eval(c);
            if fc.is_finite() && fc >= fx + 1e-4 * t * dot(&d, &pg) && improves(fc, fx) {
                accepted = Some((c, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else { break };
        let Some(gn) = gradient(ev, &xn) else {
            x = xn;
            fx = fxn;
            break;
        };
        // BFGS update on the minimization of -f
        let s: [f64; 4] = std::array::from_fn(|k| xn[k] - x[k]);
        let yv: [f64; 4] = std::array::from_fn(|k| g[k] - gn[k]);
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy: [f64; 4] = std::array::from_fn(|r| (0..4).map(|c| hinv[r][c] * yv[c]).sum());
            let yhy = dot(&yv, &hy);
            for r in 0..4 {
                for c in 0..4 {
                    hinv[r][c] += -rho * (hy[r] * s[c] + s[r] * hy[c]) + (rho * rho * yhy + rho) * s[r] * s[c];
                }
            }
        }
        x = xn;
        fx = fxn;
        g = gn;
    }
    (x, fx)
}
