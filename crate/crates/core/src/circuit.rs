//! Circuit check that a two-state, three-output HMM filter step can be
//! realized with unitaries, environment registers, a projective measurement
//! and partial traces. Also holds the general HMM to Kraus embedding.
//!
//! Register order is system first, environment second. For a step:
//!
//! 1. `ρ ⊗ |0⟩⟨0|` (2x2 environment), conjugate by `U₁`, trace out the system.
//! 2. `⊗ |0⟩⟨0|` (3x3 environment), conjugate by `U₂ = V₀ ⊕ V₁`.
//! 3. Project with `I₂ ⊗ |y⟩⟨y|`, trace out the 3-dim register, normalize.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::cxmat::{conjugate, CMatrix, Subsystem, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::gen::HmmSpec;
use crate::hqmm::{DensityMatrix, HqmmModel, StackedKraus, ZERO_PROB_FLOOR};

/// One filter step of a 2-state, 3-output HMM.
///
/// Transition `A = [[a, 1-b], [1-a, b]]` (column-stochastic), emission columns
/// `e` (state 0) and `f` (state 1), previous state `[[r, c], [c*, s]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prop1Instance {
    pub a: f64,
    pub b: f64,
    pub e: [f64; 3],
    pub f: [f64; 3],
    pub r: f64,
    pub c: C64,
    /// Observed symbol, 0-based.
    pub y: usize,
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

fn check_simplex(v: &[f64; 3], what: &str) -> Result<()> {
    if !v.iter().all(|&x| in_unit(x)) || (v.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("{what} = {v:?} is not a probability vector")));
    }
    Ok(())
}

fn random_simplex(rng: &mut impl Rng) -> [f64; 3] {
    let g: [f64; 3] = std::array::from_fn(|_| Exp1.sample(rng));
    let s: f64 = g.iter().sum();
    g.map(|x| x / s)
}

impl Prop1Instance {
    pub fn s(&self) -> f64 {
        1.0 - self.r
    }

    /// Uniform `a`, `b`, `r`, `y`; Dirichlet(1,1,1) emission columns; a
    /// coherence of uniform phase and magnitude up to `√(rs)`.
    pub fn random(rng: &mut impl Rng) -> Self {
        let r: f64 = rng.random();
        let mag = rng.random::<f64>() * (r * (1.0 - r)).sqrt();
        let phase = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        Self {
            a: rng.random(),
            b: rng.random(),
            e: random_simplex(rng),
            f: random_simplex(rng),
            r,
            c: C64::from_polar(mag, phase),
            y: rng.random_range(0..3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !in_unit(self.a) || !in_unit(self.b) || !in_unit(self.r) {
            return Err(Error::Validation("a, b and r must lie in [0, 1]".into()));
        }
        check_simplex(&self.e, "e")?;
        check_simplex(&self.f, "f")?;
        if self.c.norm() > (self.r * self.s()).sqrt() * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Validation(format!("coherence {} exceeds √(rs)", self.c)));
        }
        if self.y > 2 {
            return Err(Error::Index(format!("symbol {} outside 0..3", self.y)));
        }
        Ok(())
    }

    pub fn rho_prev(&self) -> DensityMatrix {
        let m = CMatrix::from_rows(&[
            vec![C64::new(self.r, 0.0), self.c],
            vec![self.c.conj(), C64::new(self.s(), 0.0)],
        ]);
        DensityMatrix::new_unchecked(m)
    }
}

fn reflection(p: f64, swap: bool) -> [[f64; 2]; 2] {
    let (u, v) = if swap { ((1.0 - p).sqrt(), p.sqrt()) } else { (p.sqrt(), (1.0 - p).sqrt()) };
    [[u, v], [v, -u]]
}

/// `U₁ = |0⟩⟨0| ⊗ [[√a, √(1-a)], [√(1-a), -√a]] + |1⟩⟨1| ⊗ [[√(1-b), √b], [√b, -√(1-b)]]`.
pub fn build_u1(a: f64, b: f64) -> Result<CMatrix> {
    if !in_unit(a) || !in_unit(b) {
        return Err(Error::Validation(format!("transition probabilities ({a}, {b}) outside [0, 1]")));
    }
    let blocks = [reflection(a, false), reflection(b, true)];
    Ok(CMatrix::from_fn(4, 4, |r, c| {
        let (sr, er, sc, ec) = (r / 2, r % 2, c / 2, c % 2);
        if sr == sc {
            C64::new(blocks[sr][er][ec], 0.0)
        } else {
            ZERO
        }
    }))
}

/// Real orthogonal 3x3 matrix whose first column is `√p`, completed by
/// Gram-Schmidt against the canonical basis.
fn completion(p: &[f64; 3]) -> [[f64; 3]; 3] {
    let mut cols: Vec<[f64; 3]> = vec![p.map(f64::sqrt)];
    for k in 0..3 {
        if cols.len() == 3 {
            break;
        }
        let mut v = [0.0; 3];
        v[k] = 1.0;
        for q in &cols {
            let d: f64 = (0..3).map(|i| q[i] * v[i]).sum();
            for i in 0..3 {
                v[i] -= d * q[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.map(|x| x / norm));
        }
    }
    let mut m = [[0.0; 3]; 3];
    for (c, col) in cols.iter().enumerate() {
        for r in 0..3 {
            m[r][c] = col[r];
        }
    }
    m
}

/// `U₂ = V₀ ⊕ V₁` with `V₀|0⟩ = Σ √e_y |y⟩` and `V₁|0⟩ = Σ √f_y |y⟩`.
pub fn build_u2(e: &[f64; 3], f: &[f64; 3]) -> Result<CMatrix> {
    check_simplex(e, "e")?;
    check_simplex(f, "f")?;
    let blocks = [completion(e), completion(f)];
    Ok(CMatrix::from_fn(6, 6, |r, c| {
        let (sr, er, sc, ec) = (r / 3, r % 3, c / 3, c % 3);
        if sr == sc {
            C64::new(blocks[sr][er][ec], 0.0)
        } else {
            ZERO
        }
    }))
}

fn ground(dim: usize) -> CMatrix {
    DensityMatrix::basis(dim, 0).into_mat()
}

#[derive(Clone, Debug)]
pub struct CircuitOutput {
    pub state: DensityMatrix,
    /// Trace after projection and before normalization, i.e. `P(y)`.
    pub trace: f64,
}

impl CircuitOutput {
    pub fn diag(&self) -> [f64; 2] {
        let m = self.state.mat();
        [m[(0, 0)].re, m[(1, 1)].re]
    }
}

/// Runs the circuit for one instance.
pub fn circuit_posterior(inst: &Prop1Instance) -> Result<CircuitOutput> {
    inst.validate()?;
    let joint = inst.rho_prev().mat().tensor(&ground(2));
    let evolved = conjugate(&build_u1(inst.a, inst.b)?, &joint)?;
    let moved = evolved.partial_trace(2, 2, Subsystem::A)?;

    let joint = moved.tensor(&ground(3));
    let emitted = conjugate(&build_u2(&inst.e, &inst.f)?, &joint)?;
    let mut ket = vec![ZERO; 3];
    ket[inst.y] = ONE;
    let proj = CMatrix::identity(2).tensor(&CMatrix::outer(&ket));
    let measured = conjugate(&proj, &emitted)?;
    let reduced = measured.partial_trace(2, 3, Subsystem::B)?;

    let trace = reduced.trace().re;
    if !(trace > ZERO_PROB_FLOOR) {
        return Err(Error::ZeroProbability);
    }
    let state = DensityMatrix::new_unchecked(reduced.scale(C64::new(1.0 / trace, 0.0)));
    Ok(CircuitOutput { state, trace })
}

/// Classical filtered posterior and its denominator `D = P(y)`.
pub fn classical_posterior(inst: &Prop1Instance) -> Result<([f64; 2], f64)> {
    let (a, b, r, s) = (inst.a, inst.b, inst.r, inst.s());
    let p0 = inst.e[inst.y] * (a * r + (1.0 - b) * s);
    let p1 = inst.f[inst.y] * ((1.0 - a) * r + b * s);
    let d = p0 + p1;
    if !(d > ZERO_PROB_FLOOR) {
        return Err(Error::ZeroProbability);
    }
    Ok(([p0 / d, p1 / d], d))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prop1Report {
    pub trials: usize,
    /// Instances skipped because the observation had zero probability.
    pub zero_probability: usize,
    pub max_diag_deviation: f64,
    pub max_trace_deviation: f64,
}

impl Prop1Report {
    pub fn passes(&self, diag_tol: f64, trace_tol: f64) -> bool {
        self.max_diag_deviation < diag_tol && self.max_trace_deviation < trace_tol
    }
}

/// Compares circuit and classical posteriors on `trials` random instances.
pub fn prop1_sweep(trials: usize, rng: &mut impl Rng) -> Prop1Report {
    let instances: Vec<Prop1Instance> = (0..trials).map(|_| Prop1Instance::random(rng)).collect();
    compare_all(&instances)
}

pub fn compare_all(instances: &[Prop1Instance]) -> Prop1Report {
    let mut rep = Prop1Report {
        trials: instances.len(),
        ..Default::default()
    };
    for inst in instances {
        match (circuit_posterior(inst), classical_posterior(inst)) {
            (Ok(q), Ok((x, d))) => {
                let qd = q.diag();
                let dev = (qd[0] - x[0]).abs().max((qd[1] - x[1]).abs());
                rep.max_diag_deviation = rep.max_diag_deviation.max(dev);
                rep.max_trace_deviation = rep.max_trace_deviation.max((q.trace - d).abs());
            }
            (Err(Error::ZeroProbability), Err(Error::ZeroProbability)) => rep.zero_probability += 1,
            // one side says impossible, the other does not
            _ => rep.max_diag_deviation = f64::INFINITY,
        }
    }
    rep
}

/// Kraus form of a classical HMM: for each symbol `y` and pair `(w, j)`,
/// `K = √T_y(w, j) |w⟩⟨j|` with `T_y = diag(C[y,:]) A`. Copy index is
/// `q = w·n + j`, so `n²` operators per symbol. `ρ₀ = diag(x0)`.
pub fn hmm_to_hqmm(spec: &HmmSpec, name: &str) -> HqmmModel {
    let (n, m) = (spec.n(), spec.m());
    let mut blocks = Vec::with_capacity(m * n * n);
    for y in 0..m {
        let t = spec.transfer(y);
        for w in 0..n {
            for j in 0..n {
                let mut k = CMatrix::zeros(n, n);
                k[(w, j)] = C64::new(t[w * n + j].sqrt(), 0.0);
                blocks.push(k);
            }
        }
    }
    HqmmModel {
        name: name.into(),
        kraus: StackedKraus::from_blocks(m, n * n, &blocks).expect("n x n blocks"),
        rho0: DensityMatrix::diagonal(spec.x0()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::testutil::rng;
    use crate::gen::{benchmark, Benchmark};
    use crate::hqmm::{seq_loglik, step, validate};

    fn unitarity(u: &CMatrix) -> f64 {
        u.adjoint().matmul(u).unwrap().max_abs_diff(&CMatrix::identity(u.rows()))
    }

    #[test]
    fn u1_examples() {
        let u = build_u1(0.5, 0.3).unwrap();
        let h = 0.5f64.sqrt();
        assert!((u[(0, 0)].re - h).abs() < 1e-15);
        assert!((u[(0, 1)].re - h).abs() < 1e-15);
        assert!((u[(1, 1)].re + h).abs() < 1e-15);

        let u = build_u1(1.0, 1.0).unwrap();
        // |0⟩|0⟩ stays put, |1⟩|0⟩ moves the environment to |1⟩
        assert_eq!(u[(0, 0)], ONE);
        assert_eq!(u[(3, 2)], ONE);
        assert!(build_u1(1.2, 0.0).is_err());
    }

    #[test]
    fn u1_and_u2_are_unitary() {
        let mut r = rng(1);
        for _ in 0..200 {
            let inst = Prop1Instance::random(&mut r);
            assert!(unitarity(&build_u1(inst.a, inst.b).unwrap()) < 1e-12);
            let u2 = build_u2(&inst.e, &inst.f).unwrap();
            assert!(unitarity(&u2) < 1e-12);
            for k in 0..3 {
                assert!((u2[(k, 0)].re - inst.e[k].sqrt()).abs() < 1e-15);
                assert!((u2[(3 + k, 3)].re - inst.f[k].sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn u2_examples() {
        let u = build_u2(&[1.0, 0.0, 0.0], &[0.25, 0.25, 0.5]).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(u[(r, c)].re, if r == c { 1.0 } else { 0.0 });
            }
        }
        assert!((u[(3, 3)].re - 0.5).abs() < 1e-15);
        assert!((u[(4, 3)].re - 0.5).abs() < 1e-15);
        assert!((u[(5, 3)].re - 0.5f64.sqrt()).abs() < 1e-15);
        // boundary columns where a closed-form completion would divide by zero
        assert!(unitarity(&build_u2(&[0.0, 0.0, 1.0], &[0.0, 0.5, 0.5]).unwrap()) < 1e-12);
        assert!(build_u2(&[0.5, 0.6, 0.0], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn deterministic_chain() {
        let inst = Prop1Instance {
            a: 1.0,
            b: 1.0,
            e: [1.0, 0.0, 0.0],
            f: [0.0, 1.0, 0.0],
            r: 1.0,
            c: ZERO,
            y: 0,
        };
        assert_eq!(circuit_posterior(&inst).unwrap().diag(), [1.0, 0.0]);
        assert_eq!(classical_posterior(&inst).unwrap().0, [1.0, 0.0]);
        let impossible = Prop1Instance { y: 2, ..inst };
        assert!(matches!(circuit_posterior(&impossible), Err(Error::ZeroProbability)));
        assert!(matches!(classical_posterior(&impossible), Err(Error::ZeroProbability)));
    }

    #[test]
    fn symmetric_instance() {
        let inst = Prop1Instance {
            a: 0.5,
            b: 0.5,
            e: [0.2, 0.3, 0.5],
            f: [0.2, 0.3, 0.5],
            r: 0.5,
            c: ZERO,
            y: 1,
        };
        let d = circuit_posterior(&inst).unwrap().diag();
        assert!((d[0] - 0.5).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equal_emissions_give_the_transition_marginal() {
        let mut r = rng(2);
        for _ in 0..50 {
            let mut inst = Prop1Instance::random(&mut r);
            inst.f = inst.e;
            let d = circuit_posterior(&inst).unwrap().diag();
            let ax = [inst.a * inst.r + (1.0 - inst.b) * inst.s(), (1.0 - inst.a) * inst.r + inst.b * inst.s()];
            assert!((d[0] - ax[0]).abs() < 1e-12 && (d[1] - ax[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_posterior_matches_matrix_filtering() {
        let mut r = rng(3);
        for _ in 0..100 {
            let inst = Prop1Instance::random(&mut r);
            // T_y x / 1ᵀ T_y x with explicit matrices
            let a = [[inst.a, 1.0 - inst.b], [1.0 - inst.a, inst.b]];
            let cy = [inst.e[inst.y], inst.f[inst.y]];
            let x = [inst.r, inst.s()];
            let tx: Vec<f64> = (0..2).map(|i| cy[i] * (a[i][0] * x[0] + a[i][1] * x[1])).collect();
            let z = tx[0] + tx[1];
            let (post, d) = classical_posterior(&inst).unwrap();
            assert!((d - z).abs() < 1e-15);
            assert!((post[0] - tx[0] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_agrees() {
        let rep = prop1_sweep(300, &mut rng(4));
        assert_eq!(rep.trials, 300);
        assert!(rep.passes(1e-10, 1e-12), "{rep:?}");
    }

    #[test]
    fn single_state_embedding_is_the_emission_column() {
        let spec = HmmSpec::new(1, 3, vec![1.0], vec![0.2, 0.3, 0.5], vec![1.0]).unwrap();
        let q = hmm_to_hqmm(&spec, "one");
        for (y, p) in [(1, 0.2), (2, 0.3), (3, 0.5)] {
            assert!((q.kraus.operator(y, 1)[(0, 0)].re - f64::sqrt(p)).abs() < 1e-15);
            assert!((step(&q.rho0, y as u32, &q.kraus).unwrap().prob - p).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_transition_embedding() {
        let c = vec![0.1, 0.6, 0.9, 0.4];
        let spec = HmmSpec::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], c, vec![0.3, 0.7]).unwrap();
        let q = hmm_to_hqmm(&spec, "id");
        let p = step(&q.rho0, 1, &q.kraus).unwrap().prob;
        assert!((p - (0.1 * 0.3 + 0.6 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn embedding_matches_forward_algorithm() {
        let spec = benchmark(Benchmark::Hmm88).classical().unwrap().clone();
        let q = hmm_to_hqmm(&spec, "hmm_88");
        assert!(validate(&q.kraus, 1e-12).is_valid());
        let mut r = rng(5);
        for _ in 0..20 {
            let t = r.random_range(1..=20);
            let ys: Vec<u32> = (0..t).map(|_| r.random_range(1..=8)).collect();
            let lq = seq_loglik(&q.kraus, &q.rho0, &ys).unwrap();
            let lc = spec.seq_loglik(&ys).unwrap();
            assert!((lq - lc).abs() < 1e-8);
        }
    }

    #[test]
    fn embedded_states_stay_diagonal() {
        let spec = benchmark(Benchmark::Hmm88).classical().unwrap().clone();
        let q = hmm_to_hqmm(&spec, "hmm_88");
        let mut rho = q.rho0.clone();
        for y in [3u32, 1, 8, 8, 2] {
            rho = step(&rho, y, &q.kraus).unwrap().state.unwrap();
            let m = rho.mat();
            for i in 0..8 {
                for j in 0..8 {
                    if i != j {
                        assert!(m[(i, j)].norm() < 1e-12);
                    }
                }
            }
        }
    }
}
