//! Variational compression of Heisenberg time evolution into brickwall
//! circuits.
//!
//! The cost is `ε = 1 - Re(e^{iφ} Tr[U_E† U_C(θ)]) / D`, where `φ` is an
//! explicit global-phase parameter trained alongside the circuit angles.
//! Gradients are computed analytically by sweeping prefix products forward
//! and the adjoint environment backward through the gate list.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    self, apply_left, apply_right, bond_layers, build_brickwall, canonical_derivative, single_qubit_derivative, Bc,
    Circuit, Gate,
};
use crate::linalg::{c64, expm_hermitian, ComplexMatrix};
use crate::pauli::{Letter, PauliString};
use crate::{Error, Result};

/// Largest chain for which the exact propagator is built densely.
pub const MAX_PROPAGATOR_QUBITS: usize = 10;

/// Heisenberg Hamiltonian `Σ_bonds S_i · S_j` with `S = σ/2`.
pub fn heisenberg_hamiltonian(l: usize, bc: Bc) -> Result<ComplexMatrix> {
    if l > MAX_PROPAGATOR_QUBITS {
        return Err(Error::Overflow(format!("Hamiltonian for {l} sites exceeds {MAX_PROPAGATOR_QUBITS}")));
    }
    let dim = 1usize << l;
    let mut h = ComplexMatrix::zeros(dim, dim);
    for layer in bond_layers(l, bc)? {
        for (i, j) in layer {
            for letter in [Letter::X, Letter::Y, Letter::Z] {
                let mut p = PauliString::identity(l)?;
                p.set_letter(i, letter);
                p.set_letter(j, letter);
                h.axpy(c64::new(0.25, 0.0), &p.to_matrix()?)?;
            }
        }
    }
    Ok(h)
}

/// `U_E = exp(-i H t)`.
pub fn exact_propagator(l: usize, bc: Bc, t: f64) -> Result<ComplexMatrix> {
    expm_hermitian(&heisenberg_hamiltonian(l, bc)?, t)
}

/// `ε = 1 - Re Tr[U_E† U_C] / D`. Not invariant under a global phase of `U_C`.
pub fn epsilon(u_exact: &ComplexMatrix, u_circ: &ComplexMatrix) -> Result<f64> {
    if !u_exact.is_square() || u_exact.rows() != u_circ.rows() || u_exact.cols() != u_circ.cols() {
        return Err(Error::Dimension(format!(
            "epsilon: {}x{} vs {}x{}",
            u_exact.rows(),
            u_exact.cols(),
            u_circ.rows(),
            u_circ.cols()
        )));
    }
    Ok(1.0 - u_exact.inner(u_circ)?.re / u_exact.rows() as f64)
}

/// Value and gradient of `ε(e^{iφ} U_C)` for an arbitrary circuit.
///
/// Only gates flagged in `trainable` contribute parameters; each must be a
/// `SingleQubitU` or `CanonicalTwoQubit` and contributes 3 entries in gate
/// order. Returns `(ε, ∂ε/∂θ, ∂ε/∂φ)`.
pub fn circuit_gradient(
    u_exact: &ComplexMatrix,
    circuit: &Circuit,
    trainable: &[bool],
    phase: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    let gates = circuit.gates();
    if trainable.len() != gates.len() {
        return Err(Error::Dimension(format!("{} trainable flags for {} gates", trainable.len(), gates.len())));
    }
    let l = circuit.num_qubits();
    let dim = 1usize << l;
    if u_exact.rows() != dim || !u_exact.is_square() {
        return Err(Error::Dimension(format!("target is {}x{}, circuit has D={dim}", u_exact.rows(), u_exact.cols())));
    }
    for (g, &t) in gates.iter().zip(trainable) {
        if t && !matches!(g, Gate::SingleQubitU { .. } | Gate::CanonicalTwoQubit { .. }) {
            return Err(Error::UnsupportedGate { gate: g.to_string(), context: "circuit_gradient" });
        }
    }
    let mats: Vec<ComplexMatrix> = gates.iter().map(Gate::matrix).collect();
    let qubits: Vec<Vec<usize>> = gates.iter().map(Gate::qubits).collect();

    // prefixes[k] = G_{k-1} ⋯ G_0
    let mut prefixes = Vec::with_capacity(gates.len() + 1);
    let mut acc = ComplexMatrix::identity(dim);
    prefixes.push(acc.clone());
    for (m, q) in mats.iter().zip(&qubits) {
        apply_left(&mut acc, m, q, l);
        prefixes.push(acc.clone());
    }
    let tr = u_exact.inner(&acc)?;
    let rot = c64::from_polar(1.0, phase);
    let d = dim as f64;
    let eps = 1.0 - (rot * tr).re / d;
    let dphase = (rot * tr).im / d;

    let n_params = 3 * trainable.iter().filter(|&&t| t).count();
    let mut grad = vec![0.0; n_params];
    let mut slot = n_params;
    // r = U_E† · G_{N-1} ⋯ G_{k+1}
    let mut r = u_exact.adjoint();
    for k in (0..gates.len()).rev() {
        if trainable[k] {
            slot -= 3;
            let env = prefixes[k].matmul(&r)?;
            let t = reduced_environment(&env, &qubits[k], l);
            for p in 0..3 {
                let dg = match gates[k] {
                    Gate::SingleQubitU { mu, .. } => single_qubit_derivative(mu, p),
                    Gate::CanonicalTwoQubit { nu, .. } => canonical_derivative(nu, p),
                    _ => unreachable!("checked above"),
                };
                let contraction: c64 = dg.data().iter().zip(t.data()).map(|(a, b)| a * b).sum();
                grad[slot + p] = -(rot * contraction).re / d;
            }
        }
        apply_right(&mut r, &mats[k], &qubits[k], l);
    }
    Ok((eps, grad, dphase))
}

/// `T[a, b] = Σ_r Env[(b, r), (a, r)]`, so that `Tr[(g ⊗ 1) Env] = Σ g[a,b] T[a,b]`.
fn reduced_environment(env: &ComplexMatrix, qubits: &[usize], l: usize) -> ComplexMatrix {
    let bits: Vec<usize> = qubits.iter().map(|&q| 1usize << (l - 1 - q)).collect();
    let k = 1usize << bits.len();
    let offs: Vec<usize> = (0..k)
        .map(|x| bits.iter().enumerate().filter(|(p, _)| x >> (bits.len() - 1 - p) & 1 == 1).map(|(_, b)| b).sum())
        .collect();
    let mask: usize = bits.iter().sum();
    let mut t = ComplexMatrix::zeros(k, k);
    for base in (0..1usize << l).filter(|i| i & mask == 0) {
        for a in 0..k {
            for b in 0..k {
                t[(a, b)] += env[(base + offs[b], base + offs[a])];
            }
        }
    }
    t
}

/// Target and ansatz shape for one compression run.
#[derive(Clone, Debug)]
pub struct CompressionProblem {
    pub num_qubits: usize,
    pub bc: Bc,
    pub t: f64,
    pub n_layers: usize,
    u_exact: ComplexMatrix,
}

/// Serializable description of a [`CompressionProblem`] without the target matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub num_qubits: usize,
    pub bc: Bc,
    pub t: f64,
    pub n_layers: usize,
}

impl CompressionProblem {
    pub fn new(num_qubits: usize, bc: Bc, t: f64, n_layers: usize) -> Result<CompressionProblem> {
        let u_exact = exact_propagator(num_qubits, bc, t)?;
        Ok(CompressionProblem { num_qubits, bc, t, n_layers, u_exact })
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec { num_qubits: self.num_qubits, bc: self.bc, t: self.t, n_layers: self.n_layers }
    }

    pub fn u_exact(&self) -> &ComplexMatrix {
        &self.u_exact
    }

    /// Circuit parameters, excluding the global phase.
    pub fn num_params(&self) -> usize {
        circuit::brickwall_param_count(self.num_qubits, self.n_layers)
    }

    pub fn circuit(&self, theta: &[f64]) -> Result<Circuit> {
        build_brickwall(self.num_qubits, self.n_layers, theta)
    }

    /// ε for circuit parameters `theta` and global phase `phase`.
    pub fn cost(&self, theta: &[f64], phase: f64) -> Result<f64> {
        let u = self.circuit(theta)?.unitary()?.scale(c64::from_polar(1.0, phase));
        epsilon(&self.u_exact, &u)
    }

    /// Gradient with respect to `params = θ ++ [φ]`.
    pub fn gradient(&self, params: &[f64]) -> Result<Vec<f64>> {
        Ok(self.cost_and_gradient(params)?.1)
    }

    /// `(ε, ∇ε)` at `params = θ ++ [φ]`.
    pub fn cost_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.num_params();
        if params.len() != n + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters ({n} angles and a phase), got {}",
                n + 1,
                params.len()
            )));
        }
        let c = self.circuit(&params[..n])?;
        let trainable = vec![true; c.len()];
        let (eps, mut grad, dphase) = circuit_gradient(&self.u_exact, &c, &trainable, params[n])?;
        grad.push(dphase);
        Ok((eps, grad))
    }
}

/// ADAM hyperparameters and restart schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_hat: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub target_eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_hat: 1e-8,
            max_iters: 5000,
            restarts: 8,
            seed: 0,
            target_eps: 1e-12,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("adam: {m}")));
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.epsilon_hat > 0.0) {
            return bad("epsilon_hat must be positive");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        Ok(())
    }
}

/// Result of [`adam_optimize`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizationTrace {
    /// ε before each update, one vector per restart.
    pub eps: Vec<Vec<f64>>,
    pub best_theta: Vec<f64>,
    pub best_phase: f64,
    pub best_eps: f64,
    pub best_restart: usize,
    pub wall_time_s: f64,
}

struct RestartResult {
    eps: Vec<f64>,
    best: Vec<f64>,
    best_eps: f64,
}

fn run_restart(problem: &CompressionProblem, config: &AdamConfig, restart: usize) -> Result<RestartResult> {
    let n = problem.num_params() + 1;
    let mut x: Vec<f64> = if restart == 0 {
        let mut v = circuit::trotter_equivalent_params(problem.num_qubits, problem.n_layers, problem.t);
        v.push(0.0);
        v
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(restart as u64);
        (0..n).map(|_| rng.random_range(-PI..PI)).collect()
    };
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut trace = Vec::with_capacity(config.max_iters);
    let mut best = x.clone();
    let mut best_eps = f64::INFINITY;
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for _ in 0..config.max_iters {
        let (eps, g) = problem.cost_and_gradient(&x)?;
        trace.push(eps);
        if eps < best_eps {
            best_eps = eps;
            best.copy_from_slice(&x);
        }
        if eps <= config.target_eps {
            break;
        }
        b1t *= config.beta1;
        b2t *= config.beta2;
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1t);
            let vh = v[i] / (1.0 - b2t);
            x[i] -= config.learning_rate * mh / (vh.sqrt() + config.epsilon_hat);
        }
    }
    if config.max_iters == 0 {
        best_eps = problem.cost_and_gradient(&x)?.0;
    }
    Ok(RestartResult { eps: trace, best, best_eps })
}

/// Multi-start ADAM.
///
/// Restart 0 starts from the Trotter-equivalent parameters, the others from
/// `Uniform(-π, π)` draws on a per-restart ChaCha stream. Restarts run in
/// parallel; each stops early once `target_eps` is reached. The result is
/// independent of thread scheduling.
pub fn adam_optimize(problem: &CompressionProblem, config: &AdamConfig) -> Result<OptimizationTrace> {
    config.validate()?;
    let start = Instant::now();
    let results: Vec<RestartResult> =
        (0..config.restarts).into_par_iter().map(|r| run_restart(problem, config, r)).collect::<Result<_>>()?;
    let (best_restart, winner) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_eps.total_cmp(&b.1.best_eps).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    let n = problem.num_params();
    Ok(OptimizationTrace {
        best_theta: winner.best[..n].to_vec(),
        best_phase: winner.best[n],
        best_eps: winner.best_eps,
        best_restart,
        eps: results.iter().map(|r| r.eps.clone()).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_trotter1, build_trotter2};

    #[test]
    fn propagator_basics() {
        let u0 = exact_propagator(3, Bc::Open, 0.0).unwrap();
        assert!(u0.sub(&ComplexMatrix::identity(8)).unwrap().max_abs() < 1e-12);
        let (vals, _) = crate::linalg::eigh(&heisenberg_hamiltonian(2, Bc::Open).unwrap()).unwrap();
        for (v, e) in vals.iter().zip([-0.75, 0.25, 0.25, 0.25]) {
            assert!((v - e).abs() < 1e-12);
        }
        let u = exact_propagator(4, Bc::Periodic, 0.8).unwrap();
        let ub = exact_propagator(4, Bc::Periodic, -0.8).unwrap();
        assert!(u.adjoint().sub(&ub).unwrap().max_abs() < 1e-12);
        assert!(exact_propagator(2, Bc::Periodic, 1.0).is_err());
    }

    #[test]
    fn epsilon_bounds() {
        let u = exact_propagator(3, Bc::Open, 0.4).unwrap();
        assert!(epsilon(&u, &u).unwrap().abs() < 1e-14);
        assert!((epsilon(&u, &u.scale_real(-1.0)).unwrap() - 2.0).abs() < 1e-14);
        assert!(epsilon(&u, &ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn two_site_trotter_is_exact() {
        let ue = exact_propagator(2, Bc::Open, 1.0).unwrap();
        for c in [build_trotter1(2, Bc::Open, 1.0, 1).unwrap(), build_trotter2(2, Bc::Open, 1.0, 1).unwrap()] {
            assert!(epsilon(&ue, &c.unitary().unwrap()).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn trotter2_beats_trotter1() {
        for l in [3, 4] {
            for bc in [Bc::Open, Bc::Periodic] {
                for t in [0.5, 1.0] {
                    let ue = exact_propagator(l, bc, t).unwrap();
                    for n in 1..=8 {
                        let e1 = epsilon(&ue, &build_trotter1(l, bc, t, n).unwrap().unitary().unwrap()).unwrap();
                        let e2 = epsilon(&ue, &build_trotter2(l, bc, t, n).unwrap().unitary().unwrap()).unwrap();
                        assert!(e2 <= e1, "L={l} {bc} t={t} n={n}: {e2} > {e1}");
                    }
                }
            }
        }
    }

    fn finite_difference(problem: &CompressionProblem, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let (mut p, mut m) = (x.to_vec(), x.to_vec());
                p[i] += h;
                m[i] -= h;
                (problem.cost_and_gradient(&p).unwrap().0 - problem.cost_and_gradient(&m).unwrap().0) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let problem = CompressionProblem::new(2, Bc::Open, 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x: Vec<f64> = (0..problem.num_params() + 1).map(|_| rng.random_range(-PI..PI)).collect();
            let g = problem.gradient(&x).unwrap();
            let fd = finite_difference(&problem, &x, 1e-5);
            let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
            assert!(num / den < 1e-5, "relative error {}", num / den);
        }
    }

    #[test]
    fn frozen_circuit_has_empty_gradient() {
        let c = build_trotter1(3, Bc::Open, 1.0, 2).unwrap();
        let ue = exact_propagator(3, Bc::Open, 1.0).unwrap();
        let (eps, g, _) = circuit_gradient(&ue, &c, &vec![false; c.len()], 0.0).unwrap();
        assert!(g.is_empty());
        assert!((eps - epsilon(&ue, &c.unitary().unwrap()).unwrap()).abs() < 1e-14);
        assert!(circuit_gradient(&ue, &c, &vec![true; c.len()], 0.0).is_err());
    }

    #[test]
    fn identity_target_converges_immediately() {
        let problem = CompressionProblem::new(3, Bc::Open, 0.0, 2).unwrap();
        let cfg = AdamConfig { restarts: 1, ..AdamConfig::default() };
        let tr = adam_optimize(&problem, &cfg).unwrap();
        assert!(tr.best_eps <= 1e-10);
        assert!(tr.eps[0].len() <= 10);
    }

    #[test]
    fn two_qubit_target_is_reachable() {
        let problem = CompressionProblem::new(2, Bc::Open, 1.0, 1).unwrap();
        let cfg = AdamConfig { restarts: 4, seed: 1, ..AdamConfig::default() };
        let tr = adam_optimize(&problem, &cfg).unwrap();
        assert!(tr.best_eps <= 1e-10, "best {}", tr.best_eps);
        let g = problem.gradient(&[tr.best_theta.clone(), vec![tr.best_phase]].concat()).unwrap();
        assert!(g.iter().all(|x| x.abs() <= 1e-6));
    }

    #[test]
    fn deterministic_under_seed() {
        let problem = CompressionProblem::new(3, Bc::Open, 1.0, 1).unwrap();
        let cfg = AdamConfig { restarts: 3, max_iters: 200, seed: 9, ..AdamConfig::default() };
        let a = adam_optimize(&problem, &cfg).unwrap();
        let b = adam_optimize(&problem, &cfg).unwrap();
        assert_eq!(a.eps, b.eps);
        assert_eq!(a.best_theta, b.best_theta);
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig { beta1: 1.0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig { restarts: 0, ..AdamConfig::default() }.validate().is_err());
        assert!(AdamConfig::default().validate().is_ok());
    }
}
