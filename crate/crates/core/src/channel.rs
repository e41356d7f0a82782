//! Density-matrix simulation of noisy circuits and the executor boundary
//! used by the tomography drivers.
//!
//! Superoperators use column stacking: `vec(ρ)[i + j·D] = ρ[i, j]`, so a
//! unitary channel has matrix `conj(U) ⊗ U`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{self, apply_left, apply_right, Circuit, Gate};
use crate::linalg::{c64, eigh, ComplexMatrix};
use crate::pauli::{Letter, PauliString};
use crate::tolerances::TOL;
use crate::{Error, Result};

/// Largest register simulated as a density matrix.
pub const MAX_SIM_QUBITS: usize = 6;

/// Single-qubit preparation in the `{0, 1, +, +i}` frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prep {
    Zero,
    One,
    Plus,
    PlusI,
}

impl Prep {
    pub const ALL: [Prep; 4] = [Prep::Zero, Prep::One, Prep::Plus, Prep::PlusI];

    pub fn label(self) -> &'static str {
        match self {
            Prep::Zero => "0",
            Prep::One => "1",
            Prep::Plus => "+",
            Prep::PlusI => "+i",
        }
    }

    fn amplitudes(self) -> [c64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Prep::Zero => [c64::new(1.0, 0.0), c64::new(0.0, 0.0)],
            Prep::One => [c64::new(0.0, 0.0), c64::new(1.0, 0.0)],
            Prep::Plus => [c64::new(h, 0.0), c64::new(h, 0.0)],
            Prep::PlusI => [c64::new(h, 0.0), c64::new(0.0, h)],
        }
    }

    /// Gates taking `|0>` to this state.
    pub fn gates(self, q: usize) -> Vec<Gate> {
        match self {
            Prep::Zero => vec![],
            Prep::One => vec![Gate::x(q)],
            Prep::Plus => vec![Gate::H { q }],
            Prep::PlusI => vec![Gate::H { q }, Gate::S { q }],
        }
    }
}

/// Parses a product-state label such as `"0+1"` or `"+i0"`.
pub fn parse_prep(spec: &str) -> Result<Vec<Prep>> {
    let mut out = Vec::new();
    let mut chars = spec.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(match c {
            '0' => Prep::Zero,
            '1' => Prep::One,
            '+' if chars.peek() == Some(&'i') => {
                chars.next();
                Prep::PlusI
            }
            '+' => Prep::Plus,
            _ => return Err(Error::InvalidArgument(format!("bad preparation label `{spec}`"))),
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty preparation label".into()));
    }
    Ok(out)
}

/// Circuit preparing a product state from `|0…0>`.
pub fn prep_circuit(preps: &[Prep]) -> Result<Circuit> {
    let label: String = preps.iter().map(|p| p.label()).collect();
    let mut c = Circuit::new(preps.len(), format!("prep_{label}"))?;
    for (q, p) in preps.iter().enumerate() {
        c.extend(p.gates(q))?;
    }
    Ok(c)
}

/// Basis change mapping the eigenbasis of `p` to the computational basis.
pub fn basis_change(p: &PauliString) -> Result<Circuit> {
    let mut c = Circuit::new(p.num_qubits(), format!("meas_{p}"))?;
    for q in 0..p.num_qubits() {
        match p.letter(q) {
            Letter::X => c.push(Gate::H { q })?,
            Letter::Y => c.extend([Gate::Sdg { q }, Gate::H { q }])?,
            _ => {}
        }
    }
    Ok(c)
}

/// Density matrix of `D = 2^L` levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    num_qubits: usize,
    data: ComplexMatrix,
}

impl DensityMatrix {
    /// Wraps `data` after checking Hermiticity, unit trace and positivity.
    pub fn new(data: ComplexMatrix) -> Result<DensityMatrix> {
        let dim = data.rows();
        if !data.is_square() || !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Dimension(format!("density matrix of shape {}x{}", data.rows(), data.cols())));
        }
        let rho = DensityMatrix { num_qubits: dim.trailing_zeros() as usize, data };
        rho.validate()?;
        Ok(rho)
    }

    pub fn pure(psi: &[c64]) -> Result<DensityMatrix> {
        let d = psi.len();
        let mut m = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        DensityMatrix::new(m)
    }

    pub fn basis_state(num_qubits: usize, index: usize) -> Result<DensityMatrix> {
        let d = 1usize << num_qubits;
        if index >= d {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        m[(index, index)] = c64::new(1.0, 0.0);
        Ok(DensityMatrix { num_qubits, data: m })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.data
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.data.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::Contract(format!("density matrix not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.data.trace();
        if (tr - c64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Contract(format!("density matrix trace {tr}")));
        }
        let (vals, _) = eigh(&self.data.hermitian_part()?)?;
        if vals[0] < -TOL.positivity {
            return Err(Error::Contract(format!("density matrix has eigenvalue {:.3e}", vals[0])));
        }
        Ok(())
    }

    pub fn purity(&self) -> f64 {
        self.data.inner(&self.data).expect("square").re
    }

    /// `Tr(ρ σ)`; the state fidelity when either argument is pure.
    pub fn overlap(&self, other: &DensityMatrix) -> Result<f64> {
        Ok(self.data.inner(&other.data)?.re)
    }

    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.num_qubits {
            return Err(Error::LengthMismatch { left: p.num_qubits(), right: self.num_qubits });
        }
        Ok(pauli_trace(p, &self.data).re)
    }

    /// Computational-basis outcome probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.data.rows()).map(|i| self.data[(i, i)].re.max(0.0)).collect()
    }
}

/// `Tr(P · M)` in `O(D)`.
pub(crate) fn pauli_trace(p: &PauliString, m: &ComplexMatrix) -> c64 {
    (0..m.rows())
        .map(|y| {
            let (row, amp) = p.apply_to_basis(y);
            amp * m[(y, row)]
        })
        .sum()
}

/// `Σ_x P[x', x] placed into `out` scaled by `coeff`.
pub(crate) fn add_pauli(out: &mut ComplexMatrix, p: &PauliString, coeff: c64) {
    for col in 0..out.cols() {
        let (row, amp) = p.apply_to_basis(col);
        out[(row, col)] += coeff * amp;
    }
}

/// Product state from `{0, 1, +, +i}` labels, e.g. `"0+1"`.
pub fn prepare_product(spec: &str) -> Result<DensityMatrix> {
    let preps = parse_prep(spec)?;
    if preps.len() > MAX_SIM_QUBITS {
        return Err(Error::Overflow(format!("{} qubits exceed simulator bound {MAX_SIM_QUBITS}", preps.len())));
    }
    let mut psi = vec![c64::new(1.0, 0.0)];
    for p in preps {
        let a = p.amplitudes();
        psi = psi.iter().flat_map(|x| [x * a[0], x * a[1]]).collect();
    }
    DensityMatrix::pure(&psi)
}

/// Trace-preserving Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausSet {
    ops: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<KrausSet> {
        let first = ops.first().ok_or_else(|| Error::InvalidArgument("empty Kraus set".into()))?;
        let d = first.rows();
        let mut sum = ComplexMatrix::zeros(d, d);
        for k in &ops {
            if k.rows() != d || k.cols() != d {
                return Err(Error::Dimension("Kraus operators of differing shapes".into()));
            }
            sum = sum.add(&k.adjoint().matmul(k)?)?;
        }
        let dev = sum.sub(&ComplexMatrix::identity(d))?.frobenius_norm();
        if dev > TOL.trace_preserving {
            return Err(Error::Contract(format!("Kraus set is not trace preserving (deviation {dev:.3e})")));
        }
        Ok(KrausSet { ops })
    }

    pub fn unitary(u: ComplexMatrix) -> Result<KrausSet> {
        KrausSet::new(vec![u])
    }

    /// Pauli channel on `L` qubits with weights over all `4^L` strings.
    pub fn pauli_channel(num_qubits: usize, weights: &[f64]) -> Result<KrausSet> {
        if weights.len() != 1 << (2 * num_qubits) {
            return Err(Error::Dimension(format!("{} weights for {num_qubits} qubits", weights.len())));
        }
        let ops = PauliString::all(num_qubits)
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(p, &w)| Ok(p.to_matrix()?.scale_real(w.sqrt())))
            .collect::<Result<Vec<_>>>()?;
        KrausSet::new(ops)
    }

    /// Depolarizing channel `(1-p) ρ + p Tr(ρ) I/D` on `L` qubits.
    pub fn depolarizing(num_qubits: usize, p: f64) -> Result<KrausSet> {
        let n = 1usize << (2 * num_qubits);
        let mut w = vec![p / n as f64; n];
        w[0] = 1.0 - p + p / n as f64;
        KrausSet::pauli_channel(num_qubits, &w)
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].rows()
    }

    /// `Σ conj(K) ⊗ K`.
    pub fn superoperator(&self) -> Result<ComplexMatrix> {
        let d = self.dim();
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        for k in &self.ops {
            s = s.add(&k.conj().kron(k)?)?;
        }
        Ok(s)
    }
}

/// `Σ K ρ K†`.
pub fn apply_channel(rho: &DensityMatrix, k: &KrausSet) -> Result<DensityMatrix> {
    if k.dim() != rho.data.rows() {
        return Err(Error::Dimension(format!("channel on D={} applied to D={}", k.dim(), rho.data.rows())));
    }
    let mut out = ComplexMatrix::zeros(k.dim(), k.dim());
    for op in &k.ops {
        out = out.add(&op.matmul(&rho.data)?.matmul(&op.adjoint())?)?;
    }
    Ok(DensityMatrix { num_qubits: rho.num_qubits, data: out })
}

/// Device model applied by [`run_circuit`] and [`SimulatedExecutor`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Depolarizing probability after each single-qubit gate.
    pub p1: f64,
    /// Two-qubit depolarizing probability after each CX.
    pub p2: f64,
    /// Independent bit-flip probability per qubit at readout.
    pub p_ro: f64,
    /// Coherent over-rotation `exp(-iδ/2 Z⊗X)` after each CX.
    pub cx_overrotation: f64,
    /// When false, only the process under test is noisy: preparation and
    /// measurement circuits run ideally and readout is perfect.
    pub noisy_spam: bool,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { p1: 0.001, p2: 0.01, p_ro: 0.01, cx_overrotation: 0.0, noisy_spam: true, seed: 0 }
    }
}

impl NoiseModel {
    pub fn noiseless() -> NoiseModel {
        NoiseModel { p1: 0.0, p2: 0.0, p_ro: 0.0, ..NoiseModel::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p1", self.p1), ("p2", self.p2), ("p_ro", self.p_ro)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("noise probability {name}={v} outside [0, 1)")));
            }
        }
        if !self.cx_overrotation.is_finite() {
            return Err(Error::Config("cx_overrotation must be finite".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.p_ro == 0.0 && self.cx_overrotation == 0.0
    }
}

/// `M ← (1-p) M + p Tr_q(M) ⊗ I/2`.
fn depolarize_one(m: &mut ComplexMatrix, q: usize, p: f64, l: usize) {
    if p == 0.0 {
        return;
    }
    let bit = 1usize << (l - 1 - q);
    let d = 1usize << l;
    for x in (0..d).filter(|x| x & bit == 0) {
        for y in (0..d).filter(|y| y & bit == 0) {
            let s = m[(x, y)] + m[(x | bit, y | bit)];
            m[(x, y)] = m[(x, y)] * (1.0 - p) + s * (p / 2.0);
            m[(x | bit, y | bit)] = m[(x | bit, y | bit)] * (1.0 - p) + s * (p / 2.0);
            m[(x, y | bit)] *= 1.0 - p;
            m[(x | bit, y)] *= 1.0 - p;
        }
    }
}

/// `M ← (1-p) M + p Tr_{a,b}(M) ⊗ I/4`.
fn depolarize_two(m: &mut ComplexMatrix, a: usize, b: usize, p: f64, l: usize) {
    if p == 0.0 {
        return;
    }
    let (ba, bb) = (1usize << (l - 1 - a), 1usize << (l - 1 - b));
    let offs = [0, bb, ba, ba | bb];
    let d = 1usize << l;
    for x in (0..d).filter(|x| x & (ba | bb) == 0) {
        for y in (0..d).filter(|y| y & (ba | bb) == 0) {
            let s: c64 = offs.iter().map(|&o| m[(x + o, y + o)]).sum();
            for &ox in &offs {
                for &oy in &offs {
                    let v = m[(x + ox, y + oy)] * (1.0 - p);
                    m[(x + ox, y + oy)] = if ox == oy { v + s * (p / 4.0) } else { v };
                }
            }
        }
    }
}

fn overrotation(delta: f64) -> ComplexMatrix {
    let zx = PauliString::from_letters(&[Letter::Z, Letter::X]).expect("2 qubits").to_matrix().expect("dense");
    let mut r = ComplexMatrix::identity(4).scale_real((delta / 2.0).cos());
    r.axpy(c64::new(0.0, -(delta / 2.0).sin()), &zx).expect("4x4");
    r
}

fn check_decomposed(c: &Circuit, context: &'static str) -> Result<()> {
    match c.gates().iter().find(|g| matches!(g, Gate::CanonicalTwoQubit { .. } | Gate::HeisenbergBond { .. } | Gate::SWAP { .. })) {
        Some(g) => Err(Error::UnsupportedGate { gate: g.to_string(), context }),
        None => Ok(()),
    }
}

/// Applies a decomposed circuit to an arbitrary operator, forward
/// (`M → E(M)`) or in the Heisenberg picture (`M → E†(M)`).
fn evolve(m: &mut ComplexMatrix, c: &Circuit, nm: Option<&NoiseModel>, adjoint: bool) {
    let l = c.num_qubits();
    let rot = nm.filter(|n| n.cx_overrotation != 0.0).map(|n| overrotation(n.cx_overrotation));
    let mut step = |g: &Gate| {
        let u = g.matrix();
        let ud = u.adjoint();
        let qs = g.qubits();
        let two = qs.len() == 2;
        let p = nm.map_or(0.0, |n| if two { n.p2 } else { n.p1 });
        let noise = |m: &mut ComplexMatrix| {
            if two {
                depolarize_two(m, qs[0], qs[1], p, l)
            } else {
                depolarize_one(m, qs[0], p, l)
            }
        };
        if adjoint {
            noise(m);
            if let (Some(r), true) = (&rot, two) {
                apply_left(m, &r.adjoint(), &qs, l);
                apply_right(m, r, &qs, l);
            }
            apply_left(m, &ud, &qs, l);
            apply_right(m, &u, &qs, l);
        } else {
            apply_left(m, &u, &qs, l);
            apply_right(m, &ud, &qs, l);
            if let (Some(r), true) = (&rot, two) {
                apply_left(m, r, &qs, l);
                apply_right(m, &r.adjoint(), &qs, l);
            }
            noise(m);
        }
    };
    if adjoint {
        c.gates().iter().rev().for_each(&mut step);
    } else {
        c.gates().iter().for_each(&mut step);
    }
}

/// Runs a decomposed circuit on `ρ`: every gate is applied as a unitary
/// conjugation followed by depolarizing noise on the qubits it touched.
pub fn run_circuit(rho: &DensityMatrix, c: &Circuit, nm: &NoiseModel) -> Result<DensityMatrix> {
    check_decomposed(c, "run_circuit")?;
    if c.num_qubits() != rho.num_qubits {
        return Err(Error::LengthMismatch { left: c.num_qubits(), right: rho.num_qubits });
    }
    let mut m = rho.data.clone();
    evolve(&mut m, c, Some(nm), false);
    Ok(DensityMatrix { num_qubits: rho.num_qubits, data: m })
}

/// Applies independent readout bit flips to a distribution over `L` bits.
pub fn apply_readout_error(probs: &mut [f64], p_ro: f64) {
    if p_ro == 0.0 {
        return;
    }
    let l = probs.len().trailing_zeros();
    for q in 0..l {
        let bit = 1usize << q;
        for x in (0..probs.len()).filter(|x| x & bit == 0) {
            let (a, b) = (probs[x], probs[x | bit]);
            probs[x] = (1.0 - p_ro) * a + p_ro * b;
            probs[x | bit] = p_ro * a + (1.0 - p_ro) * b;
        }
    }
}

/// Multinomial counts by inverse-CDF sampling.
pub fn sample_counts(probs: &[f64], shots: usize, rng: &mut impl Rng) -> Vec<u64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
        counts[k] += 1;
    }
    counts
}

/// Estimate of `<P>` from `shots` readouts in the eigenbasis of `P`;
/// `shots = 0` returns the exact value (including readout error).
pub fn measure_pauli(rho: &DensityMatrix, p: &PauliString, shots: usize, nm: &NoiseModel, rng: &mut impl Rng) -> Result<f64> {
    if p.is_identity() {
        return Ok(1.0);
    }
    let rotated = run_circuit(rho, &basis_change(p)?, &NoiseModel::noiseless())?;
    let mut probs = rotated.probabilities();
    apply_readout_error(&mut probs, nm.p_ro);
    let outcome = if shots == 0 {
        Outcome::Exact(probs)
    } else {
        Outcome::Sampled { shots, counts: sample_counts(&probs, shots, rng) }
    };
    Ok(outcome.parity_expectation(p.support() as usize))
}

/// Result of one executor call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Exact(Vec<f64>),
    Sampled { shots: usize, counts: Vec<u64> },
}

impl Outcome {
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            Outcome::Exact(p) => p.clone(),
            Outcome::Sampled { shots, counts } => counts.iter().map(|&c| c as f64 / *shots as f64).collect(),
        }
    }

    pub fn probability(&self, index: usize) -> f64 {
        match self {
            Outcome::Exact(p) => p[index],
            Outcome::Sampled { shots, counts } => counts[index] as f64 / *shots as f64,
        }
    }

    /// `Σ_x (-1)^{|x & mask|} p(x)`.
    pub fn parity_expectation(&self, mask: usize) -> f64 {
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(x, p)| if (x & mask).count_ones() % 2 == 0 { *p } else { -*p })
            .sum()
    }

    pub fn shots(&self) -> usize {
        match self {
            Outcome::Exact(_) => 0,
            Outcome::Sampled { shots, .. } => *shots,
        }
    }
}

/// One experiment: prepare, run the process, change basis, read out.
#[derive(Clone, Debug)]
pub struct Job<'a> {
    pub label: String,
    /// Circuits applied to `|0…0>` in order before the process.
    pub preparation: Vec<&'a Circuit>,
    pub process: &'a Circuit,
    /// Replace the process by its exact Pauli twirl.
    pub twirl: bool,
    /// Basis change applied before computational-basis readout.
    pub measurement: &'a Circuit,
    /// 0 requests exact probabilities.
    pub shots: usize,
    /// Independent random stream index for this job.
    pub stream: u64,
}

/// Boundary between the tomography drivers and whatever runs circuits.
pub trait Executor: Sync {
    fn run(&self, job: &Job) -> Result<Outcome>;
}

/// Audit entry recorded by [`SimulatedExecutor`] when enabled.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditRecord {
    pub label: String,
    pub stream: u64,
    pub outcome: Outcome,
}

/// Density-matrix executor implementing [`NoiseModel`].
///
/// The first preparation circuit is simulated forward from `|0…0>`. Everything
/// after it (remaining preparation circuits, process, measurement and
/// readout) is folded into `D` Heisenberg-picture observables that are cached
/// per distinct setting, so repeated jobs cost one trace each.
pub struct SimulatedExecutor {
    noise: NoiseModel,
    observables: Mutex<HashMap<[u8; 32], Arc<Vec<ComplexMatrix>>>>,
    twirl_tables: Mutex<HashMap<[u8; 32], Arc<Vec<f64>>>>,
    audit: Option<Mutex<Vec<AuditRecord>>>,
}

fn fingerprint(parts: &[&Circuit], twirl: bool, noise: &NoiseModel) -> [u8; 32] {
    let mut h = Sha256::new();
    for c in parts {
        h.update(serde_json::to_vec(c.gates()).expect("gates serialize"));
        h.update(b"|");
    }
    h.update([twirl as u8]);
    h.update(serde_json::to_vec(noise).expect("noise serializes"));
    h.finalize().into()
}

fn lowered(c: &Circuit) -> Result<Circuit> {
    if c.is_decomposed() && c.swap_count() == 0 {
        Ok(c.clone())
    } else {
        circuit::decompose(c)
    }
}

impl SimulatedExecutor {
    pub fn new(noise: NoiseModel) -> Result<SimulatedExecutor> {
        noise.validate()?;
        Ok(SimulatedExecutor {
            noise,
            observables: Mutex::new(HashMap::new()),
            twirl_tables: Mutex::new(HashMap::new()),
            audit: None,
        })
    }

    pub fn noiseless() -> SimulatedExecutor {
        SimulatedExecutor::new(NoiseModel::noiseless()).expect("valid")
    }

    /// Records every outcome for later inspection.
    pub fn with_audit(mut self) -> SimulatedExecutor {
        self.audit = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn audit_log(&self) -> Vec<AuditRecord> {
        self.audit.as_ref().map(|a| a.lock().expect("audit lock").clone()).unwrap_or_default()
    }

    fn spam_noise(&self) -> Option<&NoiseModel> {
        self.noise.noisy_spam.then_some(&self.noise)
    }

    /// Diagonal of the Pauli transfer matrix of the noisy process,
    /// `R_aa = Tr[P_a Λ(P_a)] / D`.
    pub fn twirl_table(&self, process: &Circuit) -> Result<Arc<Vec<f64>>> {
        let key = fingerprint(&[process], true, &self.noise);
        if let Some(t) = self.twirl_tables.lock().expect("cache lock").get(&key) {
            return Ok(t.clone());
        }
        let c = lowered(process)?;
        let l = c.num_qubits();
        let d = (1usize << l) as f64;
        let table: Vec<f64> = PauliString::all(l)
            .map(|p| {
                let mut m = ComplexMatrix::zeros(1 << l, 1 << l);
                add_pauli(&mut m, &p, c64::new(1.0, 0.0));
                evolve(&mut m, &c, Some(&self.noise), false);
                pauli_trace(&p, &m).re / d
            })
            .collect();
        let table = Arc::new(table);
        self.twirl_tables.lock().expect("cache lock").insert(key, table.clone());
        Ok(table)
    }

    fn observables(&self, job: &Job) -> Result<Arc<Vec<ComplexMatrix>>> {
        let mut parts: Vec<&Circuit> = job.preparation.iter().skip(1).copied().collect();
        parts.push(job.process);
        parts.push(job.measurement);
        let key = fingerprint(&parts, job.twirl, &self.noise);
        if let Some(o) = self.observables.lock().expect("cache lock").get(&key) {
            return Ok(o.clone());
        }
        let l = job.process.num_qubits();
        let dim = 1usize << l;
        let spam = self.spam_noise();
        let tail: Vec<Circuit> = job.preparation.iter().skip(1).map(|c| lowered(c)).collect::<Result<_>>()?;
        let process = lowered(job.process)?;
        let meas = lowered(job.measurement)?;
        let twirl = if job.twirl { Some(self.twirl_table(job.process)?) } else { None };
        let paulis: Vec<PauliString> = if twirl.is_some() { PauliString::all(l).collect() } else { Vec::new() };

        let mut obs = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut m = ComplexMatrix::zeros(dim, dim);
            // readout error folded into the projector
            for x in 0..dim {
                let flips = (x ^ j).count_ones() as i32;
                let pr = if spam.is_some() {
                    self.noise.p_ro.powi(flips) * (1.0 - self.noise.p_ro).powi(l as i32 - flips)
                } else if flips == 0 {
                    1.0
                } else {
                    0.0
                };
                m[(x, x)] = c64::new(pr, 0.0);
            }
            evolve(&mut m, &meas, spam, true);
            match &twirl {
                Some(table) => {
                    let mut t = ComplexMatrix::zeros(dim, dim);
                    for (p, &r) in paulis.iter().zip(table.iter()) {
                        let coeff = pauli_trace(p, &m) * (r / dim as f64);
                        if coeff.norm() > 0.0 {
                            add_pauli(&mut t, p, coeff);
                        }
                    }
                    m = t;
                }
                None => evolve(&mut m, &process, Some(&self.noise), true),
            }
            for c in tail.iter().rev() {
                evolve(&mut m, c, spam, true);
            }
            obs.push(m);
        }
        let obs = Arc::new(obs);
        self.observables.lock().expect("cache lock").insert(key, obs.clone());
        Ok(obs)
    }

    fn rng(&self, label: &str, stream: u64) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.noise.seed.to_le_bytes());
        h.update(label.as_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        rng.set_stream(stream);
        rng
    }

    fn run_inner(&self, job: &Job) -> Result<Outcome> {
        let l = job.process.num_qubits();
        if l > MAX_SIM_QUBITS {
            return Err(Error::Overflow(format!("{l} qubits exceed simulator bound {MAX_SIM_QUBITS}")));
        }
        for c in job.preparation.iter().chain([&job.measurement]) {
            if c.num_qubits() != l {
                return Err(Error::LengthMismatch { left: c.num_qubits(), right: l });
            }
        }
        let mut rho = ComplexMatrix::zeros(1 << l, 1 << l);
        rho[(0, 0)] = c64::new(1.0, 0.0);
        if let Some(first) = job.preparation.first() {
            evolve(&mut rho, &lowered(first)?, self.spam_noise(), false);
        }
        let obs = self.observables(job)?;
        let probs: Vec<f64> = obs.iter().map(|o| o.inner(&rho).expect("same shape").re.max(0.0)).collect();
        Ok(if job.shots == 0 {
            Outcome::Exact(probs)
        } else {
            let mut rng = self.rng(&job.label, job.stream);
            Outcome::Sampled { shots: job.shots, counts: sample_counts(&probs, job.shots, &mut rng) }
        })
    }
}

impl Executor for SimulatedExecutor {
    fn run(&self, job: &Job) -> Result<Outcome> {
        let out = self.run_inner(job).map_err(|e| match e {
            Error::Executor { .. } => e,
            other => Error::Executor { setting: format!("{}#{}", job.label, job.stream), message: other.to_string() },
        })?;
        if let Some(a) = &self.audit {
            a.lock().expect("audit lock").push(AuditRecord { label: job.label.clone(), stream: job.stream, outcome: out.clone() });
        }
        Ok(out)
    }
}
