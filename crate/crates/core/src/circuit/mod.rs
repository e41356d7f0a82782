//! Gate-level circuits on a linear qubit chain.
//!
//! Qubit 0 is the most significant bit of computational-basis indices, the
//! same convention as [`crate::pauli`]. Gates are listed in application
//! order: the first gate acts first, so the circuit unitary is
//! `G_last · … · G_first`.

mod build;
mod decompose;
mod gate;
pub mod qasm;

use serde::{Deserialize, Serialize};

pub use build::{
    bond_layers, brickwall_bonds, brickwall_param_count, build_brickwall, build_trotter1, build_trotter2,
    trotter1_logical, trotter2_logical, trotter_equivalent_params, Bc,
};
pub use decompose::{decompose, decompose_two_qubit};
pub use gate::Gate;
pub(crate) use gate::{canonical_derivative, single_qubit_derivative};

use crate::linalg::{c64, ComplexMatrix};
use crate::{Error, Result};

/// Largest register for which [`Circuit::unitary`] builds a dense matrix.
pub const MAX_UNITARY_QUBITS: usize = 10;

/// Ordered gate list over `num_qubits` qubits with linear-chain topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    label: String,
    num_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize, label: impl Into<String>) -> Result<Circuit> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
        }
        Ok(Circuit { label: label.into(), num_qubits, gates: Vec::new() })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::InvalidArgument(format!(
                "{gate} addresses qubit {q} on a {}-qubit circuit",
                self.num_qubits
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidArgument(format!("{gate} repeats a qubit")));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.push(g))
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::LengthMismatch { left: self.num_qubits, right: other.num_qubits });
        }
        let mut out = self.clone();
        out.gates.extend_from_slice(&other.gates);
        Ok(out)
    }

    /// Adjoint circuit: reversed order, each gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            label: format!("{}_dg", self.label),
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(Gate::adjoint).collect(),
        }
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().map(Gate::cnot_cost).sum()
    }

    pub fn swap_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::SWAP { .. })).count()
    }

    /// Number of gate layers when every gate occupies one time slot.
    pub fn depth(&self) -> usize {
        let mut front = vec![0usize; self.num_qubits];
        for g in &self.gates {
            let qs = g.qubits();
            let t = qs.iter().map(|&q| front[q]).max().unwrap_or(0) + 1;
            qs.iter().for_each(|&q| front[q] = t);
        }
        front.into_iter().max().unwrap_or(0)
    }

    /// True when only single-qubit gates, CX and SWAP remain.
    pub fn is_decomposed(&self) -> bool {
        !self.gates.iter().any(Gate::is_entangling_block)
    }

    /// True when every two-qubit gate acts on neighbouring qubits.
    pub fn is_linear_local(&self) -> bool {
        self.gates.iter().all(|g| {
            let qs = g.qubits();
            qs.len() == 1 || qs[0].abs_diff(qs[1]) == 1
        })
    }

    /// Dense `2^L × 2^L` unitary.
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        if self.num_qubits > MAX_UNITARY_QUBITS {
            return Err(Error::Overflow(format!(
                "dense unitary requested for {} qubits (limit {MAX_UNITARY_QUBITS})",
                self.num_qubits
            )));
        }
        let mut u = ComplexMatrix::identity(1 << self.num_qubits);
        for g in &self.gates {
            apply_left(&mut u, &g.matrix(), &g.qubits(), self.num_qubits);
        }
        Ok(u)
    }

    /// Routes every non-adjacent two-qubit gate through SWAP chains.
    ///
    /// For a gate on `(i, j)` with `i < j - 1`, qubit `j` is walked down to
    /// `i + 1` with `SWAP(j-1, j), …, SWAP(i+1, i+2)`, the gate is applied on
    /// `(i, i+1)` and the chain is undone, so the layout is restored after
    /// every routed gate.
    pub fn route_linear(&self) -> Circuit {
        let mut out = Circuit { label: self.label.clone(), num_qubits: self.num_qubits, gates: Vec::new() };
        for g in &self.gates {
            let qs = g.qubits();
            if qs.len() == 1 || qs[0].abs_diff(qs[1]) == 1 {
                out.gates.push(*g);
                continue;
            }
            let (lo, hi) = (qs[0].min(qs[1]), qs[0].max(qs[1]));
            let chain: Vec<Gate> = (lo + 2..=hi).rev().map(|k| Gate::SWAP { i: k - 1, j: k }).collect();
            out.gates.extend(chain.iter().copied());
            out.gates.push(g.remap(|q| if q == hi { lo + 1 } else { q }));
            out.gates.extend(chain.iter().rev().copied());
        }
        out
    }
}

fn bit_offsets(qubits: &[usize], num_qubits: usize) -> Vec<usize> {
    let bits: Vec<usize> = qubits.iter().map(|&q| 1usize << (num_qubits - 1 - q)).collect();
    (0..1usize << bits.len())
        .map(|k| {
            bits.iter()
                .enumerate()
                .filter(|(pos, _)| k >> (bits.len() - 1 - pos) & 1 == 1)
                .map(|(_, b)| b)
                .sum()
        })
        .collect()
}

fn base_indices(qubits: &[usize], num_qubits: usize) -> impl Iterator<Item = usize> {
    let mask: usize = qubits.iter().map(|&q| 1usize << (num_qubits - 1 - q)).sum();
    (0..1usize << num_qubits).filter(move |i| i & mask == 0)
}

/// `m ← G · m` with `G` the embedding of `g` on `qubits`.
pub(crate) fn apply_left(m: &mut ComplexMatrix, g: &ComplexMatrix, qubits: &[usize], num_qubits: usize) {
    let offs = bit_offsets(qubits, num_qubits);
    let k = offs.len();
    let cols = m.cols();
    let gd = g.data();
    let data = m.data_mut();
    let mut buf = vec![c64::new(0.0, 0.0); k];
    for base in base_indices(qubits, num_qubits) {
        for c in 0..cols {
            for (a, &o) in offs.iter().enumerate() {
                buf[a] = data[(base + o) * cols + c];
            }
            for (a, &o) in offs.iter().enumerate() {
                let row = &gd[a * k..(a + 1) * k];
                data[(base + o) * cols + c] = row.iter().zip(&buf).map(|(x, y)| x * y).sum();
            }
        }
    }
}

/// `m ← m · G` with `G` the embedding of `g` on `qubits`.
pub(crate) fn apply_right(m: &mut ComplexMatrix, g: &ComplexMatrix, qubits: &[usize], num_qubits: usize) {
    let offs = bit_offsets(qubits, num_qubits);
    let k = offs.len();
    let cols = m.cols();
    let rows = m.rows();
    let gd = g.data();
    let data = m.data_mut();
    let mut buf = vec![c64::new(0.0, 0.0); k];
    for base in base_indices(qubits, num_qubits) {
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            for (a, &o) in offs.iter().enumerate() {
                buf[a] = row[base + o];
            }
            for (b, &o) in offs.iter().enumerate() {
                row[base + o] = (0..k).map(|a| buf[a] * gd[a * k + b]).sum();
            }
        }
    }
}

/// `|Tr(A†B)| / D`: 1 exactly when `A` and `B` agree up to a global phase.
pub fn phase_insensitive_overlap(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    Ok(a.inner(b)?.norm() / a.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn embed(g: &ComplexMatrix, first: usize, width: usize, num_qubits: usize) -> ComplexMatrix {
        let left = ComplexMatrix::identity(1 << first);
        let right = ComplexMatrix::identity(1 << (num_qubits - first - width));
        left.kron(g).unwrap().kron(&right).unwrap()
    }

    fn random_circuit(rng: &mut ChaCha8Rng, l: usize, n: usize) -> Circuit {
        let mut c = Circuit::new(l, "random").unwrap();
        for _ in 0..n {
            let q = rng.random_range(0..l);
            let mut r = rng.random_range(0..l);
            while r == q {
                r = rng.random_range(0..l);
            }
            let g = match rng.random_range(0..6) {
                0 => Gate::SingleQubitU { q, mu: [rng.random(), rng.random(), rng.random()] },
                1 => Gate::CX { control: q, target: r },
                2 => Gate::H { q },
                3 => Gate::S { q },
                4 => Gate::CanonicalTwoQubit { i: q, j: r, nu: [rng.random(), rng.random(), rng.random()] },
                _ => Gate::SWAP { i: q, j: r },
            };
            c.push(g).unwrap();
        }
        c
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(3, "empty").unwrap();
        assert_eq!(c.unitary().unwrap(), ComplexMatrix::identity(8));
        assert_eq!(c.cnot_count(), 0);
        assert_eq!(c.depth(), 0);
    }

    #[test]
    fn cx_matrix_convention() {
        let mut c = Circuit::new(2, "cx").unwrap();
        c.push(Gate::CX { control: 0, target: 1 }).unwrap();
        let u = c.unitary().unwrap();
        // |10> -> |11>, qubit 0 is the high bit
        assert_eq!(u[(3, 2)], c64::new(1.0, 0.0));
        assert_eq!(u[(2, 3)], c64::new(1.0, 0.0));
        assert_eq!(u[(0, 0)], c64::new(1.0, 0.0));
        let mut rev = Circuit::new(2, "xc").unwrap();
        rev.push(Gate::CX { control: 1, target: 0 }).unwrap();
        let u = rev.unitary().unwrap();
        assert_eq!(u[(3, 1)], c64::new(1.0, 0.0));
    }

    #[test]
    fn kernels_match_kron_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = 4;
        let g1 = Gate::SingleQubitU { q: 2, mu: [0.3, 0.1, -0.8] };
        let g2 = Gate::CanonicalTwoQubit { i: 1, j: 2, nu: [0.2, 0.5, -0.1] };
        let base = random_circuit(&mut rng, l, 12).unitary().unwrap();
        for (g, first, w) in [(g1, 2, 1), (g2, 1, 2)] {
            let e = embed(&g.matrix(), first, w, l);
            let mut left = base.clone();
            apply_left(&mut left, &g.matrix(), &g.qubits(), l);
            assert!(left.sub(&e.matmul(&base).unwrap()).unwrap().max_abs() < 1e-13);
            let mut right = base.clone();
            apply_right(&mut right, &g.matrix(), &g.qubits(), l);
            assert!(right.sub(&base.matmul(&e).unwrap()).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn reversed_operands_are_consistent() {
        // CX(1,0) equals (H⊗H) CX(0,1) (H⊗H)
        let mut a = Circuit::new(2, "a").unwrap();
        a.push(Gate::CX { control: 1, target: 0 }).unwrap();
        let mut b = Circuit::new(2, "b").unwrap();
        b.extend([Gate::H { q: 0 }, Gate::H { q: 1 }, Gate::CX { control: 0, target: 1 }, Gate::H { q: 0 }, Gate::H { q: 1 }])
            .unwrap();
        assert!(a.unitary().unwrap().sub(&b.unitary().unwrap()).unwrap().max_abs() < 1e-14);
        // nonlocal canonical on (0, 2) matches Pauli exponential
        let mut c = Circuit::new(3, "c").unwrap();
        c.push(Gate::CanonicalTwoQubit { i: 2, j: 0, nu: [0.3, 0.0, 0.2] }).unwrap();
        let mut h = ComplexMatrix::zeros(8, 8);
        h.axpy(c64::new(0.3, 0.0), &"XIX".parse::<PauliString>().unwrap().to_matrix().unwrap()).unwrap();
        h.axpy(c64::new(0.2, 0.0), &"ZIZ".parse::<PauliString>().unwrap().to_matrix().unwrap()).unwrap();
        let expect = crate::linalg::expm_hermitian(&h, 1.0).unwrap();
        assert!(c.unitary().unwrap().sub(&expect).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn inverse_gives_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_circuit(&mut rng, 3, 30);
        let u = c.then(&c.inverse()).unwrap().unitary().unwrap();
        assert!(u.sub(&ComplexMatrix::identity(8)).unwrap().max_abs() < 1e-10);
        assert!(c.unitary().unwrap().unitarity_error() < 1e-10);
    }

    #[test]
    fn routing_preserves_unitary() {
        let mut c = Circuit::new(5, "nonlocal").unwrap();
        c.extend([
            Gate::HeisenbergBond { i: 4, j: 0, dt: 0.3 },
            Gate::CanonicalTwoQubit { i: 1, j: 4, nu: [0.1, 0.2, 0.3] },
            Gate::CX { control: 3, target: 0 },
        ])
        .unwrap();
        let routed = c.route_linear();
        assert!(routed.is_linear_local());
        assert!(!c.is_linear_local());
        assert_eq!(routed.swap_count(), 2 * 3 + 2 * 2 + 2 * 2);
        assert!(routed.unitary().unwrap().sub(&c.unitary().unwrap()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn cnot_accounting() {
        let mut c = Circuit::new(2, "c").unwrap();
        c.push(Gate::HeisenbergBond { i: 0, j: 1, dt: 0.1 }).unwrap();
        assert_eq!(c.cnot_count(), 3);
        let mut s = Circuit::new(2, "s").unwrap();
        s.push(Gate::SWAP { i: 0, j: 1 }).unwrap();
        assert_eq!(s.cnot_count(), 3);
    }

    #[test]
    fn push_validates_qubits() {
        let mut c = Circuit::new(2, "c").unwrap();
        assert!(c.push(Gate::H { q: 2 }).is_err());
        assert!(c.push(Gate::CX { control: 1, target: 1 }).is_err());
        assert!(Circuit::new(0, "x").is_err());
        let big = Circuit::new(11, "big").unwrap();
        assert!(matches!(big.unitary(), Err(Error::Overflow(_))));
    }

    #[test]
    fn json_dump_shape() {
        let mut c = Circuit::new(2, "demo").unwrap();
        c.push(Gate::CX { control: 0, target: 1 }).unwrap();
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["label"], "demo");
        assert_eq!(v["num_qubits"], 2);
        assert_eq!(v["gates"][0]["kind"], "CX");
        let back: Circuit = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
