//! Complete sets of `D + 1` mutually unbiased bases for `D = 2^L`.
//!
//! Basis 0 is the computational basis. Basis `α ≥ 1` corresponds to the
//! field element `a = α - 1` of `GF(2^L)`: its stabilizer group is generated
//! by `X_k Z^{A_a e_k}` with the symmetric matrix `A_a[i][j] = Tr(a x^i x^j)`.
//! These are graph-like states, so each basis change is `H` on every qubit,
//! a controlled-Z (written `H·CX·H`) for every off-diagonal 1 of `A_a`, and
//! `S` on every diagonal 1.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::linalg::c64;
use crate::pauli::PauliString;
use crate::{Error, Result};

/// Irreducible polynomials defining `GF(2^L)`, bit `i` = coefficient of `x^i`.
const MODULI: [u32; 4] = [0b10, 0b111, 0b1011, 0b10011];

pub const MAX_MUB_QUBITS: usize = 4;

fn gf_mul(a: u32, b: u32, l: usize) -> u32 {
    let modulus = MODULI[l - 1];
    let mut acc = 0u32;
    for i in 0..l {
        if b >> i & 1 == 1 {
            acc ^= a << i;
        }
    }
    for deg in (l..2 * l).rev() {
        if acc >> deg & 1 == 1 {
            acc ^= modulus << (deg - l);
        }
    }
    acc
}

/// Absolute trace `y + y² + … + y^{2^{L-1}}`, always 0 or 1.
fn gf_trace(y: u32, l: usize) -> u32 {
    let mut acc = 0;
    let mut p = y;
    for _ in 0..l {
        acc ^= p;
        p = gf_mul(p, p, l);
    }
    debug_assert!(acc <= 1);
    acc
}

/// Symmetric GF(2) matrix `A[i][j] = Tr(a x^i x^j)`.
pub fn field_matrix(a: u32, l: usize) -> Vec<Vec<u8>> {
    (0..l)
        .map(|i| (0..l).map(|j| gf_trace(gf_mul(gf_mul(a, 1 << i, l), 1 << j, l), l) as u8).collect())
        .collect()
}

/// Mutually unbiased bases with their stabilizers and basis-change circuits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MubSet {
    num_qubits: usize,
    /// `bases[α][i]` is the state `V^α |i>`.
    bases: Vec<Vec<Vec<c64>>>,
    generators: Vec<Vec<PauliString>>,
    circuits: Vec<Circuit>,
    inverses: Vec<Circuit>,
}

pub fn build_mubs(l: usize) -> Result<MubSet> {
    if l == 0 || l > MAX_MUB_QUBITS {
        return Err(Error::InvalidArgument(format!("MUB construction supports 1..={MAX_MUB_QUBITS} qubits, got {l}")));
    }
    let d = 1usize << l;
    let bit = |q: usize| 1u32 << (l - 1 - q);
    let mut generators = vec![(0..l).map(|q| PauliString::from_masks(l, 0, bit(q))).collect::<Result<Vec<_>>>()?];
    let mut circuits = vec![Circuit::new(l, "mub0")?];
    for a in 0..d as u32 {
        let m = field_matrix(a, l);
        let mut c = Circuit::new(l, format!("mub{}", a + 1))?;
        for q in 0..l {
            c.push(Gate::H { q })?;
        }
        for j in 0..l {
            for k in j + 1..l {
                if m[j][k] == 1 {
                    c.extend([Gate::H { q: k }, Gate::CX { control: j, target: k }, Gate::H { q: k }])?;
                }
            }
        }
        for (k, row) in m.iter().enumerate() {
            if row[k] == 1 {
                c.push(Gate::S { q: k })?;
            }
        }
        let gens = (0..l)
            .map(|k| {
                let z = (0..l).filter(|&j| m[k][j] == 1).fold(0, |acc, j| acc | bit(j));
                PauliString::from_masks(l, bit(k), z)
            })
            .collect::<Result<Vec<_>>>()?;
        generators.push(gens);
        circuits.push(c);
    }
    let bases = circuits
        .iter()
        .map(|c| {
            let u = c.unitary()?;
            Ok((0..d).map(|i| (0..d).map(|r| u[(r, i)]).collect()).collect())
        })
        .collect::<Result<Vec<Vec<Vec<c64>>>>>()?;
    let inverses = circuits
        .iter()
        .map(|c| {
            let mut inv = c.inverse();
            inv.set_label(format!("{}_dg", c.label()));
            inv
        })
        .collect();
    Ok(MubSet { num_qubits: l, bases, generators, circuits, inverses })
}

impl MubSet {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn state(&self, alpha: usize, i: usize) -> &[c64] {
        &self.bases[alpha][i]
    }

    pub fn generators(&self, alpha: usize) -> &[PauliString] {
        &self.generators[alpha]
    }

    /// Basis change `V^α` taking `|i>` to the `i`-th state of basis `α`.
    pub fn circuit(&self, alpha: usize) -> &Circuit {
        &self.circuits[alpha]
    }

    pub fn inverse_circuit(&self, alpha: usize) -> &Circuit {
        &self.inverses[alpha]
    }

    /// Largest deviation of `|<φ^α_m|φ^β_n>|²` from `δ_αβ δ_mn + (1-δ_αβ)/D`.
    pub fn unbiasedness_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for (a, ba) in self.bases.iter().enumerate() {
            for (b, bb) in self.bases.iter().enumerate().skip(a) {
                for (m, u) in ba.iter().enumerate() {
                    for (n, v) in bb.iter().enumerate() {
                        let ov: c64 = u.iter().zip(v).map(|(x, y)| x.conj() * y).sum();
                        let want = if a == b { if m == n { 1.0 } else { 0.0 } } else { 1.0 / d as f64 };
                        worst = worst.max((ov.norm_sqr() - want).abs());
                    }
                }
            }
        }
        worst
    }
}
