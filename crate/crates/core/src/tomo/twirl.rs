//! Diagonal of χ from the exactly Pauli-twirled process.
//!
//! `c_a = Tr(P_a Λ̃(P_a)) / D = Σ_m χ_mm s_ma`, inverted with `s⁻¹ = s / 4^L`.
//! Settings are scheduled per measurement basis `b ∈ {X, Y, Z}^L`: all `2^L`
//! product eigenstates of `b` are prepared, the twirled process is applied
//! and `b` is measured, which yields every `c_a` whose non-identity letters
//! agree with `b` at once.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{basis_change, Executor, Job};
use crate::circuit::{Circuit, Gate};
use crate::pauli::{sign_matrix, Letter, PauliString};
use crate::{Error, Result};

/// Twirl coefficients and the recovered χ diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwirlData {
    pub num_qubits: usize,
    pub shots: usize,
    /// `c_a` in Pauli index order.
    pub c: Vec<f64>,
    pub chi_diag: Vec<f64>,
    /// Standard deviation of each `chi_diag` entry.
    pub sigma: Vec<f64>,
}

impl TwirlData {
    pub fn diag_sum(&self) -> f64 {
        self.chi_diag.iter().sum()
    }
}

/// Input circuit preparing the product eigenstate of `basis` with signs
/// `pattern` (bit set = eigenvalue -1), bits laid out like basis indices.
fn eigenstate_prep(basis: &[Letter], pattern: usize) -> Result<Circuit> {
    let l = basis.len();
    let mut c = Circuit::new(l, format!("eig_{pattern}"))?;
    for (q, letter) in basis.iter().enumerate() {
        let minus = pattern >> (l - 1 - q) & 1 == 1;
        let gates = match (letter, minus) {
            (Letter::Z, false) => vec![],
            (Letter::Z, true) => vec![Gate::x(q)],
            (Letter::X, false) => vec![Gate::H { q }],
            (Letter::X, true) => vec![Gate::x(q), Gate::H { q }],
            (Letter::Y, false) => vec![Gate::H { q }, Gate::S { q }],
            (Letter::Y, true) => vec![Gate::H { q }, Gate::Sdg { q }],
            (Letter::I, _) => return Err(Error::InvalidArgument("measurement basis cannot contain I".into())),
        };
        c.extend(gates)?;
    }
    Ok(c)
}

fn bases(l: usize) -> Vec<Vec<Letter>> {
    let letters = [Letter::X, Letter::Y, Letter::Z];
    (0..3usize.pow(l as u32))
        .map(|mut idx| {
            let mut b = vec![Letter::Z; l];
            for q in (0..l).rev() {
                b[q] = letters[idx % 3];
                idx /= 3;
            }
            b
        })
        .collect()
}

/// Pauli strings measurable in `basis`: every subset of its letters.
fn compatible(basis: &[Letter]) -> Vec<PauliString> {
    let l = basis.len();
    (0..1usize << l)
        .map(|mask| {
            let letters: Vec<Letter> = (0..l).map(|q| if mask >> (l - 1 - q) & 1 == 1 { basis[q] } else { Letter::I }).collect();
            PauliString::from_letters(&letters).expect("valid length")
        })
        .collect()
}

/// Runs the twirl schedule and inverts for the χ diagonal.
pub fn twirl_diagonal<E: Executor + ?Sized>(exec: &E, process: &Circuit, shots: usize) -> Result<TwirlData> {
    let l = process.num_qubits();
    if l == 0 || l > super::MAX_TOMO_QUBITS {
        return Err(Error::InvalidArgument(format!("twirl supports 1..={} qubits, got {l}", super::MAX_TOMO_QUBITS)));
    }
    let d = 1usize << l;
    let n = d * d;
    let all_bases = bases(l);
    let meas: Vec<Circuit> = all_bases
        .iter()
        .map(|b| basis_change(&PauliString::from_letters(b)?))
        .collect::<Result<_>>()?;
    let preps: Vec<Vec<Circuit>> = all_bases
        .iter()
        .map(|b| (0..d).map(|e| eigenstate_prep(b, e)).collect())
        .collect::<Result<_>>()?;

    let probs: Vec<Vec<f64>> = (0..all_bases.len() * d)
        .into_par_iter()
        .map(|idx| {
            let (bi, e) = (idx / d, idx % d);
            let label: String = all_bases[bi].iter().map(|x| x.as_char()).collect();
            let job = Job {
                label: format!("twirl/{}/{label}", process.label()),
                preparation: vec![&preps[bi][e]],
                process,
                twirl: true,
                measurement: &meas[bi],
                shots,
                stream: idx as u64,
            };
            Ok(exec.run(&job)?.probabilities())
        })
        .collect::<Result<_>>()?;

    // n_b(a) = 3^{L - weight(a)} compatible bases per string
    let n_b = |a: &PauliString| 3f64.powi((l as u32 - a.weight()) as i32);
    let signs = sign_matrix(l)?;
    let parity = |x: usize, mask: u32| if (x as u32 & mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };

    let mut c = vec![0.0; n];
    for (bi, b) in all_bases.iter().enumerate() {
        let comp = compatible(b);
        for e in 0..d {
            let p = &probs[bi * d + e];
            for a in &comp {
                let mask = a.support();
                let ev: f64 = p.iter().enumerate().map(|(x, px)| px * parity(x, mask)).sum();
                c[a.index()] += parity(e, mask) * ev / (d as f64 * n_b(a));
            }
        }
    }
    let chi_diag: Vec<f64> = (0..n).map(|m| (0..n).map(|a| signs[m][a] as f64 * c[a]).sum::<f64>() / n as f64).collect();

    // Exact multinomial variance of each job's linear contribution.
    let mut var = vec![0.0; n];
    if shots > 0 {
        for (bi, b) in all_bases.iter().enumerate() {
            let comp = compatible(b);
            for e in 0..d {
                let p = &probs[bi * d + e];
                // h[a][x]: contribution weight of outcome x to c_a
                let h: Vec<Vec<f64>> = comp
                    .iter()
                    .map(|a| {
                        let mask = a.support();
                        (0..d).map(|x| parity(e, mask) * parity(x, mask) / (d as f64 * n_b(a))).collect()
                    })
                    .collect();
                for (m, v) in var.iter_mut().enumerate() {
                    let g: Vec<f64> = (0..d)
                        .map(|x| comp.iter().zip(&h).map(|(a, ha)| signs[m][a.index()] as f64 * ha[x]).sum::<f64>() / n as f64)
                        .collect();
                    let mean: f64 = p.iter().zip(&g).map(|(px, gx)| px * gx).sum();
                    let sq: f64 = p.iter().zip(&g).map(|(px, gx)| px * gx * gx).sum();
                    *v += (sq - mean * mean).max(0.0) / shots as f64;
                }
            }
        }
    }
    Ok(TwirlData { num_qubits: l, shots, c, chi_diag, sigma: var.into_iter().map(f64::sqrt).collect() })
}
