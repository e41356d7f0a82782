//! Process tomography: χ matrices, superoperators and their conversions,
//! full and selective reconstruction, and spectral analysis.
//!
//! The χ matrix is indexed by Pauli strings in [`PauliString::index`] order
//! and defined by `Λ(ρ) = Σ_mn χ_mn P_m ρ P_n`, so a trace-preserving channel
//! has `Tr χ = 1` and a unitary channel has unit self-fidelity.

pub mod full;
pub mod mubs;
pub mod selective;
pub mod spectrum;
pub mod twirl;

use serde::{Deserialize, Serialize};

use crate::channel::{pauli_trace, KrausSet};
use crate::linalg::{c64, ComplexMatrix};
use crate::pauli::PauliString;
use crate::{Error, Result};

pub use full::{reconstruct_superoperator, run_full_qpt, TomoData};
pub use mubs::{build_mubs, MubSet};
pub use selective::{assemble_sparse_chi, select_top_k, sqpt_element, ElementEstimate};
pub use spectrum::{lambda_spectrum, spectral_stats, HistogramSpec, SpectralStats};
pub use twirl::{twirl_diagonal, TwirlData};

/// Largest register handled by the dense χ / superoperator conversions.
pub const MAX_TOMO_QUBITS: usize = 4;

fn check_qubits(l: usize) -> Result<()> {
    if l == 0 || l > MAX_TOMO_QUBITS {
        return Err(Error::InvalidArgument(format!("tomography supports 1..={MAX_TOMO_QUBITS} qubits, got {l}")));
    }
    Ok(())
}

/// Process matrix in the Pauli basis, `4^L × 4^L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiMatrix {
    num_qubits: usize,
    data: ComplexMatrix,
}

impl ChiMatrix {
    pub fn new(num_qubits: usize, data: ComplexMatrix) -> Result<ChiMatrix> {
        check_qubits(num_qubits)?;
        let n = 1usize << (2 * num_qubits);
        if data.rows() != n || data.cols() != n {
            return Err(Error::Dimension(format!("χ for {num_qubits} qubits must be {n}x{n}, got {}x{}", data.rows(), data.cols())));
        }
        Ok(ChiMatrix { num_qubits, data })
    }

    pub fn zeros(num_qubits: usize) -> Result<ChiMatrix> {
        check_qubits(num_qubits)?;
        let n = 1usize << (2 * num_qubits);
        Ok(ChiMatrix { num_qubits, data: ComplexMatrix::zeros(n, n) })
    }

    /// Rank-one χ of the unitary channel `ρ → U ρ U†`.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<ChiMatrix> {
        let d = u.rows();
        if !u.is_square() || !d.is_power_of_two() || d < 2 {
            return Err(Error::Dimension(format!("unitary of shape {}x{}", u.rows(), u.cols())));
        }
        let l = d.trailing_zeros() as usize;
        check_qubits(l)?;
        let coeffs: Vec<c64> = PauliString::all(l).map(|p| pauli_trace(&p, u) / d as f64).collect();
        let n = coeffs.len();
        let mut data = ComplexMatrix::zeros(n, n);
        for m in 0..n {
            for k in 0..n {
                data[(m, k)] = coeffs[m] * coeffs[k].conj();
            }
        }
        Ok(ChiMatrix { num_qubits: l, data })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.data
    }

    pub fn get(&self, m: usize, n: usize) -> c64 {
        self.data[(m, n)]
    }

    pub fn set(&mut self, m: usize, n: usize, v: c64) {
        self.data[(m, n)] = v;
    }

    pub fn trace(&self) -> c64 {
        self.data.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.data.hermiticity_error()
    }

    /// Hermitian part together with the deviation it removed.
    pub fn symmetrized(&self) -> (ChiMatrix, f64) {
        let dev = self.hermiticity_error();
        let h = self.data.hermitian_part().expect("square");
        (ChiMatrix { num_qubits: self.num_qubits, data: h }, dev)
    }

    /// `‖Σ_mn χ_mn P_n P_m - I‖_F`, zero for trace-preserving channels.
    pub fn tp_deviation(&self) -> f64 {
        let l = self.num_qubits;
        let d = 1usize << l;
        let paulis: Vec<PauliString> = PauliString::all(l).collect();
        let mut acc = ComplexMatrix::zeros(d, d);
        for (m, pm) in paulis.iter().enumerate() {
            for (n, pn) in paulis.iter().enumerate() {
                let v = self.data[(m, n)];
                if v.norm() == 0.0 {
                    continue;
                }
                let (ph, p) = pn.mul(pm).expect("same length");
                crate::channel::add_pauli(&mut acc, &p, v * ph.to_complex());
            }
        }
        acc.sub(&ComplexMatrix::identity(d)).expect("square").frobenius_norm()
    }

    /// Entries with `|χ| > threshold` as `(m, n, value)`.
    pub fn support(&self, threshold: f64) -> Vec<(usize, usize, c64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for m in 0..n {
            for k in 0..n {
                let v = self.data[(m, k)];
                if v.norm() > threshold {
                    out.push((m, k, v));
                }
            }
        }
        out
    }
}

/// Column-stacking superoperator, `D² × D²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superoperator {
    num_qubits: usize,
    data: ComplexMatrix,
}

impl Superoperator {
    pub fn new(num_qubits: usize, data: ComplexMatrix) -> Result<Superoperator> {
        check_qubits(num_qubits)?;
        let n = 1usize << (2 * num_qubits);
        if data.rows() != n || data.cols() != n {
            return Err(Error::Dimension(format!("superoperator for {num_qubits} qubits must be {n}x{n}")));
        }
        Ok(Superoperator { num_qubits, data })
    }

    /// `conj(U) ⊗ U`.
    pub fn from_unitary(u: &ComplexMatrix) -> Result<Superoperator> {
        let d = u.rows();
        if !u.is_square() || !d.is_power_of_two() || d < 2 {
            return Err(Error::Dimension(format!("unitary of shape {}x{}", u.rows(), u.cols())));
        }
        Superoperator::new(d.trailing_zeros() as usize, u.conj().kron(u)?)
    }

    pub fn from_kraus(k: &KrausSet) -> Result<Superoperator> {
        Superoperator::new(k.dim().trailing_zeros() as usize, k.superoperator()?)
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

    /// `Λ(ρ)` for an arbitrary operator.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = 1usize << self.num_qubits;
        if rho.rows() != d || rho.cols() != d {
            return Err(Error::Dimension(format!("operator of shape {}x{} for D={d}", rho.rows(), rho.cols())));
        }
        let v = self.data.matvec(rho.transpose().data())?;
        Ok(ComplexMatrix::from_vec(d, d, v)?.transpose())
    }

    /// `‖Λ† vec(I) - vec(I)‖`, zero for trace-preserving channels.
    pub fn tp_deviation(&self) -> f64 {
        let d = 1usize << self.num_qubits;
        let vec_i: Vec<c64> = (0..d * d).map(|k| if k % (d + 1) == 0 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) }).collect();
        let left = self.data.adjoint().matvec(&vec_i).expect("square");
        left.iter().zip(&vec_i).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Matrix whose column `m` is `P_m` flattened row-major.
fn pauli_basis(l: usize) -> ComplexMatrix {
    let d = 1usize << l;
    let n = d * d;
    let mut b = ComplexMatrix::zeros(n, n);
    for (m, p) in PauliString::all(l).enumerate() {
        for c in 0..d {
            let (a, amp) = p.apply_to_basis(c);
            b[(a * d + c, m)] = amp;
        }
    }
    b
}

/// Moves between the superoperator layout `Λ[(a + bD), (c + eD)]` and the
/// reshuffled layout `C[(aD + c), (bD + e)]`.
fn reshuffle(m: &ComplexMatrix, d: usize, to_superop: bool) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let (sup, resh) = ((a + b * d, c + e * d), (a * d + c, b * d + e));
                    if to_superop {
                        out[sup] = m[resh];
                    } else {
                        out[resh] = m[sup];
                    }
                }
            }
        }
    }
    out
}

pub fn chi_from_superoperator(lambda: &Superoperator) -> Result<ChiMatrix> {
    let l = lambda.num_qubits;
    let d = 1usize << l;
    let b = pauli_basis(l);
    let c = reshuffle(&lambda.data, d, false);
    let chi = b.adjoint().matmul(&c)?.matmul(&b)?.scale_real(1.0 / (d * d) as f64);
    ChiMatrix::new(l, chi)
}

pub fn superoperator_from_chi(chi: &ChiMatrix) -> Result<Superoperator> {
    let l = chi.num_qubits;
    let d = 1usize << l;
    let b = pauli_basis(l);
    let c = b.matmul(&chi.data)?.matmul(&b.adjoint())?;
    Superoperator::new(l, reshuffle(&c, d, true))
}

/// `Re Tr(χ_ideal† χ_exp)`.
pub fn process_fidelity(ideal: &ChiMatrix, exp: &ChiMatrix) -> Result<f64> {
    if ideal.num_qubits != exp.num_qubits {
        return Err(Error::LengthMismatch { left: ideal.num_qubits, right: exp.num_qubits });
    }
    Ok(ideal.data.inner(&exp.data)?.re)
}

/// Zeroes entries of `exp` where `|χ_ideal| <= threshold`.
pub fn mask_to_ideal_support(exp: &ChiMatrix, ideal: &ChiMatrix, threshold: f64) -> Result<ChiMatrix> {
    if ideal.num_qubits != exp.num_qubits {
        return Err(Error::LengthMismatch { left: ideal.num_qubits, right: exp.num_qubits });
    }
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!("mask threshold {threshold} must be non-negative")));
    }
    let mut out = exp.clone();
    for (o, i) in out.data.data_mut().iter_mut().zip(ideal.data.data()) {
        if i.norm() <= threshold {
            *o = c64::new(0.0, 0.0);
        }
    }
    Ok(out)
}
