//! Full process tomography over the `{0, 1, +, +i}^L` preparation frame.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chi_from_superoperator, ChiMatrix, Superoperator};
use crate::channel::{basis_change, prep_circuit, Executor, Job, Prep};
use crate::circuit::Circuit;
use crate::linalg::{c64, solve, ComplexMatrix};
use crate::pauli::{Letter, PauliString};
use crate::{Error, Result};

/// Largest register for full tomography.
pub const MAX_FULL_QUBITS: usize = 3;

/// Per-qubit expansion of `I, X, Y, Z` over the preparations `0, 1, +, +i`.
const FRAME: [[f64; 4]; 4] = [
    [1.0, 1.0, 0.0, 0.0],
    [-1.0, -1.0, 2.0, 0.0],
    [-1.0, -1.0, 0.0, 2.0],
    [1.0, -1.0, 0.0, 0.0],
];

/// `Tr(σ ρ_prep)` for `σ ∈ {I, X, Y, Z}` and the four preparations.
const PREP_BLOCH: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [1.0, -1.0, 0.0, 0.0],
];

fn digits(mut idx: usize, l: usize) -> Vec<usize> {
    let mut out = vec![0; l];
    for q in (0..l).rev() {
        out[q] = idx % 4;
        idx /= 4;
    }
    out
}

/// Preparations of a product index, qubit 0 most significant.
pub fn prep_of_index(l: usize, f: usize) -> Vec<Prep> {
    digits(f, l).into_iter().map(|d| Prep::ALL[d]).collect()
}

pub fn prep_label(l: usize, f: usize) -> String {
    prep_of_index(l, f).iter().map(|p| p.label()).collect::<Vec<_>>().join(",")
}

/// Measured expectations `d[f][k] = Tr(P_k Λ(ρ_f))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomoData {
    pub num_qubits: usize,
    /// Shots per setting; 0 for exact expectations.
    pub shots: usize,
    pub process: String,
    pub expectations: Vec<Vec<f64>>,
}

impl TomoData {
    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn setting_count(&self) -> usize {
        self.expectations.iter().map(|r| r.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = 1usize << (2 * self.num_qubits);
        if self.expectations.len() != n || self.expectations.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("tomography table must be {n}x{n}")));
        }
        let bound = if self.shots == 0 { 1e-9 } else { 4.0 / (self.shots as f64).sqrt() };
        for (f, row) in self.expectations.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if !(v.abs() <= 1.0 + bound) {
                    return Err(Error::Contract(format!("expectation d[{f}][{k}] = {v} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Plug-in variance of each expectation estimate.
    fn variance(&self, f: usize, k: usize) -> f64 {
        if self.shots == 0 || k == 0 {
            return 0.0;
        }
        let d = self.expectations[f][k];
        let s = self.shots as f64;
        (1.0 - d * d).max(1.0 / s) / s
    }
}

/// Collects all `4^L × 4^L` (preparation, Pauli) expectations.
pub fn run_full_qpt<E: Executor + ?Sized>(exec: &E, process: &Circuit, shots: usize) -> Result<TomoData> {
    let l = process.num_qubits();
    if l > MAX_FULL_QUBITS {
        return Err(Error::InvalidArgument(format!("full tomography supports at most {MAX_FULL_QUBITS} qubits, got {l}")));
    }
    let n = 1usize << (2 * l);
    let preps: Vec<Circuit> = (0..n).map(|f| prep_circuit(&prep_of_index(l, f))).collect::<Result<_>>()?;
    let paulis: Vec<PauliString> = PauliString::all(l).collect();
    let meas: Vec<Circuit> = paulis
        .iter()
        .map(|p| {
            let letters: Vec<Letter> = p.letters().into_iter().map(|c| if c == Letter::I { Letter::Z } else { c }).collect();
            basis_change(&PauliString::from_letters(&letters)?)
        })
        .collect::<Result<_>>()?;

    let flat: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (f, k) = (idx / n, idx % n);
            if k == 0 {
                return Ok(1.0);
            }
            let job = Job {
                label: format!("qpt/{}/{}/{}", process.label(), prep_label(l, f), paulis[k]),
                preparation: vec![&preps[f]],
                process,
                twirl: false,
                measurement: &meas[k],
                shots,
                stream: idx as u64,
            };
            Ok(exec.run(&job)?.parity_expectation(paulis[k].support() as usize))
        })
        .collect::<Result<_>>()?;
    Ok(TomoData {
        num_qubits: l,
        shots,
        process: process.label().to_string(),
        expectations: flat.chunks(n).map(|r| r.to_vec()).collect(),
    })
}

/// `A[l][f]`: coefficients of `P_l` over the product preparations.
fn frame_matrix(l: usize) -> Vec<Vec<f64>> {
    let n = 1usize << (2 * l);
    (0..n)
        .map(|p| {
            let pd = digits(p, l);
            (0..n)
                .map(|f| digits(f, l).iter().zip(&pd).map(|(&fd, &ld)| FRAME[ld][fd]).product())
                .collect()
        })
        .collect()
}

/// Pauli transfer matrix `R_kl = Tr(P_k Λ(P_l)) / D`.
pub fn pauli_transfer_matrix(data: &TomoData) -> Result<Vec<Vec<f64>>> {
    data.validate()?;
    let l = data.num_qubits;
    let n = 1usize << (2 * l);
    let d = data.dim() as f64;
    let a = frame_matrix(l);
    let mut r = vec![vec![0.0; n]; n];
    for (lp, arow) in a.iter().enumerate() {
        for (f, &coef) in arow.iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            for (k, &dv) in data.expectations[f].iter().enumerate() {
                r[k][lp] += coef * dv / d;
            }
        }
    }
    Ok(r)
}

/// Superoperator of the measured channel, `Λ = B R B† / D` with `B` the
/// column-stacked Pauli basis.
pub fn reconstruct_superoperator(data: &TomoData) -> Result<Superoperator> {
    let l = data.num_qubits;
    let dim = data.dim();
    let n = dim * dim;
    let r = pauli_transfer_matrix(data)?;
    let mut b = ComplexMatrix::zeros(n, n);
    for (m, p) in PauliString::all(l).enumerate() {
        for c in 0..dim {
            let (row, amp) = p.apply_to_basis(c);
            b[(row + c * dim, m)] = amp;
        }
    }
    let rm = ComplexMatrix::from_rows(&r.iter().map(|row| row.iter().map(|&v| c64::new(v, 0.0)).collect()).collect::<Vec<_>>())?;
    let lam = b.matmul(&rm)?.matmul(&b.adjoint())?.scale_real(1.0 / dim as f64);
    Superoperator::new(l, lam)
}

/// χ of the measured channel (not symmetrized).
pub fn reconstruct_chi(data: &TomoData) -> Result<ChiMatrix> {
    chi_from_superoperator(&reconstruct_superoperator(data)?)
}

/// χ from a Pauli transfer matrix through `P_k P_n P_l ∝ P_m`.
pub fn chi_from_ptm(l: usize, r: &[Vec<f64>]) -> Result<ChiMatrix> {
    let paulis: Vec<PauliString> = PauliString::all(l).collect();
    let n = paulis.len();
    let d2 = n as f64;
    let mut chi = ChiMatrix::zeros(l)?;
    for m in 0..n {
        for k2 in 0..n {
            let mut acc = c64::new(0.0, 0.0);
            for (k, pk) in paulis.iter().enumerate() {
                // P_k P_n P_l = conj(ψ) P_m  where  P_n P_k P_m = ψ P_l
                let (ph, pl) = PauliString::triple_product(&paulis[k2], pk, &paulis[m])?;
                acc += ph.conj().to_complex() * r[k][pl.index()];
            }
            chi.set(m, k2, acc / d2);
        }
    }
    Ok(chi)
}

/// Standard deviations `(σ_re, σ_im)` of every χ entry, row-major,
/// propagated linearly from the per-setting shot noise.
pub fn chi_uncertainty(data: &TomoData) -> Result<(Vec<f64>, Vec<f64>)> {
    data.validate()?;
    let l = data.num_qubits;
    let n = 1usize << (2 * l);
    if data.shots == 0 {
        return Ok((vec![0.0; n * n], vec![0.0; n * n]));
    }
    let paulis: Vec<PauliString> = PauliString::all(l).collect();
    let a = frame_matrix(l);
    let d3 = (data.dim() as f64).powi(3);
    // v[k][l] = Σ_f A[l][f]² var(d[f][k]) / D⁶
    let v: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).map(|lp| (0..n).map(|f| a[lp][f] * a[lp][f] * data.variance(f, k)).sum::<f64>() / (d3 * d3)).collect())
        .collect();
    let mut re = vec![0.0; n * n];
    let mut im = vec![0.0; n * n];
    for m in 0..n {
        for k2 in 0..n {
            for (k, pk) in paulis.iter().enumerate() {
                let (ph, pl) = PauliString::triple_product(&paulis[k2], pk, &paulis[m])?;
                let var = v[k][pl.index()];
                if ph.is_real() {
                    re[m * n + k2] += var;
                } else {
                    im[m * n + k2] += var;
                }
            }
        }
    }
    Ok((re.into_iter().map(f64::sqrt).collect(), im.into_iter().map(f64::sqrt).collect()))
}

/// Direct solution of `κ χ⃗ = d⃗` with `κ[(f,k),(m,n)] = Tr(P_k P_m ρ_f P_n)`.
/// Dense in `16^L`, so limited to two qubits; used as a reference.
pub fn chi_by_direct_inversion(data: &TomoData) -> Result<ChiMatrix> {
    data.validate()?;
    let l = data.num_qubits;
    if l > 2 {
        return Err(Error::InvalidArgument("direct κ inversion is limited to 2 qubits".into()));
    }
    let paulis: Vec<PauliString> = PauliString::all(l).collect();
    let n = paulis.len();
    let bloch = |q: &PauliString, f: usize| -> f64 {
        digits(f, l).iter().enumerate().map(|(i, &fd)| PREP_BLOCH[q.letter(i) as usize][fd]).product()
    };
    let mut kappa = ComplexMatrix::zeros(n * n, n * n);
    let mut rhs = vec![c64::new(0.0, 0.0); n * n];
    for f in 0..n {
        for k in 0..n {
            let row = f * n + k;
            rhs[row] = c64::new(data.expectations[f][k], 0.0);
            for m in 0..n {
                for nn in 0..n {
                    let (ph, q) = PauliString::triple_product(&paulis[nn], &paulis[k], &paulis[m])?;
                    kappa[(row, m * n + nn)] = ph.to_complex() * bloch(&q, f);
                }
            }
        }
    }
    let x = solve(&kappa, &rhs)?;
    ChiMatrix::new(l, ComplexMatrix::from_vec(n, n, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseModel, SimulatedExecutor};
    use crate::circuit::Gate;

    fn random_circuit(l: usize) -> Circuit {
        let mut c = Circuit::new(l, "rc").unwrap();
        for q in 0..l {
            c.push(Gate::SingleQubitU { q, mu: [0.3 + q as f64, -0.7, 1.1 * q as f64] }).unwrap();
        }
        for q in 0..l - 1 {
            c.push(Gate::CX { control: q, target: q + 1 }).unwrap();
            c.push(Gate::ry(q, 0.8)).unwrap();
        }
        if l > 1 {
            c.push(Gate::CX { control: l - 1, target: 0 }).unwrap();
        }
        c
    }

    #[test]
    fn frame_expansions_are_exact() {
        // P_l = Σ_f A[l][f] ρ_f  ⇔  Tr(P_k P_l) = D δ_kl through the Bloch table
        let a = frame_matrix(1);
        for lp in 0..4 {
            for k in 0..4 {
                let v: f64 = (0..4).map(|f| a[lp][f] * PREP_BLOCH[k][f]).sum();
                assert_eq!(v, if k == lp { 2.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn identity_process_data() {
        let exec = SimulatedExecutor::noiseless();
        let c = Circuit::new(2, "id").unwrap();
        let data = run_full_qpt(&exec, &c, 0).unwrap();
        assert_eq!(data.setting_count(), 256);
        for f in 0..16 {
            for (k, p) in PauliString::all(2).enumerate() {
                let expect: f64 = (0..2).map(|q| PREP_BLOCH[p.letter(q) as usize][digits(f, 2)[q]]).product();
                assert!((data.expectations[f][k] - expect).abs() < 1e-12);
            }
        }
        let lam = reconstruct_superoperator(&data).unwrap();
        assert!(lam.matrix().sub(&ComplexMatrix::identity(16)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn x_gate_flips_z() {
        let exec = SimulatedExecutor::noiseless();
        let mut c = Circuit::new(1, "x").unwrap();
        c.push(Gate::x(0)).unwrap();
        let data = run_full_qpt(&exec, &c, 0).unwrap();
        assert!((data.expectations[0][3] + 1.0).abs() < 1e-12);
        assert!((data.expectations[1][3] - 1.0).abs() < 1e-12);
        assert!((data.expectations[2][1] - 1.0).abs() < 1e-12);
        assert!((data.expectations[3][2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_free_reconstruction_matches_unitary() {
        let exec = SimulatedExecutor::noiseless();
        for l in 1..=3 {
            let c = random_circuit(l);
            let data = run_full_qpt(&exec, &c, 0).unwrap();
            let u = c.unitary().unwrap();
            let lam = reconstruct_superoperator(&data).unwrap();
            assert!(lam.matrix().sub(Superoperator::from_unitary(&u).unwrap().matrix()).unwrap().frobenius_norm() < 1e-9);
            let chi = reconstruct_chi(&data).unwrap();
            assert!(chi.matrix().sub(ChiMatrix::from_unitary(&u).unwrap().matrix()).unwrap().frobenius_norm() < 1e-9);
            let via_ptm = chi_from_ptm(l, &pauli_transfer_matrix(&data).unwrap()).unwrap();
            assert!(via_ptm.matrix().sub(chi.matrix()).unwrap().max_abs() < 1e-12);
        }
        assert!(run_full_qpt(&exec, &Circuit::new(4, "big").unwrap(), 0).is_err());
    }

    #[test]
    fn structured_route_equals_kappa_inversion() {
        let nm = NoiseModel { p1: 0.02, p2: 0.05, p_ro: 0.03, ..NoiseModel::default() };
        let exec = SimulatedExecutor::new(nm).unwrap();
        for l in 1..=2 {
            let data = run_full_qpt(&exec, &random_circuit(l), 0).unwrap();
            let a = reconstruct_chi(&data).unwrap();
            let b = chi_by_direct_inversion(&data).unwrap();
            assert!(a.matrix().sub(b.matrix()).unwrap().frobenius_norm() < 1e-9);
        }
    }

    #[test]
    fn depolarizing_eigenvalues() {
        let p = 0.2;
        let nm = NoiseModel { p1: p, p2: 0.0, p_ro: 0.0, noisy_spam: false, ..NoiseModel::default() };
        let exec = SimulatedExecutor::new(nm).unwrap();
        let mut c = Circuit::new(1, "dep").unwrap();
        c.push(Gate::SingleQubitU { q: 0, mu: [0.0, 0.0, 0.0] }).unwrap();
        let lam = reconstruct_superoperator(&run_full_qpt(&exec, &c, 0).unwrap()).unwrap();
        let mut mods: Vec<f64> = crate::linalg::eig_general(lam.matrix()).unwrap().iter().map(|z| z.norm()).collect();
        mods.sort_by(f64::total_cmp);
        for (got, want) in mods.iter().zip([1.0 - p, 1.0 - p, 1.0 - p, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn shot_noise_uncertainty_is_calibrated() {
        let exec = SimulatedExecutor::new(NoiseModel { seed: 3, ..NoiseModel::default() }).unwrap();
        let c = random_circuit(2);
        let exact = reconstruct_chi(&run_full_qpt(&SimulatedExecutor::new(NoiseModel::default()).unwrap(), &c, 0).unwrap()).unwrap();
        let data = run_full_qpt(&exec, &c, 1024).unwrap();
        let est = reconstruct_chi(&data).unwrap();
        let (sr, si) = chi_uncertainty(&data).unwrap();
        let n = 16;
        let mut z2 = 0.0;
        let mut count = 0.0;
        for i in 0..n * n {
            let diff = est.matrix().data()[i] - exact.matrix().data()[i];
            if sr[i] > 0.0 {
                z2 += (diff.re / sr[i]).powi(2);
                count += 1.0;
            }
            if si[i] > 0.0 {
                z2 += (diff.im / si[i]).powi(2);
                count += 1.0;
            }
        }
        let rms = (z2 / count).sqrt();
        assert!((0.7..1.3).contains(&rms), "normalized rms {rms}");
    }
}
