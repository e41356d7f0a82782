//! Selective estimation of individual χ entries from survival probabilities
//! averaged over a complete set of mutually unbiased bases.
//!
//! For each MUB state `φ` and phase `γ` the input `(P_m + e^{-iγ} P_n) φ` is
//! prepared (normalized, weight `w`) and the probability of returning to `φ`
//! is measured. The weighted averages `F^γ = Σ w s / (D(D+1))` combine into
//!
//! ```text
//! F_mn = [(F^0 - F^π) + i (F^{-π/2} - F^{π/2})] / 4
//! χ_mn = ((D+1) F_mn - δ_mn) / D
//! ```
//!
//! using the 2-design identity `avg <φ|Λ(P_m φφ† P_n)|φ> = (D χ_mn + δ_mn)/(D+1)`
//! for trace-preserving `Λ`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChiMatrix, MubSet, Superoperator, TwirlData};
use crate::channel::{Executor, Job};
use crate::circuit::{Circuit, Gate};
use crate::linalg::{c64, ComplexMatrix};
use crate::pauli::PauliString;
use crate::{Error, Result};

/// Survival phases, in the order `F^0, F^π, F^{-π/2}, F^{π/2}`.
pub const GAMMAS: [f64; 4] = [0.0, PI, -FRAC_PI_2, FRAC_PI_2];

/// Amplitudes below this are treated as exact zeros when synthesizing inputs.
const AMP_EPS: f64 = 1e-9;

/// Estimate of one χ entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementEstimate {
    pub m: usize,
    pub n: usize,
    pub value: c64,
    pub sigma_re: f64,
    pub sigma_im: f64,
    /// `F^γ` in [`GAMMAS`] order.
    pub fidelities: [f64; 4],
    /// Executor calls used.
    pub settings: usize,
    /// CX gates spent outside the process (inputs and basis changes).
    pub cx_overhead: usize,
    /// Largest `depth(C) + depth(V^α) + depth(process)` over the settings.
    pub max_setting_depth: usize,
    /// `|χ_mn| > 1 + 5σ`: the recombination is inconsistent.
    pub flagged: bool,
}

/// Circuit preparing `a|u> + b|v>` (any global phase) from `|0…0>`.
fn two_level_prep(l: usize, amps: &[c64]) -> Result<Circuit> {
    let support: Vec<usize> = (0..amps.len()).filter(|&i| amps[i].norm() > AMP_EPS).collect();
    let bit = |q: usize| 1usize << (l - 1 - q);
    let mut c = Circuit::new(l, "sqpt_input")?;
    match support.as_slice() {
        [u] => {
            for q in (0..l).filter(|&q| u & bit(q) != 0) {
                c.push(Gate::x(q))?;
            }
        }
        [s0, s1] => {
            let diff = s0 ^ s1;
            let p = (0..l).find(|&q| diff & bit(q) != 0).expect("distinct states");
            let (u, v) = if s0 & bit(p) == 0 { (*s0, *s1) } else { (*s1, *s0) };
            for q in (0..l).filter(|&q| u & bit(q) != 0) {
                c.push(Gate::x(q))?;
            }
            let (a, b) = (amps[u], amps[v]);
            c.push(Gate::ry(p, 2.0 * b.norm().atan2(a.norm())))?;
            c.push(Gate::rz(p, b.arg() - a.arg()))?;
            for q in (0..l).filter(|&q| q != p && diff & bit(q) != 0) {
                c.push(Gate::CX { control: p, target: q })?;
            }
        }
        _ => {
            return Err(Error::Contract(format!("SQPT input has {} basis components, expected 1 or 2", support.len())));
        }
    }
    Ok(c)
}

fn apply_pauli(p: &PauliString, v: &[c64]) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); v.len()];
    for (b, &amp) in v.iter().enumerate() {
        let (r, ph) = p.apply_to_basis(b);
        out[r] += ph * amp;
    }
    out
}

struct Setting {
    alpha: usize,
    i: usize,
    gamma: usize,
    weight: f64,
    input: Circuit,
}

fn settings_for(mubs: &MubSet, pm: &PauliString, pn: &PauliString) -> Result<Vec<Setting>> {
    let d = mubs.dim();
    let l = mubs.num_qubits();
    let mut out = Vec::new();
    for alpha in 0..mubs.num_bases() {
        for i in 0..d {
            let phi = mubs.state(alpha, i);
            let a = apply_pauli(pm, phi);
            let b = apply_pauli(pn, phi);
            for (gamma, g) in GAMMAS.iter().enumerate() {
                let ph = c64::from_polar(1.0, -g);
                let psi: Vec<c64> = a.iter().zip(&b).map(|(x, y)| x + ph * y).collect();
                let w: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
                if w < AMP_EPS {
                    continue;
                }
                // coordinates in basis α: <φ^α_j|ψ> / √w
                let coords: Vec<c64> = (0..d)
                    .map(|j| mubs.state(alpha, j).iter().zip(&psi).map(|(u, p)| u.conj() * p).sum::<c64>() / w.sqrt())
                    .collect();
                let mut input = two_level_prep(l, &coords)?;
                input.set_label(format!("C_{alpha}_{i}_{gamma}"));
                out.push(Setting { alpha, i, gamma, weight: w, input });
            }
        }
    }
    Ok(out)
}

/// Estimates `χ_mn` of `process` through the executor.
pub fn sqpt_element<E: Executor + ?Sized>(
    exec: &E,
    process: &Circuit,
    m: usize,
    n: usize,
    mubs: &MubSet,
    shots: usize,
) -> Result<ElementEstimate> {
    let l = mubs.num_qubits();
    if process.num_qubits() != l {
        return Err(Error::LengthMismatch { left: process.num_qubits(), right: l });
    }
    let pm = PauliString::from_index(l, m)?;
    let pn = PauliString::from_index(l, n)?;
    let d = mubs.dim() as f64;
    let settings = settings_for(mubs, &pm, &pn)?;
    let label = format!("sqpt/{}/{}/{}", process.label(), pm, pn);

    let results: Vec<(f64, f64)> = settings
        .par_iter()
        .map(|s| {
            let job = Job {
                label: label.clone(),
                preparation: vec![&s.input, mubs.circuit(s.alpha)],
                process,
                twirl: false,
                measurement: mubs.inverse_circuit(s.alpha),
                shots,
                stream: ((s.alpha * mubs.dim() + s.i) * 4 + s.gamma) as u64,
            };
            let surv = exec.run(&job)?.probability(s.i);
            let var = if shots == 0 {
                0.0
            } else {
                let k = shots as f64;
                (surv * (1.0 - surv)).max(1.0 / k) / k
            };
            Ok((surv, var))
        })
        .collect::<Result<_>>()?;

    let norm = d * (d + 1.0);
    let mut f = [0.0; 4];
    let mut var = [0.0; 4];
    let mut cx_overhead = 0;
    let mut max_depth = 0;
    let pdepth = process.depth();
    for (s, (surv, v)) in settings.iter().zip(&results) {
        f[s.gamma] += s.weight * surv / norm;
        var[s.gamma] += s.weight * s.weight * v / (norm * norm);
        let v_alpha = mubs.circuit(s.alpha);
        cx_overhead += s.input.cnot_count() + v_alpha.cnot_count() + mubs.inverse_circuit(s.alpha).cnot_count();
        max_depth = max_depth.max(s.input.depth() + v_alpha.depth() + pdepth);
    }
    let g = c64::new(f[0] - f[1], f[2] - f[3]) / 4.0;
    let delta = if m == n { 1.0 } else { 0.0 };
    let value = ((d + 1.0) * g - delta) / d;
    let scale = (d + 1.0) / (4.0 * d);
    let sigma_re = scale * (var[0] + var[1]).sqrt();
    let sigma_im = scale * (var[2] + var[3]).sqrt();
    let sigma = sigma_re.hypot(sigma_im);
    Ok(ElementEstimate {
        m,
        n,
        value,
        sigma_re,
        sigma_im,
        fidelities: f,
        settings: settings.len(),
        cx_overhead,
        max_setting_depth: max_depth,
        flagged: value.norm() > 1.0 + 5.0 * sigma,
    })
}

/// Exact MUB average `avg_φ <φ|Λ(P_m |φ><φ| P_n)|φ>`.
pub fn survival_average(lambda: &Superoperator, m: usize, n: usize, mubs: &MubSet) -> Result<c64> {
    let l = mubs.num_qubits();
    if lambda.num_qubits() != l {
        return Err(Error::LengthMismatch { left: lambda.num_qubits(), right: l });
    }
    let d = mubs.dim();
    let pm = PauliString::from_index(l, m)?;
    let pn = PauliString::from_index(l, n)?;
    let mut acc = c64::new(0.0, 0.0);
    for alpha in 0..mubs.num_bases() {
        for i in 0..d {
            let phi = mubs.state(alpha, i);
            let a = apply_pauli(&pm, phi);
            let b = apply_pauli(&pn, phi);
            // P_m |φ><φ| P_n = |a><b|
            let mut op = ComplexMatrix::zeros(d, d);
            for r in 0..d {
                for c in 0..d {
                    op[(r, c)] = a[r] * b[c].conj();
                }
            }
            let out = lambda.apply(&op)?;
            let phi_out = out.matvec(phi)?;
            acc += phi.iter().zip(&phi_out).map(|(x, y)| x.conj() * y).sum::<c64>();
        }
    }
    Ok(acc / (d * (d + 1)) as f64)
}

/// The `ceil(k/2)` largest upper-triangle off-diagonal entries of the ideal
/// χ with `|χ| > threshold`; each stands for itself and its conjugate.
pub fn select_top_k(ideal: &ChiMatrix, k: usize, threshold: f64) -> Vec<(usize, usize)> {
    let n = ideal.dim();
    let mut cand: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|m| (m + 1..n).map(move |j| (m, j)))
        .map(|(m, j)| (m, j, ideal.get(m, j).norm()))
        .filter(|&(_, _, a)| a > threshold)
        .collect();
    cand.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    cand.into_iter().take(k.div_ceil(2)).map(|(m, j, _)| (m, j)).collect()
}

/// Adds the conjugate partner of every upper-triangle estimate.
pub fn conjugate_closure(upper: &[(usize, usize, c64)]) -> Vec<(usize, usize, c64)> {
    upper.iter().flat_map(|&(m, n, v)| [(m, n, v), (n, m, v.conj())]).collect()
}

/// Sparse χ from the twirled diagonal and measured off-diagonal entries.
pub fn assemble_sparse_chi(diag: &TwirlData, offdiag: &[(usize, usize, c64)]) -> Result<ChiMatrix> {
    let mut chi = ChiMatrix::zeros(diag.num_qubits)?;
    let n = chi.dim();
    if diag.chi_diag.len() != n {
        return Err(Error::Dimension(format!("diagonal of length {} for dimension {n}", diag.chi_diag.len())));
    }
    for (m, &v) in diag.chi_diag.iter().enumerate() {
        chi.set(m, m, c64::new(v, 0.0));
    }
    for &(m, k, v) in offdiag {
        if m >= n || k >= n || m == k {
            return Err(Error::InvalidArgument(format!("off-diagonal entry ({m}, {k}) invalid for dimension {n}")));
        }
        chi.set(m, k, v);
    }
    for &(m, k, v) in offdiag {
        let partner = offdiag.iter().find(|&&(a, b, _)| a == k && b == m);
        match partner {
            Some(&(_, _, w)) if (w - v.conj()).norm() <= 1e-12 => {}
            _ => {
                return Err(Error::Contract(format!("entry ({m}, {k}) lacks its conjugate partner")));
            }
        }
    }
    Ok(chi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{NoiseModel, SimulatedExecutor};
    use crate::tomo::full::{reconstruct_chi, run_full_qpt};
    use crate::tomo::tests::random_kraus;
    use crate::tomo::{build_mubs, chi_from_superoperator};

    #[test]
    fn two_level_inputs() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![c64::new(0.0, 0.0); 8];
        amps[0b011] = c64::new(0.6, 0.0);
        amps[0b110] = c64::new(0.0, 0.8);
        let c = two_level_prep(3, &amps).unwrap();
        let u = c.unitary().unwrap();
        let got: Vec<c64> = (0..8).map(|r| u[(r, 0)]).collect();
        let ov: c64 = got.iter().zip(&amps).map(|(a, b)| a.conj() * b).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        let mut one = vec![c64::new(0.0, 0.0); 4];
        one[2] = c64::new(-h, h);
        let u = two_level_prep(2, &one).unwrap().unitary().unwrap();
        assert!((u[(2, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(two_level_prep(2, &[c64::new(0.5, 0.0); 4]).is_err());
    }

    #[test]
    fn recombination_coefficients() {
        // F^γ = F_mm + F_nn + e^{iγ} F_mn + e^{-iγ} F_nm for a Hermitian pair
        let fmn = c64::new(0.13, -0.07);
        let (fmm, fnn) = (0.4, 0.25);
        let f: Vec<f64> = GAMMAS.iter().map(|g| fmm + fnn + 2.0 * (c64::from_polar(1.0, *g) * fmn).re).collect();
        let g = c64::new(f[0] - f[1], f[2] - f[3]) / 4.0;
        assert!((g - fmn).norm() < 1e-15);
    }

    #[test]
    fn identity_channel_elements() {
        let exec = SimulatedExecutor::noiseless();
        let mubs = build_mubs(2).unwrap();
        let id = Circuit::new(2, "id").unwrap();
        let e = sqpt_element(&exec, &id, 0, 0, &mubs, 0).unwrap();
        assert!((e.value - c64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((e.fidelities[0] - 4.0).abs() < 1e-12);
        let e = sqpt_element(&exec, &id, 3, 9, &mubs, 0).unwrap();
        assert!(e.value.norm() < 1e-12);
        assert!(!e.flagged);
    }

    #[test]
    fn survival_formula_on_random_channels() {
        for (l, seed) in [(1, 3), (2, 7)] {
            let mubs = build_mubs(l).unwrap();
            let lam = Superoperator::from_kraus(&random_kraus(l, seed)).unwrap();
            let chi = chi_from_superoperator(&lam).unwrap();
            let d = (1 << l) as f64;
            let n = chi.dim();
            for m in 0..n {
                for k in 0..n {
                    let f = survival_average(&lam, m, k, &mubs).unwrap();
                    let delta = if m == k { 1.0 } else { 0.0 };
                    let want = (d * chi.get(m, k) + delta) / (d + 1.0);
                    assert!((f - want).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn exact_sqpt_matches_full_qpt() {
        let nm = NoiseModel { p1: 0.01, p2: 0.04, p_ro: 0.02, cx_overrotation: 0.05, noisy_spam: false, ..NoiseModel::default() };
        let exec = SimulatedExecutor::new(nm).unwrap();
        let mut c = Circuit::new(2, "p").unwrap();
        c.extend([Gate::H { q: 0 }, Gate::CX { control: 0, target: 1 }, Gate::SingleQubitU { q: 1, mu: [0.3, -0.2, 0.9] }]).unwrap();
        let full = reconstruct_chi(&run_full_qpt(&exec, &c, 0).unwrap()).unwrap();
        let mubs = build_mubs(2).unwrap();
        for (m, n) in [(0, 0), (1, 5), (5, 1), (12, 3), (7, 7), (15, 2)] {
            let e = sqpt_element(&exec, &c, m, n, &mubs, 0).unwrap();
            assert!((e.value - full.get(m, n)).norm() < 1e-9, "({m},{n}) {} vs {}", e.value, full.get(m, n));
        }
    }

    #[test]
    fn sparse_assembly() {
        let diag = TwirlData { num_qubits: 1, shots: 0, c: vec![1.0; 4], chi_diag: vec![0.7, 0.1, 0.1, 0.1], sigma: vec![0.0; 4] };
        let chi = assemble_sparse_chi(&diag, &[]).unwrap();
        assert_eq!(chi.support(0.0).len(), 4);
        let pairs = conjugate_closure(&[(0, 2, c64::new(0.1, 0.2))]);
        let chi = assemble_sparse_chi(&diag, &pairs).unwrap();
        assert!(chi.hermiticity_error() < 1e-15);
        assert!(assemble_sparse_chi(&diag, &pairs[..1]).is_err());
        assert!(assemble_sparse_chi(&diag, &[(1, 1, c64::new(0.0, 0.0))]).is_err());
    }

    #[test]
    fn top_k_selection() {
        let u = crate::tomo::tests::random_unitary(2, 11);
        let ideal = ChiMatrix::from_unitary(&u).unwrap();
        let sel = select_top_k(&ideal, 10, 1e-12);
        assert_eq!(sel.len(), 5);
        let mags: Vec<f64> = sel.iter().map(|&(m, n)| ideal.get(m, n).norm()).collect();
        assert!(mags.windows(2).all(|w| w[0] >= w[1]));
        let all_upper = ideal.support(1e-12).iter().filter(|(m, n, _)| m < n).count();
        assert_eq!(select_top_k(&ideal, 10_000, 1e-12).len(), all_upper);
    }
}
