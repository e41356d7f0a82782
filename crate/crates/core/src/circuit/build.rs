use serde::{Deserialize, Serialize};

use super::{Circuit, Gate};
use crate::{Error, Result};

/// Boundary condition of the Heisenberg chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Open,
    Periodic,
}

impl std::fmt::Display for Bc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Bc::Open => "open",
            Bc::Periodic => "periodic",
        })
    }
}

impl std::str::FromStr for Bc {
    type Err = Error;
    fn from_str(s: &str) -> Result<Bc> {
        match s {
            "open" => Ok(Bc::Open),
            "periodic" => Ok(Bc::Periodic),
            _ => Err(Error::InvalidArgument(format!("unknown boundary condition `{s}`"))),
        }
    }
}

pub(crate) fn check_chain(l: usize, bc: Bc) -> Result<()> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("chain needs at least 2 sites, got {l}")));
    }
    if bc == Bc::Periodic && l < 3 {
        return Err(Error::InvalidArgument("periodic chain needs at least 3 sites".into()));
    }
    Ok(())
}

/// Commuting bond layers: even bonds, odd bonds and (periodic only) the
/// wrap-around bond `(L-1, 0)`.
pub fn bond_layers(l: usize, bc: Bc) -> Result<Vec<Vec<(usize, usize)>>> {
    check_chain(l, bc)?;
    let even: Vec<_> = (0..l - 1).step_by(2).map(|i| (i, i + 1)).collect();
    let odd: Vec<_> = (1..l - 1).step_by(2).map(|i| (i, i + 1)).collect();
    let mut layers = vec![even];
    if !odd.is_empty() {
        layers.push(odd);
    }
    if bc == Bc::Periodic {
        layers.push(vec![(l - 1, 0)]);
    }
    Ok(layers)
}

fn check_steps(n: usize, t: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("Trotter step count must be at least 1".into()));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("evolution time {t} is not finite")));
    }
    Ok(())
}

fn emit(l: usize, label: String, seq: &[(usize, f64)], layers: &[Vec<(usize, usize)>]) -> Result<Circuit> {
    let mut c = Circuit::new(l, label)?;
    for &(layer, dt) in seq {
        for &(i, j) in &layers[layer] {
            c.push(Gate::HeisenbergBond { i, j, dt })?;
        }
    }
    Ok(c)
}

/// First-order Trotter circuit before SWAP routing.
pub fn trotter1_logical(l: usize, bc: Bc, t: f64, n: usize) -> Result<Circuit> {
    check_steps(n, t)?;
    let layers = bond_layers(l, bc)?;
    let dt = t / n as f64;
    let seq: Vec<(usize, f64)> = (0..n).flat_map(|_| (0..layers.len()).map(move |k| (k, dt))).collect();
    emit(l, format!("trotter1_L{l}_{bc}_n{n}"), &seq, &layers)
}

/// Second-order Trotter circuit before SWAP routing.
///
/// Each step is `U_0(dt/2) U_1(dt/2) … U_last(dt) … U_1(dt/2) U_0(dt/2)`;
/// adjacent applications of the same bond layer, including the half steps
/// meeting between consecutive steps, are merged into one.
pub fn trotter2_logical(l: usize, bc: Bc, t: f64, n: usize) -> Result<Circuit> {
    check_steps(n, t)?;
    let layers = bond_layers(l, bc)?;
    let dt = t / n as f64;
    let last = layers.len() - 1;
    let mut seq: Vec<(usize, f64)> = Vec::new();
    let mut push = |k: usize, d: f64| match seq.last_mut() {
        Some((prev, acc)) if *prev == k => *acc += d,
        _ => seq.push((k, d)),
    };
    for _ in 0..n {
        for k in 0..last {
            push(k, dt / 2.0);
        }
        push(last, dt);
        for k in (0..last).rev() {
            push(k, dt / 2.0);
        }
    }
    emit(l, format!("trotter2_L{l}_{bc}_n{n}"), &seq, &layers)
}

/// First-order Trotter circuit, routed onto the linear chain.
pub fn build_trotter1(l: usize, bc: Bc, t: f64, n: usize) -> Result<Circuit> {
    Ok(trotter1_logical(l, bc, t, n)?.route_linear())
}

/// Second-order Trotter circuit, routed onto the linear chain.
pub fn build_trotter2(l: usize, bc: Bc, t: f64, n: usize) -> Result<Circuit> {
    Ok(trotter2_logical(l, bc, t, n)?.route_linear())
}

/// Two-qubit gate positions of the brickwall, in application order.
pub fn brickwall_bonds(l: usize, n_layers: usize) -> Vec<(usize, usize)> {
    if l < 2 {
        return Vec::new();
    }
    let layer: Vec<(usize, usize)> = (0..l - 1)
        .step_by(2)
        .chain((1..l - 1).step_by(2))
        .map(|i| (i, i + 1))
        .collect();
    (0..n_layers).flat_map(|_| layer.iter().copied()).collect()
}

/// Parameters of the brickwall: 9 per two-qubit block (two single-qubit
/// gates feeding a canonical gate) plus a final single-qubit gate per qubit.
pub fn brickwall_param_count(l: usize, n_layers: usize) -> usize {
    9 * brickwall_bonds(l, n_layers).len() + 3 * l
}

/// Brickwall ansatz.
///
/// For each bond `(i, i+1)` in [`brickwall_bonds`] order the parameters are
/// `μ(i)`, `μ(i+1)`, `ν`; the last `3L` entries are the closing single-qubit
/// gates on qubits `0..L`.
pub fn build_brickwall(l: usize, n_layers: usize, theta: &[f64]) -> Result<Circuit> {
    if l < 2 {
        return Err(Error::InvalidArgument(format!("brickwall needs at least 2 qubits, got {l}")));
    }
    let expected = brickwall_param_count(l, n_layers);
    if theta.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "brickwall with L={l}, {n_layers} layers takes {expected} parameters, got {}",
            theta.len()
        )));
    }
    let mut c = Circuit::new(l, format!("compressed_L{l}_layers{n_layers}"))?;
    let mut chunks = theta.chunks_exact(3).map(|s| [s[0], s[1], s[2]]);
    for (i, j) in brickwall_bonds(l, n_layers) {
        let (a, b, nu) = (chunks.next(), chunks.next(), chunks.next());
        c.push(Gate::SingleQubitU { q: i, mu: a.expect("counted") })?;
        c.push(Gate::SingleQubitU { q: j, mu: b.expect("counted") })?;
        c.push(Gate::CanonicalTwoQubit { i, j, nu: nu.expect("counted") })?;
    }
    for q in 0..l {
        c.push(Gate::SingleQubitU { q, mu: chunks.next().expect("counted") })?;
    }
    Ok(c)
}

/// Parameters for which the brickwall equals first-order Trotter on the open
/// chain with `n_layers` steps.
pub fn trotter_equivalent_params(l: usize, n_layers: usize, t: f64) -> Vec<f64> {
    let mut theta = vec![0.0; brickwall_param_count(l, n_layers)];
    let nu = t / (4.0 * n_layers.max(1) as f64);
    for g in 0..brickwall_bonds(l, n_layers).len() {
        theta[9 * g + 6..9 * g + 9].copy_from_slice(&[nu; 3]);
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;

    #[test]
    fn layer_structure() {
        assert_eq!(bond_layers(3, Bc::Open).unwrap(), vec![vec![(0, 1)], vec![(1, 2)]]);
        assert_eq!(
            bond_layers(4, Bc::Periodic).unwrap(),
            vec![vec![(0, 1), (2, 3)], vec![(1, 2)], vec![(3, 0)]]
        );
        assert!(bond_layers(2, Bc::Periodic).is_err());
        assert!(bond_layers(1, Bc::Open).is_err());
        assert!(build_trotter1(3, Bc::Open, 1.0, 0).is_err());
    }

    #[test]
    fn trotter2_merges_half_steps() {
        let c = trotter2_logical(3, Bc::Open, 1.0, 2).unwrap();
        let dts: Vec<f64> = c
            .gates()
            .iter()
            .map(|g| match g {
                Gate::HeisenbergBond { dt, .. } => *dt,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(dts, vec![0.25, 0.5, 0.5, 0.5, 0.25]);
        let p = trotter2_logical(4, Bc::Periodic, 1.0, 1).unwrap();
        let wrap: Vec<_> = p.gates().iter().filter(|g| matches!(g, Gate::HeisenbergBond { i: 3, j: 0, .. })).collect();
        assert_eq!(wrap.len(), 1);
        assert_eq!(p.gates()[3], Gate::HeisenbergBond { i: 3, j: 0, dt: 1.0 });
    }

    #[test]
    fn periodic_swap_overhead() {
        assert_eq!(build_trotter1(4, Bc::Periodic, 1.0, 1).unwrap().swap_count(), 4);
        assert_eq!(build_trotter1(6, Bc::Periodic, 1.0, 1).unwrap().swap_count(), 8);
        for l in [3, 4, 5] {
            for n in [1, 2] {
                let o = build_trotter1(l, Bc::Open, 1.0, n).unwrap().cnot_count();
                let p = build_trotter1(l, Bc::Periodic, 1.0, n).unwrap().cnot_count();
                assert!(p > o);
                let o = build_trotter2(l, Bc::Open, 1.0, n).unwrap().cnot_count();
                let p = build_trotter2(l, Bc::Periodic, 1.0, n).unwrap().cnot_count();
                assert!(p > o);
            }
        }
    }

    #[test]
    fn brickwall_counts_and_identity() {
        assert_eq!(brickwall_param_count(3, 2), 45);
        assert_eq!(brickwall_param_count(2, 1), 15);
        assert_eq!(brickwall_param_count(4, 1), 39);
        let c = build_brickwall(3, 2, &vec![0.0; 45]).unwrap();
        assert!(c.unitary().unwrap().sub(&ComplexMatrix::identity(8)).unwrap().max_abs() < 1e-12);
        assert_eq!(c.cnot_count(), 12);
        let err = build_brickwall(3, 2, &[0.0; 44]).unwrap_err().to_string();
        assert!(err.contains("45"));
    }

    #[test]
    fn trotter_init_matches_trotter1() {
        let theta = trotter_equivalent_params(4, 3, 0.9);
        let b = build_brickwall(4, 3, &theta).unwrap().unitary().unwrap();
        let t = build_trotter1(4, Bc::Open, 0.9, 3).unwrap().unitary().unwrap();
        assert!(b.sub(&t).unwrap().max_abs() < 1e-12);
    }
}
