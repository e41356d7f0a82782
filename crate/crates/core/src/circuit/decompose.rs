use std::f64::consts::FRAC_PI_2;

use super::{Circuit, Gate};
use crate::{Error, Result};

/// Three-CX realization of a canonical or Heisenberg gate, equal to it up
/// to a global phase.
pub fn decompose_two_qubit(g: &Gate) -> Result<Vec<Gate>> {
    let (q0, q1, [a, b, c]) = match *g {
        Gate::CanonicalTwoQubit { i, j, nu } => (i, j, nu),
        Gate::HeisenbergBond { i, j, dt } => (i, j, [dt / 4.0; 3]),
        _ => {
            return Err(Error::UnsupportedGate { gate: g.to_string(), context: "decompose_two_qubit" });
        }
    };
    Ok(vec![
        Gate::rz(q1, FRAC_PI_2),
        Gate::CX { control: q1, target: q0 },
        Gate::rz(q0, 2.0 * c + FRAC_PI_2),
        Gate::ry(q1, 2.0 * a + FRAC_PI_2),
        Gate::CX { control: q0, target: q1 },
        Gate::ry(q1, -2.0 * b - FRAC_PI_2),
        Gate::CX { control: q1, target: q0 },
        Gate::rz(q0, -FRAC_PI_2),
    ])
}

/// Lowers a circuit to single-qubit gates and CX.
///
/// Interaction gates use [`decompose_two_qubit`], SWAPs become three CX.
/// Non-adjacent gates are routed first.
pub fn decompose(c: &Circuit) -> Result<Circuit> {
    let routed = c.route_linear();
    let mut out = Circuit::new(c.num_qubits(), c.label())?;
    for g in routed.gates() {
        match *g {
            Gate::CanonicalTwoQubit { .. } | Gate::HeisenbergBond { .. } => out.extend(decompose_two_qubit(g)?)?,
            Gate::SWAP { i, j } => out.extend([
                Gate::CX { control: i, target: j },
                Gate::CX { control: j, target: i },
                Gate::CX { control: i, target: j },
            ])?,
            other => out.push(other)?,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_trotter2, phase_insensitive_overlap, Bc};
    use proptest::prelude::*;

    fn equivalent(g: Gate) -> f64 {
        let mut a = Circuit::new(2, "a").unwrap();
        a.push(g).unwrap();
        let mut b = Circuit::new(2, "b").unwrap();
        b.extend(decompose_two_qubit(&g).unwrap()).unwrap();
        assert_eq!(b.cnot_count(), 3);
        phase_insensitive_overlap(&a.unitary().unwrap(), &b.unitary().unwrap()).unwrap()
    }

    #[test]
    fn template_cases() {
        assert!((equivalent(Gate::HeisenbergBond { i: 0, j: 1, dt: 0.0 }) - 1.0).abs() < 1e-10);
        assert!((equivalent(Gate::CanonicalTwoQubit { i: 0, j: 1, nu: [FRAC_PI_2 / 2.0, 0.0, 0.0] }) - 1.0).abs() < 1e-10);
        assert!((equivalent(Gate::HeisenbergBond { i: 1, j: 0, dt: 0.7 }) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unsupported_gate() {
        assert!(matches!(decompose_two_qubit(&Gate::H { q: 0 }), Err(Error::UnsupportedGate { .. })));
    }

    #[test]
    fn whole_circuit_lowering() {
        let c = build_trotter2(4, Bc::Periodic, 1.0, 2).unwrap();
        let d = decompose(&c).unwrap();
        assert!(d.is_decomposed());
        assert!(d.gates().iter().all(|g| !matches!(g, Gate::SWAP { .. })));
        assert_eq!(d.cnot_count(), c.cnot_count());
        let f = phase_insensitive_overlap(&c.unitary().unwrap(), &d.unitary().unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn any_canonical_gate_decomposes(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
            let f = equivalent(Gate::CanonicalTwoQubit { i: 0, j: 1, nu: [a, b, c] });
            prop_assert!((f - 1.0).abs() < 1e-10);
        }
    }
}
