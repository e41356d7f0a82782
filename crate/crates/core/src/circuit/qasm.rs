//! OpenQASM 3 subset used to hand circuits to hardware.
//!
//! Exported programs contain only `u(θ, φ, λ)`, `cx` and `swap`, one
//! statement per line. [`parse`] accepts the same subset plus `h`, `s` and
//! `sdg`, which is enough to round-trip anything [`export`] writes.

use std::f64::consts::PI;
use std::fmt::Write;

use super::{Circuit, Gate};
use crate::{Error, Result};

const HEADER: &str = "OPENQASM 3.0;\ninclude \"stdgates.inc\";\n";

/// `(θ, φ, λ)` of the OpenQASM `u` gate matching `g` up to global phase.
fn u_angles(g: &Gate) -> Option<[f64; 3]> {
    match *g {
        Gate::SingleQubitU { mu, .. } => Some([2.0 * mu[0], PI - mu[2] - mu[1], mu[2] + PI - mu[1]]),
        Gate::H { .. } => Some([PI / 2.0, 0.0, PI]),
        Gate::S { .. } => Some([0.0, 0.0, PI / 2.0]),
        Gate::Sdg { .. } => Some([0.0, 0.0, -PI / 2.0]),
        _ => None,
    }
}

/// Serializes a decomposed circuit.
pub fn export(c: &Circuit) -> Result<String> {
    let mut out = String::from(HEADER);
    writeln!(out, "qubit[{}] q;", c.num_qubits()).expect("string write");
    for g in c.gates() {
        match *g {
            Gate::CX { control, target } => writeln!(out, "cx q[{control}], q[{target}];"),
            Gate::SWAP { i, j } => writeln!(out, "swap q[{i}], q[{j}];"),
            _ => match u_angles(g) {
                Some([t, p, l]) => writeln!(out, "u({t:?}, {p:?}, {l:?}) q[{}];", g.qubits()[0]),
                None => return Err(Error::UnsupportedGate { gate: g.to_string(), context: "QASM export" }),
            },
        }
        .expect("string write");
    }
    Ok(out)
}

fn parse_qubit(tok: &str, line: usize, num_qubits: usize) -> Result<usize> {
    let err = |m: String| Error::Parse { line, message: m };
    let inner = tok
        .trim()
        .strip_prefix("q[")
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| err(format!("expected q[k], got `{tok}`")))?;
    let q: usize = inner.trim().parse().map_err(|_| err(format!("bad qubit index `{inner}`")))?;
    if q >= num_qubits {
        return Err(err(format!("qubit {q} outside register of {num_qubits}")));
    }
    Ok(q)
}

/// Parses the subset written by [`export`].
pub fn parse(text: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stmt = raw.split("//").next().unwrap_or("").trim();
        if stmt.is_empty() || stmt.starts_with("OPENQASM") || stmt.starts_with("include") {
            continue;
        }
        let err = |m: String| Error::Parse { line, message: m };
        let stmt = stmt.strip_suffix(';').ok_or_else(|| err("missing `;`".into()))?.trim();
        if let Some(rest) = stmt.strip_prefix("qubit[") {
            let n: usize = rest
                .split(']')
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| err(format!("bad register declaration `{stmt}`")))?;
            circuit = Some(Circuit::new(n, "qasm")?);
            continue;
        }
        let c = circuit.as_mut().ok_or_else(|| err("gate before qubit declaration".into()))?;
        let n = c.num_qubits();
        let (head, args) = match stmt.find(')') {
            Some(p) if stmt.starts_with("u(") => (&stmt[..=p], stmt[p + 1..].trim()),
            _ => stmt.split_once(char::is_whitespace).ok_or_else(|| err(format!("bad statement `{stmt}`")))?,
        };
        let operands: Vec<&str> = args.split(',').collect();
        let want = |k: usize| {
            if operands.len() == k {
                Ok(())
            } else {
                Err(err(format!("`{head}` takes {k} operand(s)")))
            }
        };
        let gate = match head.trim() {
            "cx" => {
                want(2)?;
                Gate::CX { control: parse_qubit(operands[0], line, n)?, target: parse_qubit(operands[1], line, n)? }
            }
            "swap" => {
                want(2)?;
                Gate::SWAP { i: parse_qubit(operands[0], line, n)?, j: parse_qubit(operands[1], line, n)? }
            }
            "h" => {
                want(1)?;
                Gate::H { q: parse_qubit(operands[0], line, n)? }
            }
            "s" => {
                want(1)?;
                Gate::S { q: parse_qubit(operands[0], line, n)? }
            }
            "sdg" => {
                want(1)?;
                Gate::Sdg { q: parse_qubit(operands[0], line, n)? }
            }
            h if h.starts_with("u(") => {
                want(1)?;
                let angles: Vec<f64> = h[2..h.len() - 1]
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(format!("bad angle in `{h}`: {e}")))?;
                if angles.len() != 3 {
                    return Err(err(format!("u takes 3 angles, got {}", angles.len())));
                }
                let (t, p, l) = (angles[0], angles[1], angles[2]);
                Gate::SingleQubitU {
                    q: parse_qubit(operands[0], line, n)?,
                    mu: [t / 2.0, PI - (p + l) / 2.0, (l - p) / 2.0],
                }
            }
            other => return Err(err(format!("unsupported gate `{other}`"))),
        };
        c.push(gate).map_err(|e| err(e.to_string()))?;
    }
    circuit.ok_or(Error::Parse { line: 0, message: "no qubit declaration".into() })
}
