use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{c64, ComplexMatrix};

/// A gate on the linear chain. Angles are in radians.
///
/// Two-qubit matrices are written in the basis `|a b>` where `a` is the first
/// listed qubit (control for `CX`) and is the more significant bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Gate {
    /// `[[e^{iμ2} cos μ1, e^{iμ3} sin μ1], [-e^{-iμ3} sin μ1, e^{-iμ2} cos μ1]]`.
    SingleQubitU { q: usize, mu: [f64; 3] },
    /// `exp(-i (ν1 XX + ν2 YY + ν3 ZZ))`.
    CanonicalTwoQubit { i: usize, j: usize, nu: [f64; 3] },
    /// `exp(-i dt S_i · S_j)` with `S = σ/2`.
    HeisenbergBond { i: usize, j: usize, dt: f64 },
    CX { control: usize, target: usize },
    SWAP { i: usize, j: usize },
    H { q: usize },
    S { q: usize },
    Sdg { q: usize },
}

/// Pauli factors of the canonical interaction in `(XX, YY, ZZ)` order,
/// as their diagonal in the magic (Bell) basis below.
const BELL_DIAG: [[f64; 4]; 3] = [[1.0, -1.0, 1.0, -1.0], [-1.0, 1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0]];

fn bell_basis() -> [[f64; 4]; 4] {
    // columns: Φ+, Φ-, Ψ+, Ψ-
    let h = FRAC_1_SQRT_2;
    [[h, h, 0.0, 0.0], [0.0, 0.0, h, h], [0.0, 0.0, h, -h], [h, -h, 0.0, 0.0]]
}

pub(crate) fn canonical_matrix(nu: [f64; 3]) -> ComplexMatrix {
    let b = bell_basis();
    let phases: Vec<c64> = (0..4)
        .map(|k| {
            let angle: f64 = (0..3).map(|a| nu[a] * BELL_DIAG[a][k]).sum();
            c64::from_polar(1.0, -angle)
        })
        .collect();
    let mut m = ComplexMatrix::zeros(4, 4);
    for r in 0..4 {
        for c in 0..4 {
            m[(r, c)] = (0..4).map(|k| phases[k] * b[r][k] * b[c][k]).sum();
        }
    }
    m
}

/// `∂/∂ν_a` of [`canonical_matrix`], i.e. `-i σ_a σ_a V`.
pub(crate) fn canonical_derivative(nu: [f64; 3], a: usize) -> ComplexMatrix {
    let b = bell_basis();
    let phases: Vec<c64> = (0..4)
        .map(|k| {
            let angle: f64 = (0..3).map(|x| nu[x] * BELL_DIAG[x][k]).sum();
            c64::new(0.0, -BELL_DIAG[a][k]) * c64::from_polar(1.0, -angle)
        })
        .collect();
    let mut m = ComplexMatrix::zeros(4, 4);
    for r in 0..4 {
        for c in 0..4 {
            m[(r, c)] = (0..4).map(|k| phases[k] * b[r][k] * b[c][k]).sum();
        }
    }
    m
}

pub(crate) fn single_qubit_matrix(mu: [f64; 3]) -> ComplexMatrix {
    let (s, c) = mu[0].sin_cos();
    let mut m = ComplexMatrix::zeros(2, 2);
    m[(0, 0)] = c64::from_polar(c, mu[1]);
    m[(0, 1)] = c64::from_polar(s, mu[2]);
    m[(1, 0)] = -c64::from_polar(s, -mu[2]);
    m[(1, 1)] = c64::from_polar(c, -mu[1]);
    m
}

/// `∂/∂μ_k` of [`single_qubit_matrix`].
pub(crate) fn single_qubit_derivative(mu: [f64; 3], k: usize) -> ComplexMatrix {
    let (s, c) = mu[0].sin_cos();
    let i = c64::new(0.0, 1.0);
    let mut m = ComplexMatrix::zeros(2, 2);
    match k {
        0 => {
            m[(0, 0)] = c64::from_polar(-s, mu[1]);
            m[(0, 1)] = c64::from_polar(c, mu[2]);
            m[(1, 0)] = -c64::from_polar(c, -mu[2]);
            m[(1, 1)] = c64::from_polar(-s, -mu[1]);
        }
        1 => {
            m[(0, 0)] = i * c64::from_polar(c, mu[1]);
            m[(1, 1)] = -i * c64::from_polar(c, -mu[1]);
        }
        _ => {
            m[(0, 1)] = i * c64::from_polar(s, mu[2]);
            m[(1, 0)] = i * c64::from_polar(s, -mu[2]);
        }
    }
    m
}

impl Gate {
    /// Rotation about Z, `diag(e^{-iθ/2}, e^{iθ/2})`.
    pub fn rz(q: usize, theta: f64) -> Gate {
        Gate::SingleQubitU { q, mu: [0.0, -theta / 2.0, 0.0] }
    }

    /// Rotation about Y, `[[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`.
    pub fn ry(q: usize, theta: f64) -> Gate {
        Gate::SingleQubitU { q, mu: [-theta / 2.0, 0.0, 0.0] }
    }

    /// Pauli X as a `SingleQubitU` (equal to `iX`).
    pub fn x(q: usize) -> Gate {
        Gate::SingleQubitU { q, mu: [std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::FRAC_PI_2] }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::SingleQubitU { .. } => "u",
            Gate::CanonicalTwoQubit { .. } => "canonical",
            Gate::HeisenbergBond { .. } => "heisenberg",
            Gate::CX { .. } => "cx",
            Gate::SWAP { .. } => "swap",
            Gate::H { .. } => "h",
            Gate::S { .. } => "s",
            Gate::Sdg { .. } => "sdg",
        }
    }

    /// Qubits in operand order.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::SingleQubitU { q, .. } | Gate::H { q } | Gate::S { q } | Gate::Sdg { q } => vec![q],
            Gate::CanonicalTwoQubit { i, j, .. } | Gate::HeisenbergBond { i, j, .. } | Gate::SWAP { i, j } => {
                vec![i, j]
            }
            Gate::CX { control, target } => vec![control, target],
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        self.qubits().len() == 1
    }

    /// Parametrized interaction gates that need the 3-CX template on hardware.
    pub fn is_entangling_block(&self) -> bool {
        matches!(self, Gate::CanonicalTwoQubit { .. } | Gate::HeisenbergBond { .. })
    }

    /// CNOTs this gate costs under the fixed decomposition rules.
    pub fn cnot_cost(&self) -> usize {
        match self {
            Gate::CanonicalTwoQubit { .. } | Gate::HeisenbergBond { .. } | Gate::SWAP { .. } => 3,
            Gate::CX { .. } => 1,
            _ => 0,
        }
    }

    /// Dense 2×2 or 4×4 matrix in operand order.
    pub fn matrix(&self) -> ComplexMatrix {
        let h = FRAC_1_SQRT_2;
        let r = |x: f64| c64::new(x, 0.0);
        match *self {
            Gate::SingleQubitU { mu, .. } => single_qubit_matrix(mu),
            Gate::CanonicalTwoQubit { nu, .. } => canonical_matrix(nu),
            Gate::HeisenbergBond { dt, .. } => canonical_matrix([dt / 4.0; 3]),
            Gate::CX { .. } => ComplexMatrix::from_real(
                4,
                4,
                &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
            )
            .expect("4x4"),
            Gate::SWAP { .. } => ComplexMatrix::from_real(
                4,
                4,
                &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.],
            )
            .expect("4x4"),
            Gate::H { .. } => ComplexMatrix::from_real(2, 2, &[h, h, h, -h]).expect("2x2"),
            Gate::S { .. } => ComplexMatrix::diag(&[r(1.0), c64::new(0.0, 1.0)]),
            Gate::Sdg { .. } => ComplexMatrix::diag(&[r(1.0), c64::new(0.0, -1.0)]),
        }
    }

    pub fn adjoint(&self) -> Gate {
        match *self {
            Gate::SingleQubitU { q, mu } => Gate::SingleQubitU { q, mu: [-mu[0], -mu[1], mu[2]] },
            Gate::CanonicalTwoQubit { i, j, nu } => Gate::CanonicalTwoQubit { i, j, nu: [-nu[0], -nu[1], -nu[2]] },
            Gate::HeisenbergBond { i, j, dt } => Gate::HeisenbergBond { i, j, dt: -dt },
            Gate::S { q } => Gate::Sdg { q },
            Gate::Sdg { q } => Gate::S { q },
            g => g,
        }
    }

    /// Same gate with qubit indices passed through `f`.
    pub fn remap(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::SingleQubitU { q, mu } => Gate::SingleQubitU { q: f(q), mu },
            Gate::CanonicalTwoQubit { i, j, nu } => Gate::CanonicalTwoQubit { i: f(i), j: f(j), nu },
            Gate::HeisenbergBond { i, j, dt } => Gate::HeisenbergBond { i: f(i), j: f(j), dt },
            Gate::CX { control, target } => Gate::CX { control: f(control), target: f(target) },
            Gate::SWAP { i, j } => Gate::SWAP { i: f(i), j: f(j) },
            Gate::H { q } => Gate::H { q: f(q) },
            Gate::S { q } => Gate::S { q: f(q) },
            Gate::Sdg { q } => Gate::Sdg { q: f(q) },
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.qubits().iter().map(|q| format!("q{q}")).collect();
        match self {
            Gate::SingleQubitU { mu, .. } => write!(f, "u({:.4},{:.4},{:.4}) {}", mu[0], mu[1], mu[2], qs[0]),
            Gate::CanonicalTwoQubit { nu, .. } => {
                write!(f, "canonical({:.4},{:.4},{:.4}) {}", nu[0], nu[1], nu[2], qs.join(","))
            }
            Gate::HeisenbergBond { dt, .. } => write!(f, "heisenberg({dt:.4}) {}", qs.join(",")),
            _ => write!(f, "{} {}", self.name(), qs.join(",")),
        }
    }
}
