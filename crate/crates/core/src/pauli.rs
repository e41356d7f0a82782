//! Multi-qubit Pauli strings in symplectic form.
//!
//! A string on `L` qubits is stored as a pair of bit masks `(x, z)`. Bit
//! `L - 1 - q` of each mask belongs to qubit `q`, so qubit 0 is the most
//! significant bit, matching the computational-basis ordering used by the
//! dense matrices in [`crate::linalg`] and [`crate::circuit`].
//!
//! Strings are always the Hermitian representatives `I, X, Y, Z` per qubit;
//! products carry their phase separately as a [`Phase`] so that the algebra
//! stays exact.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{c64, ComplexMatrix};
use crate::{Error, Result};

/// Largest register representable by a [`PauliString`].
pub const MAX_QUBITS: usize = 16;

/// Largest register for which [`PauliString::to_matrix`] builds a dense matrix.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Power of `i`: one of `+1, +i, -1, -i`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(e: u32) -> Phase {
        Phase((e % 4) as u8)
    }

    /// Exponent `k` such that the phase equals `i^k`.
    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn conj(self) -> Phase {
        Phase((4 - self.0) % 4)
    }

    pub fn to_complex(self) -> c64 {
        match self.0 {
            0 => c64::new(1.0, 0.0),
            1 => c64::new(0.0, 1.0),
            2 => c64::new(-1.0, 0.0),
            _ => c64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }
}

impl Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Single-qubit Pauli letter. The discriminant is the digit used in the
/// mixed-radix string index.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' | 'i' => Some(Letter::I),
            'X' | 'x' => Some(Letter::X),
            'Y' | 'y' => Some(Letter::Y),
            'Z' | 'z' => Some(Letter::Z),
            _ => None,
        }
    }
}

/// Hermitian Pauli string on `num_qubits` qubits.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: u32,
    z: u32,
    num_qubits: u8,
}

impl PauliString {
    pub fn identity(num_qubits: usize) -> Result<PauliString> {
        check_qubits(num_qubits)?;
        Ok(PauliString { x: 0, z: 0, num_qubits: num_qubits as u8 })
    }

    /// Builds a string from raw masks in basis-bit order (bit `L-1-q` is qubit `q`).
    pub fn from_masks(num_qubits: usize, x: u32, z: u32) -> Result<PauliString> {
        check_qubits(num_qubits)?;
        let full = mask(num_qubits);
        if x & !full != 0 || z & !full != 0 {
            return Err(Error::InvalidArgument(format!(
                "masks {x:#b}/{z:#b} exceed {num_qubits} qubits"
            )));
        }
        Ok(PauliString { x, z, num_qubits: num_qubits as u8 })
    }

    /// Inverse of [`PauliString::index`].
    pub fn from_index(num_qubits: usize, index: usize) -> Result<PauliString> {
        check_qubits(num_qubits)?;
        if index >= 1usize << (2 * num_qubits) {
            return Err(Error::InvalidArgument(format!(
                "Pauli index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut p = PauliString { x: 0, z: 0, num_qubits: num_qubits as u8 };
        for q in 0..num_qubits {
            let digit = (index >> (2 * (num_qubits - 1 - q))) & 3;
            p.set_letter(q, Letter::ALL[digit]);
        }
        Ok(p)
    }

    pub fn from_letters(letters: &[Letter]) -> Result<PauliString> {
        let mut p = PauliString::identity(letters.len())?;
        for (q, &l) in letters.iter().enumerate() {
            p.set_letter(q, l);
        }
        Ok(p)
    }

    /// Single non-identity letter on qubit `q`.
    pub fn single(num_qubits: usize, q: usize, letter: Letter) -> Result<PauliString> {
        let mut p = PauliString::identity(num_qubits)?;
        if q >= num_qubits {
            return Err(Error::InvalidArgument(format!("qubit {q} out of range")));
        }
        p.set_letter(q, letter);
        Ok(p)
    }

    /// All `4^L` strings in index order.
    pub fn all(num_qubits: usize) -> impl Iterator<Item = PauliString> {
        let n = 1usize << (2 * num_qubits.min(MAX_QUBITS));
        (0..n).map(move |i| PauliString::from_index(num_qubits, i).expect("index in range"))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits as usize
    }

    pub fn x_bits(&self) -> u32 {
        self.x
    }

    pub fn z_bits(&self) -> u32 {
        self.z
    }

    fn bit(&self, q: usize) -> u32 {
        1 << (self.num_qubits() - 1 - q)
    }

    pub fn letter(&self, q: usize) -> Letter {
        let b = self.bit(q);
        Letter::from_bits(self.x & b != 0, self.z & b != 0)
    }

    pub fn set_letter(&mut self, q: usize, letter: Letter) {
        let b = self.bit(q);
        let (x, z) = letter.bits();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.num_qubits()).map(|q| self.letter(q)).collect()
    }

    /// Position in the mixed-radix `(I, X, Y, Z)` ordering, qubit 0 most significant.
    pub fn index(&self) -> usize {
        (0..self.num_qubits()).fold(0, |acc, q| 4 * acc + self.letter(q) as usize)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Support mask in basis-bit order.
    pub fn support(&self) -> u32 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::LengthMismatch {
                left: self.num_qubits(),
                right: other.num_qubits(),
            });
        }
        Ok(())
    }

    /// Exact product `self · other = phase · result`.
    pub fn mul(&self, other: &PauliString) -> Result<(Phase, PauliString)> {
        self.check_len(other)?;
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &PauliString) -> (Phase, PauliString) {
        // With P = i^{|x&z|} X^x Z^z, moving Z^{z1} past X^{x2} costs (-1)^{|z1&x2|}.
        let result = PauliString {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            num_qubits: self.num_qubits,
        };
        let e = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones()
            + 4 * MAX_QUBITS as u32
            - result.y_count();
        (Phase::from_exponent(e), result)
    }

    /// Returns `(phase, k)` with `m · l · n = phase · k`.
    pub fn triple_product(
        m: &PauliString,
        l: &PauliString,
        n: &PauliString,
    ) -> Result<(Phase, PauliString)> {
        m.check_len(l)?;
        m.check_len(n)?;
        let (p1, ml) = m.mul_unchecked(l);
        let (p2, k) = ml.mul_unchecked(n);
        Ok((p1 * p2, k))
    }

    /// `+1` if the strings commute, `-1` otherwise.
    pub fn commutation_sign(a: &PauliString, b: &PauliString) -> Result<i8> {
        a.check_len(b)?;
        Ok(if a.commutes_unchecked(b) { 1 } else { -1 })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        self.num_qubits == other.num_qubits && self.commutes_unchecked(other)
    }

    fn commutes_unchecked(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Action on a computational basis state: `P |b> = amplitude |b'>`.
    pub fn apply_to_basis(&self, b: usize) -> (usize, c64) {
        let b32 = b as u32;
        let sign = if (b32 & self.z).count_ones() % 2 == 0 { 0 } else { 2 };
        let phase = Phase::from_exponent(self.y_count() + sign);
        ((b32 ^ self.x) as usize, phase.to_complex())
    }

    /// Dense `2^L × 2^L` realization.
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.num_qubits() > MAX_DENSE_QUBITS {
            return Err(Error::Overflow(format!(
                "dense Pauli matrix requested for {} qubits (limit {MAX_DENSE_QUBITS})",
                self.num_qubits()
            )));
        }
        let dim = 1usize << self.num_qubits();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let (row, amp) = self.apply_to_basis(col);
            m[(row, col)] = amp;
        }
        Ok(m)
    }

    pub fn label(&self) -> String {
        self.letters().into_iter().map(Letter::as_char).collect()
    }
}

fn mask(num_qubits: usize) -> u32 {
    if num_qubits >= 32 {
        u32::MAX
    } else {
        (1u32 << num_qubits) - 1
    }
}

fn check_qubits(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "Pauli strings need 1..={MAX_QUBITS} qubits, got {num_qubits}"
        )));
    }
    Ok(())
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<PauliString> {
        let letters = s
            .trim()
            .chars()
            .map(|c| {
                Letter::from_char(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("bad Pauli letter `{c}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::from_letters(&letters)
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Commutation sign matrix `s[m][a]` over all `4^L` strings, in index order.
pub fn sign_matrix(num_qubits: usize) -> Result<Vec<Vec<i8>>> {
    check_qubits(num_qubits)?;
    let all: Vec<_> = PauliString::all(num_qubits).collect();
    Ok(all
        .iter()
        .map(|m| all.iter().map(|a| if m.commutes_unchecked(a) { 1 } else { -1 }).collect())
        .collect())
}
