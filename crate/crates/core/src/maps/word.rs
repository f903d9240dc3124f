//! Binary-word representation of `y`, on which the doubling map is an exact shift.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits of a float in `[0, 1)` that are always exact.
const FLOAT_BITS: usize = 52;

/// `y = Σ_k b_k 2^{−k}` with `bits[0] = b_1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryWord {
    bits: Vec<u8>,
}

impl BinaryWord {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("bits", "binary digits must be 0 or 1"));
        }
        Ok(Self { bits })
    }

    /// Takes the leading 52 digits of `y` and fills the rest to `len` with
    /// fair coin flips from `rng`.
    pub fn from_f64(y: f64, len: usize, rng: &mut impl Rng) -> Result<Self> {
        let exact = len.min(FLOAT_BITS);
        let mut bits = float_digits(y, exact)?;
        bits.extend((exact..len).map(|_| u8::from(rng.random::<bool>())));
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// The doubling map: drop the leading digit.
    pub fn shifted(&self) -> Self {
        Self {
            bits: self.bits.get(1..).unwrap_or_default().to_vec(),
        }
    }

    /// `y/2 + 1/2`: prepend a 1.
    pub fn coherent(&self) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len() + 1);
        bits.push(1);
        bits.extend_from_slice(&self.bits);
        Self { bits }
    }

    /// Nearest float to the word (leading 53 digits).
    pub fn to_f64(&self) -> f64 {
        self.bits
            .iter()
            .take(FLOAT_BITS + 1)
            .enumerate()
            .map(|(k, &b)| f64::from(b) * 0.5f64.powi(k as i32 + 1))
            .sum()
    }

    /// Float values of the first `n + 1` points of the doubling orbit.
    pub fn orbit(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.bits.len() {
            return Err(Error::PrecisionExhausted {
                bit: self.bits.len() + 1,
            });
        }
        Ok((0..=n)
            .map(|i| Self { bits: self.bits[i..].to_vec() }.to_f64())
            .collect())
    }
}

fn float_digits(y: f64, n: usize) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::invalid("y0", format!("{y} outside [0, 1]")));
    }
    if n > FLOAT_BITS {
        return Err(Error::PrecisionExhausted { bit: FLOAT_BITS + 1 });
    }
    if y == 1.0 {
        return Ok(vec![1; n]);
    }
    // Scaling by a power of two is exact, so each digit is read off exactly.
    Ok((1..=n)
        .map(|k| ((y * 2f64.powi(k as i32)).floor() as u64 % 2) as u8)
        .collect())
}

/// `y0` as a float or as an explicit word.
#[derive(Clone, Debug, PartialEq)]
pub enum YInput {
    Float(f64),
    Word(BinaryWord),
}

/// The gate occupied after each of the first `n` splitters: the binary digits of `y0`.
pub fn branch_history(y0: &YInput, n: usize) -> Result<Vec<u8>> {
    match y0 {
        YInput::Float(y) => float_digits(*y, n),
        YInput::Word(w) => {
            if n > w.len() {
                return Err(Error::PrecisionExhausted { bit: w.len() + 1 });
            }
            Ok(w.bits[..n].to_vec())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{iterate_map, StepKind};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn histories() {
        assert_eq!(branch_history(&YInput::Float(0.8125), 6).unwrap(), vec![1, 1, 0, 1, 0, 0]);
        let w = BinaryWord::from_bits(vec![1, 1, 0, 1]).unwrap();
        assert_eq!(branch_history(&YInput::Word(w), 4).unwrap(), vec![1, 1, 0, 1]);
        let third = branch_history(&YInput::Float(1.0 / 3.0), 8).unwrap();
        assert_eq!(third, vec![0, 1, 0, 1, 0, 1, 0, 1]);
        assert!(matches!(
            branch_history(&YInput::Float(0.3), 60),
            Err(Error::PrecisionExhausted { bit: 53 })
        ));
    }

    #[test]
    fn history_matches_orbit_bits() {
        let orbit = iterate_map(0.22, 9, StepKind::Bernoulli).unwrap();
        assert_eq!(branch_history(&YInput::Float(0.22), 10).unwrap(), orbit.branch_bits);
    }

    #[test]
    fn long_orbits_survive_in_word_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = BinaryWord::from_f64(0.22, 256, &mut rng).unwrap();
        let float_orbit = iterate_map(0.22, 100, StepKind::Bernoulli).unwrap();
        assert_eq!(*float_orbit.ys.last().unwrap(), 0.0);
        let word_orbit = w.orbit(100).unwrap();
        assert!(word_orbit[100] > 0.0);
        for (a, b) in word_orbit.iter().zip(&float_orbit.ys).take(20) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn coherent_prepends_one() {
        let w = BinaryWord::from_bits(vec![0, 1]).unwrap();
        assert_eq!(w.coherent().to_f64(), 0.625);
    }

    proptest! {
        #[test]
        fn shift_is_exact_on_dyadics(bits in proptest::collection::vec(0u8..2, 1..50)) {
            let w = BinaryWord::from_bits(bits).unwrap();
            let y = w.to_f64();
            let expected = crate::maps::bernoulli_step(y);
            // 0.1000…₂ is the tie, sent to 0 by both forms.
            prop_assert_eq!(w.shifted().to_f64(), expected);
        }
    }
}
