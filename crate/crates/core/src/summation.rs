//! Order-independent summation by binary-exponent binning.
//!
//! Every finite double is an integer multiple of a power of two fixed by its
//! exponent field. Summands are split by sign and their integer significands
//! are added exactly into one bucket per exponent, so the accumulated state
//! does not depend on insertion order and two accumulators merge by integer
//! addition. Draining cancels the signed streams inside each bucket and then
//! adds the buckets in ascending magnitude.

use crate::error::{Error, Result};

/// Exact per-exponent accumulator for doubles.
#[derive(Debug, Clone, Default)]
pub struct BinnedAccumulator {
    offset: usize,
    pos: Vec<u128>,
    neg: Vec<u128>,
    count: u64,
    poisoned: bool,
}

const MANTISSA_BITS: u32 = 52;

#[inline]
fn split(v: f64) -> (usize, u128) {
    let bits = v.to_bits();
    let exp = ((bits >> MANTISSA_BITS) & 0x7ff) as usize;
    let frac = bits & ((1u64 << MANTISSA_BITS) - 1);
    let mant = if exp == 0 { frac } else { frac | (1u64 << MANTISSA_BITS) };
    (exp, mant as u128)
}

/// `x · 2^k` without spurious overflow or underflow of the scale factor.
fn ldexp(mut x: f64, mut k: i32) -> f64 {
    while k > 1000 {
        x *= f64::from_bits(((1023 + 1000) as u64) << MANTISSA_BITS);
        k -= 1000;
    }
    while k < -1000 {
        x *= f64::from_bits(((1023 - 1000) as u64) << MANTISSA_BITS);
        k += 1000;
    }
    x * f64::from_bits(((1023 + k) as u64) << MANTISSA_BITS)
}

impl BinnedAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of values added so far, including merged ones.
    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        self.count += 1;
        if !v.is_finite() {
            self.poisoned = true;
            return;
        }
        if v == 0.0 {
            return;
        }
        let (exp, mant) = split(v);
        let idx = self.slot(exp);
        if v > 0.0 {
            self.pos[idx] += mant;
        } else {
            self.neg[idx] += mant;
        }
    }

    #[inline]
    fn slot(&mut self, exp: usize) -> usize {
        if self.pos.is_empty() {
            self.offset = exp;
            self.pos.push(0);
            self.neg.push(0);
            return 0;
        }
        if exp < self.offset {
            let grow = self.offset - exp;
            self.pos.splice(0..0, std::iter::repeat_n(0, grow));
            self.neg.splice(0..0, std::iter::repeat_n(0, grow));
            self.offset = exp;
            return 0;
        }
        let idx = exp - self.offset;
        if idx >= self.pos.len() {
            self.pos.resize(idx + 1, 0);
            self.neg.resize(idx + 1, 0);
        }
        idx
    }

    /// Adds the contents of another accumulator; exact and commutative.
    pub fn merge(&mut self, other: &BinnedAccumulator) {
        self.count += other.count;
        self.poisoned |= other.poisoned;
        for (k, (&p, &n)) in other.pos.iter().zip(&other.neg).enumerate() {
            if p == 0 && n == 0 {
                continue;
            }
            let idx = self.slot(other.offset + k);
            self.pos[idx] += p;
            self.neg[idx] += n;
        }
    }

    pub fn reset(&mut self) {
        self.pos.clear();
        self.neg.clear();
        self.count = 0;
        self.poisoned = false;
    }

    /// Rounded value of the exact accumulated sum.
    pub fn finish(&self) -> Result<f64> {
        if self.poisoned {
            return Err(Error::NonFinite("summand is NaN or infinite".into()));
        }
        let mut total = 0.0;
        for (k, (&p, &n)) in self.pos.iter().zip(&self.neg).enumerate() {
            let diff = p as i128 - n as i128;
            if diff == 0 {
                continue;
            }
            let exp = (self.offset + k).max(1) as i32;
            total += ldexp(diff as f64, exp - 1075);
        }
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::NonFinite("sum overflows".into()))
        }
    }
}

impl Extend<f64> for BinnedAccumulator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Sum whose value depends only on the multiset of inputs.
pub fn binned_sum<I: IntoIterator<Item = f64>>(values: I) -> Result<f64> {
    let mut acc = BinnedAccumulator::new();
    acc.extend(values);
    acc.finish()
}
