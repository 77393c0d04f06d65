use std::fmt;

/// A fixed-width bit register of any width, bit 0 least significant.
///
/// Bits at and above `width` are always zero, so equality and ordering only
/// see the register's contents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitRegister {
    width: u32,
    limbs: Vec<u64>,
}

impl BitRegister {
    pub fn zero(width: u32) -> Self {
        Self {
            width,
            limbs: vec![0; (width as usize).div_ceil(64).max(1)],
        }
    }

    /// Low `width` bits of `value`.
    pub fn from_u64(width: u32, value: u64) -> Self {
        let mut r = Self::zero(width);
        r.limbs[0] = value;
        r.mask_top();
        r
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bit(&self, i: u32) -> bool {
        i < self.width && (self.limbs[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: u32, value: bool) {
        assert!(i < self.width, "bit {i} outside width {}", self.width);
        let limb = &mut self.limbs[(i / 64) as usize];
        if value {
            *limb |= 1 << (i % 64);
        } else {
            *limb &= !(1 << (i % 64));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    /// Value if it fits 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.limbs[1..].iter().all(|&l| l == 0) {
            Some(self.limbs[0])
        } else {
            None
        }
    }

    /// Shift toward the high end; the top bit re-enters at bit 0.
    pub fn rotate_left(&mut self) {
        if self.width == 0 {
            return;
        }
        let top = self.bit(self.width - 1);
        let mut carry = 0;
        for limb in &mut self.limbs {
            let out = *limb >> 63;
            *limb = (*limb << 1) | carry;
            carry = out;
        }
        self.mask_top();
        self.limbs[0] |= u64::from(top);
    }

    /// Shift toward the low end; bit 0 re-enters at the top.
    pub fn rotate_right(&mut self) {
        if self.width == 0 {
            return;
        }
        let low = self.limbs[0] & 1 == 1;
        let mut carry = 0;
        for limb in self.limbs.iter_mut().rev() {
            let out = *limb & 1;
            *limb = (*limb >> 1) | (carry << 63);
            carry = out;
        }
        self.set_bit(self.width - 1, low);
    }

    fn mask_top(&mut self) {
        let full = self.limbs.len() as u32 * 64;
        for i in self.width..full {
            self.limbs[(i / 64) as usize] &= !(1 << (i % 64));
        }
    }
}

impl fmt::Display for BitRegister {
    /// Binary, most significant bit first, padded to the width.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 0 {
            return f.write_str("-");
        }
        for i in (0..self.width).rev() {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitRegister {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}b{}", self.width, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rotations_on_a_small_register() {
        let mut r = BitRegister::from_u64(3, 0b110);
        r.rotate_right();
        assert_eq!(r.to_u64(), Some(0b011));
        r.rotate_right();
        assert_eq!(r.to_u64(), Some(0b101));
        r.rotate_left();
        r.rotate_left();
        assert_eq!(r.to_u64(), Some(0b110));
        assert_eq!(r.to_string(), "110");
    }

    #[test]
    fn rotation_crosses_limbs() {
        let mut r = BitRegister::zero(130);
        r.set_bit(63, true);
        r.rotate_left();
        assert!(r.bit(64) && !r.bit(63));
        r.set_bit(129, true);
        r.rotate_left();
        assert!(r.bit(0) && r.bit(65));
        r.rotate_right();
        r.rotate_right();
        assert!(r.bit(63) && r.bit(128) && !r.bit(0));
    }

    proptest! {
        #[test]
        fn rotate_matches_u64_reference(width in 1u32..=63, value: u64, turns in 0u32..70) {
            let mask = (1u64 << width) - 1;
            let mut r = BitRegister::from_u64(width, value);
            let mut v = value & mask;
            for _ in 0..turns {
                r.rotate_left();
                v = ((v << 1) | (v >> (width - 1))) & mask;
            }
            prop_assert_eq!(r.to_u64(), Some(v));
            for _ in 0..turns {
                r.rotate_right();
            }
            prop_assert_eq!(r.to_u64(), Some(value & mask));
        }

        #[test]
        fn full_turn_is_identity(width in 1u32..200, seed: u64) {
            let mut r = BitRegister::zero(width);
            for i in 0..width {
                r.set_bit(i, (seed.rotate_left(i) ^ u64::from(i)) & 1 == 1);
            }
            let orig = r.clone();
            for _ in 0..width {
                r.rotate_left();
            }
            prop_assert_eq!(r, orig);
        }
    }
}
