//! Multi-bit arithmetic over builder nets. A [`Word`] carries its exact
//! value interval, and every operation sizes its result from the interval,
//! so nothing overflows.

use crate::netlist::{Builder, NetId};

/// Bits (LSB first) plus the closed value interval. The encoding is two's
/// complement when `lo < 0`, plain binary otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub bits: Vec<NetId>,
    pub lo: i64,
    pub hi: i64,
}

fn unsigned_bits(v: i64) -> usize {
    64 - v.leading_zeros() as usize
}

/// Minimal width holding every value of `[lo, hi]`.
pub fn width_for(lo: i64, hi: i64) -> usize {
    debug_assert!(lo <= hi);
    if lo >= 0 {
        unsigned_bits(hi).max(1)
    } else {
        1 + unsigned_bits(hi.max(0)).max(unsigned_bits(-(lo + 1)))
    }
}

impl Word {
    pub fn input(bits: Vec<NetId>) -> Word {
        let hi = (1i64 << bits.len()) - 1;
        Word { bits, lo: 0, hi }
    }

    pub fn constant(b: &mut Builder, v: i64) -> Word {
        let w = width_for(v, v);
        let bits = (0..w).map(|i| b.constant((v >> i) & 1 == 1)).collect();
        Word { bits, lo: v, hi: v }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn is_signed(&self) -> bool {
        self.lo < 0
    }

    /// Sign bit, or constant 0 for an unsigned word.
    pub fn sign(&self, b: &mut Builder) -> NetId {
        if self.is_signed() {
            *self.bits.last().unwrap()
        } else {
            b.constant(false)
        }
    }

    /// The low `w` bits of the sign- or zero-extended word.
    pub fn resized(&self, b: &mut Builder, w: usize) -> Vec<NetId> {
        let fill = self.sign(b);
        (0..w).map(|i| self.bits.get(i).copied().unwrap_or(fill)).collect()
    }

    /// Drops bits the interval does not need.
    pub fn fit(mut self) -> Word {
        let w = width_for(self.lo, self.hi);
        self.bits.truncate(w);
        self
    }

    pub fn shl(&self, b: &mut Builder, k: u32) -> Word {
        let zero = b.constant(false);
        let mut bits = vec![zero; k as usize];
        bits.extend_from_slice(&self.bits);
        Word {
            bits,
            lo: self.lo << k,
            hi: self.hi << k,
        }
    }

    /// Arithmetic shift right (floor division by `2^k`).
    pub fn shr(&self, b: &mut Builder, k: u32) -> Word {
        let (lo, hi) = (self.lo >> k, self.hi >> k);
        let bits = if (k as usize) < self.width() {
            self.bits[k as usize..].to_vec()
        } else {
            vec![self.sign(b)]
        };
        Word { bits, lo, hi }.fit()
    }
}

/// Ripple-carry `x + y`, or `x - y` when `subtract`.
pub fn add_sub(b: &mut Builder, x: &Word, y: &Word, subtract: bool) -> Word {
    let (lo, hi) = if subtract {
        (x.lo.checked_sub(y.hi), x.hi.checked_sub(y.lo))
    } else {
        (x.lo.checked_add(y.lo), x.hi.checked_add(y.hi))
    };
    let (lo, hi) = (lo.expect("range overflow"), hi.expect("range overflow"));
    let w = width_for(lo, hi);
    let xs = x.resized(b, w);
    let ys = y.resized(b, w);
    let mut carry = b.constant(subtract);
    let mut bits = Vec::with_capacity(w);
    for i in 0..w {
        let yi = if subtract { b.not(ys[i]) } else { ys[i] };
        let p = b.xor(xs[i], yi);
        bits.push(b.xor(p, carry));
        if i + 1 < w {
            carry = b.mux(p, xs[i], carry);
        }
    }
    Word { bits, lo, hi }
}

pub fn negate(b: &mut Builder, x: &Word) -> Word {
    let zero = Word::constant(b, 0);
    add_sub(b, &zero, x, true)
}

/// `max(x, 0)`: every bit gated by the inverted sign.
pub fn relu(b: &mut Builder, x: &Word) -> Word {
    if x.lo >= 0 {
        return x.clone();
    }
    if x.hi <= 0 {
        return Word::constant(b, 0);
    }
    let sign = x.sign(b);
    let keep = b.not(sign);
    let bits = x.bits[..x.width() - 1].iter().map(|&bit| b.and(bit, keep)).collect();
    Word { bits, lo: 0, hi: x.hi }.fit()
}

/// `sel ? if1 : if0`, bitwise.
pub fn select(b: &mut Builder, sel: NetId, if0: &Word, if1: &Word) -> Word {
    let (lo, hi) = (if0.lo.min(if1.lo), if0.hi.max(if1.hi));
    let w = width_for(lo, hi);
    let a = if0.resized(b, w);
    let c = if1.resized(b, w);
    let bits = a.iter().zip(&c).map(|(&a, &c)| b.mux(sel, a, c)).collect();
    Word { bits, lo, hi }
}

/// `x < y`, exact for any operand intervals.
pub fn less_than(b: &mut Builder, x: &Word, y: &Word) -> NetId {
    if x.hi < y.lo {
        return b.constant(true);
    }
    if x.lo >= y.hi {
        return b.constant(false);
    }
    let d = add_sub(b, x, y, true);
    d.sign(b)
}

/// `x >= t` for unsigned `x` and a constant `t`: the carry out of
/// `x + !t + 1`, folded against the bits of `t`.
pub fn ge_const(b: &mut Builder, x: &[NetId], t: u64) -> NetId {
    if x.len() < 64 && t >> x.len() != 0 {
        return b.constant(false);
    }
    let mut carry = b.constant(true);
    for (i, &xi) in x.iter().enumerate() {
        let not_t = b.constant((t >> i) & 1 == 0);
        let p = b.xor(xi, not_t);
        carry = b.mux(p, xi, carry);
    }
    carry
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::simulate_rows;

    fn decode(v: u64, w: usize, signed: bool) -> i64 {
        if signed && w < 64 && (v >> (w - 1)) & 1 == 1 {
            v as i64 - (1i64 << w)
        } else {
            v as i64
        }
    }

    #[test]
    fn widths() {
        assert_eq!(width_for(0, 0), 1);
        assert_eq!(width_for(0, 15), 4);
        assert_eq!(width_for(-8, 7), 4);
        assert_eq!(width_for(-9, 7), 5);
        assert_eq!(width_for(-1, 0), 1);
        assert_eq!(width_for(-15, 120), 8);
    }

    #[test]
    fn add_sub_exhaustive() {
        for subtract in [false, true] {
            let mut b = Builder::new("a");
            let x = Word::input(b.input("x", 3));
            let yi = b.input("y", 3);
            // y interpreted as signed [-4, 3]
            let y = Word {
                bits: yi,
                lo: -4,
                hi: 3,
            };
            let s = add_sub(&mut b, &x, &y, subtract);
            let (w, signed) = (s.width(), s.is_signed());
            b.output("s", s.bits);
            let n = b.finish();
            let rows: Vec<Vec<u64>> = (0..8).flat_map(|x| (0..8).map(move |y| vec![x, y])).collect();
            for (row, out) in rows.iter().zip(simulate_rows(&n, &rows).unwrap()) {
                let (xv, yv) = (row[0] as i64, decode(row[1], 3, true));
                let expect = if subtract { xv - yv } else { xv + yv };
                assert_eq!(decode(out[0], w, signed), expect);
            }
        }
    }

    #[test]
    fn relu_shr_and_less_than() {
        let mut b = Builder::new("r");
        let xi = b.input("x", 4);
        let x = Word {
            bits: xi,
            lo: -8,
            hi: 7,
        };
        let r = relu(&mut b, &x);
        let q = x.shr(&mut b, 2);
        let c = Word::constant(&mut b, -3);
        let lt = less_than(&mut b, &x, &c);
        let (qw, qs) = (q.width(), q.is_signed());
        b.output("r", r.bits);
        b.output("q", q.bits);
        b.output("lt", vec![lt]);
        let n = b.finish();
        let rows: Vec<Vec<u64>> = (0..16).map(|v| vec![v]).collect();
        for (row, out) in rows.iter().zip(simulate_rows(&n, &rows).unwrap()) {
            let v = decode(row[0], 4, true);
            assert_eq!(out[0] as i64, v.max(0));
            assert_eq!(decode(out[1], qw, qs), v >> 2);
            assert_eq!(out[2], (v < -3) as u64);
        }
    }
}
