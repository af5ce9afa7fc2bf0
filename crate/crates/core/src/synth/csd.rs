use serde::{Deserialize, Serialize};

/// Canonical signed-digit form: digits in {-1, 0, +1}, least significant
/// first, no two adjacent digits nonzero. Among all signed-digit forms it
/// has the fewest nonzero digits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsdForm {
    pub coefficient: i64,
    pub digits: Vec<i8>,
}

impl CsdForm {
    pub fn nonzeros(&self) -> usize {
        self.digits.iter().filter(|&&d| d != 0).count()
    }

    pub fn value(&self) -> i64 {
        self.digits
            .iter()
            .enumerate()
            .map(|(i, &d)| d as i64 * (1i64 << i))
            .sum()
    }

    /// `(position, digit)` for every nonzero digit.
    pub fn terms(&self) -> impl Iterator<Item = (u32, i8)> + '_ {
        self.digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .map(|(i, &d)| (i as u32, d))
    }
}

pub fn to_csd(c: i64) -> CsdForm {
    assert!(c.unsigned_abs() < 1 << 62, "coefficient out of range");
    let mut digits = Vec::new();
    let mut rest = c;
    while rest != 0 {
        let d = if rest & 1 == 0 {
            0
        } else if rest.rem_euclid(4) == 1 {
            1
        } else {
            -1
        };
        digits.push(d as i8);
        rest = (rest - d) / 2;
    }
    CsdForm { coefficient: c, digits }
}
