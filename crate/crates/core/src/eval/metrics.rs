//! Confusion-matrix metrics, computed exactly as fractions.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::types::GuidanceLabel;

/// Rows are true labels, columns predictions, both in [`GuidanceLabel::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion(pub [[u64; 6]; 6]);

impl Confusion {
    pub fn record(&mut self, truth: GuidanceLabel, predicted: GuidanceLabel) {
        self.0[truth.index()][predicted.index()] += 1;
    }

    pub fn get(&self, truth: GuidanceLabel, predicted: GuidanceLabel) -> u64 {
        self.0[truth.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn row_sum(&self, truth: GuidanceLabel) -> u64 {
        self.0[truth.index()].iter().sum()
    }

    pub fn col_sum(&self, predicted: GuidanceLabel) -> u64 {
        self.0.iter().map(|r| r[predicted.index()]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..6).map(|i| self.0[i][i]).sum()
    }

    pub fn max_cell(&self) -> u64 {
        self.0.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Non-negative fraction in lowest terms; `0/0` is normalized to `0/1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio64 {
    num: u128,
    den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio64 {
    pub const ZERO: Ratio64 = Ratio64 { num: 0, den: 1 };
    pub const ONE: Ratio64 = Ratio64 { num: 1, den: 1 };

    /// `num/den`, or zero when `den == 0`.
    pub fn new(num: u128, den: u128) -> Self {
        if den == 0 || num == 0 {
            return Ratio64::ZERO;
        }
        let g = gcd(num, den);
        Ratio64 { num: num / g, den: den / g }
    }

    pub fn numer(&self) -> u128 {
        self.num
    }

    pub fn denom(&self) -> u128 {
        self.den
    }

    pub fn div_int(self, k: u128) -> Self {
        Ratio64::new(self.num, self.den * k)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Add for Ratio64 {
    type Output = Ratio64;

    fn add(self, o: Ratio64) -> Ratio64 {
        let g = gcd(self.den, o.den);
        let den = self.den / g * o.den;
        Ratio64::new(self.num * (den / self.den) + o.num * (den / o.den), den)
    }
}

impl fmt::Display for Ratio64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScores {
    pub precision: Ratio64,
    pub recall: Ratio64,
    pub f1: Ratio64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    /// Indexed like [`GuidanceLabel::ALL`].
    pub per_class: [ClassScores; 6],
    pub macro_f1: Ratio64,
    pub accuracy: Ratio64,
    pub acc_f: Ratio64,
}

/// Per-class scores are zero where undefined. `acc_f` is accuracy restricted to
/// rows whose true label is a direction (predictions may fall anywhere).
pub fn scores(c: &Confusion) -> Scores {
    let per_class = GuidanceLabel::ALL.map(|l| {
        let tp = c.get(l, l) as u128;
        let (row, col) = (c.row_sum(l) as u128, c.col_sum(l) as u128);
        ClassScores { precision: Ratio64::new(tp, col), recall: Ratio64::new(tp, row), f1: Ratio64::new(2 * tp, row + col) }
    });
    let macro_f1 = per_class.iter().fold(Ratio64::ZERO, |acc, s| acc + s.f1).div_int(6);
    let dirs: Vec<GuidanceLabel> = GuidanceLabel::ALL.into_iter().filter(|l| l.is_directional()).collect();
    let dir_hits: u64 = dirs.iter().map(|&l| c.get(l, l)).sum();
    let dir_rows: u64 = dirs.iter().map(|&l| c.row_sum(l)).sum();
    Scores {
        per_class,
        macro_f1,
        accuracy: Ratio64::new(c.trace() as u128, c.total() as u128),
        acc_f: Ratio64::new(dir_hits as u128, dir_rows as u128),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use GuidanceLabel::*;

    #[test]
    fn ratio_arithmetic() {
        assert_eq!(Ratio64::new(4, 6), Ratio64::new(2, 3));
        assert_eq!(Ratio64::new(1, 0), Ratio64::ZERO);
        assert_eq!(Ratio64::new(1, 3) + Ratio64::new(1, 6), Ratio64::new(1, 2));
        assert_eq!(Ratio64::new(4, 1).div_int(6).to_string(), "2/3");
    }

    #[test]
    fn left_right_swap() {
        let mut c = Confusion::default();
        for l in GuidanceLabel::ALL {
            let p = match l {
                Left => Right,
                Right => Left,
                o => o,
            };
            c.record(l, p);
        }
        let s = scores(&c);
        assert_eq!(s.accuracy, Ratio64::new(4, 6));
        assert_eq!(s.macro_f1, Ratio64::new(4, 6));
        assert_eq!(s.acc_f, Ratio64::new(1, 2));
        assert_eq!(s.per_class[Left.index()].f1, Ratio64::ZERO);
        assert_eq!(s.per_class[Up.index()].f1, Ratio64::ONE);
    }

    #[test]
    fn empty_matrix_is_all_zero() {
        let s = scores(&Confusion::default());
        assert_eq!(s.accuracy, Ratio64::ZERO);
        assert_eq!(s.macro_f1, Ratio64::ZERO);
        assert_eq!(s.acc_f, Ratio64::ZERO);
    }

    #[test]
    fn acc_f_ignores_non_directional_rows() {
        let mut c = Confusion::default();
        c.record(Left, Left);
        c.record(Left, Unchanged);
        c.record(Unchanged, Left);
        c.record(None, None);
        assert_eq!(scores(&c).acc_f, Ratio64::new(1, 2));
        assert_eq!(scores(&c).accuracy, Ratio64::new(2, 4));
    }
}
