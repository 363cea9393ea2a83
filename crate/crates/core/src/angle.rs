//! Exact angles, stored as a reduced rational multiple of pi in `[0, 2)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Angle {
    num: i64,
    den: i64,
}

impl Angle {
    pub const ZERO: Angle = Angle { num: 0, den: 1 };
    pub const PI: Angle = Angle { num: 1, den: 1 };
    pub const HALF_PI: Angle = Angle { num: 1, den: 2 };
    pub const QUARTER_PI: Angle = Angle { num: 1, den: 4 };

    /// `num/den * pi`, reduced modulo `2 pi`.
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidArgument("angle denominator is zero".into()));
        }
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let g = num.gcd(&den).max(1);
        let (num, den) = (num / g, den / g);
        Ok(Angle {
            num: num.rem_euclid(2 * den),
            den,
        })
    }

    /// `k * pi / 4`, the eight-angle alphabet used throughout.
    pub fn eighth(k: i64) -> Self {
        Self::new(k, 4).expect("nonzero denominator")
    }

    /// `k * pi / 2`
    pub fn quarter(k: i64) -> Self {
        Self::new(k, 2).expect("nonzero denominator")
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn radians(&self) -> f64 {
        std::f64::consts::PI * self.num as f64 / self.den as f64
    }

    /// Index `k` with `self = k pi / 4`, if the angle is on that grid.
    pub fn eighth_index(&self) -> Option<usize> {
        (4 % self.den == 0).then(|| (self.num * (4 / self.den)) as usize)
    }

    pub fn times(&self, k: i64) -> Self {
        Self::new(self.num * k, self.den).expect("nonzero denominator")
    }

    /// `(-1)^bit * self`
    pub fn signed(&self, bit: u8) -> Self {
        if bit & 1 == 1 {
            -*self
        } else {
            *self
        }
    }

    /// `self + bit * pi`
    pub fn plus_pi(&self, bit: u8) -> Self {
        if bit & 1 == 1 {
            *self + Angle::PI
        } else {
            *self
        }
    }

    /// Serialized form used in reports and transcripts, e.g. `3/4pi`.
    pub fn to_pi_string(&self) -> String {
        format!("{self}pi")
    }
}

impl Default for Angle {
    fn default() -> Self {
        Angle::ZERO
    }
}

impl Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        let l = self.den.lcm(&rhs.den);
        Angle::new(self.num * (l / self.den) + rhs.num * (l / rhs.den), l).expect("nonzero")
    }
}

impl Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        self + (-rhs)
    }
}

impl Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle::new(-self.num, self.den).expect("nonzero")
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Plain `num/den` in units of pi; `0` and integers print without a slash.
impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Accepts `3/4`, `3/4pi`, `1`, `1pi` and `pi` (all in units of pi).
impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse angle {s:?}"));
        let t = s.trim();
        let t = t.strip_suffix("pi").unwrap_or(t).trim_end_matches(['*', '·']).trim();
        if t.is_empty() {
            return if s.trim() == "pi" { Ok(Angle::PI) } else { Err(bad()) };
        }
        match t.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| bad())?;
                let d: i64 = d.trim().parse().map_err(|_| bad())?;
                Angle::new(n, d).map_err(|_| bad())
            }
            None => Angle::new(t.parse().map_err(|_| bad())?, 1),
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_pi_string())
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The eight angles `k pi / 4`, `k = 0..8`.
pub fn eight_angles() -> Vec<Angle> {
    (0..8).map(Angle::eighth).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_modulo_two_pi() {
        assert_eq!(Angle::new(9, 4).unwrap(), Angle::eighth(1));
        assert_eq!(Angle::new(-1, 4).unwrap(), Angle::eighth(7));
        assert_eq!(Angle::new(4, 2).unwrap(), Angle::ZERO);
        assert_eq!(Angle::eighth(2), Angle::HALF_PI);
    }

    #[test]
    fn arithmetic() {
        assert_eq!(Angle::eighth(7) + Angle::eighth(3), Angle::eighth(2));
        assert_eq!(Angle::eighth(1) - Angle::eighth(3), Angle::eighth(6));
        assert_eq!(Angle::new(1, 3).unwrap() + Angle::new(1, 6).unwrap(), Angle::HALF_PI);
        assert_eq!(Angle::eighth(3).signed(1), Angle::eighth(5));
    }

    #[test]
    fn text_round_trip() {
        for k in 0..8 {
            let a = Angle::eighth(k);
            assert_eq!(a.to_pi_string().parse::<Angle>().unwrap(), a);
            assert_eq!(a.to_string().parse::<Angle>().unwrap(), a);
        }
        assert_eq!("pi".parse::<Angle>().unwrap(), Angle::PI);
        assert!("x/4".parse::<Angle>().is_err());
        assert!("1/0".parse::<Angle>().is_err());
    }
}
