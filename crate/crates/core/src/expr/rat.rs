//! Exact rational coefficients with a machine-word fast path.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// An exact rational number.
///
/// Values that fit in `i64 / i64` are kept inline; larger values spill to a
/// boxed [`BigRational`]. The representation is canonical: a value that fits
/// inline is never stored big, so derived equality is value equality.
#[derive(Clone)]
pub enum Rat {
    Small(i64, i64),
    Big(Box<BigRational>),
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rat {
    pub const ZERO: Rat = Rat::Small(0, 1);
    pub const ONE: Rat = Rat::Small(1, 1);

    pub fn int(n: i64) -> Rat {
        Rat::Small(n, 1)
    }

    /// `n / d`, panicking on a zero denominator.
    pub fn new(n: i64, d: i64) -> Rat {
        assert!(d != 0, "zero denominator");
        Rat::from_i128(n as i128, d as i128)
    }

    fn from_i128(n: i128, d: i128) -> Rat {
        let (mut n, mut d) = if d < 0 { (-n, -d) } else { (n, d) };
        let g = gcd_i128(n, d);
        if g > 1 {
            n /= g;
            d /= g;
        }
        if n == 0 {
            return Rat::ZERO;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => Rat::Small(n, d),
            _ => Rat::Big(Box::new(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))),
        }
    }

    pub fn from_big(r: BigRational) -> Rat {
        if let (Some(n), Some(d)) = (r.numer().to_i64(), r.denom().to_i64()) {
            return Rat::Small(n, d);
        }
        Rat::Big(Box::new(r))
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Rat::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Rat::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Rat::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Rat::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Rat::Small(_, d) => *d == 1,
            Rat::Big(b) => b.is_integer(),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Rat::Small(n, _) => n.signum() as i32,
            Rat::Big(b) => {
                if b.is_negative() {
                    -1
                } else {
                    1
                }
            }
        }
    }

    pub fn abs(&self) -> Rat {
        if self.signum() < 0 {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Rat {
        match self {
            Rat::Small(n, d) => {
                assert!(*n != 0, "reciprocal of zero");
                Rat::from_i128(*d as i128, *n as i128)
            }
            Rat::Big(b) => Rat::from_big(b.recip()),
        }
    }

    pub fn numer(&self) -> BigInt {
        match self {
            Rat::Small(n, _) => BigInt::from(*n),
            Rat::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match self {
            Rat::Small(_, d) => BigInt::from(*d),
            Rat::Big(b) => b.denom().clone(),
        }
    }

    /// Integer power (negative exponents invert).
    pub fn pow(&self, e: i32) -> Rat {
        let mut base = if e < 0 { self.recip() } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = Rat::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        acc
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Rat::Small(n, d) => *n as f64 / *d as f64,
            Rat::Big(b) => {
                let n = b.numer().to_f64().unwrap_or(f64::NAN);
                let d = b.denom().to_f64().unwrap_or(f64::NAN);
                if n.is_finite() && d.is_finite() {
                    n / d
                } else {
                    let shift = b.numer().bits().max(b.denom().bits()) as i64 - 900;
                    let (n, d) = if shift > 0 {
                        (b.numer() >> shift as usize, b.denom() >> shift as usize)
                    } else {
                        (b.numer().clone(), b.denom().clone())
                    };
                    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
                }
            }
        }
    }

    /// Exact square root when the value is a square of a rational.
    pub fn sqrt_exact(&self) -> Option<Rat> {
        if self.signum() < 0 {
            return None;
        }
        let n = self.numer();
        let d = self.denom();
        let rn = n.sqrt();
        let rd = d.sqrt();
        if &rn * &rn == n && &rd * &rd == d {
            Some(Rat::from_big(BigRational::new(rn, rd)))
        } else {
            None
        }
    }

    /// Least common multiple of denominators and gcd of numerators of a list,
    /// returned as the rational `gcd(num) / lcm(den)`.
    pub fn content<'a, I: IntoIterator<Item = &'a Rat>>(it: I) -> Rat {
        let mut g = BigInt::zero();
        let mut l = BigInt::one();
        for r in it {
            g = g.gcd(&r.numer());
            l = l.lcm(&r.denom());
        }
        if g.is_zero() {
            return Rat::ONE;
        }
        Rat::from_big(BigRational::new(g, l))
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::int(n)
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Rat) -> bool {
        match (self, other) {
            (Rat::Small(a, b), Rat::Small(c, d)) => a == c && b == d,
            (Rat::Big(a), Rat::Big(b)) => a == b,
            _ => false,
        }
    }
}
impl Eq for Rat {}

impl Hash for Rat {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Rat::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Rat::Big(b) => {
                1u8.hash(state);
                b.hash(state);
            }
        }
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        match (self, other) {
            (Rat::Small(a, b), Rat::Small(c, d)) => {
                ((*a as i128) * (*d as i128)).cmp(&((*c as i128) * (*b as i128)))
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl<'a> Add<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn add(self, rhs: &Rat) -> Rat {
        match (self, rhs) {
            (Rat::Small(a, b), Rat::Small(c, d)) => {
                if b == d {
                    Rat::from_i128(*a as i128 + *c as i128, *b as i128)
                } else {
                    let n = (*a as i128) * (*d as i128) + (*c as i128) * (*b as i128);
                    let den = (*b as i128) * (*d as i128);
                    Rat::from_i128(n, den)
                }
            }
            _ => Rat::from_big(self.to_big() + rhs.to_big()),
        }
    }
}

impl<'a> Sub<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn sub(self, rhs: &Rat) -> Rat {
        self + &(-rhs.clone())
    }
}

impl<'a> Mul<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn mul(self, rhs: &Rat) -> Rat {
        match (self, rhs) {
            (Rat::Small(a, b), Rat::Small(c, d)) => {
                if *b == 1 && *d == 1 {
                    let p = (*a as i128) * (*c as i128);
                    return match i64::try_from(p) {
                        Ok(p) => Rat::Small(p, 1),
                        Err(_) => Rat::from_i128(p, 1),
                    };
                }
                Rat::from_i128((*a as i128) * (*c as i128), (*b as i128) * (*d as i128))
            }
            _ => Rat::from_big(self.to_big() * rhs.to_big()),
        }
    }
}

impl<'a> Div<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn div(self, rhs: &Rat) -> Rat {
        self * &rhs.recip()
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match self {
            Rat::Small(n, d) => match n.checked_neg() {
                Some(m) => Rat::Small(m, d),
                None => Rat::from_big(-BigRational::new_raw(BigInt::from(n), BigInt::from(d))),
            },
            Rat::Big(b) => Rat::from_big(-*b),
        }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr<Rat> for Rat {
            type Output = Rat;
            fn $m(self, rhs: Rat) -> Rat {
                (&self).$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rat::Small(n, 1) => write!(f, "{n}"),
            Rat::Small(n, d) => write!(f, "{n}/{d}"),
            Rat::Big(b) => {
                if b.is_integer() {
                    write!(f, "{}", b.numer())
                } else {
                    write!(f, "{}/{}", b.numer(), b.denom())
                }
            }
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_arithmetic_reduces() {
        let a = Rat::new(1, 6);
        let b = Rat::new(1, 3);
        assert_eq!(&a + &b, Rat::new(1, 2));
        assert_eq!(&a * &b, Rat::new(1, 18));
        assert_eq!(&a / &b, Rat::new(1, 2));
        assert_eq!(&a - &a, Rat::ZERO);
    }

    #[test]
    fn overflow_spills_and_returns() {
        let big = Rat::int(i64::MAX);
        let sq = &big * &big;
        assert!(matches!(sq, Rat::Big(_)));
        let back = &sq / &big;
        assert_eq!(back, big);
        assert!(matches!(back, Rat::Small(..)));
    }

    #[test]
    fn exact_sqrt() {
        assert_eq!(Rat::new(9, 4).sqrt_exact(), Some(Rat::new(3, 2)));
        assert_eq!(Rat::int(2).sqrt_exact(), None);
    }

    #[test]
    fn content_of_list() {
        let v = [Rat::new(2, 3), Rat::new(4, 5)];
        assert_eq!(Rat::content(v.iter()), Rat::new(2, 15));
    }
}
