//! Binary fixed-point arithmetic on big integers (`PREC` fractional bits)
//! with series-evaluated exp, sin, cos and Machin's pi. Used as an
//! independent high-precision reference for the signal equations.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const PREC: u32 = 320;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fx(pub BigInt);

impl Fx {
    pub fn one() -> Fx {
        Fx(BigInt::one() << PREC)
    }

    pub fn int(n: i64) -> Fx {
        Fx(BigInt::from(n) << PREC)
    }

    /// Exact conversion of a finite double (bits below `2^-PREC` truncated).
    pub fn from_f64(x: f64) -> Fx {
        assert!(x.is_finite());
        if x == 0.0 {
            return Fx(BigInt::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
        let m = BigInt::from(mant) * sign;
        let shift = e + PREC as i64;
        Fx(if shift >= 0 { m << shift as u32 } else { m >> (-shift) as u32 })
    }

    pub fn to_f64(&self) -> f64 {
        let a = &self.0;
        let bits = a.bits() as i64;
        let keep = 64;
        if bits > keep {
            let s = (bits - keep) as u32;
            (a >> s).to_f64().unwrap() * 2f64.powi(s as i32 - PREC as i32)
        } else {
            a.to_f64().unwrap() * 2f64.powi(-(PREC as i32))
        }
    }

    pub fn add(&self, o: &Fx) -> Fx {
        Fx(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fx) -> Fx {
        Fx(&self.0 - &o.0)
    }

    pub fn neg(&self) -> Fx {
        Fx(-&self.0)
    }

    pub fn mul(&self, o: &Fx) -> Fx {
        Fx((&self.0 * &o.0) >> PREC)
    }

    pub fn div(&self, o: &Fx) -> Fx {
        Fx((&self.0 << PREC) / &o.0)
    }

    pub fn div_int(&self, n: i64) -> Fx {
        Fx(&self.0 / BigInt::from(n))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn abs(&self) -> Fx {
        Fx(self.0.abs())
    }
}

/// Sum of `term_k` with `term_{k+1} = next(term_k, k)` until a term vanishes.
fn series(first: Fx, mut next: impl FnMut(&Fx, i64) -> Fx) -> Fx {
    let mut sum = first.clone();
    let mut term = first;
    let mut k = 0;
    loop {
        term = next(&term, k);
        if term.is_zero() {
            return sum;
        }
        sum = sum.add(&term);
        k += 1;
    }
}

/// `e^x` by halving until `|x| < 1/16`, Taylor, then repeated squaring.
pub fn exp(x: &Fx) -> Fx {
    if x.0.is_negative() {
        return Fx::one().div(&exp(&x.neg()));
    }
    let mut r = x.clone();
    let mut halvings = 0;
    let small = Fx::one().div_int(16);
    while r > small {
        r = r.div_int(2);
        halvings += 1;
    }
    let mut v = series(Fx::one(), |t, k| t.mul(&r).div_int(k + 1));
    for _ in 0..halvings {
        v = v.mul(&v);
    }
    v
}

pub fn sin(x: &Fx) -> Fx {
    let x2 = x.mul(x);
    series(x.clone(), |t, k| t.mul(&x2).neg().div_int((2 * k + 2) * (2 * k + 3)))
}

pub fn cos(x: &Fx) -> Fx {
    let x2 = x.mul(x);
    series(Fx::one(), |t, k| t.mul(&x2).neg().div_int((2 * k + 1) * (2 * k + 2)))
}

/// `atan(1/n)` for integer `n > 1`.
fn atan_inv(n: i64) -> Fx {
    let first = Fx::one().div_int(n);
    let n2 = n * n;
    // term_k = (-1)^k / ((2k+1) n^(2k+1)); track the power separately
    let mut power = first.clone();
    let mut sum = first;
    let mut k = 1;
    loop {
        power = power.div_int(n2);
        let term = power.div_int(2 * k + 1);
        if term.is_zero() {
            return sum;
        }
        sum = if k % 2 == 1 { sum.sub(&term) } else { sum.add(&term) };
        k += 1;
    }
}

/// Machin: `pi = 16 atan(1/5) - 4 atan(1/239)`.
pub fn pi() -> Fx {
    Fx(atan_inv(5).0 * 16 - atan_inv(239).0 * 4)
}

pub fn radians(deg: f64, pi: &Fx) -> Fx {
    Fx::from_f64(deg).mul(pi).div_int(180)
}

/// Spoiled gradient echo in its textbook form
/// `rho sin a (1 - E1) / (1 - cos a E1)`.
pub fn gre(t1: f64, rho: f64, tr: f64, flip_deg: f64, pi: &Fx) -> f64 {
    let a = radians(flip_deg, pi);
    let e1 = exp(&Fx::from_f64(tr).div(&Fx::from_f64(t1)).neg());
    let num = Fx::from_f64(rho).mul(&sin(&a)).mul(&Fx::one().sub(&e1));
    let den = Fx::one().sub(&cos(&a).mul(&e1));
    num.div(&den).to_f64()
}

pub fn space(t2: f64, rho: f64, te: f64) -> f64 {
    Fx::from_f64(rho).mul(&exp(&Fx::from_f64(te).div(&Fx::from_f64(t2)).neg())).to_f64()
}

/// VIBE: GRE, scaled by `|1 - 2 ff|` when opposed-phase.
pub fn vibe(t1: f64, rho: f64, ff: f64, tr: f64, flip_deg: f64, opposed: bool, pi: &Fx) -> f64 {
    let a = radians(flip_deg, pi);
    let e1 = exp(&Fx::from_f64(tr).div(&Fx::from_f64(t1)).neg());
    let mut s = Fx::from_f64(rho)
        .mul(&sin(&a))
        .mul(&Fx::one().sub(&e1))
        .div(&Fx::one().sub(&cos(&a).mul(&e1)));
    if opposed {
        s = s.mul(&Fx::one().sub(&Fx::from_f64(ff).mul(&Fx::int(2))).abs());
    }
    s.to_f64()
}
