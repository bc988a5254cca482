//! Extended-precision reference evaluation of the coefficient kernels.
//!
//! Every expression is evaluated from its closed form in wide binary floating
//! point (astro-float) and rounded once to `f64` at the end. Working precision
//! is raised with the depth of the cancellation the closed form suffers, so the
//! returned digits are good to the requested decimal count.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, RoundingMode};

use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;

/// Default decimal digits of the oracle.
pub const ORACLE_DIGITS: usize = 50;

/// Precision used for [`WideFloat`] arithmetic.
const WIDE_BITS: usize = 512;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

fn digits_to_bits(digits: usize) -> usize {
    let bits = (digits as f64 * std::f64::consts::LOG2_10).ceil() as usize + 16;
    bits.div_ceil(64) * 64
}

/// Rounds a wide value to the nearest double (ties to even).
pub fn big_to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    if x.is_zero() {
        return 0.0;
    }
    let (words, _bits, sign, exp, _) = x.as_raw_parts().expect("finite value has raw parts");
    let n = words.len();
    let hi = words[n - 1] as u128;
    let lo = if n >= 2 { words[n - 2] as u128 } else { 0 };
    let mut m = (hi << 64) | lo;
    if n > 2 && words[..n - 2].iter().any(|&w| w != 0) {
        // sticky bit
        m |= 1;
    }
    // value = m * 2^(exp - 128); u128 -> f64 rounds to nearest even.
    let mag = m as f64;
    let scaled = scale_pow2(mag, exp as i64 - 128);
    match sign {
        astro_float::Sign::Neg => -scaled,
        astro_float::Sign::Pos => scaled,
    }
}

fn scale_pow2(mut x: f64, mut e: i64) -> f64 {
    // Stepwise to avoid overflow/underflow of the intermediate power.
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Wide value used for "true" operands of the cancellation predicate.
#[derive(Debug, Clone)]
pub struct WideFloat(pub BigFloat);

impl WideFloat {
    pub fn from_f64(x: f64) -> Self {
        WideFloat(BigFloat::from_f64(x, WIDE_BITS))
    }

    /// `2^e`, exact.
    pub fn pow2(e: i32) -> Self {
        let two = BigFloat::from_f64(2.0, WIDE_BITS);
        if e >= 0 {
            WideFloat(two.powi(e as usize, WIDE_BITS, RM))
        } else {
            let p = two.powi((-e) as usize, WIDE_BITS, RM);
            WideFloat(BigFloat::from_f64(1.0, WIDE_BITS).div(&p, WIDE_BITS, RM))
        }
    }

    pub fn abs(&self) -> Self {
        WideFloat(self.0.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        big_to_f64(&self.0)
    }

    pub fn partial_cmp_f64(&self, y: f64) -> Option<Ordering> {
        let y = BigFloat::from_f64(y, WIDE_BITS);
        self.0.cmp(&y).map(|c| c.cmp(&0))
    }
}

impl From<f64> for WideFloat {
    fn from(x: f64) -> Self {
        WideFloat::from_f64(x)
    }
}

macro_rules! wide_binop {
    ($tr:ident, $m:ident) => {
        impl<'a> $tr<&'a WideFloat> for &'a WideFloat {
            type Output = WideFloat;
            fn $m(self, rhs: &'a WideFloat) -> WideFloat {
                WideFloat(self.0.$m(&rhs.0, WIDE_BITS, RM))
            }
        }
        impl $tr for WideFloat {
            type Output = WideFloat;
            fn $m(self, rhs: WideFloat) -> WideFloat {
                WideFloat(self.0.$m(&rhs.0, WIDE_BITS, RM))
            }
        }
    };
}
wide_binop!(Add, add);
wide_binop!(Sub, sub);
wide_binop!(Mul, mul);
wide_binop!(Div, div);

impl Neg for WideFloat {
    type Output = WideFloat;
    fn neg(self) -> WideFloat {
        WideFloat(self.0.neg())
    }
}

/// Closed-form expressions the oracle can evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleExpr {
    /// `d^(1-a) [1 - (1-theta)^(1-a)]`
    I1 { theta: f64, d: f64, alpha: f64 },
    /// `d^(2-a) [(2-a) theta + (1-theta)^(2-a) - 1]`
    I2 { theta: f64, d: f64, alpha: f64 },
    /// `1 - e^-x`
    J1 { x: f64 },
    /// `1 - x e^-x - e^-x`
    J2 { x: f64 },
    /// Standard pair `(a_j, c~_j)` from `tau_j`, `tau_{j+1}`, `theta`, `d = t_k - t_{j-1}`.
    StdA { tau_j: f64, tau_next: f64, theta: f64, d: f64, alpha: f64 },
    StdCTilde { tau_next: f64, theta: f64, d: f64, alpha: f64 },
    /// Fast pair for SOE node `node`, steps `tau_{k-1}`, `tau_k`.
    FastA { node: f64, tau_prev: f64, tau_k: f64 },
    FastCTilde { node: f64, tau_prev: f64, tau_k: f64 },
    /// Local pair `(a_k^(k), c_k^(k))`.
    LastA { tau_prev: f64, tau_k: f64, alpha: f64 },
    LastC { tau_prev: f64, tau_k: f64, alpha: f64 },
}

impl OracleExpr {
    fn check_domain(&self) -> Result<()> {
        let alpha_ok = |a: f64| a > 0.0 && a < 1.0;
        let ok = match *self {
            OracleExpr::I1 { theta, d, alpha } | OracleExpr::I2 { theta, d, alpha } => {
                theta > 0.0 && theta < 1.0 && d > 0.0 && alpha_ok(alpha)
            }
            OracleExpr::J1 { x } | OracleExpr::J2 { x } => x > 0.0 && x.is_finite(),
            OracleExpr::StdA { tau_j, tau_next, theta, d, alpha } => {
                tau_j > 0.0 && tau_next > 0.0 && theta > 0.0 && theta < 1.0 && d > 0.0 && alpha_ok(alpha)
            }
            OracleExpr::StdCTilde { tau_next, theta, d, alpha } => {
                tau_next > 0.0 && theta > 0.0 && theta < 1.0 && d > 0.0 && alpha_ok(alpha)
            }
            OracleExpr::FastA { node, tau_prev, tau_k } | OracleExpr::FastCTilde { node, tau_prev, tau_k } => {
                node > 0.0 && tau_prev > 0.0 && tau_k > 0.0
            }
            OracleExpr::LastA { tau_prev, tau_k, alpha } | OracleExpr::LastC { tau_prev, tau_k, alpha } => {
                tau_prev > 0.0 && tau_k > 0.0 && alpha_ok(alpha)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("oracle arguments out of domain: {self:?}")))
        }
    }

    /// Extra bits needed to absorb the cancellation in the closed form.
    fn guard_bits(&self) -> usize {
        let lost = |small: f64| (-small.log2()).max(0.0).ceil() as usize;
        match *self {
            OracleExpr::I1 { theta, .. } | OracleExpr::StdCTilde { theta, .. } => lost(theta),
            OracleExpr::I2 { theta, .. } | OracleExpr::StdA { theta, .. } => 2 * lost(theta),
            OracleExpr::J1 { x } => lost(x),
            OracleExpr::J2 { x } => 2 * lost(x),
            OracleExpr::FastA { node, tau_prev, .. } => 2 * lost(node * tau_prev),
            OracleExpr::FastCTilde { node, tau_prev, .. } => lost(node * tau_prev),
            OracleExpr::LastA { .. } | OracleExpr::LastC { .. } => 0,
        }
    }
}

/// Evaluator at a fixed number of decimal digits.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    digits: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self::new(ORACLE_DIGITS)
    }
}

struct Ctx {
    p: usize,
}

impl Ctx {
    fn f(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }
    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }
    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }
    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }
    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }
    fn pow(&self, x: &BigFloat, y: &BigFloat) -> BigFloat {
        with_consts(|cc| x.pow(y, self.p, RM, cc))
    }
    fn exp(&self, x: &BigFloat) -> BigFloat {
        with_consts(|cc| x.exp(self.p, RM, cc))
    }

    fn i1(&self, theta: f64, d: f64, alpha: f64) -> BigFloat {
        let one = self.f(1.0);
        let beta = self.sub(&one, &self.f(alpha));
        let base = self.sub(&one, &self.f(theta));
        let bracket = self.sub(&one, &self.pow(&base, &beta));
        self.mul(&self.pow(&self.f(d), &beta), &bracket)
    }

    fn i2(&self, theta: f64, d: f64, alpha: f64) -> BigFloat {
        let one = self.f(1.0);
        let beta = self.sub(&self.f(2.0), &self.f(alpha));
        let th = self.f(theta);
        let base = self.sub(&one, &th);
        let bracket = self.sub(&self.add(&self.mul(&beta, &th), &self.pow(&base, &beta)), &one);
        self.mul(&self.pow(&self.f(d), &beta), &bracket)
    }

    fn j1(&self, x: &BigFloat) -> BigFloat {
        let e = self.exp(&x.neg());
        self.sub(&self.f(1.0), &e)
    }

    fn j2(&self, x: &BigFloat) -> BigFloat {
        let e = self.exp(&x.neg());
        self.sub(&self.sub(&self.f(1.0), &self.mul(x, &e)), &e)
    }

    fn eval(&self, expr: &OracleExpr) -> BigFloat {
        match *expr {
            OracleExpr::I1 { theta, d, alpha } => self.i1(theta, d, alpha),
            OracleExpr::I2 { theta, d, alpha } => self.i2(theta, d, alpha),
            OracleExpr::J1 { x } => self.j1(&self.f(x)),
            OracleExpr::J2 { x } => self.j2(&self.f(x)),
            OracleExpr::StdA { tau_j, tau_next, theta, d, alpha } => {
                let i1 = self.i1(theta, d, alpha);
                let i2 = self.i2(theta, d, alpha);
                let two_m = self.sub(&self.f(2.0), &self.f(alpha));
                let one_m = self.sub(&self.f(1.0), &self.f(alpha));
                let tj = self.f(tau_j);
                let tn = self.f(tau_next);
                let num = self.add(&self.mul(&self.mul(&two_m, &tn), &i1), &self.mul(&self.f(2.0), &i2));
                let den = self.mul(&self.mul(&self.mul(&two_m, &one_m), &tj), &self.add(&tj, &tn));
                self.div(&num, &den).neg()
            }
            OracleExpr::StdCTilde { tau_next, theta, d, alpha } => {
                let i1 = self.i1(theta, d, alpha);
                let one_m = self.sub(&self.f(1.0), &self.f(alpha));
                self.div(&i1, &self.mul(&one_m, &self.f(tau_next)))
            }
            OracleExpr::FastA { node, tau_prev, tau_k } => {
                let th = self.f(node);
                let tp = self.f(tau_prev);
                let tk = self.f(tau_k);
                let x = self.mul(&th, &tp);
                let j1 = self.j1(&x);
                let j2 = self.j2(&x);
                let decay = self.exp(&self.mul(&th, &tk).neg());
                let num = self.mul(
                    &decay,
                    &self.add(&self.mul(&self.mul(&th, &tk), &j1), &self.mul(&self.f(2.0), &j2)),
                );
                let den = self.mul(&self.mul(&tp, &self.add(&tp, &tk)), &self.mul(&th, &th));
                self.div(&num, &den).neg()
            }
            OracleExpr::FastCTilde { node, tau_prev, tau_k } => {
                let th = self.f(node);
                let tk = self.f(tau_k);
                let x = self.mul(&th, &self.f(tau_prev));
                let j1 = self.j1(&x);
                let thk = self.mul(&th, &tk);
                let decay = self.exp(&thk.clone().neg());
                self.div(&self.mul(&decay, &j1), &thk)
            }
            OracleExpr::LastA { tau_prev, tau_k, alpha } => {
                let a = self.f(alpha);
                let tp = self.f(tau_prev);
                let tk = self.f(tau_k);
                let two_m = self.sub(&self.f(2.0), &a);
                let one_m = self.sub(&self.f(1.0), &a);
                let num = self.mul(&a, &self.mul(&tk, &tk));
                let den = self.mul(
                    &self.mul(&self.mul(&two_m, &one_m), &self.mul(&tp, &self.add(&tp, &tk))),
                    &self.pow(&tk, &a),
                );
                self.div(&num, &den)
            }
            OracleExpr::LastC { tau_prev, tau_k, alpha } => {
                let a = self.f(alpha);
                let tp = self.f(tau_prev);
                let tk = self.f(tau_k);
                let two_m = self.sub(&self.f(2.0), &a);
                let one_m = self.sub(&self.f(1.0), &a);
                let tka = self.pow(&tk, &a);
                let first = self.div(&self.f(1.0), &self.mul(&one_m, &tka));
                let second = self.div(
                    &self.mul(&a, &tk),
                    &self.mul(&self.mul(&self.mul(&two_m, &one_m), &self.add(&tp, &tk)), &tka),
                );
                self.add(&first, &second)
            }
        }
    }
}

impl Oracle {
    pub fn new(digits: usize) -> Self {
        Self { digits }
    }

    pub fn digits(&self) -> usize {
        self.digits
    }

    /// Wide result, before the final rounding.
    pub fn eval_wide(&self, expr: &OracleExpr) -> Result<BigFloat> {
        expr.check_domain()?;
        let p = digits_to_bits(self.digits) + expr.guard_bits().div_ceil(64) * 64;
        Ok(Ctx { p }.eval(expr))
    }

    pub fn eval(&self, expr: &OracleExpr) -> Result<f64> {
        self.eval_wide(expr).map(|b| big_to_f64(&b))
    }

    /// Relative difference of two wide values, as a double.
    pub fn relative_gap(a: &BigFloat, b: &BigFloat) -> f64 {
        let p = 512;
        let diff = a.sub(b, p, RM).abs();
        big_to_f64(&diff.div(&b.abs(), p, RM))
    }
}

/// Evaluates `expr` with the default 50-digit oracle, rounded once to double.
pub fn oracle_eval(expr: &OracleExpr) -> Result<f64> {
    Oracle::default().eval(expr)
}
