//! Arithmetic modes.
//!
//! All dynamics are written against the [`Real`] trait. Two implementations
//! exist: native `f64` (the 53-bit mode) and [`BigFloat`], an MPFR-backed
//! software float whose exponent range is widened to the largest range MPFR
//! supports so that coordinates approaching the simplex boundary never
//! underflow to zero.

use std::cell::Cell;
use std::ffi::CStr;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use gmp_mpfr_sys::mpfr;
use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type used by every numeric routine in the crate.
pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64, precision: u32) -> Self;

    /// A constant carried at the same precision as `self`.
    fn lit(&self, v: f64) -> Self;

    fn precision(&self) -> u32;
    fn to_f64(&self) -> f64;

    /// `log2 |self|`, returned as `f64` so that values far below the `f64`
    /// range stay representable. Zero maps to `-inf`.
    fn log2_abs(&self) -> f64;

    fn is_finite(&self) -> bool;
    fn abs(&self) -> Self;
    fn exp(&self) -> Self;
    fn exp_m1(&self) -> Self;
    fn ln(&self) -> Self;
    fn ln_1p(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powf(&self, e: f64) -> Self;
    fn powi(&self, e: i32) -> Self;
    fn gamma(&self) -> Self;
    fn digamma(&self) -> Self;

    /// Decimal rendering: shortest round-trip for `f64`, `precision/3`
    /// significant digits otherwise.
    fn to_decimal(&self) -> String;

    fn zero_like(&self) -> Self {
        self.lit(0.0)
    }

    fn one_like(&self) -> Self {
        self.lit(1.0)
    }

    fn is_zero(&self) -> bool {
        *self == self.zero_like()
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    /// Sum of a nonempty slice.
    fn sum(xs: &[Self]) -> Self {
        let mut it = xs.iter();
        let first = it.next().expect("sum of empty slice").clone();
        it.fold(first, |acc, v| acc + v.clone())
    }
}

impl Real for f64 {
    fn from_f64(v: f64, _precision: u32) -> Self {
        v
    }
    fn lit(&self, v: f64) -> Self {
        v
    }
    fn precision(&self) -> u32 {
        53
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn log2_abs(&self) -> f64 {
        f64::abs(*self).log2()
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn exp_m1(&self) -> Self {
        f64::exp_m1(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn ln_1p(&self) -> Self {
        f64::ln_1p(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powf(&self, e: f64) -> Self {
        f64::powf(*self, e)
    }
    fn powi(&self, e: i32) -> Self {
        f64::powi(*self, e)
    }
    fn gamma(&self) -> Self {
        libm::tgamma(*self)
    }
    fn digamma(&self) -> Self {
        crate::fitness::special::digamma(*self).unwrap_or(f64::NAN)
    }
    fn to_decimal(&self) -> String {
        format_f64(*self)
    }
}

/// Shortest round-trip decimal, switching to exponent notation outside a
/// readable magnitude band.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

thread_local! {
    static WIDE_EXPONENTS: Cell<bool> = const { Cell::new(false) };
}

/// MPFR keeps its exponent bounds per thread; widen them before the first
/// big-float value is created on this thread.
fn widen_exponent_range() {
    WIDE_EXPONENTS.with(|done| {
        if !done.get() {
            // SAFETY: plain setters of MPFR's (thread-local) exponent range,
            // called with the bounds MPFR itself reports as admissible.
            unsafe {
                mpfr::set_emin(mpfr::get_emin_min());
                mpfr::set_emax(mpfr::get_emax_max());
            }
            done.set(true);
        }
    });
}

/// Software float with a configurable mantissa width and an exponent range of
/// roughly ±2^62.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct BigFloat(Float);

impl BigFloat {
    pub fn inner(&self) -> &Float {
        &self.0
    }

    /// Binary exponent `e` with `self = d * 2^e`, `d` in [0.5, 1).
    pub fn exponent(&self) -> Option<i64> {
        if self.0.is_normal() {
            // SAFETY: `as_raw` yields a valid pointer to an initialized mpfr_t.
            Some(unsafe { mpfr::get_exp(self.0.as_raw()) } as i64)
        } else {
            None
        }
    }
}

impl fmt::Debug for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

impl Add for BigFloat {
    type Output = BigFloat;
    fn add(self, rhs: Self) -> Self {
        BigFloat(self.0 + rhs.0)
    }
}

impl Sub for BigFloat {
    type Output = BigFloat;
    fn sub(self, rhs: Self) -> Self {
        BigFloat(self.0 - rhs.0)
    }
}

impl Mul for BigFloat {
    type Output = BigFloat;
    fn mul(self, rhs: Self) -> Self {
        BigFloat(self.0 * rhs.0)
    }
}

impl Div for BigFloat {
    type Output = BigFloat;
    fn div(self, rhs: Self) -> Self {
        BigFloat(self.0 / rhs.0)
    }
}

impl Neg for BigFloat {
    type Output = BigFloat;
    fn neg(self) -> Self {
        BigFloat(-self.0)
    }
}

impl Real for BigFloat {
    fn from_f64(v: f64, precision: u32) -> Self {
        widen_exponent_range();
        BigFloat(Float::with_val(precision, v))
    }
    fn lit(&self, v: f64) -> Self {
        BigFloat(Float::with_val(self.0.prec(), v))
    }
    fn precision(&self) -> u32 {
        self.0.prec()
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn log2_abs(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        if !self.0.is_finite() {
            return f64::INFINITY;
        }
        let mut e: mpfr::exp_t = 0;
        // SAFETY: valid mpfr_t and a valid out-pointer for the exponent.
        let d = unsafe { mpfr::get_d_2exp(&mut e, self.0.as_raw(), mpfr::rnd_t::RNDN) };
        e as f64 + d.abs().log2()
    }
    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }
    fn abs(&self) -> Self {
        BigFloat(self.0.clone().abs())
    }
    fn exp(&self) -> Self {
        BigFloat(self.0.clone().exp())
    }
    fn exp_m1(&self) -> Self {
        BigFloat(self.0.clone().exp_m1())
    }
    fn ln(&self) -> Self {
        BigFloat(self.0.clone().ln())
    }
    fn ln_1p(&self) -> Self {
        BigFloat(self.0.clone().ln_1p())
    }
    fn sqrt(&self) -> Self {
        BigFloat(self.0.clone().sqrt())
    }
    fn powf(&self, e: f64) -> Self {
        BigFloat(self.0.clone().pow(e))
    }
    fn powi(&self, e: i32) -> Self {
        BigFloat(self.0.clone().pow(e))
    }
    fn gamma(&self) -> Self {
        BigFloat(self.0.clone().gamma())
    }
    fn digamma(&self) -> Self {
        BigFloat(self.0.clone().digamma())
    }
    fn to_decimal(&self) -> String {
        let digits = (self.0.prec() as usize / 3).max(2);
        format_big(&self.0, digits)
    }
}

fn format_big(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.to_string();
    }
    let mut exp: mpfr::exp_t = 0;
    // SAFETY: MPFR allocates the digit string; it is copied and released
    // with the matching `free_str` before returning.
    let raw = unsafe {
        let ptr = mpfr::get_str(
            std::ptr::null_mut(),
            &mut exp,
            10,
            digits,
            x.as_raw(),
            mpfr::rnd_t::RNDN,
        );
        let s = CStr::from_ptr(ptr).to_string_lossy().into_owned();
        mpfr::free_str(ptr);
        s
    };
    let (sign, body) = match raw.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", raw.as_str()),
    };
    let (lead, tail) = body.split_at(1);
    format!("{sign}{lead}.{tail}e{}", exp as i64 - 1)
}

/// Mantissa width of an arithmetic mode: 53 (native) or 64..=4096 bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision(u32);

impl Precision {
    pub const NATIVE: Precision = Precision(53);

    pub fn new(bits: u32) -> Result<Self> {
        if bits == 53 || (64..=4096).contains(&bits) {
            Ok(Precision(bits))
        } else {
            Err(Error::param(format!(
                "precision_bits must be 53 or in [64, 4096], got {bits}"
            )))
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn is_native(self) -> bool {
        self.0 == 53
    }

    /// `2^(-bits/2)`: the default equality/clamping tolerance of dynamics
    /// monitors.
    pub fn monitor_tol(self) -> f64 {
        2f64.powf(-(self.0 as f64) / 2.0)
    }
}

impl TryFrom<u32> for Precision {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Precision::new(v)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.0
    }
}

/// Runs `$body` with the type alias `$r` bound to the scalar type of the
/// given [`Precision`].
#[macro_export]
macro_rules! with_real {
    ($prec:expr, $r:ident => $body:expr) => {{
        if $crate::real::Precision::is_native($prec) {
            #[allow(dead_code)]
            type $r = f64;
            $body
        } else {
            #[allow(dead_code)]
            type $r = $crate::real::BigFloat;
            $body
        }
    }};
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_float_survives_deep_underflow() {
        let mut x = BigFloat::from_f64(0.5, 128);
        let tiny = BigFloat::from_f64(2f64.powi(-1000), 128);
        for _ in 0..2000 {
            x = x * tiny.clone();
        }
        assert!(!x.is_zero());
        let l = x.log2_abs();
        assert!((l - (-1.0 - 2_000_000.0)).abs() < 1e-6, "{l}");
        assert_eq!(x.exponent(), Some(-2_000_000));
    }

    #[test]
    fn decimal_rendering() {
        let x = BigFloat::from_f64(0.555, 64);
        let s = x.to_decimal();
        assert_eq!(s, "5.55000000000000048850e-1");
        assert!(s.ends_with("e-1"));
        assert_eq!(format_f64(0.555), "0.555");
        assert_eq!(format_f64(1e-300), "1e-300");
        assert_eq!(format_f64(0.0), "0");
    }

    #[test]
    fn precision_guard() {
        assert!(Precision::new(53).is_ok());
        assert!(Precision::new(60).is_err());
        assert!(Precision::new(64).is_ok());
        assert!(Precision::new(4097).is_err());
    }

    #[test]
    fn dispatch_macro_selects_type() {
        let p = Precision::new(256).unwrap();
        let bits = with_real!(p, R => R::from_f64(1.0, p.bits()).precision());
        assert_eq!(bits, 256);
        let n = with_real!(Precision::NATIVE, R => R::from_f64(1.0, 53).precision());
        assert_eq!(n, 53);
    }
}
