//! Exact scalar literals with floating-point enclosures.
//!
//! Model inputs are written as exact rationals (`3/4`, `0.1`, `-2`), as one
//! of four symbolic constants, or as a rational linear combination of both:
//!
//! ```text
//! value ::= term (('+' | '-') term)*
//! term  ::= rational | rational '*' const | const
//! const ::= sqrt2 | golden | e | pi
//! ```
//!
//! Decimal literals are exact (`0.1` is one tenth, not the nearest double).
//! Symbolic constants are expanded at 50 significant digits; the double used
//! in fast paths is the correctly rounded value of that expansion and every
//! [`Scalar`] carries an interval enclosing the true real number.
//!
//! Keeping the exact form around buys three things downstream: atoms of
//! Birkhoff-sum distributions deduplicate by exact value, Karp's cycle-mean
//! recurrence runs in exact rational arithmetic whenever no constant appears,
//! and canonical formatting is stable for content hashing.

use crate::interval::Iv;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The symbolic constants accepted in value literals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymConst {
    Sqrt2,
    Golden,
    E,
    Pi,
}

impl SymConst {
    pub const ALL: [SymConst; 4] = [SymConst::Sqrt2, SymConst::Golden, SymConst::E, SymConst::Pi];

    pub fn name(self) -> &'static str {
        match self {
            SymConst::Sqrt2 => "sqrt2",
            SymConst::Golden => "golden",
            SymConst::E => "e",
            SymConst::Pi => "pi",
        }
    }

    /// 50-significant-digit decimal expansion (correctly rounded).
    pub fn decimal50(self) -> &'static str {
        match self {
            SymConst::Sqrt2 => "1.4142135623730950488016887242096980785696718753769",
            SymConst::Golden => "1.6180339887498948482045868343656381177203091798058",
            SymConst::E => "2.7182818284590452353602874713526624977572470937000",
            SymConst::Pi => "3.1415926535897932384626433832795028841971693993751",
        }
    }

    /// Nearest double to the 50-digit expansion.
    pub fn value(self) -> f64 {
        // String parsing in Rust is correctly rounded, so this is the nearest
        // double to the true constant as well.
        self.decimal50().parse::<f64>().unwrap()
    }

    pub fn enclosure(self) -> Iv {
        Iv::ulp(self.value())
    }

    fn from_name(s: &str) -> Option<SymConst> {
        SymConst::ALL.iter().copied().find(|c| c.name() == s)
    }
}

/// Exact value: a rational plus a rational combination of symbolic constants.
/// Coefficient maps hold no zero entries, so structural equality is value
/// equality (the constants are treated as independent symbols).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact {
    pub rat: BigRational,
    pub terms: BTreeMap<SymConst, BigRational>,
}

impl Exact {
    pub fn zero() -> Self {
        Exact {
            rat: BigRational::zero(),
            terms: BTreeMap::new(),
        }
    }

    pub fn from_rational(rat: BigRational) -> Self {
        Exact {
            rat,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_integer(n: i64) -> Self {
        Exact::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn symbol(c: SymConst) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(c, BigRational::one());
        Exact {
            rat: BigRational::zero(),
            terms,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.terms.is_empty()
    }

    pub fn add(&self, other: &Exact) -> Exact {
        let mut terms = self.terms.clone();
        for (c, coeff) in &other.terms {
            let entry = terms.entry(*c).or_insert_with(BigRational::zero);
            *entry += coeff;
            if entry.is_zero() {
                terms.remove(c);
            }
        }
        Exact {
            rat: &self.rat + &other.rat,
            terms,
        }
    }

    pub fn neg(&self) -> Exact {
        Exact {
            rat: -self.rat.clone(),
            terms: self.terms.iter().map(|(c, q)| (*c, -q.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Exact) -> Exact {
        self.add(&other.neg())
    }

    pub fn scale(&self, q: &BigRational) -> Exact {
        if q.is_zero() {
            return Exact::zero();
        }
        Exact {
            rat: &self.rat * q,
            terms: self.terms.iter().map(|(c, x)| (*c, x * q)).collect(),
        }
    }

    /// Product, available when at least one factor is rational (products of
    /// two symbolic parts leave the representable class).
    pub fn mul(&self, other: &Exact) -> Option<Exact> {
        if self.is_rational() {
            Some(other.scale(&self.rat))
        } else if other.is_rational() {
            Some(self.scale(&other.rat))
        } else {
            None
        }
    }

    /// Interval guaranteed to contain the true real value.
    pub fn enclosure(&self) -> Iv {
        let mut enc = rational_enclosure(&self.rat);
        for (c, coeff) in &self.terms {
            let ce = rational_enclosure(coeff);
            enc = enc.add(mul_signed_nonneg(ce, c.enclosure()));
        }
        enc
    }

    /// Representative double (midpoint of a tight enclosure).
    pub fn to_f64(&self) -> f64 {
        let mut v = rational_to_f64(&self.rat);
        for (c, coeff) in &self.terms {
            v += rational_to_f64(coeff) * c.value();
        }
        v
    }

    /// Canonical text form used for display and content hashing:
    /// `1/2`, `sqrt2`, `-2*sqrt2`, `1+1/10*sqrt2`, `1/2-3*pi`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut first = true;
        if !self.rat.is_zero() || self.terms.is_empty() {
            out.push_str(&format_rational(&self.rat));
            first = false;
        }
        for (c, coeff) in &self.terms {
            debug_assert!(!coeff.is_zero());
            if coeff.is_negative() {
                out.push('-');
            } else if !first {
                out.push('+');
            }
            let a = coeff.abs();
            if !a.is_one() {
                out.push_str(&format_rational(&a));
                out.push('*');
            }
            out.push_str(c.name());
            first = false;
        }
        out
    }
}

fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Signed interval times a nonnegative interval (the only signed product the
/// crate needs; every symbolic constant is positive).
fn mul_signed_nonneg(a: Iv, b: Iv) -> Iv {
    debug_assert!(b.lo >= 0.0);
    let (lo, hi) = if a.lo >= 0.0 {
        (a.lo * b.lo, a.hi * b.hi)
    } else if a.hi <= 0.0 {
        (a.lo * b.hi, a.hi * b.lo)
    } else {
        (a.lo * b.hi, a.hi * b.hi)
    };
    Iv::new(lo.next_down(), hi.next_up())
}

/// Correctly-rounded-to-within-one-ulp conversion of a big rational.
/// `num`'s `to_f64` divides converted numerator and denominator and breaks
/// down once either exceeds the double range, so the quotient is computed in
/// integer arithmetic at 64 extra bits instead.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let neg = q.is_negative();
    let a = q.numer().abs();
    let b = q.denom().abs();
    // Scale so that a * 2^shift / b has at least 64 significant bits.
    let shift = (b.bits() as i64 + 64) - a.bits() as i64;
    let scaled = if shift >= 0 {
        (&a << shift as u64) / &b
    } else {
        &a / (&b << (-shift) as u64)
    };
    // scaled has ~64 bits: exact in f64 up to rounding of the low bits.
    let (_, digits) = scaled.to_u64_digits();
    let mut v = 0.0f64;
    for d in digits.iter().rev() {
        v = v * 1.8446744073709552e19 + *d as f64; // 2^64
    }
    let v = v * (2.0f64).powi(-shift as i32);
    if neg {
        -v
    } else {
        v
    }
}

pub fn rational_enclosure(q: &BigRational) -> Iv {
    Iv::ulp(rational_to_f64(q)).inflate(0.0)
}

/// A value with three synchronized representations: exact form, enclosure,
/// and a representative double for fast arithmetic.
#[derive(Clone, Debug)]
pub struct Scalar {
    pub val: f64,
    pub enc: Iv,
    pub exact: Exact,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            val: 0.0,
            enc: Iv::ZERO,
            exact: Exact::zero(),
        }
    }

    pub fn from_exact(exact: Exact) -> Self {
        let enc = exact.enclosure();
        let val = exact.to_f64();
        Scalar {
            val,
            enc: enc.hull(Iv::point(val)),
            exact,
        }
    }

    pub fn from_integer(n: i64) -> Self {
        Scalar::from_exact(Exact::from_integer(n))
    }

    pub fn from_rational(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Domain("rational with zero denominator".into()));
        }
        Ok(Scalar::from_exact(Exact::from_rational(BigRational::new(
            BigInt::from(num),
            BigInt::from(den),
        ))))
    }

    /// Treats the double as the exact dyadic rational it is.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite scalar {x}")));
        }
        let rat = BigRational::from_float(x).expect("finite double is rational");
        Ok(Scalar::from_exact(Exact::from_rational(rat)))
    }

    pub fn symbol(c: SymConst) -> Self {
        Scalar::from_exact(Exact::symbol(c))
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        Scalar::from_exact(self.exact.add(&other.exact))
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        Scalar::from_exact(self.exact.sub(&other.exact))
    }

    /// Exact product; fails when both factors carry symbolic parts.
    pub fn mul(&self, other: &Scalar) -> Result<Scalar> {
        self.exact
            .mul(&other.exact)
            .map(Scalar::from_exact)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "cannot multiply two irrational exact values ({} and {})",
                    self.canonical(),
                    other.canonical()
                ))
            })
    }

    /// Shift by a double, treated as an exact dyadic rational (used by
    /// pressure normalization, where the shift is itself a computed double).
    pub fn shift_f64(&self, x: f64) -> Scalar {
        let shift = BigRational::from_float(x).expect("finite double");
        Scalar::from_exact(self.exact.add(&Exact::from_rational(shift)))
    }

    pub fn is_rational(&self) -> bool {
        self.exact.is_rational()
    }

    pub fn canonical(&self) -> String {
        self.exact.canonical()
    }

    /// Parse the literal grammar in the module docs.
    pub fn parse(input: &str) -> Result<Self> {
        let exact = parse_exact(input)?;
        Ok(Scalar::from_exact(exact))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.canonical())
    }
}

fn parse_exact(input: &str) -> Result<Exact> {
    let s = input.trim();
    if s.is_empty() {
        return Err(Error::Domain("empty value literal".into()));
    }
    let bad = |msg: &str| Error::Domain(format!("cannot parse value literal {input:?}: {msg}"));

    // Split into signed terms at top-level + and - (minus not part of an
    // exponent like 1e-3).
    let bytes = s.as_bytes();
    let mut terms: Vec<(i32, &str)> = Vec::new();
    let mut sign = 1i32;
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && i > start {
            let prev = bytes[i - 1] as char;
            if prev == 'e' || prev == 'E' {
                // part of an exponent only when inside a numeric token
                let tok = &s[start..i - 1];
                if tok.chars().next().is_some_and(|f| f.is_ascii_digit() || f == '.') {
                    i += 1;
                    continue;
                }
            }
            terms.push((sign, s[start..i].trim()));
            sign = if c == '+' { 1 } else { -1 };
            start = i + 1;
        } else if (c == '+' || c == '-') && i == start {
            if c == '-' {
                sign = -sign;
            }
            start = i + 1;
        }
        i += 1;
    }
    terms.push((sign, s[start..].trim()));

    let mut acc = Exact::zero();
    for (sign, term) in terms {
        if term.is_empty() {
            return Err(bad("dangling sign"));
        }
        let term_val = parse_term(term).map_err(|e| bad(&e))?;
        let term_val = if sign < 0 { term_val.neg() } else { term_val };
        acc = acc.add(&term_val);
    }
    Ok(acc)
}

fn parse_term(term: &str) -> std::result::Result<Exact, String> {
    if let Some((coeff, name)) = term.split_once('*') {
        let c = SymConst::from_name(name.trim())
            .ok_or_else(|| format!("unknown constant {:?}", name.trim()))?;
        let q = parse_rational(coeff.trim())?;
        return Ok(Exact::symbol(c).scale(&q));
    }
    if let Some(c) = SymConst::from_name(term) {
        return Ok(Exact::symbol(c));
    }
    Ok(Exact::from_rational(parse_rational(term)?))
}

fn parse_rational(tok: &str) -> std::result::Result<BigRational, String> {
    if tok.is_empty() {
        return Err("empty number".into());
    }
    if let Some((num, den)) = tok.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| format!("bad numerator {num:?}"))?;
        let d = BigInt::from_str(den.trim()).map_err(|_| format!("bad denominator {den:?}"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        return Ok(BigRational::new(n, d));
    }
    parse_decimal(tok)
}

/// Exact decimal with optional exponent: `-12.345e-6` -> -12345/10^9.
fn parse_decimal(tok: &str) -> std::result::Result<BigRational, String> {
    let (mant, exp) = match tok.split_once(['e', 'E']) {
        Some((m, e)) => {
            let exp: i64 = e.parse().map_err(|_| format!("bad exponent {e:?}"))?;
            (m, exp)
        }
        None => (tok, 0),
    };
    let (mant, neg) = match mant.strip_prefix('-') {
        Some(rest) => (rest, true),
        None => (mant.strip_prefix('+').unwrap_or(mant), false),
    };
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("bad number {tok:?}"));
    }
    let digits: String = format!("{int_part}{frac_part}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad number {tok:?}"));
    }
    let n = BigInt::from_str(&digits).map_err(|_| format!("bad number {tok:?}"))?;
    let n = if neg { -n } else { n };
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10u32);
    let q = if scale >= 0 {
        BigRational::new(n, ten.pow(scale as u32))
    } else {
        BigRational::from_integer(n * ten.pow((-scale) as u32))
    };
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_std() {
        assert_eq!(SymConst::Sqrt2.value(), std::f64::consts::SQRT_2);
        assert_eq!(SymConst::E.value(), std::f64::consts::E);
        assert_eq!(SymConst::Pi.value(), std::f64::consts::PI);
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!(
            (SymConst::Golden.value() - golden).abs() <= golden * f64::EPSILON,
            "golden ratio expansion disagrees with (1+sqrt 5)/2"
        );
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(Scalar::parse("3/4").unwrap().val, 0.75);
        assert_eq!(Scalar::parse("-1/2").unwrap().val, -0.5);
        assert_eq!(Scalar::parse("0.1").unwrap().canonical(), "1/10");
        assert_eq!(Scalar::parse("2").unwrap().canonical(), "2");
        assert_eq!(Scalar::parse("1e-3").unwrap().canonical(), "1/1000");
        assert_eq!(Scalar::parse("1.5e2").unwrap().canonical(), "150");
        assert_eq!(Scalar::parse("12.5e-1").unwrap().canonical(), "5/4");
    }

    #[test]
    fn parse_symbolic_combinations() {
        let v = Scalar::parse("1 + 1/10*sqrt2").unwrap();
        assert!((v.val - (1.0 + 0.1 * std::f64::consts::SQRT_2)).abs() < 1e-15);
        assert_eq!(v.canonical(), "1+1/10*sqrt2");

        let w = Scalar::parse("-2*pi + 1/2").unwrap();
        assert_eq!(w.canonical(), "1/2-2*pi");
        assert!((w.val - (0.5 - 2.0 * std::f64::consts::PI)).abs() < 1e-14);

        let x = Scalar::parse("sqrt2 - sqrt2").unwrap();
        assert!(x.exact.is_zero());
        assert_eq!(x.canonical(), "0");
    }

    #[test]
    fn parse_rejects_garbage() {
        for bad in ["", "1/0", "foo", "1 +", "2**pi", "1.2.3", "sqrt3"] {
            assert!(Scalar::parse(bad).is_err(), "{bad:?} should not parse");
        }
    }

    #[test]
    fn enclosures_contain_truth() {
        let v = Scalar::parse("1/3").unwrap();
        assert!(v.enc.lo <= 1.0 / 3.0 && 1.0 / 3.0 <= v.enc.hi);
        assert!(v.enc.width() < 1e-15);

        let s = Scalar::symbol(SymConst::Sqrt2);
        // sqrt2^2 = 2: check the enclosure squares around 2.
        assert!(s.enc.lo * s.enc.lo < 2.0 && 2.0 < s.enc.hi * s.enc.hi);
    }

    #[test]
    fn big_rational_to_f64_handles_large_terms() {
        // 10^40 / (3 * 10^39) = 10/3, far outside naive numerator range.
        let q = BigRational::new(
            BigInt::from(10u32).pow(40),
            BigInt::from(3u32) * BigInt::from(10u32).pow(39),
        );
        let v = rational_to_f64(&q);
        assert!((v - 10.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exact_arithmetic_round_trips() {
        let a = Scalar::parse("1/3 + 2*golden").unwrap();
        let b = Scalar::parse("2/3 - 2*golden").unwrap();
        let s = a.add(&b);
        assert_eq!(s.canonical(), "1");
        assert_eq!(s.val, 1.0);
        let reparsed = Scalar::parse(&a.canonical()).unwrap();
        assert_eq!(reparsed.exact, a.exact);
    }
}
