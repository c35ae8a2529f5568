//! Arbitrary-precision real arithmetic with tracked error bounds, certified
//! signs, and a generic certified bisection.
//!
//! Every real quantity in the crate is carried as a [`BigReal`]: an MPFR
//! float (the candidate value) paired with a nonnegative absolute error
//! bound. The true quantity is guaranteed to lie in `[value - err,
//! value + err]`. Arithmetic propagates the bound conservatively
//! (first-order interval propagation plus a full ulp per inexact rounding),
//! which is enough for certified sign decisions at the scales exercised by
//! the rest of the crate.
//!
//! Exactness is preserved wherever MPFR reports an exact result: combining
//! two error-free operands with an operation that rounds exactly yields an
//! error-free result. Dyadic inputs (bisection midpoints, binary-rational
//! parameters) therefore stay exact through polynomial evaluation, which is
//! what lets orbits that land exactly on a critical or fixed point be
//! recognized as such rather than smeared by spurious error.

use rug::float::Round;
use rug::ops::{AddAssignRound, AssignRound, MulAssignRound, NegAssign, Pow, SubAssignRound};
use rug::{Assign, Float, Integer};
use std::cmp::Ordering;
use std::fmt;

/// Precision (bits) used for error bounds. Error bounds only need a couple
/// of significant digits but a huge exponent range, so a fixed small MPFR
/// precision is both cheap and safe (MPFR exponents far exceed any depth
/// reachable here, unlike `f64`'s ±1024 range).
pub const ERR_PREC: u32 = 64;

/// Minimum working precision accepted anywhere.
pub const MIN_PREC: u32 = 64;

/// Errors produced by the numerics layer.
#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    /// A sign could not be certified even after exhausting precision
    /// escalations.
    #[error("sign undecidable after escalating to {bits} bits")]
    SignUndecidable { bits: u32 },
    /// Bisection was asked to run on a bracket without a certified sign
    /// change.
    #[error("no certified sign change across the bracket")]
    NoSignChange,
    /// Logarithm of a quantity that is not certifiably positive.
    #[error("logarithm of a quantity not certifiably positive")]
    NonPositiveLog,
    /// A decimal string could not be parsed.
    #[error("invalid decimal literal: {0}")]
    BadDecimal(String),
    /// Bisection exceeded its iteration guard (the tolerance was never
    /// reached; indicates a tolerance below representable resolution).
    #[error("bisection iteration guard exceeded")]
    IterationGuard,
}

/// Certified sign of a [`BigReal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Neg,
    /// Only exactly-zero representations (value 0 with error bound 0).
    Zero,
    Pos,
    /// The error bound straddles zero; a decision needs more precision.
    Undecidable,
}

impl Sign {
    /// +1 / 0 / -1 for decided signs, `None` when undecidable.
    pub fn as_i8(self) -> Option<i8> {
        match self {
            Sign::Neg => Some(-1),
            Sign::Zero => Some(0),
            Sign::Pos => Some(1),
            Sign::Undecidable => None,
        }
    }
}

/// Working precision plus the escalation policy used when a sign cannot be
/// certified at the current precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionContext {
    /// Working mantissa precision in bits; at least [`MIN_PREC`].
    pub bits: u32,
    /// Multiplier applied to `bits` on each escalation (at least 2).
    pub escalation_factor: u32,
    /// Maximum number of escalations before giving up.
    pub max_escalations: u32,
}

impl PrecisionContext {
    /// Context with the default escalation policy (factor 2, at most 4
    /// escalations). `bits` is clamped up to [`MIN_PREC`].
    pub fn new(bits: u32) -> Self {
        PrecisionContext {
            bits: bits.max(MIN_PREC),
            escalation_factor: 2,
            max_escalations: 4,
        }
    }

    /// Precision after `n` escalations.
    pub fn escalated_bits(&self, n: u32) -> u32 {
        let mut b = self.bits as u64;
        for _ in 0..n {
            b = b.saturating_mul(self.escalation_factor as u64);
        }
        b.min(u32::MAX as u64) as u32
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        PrecisionContext::new(256)
    }
}

/// An arbitrary-precision real with a certified absolute error bound.
///
/// The true quantity lies in `[value - err, value + err]`. `err` is kept at
/// a fixed small precision ([`ERR_PREC`]) and always rounded upward.
#[derive(Clone)]
pub struct BigReal {
    value: Float,
    err: Float,
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BigReal({} ± {})",
            self.value.to_string_radix(10, Some(20)),
            self.err.to_string_radix(10, Some(3))
        )
    }
}

fn zero_err() -> Float {
    Float::with_val(ERR_PREC, 0)
}

/// Full ulp of a float: 2^(exp - prec). Zero for exact zero values.
/// One full ulp strictly dominates the half-ulp bound of round-to-nearest,
/// leaving slack that keeps error intervals nested under precision
/// refinement.
fn ulp(x: &Float) -> Float {
    match x.get_exp() {
        None => zero_err(), // zero (infinities/NaN never carry rounding here)
        Some(e) => {
            let mut u = Float::with_val(ERR_PREC, 1);
            u <<= e - x.prec() as i32;
            u
        }
    }
}

/// `err + (rounding ulp if the rounding was inexact)`, rounded upward.
fn with_rounding_term(mut err: Float, value: &Float, direction: Ordering) -> Float {
    if direction != Ordering::Equal {
        err.add_assign_round(ulp(value), Round::Up);
    }
    err
}

impl BigReal {
    fn make(value: Float, err: Float) -> Self {
        debug_assert!(err.is_sign_positive() || err.is_zero());
        BigReal { value, err }
    }

    /// Exactly zero at the given precision.
    pub fn zero(prec: u32) -> Self {
        BigReal::make(Float::with_val(prec.max(MIN_PREC), 0), zero_err())
    }

    /// Exact small integer.
    pub fn exact_i64(x: i64, prec: u32) -> Self {
        BigReal::make(Float::with_val(prec.max(MIN_PREC), x), zero_err())
    }

    /// Exact `f64` (every finite `f64` is a dyadic rational).
    pub fn exact_f64(x: f64, prec: u32) -> Self {
        assert!(x.is_finite(), "exact_f64 requires a finite input");
        BigReal::make(Float::with_val(prec.max(MIN_PREC), x), zero_err())
    }

    /// Ratio of small integers; the error bound is zero exactly when the
    /// quotient is representable at this precision.
    pub fn from_ratio(num: i64, den: i64, prec: u32) -> Self {
        assert!(den != 0, "zero denominator");
        let prec = prec.max(MIN_PREC);
        let n = Float::with_val(prec, num);
        let mut v = Float::new(prec);
        let dir = v.assign_round(&n / den, Round::Nearest);
        let err = with_rounding_term(zero_err(), &v, dir);
        BigReal::make(v, err)
    }

    /// Parse a decimal literal. The error bound is zero exactly when the
    /// literal is representable at this precision (in particular any dyadic
    /// decimal such as `0.140625` parses exactly given enough bits).
    pub fn parse_decimal(s: &str, prec: u32) -> Result<Self, NumericsError> {
        let prec = prec.max(MIN_PREC);
        let incomplete =
            Float::parse(s).map_err(|_| NumericsError::BadDecimal(s.to_string()))?;
        let mut v = Float::new(prec);
        let dir = v.assign_round(incomplete, Round::Nearest);
        if !v.is_finite() {
            return Err(NumericsError::BadDecimal(s.to_string()));
        }
        let err = with_rounding_term(zero_err(), &v, dir);
        Ok(BigReal::make(v, err))
    }

    /// Construct from a value and an explicit error bound.
    pub fn with_err(value: Float, err: Float) -> Self {
        let mut e = Float::new(ERR_PREC);
        e.assign_round(&err, Round::Up);
        if e.is_sign_negative() {
            e.neg_assign();
        }
        BigReal::make(value, e)
    }

    /// The candidate value.
    pub fn value(&self) -> &Float {
        &self.value
    }

    /// The absolute error bound.
    pub fn err(&self) -> &Float {
        &self.err
    }

    /// Working precision of the value.
    pub fn prec(&self) -> u32 {
        self.value.prec()
    }

    /// True when the error bound is exactly zero.
    pub fn is_exact(&self) -> bool {
        self.err.is_zero()
    }

    /// Same quantity re-rounded to a different working precision. Rounding
    /// to a lower precision adds the corresponding ulp to the error bound;
    /// raising the precision is exact.
    pub fn with_prec(&self, prec: u32) -> Self {
        let prec = prec.max(MIN_PREC);
        let mut v = Float::new(prec);
        let dir = v.assign_round(&self.value, Round::Nearest);
        let err = with_rounding_term(self.err.clone(), &v, dir);
        BigReal::make(v, err)
    }

    /// `-self` (exact).
    pub fn neg(&self) -> Self {
        let mut v = self.value.clone();
        v.neg_assign();
        BigReal::make(v, self.err.clone())
    }

    /// `|self|` (exact).
    pub fn abs(&self) -> Self {
        BigReal::make(self.value.clone().abs(), self.err.clone())
    }

    /// `self * 2^k` (exact).
    pub fn mul_2exp(&self, k: i32) -> Self {
        let mut v = self.value.clone();
        let mut e = self.err.clone();
        if k >= 0 {
            v <<= k as u32;
            e <<= k as u32;
        } else {
            v >>= (-k) as u32;
            e >>= (-k) as u32;
        }
        BigReal::make(v, e)
    }

    /// Exact copy of the candidate value with a zero error bound.
    pub fn value_part(&self) -> Self {
        BigReal::make(self.value.clone(), zero_err())
    }

    /// The error bound as an exact value.
    pub fn err_real(&self) -> Self {
        BigReal::make(Float::with_val(ERR_PREC, &self.err), zero_err())
    }

    /// An exact upper bound for `|self|` over its whole error interval:
    /// `|value| + err`, rounded up.
    pub fn upper_abs(&self) -> Self {
        let (sum, _) = Float::with_val_round(
            ERR_PREC,
            self.value.clone().abs() + &self.err,
            Round::Up,
        );
        BigReal::make(sum, zero_err())
    }

    /// Same value with the error bound enlarged by (an upper bound of)
    /// `extra`.
    pub fn widen_err(&self, extra: &Self) -> Self {
        let (add, _) = Float::with_val_round(
            ERR_PREC,
            extra.value.clone().abs() + &extra.err,
            Round::Up,
        );
        let (e, _) = Float::with_val_round(ERR_PREC, &self.err + add, Round::Up);
        BigReal::make(self.value.clone(), e)
    }

    /// Snap an exact value onto the dyadic grid of spacing `2^-frac_bits`,
    /// rounding up or down. The result is exact; the input must be exact.
    pub fn round_to_grid(&self, frac_bits: u32, up: bool) -> Self {
        debug_assert!(self.is_exact(), "grid rounding expects an exact input");
        let prec = self.value.prec().max(frac_bits + 32);
        let mut y = Float::with_val(prec, &self.value);
        y <<= frac_bits;
        if up {
            y.ceil_mut();
        } else {
            y.floor_mut();
        }
        y >>= frac_bits;
        BigReal::make(y, zero_err())
    }

    pub fn add(&self, other: &Self, prec: u32) -> Self {
        let prec = prec.max(MIN_PREC);
        let mut v = Float::new(prec);
        let dir = v.assign_round(&self.value + &other.value, Round::Nearest);
        let mut e = Float::new(ERR_PREC);
        e.assign_round(&self.err + &other.err, Round::Up);
        let e = with_rounding_term(e, &v, dir);
        BigReal::make(v, e)
    }

    pub fn sub(&self, other: &Self, prec: u32) -> Self {
        self.add(&other.neg(), prec)
    }

    pub fn mul(&self, other: &Self, prec: u32) -> Self {
        let prec = prec.max(MIN_PREC);
        let mut v = Float::new(prec);
        let dir = v.assign_round(&self.value * &other.value, Round::Nearest);
        // |a||eb| + |b||ea| + ea*eb, upward.
        let mut e = Float::new(ERR_PREC);
        if self.err.is_zero() && other.err.is_zero() {
            e.assign(0);
        } else {
            let mut abs_a = Float::new(ERR_PREC);
            abs_a.assign_round(&self.value, Round::Up);
            abs_a.abs_mut();
            let mut abs_b = Float::new(ERR_PREC);
            abs_b.assign_round(&other.value, Round::Up);
            abs_b.abs_mut();
            e.assign_round(&abs_a * &other.err, Round::Up);
            let mut t = Float::new(ERR_PREC);
            t.assign_round(&abs_b * &self.err, Round::Up);
            e.add_assign_round(t, Round::Up);
            let mut t2 = Float::new(ERR_PREC);
            t2.assign_round(&self.err * &other.err, Round::Up);
            e.add_assign_round(t2, Round::Up);
        }
        let e = with_rounding_term(e, &v, dir);
        BigReal::make(v, e)
    }

    pub fn div(&self, other: &Self, prec: u32) -> Self {
        let prec = prec.max(MIN_PREC);
        let mut v = Float::new(prec);
        let dir = v.assign_round(&self.value / &other.value, Round::Nearest);
        // Denominator must be certifiably nonzero: |b| - eb > 0.
        let mut abs_b = Float::new(ERR_PREC);
        abs_b.assign_round(&other.value, Round::Down);
        abs_b.abs_mut();
        let mut den = Float::new(ERR_PREC);
        den.assign_round(&abs_b - &other.err, Round::Down);
        if !(den.is_sign_positive() && !den.is_zero()) || !v.is_finite() {
            let inf = Float::with_val(ERR_PREC, rug::float::Special::Infinity);
            return BigReal::make(v, inf);
        }
        let mut e = Float::new(ERR_PREC);
        if self.err.is_zero() && other.err.is_zero() {
            e.assign(0);
        } else {
            // (ea + (|q| + ulp(q)) * eb) / (|b| - eb), upward.
            let mut abs_q = Float::new(ERR_PREC);
            abs_q.assign_round(&v, Round::Up);
            abs_q.abs_mut();
            abs_q.add_assign_round(ulp(&v), Round::Up);
            let mut num = Float::new(ERR_PREC);
            num.assign_round(&abs_q * &other.err, Round::Up);
            num.add_assign_round(&self.err, Round::Up);
            e.assign_round(&num / &den, Round::Up);
        }
        let e = with_rounding_term(e, &v, dir);
        BigReal::make(v, e)
    }

    /// Integer power with first-order error propagation:
    /// `|x^n - y^n| <= n * (|x| + e)^(n-1) * e`.
    pub fn pow_u32(&self, n: u32, prec: u32) -> Self {
        let prec = prec.max(MIN_PREC);
        if n == 0 {
            return BigReal::exact_i64(1, prec);
        }
        let mut v = Float::new(prec);
        let dir = v.assign_round((&self.value).pow(n), Round::Nearest);
        let mut e = Float::new(ERR_PREC);
        if self.err.is_zero() {
            e.assign(0);
        } else {
            let mut bound = Float::new(ERR_PREC);
            bound.assign_round(&self.value, Round::Up);
            bound.abs_mut();
            bound.add_assign_round(&self.err, Round::Up);
            let mut pw = Float::new(ERR_PREC);
            pw.assign_round((&bound).pow(n - 1), Round::Up);
            e.assign_round(&pw * &self.err, Round::Up);
            let mut nn = Float::with_val(ERR_PREC, n);
            nn.mul_assign_round(&e, Round::Up);
            e = nn;
        }
        let e = with_rounding_term(e, &v, dir);
        BigReal::make(v, e)
    }

    /// Natural logarithm; requires the quantity to be certifiably positive.
    /// `|ln x - ln y| <= e / (x - e)` on `[x - e, x + e]`.
    pub fn ln(&self, prec: u32) -> Result<Self, NumericsError> {
        let prec = prec.max(MIN_PREC);
        let mut low = Float::new(ERR_PREC);
        low.assign_round(&self.value, Round::Down);
        low.sub_assign_round(&self.err, Round::Down);
        if !(low.is_sign_positive() && !low.is_zero()) {
            return Err(NumericsError::NonPositiveLog);
        }
        let mut v = Float::new(prec);
        let dir = v.assign_round(self.value.ln_ref(), Round::Nearest);
        let mut e = Float::new(ERR_PREC);
        if self.err.is_zero() {
            e.assign(0);
        } else {
            e.assign_round(&self.err / &low, Round::Up);
        }
        let e = with_rounding_term(e, &v, dir);
        Ok(BigReal::make(v, e))
    }

    /// Certified sign: `Neg` iff `value + err < 0`, `Pos` iff
    /// `value - err > 0`, `Zero` only for exactly-zero representations,
    /// `Undecidable` otherwise.
    pub fn sign(&self) -> Sign {
        if self.value.is_zero() {
            return if self.err.is_zero() {
                Sign::Zero
            } else {
                Sign::Undecidable
            };
        }
        if !self.value.is_finite() || !self.err.is_finite() {
            return Sign::Undecidable;
        }
        // Comparisons between floats are exact regardless of precision.
        let mut abs_v = self.value.clone();
        abs_v.abs_mut();
        if abs_v > self.err {
            if self.value.is_sign_positive() {
                Sign::Pos
            } else {
                Sign::Neg
            }
        } else {
            Sign::Undecidable
        }
    }

    /// Ordering of candidate values, ignoring error bounds. Use only where
    /// both operands are exact (dyadic brackets) or where a heuristic
    /// ordering is acceptable.
    pub fn cmp_value(&self, other: &Self) -> Ordering {
        self.value.partial_cmp(&other.value).expect("NaN in cmp_value")
    }

    /// Certified comparison: `Some(ordering)` when the error intervals are
    /// disjoint (or both quantities exact and equal), `None` otherwise.
    pub fn cmp_certified(&self, other: &Self, prec: u32) -> Option<Ordering> {
        match self.sub(other, prec).sign() {
            Sign::Neg => Some(Ordering::Less),
            Sign::Pos => Some(Ordering::Greater),
            Sign::Zero => Some(Ordering::Equal),
            Sign::Undecidable => None,
        }
    }

    /// Closest `f64` to the candidate value (for heuristics and logs only).
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    /// Canonical exact decimal rendering of the candidate value. Every
    /// finite MPFR float is a dyadic rational, so this is always a finite
    /// string; it is independent of precision, so re-parsing at any
    /// sufficient precision and re-rendering reproduces it byte for byte.
    pub fn exact_decimal(&self) -> String {
        exact_decimal_of(&self.value)
    }

    /// Canonical exact decimal rendering of the error bound ("inf" when the
    /// bound is infinite).
    pub fn err_decimal(&self) -> String {
        exact_decimal_of(&self.err)
    }

    /// Short human-readable decimal (not exact; for display only).
    pub fn display_decimal(&self, digits: usize) -> String {
        self.value.to_string_radix(10, Some(digits))
    }
}

/// Canonical exact decimal of a float: sign, integer part, and (when the
/// exponent is negative) a fractional part whose last digit is never zero.
pub fn exact_decimal_of(x: &Float) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x.is_sign_positive() { "inf" } else { "-inf" }.to_string();
    }
    if x.is_zero() {
        return "0".to_string();
    }
    let (mut mant, mut exp) = x.to_integer_exp().expect("finite float");
    // Normalize: strip factors of two into the exponent.
    while mant.is_even() {
        mant >>= 1;
        exp += 1;
    }
    let neg = mant < 0;
    if neg {
        mant.neg_assign();
    }
    let body = if exp >= 0 {
        let whole: Integer = mant << (exp as u32);
        whole.to_string()
    } else {
        let s = (-exp) as u32;
        // mant * 2^-s = (mant * 5^s) * 10^-s; mant odd makes the last digit
        // of the product nonzero, so the rendering is canonical.
        let digits: Integer = mant * Integer::from(5).pow(s);
        let text = digits.to_string();
        let s = s as usize;
        if text.len() > s {
            let (int_part, frac_part) = text.split_at(text.len() - s);
            format!("{int_part}.{frac_part}")
        } else {
            format!("0.{}{}", "0".repeat(s - text.len()), text)
        }
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Free-function form of the certified sign (the context carries no state
/// the decision needs; it is accepted for interface symmetry with the other
/// certified operations).
pub fn certified_sign(x: &BigReal, _ctx: &PrecisionContext) -> Sign {
    x.sign()
}

/// Evaluate `f` at `x`, escalating precision until the sign of the result is
/// certified. Returns the decided sign (-1, 0, +1).
pub fn certified_sign_escalating<F>(
    f: &F,
    x: &BigReal,
    ctx: &PrecisionContext,
) -> Result<i8, NumericsError>
where
    F: Fn(&BigReal, u32) -> Result<BigReal, NumericsError>,
{
    let mut bits = ctx.bits;
    for attempt in 0..=ctx.max_escalations {
        let y = f(x, bits)?;
        match y.sign() {
            Sign::Neg => return Ok(-1),
            Sign::Zero => return Ok(0),
            Sign::Pos => return Ok(1),
            Sign::Undecidable => {
                if attempt == ctx.max_escalations {
                    break;
                }
                bits = bits.saturating_mul(ctx.escalation_factor);
            }
        }
    }
    Err(NumericsError::SignUndecidable { bits })
}

/// Result of a certified bisection: a dyadic bracket across which the
/// function certifiably changes sign (or an exact root when a probe
/// evaluated to certified zero). The width is at most the requested
/// tolerance unless the run was resolution-limited.
#[derive(Clone, Debug)]
pub struct RootBracket {
    pub lo: BigReal,
    pub hi: BigReal,
    pub iterations: u32,
    /// True when the bracket collapsed onto a certified exact root.
    pub exact: bool,
    /// True when refinement stopped above the tolerance because every
    /// probe's sign was swallowed by the function's own error floor (e.g.
    /// inexact coefficients). The sign change across the bracket is still
    /// certified.
    pub resolution_limited: bool,
}

impl RootBracket {
    /// Bracket width (exact dyadic difference).
    pub fn width(&self) -> BigReal {
        let prec = self.lo.prec().max(self.hi.prec()) + 1;
        self.hi.sub(&self.lo, prec)
    }

    /// Point representative: the exact dyadic midpoint carrying the
    /// half-width as its error bound.
    pub fn midpoint(&self) -> BigReal {
        if self.exact {
            return self.lo.clone();
        }
        let mid = exact_midpoint(&self.lo, &self.hi);
        let mut half = Float::new(ERR_PREC);
        half.assign_round(self.width().value(), Round::Up);
        half >>= 1;
        half.abs_mut();
        BigReal::with_err(mid.value.clone(), half)
    }
}

/// Add two float values exactly, widening the precision as needed.
fn float_exact_add(a: &Float, b: &Float) -> Float {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return a.clone();
    }
    let ea = a.get_exp().expect("finite nonzero") as i64;
    let eb = b.get_exp().expect("finite nonzero") as i64;
    let lsb = (ea - a.prec() as i64).min(eb - b.prec() as i64);
    let need = (ea.max(eb) - lsb + 2).max(MIN_PREC as i64) as u32;
    let mut v = Float::new(need);
    let dir = v.assign_round(a + b, Round::Nearest);
    debug_assert_eq!(dir, Ordering::Equal, "widened sum must be exact");
    v
}

/// Exact dyadic midpoint of two exact values (halving is exact in binary).
pub fn exact_midpoint(a: &BigReal, b: &BigReal) -> BigReal {
    let mut v = float_exact_add(a.value(), b.value());
    v >>= 1;
    BigReal::make(v, zero_err())
}

/// Exact dyadic blend `lo + (hi - lo) * num / 2^den_bits` of two exact
/// values, for probing a bracket off-center. Requires `num < 2^den_bits`.
pub fn exact_blend(lo: &BigReal, hi: &BigReal, num: u32, den_bits: u32) -> BigReal {
    debug_assert!((num as u64) < (1u64 << den_bits));
    let mut neg_lo = lo.value().clone();
    neg_lo.neg_assign();
    let mut diff = float_exact_add(hi.value(), &neg_lo);
    // Multiply by a small integer exactly by widening.
    let wide = diff.prec() + 33;
    let mut scaled = Float::new(wide);
    let dir = scaled.assign_round(&diff * num, Round::Nearest);
    debug_assert_eq!(dir, Ordering::Equal, "small-integer scaling must be exact");
    scaled >>= den_bits;
    diff = scaled;
    BigReal::make(float_exact_add(lo.value(), &diff), zero_err())
}

/// Certified bisection of a sign-changing function on `[a, b]`.
///
/// `f` is an escalating closure: it receives the evaluation point and a
/// working precision, and returns the function value with a certified error
/// bound. Endpoint and midpoint signs are certified through
/// [`certified_sign_escalating`]; midpoints are exact dyadics, so re-running
/// at a higher base precision follows the identical bracket path.
///
/// The endpoints' own error bounds are ignored: the bracket is the pair of
/// stored candidate values. Returns once the bracket width is at most `tol`
/// (or immediately on hitting a certified exact root).
pub fn bisect<F>(
    f: &F,
    a: &BigReal,
    b: &BigReal,
    tol: &BigReal,
    ctx: &PrecisionContext,
) -> Result<RootBracket, NumericsError>
where
    F: Fn(&BigReal, u32) -> Result<BigReal, NumericsError>,
{
    let mut lo = BigReal::make(a.value.clone(), zero_err());
    let mut hi = BigReal::make(b.value.clone(), zero_err());
    if lo.cmp_value(&hi) == Ordering::Greater {
        std::mem::swap(&mut lo, &mut hi);
    }
    let sign_lo = certified_sign_escalating(f, &lo, ctx)?;
    if sign_lo == 0 {
        return Ok(RootBracket {
            lo: lo.clone(),
            hi: lo,
            iterations: 0,
            exact: true,
            resolution_limited: false,
        });
    }
    let sign_hi = certified_sign_escalating(f, &hi, ctx)?;
    if sign_hi == 0 {
        return Ok(RootBracket {
            lo: hi.clone(),
            hi,
            iterations: 0,
            exact: true,
            resolution_limited: false,
        });
    }
    if sign_lo == sign_hi {
        return Err(NumericsError::NoSignChange);
    }
    let mut iterations = 0u32;
    loop {
        let width = hi.sub(&lo, hi.prec().max(lo.prec()) + 1);
        if width.cmp_value(tol) != Ordering::Greater {
            return Ok(RootBracket { lo, hi, iterations, exact: false, resolution_limited: false });
        }
        if iterations > 1 << 20 {
            return Err(NumericsError::IterationGuard);
        }
        // The plain midpoint can land so close to the root that the sign
        // stays undecidable at any working precision (the function itself
        // may carry an error floor, e.g. from inexact coefficients). Probe
        // a few off-center dyadic points before giving up.
        let mut cut = None;
        let mut last_err = None;
        for (num, den_bits) in [(1u32, 1u32), (3, 3), (7, 4), (15, 5)] {
            let point = exact_blend(&lo, &hi, num, den_bits);
            match certified_sign_escalating(f, &point, ctx) {
                Ok(0) => {
                    return Ok(RootBracket {
                        lo: point.clone(),
                        hi: point,
                        iterations,
                        exact: true,
                        resolution_limited: false,
                    });
                }
                Ok(s) => {
                    cut = Some((point, s));
                    break;
                }
                Err(e @ NumericsError::SignUndecidable { .. }) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        match cut {
            Some((point, s)) => {
                if s == sign_lo {
                    lo = point;
                } else {
                    hi = point;
                }
            }
            None => {
                // Every probe is inside the function's error floor: the
                // bracket cannot be certifiably refined further. Hand back
                // what is certified rather than failing.
                let _ = last_err;
                return Ok(RootBracket {
                    lo,
                    hi,
                    iterations,
                    exact: false,
                    resolution_limited: true,
                });
            }
        }
        iterations += 1;
    }
}

/// Bisection that runs a fixed number of halvings instead of a width
/// tolerance. Because the halving count is independent of working
/// precision, two runs at different base precisions take identical bracket
/// paths (every certified decision agrees across precisions).
pub fn bisect_halvings<F>(
    f: &F,
    a: &BigReal,
    b: &BigReal,
    halvings: u32,
    ctx: &PrecisionContext,
) -> Result<RootBracket, NumericsError>
where
    F: Fn(&BigReal, u32) -> Result<BigReal, NumericsError>,
{
    let prec = a.prec().max(b.prec()) + 1;
    let tol = b.sub(a, prec).abs().mul_2exp(-(halvings as i32));
    bisect(f, a, b, &tol, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx256() -> PrecisionContext {
        PrecisionContext::new(256)
    }

    #[test]
    fn exact_arithmetic_keeps_zero_error() {
        let a = BigReal::exact_f64(0.75, 256);
        let b = BigReal::exact_f64(0.5, 256);
        let s = a.add(&b, 256);
        assert!(s.is_exact());
        assert_eq!(s.to_f64(), 1.25);
        let p = a.mul(&b, 256);
        assert!(p.is_exact());
        assert_eq!(p.to_f64(), 0.375);
        // 0.75 / 0.5 = 1.5 is exact; 1 / 3 is not.
        let q = a.div(&b, 256);
        assert!(q.is_exact());
        assert_eq!(q.to_f64(), 1.5);
        let third = BigReal::exact_i64(1, 256).div(&BigReal::exact_i64(3, 256), 256);
        assert!(!third.is_exact());
    }

    #[test]
    fn certified_sign_cases() {
        let pos = BigReal::with_err(Float::with_val(64, 3), Float::with_val(64, 0.1));
        assert_eq!(pos.sign(), Sign::Pos);
        let zero = BigReal::zero(64);
        assert_eq!(zero.sign(), Sign::Zero);
        // value 1e-40 with error 1e-39: error dominates.
        let tiny = BigReal::with_err(
            Float::with_val(256, Float::parse("1e-40").unwrap()),
            Float::with_val(64, Float::parse("1e-39").unwrap()),
        );
        assert_eq!(tiny.sign(), Sign::Undecidable);
        let neg = BigReal::with_err(Float::with_val(64, -2), Float::with_val(64, 1));
        assert_eq!(neg.sign(), Sign::Neg);
        // Nonzero value with zero error: decided by the value.
        let exact_neg = BigReal::exact_f64(-0.125, 64);
        assert_eq!(exact_neg.sign(), Sign::Neg);
    }

    #[test]
    fn bisect_sqrt2() {
        // f(x) = x^2 - 2 on [1, 2], tolerance 1e-30.
        let f = |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
            Ok(x.mul(x, bits).sub(&BigReal::exact_i64(2, bits), bits))
        };
        let tol = BigReal::parse_decimal("1e-30", 256).unwrap();
        let root = bisect(
            &f,
            &BigReal::exact_i64(1, 256),
            &BigReal::exact_i64(2, 256),
            &tol,
            &ctx256(),
        )
        .unwrap();
        let mid = root.midpoint();
        let sqrt2 = Float::with_val(400, 2).sqrt();
        let delta = (mid.value().clone() - sqrt2).abs();
        assert!(delta < Float::with_val(64, Float::parse("1e-30").unwrap()));
        assert!(!root.exact);
    }

    #[test]
    fn bisect_identity_hits_exact_zero() {
        let f = |x: &BigReal, _bits: u32| -> Result<BigReal, NumericsError> { Ok(x.clone()) };
        let tol = BigReal::parse_decimal("1e-10", 64).unwrap();
        let root = bisect(
            &f,
            &BigReal::exact_i64(-1, 64),
            &BigReal::exact_i64(1, 64),
            &tol,
            &ctx256(),
        )
        .unwrap();
        assert!(root.exact);
        assert!(root.midpoint().value().is_zero());
        assert!(root.midpoint().is_exact());
    }

    #[test]
    fn bisect_rejects_same_sign() {
        let f = |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
            Ok(x.mul(x, bits).add(&BigReal::exact_i64(1, bits), bits))
        };
        let tol = BigReal::parse_decimal("1e-10", 64).unwrap();
        let e = bisect(
            &f,
            &BigReal::exact_i64(-1, 64),
            &BigReal::exact_i64(1, 64),
            &tol,
            &ctx256(),
        );
        assert!(matches!(e, Err(NumericsError::NoSignChange)));
    }

    #[test]
    fn exact_decimal_round_trips() {
        for s in ["0.5", "-0.140625", "3", "0.0009765625", "-17", "0"] {
            let x = BigReal::parse_decimal(s, 128).unwrap();
            assert!(x.is_exact(), "{s} should parse exactly");
            let rendered = x.exact_decimal();
            let y = BigReal::parse_decimal(&rendered, 128).unwrap();
            assert_eq!(x.cmp_value(&y), Ordering::Equal);
            assert_eq!(y.exact_decimal(), rendered);
        }
    }

    #[test]
    fn ln_propagates_error() {
        let x = BigReal::exact_f64(0.01, 256);
        let l = x.ln(256).unwrap();
        assert!(l.to_f64() < 0.0);
        assert!((l.to_f64() - 0.01f64.ln()).abs() < 1e-12);
        let bad = BigReal::exact_f64(-1.0, 256);
        assert!(bad.ln(256).is_err());
        // Undecidably-positive input is rejected too.
        let fuzzy = BigReal::with_err(Float::with_val(64, 1e-10), Float::with_val(64, 1.0));
        assert!(fuzzy.ln(256).is_err());
    }

    #[test]
    fn midpoints_are_exact() {
        let a = BigReal::parse_decimal("0.1", 256).unwrap();
        let b = BigReal::parse_decimal("0.3", 256).unwrap();
        let m = exact_midpoint(&a, &b);
        assert!(m.is_exact());
        // Wide enough to hold the sum of two 256-bit values exactly.
        let expect = Float::with_val(400, a.value() + b.value());
        assert_eq!(m.value(), &(expect >> 1));
        // Zero endpoints take the shortcut path.
        let z = exact_midpoint(&BigReal::zero(64), &BigReal::exact_i64(1, 64));
        assert!(z.is_exact());
        assert_eq!(z.to_f64(), 0.5);
    }
}
