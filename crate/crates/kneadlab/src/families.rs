//! The two one-parameter families of bimodal interval maps.
//!
//! Both families fix the endpoints (`g(0) = 0`, `g(1) = 1`), keep the first
//! critical value pinned at 1, and move the second critical value with the
//! parameter: at `gamma = 0` the second critical value is 0 (the code of the
//! second critical point is then `1` forever), and it increases with
//! `gamma`. Both maps are polynomials with negative Schwarzian derivative,
//! so derivative growth along orbits is governed by the critical orbits
//! alone.
//!
//! - The **cubic** family has quadratic (order-2) critical points and, at
//!   `gamma = 0`, exactly dyadic coefficients: `16x^3 - 24x^2 + 9x`.
//! - The **degree-7** family is built from the odd polynomial
//!   `t(x) = x^7/7 - 3x^5/5 + x^3 - x`, whose derivative `(x^2-1)^3`
//!   vanishes to third order at its turning points, giving order-4
//!   (quartic) critical points and a markedly different local geometry.
//!
//! Maps are stored as an exact-rational-style pair: a numerator polynomial
//! (with zero constant term, so `g(0) = 0` holds exactly) over a scalar
//! denominator. All coefficient arithmetic tracks error bounds; with an
//! exact dyadic parameter the cubic's coefficients are exact, so orbits
//! that should land exactly on a critical or fixed point do so exactly.

use crate::numerics::{bisect, BigReal, NumericsError, PrecisionContext, Sign};
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Mutex;

/// Largest accepted parameter value in either family.
pub const GAMMA_MAX: f64 = 1.0;

/// Guard bits added to the working precision for coefficient construction.
const COEFF_GUARD: u32 = 32;

/// Errors from map construction and pointwise queries.
#[derive(Debug, thiserror::Error)]
pub enum FamilyError {
    #[error("parameter {gamma} outside [0, {max}] for family {family}")]
    ParamOutOfRange {
        family: Family,
        gamma: String,
        max: f64,
    },
    #[error("derivative sign undecidable at the query point (too close to a critical point)")]
    DerivativeUndecidable,
    #[error("unknown family name {0:?} (expected \"cubic\" or \"deg7\")")]
    UnknownFamily(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which one-parameter family a map belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Cubic maps with order-2 critical points.
    Cubic,
    /// Degree-7 maps with order-4 critical points.
    Degree7,
}

impl Family {
    /// Order of the interior critical points (both critical points of a
    /// family share it): the map behaves like `(x - c)^order` near each.
    pub fn critical_order(self) -> u32 {
        match self {
            Family::Cubic => 2,
            Family::Degree7 => 4,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Cubic => write!(f, "cubic"),
            Family::Degree7 => write!(f, "deg7"),
        }
    }
}

impl FromStr for Family {
    type Err = FamilyError;
    fn from_str(s: &str) -> Result<Self, FamilyError> {
        match s {
            "cubic" => Ok(Family::Cubic),
            "deg7" | "degree7" => Ok(Family::Degree7),
            other => Err(FamilyError::UnknownFamily(other.to_string())),
        }
    }
}

/// Evaluate a polynomial given by coefficients in increasing degree
/// (Horner form).
pub fn eval_poly(coeffs: &[BigReal], x: &BigReal, prec: u32) -> BigReal {
    let mut acc = BigReal::zero(prec);
    for c in coeffs.iter().rev() {
        acc = acc.mul(x, prec).add(c, prec);
    }
    acc
}

/// Coefficients of the derivative polynomial.
pub fn poly_deriv(coeffs: &[BigReal], prec: u32) -> Vec<BigReal> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c.mul(&BigReal::exact_i64(k as i64, prec), prec))
        .collect()
}

/// Coefficients of `p(a*x + b)` from the coefficients of `p`, by binomial
/// expansion: `result[j] = sum_k coeffs[k] * C(k, j) * a^j * b^(k-j)`.
pub fn compose_affine(coeffs: &[BigReal], a: &BigReal, b: &BigReal, prec: u32) -> Vec<BigReal> {
    let deg = coeffs.len();
    if deg == 0 {
        return Vec::new();
    }
    // Binomial coefficients stay tiny for the degrees used here (at most 7).
    fn pascal(k: usize, j: usize) -> i64 {
        if j > k {
            return 0;
        }
        let mut c = 1i64;
        for i in 0..j {
            c = c * (k - i) as i64 / (i + 1) as i64;
        }
        c
    }
    let a_pow: Vec<BigReal> = (0..deg).map(|j| a.pow_u32(j as u32, prec)).collect();
    let b_pow: Vec<BigReal> = (0..deg).map(|m| b.pow_u32(m as u32, prec)).collect();
    (0..deg)
        .map(|j| {
            let mut acc = BigReal::zero(prec);
            for (k, c) in coeffs.iter().enumerate().skip(j) {
                let cb = pascal(k, j);
                let term = c
                    .mul(&BigReal::exact_i64(cb, prec), prec)
                    .mul(&b_pow[k - j], prec);
                acc = acc.add(&term, prec);
            }
            acc.mul(&a_pow[j], prec)
        })
        .collect()
}

/// Schwarzian derivative of a polynomial at a point:
/// `p'''/p' - (3/2)(p''/p')^2`. Scale-invariant, so numerator coefficients
/// may be used directly even when the map divides by a scalar.
pub fn schwarzian_of_poly(
    coeffs: &[BigReal],
    x: &BigReal,
    prec: u32,
) -> Result<BigReal, FamilyError> {
    let d1 = poly_deriv(coeffs, prec);
    let d2 = poly_deriv(&d1, prec);
    let d3 = poly_deriv(&d2, prec);
    let v1 = eval_poly(&d1, x, prec);
    if !matches!(v1.sign(), Sign::Pos | Sign::Neg) {
        return Err(FamilyError::DerivativeUndecidable);
    }
    let v2 = eval_poly(&d2, x, prec);
    let v3 = eval_poly(&d3, x, prec);
    let q3 = v3.div(&v1, prec);
    let q2 = v2.div(&v1, prec);
    let three_halves = BigReal::from_ratio(3, 2, prec);
    Ok(q3.sub(&q2.mul(&q2, prec).mul(&three_halves, prec), prec))
}

/// Integer-coefficient form of the odd base polynomial for the degree-7
/// family: `u(x) = 5x^7 - 21x^5 + 35x^3 - 35x = 35 t(x)` where
/// `t(x) = x^7/7 - 3x^5/5 + x^3 - x` has derivative `(x^2 - 1)^3`.
fn base7_coeffs(prec: u32) -> Vec<BigReal> {
    [0i64, -35, 0, 35, 0, -21, 0, 5]
        .iter()
        .map(|&c| BigReal::exact_i64(c, prec))
        .collect()
}

/// `x0`: the unique root of `u(x) = 16` in (3/2, 2), i.e. the abscissa
/// where the odd base polynomial climbs back up to its local-max value
/// `t(-1) = 16/35`. Memoized per working precision.
static X0_CACHE: Lazy<Mutex<HashMap<u32, BigReal>>> = Lazy::new(|| Mutex::new(HashMap::new()));

pub fn x0_at(prec: u32) -> BigReal {
    if let Some(v) = X0_CACHE.lock().unwrap().get(&prec) {
        return v.clone();
    }
    let u = base7_coeffs(prec + 16);
    let sixteen = BigReal::exact_i64(16, prec + 16);
    let f = move |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
        Ok(eval_poly(&u, x, bits).sub(&sixteen, bits))
    };
    let ctx = PrecisionContext::new(prec + 16);
    let lo = BigReal::from_ratio(3, 2, prec + 16);
    let hi = BigReal::exact_i64(2, prec + 16);
    let tol = BigReal::exact_i64(1, prec + 16).mul_2exp(-(prec as i32 + 8));
    let bracket = bisect(&f, &lo, &hi, &tol, &ctx).expect("root bracket for x0");
    let mid = bracket.midpoint();
    X0_CACHE.lock().unwrap().insert(prec, mid.clone());
    mid
}

/// A fixed member of one of the two families: `g(x) = num(x) / den` with
/// `num(0) = 0`, ready for evaluation at certified precision.
#[derive(Debug, Clone)]
pub struct BimodalMap {
    family: Family,
    gamma: BigReal,
    prec: u32,
    /// Numerator coefficients in increasing degree; constant term exactly 0.
    num: Vec<BigReal>,
    dnum: Vec<BigReal>,
    d2num: Vec<BigReal>,
    d3num: Vec<BigReal>,
    den: BigReal,
    c1: BigReal,
    c2: BigReal,
}

impl BimodalMap {
    /// Build the family member at parameter `gamma` (must lie in
    /// `[0, GAMMA_MAX]`), with coefficients carried at `prec` working bits.
    pub fn new(family: Family, gamma: &BigReal, prec: u32) -> Result<Self, FamilyError> {
        let cp = prec + COEFF_GUARD;
        let out_of_range = |g: &BigReal| FamilyError::ParamOutOfRange {
            family,
            gamma: g.display_decimal(12),
            max: GAMMA_MAX,
        };
        if gamma.sign() == Sign::Neg {
            return Err(out_of_range(gamma));
        }
        let max = BigReal::exact_f64(GAMMA_MAX, cp);
        if gamma.sub(&max, cp).sign() == Sign::Pos {
            return Err(out_of_range(gamma));
        }
        let gamma = gamma.with_prec(cp);
        let (num, den, c1, c2) = match family {
            Family::Cubic => {
                // a = 4 + gamma, b = -(2 + gamma):
                // num = a^3 x^3 + 3a^2 b x^2 + 3a(b^2 - 1) x,
                // den = (gamma+1)^2 (gamma+4),
                // criticals at (1+gamma)/(4+gamma) and (3+gamma)/(4+gamma).
                let a = gamma.add(&BigReal::exact_i64(4, cp), cp);
                let b = gamma.add(&BigReal::exact_i64(2, cp), cp).neg();
                let three = BigReal::exact_i64(3, cp);
                let n3 = a.pow_u32(3, cp);
                let n2 = a.pow_u32(2, cp).mul(&b, cp).mul(&three, cp);
                let n1 = a
                    .mul(&b.mul(&b, cp).sub(&BigReal::exact_i64(1, cp), cp), cp)
                    .mul(&three, cp);
                let num = vec![BigReal::zero(cp), n1, n2, n3];
                let gp1 = gamma.add(&BigReal::exact_i64(1, cp), cp);
                let den = gp1.mul(&gp1, cp).mul(&a, cp);
                let c1 = gp1.div(&a, cp);
                let c2 = gamma.add(&three, cp).div(&a, cp);
                (num, den, c1, c2)
            }
            Family::Degree7 => {
                // Conjugate the odd base polynomial by the affine change
                // r(x) = Ax + B with A = 2 x0 + gamma, B = -(x0 + gamma),
                // then normalize so 0 and 1 are fixed and the first
                // critical value is 1:
                //   g(x) = (u(r(x)) - u(B)) / (16 - u(B)).
                let x0 = x0_at(prec);
                let a_aff = x0.mul_2exp(1).add(&gamma, cp);
                let b_aff = x0.add(&gamma, cp).neg();
                let u = base7_coeffs(cp);
                let mut num = compose_affine(&u, &a_aff, &b_aff, cp);
                // The constant term is u(B) - u(B) = 0 identically; store
                // it exactly rather than as a difference of rounded values.
                num[0] = BigReal::zero(cp);
                let u_at_b = eval_poly(&u, &b_aff, cp);
                let den = BigReal::exact_i64(16, cp).sub(&u_at_b, cp);
                let one = BigReal::exact_i64(1, cp);
                let shifted = x0.add(&gamma, cp);
                let c1 = shifted.sub(&one, cp).div(&a_aff, cp);
                let c2 = shifted.add(&one, cp).div(&a_aff, cp);
                (num, den, c1, c2)
            }
        };
        let dnum = poly_deriv(&num, cp);
        let d2num = poly_deriv(&dnum, cp);
        let d3num = poly_deriv(&d2num, cp);
        Ok(BimodalMap {
            family,
            gamma,
            prec,
            num,
            dnum,
            d2num,
            d3num,
            den,
            c1,
            c2,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn gamma(&self) -> &BigReal {
        &self.gamma
    }

    /// Working precision the coefficients were constructed for.
    pub fn prec(&self) -> u32 {
        self.prec
    }

    /// Left critical point (end of the first increasing lap).
    pub fn c1(&self) -> &BigReal {
        &self.c1
    }

    /// Right critical point (end of the decreasing lap).
    pub fn c2(&self) -> &BigReal {
        &self.c2
    }

    /// Evaluate `coeffs(x)/den` in mean-value form: the candidate value is
    /// computed at the exact center of `x`, and the error is widened by
    /// `x.err` times an interval bound on the next derivative over the
    /// whole error interval. Direct interval evaluation would amplify the
    /// error by the coefficient magnitude sum at every step; the
    /// mean-value form amplifies by the local derivative instead, which is
    /// what keeps long certified orbits meaningful.
    fn eval_rational(
        &self,
        coeffs: &[BigReal],
        dcoeffs: Option<&[BigReal]>,
        x: &BigReal,
        prec: u32,
    ) -> BigReal {
        let center = eval_poly(coeffs, &x.value_part(), prec).div(&self.den, prec);
        if x.is_exact() {
            return center;
        }
        let Some(dc) = dcoeffs else {
            return eval_poly(coeffs, x, prec).div(&self.den, prec);
        };
        let dbound = eval_poly(dc, x, prec).div(&self.den, prec).upper_abs();
        let delta = dbound.mul(&x.err_real(), prec).upper_abs();
        center.widen_err(&delta)
    }

    /// `g(x)`.
    pub fn eval(&self, x: &BigReal, prec: u32) -> BigReal {
        self.eval_rational(&self.num, Some(&self.dnum), x, prec)
    }

    /// `g'(x)`.
    pub fn deriv(&self, x: &BigReal, prec: u32) -> BigReal {
        self.eval_rational(&self.dnum, Some(&self.d2num), x, prec)
    }

    /// `g''(x)`.
    pub fn deriv2(&self, x: &BigReal, prec: u32) -> BigReal {
        self.eval_rational(&self.d2num, Some(&self.d3num), x, prec)
    }

    /// `g'''(x)`.
    pub fn deriv3(&self, x: &BigReal, prec: u32) -> BigReal {
        self.eval_rational(&self.d3num, None, x, prec)
    }

    /// Schwarzian derivative at `x` (undefined at critical points).
    pub fn schwarzian(&self, x: &BigReal, prec: u32) -> Result<BigReal, FamilyError> {
        schwarzian_of_poly(&self.num, x, prec)
    }
}

/// Convenience constructor used throughout the tools.
pub fn make_map(family: Family, gamma: &BigReal, prec: u32) -> Result<BimodalMap, FamilyError> {
    BimodalMap::new(family, gamma, prec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact(v: f64) -> BigReal {
        BigReal::exact_f64(v, 256)
    }

    #[test]
    fn cubic_at_zero_is_exactly_dyadic() {
        let g = BimodalMap::new(Family::Cubic, &BigReal::zero(256), 256).unwrap();
        // Critical points 1/4 and 3/4, exactly.
        assert!(g.c1().is_exact());
        assert_eq!(g.c1().to_f64(), 0.25);
        assert!(g.c2().is_exact());
        assert_eq!(g.c2().to_f64(), 0.75);
        // Values: g(x) = 16x^3 - 24x^2 + 9x.
        for (x, want) in [
            (0.0, 0.0),
            (1.0, 1.0),
            (0.25, 1.0),  // first critical value
            (0.75, 0.0),  // second critical value
            (0.5, 0.5),   // interior fixed point
        ] {
            let y = g.eval(&exact(x), 256);
            assert!(y.is_exact(), "g({x}) should be exact");
            assert_eq!(y.to_f64(), want, "g({x})");
        }
        // Derivatives: g'(x) = 48x^2 - 48x + 9.
        for (x, want) in [(0.0, 9.0), (1.0, 9.0), (0.5, -3.0), (0.25, 0.0), (0.75, 0.0)] {
            let d = g.deriv(&exact(x), 256);
            assert!(d.is_exact(), "g'({x}) should be exact");
            assert_eq!(d.to_f64(), want, "g'({x})");
        }
    }

    #[test]
    fn cubic_fixes_endpoints_for_dyadic_parameters() {
        for gnum in [0i64, 1, 7, 32, 64] {
            let gamma = BigReal::from_ratio(gnum, 64, 256);
            assert!(gamma.is_exact());
            let g = BimodalMap::new(Family::Cubic, &gamma, 256).unwrap();
            let at0 = g.eval(&BigReal::zero(256), 256);
            assert!(at0.is_exact() && at0.value().is_zero());
            let at1 = g.eval(&BigReal::exact_i64(1, 256), 256);
            assert!(at1.is_exact(), "gamma={gnum}/64: g(1) exact");
            assert_eq!(at1.to_f64(), 1.0);
            // First critical value pinned at 1.
            let v1 = g.eval(g.c1(), 300);
            let diff = v1.sub(&BigReal::exact_i64(1, 300), 300);
            assert!(
                diff.abs().cmp_value(&BigReal::exact_f64(1e-60, 64)) == std::cmp::Ordering::Less,
                "critical value 1 at gamma={gnum}/64"
            );
        }
    }

    #[test]
    fn degree7_constants_at_zero() {
        let x0 = x0_at(256);
        // Independent check of the defining equation at a loose tolerance:
        // 5 x0^7 - 21 x0^5 + 35 x0^3 - 35 x0 = 16, x0 in (3/2, 2).
        let v = x0.to_f64();
        assert!((1.5..2.0).contains(&v));
        let resid = 5.0 * v.powi(7) - 21.0 * v.powi(5) + 35.0 * v.powi(3) - 35.0 * v - 16.0;
        assert!(resid.abs() < 1e-9, "u(x0) - 16 = {resid}");

        let h = BimodalMap::new(Family::Degree7, &BigReal::zero(256), 256).unwrap();
        // g(0) = 0 exactly by construction.
        let at0 = h.eval(&BigReal::zero(256), 256);
        assert!(at0.is_exact() && at0.value().is_zero());
        // g(1) = 1 up to certified error.
        let at1 = h.eval(&BigReal::exact_i64(1, 256), 256);
        let d1 = at1.sub(&BigReal::exact_i64(1, 256), 256).abs();
        assert!(d1.cmp_value(&BigReal::exact_f64(1e-50, 64)) == std::cmp::Ordering::Less);
        // Critical points near 0.2032 and 0.7968.
        assert!((h.c1().to_f64() - 0.2032).abs() < 1e-3);
        assert!((h.c2().to_f64() - 0.7968).abs() < 1e-3);
        // Second critical value is 0 at gamma = 0.
        let v2 = h.eval(h.c2(), 256).abs();
        assert!(v2.cmp_value(&BigReal::exact_f64(1e-50, 64)) == std::cmp::Ordering::Less);
        // Midpoint derivative is -(35/16) x0; endpoint derivative is
        // (35/16) x0 (x0^2 - 1)^3.
        let dm = h.deriv(&exact(0.5), 256).to_f64();
        let want_mid = -35.0 / 16.0 * v;
        assert!((dm - want_mid).abs() < 1e-9, "mid slope {dm} vs {want_mid}");
        let d0 = h.deriv(&BigReal::zero(256), 256).to_f64();
        let want_end = 35.0 / 16.0 * v * (v * v - 1.0).powi(3);
        assert!((d0 - want_end).abs() < 1e-6, "end slope {d0} vs {want_end}");
        assert!(d0 > 20.0 && d0 < 26.0);
    }

    #[test]
    fn x0_cache_is_precision_consistent() {
        let a = x0_at(128);
        let b = x0_at(320);
        let diff = a.sub(&b, 320).abs();
        assert!(diff.cmp_value(&BigReal::exact_f64(2f64.powi(-100), 64)) == std::cmp::Ordering::Less);
    }

    #[test]
    fn schwarzian_of_unit_critical_cubic() {
        // q(x) = x^3 - 3x has critical points at ±1 and Schwarzian
        // -(4x^2 + 2)/(x^2 - 1)^2; at 0 this is exactly -2.
        let coeffs = vec![
            BigReal::zero(256),
            BigReal::exact_i64(-3, 256),
            BigReal::zero(256),
            BigReal::exact_i64(1, 256),
        ];
        let s0 = schwarzian_of_poly(&coeffs, &BigReal::zero(256), 256).unwrap();
        assert!(s0.is_exact());
        assert_eq!(s0.to_f64(), -2.0);
        for x in [0.25f64, 0.5, -0.375] {
            let s = schwarzian_of_poly(&coeffs, &exact(x), 256).unwrap().to_f64();
            let want = -(4.0 * x * x + 2.0) / (x * x - 1.0).powi(2);
            assert!((s - want).abs() < 1e-12, "S q({x}) = {s}, want {want}");
        }
        // At a critical point the Schwarzian is rejected.
        assert!(matches!(
            schwarzian_of_poly(&coeffs, &BigReal::exact_i64(1, 256), 256),
            Err(FamilyError::DerivativeUndecidable)
        ));
    }

    #[test]
    fn schwarzian_is_affine_invariant() {
        // S(p ∘ A)(x) = (Sp)(A(x)) * A'(x)^2 for affine A.
        let gamma = BigReal::from_ratio(1, 64, 256);
        let g = BimodalMap::new(Family::Cubic, &gamma, 256).unwrap();
        let a = BigReal::exact_f64(0.5, 256);
        let b = BigReal::exact_f64(0.25, 256);
        let composed = compose_affine(&g.num, &a, &b, 288);
        for x in [0.125f64, 0.34375, 0.65625] {
            let xe = exact(x);
            let lhs = schwarzian_of_poly(&composed, &xe, 288).unwrap();
            let ax = a.mul(&xe, 288).add(&b, 288);
            let rhs = schwarzian_of_poly(&g.num, &ax, 288)
                .unwrap()
                .mul(&a.mul(&a, 288), 288);
            let diff = lhs.sub(&rhs, 288).abs();
            assert!(
                diff.cmp_value(&BigReal::exact_f64(1e-40, 64)) == std::cmp::Ordering::Less,
                "affine invariance at {x}"
            );
        }
    }

    #[test]
    fn schwarzian_is_negative_across_both_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 50 {
            let fam = if rng.gen_bool(0.5) { Family::Cubic } else { Family::Degree7 };
            let gamma = BigReal::from_ratio(rng.gen_range(0..=64), 64, 256);
            let g = BimodalMap::new(fam, &gamma, 256).unwrap();
            let x = BigReal::from_ratio(rng.gen_range(1..512), 512, 256);
            // Skip points too close to a critical point for a certified
            // derivative sign.
            let near1 = x.sub(g.c1(), 256).abs().to_f64() < 1.0 / 32.0;
            let near2 = x.sub(g.c2(), 256).abs().to_f64() < 1.0 / 32.0;
            if near1 || near2 {
                continue;
            }
            let s = g.schwarzian(&x, 256).unwrap();
            assert_eq!(s.sign(), Sign::Neg, "{fam} gamma={} x={}", gamma.to_f64(), x.to_f64());
            checked += 1;
        }
    }

    #[test]
    fn base_polynomial_is_odd() {
        let u = base7_coeffs(256);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = BigReal::from_ratio(rng.gen_range(-256..=256), 128, 256);
            let pos = eval_poly(&u, &x, 256);
            let neg = eval_poly(&u, &x.neg(), 256);
            let s = pos.add(&neg, 256);
            assert!(s.is_exact() && s.value().is_zero(), "u({}) + u(-{}) = 0", x.to_f64(), x.to_f64());
        }
    }

    #[test]
    fn monotone_laps_on_a_grid() {
        for fam in [Family::Cubic, Family::Degree7] {
            for gnum in [0i64, 1, 32, 64] {
                let gamma = BigReal::from_ratio(gnum, 64, 192);
                let g = BimodalMap::new(fam, &gamma, 192).unwrap();
                let c1 = g.c1().to_f64();
                let c2 = g.c2().to_f64();
                for i in 0..=64 {
                    let x = BigReal::from_ratio(i, 64, 192);
                    let xf = i as f64 / 64.0;
                    if (xf - c1).abs() < 1.0 / 32.0 || (xf - c2).abs() < 1.0 / 32.0 {
                        continue;
                    }
                    let d = g.deriv(&x, 192);
                    let want = if xf < c1 || xf > c2 { Sign::Pos } else { Sign::Neg };
                    assert_eq!(d.sign(), want, "{fam} gamma={gnum}/64 slope at {xf}");
                    // Range check: 0 <= g(x) <= 1 within certified error.
                    let y = g.eval(&x, 192);
                    let yf = y.to_f64();
                    assert!((-1e-30..=1.0 + 1e-30).contains(&yf), "{fam} g({xf}) = {yf}");
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let too_big = BigReal::exact_f64(1.5, 128);
        assert!(matches!(
            BimodalMap::new(Family::Cubic, &too_big, 128),
            Err(FamilyError::ParamOutOfRange { .. })
        ));
        let negative = BigReal::exact_f64(-0.25, 128);
        assert!(matches!(
            BimodalMap::new(Family::Degree7, &negative, 128),
            Err(FamilyError::ParamOutOfRange { .. })
        ));
    }
}
