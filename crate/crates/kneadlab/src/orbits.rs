//! Orbit iteration for a fixed map: itineraries and kneading data with
//! certified symbol decisions, distinguished orbits (the interior fixed
//! point of the decreasing lap, the three period-two cycles), pullback
//! realization of points with a prescribed code, and derivative
//! diagnostics along orbits.

use crate::families::{BimodalMap, FamilyError};
use crate::numerics::{bisect, BigReal, NumericsError, PrecisionContext, Sign};
use crate::symbolic::{Itinerary, ItinerarySeq, Symbol, SymbolicError, Tail};
use std::cmp::Ordering;

/// Errors from orbit-level computations.
#[derive(Debug, thiserror::Error)]
pub enum OrbitError {
    /// An orbit point could not be placed on a definite side of a critical
    /// point at the available precision.
    #[error("symbol at step {step} undecidable at the available precision")]
    AmbiguousSymbol { step: usize },
    /// A pullback step had no certified preimage in the requested lap.
    #[error("no certified preimage in lap {lap} at pullback step {step}")]
    BranchUnreachable { lap: Symbol, step: usize },
    /// The realized point's observed code disagrees with the target.
    #[error("realized point's code deviates from the target at position {at}")]
    RealizeMismatch { at: usize },
    /// The target code is certified inadmissible for this map.
    #[error("target code is inadmissible for this map's kneading sequence")]
    Inadmissible,
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Which lap or critical point a single point lies on, certified.
fn classify(map: &BimodalMap, x: &BigReal, prec: u32) -> Result<Symbol, OrbitError> {
    match x.sub(map.c1(), prec).sign() {
        Sign::Neg => Ok(Symbol::I1),
        Sign::Zero => Ok(Symbol::C1),
        Sign::Undecidable => Err(OrbitError::AmbiguousSymbol { step: 0 }),
        Sign::Pos => match x.sub(map.c2(), prec).sign() {
            Sign::Neg => Ok(Symbol::I2),
            Sign::Zero => Ok(Symbol::C2),
            Sign::Pos => Ok(Symbol::I3),
            Sign::Undecidable => Err(OrbitError::AmbiguousSymbol { step: 0 }),
        },
    }
}

/// The range of symbols a point might have, inclusive in the spatial
/// order, when signs against the critical points are only partially
/// certified. A pinched range (equal endpoints) is a decided symbol.
fn classify_range(map: &BimodalMap, x: &BigReal, prec: u32) -> (Symbol, Symbol) {
    let s1 = x.sub(map.c1(), prec).sign();
    match s1 {
        Sign::Neg => (Symbol::I1, Symbol::I1),
        Sign::Zero => (Symbol::C1, Symbol::C1),
        Sign::Pos => match x.sub(map.c2(), prec).sign() {
            Sign::Neg => (Symbol::I2, Symbol::I2),
            Sign::Zero => (Symbol::C2, Symbol::C2),
            Sign::Pos => (Symbol::I3, Symbol::I3),
            Sign::Undecidable => (Symbol::I2, Symbol::I3),
        },
        Sign::Undecidable => match x.sub(map.c2(), prec).sign() {
            Sign::Neg => (Symbol::I1, Symbol::I2),
            _ => (Symbol::I1, Symbol::I3),
        },
    }
}

/// Maximum steps an itinerary comparison will walk past the target's head
/// before giving up on a repeating tail.
const CMP_TAIL_GUARD: usize = 256;

/// Compare the code of `x` against a target using only certified
/// information. Undecided symbols still decide the comparison when every
/// candidate symbol falls on the same side of the target symbol, so points
/// that sit exactly on a critical point (never certifiable by interval
/// arithmetic) compare correctly against targets that branch away earlier.
///
/// Returns `Ok(None)` when the available precision cannot decide.
pub fn itinerary_cmp_target(
    map: &BimodalMap,
    x: &BigReal,
    target: &ItinerarySeq,
    prec: u32,
) -> Result<Option<Ordering>, OrbitError> {
    let mut cur = x.with_prec(prec);
    let mut sign = 1i8;
    let limit = target.head_len() + CMP_TAIL_GUARD;
    for n in 0..limit {
        let t = match target.symbol_at(n) {
            Some(t) => t,
            // Target exhausted without disagreement: equal as far as the
            // target constrains (prefix convention).
            None => return Ok(Some(Ordering::Equal)),
        };
        let (lo, hi) = classify_range(map, &cur, prec);
        if hi.rank() < t.rank() {
            return Ok(Some(if sign > 0 { Ordering::Less } else { Ordering::Greater }));
        }
        if lo.rank() > t.rank() {
            return Ok(Some(if sign > 0 { Ordering::Greater } else { Ordering::Less }));
        }
        if lo != hi {
            // The candidate range straddles the target symbol.
            return Ok(None);
        }
        // Decided symbol equal to the target's.
        if t.is_critical() {
            // Both observed and target end at the same critical point
            // (a decided critical symbol requires an exact hit).
            return Ok(Some(Ordering::Equal));
        }
        sign *= t.sign();
        cur = map.eval(&cur, prec);
    }
    Ok(None)
}

/// The itinerary of `x` under the map, followed for at most `depth`
/// symbols.
///
/// Resolution happens in three ways: the orbit lands exactly on a critical
/// point (certified zero distance — possible only when both the orbit
/// point and the critical point are error-free), giving a finite code; the
/// orbit lands exactly on a fixed lap point (successive points identical
/// and error-free), giving an eventually-constant code; or `depth` symbols
/// are emitted without resolution, giving a plain prefix.
pub fn itinerary(
    map: &BimodalMap,
    x: &BigReal,
    depth: usize,
    prec: u32,
) -> Result<Itinerary, OrbitError> {
    let mut head: Vec<Symbol> = Vec::new();
    let mut cur = x.with_prec(prec);
    for step in 0..depth {
        let sym = classify(map, &cur, prec)
            .map_err(|_| OrbitError::AmbiguousSymbol { step })?;
        if sym.is_critical() {
            head.push(sym);
            return Ok(Itinerary::Seq(ItinerarySeq::finite(head)?));
        }
        let next = map.eval(&cur, prec);
        if cur.is_exact() && next.is_exact() && cur.cmp_value(&next) == Ordering::Equal {
            // Exact fixed point: the code is `sym` forever from here.
            return Ok(Itinerary::Seq(ItinerarySeq::repeating(head, sym)?));
        }
        head.push(sym);
        cur = next;
    }
    Ok(Itinerary::Prefix(head))
}

/// The kneading sequence data of the map: the itinerary of the second
/// critical value `g(c2)`. (The first critical value is pinned at the
/// fixed endpoint 1, so its code is constant and carries no information.)
pub fn kneading(map: &BimodalMap, depth: usize, prec: u32) -> Result<Itinerary, OrbitError> {
    let v = map.eval(map.c2(), prec);
    itinerary(map, &v, depth, prec)
}

/// The unique fixed point of the decreasing lap, as a certified bracket
/// midpoint (exact when the bisection lands on it exactly).
pub fn fixed_point_r(map: &BimodalMap, prec: u32) -> Result<BigReal, OrbitError> {
    let f = |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
        Ok(map.eval(x, bits).sub(x, bits))
    };
    let ctx = PrecisionContext::new(prec);
    let tol = BigReal::exact_i64(1, prec).mul_2exp(-(prec.saturating_sub(32) as i32));
    let bracket = bisect(&f, map.c1(), map.c2(), &tol, &ctx)?;
    Ok(bracket.midpoint())
}

/// `|g'(x)|` at the distinguished point of each lap: the left endpoint 0
/// for the first lap, the interior fixed point for the middle lap, and the
/// right endpoint 1 for the last lap.
pub fn lap_multiplier(map: &BimodalMap, lap: Symbol, prec: u32) -> Result<BigReal, OrbitError> {
    let x = match lap {
        Symbol::I1 => BigReal::zero(prec),
        Symbol::I2 => fixed_point_r(map, prec)?,
        Symbol::I3 => BigReal::exact_i64(1, prec),
        c => {
            return Err(OrbitError::Symbolic(SymbolicError::CriticalTail(c)));
        }
    };
    Ok(map.deriv(&x, prec).abs())
}

/// Invert the map within one lap: the unique `x` in the lap with
/// `g(x) = y`. Fails when `y` is certifiably outside the lap's image.
pub fn invert_in_lap(
    map: &BimodalMap,
    lap: Symbol,
    y: &BigReal,
    prec: u32,
) -> Result<BigReal, OrbitError> {
    let zero = BigReal::zero(prec);
    let one = BigReal::exact_i64(1, prec);
    let (lo, hi) = match lap {
        Symbol::I1 => (&zero, map.c1()),
        Symbol::I2 => (map.c1(), map.c2()),
        Symbol::I3 => (map.c2(), &one),
        c => return Err(OrbitError::Symbolic(SymbolicError::CriticalTail(c))),
    };
    let f = |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
        Ok(map.eval(x, bits).sub(y, bits))
    };
    let ctx = PrecisionContext::new(prec);
    let tol = BigReal::exact_i64(1, prec).mul_2exp(-(prec.saturating_sub(32) as i32));
    match bisect(&f, lo, hi, &tol, &ctx) {
        Ok(bracket) => Ok(bracket.midpoint()),
        Err(NumericsError::NoSignChange) => Err(OrbitError::BranchUnreachable { lap, step: 0 }),
        Err(e) => Err(e.into()),
    }
}

/// Realize a point with the prescribed code by pulling a terminal anchor
/// back through the code's branches.
///
/// The anchor is determined by how the code ends: a terminal critical
/// symbol anchors at that critical point; a constant tail anchors at the
/// fixed point of that lap (0, the interior fixed point, or 1). Each
/// preceding symbol then names the branch for one backward step. Inverse
/// branches contract, so the pullback is numerically stable.
///
/// When `check_against` is supplied (the map's kneading sequence, if
/// known), the target is first tested for admissibility; a certified
/// violation is rejected. The realized point's observed code is verified
/// against the target before returning.
pub fn realize_point(
    map: &BimodalMap,
    target: &ItinerarySeq,
    check_against: Option<&ItinerarySeq>,
    prec: u32,
) -> Result<BigReal, OrbitError> {
    if let Some(k) = check_against {
        if !target.is_admissible(k) {
            return Err(OrbitError::Inadmissible);
        }
    }
    let head = target.head();
    let (branches, anchor): (&[Symbol], BigReal) = match target.tail() {
        Tail::Finite => match head.last() {
            Some(&c) if c.is_critical() => {
                let a = if c == Symbol::C1 {
                    map.c1().clone()
                } else {
                    map.c2().clone()
                };
                (&head[..head.len() - 1], a)
            }
            _ => {
                // A bare lap word pins no point; anchor at the interior
                // fixed point of the final lap reached… there is no such
                // canonical choice, so reject.
                return Err(OrbitError::Symbolic(SymbolicError::BadLiteral(
                    target.to_string(),
                )));
            }
        },
        Tail::Repeat(Symbol::I1) => (head, BigReal::zero(prec)),
        Tail::Repeat(Symbol::I3) => (head, BigReal::exact_i64(1, prec)),
        Tail::Repeat(Symbol::I2) => (head, fixed_point_r(map, prec)?),
        Tail::Repeat(c) => return Err(OrbitError::Symbolic(SymbolicError::CriticalTail(c))),
    };
    let mut x = anchor;
    for (idx, &lap) in branches.iter().enumerate().rev() {
        x = invert_in_lap(map, lap, &x, prec).map_err(|e| match e {
            OrbitError::BranchUnreachable { lap, .. } => {
                OrbitError::BranchUnreachable { lap, step: idx }
            }
            other => other,
        })?;
    }
    // Verify the observed code against the target as far as it is pinned.
    // A finite target's terminal critical symbol is excluded: the realized
    // point is only approximate, so "exactly critical" is never certifiable
    // from the orbit — the anchor itself carries that guarantee.
    let verify_len = match target.tail() {
        Tail::Finite => head.len() - 1,
        Tail::Repeat(_) => head.len() + 8,
    };
    let observed = itinerary(map, &x, verify_len, prec)?;
    let want = target.prefix(verify_len);
    let got = observed.prefix(verify_len);
    for (i, w) in want.iter().enumerate() {
        match got.get(i) {
            Some(g) if g == w => {}
            _ => return Err(OrbitError::RealizeMismatch { at: i }),
        }
    }
    Ok(x)
}

/// Points and accumulated derivatives along an orbit.
///
/// `points[n]` is the n-th iterate of the starting point (so `points[0]`
/// is the start itself) and `deriv_products[n] = |Dg^n|` along the orbit,
/// with `deriv_products[0] = 1`.
#[derive(Debug, Clone)]
pub struct OrbitDiagnostics {
    pub points: Vec<BigReal>,
    pub deriv_products: Vec<BigReal>,
}

/// Follow an orbit for `depth` steps, recording points and accumulated
/// absolute derivative products.
pub fn orbit_diagnostics(
    map: &BimodalMap,
    start: &BigReal,
    depth: usize,
    prec: u32,
) -> OrbitDiagnostics {
    let mut points = Vec::with_capacity(depth + 1);
    let mut deriv_products = Vec::with_capacity(depth + 1);
    let mut cur = start.with_prec(prec);
    let mut acc = BigReal::exact_i64(1, prec);
    points.push(cur.clone());
    deriv_products.push(acc.clone());
    for _ in 0..depth {
        let d = map.deriv(&cur, prec).abs();
        acc = acc.mul(&d, prec);
        cur = map.eval(&cur, prec);
        points.push(cur.clone());
        deriv_products.push(acc.clone());
    }
    OrbitDiagnostics { points, deriv_products }
}

/// `|Dg^len (g^from(start))|` from precomputed diagnostics: the derivative
/// product over a block of the orbit, computed directly from the stored
/// points (not as a quotient, so no certified-division blowup).
pub fn block_derivative(
    map: &BimodalMap,
    diag: &OrbitDiagnostics,
    from: usize,
    len: usize,
    prec: u32,
) -> BigReal {
    let mut acc = BigReal::exact_i64(1, prec);
    for p in &diag.points[from..from + len] {
        acc = acc.mul(&map.deriv(p, prec).abs(), prec);
    }
    acc
}

/// One of the period-two cycles, labeled by the two laps it alternates
/// between.
#[derive(Debug, Clone)]
pub struct Period2Orbit {
    pub pattern: [Symbol; 2],
    /// The cycle point in `pattern[0]`'s lap.
    pub x: BigReal,
    /// The cycle point in `pattern[1]`'s lap (the image of `x`).
    pub y: BigReal,
    /// Signed multiplier `g'(x) * g'(y)`.
    pub multiplier: BigReal,
}

/// The three period-two cycles of a map in the bimodal range: one
/// alternating between the outer laps, one between the middle and right
/// laps, and one between the left and middle laps.
///
/// Each is found by bisecting `g(g(x)) - x` on a bracket derived from
/// branch preimages of the critical points, which isolates exactly one
/// cycle point per bracket:
///
/// - outer/outer: between the left-lap preimage of `c2` and `c1`;
/// - middle/right: between `c1` and the middle-lap preimage of `c2`;
/// - left/middle: between the left-lap preimages of `c1` and `c2`.
pub fn period2_orbits(map: &BimodalMap, prec: u32) -> Result<Vec<Period2Orbit>, OrbitError> {
    let a = invert_in_lap(map, Symbol::I1, map.c2(), prec)?;
    let u = invert_in_lap(map, Symbol::I1, map.c1(), prec)?;
    let b = invert_in_lap(map, Symbol::I2, map.c2(), prec)?;
    let brackets = [
        ([Symbol::I1, Symbol::I3], a.clone(), map.c1().clone()),
        ([Symbol::I2, Symbol::I3], map.c1().clone(), b),
        ([Symbol::I1, Symbol::I2], u, a),
    ];
    let ctx = PrecisionContext::new(prec);
    let tol = BigReal::exact_i64(1, prec).mul_2exp(-(prec.saturating_sub(32) as i32));
    let mut out = Vec::new();
    for (pattern, lo, hi) in brackets {
        let f = |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
            let gx = map.eval(x, bits);
            Ok(map.eval(&gx, bits).sub(x, bits))
        };
        let bracket = bisect(&f, &lo, &hi, &tol, &ctx)?;
        let x = bracket.midpoint();
        let y = map.eval(&x, prec);
        let multiplier = map.deriv(&x, prec).mul(&map.deriv(&y, prec), prec);
        out.push(Period2Orbit { pattern, x, y, multiplier });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_map, Family};
    use crate::symbolic::seq_from_str;

    fn cubic0(prec: u32) -> BimodalMap {
        make_map(Family::Cubic, &BigReal::zero(prec), prec).unwrap()
    }

    #[test]
    fn itineraries_at_zero_parameter_resolve_exactly() {
        let g = cubic0(192);
        // Kneading data: second critical value is 0, fixed, coded 1 forever.
        let k = kneading(&g, 64, 192).unwrap();
        assert_eq!(k, Itinerary::Seq(seq_from_str("(1)^inf").unwrap()));
        // The interior fixed point 1/2 codes 2 forever.
        let half = itinerary(&g, &BigReal::exact_f64(0.5, 192), 64, 192).unwrap();
        assert_eq!(half, Itinerary::Seq(seq_from_str("(2)^inf").unwrap()));
        // Critical points code as themselves.
        let at_c1 = itinerary(&g, &BigReal::exact_f64(0.25, 192), 64, 192).unwrap();
        assert_eq!(at_c1, Itinerary::Seq(seq_from_str("A").unwrap()));
        let at_c2 = itinerary(&g, &BigReal::exact_f64(0.75, 192), 64, 192).unwrap();
        assert_eq!(at_c2, Itinerary::Seq(seq_from_str("B").unwrap()));
        // The right endpoint is fixed and codes 3 forever.
        let at_1 = itinerary(&g, &BigReal::exact_i64(1, 192), 64, 192).unwrap();
        assert_eq!(at_1, Itinerary::Seq(seq_from_str("(3)^inf").unwrap()));
        // 1/4's preimage in the middle lap starts in the middle lap.
        let x = invert_in_lap(&g, Symbol::I2, &BigReal::exact_f64(0.25, 192), 192).unwrap();
        let it = itinerary(&g, &x, 1, 192).unwrap();
        assert_eq!(it.prefix(1), vec![Symbol::I2]);
    }

    #[test]
    fn unresolved_orbits_give_plain_prefixes() {
        let gamma = BigReal::from_ratio(1, 64, 256);
        let g = make_map(Family::Cubic, &gamma, 256).unwrap();
        let k = kneading(&g, 40, 256).unwrap();
        match k {
            Itinerary::Prefix(w) => {
                assert_eq!(w.len(), 40);
                assert_eq!(w[0], Symbol::I1);
            }
            other => panic!("expected an unresolved prefix, got {other:?}"),
        }
    }

    #[test]
    fn fixed_point_and_lap_multipliers_at_zero() {
        let g = cubic0(192);
        let r = fixed_point_r(&g, 192).unwrap();
        assert!(r.is_exact(), "midpoint of [1/4, 3/4] hits the fixed point exactly");
        assert_eq!(r.to_f64(), 0.5);
        let s1 = lap_multiplier(&g, Symbol::I1, 192).unwrap();
        let s2 = lap_multiplier(&g, Symbol::I2, 192).unwrap();
        let s3 = lap_multiplier(&g, Symbol::I3, 192).unwrap();
        assert!(s1.is_exact() && s1.to_f64() == 9.0);
        assert!(s2.is_exact() && s2.to_f64() == 3.0);
        assert!(s3.is_exact() && s3.to_f64() == 9.0);
    }

    #[test]
    fn period_two_cycles_at_zero_match_the_closed_forms() {
        let g = cubic0(256);
        let orbits = period2_orbits(&g, 256).unwrap();
        assert_eq!(orbits.len(), 3);
        // Independent oracle for the outer cycle: x = (2 - sqrt 2)/4, via a
        // bisection for sqrt 2 that shares no code path with the map.
        let sqrt2 = {
            let f = |x: &BigReal, bits: u32| -> Result<BigReal, NumericsError> {
                Ok(x.mul(x, bits).sub(&BigReal::exact_i64(2, bits), bits))
            };
            let tol = BigReal::exact_i64(1, 256).mul_2exp(-200);
            bisect(
                &f,
                &BigReal::exact_i64(1, 256),
                &BigReal::exact_i64(2, 256),
                &tol,
                &PrecisionContext::new(256),
            )
            .unwrap()
            .midpoint()
        };
        let want_x = BigReal::exact_i64(2, 256)
            .sub(&sqrt2, 256)
            .div(&BigReal::exact_i64(4, 256), 256);
        let outer = &orbits[0];
        assert_eq!(outer.pattern, [Symbol::I1, Symbol::I3]);
        let dx = outer.x.sub(&want_x, 256).abs();
        assert!(dx.to_f64() < 1e-40, "outer cycle point, off by {}", dx.to_f64());
        // Multiplier of the outer cycle is +9; the cycles through the
        // decreasing lap carry -9.
        let m = outer.multiplier.to_f64();
        assert!((m - 9.0).abs() < 1e-30);
        for orbit in &orbits[1..] {
            assert!((orbit.multiplier.to_f64() + 9.0).abs() < 1e-30, "{:?}", orbit.pattern);
        }
        // Itinerary sanity: each cycle point codes its pattern.
        for orbit in &orbits {
            let it = itinerary(&g, &orbit.x, 8, 256).unwrap();
            let p = it.prefix(4);
            assert_eq!(p[0], orbit.pattern[0]);
            assert_eq!(p[1], orbit.pattern[1]);
            assert_eq!(p[2], orbit.pattern[0]);
            assert_eq!(p[3], orbit.pattern[1]);
        }
    }

    #[test]
    fn realize_recovers_prescribed_codes() {
        let g = cubic0(256);
        let k = seq_from_str("(1)^inf").unwrap();
        for code in ["A", "B", "2A", "2B", "12B", "112A", "13B", "22A", "1(2)^inf", "123B"] {
            let target = seq_from_str(code).unwrap();
            let x = realize_point(&g, &target, Some(&k), 256).unwrap();
            // Realization is verified internally; spot-check the lap
            // prefix again here (the terminal critical symbol of a finite
            // code is pinned by the pullback anchor, not observable from
            // the approximate point).
            let check = if target.ends_critical() {
                target.head_len() - 1
            } else {
                target.head_len() + 4
            };
            let it = itinerary(&g, &x, check, 256).unwrap();
            assert_eq!(it.prefix(check), target.prefix(check), "code {code}");
        }
    }

    #[test]
    fn realize_orders_the_alternating_chain_points() {
        // Pulling the two critical points back through powers of the
        // decreasing lap interleaves their preimages around the fixed
        // point: p0 < q1 < p2 < ... < r < ... < p3 < q2 < p1 < q0.
        let g = cubic0(256);
        let k = seq_from_str("(1)^inf").unwrap();
        let mut p = Vec::new();
        let mut q = Vec::new();
        for n in 0..=5 {
            let mut pw = vec![Symbol::I2; n];
            pw.push(Symbol::C1);
            let qt = {
                let mut w = vec![Symbol::I2; n];
                w.push(Symbol::C2);
                ItinerarySeq::finite(w).unwrap()
            };
            let pt = ItinerarySeq::finite(pw).unwrap();
            p.push(realize_point(&g, &pt, Some(&k), 256).unwrap());
            q.push(realize_point(&g, &qt, Some(&k), 256).unwrap());
        }
        let r = fixed_point_r(&g, 256).unwrap();
        // Even indices from below, odd from above (for p; mirrored for q).
        let less = |a: &BigReal, b: &BigReal| a.cmp_value(b) == Ordering::Less;
        assert!(less(&p[0], &q[1]));
        assert!(less(&q[1], &p[2]));
        assert!(less(&p[2], &q[3]));
        assert!(less(&q[3], &p[4]));
        assert!(less(&p[4], &q[5]));
        assert!(less(&q[5], &r));
        assert!(less(&r, &p[5]));
        assert!(less(&p[5], &q[4]));
        assert!(less(&q[4], &p[3]));
        assert!(less(&p[3], &q[2]));
        assert!(less(&q[2], &p[1]));
        assert!(less(&p[1], &q[0]));
    }

    #[test]
    fn kneading_orbit_derivatives_at_zero_are_exact_powers() {
        let g = cubic0(192);
        let v0 = g.eval(g.c2(), 192);
        assert!(v0.is_exact() && v0.value().is_zero());
        let diag = orbit_diagnostics(&g, &v0, 8, 192);
        for (n, d) in diag.deriv_products.iter().enumerate() {
            assert!(d.is_exact(), "d_{n} exact");
            assert_eq!(d.to_f64(), 9f64.powi(n as i32), "d_{n}");
        }
        let block = block_derivative(&g, &diag, 2, 3, 192);
        assert!(block.is_exact());
        assert_eq!(block.to_f64(), 729.0);
    }

    #[test]
    fn realize_rejects_certified_inadmissible_targets() {
        // 2(1)^inf shifts to (1)^inf, which precedes the kneading sequence
        // 1(2)^inf, so the code cannot occur for a map with that kneading
        // data.
        let g0 = cubic0(256);
        let k0 = seq_from_str("1(2)^inf").unwrap();
        let bad = seq_from_str("2(1)^inf").unwrap();
        assert!(matches!(
            realize_point(&g0, &bad, Some(&k0), 256),
            Err(OrbitError::Inadmissible)
        ));
    }
}
