//! Randomized cross-module invariants: interval-arithmetic soundness,
//! order axioms, family shape axioms, realization round trips, and
//! bracket refinement.

use std::cmp::Ordering;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kneadlab::construct::{lattice_bits, parse_schedule, StepKind};
use kneadlab::families::make_map;
use kneadlab::numerics::{bisect, exact_blend, BigReal, PrecisionContext};
use kneadlab::orbits::{itinerary, realize_point};
use kneadlab::paramsearch::find_param;
use kneadlab::symbolic::{ItinerarySeq, Symbol};
use kneadlab::Family;

fn assert_within_err(x: &BigReal, reference: &BigReal, what: &str) {
    let prec = x.prec().max(reference.prec()) + 8;
    let gap = x.value_part().sub(&reference.value_part(), prec).abs();
    let bound = x.err_real().add(&reference.err_real(), 64);
    assert!(
        gap.cmp_value(&bound) != Ordering::Greater,
        "{what}: reference escapes the error interval (gap {}, err {})",
        gap.display_decimal(6),
        bound.display_decimal(6),
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Low-precision interval results contain the high-precision value of
    /// the same rational expression.
    #[test]
    fn interval_arithmetic_is_sound(
        n1 in -1_000_000i64..1_000_000,
        d1 in 1i64..1_000_000,
        n2 in -1_000_000i64..1_000_000,
        d2 in 1i64..1_000_000,
    ) {
        prop_assume!(n2 != 0);
        let coarse = 96u32;
        let fine = 1024u32;
        let a_c = BigReal::from_ratio(n1, d1, coarse);
        let b_c = BigReal::from_ratio(n2, d2, coarse);
        let a_f = BigReal::from_ratio(n1, d1, fine);
        let b_f = BigReal::from_ratio(n2, d2, fine);
        assert_within_err(&a_c.add(&b_c, coarse), &a_f.add(&b_f, fine), "add");
        assert_within_err(&a_c.sub(&b_c, coarse), &a_f.sub(&b_f, fine), "sub");
        assert_within_err(&a_c.mul(&b_c, coarse), &a_f.mul(&b_f, fine), "mul");
        assert_within_err(&a_c.div(&b_c, coarse), &a_f.div(&b_f, fine), "div");
    }

    /// Dyadic blends remain inside the interval and order by numerator.
    #[test]
    fn blends_stay_inside_and_order(
        lo_n in -1000i64..1000,
        span_n in 1i64..1000,
        den_bits in 2u32..6,
    ) {
        let prec = 192u32;
        let lo = BigReal::from_ratio(lo_n, 997, prec);
        let hi = lo.add(&BigReal::from_ratio(span_n, 991, prec), prec);
        let den = 1u32 << den_bits;
        let mut prev = lo.clone();
        for num in 1..den {
            let b = exact_blend(&lo, &hi, num, den_bits);
            prop_assert_eq!(prev.cmp_value(&b), Ordering::Less);
            prop_assert_eq!(b.cmp_value(&hi), Ordering::Less);
            prev = b;
        }
    }

    /// Bisection brackets certified sign changes down to the tolerance:
    /// the square root of a rational stays inside the returned bracket.
    #[test]
    fn bisection_brackets_contain_the_root(c_n in 2i64..9_000_000) {
        let prec = 320u32;
        let ctx = PrecisionContext::new(prec);
        let c = BigReal::from_ratio(c_n, 1024, prec);
        let f = |x: &BigReal, bits: u32| {
            Ok(x.mul(x, bits).sub(&c.with_prec(bits), bits))
        };
        let a = BigReal::zero(prec);
        let b = BigReal::exact_i64(200, prec);
        let tol = BigReal::exact_i64(1, prec).mul_2exp(-128);
        let root = bisect(&f, &a, &b, &tol, &ctx).unwrap();
        if !root.exact {
            // Certified sign change across the bracket.
            let fa = f(&root.lo, prec).unwrap();
            let fb = f(&root.hi, prec).unwrap();
            prop_assert_eq!(fa.cmp_certified(&BigReal::zero(prec), prec), Some(Ordering::Less));
            prop_assert_eq!(fb.cmp_certified(&BigReal::zero(prec), prec), Some(Ordering::Greater));
            let width = root.hi.sub(&root.lo, prec);
            prop_assert!(
                width.cmp_value(&tol) != Ordering::Greater || root.resolution_limited
            );
        }
        // The bracket contains the reference square root (Heron iteration
        // at four times the precision).
        let sqrt_ref = {
            let fine = 1280u32;
            let cc = BigReal::from_ratio(c_n, 1024, fine);
            let mut x = BigReal::exact_i64(100, fine);
            for _ in 0..80 {
                let q = cc.div(&x, fine);
                x = x.add(&q, fine).mul_2exp(-1);
            }
            x
        };
        prop_assert!(root.lo.cmp_value(&sqrt_ref) != Ordering::Greater);
        prop_assert!(root.hi.cmp_value(&sqrt_ref) != Ordering::Less);
    }

    /// Shape axioms at random parameters: endpoints fixed, first critical
    /// value pinned at 1, second critical value positive away from 0, and
    /// the turning-point contact orders match the family.
    #[test]
    fn family_shape_axioms_hold(
        gamma_n in 1i64..4096,
        deg7 in proptest::bool::ANY,
    ) {
        let prec = 320u32;
        let fam = if deg7 { Family::Degree7 } else { Family::Cubic };
        let gamma = BigReal::from_ratio(gamma_n, 8192, prec);
        let map = make_map(fam, &gamma, prec).unwrap();
        let zero = BigReal::zero(prec);
        let one = BigReal::exact_i64(1, prec);
        let tight = BigReal::exact_i64(1, prec).mul_2exp(-(prec as i32 / 2));

        prop_assert!(map.eval(&zero, prec).abs().cmp_value(&tight) == Ordering::Less);
        prop_assert!(map.eval(&one, prec).sub(&one, prec).abs().cmp_value(&tight) == Ordering::Less);
        prop_assert!(map.eval(map.c1(), prec).sub(&one, prec).abs().cmp_value(&tight) == Ordering::Less);
        prop_assert_eq!(
            map.eval(map.c2(), prec).cmp_certified(&zero, prec),
            Some(Ordering::Greater)
        );

        // Contact order at each turning point: g(c + 2h) deviates from the
        // critical value 2^order times as much as g(c + h).
        let order = fam.critical_order() as f64;
        let h = BigReal::exact_i64(1, prec).mul_2exp(-24);
        let h2 = h.mul_2exp(1);
        for (cp, value) in [(map.c1(), one.clone()), (map.c2(), map.eval(map.c2(), prec))] {
            let d1 = map.eval(&cp.add(&h, prec), prec).sub(&value, prec).abs();
            let d2 = map.eval(&cp.add(&h2, prec), prec).sub(&value, prec).abs();
            let ratio = d2.div(&d1, prec).ln(96).unwrap().to_f64() / std::f64::consts::LN_2;
            prop_assert!(
                (ratio - order).abs() < 0.02,
                "contact order at a turning point: log2 ratio {ratio} vs {order}"
            );
        }

        // Negative Schwarzian derivative at interior samples kept clear of
        // the turning points (where the quotient degenerates): over the
        // parameter range used here c1 stays in (0.20, 0.34) and c2 in
        // (0.50, 0.78) for both families.
        for num in [2u32, 7, 13] {
            let x = exact_blend(&zero, &one, num, 4);
            let s = map.schwarzian(&x, prec).unwrap();
            prop_assert_eq!(
                s.cmp_certified(&zero, prec),
                Some(Ordering::Less),
                "schwarzian sign at sample {}/16",
                num
            );
        }
    }

    /// Realized points reproduce their codes: at parameter 0 every branch
    /// is onto, so every lap word ending at a critical point is realizable
    /// and the realized point's itinerary starts with exactly that word.
    #[test]
    fn realized_points_reproduce_their_codes(
        trits in 0u32..59_049,
        len in 1usize..11,
        end_c2 in proptest::bool::ANY,
    ) {
        let prec = 288u32;
        let map = make_map(Family::Cubic, &BigReal::zero(prec), prec).unwrap();
        let laps = [Symbol::I1, Symbol::I2, Symbol::I3];
        let mut word: Vec<Symbol> = (0..len)
            .map(|i| laps[(trits as usize / 3usize.pow(i as u32)) % 3])
            .collect();
        let lap_word = word.clone();
        word.push(if end_c2 { Symbol::C2 } else { Symbol::C1 });
        let target = ItinerarySeq::finite(word).unwrap();
        let x = realize_point(&map, &target, None, prec).unwrap();
        let seen = itinerary(&map, &x, len, prec).unwrap();
        prop_assert_eq!(seen.prefix(len), lap_word);
    }

    /// The precision lattice covers the need with cushion and never
    /// shrinks as words grow.
    #[test]
    fn precision_lattice_covers_growing_words(t in 1u64..2_000_000) {
        let bits = lattice_bits(t);
        prop_assert!(u64::from(bits) * 10 >= 21 * t + 5120);
        prop_assert!(bits >= 256 && (bits / 256).is_power_of_two() && bits % 256 == 0);
        prop_assert!(lattice_bits(t + 1) >= bits);
    }

    /// Schedule strings parse ignoring case and separators.
    #[test]
    fn schedule_parsing_accepts_separators(pattern in proptest::collection::vec(proptest::bool::ANY, 1..12)) {
        let mut text = String::new();
        let mut want = Vec::new();
        for (i, &is_a) in pattern.iter().enumerate() {
            if i % 2 == 1 {
                text.push(',');
            }
            if is_a {
                text.push(if i % 3 == 0 { 'A' } else { 'a' });
                want.push(StepKind::A);
            } else {
                text.push(if i % 3 == 0 { 'B' } else { 'b' });
                want.push(StepKind::B);
            }
        }
        prop_assert_eq!(parse_schedule(&text).unwrap(), want);
    }
}

/// Signed-lexicographic comparison is a total order on complete
/// sequences (infinite, or finite ending at a critical symbol):
/// reflexive, antisymmetric, and transitive on random triples. Plain
/// lap words are excluded: they compare as prefixes, where `Equal`
/// means undecided rather than identical, so only a partial order.
#[test]
fn sequence_comparison_is_a_total_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(1037);
    let laps = [Symbol::I1, Symbol::I2, Symbol::I3];
    let random_seq = |rng: &mut ChaCha8Rng| -> ItinerarySeq {
        let len = rng.gen_range(0..24);
        let head: Vec<Symbol> = (0..len).map(|_| laps[rng.gen_range(0..3)]).collect();
        if rng.gen_bool(0.5) {
            let mut h = head;
            h.push(if rng.gen_bool(0.5) { Symbol::C1 } else { Symbol::C2 });
            ItinerarySeq::finite(h).unwrap()
        } else {
            ItinerarySeq::repeating(head, laps[rng.gen_range(0..3)]).unwrap()
        }
    };
    for _ in 0..400 {
        let a = random_seq(&mut rng);
        let b = random_seq(&mut rng);
        let c = random_seq(&mut rng);
        assert_eq!(a.cmp_seq(&a), Ordering::Equal, "reflexive: {a}");
        assert_eq!(a.cmp_seq(&b), b.cmp_seq(&a).reverse(), "antisymmetric: {a} vs {b}");
        if a.cmp_seq(&b) != Ordering::Greater && b.cmp_seq(&c) != Ordering::Greater {
            assert_ne!(a.cmp_seq(&c), Ordering::Greater, "transitive: {a} {b} {c}");
        }
    }
}

/// The itinerary map is order-preserving: for random point pairs the
/// symbol sequences never compare against the point order.
#[test]
fn itineraries_respect_point_order() {
    let prec = 256u32;
    let depth = 24usize;
    let mut rng = ChaCha8Rng::seed_from_u64(40_417);
    for fam in [Family::Cubic, Family::Degree7] {
        for gamma_n in [0i64, 13, 40] {
            let map = make_map(fam, &BigReal::from_ratio(gamma_n, 256, prec), prec).unwrap();
            let mut checked = 0;
            let mut attempts = 0;
            while checked < 40 && attempts < 400 {
                attempts += 1;
                let xn = rng.gen_range(1u32..4095);
                let yn = rng.gen_range(1u32..4095);
                if xn == yn {
                    continue;
                }
                let (xn, yn) = (xn.min(yn), xn.max(yn));
                let x = BigReal::from_ratio(i64::from(xn), 4096, prec);
                let y = BigReal::from_ratio(i64::from(yn), 4096, prec);
                let (Ok(ix), Ok(iy)) = (
                    itinerary(&map, &x, depth, prec),
                    itinerary(&map, &y, depth, prec),
                ) else {
                    continue;
                };
                let sx = ItinerarySeq::finite(ix.prefix(depth)).unwrap();
                let sy = ItinerarySeq::finite(iy.prefix(depth)).unwrap();
                // Equal prefixes decide nothing; a strict comparison must
                // agree with the point order.
                if sx.cmp_seq(&sy) == Ordering::Greater {
                    panic!(
                        "order violated at {fam} gamma {gamma_n}/256: \
                         x={xn}/4096 codes above y={yn}/4096"
                    );
                }
                checked += 1;
            }
            assert!(checked >= 40, "too many unresolved itineraries");
        }
    }
}

/// Parameter brackets refine monotonically: doubling the halving budget
/// nests the bracket inside the coarser one.
#[test]
fn param_brackets_nest_under_refinement() {
    let prec = 256u32;
    let target = ItinerarySeq::finite(vec![Symbol::I1, Symbol::C1]).unwrap();
    let lo = BigReal::zero(prec);
    let hi = BigReal::exact_i64(1, prec);
    let coarse = find_param(Family::Cubic, &target, &lo, &hi, 24, prec).unwrap();
    let fine = find_param(Family::Cubic, &target, &lo, &hi, 48, prec).unwrap();
    assert!(coarse.lo.cmp_value(&fine.lo) != Ordering::Greater);
    assert!(fine.hi.cmp_value(&coarse.hi) != Ordering::Greater);
    let wf = fine.hi.sub(&fine.lo, prec);
    let wc = coarse.hi.sub(&coarse.lo, prec);
    assert!(wf.cmp_value(&wc) != Ordering::Greater);
}
