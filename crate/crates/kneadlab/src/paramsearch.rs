//! Parameter-space search: locate parameters whose kneading sequence
//! brackets or realizes a prescribed code, by bisection in the parameter
//! with certified symbolic comparisons at every probe.
//!
//! The kneading sequence moves monotonically through the code order as the
//! parameter sweeps the family, so a window whose endpoint kneadings
//! straddle the target can be halved on the decided side of each probe.
//! Probes are exact dyadic parameters and every comparison is decided by
//! certified symbol classifications, so the probe path is independent of
//! the working precision: raising precision can only turn a failure
//! (undecidable symbol) into the same decided path.

use crate::families::{make_map, BimodalMap, Family, FamilyError};
use crate::numerics::{exact_blend, exact_midpoint, BigReal, NumericsError};
use crate::orbits::{itinerary_cmp_target, kneading, OrbitError};
use crate::symbolic::{word_to_string, ItinerarySeq, Symbol, SymbolicError};
use rayon::prelude::*;
use std::cmp::Ordering;

/// Errors from parameter search.
#[derive(Debug, thiserror::Error)]
pub enum ParamSearchError {
    /// The window's endpoint kneadings do not straddle the target.
    #[error("window endpoint kneading does not straddle the target ({side} side)")]
    WindowInvalid { side: &'static str },
    /// A kneading comparison stayed undecided after precision escalation.
    #[error("kneading comparison undecidable at parameter {gamma} (escalated to {bits} bits)")]
    Undecidable { gamma: String, bits: u32 },
    /// The two realization loci could not be separated into disjoint
    /// brackets within the halving budget.
    #[error("could not separate the two realization loci within {halvings} halvings")]
    SeparationFailed { halvings: u32 },
    /// The base word and repeat count violate the sign requirement for a
    /// two-sided realization.
    #[error("base word of sign {sign} with {reps} middle-lap repeats cannot order the pair")]
    ParityInvalid { sign: i8, reps: u32 },
    /// An interior sample's kneading did not extend the certified prefix.
    #[error("interior sample {index} failed the kneading-prefix certification")]
    CertifyFailed { index: usize },
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Compare the kneading sequence at parameter `gamma` with a target code,
/// escalating the working precision until the comparison is decided.
///
/// Symbols that cannot be certified (an orbit point indistinguishable from
/// a critical point) still decide the comparison when every candidate
/// symbol falls on the same side of the target, so endpoint parameters
/// with exact critical hits compare correctly.
pub fn kneading_cmp(
    family: Family,
    gamma: &BigReal,
    target: &ItinerarySeq,
    prec: u32,
) -> Result<Ordering, ParamSearchError> {
    let mut bits = prec;
    for attempt in 0..3 {
        let map = make_map(family, gamma, bits)?;
        let v = map.eval(map.c2(), bits);
        if let Some(ord) = itinerary_cmp_target(&map, &v, target, bits)? {
            return Ok(ord);
        }
        if attempt < 2 {
            bits = bits.saturating_mul(2);
        }
    }
    Err(ParamSearchError::Undecidable {
        gamma: gamma.display_decimal(20),
        bits,
    })
}

/// Check that the kneading sequence at `gamma` begins with `prefix`, with
/// one precision escalation if a symbol is initially undecidable.
fn kneading_prefix_holds(
    family: Family,
    gamma: &BigReal,
    prefix: &[Symbol],
    prec: u32,
) -> Result<bool, ParamSearchError> {
    let mut bits = prec;
    for attempt in 0..2 {
        let map = make_map(family, gamma, bits)?;
        match kneading(&map, prefix.len(), bits) {
            Ok(obs) => return Ok(obs.prefix(prefix.len()) == prefix),
            Err(OrbitError::AmbiguousSymbol { .. }) if attempt == 0 => {
                bits = bits.saturating_mul(2);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(ParamSearchError::Undecidable {
        gamma: gamma.display_decimal(20),
        bits,
    })
}

/// A parameter bracket `[lo, hi]` with `kneading(lo) < target <
/// kneading(hi)` certified (or an exact realization when a probe's
/// kneading equals the target).
#[derive(Debug, Clone)]
pub struct ParamBracket {
    pub lo: BigReal,
    pub hi: BigReal,
    pub exact: bool,
    pub halvings_done: u32,
}

impl ParamBracket {
    pub fn midpoint(&self) -> BigReal {
        if self.exact {
            self.lo.clone()
        } else {
            exact_midpoint(&self.lo, &self.hi)
        }
    }

    pub fn width(&self) -> BigReal {
        let prec = self.lo.prec().max(self.hi.prec()) + 1;
        self.hi.sub(&self.lo, prec)
    }
}

/// Bisect the parameter window until the bracket around the target's
/// realization locus has been halved `halvings` times (or a probe realizes
/// the target exactly).
///
/// Requires `kneading(lo) < target < kneading(hi)`; both endpoint
/// comparisons are certified before the loop.
pub fn find_param(
    family: Family,
    target: &ItinerarySeq,
    window_lo: &BigReal,
    window_hi: &BigReal,
    halvings: u32,
    prec: u32,
) -> Result<ParamBracket, ParamSearchError> {
    if kneading_cmp(family, window_lo, target, prec)? != Ordering::Less {
        return Err(ParamSearchError::WindowInvalid { side: "low" });
    }
    if kneading_cmp(family, window_hi, target, prec)? != Ordering::Greater {
        return Err(ParamSearchError::WindowInvalid { side: "high" });
    }
    let mut lo = window_lo.clone();
    let mut hi = window_hi.clone();
    for n in 0..halvings {
        let mid = exact_midpoint(&lo, &hi);
        match kneading_cmp(family, &mid, target, prec)? {
            Ordering::Less => lo = mid,
            Ordering::Greater => hi = mid,
            Ordering::Equal => {
                return Ok(ParamBracket {
                    lo: mid.clone(),
                    hi: mid,
                    exact: true,
                    halvings_done: n,
                });
            }
        }
    }
    Ok(ParamBracket { lo, hi, exact: false, halvings_done: halvings })
}

/// A certified open parameter interval: every parameter in `[lo, hi]`
/// continues the construction (kneading extends the certified prefix).
#[derive(Debug, Clone)]
pub struct ParamInterval {
    pub lo: BigReal,
    pub hi: BigReal,
}

impl ParamInterval {
    pub fn width(&self) -> BigReal {
        let prec = self.lo.prec().max(self.hi.prec()) + 1;
        self.hi.sub(&self.lo, prec)
    }

    pub fn midpoint(&self) -> BigReal {
        exact_midpoint(&self.lo, &self.hi)
    }

    pub fn contains(&self, x: &BigReal) -> bool {
        self.lo.cmp_value(x) != Ordering::Greater && x.cmp_value(&self.hi) != Ordering::Greater
    }
}

/// Result of a two-sided realization: the strict-interior interval between
/// the parameters realizing `base · 2^(reps+1) · A` and
/// `base · 2^(reps+1) · B`, point estimates for both loci, the word to
/// carry into the next stage, and the kneading prefix certified on the
/// interval.
#[derive(Debug, Clone)]
pub struct ConvPair {
    pub interval: ParamInterval,
    /// Point estimate of the lower realization locus.
    pub gamma1: BigReal,
    /// Point estimate of the upper realization locus.
    pub gamma2: BigReal,
    /// `base ++ I2^reps`: the word the next stage extends.
    pub s_next: Vec<Symbol>,
    /// `base ++ I2^(reps+2)`: certified as a kneading prefix on the whole
    /// interval.
    pub certified_prefix: Vec<Symbol>,
    pub halvings_used: u32,
}

/// Number of interior samples used to certify the kneading prefix on a
/// returned interval.
const CERTIFY_SAMPLES: u32 = 9;

/// Realize the bounding pair of a middle-lap block: parameters where the
/// kneading sequence is exactly `base · 2^(reps+1) · A` (lower) and
/// `base · 2^(reps+1) · B` (upper), returning a certified strict-interior
/// interval between them.
///
/// The word `base · 2^(reps+1)` must have lap-sign product +1 so the
/// lower/upper order is as stated; this is checked up front.
///
/// `halvings` controls the parameter bisection depth; if the two loci are
/// not separated at that depth the bracket is refined further (up to a few
/// extensions) before giving up. The returned interval's endpoints are
/// snapped inward onto a dyadic grid a little coarser than the working
/// precision, so they serialize to decimals that re-parse exactly at that
/// precision.
pub fn conv_pair(
    family: Family,
    base: &[Symbol],
    reps: u32,
    window_lo: &BigReal,
    window_hi: &BigReal,
    halvings: u32,
    prec: u32,
) -> Result<ConvPair, ParamSearchError> {
    // Sign of base · I2^(reps+1): each middle-lap symbol flips the sign.
    let base_sign: i8 = base.iter().map(|s| s.sign()).product();
    let total_sign = if (reps + 1) % 2 == 0 { base_sign } else { -base_sign };
    if total_sign != 1 {
        return Err(ParamSearchError::ParityInvalid { sign: base_sign, reps });
    }
    let mut word = base.to_vec();
    word.extend(std::iter::repeat(Symbol::I2).take(reps as usize + 1));
    let mut m1 = word.clone();
    m1.push(Symbol::C1);
    let mut m2 = word.clone();
    m2.push(Symbol::C2);
    let m1 = ItinerarySeq::finite(m1)?;
    let m2 = ItinerarySeq::finite(m2)?;

    // A certified prefix word · I2 places a parameter strictly between the
    // two realization loci (the codes word·A and word·B bound the word·I2
    // cylinder), so it doubles as the endpoint containment certificate.
    let mut prefix = word.clone();
    prefix.push(Symbol::I2);
    // Interval endpoints are snapped onto this storage grid so their
    // mantissas stay well inside the working precision: bisection grids
    // stack across stages, but snapped endpoints re-parse exactly.
    let grid = prec.saturating_sub(64).max(128);

    let mut b1 = find_param(family, &m1, window_lo, window_hi, halvings, prec)?;
    let mut budget = halvings;
    let mut extensions = 0;
    // Lower endpoint: snap the bracket's upper end up onto the grid and
    // certify the prefix there. A failure means the snap overshot the
    // certified zone (the loci are closer together than the bracket
    // resolution); refine the bracket and retry.
    let lo_r = loop {
        if b1.exact {
            // A probe realized the lower code exactly; the strict-interior
            // interval has no certified starting point at this resolution.
            return Err(ParamSearchError::SeparationFailed { halvings: budget });
        }
        let cand = b1.hi.round_to_grid(grid, true);
        if kneading_prefix_holds(family, &cand, &prefix, prec)? {
            break cand;
        }
        if extensions >= 8 {
            return Err(ParamSearchError::SeparationFailed { halvings: budget });
        }
        let extra = (budget / 4).max(64);
        b1 = find_param(family, &m1, &b1.lo, &b1.hi, extra, prec)?;
        budget += extra;
        extensions += 1;
    };
    let mut b2 = find_param(family, &m2, &lo_r, window_hi, halvings, prec)?;
    let mut extensions2 = 0;
    let hi_r = loop {
        if b2.exact {
            return Err(ParamSearchError::SeparationFailed { halvings: budget });
        }
        let cand = b2.lo.round_to_grid(grid, false);
        if cand.cmp_value(&lo_r) == Ordering::Greater
            && kneading_prefix_holds(family, &cand, &prefix, prec)?
        {
            break cand;
        }
        if extensions2 >= 8 {
            return Err(ParamSearchError::SeparationFailed { halvings: budget });
        }
        let extra = (budget / 4).max(64);
        b2 = find_param(family, &m2, &b2.lo, &b2.hi, extra, prec)?;
        budget += extra;
        extensions2 += 1;
    };
    let interval = ParamInterval { lo: lo_r, hi: hi_r };

    // Certify the kneading prefix base · 2^(reps+2) at interior samples.
    let sample_points: Vec<BigReal> = (0..CERTIFY_SAMPLES)
        .map(|i| exact_blend(&interval.lo, &interval.hi, 3 + i, 4))
        .collect();
    let results: Vec<Result<bool, ParamSearchError>> = sample_points
        .par_iter()
        .map(|gamma| kneading_prefix_holds(family, gamma, &prefix, prec))
        .collect();
    for (i, r) in results.into_iter().enumerate() {
        if !r? {
            log::warn!(
                "prefix certification failed at sample {i} for base {}",
                word_to_string(base)
            );
            return Err(ParamSearchError::CertifyFailed { index: i });
        }
    }

    let mut s_next = base.to_vec();
    s_next.extend(std::iter::repeat(Symbol::I2).take(reps as usize));
    Ok(ConvPair {
        interval,
        gamma1: b1.midpoint(),
        gamma2: b2.midpoint(),
        s_next,
        certified_prefix: prefix,
        halvings_used: budget,
    })
}

/// Forward-orbit residual of a realized code: for a target
/// `word · critical`, the distance `|g^n(v) - c|` where `v` is the second
/// critical value, `n` the word length, and `c` the named critical point.
/// Small residuals certify the realization quality of a parameter.
pub fn realization_residual(
    map: &BimodalMap,
    target: &ItinerarySeq,
    prec: u32,
) -> Result<BigReal, ParamSearchError> {
    let head = target.head();
    let (word, anchor) = match head.last() {
        Some(&Symbol::C1) => (&head[..head.len() - 1], map.c1().clone()),
        Some(&Symbol::C2) => (&head[..head.len() - 1], map.c2().clone()),
        _ => {
            return Err(ParamSearchError::Symbolic(SymbolicError::BadLiteral(
                target.to_string(),
            )))
        }
    };
    let mut x = map.eval(map.c2(), prec);
    for _ in word {
        x = map.eval(&x, prec);
    }
    Ok(x.sub(&anchor, prec).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::seq_from_str;

    fn dyadic(num: i64, den: i64) -> BigReal {
        BigReal::from_ratio(num, den, 256)
    }

    #[test]
    fn find_param_brackets_small_escape_codes() {
        // Targets 1^k A: the second critical value climbs the left lap for
        // k steps and lands exactly on the first critical point.
        let lo = BigReal::zero(256);
        let hi = BigReal::exact_i64(1, 256);
        let mut widths = Vec::new();
        for k in 1..=3 {
            let target = seq_from_str(&format!("{}A", "1".repeat(k))).unwrap();
            let b = find_param(Family::Cubic, &target, &lo, &hi, 96, 256).unwrap();
            assert!(!b.exact);
            assert_eq!(b.halvings_done, 96);
            // Residual at the bracket midpoint: the k-step image of the
            // critical value is near the first critical point.
            let map = make_map(Family::Cubic, &b.midpoint(), 256).unwrap();
            let resid = realization_residual(&map, &target, 256).unwrap();
            assert!(
                resid.to_f64() < 1e-20,
                "k={k}: residual {}",
                resid.to_f64()
            );
            widths.push(b.width().to_f64());
        }
        for w in &widths {
            assert!(*w < 2f64.powi(-90));
        }
    }

    #[test]
    fn find_param_rejects_bad_windows() {
        // Window entirely below the target's locus.
        let lo = BigReal::zero(256);
        let hi = dyadic(1, 1_048_576);
        let target = seq_from_str("12A").unwrap();
        match find_param(Family::Cubic, &target, &lo, &hi, 32, 256) {
            Err(ParamSearchError::WindowInvalid { side }) => assert_eq!(side, "high"),
            other => panic!("expected window rejection, got {other:?}"),
        }
    }

    #[test]
    fn conv_pair_produces_nested_shrinking_intervals() {
        // Base word 111 (sign +1) with odd repeat counts keeps the pair
        // ordered; successive repeat counts give nested intervals.
        let base = vec![Symbol::I1, Symbol::I1, Symbol::I1];
        let lo = BigReal::zero(256);
        let hi = dyadic(1, 64);
        let p3 = conv_pair(Family::Cubic, &base, 3, &lo, &hi, 96, 256).unwrap();
        assert_eq!(
            word_to_string(&p3.certified_prefix),
            format!("111{}", "2".repeat(5))
        );
        assert_eq!(word_to_string(&p3.s_next), "111222");
        assert!(p3.interval.lo.cmp_value(&p3.interval.hi) == Ordering::Less);
        assert!(p3.gamma1.cmp_value(&p3.gamma2) == Ordering::Less);

        let p5 = conv_pair(Family::Cubic, &base, 5, &lo, &hi, 96, 256).unwrap();
        // Nesting: the deeper interval sits inside the shallower one.
        assert!(p3.interval.contains(&p5.interval.lo));
        assert!(p3.interval.contains(&p5.interval.hi));
        assert!(p5.interval.width().to_f64() < p3.interval.width().to_f64());
    }

    #[test]
    fn conv_pair_rejects_wrong_parity() {
        let base = vec![Symbol::I1, Symbol::I1, Symbol::I1];
        let lo = BigReal::zero(256);
        let hi = dyadic(1, 64);
        match conv_pair(Family::Cubic, &base, 2, &lo, &hi, 48, 256) {
            Err(ParamSearchError::ParityInvalid { .. }) => {}
            other => panic!("expected parity rejection, got {other:?}"),
        }
    }
}
