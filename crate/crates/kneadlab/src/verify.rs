//! Finite-depth verification of finished constructions.
//!
//! A construction state records symbolic data — the realized word, the
//! stage lengths, the marked orbit times and their kinds, the scheduled
//! return bounds — together with certified parameter intervals. The
//! operations here replay orbits at concrete parameters and check the
//! numeric claims those marks stand for:
//!
//! - [`ce_windows`] — accumulated derivatives exceed `λ^n` on every index
//!   range between a stage boundary and the next dip mark;
//! - [`non_ce_witness`] — the accumulated derivative at each dip mark sits
//!   below `λ₂^p`, so expansion along the critical orbit fails at the
//!   marked times;
//! - [`recurrence`] — each close-return mark lands within its scheduled
//!   distance of the second critical point, without ever hitting it;
//! - [`combinatorial_equiv`] — in dual mode, both families' kneading
//!   prefixes agree through the full construction depth;
//! - [`dual_rate_contrast`] — in dual mode, the dip marks split: the first
//!   chain keeps its accumulated derivative above the window, the second
//!   loses it below;
//! - [`pullback_shrink`] — backward-orbit interval pullbacks and their
//!   measured contraction rate.
//!
//! Pass/fail is always decided by certified comparisons (error-separated
//! interval arithmetic); the floating-point numbers in a report are
//! display values for the two sides of each inequality, never the basis of
//! the verdict.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{ConstructError, ConstructionState, Mode, Rates};
use crate::families::{make_map, BimodalMap, Family, FamilyError};
use crate::numerics::{exact_midpoint, BigReal, NumericsError};
use crate::orbits::{
    invert_in_lap, itinerary, lap_multiplier, orbit_diagnostics, OrbitDiagnostics, OrbitError,
};
use crate::symbolic::{Symbol, SymbolicError};

#[derive(Debug, Error)]
pub enum VerifyError {
    /// The chosen preimage branch has no point mapping onto the current
    /// backward-orbit point.
    #[error("preimage branch unreachable at backward step {step}")]
    BranchDead { step: usize },
    #[error("bad verification input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ----------------------------------------------------------------------
// Reports
// ----------------------------------------------------------------------

/// One verified inequality instance: the proposition as text, the two
/// sides as display values, and the certified verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckInstance {
    pub name: String,
    pub pass: bool,
    /// The exact inequality tested, with its concrete indices and bounds.
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Identity of the verified map(s) plus the depth and tolerances used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportParams {
    pub family: String,
    pub gamma: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma2: Option<String>,
    pub depth: u64,
    pub precision_bits: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rates: Option<Rates>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rates2: Option<Rates>,
}

/// Outcome of one verification operation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Which operation produced the report.
    pub kind: String,
    pub params: ReportParams,
    pub checks: Vec<CheckInstance>,
    /// Index ranges and conditions the construction makes no claim about,
    /// listed for completeness; never counted as failures.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub unclassified: Vec<String>,
}

impl VerificationReport {
    fn new(kind: &str, params: ReportParams) -> Self {
        VerificationReport {
            kind: kind.to_string(),
            params,
            checks: Vec::new(),
            unclassified: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String, VerifyError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), VerifyError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Fixed-width human-readable rendering.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "report: {}", self.kind);
        let _ = writeln!(
            s,
            "family: {}  gamma: {}",
            self.params.family,
            shorten(&self.params.gamma)
        );
        if let Some(f2) = &self.params.family2 {
            let _ = writeln!(
                s,
                "family2: {}  gamma2: {}",
                f2,
                shorten(self.params.gamma2.as_deref().unwrap_or("-"))
            );
        }
        let _ = writeln!(
            s,
            "depth: {}  precision: {} bits",
            self.params.depth, self.params.precision_bits
        );
        let _ = writeln!(s, "{:-<78}", "");
        for c in &self.checks {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(
                s,
                "{verdict} {:<34} lhs {:>13.6} rhs {:>13.6}  {}",
                c.name, c.lhs, c.rhs, c.inequality
            );
            if let Some(n) = &c.note {
                let _ = writeln!(s, "     {n}");
            }
        }
        for u in &self.unclassified {
            let _ = writeln!(s, "note: {u}");
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(s, "result: {passed}/{} checks passed", self.checks.len());
        s
    }
}

fn shorten(s: &str) -> String {
    if s.len() <= 48 {
        s.to_string()
    } else {
        format!("{}…({} digits)", &s[..48], s.len())
    }
}

fn decimal_of(g: &BigReal) -> String {
    if g.is_exact() {
        g.exact_decimal()
    } else {
        g.display_decimal(40)
    }
}

fn ln_f64(x: &BigReal) -> Option<f64> {
    x.ln(96).ok().map(|v| v.to_f64())
}

/// Display logarithm: certified when possible, value-part fallback for
/// quantities whose error bar reaches zero (those always fail their
/// certified comparison anyway).
fn ln_loose(x: &BigReal) -> f64 {
    ln_f64(x).unwrap_or_else(|| {
        let v = x.to_f64().abs();
        if v > 0.0 {
            v.ln()
        } else {
            f64::NEG_INFINITY
        }
    })
}

fn t_final(state: &ConstructionState) -> Result<u64, VerifyError> {
    state
        .t
        .last()
        .copied()
        .ok_or_else(|| VerifyError::BadInput("state has no completed stages".to_string()))
}

fn final_bits(state: &ConstructionState) -> Result<u32, VerifyError> {
    Ok(state.stage_bits(state.stage_count())?)
}

fn base_params(
    state: &ConstructionState,
    gamma: &BigReal,
    bits: u32,
) -> Result<ReportParams, VerifyError> {
    Ok(ReportParams {
        family: state.family.clone(),
        gamma: decimal_of(gamma),
        family2: None,
        gamma2: None,
        depth: t_final(state)?,
        precision_bits: bits,
        rates: Some(state.chain_rates(0)?),
        rates2: None,
    })
}

fn containment_check(
    state: &ConstructionState,
    chain: usize,
    gamma: &BigReal,
    name: &str,
) -> Result<CheckInstance, VerifyError> {
    let iv = state.interval(chain, state.stage_count())?;
    let inside = iv.contains(gamma);
    Ok(CheckInstance {
        name: name.to_string(),
        pass: inside,
        inequality: format!(
            "{} <= gamma <= {}",
            shorten(&decimal_of(&iv.lo)),
            shorten(&decimal_of(&iv.hi))
        ),
        lhs: gamma.to_f64(),
        rhs: iv.midpoint().to_f64(),
        note: None,
    })
}

fn critical_orbit(
    family: Family,
    gamma: &BigReal,
    depth: usize,
    bits: u32,
) -> Result<(BimodalMap, OrbitDiagnostics), VerifyError> {
    let map = make_map(family, gamma, bits)?;
    let v = map.eval(map.c2(), bits);
    let diag = orbit_diagnostics(&map, &v, depth, bits);
    Ok((map, diag))
}

/// Incremental powers `base^0 .. base^n`.
fn powers(base: f64, n: usize, bits: u32) -> Vec<BigReal> {
    let b = BigReal::exact_f64(base, bits);
    let mut out = Vec::with_capacity(n + 1);
    out.push(BigReal::exact_i64(1, bits));
    for i in 1..=n {
        out.push(out[i - 1].mul(&b, bits));
    }
    out
}

// ----------------------------------------------------------------------
// Index partition
// ----------------------------------------------------------------------

/// How the verified index range `1..=t_final` decomposes: growth windows,
/// dip marks (where growth is deliberately broken), and the unclassified
/// tail indices inside each dip stage after its mark. Ranges are closed;
/// windows may share endpoints with each other but never contain a mark
/// or a gap index.
#[derive(Debug, Clone)]
pub struct IndexPartition {
    pub windows: Vec<(u64, u64)>,
    pub dip_marks: Vec<u64>,
    pub gaps: Vec<(u64, u64)>,
    pub t_final: u64,
}

/// Classify every orbit index of a state by what the construction
/// certifies there. Each stage contributes the range from the previous
/// stage's length: a close-return stage is one solid growth window, while
/// a dip stage splits into the window before its mark, the mark itself,
/// and an unclassified gap up to the stage end.
pub fn index_partition(state: &ConstructionState) -> Result<IndexPartition, VerifyError> {
    let tf = t_final(state)?;
    if state.step_log.len() != state.stage_count() {
        return Err(VerifyError::BadInput(
            "stage records inconsistent with stage lengths".to_string(),
        ));
    }
    let mut windows = vec![(1u64, state.t[0])];
    let mut dip_marks = Vec::new();
    let mut gaps = Vec::new();
    for stage in 2..=state.stage_count() {
        let rec = &state.step_log[stage - 1];
        let lo = state.t[stage - 2];
        let hi = state.t[stage - 1];
        match rec.kind.as_str() {
            "a" => {
                let mark = state
                    .p_marks
                    .iter()
                    .find(|m| m.stage as usize == stage && m.kind == "a")
                    .ok_or_else(|| {
                        VerifyError::BadInput(format!("stage {stage} has no dip mark"))
                    })?;
                windows.push((lo, mark.p - 1));
                dip_marks.push(mark.p);
                if mark.p + 1 <= hi - 1 {
                    gaps.push((mark.p + 1, hi - 1));
                }
                if stage == state.stage_count() {
                    // No later stage opens a window at this length, so the
                    // stage-end index (growth restored across the whole
                    // block) stands alone.
                    windows.push((hi, hi));
                }
            }
            "b" => windows.push((lo, hi)),
            other => {
                return Err(VerifyError::BadInput(format!(
                    "unknown step kind {other:?} in stage {stage}"
                )))
            }
        }
    }
    Ok(IndexPartition {
        windows,
        dip_marks,
        gaps,
        t_final: tf,
    })
}

// ----------------------------------------------------------------------
// ce_windows
// ----------------------------------------------------------------------

/// Check `d_n > λ^n` for every index in every growth window of the state,
/// replaying the critical orbit of the primary chain at `gamma`. One check
/// per window, carrying the worst margin `ln d_n − n ln λ` and the index
/// attaining it; gap ranges are listed as unclassified.
pub fn ce_windows(
    state: &ConstructionState,
    gamma: &BigReal,
) -> Result<VerificationReport, VerifyError> {
    ce_windows_at(state, gamma, final_bits(state)?)
}

/// [`ce_windows`] at an explicit evaluation precision.
pub fn ce_windows_at(
    state: &ConstructionState,
    gamma: &BigReal,
    bits: u32,
) -> Result<VerificationReport, VerifyError> {
    let part = index_partition(state)?;
    let rates = state.chain_rates(0)?;
    let family = state.families()?[0];
    let mut report = VerificationReport::new("ce_windows", base_params(state, gamma, bits)?);

    let inside = containment_check(state, 0, gamma, "parameter_in_final_interval")?;
    let go = inside.pass;
    report.checks.push(inside);
    if !go {
        return Ok(report);
    }

    let depth = part.t_final as usize;
    let (_, diag) = critical_orbit(family, gamma, depth, bits)?;
    let pows = powers(rates.lambda, depth, bits);
    let ln_lam = rates.lambda.ln();

    for &(lo, hi) in &part.windows {
        let mut pass = true;
        let mut worst = f64::MAX;
        let mut worst_n = lo;
        let mut first_bad: Option<u64> = None;
        for n in lo..=hi {
            let d = &diag.deriv_products[n as usize];
            let certified =
                d.cmp_certified(&pows[n as usize], bits) == Some(Ordering::Greater);
            if !certified {
                pass = false;
                first_bad.get_or_insert(n);
            }
            let margin = ln_loose(d) - (n as f64) * ln_lam;
            if margin < worst {
                worst = margin;
                worst_n = n;
            }
        }
        let d_worst = &diag.deriv_products[worst_n as usize];
        report.checks.push(CheckInstance {
            name: format!("growth_window[{lo},{hi}]"),
            pass,
            inequality: format!(
                "ln d_n > n*ln({}) for all n in [{lo},{hi}]",
                rates.lambda
            ),
            lhs: ln_loose(d_worst),
            rhs: (worst_n as f64) * ln_lam,
            note: Some(match first_bad {
                Some(n) => format!("first uncertified index n = {n}"),
                None => format!("worst margin {worst:.4} at n = {worst_n}"),
            }),
        });
    }
    for &(lo, hi) in &part.gaps {
        report.unclassified.push(format!(
            "indices [{lo},{hi}] follow a dip mark and carry no growth claim"
        ));
    }
    Ok(report)
}

// ----------------------------------------------------------------------
// non_ce_witness
// ----------------------------------------------------------------------

/// Check `d_p < λ₂^p` at every dip mark: the finite-stage witness that
/// expansion along the critical orbit fails at the marked times. Requires
/// the chain's dip window to sit below 1 (`λ₂ < 1`), so each pass
/// certifies genuine decay; the per-mark slope `ln d_p / p` is recorded.
/// The verdicts concern the sampled parameter at the finite depth only,
/// never a limit object.
pub fn non_ce_witness(
    state: &ConstructionState,
    gamma: &BigReal,
) -> Result<VerificationReport, VerifyError> {
    non_ce_witness_at(state, gamma, final_bits(state)?)
}

/// [`non_ce_witness`] at an explicit evaluation precision.
pub fn non_ce_witness_at(
    state: &ConstructionState,
    gamma: &BigReal,
    bits: u32,
) -> Result<VerificationReport, VerifyError> {
    let rates = state.chain_rates(0)?;
    if rates.lambda_hi >= 1.0 {
        return Err(VerifyError::BadInput(format!(
            "dip-rate window top {} is not below 1; marks certify no decay",
            rates.lambda_hi
        )));
    }
    let family = state.families()?[0];
    let mut report =
        VerificationReport::new("non_ce_witness", base_params(state, gamma, bits)?);
    let marks: Vec<u64> = state
        .p_marks
        .iter()
        .filter(|m| m.kind == "a")
        .map(|m| m.p)
        .collect();
    if marks.is_empty() {
        report.checks.push(CheckInstance {
            name: "dip_marks_present".to_string(),
            pass: true,
            inequality: "no dip marks recorded".to_string(),
            lhs: 0.0,
            rhs: 0.0,
            note: Some("vacuously true".to_string()),
        });
        report
            .unclassified
            .push("warning: state records no dip marks; nothing was checked".to_string());
        return Ok(report);
    }

    let inside = containment_check(state, 0, gamma, "parameter_in_final_interval")?;
    let go = inside.pass;
    report.checks.push(inside);
    if !go {
        return Ok(report);
    }

    let depth = *marks.iter().max().expect("nonempty") as usize;
    let (_, diag) = critical_orbit(family, gamma, depth, bits)?;
    let pows = powers(rates.lambda_hi, depth, bits);
    let ln_hi = rates.lambda_hi.ln();
    for &p in &marks {
        let d = &diag.deriv_products[p as usize];
        let pass = d.cmp_certified(&pows[p as usize], bits) == Some(Ordering::Less);
        let ln_d = ln_loose(d);
        report.checks.push(CheckInstance {
            name: format!("dip_mark[{p}]"),
            pass,
            inequality: format!("ln d_{p} < {p}*ln({})", rates.lambda_hi),
            lhs: ln_d,
            rhs: (p as f64) * ln_hi,
            note: Some(format!(
                "finite-sample slope ln d_p / p = {:.4}",
                ln_d / p as f64
            )),
        });
    }
    Ok(report)
}

// ----------------------------------------------------------------------
// recurrence
// ----------------------------------------------------------------------

/// Check each close-return mark against its scheduled bound: the orbit
/// point one step before the mark lies within `2^-j` of the second
/// critical point, and strictly off it.
pub fn recurrence(
    state: &ConstructionState,
    gamma: &BigReal,
) -> Result<VerificationReport, VerifyError> {
    recurrence_at(state, gamma, final_bits(state)?)
}

/// [`recurrence`] at an explicit evaluation precision.
pub fn recurrence_at(
    state: &ConstructionState,
    gamma: &BigReal,
    bits: u32,
) -> Result<VerificationReport, VerifyError> {
    let family = state.families()?[0];
    let mut report = VerificationReport::new("recurrence", base_params(state, gamma, bits)?);
    let marks: Vec<u64> = state
        .p_marks
        .iter()
        .filter(|m| m.kind == "b")
        .map(|m| m.p)
        .collect();
    if marks.len() != state.delta_log2.len() {
        return Err(VerifyError::BadInput(format!(
            "{} return marks but {} scheduled bounds",
            marks.len(),
            state.delta_log2.len()
        )));
    }
    if marks.is_empty() {
        report.checks.push(CheckInstance {
            name: "return_marks_present".to_string(),
            pass: true,
            inequality: "no return marks recorded".to_string(),
            lhs: 0.0,
            rhs: 0.0,
            note: Some("vacuously true".to_string()),
        });
        report
            .unclassified
            .push("warning: state records no return marks; nothing was checked".to_string());
        return Ok(report);
    }

    let inside = containment_check(state, 0, gamma, "parameter_in_final_interval")?;
    let go = inside.pass;
    report.checks.push(inside);
    if !go {
        return Ok(report);
    }

    let depth = *marks.iter().max().expect("nonempty") as usize;
    let (map, diag) = critical_orbit(family, gamma, depth, bits)?;
    let zero = BigReal::zero(bits);
    for (i, &p) in marks.iter().enumerate() {
        let j = state.delta_log2[i];
        let bound = BigReal::exact_i64(1, bits).mul_2exp(-(j as i32));
        let dist = diag.points[p as usize - 1].sub(map.c2(), bits).abs();
        let within = dist.cmp_certified(&bound, bits) == Some(Ordering::Less);
        report.checks.push(CheckInstance {
            name: format!("return[{p}]_within"),
            pass: within,
            inequality: format!("|x_{} - c2| < 2^-{j}", p - 1),
            lhs: dist.to_f64(),
            rhs: bound.to_f64(),
            note: None,
        });
        let positive = dist.cmp_certified(&zero, bits) == Some(Ordering::Greater);
        report.checks.push(CheckInstance {
            name: format!("return[{p}]_positive"),
            pass: positive,
            inequality: format!("|x_{} - c2| > 0", p - 1),
            lhs: dist.to_f64(),
            rhs: 0.0,
            note: Some("the second critical point is not periodic here".to_string()),
        });
    }
    Ok(report)
}

// ----------------------------------------------------------------------
// combinatorial_equiv
// ----------------------------------------------------------------------

/// Dual-mode check that both chains realize the same symbolic data: the
/// kneading prefixes agree through the full construction depth, and both
/// maps have the same monotonicity shape with the first critical value
/// pinned at the right endpoint.
pub fn combinatorial_equiv(
    state: &ConstructionState,
    gamma: &BigReal,
    gamma2: &BigReal,
) -> Result<VerificationReport, VerifyError> {
    let bits = final_bits(state)?;
    let depth = t_final(state)? as usize;
    combinatorial_equiv_at(state, gamma, gamma2, depth, bits)
}

/// [`combinatorial_equiv`] at an explicit depth and precision.
pub fn combinatorial_equiv_at(
    state: &ConstructionState,
    gamma: &BigReal,
    gamma2: &BigReal,
    depth: usize,
    bits: u32,
) -> Result<VerificationReport, VerifyError> {
    if state.mode()? != Mode::Dual {
        return Err(VerifyError::BadInput(
            "combinatorial equivalence needs a dual-mode state".to_string(),
        ));
    }
    let families = state.families()?;
    let mut params = base_params(state, gamma, bits)?;
    params.family2 = state.family2.clone();
    params.gamma2 = Some(decimal_of(gamma2));
    params.rates2 = Some(state.chain_rates(1)?);
    let mut report = VerificationReport::new("combinatorial_equiv", params);

    report
        .checks
        .push(containment_check(state, 0, gamma, "chain0_in_final_interval")?);
    report
        .checks
        .push(containment_check(state, 1, gamma2, "chain1_in_final_interval")?);

    let gammas = [gamma, gamma2];
    let mut prefixes: Vec<Vec<Symbol>> = Vec::new();
    for (ci, family) in families.iter().enumerate() {
        let map = make_map(*family, gammas[ci], bits)?;
        let one = BigReal::exact_i64(1, bits);

        // Shape: rising outer laps, falling middle lap.
        let d0 = map.deriv(&BigReal::zero(bits), bits);
        let d1 = map.deriv(&one, bits);
        let zero = BigReal::zero(bits);
        let rising = d0.cmp_certified(&zero, bits) == Some(Ordering::Greater)
            && d1.cmp_certified(&zero, bits) == Some(Ordering::Greater);
        report.checks.push(CheckInstance {
            name: format!("{family}:outer_laps_rising"),
            pass: rising,
            inequality: "g'(0) > 0 and g'(1) > 0".to_string(),
            lhs: d0.to_f64().min(d1.to_f64()),
            rhs: 0.0,
            note: None,
        });
        let mid = exact_midpoint(map.c1(), map.c2());
        let dm = map.deriv(&mid, bits);
        let falling = dm.cmp_certified(&zero, bits) == Some(Ordering::Less);
        report.checks.push(CheckInstance {
            name: format!("{family}:middle_lap_falling"),
            pass: falling,
            inequality: "g'((c1+c2)/2) < 0".to_string(),
            lhs: dm.to_f64(),
            rhs: 0.0,
            note: None,
        });
        // First critical value pinned at the fixed right endpoint, so the
        // only informative kneading data is the second critical orbit.
        let peak_err = map.eval(map.c1(), bits).sub(&one, bits).abs();
        let tol = BigReal::exact_i64(1, bits).mul_2exp(-((bits / 4) as i32));
        let pinned = peak_err.cmp_certified(&tol, bits) == Some(Ordering::Less);
        report.checks.push(CheckInstance {
            name: format!("{family}:first_peak_pinned"),
            pass: pinned,
            inequality: format!("|g(c1) - 1| < 2^-{}", bits / 4),
            lhs: peak_err.to_f64(),
            rhs: tol.to_f64(),
            note: None,
        });

        let v = map.eval(map.c2(), bits);
        let (prefix, ambiguous_at) = resolved_prefix(&map, &v, depth, bits)?;
        if let Some(at) = ambiguous_at {
            report.unclassified.push(format!(
                "chain {ci} itinerary unresolved at step {at} (orbit too close to a critical \
                 point at this precision)"
            ));
        }
        prefixes.push(prefix);
    }

    let matched = prefixes[0]
        .iter()
        .zip(&prefixes[1])
        .take_while(|(a, b)| a == b)
        .count();
    let full = matched == depth && prefixes[0].len() == depth && prefixes[1].len() == depth;
    let note = if full {
        None
    } else if matched < prefixes[0].len().min(prefixes[1].len()) {
        Some(format!(
            "first mismatch at index {matched}: {} vs {}",
            prefixes[0][matched].to_char(),
            prefixes[1][matched].to_char()
        ))
    } else {
        Some(format!(
            "agreement checked only to index {} (shorter resolved prefix)",
            matched
        ))
    };
    report.checks.push(CheckInstance {
        name: "kneading_prefix_agree".to_string(),
        pass: full,
        inequality: format!("kneading prefixes of both chains agree to depth {depth}"),
        lhs: matched as f64,
        rhs: depth as f64,
        note,
    });
    Ok(report)
}

/// Itinerary prefix with ambiguity downgraded to truncation: when a step's
/// symbol cannot be certified, the resolved part is returned along with
/// the failing step index.
fn resolved_prefix(
    map: &BimodalMap,
    start: &BigReal,
    depth: usize,
    bits: u32,
) -> Result<(Vec<Symbol>, Option<usize>), VerifyError> {
    match itinerary(map, start, depth, bits) {
        Ok(it) => Ok((it.prefix(depth), None)),
        Err(OrbitError::AmbiguousSymbol { step }) => {
            let it = itinerary(map, start, step, bits)?;
            Ok((it.prefix(step), Some(step)))
        }
        Err(e) => Err(e.into()),
    }
}

// ----------------------------------------------------------------------
// dual_rate_contrast
// ----------------------------------------------------------------------

/// Dual-mode check at the final interval midpoints: at every dip mark the
/// first chain's accumulated derivative exceeds its `λ₂^p` while the
/// second chain's falls below its `λ₁^p`, and each dip stage's realized
/// run ratio lies inside the window spanned by the two chains' measured
/// expansion ratios.
pub fn dual_rate_contrast(state: &ConstructionState) -> Result<VerificationReport, VerifyError> {
    dual_rate_contrast_at(state, final_bits(state)?)
}

/// [`dual_rate_contrast`] at an explicit evaluation precision.
pub fn dual_rate_contrast_at(
    state: &ConstructionState,
    bits: u32,
) -> Result<VerificationReport, VerifyError> {
    if state.mode()? != Mode::Dual {
        return Err(VerifyError::BadInput(
            "rate contrast needs a dual-mode state".to_string(),
        ));
    }
    let families = state.families()?;
    let last = state.stage_count();
    let mids = [
        state.interval(0, last)?.midpoint(),
        state.interval(1, last)?.midpoint(),
    ];
    let mut params = base_params(state, &mids[0], bits)?;
    params.family2 = state.family2.clone();
    params.gamma2 = Some(decimal_of(&mids[1]));
    params.rates2 = Some(state.chain_rates(1)?);
    let mut report = VerificationReport::new("dual_rate_contrast", params);

    let marks: Vec<u64> = state
        .p_marks
        .iter()
        .filter(|m| m.kind == "a")
        .map(|m| m.p)
        .collect();
    if marks.is_empty() {
        report.checks.push(CheckInstance {
            name: "dip_marks_present".to_string(),
            pass: true,
            inequality: "no dip marks recorded".to_string(),
            lhs: 0.0,
            rhs: 0.0,
            note: Some("vacuously true".to_string()),
        });
        report
            .unclassified
            .push("warning: state records no dip marks; nothing was checked".to_string());
        return Ok(report);
    }

    let depth = *marks.iter().max().expect("nonempty") as usize;
    let r0 = state.chain_rates(0)?;
    let r1 = state.chain_rates(1)?;
    let (map0, diag0) = critical_orbit(families[0], &mids[0], depth, bits)?;
    let (map1, diag1) = critical_orbit(families[1], &mids[1], depth, bits)?;
    let hi_pows = powers(r0.lambda_hi, depth, bits);
    let lo_pows = powers(r1.lambda_lo, depth, bits);
    for &p in &marks {
        let d0 = &diag0.deriv_products[p as usize];
        let above = d0.cmp_certified(&hi_pows[p as usize], bits) == Some(Ordering::Greater);
        report.checks.push(CheckInstance {
            name: format!("{}:dip_above[{p}]", families[0]),
            pass: above,
            inequality: format!("ln d_{p} > {p}*ln({})", r0.lambda_hi),
            lhs: ln_loose(d0),
            rhs: (p as f64) * r0.lambda_hi.ln(),
            note: None,
        });
        let d1 = &diag1.deriv_products[p as usize];
        let below = d1.cmp_certified(&lo_pows[p as usize], bits) == Some(Ordering::Less);
        report.checks.push(CheckInstance {
            name: format!("{}:dip_below[{p}]", families[1]),
            pass: below,
            inequality: format!("ln d_{p} < {p}*ln({})", r1.lambda_lo),
            lhs: ln_loose(d1),
            rhs: (p as f64) * r1.lambda_lo.ln(),
            note: None,
        });
    }

    // Realized run ratios against the window spanned by the measured
    // per-chain balance ratios (order exponent × right-lap rate over
    // mid-lap rate). The ratio sitting strictly inside the window is what
    // makes one chain's dips trend up and the other's trend down.
    let ratio = |map: &BimodalMap, fam: Family| -> Result<f64, VerifyError> {
        let lam_mid = ln_loose(&lap_multiplier(map, Symbol::I2, bits)?);
        let lam_right = ln_loose(&lap_multiplier(map, Symbol::I3, bits)?);
        let expn = 1.0 - 1.0 / fam.critical_order() as f64;
        Ok(expn * lam_right / lam_mid)
    };
    let theta_lo = ratio(&map0, families[0])?;
    let theta_hi = ratio(&map1, families[1])?;
    for rec in state.step_log.iter().filter(|r| r.kind == "a") {
        let eta = rec.eta.unwrap_or(f64::NAN);
        report.checks.push(CheckInstance {
            name: format!("run_ratio_window[stage {}]", rec.stage),
            pass: theta_lo < eta && eta < theta_hi,
            inequality: format!("{theta_lo:.4} < k1/k2 < {theta_hi:.4}"),
            lhs: theta_lo,
            rhs: theta_hi,
            note: Some(format!("realized k1/k2 = {eta:.4}")),
        });
    }
    Ok(report)
}

// ----------------------------------------------------------------------
// Pullback
// ----------------------------------------------------------------------

/// How the preimage branch is chosen at each backward step.
#[derive(Debug, Clone)]
pub enum BranchPolicy {
    /// Always the leftmost lap with a preimage.
    Leftmost,
    /// Uniformly among the laps with a preimage, from a seeded generator.
    Random { seed: u64 },
    /// Follow a prescribed lap word, cycled when shorter than the depth.
    Directed(Vec<Symbol>),
}

/// One backward-orbit pullback: the interval diameters along the orbit
/// and the fitted contraction rates.
#[derive(Debug, Clone)]
pub struct PullbackRun {
    /// `depth + 1` component diameters, the starting interval's first.
    pub diameters: Vec<BigReal>,
    /// The lap chosen at each backward step.
    pub branches: Vec<Symbol>,
    /// `(ln diam_0 - ln diam_N) / N`.
    pub rho_endpoint: f64,
    /// Least-squares decay rate of `ln diam_n` over the last half of the
    /// orbit (the transient-free estimate).
    pub rho_fit: f64,
}

/// Pull the interval `(x-δ, x+δ) ∩ [0,1]` back along a chosen backward
/// orbit of `x`, keeping at each step the preimage component (inside the
/// chosen lap, clipped at its ends) that contains the backward orbit
/// point. Returns the component diameters and the fitted contraction
/// rate; positive rates mean exponential shrinking.
///
/// The evaluation precision is raised automatically to `5·depth + 256`
/// bits at least, keeping the inversion tolerance far below the smallest
/// reachable diameter (no branch of either family contracts faster than
/// `e^3.2` per step).
pub fn pullback_shrink(
    map: &BimodalMap,
    x: &BigReal,
    delta: &BigReal,
    depth: usize,
    policy: &BranchPolicy,
    prec: u32,
) -> Result<PullbackRun, VerifyError> {
    let bits = prec.max(depth as u32 * 5 + 256);
    let zero = BigReal::zero(bits);
    let one = BigReal::exact_i64(1, bits);
    if delta.cmp_value(&zero) == Ordering::Less {
        return Err(VerifyError::BadInput("negative radius".to_string()));
    }
    if let BranchPolicy::Directed(word) = policy {
        if word.is_empty() {
            return Err(VerifyError::BadInput("empty branch word".to_string()));
        }
        if word.iter().any(|s| s.is_critical()) {
            return Err(VerifyError::BadInput(
                "branch words use lap symbols only".to_string(),
            ));
        }
    }
    let mut rng = match policy {
        BranchPolicy::Random { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    let px0 = x.with_prec(bits);
    let mut lo = px0.sub(delta, bits);
    if lo.cmp_value(&zero) == Ordering::Less {
        lo = zero.clone();
    }
    let mut hi = px0.add(delta, bits);
    if hi.cmp_value(&one) == Ordering::Greater {
        hi = one.clone();
    }
    let mut px = px0;
    let start_diam = hi.sub(&lo, bits).abs();
    // A degenerate starting window stays a single point under branch
    // inverses; tracking it endpoint-wise would only accumulate the
    // inversion tolerances.
    let degenerate = start_diam.is_exact() && start_diam.sign() == crate::numerics::Sign::Zero;
    let mut diameters = vec![start_diam];
    let mut branches = Vec::with_capacity(depth);

    for step in 0..depth {
        let lap = match policy {
            BranchPolicy::Leftmost => [Symbol::I1, Symbol::I2, Symbol::I3]
                .into_iter()
                .find(|&lap| lap_has_preimage(map, lap, &px, bits))
                .ok_or(VerifyError::BranchDead { step })?,
            BranchPolicy::Random { .. } => {
                let feasible: Vec<Symbol> = [Symbol::I1, Symbol::I2, Symbol::I3]
                    .into_iter()
                    .filter(|&lap| lap_has_preimage(map, lap, &px, bits))
                    .collect();
                if feasible.is_empty() {
                    return Err(VerifyError::BranchDead { step });
                }
                feasible[rng.as_mut().expect("random policy").gen_range(0..feasible.len())]
            }
            BranchPolicy::Directed(word) => {
                let lap = word[step % word.len()];
                if !lap_has_preimage(map, lap, &px, bits) {
                    return Err(VerifyError::BranchDead { step });
                }
                lap
            }
        };

        if degenerate {
            px = invert_in_lap(map, lap, &px, bits)
                .map_err(|_| VerifyError::BranchDead { step })?;
            lo = px.clone();
            hi = px.clone();
            diameters.push(zero.clone());
            branches.push(lap);
            continue;
        }
        let (dom_lo, dom_hi) = lap_domain(map, lap, &zero, &one);
        let img_at_lo = map.eval(dom_lo, bits);
        let img_at_hi = map.eval(dom_hi, bits);
        let pa = branch_preimage(map, lap, &lo, dom_lo, dom_hi, &img_at_lo, &img_at_hi, bits)?;
        let pb = branch_preimage(map, lap, &hi, dom_lo, dom_hi, &img_at_lo, &img_at_hi, bits)?;
        px = invert_in_lap(map, lap, &px, bits)
            .map_err(|_| VerifyError::BranchDead { step })?;
        if pa.cmp_value(&pb) == Ordering::Greater {
            lo = pb;
            hi = pa;
        } else {
            lo = pa;
            hi = pb;
        }
        diameters.push(hi.sub(&lo, bits).abs());
        branches.push(lap);
    }

    let rho_endpoint = match (ln_f64(&diameters[0]), ln_f64(&diameters[depth])) {
        (Some(a), Some(b)) if depth > 0 => (a - b) / depth as f64,
        _ => f64::NAN,
    };
    let pts: Vec<(f64, f64)> = (depth / 2..=depth)
        .filter_map(|n| ln_f64(&diameters[n]).map(|y| (n as f64, y)))
        .collect();
    let rho_fit = if pts.len() >= 2 {
        let nx = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nx;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nx;
        let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        -(cov / var)
    } else {
        f64::NAN
    };
    Ok(PullbackRun {
        diameters,
        branches,
        rho_endpoint,
        rho_fit,
    })
}

/// Independently seeded random-branch pullbacks, run in parallel.
pub fn pullback_ensemble(
    map: &BimodalMap,
    x: &BigReal,
    delta: &BigReal,
    depth: usize,
    count: usize,
    seed: u64,
    prec: u32,
) -> Result<Vec<PullbackRun>, VerifyError> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let policy = BranchPolicy::Random {
                seed: seed.wrapping_add(i as u64),
            };
            pullback_shrink(map, x, delta, depth, &policy, prec)
        })
        .collect()
}

fn lap_domain<'a>(
    map: &'a BimodalMap,
    lap: Symbol,
    zero: &'a BigReal,
    one: &'a BigReal,
) -> (&'a BigReal, &'a BigReal) {
    match lap {
        Symbol::I1 => (zero, map.c1()),
        Symbol::I2 => (map.c1(), map.c2()),
        _ => (map.c2(), one),
    }
}

fn lap_has_preimage(map: &BimodalMap, lap: Symbol, y: &BigReal, bits: u32) -> bool {
    invert_in_lap(map, lap, y, bits).is_ok()
}

/// Preimage of `y` inside one lap, clipped to the lap ends when `y` falls
/// outside the lap's image (that is where the component is cut by a
/// critical point or a domain endpoint).
#[allow(clippy::too_many_arguments)]
fn branch_preimage(
    map: &BimodalMap,
    lap: Symbol,
    y: &BigReal,
    dom_lo: &BigReal,
    dom_hi: &BigReal,
    img_at_lo: &BigReal,
    img_at_hi: &BigReal,
    bits: u32,
) -> Result<BigReal, VerifyError> {
    let rising = lap != Symbol::I2;
    let (img_min, img_max, at_min, at_max) = if rising {
        (img_at_lo, img_at_hi, dom_lo, dom_hi)
    } else {
        (img_at_hi, img_at_lo, dom_hi, dom_lo)
    };
    if y.cmp_value(img_min) != Ordering::Greater {
        return Ok(at_min.clone());
    }
    if y.cmp_value(img_max) != Ordering::Less {
        return Ok(at_max.clone());
    }
    match invert_in_lap(map, lap, y, bits) {
        Ok(p) => Ok(p),
        Err(OrbitError::BranchUnreachable { .. }) => {
            // The strict value-order test put y inside the image but the
            // certified bracket disagreed within error; clip to the nearer
            // end.
            let to_min = y.sub(img_min, bits).abs();
            let to_max = y.sub(img_max, bits).abs();
            if to_min.cmp_value(&to_max) == Ordering::Less {
                Ok(at_min.clone())
            } else {
                Ok(at_max.clone())
            }
        }
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{
        run_construction, RunConfig, StageInterval, StepKind, StepRecord,
    };
    use crate::symbolic::word_to_string;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn ab_state() -> &'static ConstructionState {
        static S: OnceLock<ConstructionState> = OnceLock::new();
        S.get_or_init(|| {
            let cfg = RunConfig::single(Family::Cubic, vec![StepKind::A, StepKind::B]);
            run_construction(&cfg, None).expect("single [a,b] construction")
        })
    }

    fn dual_state() -> &'static ConstructionState {
        static S: OnceLock<ConstructionState> = OnceLock::new();
        S.get_or_init(|| {
            let cfg = RunConfig::dual(vec![StepKind::A]);
            run_construction(&cfg, None).expect("dual [a] construction")
        })
    }

    /// A single-stage state whose "construction" is just the full-measure
    /// parameter 0 of the cubic family: the critical orbit sits on the
    /// fixed endpoint and every accumulated derivative is exactly 9^n.
    fn chebyshev_state(depth: u64) -> ConstructionState {
        ConstructionState {
            version: 1,
            mode: "single".to_string(),
            family: "cubic".to_string(),
            family2: None,
            schedule: String::new(),
            precision_bits: 256,
            rates: Rates::single_default(),
            rates2: None,
            prefix: "1".repeat(depth as usize),
            t: vec![depth],
            p_marks: Vec::new(),
            delta_log2: Vec::new(),
            intervals: vec![StageInterval {
                lo: "0".to_string(),
                hi: "0".to_string(),
            }],
            intervals2: None,
            step_log: vec![StepRecord {
                stage: 1,
                kind: "bootstrap".to_string(),
                k0: Some(0),
                k1: 0,
                k2: None,
                k3: None,
                attempts: 1,
                eta: None,
                eat_threshold: 0.0,
                checks: Vec::new(),
                width_log2: 0.0,
                bits: 256,
            }],
        }
    }

    #[test]
    fn partition_covers_every_index_exactly_once() {
        let st = ab_state();
        let part = index_partition(st).unwrap();
        assert_eq!(part.dip_marks.len(), 1);
        for n in 1..=part.t_final {
            let in_window = part.windows.iter().any(|&(a, b)| a <= n && n <= b);
            let is_mark = part.dip_marks.contains(&n);
            let in_gap = part.gaps.iter().any(|&(a, b)| a <= n && n <= b);
            assert!(
                in_window || is_mark || in_gap,
                "index {n} classified nowhere"
            );
            assert!(
                !(is_mark && in_window) && !(in_gap && in_window) && !(is_mark && in_gap),
                "index {n} classified twice"
            );
        }
    }

    #[test]
    fn growth_windows_pass_at_the_final_midpoint() {
        let st = ab_state();
        let mid = st.interval(0, st.stage_count()).unwrap().midpoint();
        let rep = ce_windows(st, &mid).unwrap();
        assert!(rep.all_pass(), "{}", rep.table());
        assert!(
            rep.unclassified.iter().any(|u| u.contains("dip mark")),
            "gap listing missing"
        );

        // The report round-trips through its JSON form.
        let js = rep.to_json().unwrap();
        let back: VerificationReport = serde_json::from_str(&js).unwrap();
        assert_eq!(js, back.to_json().unwrap());

        // Doubling the evaluation precision reproduces every recorded side.
        let bits = st.stage_bits(st.stage_count()).unwrap();
        let rep2 = ce_windows_at(st, &mid, bits * 2).unwrap();
        assert_eq!(rep.checks.len(), rep2.checks.len());
        for (a, b) in rep.checks.iter().zip(&rep2.checks) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.pass, b.pass);
            assert!(
                (a.lhs - b.lhs).abs() <= 1e-9 * (1.0 + a.lhs.abs()),
                "{}: lhs {} vs {}",
                a.name,
                a.lhs,
                b.lhs
            );
            assert!((a.rhs - b.rhs).abs() <= 1e-9 * (1.0 + a.rhs.abs()));
        }
    }

    #[test]
    fn growth_report_rejects_an_outside_parameter() {
        let st = ab_state();
        let outside = BigReal::exact_f64(0.25, 256);
        let rep = ce_windows(st, &outside).unwrap();
        assert!(!rep.all_pass());
        assert_eq!(rep.checks.len(), 1, "replay must stop at containment");
    }

    #[test]
    fn chebyshev_orbit_grows_everywhere() {
        let st = chebyshev_state(50);
        let rep = ce_windows(&st, &BigReal::zero(256)).unwrap();
        assert!(rep.all_pass(), "{}", rep.table());
        let w = rep
            .checks
            .iter()
            .find(|c| c.name.starts_with("growth_window"))
            .unwrap();
        // d_n = 9^n exactly, so the worst margin sits at n = 1.
        let expect = 9f64.ln() - 1.2f64.ln();
        assert!(
            (w.lhs - w.rhs - expect).abs() < 1e-9,
            "lhs {} rhs {}",
            w.lhs,
            w.rhs
        );
    }

    #[test]
    fn dip_witness_and_returns_pass_at_the_final_midpoint() {
        let st = ab_state();
        let mid = st.interval(0, st.stage_count()).unwrap().midpoint();
        let p = st.p_marks[0].p;

        let rep = non_ce_witness(st, &mid).unwrap();
        assert!(rep.all_pass(), "{}", rep.table());
        let dip = rep
            .checks
            .iter()
            .find(|c| c.name == format!("dip_mark[{p}]"))
            .unwrap();
        assert!(dip.lhs < dip.rhs && dip.rhs < 0.0);
        assert!(dip.note.as_deref().unwrap().contains("slope"));

        let rep = recurrence(st, &mid).unwrap();
        assert!(rep.all_pass(), "{}", rep.table());
        let pb = st.p_marks[1].p;
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name == format!("return[{pb}]_within")));
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name == format!("return[{pb}]_positive")));
    }

    #[test]
    fn witness_ops_are_vacuous_without_marks() {
        let st = chebyshev_state(12);
        let g = BigReal::zero(256);
        let rep = non_ce_witness(&st, &g).unwrap();
        assert!(rep.all_pass());
        assert!(rep.unclassified.iter().any(|u| u.contains("warning")));
        let rep = recurrence(&st, &g).unwrap();
        assert!(rep.all_pass());
        assert!(rep.unclassified.iter().any(|u| u.contains("warning")));
    }

    #[test]
    fn dip_witness_needs_a_decaying_window() {
        let st = dual_state();
        let mid = st.interval(0, st.stage_count()).unwrap().midpoint();
        let err = non_ce_witness(st, &mid).unwrap_err();
        assert!(matches!(err, VerifyError::BadInput(_)), "{err}");
    }

    #[test]
    fn dual_chains_share_their_kneading_prefix() {
        let st = dual_state();
        let g1 = st.interval(0, st.stage_count()).unwrap().midpoint();
        let g2 = st.interval(1, st.stage_count()).unwrap().midpoint();
        let rep = combinatorial_equiv(st, &g1, &g2).unwrap();
        assert!(rep.all_pass(), "{}", rep.table());

        // Depth zero is trivially in agreement.
        let bits = st.stage_bits(st.stage_count()).unwrap();
        let rep0 = combinatorial_equiv_at(st, &g1, &g2, 0, bits).unwrap();
        assert!(rep0
            .checks
            .iter()
            .any(|c| c.name == "kneading_prefix_agree" && c.pass));

        // At parameter 0 the second chain's critical orbit pins to the
        // left fixed endpoint, so its itinerary stays in the first lap and
        // diverges from the realized word at the word's first middle-lap
        // symbol.
        let low = BigReal::zero(bits);
        let rep = combinatorial_equiv(st, &g1, &low).unwrap();
        assert!(!rep.all_pass());
        let agree = rep
            .checks
            .iter()
            .find(|c| c.name == "kneading_prefix_agree")
            .unwrap();
        assert!(!agree.pass);
        assert!(agree.lhs < agree.rhs);
    }

    #[test]
    fn dual_rate_contrast_splits_the_dip_marks() {
        let st = dual_state();
        let rep = dual_rate_contrast(st).unwrap();
        assert!(rep.all_pass(), "{}", rep.table());
        let p = st
            .p_marks
            .iter()
            .find(|m| m.kind == "a")
            .map(|m| m.p)
            .unwrap();
        let above = rep
            .checks
            .iter()
            .find(|c| c.name == format!("cubic:dip_above[{p}]"))
            .unwrap();
        assert!(above.lhs > above.rhs);
        let below = rep
            .checks
            .iter()
            .find(|c| c.name == format!("deg7:dip_below[{p}]"))
            .unwrap();
        assert!(below.lhs < below.rhs && below.rhs < 0.0);
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name.starts_with("run_ratio_window")));
    }

    #[test]
    fn pullback_contracts_at_the_endpoint_rate() {
        // At parameter 0 the leftmost branch fixes 0 with slope 9, so the
        // pulled-back interval upper end shrinks ninefold each step, up to
        // the quadratic correction, which is below 1% for radius 1e-3.
        let map = make_map(Family::Cubic, &BigReal::zero(512), 512).unwrap();
        let x = BigReal::zero(512);
        let delta = BigReal::parse_decimal("0.001", 512).unwrap();
        let run = pullback_shrink(
            &map,
            &x,
            &delta,
            50,
            &BranchPolicy::Directed(vec![Symbol::I1]),
            512,
        )
        .unwrap();
        assert_eq!(run.diameters.len(), 51);
        assert_eq!(run.branches, vec![Symbol::I1; 50]);
        let ln9 = 9f64.ln();
        assert!(
            (run.rho_endpoint - ln9).abs() < 0.05 * ln9,
            "endpoint rate {}",
            run.rho_endpoint
        );
        assert!(
            (run.rho_fit - ln9).abs() < 0.05 * ln9,
            "fitted rate {}",
            run.rho_fit
        );
        for n in 1..=50usize {
            let ratio = ln_loose(&run.diameters[n - 1]) - ln_loose(&run.diameters[n]);
            assert!((ratio - ln9).abs() < 0.01 * ln9, "step {n} ratio {ratio}");
        }
    }

    #[test]
    fn zero_radius_pulls_back_to_zero_diameters() {
        let map = make_map(Family::Cubic, &BigReal::exact_f64(0.25, 256), 256).unwrap();
        let x = BigReal::exact_f64(0.5, 256);
        let run = pullback_shrink(
            &map,
            &x,
            &BigReal::zero(256),
            10,
            &BranchPolicy::Leftmost,
            256,
        )
        .unwrap();
        assert!(run
            .diameters
            .iter()
            .all(|d| d.is_exact() && d.to_f64() == 0.0));
    }

    #[test]
    fn dead_branches_are_reported() {
        let map = make_map(Family::Cubic, &BigReal::exact_f64(0.25, 256), 256).unwrap();
        // Any point below the middle lap's image floor g(c2) has no
        // middle-lap preimage.
        let x = map.eval(map.c2(), 256).mul_2exp(-1);
        let err = pullback_shrink(
            &map,
            &x,
            &BigReal::zero(256),
            4,
            &BranchPolicy::Directed(vec![Symbol::I2]),
            256,
        )
        .unwrap_err();
        assert!(matches!(err, VerifyError::BranchDead { step: 0 }), "{err}");
    }

    #[test]
    fn random_policy_is_seed_deterministic() {
        let map = make_map(Family::Cubic, &BigReal::exact_f64(0.25, 320), 320).unwrap();
        let x = BigReal::exact_f64(0.9, 320);
        let delta = BigReal::exact_f64(0.001, 320);
        let a = pullback_shrink(&map, &x, &delta, 12, &BranchPolicy::Random { seed: 7 }, 320)
            .unwrap();
        let b = pullback_shrink(&map, &x, &delta, 12, &BranchPolicy::Random { seed: 7 }, 320)
            .unwrap();
        assert_eq!(a.branches, b.branches);
        for (da, db) in a.diameters.iter().zip(&b.diameters) {
            assert_eq!(da.exact_decimal(), db.exact_decimal());
        }
        let runs = pullback_ensemble(&map, &x, &delta, 12, 4, 7, 320).unwrap();
        assert_eq!(runs[0].branches, a.branches);
        assert!(runs.iter().all(|r| r.rho_fit > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        /// Halving the starting radius never less-than-halves any pulled
        /// back diameter: the branch inverses are monotone, so the smaller
        /// window's image nests inside the larger one's with room spared
        /// exactly where the inverse's slope peaks at the window edges.
        #[test]
        fn halving_the_radius_at_most_halves_diameters(
            num in 1u32..1000,
            depth in 4usize..9,
            ninth in 0u8..3,
        ) {
            let bits = 320u32;
            let gamma = BigReal::from_ratio(i64::from(ninth), 9, bits);
            let map = make_map(Family::Cubic, &gamma, bits).unwrap();
            let x = BigReal::exact_f64(0.5, bits);
            let delta = BigReal::from_ratio(i64::from(num), 1 << 20, bits);
            let half = delta.mul_2exp(-1);
            let full = pullback_shrink(&map, &x, &delta, depth, &BranchPolicy::Leftmost, bits)
                .unwrap();
            let small = pullback_shrink(&map, &x, &half, depth, &BranchPolicy::Leftmost, bits)
                .unwrap();
            prop_assert_eq!(full.branches.clone(), small.branches.clone());
            for (n, (d, h)) in full.diameters.iter().zip(&small.diameters).enumerate() {
                let d = d.to_f64();
                let h = h.to_f64();
                prop_assert!(
                    h <= 0.5 * d * (1.0 + 1e-9) + 1e-60,
                    "step {}: half-radius diameter {} vs {}",
                    n, h, d
                );
            }
        }
    }

    #[test]
    fn table_renders_every_check() {
        let st = ab_state();
        let mid = st.interval(0, st.stage_count()).unwrap().midpoint();
        let rep = recurrence(st, &mid).unwrap();
        let tab = rep.table();
        assert!(tab.contains("report: recurrence"));
        assert!(tab.contains("PASS"));
        for c in &rep.checks {
            assert!(tab.contains(&c.name), "missing {}", c.name);
        }
        assert!(tab.contains("checks passed"));
        // Reports name the sampled parameter and the word length.
        assert_eq!(rep.params.depth, *st.t.last().unwrap());
        let word = st.word().unwrap();
        assert_eq!(word_to_string(&word).len(), word.len());
    }
}
