//! `kneadlab` — command-line front end for the bimodal-map toolkit.
//!
//! Subcommands: `itinerary`, `kneading`, `realize-point`, `realize-param`,
//! `construct`, `verify`, `pullback`. Exit code 0 on success, 1 when a
//! computation or verification check fails, 2 on usage errors.

use std::cmp::Ordering;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use kneadlab::construct::{
    parse_schedule, run_construction, ConstructionState, Mode, Rates, RunConfig,
};
use kneadlab::families::make_map;
use kneadlab::numerics::BigReal;
use kneadlab::orbits::{itinerary, kneading, realize_point};
use kneadlab::paramsearch::find_param;
use kneadlab::symbolic::{word_from_str, word_to_string, ItinerarySeq};
use kneadlab::verify::{
    ce_windows_at, combinatorial_equiv_at, dual_rate_contrast_at, non_ce_witness_at,
    pullback_ensemble, pullback_shrink, recurrence_at, BranchPolicy, PullbackRun,
    VerificationReport,
};
use kneadlab::Family;

/// Error class that exits with code 2 instead of 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "kneadlab",
    about = "High-precision kneading theory, parameter realization, and \
             growth/recurrence constructions for bimodal interval maps",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// Working precision in bits (default 256; the KNEADLAB_PRECISION
    /// environment variable overrides the default when the flag is absent).
    #[arg(long, global = true)]
    precision: Option<u32>,

    /// Cap the worker-thread count for parallel sections.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Symbol sequence of a point's forward orbit.
    Itinerary {
        #[arg(long, default_value = "cubic")]
        family: String,
        #[arg(long, default_value = "0")]
        gamma: String,
        /// Starting point (decimal).
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = 40)]
        depth: usize,
    },
    /// Kneading sequence: the itinerary of the second critical value.
    Kneading {
        #[arg(long, default_value = "cubic")]
        family: String,
        #[arg(long, default_value = "0")]
        gamma: String,
        #[arg(long, default_value_t = 40)]
        depth: usize,
    },
    /// Find the point realizing a target itinerary.
    RealizePoint {
        #[arg(long, default_value = "cubic")]
        family: String,
        #[arg(long, default_value = "0")]
        gamma: String,
        /// Target sequence: a word over 1/A/2/B/3, either ending in a
        /// critical symbol (e.g. "1112A") or with a repeating tail
        /// (e.g. "12(2)^inf" or "12^inf").
        #[arg(long)]
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find the parameter whose kneading sequence realizes a target.
    RealizeParam {
        #[arg(long, default_value = "cubic")]
        family: String,
        /// Target kneading sequence (same format as realize-point).
        #[arg(long)]
        target: String,
        /// Parameter search window "lo,hi" with the target's realization
        /// locus strictly inside.
        #[arg(long)]
        window: String,
        /// Bracket halvings (default: precision/2 + 32).
        #[arg(long)]
        halvings: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run (or resume) a staged growth/recurrence construction.
    Construct {
        /// "single" or "dual".
        #[arg(long, default_value = "single")]
        mode: String,
        /// Family for single mode (dual mode always pairs cubic with deg7).
        #[arg(long, default_value = "cubic")]
        family: String,
        /// Stage letters, e.g. "a,b,a,b" or "AB".
        #[arg(long)]
        schedule: String,
        /// Existing state file to resume from.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Where to save the state after every completed stage.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON config file overriding rate defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-verify a finished construction state at sampled parameters.
    Verify {
        /// Construction state file.
        #[arg(long)]
        state: PathBuf,
        /// Parameter to test (default: final-interval midpoint).
        #[arg(long)]
        gamma: Option<String>,
        /// Second-chain parameter (dual mode; default: its midpoint).
        #[arg(long)]
        gamma2: Option<String>,
        /// Write the reports as a JSON array here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pull an interval back along a backward orbit; emits CSV n,diam_n.
    Pullback {
        #[arg(long, default_value = "cubic")]
        family: String,
        #[arg(long, default_value = "0")]
        gamma: String,
        /// Center of the starting interval (decimal).
        #[arg(long)]
        x: String,
        /// Radius of the starting interval (decimal).
        #[arg(long, default_value = "0.001")]
        delta: String,
        #[arg(long, default_value_t = 100)]
        depth: usize,
        /// "leftmost", "random", or a lap word over 1/2/3 to follow
        /// (cycled), e.g. "131".
        #[arg(long, default_value = "random")]
        policy: String,
        /// Seed for the random branch policy.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of independently seeded random runs.
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Rate overrides loadable from a JSON config file. Orderings are
/// validated before the run starts.
#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Config {
    precision_bits: Option<u32>,
    family: Option<String>,
    rates: Option<Rates>,
    rates2: Option<Rates>,
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            std::process::exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            std::process::exit(1);
        }
    }
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("run `kneadlab --help` for usage");
                std::process::exit(2);
            }
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let prec = resolve_precision(cli.precision)?;
    match cli.cmd {
        Cmd::Itinerary {
            family,
            gamma,
            x,
            depth,
        } => cmd_itinerary(&family, &gamma, &x, depth, prec),
        Cmd::Kneading {
            family,
            gamma,
            depth,
        } => cmd_kneading(&family, &gamma, depth, prec),
        Cmd::RealizePoint {
            family,
            gamma,
            target,
            out,
        } => cmd_realize_point(&family, &gamma, &target, out.as_deref(), prec),
        Cmd::RealizeParam {
            family,
            target,
            window,
            halvings,
            out,
        } => cmd_realize_param(&family, &target, &window, halvings, out.as_deref(), prec),
        Cmd::Construct {
            mode,
            family,
            schedule,
            state,
            out,
            config,
        } => cmd_construct(&mode, &family, &schedule, state, out, config),
        Cmd::Verify {
            state,
            gamma,
            gamma2,
            out,
        } => cmd_verify(&state, gamma.as_deref(), gamma2.as_deref(), out.as_deref(), cli.precision),
        Cmd::Pullback {
            family,
            gamma,
            x,
            delta,
            depth,
            policy,
            seed,
            samples,
            out,
        } => cmd_pullback(
            &family,
            &gamma,
            &x,
            &delta,
            depth,
            &policy,
            seed,
            samples,
            out.as_deref(),
            prec,
        ),
    }
}

fn resolve_precision(flag: Option<u32>) -> Result<u32> {
    let bits = match flag {
        Some(p) => p,
        None => match std::env::var("KNEADLAB_PRECISION") {
            Ok(s) => s
                .trim()
                .parse::<u32>()
                .map_err(|_| usage_err(format!("KNEADLAB_PRECISION={s:?} is not a bit count")))?,
            Err(_) => 256,
        },
    };
    if !(64..=1 << 22).contains(&bits) {
        return Err(usage_err(format!(
            "precision {bits} out of range (64 ..= {})",
            1 << 22
        )));
    }
    Ok(bits)
}

fn parse_family(s: &str) -> Result<Family> {
    s.parse()
        .map_err(|_| usage_err(format!("unknown family {s:?} (expected cubic or deg7)")))
}

fn parse_real(label: &str, s: &str, prec: u32) -> Result<BigReal> {
    BigReal::parse_decimal(s.trim(), prec)
        .map_err(|e| usage_err(format!("--{label} {s:?}: {e}")))
}

/// Parse a target sequence: a plain word (finite, possibly ending in a
/// critical symbol), `head(s)^inf`, or `head s^inf` for a repeating tail.
fn parse_target(s: &str) -> Result<ItinerarySeq> {
    let bad = |msg: String| usage_err(format!("--target {s:?}: {msg}"));
    let text = s.trim();
    if let Some(stripped) = text.strip_suffix("^inf") {
        let (head_text, sym_text) = match stripped.strip_suffix(')') {
            Some(inner) => inner
                .rsplit_once('(')
                .ok_or_else(|| bad("unbalanced parentheses".to_string()))?,
            None if !stripped.is_empty() => stripped.split_at(stripped.len() - 1),
            None => return Err(bad("missing repeat symbol".to_string())),
        };
        let head = word_from_str(head_text).map_err(|e| bad(e.to_string()))?;
        let sym_word = word_from_str(sym_text).map_err(|e| bad(e.to_string()))?;
        if sym_word.len() != 1 {
            return Err(bad("repeat block must be a single symbol".to_string()));
        }
        ItinerarySeq::repeating(head, sym_word[0]).map_err(|e| bad(e.to_string()))
    } else {
        let word = word_from_str(text).map_err(|e| bad(e.to_string()))?;
        ItinerarySeq::finite(word).map_err(|e| bad(e.to_string()))
    }
}

fn warn_if_outside_unit(x: &BigReal, prec: u32) {
    let zero = BigReal::zero(prec);
    let one = BigReal::exact_i64(1, prec);
    if x.cmp_value(&zero) == Ordering::Less || x.cmp_value(&one) == Ordering::Greater {
        eprintln!("warning: x lies outside [0,1]; the map is evaluated as a polynomial");
    }
}

fn err_log2(x: &BigReal) -> Option<f64> {
    x.err_real()
        .ln(64)
        .ok()
        .map(|l| l.to_f64() / std::f64::consts::LN_2)
}

fn describe_point(x: &BigReal) -> String {
    if x.is_exact() {
        format!("{} (exact)", x.exact_decimal())
    } else {
        match err_log2(x) {
            Some(e) => format!("{} (err <= 2^{:.0})", x.display_decimal(40), e.ceil()),
            None => format!("{} (err 0?)", x.display_decimal(40)),
        }
    }
}

fn write_out(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

// ----------------------------------------------------------------------
// Subcommands
// ----------------------------------------------------------------------

fn cmd_itinerary(family: &str, gamma: &str, x: &str, depth: usize, prec: u32) -> Result<bool> {
    let fam = parse_family(family)?;
    let g = parse_real("gamma", gamma, prec)?;
    let x = parse_real("x", x, prec)?;
    warn_if_outside_unit(&x, prec);
    let map = make_map(fam, &g, prec)?;
    let seq = itinerary(&map, &x, depth, prec)?;
    println!("itinerary: {seq}");
    println!("prefix: {}", word_to_string(&seq.prefix(depth)));
    Ok(true)
}

fn cmd_kneading(family: &str, gamma: &str, depth: usize, prec: u32) -> Result<bool> {
    let fam = parse_family(family)?;
    let g = parse_real("gamma", gamma, prec)?;
    let map = make_map(fam, &g, prec)?;
    let seq = kneading(&map, depth, prec)?;
    println!("kneading: {seq}");
    println!("prefix: {}", word_to_string(&seq.prefix(depth)));
    Ok(true)
}

fn cmd_realize_point(
    family: &str,
    gamma: &str,
    target: &str,
    out: Option<&std::path::Path>,
    prec: u32,
) -> Result<bool> {
    let fam = parse_family(family)?;
    let g = parse_real("gamma", gamma, prec)?;
    let seq = parse_target(target)?;
    let map = make_map(fam, &g, prec)?;
    let x = realize_point(&map, &seq, None, prec)?;
    println!("target: {seq}");
    println!("x = {}", describe_point(&x));
    if let Some(path) = out {
        let doc = serde_json::json!({
            "family": fam.to_string(),
            "gamma": gamma,
            "target": seq.to_string(),
            "x": x.exact_decimal(),
            "err": x.err_decimal(),
        });
        write_out(path, &format!("{:#}\n", doc))?;
    }
    Ok(true)
}

fn cmd_realize_param(
    family: &str,
    target: &str,
    window: &str,
    halvings: Option<u32>,
    out: Option<&std::path::Path>,
    prec: u32,
) -> Result<bool> {
    let fam = parse_family(family)?;
    let seq = parse_target(target)?;
    let (lo_text, hi_text) = window
        .split_once(',')
        .ok_or_else(|| usage_err(format!("--window {window:?}: expected \"lo,hi\"")))?;
    let lo = parse_real("window", lo_text, prec)?;
    let hi = parse_real("window", hi_text, prec)?;
    if lo.cmp_value(&hi) != Ordering::Less {
        return Err(usage_err("--window: lo must be below hi"));
    }
    let halvings = halvings.unwrap_or(prec / 2 + 32);
    let bracket = find_param(fam, &seq, &lo, &hi, halvings, prec)?;
    println!("target: {seq}");
    println!("bracket lo: {}", describe_point(&bracket.lo));
    println!("bracket hi: {}", describe_point(&bracket.hi));
    println!("midpoint:   {}", bracket.midpoint().display_decimal(40));
    let width = bracket.width();
    match width.ln(64) {
        Ok(l) => println!(
            "width: {} (2^{:.1})",
            width.display_decimal(8),
            l.to_f64() / std::f64::consts::LN_2
        ),
        Err(_) => println!("width: 0"),
    }
    if bracket.exact {
        println!("realization: exact parameter hit");
    }
    if let Some(path) = out {
        let doc = serde_json::json!({
            "family": fam.to_string(),
            "target": seq.to_string(),
            "lo": bracket.lo.exact_decimal(),
            "hi": bracket.hi.exact_decimal(),
            "exact": bracket.exact,
            "halvings_done": bracket.halvings_done,
        });
        write_out(path, &format!("{:#}\n", doc))?;
    }
    Ok(true)
}

fn cmd_construct(
    mode: &str,
    family: &str,
    schedule: &str,
    state: Option<PathBuf>,
    out: Option<PathBuf>,
    config: Option<PathBuf>,
) -> Result<bool> {
    let mode: Mode = mode
        .parse()
        .map_err(|_| usage_err(format!("unknown mode {mode:?} (expected single or dual)")))?;
    let fam = parse_family(family)?;
    let steps = parse_schedule(schedule).map_err(|e| usage_err(e.to_string()))?;
    if steps.is_empty() {
        return Err(usage_err("--schedule names no stages"));
    }
    let cfg_file: Config = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| usage_err(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| usage_err(format!("config {}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    if let Some(bits) = cfg_file.precision_bits {
        // The construction picks precision from its own schedule-driven
        // lattice so states stay reproducible; a config override is a
        // contradiction worth refusing loudly.
        return Err(usage_err(format!(
            "config sets precision_bits={bits}, but construction precision \
             follows the stage lattice; drop the field"
        )));
    }
    let fam = match &cfg_file.family {
        Some(name) => parse_family(name)?,
        None => fam,
    };
    let mut cfg = match mode {
        Mode::Single => RunConfig::single(fam, steps),
        Mode::Dual => RunConfig::dual(steps),
    };
    if let Some(r) = cfg_file.rates {
        cfg.rates = r;
    }
    if let Some(r2) = cfg_file.rates2 {
        cfg.rates2 = Some(r2);
    }
    cfg.rates
        .validate(mode)
        .map_err(|e| usage_err(e.to_string()))?;
    if let Some(r2) = &cfg.rates2 {
        r2.validate(mode).map_err(|e| usage_err(e.to_string()))?;
    }
    cfg.out = out.or(cfg_file.out);
    if cfg.out.is_none() {
        eprintln!("warning: no --out path; the state will not be persisted");
    }

    let resume = match state {
        Some(path) => Some(ConstructionState::load(&path).map_err(|e| usage_err(e.to_string()))?),
        None => None,
    };
    let st = run_construction(&cfg, resume)?;
    if let Some(path) = &cfg.out {
        // The run saves after each completed stage; saving again covers
        // resumes whose schedule was already complete.
        st.save(path)?;
    }
    print_state_summary(&st)?;
    Ok(true)
}

fn print_state_summary(st: &ConstructionState) -> Result<()> {
    println!(
        "mode: {}  family: {}{}  schedule: {}",
        st.mode,
        st.family,
        st.family2
            .as_deref()
            .map(|f| format!(" + {f}"))
            .unwrap_or_default(),
        st.schedule
    );
    for (i, rec) in st.step_log.iter().enumerate() {
        println!(
            "stage {} ({}): t = {}, width 2^{:.1}, {} bits, {} attempt(s)",
            rec.stage, rec.kind, st.t[i], rec.width_log2, rec.bits, rec.attempts
        );
    }
    let last = st.stage_count();
    for chain in 0..st.families()?.len() {
        let iv = st.interval(chain, last)?;
        println!(
            "final interval chain {chain}: [{}, {}]",
            iv.lo.display_decimal(40),
            iv.hi.display_decimal(40)
        );
    }
    println!("word: {} symbols", st.prefix.len());
    Ok(())
}

fn cmd_verify(
    state_path: &std::path::Path,
    gamma: Option<&str>,
    gamma2: Option<&str>,
    out: Option<&std::path::Path>,
    precision_flag: Option<u32>,
) -> Result<bool> {
    let st = ConstructionState::load(state_path).map_err(|e| usage_err(e.to_string()))?;
    let last = st.stage_count();
    let bits = match precision_flag {
        Some(p) => resolve_precision(Some(p))?,
        None => st.stage_bits(last)?,
    };
    let g = match gamma {
        Some(s) => parse_real("gamma", s, bits)?,
        None => st.interval(0, last)?.midpoint(),
    };
    let mut reports: Vec<VerificationReport> = Vec::new();
    match st.mode()? {
        Mode::Single => {
            reports.push(ce_windows_at(&st, &g, bits)?);
            reports.push(non_ce_witness_at(&st, &g, bits)?);
            reports.push(recurrence_at(&st, &g, bits)?);
        }
        Mode::Dual => {
            let g2 = match gamma2 {
                Some(s) => parse_real("gamma2", s, bits)?,
                None => st.interval(1, last)?.midpoint(),
            };
            let depth = *st.t.last().expect("nonempty state") as usize;
            reports.push(combinatorial_equiv_at(&st, &g, &g2, depth, bits)?);
            reports.push(dual_rate_contrast_at(&st, bits)?);
        }
    }
    for rep in &reports {
        print!("{}", rep.table());
        println!();
    }
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&reports)?;
        text.push('\n');
        write_out(path, &text)?;
    }
    let ok = reports.iter().all(|r| r.all_pass());
    if !ok {
        eprintln!("verification failed: at least one check did not pass");
    }
    Ok(ok)
}

#[allow(clippy::too_many_arguments)]
fn cmd_pullback(
    family: &str,
    gamma: &str,
    x: &str,
    delta: &str,
    depth: usize,
    policy: &str,
    seed: u64,
    samples: usize,
    out: Option<&std::path::Path>,
    prec: u32,
) -> Result<bool> {
    let fam = parse_family(family)?;
    let g = parse_real("gamma", gamma, prec)?;
    let x = parse_real("x", x, prec)?;
    let delta = parse_real("delta", delta, prec)?;
    warn_if_outside_unit(&x, prec);
    if samples == 0 {
        return Err(usage_err("--samples must be at least 1"));
    }
    let map = make_map(fam, &g, prec)?;
    let runs: Vec<PullbackRun> = match (policy, samples) {
        ("random", n) => pullback_ensemble(&map, &x, &delta, depth, n, seed, prec)?,
        (_, n) if n > 1 => {
            return Err(usage_err(
                "--samples above 1 needs --policy random (other policies repeat one run)",
            ))
        }
        ("leftmost", _) => vec![pullback_shrink(
            &map,
            &x,
            &delta,
            depth,
            &BranchPolicy::Leftmost,
            prec,
        )?],
        (word, _) => {
            let branches = word_from_str(word)
                .map_err(|e| usage_err(format!("--policy {word:?}: {e}")))?;
            if branches.iter().any(|s| s.is_critical()) {
                return Err(usage_err("--policy words use lap symbols 1/2/3 only"));
            }
            vec![pullback_shrink(
                &map,
                &x,
                &delta,
                depth,
                &BranchPolicy::Directed(branches),
                prec,
            )?]
        }
    };

    let mut csv = String::new();
    csv.push_str("# kneadlab pullback\n");
    csv.push_str(&format!(
        "# family={fam} gamma={gamma} x={x_text} delta={delta_text} depth={depth} policy={policy} seed={seed}\n",
        x_text = x.display_decimal(20),
        delta_text = delta.display_decimal(20),
    ));
    for (i, run) in runs.iter().enumerate() {
        csv.push_str(&format!(
            "# run {i}: rho_endpoint={:.6} rho_fit={:.6} branches={}\n",
            run.rho_endpoint,
            run.rho_fit,
            word_to_string(&run.branches)
        ));
    }
    if runs.len() == 1 {
        csv.push_str("n,diam_n\n");
    } else {
        csv.push('n');
        for i in 0..runs.len() {
            csv.push_str(&format!(",diam_{i}"));
        }
        csv.push('\n');
    }
    for n in 0..=depth {
        csv.push_str(&n.to_string());
        for run in &runs {
            csv.push(',');
            csv.push_str(&run.diameters[n].display_decimal(24));
        }
        csv.push('\n');
    }
    match out {
        Some(path) => write_out(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(true)
}
