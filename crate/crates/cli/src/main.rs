use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use padic_theta::bounds::BoundsData;
use padic_theta::error::Error;
use padic_theta::fast::FastContext;
use padic_theta::io::{divisor_from_terms, parse_divisor_json, DivisorTerm, GroupSpec, Scalar};
use padic_theta::localfield::LocalFieldElement as El;
use padic_theta::naive::theta_naive_auto;
use padic_theta::projline::{Divisor0, ProjPoint};
use padic_theta::schottky::SchottkyGroup;
use padic_theta_cli::bench;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Theta functions of p-adic Schottky groups.
#[derive(Parser)]
#[command(name = "padic-theta", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify that the balls are in good position for the generators.
    Check {
        group: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Convergence data n(Γ), ρ, C, δ and the truncation length ν.
    Bounds(Common),
    /// The pairing (D, E) to --prec digits.
    Theta {
        #[command(flatten)]
        common: Common,
        /// Divisor D: JSON terms, a JSON file, or `a,b` for (a) - (b).
        #[arg(long)]
        d: String,
        /// Divisor E, same formats as D.
        #[arg(long)]
        e: String,
        #[arg(long, conflicts_with = "fast")]
        naive: bool,
        #[arg(long)]
        fast: bool,
    },
    /// The period matrix Q_ij = (ι(γ_i), ι(γ_j)).
    Periods(Common),
    /// (dlog u_γ1(z) : … : dlog u_γg(z)) at a point z.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        z: String,
    },
    /// Time naive and fast pairings over a range of precisions.
    Bench {
        #[command(flatten)]
        common: Common,
        /// First target precision.
        #[arg(long, default_value_t = 2)]
        from: i64,
        /// Last target precision (inclusive).
        #[arg(long, default_value_t = 16)]
        to: i64,
        #[arg(long, default_value_t = 2)]
        step: i64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only run the naive algorithm.
        #[arg(long, conflicts_with = "fast")]
        naive: bool,
        /// Only run the fast algorithm.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Args)]
struct Common {
    group: PathBuf,
    /// Target precision in digits of the uniformizer.
    #[arg(long, default_value_t = 10)]
    prec: i64,
    /// Extra working digits on top of --prec.
    #[arg(long, default_value_t = 10)]
    guard: i64,
    /// Run the 2g components of each step in parallel.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    json: bool,
}

/// Guard digits are doubled this many times when precision runs out.
const GUARD_RETRIES: u32 = 3;

impl Common {
    /// Runs `f` on the group built at `prec + guard` digits, doubling the
    /// guard when the computation runs out of precision.
    fn with_group<T>(&self, f: impl Fn(&SchottkyGroup) -> Result<T>) -> Result<T> {
        let spec = load_spec(&self.group)?;
        let mut guard = self.guard.max(1);
        for attempt in 0..=GUARD_RETRIES {
            let res = spec.build(self.prec + guard).map_err(anyhow::Error::from).and_then(|g| f(&g));
            match res {
                Err(e) if attempt < GUARD_RETRIES && matches!(e.downcast_ref::<Error>(), Some(Error::Precision(_))) => {
                    guard *= 2;
                }
                other => return other,
            }
        }
        unreachable!("the last attempt returns")
    }
}

fn load_spec(path: &Path) -> Result<GroupSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(GroupSpec::from_json(&text)?)
}

fn parse_point(s: &str, g: &SchottkyGroup) -> Result<ProjPoint> {
    let s = s.trim();
    if matches!(s, "inf" | "oo" | "infinity") {
        return Ok(ProjPoint::Infinity);
    }
    Ok(ProjPoint::Finite(Scalar::Str(s.to_string()).to_element(g.field(), g.precision())?))
}

fn parse_divisor(s: &str, g: &SchottkyGroup) -> Result<Divisor0> {
    let t = s.trim();
    let terms: Vec<DivisorTerm> = if t.starts_with('[') {
        parse_divisor_json(t)?
    } else if Path::new(t).is_file() {
        parse_divisor_json(&std::fs::read_to_string(t)?)?
    } else {
        let Some((a, b)) = t.split_once(',') else {
            bail!(Error::Parse(format!("divisor `{t}`: expected JSON, a file, or `a,b`")));
        };
        return Ok(Divisor0::elementary(parse_point(a, g)?, parse_point(b, g)?)?);
    };
    Ok(divisor_from_terms(&terms, g.field(), g.precision())?)
}

fn show(v: &El) -> String {
    v.to_string()
}

fn cmd_check(path: &Path, as_json: bool) -> Result<bool> {
    let g = load_spec(path)?.build(60)?;
    let rep = g.verify_good_position();
    if as_json {
        let out = json!({
            "passed": rep.passed(),
            "disjoint": rep.disjoint.iter().map(|(i, j, ok)| json!({"balls": [i, j], "ok": ok})).collect::<Vec<_>>(),
            "images": rep.images.iter().map(|(i, ok)| json!({"letter": i, "ok": ok})).collect::<Vec<_>>(),
            "hyperbolic": rep.hyperbolic.iter().map(|(i, ok)| json!({"letter": i, "ok": ok})).collect::<Vec<_>>(),
            "failures": rep.failures(),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        let verdict = |ok: bool| if ok { "ok" } else { "FAIL" };
        for (i, j, ok) in &rep.disjoint {
            println!("closures of B({i}) and B({j}) disjoint: {}", verdict(*ok));
        }
        for (i, ok) in &rep.images {
            println!("gamma({i}) maps P1 - B({}) onto B({i})+: {}", -i, verdict(*ok));
        }
        for (i, ok) in &rep.hyperbolic {
            println!("gamma({i}) hyperbolic: {}", verdict(*ok));
        }
        println!("{}", if rep.passed() { "good position" } else { "NOT in good position" });
    }
    Ok(rep.passed())
}

fn cmd_bounds(c: &Common) -> Result<()> {
    let ctx = c.with_group(|g| Ok(FastContext::new(g, false)?))?;
    let b: &BoundsData = ctx.bounds();
    let nu = ctx.nu_for_digits(c.prec);
    if c.json {
        let out = json!({
            "n_gamma": b.n_gamma,
            "v_rho": b.rho_val.to_string(),
            "v_C": b.c_val.to_string(),
            "worst_v_delta": b.worst_delta_val.to_string(),
            "m": c.prec,
            "nu": nu,
            "lambda": ctx.lambda(),
            "degree_cap": ctx.degree_cap(),
            "conjugated": ctx.group().conjugation().is_some(),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("n(Γ) = {}", b.n_gamma);
        println!("v(ρ) = {}", b.rho_val);
        println!("v(C) = {}", b.c_val);
        println!("worst v(δ) on F+ = {}", b.worst_delta_val);
        println!("ν for m = {}: {}", c.prec, nu);
        println!("series decay λ = {}, degree cap = {}", ctx.lambda(), ctx.degree_cap());
        if ctx.group().conjugation().is_some() {
            println!("(bounds computed after moving ∞ into the fundamental domain)");
        }
    }
    Ok(())
}

fn check_precision(v: &El, m: i64) -> Result<()> {
    if v.relative_precision() < m {
        bail!(Error::Precision(format!("only {} digits survived", v.relative_precision())));
    }
    Ok(())
}

fn cmd_theta(c: &Common, d: &str, e: &str, naive: bool) -> Result<()> {
    let (value, nu, algo, elapsed) = c.with_group(|g| {
        let d = parse_divisor(d, g)?;
        let e = parse_divisor(e, g)?;
        let t = Instant::now();
        let (value, nu, algo) = if naive {
            // The bounds need ∞ in the fundamental domain.
            let h = g.normalize_infinity()?;
            let b = BoundsData::compute(&h)?;
            let dr = h.reduce_divisor(&h.transport(&d), 0)?.divisor;
            let er = h.reduce_divisor(&h.transport(&e), 1)?.divisor;
            let r = theta_naive_auto(&h, &b, &dr, &er, c.prec)?;
            (r.value, r.n, "naive")
        } else {
            let ctx = FastContext::new(g, c.parallel)?;
            let nu = ctx.nu_for_digits(c.prec);
            (ctx.theta_pair_nu(&d, &e, nu)?, nu, "fast")
        };
        let elapsed = t.elapsed();
        check_precision(&value, c.prec)?;
        Ok((value, nu, algo, elapsed))
    })?;
    if c.json {
        let out = json!({
            "algo": algo,
            "m": c.prec,
            "nu": nu,
            "value": value.to_terms_string(),
            "precision": value.precision(),
            "fingerprint": bench::fingerprint(&value, c.prec),
            "time_ns": elapsed.as_nanos() as u64,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("{}", show(&value));
        println!("algo {algo}, ν = {nu}, {elapsed:.2?}");
    }
    Ok(())
}

fn cmd_periods(c: &Common) -> Result<()> {
    let q = c.with_group(|g| {
        let q = FastContext::new(g, c.parallel)?.period_matrix(c.prec)?;
        for x in q.iter().flatten() {
            check_precision(x, c.prec)?;
        }
        Ok(q)
    })?;
    if c.json {
        let rows: Vec<Vec<String>> = q.iter().map(|r| r.iter().map(|x| x.to_terms_string()).collect()).collect();
        let prec: Vec<Vec<i64>> = q.iter().map(|r| r.iter().map(|x| x.precision()).collect()).collect();
        println!("{}", serde_json::to_string_pretty(&json!({"m": c.prec, "Q": rows, "precision": prec}))?);
    } else {
        for (i, row) in q.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                println!("Q[{}][{}] = {}", i + 1, j + 1, show(x));
            }
        }
    }
    Ok(())
}

fn cmd_embed(c: &Common, z: &str) -> Result<()> {
    let (genus, v) = c.with_group(|g| {
        let z = parse_point(z, g)?;
        let v = FastContext::new(g, c.parallel)?.canonical_embedding(&z, c.prec)?;
        for x in &v {
            check_precision(x, c.prec)?;
        }
        Ok((g.genus(), v))
    })?;
    if genus < 3 {
        eprintln!("warning: genus {genus} < 3, the dlog tuple is not a canonical embedding");
    }
    if c.json {
        let xs: Vec<String> = v.iter().map(|x| x.to_terms_string()).collect();
        println!("{}", serde_json::to_string_pretty(&json!({"m": c.prec, "dlog": xs}))?);
    } else {
        for (j, x) in v.iter().enumerate() {
            println!("dlog u_{}(z) = {}", j + 1, show(x));
        }
    }
    Ok(())
}

/// A random finite point of the open fundamental domain, drawn as
/// `a p^-s` with `a < p^8`, independent of the working precision.
fn random_point(g: &SchottkyGroup, rng: &mut ChaCha8Rng) -> ProjPoint {
    let f = g.field();
    let n = g.precision();
    let p = f.prime() as i64;
    loop {
        let a = rng.gen_range(0..p.pow(8));
        let s = rng.gen_range(0..=2) * f.ramification() as i64;
        let x = El::from_int(f, a, n + s).mul(&El::pi_pow(f, -s, n + s)).reduce_to(n);
        let z = ProjPoint::Finite(x);
        if g.letters().iter().all(|&l| !g.ball(l).closure().contains(&z)) {
            return z;
        }
    }
}

fn seeded_divisors(g: &SchottkyGroup, seed: u64) -> Result<(Divisor0, Divisor0)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let pts: Vec<ProjPoint> = (0..4).map(|_| random_point(g, &mut rng)).collect();
        let distinct = (0..4).all(|i| (i + 1..4).all(|j| !pts[i].same(&pts[j])));
        if distinct {
            let d = Divisor0::elementary(pts[0].clone(), pts[1].clone())?;
            let e = Divisor0::elementary(pts[2].clone(), pts[3].clone())?;
            return Ok((d, e));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(c: &Common, from: i64, to: i64, step: i64, out: &Path, seed: u64, only: Option<&str>, repeats: usize) -> Result<()> {
    if step <= 0 || repeats == 0 {
        bail!(Error::Parse("--step and --repeats must be positive".into()));
    }
    let spec = load_spec(&c.group)?;
    let id = c.group.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let build = |n: i64| -> Result<SchottkyGroup> { Ok(spec.build(n)?) };
    let divisors = |g: &SchottkyGroup| seeded_divisors(g, seed);
    let case = bench::BenchCase {
        id: &id,
        build: &build,
        divisors: &divisors,
        guard: c.guard,
        repeats,
        naive: only != Some("fast"),
        fast: only != Some("naive"),
        parallel: c.parallel,
    };
    let ms: Vec<i64> = (from..=to).step_by(step as usize).collect();
    let rows = bench::run(&case, &ms)?;
    bench::write_csv(out, &rows)?;
    for r in &rows {
        eprintln!("{} m={} ν={} {:.3} ms {}", r.algo, r.m, r.nu, r.time_ns as f64 / 1e6, r.fingerprint);
    }
    Ok(())
}

/// 1 for bad input, 2 for failed verification, 3 for budget refusal.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Budget(_)) => 3,
        Some(Error::NotGoodPosition(_) | Error::Verification(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Check { group, json } => return cmd_check(group, *json),
        Cmd::Bounds(c) => cmd_bounds(c)?,
        Cmd::Theta { common, d, e, naive, .. } => cmd_theta(common, d, e, *naive)?,
        Cmd::Periods(c) => cmd_periods(c)?,
        Cmd::Embed { common, z } => cmd_embed(common, z)?,
        Cmd::Bench { common, from, to, step, out, seed, naive, fast, repeats } => {
            let only = match (naive, fast) {
                (true, _) => Some("naive"),
                (_, true) => Some("fast"),
                _ => None,
            };
            cmd_bench(common, *from, *to, *step, out, *seed, only, *repeats)?
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
