//! Naive versus fast timings as CSV rows.

use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use padic_theta::error::Error;
use padic_theta::fast::FastContext;
use padic_theta::localfield::LocalFieldElement as El;
use padic_theta::naive::theta_naive;
use padic_theta::projline::Divisor0;
use padic_theta::schottky::SchottkyGroup;
use serde::{Deserialize, Serialize};

pub const HEADER: [&str; 6] = ["group", "algo", "m", "nu", "time_ns", "fingerprint"];

/// Leading digits kept in a fingerprint.
const FINGERPRINT_DIGITS: i64 = 12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub group: String,
    pub algo: String,
    pub m: i64,
    pub nu: usize,
    pub time_ns: u128,
    pub fingerprint: String,
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

pub fn fingerprint(v: &El, m: i64) -> String {
    v.fingerprint(m.clamp(1, FINGERPRINT_DIGITS) as usize)
}

pub struct BenchCase<'a> {
    pub id: &'a str,
    /// Builds the group at a given working precision.
    pub build: &'a dyn Fn(i64) -> Result<SchottkyGroup>,
    /// The divisors at a given working precision.
    pub divisors: &'a dyn Fn(&SchottkyGroup) -> Result<(Divisor0, Divisor0)>,
    pub guard: i64,
    pub repeats: usize,
    pub naive: bool,
    pub fast: bool,
    pub parallel: bool,
}

/// One row per algorithm and `m`. Both algorithms use the same `ν`; naive
/// rows are omitted once that `ν` exceeds the word budget.
pub fn run(case: &BenchCase<'_>, ms: &[i64]) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &m in ms {
        let g = (case.build)(m + case.guard)?;
        let (d, e) = (case.divisors)(&g)?;
        let ctx = FastContext::new(&g, case.parallel)?;
        let nu = ctx.nu_for_digits(m);
        if case.naive {
            let mut times = Vec::new();
            let mut value = None;
            for _ in 0..case.repeats {
                let t = Instant::now();
                match theta_naive(&g, &d, &e, nu) {
                    Ok(v) => value = Some(v.value),
                    Err(Error::Budget(_)) => break,
                    Err(err) => return Err(err).context("naive pairing"),
                }
                times.push(t.elapsed());
            }
            if let Some(v) = value {
                out.push(record(case.id, "naive", m, nu, median(times), &v));
            }
        }
        if case.fast {
            let mut times = Vec::new();
            let mut value = None;
            for _ in 0..case.repeats {
                let t = Instant::now();
                let ctx = FastContext::new(&g, case.parallel)?;
                value = Some(ctx.theta_pair_nu(&d, &e, nu)?);
                times.push(t.elapsed());
            }
            out.push(record(case.id, "fast", m, nu, median(times), &value.expect("repeats >= 1")));
        }
    }
    Ok(out)
}

fn record(group: &str, algo: &str, m: i64, nu: usize, t: Duration, v: &El) -> BenchRecord {
    BenchRecord {
        group: group.to_string(),
        algo: algo.to_string(),
        m,
        nu,
        time_ns: t.as_nanos(),
        fingerprint: fingerprint(v, m),
    }
}

pub fn write_csv(path: &Path, rows: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    if rows.is_empty() {
        w.write_record(HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    anyhow::ensure!(header == HEADER, "unexpected CSV header {header:?}");
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
