//! Cost of isolation-based unlearning (sharded training where each sample
//! influences exactly one of `P` parts and deletions land uniformly).
//!
//! * `expected_affected(P, n)`: expected number of parts touched by `n`
//!   deletions, `P·(1 − (1 − 1/P)^n)`.
//! * `full_retrain_prob(P, n)`: probability that every part is touched,
//!   i.e. surjections from `n` deletions onto `P` parts over `P^n`.

use std::io::Write;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest part count accepted by the floating-point inclusion–exclusion
/// path.
pub const MAX_FLOAT_PARTS: u64 = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationParams {
    pub parts: u64,
    pub deletions: u64,
}

impl IsolationParams {
    pub fn new(parts: u64, deletions: u64) -> Result<Self> {
        if parts == 0 {
            return Err(Error::config("the number of parts must be at least 1"));
        }
        Ok(Self { parts, deletions })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    ExpectedAffected,
    RetrainProb,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            CurveKind::ExpectedAffected => "expected_affected",
            CurveKind::RetrainProb => "retrain_prob",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub kind: CurveKind,
    pub parts: u64,
    pub n: u64,
    pub value: f64,
}

/// Expected number of affected parts. Written as `P − (P−1)·(1−1/P)^(n−1)`
/// so that `n = 1` gives exactly 1.
pub fn expected_affected(parts: u64, n: u64) -> f64 {
    assert!(parts >= 1, "parts must be at least 1");
    if n == 0 {
        return 0.0;
    }
    if parts == 1 {
        return 1.0;
    }
    let p = parts as f64;
    let decay = ((n - 1) as f64 * (-1.0 / p).ln_1p()).exp();
    p - (p - 1.0) * decay
}

/// Number of surjections from `n` labeled items onto `parts` labeled parts.
pub fn surjections(parts: u64, n: u64) -> BigInt {
    let mut total = BigInt::zero();
    let mut binom = BigInt::one();
    for j in 0..=parts {
        let term = &binom * BigInt::from(parts - j).pow(n as u32);
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
        binom = binom * BigInt::from(parts - j) / BigInt::from(j + 1);
    }
    total
}

/// Exact full-retrain probability.
pub fn full_retrain_prob_exact(parts: u64, n: u64) -> BigRational {
    assert!(parts >= 1, "parts must be at least 1");
    if n < parts {
        return BigRational::zero();
    }
    let denom = BigInt::from(parts).pow(n as u32);
    BigRational::new(surjections(parts, n), denom)
}

/// Floating-point inclusion–exclusion with each term
/// `C(P,j)·((P−j)/P)^n` evaluated in log space and the alternating sum
/// accumulated with Neumaier compensation.
pub fn full_retrain_prob_float(parts: u64, n: u64) -> f64 {
    if n < parts {
        return 0.0;
    }
    let p = parts as f64;
    let ln_p = p.ln();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut ln_binom = 0.0f64;
    for j in 0..parts {
        let jf = j as f64;
        let magnitude = (ln_binom + n as f64 * ((p - jf).ln() - ln_p)).exp();
        let term = if j % 2 == 0 { magnitude } else { -magnitude };
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        ln_binom += ((p - jf) / (jf + 1.0)).ln();
    }
    (sum + comp).clamp(0.0, 1.0)
}

/// Probability that `n` uniform deletions touch all `parts` parts.
///
/// Small instances go through exact big-integer arithmetic and are rounded
/// once; larger ones use [`full_retrain_prob_float`]. More than
/// [`MAX_FLOAT_PARTS`] parts is refused: use [`full_retrain_prob_exact`] or
/// [`retrain_prob_curve`] instead.
pub fn full_retrain_prob(parts: u64, n: u64) -> Result<f64> {
    if parts == 0 {
        return Err(Error::config("the number of parts must be at least 1"));
    }
    if parts > MAX_FLOAT_PARTS {
        return Err(Error::Numeric(format!(
            "{parts} parts exceeds the floating-point limit of {MAX_FLOAT_PARTS}; \
             use the exact-arithmetic path"
        )));
    }
    if n < parts {
        return Ok(0.0);
    }
    let bits = n as f64 * (parts as f64).log2();
    if bits <= 53.0 {
        let r = full_retrain_prob_exact(parts, n);
        return Ok(r.numer().to_f64().unwrap() / r.denom().to_f64().unwrap());
    }
    if bits <= 4096.0 {
        return Ok(full_retrain_prob_exact(parts, n).to_f64().unwrap_or(0.0));
    }
    Ok(full_retrain_prob_float(parts, n))
}

/// Full-retrain probability for `n = 0..=n_max`, from the occupancy chain:
/// with `k` parts touched, the next deletion touches a new part with
/// probability `(P−k)/P`. Every term is nonnegative, so any `P` is stable.
pub fn retrain_prob_curve(parts: u64, n_max: u64) -> Vec<f64> {
    assert!(parts >= 1, "parts must be at least 1");
    let p = parts as usize;
    let pf = parts as f64;
    let mut occupied = vec![0.0f64; p + 1];
    occupied[0] = 1.0;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(occupied[p]);
    for _ in 0..n_max {
        for k in (0..=p).rev() {
            let stay = occupied[k] * k as f64 / pf;
            let arrive = if k > 0 {
                occupied[k - 1] * (pf - (k - 1) as f64) / pf
            } else {
                0.0
            };
            occupied[k] = stay + arrive;
        }
        out.push(occupied[p]);
    }
    out
}

/// Both curves for every part count over `n = 0, step, 2·step, …, n_max`,
/// sorted by `(kind, P, n)`.
pub fn emit_curves(parts_list: &[u64], n_max: u64, step: u64) -> Result<Vec<CurvePoint>> {
    if parts_list.is_empty() {
        return Err(Error::config("no part counts given"));
    }
    if step == 0 {
        return Err(Error::config("step must be positive"));
    }
    if parts_list.contains(&0) {
        return Err(Error::config("the number of parts must be at least 1"));
    }
    let mut parts: Vec<u64> = parts_list.to_vec();
    parts.sort_unstable();
    parts.dedup();
    let ns: Vec<u64> = (0..=n_max).step_by(step as usize).collect();

    let mut points = Vec::with_capacity(2 * parts.len() * ns.len());
    for &p in &parts {
        points.extend(ns.iter().map(|&n| CurvePoint {
            kind: CurveKind::ExpectedAffected,
            parts: p,
            n,
            value: expected_affected(p, n),
        }));
    }
    for &p in &parts {
        if p <= MAX_FLOAT_PARTS {
            for &n in &ns {
                points.push(CurvePoint {
                    kind: CurveKind::RetrainProb,
                    parts: p,
                    n,
                    value: full_retrain_prob(p, n)?,
                });
            }
        } else {
            let curve = retrain_prob_curve(p, n_max);
            points.extend(ns.iter().map(|&n| CurvePoint {
                kind: CurveKind::RetrainProb,
                parts: p,
                n,
                value: if n < p { 0.0 } else { curve[n as usize] },
            }));
        }
    }
    Ok(points)
}

pub fn write_curves_csv(points: &[CurvePoint], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "kind,P,n,value")?;
    for pt in points {
        writeln!(out, "{},{},{},{}", pt.kind.name(), pt.parts, pt.n, pt.value)?;
    }
    Ok(())
}

/// Writes the CSV atomically (temporary file, then rename).
pub fn write_curves_file(points: &[CurvePoint], path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    let mut buf = std::io::BufWriter::new(&mut tmp);
    write_curves_csv(points, &mut buf)
        .and_then(|()| buf.flush())
        .map_err(|e| Error::file(path, e))?;
    drop(buf);
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}
