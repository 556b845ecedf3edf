//! Exact exponent arithmetic for the period and subconvexity bounds.

use crate::arith::Q;
use crate::error::{Error, Result};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentRecord {
    pub n: u32,
    pub l: u32,
    pub theta: Q,
    pub delta_period: Q,
    pub delta_subconvex: Q,
    pub subconvex_exponent: Q,
    pub conductor_exponent: Q,
    pub trivial_period_exponent: Q,
    pub n_exponent: Q,
}

fn qi(x: i128) -> Q {
    Q::from_integer(x)
}

/// 2n² + 3n + 3.
fn cubic(n: u32) -> i128 {
    let n = n as i128;
    2 * n * n + 3 * n + 3
}

pub fn exponents(n: u32, l: u32, theta: Q) -> Result<ExponentRecord> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if theta < Q::zero() || theta >= Q::new(1, 2) {
        return Err(Error::BadTheta);
    }
    let ni = n as i128;
    let li = l as i128;
    let two = qi(2);
    let delta_period = (Q::one() - two * theta) / (two * (qi(cubic(n)) - qi(4) * theta));
    let delta_subconvex = delta_period / qi(2 * ni * (ni + 1));
    Ok(ExponentRecord {
        n,
        l,
        theta,
        delta_period,
        delta_subconvex,
        subconvex_exponent: Q::new(1, 4) - delta_subconvex,
        conductor_exponent: qi(4 * li * ni * (ni + 1)),
        trivial_period_exponent: Q::new(ni * li, 2),
        n_exponent: Q::new(li, cubic(n)),
    })
}

/// At θ = 0 the θ-variant reduces to 1/(4n²+6n+6) and 1/(4n(n+1)(2n²+3n+3)).
pub fn theta_zero_consistent(n: u32) -> Result<bool> {
    let r = exponents(n, 1, Q::zero())?;
    let ni = n as i128;
    Ok(r.delta_period == Q::new(1, 2 * cubic(n))
        && r.delta_subconvex == Q::new(1, 4 * ni * (ni + 1) * cubic(n)))
}

/// Exact parse of "a", "a/b" or a finite decimal.
pub fn parse_rational(s: &str) -> Result<Q> {
    let bad = || Error::InvalidConfig(format!("not a rational number: {s}"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: i128 = a.trim().parse().map_err(|_| bad())?;
        let b: i128 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Q::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 30 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let ip: i128 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let fp: i128 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let den = 10i128.pow(frac.len() as u32);
        let mag = Q::new(ip.abs() * den + fp, den);
        return Ok(if neg { -mag } else { mag });
    }
    s.parse::<i128>().map(Q::from_integer).map_err(|_| bad())
}

pub fn markdown_table(rows: &[ExponentRecord]) -> String {
    let mut out = String::from(
        "| n | l | theta | delta_period | delta_subconvex | subconvex exponent | conductor exponent | trivial exponent | N exponent |\n|---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.n,
            r.l,
            r.theta,
            r.delta_period,
            r.delta_subconvex,
            r.subconvex_exponent,
            r.conductor_exponent,
            r.trivial_period_exponent,
            r.n_exponent
        ));
    }
    out
}
