//! Sufficient inertia for a given attacker share.
//!
//! With `r = alpha / (1 - alpha)`, `eps_k = r^(I - k)` (1 for `k >= I`) and
//! `G_m = sum_{k >= 0} alpha^k eps_{k + m}`, the four conditions checked are
//!
//! ```text
//! (A) eps_J                                                 <= 1 - alpha
//! (B) (1 - alpha)(1/2 + alpha) + (1 - alpha) G_J            <= 1 - alpha
//! (C) alpha T(J) + (1 - alpha)(1/2 + alpha) + (1 - alpha) G_1 <= 1 - alpha
//! (D)       T(J) + (1 - alpha)(1/2 + alpha) + (1 - alpha) G_1 <= 1 - alpha
//! ```
//!
//! where `T(J) = sum_{k > J} eps*_k` is the tail of the survival function of
//! the walk's hitting time of 0 from 1. They are sufficient, not necessary.
//!
//! Both infinite sums have exact finite forms. `G_m` splits at `k = I - m`
//! into a finite sum and a geometric tail `alpha^(I - m) / (1 - alpha)`.
//! `T(J)` uses `sum_{k >= 0} eps*_k = E[T_0] = 1 / (1 - 2 alpha)`, so only
//! `eps*_0 ..= eps*_J` are computed.

use serde::{Deserialize, Serialize};

use crate::math::{epsilon_star_series, MathError};

/// Largest inertia the search tries before giving up.
pub const MAX_INERTIA: u32 = 1_000_000;

/// Added to every left-hand side to absorb rounding.
const SLACK: f64 = 1e-12;

/// Slack of each condition: `(1 - alpha) - lhs`. Feasible means all are at
/// least the requested margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl Residuals {
    pub fn min(&self) -> f64 {
        self.a.min(self.b).min(self.c).min(self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaBound {
    pub alpha: f64,
    #[serde(rename = "J")]
    pub j: u32,
    #[serde(rename = "I")]
    pub i: u32,
    pub residuals: Residuals,
    pub feasible: bool,
}

/// `sum_{k >= 0} alpha^k eps_{k + m}` for barrier `inertia`.
fn g(alpha: f64, inertia: u32, m: u32) -> f64 {
    if m >= inertia {
        return 1.0 / (1.0 - alpha);
    }
    let n = (inertia - m) as i32;
    let r = alpha / (1.0 - alpha);
    let head: f64 = (0..n).map(|k| alpha.powi(k) * r.powi(n - k)).sum();
    head + alpha.powi(n) / (1.0 - alpha)
}

/// `sum_{k > j} eps*_k`.
fn star_tail(alpha: f64, j: u32) -> Result<f64, MathError> {
    let head: f64 = epsilon_star_series(j as u64, alpha)?.iter().sum();
    Ok((1.0 / (1.0 - 2.0 * alpha) - head).max(0.0))
}

fn residuals(alpha: f64, j: u32, inertia: u32, tail: f64) -> Residuals {
    let b = 1.0 - alpha;
    let race = b * (0.5 + alpha);
    let eps_j = if j >= inertia {
        1.0
    } else {
        (alpha / b).powi((inertia - j) as i32)
    };
    let g1 = g(alpha, inertia, 1);
    Residuals {
        a: b - (eps_j + SLACK),
        b: b - (race + b * g(alpha, inertia, j) + SLACK),
        c: b - (alpha * tail + race + b * g1 + SLACK),
        d: b - (tail + race + b * g1 + SLACK),
    }
}

/// Residuals of the four conditions at `(J, I)`.
pub fn evaluate(alpha: f64, j: u32, inertia: u32) -> Result<Residuals, MathError> {
    crate::math::check_alpha(alpha)?;
    if inertia == 0 {
        return Err(MathError::ZeroInertia);
    }
    Ok(residuals(alpha, j, inertia, star_tail(alpha, j)?))
}

/// Lexicographically smallest `(J, I)` with `1 <= J < I` meeting every
/// condition with slack at least `margin`.
///
/// `J` is fixed first: (D) can only hold for some `I` once
/// `T(J) < (1 - alpha)(1/2 - alpha) - margin`, since `G_1` vanishes as `I`
/// grows. All residuals then increase with `I`.
pub fn sufficient_inertia(alpha: f64, margin: f64) -> Result<InertiaBound, MathError> {
    if alpha >= 0.5 {
        return Err(MathError::Infeasible(alpha));
    }
    crate::math::check_alpha(alpha)?;
    if margin.is_nan() || margin < 0.0 {
        return Err(MathError::NegativeMargin(margin));
    }
    let room = (1.0 - alpha) * (0.5 - alpha) - margin - SLACK;
    if room <= 0.0 {
        return Err(MathError::Infeasible(alpha));
    }

    // T(J) is decreasing in J; grow the series until the tail fits.
    let mut n = 64u64;
    let (j, tail) = loop {
        let series = epsilon_star_series(n, alpha)?;
        let total = 1.0 / (1.0 - 2.0 * alpha);
        let mut head = 0.0;
        let mut found = None;
        for (k, v) in series.iter().enumerate() {
            head += v;
            let tail = (total - head).max(0.0);
            if k >= 1 && tail < room {
                found = Some((k as u32, tail));
                break;
            }
        }
        if let Some(f) = found {
            break f;
        }
        if n >= MAX_INERTIA as u64 {
            return Err(MathError::SearchExhausted {
                alpha,
                limit: MAX_INERTIA,
            });
        }
        n *= 4;
    };

    for inertia in j + 1..=MAX_INERTIA {
        let r = residuals(alpha, j, inertia, tail);
        if r.min() >= margin {
            return Ok(InertiaBound {
                alpha,
                j,
                i: inertia,
                residuals: r,
                feasible: true,
            });
        }
    }
    Err(MathError::SearchExhausted {
        alpha,
        limit: MAX_INERTIA,
    })
}
