use crate::math::{check_alpha, MathError};

/// Probability that the walk started at `k` reaches `inertia` (before
/// escaping to minus infinity): `(alpha / (1 - alpha))^(inertia - k)` below
/// the barrier, 1 at or above it.
pub fn epsilon(k: u64, inertia: u64, alpha: f64) -> Result<f64, MathError> {
    check_alpha(alpha)?;
    if k >= inertia {
        return Ok(1.0);
    }
    let r = alpha / (1.0 - alpha);
    Ok(r.powi((inertia - k) as i32))
}

/// `P[T_0 > k]` for the walk started at 1, where `T_0` is the first time it
/// sits at 0.
///
/// Forward DP over the position distribution. Mass that is further from 0
/// than the steps remaining cannot be absorbed any more and is set aside, so
/// the only error is floating-point rounding, far below any `tol` the
/// caller can ask for.
pub fn epsilon_star(k: u64, alpha: f64, tol: f64) -> Result<f64, MathError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(MathError::BadTolerance(tol));
    }
    Ok(epsilon_star_series(k, alpha)?[k as usize])
}

/// `[P[T_0 > 0], ..., P[T_0 > n]]` from one DP pass.
pub fn epsilon_star_series(n: u64, alpha: f64) -> Result<Vec<f64>, MathError> {
    check_alpha(alpha)?;
    let n = n as usize;
    let beta = 1.0 - alpha;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    // mass[p] = P[position = p, not yet absorbed]; p = 0 unused.
    let mut mass = vec![0.0f64; n + 3];
    mass[1] = 1.0;
    let mut top = 1usize;
    for step in 1..=n {
        let mut next = vec![0.0f64; n + 3];
        for p in 1..=top {
            let m = mass[p];
            if m == 0.0 {
                continue;
            }
            next[p + 1] += alpha * m;
            if p > 1 {
                next[p - 1] += beta * m;
            }
        }
        top += 1;
        mass = next;
        // Positions above the remaining step count can no longer reach 0
        // within the horizon; the total is unaffected, only the work is.
        let remaining = n - step;
        let safe_from = remaining + 1;
        if top > safe_from + 1 {
            let spill: f64 = mass[safe_from + 1..=top].iter().sum();
            for m in &mut mass[safe_from + 1..=top] {
                *m = 0.0;
            }
            mass[safe_from + 1] = spill;
            top = safe_from + 1;
        }
        out.push(mass[1..=top].iter().sum());
    }
    Ok(out)
}

/// Chernoff majorant `(2 sqrt(alpha (1 - alpha)))^k` of `P[T_0 > k]`.
pub fn epsilon_star_majorant(k: u64, alpha: f64) -> Result<f64, MathError> {
    check_alpha(alpha)?;
    Ok((2.0 * (alpha * (1.0 - alpha)).sqrt()).powi(k as i32))
}
