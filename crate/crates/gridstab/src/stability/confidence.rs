//! Bernoulli standard errors and exact one-sided Clopper-Pearson bounds.

use crate::error::{Error, Result};

/// Standard error of a Bernoulli proportion estimate: `sqrt(p̂(1−p̂)/n)`
/// with `p̂ = s/n`.
pub fn bernoulli_se(n: u64, s: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("standard error needs at least one trial".into()));
    }
    if s > n {
        return Err(Error::Config(format!("{s} successes out of {n} trials")));
    }
    let p = s as f64 / n as f64;
    Ok((p * (1.0 - p) / n as f64).sqrt())
}

/// `P[Bin(n, p) ≥ s]` for `s ≥ 1`, via the regularized incomplete beta
/// function `I_p(s, n − s + 1)`.
fn binomial_upper_tail(n: u64, s: u64, p: f64) -> f64 {
    debug_assert!(s >= 1 && s <= n);
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    statrs::function::beta::beta_reg(s as f64, (n - s + 1) as f64, p)
}

/// Lower endpoint of the one-sided Clopper-Pearson confidence interval:
///
/// `p⁻ = inf { p : P[Bin(n, p) ≥ s] > alpha }`.
///
/// If the true success probability were below `p⁻`, observing at least `s`
/// successes in `n` trials would have probability at most `alpha`. The tail
/// is continuous and strictly increasing in `p` (for `s ≥ 1`), so the
/// infimum is the root of `tail(p) = alpha`, bracketed by bisection down to
/// an interval width of 1e-13. For `s = 0` the condition holds for every
/// `p`, giving 0.
pub fn clopper_pearson_lower(n: u64, s: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("Clopper-Pearson bound needs at least one trial".into()));
    }
    if s > n {
        return Err(Error::Config(format!("{s} successes out of {n} trials")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if s == 0 {
        return Ok(0.0);
    }
    // Invariant: tail(lo) <= alpha < tail(hi).
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_upper_tail(n, s, mid) > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
