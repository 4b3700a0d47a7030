//! Random-walk quantities behind the inertia bounds, the selfish-mining
//! revenue chain, and the sufficient-inertia calculator.
//!
//! Every quantity here concerns an `alpha`-biased walk: up with probability
//! `alpha`, down with probability `1 - alpha`, `alpha < 1/2`.

mod calculator;
mod revenue;
mod walk;

use thiserror::Error;

pub use calculator::{evaluate, sufficient_inertia, InertiaBound, Residuals, MAX_INERTIA};
pub use revenue::{
    selfish_chain, selfish_revenue, selfish_threshold, stationary_distribution, SelfishChain,
    TAIL_MASS,
};
pub use walk::{epsilon, epsilon_star, epsilon_star_majorant, epsilon_star_series};

#[derive(Debug, Error, PartialEq)]
pub enum MathError {
    #[error("alpha must lie in (0, 1/2), got {0}")]
    AlphaOutOfRange(f64),
    #[error("gamma must lie in [0, 1], got {0}")]
    GammaOutOfRange(f64),
    #[error("inertia must be at least 1")]
    ZeroInertia,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("margin must be nonnegative, got {0}")]
    NegativeMargin(f64),
    #[error("no sufficient inertia exists for alpha = {0}: requires max_i α_i < 1/2")]
    Infeasible(f64),
    #[error("no sufficient inertia below {limit} for alpha = {alpha}")]
    SearchExhausted { alpha: f64, limit: u32 },
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), MathError> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(MathError::AlphaOutOfRange(alpha))
    }
}
