use nalgebra::{DMatrix, DVector};

use crate::math::{check_alpha, MathError};
use crate::strategy::LeadState;

/// Probability mass the truncated revenue chain may leave beyond its top
/// lead state.
pub const TAIL_MASS: f64 = 1e-12;

const MIN_CAP: usize = 64;

/// Smallest attacker share above which selfish mining beats honest mining
/// when a fraction `gamma` of honest power sides with the attacker in a race.
pub fn selfish_threshold(gamma: f64) -> Result<f64, MathError> {
    check_gamma(gamma)?;
    Ok((1.0 - gamma) / (3.0 - 2.0 * gamma))
}

fn check_gamma(gamma: f64) -> Result<(), MathError> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(MathError::GammaOutOfRange(gamma))
    }
}

/// The selfish miner's lead as a finite Markov chain, one step per block.
///
/// States are ordered `Zero, Race, Lead(1), ..., Lead(cap)`; the top state
/// stays put on an attacker block. `attacker` and `honest` hold the expected
/// number of blocks each side adds to the final chain per step out of each
/// state.
#[derive(Clone, Debug)]
pub struct SelfishChain {
    pub states: Vec<LeadState>,
    pub transition: DMatrix<f64>,
    pub attacker: Vec<f64>,
    pub honest: Vec<f64>,
}

/// Lead cap making the stationary mass above it negligible: the tail of the
/// lead distribution decays like `(alpha / (1 - alpha))^n`.
fn cap_for(alpha: f64) -> usize {
    let r = alpha / (1.0 - alpha);
    let n = (TAIL_MASS.ln() / r.ln()).ceil() as usize + 1;
    n.max(MIN_CAP)
}

pub fn selfish_chain(alpha: f64, gamma: f64) -> Result<SelfishChain, MathError> {
    check_alpha(alpha)?;
    check_gamma(gamma)?;
    let cap = cap_for(alpha);
    let n = cap + 2;
    let (a, b) = (alpha, 1.0 - alpha);
    let lead = |k: usize| k + 1;
    let mut p = DMatrix::zeros(n, n);
    let mut attacker = vec![0.0; n];
    let mut honest = vec![0.0; n];

    // Zero: the attacker starts a private branch or an honest block lands.
    p[(0, lead(1))] = a;
    p[(0, 0)] = b;
    honest[0] = b;

    // Race: the next block settles it either way.
    p[(1, 0)] = 1.0;
    attacker[1] = 2.0 * a + gamma * b;
    honest[1] = gamma * b + 2.0 * (1.0 - gamma) * b;

    // Lead 1: an honest block forces the race.
    p[(lead(1), lead(2))] = a;
    p[(lead(1), 1)] = b;

    // Lead 2: an honest block makes the attacker publish and win two.
    p[(lead(2), lead(3))] = a;
    p[(lead(2), 0)] = b;
    attacker[lead(2)] = 2.0 * b;

    for k in 3..=cap {
        let up = if k == cap { lead(cap) } else { lead(k + 1) };
        p[(lead(k), up)] += a;
        p[(lead(k), lead(k - 1))] += b;
        attacker[lead(k)] = b;
    }

    let mut states = vec![LeadState::Zero, LeadState::Race];
    states.extend((1..=cap as u64).map(LeadState::Lead));
    Ok(SelfishChain {
        states,
        transition: p,
        attacker,
        honest,
    })
}

impl SelfishChain {
    /// Stationary distribution, from `pi (P - 1) = 0` with one equation
    /// replaced by the normalization.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.states.len();
        let mut m = self.transition.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            m[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = m
            .lu()
            .solve(&rhs)
            .expect("an irreducible chain has a unique stationary law");
        pi.iter().copied().collect()
    }

    /// Attacker's long-run fraction of chain blocks.
    pub fn revenue(&self) -> f64 {
        let pi = self.stationary();
        let ra: f64 = pi.iter().zip(&self.attacker).map(|(p, r)| p * r).sum();
        let rh: f64 = pi.iter().zip(&self.honest).map(|(p, r)| p * r).sum();
        ra / (ra + rh)
    }
}

/// Long-run share of the chain earned by a selfish miner of power `alpha`
/// against honest miners who follow the attacker in a race with probability
/// `gamma`.
pub fn selfish_revenue(alpha: f64, gamma: f64) -> Result<f64, MathError> {
    Ok(selfish_chain(alpha, gamma)?.revenue())
}

/// Stationary probability of each lead state (race gamma does not matter).
pub fn stationary_distribution(alpha: f64) -> Result<Vec<(LeadState, f64)>, MathError> {
    let chain = selfish_chain(alpha, 0.5)?;
    let pi = chain.stationary();
    Ok(chain.states.into_iter().zip(pi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        assert_eq!(selfish_threshold(0.5).unwrap(), 0.25);
        assert_eq!(selfish_threshold(1.0).unwrap(), 0.0);
        assert!((selfish_threshold(0.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(selfish_threshold(1.5).is_err());
    }

    #[test]
    fn rows_are_stochastic() {
        let c = selfish_chain(0.3, 0.5).unwrap();
        for i in 0..c.states.len() {
            let s: f64 = c.transition.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cap_covers_tail() {
        let pi = stationary_distribution(0.45).unwrap();
        assert!(pi.last().unwrap().1 < TAIL_MASS);
        let total: f64 = pi.iter().map(|s| s.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
