//! Simulator and analysis toolkit for the proof-of-work mining game under
//! the standard longest-chain rule and the inertial rule.
//!
//! - [`game`]: block tree, period loop, payoffs.
//! - [`strategy`]: standard, inertial, selfish and scripted miners.
//! - [`forensics`]: honest/dishonest classification and killer attribution
//!   on finished runs, with the per-period payoff bounds.
//! - [`math`]: random-walk probabilities, selfish-mining revenue, and the
//!   sufficient-inertia calculator.
//! - [`harness`]: experiment files, parallel replications and outputs.
//!
//! ```
//! use inertial_mining::game::{run, GameConfig, MinerConfig, MinerId};
//! use inertial_mining::strategy::StrategySpec;
//!
//! let miners = vec![
//!     MinerConfig { index: MinerId(0), power: 0.3, strategy: StrategySpec::inertial(4) },
//!     MinerConfig { index: MinerId(1), power: 0.7, strategy: StrategySpec::inertial(4) },
//! ];
//! let (trace, report) = run(&GameConfig::new(miners, 1), 10_000, 8).unwrap();
//! assert_eq!(trace.fork_periods, 0);
//! assert!((report.share(MinerId(0)).unwrap() - 0.3).abs() < 0.03);
//! ```

pub mod forensics;
pub mod game;
pub mod harness;
pub mod math;
pub mod strategy;
