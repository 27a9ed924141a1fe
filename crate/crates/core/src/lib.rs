//! Simulation and verification toolkit for heavy-tailed moving averages:
//! regularly varying noise, cadlag partial-sum paths with exact M2 metrics,
//! finite and truncated-infinite moving-average algebra, stable-limit
//! characteristic exponents, and seeded Monte Carlo experiments with a CLI.

pub mod cadlag;
pub mod cli;
pub mod ma;
pub mod mc;
pub mod noise;
mod numeric;
pub mod stablelim;
