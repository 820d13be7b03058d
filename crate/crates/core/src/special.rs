//! Thin wrappers over the gamma-family functions.

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma(1.5) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
        // reflection branch: Γ(-0.5) = -2√π
        assert!((gamma(-0.5) + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((digamma(1.0) + EULER_GAMMA).abs() < 1e-12);
    }
}
