//! Passive and locally passive states of bipartite quantum batteries, global
//! and local ergotropy, and entanglement-constrained work curves for two-qubit
//! batteries with local Hamiltonians.

pub mod battery;
pub mod error;
pub mod io;
pub mod optimizer;
pub mod passivity;
pub mod qmat;
pub mod twoqubit;
pub mod verify;

pub use error::{BatteryError, Result};

/// Fixed-point formatting that never prints a negative zero.
pub fn fmt_fixed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_fixed;

    #[test]
    fn fixed_formatting() {
        assert_eq!(fmt_fixed(-1e-12, 6), "0.000000");
        assert_eq!(fmt_fixed(6.0, 6), "6.000000");
        assert_eq!(fmt_fixed(-0.5, 2), "-0.50");
        // Exact binary ties round to even.
        assert_eq!(fmt_fixed(0.125, 2), "0.12");
        assert_eq!(fmt_fixed(0.375, 2), "0.38");
    }
}
