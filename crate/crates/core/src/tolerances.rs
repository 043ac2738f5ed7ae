use serde::{Deserialize, Serialize};

/// Numerical thresholds shared by the algebra, hierarchy and dressing code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Exact-algebra identities (zero diagonals, traces, distinct J entries).
    pub algebraic: f64,
    /// Round trips such as `a * inv(a) = I`.
    pub round_trip: f64,
    /// Relative `|det a| / max|a_ij|^n` below which a matrix counts as singular.
    pub singular: f64,
    /// Largest entry allowed at either grid edge for a decaying potential.
    pub decay: f64,
    /// Agreement of the spectrum of S with the prescribed eigenvalues.
    pub spectrum: f64,
    /// Minimum distance between a dressed spectral value and the spectrum of S.
    pub degenerate: f64,
    /// Relative mismatch allowed between fitted and predicted edge growth of det H.
    pub dominance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            round_trip: 1e-10,
            singular: 1e-13,
            decay: 1e-8,
            spectrum: 1e-8,
            degenerate: 1e-10,
            dominance: 0.1,
        }
    }
}
