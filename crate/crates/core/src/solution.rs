use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Unique,
    Triple,
}

impl Regime {
    pub fn count(self) -> usize {
        match self {
            Regime::Unique => 1,
            Regime::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionKind {
    /// Both coordinates equal the central fixed point.
    Diagonal,
    /// Canonical symmetry-broken solution, `first > second` for the
    /// translation-invariant case and `first < second` for 2-cycles.
    OffDiagonal,
    /// The coordinate swap of the off-diagonal solution.
    Swapped,
}

/// A solution of one of the two-coordinate reductions. The meaning of the
/// coordinates depends on the problem: `(a, c)` for the period-4
/// translation-invariant system, `(z_1, z̃_1)` for the bipartite ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub first: f64,
    pub second: f64,
    pub kind: SolutionKind,
    /// Max-norm residual of the full reduced system at this solution.
    pub residual: f64,
}

impl PairSolution {
    pub fn swapped(&self) -> Self {
        Self {
            first: self.second,
            second: self.first,
            kind: match self.kind {
                SolutionKind::Diagonal => SolutionKind::Diagonal,
                SolutionKind::OffDiagonal => SolutionKind::Swapped,
                SolutionKind::Swapped => SolutionKind::OffDiagonal,
            },
            residual: self.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub regime: Regime,
    /// Closed-form critical activity, when the problem has one.
    pub critical: Option<f64>,
    /// Diagonal solution first, then the off-diagonal pair if present.
    pub solutions: Vec<PairSolution>,
}

impl SolutionSet {
    pub fn count(&self) -> usize {
        self.solutions.len()
    }

    pub fn diagonal(&self) -> &PairSolution {
        &self.solutions[0]
    }

    pub fn off_diagonal(&self) -> Option<&PairSolution> {
        self.solutions
            .iter()
            .find(|s| s.kind == SolutionKind::OffDiagonal)
    }

    pub fn max_residual(&self) -> f64 {
        self.solutions
            .iter()
            .fold(0.0_f64, |m, s| m.max(s.residual))
    }
}
