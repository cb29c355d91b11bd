//! Parameter scans over `λ` and empirical location of the critical activity.
//!
//! Each mode has a scalar decreasing map with a central fixed point `x0`.
//! The solution count switches where `deriv + 1` changes sign, with `deriv`
//! the derivative diagnostic reported per row. Refinement bisects on that
//! margin rather than on the count, which jumps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::bipartite::{lambda_cr2, lambda_cr3, solve_bip_q2, solve_bip_q4_i3, solve_bip_q4_i4};
use crate::error::{check_order, check_positive, Error, Result};
use crate::solution::{PairSolution, Regime, SolutionKind, SolutionSet};
use crate::solver::{solve_bracketed_root, Bracket, ScalarMap, ShiftedPowerMap, ROOT_TOLERANCE};
use crate::ti::{
    curve_point, enumerate_ti_q2, enumerate_ti_q4, lambda_cr1, log_derivative_lambda,
    solve_ti_q4_diagonal, transverse_multiplier, LambdaCurvePoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnalysisMode {
    #[serde(rename = "ti-q2")]
    TiQ2,
    #[serde(rename = "ti-q4")]
    TiQ4,
    #[serde(rename = "bip-q2")]
    BipQ2,
    #[serde(rename = "bip-q4-I3")]
    BipQ4I3,
    #[serde(rename = "bip-q4-I4")]
    BipQ4I4,
}

impl AnalysisMode {
    pub const ALL: [AnalysisMode; 5] = [
        AnalysisMode::TiQ2,
        AnalysisMode::TiQ4,
        AnalysisMode::BipQ2,
        AnalysisMode::BipQ4I3,
        AnalysisMode::BipQ4I4,
    ];

    pub fn period(self) -> usize {
        match self {
            AnalysisMode::TiQ2 | AnalysisMode::BipQ2 => 2,
            _ => 4,
        }
    }

    pub fn needs_lambda2(self) -> bool {
        self.period() == 4
    }

    pub fn is_bipartite(self) -> bool {
        matches!(
            self,
            AnalysisMode::BipQ2 | AnalysisMode::BipQ4I3 | AnalysisMode::BipQ4I4
        )
    }
}

impl fmt::Display for AnalysisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalysisMode::TiQ2 => "ti-q2",
            AnalysisMode::TiQ4 => "ti-q4",
            AnalysisMode::BipQ2 => "bip-q2",
            AnalysisMode::BipQ4I3 => "bip-q4-I3",
            AnalysisMode::BipQ4I4 => "bip-q4-I4",
        })
    }
}

impl FromStr for AnalysisMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Where one mode is evaluated: order `k` and, for period 4, the even
/// activity `λ₂` (called `γ` in the bipartite problems).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub mode: AnalysisMode,
    pub k: u32,
    pub lambda2: Option<f64>,
}

impl ModeParams {
    pub fn new(mode: AnalysisMode, k: u32, lambda2: Option<f64>) -> Result<Self> {
        check_order(k)?;
        match (mode.needs_lambda2(), lambda2) {
            (true, None) => {
                return Err(Error::InvalidParameter(format!(
                    "mode {mode} needs the even activity"
                )))
            }
            (true, Some(l2)) => check_positive("lambda2", l2)?,
            (false, _) => {}
        }
        Ok(Self {
            mode,
            k,
            lambda2: if mode.needs_lambda2() { lambda2 } else { None },
        })
    }

    fn l2(&self) -> f64 {
        self.lambda2.unwrap_or(1.0)
    }

    pub fn closed_form_critical(&self) -> Option<f64> {
        match self.mode {
            AnalysisMode::TiQ4 => Some(lambda_cr1(self.k, self.l2())),
            AnalysisMode::BipQ2 => Some(lambda_cr2(self.k)),
            AnalysisMode::BipQ4I4 => Some(lambda_cr3(self.k, self.l2())),
            AnalysisMode::TiQ2 | AnalysisMode::BipQ4I3 => None,
        }
    }

    /// The solution set at `λ`.
    pub fn solve(&self, lambda: f64) -> Result<SolutionSet> {
        let (k, l2) = (self.k, self.l2());
        match self.mode {
            AnalysisMode::TiQ2 => enumerate_ti_q2(k, lambda),
            AnalysisMode::TiQ4 => enumerate_ti_q4(k, lambda, l2),
            AnalysisMode::BipQ2 => solve_bip_q2(k, lambda),
            AnalysisMode::BipQ4I4 => solve_bip_q4_i4(k, lambda, l2),
            AnalysisMode::BipQ4I3 => {
                let s = solve_bip_q4_i3(k, lambda, l2)?;
                Ok(SolutionSet {
                    regime: Regime::Unique,
                    critical: None,
                    solutions: vec![PairSolution {
                        first: s.values[0],
                        second: s.values[2],
                        kind: SolutionKind::Diagonal,
                        residual: s.residual,
                    }],
                })
            }
        }
    }

    fn map(&self, lambda: f64) -> Result<ShiftedPowerMap> {
        match self.mode {
            AnalysisMode::TiQ2 | AnalysisMode::BipQ2 => ShiftedPowerMap::period_two(self.k, lambda),
            _ => ShiftedPowerMap::period_four(self.k, lambda, self.l2()),
        }
    }

    /// Derivative diagnostic at the central fixed point.
    ///
    /// For the bipartite modes and `ti-q2` this is `φ'(x0)` of the scalar
    /// map. For `ti-q4` it is minus the transverse multiplier `k a*/(1+λ₂+a*)`
    /// of the diagonal solution, which reaches `−1` exactly at the critical
    /// activity.
    pub fn derivative_at_x0(&self, lambda: f64) -> Result<f64> {
        match self.mode {
            AnalysisMode::TiQ4 => {
                let a = solve_ti_q4_diagonal(self.k, lambda, self.l2())?;
                Ok(-transverse_multiplier(self.k, self.l2(), a))
            }
            _ => {
                let map = self.map(lambda)?;
                let x0 = map.fixed_point()?.x0;
                Ok(map.derivative(x0))
            }
        }
    }

    /// `deriv + 1`, positive on the unique side of every mode that has a
    /// regime change.
    pub fn margin(&self, lambda: f64) -> Result<f64> {
        Ok(self.derivative_at_x0(lambda)? + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub count: usize,
    pub a_star: f64,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub deriv_at_x0: f64,
}

impl ScanRow {
    pub fn at(params: &ModeParams, lambda: f64) -> Result<Self> {
        let set = params.solve(lambda)?;
        let off = set.off_diagonal();
        Ok(Self {
            lambda,
            count: set.count(),
            a_star: set.diagonal().first,
            a1: off.map(|s| s.first),
            a2: off.map(|s| s.second),
            deriv_at_x0: params.derivative_at_x0(lambda)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub closed_form: Option<f64>,
    pub empirical: Option<f64>,
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub params: ModeParams,
    pub rows: Vec<ScanRow>,
    pub critical: CriticalEstimate,
}

/// `steps` equally spaced values from `lo` to `hi`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "a scan needs at least 2 steps, got {steps}"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "degenerate range [{lo}, {hi}]"
        )));
    }
    let h = (hi - lo) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i == steps - 1 { hi } else { lo + h * i as f64 })
        .collect())
}

/// Bisects the margin between two activities where it changes sign.
pub fn refine_critical(params: &ModeParams, lo: f64, hi: f64) -> Result<f64> {
    solve_bracketed_root(
        |l| params.margin(l).unwrap_or(f64::NAN),
        Bracket::new(lo, hi)?,
        ROOT_TOLERANCE,
    )
}

pub fn scan(params: ModeParams, lambda_min: f64, lambda_max: f64, steps: usize) -> Result<Scan> {
    check_positive("lambda-min", lambda_min)?;
    let grid = linear_grid(lambda_min, lambda_max, steps)?;
    let rows = grid
        .par_iter()
        .map(|&l| ScanRow::at(&params, l))
        .collect::<Result<Vec<_>>>()?;

    // only modes with a regime change have a meaningful margin crossing
    let closed_form = params.closed_form_critical();
    let bracket = rows
        .windows(2)
        .filter(|_| closed_form.is_some())
        .find(|w| (w[0].deriv_at_x0 + 1.0 > 0.0) != (w[1].deriv_at_x0 + 1.0 > 0.0));
    let empirical = match bracket {
        Some(w) => Some(refine_critical(&params, w[0].lambda, w[1].lambda)?),
        None => None,
    };
    let rel_err = match (closed_form, empirical) {
        (Some(c), Some(e)) => Some((e - c).abs() / c),
        _ => None,
    };
    Ok(Scan {
        params,
        rows,
        critical: CriticalEstimate {
            closed_form,
            empirical,
            rel_err,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurve {
    pub k: u32,
    pub lambda2: f64,
    pub points: Vec<LambdaCurvePoint>,
    /// Minimiser of `λ(t)` over `[t_min, t_max]`.
    pub t_at_min: f64,
    pub lambda_min: f64,
}

/// `λ(t)`, `a(t)`, `c(t)` on a log grid, plus the located minimum.
pub fn lambda_curve(k: u32, lambda2: f64, t_min: f64, t_max: f64, steps: usize) -> Result<LambdaCurve> {
    check_order(k)?;
    check_positive("lambda2", lambda2)?;
    check_positive("t-min", t_min)?;
    let log_grid = linear_grid(t_min.ln(), t_max.ln(), steps)?;
    let points = log_grid
        .iter()
        .map(|u| curve_point(u.exp(), k, lambda2))
        .collect();
    let slope = |t: f64| log_derivative_lambda(t, k);
    let t_at_min = if slope(t_min) >= 0.0 {
        t_min
    } else if slope(t_max) <= 0.0 {
        t_max
    } else {
        solve_bracketed_root(slope, Bracket::new(t_min, t_max)?, 0.0)?
    };
    Ok(LambdaCurve {
        k,
        lambda2,
        points,
        t_at_min,
        lambda_min: curve_point(t_at_min, k, lambda2).lambda,
    })
}
