//! Translation-invariant solutions.
//!
//! Period 2 reduces to the single equation `a = λ((a+2)/(2a))^k`, which has
//! exactly one positive root for every `λ > 0`. Period 4 with equal odd
//! activities reduces to
//!
//! ```text
//! a = λ((1+λ₂+a)/(a+c))^k,   c = λ((1+λ₂+c)/(a+c))^k.
//! ```
//!
//! Its diagonal solution `a = c` always exists and is unique. Off-diagonal
//! solutions are parametrised by `t = (1+λ₂+a)/(1+λ₂+c) ≠ 1` through
//! `c(t) = (λ₂+1)/Σ_{i=1}^{k-1} t^i`, `a(t) = t^k c(t)` and
//!
//! ```text
//! λ(t) = (λ₂+1)(t^k+1)^k / ((Σ_{i=1}^{k-1} t^i)(Σ_{i=0}^{k-1} t^i)^k),
//! ```
//!
//! a curve symmetric under `t ↦ 1/t` with its minimum at `t = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{check_order, check_positive, Error, Result};
use crate::solution::{PairSolution, Regime, SolutionKind, SolutionSet};
use crate::solver::{solve_bracketed_root, Bracket, ShiftedPowerMap, ROOT_TOLERANCE};
use crate::wand::{ActivityProfile, PeriodicBoundaryLaw, ReducedSystem, SystemKind};

/// Lower end of the curve-inversion bracket, just right of the minimum.
const INVERSION_START: f64 = 1.0 + 1e-8;

/// `Σ_{i=from}^{to} t^i`, summed term by term (no `(t^n − 1)/(t − 1)`).
pub fn geometric_sum(t: f64, from: u32, to: u32) -> f64 {
    (from..=to).map(|i| t.powi(i as i32)).sum()
}

fn geometric_sum_derivative(t: f64, from: u32, to: u32) -> f64 {
    (from.max(1)..=to)
        .map(|i| i as f64 * t.powi(i as i32 - 1))
        .sum()
}

/// The unique positive solution `a*` of `a = λ((a+2)/(2a))^k`.
pub fn solve_ti_q2(k: u32, lambda: f64) -> Result<f64> {
    Ok(ShiftedPowerMap::period_two(k, lambda)?.fixed_point()?.x0)
}

/// Critical activity of the period-4 translation-invariant system,
/// `2^k (λ₂+1) / ((k−1) k^k)`.
pub fn lambda_cr1(k: u32, lambda2: f64) -> f64 {
    let kf = k as f64;
    2f64.powi(k as i32) * (lambda2 + 1.0) / ((kf - 1.0) * kf.powi(k as i32))
}

/// The unique positive fixed point of `x ↦ λ((1+λ₂+x)/(2x))^k`.
pub fn solve_ti_q4_diagonal(k: u32, lambda: f64, lambda2: f64) -> Result<f64> {
    Ok(ShiftedPowerMap::period_four(k, lambda, lambda2)?
        .fixed_point()?
        .x0)
}

/// Multiplier of the antisymmetric direction `(δ, −δ)` of the period-4
/// system at its diagonal solution, `k a*/(1+λ₂+a*)`. It crosses 1 exactly at
/// the critical activity.
pub fn transverse_multiplier(k: u32, lambda2: f64, diagonal: f64) -> f64 {
    k as f64 * diagonal / (1.0 + lambda2 + diagonal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCurvePoint {
    pub t: f64,
    pub lambda: f64,
    pub a: f64,
    pub c: f64,
}

pub fn lambda_of_t(t: f64, k: u32, lambda2: f64) -> f64 {
    let inner = geometric_sum(t, 1, k - 1);
    let full = geometric_sum(t, 0, k - 1);
    (lambda2 + 1.0) * (t.powi(k as i32) + 1.0).powi(k as i32) / (inner * full.powi(k as i32))
}

/// `d/dt ln λ(t)`. Each term is O(1) near `t = 1`, so the sign stays
/// reliable where `λ'(t)` itself suffers cancellation.
pub fn log_derivative_lambda(t: f64, k: u32) -> f64 {
    let kf = k as f64;
    let tk = t.powi(k as i32);
    kf * kf * t.powi(k as i32 - 1) / (tk + 1.0)
        - geometric_sum_derivative(t, 1, k - 1) / geometric_sum(t, 1, k - 1)
        - kf * geometric_sum_derivative(t, 0, k - 1) / geometric_sum(t, 0, k - 1)
}

pub fn curve_point(t: f64, k: u32, lambda2: f64) -> LambdaCurvePoint {
    let c = (lambda2 + 1.0) / geometric_sum(t, 1, k - 1);
    LambdaCurvePoint {
        t,
        lambda: lambda_of_t(t, k, lambda2),
        a: t.powi(k as i32) * c,
        c,
    }
}

/// The unique `t > 1` with `λ(t) = λ`, or `None` when `λ ≤ λ_cr^(1)`.
pub fn invert_lambda_curve(lambda: f64, k: u32, lambda2: f64) -> Option<f64> {
    if !(lambda > lambda_cr1(k, lambda2)) || k < 2 {
        return None;
    }
    let excess = |t: f64| lambda_of_t(t, k, lambda2) - lambda;
    // λ is within rounding of the minimum at 1+1e-8; fall back to t = 1.
    let lo = if excess(INVERSION_START) < 0.0 {
        INVERSION_START
    } else {
        1.0
    };
    let mut hi = 2.0;
    while excess(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    solve_bracketed_root(excess, Bracket { lo, hi }, ROOT_TOLERANCE).ok()
}

fn ti_q4_system(k: u32, lambda: f64, lambda2: f64) -> Result<ReducedSystem> {
    ReducedSystem::build(
        k,
        4,
        ActivityProfile::q4(lambda, lambda2)?,
        SystemKind::TranslationInvariant,
    )
}

/// The single translation-invariant period-2 solution, as a one-element set.
pub fn enumerate_ti_q2(k: u32, lambda: f64) -> Result<SolutionSet> {
    let a = solve_ti_q2(k, lambda)?;
    let system = ReducedSystem::build(
        k,
        2,
        ActivityProfile::q2(lambda)?,
        SystemKind::TranslationInvariant,
    )?;
    Ok(SolutionSet {
        regime: Regime::Unique,
        critical: None,
        solutions: vec![PairSolution {
            first: a,
            second: a,
            kind: SolutionKind::Diagonal,
            residual: system.max_residual(&[a])?,
        }],
    })
}

/// All solutions of the period-4 translation-invariant system with equal odd
/// activities: the diagonal one, plus `(a, c)` with `a > c` and its swap when
/// `λ > λ_cr^(1)`.
pub fn enumerate_ti_q4(k: u32, lambda: f64, lambda2: f64) -> Result<SolutionSet> {
    check_order(k)?;
    check_positive("lambda", lambda)?;
    check_positive("lambda2", lambda2)?;
    let system = ti_q4_system(k, lambda, lambda2)?;
    let residual = |a: f64, c: f64| system.max_residual(&[a, lambda2, c]);

    let a_star = solve_ti_q4_diagonal(k, lambda, lambda2)?;
    let mut solutions = vec![PairSolution {
        first: a_star,
        second: a_star,
        kind: SolutionKind::Diagonal,
        residual: residual(a_star, a_star)?,
    }];
    let regime = match invert_lambda_curve(lambda, k, lambda2) {
        Some(t) => {
            let p = curve_point(t, k, lambda2);
            let off = PairSolution {
                first: p.a,
                second: p.c,
                kind: SolutionKind::OffDiagonal,
                residual: residual(p.a, p.c)?,
            };
            let mut swapped = off.swapped();
            swapped.residual = residual(p.c, p.a)?;
            solutions.push(off);
            solutions.push(swapped);
            Regime::Triple
        }
        None => Regime::Unique,
    };
    Ok(SolutionSet {
        regime,
        critical: Some(lambda_cr1(k, lambda2)),
        solutions,
    })
}

/// Period descriptor of a translation-invariant solution: `(1, a)` for
/// `q = 2` and `(1, a, λ₂, c)` for `q = 4`.
pub fn assemble_ti_vector(
    solution: &PairSolution,
    q: usize,
    lambda2: f64,
) -> Result<PeriodicBoundaryLaw> {
    match q {
        2 => PeriodicBoundaryLaw::q2(solution.first),
        4 => PeriodicBoundaryLaw::q4(solution.first, lambda2, solution.second),
        other => Err(Error::InvalidPeriod(other)),
    }
}
