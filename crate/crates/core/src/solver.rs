//! Scalar root finding, fixed points of decreasing maps and their 2-cycles.
//!
//! Bisection is the backbone of every search here; Newton steps are only
//! taken while they stay inside the current sign-change bracket. The maps of
//! interest are steep near zero and flat at infinity, so brackets that span
//! several decades are split at the geometric midpoint.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_order, check_positive, Error, Result};

pub const ROOT_TOLERANCE: f64 = 1e-12;
pub const RELATIVE_WIDTH: f64 = 1e-14;
pub const BISECTION_CAP: usize = 200;
pub const NEWTON_CAP: usize = 50;
/// `|f'(x0) + 1|` below this is treated as exact tangency.
pub const TANGENT_TOLERANCE: f64 = 1e-9;
/// Initial exclusion radius around the central fixed point, relative to it.
pub const CYCLE_OFFSET: f64 = 1e-6;
/// Agreement required between the two independent 2-cycle searches.
const CYCLE_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::BracketViolation(format!(
                "need finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn split(&self) -> f64 {
        if self.lo > 0.0 && self.hi > 4.0 * self.lo {
            (self.lo * self.hi).sqrt()
        } else {
            0.5 * (self.lo + self.hi)
        }
    }

    fn is_narrow(&self, tol: f64) -> bool {
        let scale = self.lo.abs().max(self.hi.abs()).max(tol);
        self.width() <= RELATIVE_WIDTH * scale
    }
}

/// A real map with an analytic derivative.
pub trait ScalarMap {
    fn eval(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// Adapter for a pair of closures.
pub struct FnMap<F, D> {
    pub f: F,
    pub df: D,
}

impl<F: Fn(f64) -> f64, D: Fn(f64) -> f64> ScalarMap for FnMap<F, D> {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

/// `x ↦ λ ((s + x) / (2x))^k`.
///
/// With `s = 2` this is the map of the period-2 problems; with `s = 1 + γ` it
/// is the period-4 map (diagonal translation-invariant case and the
/// bipartite `I₄` reduction).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedPowerMap {
    pub k: u32,
    pub lambda: f64,
    pub shift: f64,
}

impl ShiftedPowerMap {
    pub fn new(k: u32, lambda: f64, shift: f64) -> Result<Self> {
        check_order(k)?;
        check_positive("lambda", lambda)?;
        check_positive("shift", shift)?;
        Ok(Self { k, lambda, shift })
    }

    /// Period-2 map, `λ((2 + x)/(2x))^k`.
    pub fn period_two(k: u32, lambda: f64) -> Result<Self> {
        Self::new(k, lambda, 2.0)
    }

    /// Period-4 map, `λ((1 + γ + x)/(2x))^k`.
    pub fn period_four(k: u32, lambda: f64, gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Self::new(k, lambda, 1.0 + gamma)
    }

    /// Value at infinity, `λ / 2^k`; also the infimum of the map.
    pub fn floor(&self) -> f64 {
        self.lambda * 0.5_f64.powi(self.k as i32)
    }

    /// `[λ/2^k, f(λ/2^k)]`, mapped into itself.
    pub fn invariant_bracket(&self) -> Bracket {
        // padded so the endpoint conditions survive rounding when λ is huge
        let lo = self.floor() * (1.0 - 1e-12);
        Bracket {
            lo,
            hi: self.eval(lo) * (1.0 + 1e-12),
        }
    }

    /// Closed form of `f'(x0)` at a fixed point `x0`.
    pub fn derivative_at_fixed_point(&self, x0: f64) -> f64 {
        -(self.k as f64) * self.shift / (self.shift + x0)
    }

    pub fn fixed_point(&self) -> Result<FixedPointResult> {
        solve_decreasing_fixed_point(self, self.invariant_bracket(), ROOT_TOLERANCE)
    }

    /// Second iterate `f(f(x))`.
    pub fn second_iterate(&self, x: f64) -> f64 {
        self.eval(self.eval(x))
    }

    pub fn second_iterate_derivative(&self, x: f64) -> f64 {
        self.derivative(self.eval(x)) * self.derivative(x)
    }
}

impl ScalarMap for ShiftedPowerMap {
    fn eval(&self, x: f64) -> f64 {
        // (s + x)/(2x) written as 1/2 + s/(2x) so that x = ∞ gives λ/2^k.
        self.lambda * (0.5 + self.shift / (2.0 * x)).powi(self.k as i32)
    }

    fn derivative(&self, x: f64) -> f64 {
        if x.is_infinite() {
            return -0.0;
        }
        -(self.k as f64) * self.shift * self.eval(x) / (x * (self.shift + x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub x0: f64,
    pub derivative_at_x0: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    /// `f'(x0) > -1`.
    Attracting,
    /// `f'(x0) = -1` within [`TANGENT_TOLERANCE`].
    Tangent,
    /// `f'(x0) < -1`; a 2-cycle surrounds the fixed point.
    Repelling,
}

pub fn classify_fixed_point(derivative: f64) -> FixedPointKind {
    let margin = derivative + 1.0;
    if margin.abs() < TANGENT_TOLERANCE {
        FixedPointKind::Tangent
    } else if margin < 0.0 {
        FixedPointKind::Repelling
    } else {
        FixedPointKind::Attracting
    }
}

/// Points `x1 < x0 < x2` with `f(x1) = x2` and `f(x2) = x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoCycle {
    pub x1: f64,
    pub x2: f64,
}

impl TwoCycle {
    pub fn swap_residual(&self, map: &impl ScalarMap) -> f64 {
        (map.eval(self.x1) - self.x2)
            .abs()
            .max((map.eval(self.x2) - self.x1).abs())
    }
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

struct SignBracket {
    b: Bracket,
    f_lo: f64,
}

impl SignBracket {
    fn open(f: &impl Fn(f64) -> f64, bracket: Bracket) -> Result<std::result::Result<Self, f64>> {
        let f_lo = f(bracket.lo);
        let f_hi = f(bracket.hi);
        if f_lo.is_nan() || f_hi.is_nan() {
            return Err(Error::NoSignChange {
                lo: bracket.lo,
                hi: bracket.hi,
            });
        }
        if f_lo == 0.0 {
            return Ok(Err(bracket.lo));
        }
        if f_hi == 0.0 {
            return Ok(Err(bracket.hi));
        }
        if same_sign(f_lo, f_hi) {
            return Err(Error::NoSignChange {
                lo: bracket.lo,
                hi: bracket.hi,
            });
        }
        Ok(Ok(Self { b: bracket, f_lo }))
    }

    /// Shrinks the bracket to the half containing the sign change; returns
    /// `Some(x)` on an exact zero.
    fn update(&mut self, x: f64, fx: f64) -> Option<f64> {
        if fx == 0.0 {
            return Some(x);
        }
        if same_sign(fx, self.f_lo) {
            self.b.lo = x;
            self.f_lo = fx;
        } else {
            self.b.hi = x;
        }
        None
    }
}

/// Root of `f` inside `bracket` by bisection. `f` must change sign across the
/// bracket (a zero at an endpoint is accepted).
pub fn solve_bracketed_root(f: impl Fn(f64) -> f64, bracket: Bracket, tol: f64) -> Result<f64> {
    let mut sb = match SignBracket::open(&f, bracket)? {
        Ok(sb) => sb,
        Err(root) => return Ok(root),
    };
    for _ in 0..BISECTION_CAP {
        if sb.b.is_narrow(tol) {
            break;
        }
        let mid = sb.b.split();
        if mid <= sb.b.lo || mid >= sb.b.hi {
            break;
        }
        if let Some(root) = sb.update(mid, f(mid)) {
            return Ok(root);
        }
    }
    finish(&f, sb.b, tol)
}

fn finish(f: &impl Fn(f64) -> f64, b: Bracket, tol: f64) -> Result<f64> {
    let next_lo = b.lo + b.lo.abs() * 4.0 * f64::EPSILON;
    if !(b.is_narrow(tol) || next_lo >= b.hi) {
        let mid = b.split();
        return Err(Error::NoConvergence {
            iterations: BISECTION_CAP,
            residual: f(mid).abs(),
        });
    }
    let (f_lo, f_hi) = (f(b.lo).abs(), f(b.hi).abs());
    Ok(if f_lo <= f_hi { b.lo } else { b.hi })
}

/// Safeguarded Newton iteration: Newton steps are accepted only when they
/// land strictly inside the maintained bracket, otherwise the bracket is
/// bisected.
pub fn solve_bracketed_root_newton(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    bracket: Bracket,
    tol: f64,
) -> Result<f64> {
    let mut sb = match SignBracket::open(&f, bracket)? {
        Ok(sb) => sb,
        Err(root) => return Ok(root),
    };
    let mut x = sb.b.split();
    let mut newton_steps = 0;
    for _ in 0..BISECTION_CAP + NEWTON_CAP {
        let fx = f(x);
        if let Some(root) = sb.update(x, fx) {
            return Ok(root);
        }
        if sb.b.is_narrow(tol) {
            break;
        }
        let d = df(x);
        let candidate = x - fx / d;
        let inside = candidate.is_finite() && candidate > sb.b.lo && candidate < sb.b.hi;
        if inside && newton_steps < NEWTON_CAP {
            newton_steps += 1;
            if (candidate - x).abs() <= RELATIVE_WIDTH * x.abs() {
                return Ok(candidate);
            }
            x = candidate;
        } else {
            let mid = sb.b.split();
            if mid <= sb.b.lo || mid >= sb.b.hi {
                break;
            }
            x = mid;
        }
    }
    finish(&f, sb.b, tol)
}

/// The unique fixed point of a strictly decreasing map inside `bracket`.
pub fn solve_decreasing_fixed_point(
    map: &impl ScalarMap,
    bracket: Bracket,
    tol: f64,
) -> Result<FixedPointResult> {
    let bracket = Bracket::new(bracket.lo, bracket.hi)?;
    if !(map.eval(bracket.lo) >= bracket.lo) || !(map.eval(bracket.hi) <= bracket.hi) {
        return Err(Error::BracketViolation(format!(
            "need map(lo) ≥ lo and map(hi) ≤ hi on [{}, {}]",
            bracket.lo, bracket.hi
        )));
    }
    let x0 = solve_bracketed_root_newton(
        |x| map.eval(x) - x,
        |x| map.derivative(x) - 1.0,
        bracket,
        tol,
    )?;
    let residual = (map.eval(x0) - x0).abs();
    if residual > tol * x0.abs().max(1.0) {
        return Err(Error::NoConvergence {
            iterations: BISECTION_CAP + NEWTON_CAP,
            residual,
        });
    }
    Ok(FixedPointResult {
        x0,
        derivative_at_x0: map.derivative(x0),
        residual,
    })
}

/// Offsets tried around the central fixed point: the default first, then
/// larger ones (for rounding noise near `x0`), then smaller ones (for cycles
/// hugging `x0`).
fn cycle_offsets(x0: f64) -> impl Iterator<Item = f64> {
    let up = (0..6).map(|j| CYCLE_OFFSET * 10f64.powi(j));
    let down = (1..7).map(|j| CYCLE_OFFSET * 10f64.powi(-j));
    up.chain(down).map(move |d| d * x0)
}

/// The 2-cycle of a strictly decreasing map around its repelling fixed point
/// `x0`, or `None` when `x0` is attracting or tangent.
///
/// `x1` and `x2` are located independently as the outer fixed points of
/// `f∘f` on either side of `x0`; the returned pair is `(x1, f(x1))`.
pub fn find_two_cycle(
    map: &impl ScalarMap,
    x0: f64,
    bracket: Bracket,
    tol: f64,
) -> Result<Option<TwoCycle>> {
    let bracket = Bracket::new(bracket.lo, bracket.hi)?;
    if !(bracket.lo < x0 && x0 < bracket.hi) {
        return Err(Error::BracketViolation(format!(
            "fixed point {x0} outside ({}, {})",
            bracket.lo, bracket.hi
        )));
    }
    if classify_fixed_point(map.derivative(x0)) != FixedPointKind::Repelling {
        return Ok(None);
    }
    let h = |x: f64| map.eval(map.eval(x)) - x;
    if h(bracket.lo) < 0.0 || h(bracket.hi) > 0.0 {
        return Err(Error::BracketViolation(format!(
            "second iterate does not map [{}, {}] into itself",
            bracket.lo, bracket.hi
        )));
    }

    let lower = cycle_offsets(x0)
        .map(|d| x0 - d)
        .find(|&x| x > bracket.lo && h(x) < 0.0)
        .ok_or(Error::NoSignChange {
            lo: bracket.lo,
            hi: x0,
        })?;
    let upper = cycle_offsets(x0)
        .map(|d| x0 + d)
        .find(|&x| x < bracket.hi && h(x) > 0.0)
        .ok_or(Error::NoSignChange {
            lo: x0,
            hi: bracket.hi,
        })?;

    let x1 = solve_bracketed_root(h, Bracket::new(bracket.lo, lower)?, tol)?;
    let x2_search = solve_bracketed_root(h, Bracket::new(upper, bracket.hi)?, tol)?;
    let x2 = map.eval(x1);
    if (x2 - x2_search).abs() > CYCLE_AGREEMENT * x2.abs().max(1.0) {
        return Err(Error::NoConvergence {
            iterations: BISECTION_CAP,
            residual: (x2 - x2_search).abs(),
        });
    }
    Ok(Some(TwoCycle { x1, x2 }))
}

/// Maps with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MapFamily {
    /// `a ↦ λ((a+2)/(2a))^k`, the translation-invariant period-2 map.
    TiQ2,
    /// `f(x) = λ((2+x)/(2x))^k`, the bipartite period-2 map.
    F,
    /// `g(x) = λ((1+γ+x)/(2x))^k`, the bipartite period-4 map.
    G,
}

impl MapFamily {
    pub fn build(self, params: &MapParams) -> Result<ShiftedPowerMap> {
        match self {
            MapFamily::TiQ2 | MapFamily::F => ShiftedPowerMap::period_two(params.k, params.lambda),
            MapFamily::G => {
                let gamma = params
                    .gamma
                    .ok_or_else(|| Error::InvalidParameter("family g needs gamma".into()))?;
                ShiftedPowerMap::period_four(params.k, params.lambda, gamma)
            }
        }
    }
}

impl FromStr for MapFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ti-q2" => Ok(MapFamily::TiQ2),
            "f" => Ok(MapFamily::F),
            "g" => Ok(MapFamily::G),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for MapFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapFamily::TiQ2 => "ti-q2",
            MapFamily::F => "f",
            MapFamily::G => "g",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub k: u32,
    pub lambda: f64,
    pub gamma: Option<f64>,
}

/// Analytic derivative of a family member at `x > 0`.
pub fn derivative_at(family: MapFamily, params: &MapParams, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("x must be positive, got {x}")));
    }
    Ok(family.build(params)?.derivative(x))
}
