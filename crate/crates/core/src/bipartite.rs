//! Solutions that alternate between the two levels of the tree.
//!
//! With period 2 the system reduces to `a = f(c)`, `c = f(a)` for
//! `f(x) = λ((2+x)/(2x))^k`; with period 4 and equal odd activities it is the
//! fixed-point problem of the map [`w_map`] on `(a, b, c, d)`. On the
//! invariant set `I₃` only the diagonal survives; on `I₄` the problem is
//! again a 2-cycle problem, for `g(x) = λ((1+γ+x)/(2x))^k`.
//!
//! In both 2-cycle problems `f∘f` (resp. `g∘g`) is S-shaped, so there are
//! either one or three fixed points of the second iterate, and the switch
//! happens where the central fixed point has derivative `−1`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{check_order, check_positive, Error, Result};
use crate::solution::{PairSolution, Regime, SolutionKind, SolutionSet};
use crate::solver::{
    find_two_cycle, solve_bracketed_root, Bracket, MapFamily, ScalarMap, ShiftedPowerMap,
    ROOT_TOLERANCE,
};
use crate::ti::solve_ti_q4_diagonal;
use crate::wand::{ActivityProfile, BipartitePair, PeriodicBoundaryLaw, ReducedSystem, SystemKind};

/// `2^{k+1}(k−1)^{k+1}/k^k`.
pub fn lambda_cr2(k: u32) -> f64 {
    let kf = k as f64;
    2f64.powi(k as i32 + 1) * (kf - 1.0).powi(k as i32 + 1) / kf.powi(k as i32)
}

/// `2^k(γ+1)(k−1)^{k+1}/k^k`.
pub fn lambda_cr3(k: u32, gamma: f64) -> f64 {
    let kf = k as f64;
    2f64.powi(k as i32) * (gamma + 1.0) * (kf - 1.0).powi(k as i32 + 1) / kf.powi(k as i32)
}

pub fn lambda_cr2_exact(k: u32) -> BigRational {
    let two = BigInt::from(2u32);
    let km1 = BigInt::from(k - 1);
    let num = Pow::pow(&two, k + 1) * Pow::pow(&km1, k + 1);
    BigRational::new(num, Pow::pow(&BigInt::from(k), k))
}

pub fn lambda_cr3_exact(k: u32, gamma: &BigRational) -> BigRational {
    let two = BigInt::from(2u32);
    let km1 = BigInt::from(k - 1);
    let num = BigRational::from_integer(Pow::pow(&two, k) * Pow::pow(&km1, k + 1));
    num * (gamma + BigRational::one()) / BigRational::from_integer(Pow::pow(&BigInt::from(k), k))
}

fn two_cycle_set(
    map: &ShiftedPowerMap,
    critical: f64,
    residual: impl Fn(f64, f64) -> Result<f64>,
) -> Result<SolutionSet> {
    let x0 = map.fixed_point()?.x0;
    let mut solutions = vec![PairSolution {
        first: x0,
        second: x0,
        kind: SolutionKind::Diagonal,
        residual: residual(x0, x0)?,
    }];
    let regime = match find_two_cycle(map, x0, map.invariant_bracket(), ROOT_TOLERANCE)? {
        Some(cycle) => {
            solutions.push(PairSolution {
                first: cycle.x1,
                second: cycle.x2,
                kind: SolutionKind::OffDiagonal,
                residual: residual(cycle.x1, cycle.x2)?,
            });
            solutions.push(PairSolution {
                first: cycle.x2,
                second: cycle.x1,
                kind: SolutionKind::Swapped,
                residual: residual(cycle.x2, cycle.x1)?,
            });
            Regime::Triple
        }
        None => Regime::Unique,
    };
    Ok(SolutionSet {
        regime,
        critical: Some(critical),
        solutions,
    })
}

/// Period-2 bipartite solutions `(z_1, z̃_1)`: the diagonal, plus the 2-cycle
/// `(a₁, a₂)` and its swap when `λ < λ_cr^(2)`.
pub fn solve_bip_q2(k: u32, lambda: f64) -> Result<SolutionSet> {
    let map = ShiftedPowerMap::period_two(k, lambda)?;
    let system = ReducedSystem::build(k, 2, ActivityProfile::q2(lambda)?, SystemKind::Bipartite)?;
    two_cycle_set(&map, lambda_cr2(k), |a, c| system.max_residual(&[a, c]))
}

/// Period-4 bipartite solutions on `I₄` as pairs `(a, c)`, meaning
/// `z = (1, a, γ, a)` and `z̃ = (1, c, γ, c)`.
pub fn solve_bip_q4_i4(k: u32, lambda: f64, gamma: f64) -> Result<SolutionSet> {
    let map = ShiftedPowerMap::period_four(k, lambda, gamma)?;
    let system = bip_q4_system(k, lambda, gamma)?;
    two_cycle_set(&map, lambda_cr3(k, gamma), |a, c| {
        system.max_residual(&[a, gamma, a, c, gamma, c])
    })
}

fn bip_q4_system(k: u32, lambda: f64, gamma: f64) -> Result<ReducedSystem> {
    ReducedSystem::build(
        k,
        4,
        ActivityProfile::q4(lambda, gamma)?,
        SystemKind::Bipartite,
    )
}

/// The map `W(a, b, c, d)` whose fixed points are the period-4 bipartite
/// solutions with equal odd activities.
pub fn w_map(k: u32, lambda: f64, gamma: f64, x: [f64; 4]) -> [f64; 4] {
    let [a, b, c, d] = x;
    let s = 1.0 + gamma;
    let p = |num: f64, den: f64| lambda * (num / den).powi(k as i32);
    [
        p(s + c, c + d),
        p(s + d, c + d),
        p(s + a, a + b),
        p(s + b, a + b),
    ]
}

pub fn w_residual(k: u32, lambda: f64, gamma: f64, x: [f64; 4]) -> [f64; 4] {
    let w = w_map(k, lambda, gamma, x);
    [x[0] - w[0], x[1] - w[1], x[2] - w[2], x[3] - w[3]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InvariantSet {
    /// `a = b = c = d`
    I1,
    /// `a = c, b = d`
    I2,
    /// `a = d, b = c`
    I3,
    /// `a = b, c = d`
    I4,
}

impl InvariantSet {
    pub const ALL: [InvariantSet; 4] = [
        InvariantSet::I1,
        InvariantSet::I2,
        InvariantSet::I3,
        InvariantSet::I4,
    ];

    pub fn contains(self, x: [f64; 4], tol: f64) -> bool {
        let eq = |p: f64, q: f64| (p - q).abs() <= tol * p.abs().max(q.abs()).max(1.0);
        let [a, b, c, d] = x;
        match self {
            InvariantSet::I1 => eq(a, b) && eq(b, c) && eq(c, d),
            InvariantSet::I2 => eq(a, c) && eq(b, d),
            InvariantSet::I3 => eq(a, d) && eq(b, c),
            InvariantSet::I4 => eq(a, b) && eq(c, d),
        }
    }

    /// A point of the set built from the first coordinates of `x`.
    pub fn project(self, x: [f64; 4]) -> [f64; 4] {
        let [a, b, c, _] = x;
        match self {
            InvariantSet::I1 => [a, a, a, a],
            InvariantSet::I2 => [a, b, a, b],
            InvariantSet::I3 => [a, b, b, a],
            InvariantSet::I4 => [a, a, c, c],
        }
    }

    pub fn membership(x: [f64; 4], tol: f64) -> Vec<InvariantSet> {
        Self::ALL
            .into_iter()
            .filter(|s| s.contains(x, tol))
            .collect()
    }
}

/// Tolerance used to decide invariant-set membership of computed solutions.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteSolution {
    /// `(a, b, c, d)`: `z = (1, a, γ, b)` and `z̃ = (1, c, γ, d)`.
    pub values: [f64; 4],
    pub gamma: f64,
    pub sets: Vec<InvariantSet>,
    pub regime: Regime,
    pub kind: SolutionKind,
    pub residual: f64,
}

impl BipartiteSolution {
    fn new(
        k: u32,
        lambda: f64,
        gamma: f64,
        values: [f64; 4],
        regime: Regime,
        kind: SolutionKind,
    ) -> Result<Self> {
        let [a, b, c, d] = values;
        let residual = bip_q4_system(k, lambda, gamma)?.max_residual(&[a, gamma, b, c, gamma, d])?;
        Ok(Self {
            values,
            gamma,
            sets: InvariantSet::membership(values, MEMBERSHIP_TOLERANCE),
            regime,
            kind,
            residual,
        })
    }

    pub fn pair(&self) -> Result<BipartitePair> {
        let [a, b, c, d] = self.values;
        BipartitePair::new(
            PeriodicBoundaryLaw::q4(a, self.gamma, b)?,
            PeriodicBoundaryLaw::q4(c, self.gamma, d)?,
        )
    }

    /// `a = b ⇔ c = d`, `a = c ⇒ b = d` and `b = d ⇒ a = c`.
    pub fn structure_consistent(&self, tol: f64) -> bool {
        let eq = |p: f64, q: f64| (p - q).abs() <= tol * p.abs().max(q.abs()).max(1.0);
        let [a, b, c, d] = self.values;
        (eq(a, b) == eq(c, d)) && (!eq(a, c) || eq(b, d)) && (!eq(b, d) || eq(a, c))
    }
}

/// The unique solution on `I₃`. Subtracting the two reduced equations leaves
/// `(a − b)·(positive) = 0`, so `a = b` and the solution is the diagonal
/// fixed point of `x ↦ λ((1+γ+x)/(2x))^k`.
pub fn solve_bip_q4_i3(k: u32, lambda: f64, gamma: f64) -> Result<BipartiteSolution> {
    check_order(k)?;
    check_positive("lambda", lambda)?;
    check_positive("gamma", gamma)?;
    let a = solve_ti_q4_diagonal(k, lambda, gamma)?;
    BipartiteSolution::new(
        k,
        lambda,
        gamma,
        [a, a, a, a],
        Regime::Unique,
        SolutionKind::Diagonal,
    )
}

/// Every solution on `I₃ ∪ I₄`: the shared diagonal plus, when
/// `λ < λ_cr^(3)`, the two level-swapped solutions `(a₁,a₁,a₂,a₂)` and
/// `(a₂,a₂,a₁,a₁)`.
pub fn enumerate_bip_q4(k: u32, lambda: f64, gamma: f64) -> Result<Vec<BipartiteSolution>> {
    let diagonal = solve_bip_q4_i3(k, lambda, gamma)?;
    let on_i4 = solve_bip_q4_i4(k, lambda, gamma)?;
    let regime = on_i4.regime;
    let mut out = vec![BipartiteSolution {
        regime,
        ..diagonal
    }];
    for s in on_i4
        .solutions
        .iter()
        .filter(|s| s.kind != SolutionKind::Diagonal)
    {
        out.push(BipartiteSolution::new(
            k,
            lambda,
            gamma,
            [s.first, s.first, s.second, s.second],
            regime,
            s.kind,
        )?);
    }
    if let Some(bad) = out
        .iter()
        .find(|s| !s.structure_consistent(MEMBERSHIP_TOLERANCE))
    {
        return Err(Error::InvalidLaw(format!(
            "solution {:?} breaks the a=b ⇔ c=d structure",
            bad.values
        )));
    }
    Ok(out)
}

/// Fixed points of `W` reached by damped iteration from random starts.
///
/// This is an exploration aid for the general period-4 system outside the
/// invariant sets. It only finds fixed points that the damped iteration is
/// attracted to and makes no completeness claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub starts: usize,
    pub converged: usize,
    pub fixed_points: Vec<[f64; 4]>,
}

pub fn explore_q4(
    k: u32,
    lambda: f64,
    gamma: f64,
    starts: usize,
    seed: u64,
) -> Result<Exploration> {
    let map = ShiftedPowerMap::period_four(k, lambda, gamma)?;
    let range = map.invariant_bracket();
    let (ln_lo, ln_hi) = (range.lo.ln(), range.hi.ln());
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut fixed_points: Vec<[f64; 4]> = Vec::new();
    let mut converged = 0;
    for _ in 0..starts {
        let mut x = [0.0; 4];
        for v in x.iter_mut() {
            *v = rng.gen_range(ln_lo..ln_hi).exp();
        }
        for _ in 0..5000 {
            let w = w_map(k, lambda, gamma, x);
            // geometric averaging turns multipliers μ into (1+μ)/2 in log space
            for i in 0..4 {
                x[i] = (x[i] * w[i]).sqrt();
            }
            let r = w_residual(k, lambda, gamma, x);
            if r.iter().all(|v| v.abs() < 1e-12) {
                break;
            }
        }
        let r = w_residual(k, lambda, gamma, x);
        if r.iter().all(|v| v.abs() < 1e-10) {
            converged += 1;
            let known = fixed_points
                .iter()
                .any(|p| p.iter().zip(&x).all(|(u, v)| (u - v).abs() < 1e-7 * u.max(1.0)));
            if !known {
                fixed_points.push(x);
            }
        }
    }
    Ok(Exploration {
        starts,
        converged,
        fixed_points,
    })
}

/// Numerical evidence that `h = φ∘φ` is S-shaped for `φ ∈ {f, g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SShapeCertificate {
    pub family: MapFamily,
    pub k: u32,
    pub lambda: f64,
    pub gamma: Option<f64>,
    /// `h(0⁺) = λ/2^k` and its numerical value.
    pub h_zero: f64,
    pub h_zero_numeric: f64,
    /// `lim h(x)` as `x → ∞` in closed form and numerically.
    pub h_infinity: f64,
    pub h_infinity_numeric: f64,
    /// `h' > 0` at every grid point.
    pub increasing: bool,
    /// The auxiliary function carrying the sign of `h''` decreases on the grid.
    pub auxiliary_decreasing: bool,
    pub sign_changes: usize,
    pub inflection: f64,
    /// `(x, aux(x))` at the two anchor points where the sign is known.
    pub anchor_lo: (f64, f64),
    pub anchor_hi: (f64, f64),
    /// `h'` rises up to the inflection and falls after it on the grid.
    pub derivative_unimodal: bool,
}

impl SShapeCertificate {
    pub fn is_valid(&self) -> bool {
        let rel = |p: f64, q: f64| (p - q).abs() <= 1e-12 * q.abs();
        self.h_zero > 0.0
            && self.h_infinity.is_finite()
            && rel(self.h_zero_numeric, self.h_zero)
            && rel(self.h_infinity_numeric, self.h_infinity)
            && self.increasing
            && self.auxiliary_decreasing
            && self.sign_changes == 1
            && self.anchor_lo.1 > 0.0
            && self.anchor_hi.1 < 0.0
            && self.anchor_lo.0 < self.inflection
            && self.inflection < self.anchor_hi.0
            && self.derivative_unimodal
    }
}

/// Builds the S-shape certificate of `f∘f` (`family = F`) or `g∘g`
/// (`family = G`, needs `gamma`) on a log grid of `grid_points` points.
pub fn s_shape_certificate(
    family: MapFamily,
    k: u32,
    lambda: f64,
    gamma: Option<f64>,
    grid_points: usize,
) -> Result<SShapeCertificate> {
    let map = match family {
        MapFamily::F => ShiftedPowerMap::period_two(k, lambda)?,
        MapFamily::G => {
            let gamma =
                gamma.ok_or_else(|| Error::InvalidParameter("g∘g needs gamma".into()))?;
            ShiftedPowerMap::period_four(k, lambda, gamma)?
        }
        MapFamily::TiQ2 => {
            return Err(Error::UnknownFamily(
                "ti-q2 has no composite certificate".into(),
            ))
        }
    };
    let kf = k as f64;
    let s = map.shift;
    // sign of h'' on x > 0
    let aux = |x: f64| -> f64 {
        match family {
            MapFamily::F => 0.5 * map.eval(x) * (kf - x - 1.0) + kf * kf - x - 1.0,
            _ => map.eval(x) * ((kf - 1.0) * s - 2.0 * x) + ((kf * kf - 1.0) * s - 2.0 * x) * s,
        }
    };
    let (lo_anchor, hi_anchor) = match family {
        MapFamily::F => (1.0, kf * kf),
        _ => (0.5, (kf * kf - 1.0) * s / 2.0),
    };

    let h_zero = lambda * 0.5f64.powi(k as i32);
    let two_k = 2f64.powi(k as i32);
    let h_infinity = lambda * ((two_k * s + lambda) / (2.0 * lambda)).powi(k as i32);

    if grid_points < 3 {
        return Err(Error::GridTooCoarse(format!(
            "{grid_points} grid points cannot bracket an inflection"
        )));
    }
    let (x_min, x_max) = (lo_anchor * 1e-3, hi_anchor * 1e3);
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| x_min * (x_max / x_min).powf(i as f64 / (grid_points - 1) as f64))
        .collect();
    let aux_values: Vec<f64> = grid.iter().map(|&x| aux(x)).collect();
    let increasing = grid.iter().all(|&x| map.second_iterate_derivative(x) > 0.0);
    let auxiliary_decreasing = aux_values.windows(2).all(|w| w[1] < w[0]);
    let crossings: Vec<usize> = aux_values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] > 0.0) != (w[1] > 0.0))
        .map(|(i, _)| i)
        .collect();
    let Some(&i) = crossings.first() else {
        return Err(Error::GridTooCoarse(
            "no sign change of the inflection indicator on the grid".into(),
        ));
    };
    let inflection = solve_bracketed_root(aux, Bracket::new(grid[i], grid[i + 1])?, ROOT_TOLERANCE)?;

    let slope: Vec<(f64, f64)> = grid
        .iter()
        .map(|&x| (x, map.second_iterate_derivative(x)))
        .collect();
    let derivative_unimodal = slope.windows(2).all(|w| {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        let slack = 1e-9 * d0.abs().max(d1.abs());
        if x1 <= inflection {
            d1 >= d0 - slack
        } else if x0 >= inflection {
            d1 <= d0 + slack
        } else {
            true
        }
    });

    Ok(SShapeCertificate {
        family,
        k,
        lambda,
        gamma: if family == MapFamily::G { gamma } else { None },
        h_zero,
        h_zero_numeric: map.second_iterate(f64::MIN_POSITIVE),
        h_infinity,
        h_infinity_numeric: map.second_iterate(f64::MAX),
        increasing,
        auxiliary_decreasing,
        sign_changes: crossings.len(),
        inflection,
        anchor_lo: (lo_anchor, aux(lo_anchor)),
        anchor_hi: (hi_anchor, aux(hi_anchor)),
        derivative_unimodal,
    })
}

/// `φ'(x0) + 1` at the central fixed point; negative exactly when the
/// 2-cycle exists.
pub fn criticality_margin(map: &ShiftedPowerMap) -> Result<f64> {
    let x0 = map.fixed_point()?.x0;
    Ok(map.derivative(x0) + 1.0)
}
