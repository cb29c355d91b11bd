//! The wand compatibility graph on ℤ and the periodic fixed-point systems
//! built on top of it.
//!
//! Odd spins are compatible with themselves and with their two even
//! neighbours; even spins are compatible with their two odd neighbours only.
//! A boundary law `z` at a vertex is updated from its `k` successors by
//!
//! ```text
//! z_s = λ_s · Π_y ( Σ_{n ~ s} z_{n,y} ) / ( z_{-1,y} + z_{1,y} )
//! ```
//!
//! For translation-invariant laws every successor carries the same vector and
//! the product collapses to a `k`-th power. All vectors here are normalised
//! with `z_0 = 1` and `λ_0 = 1`; the `z_0` coordinate is never an unknown.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_order, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

/// A spin value of the model, i.e. a vertex of the wand graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Spin(pub i64);

impl Spin {
    pub fn parity(self) -> Parity {
        if self.0.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn neighbors(self) -> Vec<i64> {
        neighbors(self.0)
    }

    /// Residue class of the spin for a `q`-periodic vector.
    pub fn residue(self, q: usize) -> usize {
        fold(self.0, q)
    }
}

/// Spins compatible with `spin`, in increasing order.
pub fn neighbors(spin: i64) -> Vec<i64> {
    match Spin(spin).parity() {
        Parity::Odd => vec![spin - 1, spin, spin + 1],
        Parity::Even => vec![spin - 1, spin + 1],
    }
}

/// Mathematical (always non-negative) reduction of a spin modulo `q`.
pub fn fold(spin: i64, q: usize) -> usize {
    spin.rem_euclid(q as i64) as usize
}

fn check_entries(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::NonPositive { index, value });
        }
    }
    Ok(())
}

/// Periodic activities `λ_0, …, λ_{q-1}` with `λ_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    values: Vec<f64>,
}

impl ActivityProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPeriod(0));
        }
        check_entries(&values)?;
        if values[0] != 1.0 {
            return Err(Error::InvalidActivities(format!(
                "λ_0 must equal 1, got {}",
                values[0]
            )));
        }
        Ok(Self { values })
    }

    /// Period-2 profile `(1, λ)`.
    pub fn q2(lambda: f64) -> Result<Self> {
        Self::new(vec![1.0, lambda])
    }

    /// Period-4 profile `(1, λ, λ₂, λ)` with equal odd activities.
    pub fn q4(lambda: f64, lambda2: f64) -> Result<Self> {
        Self::new(vec![1.0, lambda, lambda2, lambda])
    }

    /// Period-4 profile `(1, λ₁, λ₂, λ₃)`.
    pub fn q4_general(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        Self::new(vec![1.0, lambda1, lambda2, lambda3])
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, spin: i64) -> f64 {
        self.values[fold(spin, self.period())]
    }

    /// True when the profile is `(1, λ, γ, λ)`, the case the q = 4 analysis covers.
    pub fn has_equal_odd_activities(&self) -> bool {
        self.period() == 4 && self.values[1] == self.values[3]
    }
}

/// A `q`-periodic boundary law `z_0, …, z_{q-1}` with `z_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicBoundaryLaw {
    values: Vec<f64>,
}

impl PeriodicBoundaryLaw {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidPeriod(0));
        }
        check_entries(&values)?;
        if values[0] != 1.0 {
            return Err(Error::InvalidLaw(format!(
                "z_0 must equal 1, got {}",
                values[0]
            )));
        }
        Ok(Self { values })
    }

    /// `(1, a)`.
    pub fn q2(a: f64) -> Result<Self> {
        Self::new(vec![1.0, a])
    }

    /// `(1, a, λ₂, c)`.
    pub fn q4(a: f64, lambda2: f64, c: f64) -> Result<Self> {
        Self::new(vec![1.0, a, lambda2, c])
    }

    /// Rebuilds a law from its unknown coordinates `z_1, …, z_{q-1}`.
    pub fn from_unknowns(unknowns: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(unknowns.len() + 1);
        values.push(1.0);
        values.extend_from_slice(unknowns);
        Self::new(values)
    }

    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unknowns(&self) -> &[f64] {
        &self.values[1..]
    }

    pub fn at(&self, spin: i64) -> f64 {
        self.values[fold(spin, self.period())]
    }

    /// Positive periodic entries never sum to a finite value, so the measure
    /// built from any such law cannot be normalised.
    pub fn is_normalisable(&self) -> bool {
        false
    }

    /// Sum of `z_i` over `|i| ≤ n`; grows linearly in `n`.
    pub fn partial_sum(&self, n: u64) -> f64 {
        let n = n as i64;
        (-n..=n).map(|s| self.at(s)).sum()
    }
}

impl fmt::Display for PeriodicBoundaryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Laws on the two levels of the tree's bipartition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartitePair {
    pub even: PeriodicBoundaryLaw,
    pub odd: PeriodicBoundaryLaw,
}

impl BipartitePair {
    pub fn new(even: PeriodicBoundaryLaw, odd: PeriodicBoundaryLaw) -> Result<Self> {
        if even.period() != odd.period() {
            return Err(Error::InvalidLaw(format!(
                "level laws have periods {} and {}",
                even.period(),
                odd.period()
            )));
        }
        Ok(Self { even, odd })
    }

    pub fn period(&self) -> usize {
        self.even.period()
    }

    pub fn swapped(&self) -> Self {
        Self {
            even: self.odd.clone(),
            odd: self.even.clone(),
        }
    }

    pub fn unknowns(&self) -> Vec<f64> {
        let mut out = self.even.unknowns().to_vec();
        out.extend_from_slice(self.odd.unknowns());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemKind {
    /// One law shared by every vertex.
    TranslationInvariant,
    /// Alternating laws on even and odd tree levels.
    Bipartite,
}

/// `Σ_{n ~ spin} z_n / (z_{-1} + z_1)` for an arbitrary (not necessarily
/// periodic) law given as a function of the spin.
pub fn neighbor_ratio(z: impl Fn(i64) -> f64, spin: i64) -> f64 {
    let numerator: f64 = neighbors(spin).into_iter().map(&z).sum();
    numerator / (z(-1) + z(1))
}

/// Right-hand side of the translation-invariant update at `spin`.
pub fn ti_update(k: u32, activity: f64, z: impl Fn(i64) -> f64, spin: i64) -> f64 {
    activity * neighbor_ratio(z, spin).powi(k as i32)
}

/// The periodic fixed-point system, reduced to its unknown coordinates.
///
/// Unknown layout: `z_1..z_{q-1}` for the translation-invariant system, and
/// `z_1..z_{q-1}` followed by `z̃_1..z̃_{q-1}` for the bipartite one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    kind: SystemKind,
    k: u32,
    activities: ActivityProfile,
}

impl ReducedSystem {
    pub fn build(k: u32, q: usize, activities: ActivityProfile, kind: SystemKind) -> Result<Self> {
        check_order(k)?;
        if q == 0 {
            return Err(Error::InvalidPeriod(q));
        }
        if activities.period() != q {
            return Err(Error::InvalidActivities(format!(
                "profile has period {}, system period is {q}",
                activities.period()
            )));
        }
        if q % 2 == 1 {
            let cert = odd_period_witness(k, q, &activities)?;
            return Err(Error::NoOddPeriod(Box::new(cert)));
        }
        Ok(Self {
            kind,
            k,
            activities,
        })
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn order(&self) -> u32 {
        self.k
    }

    pub fn period(&self) -> usize {
        self.activities.period()
    }

    pub fn activities(&self) -> &ActivityProfile {
        &self.activities
    }

    pub fn unknown_count(&self) -> usize {
        match self.kind {
            SystemKind::TranslationInvariant => self.period() - 1,
            SystemKind::Bipartite => 2 * (self.period() - 1),
        }
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.unknown_count() {
            return Err(Error::DimensionMismatch {
                expected: self.unknown_count(),
                got: z.len(),
            });
        }
        check_entries(z)
    }

    fn full_vector(unknowns: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(unknowns.len() + 1);
        v.push(1.0);
        v.extend_from_slice(unknowns);
        v
    }

    fn update_from(&self, source: &[f64], spin: i64) -> f64 {
        let q = source.len();
        ti_update(self.k, self.activities.at(spin), |s| source[fold(s, q)], spin)
    }

    /// Right-hand side of the system evaluated at the unknowns `z`.
    pub fn image(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        let q = self.period();
        Ok(match self.kind {
            SystemKind::TranslationInvariant => {
                let v = Self::full_vector(z);
                (1..q as i64).map(|s| self.update_from(&v, s)).collect()
            }
            SystemKind::Bipartite => {
                let (even, odd) = z.split_at(q - 1);
                let even = Self::full_vector(even);
                let odd = Self::full_vector(odd);
                let mut out: Vec<f64> = (1..q as i64).map(|s| self.update_from(&odd, s)).collect();
                out.extend((1..q as i64).map(|s| self.update_from(&even, s)));
                out
            }
        })
    }

    /// Componentwise `z_i − RHS_i`; all zero exactly at solutions.
    pub fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let image = self.image(z)?;
        Ok(z.iter().zip(image).map(|(x, y)| x - y).collect())
    }

    pub fn max_residual(&self, z: &[f64]) -> Result<f64> {
        Ok(self
            .residual(z)?
            .into_iter()
            .fold(0.0_f64, |m, r| m.max(r.abs())))
    }
}

/// Activities that make `law` a translation-invariant fixed point. Since the
/// update is `λ_s` times a quantity determined by `z` alone, these are unique.
pub fn implied_activities(k: u32, law: &PeriodicBoundaryLaw) -> Result<ActivityProfile> {
    check_order(k)?;
    let values = law.values();
    let q = values.len();
    let lambdas = (0..q as i64)
        .map(|s| {
            if s == 0 {
                1.0
            } else {
                values[s as usize] / neighbor_ratio(|n| values[fold(n, q)], s).powi(k as i32)
            }
        })
        .collect();
    ActivityProfile::new(lambdas)
}

/// One instance of the linear identity that rules out odd periods: the odd
/// equation at `2i+1` and the even equation at `2i+1+q` share activity and
/// denominator, so their neighbour sums agree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearIdentity {
    pub shift: i64,
    /// `2i, 2i+1, 2i+2`.
    pub lhs: Vec<i64>,
    /// `2i+q, 2i+q+2`.
    pub rhs: Vec<i64>,
    /// Even spin whose equation is paired with the odd spin `2i+1`.
    pub paired_even_spin: i64,
    pub forced_zero: i64,
}

impl LinearIdentity {
    fn new(shift: i64, q: usize) -> Self {
        let q = q as i64;
        let base = 2 * shift;
        Self {
            shift,
            lhs: vec![base, base + 1, base + 2],
            rhs: vec![base + q, base + q + 2],
            paired_even_spin: base + 1 + q,
            forced_zero: base + 1,
        }
    }

    /// Folds both sides modulo `q`, cancels equal coordinates and returns the
    /// residue classes left over on the left-hand side.
    pub fn leftover(&self, q: usize) -> Vec<usize> {
        let mut left: Vec<usize> = self.lhs.iter().map(|&s| fold(s, q)).collect();
        for r in self.rhs.iter().map(|&s| fold(s, q)) {
            if let Some(pos) = left.iter().position(|&l| l == r) {
                left.swap_remove(pos);
            }
        }
        left
    }

    pub fn holds(&self, q: usize) -> bool {
        q % 2 == 1
            && self.paired_even_spin.rem_euclid(2) == 0
            && self.leftover(q) == vec![fold(self.forced_zero, q)]
    }
}

/// Certificate that a `q`-periodic strictly positive solution cannot exist
/// when `q` is odd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddPeriodCertificate {
    pub period: usize,
    pub order: u32,
    pub identities: Vec<LinearIdentity>,
}

impl OddPeriodCertificate {
    pub fn is_valid(&self) -> bool {
        !self.identities.is_empty() && self.identities.iter().all(|id| id.holds(self.period))
    }

    /// Residue classes forced to zero; for odd `q` this is every class.
    pub fn forced_zero_residues(&self) -> BTreeSet<usize> {
        self.identities
            .iter()
            .map(|id| fold(id.forced_zero, self.period))
            .collect()
    }

    pub fn forces_zero(&self, spin: i64) -> bool {
        self.forced_zero_residues().contains(&fold(spin, self.period))
    }
}

impl fmt::Display for OddPeriodCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.period as i64;
        write!(
            f,
            "z_{{2i}} + z_{{2i+1}} + z_{{2i+2}} = z_{{2i+{q}}} + z_{{2i+{}}} with z_{{i+{q}}} = z_i forces z_{{2i+1}} = 0",
            q + 2
        )
    }
}

/// Builds the odd-period infeasibility certificate for `q` odd.
pub fn odd_period_witness(
    k: u32,
    q: usize,
    activities: &ActivityProfile,
) -> Result<OddPeriodCertificate> {
    check_order(k)?;
    if q == 0 {
        return Err(Error::InvalidPeriod(q));
    }
    if q % 2 == 0 {
        return Err(Error::EvenPeriod(q));
    }
    if activities.period() != q {
        return Err(Error::InvalidActivities(format!(
            "profile has period {}, witness period is {q}",
            activities.period()
        )));
    }
    let identities = (0..q as i64).map(|i| LinearIdentity::new(i, q)).collect();
    Ok(OddPeriodCertificate {
        period: q,
        order: k,
        identities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_sets() {
        assert_eq!(neighbors(1), vec![0, 1, 2]);
        assert_eq!(neighbors(0), vec![-1, 1]);
        assert_eq!(neighbors(-2), vec![-3, -1]);
        assert_eq!(neighbors(-1), vec![-2, -1, 0]);
        assert_eq!(Spin(-3).parity(), Parity::Odd);
    }

    #[test]
    fn fold_handles_negative_spins() {
        assert_eq!(fold(-1, 4), 3);
        assert_eq!(fold(-4, 4), 0);
        assert_eq!(fold(7, 2), 1);
        assert_eq!(Spin(-5).residue(4), 3);
    }

    #[test]
    fn profile_validation() {
        assert!(ActivityProfile::new(vec![2.0, 1.0]).is_err());
        assert!(ActivityProfile::new(vec![1.0, 0.0]).is_err());
        assert!(ActivityProfile::new(vec![]).is_err());
        assert!(ActivityProfile::q4(2.0, 1.0).unwrap().has_equal_odd_activities());
        assert!(!ActivityProfile::q4_general(2.0, 1.0, 3.0)
            .unwrap()
            .has_equal_odd_activities());
    }

    #[test]
    fn law_validation_and_divergence() {
        assert!(PeriodicBoundaryLaw::new(vec![1.0, -2.0]).is_err());
        assert!(PeriodicBoundaryLaw::new(vec![0.5, 2.0]).is_err());
        let law = PeriodicBoundaryLaw::q4(2.0, 1.0, 3.0).unwrap();
        assert_eq!(law.at(-1), 3.0);
        assert!(!law.is_normalisable());
        assert!(law.partial_sum(400) > 2.0 * law.partial_sum(100));
    }

    #[test]
    fn q2_residual_examples() {
        let sys =
            ReducedSystem::build(2, 2, ActivityProfile::q2(2.0).unwrap(), SystemKind::TranslationInvariant)
                .unwrap();
        assert_eq!(sys.unknown_count(), 1);
        assert_eq!(sys.residual(&[2.0]).unwrap(), vec![0.0]);
        let r = sys.residual(&[1.0]).unwrap();
        assert!((r[0] - (1.0 - 2.0 * 1.5_f64.powi(2))).abs() < 1e-15);
        assert!((r[0] + 3.5).abs() < 1e-15);
    }

    #[test]
    fn residual_rejects_bad_input() {
        let sys =
            ReducedSystem::build(2, 2, ActivityProfile::q2(2.0).unwrap(), SystemKind::Bipartite).unwrap();
        assert_eq!(sys.unknown_count(), 2);
        assert!(matches!(
            sys.residual(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(
            sys.residual(&[1.0, 0.0]),
            Err(Error::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn q4_system_matches_two_unknown_form() {
        // a = λ((1+λ₂+a)/(a+c))^k, c = λ((1+λ₂+c)/(a+c))^k, with z_2 = λ₂.
        let (k, lambda, lambda2) = (2, 3.0, 1.5);
        let sys = ReducedSystem::build(
            k,
            4,
            ActivityProfile::q4(lambda, lambda2).unwrap(),
            SystemKind::TranslationInvariant,
        )
        .unwrap();
        let (a, c) = (1.7, 0.6);
        let r = sys.residual(&[a, lambda2, c]).unwrap();
        let ra = a - lambda * ((1.0 + lambda2 + a) / (a + c)).powi(2);
        let rc = c - lambda * ((1.0 + lambda2 + c) / (a + c)).powi(2);
        assert!((r[0] - ra).abs() < 1e-14);
        assert!(r[1].abs() < 1e-15);
        assert!((r[2] - rc).abs() < 1e-14);
    }

    #[test]
    fn bipartite_q4_matches_four_equation_form() {
        let (k, lambda, gamma) = (3, 0.8, 0.4);
        let sys = ReducedSystem::build(
            k,
            4,
            ActivityProfile::q4(lambda, gamma).unwrap(),
            SystemKind::Bipartite,
        )
        .unwrap();
        let (a, b, c, d) = (1.1, 0.7, 2.3, 0.9);
        let r = sys.residual(&[a, gamma, b, c, gamma, d]).unwrap();
        let s = 1.0 + gamma;
        let p = |x: f64| x.powi(3);
        assert!((r[0] - (a - lambda * p((s + c) / (c + d)))).abs() < 1e-13);
        assert!((r[2] - (b - lambda * p((s + d) / (c + d)))).abs() < 1e-13);
        assert!((r[3] - (c - lambda * p((s + a) / (a + b)))).abs() < 1e-13);
        assert!((r[5] - (d - lambda * p((s + b) / (a + b)))).abs() < 1e-13);
        assert!(r[1].abs() < 1e-15 && r[4].abs() < 1e-15);
    }

    #[test]
    fn odd_periods_are_rejected_with_certificate() {
        let err = ReducedSystem::build(
            2,
            3,
            ActivityProfile::new(vec![1.0, 2.0, 3.0]).unwrap(),
            SystemKind::TranslationInvariant,
        )
        .unwrap_err();
        match err {
            Error::NoOddPeriod(cert) => {
                assert!(cert.is_valid());
                assert!(cert.forces_zero(1));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_message_mentions_odd_period());
    }

    fn err_message_mentions_odd_period() -> bool {
        let err = ReducedSystem::build(
            2,
            1,
            ActivityProfile::new(vec![1.0]).unwrap(),
            SystemKind::TranslationInvariant,
        )
        .unwrap_err();
        err.to_string().starts_with("no-odd-period")
    }

    #[test]
    fn witness_examples() {
        let one = odd_period_witness(2, 1, &ActivityProfile::new(vec![1.0]).unwrap()).unwrap();
        assert!(one.is_valid());
        assert_eq!(one.identities[0].forced_zero, 1);
        let three =
            odd_period_witness(3, 3, &ActivityProfile::new(vec![1.0, 0.5, 2.0]).unwrap()).unwrap();
        assert!(three.is_valid());
        assert_eq!(three.forced_zero_residues().len(), 3);
        let five = odd_period_witness(2, 5, &ActivityProfile::new(vec![1.0; 5]).unwrap()).unwrap();
        assert!(five.identities.iter().all(|id| id.forced_zero == 2 * id.shift + 1));
        assert!(five.is_valid());
        assert_eq!(
            odd_period_witness(2, 4, &ActivityProfile::q4(1.0, 1.0).unwrap()),
            Err(Error::EvenPeriod(4))
        );
    }

    #[test]
    fn identity_fails_for_even_period() {
        let id = LinearIdentity::new(0, 4);
        // 2i+1+q is odd when q is even, so no even equation is paired with it.
        assert!(!id.holds(4));
        assert_eq!(id.paired_even_spin, 5);
    }
}
