//! Direct iteration of the boundary-law recursion on a finite tree.
//!
//! Laws live on the truncated spin range `−M..=M`. Each level is computed
//! from the `k` laws one level below it, leaves first. Neighbours beyond `±M`
//! are treated as missing, so the error from the cut enters at the edge and
//! moves inward by one spin per level. Spins with `|i| ≤ M − 2 − ℓ` at level
//! `ℓ` never see it, and that window is where the metric is taken.
//!
//! The tree is homogeneous: all vertices of a level carry the same law, so a
//! level is a single [`TruncatedLaw`].

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_order, check_positive, Error, Result};
use crate::wand::{
    neighbors, ActivityProfile, BipartitePair, PeriodicBoundaryLaw, ReducedSystem, SystemKind,
};

pub const DEFAULT_TRUNCATION: usize = 50;
pub const DEFAULT_CLIP: f64 = 1e300;
pub const CONVERGENCE_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedLaw {
    bound: usize,
    /// Index `i + M` holds spin `i`.
    values: Vec<f64>,
}

impl TruncatedLaw {
    pub fn new(bound: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * bound + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * bound + 1,
                got: values.len(),
            });
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositive {
                index: i,
                value: v,
            });
        }
        Ok(Self { bound, values })
    }

    pub fn from_fn(bound: usize, f: impl Fn(i64) -> f64) -> Result<Self> {
        let m = bound as i64;
        Self::new(bound, (-m..=m).map(f).collect())
    }

    pub fn constant(bound: usize, value: f64) -> Result<Self> {
        Self::from_fn(bound, |_| value)
    }

    /// The periodic law repeated over `−M..=M`.
    pub fn from_periodic(bound: usize, law: &PeriodicBoundaryLaw) -> Result<Self> {
        Self::from_fn(bound, |s| law.at(s))
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `spin`, zero outside the support.
    pub fn at(&self, spin: i64) -> f64 {
        if spin.unsigned_abs() as usize > self.bound {
            0.0
        } else {
            self.values[(spin + self.bound as i64) as usize]
        }
    }

    /// Largest relative deviation from `target` over `|i| ≤ radius`.
    pub fn deviation(&self, target: &PeriodicBoundaryLaw, radius: usize) -> f64 {
        let r = radius.min(self.bound) as i64;
        (-r..=r)
            .map(|s| {
                let t = target.at(s);
                (self.at(s) - t).abs() / t
            })
            .fold(0.0, f64::max)
    }

    /// The law read off spins `0..q`, as a periodic law.
    pub fn periodic_part(&self, q: usize) -> Result<PeriodicBoundaryLaw> {
        PeriodicBoundaryLaw::new((0..q as i64).map(|s| self.at(s)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub law: TruncatedLaw,
    /// Some entry exceeded `clip` and was clipped.
    pub clipped: bool,
}

/// One level of the recursion: the parent law from its `k` children.
pub fn step(
    children: &[TruncatedLaw],
    k: u32,
    activities: &ActivityProfile,
    clip: f64,
) -> Result<StepOutcome> {
    check_order(k)?;
    check_positive("clip", clip)?;
    if children.len() != k as usize {
        return Err(Error::DimensionMismatch {
            expected: k as usize,
            got: children.len(),
        });
    }
    let bound = children[0].bound;
    if bound < 3 {
        return Err(Error::InvalidParameter(format!(
            "truncation {bound} is below 3"
        )));
    }
    if let Some(c) = children.iter().find(|c| c.bound != bound) {
        return Err(Error::DimensionMismatch {
            expected: 2 * bound + 1,
            got: c.values.len(),
        });
    }
    let m = bound as i64;
    let mut values: Vec<f64> = (-m..=m)
        .map(|s| {
            let product: f64 = children
                .iter()
                .map(|c| {
                    let den = c.at(-1) + c.at(1);
                    assert!(den > 0.0, "positive laws have z_-1 + z_1 > 0");
                    neighbors(s).into_iter().map(|n| c.at(n)).sum::<f64>() / den
                })
                .product();
            activities.at(s) * product
        })
        .collect();
    let z0 = values[bound];
    let mut clipped = false;
    for v in values.iter_mut() {
        *v /= z0;
        if !(*v <= clip) {
            *v = clip;
            clipped = true;
        } else if *v < f64::MIN_POSITIVE {
            // decay next to the cut is expected, only keep entries positive
            *v = f64::MIN_POSITIVE;
        }
    }
    Ok(StepOutcome {
        law: TruncatedLaw { bound, values },
        clipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// `z ≡ c` on every spin.
    Constant(f64),
    /// A periodic law, unchanged.
    Exact(PeriodicBoundaryLaw),
    /// A periodic law with each residue class except `0` multiplied by
    /// `exp(amplitude · u)`, `u` uniform on `[−1, 1]`. The perturbed law is
    /// still periodic.
    Noisy {
        law: PeriodicBoundaryLaw,
        amplitude: f64,
        seed: u64,
    },
    /// A periodic law with one spin multiplied by `factor`.
    Spike {
        law: PeriodicBoundaryLaw,
        spin: i64,
        factor: f64,
    },
}

impl Boundary {
    pub fn id(&self) -> String {
        match self {
            Boundary::Constant(c) => format!("constant({c})"),
            Boundary::Exact(law) => format!("exact{law}"),
            Boundary::Noisy {
                law,
                amplitude,
                seed,
            } => format!("noisy{law}[amplitude={amplitude},seed={seed}]"),
            Boundary::Spike { law, spin, factor } => {
                format!("spike{law}[spin={spin},factor={factor}]")
            }
        }
    }

    pub fn build(&self, bound: usize) -> Result<TruncatedLaw> {
        match self {
            Boundary::Constant(c) => TruncatedLaw::constant(bound, *c),
            Boundary::Exact(law) => TruncatedLaw::from_periodic(bound, law),
            Boundary::Noisy {
                law,
                amplitude,
                seed,
            } => {
                let mut rng = Pcg64::seed_from_u64(*seed);
                let mut values = law.values().to_vec();
                for v in values.iter_mut().skip(1) {
                    *v *= (amplitude * rng.gen_range(-1.0..=1.0)).exp();
                }
                TruncatedLaw::from_periodic(bound, &PeriodicBoundaryLaw::new(values)?)
            }
            Boundary::Spike { law, spin, factor } => {
                TruncatedLaw::from_fn(bound, |s| {
                    if s == *spin {
                        law.at(s) * factor
                    } else {
                        law.at(s)
                    }
                })
            }
        }
    }
}

/// What a run is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// The same law on every level.
    Periodic(PeriodicBoundaryLaw),
    /// Laws alternating between levels.
    Alternating(BipartitePair),
}

impl Target {
    fn period(&self) -> usize {
        match self {
            Target::Periodic(l) => l.period(),
            Target::Alternating(p) => p.period(),
        }
    }

    fn phases(&self) -> usize {
        match self {
            Target::Periodic(_) => 1,
            Target::Alternating(_) => 2,
        }
    }

    /// The law expected at `level` under `phase`.
    pub fn at_level(&self, level: usize, phase: usize) -> &PeriodicBoundaryLaw {
        match self {
            Target::Periodic(l) => l,
            Target::Alternating(p) if (level + phase) % 2 == 0 => &p.even,
            Target::Alternating(p) => &p.odd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub k: u32,
    pub depth: usize,
    pub truncation: usize,
    pub activities: ActivityProfile,
    pub boundary: Boundary,
    pub clip: f64,
}

impl SimulationConfig {
    pub fn new(k: u32, depth: usize, activities: ActivityProfile, boundary: Boundary) -> Self {
        Self {
            k,
            depth,
            truncation: DEFAULT_TRUNCATION,
            activities,
            boundary,
            clip: DEFAULT_CLIP,
        }
    }

    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self
    }

    /// Radius of the window untouched by the cut at `level`.
    pub fn window_radius(&self, level: usize) -> usize {
        self.truncation.saturating_sub(2 + level)
    }

    fn validate(&self) -> Result<()> {
        check_order(self.k)?;
        if self.depth == 0 {
            return Err(Error::InvalidParameter("depth must be at least 1".into()));
        }
        let q = self.activities.period();
        if self.window_radius(self.depth) < q {
            return Err(Error::InvalidParameter(format!(
                "truncation {} leaves no full period at depth {}; need at least {}",
                self.truncation,
                self.depth,
                self.depth + 2 + q
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionRun {
    pub config: SimulationConfig,
    /// `levels[0]` is the boundary, `levels[depth]` the root.
    pub levels: Vec<TruncatedLaw>,
    /// Index into the targets passed to [`run`] of the one the run ended
    /// closest to.
    pub target: Option<usize>,
    pub phase: usize,
    /// Deviation from the chosen target per level, over the clean window.
    pub metrics: Vec<f64>,
    /// First level from which every metric stays below the threshold.
    pub converged_at: Option<usize>,
    pub clipped: bool,
}

impl RecursionRun {
    pub fn root(&self) -> &TruncatedLaw {
        &self.levels[self.levels.len() - 1]
    }

    pub fn final_metric(&self) -> Option<f64> {
        self.metrics.last().copied()
    }

    /// Laws of the last two levels, root first.
    pub fn level_pair(&self) -> Result<BipartitePair> {
        let q = self.config.activities.period();
        let n = self.levels.len();
        BipartitePair::new(
            self.levels[n - 1].periodic_part(q)?,
            self.levels[n - 2].periodic_part(q)?,
        )
    }

    /// Residual of the alternating-level system at [`Self::level_pair`].
    pub fn level_pair_residual(&self) -> Result<f64> {
        let q = self.config.activities.period();
        let system = ReducedSystem::build(
            self.config.k,
            q,
            self.config.activities.clone(),
            SystemKind::Bipartite,
        )?;
        system.max_residual(&self.level_pair()?.unknowns())
    }
}

/// Iterates from the boundary to the root and scores every level against the
/// target closest to the root law.
pub fn run(config: SimulationConfig, targets: &[Target]) -> Result<RecursionRun> {
    config.validate()?;
    let q = config.activities.period();
    if let Some(t) = targets.iter().find(|t| t.period() != q) {
        return Err(Error::InvalidPeriod(t.period()));
    }
    let mut levels = Vec::with_capacity(config.depth + 1);
    levels.push(config.boundary.build(config.truncation)?);
    let mut clipped = false;
    for _ in 0..config.depth {
        let child = levels.last().expect("boundary level present");
        let children = vec![child.clone(); config.k as usize];
        let out = step(&children, config.k, &config.activities, config.clip)?;
        clipped |= out.clipped;
        levels.push(out.law);
    }

    let depth = config.depth;
    let root_radius = config.window_radius(depth);
    let best = targets
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.phases()).map(move |p| (i, p)))
        .map(|(i, p)| {
            let d = levels[depth].deviation(targets[i].at_level(depth, p), root_radius);
            (i, p, d)
        })
        .min_by(|x, y| x.2.total_cmp(&y.2));

    let (target, phase, metrics) = match best {
        Some((i, p, _)) => {
            let metrics = levels
                .iter()
                .enumerate()
                .map(|(l, law)| law.deviation(targets[i].at_level(l, p), config.window_radius(l)))
                .collect();
            (Some(i), p, metrics)
        }
        None => (None, 0, Vec::new()),
    };
    let converged_at = if metrics.is_empty() {
        None
    } else {
        let tail = metrics
            .iter()
            .rev()
            .take_while(|&&m| m < CONVERGENCE_THRESHOLD)
            .count();
        (tail > 0).then(|| metrics.len() - tail)
    };
    Ok(RecursionRun {
        config,
        levels,
        target,
        phase,
        metrics,
        converged_at,
        clipped,
    })
}

/// Independent runs in parallel, results in input order.
pub fn run_many(configs: Vec<SimulationConfig>, targets: &[Target]) -> Vec<Result<RecursionRun>> {
    configs.into_par_iter().map(|c| run(c, targets)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::solve_bip_q2;
    use crate::ti::{solve_ti_q2, solve_ti_q4_diagonal};

    fn q2_target(lambda: f64) -> PeriodicBoundaryLaw {
        PeriodicBoundaryLaw::q2(solve_ti_q2(2, lambda).unwrap()).unwrap()
    }

    #[test]
    fn exact_patterns_are_reproduced() {
        let law = q2_target(1.7);
        let child = TruncatedLaw::from_periodic(25, &law).unwrap();
        let out = step(&[child.clone(), child], 2, &ActivityProfile::q2(1.7).unwrap(), DEFAULT_CLIP)
            .unwrap();
        assert!(out.law.deviation(&law, 23) < 1e-10);
        assert!(!out.clipped);

        let a = solve_ti_q4_diagonal(3, 2.0, 0.6).unwrap();
        let law = PeriodicBoundaryLaw::q4(a, 0.6, a).unwrap();
        let child = TruncatedLaw::from_periodic(30, &law).unwrap();
        let acts = ActivityProfile::q4(2.0, 0.6).unwrap();
        let out = step(&vec![child; 3], 3, &acts, DEFAULT_CLIP).unwrap();
        assert!(out.law.deviation(&law, 28) < 1e-10);
    }

    #[test]
    fn hand_computed_step() {
        let (lambda, lambda2) = (1.3, 0.7);
        let child = TruncatedLaw::constant(3, 1.0).unwrap();
        let acts = ActivityProfile::q4(lambda, lambda2).unwrap();
        let out = step(&[child.clone(), child], 2, &acts, DEFAULT_CLIP).unwrap();
        let expected = [
            lambda,
            lambda2,
            2.25 * lambda,
            1.0,
            2.25 * lambda,
            lambda2,
            lambda,
        ];
        for (got, want) in out.law.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn step_validation() {
        let child = TruncatedLaw::constant(3, 1.0).unwrap();
        let acts = ActivityProfile::q2(1.0).unwrap();
        assert!(step(&[child.clone()], 2, &acts, DEFAULT_CLIP).is_err());
        let small = TruncatedLaw::constant(2, 1.0).unwrap();
        assert!(step(&[small.clone(), small], 2, &acts, DEFAULT_CLIP).is_err());
        assert!(TruncatedLaw::new(2, vec![1.0; 4]).is_err());
        assert!(TruncatedLaw::new(1, vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn exact_boundary_stays_put() {
        let law = q2_target(1.0);
        let cfg = SimulationConfig::new(2, 12, ActivityProfile::q2(1.0).unwrap(), Boundary::Exact(law.clone()));
        let r = run(cfg, &[Target::Periodic(law)]).unwrap();
        assert!(r.metrics.iter().all(|&m| m < 1e-10));
        assert_eq!(r.converged_at, Some(0));
    }

    #[test]
    fn below_threshold_levels_alternate() {
        let lambda = 1.0;
        let sols = solve_bip_q2(2, lambda).unwrap();
        let off = sols.off_diagonal().unwrap();
        let pair = BipartitePair::new(
            PeriodicBoundaryLaw::q2(off.first).unwrap(),
            PeriodicBoundaryLaw::q2(off.second).unwrap(),
        )
        .unwrap();
        let cfg = SimulationConfig::new(
            2,
            300,
            ActivityProfile::q2(lambda).unwrap(),
            Boundary::Noisy {
                law: q2_target(lambda),
                amplitude: 0.01,
                seed: 3,
            },
        )
        .with_truncation(310);
        let targets = [Target::Periodic(q2_target(lambda)), Target::Alternating(pair)];
        let r = run(cfg, &targets).unwrap();
        assert_eq!(r.target, Some(1));
        assert!(r.final_metric().unwrap() < 1e-6);
        assert!(r.level_pair_residual().unwrap() < 1e-6);
    }

    #[test]
    fn above_threshold_levels_agree() {
        let lambda = 3.0;
        let cfg = SimulationConfig::new(
            2,
            300,
            ActivityProfile::q2(lambda).unwrap(),
            Boundary::Noisy {
                law: q2_target(lambda),
                amplitude: 0.05,
                seed: 11,
            },
        )
        .with_truncation(310);
        let r = run(cfg, &[Target::Periodic(q2_target(lambda))]).unwrap();
        assert!(r.final_metric().unwrap() < 1e-8);
        assert!(r.converged_at.is_some());
    }

    #[test]
    fn truncation_doubling_is_stable() {
        let acts = ActivityProfile::q4(1.5, 0.8).unwrap();
        let boundary = Boundary::Constant(1.0);
        let a = run(SimulationConfig::new(2, 10, acts.clone(), boundary.clone()).with_truncation(20), &[]).unwrap();
        let b = run(SimulationConfig::new(2, 10, acts, boundary).with_truncation(40), &[]).unwrap();
        let r = 8;
        for s in -r..=r {
            let (x, y) = (a.root().at(s), b.root().at(s));
            assert!((x - y).abs() <= 1e-6 * y);
        }
    }

    #[test]
    fn overflow_is_flagged() {
        let cfg = SimulationConfig {
            clip: 1e10,
            ..SimulationConfig::new(5, 4, ActivityProfile::q2(1e12).unwrap(), Boundary::Constant(1.0))
        };
        assert!(run(cfg, &[]).unwrap().clipped);
    }

    #[test]
    fn window_must_hold_a_period() {
        let cfg = SimulationConfig::new(2, 48, ActivityProfile::q2(1.0).unwrap(), Boundary::Constant(1.0));
        assert!(run(cfg, &[]).is_err());
    }
}
