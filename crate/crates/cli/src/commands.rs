use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use hcwand_core::bipartite::{solve_bip_q2, solve_bip_q4_i4};
use hcwand_core::exact::verify_range;
use hcwand_core::scan::{lambda_curve, scan, AnalysisMode, ModeParams, ScanRow};
use hcwand_core::solution::{PairSolution, SolutionKind};
use hcwand_core::ti::{assemble_ti_vector, enumerate_ti_q2, enumerate_ti_q4};
use hcwand_core::treesim::{run, Boundary, SimulationConfig, Target};
use hcwand_core::wand::{ActivityProfile, BipartitePair, PeriodicBoundaryLaw};

use crate::args::{
    BoundaryKind, CurveArgs, Format, Output, ScanArgs, SimulateArgs, SolveArgs, VerifyArgs,
};

/// How a successful run ended; errors map to exit status 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
    Diverged,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed => 2,
            Status::Diverged => 3,
        }
    }
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn to_json(value: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Period descriptor(s) of one solution: a single law for the
/// translation-invariant modes, the two level laws otherwise.
fn descriptor(mode: AnalysisMode, s: &PairSolution, l2: Option<f64>) -> Result<Vec<Vec<f64>>> {
    let g = l2.unwrap_or(1.0);
    let laws = match mode {
        AnalysisMode::TiQ2 => vec![assemble_ti_vector(s, 2, g)?],
        AnalysisMode::TiQ4 => vec![assemble_ti_vector(s, 4, g)?],
        AnalysisMode::BipQ2 => vec![
            PeriodicBoundaryLaw::q2(s.first)?,
            PeriodicBoundaryLaw::q2(s.second)?,
        ],
        AnalysisMode::BipQ4I3 | AnalysisMode::BipQ4I4 => vec![
            PeriodicBoundaryLaw::q4(s.first, g, s.first)?,
            PeriodicBoundaryLaw::q4(s.second, g, s.second)?,
        ],
    };
    Ok(laws.iter().map(|l| l.values().to_vec()).collect())
}

fn kind_name(kind: SolutionKind) -> &'static str {
    match kind {
        SolutionKind::Diagonal => "diagonal",
        SolutionKind::OffDiagonal => "off-diagonal",
        SolutionKind::Swapped => "swapped",
    }
}

pub fn solve(args: &SolveArgs) -> Result<Status> {
    let params = ModeParams::new(args.mode, args.k, args.lambda2)?;
    let set = params.solve(args.lambda)?;
    let critical = params.closed_form_critical();
    let text = match args.output.format {
        Some(Format::Csv) => to_csv([ScanRow::at(&params, args.lambda)?])?,
        Some(Format::Json) => {
            let solutions = set
                .solutions
                .iter()
                .map(|s| {
                    Ok(json!({
                        "kind": kind_name(s.kind),
                        "first": s.first,
                        "second": s.second,
                        "residual": s.residual,
                        "descriptor": descriptor(args.mode, s, params.lambda2)?,
                    }))
                })
                .collect::<Result<Vec<_>>>()?;
            to_json(&json!({
                "config": {
                    "mode": args.mode,
                    "k": args.k,
                    "lambda": args.lambda,
                    "lambda2": params.lambda2,
                },
                "regime": set.regime,
                "count": set.count(),
                "critical": critical,
                "normalisable": false,
                "solutions": solutions,
            }))?
        }
        None => {
            let mut t = String::new();
            write!(t, "mode {} k={} lambda={}", args.mode, args.k, args.lambda)?;
            if let Some(l2) = params.lambda2 {
                write!(t, " lambda2={l2}")?;
            }
            writeln!(t)?;
            match critical {
                Some(c) => writeln!(t, "critical lambda: {c}")?,
                None => writeln!(t, "critical lambda: none (unique for every lambda)")?,
            }
            writeln!(t, "regime: {:?}, {} solution(s)", set.regime, set.count())?;
            for s in &set.solutions {
                let laws = descriptor(args.mode, s, params.lambda2)?
                    .iter()
                    .map(|l| format!("{l:?}"))
                    .collect::<Vec<_>>()
                    .join(" / ");
                writeln!(
                    t,
                    "  {:<12} ({}, {})  residual {:.2e}  period {laws}",
                    kind_name(s.kind),
                    s.first,
                    s.second,
                    s.residual
                )?;
            }
            writeln!(t, "normalisable: false (partial sums of z grow without bound)")?;
            t
        }
    };
    emit(&args.output, &text)?;
    Ok(Status::Ok)
}

pub fn scan_cmd(args: &ScanArgs) -> Result<Status> {
    let params = ModeParams::new(args.mode, args.k, args.lambda2)?;
    let s = scan(params, args.lambda_min, args.lambda_max, args.steps)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&s.rows)?,
        Format::Json => to_json(&json!({
            "config": {
                "mode": args.mode,
                "k": args.k,
                "lambda_min": args.lambda_min,
                "lambda_max": args.lambda_max,
                "steps": args.steps,
                "lambda2": params.lambda2,
            },
            "rows": s.rows,
            "critical": s.critical,
        }))?,
    };
    emit(&args.output, &text)?;
    Ok(Status::Ok)
}

pub fn curve(args: &CurveArgs) -> Result<Status> {
    let c = lambda_curve(args.k, args.lambda2, args.t_min, args.t_max, args.steps)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&c.points)?,
        Format::Json => to_json(&json!({
            "config": {
                "k": args.k,
                "lambda2": args.lambda2,
                "t_min": args.t_min,
                "t_max": args.t_max,
                "steps": args.steps,
            },
            "points": c.points,
            "minimum": { "t": c.t_at_min, "lambda": c.lambda_min },
        }))?,
    };
    emit(&args.output, &text)?;
    let straddles = args.t_min < 1.0 && 1.0 < args.t_max;
    if straddles && (c.t_at_min - 1.0).abs() >= 1e-8 {
        eprintln!("minimum found at t = {}, expected t = 1", c.t_at_min);
        return Ok(Status::VerificationFailed);
    }
    Ok(Status::Ok)
}

pub fn verify(args: &VerifyArgs) -> Result<Status> {
    if args.k_min < 2 || args.k_max < args.k_min {
        bail!("invalid k range {}..={}", args.k_min, args.k_max);
    }
    let reports = verify_range(args.k_min, args.k_max)?;
    let passed = reports.iter().all(|r| r.passed());
    let text = match args.output.format {
        Some(Format::Json) => to_json(&json!({
            "config": { "k_min": args.k_min, "k_max": args.k_max },
            "reports": reports,
            "passed": passed,
        }))?,
        Some(Format::Csv) => to_csv(&reports)?,
        None => {
            let mark = |b: bool| if b { "pass" } else { "FAIL" };
            let mut t = String::new();
            for r in &reports {
                writeln!(
                    t,
                    "k={:<3} degree={:<3} low-coeffs={} x4={} high-coeffs={} binomial={} eta={} product-form={} descartes={}",
                    r.k,
                    r.degree,
                    mark(r.low_coeffs),
                    r.x4_coefficient,
                    mark(r.high_coeffs_positive),
                    mark(r.binomial_inequality),
                    mark(r.eta_positive),
                    mark(r.product_form_agrees),
                    mark(r.descartes_single_change),
                )?;
            }
            writeln!(t, "{}", if passed { "all checks passed" } else { "some checks FAILED" })?;
            t
        }
    };
    emit(&args.output, &text)?;
    Ok(if passed {
        Status::Ok
    } else {
        Status::VerificationFailed
    })
}

/// Candidate limits of the recursion: the translation-invariant solutions
/// and, when they exist, the level-alternating ones.
fn simulation_targets(
    args: &SimulateArgs,
    l2: Option<f64>,
) -> Result<(PeriodicBoundaryLaw, Vec<(String, Target)>)> {
    let mut targets = Vec::new();
    let base;
    if args.mode.period() == 2 {
        let ti = enumerate_ti_q2(args.k, args.lambda)?;
        base = assemble_ti_vector(ti.diagonal(), 2, 1.0)?;
        targets.push(("translation-invariant".to_string(), Target::Periodic(base.clone())));
        if let Some(off) = solve_bip_q2(args.k, args.lambda)?.off_diagonal() {
            let pair = BipartitePair::new(
                PeriodicBoundaryLaw::q2(off.first)?,
                PeriodicBoundaryLaw::q2(off.second)?,
            )?;
            targets.push(("alternating 2-cycle".to_string(), Target::Alternating(pair)));
        }
    } else {
        let g = l2.expect("period 4 modes carry lambda2");
        let ti = enumerate_ti_q4(args.k, args.lambda, g)?;
        base = assemble_ti_vector(ti.diagonal(), 4, g)?;
        for s in &ti.solutions {
            targets.push((
                format!("translation-invariant {}", kind_name(s.kind)),
                Target::Periodic(assemble_ti_vector(s, 4, g)?),
            ));
        }
        if let Some(off) = solve_bip_q4_i4(args.k, args.lambda, g)?.off_diagonal() {
            let pair = BipartitePair::new(
                PeriodicBoundaryLaw::q4(off.first, g, off.first)?,
                PeriodicBoundaryLaw::q4(off.second, g, off.second)?,
            )?;
            targets.push(("alternating 2-cycle".to_string(), Target::Alternating(pair)));
        }
    }
    Ok((base, targets))
}

pub fn simulate(args: &SimulateArgs) -> Result<Status> {
    let params = ModeParams::new(args.mode, args.k, args.lambda2)?;
    let activities = match args.mode.period() {
        2 => ActivityProfile::q2(args.lambda)?,
        _ => ActivityProfile::q4(args.lambda, params.lambda2.unwrap_or(1.0))?,
    };
    let (base, targets) = simulation_targets(args, params.lambda2)?;
    let boundary = match args.boundary {
        BoundaryKind::Constant => Boundary::Constant(1.0),
        BoundaryKind::Exact => Boundary::Exact(base),
        BoundaryKind::Noisy => Boundary::Noisy {
            law: base,
            amplitude: args.noise,
            seed: args.seed,
        },
        BoundaryKind::Spike => Boundary::Spike {
            law: base,
            spin: 1,
            factor: 1.0 + args.noise,
        },
    };
    let boundary_id = boundary.id();
    let config = SimulationConfig {
        clip: args.clip,
        ..SimulationConfig::new(args.k, args.depth, activities, boundary)
            .with_truncation(args.truncate)
    };
    let only_targets: Vec<Target> = targets.iter().map(|(_, t)| t.clone()).collect();
    let r = run(config, &only_targets)?;
    let target_name = r.target.map(|i| targets[i].0.clone());
    let pair_residual = r.level_pair_residual().ok();
    let radius = r.config.window_radius(args.depth) as i64;
    let root: Vec<f64> = (-radius..=radius).map(|s| r.root().at(s)).collect();

    #[derive(Serialize)]
    struct LevelRow {
        level: usize,
        metric: f64,
    }
    let text = match args.output.format {
        Some(Format::Csv) => to_csv(r.metrics.iter().enumerate().map(|(level, &metric)| LevelRow { level, metric }))?,
        Some(Format::Json) => to_json(&json!({
            "config": {
                "mode": args.mode,
                "k": args.k,
                "lambda": args.lambda,
                "lambda2": params.lambda2,
                "depth": args.depth,
                "truncate": args.truncate,
                "seed": args.seed,
            },
            "boundary": boundary_id,
            "target": target_name,
            "phase": r.phase,
            "metrics": r.metrics,
            "final_metric": r.final_metric(),
            "converged_at": r.converged_at,
            "clipped": r.clipped,
            "level_pair_residual": pair_residual,
            "root_window": { "radius": radius, "values": root },
        }))?,
        None => {
            let mut t = String::new();
            writeln!(t, "boundary {boundary_id}")?;
            writeln!(t, "depth {} truncation {}", args.depth, args.truncate)?;
            writeln!(t, "closest target: {}", target_name.as_deref().unwrap_or("none"))?;
            if let Some(m) = r.final_metric() {
                writeln!(t, "final deviation {m:.3e}")?;
            }
            match r.converged_at {
                Some(l) => writeln!(t, "converged (< 1e-8) from level {l}")?,
                None => writeln!(t, "not converged within depth {}", args.depth)?,
            }
            if let Some(res) = pair_residual {
                writeln!(t, "alternating-level residual {res:.3e}")?;
            }
            let shown: Vec<f64> = (0..args.mode.period() as i64).map(|s| r.root().at(s)).collect();
            writeln!(t, "root law on one period {shown:?}")?;
            if r.clipped {
                writeln!(t, "DIVERGED: entries hit the clip bound")?;
            }
            t
        }
    };
    emit(&args.output, &text)?;
    Ok(if r.clipped { Status::Diverged } else { Status::Ok })
}
