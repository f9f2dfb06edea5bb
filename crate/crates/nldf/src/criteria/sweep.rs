//! Randomized sweeps over contraction families.
//!
//! A sweep draws `(f, g)` pairs and family parameters from deterministic
//! per-sample streams, evaluates every enabled residual family, and
//! aggregates counts plus the worst case per check. Given equal seed and
//! config, the resulting report is byte-identical across runs and thread
//! schedules: each sample owns its RNG and aggregation happens in index
//! order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{
    bh_residuals, bp_star_residual, cg_residuals, compatibility_residual, CheckAccumulator,
    CheckReport, Report, Residual, Tolerance,
};
use crate::contraction::{build_dn, NamedContraction, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::functional::EnergyFunctional;
use crate::rng::stream;
use crate::space::{L2Fn, MeasureSpace};

/// One residual family a sweep can exercise. The first block applies a
/// single (possibly parameter-sampled) map through the symmetrized
/// contraction inequality; the later entries drive the paired-map,
/// transfer-map, band-clamp, and composition checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    PosPart,
    Abs,
    Halving,
    ClampSym,
    MinAlpha,
    Clamp0Alpha,
    Tent,
    Phi,
    PhiPair,
    Dn,
    CgPair,
    BpStar,
    BhPair,
    Composition,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 14] = [
        FamilyKind::PosPart,
        FamilyKind::Abs,
        FamilyKind::Halving,
        FamilyKind::ClampSym,
        FamilyKind::MinAlpha,
        FamilyKind::Clamp0Alpha,
        FamilyKind::Tent,
        FamilyKind::Phi,
        FamilyKind::PhiPair,
        FamilyKind::Dn,
        FamilyKind::CgPair,
        FamilyKind::BpStar,
        FamilyKind::BhPair,
        FamilyKind::Composition,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FamilyKind::PosPart => "pos_part",
            FamilyKind::Abs => "abs",
            FamilyKind::Halving => "halving",
            FamilyKind::ClampSym => "clamp_sym",
            FamilyKind::MinAlpha => "min_alpha",
            FamilyKind::Clamp0Alpha => "clamp_0_alpha",
            FamilyKind::Tent => "tent",
            FamilyKind::Phi => "phi",
            FamilyKind::PhiPair => "phi_pair",
            FamilyKind::Dn => "dn",
            FamilyKind::CgPair => "cg",
            FamilyKind::BpStar => "bp_star",
            FamilyKind::BhPair => "bh",
            FamilyKind::Composition => "composition",
        }
    }

    /// Names of the checks this family contributes to a report.
    pub fn subchecks(self) -> Vec<String> {
        match self {
            FamilyKind::CgPair => vec!["cg.lattice".into(), "cg.banded".into()],
            FamilyKind::BhPair => vec!["bh.lattice".into(), "bh.banded".into()],
            FamilyKind::Composition => vec![
                "composition.outer_step".into(),
                "composition.inner_step".into(),
                "composition.composed".into(),
            ],
            other => vec![other.label().to_string()],
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown check family {s:?}")))
    }
}

/// One function value: uniform on [-3, 3] with a 10% heavy tail on [-30, 30],
/// covering every breakpoint regime of the named maps.
pub fn sample_value(rng: &mut impl Rng) -> f64 {
    if rng.gen_bool(0.1) {
        rng.gen_range(-30.0..30.0)
    } else {
        rng.gen_range(-3.0..3.0)
    }
}

pub fn sample_fn(rng: &mut impl Rng, space: &MeasureSpace) -> L2Fn {
    let values = (0..space.len()).map(|_| sample_value(rng)).collect();
    L2Fn::new(space.clone(), values).expect("sampled values are finite")
}

/// Band parameter, log-uniform on [1e-2, 1e1].
pub fn sample_alpha(rng: &mut impl Rng) -> f64 {
    10f64.powf(rng.gen_range(-2.0..1.0))
}

/// Random increasing normal map: up to three sorted breakpoints with slopes
/// drawn from [0, 1], fixing 0 exactly.
pub fn sample_increasing_normal(rng: &mut impl Rng) -> PiecewiseLinear {
    let k = rng.gen_range(0..=3);
    let mut breaks: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let slopes = (0..breaks.len() + 1).map(|_| rng.gen_range(0.0..=1.0)).collect();
    PiecewiseLinear::new(breaks, slopes, 0.0).expect("sampled map is valid")
}

/// Draws one map from the pool used by the composition family.
fn sample_pool_contraction(rng: &mut impl Rng) -> PiecewiseLinear {
    let kind = match rng.gen_range(0..6) {
        0 => NamedContraction::PosPart,
        1 => NamedContraction::Abs,
        2 => NamedContraction::ClampSym { alpha: sample_alpha(rng) },
        3 => NamedContraction::MinAlpha { alpha: sample_alpha(rng) },
        4 => NamedContraction::Tent { alpha: sample_alpha(rng) },
        _ => NamedContraction::Phi { x: rng.gen_range(-3.0..3.0) },
    };
    kind.build().expect("pool parameters are valid")
}

struct SampleOutcome {
    f: Vec<f64>,
    g: Vec<f64>,
    params: serde_json::Value,
    residuals: Vec<Residual>,
}

fn compat_family(
    e: &EnergyFunctional,
    kind: FamilyKind,
    rng: &mut impl Rng,
    f: &L2Fn,
    g: &L2Fn,
    tol: Tolerance,
) -> Result<(serde_json::Value, Vec<Residual>)> {
    let (c, params) = match kind {
        FamilyKind::PosPart => (NamedContraction::PosPart.build()?, json!({})),
        FamilyKind::Abs => (NamedContraction::Abs.build()?, json!({})),
        FamilyKind::Halving => (PiecewiseLinear::affine(0.5, 0.0), json!({})),
        FamilyKind::ClampSym => {
            let alpha = sample_alpha(rng);
            (NamedContraction::ClampSym { alpha }.build()?, json!({ "alpha": alpha }))
        }
        FamilyKind::MinAlpha => {
            let alpha = sample_alpha(rng);
            (NamedContraction::MinAlpha { alpha }.build()?, json!({ "alpha": alpha }))
        }
        FamilyKind::Clamp0Alpha => {
            let alpha = sample_alpha(rng);
            (NamedContraction::Clamp0Alpha { alpha }.build()?, json!({ "alpha": alpha }))
        }
        FamilyKind::Tent => {
            let alpha = sample_alpha(rng);
            (NamedContraction::Tent { alpha }.build()?, json!({ "alpha": alpha }))
        }
        FamilyKind::Phi => {
            let x = sample_value(rng);
            (NamedContraction::Phi { x }.build()?, json!({ "x": x }))
        }
        FamilyKind::PhiPair => {
            let a = sample_value(rng);
            let b = sample_value(rng);
            let (x1, mut x2) = if a <= b { (a, b) } else { (b, a) };
            if x1 == x2 {
                x2 += 1.0;
            }
            (NamedContraction::PhiPair { x1, x2 }.build()?, json!({ "x1": x1, "x2": x2 }))
        }
        FamilyKind::Dn => {
            let n = rng.gen_range(0..=4u32);
            (build_dn(n), json!({ "n": n }))
        }
        _ => unreachable!("not a single-map family"),
    };
    let r = compatibility_residual(e, &c, f, g, tol)?;
    Ok((params, vec![r]))
}

fn run_family_sample(
    e: &EnergyFunctional,
    kind: FamilyKind,
    seed: u64,
    index: u64,
    tol: Tolerance,
) -> Result<SampleOutcome> {
    let mut rng = stream(seed, kind.label(), index);
    let f = sample_fn(&mut rng, e.space());
    let g = sample_fn(&mut rng, e.space());
    let (params, residuals) = match kind {
        FamilyKind::CgPair => {
            let alpha = sample_alpha(&mut rng);
            let (a, b) = cg_residuals(e, &f, &g, alpha, tol)?;
            (json!({ "alpha": alpha }), vec![a, b])
        }
        FamilyKind::BhPair => {
            let alpha = sample_alpha(&mut rng);
            let (a, b) = bh_residuals(e, &f, &g, alpha, tol)?;
            (json!({ "alpha": alpha }), vec![a, b])
        }
        FamilyKind::BpStar => {
            let p = sample_increasing_normal(&mut rng);
            let r = bp_star_residual(e, &p, &f, &g, tol)?;
            (
                json!({ "p_breaks": p.breaks(), "p_slopes": p.slopes() }),
                vec![r],
            )
        }
        FamilyKind::Composition => {
            let outer = sample_pool_contraction(&mut rng);
            let inner = sample_pool_contraction(&mut rng);
            let inner_g = inner.apply(&g);
            let outer_step = compatibility_residual(e, &outer, &f, &inner_g, tol)?;
            let inner_step = compatibility_residual(e, &inner, &f, &g, tol)?;
            let composed = compatibility_residual(e, &outer.compose(&inner), &f, &g, tol)?;
            (
                json!({
                    "outer_breaks": outer.breaks(), "outer_slopes": outer.slopes(),
                    "inner_breaks": inner.breaks(), "inner_slopes": inner.slopes(),
                }),
                vec![outer_step, inner_step, composed],
            )
        }
        single => {
            let (params, residuals) = compat_family(e, single, &mut rng, &f, &g, tol)?;
            (params, residuals)
        }
    };
    Ok(SampleOutcome {
        f: f.values().to_vec(),
        g: g.values().to_vec(),
        params,
        residuals,
    })
}

/// Midpoint comparison `2 E(f) <= E(f+g) + E(f-g)`. On convex instances this
/// combines midpoint convexity on finite samples with the discipline that an
/// infinite `E(f)` forces the symmetric pair sum to be infinite: a finite
/// pair sum against an infinite left side is reported as a violation.
fn midpoint_sample(
    e: &EnergyFunctional,
    seed: u64,
    index: u64,
    tol: Tolerance,
) -> Result<SampleOutcome> {
    let mut rng = stream(seed, "midpoint_vacuity", index);
    let f = sample_fn(&mut rng, e.space());
    let g = sample_fn(&mut rng, e.space());
    let ef = e.eval(&f)?;
    let rhs = e.eval(&(&f + &g))? + e.eval(&(&f - &g))?;
    let r = Residual::from_pair(ef + ef, rhs, tol);
    Ok(SampleOutcome {
        f: f.values().to_vec(),
        g: g.values().to_vec(),
        params: json!({}),
        residuals: vec![r],
    })
}

fn aggregate(
    label_set: Vec<String>,
    outcomes: Vec<Result<SampleOutcome>>,
) -> Result<Vec<CheckReport>> {
    let mut accs: Vec<CheckAccumulator> =
        label_set.into_iter().map(CheckAccumulator::new).collect();
    for outcome in outcomes {
        let o = outcome?;
        debug_assert_eq!(o.residuals.len(), accs.len());
        for (acc, r) in accs.iter_mut().zip(&o.residuals) {
            acc.record(r, || json!({ "f": o.f, "g": o.g, "params": o.params }));
        }
    }
    Ok(accs.into_iter().map(CheckAccumulator::finish).collect())
}

/// Runs `n_samples` random draws of every family in `families` against `e`.
/// Convex instances additionally get the midpoint/finiteness check. The
/// report is deterministic in `(seed, families, n_samples, tolerance)`.
pub fn fuzz_sweep(
    e: &EnergyFunctional,
    families: &[FamilyKind],
    seed: u64,
    n_samples: u64,
    tol: Tolerance,
    mode: ExecMode,
) -> Result<Report> {
    let mut checks = Vec::new();
    for &kind in families {
        let outcomes = mode.map_indexed(n_samples as usize, |i| {
            run_family_sample(e, kind, seed, i as u64, tol)
        });
        checks.extend(aggregate(kind.subchecks(), outcomes)?);
    }
    if e.is_convex() {
        let outcomes = mode.map_indexed(n_samples as usize, |i| {
            midpoint_sample(e, seed, i as u64, tol)
        });
        checks.extend(aggregate(vec!["midpoint_vacuity".into()], outcomes)?);
    }
    Ok(Report::from_checks(e.describe(), seed, tol, checks))
}
