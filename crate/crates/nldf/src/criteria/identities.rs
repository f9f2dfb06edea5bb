//! Pointwise algebraic identities behind the inequality reductions.
//!
//! Each kind states an exact equality between two piecewise-linear
//! expressions (of scalars or of functions on a measure space);
//! [`identity_check`] returns the maximum absolute deviation over the
//! supplied evaluation points, so anything at rounding scale (`<= 1e-12`)
//! certifies the identity on those inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::paired_maps;
use crate::contraction::{contraction_from_bp, NamedContraction, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::space::L2Fn;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    /// Rounded-median pair rewrites: with `u = f+g`, `v = f-g`,
    /// `(u + u^v)/2 = f - (-g)_+` and `(v + u v v)/2 = f + (-g)_+`.
    CgMedian,
    /// The banded pair at band `2*alpha` on `(f+g, f-g)` equals
    /// `f +- ((-alpha) v g ^ alpha)`.
    CgPalpha,
    /// With `C` the contraction matching transfer map `p`, and midpoints
    /// `m = (u+v)/2`, `h = (u-v)/2`: `u - p(u-v) = m + Ch` and
    /// `v + p(u-v) = m - Ch`.
    BpSubst,
    /// `(f v g, f ^ g) = (f+g)/2 +- |(f-g)/2|`.
    BhVeewedge,
    /// `(H(f,g), H(g,f)) = (f+g)/2 +- T((f-g)/2)` with `H` the band clamp
    /// and `T` the symmetric tent of width `alpha`.
    BhHalpha,
    /// The banded pair at band `alpha` is the mean of the input pair with
    /// its band-clamped reflection: `P1 = (u + H(u,v))/2`, `P2 = (v + H(v,u))/2`.
    /// (The analogous mean with the lattice pair is the median rewrite above.)
    ReflectionMean,
    /// Single-threshold rearrangement identities at `x >= 0`:
    /// `phi_x(t) + t_+ = sigma_x(t) + t`, `t_+ - phi_x(t) = |sigma_x(t) - t|`,
    /// and `sigma_x = T_{2x}(t_+)` with `T` the tent.
    Case1Ids,
    /// Two-threshold identities at `0 <= x1 < x2` linking the plateau maps
    /// `sigma`, `psi` to the zigzag pair map and the tents of widths `2*x1`
    /// and `2*(x2-x1)`.
    Case2Ids,
    /// Straddling-threshold identities at `x1 < 0 < x2`: `psi` factors as
    /// `phi_{x1}` after clamping at `x2`, and `phi_{2x2}(t - psi(t))`
    /// equals `t ^ x2 - phi_{x1,x2}(t)`.
    Case3Ids,
}

impl IdentityKind {
    pub const ALL: [IdentityKind; 9] = [
        IdentityKind::CgMedian,
        IdentityKind::CgPalpha,
        IdentityKind::BpSubst,
        IdentityKind::BhVeewedge,
        IdentityKind::BhHalpha,
        IdentityKind::ReflectionMean,
        IdentityKind::Case1Ids,
        IdentityKind::Case2Ids,
        IdentityKind::Case3Ids,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::CgMedian => "cg_median",
            IdentityKind::CgPalpha => "cg_palpha",
            IdentityKind::BpSubst => "bp_subst",
            IdentityKind::BhVeewedge => "bh_veewedge",
            IdentityKind::BhHalpha => "bh_halpha",
            IdentityKind::ReflectionMean => "reflection_mean",
            IdentityKind::Case1Ids => "case1_ids",
            IdentityKind::Case2Ids => "case2_ids",
            IdentityKind::Case3Ids => "case3_ids",
        }
    }
}

impl fmt::Display for IdentityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdentityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown identity kind {s:?}")))
    }
}

/// Free inputs for [`identity_check`]; each kind reads the fields it needs
/// and rejects missing ones. Function-pair kinds use `f`, `g` (interpreted
/// as `u`, `v` where the identity is stated for an unordered pair), scalar
/// kinds evaluate over `points`.
#[derive(Clone, Copy, Default)]
pub struct IdentityInputs<'a> {
    pub f: Option<&'a L2Fn>,
    pub g: Option<&'a L2Fn>,
    pub alpha: Option<f64>,
    pub p: Option<&'a PiecewiseLinear>,
    pub x: Option<f64>,
    pub x_pair: Option<(f64, f64)>,
    pub points: Option<&'a [f64]>,
}

fn need<T>(v: Option<T>, kind: IdentityKind, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidParameter(format!("{kind} requires {what}")))
}

fn fn_dev(a: &L2Fn, b: &L2Fn) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn scalar_dev(points: &[f64], mut diff: impl FnMut(f64) -> f64) -> f64 {
    points.iter().fold(0.0, |m, &t| m.max(diff(t).abs()))
}

/// Maximum absolute deviation of the identity `kind` over the supplied
/// inputs; values at rounding scale certify it.
pub fn identity_check(kind: IdentityKind, inputs: &IdentityInputs) -> Result<f64> {
    match kind {
        IdentityKind::CgMedian => {
            let f = need(inputs.f, kind, "f")?;
            let g = need(inputs.g, kind, "g")?;
            let u = f + g;
            let v = f - g;
            let neg_pos = g.map(|t| (-t).max(0.0));
            let d1 = fn_dev(&(&u + &u.wedge(&v)?).scale(0.5), &(f - &neg_pos));
            let d2 = fn_dev(&(&v + &u.vee(&v)?).scale(0.5), &(f + &neg_pos));
            Ok(d1.max(d2))
        }
        IdentityKind::CgPalpha => {
            let f = need(inputs.f, kind, "f")?;
            let g = need(inputs.g, kind, "g")?;
            let alpha = need(inputs.alpha, kind, "alpha")?;
            if !(alpha >= 0.0) {
                return Err(Error::InvalidParameter("alpha must be >= 0".into()));
            }
            let (p1, p2) = paired_maps(&(f + g), &(f - g), 2.0 * alpha);
            let clamped = NamedContraction::ClampSym { alpha }.build()?.apply(g);
            let d1 = fn_dev(&p1, &(f + &clamped));
            let d2 = fn_dev(&p2, &(f - &clamped));
            Ok(d1.max(d2))
        }
        IdentityKind::BpSubst => {
            let u = need(inputs.f, kind, "f (used as u)")?;
            let v = need(inputs.g, kind, "g (used as v)")?;
            let p = need(inputs.p, kind, "p")?;
            let c = contraction_from_bp(p)?;
            let pd = p.apply(&(u - v));
            let m = (u + v).scale(0.5);
            let ch = c.apply(&(u - v).scale(0.5));
            let d1 = fn_dev(&(u - &pd), &(&m + &ch));
            let d2 = fn_dev(&(v + &pd), &(&m - &ch));
            Ok(d1.max(d2))
        }
        IdentityKind::BhVeewedge => {
            let f = need(inputs.f, kind, "f")?;
            let g = need(inputs.g, kind, "g")?;
            let m = (f + g).scale(0.5);
            let habs = (f - g).scale(0.5).map(f64::abs);
            let d1 = fn_dev(&f.vee(g)?, &(&m + &habs));
            let d2 = fn_dev(&f.wedge(g)?, &(&m - &habs));
            Ok(d1.max(d2))
        }
        IdentityKind::BhHalpha => {
            let f = need(inputs.f, kind, "f")?;
            let g = need(inputs.g, kind, "g")?;
            let alpha = need(inputs.alpha, kind, "alpha")?;
            let tent = NamedContraction::Tent { alpha }.build()?;
            let m = (f + g).scale(0.5);
            let th = tent.apply(&(f - g).scale(0.5));
            let d1 = fn_dev(&f.band_around(g, alpha)?, &(&m + &th));
            let d2 = fn_dev(&g.band_around(f, alpha)?, &(&m - &th));
            Ok(d1.max(d2))
        }
        IdentityKind::ReflectionMean => {
            let u = need(inputs.f, kind, "f (used as u)")?;
            let v = need(inputs.g, kind, "g (used as v)")?;
            let alpha = need(inputs.alpha, kind, "alpha")?;
            let (p1, p2) = paired_maps(u, v, alpha);
            let h_uv = u.band_around(v, alpha)?;
            let h_vu = v.band_around(u, alpha)?;
            let d1 = fn_dev(&p1, &(u + &h_uv).scale(0.5));
            let d2 = fn_dev(&p2, &(v + &h_vu).scale(0.5));
            Ok(d1.max(d2))
        }
        IdentityKind::Case1Ids => {
            let x = need(inputs.x, kind, "x")?;
            let points = need(inputs.points, kind, "points")?;
            if !(x >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "single-threshold identities need x >= 0, got {x}"
                )));
            }
            let phi = NamedContraction::Phi { x }.build()?;
            let sigma = NamedContraction::Sigma { x }.build()?;
            let tent = NamedContraction::Tent { alpha: 2.0 * x }.build()?;
            let d1 = scalar_dev(points, |t| {
                phi.eval(t) + t.max(0.0) - (sigma.eval(t) + t)
            });
            let d2 = scalar_dev(points, |t| {
                t.max(0.0) - phi.eval(t) - (sigma.eval(t) - t).abs()
            });
            let d3 = scalar_dev(points, |t| sigma.eval(t) - tent.eval(t.max(0.0)));
            Ok(d1.max(d2).max(d3))
        }
        IdentityKind::Case2Ids => {
            let (x1, x2) = need(inputs.x_pair, kind, "x_pair")?;
            let points = need(inputs.points, kind, "points")?;
            let sigma = NamedContraction::Case2Sigma { x1, x2 }.build()?;
            let psi = NamedContraction::Case2Psi { x1, x2 }.build()?;
            let pair = NamedContraction::PhiPair { x1, x2 }.build()?;
            let tent1 = NamedContraction::Tent { alpha: 2.0 * x1 }.build()?;
            let tent21 = NamedContraction::Tent { alpha: 2.0 * (x2 - x1) }.build()?;
            let d1 = scalar_dev(points, |t| {
                tent1.eval(t.max(0.0) - sigma.eval(t)) - (psi.eval(t) - (t - x1).max(0.0))
            });
            let d2 = scalar_dev(points, |t| tent21.eval((t - x1).max(0.0)) + sigma.eval(t));
            let d3 = scalar_dev(points, |t| {
                (psi.eval(t) - t).abs() - (t.max(0.0) - pair.eval(t))
            });
            Ok(d1.max(d2).max(d3))
        }
        IdentityKind::Case3Ids => {
            let (x1, x2) = need(inputs.x_pair, kind, "x_pair")?;
            let points = need(inputs.points, kind, "points")?;
            let psi = NamedContraction::Case3Psi { x1, x2 }.build()?;
            let pair = NamedContraction::PhiPair { x1, x2 }.build()?;
            let phi1 = NamedContraction::Phi { x: x1 }.build()?;
            let phi22 = NamedContraction::Phi { x: 2.0 * x2 }.build()?;
            let clamp = NamedContraction::MinAlpha { alpha: x2 }.build()?;
            let factored = phi1.compose(&clamp);
            let d1 = scalar_dev(points, |t| psi.eval(t) - factored.eval(t));
            let d2 = scalar_dev(points, |t| {
                phi22.eval(t - psi.eval(t)) - (t.min(x2) - pair.eval(t))
            });
            Ok(d1.max(d2))
        }
    }
}

/// Seeded driver over randomized inputs: `n_inputs` independent draws per
/// kind, each evaluated either on random function pairs (pair identities) or
/// over a fixed 1000-point grid of [-10, 10] with random thresholds (scalar
/// identities). Returns the maximum deviation seen; rounding scale certifies
/// the identity over the sampled family.
pub fn identity_sweep(kind: IdentityKind, seed: u64, n_inputs: u64) -> Result<f64> {
    use rand::Rng;

    let grid: Vec<f64> = (0..1000)
        .map(|i| -10.0 + 20.0 * i as f64 / 999.0)
        .collect();
    let mut worst = 0.0_f64;
    for index in 0..n_inputs {
        let mut rng = crate::rng::stream(seed, kind.name(), index);
        let nodes = rng.gen_range(2..=6);
        let weights: Vec<f64> = (0..nodes).map(|_| rng.gen_range(0.5..2.0)).collect();
        let space = crate::space::MeasureSpace::with_weights(weights)?;
        let f = super::sweep::sample_fn(&mut rng, &space);
        let g = super::sweep::sample_fn(&mut rng, &space);
        let alpha = super::sweep::sample_alpha(&mut rng);
        let p = super::sweep::sample_increasing_normal(&mut rng);
        let x = rng.gen_range(0.0..5.0);
        let x_pair = match kind {
            IdentityKind::Case2Ids => {
                let x1 = rng.gen_range(0.0..3.0);
                (x1, x1 + rng.gen_range(0.01..3.0))
            }
            IdentityKind::Case3Ids => {
                (-rng.gen_range(0.01..3.0), rng.gen_range(0.01..3.0))
            }
            _ => (0.0, 1.0),
        };
        let inputs = IdentityInputs {
            f: Some(&f),
            g: Some(&g),
            alpha: Some(alpha),
            p: Some(&p),
            x: Some(x),
            x_pair: Some(x_pair),
            points: Some(&grid),
        };
        worst = worst.max(identity_check(kind, &inputs)?);
    }
    Ok(worst)
}
