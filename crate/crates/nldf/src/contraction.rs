//! Exact piecewise-linear maps and the normal-contraction algebra built on them.
//!
//! A map is stored as strictly increasing breakpoints, one slope per segment
//! (`breakpoints.len() + 1` slopes), and the value at zero (`anchor`). Values at
//! the breakpoints are cached so evaluation never re-integrates long slope runs.
//! Evaluation on the segment containing zero reads the anchor directly, so
//! `eval(0) == anchor` holds bit-exactly; composition computes the new anchor by
//! cascading evaluation, which keeps `C(0) = 0` exact through deep compositions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::L2Fn;

/// Piecewise-linear map in canonical form (no two adjacent segments share a slope).
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    breaks: Vec<f64>,
    slopes: Vec<f64>,
    anchor: f64,
    knots: Vec<f64>,
}

/// Outcome of a normality check.
#[derive(Debug, Clone, PartialEq)]
pub enum Normality {
    Normal,
    Violation(String),
}

impl PiecewiseLinear {
    /// Validates, computes knot values, and canonicalizes.
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Result<Self> {
        if slopes.len() != breaks.len() + 1 {
            return Err(Error::InvalidPiecewise(format!(
                "{} breakpoints need {} slopes, got {}",
                breaks.len(),
                breaks.len() + 1,
                slopes.len()
            )));
        }
        if breaks.iter().any(|b| !b.is_finite()) || !anchor.is_finite() {
            return Err(Error::InvalidPiecewise("breakpoints and anchor must be finite".into()));
        }
        if slopes.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidPiecewise("slopes must be finite".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPiecewise("breakpoints must be strictly increasing".into()));
        }
        let knots = compute_knots(&breaks, &slopes, anchor);
        Ok(Self { breaks, slopes, anchor, knots }.canonicalized())
    }

    /// Internal constructor for callers that already know the knot values.
    fn from_parts(breaks: Vec<f64>, slopes: Vec<f64>, anchor: f64, knots: Vec<f64>) -> Self {
        debug_assert_eq!(slopes.len(), breaks.len() + 1);
        debug_assert_eq!(knots.len(), breaks.len());
        Self { breaks, slopes, anchor, knots }.canonicalized()
    }

    fn canonicalized(mut self) -> Self {
        let mut i = 0;
        while i + 1 < self.slopes.len() {
            if self.slopes[i] == self.slopes[i + 1] {
                self.slopes.remove(i + 1);
                self.breaks.remove(i);
                self.knots.remove(i);
            } else {
                i += 1;
            }
        }
        self
    }

    pub fn affine(slope: f64, at_zero: f64) -> Self {
        Self { breaks: vec![], slopes: vec![slope], anchor: at_zero, knots: vec![] }
    }

    pub fn identity() -> Self {
        Self::affine(1.0, 0.0)
    }

    pub fn negation() -> Self {
        Self::affine(-1.0, 0.0)
    }

    pub fn zero_map() -> Self {
        Self::affine(0.0, 0.0)
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.knots
    }

    /// Index of the segment containing `t` (breakpoints belong to the segment on
    /// their right, so values at breakpoints come straight from the knot cache).
    fn seg(&self, t: f64) -> usize {
        self.breaks.partition_point(|b| *b <= t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.breaks.is_empty() {
            return self.anchor + self.slopes[0] * t;
        }
        let j = self.seg(t);
        if j == self.seg(0.0) {
            self.anchor + self.slopes[j] * t
        } else if j == 0 {
            self.knots[0] + self.slopes[0] * (t - self.breaks[0])
        } else {
            self.knots[j - 1] + self.slopes[j] * (t - self.breaks[j - 1])
        }
    }

    fn slope_at(&self, t: f64) -> f64 {
        self.slopes[self.seg(t)]
    }

    /// Pointwise application to a function's values.
    pub fn apply(&self, f: &L2Fn) -> L2Fn {
        f.map(|v| self.eval(v))
    }

    /// `self` composed after `inner`: the map `t -> self(inner(t))`, in exact
    /// breakpoint representation. New breakpoints are the preimages under `inner`
    /// of `self`'s breakpoints, merged with `inner`'s own.
    pub fn compose(&self, inner: &Self) -> Self {
        let mut xs: Vec<f64> = inner.breaks.clone();
        let nseg = inner.slopes.len();
        for j in 0..nseg {
            let s = inner.slopes[j];
            if s == 0.0 {
                continue;
            }
            // finite reference point on this segment
            let (rx, rv) = if inner.breaks.is_empty() {
                (0.0, inner.anchor)
            } else if j == 0 {
                (inner.breaks[0], inner.knots[0])
            } else {
                (inner.breaks[j - 1], inner.knots[j - 1])
            };
            let lo = if j == 0 { f64::NEG_INFINITY } else { inner.breaks[j - 1] };
            let hi = if j == nseg - 1 { f64::INFINITY } else { inner.breaks[j] };
            for &b in &self.breaks {
                let x = rx + (b - rv) / s;
                if x > lo && x < hi && x.is_finite() {
                    xs.push(x);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup();

        let knots: Vec<f64> = xs.iter().map(|&x| self.eval(inner.eval(x))).collect();
        let mut slopes = Vec::with_capacity(xs.len() + 1);
        for i in 0..=xs.len() {
            let probe = if xs.is_empty() {
                0.0
            } else if i == 0 {
                xs[0] - 1.0
            } else if i == xs.len() {
                xs[xs.len() - 1] + 1.0
            } else {
                0.5 * (xs[i - 1] + xs[i])
            };
            let s_in = inner.slope_at(probe);
            if s_in == 0.0 {
                slopes.push(0.0);
            } else {
                slopes.push(s_in * self.slope_at(inner.eval(probe)));
            }
        }
        let anchor = self.eval(inner.eval(0.0));
        Self::from_parts(xs, slopes, anchor, knots)
    }

    /// `cf * self + cg * other` as an exact piecewise-linear map.
    fn combine(&self, other: &Self, cf: f64, cg: f64) -> Self {
        let mut xs: Vec<f64> = self.breaks.iter().chain(other.breaks.iter()).cloned().collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let knots: Vec<f64> =
            xs.iter().map(|&x| cf * self.eval(x) + cg * other.eval(x)).collect();
        let mut slopes = Vec::with_capacity(xs.len() + 1);
        for i in 0..=xs.len() {
            let probe = if xs.is_empty() {
                0.0
            } else if i == 0 {
                xs[0] - 1.0
            } else if i == xs.len() {
                xs[xs.len() - 1] + 1.0
            } else {
                0.5 * (xs[i - 1] + xs[i])
            };
            slopes.push(cf * self.slope_at(probe) + cg * other.slope_at(probe));
        }
        let anchor = cf * self.anchor + cg * other.anchor;
        Self::from_parts(xs, slopes, anchor, knots)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, 1.0, -1.0)
    }

    pub fn scale_values(&self, c: f64) -> Self {
        Self::from_parts(
            self.breaks.clone(),
            self.slopes.iter().map(|s| c * s).collect(),
            c * self.anchor,
            self.knots.iter().map(|v| c * v).collect(),
        )
    }

    /// Normal means: maps 0 to 0 exactly and is 1-Lipschitz (every slope in [-1, 1]).
    pub fn verify_normal(&self) -> Normality {
        if self.anchor != 0.0 {
            return Normality::Violation(format!("value at zero is {}, not 0", self.anchor));
        }
        for &s in &self.slopes {
            if !(-1.0..=1.0).contains(&s) {
                return Normality::Violation(format!("slope {s} outside [-1, 1]"));
            }
        }
        Normality::Normal
    }

    pub fn is_normal(&self) -> bool {
        self.verify_normal() == Normality::Normal
    }

    pub fn is_increasing_normal(&self) -> bool {
        self.anchor == 0.0 && self.slopes.iter().all(|s| (0.0..=1.0).contains(s))
    }

    /// Canonical-form equality with a componentwise tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.breaks.len() == other.breaks.len()
            && self
                .breaks
                .iter()
                .zip(&other.breaks)
                .all(|(a, b)| (a - b).abs() <= tol)
            && self
                .slopes
                .iter()
                .zip(&other.slopes)
                .all(|(a, b)| (a - b).abs() <= tol)
            && (self.anchor - other.anchor).abs() <= tol
    }

    /// Maximum inconsistency between cached knot values and re-integration from
    /// the anchor. Diagnostic used by tests; exact constructions stay at 0.
    pub fn consistency_error(&self) -> f64 {
        let fresh = compute_knots(&self.breaks, &self.slopes, self.anchor);
        self.knots
            .iter()
            .zip(&fresh)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn compute_knots(breaks: &[f64], slopes: &[f64], anchor: f64) -> Vec<f64> {
    let n = breaks.len();
    let mut knots = vec![0.0; n];
    let j0 = breaks.partition_point(|b| *b <= 0.0);
    let mut x = 0.0;
    let mut v = anchor;
    for i in j0..n {
        v += slopes[i] * (breaks[i] - x);
        x = breaks[i];
        knots[i] = v;
    }
    x = 0.0;
    v = anchor;
    for i in (0..j0).rev() {
        v += slopes[i + 1] * (breaks[i] - x);
        x = breaks[i];
        knots[i] = v;
    }
    knots
}

fn require_nonneg(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn require_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

/// Named contraction kinds, addressable from configuration files.
///
/// `phi_pair` is the (+1, -1, +1) zigzag through zero with corners `x1 < x2`;
/// it covers the double-sign-change maps for every placement of the corners
/// relative to zero. `sigma`, `case2_*`, and `case3_psi` are the companion maps
/// used by the reduction chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedContraction {
    PosPart,
    Abs,
    Identity,
    Negation,
    Zero,
    ClampSym { alpha: f64 },
    MinAlpha { alpha: f64 },
    Clamp0Alpha { alpha: f64 },
    Tent { alpha: f64 },
    Phi { x: f64 },
    PhiPair { x1: f64, x2: f64 },
    Sigma { x: f64 },
    Case2Sigma { x1: f64, x2: f64 },
    Case2Psi { x1: f64, x2: f64 },
    Case3Psi { x1: f64, x2: f64 },
}

impl NamedContraction {
    pub fn build(&self) -> Result<PiecewiseLinear> {
        use NamedContraction::*;
        let pwl = match self {
            PosPart => PiecewiseLinear::new(vec![0.0], vec![0.0, 1.0], 0.0)?,
            Abs => PiecewiseLinear::new(vec![0.0], vec![-1.0, 1.0], 0.0)?,
            Identity => PiecewiseLinear::identity(),
            Negation => PiecewiseLinear::negation(),
            Zero => PiecewiseLinear::zero_map(),
            ClampSym { alpha } => {
                let a = require_nonneg("alpha", *alpha)?;
                if a == 0.0 {
                    PiecewiseLinear::zero_map()
                } else {
                    PiecewiseLinear::new(vec![-a, a], vec![0.0, 1.0, 0.0], 0.0)?
                }
            }
            MinAlpha { alpha } => {
                let a = require_nonneg("alpha", *alpha)?;
                PiecewiseLinear::new(vec![a], vec![1.0, 0.0], 0.0)?
            }
            Clamp0Alpha { alpha } => {
                let a = require_nonneg("alpha", *alpha)?;
                if a == 0.0 {
                    PiecewiseLinear::zero_map()
                } else {
                    PiecewiseLinear::new(vec![0.0, a], vec![0.0, 1.0, 0.0], 0.0)?
                }
            }
            Tent { alpha } => {
                let a = require_nonneg("alpha", *alpha)?;
                if a == 0.0 {
                    PiecewiseLinear::negation()
                } else {
                    PiecewiseLinear::new(vec![-a / 2.0, a / 2.0], vec![-1.0, 1.0, -1.0], 0.0)?
                }
            }
            Phi { x } => {
                let x = require_finite("x", *x)?;
                PiecewiseLinear::new(vec![x], vec![1.0, -1.0], 0.0)?
            }
            PhiPair { x1, x2 } => {
                let (x1, x2) = (require_finite("x1", *x1)?, require_finite("x2", *x2)?);
                if x1 >= x2 {
                    return Err(Error::InvalidParameter(format!(
                        "phi_pair needs x1 < x2, got {x1} and {x2}"
                    )));
                }
                PiecewiseLinear::new(vec![x1, x2], vec![1.0, -1.0, 1.0], 0.0)?
            }
            Sigma { x } => {
                let x = require_nonneg("x", *x)?;
                if x == 0.0 {
                    PiecewiseLinear::new(vec![0.0], vec![0.0, -1.0], 0.0)?
                } else {
                    PiecewiseLinear::new(vec![0.0, x], vec![0.0, 1.0, -1.0], 0.0)?
                }
            }
            Case2Sigma { x1, x2 } => {
                let (x1, x2) = case2_params(*x1, *x2)?;
                if x1 == 0.0 {
                    PiecewiseLinear::new(vec![0.0, x2], vec![0.0, -1.0, 1.0], 0.0)?
                } else {
                    PiecewiseLinear::new(vec![x1, x2], vec![0.0, -1.0, 1.0], 0.0)?
                }
            }
            Case2Psi { x1, x2 } => {
                let (x1, x2) = case2_params(*x1, *x2)?;
                if x1 == 0.0 {
                    PiecewiseLinear::new(vec![0.0, x2], vec![0.0, -1.0, 1.0], 0.0)?
                } else {
                    PiecewiseLinear::new(vec![0.0, x1, x2], vec![0.0, 1.0, -1.0, 1.0], 0.0)?
                }
            }
            Case3Psi { x1, x2 } => {
                let (x1, x2) = (require_finite("x1", *x1)?, require_finite("x2", *x2)?);
                if !(x1 < 0.0 && 0.0 < x2) {
                    return Err(Error::InvalidParameter(format!(
                        "case3_psi needs x1 < 0 < x2, got {x1} and {x2}"
                    )));
                }
                PiecewiseLinear::new(vec![x1, x2], vec![1.0, -1.0, 0.0], 0.0)?
            }
        };
        debug_assert!(pwl.is_normal());
        Ok(pwl)
    }
}

fn case2_params(x1: f64, x2: f64) -> Result<(f64, f64)> {
    let (x1, x2) = (require_finite("x1", x1)?, require_finite("x2", x2)?);
    if !(0.0 <= x1 && x1 < x2) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= x1 < x2, got {x1} and {x2}"
        )));
    }
    Ok((x1, x2))
}

/// Builds the named contraction kind.
pub fn make_named(kind: &NamedContraction) -> Result<PiecewiseLinear> {
    kind.build()
}

/// Increasing-map side of the contraction bijection: `p(x) = x/2 - C(x/2)`.
pub fn bp_from_contraction(c: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    if let Normality::Violation(why) = c.verify_normal() {
        return Err(Error::NotNormal(why));
    }
    let half = PiecewiseLinear::affine(0.5, 0.0);
    Ok(half.sub(&c.compose(&half)))
}

/// Contraction side of the bijection: `C(x) = x - p(2x)`.
pub fn contraction_from_bp(p: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    if !p.is_increasing_normal() {
        return Err(Error::NotIncreasing(
            "expected slopes in [0, 1] and value 0 at 0".into(),
        ));
    }
    let twice = PiecewiseLinear::affine(2.0, 0.0);
    Ok(PiecewiseLinear::identity().sub(&p.compose(&twice)))
}

/// Composition law on the increasing side: `x -> p1(x) + p2(x - 2 p1(x))`.
/// Under the bijection this corresponds to composing the matching contractions
/// as `C2 after C1`.
pub fn bp_compose(p1: &PiecewiseLinear, p2: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    for p in [p1, p2] {
        if !p.is_increasing_normal() {
            return Err(Error::NotIncreasing(
                "expected slopes in [0, 1] and value 0 at 0".into(),
            ));
        }
    }
    let inner = PiecewiseLinear::identity().sub(&p1.scale_values(2.0));
    Ok(p1.add(&p2.compose(&inner)))
}

fn pow3(k: i32) -> f64 {
    if k >= 0 {
        3f64.powi(k)
    } else {
        1.0 / 3f64.powi(-k)
    }
}

/// Telescope of tent maps with widths `2 * 3^k`, `k = n` (innermost) down to `-n`.
/// The result sends `[-3^(n+1), 3^(n+1)]` into `[-3^(-n), 3^(-n)]`.
pub fn build_dn(n: u32) -> PiecewiseLinear {
    let n = n as i32;
    let tent = |k: i32| {
        NamedContraction::Tent { alpha: 2.0 * pow3(k) }
            .build()
            .expect("tent width is positive")
    };
    let mut acc = tent(n);
    for k in (-n..n).rev() {
        acc = tent(k).compose(&acc);
    }
    acc
}

#[derive(Serialize, Deserialize)]
struct PwlJson {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    anchor: f64,
}

impl Serialize for PiecewiseLinear {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PwlJson {
            breakpoints: self.breaks.clone(),
            slopes: self.slopes.clone(),
            anchor: self.anchor,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseLinear {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PwlJson::deserialize(d)?;
        PiecewiseLinear::new(raw.breakpoints, raw.slopes, raw.anchor)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::MeasureSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn named_normal_sample() -> Vec<PiecewiseLinear> {
        use NamedContraction::*;
        [
            PosPart,
            Abs,
            Identity,
            Negation,
            Zero,
            ClampSym { alpha: 1.5 },
            MinAlpha { alpha: 0.75 },
            Clamp0Alpha { alpha: 2.0 },
            Tent { alpha: 2.0 },
            Phi { x: 1.25 },
            Phi { x: -0.5 },
            PhiPair { x1: 0.5, x2: 2.0 },
            PhiPair { x1: -2.0, x2: -0.5 },
            PhiPair { x1: -1.0, x2: 1.5 },
            Sigma { x: 1.5 },
            Case2Sigma { x1: 0.5, x2: 2.0 },
            Case2Psi { x1: 0.5, x2: 2.0 },
            Case3Psi { x1: -1.0, x2: 2.0 },
        ]
        .iter()
        .map(|k| k.build().unwrap())
        .collect()
    }

    /// Random normal map with dyadic breakpoints and slopes, so bijection
    /// round-trips are exact in floating point.
    fn random_dyadic_normal(rng: &mut ChaCha8Rng, increasing: bool) -> PiecewiseLinear {
        let n = rng.gen_range(0..5);
        let mut breaks: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-256i32..=256) as f64 / 32.0)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let lo = if increasing { 0i32 } else { -64 };
        let slopes = (0..breaks.len() + 1)
            .map(|_| rng.gen_range(lo..=64) as f64 / 64.0)
            .collect();
        PiecewiseLinear::new(breaks, slopes, 0.0).unwrap()
    }

    #[test]
    fn eval_matches_closed_forms() {
        let abs = NamedContraction::Abs.build().unwrap();
        assert_eq!(abs.eval(-2.0), 2.0);
        assert_eq!(abs.eval(0.0), 0.0);

        let tent2 = NamedContraction::Tent { alpha: 2.0 }.build().unwrap();
        assert_eq!(tent2.eval(3.0), -1.0);
        assert_eq!(tent2.eval(1.0), 1.0);
        assert_eq!(tent2.eval(-0.5), -0.5);
        assert_eq!(tent2.eval(-3.0), 1.0);

        let phi0 = NamedContraction::Phi { x: 0.0 }.build().unwrap();
        assert_eq!(phi0.eval(1.0), -1.0);
        assert_eq!(phi0.eval(-1.0), -1.0);

        let phi = NamedContraction::Phi { x: 1.5 }.build().unwrap();
        assert_eq!(phi.eval(2.5), 0.5);
        let phineg = NamedContraction::Phi { x: -1.0 }.build().unwrap();
        assert_eq!(phineg.eval(-2.0), 0.0);
        assert_eq!(phineg.eval(1.0), -1.0);

        let psi3 = NamedContraction::Case3Psi { x1: -1.0, x2: 2.0 }.build().unwrap();
        assert_eq!(psi3.eval(-3.0), -1.0);
        assert_eq!(psi3.eval(1.0), -1.0);
        assert_eq!(psi3.eval(5.0), -2.0);
    }

    #[test]
    fn every_named_kind_is_normal_with_exact_zero() {
        for c in named_normal_sample() {
            assert_eq!(c.verify_normal(), Normality::Normal, "{c:?}");
            assert_eq!(c.eval(0.0), 0.0, "{c:?}");
            assert_eq!(c.consistency_error(), 0.0, "{c:?}");
        }
    }

    #[test]
    fn verify_normal_rejects_bad_maps() {
        let steep = PiecewiseLinear::affine(1.2, 0.0);
        assert!(matches!(steep.verify_normal(), Normality::Violation(_)));
        let offset = PiecewiseLinear::affine(1.0, 0.1);
        assert!(matches!(offset.verify_normal(), Normality::Violation(_)));
        assert!(PiecewiseLinear::identity().is_normal());
    }

    #[test]
    fn constructor_validation() {
        assert!(PiecewiseLinear::new(vec![1.0, 0.0], vec![0.0, 1.0, 0.0], 0.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![0.0, 1.0, 0.0], 0.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(PiecewiseLinear::new(vec![f64::NAN], vec![1.0, 1.0], 0.0).is_err());
        assert!(NamedContraction::Tent { alpha: -1.0 }.build().is_err());
        assert!(NamedContraction::PhiPair { x1: 2.0, x2: 1.0 }.build().is_err());
        assert!(NamedContraction::Case2Sigma { x1: -0.5, x2: 1.0 }.build().is_err());
        assert!(NamedContraction::Case3Psi { x1: 0.5, x2: 1.0 }.build().is_err());
    }

    #[test]
    fn canonical_form_merges_equal_slopes() {
        let p = PiecewiseLinear::new(vec![-1.0, 1.0], vec![0.5, 0.5, 1.0], 0.0).unwrap();
        assert_eq!(p.breaks(), &[1.0]);
        assert_eq!(p.slopes(), &[0.5, 1.0]);
    }

    #[test]
    fn clamp_0_alpha_is_pos_after_clamp_sym() {
        let alpha = 1.5;
        let lhs = NamedContraction::Clamp0Alpha { alpha }.build().unwrap();
        let pos = NamedContraction::PosPart.build().unwrap();
        let clamp = NamedContraction::ClampSym { alpha }.build().unwrap();
        let rhs = pos.compose(&clamp);
        assert!(lhs.approx_eq(&rhs, 0.0), "{lhs:?} vs {rhs:?}");
    }

    #[test]
    fn compose_matches_pointwise_evaluation() {
        let abs = NamedContraction::Abs.build().unwrap();
        let clamp = NamedContraction::ClampSym { alpha: 1.0 }.build().unwrap();
        assert_eq!(abs.compose(&clamp).eval(2.0), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let c1 = random_dyadic_normal(&mut rng, false);
            let c2 = random_dyadic_normal(&mut rng, false);
            let comp = c1.compose(&c2);
            assert!(comp.is_normal());
            for _ in 0..100 {
                let t: f64 = rng.gen_range(-20.0..20.0);
                let direct = c1.eval(c2.eval(t));
                assert!(
                    (comp.eval(t) - direct).abs() <= 1e-12,
                    "composition mismatch at {t}: {} vs {direct}",
                    comp.eval(t)
                );
            }
        }
    }

    #[test]
    fn compose_identity_laws() {
        let id = PiecewiseLinear::identity();
        for c in named_normal_sample() {
            assert!(id.compose(&c).approx_eq(&c, 0.0));
            assert!(c.compose(&id).approx_eq(&c, 0.0));
        }
    }

    #[test]
    fn add_sub_are_exact() {
        let id = PiecewiseLinear::identity();
        let pos = NamedContraction::PosPart.build().unwrap();
        let min0 = id.sub(&pos);
        assert_eq!(min0.breaks(), &[0.0]);
        assert_eq!(min0.slopes(), &[1.0, 0.0]);
        assert_eq!(min0.eval(-3.0), -3.0);
        assert_eq!(min0.eval(3.0), 0.0);
    }

    #[test]
    fn bijection_named_examples() {
        let p_id = bp_from_contraction(&PiecewiseLinear::identity()).unwrap();
        assert!(p_id.approx_eq(&PiecewiseLinear::zero_map(), 0.0));

        let p_neg = bp_from_contraction(&PiecewiseLinear::negation()).unwrap();
        assert!(p_neg.approx_eq(&PiecewiseLinear::identity(), 0.0));

        let pos = NamedContraction::PosPart.build().unwrap();
        let p_pos = bp_from_contraction(&pos).unwrap();
        assert_eq!(p_pos.eval(-2.0), -1.0);
        assert_eq!(p_pos.eval(2.0), 0.0);
        assert!(p_pos.is_increasing_normal());
    }

    #[test]
    fn bijection_round_trips_exactly_on_dyadic_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let c = random_dyadic_normal(&mut rng, false);
            let p = bp_from_contraction(&c).unwrap();
            assert!(p.is_increasing_normal(), "{p:?}");
            let back = contraction_from_bp(&p).unwrap();
            assert!(back.approx_eq(&c, 1e-12), "{c:?} -> {p:?} -> {back:?}");

            let p0 = random_dyadic_normal(&mut rng, true);
            let c0 = contraction_from_bp(&p0).unwrap();
            assert!(c0.is_normal());
            let p_back = bp_from_contraction(&c0).unwrap();
            assert!(p_back.approx_eq(&p0, 1e-12));
        }
    }

    #[test]
    fn bijection_rejects_wrong_inputs() {
        assert!(bp_from_contraction(&PiecewiseLinear::affine(2.0, 0.0)).is_err());
        assert!(contraction_from_bp(&PiecewiseLinear::negation()).is_err());
    }

    #[test]
    fn bp_compose_units_and_annihilator() {
        let zero = PiecewiseLinear::zero_map();
        let id = PiecewiseLinear::identity();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_dyadic_normal(&mut rng, true);
        assert!(bp_compose(&zero, &p).unwrap().approx_eq(&p, 0.0));
        assert!(bp_compose(&p, &zero).unwrap().approx_eq(&p, 0.0));
        assert!(bp_compose(&id, &id).unwrap().approx_eq(&zero, 0.0));
    }

    #[test]
    fn bp_compose_corresponds_to_reversed_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let p1 = random_dyadic_normal(&mut rng, true);
            let p2 = random_dyadic_normal(&mut rng, true);
            let q = bp_compose(&p1, &p2).unwrap();
            assert!(q.is_increasing_normal(), "{q:?}");
            let c1 = contraction_from_bp(&p1).unwrap();
            let c2 = contraction_from_bp(&p2).unwrap();
            let expect = c2.compose(&c1);
            let got = contraction_from_bp(&q).unwrap();
            assert!(got.approx_eq(&expect, 1e-12), "{got:?} vs {expect:?}");
        }
    }

    #[test]
    fn dn_zero_is_base_tent_and_vanishes_at_origin() {
        let d0 = build_dn(0);
        assert!(d0.approx_eq(&NamedContraction::Tent { alpha: 2.0 }.build().unwrap(), 0.0));
        assert_eq!(d0.eval(3.0), -1.0);
        for n in 0..4 {
            let dn = build_dn(n);
            assert_eq!(dn.eval(0.0), 0.0, "n={n}");
            assert!(dn.is_normal(), "n={n}");
        }
    }

    #[test]
    fn dn_contracts_its_band() {
        for n in 0..3u32 {
            let dn = build_dn(n);
            let span = pow3(n as i32 + 1);
            let bound = pow3(-(n as i32));
            for i in 0..=2000 {
                let x = -span + (2.0 * span) * (i as f64) / 2000.0;
                assert!(
                    dn.eval(x).abs() <= bound + 1e-12,
                    "n={n} x={x} value={}",
                    dn.eval(x)
                );
            }
        }
    }

    #[test]
    fn apply_maps_values_pointwise() {
        let s = MeasureSpace::counting(3);
        let f = L2Fn::new(s, vec![-2.0, 0.5, 3.0]).unwrap();
        let abs = NamedContraction::Abs.build().unwrap();
        assert_eq!(abs.apply(&f).values(), &[2.0, 0.5, 3.0]);
        for c in named_normal_sample() {
            let g = c.apply(&f);
            for (a, b) in g.values().iter().zip(f.values()) {
                assert!(a.abs() <= b.abs() + 1e-15);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let tent = NamedContraction::Tent { alpha: 2.0 }.build().unwrap();
        let json = serde_json::to_string(&tent).unwrap();
        assert_eq!(json, r#"{"breakpoints":[-1.0,1.0],"slopes":[-1.0,1.0,-1.0],"anchor":0.0}"#);
        let back: PiecewiseLinear = serde_json::from_str(&json).unwrap();
        assert!(back.approx_eq(&tent, 0.0));

        let named: NamedContraction = serde_json::from_str(r#"{"kind":"tent","alpha":2.0}"#).unwrap();
        assert_eq!(named, NamedContraction::Tent { alpha: 2.0 });
    }
}
