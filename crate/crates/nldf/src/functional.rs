//! Extended-value convex energies: edge-sum (mixed) energies over a graph,
//! quadratic forms, and the shift operation that recenters an energy at a
//! function while preserving symmetry and the value 0 at 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{L2Fn, MeasureSpace};

/// A nonnegative extended real: a finite value `>= 0` or positive infinity.
/// Never NaN and never negative; addition saturates at infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal(0.0);
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);

    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() || v < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "extended-real values must be >= 0 or infinite, got {v}"
            )));
        }
        Ok(ExtReal(v))
    }

    /// Raw value; `f64::INFINITY` in the infinite case.
    pub fn get(&self) -> f64 {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// `Some(value)` when finite, `None` when infinite.
    pub fn finite(&self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    /// Multiplies by a nonnegative finite factor; infinity is absorbing
    /// except under factor 0, which yields 0.
    pub fn scale(self, k: f64) -> ExtReal {
        debug_assert!(k >= 0.0 && k.is_finite(), "scale factor must be finite and >= 0");
        if k == 0.0 {
            ExtReal::ZERO
        } else if self.is_finite() {
            ExtReal(self.0 * k)
        } else {
            ExtReal::INFINITY
        }
    }
}

impl std::ops::Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        ExtReal(self.0 + rhs.0)
    }
}

impl std::iter::Sum for ExtReal {
    fn sum<I: Iterator<Item = ExtReal>>(iter: I) -> ExtReal {
        iter.fold(ExtReal::ZERO, |a, b| a + b)
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_finite() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "inf")
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.finite().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Option::<f64>::deserialize(d)?;
        ExtReal::new(raw.unwrap_or(f64::INFINITY)).map_err(serde::de::Error::custom)
    }
}

/// Differentiability class of an edge function, used for solver dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// Continuously differentiable with locally Lipschitz gradient.
    Smooth,
    /// Finite everywhere but kinked (or with unbounded curvature at 0).
    NonsmoothFinite,
    /// Takes the value infinity outside a closed interval.
    Indicator,
}

/// Scalar edge functions: convex, even, zero at zero, with values in `[0, inf]`.
/// `capped_abs` is the deliberate exception (bounded, nonconvex); it exists for
/// negative controls and is rejected by the convex constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeFunction {
    /// `|t|^p` with `p >= 1`.
    Power { p: f64 },
    /// `t^2 / (2 delta)` for `|t| <= delta`, else `|t| - delta/2`.
    Huber { delta: f64 },
    /// `0` on `[-c, c]`, infinity outside (closed interval).
    IntervalIndicator { c: f64 },
    /// Even, piecewise-linear, convex: slopes on `[0, inf)` must be
    /// nonnegative and nondecreasing; breakpoints strictly increasing and positive.
    PwlConvex { breakpoints: Vec<f64>, slopes: Vec<f64> },
    /// `w t^2` with `w >= 0`.
    QuadraticWeighted { w: f64 },
    /// Recentered base: `(base(offset + t) + base(offset - t))/2 - base(offset)`.
    Shifted { base: Box<EdgeFunction>, offset: f64 },
    /// `min(|t|, cap)`: nonconvex, negative-control only.
    CappedAbs { cap: f64 },
}

impl EdgeFunction {
    /// Structural validation: parameter ranges and, for `shifted`, a convex
    /// base with a finite value at the offset. Does not reject `capped_abs`.
    pub fn validate_shape(&self) -> Result<()> {
        use EdgeFunction::*;
        match self {
            Power { p } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::InvalidParameter(format!("power exponent must be >= 1, got {p}")));
                }
            }
            Huber { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(Error::InvalidParameter(format!("huber delta must be > 0, got {delta}")));
                }
            }
            IntervalIndicator { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::InvalidParameter(format!("indicator width must be >= 0, got {c}")));
                }
            }
            PwlConvex { breakpoints, slopes } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidParameter(format!(
                        "{} breakpoints need {} slopes, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        slopes.len()
                    )));
                }
                if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0))
                    || breakpoints.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(Error::InvalidParameter(
                        "breakpoints must be finite, positive, strictly increasing".into(),
                    ));
                }
                if slopes.iter().any(|s| !(s.is_finite() && *s >= 0.0))
                    || slopes.windows(2).any(|w| w[0] > w[1])
                {
                    return Err(Error::NonConvexEdge(
                        "slopes must be finite, nonnegative, nondecreasing".into(),
                    ));
                }
            }
            QuadraticWeighted { w } => {
                if !(w.is_finite() && *w >= 0.0) {
                    return Err(Error::InvalidParameter(format!("quadratic weight must be >= 0, got {w}")));
                }
            }
            Shifted { base, offset } => {
                base.validate_shape()?;
                if !base.is_convex() {
                    return Err(Error::NonConvexEdge("cannot shift a nonconvex edge function".into()));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidParameter(format!("shift offset must be finite, got {offset}")));
                }
                if base.eval(*offset) == f64::INFINITY {
                    return Err(Error::ImproperCenter(format!(
                        "base edge is infinite at shift offset {offset}"
                    )));
                }
            }
            CappedAbs { cap } => {
                if !(cap.is_finite() && *cap > 0.0) {
                    return Err(Error::InvalidParameter(format!("cap must be > 0, got {cap}")));
                }
            }
        }
        Ok(())
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, EdgeFunction::CappedAbs { .. })
    }

    pub fn smoothness(&self) -> Smoothness {
        use EdgeFunction::*;
        match self {
            Power { p } if *p >= 2.0 => Smoothness::Smooth,
            Power { .. } => Smoothness::NonsmoothFinite,
            Huber { .. } | QuadraticWeighted { .. } => Smoothness::Smooth,
            IntervalIndicator { .. } => Smoothness::Indicator,
            PwlConvex { .. } | CappedAbs { .. } => Smoothness::NonsmoothFinite,
            Shifted { base, .. } => base.smoothness(),
        }
    }

    /// Half-width of the effective domain when it is a bounded interval
    /// `[-r, r]` (indicator edges, possibly shifted); `None` for finite edges.
    pub fn indicator_halfwidth(&self) -> Option<f64> {
        use EdgeFunction::*;
        match self {
            IntervalIndicator { c } => Some(*c),
            Shifted { base, offset } => base.indicator_halfwidth().map(|c| c - offset.abs()),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        use EdgeFunction::*;
        match self {
            Power { p } => {
                if *p == 1.0 {
                    t.abs()
                } else if *p == 2.0 {
                    t * t
                } else {
                    t.abs().powf(*p)
                }
            }
            Huber { delta } => {
                let a = t.abs();
                if a <= *delta {
                    t * t / (2.0 * delta)
                } else {
                    a - delta / 2.0
                }
            }
            IntervalIndicator { c } => {
                if t.abs() <= *c {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PwlConvex { breakpoints, slopes } => {
                let a = t.abs();
                let mut value = 0.0;
                let mut x = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    if a <= b {
                        return value + slopes[i] * (a - x);
                    }
                    value += slopes[i] * (b - x);
                    x = b;
                }
                value + slopes[breakpoints.len()] * (a - x)
            }
            QuadraticWeighted { w } => w * t * t,
            Shifted { base, offset } => {
                let plus = base.eval(offset + t);
                let minus = base.eval(offset - t);
                if plus == f64::INFINITY || minus == f64::INFINITY {
                    return f64::INFINITY;
                }
                let at_center = base.eval(*offset);
                let raw = 0.5 * (plus + minus) - at_center;
                // Convexity makes the true value nonnegative; absorb rounding.
                debug_assert!(raw >= -1e-9 * at_center.abs().max(1.0), "shifted edge went negative: {raw}");
                raw.max(0.0)
            }
            CappedAbs { cap } => t.abs().min(*cap),
        }
    }

    /// Derivative where the edge is finite and differentiable; for kinked
    /// points this returns the midpoint of the subdifferential interval.
    pub fn derivative(&self, t: f64) -> f64 {
        let (lo, hi) = self.subdiff(t);
        0.5 * (lo + hi)
    }

    /// Subdifferential interval `[lo, hi]` at `t`; only meaningful for edges
    /// that are finite at `t` (indicator interiors return `{0}`).
    pub fn subdiff(&self, t: f64) -> (f64, f64) {
        use EdgeFunction::*;
        match self {
            Power { p } => {
                if *p == 1.0 {
                    if t == 0.0 {
                        (-1.0, 1.0)
                    } else {
                        let s = t.signum();
                        (s, s)
                    }
                } else {
                    let d = p * t.abs().powf(p - 1.0) * t.signum();
                    let d = if t == 0.0 { 0.0 } else { d };
                    (d, d)
                }
            }
            Huber { delta } => {
                let d = if t.abs() <= *delta { t / delta } else { t.signum() };
                (d, d)
            }
            IntervalIndicator { c } => {
                // Interior of the domain; the normal cone at the boundary is
                // handled by projection-based solvers, not by this interval.
                let _ = c;
                (0.0, 0.0)
            }
            PwlConvex { breakpoints, slopes } => {
                let a = t.abs();
                let j = breakpoints.partition_point(|b| *b < a);
                let on_break = breakpoints.get(j).is_some_and(|b| *b == a);
                let (lo, hi) = if on_break { (slopes[j], slopes[j + 1]) } else { (slopes[j], slopes[j]) };
                if t > 0.0 {
                    (lo, hi)
                } else if t < 0.0 {
                    (-hi, -lo)
                } else {
                    (-slopes[0], slopes[0])
                }
            }
            QuadraticWeighted { w } => {
                let d = 2.0 * w * t;
                (d, d)
            }
            Shifted { base, offset } => {
                let (lo1, hi1) = base.subdiff(offset + t);
                let (lo2, hi2) = base.subdiff(offset - t);
                (0.5 * (lo1 - hi2), 0.5 * (hi1 - lo2))
            }
            CappedAbs { cap } => {
                let a = t.abs();
                if t == 0.0 {
                    (-1.0, 1.0)
                } else if a < *cap {
                    let s = t.signum();
                    (s, s)
                } else if a == *cap {
                    let s = t.signum();
                    (s.min(0.0), s.max(0.0))
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    /// The recentered edge `t -> (b(c+t) + b(c-t))/2 - b(c)`.
    pub fn shifted(&self, offset: f64) -> Result<EdgeFunction> {
        let edge = EdgeFunction::Shifted { base: Box::new(self.clone()), offset };
        edge.validate_shape()?;
        Ok(edge)
    }
}

/// One term of a mixed energy: the edge function applied to `f(from) - f(to)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTerm {
    pub from: usize,
    pub to: usize,
    #[serde(rename = "b")]
    pub edge: EdgeFunction,
}

/// Serialized form of an energy; the space travels separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnergySpec {
    Zero,
    Mixed { edges: Vec<EdgeTerm> },
    Quadratic { matrix: Vec<Vec<f64>> },
    Fshift { base: Box<EnergySpec>, center: Vec<f64> },
}

impl EnergySpec {
    /// Builds the runtime energy over `space`. Shape-validates edges but
    /// accepts nonconvex ones, so stored negative controls round-trip.
    pub fn build(&self, space: &MeasureSpace) -> Result<EnergyFunctional> {
        match self {
            EnergySpec::Zero => Ok(EnergyFunctional::zero(space.clone())),
            EnergySpec::Mixed { edges } => {
                EnergyFunctional::mixed_allowing_nonconvex(space.clone(), edges.clone())
            }
            EnergySpec::Quadratic { matrix } => {
                EnergyFunctional::quadratic_form(space.clone(), matrix.clone())
            }
            EnergySpec::Fshift { base, center } => {
                let base = base.build(space)?;
                let center = L2Fn::new(space.clone(), center.clone())?;
                base.f_shift(&center)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum EnergyKind {
    Zero,
    Mixed { edges: Vec<EdgeTerm> },
    Quadratic { matrix: Vec<Vec<f64>> },
    Shift { base: Box<EnergyFunctional>, center: L2Fn },
}

/// Borrowed view of an energy's structure, for solvers and reporting.
pub enum EnergyView<'a> {
    Zero,
    Mixed(&'a [EdgeTerm]),
    Quadratic(&'a [Vec<f64>]),
    Shift { base: &'a EnergyFunctional, center: &'a L2Fn },
}

/// A proper functional `L^2(X, m) -> [0, inf]`, zero at zero.
/// Convex for every constructor except `mixed_allowing_nonconvex`.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    space: MeasureSpace,
    kind: EnergyKind,
}

impl EnergyFunctional {
    pub fn zero(space: MeasureSpace) -> Self {
        Self { space, kind: EnergyKind::Zero }
    }

    /// Mixed energy `sum_e b_e(f(from_e) - f(to_e))` with convex edges.
    pub fn mixed(space: MeasureSpace, edges: Vec<EdgeTerm>) -> Result<Self> {
        for term in &edges {
            if !term.edge.is_convex() {
                return Err(Error::NonConvexEdge(format!(
                    "edge {} -> {} is not convex; use mixed_allowing_nonconvex for negative controls",
                    term.from, term.to
                )));
            }
        }
        Self::mixed_allowing_nonconvex(space, edges)
    }

    /// Mixed energy that admits `capped_abs` edges. Intended solely for
    /// negative-control instances; everything downstream that requires
    /// convexity checks `is_convex` and refuses.
    pub fn mixed_allowing_nonconvex(space: MeasureSpace, edges: Vec<EdgeTerm>) -> Result<Self> {
        for term in &edges {
            term.edge.validate_shape()?;
            if term.from >= space.len() || term.to >= space.len() {
                return Err(Error::InvalidFunction(format!(
                    "edge {} -> {} out of range for a {}-point space",
                    term.from,
                    term.to,
                    space.len()
                )));
            }
            if term.from == term.to {
                return Err(Error::InvalidFunction(format!("edge {} -> {} is a self-loop", term.from, term.to)));
            }
        }
        Ok(Self { space, kind: EnergyKind::Mixed { edges } })
    }

    /// Quadratic form `f^T A f` with `A` symmetric positive semidefinite.
    pub fn quadratic_form(space: MeasureSpace, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = space.len();
        if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMatrix(format!("matrix must be {n} x {n}")));
        }
        let scale = matrix
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !scale.is_finite() {
            return Err(Error::InvalidMatrix("matrix entries must be finite".into()));
        }
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (matrix[i][j] - matrix[j][i]).abs() > tol {
                    return Err(Error::InvalidMatrix(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        matrix[i][j], matrix[j][i]
                    )));
                }
            }
        }
        if !is_positive_semidefinite(&matrix, 1e-10 * scale.max(1.0)) {
            return Err(Error::InvalidMatrix("matrix is not positive semidefinite".into()));
        }
        Ok(Self { space, kind: EnergyKind::Quadratic { matrix } })
    }

    /// The shift `g -> (E(center+g) + E(center-g))/2 - E(center)`; requires a
    /// finite value at the center.
    pub fn f_shift(&self, center: &L2Fn) -> Result<Self> {
        self.space.check_same(center.space(), "f_shift")?;
        let at_center = self.eval(center)?;
        if !at_center.is_finite() {
            return Err(Error::ImproperCenter(
                "energy is infinite at the requested shift center".into(),
            ));
        }
        Ok(Self {
            space: self.space.clone(),
            kind: EnergyKind::Shift { base: Box::new(self.clone()), center: center.clone() },
        })
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    /// Short human-readable descriptor, e.g. for report headers.
    pub fn describe(&self) -> String {
        let n = self.space.len();
        match &self.kind {
            EnergyKind::Zero => format!("zero({n} nodes)"),
            EnergyKind::Mixed { edges } => format!("mixed({n} nodes, {} edges)", edges.len()),
            EnergyKind::Quadratic { .. } => format!("quadratic({n} nodes)"),
            EnergyKind::Shift { base, .. } => format!("shift of {}", base.describe()),
        }
    }

    pub fn view(&self) -> EnergyView<'_> {
        match &self.kind {
            EnergyKind::Zero => EnergyView::Zero,
            EnergyKind::Mixed { edges } => EnergyView::Mixed(edges),
            EnergyKind::Quadratic { matrix } => EnergyView::Quadratic(matrix),
            EnergyKind::Shift { base, center } => EnergyView::Shift { base, center },
        }
    }

    pub fn to_spec(&self) -> EnergySpec {
        match &self.kind {
            EnergyKind::Zero => EnergySpec::Zero,
            EnergyKind::Mixed { edges } => EnergySpec::Mixed { edges: edges.clone() },
            EnergyKind::Quadratic { matrix } => EnergySpec::Quadratic { matrix: matrix.clone() },
            EnergyKind::Shift { base, center } => EnergySpec::Fshift {
                base: Box::new(base.to_spec()),
                center: center.values().to_vec(),
            },
        }
    }

    pub fn is_convex(&self) -> bool {
        match &self.kind {
            EnergyKind::Zero | EnergyKind::Quadratic { .. } => true,
            EnergyKind::Mixed { edges } => edges.iter().all(|t| t.edge.is_convex()),
            EnergyKind::Shift { base, .. } => base.is_convex(),
        }
    }

    /// Most demanding smoothness class among the constituent terms.
    pub fn smoothness(&self) -> Smoothness {
        match &self.kind {
            EnergyKind::Zero | EnergyKind::Quadratic { .. } => Smoothness::Smooth,
            EnergyKind::Mixed { edges } => edges
                .iter()
                .map(|t| t.edge.smoothness())
                .fold(Smoothness::Smooth, |acc, s| match (acc, s) {
                    (Smoothness::Indicator, _) | (_, Smoothness::Indicator) => Smoothness::Indicator,
                    (Smoothness::NonsmoothFinite, _) | (_, Smoothness::NonsmoothFinite) => {
                        Smoothness::NonsmoothFinite
                    }
                    _ => Smoothness::Smooth,
                }),
            EnergyKind::Shift { base, .. } => base.smoothness(),
        }
    }

    /// Whether `E(c f) = c^p E(f)` for all `c > 0` holds structurally.
    pub fn is_p_homogeneous(&self, p: f64) -> bool {
        match &self.kind {
            EnergyKind::Zero => true,
            EnergyKind::Quadratic { .. } => p == 2.0,
            EnergyKind::Mixed { edges } => edges.iter().all(|t| match &t.edge {
                EdgeFunction::Power { p: q } => *q == p,
                EdgeFunction::QuadraticWeighted { .. } => p == 2.0,
                EdgeFunction::IntervalIndicator { c } => *c == 0.0,
                _ => false,
            }),
            EnergyKind::Shift { .. } => false,
        }
    }

    pub fn eval(&self, f: &L2Fn) -> Result<ExtReal> {
        self.space.check_same(f.space(), "eval")?;
        let v = self.eval_values(f.values());
        if v.is_nan() || v < 0.0 {
            return Err(Error::NegativeEnergy(v));
        }
        Ok(ExtReal(v))
    }

    /// Evaluation on raw values (space agreement is the caller's contract).
    /// Shift terms clamp rounding-level negatives to zero; genuinely negative
    /// values (possible only with nonconvex bases) surface through `eval`.
    pub(crate) fn eval_values(&self, values: &[f64]) -> f64 {
        match &self.kind {
            EnergyKind::Zero => 0.0,
            EnergyKind::Mixed { edges } => {
                let mut acc = 0.0;
                for term in edges {
                    acc += term.edge.eval(values[term.from] - values[term.to]);
                    if acc == f64::INFINITY {
                        return f64::INFINITY;
                    }
                }
                acc
            }
            EnergyKind::Quadratic { matrix } => {
                let mut acc = 0.0;
                for (row, &fi) in matrix.iter().zip(values) {
                    let mut dot = 0.0;
                    for (a, &fj) in row.iter().zip(values) {
                        dot += a * fj;
                    }
                    acc += fi * dot;
                }
                // PSD validation bounds the true value below by 0.
                acc.max(0.0)
            }
            EnergyKind::Shift { base, center } => {
                let c = center.values();
                let plus: Vec<f64> = c.iter().zip(values).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = c.iter().zip(values).map(|(a, b)| a - b).collect();
                let ep = base.eval_values(&plus);
                let em = base.eval_values(&minus);
                if ep == f64::INFINITY || em == f64::INFINITY {
                    return f64::INFINITY;
                }
                let ec = base.eval_values(c);
                let raw = 0.5 * (ep + em) - ec;
                let slop = 1e-9 * ec.abs().max(1.0);
                if raw < -slop {
                    // Genuine negativity: nonconvex base. Reported by eval.
                    return raw;
                }
                raw.max(0.0)
            }
        }
    }

    /// Gradient of a smooth energy at `values` (kinked edges contribute their
    /// subdifferential midpoint, so call this only on `Smooth` energies when
    /// exactness matters).
    pub(crate) fn gradient(&self, values: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; values.len()];
        self.add_gradient(values, 1.0, &mut grad);
        grad
    }

    fn add_gradient(&self, values: &[f64], weight: f64, grad: &mut [f64]) {
        match &self.kind {
            EnergyKind::Zero => {}
            EnergyKind::Mixed { edges } => {
                for term in edges {
                    let d = term.edge.derivative(values[term.from] - values[term.to]);
                    grad[term.from] += weight * d;
                    grad[term.to] -= weight * d;
                }
            }
            EnergyKind::Quadratic { matrix } => {
                for (i, row) in matrix.iter().enumerate() {
                    let mut dot = 0.0;
                    for (a, &fj) in row.iter().zip(values) {
                        dot += a * fj;
                    }
                    grad[i] += weight * 2.0 * dot;
                }
            }
            EnergyKind::Shift { base, center } => {
                let c = center.values();
                let plus: Vec<f64> = c.iter().zip(values).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = c.iter().zip(values).map(|(a, b)| a - b).collect();
                base.add_gradient(&plus, 0.5 * weight, grad);
                base.add_gradient(&minus, -0.5 * weight, grad);
            }
        }
    }
}

/// For a mixed energy, the shift expressed edge-by-edge: each edge is
/// recentered at the corresponding difference of `center`. Zero and quadratic
/// energies are shift-invariant; nested shifts are not expanded.
pub fn explicit_shift(energy: &EnergyFunctional, center: &L2Fn) -> Result<EnergyFunctional> {
    energy.space().check_same(center.space(), "explicit_shift")?;
    match energy.view() {
        EnergyView::Zero => Ok(EnergyFunctional::zero(energy.space().clone())),
        EnergyView::Quadratic(matrix) => {
            EnergyFunctional::quadratic_form(energy.space().clone(), matrix.to_vec())
        }
        EnergyView::Mixed(edges) => {
            let shifted: Result<Vec<EdgeTerm>> = edges
                .iter()
                .map(|term| {
                    let offset = center.values()[term.from] - center.values()[term.to];
                    Ok(EdgeTerm {
                        from: term.from,
                        to: term.to,
                        edge: term.edge.shifted(offset)?,
                    })
                })
                .collect();
            EnergyFunctional::mixed(energy.space().clone(), shifted?)
        }
        EnergyView::Shift { .. } => Err(Error::UnsupportedInstance(
            "explicit_shift applies to zero, mixed, and quadratic energies".into(),
        )),
    }
}

/// LDL^T factorization test; for a symmetric matrix this accepts exactly the
/// positive semidefinite ones up to `tol` (a zero pivot forces a zero column).
fn is_positive_semidefinite(matrix: &[Vec<f64>], tol: f64) -> bool {
    let n = matrix.len();
    let mut l = vec![vec![0.0f64; n]; n];
    let mut d = vec![0.0f64; n];
    for j in 0..n {
        let mut dj = matrix[j][j];
        for k in 0..j {
            dj -= l[j][k] * l[j][k] * d[k];
        }
        if dj < -tol {
            return false;
        }
        d[j] = dj.max(0.0);
        for i in (j + 1)..n {
            let mut v = matrix[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k] * d[k];
            }
            if d[j] <= tol {
                if v.abs() > tol.max(1e-8 * matrix[i][j].abs()) {
                    return false;
                }
                l[i][j] = 0.0;
            } else {
                l[i][j] = v / d[j];
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_nodes() -> MeasureSpace {
        MeasureSpace::counting(2)
    }

    fn fnv(space: &MeasureSpace, values: &[f64]) -> L2Fn {
        L2Fn::new(space.clone(), values.to_vec()).unwrap()
    }

    fn power_edge(p: f64) -> EdgeTerm {
        EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p } }
    }

    fn random_fn(rng: &mut ChaCha8Rng, space: &MeasureSpace) -> L2Fn {
        let values = (0..space.len()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        L2Fn::new(space.clone(), values).unwrap()
    }

    #[test]
    fn ext_real_arithmetic_and_order() {
        let two = ExtReal::new(2.0).unwrap();
        assert_eq!((two + ExtReal::INFINITY).get(), f64::INFINITY);
        assert!(ExtReal::ZERO < two && two < ExtReal::INFINITY);
        assert!(ExtReal::INFINITY <= ExtReal::INFINITY);
        assert!(ExtReal::new(-0.5).is_err());
        assert!(ExtReal::new(f64::NAN).is_err());
        assert_eq!(serde_json::to_string(&ExtReal::INFINITY).unwrap(), "null");
        assert_eq!(serde_json::to_string(&two).unwrap(), "2.0");
    }

    #[test]
    fn edge_closed_forms() {
        assert_eq!(EdgeFunction::Power { p: 2.0 }.eval(-3.0), 9.0);
        assert_eq!(EdgeFunction::Power { p: 1.0 }.eval(-3.0), 3.0);
        let huber = EdgeFunction::Huber { delta: 1.0 };
        assert_eq!(huber.eval(0.5), 0.125);
        assert_eq!(huber.eval(-2.0), 1.5);
        let ind = EdgeFunction::IntervalIndicator { c: 1.0 };
        assert_eq!(ind.eval(1.0), 0.0);
        assert_eq!(ind.eval(1.0 + 1e-12), f64::INFINITY);
        let pwl = EdgeFunction::PwlConvex { breakpoints: vec![1.0, 2.0], slopes: vec![0.0, 1.0, 3.0] };
        assert_eq!(pwl.eval(0.5), 0.0);
        assert_eq!(pwl.eval(-1.5), 0.5);
        assert_eq!(pwl.eval(3.0), 4.0);
        assert_eq!(EdgeFunction::QuadraticWeighted { w: 0.5 }.eval(2.0), 2.0);
        assert_eq!(EdgeFunction::CappedAbs { cap: 1.0 }.eval(-3.0), 1.0);
    }

    #[test]
    fn edge_validation() {
        assert!(EdgeFunction::Power { p: 0.5 }.validate_shape().is_err());
        assert!(EdgeFunction::Huber { delta: 0.0 }.validate_shape().is_err());
        assert!(EdgeFunction::IntervalIndicator { c: -1.0 }.validate_shape().is_err());
        let bad_slopes =
            EdgeFunction::PwlConvex { breakpoints: vec![1.0], slopes: vec![1.0, 0.5] };
        assert!(matches!(bad_slopes.validate_shape(), Err(Error::NonConvexEdge(_))));
        let bad_breaks =
            EdgeFunction::PwlConvex { breakpoints: vec![-1.0], slopes: vec![0.0, 1.0] };
        assert!(bad_breaks.validate_shape().is_err());
        assert!(EdgeFunction::CappedAbs { cap: 1.0 }.validate_shape().is_ok());
        let shifted_nonconvex = EdgeFunction::CappedAbs { cap: 1.0 }.shifted(0.5);
        assert!(matches!(shifted_nonconvex, Err(Error::NonConvexEdge(_))));
        let shifted_outside = EdgeFunction::IntervalIndicator { c: 1.0 }.shifted(2.0);
        assert!(matches!(shifted_outside, Err(Error::ImproperCenter(_))));
    }

    #[test]
    fn shifted_edge_closed_forms() {
        let abs = EdgeFunction::Power { p: 1.0 };
        let s0 = abs.shifted(0.0).unwrap();
        let s1 = abs.shifted(1.0).unwrap();
        assert_eq!(s0.eval(2.0), 2.0);
        assert_eq!(s1.eval(2.0), 1.0);
        assert_eq!(s1.eval(0.5), 0.0);
        let sq = EdgeFunction::Power { p: 2.0 };
        for c in [-2.0, 0.0, 3.5] {
            let shifted = sq.shifted(c).unwrap();
            for t in [-2.5, -1.0, 0.0, 0.75, 4.0] {
                assert!((shifted.eval(t) - t * t).abs() <= 1e-12);
            }
        }
        let ind = EdgeFunction::IntervalIndicator { c: 2.0 }.shifted(1.5).unwrap();
        assert_eq!(ind.indicator_halfwidth(), Some(0.5));
        assert_eq!(ind.eval(0.5), 0.0);
        assert_eq!(ind.eval(0.75), f64::INFINITY);
    }

    #[test]
    fn subdiff_intervals() {
        assert_eq!(EdgeFunction::Power { p: 1.0 }.subdiff(0.0), (-1.0, 1.0));
        assert_eq!(EdgeFunction::Power { p: 2.0 }.subdiff(3.0), (6.0, 6.0));
        let pwl = EdgeFunction::PwlConvex { breakpoints: vec![1.0], slopes: vec![0.5, 2.0] };
        assert_eq!(pwl.subdiff(1.0), (0.5, 2.0));
        assert_eq!(pwl.subdiff(-1.0), (-2.0, -0.5));
        assert_eq!(pwl.subdiff(0.0), (-0.5, 0.5));
        assert_eq!(EdgeFunction::Huber { delta: 2.0 }.subdiff(1.0), (0.5, 0.5));
    }

    #[test]
    fn mixed_eval_examples() {
        let s = two_nodes();
        let e = EnergyFunctional::mixed(s.clone(), vec![power_edge(2.0)]).unwrap();
        assert_eq!(e.eval(&fnv(&s, &[1.0, 0.0])).unwrap().get(), 1.0);
        assert_eq!(e.eval(&L2Fn::zero(&s)).unwrap(), ExtReal::ZERO);

        let ind = EnergyFunctional::mixed(
            s.clone(),
            vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::IntervalIndicator { c: 1.0 } }],
        )
        .unwrap();
        assert_eq!(ind.eval(&fnv(&s, &[3.0, 0.0])).unwrap(), ExtReal::INFINITY);
        assert_eq!(ind.eval(&fnv(&s, &[1.0, 0.0])).unwrap(), ExtReal::ZERO);

        let path = MeasureSpace::counting(3);
        let e3 = EnergyFunctional::mixed(
            path.clone(),
            vec![power_edge(2.0), EdgeTerm { from: 1, to: 2, edge: EdgeFunction::Power { p: 2.0 } }],
        )
        .unwrap();
        assert_eq!(e3.eval(&fnv(&path, &[1.0, 0.0, 0.0])).unwrap().get(), 1.0);

        let empty = EnergyFunctional::mixed(s.clone(), vec![]).unwrap();
        assert_eq!(empty.eval(&fnv(&s, &[5.0, -7.0])).unwrap(), ExtReal::ZERO);
    }

    #[test]
    fn quadratic_form_matches_edge_energy() {
        let s = two_nodes();
        let lap = EnergyFunctional::quadratic_form(s.clone(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let f = fnv(&s, &[1.0, -1.0]);
        assert_eq!(lap.eval(&f).unwrap().get(), 4.0);

        let edge = EnergyFunctional::mixed(s.clone(), vec![power_edge(2.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = random_fn(&mut rng, &s);
            let a = lap.eval(&g).unwrap().get();
            let b = edge.eval(&g).unwrap().get();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn quadratic_form_validation() {
        let s = two_nodes();
        assert!(matches!(
            EnergyFunctional::quadratic_form(s.clone(), vec![vec![1.0, 0.5], vec![0.0, 1.0]]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(matches!(
            EnergyFunctional::quadratic_form(s.clone(), vec![vec![1.0, -2.0], vec![-2.0, 1.0]]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(matches!(
            EnergyFunctional::quadratic_form(s.clone(), vec![vec![1.0]]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(EnergyFunctional::quadratic_form(s, vec![vec![0.0, 0.0], vec![0.0, 0.0]]).is_ok());
    }

    #[test]
    fn parallelogram_makes_quadratic_shift_invariant() {
        let s = MeasureSpace::counting(3);
        let m = vec![
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let e = EnergyFunctional::quadratic_form(s.clone(), m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let f = random_fn(&mut rng, &s);
            let g = random_fn(&mut rng, &s);
            let shifted = e.f_shift(&f).unwrap();
            let a = shifted.eval(&g).unwrap().get();
            let b = e.eval(&g).unwrap().get();
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn quartic_shift_value() {
        let s = two_nodes();
        let e = EnergyFunctional::mixed(s.clone(), vec![power_edge(4.0)]).unwrap();
        let f = fnv(&s, &[1.0, 0.0]);
        let g = fnv(&s, &[1.0, 0.0]);
        let shifted = e.f_shift(&f).unwrap();
        assert!((shifted.eval(&g).unwrap().get() - 7.0).abs() <= 1e-12);
        assert_eq!(shifted.eval(&L2Fn::zero(&s)).unwrap(), ExtReal::ZERO);
        let neg = g.scale(-1.0);
        assert_eq!(shifted.eval(&neg).unwrap().get(), shifted.eval(&g).unwrap().get());
    }

    #[test]
    fn f_shift_requires_finite_center() {
        let s = two_nodes();
        let ind = EnergyFunctional::mixed(
            s.clone(),
            vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::IntervalIndicator { c: 1.0 } }],
        )
        .unwrap();
        let far = fnv(&s, &[3.0, 0.0]);
        assert!(matches!(ind.f_shift(&far), Err(Error::ImproperCenter(_))));
    }

    #[test]
    fn shift_agrees_with_explicit_edge_shift() {
        let s = MeasureSpace::counting(4);
        let edges = vec![
            EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p: 3.0 } },
            EdgeTerm { from: 1, to: 2, edge: EdgeFunction::Huber { delta: 0.7 } },
            EdgeTerm { from: 2, to: 3, edge: EdgeFunction::PwlConvex { breakpoints: vec![0.5], slopes: vec![0.25, 2.0] } },
            EdgeTerm { from: 3, to: 0, edge: EdgeFunction::QuadraticWeighted { w: 1.3 } },
        ];
        let e = EnergyFunctional::mixed(s.clone(), edges).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let f = random_fn(&mut rng, &s);
            let g = random_fn(&mut rng, &s);
            let via_shift = e.f_shift(&f).unwrap().eval(&g).unwrap().get();
            let via_edges = explicit_shift(&e, &f).unwrap().eval(&g).unwrap().get();
            assert!(
                (via_shift - via_edges).abs() <= 1e-10 * (1.0 + via_edges.abs()),
                "{via_shift} vs {via_edges}"
            );
        }
    }

    #[test]
    fn nested_shift_identity() {
        let s = MeasureSpace::counting(3);
        let edges = vec![
            EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p: 4.0 } },
            EdgeTerm { from: 1, to: 2, edge: EdgeFunction::Power { p: 2.0 } },
        ];
        let e = EnergyFunctional::mixed(s.clone(), edges).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let f = random_fn(&mut rng, &s);
            let g = random_fn(&mut rng, &s);
            let h = random_fn(&mut rng, &s);
            let nested = e.f_shift(&f).unwrap().f_shift(&g).unwrap().eval(&h).unwrap().get();
            let plus = e.f_shift(&(&f + &g)).unwrap().eval(&h).unwrap().get();
            let minus = e.f_shift(&(&f - &g)).unwrap().eval(&h).unwrap().get();
            let direct = 0.5 * (plus + minus);
            assert!(
                (nested - direct).abs() <= 1e-10 * (1.0 + direct.abs()),
                "{nested} vs {direct}"
            );
        }
    }

    #[test]
    fn power_energies_are_homogeneous() {
        let s = two_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for p in [1.0, 1.5, 2.0, 3.0] {
            let e = EnergyFunctional::mixed(s.clone(), vec![power_edge(p)]).unwrap();
            assert!(e.is_p_homogeneous(p));
            assert!(!e.is_p_homogeneous(p + 0.5));
            for _ in 0..50 {
                let f = random_fn(&mut rng, &s);
                let c: f64 = rng.gen_range(0.1..4.0);
                let lhs = e.eval(&f.scale(c)).unwrap().get();
                let rhs = c.powf(p) * e.eval(&f).unwrap().get();
                assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn midpoint_convexity_of_constructors() {
        let s = MeasureSpace::counting(3);
        let energies = vec![
            EnergyFunctional::zero(s.clone()),
            EnergyFunctional::mixed(
                s.clone(),
                vec![
                    EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p: 1.0 } },
                    EdgeTerm { from: 1, to: 2, edge: EdgeFunction::Huber { delta: 0.5 } },
                    EdgeTerm { from: 0, to: 2, edge: EdgeFunction::IntervalIndicator { c: 2.0 } },
                ],
            )
            .unwrap(),
            EnergyFunctional::quadratic_form(
                s.clone(),
                vec![vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]],
            )
            .unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for e in &energies {
            for _ in 0..200 {
                let f = random_fn(&mut rng, &s);
                let g = random_fn(&mut rng, &s);
                let mid = e.eval(&(&f + &g).scale(0.5)).unwrap();
                let avg = 0.5 * (e.eval(&f).unwrap().get() + e.eval(&g).unwrap().get());
                assert!(mid.get() <= avg + 1e-10);
            }
        }
    }

    #[test]
    fn capped_abs_breaks_midpoint_convexity() {
        let s = two_nodes();
        let cap = EdgeTerm { from: 0, to: 1, edge: EdgeFunction::CappedAbs { cap: 1.0 } };
        assert!(matches!(
            EnergyFunctional::mixed(s.clone(), vec![cap.clone()]),
            Err(Error::NonConvexEdge(_))
        ));
        let e = EnergyFunctional::mixed_allowing_nonconvex(s.clone(), vec![cap]).unwrap();
        assert!(!e.is_convex());
        let f = fnv(&s, &[0.0, 0.0]);
        let g = fnv(&s, &[4.0, 0.0]);
        let mid = e.eval(&(&f + &g).scale(0.5)).unwrap().get();
        let avg = 0.5 * (e.eval(&f).unwrap().get() + e.eval(&g).unwrap().get());
        assert!(mid > avg + 0.4, "midpoint {mid} vs average {avg}");
    }

    #[test]
    fn energy_spec_round_trip() {
        let s = two_nodes();
        let e = EnergyFunctional::mixed(s.clone(), vec![power_edge(2.0)]).unwrap();
        let spec = e.to_spec();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"type":"mixed","edges":[{"from":0,"to":1,"b":{"kind":"power","p":2.0}}]}"#);
        let back: EnergySpec = serde_json::from_str(&json).unwrap();
        let rebuilt = back.build(&s).unwrap();
        let f = fnv(&s, &[1.0, 0.0]);
        assert_eq!(rebuilt.eval(&f).unwrap().get(), 1.0);

        let quad: EnergySpec = serde_json::from_str(r#"{"type":"quadratic","matrix":[[1.0,-1.0],[-1.0,1.0]]}"#).unwrap();
        assert_eq!(quad.build(&s).unwrap().eval(&fnv(&s, &[1.0, -1.0])).unwrap().get(), 4.0);

        let shift_spec = e.f_shift(&f).unwrap().to_spec();
        let json2 = serde_json::to_string(&shift_spec).unwrap();
        let back2: EnergySpec = serde_json::from_str(&json2).unwrap();
        let rebuilt2 = back2.build(&s).unwrap();
        let g = fnv(&s, &[0.5, -0.25]);
        assert_eq!(
            rebuilt2.eval(&g).unwrap().get(),
            e.f_shift(&f).unwrap().eval(&g).unwrap().get()
        );
    }

    #[test]
    fn smoothness_classification() {
        let s = two_nodes();
        let smooth = EnergyFunctional::mixed(s.clone(), vec![power_edge(2.0)]).unwrap();
        assert_eq!(smooth.smoothness(), Smoothness::Smooth);
        let kinked = EnergyFunctional::mixed(s.clone(), vec![power_edge(1.0), power_edge(2.0)]).unwrap();
        assert_eq!(kinked.smoothness(), Smoothness::NonsmoothFinite);
        let ind = EnergyFunctional::mixed(
            s.clone(),
            vec![power_edge(1.0), EdgeTerm { from: 0, to: 1, edge: EdgeFunction::IntervalIndicator { c: 1.0 } }],
        )
        .unwrap();
        assert_eq!(ind.smoothness(), Smoothness::Indicator);
        assert_eq!(EnergyFunctional::zero(s).smoothness(), Smoothness::Smooth);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = MeasureSpace::counting(3);
        let e = EnergyFunctional::mixed(
            s.clone(),
            vec![
                EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p: 2.0 } },
                EdgeTerm { from: 1, to: 2, edge: EdgeFunction::Huber { delta: 0.8 } },
            ],
        )
        .unwrap();
        let q = EnergyFunctional::quadratic_form(
            s.clone(),
            vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for energy in [&e, &q] {
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let grad = energy.gradient(&x);
                let h = 1e-6;
                for i in 0..3 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (energy.eval_values(&xp) - energy.eval_values(&xm)) / (2.0 * h);
                    assert!((grad[i] - fd).abs() <= 1e-5, "{} vs {fd}", grad[i]);
                }
            }
        }
    }
}
