//! Inequality chains that assemble the full contraction property for the
//! zigzag maps out of simpler one-sided comparisons.
//!
//! Each chain reports every intermediate inequality as its own residual plus
//! the final target `E(f + Cg) + E(f - Cg) <= E(f+g) + E(f-g)`. The step
//! inequalities telescope: their slacks sum exactly to the target slack
//! (recorded as `telescoping_gap` when all terms are finite), so a failing
//! target always localizes to a failing step.

use serde::{Deserialize, Serialize};

use super::{compatibility_residual, CheckReport, Report, Residual, Tolerance};
use crate::contraction::{build_dn, NamedContraction};
use crate::error::{Error, Result};
use crate::functional::{EnergyFunctional, ExtReal};
use crate::space::L2Fn;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainKind {
    /// Single threshold `x` (any sign; negative `x` is handled by the
    /// mirror substitution `g -> -g`, `x -> -x`, which leaves the target
    /// unchanged).
    Case1 { x: f64 },
    /// Same-sign threshold pair `x1 < x2` (mirrored to `0 <= x1 < x2`).
    Case2 { x1: f64, x2: f64 },
    /// Straddling threshold pair `x1 < 0 < x2`.
    Case3 { x1: f64, x2: f64 },
    /// Midpoint convexity via the composed-tent ladder `D_0 .. D_n`.
    ConvexityViaDn { n: u32 },
}

impl ChainKind {
    pub fn label(&self) -> String {
        match self {
            ChainKind::Case1 { x } => format!("case1(x={x})"),
            ChainKind::Case2 { x1, x2 } => format!("case2(x1={x1}, x2={x2})"),
            ChainKind::Case3 { x1, x2 } => format!("case3(x1={x1}, x2={x2})"),
            ChainKind::ConvexityViaDn { n } => format!("convexity_via_dn(n={n})"),
        }
    }
}

/// Sum of `E(a) + E(b)`.
fn pair(e: &EnergyFunctional, a: &L2Fn, b: &L2Fn) -> Result<ExtReal> {
    Ok(e.eval(a)? + e.eval(b)?)
}

/// Residual of `E(lo) <= (E(a) + E(b)) / 2`, the midpoint comparison for
/// `lo = (a + b) / 2`.
fn midpoint_residual(
    e: &EnergyFunctional,
    lo: &L2Fn,
    a: &L2Fn,
    b: &L2Fn,
    tol: Tolerance,
) -> Result<Residual> {
    let rhs = (e.eval(a)? + e.eval(b)?).scale(0.5);
    Ok(Residual::from_pair(e.eval(lo)?, rhs, tol))
}

/// Evaluates the chain of inequalities for `kind` on `(f, g)` and returns a
/// report with one entry per step, the finiteness side conditions, and the
/// final target.
pub fn lemma_chain_check(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    kind: ChainKind,
    tol: Tolerance,
) -> Result<Report> {
    let mut report = match kind {
        ChainKind::Case1 { x } => case1(e, f, g, x, tol)?,
        ChainKind::Case2 { x1, x2 } => case2(e, f, g, x1, x2, tol)?,
        ChainKind::Case3 { x1, x2 } => case3(e, f, g, x1, x2, tol)?,
        ChainKind::ConvexityViaDn { n } => convexity_via_dn(e, f, g, n, tol)?,
    };
    report.instance = format!("{} on {}", kind.label(), e.describe());
    Ok(report)
}

/// Collects step residuals and computes the telescoping gap against the
/// target from the named subset of steps.
struct ChainBuilder {
    checks: Vec<CheckReport>,
    telescoping: Vec<Option<f64>>,
}

impl ChainBuilder {
    fn new() -> Self {
        ChainBuilder { checks: Vec::new(), telescoping: Vec::new() }
    }

    fn step(&mut self, name: &str, r: Residual) {
        self.telescoping.push(r.slack);
        self.checks.push(CheckReport::single(name, r));
    }

    fn side(&mut self, name: &str, r: Residual) {
        self.checks.push(CheckReport::single(name, r));
    }

    fn finish(self, target_name: &str, target: Residual, tol: Tolerance) -> Report {
        let gap = target.slack.and_then(|t| {
            self.telescoping
                .iter()
                .copied()
                .sum::<Option<f64>>()
                .map(|s| (s - t).abs())
        });
        let mut checks = self.checks;
        checks.push(CheckReport::single(target_name, target));
        let mut report = Report::from_checks("", 0, tol, checks);
        report.telescoping_gap = gap;
        report
    }
}

/// Chain for the single-threshold zigzag: three telescoping steps plus the
/// positive-part finiteness conditions.
fn case1(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    x: f64,
    tol: Tolerance,
) -> Result<Report> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("threshold must be finite, got {x}")));
    }
    // Mirror x < 0 onto x > 0; the target pair is invariant under g -> -g
    // combined with C -> -C, and the mirrored zigzag is the negation of the
    // original one.
    let (g, x) = if x < 0.0 { (g.scale(-1.0), -x) } else { (g.clone(), x) };
    let g = &g;

    let phi = NamedContraction::Phi { x }.build()?.apply(g);
    let sigma = NamedContraction::Sigma { x }.build()?.apply(g);
    let gpos = g.map(|t| t.max(0.0));
    let gabs = g.map(f64::abs);

    let fp = |h: &L2Fn| f + h;
    let fm = |h: &L2Fn| f - h;

    let mut b = ChainBuilder::new();
    b.step(
        "upper_rearrange",
        Residual::from_pair(
            pair(e, &fp(&phi), &fp(&gpos))?,
            pair(e, &fp(g), &fp(&sigma))?,
            tol,
        ),
    );
    b.step(
        "lower_rearrange",
        Residual::from_pair(
            pair(e, &fm(&phi), &fm(&gpos))?,
            pair(e, &fm(g), &fm(&sigma))?,
            tol,
        ),
    );
    b.step(
        "sigma_pair",
        Residual::from_pair(
            pair(e, &fp(&sigma), &fm(&sigma))?,
            pair(e, &fp(&gpos), &fm(&gpos))?,
            tol,
        ),
    );
    b.side("pos_mean_upper", midpoint_residual(e, &fp(&gpos), &fp(g), &fp(&gabs), tol)?);
    b.side("pos_mean_lower", midpoint_residual(e, &fm(&gpos), &fm(g), &fm(&gabs), tol)?);
    b.side(
        "pos_pair",
        Residual::from_pair(
            pair(e, &fp(&gpos), &fm(&gpos))?,
            pair(e, &fp(g), &fm(g))?,
            tol,
        ),
    );
    let target = Residual::from_pair(
        pair(e, &fp(&phi), &fm(&phi))?,
        pair(e, &fp(g), &fm(g))?,
        tol,
    );
    Ok(b.finish("target", target, tol))
}

/// Chain for the same-sign threshold pair: five telescoping steps plus the
/// shifted-positive-part finiteness conditions.
fn case2(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    x1: f64,
    x2: f64,
    tol: Tolerance,
) -> Result<Report> {
    if !(x1.is_finite() && x2.is_finite() && x1 < x2) {
        return Err(Error::InvalidParameter(format!(
            "need finite thresholds x1 < x2, got {x1} and {x2}"
        )));
    }
    if x1 < 0.0 && x2 > 0.0 {
        return Err(Error::InvalidParameter(
            "thresholds straddling 0 belong to the case3 chain".into(),
        ));
    }
    // Mirror a nonpositive pair onto 0 <= x1 < x2.
    let (g, x1, x2) = if x2 <= 0.0 {
        (g.scale(-1.0), -x2, -x1)
    } else {
        (g.clone(), x1, x2)
    };
    let g = &g;

    let sigma = NamedContraction::Case2Sigma { x1, x2 }.build()?.apply(g);
    let psi = NamedContraction::Case2Psi { x1, x2 }.build()?.apply(g);
    let phi = NamedContraction::PhiPair { x1, x2 }.build()?.apply(g);
    let gpos = g.map(|t| t.max(0.0));
    let gshift = g.map(|t| (t - x1).max(0.0));
    let phi1_gpos = NamedContraction::Phi { x: x1 }.build()?.apply(&gpos);

    let fp = |h: &L2Fn| f + h;
    let fm = |h: &L2Fn| f - h;

    let mut b = ChainBuilder::new();
    b.step(
        "upper_psi",
        Residual::from_pair(
            pair(e, &fp(&psi), &fp(&gshift))?,
            pair(e, &fp(&gpos), &fp(&sigma))?,
            tol,
        ),
    );
    b.step(
        "lower_psi",
        Residual::from_pair(
            pair(e, &fm(&psi), &fm(&gshift))?,
            pair(e, &fm(&gpos), &fm(&sigma))?,
            tol,
        ),
    );
    b.step(
        "sigma_pair",
        Residual::from_pair(
            pair(e, &fm(&sigma), &fp(&sigma))?,
            pair(e, &fp(&gshift), &fm(&gshift))?,
            tol,
        ),
    );
    b.step(
        "upper_zigzag",
        Residual::from_pair(
            pair(e, &fp(&gpos), &fp(&phi))?,
            pair(e, &fp(&psi), &fp(g))?,
            tol,
        ),
    );
    b.step(
        "lower_zigzag",
        Residual::from_pair(
            pair(e, &fm(&gpos), &fm(&phi))?,
            pair(e, &fm(&psi), &fm(g))?,
            tol,
        ),
    );
    b.side(
        "pos_pair",
        Residual::from_pair(
            pair(e, &fp(&gpos), &fm(&gpos))?,
            pair(e, &fp(g), &fm(g))?,
            tol,
        ),
    );
    // (g - x1)_+ = (g_+ - phi_{x1}(g_+)) / 2, so f + gshift is the midpoint
    // of f + g_+ and f - phi_{x1}(g_+).
    b.side(
        "shift_mean_upper",
        midpoint_residual(e, &fp(&gshift), &fp(&gpos), &fm(&phi1_gpos), tol)?,
    );
    b.side(
        "shift_mean_lower",
        midpoint_residual(e, &fm(&gshift), &fm(&gpos), &fp(&phi1_gpos), tol)?,
    );
    b.side(
        "shift_pair",
        Residual::from_pair(
            pair(e, &fp(&gshift), &fm(&gshift))?,
            pair(e, &fp(g), &fm(g))?,
            tol,
        ),
    );
    let target = Residual::from_pair(
        pair(e, &fp(&phi), &fm(&phi))?,
        pair(e, &fp(g), &fm(g))?,
        tol,
    );
    Ok(b.finish("target", target, tol))
}

/// Chain for the straddling threshold pair: three telescoping steps plus the
/// clamp finiteness conditions.
fn case3(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    x1: f64,
    x2: f64,
    tol: Tolerance,
) -> Result<Report> {
    if !(x1 < 0.0 && 0.0 < x2) {
        return Err(Error::InvalidParameter(format!(
            "straddling chain needs x1 < 0 < x2, got {x1} and {x2}"
        )));
    }
    let psi = NamedContraction::Case3Psi { x1, x2 }.build()?.apply(g);
    let phi = NamedContraction::PhiPair { x1, x2 }.build()?.apply(g);
    let phi2 = NamedContraction::Phi { x: x2 }.build()?.apply(g);
    let gmin = g.map(|t| t.min(x2));

    let fp = |h: &L2Fn| f + h;
    let fm = |h: &L2Fn| f - h;

    let mut b = ChainBuilder::new();
    b.step(
        "psi_pair",
        Residual::from_pair(
            pair(e, &fp(&psi), &fm(&psi))?,
            pair(e, &fp(&gmin), &fm(&gmin))?,
            tol,
        ),
    );
    b.step(
        "upper_zigzag",
        Residual::from_pair(
            pair(e, &fp(&phi), &fp(&gmin))?,
            pair(e, &fp(g), &fp(&psi))?,
            tol,
        ),
    );
    b.step(
        "lower_zigzag",
        Residual::from_pair(
            pair(e, &fm(&phi), &fm(&gmin))?,
            pair(e, &fm(g), &fm(&psi))?,
            tol,
        ),
    );
    // g ^ x2 = (g + phi_{x2}(g)) / 2, so f + gmin is the midpoint of
    // f + g and f + phi_{x2}(g).
    b.side("min_mean_upper", midpoint_residual(e, &fp(&gmin), &fp(g), &fp(&phi2), tol)?);
    b.side("min_mean_lower", midpoint_residual(e, &fm(&gmin), &fm(g), &fm(&phi2), tol)?);
    b.side(
        "min_pair",
        Residual::from_pair(
            pair(e, &fp(&gmin), &fm(&gmin))?,
            pair(e, &fp(g), &fm(g))?,
            tol,
        ),
    );
    let target = Residual::from_pair(
        pair(e, &fp(&phi), &fm(&phi))?,
        pair(e, &fp(g), &fm(g))?,
        tol,
    );
    Ok(b.finish("target", target, tol))
}

/// Midpoint convexity from the composed-tent ladder: the inputs are treated
/// as the endpoints, `mid = (f+g)/2`, `h = (f-g)/2`, and each rung checks
/// compatibility with `D_k`; the last entry is the midpoint inequality
/// `2 E(mid) <= E(f) + E(g)` itself.
fn convexity_via_dn(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    n: u32,
    tol: Tolerance,
) -> Result<Report> {
    let mid = (f + g).scale(0.5);
    let h = (f - g).scale(0.5);
    let mut checks = Vec::new();
    for k in 0..=n {
        let dk = build_dn(k);
        let r = compatibility_residual(e, &dk, &mid, &h, tol)?;
        checks.push(CheckReport::single(format!("dn_{k}"), r));
    }
    let em = e.eval(&mid)?;
    let target = Residual::from_pair(em + em, pair(e, f, g)?, tol);
    checks.push(CheckReport::single("midpoint_convexity", target));
    Ok(Report::from_checks("", 0, tol, checks))
}
