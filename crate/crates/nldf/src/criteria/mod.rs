//! Residual computation for the inequality families tying energy functionals
//! to their contraction behaviour.
//!
//! Every check reduces to a [`Residual`]: left- and right-hand sides of an
//! inequality `lhs <= rhs` evaluated in the extended reals, with a signed
//! slack `rhs - lhs` when both sides are finite. Infinite right-hand sides
//! carry no information and are flagged [`ResidualStatus::Vacuous`] rather
//! than counted as passes.

pub mod chains;
pub mod identities;
pub mod sweep;

pub use chains::{lemma_chain_check, ChainKind};
pub use identities::{identity_check, identity_sweep, IdentityInputs, IdentityKind};
pub use sweep::{fuzz_sweep, FamilyKind};

use serde::{Deserialize, Serialize};

use crate::contraction::{contraction_from_bp, NamedContraction, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::functional::{EnergyFunctional, ExtReal};
use crate::space::L2Fn;

/// Slack tolerance: an inequality counts as violated only when
/// `slack < -(atol + rtol * |rhs|)`.
///
/// All residuals are sums of a handful of floating-point energy evaluations,
/// while genuine violations (see the capped-edge control instance) show up at
/// magnitude ~0.1, so the defaults separate the two regimes by many orders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { atol: 1e-9, rtol: 1e-12 }
    }
}

impl Tolerance {
    pub fn absolute(atol: f64) -> Self {
        Tolerance { atol, rtol: 0.0 }
    }

    /// Allowed negative excursion of the slack for a given right-hand side.
    pub fn margin(&self, rhs: f64) -> f64 {
        self.atol + self.rtol * rhs.abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualStatus {
    Satisfied,
    Violated,
    Vacuous,
}

/// Outcome of one inequality evaluation in the extended reals.
///
/// `slack` is `rhs - lhs` when both sides are finite and `None` otherwise;
/// the status disambiguates the infinite cases: `rhs = inf` is vacuous
/// regardless of `lhs`, while `lhs = inf` against a finite `rhs` is an
/// unconditional violation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub lhs: ExtReal,
    pub rhs: ExtReal,
    pub slack: Option<f64>,
    pub status: ResidualStatus,
}

impl Residual {
    /// Classifies `lhs <= rhs` under the tolerance.
    pub fn from_pair(lhs: ExtReal, rhs: ExtReal, tol: Tolerance) -> Residual {
        match (lhs.finite(), rhs.finite()) {
            (_, None) => Residual { lhs, rhs, slack: None, status: ResidualStatus::Vacuous },
            (None, Some(_)) => Residual { lhs, rhs, slack: None, status: ResidualStatus::Violated },
            (Some(l), Some(r)) => {
                let slack = r - l;
                let status = if slack < -tol.margin(r) {
                    ResidualStatus::Violated
                } else {
                    ResidualStatus::Satisfied
                };
                Residual { lhs, rhs, slack: Some(slack), status }
            }
        }
    }

    /// Classifies `lhs = rhs` (two-sided). The recorded slack is
    /// `-(|rhs - lhs|)`, so satisfied equalities sit at slack ~0 and the
    /// one-sided violation rule applies unchanged. Two infinite sides are
    /// vacuous, one infinite side is a violation.
    pub fn from_equality(lhs: ExtReal, rhs: ExtReal, tol: Tolerance) -> Residual {
        match (lhs.finite(), rhs.finite()) {
            (None, None) => Residual { lhs, rhs, slack: None, status: ResidualStatus::Vacuous },
            (Some(l), Some(r)) => {
                let slack = -(r - l).abs();
                let status = if slack < -tol.margin(r) {
                    ResidualStatus::Violated
                } else {
                    ResidualStatus::Satisfied
                };
                Residual { lhs, rhs, slack: Some(slack), status }
            }
            _ => Residual { lhs, rhs, slack: None, status: ResidualStatus::Violated },
        }
    }

    /// Slack mapped onto the extended line: violations with an infinite side
    /// rank below every finite slack, vacuous residuals above.
    pub fn slack_value(&self) -> f64 {
        match (self.slack, self.status) {
            (Some(s), _) => s,
            (None, ResidualStatus::Vacuous) => f64::INFINITY,
            (None, _) => f64::NEG_INFINITY,
        }
    }

    pub fn is_violated(&self) -> bool {
        self.status == ResidualStatus::Violated
    }
}

/// Aggregate over one named check: sample count, violation and vacuous
/// counts, the minimum finite slack, and the inputs attaining it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub n: u64,
    pub violations: u64,
    pub vacuous: u64,
    pub min_slack: Option<f64>,
    pub worst_case_inputs: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<Residual>,
}

impl CheckReport {
    /// Report for a single evaluated residual, keeping the full detail.
    pub fn single(name: impl Into<String>, r: Residual) -> CheckReport {
        CheckReport {
            name: name.into(),
            n: 1,
            violations: u64::from(r.status == ResidualStatus::Violated),
            vacuous: u64::from(r.status == ResidualStatus::Vacuous),
            min_slack: r.slack,
            worst_case_inputs: None,
            detail: Some(r),
        }
    }
}

/// Streaming aggregation into a [`CheckReport`]; `worst_case_inputs` tracks
/// the non-vacuous residual with the lowest slack.
pub struct CheckAccumulator {
    name: String,
    n: u64,
    violations: u64,
    vacuous: u64,
    min_slack: Option<f64>,
    worst: Option<(f64, serde_json::Value)>,
}

impl CheckAccumulator {
    pub fn new(name: impl Into<String>) -> Self {
        CheckAccumulator {
            name: name.into(),
            n: 0,
            violations: 0,
            vacuous: 0,
            min_slack: None,
            worst: None,
        }
    }

    pub fn record(&mut self, r: &Residual, inputs: impl FnOnce() -> serde_json::Value) {
        self.n += 1;
        match r.status {
            ResidualStatus::Violated => self.violations += 1,
            ResidualStatus::Vacuous => {
                self.vacuous += 1;
                return; // uninformative; never the worst case
            }
            ResidualStatus::Satisfied => {}
        }
        if let Some(s) = r.slack {
            if self.min_slack.is_none_or(|m| s < m) {
                self.min_slack = Some(s);
            }
        }
        let key = r.slack_value();
        if self.worst.as_ref().is_none_or(|(w, _)| key < *w) {
            self.worst = Some((key, inputs()));
        }
    }

    pub fn finish(self) -> CheckReport {
        CheckReport {
            name: self.name,
            n: self.n,
            violations: self.violations,
            vacuous: self.vacuous,
            min_slack: self.min_slack,
            worst_case_inputs: self.worst.map(|(_, v)| v),
            detail: None,
        }
    }
}

/// Collection of check outcomes for one energy instance. Serialization is
/// deterministic: field order is fixed and no timestamps are recorded, so
/// equal seeds and configs yield byte-identical JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub instance: String,
    pub seed: u64,
    pub tolerance: Tolerance,
    pub violations: u64,
    pub vacuous: u64,
    pub min_slack: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub telescoping_gap: Option<f64>,
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn from_checks(
        instance: impl Into<String>,
        seed: u64,
        tolerance: Tolerance,
        checks: Vec<CheckReport>,
    ) -> Report {
        let violations = checks.iter().map(|c| c.violations).sum();
        let vacuous = checks.iter().map(|c| c.vacuous).sum();
        let min_slack = checks
            .iter()
            .filter_map(|c| c.min_slack)
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |m| m.min(s))));
        Report {
            instance: instance.into(),
            seed,
            tolerance,
            violations,
            vacuous,
            min_slack,
            telescoping_gap: None,
            checks,
        }
    }

    pub fn total_samples(&self) -> u64 {
        self.checks.iter().map(|c| c.n).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// `E(f + Cg) + E(f - Cg)` against `E(f + g) + E(f - g)`.
///
/// `c` must pass [`PiecewiseLinear::verify_normal`]; the result says whether
/// replacing `g` by `Cg` can only lower the symmetrized energy.
pub fn compatibility_residual(
    e: &EnergyFunctional,
    c: &PiecewiseLinear,
    f: &L2Fn,
    g: &L2Fn,
    tol: Tolerance,
) -> Result<Residual> {
    if let crate::contraction::Normality::Violation(why) = c.verify_normal() {
        return Err(Error::NotNormal(why));
    }
    let cg = c.apply(g);
    let lhs = e.eval(&(f + &cg))? + e.eval(&(f - &cg))?;
    let rhs = e.eval(&(f + g))? + e.eval(&(f - g))?;
    Ok(Residual::from_pair(lhs, rhs, tol))
}

/// The two paired maps `v + [(u-v+band)_+ - (u-v-band)_-]/2` and
/// `u - [(u-v+band)_+ - (u-v-band)_-]/2`, computed exactly in this form.
pub(crate) fn paired_maps(u: &L2Fn, v: &L2Fn, band: f64) -> (L2Fn, L2Fn) {
    let d = u - v;
    // x_- denotes max(-x, 0), so the bracket is (d+band)_+ - max(band-d, 0).
    let bracket = d.map(|t| (t + band).max(0.0) - (band - t).max(0.0));
    (v + &bracket.scale(0.5), u - &bracket.scale(0.5))
}

/// Residuals of the two lattice-type inequalities against `E(u) + E(v)`:
/// the rounded-median pair `((u + u . v)/2, (v + u . v)/2)` with `.`
/// the pointwise min resp. max, and the banded pair from [`paired_maps`]
/// with band `alpha`.
pub fn cg_residuals(
    e: &EnergyFunctional,
    u: &L2Fn,
    v: &L2Fn,
    alpha: f64,
    tol: Tolerance,
) -> Result<(Residual, Residual)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "band width must be positive, got {alpha}"
        )));
    }
    let rhs = e.eval(u)? + e.eval(v)?;
    let m1 = (u + &u.wedge(v)?).scale(0.5);
    let m2 = (v + &u.vee(v)?).scale(0.5);
    let lattice = Residual::from_pair(e.eval(&m1)? + e.eval(&m2)?, rhs, tol);
    let (p1, p2) = paired_maps(u, v, alpha);
    let banded = Residual::from_pair(e.eval(&p1)? + e.eval(&p2)?, rhs, tol);
    Ok((lattice, banded))
}

/// `E(u - p(u-v)) + E(v + p(u-v))` against `E(u) + E(v)` for an increasing
/// normal contraction `p` (slopes in [0,1], fixing 0).
pub fn bp_star_residual(
    e: &EnergyFunctional,
    p: &PiecewiseLinear,
    u: &L2Fn,
    v: &L2Fn,
    tol: Tolerance,
) -> Result<Residual> {
    if !p.is_increasing_normal() {
        return Err(Error::NotIncreasing(
            "transfer map must have slopes in [0, 1] and fix 0".into(),
        ));
    }
    let pd = p.apply(&(u - v));
    let lhs = e.eval(&(u - &pd))? + e.eval(&(v + &pd))?;
    let rhs = e.eval(u)? + e.eval(v)?;
    Ok(Residual::from_pair(lhs, rhs, tol))
}

/// `E(f v g) + E(f ^ g)` and `E(H(f,g)) + E(H(g,f))` against `E(f) + E(g)`,
/// where `H(f,g)` clamps `f` into the band `[g - alpha, g + alpha]`.
pub fn bh_residuals(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    alpha: f64,
    tol: Tolerance,
) -> Result<(Residual, Residual)> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "band half-width must be nonnegative, got {alpha}"
        )));
    }
    let rhs = e.eval(f)? + e.eval(g)?;
    let lattice = Residual::from_pair(e.eval(&f.vee(g)?)? + e.eval(&f.wedge(g)?)?, rhs, tol);
    let h_fg = f.band_around(g, alpha)?;
    let h_gf = g.band_around(f, alpha)?;
    let banded = Residual::from_pair(e.eval(&h_fg)? + e.eval(&h_gf)?, rhs, tol);
    Ok((lattice, banded))
}

/// Equality residual of the scaling law for a positively `p`-homogeneous
/// energy: the `f`-shift evaluated at `0 v g ^ alpha` against `alpha^p`
/// times the `(f/alpha)`-shift evaluated at `0 v (g/alpha) ^ 1`.
pub fn homogeneous_reduction_check(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    alpha: f64,
    p: f64,
    tol: Tolerance,
) -> Result<Residual> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "clamp level must be positive, got {alpha}"
        )));
    }
    if !e.is_p_homogeneous(p) {
        return Err(Error::NotHomogeneous(p));
    }
    let clamp_alpha = NamedContraction::Clamp0Alpha { alpha }.build()?;
    let clamp_one = NamedContraction::Clamp0Alpha { alpha: 1.0 }.build()?;
    let lhs = e.f_shift(f)?.eval(&clamp_alpha.apply(g))?;
    let scaled = e
        .f_shift(&f.scale(1.0 / alpha))?
        .eval(&clamp_one.apply(&g.scale(1.0 / alpha)))?;
    let rhs = scaled.scale(alpha.powf(p));
    Ok(Residual::from_equality(lhs, rhs, tol))
}

/// Absolute difference of two residual slacks; residuals that agree on a
/// non-finite status count as gap 0, disagreement is infinite.
pub fn slack_gap(a: &Residual, b: &Residual) -> f64 {
    match (a.slack, b.slack) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) if a.status == b.status => 0.0,
        _ => f64::INFINITY,
    }
}

/// Slack agreement between the transfer-map inequality for `p` and the
/// contraction inequality for the corresponding `C` at the half-sum /
/// half-difference substitution.
pub fn bp_transport_gap(
    e: &EnergyFunctional,
    p: &PiecewiseLinear,
    u: &L2Fn,
    v: &L2Fn,
    tol: Tolerance,
) -> Result<f64> {
    let star = bp_star_residual(e, p, u, v, tol)?;
    let c = contraction_from_bp(p)?;
    let f = (u + v).scale(0.5);
    let g = (u - v).scale(0.5);
    let compat = compatibility_residual(e, &c, &f, &g, tol)?;
    Ok(slack_gap(&star, &compat))
}

/// Slack agreement of [`cg_residuals`] with the contraction inequalities for
/// the positive part (applied to `-g`) and the symmetric clamp at `alpha/2`,
/// under the same half-sum / half-difference substitution.
pub fn cg_transport_gaps(
    e: &EnergyFunctional,
    u: &L2Fn,
    v: &L2Fn,
    alpha: f64,
    tol: Tolerance,
) -> Result<(f64, f64)> {
    let (lattice, banded) = cg_residuals(e, u, v, alpha, tol)?;
    let f = (u + v).scale(0.5);
    let g = (u - v).scale(0.5);
    let pos = NamedContraction::PosPart.build()?;
    let clamp = NamedContraction::ClampSym { alpha: alpha / 2.0 }.build()?;
    let lattice_c = compatibility_residual(e, &pos, &f, &g.scale(-1.0), tol)?;
    let banded_c = compatibility_residual(e, &clamp, &f, &g, tol)?;
    Ok((slack_gap(&lattice, &lattice_c), slack_gap(&banded, &banded_c)))
}

/// Slack agreement of [`bh_residuals`] with the contraction inequalities for
/// the absolute value and the symmetric tent of width `alpha`, under the
/// half-sum / half-difference substitution.
pub fn bh_transport_gaps(
    e: &EnergyFunctional,
    f: &L2Fn,
    g: &L2Fn,
    alpha: f64,
    tol: Tolerance,
) -> Result<(f64, f64)> {
    let (lattice, banded) = bh_residuals(e, f, g, alpha, tol)?;
    let fs = (f + g).scale(0.5);
    let gs = (f - g).scale(0.5);
    let abs = NamedContraction::Abs.build()?;
    let tent = NamedContraction::Tent { alpha }.build()?;
    let lattice_c = compatibility_residual(e, &abs, &fs, &gs, tol)?;
    let banded_c = compatibility_residual(e, &tent, &fs, &gs, tol)?;
    Ok((slack_gap(&lattice, &lattice_c), slack_gap(&banded, &banded_c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{EdgeFunction, EdgeTerm};
    use crate::space::MeasureSpace;

    fn two_node_power(p: f64) -> EnergyFunctional {
        let s = MeasureSpace::counting(2);
        EnergyFunctional::mixed(
            s,
            vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p } }],
        )
        .unwrap()
    }

    fn capped_instance() -> EnergyFunctional {
        let s = MeasureSpace::counting(2);
        EnergyFunctional::mixed_allowing_nonconvex(
            s,
            vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::CappedAbs { cap: 1.0 } }],
        )
        .unwrap()
    }

    fn fns(vals: &[&[f64]]) -> Vec<L2Fn> {
        let s = MeasureSpace::counting(vals[0].len());
        vals.iter().map(|v| L2Fn::new(s.clone(), v.to_vec()).unwrap()).collect()
    }

    #[test]
    fn residual_classification() {
        let tol = Tolerance::default();
        let fin = |x: f64| ExtReal::new(x).unwrap();
        let r = Residual::from_pair(fin(1.0), fin(2.0), tol);
        assert_eq!(r.status, ResidualStatus::Satisfied);
        assert_eq!(r.slack, Some(1.0));
        let r = Residual::from_pair(fin(2.0), fin(1.0), tol);
        assert_eq!(r.status, ResidualStatus::Violated);
        let r = Residual::from_pair(fin(2.0), ExtReal::INFINITY, tol);
        assert_eq!(r.status, ResidualStatus::Vacuous);
        assert_eq!(r.slack, None);
        let r = Residual::from_pair(ExtReal::INFINITY, ExtReal::INFINITY, tol);
        assert_eq!(r.status, ResidualStatus::Vacuous);
        let r = Residual::from_pair(ExtReal::INFINITY, fin(1.0), tol);
        assert_eq!(r.status, ResidualStatus::Violated);
        assert_eq!(r.slack_value(), f64::NEG_INFINITY);
        // within tolerance of zero from below
        let r = Residual::from_pair(fin(1.0 + 1e-12), fin(1.0), tol);
        assert_eq!(r.status, ResidualStatus::Satisfied);
    }

    #[test]
    fn equality_residual_is_two_sided() {
        let tol = Tolerance::default();
        let fin = |x: f64| ExtReal::new(x).unwrap();
        assert_eq!(
            Residual::from_equality(fin(1.0), fin(1.0), tol).status,
            ResidualStatus::Satisfied
        );
        assert_eq!(
            Residual::from_equality(fin(1.0), fin(1.1), tol).status,
            ResidualStatus::Violated
        );
        assert_eq!(
            Residual::from_equality(fin(1.1), fin(1.0), tol).status,
            ResidualStatus::Violated
        );
        assert_eq!(
            Residual::from_equality(ExtReal::INFINITY, ExtReal::INFINITY, tol).status,
            ResidualStatus::Vacuous
        );
        assert_eq!(
            Residual::from_equality(ExtReal::INFINITY, fin(1.0), tol).status,
            ResidualStatus::Violated
        );
    }

    #[test]
    fn capped_edge_control_has_exact_negative_slack() {
        // b(t) = min(|t|, 1), f = g = (1, 0), C(t) = t/2:
        // lhs = b(1.5) + b(0.5) = 1.5, rhs = b(2) + b(0) = 1.
        let e = capped_instance();
        let v = fns(&[&[1.0, 0.0]]);
        let c = PiecewiseLinear::affine(0.5, 0.0);
        let r =
            compatibility_residual(&e, &c, &v[0], &v[0], Tolerance::default()).unwrap();
        assert_eq!(r.status, ResidualStatus::Violated);
        assert!((r.slack.unwrap() + 0.5).abs() <= 1e-12);
    }

    #[test]
    fn compatibility_rejects_non_normal_maps() {
        let e = two_node_power(2.0);
        let v = fns(&[&[1.0, 0.0]]);
        let c = PiecewiseLinear::affine(1.5, 0.0);
        let err = compatibility_residual(&e, &c, &v[0], &v[0], Tolerance::default());
        assert!(matches!(err, Err(Error::NotNormal(_))));
        let shifted = PiecewiseLinear::affine(0.5, 1.0);
        let err = compatibility_residual(&e, &shifted, &v[0], &v[0], Tolerance::default());
        assert!(matches!(err, Err(Error::NotNormal(_))));
    }

    #[test]
    fn zero_energy_yields_zero_slack() {
        let s = MeasureSpace::counting(3);
        let e = EnergyFunctional::zero(s.clone());
        let f = L2Fn::new(s.clone(), vec![1.0, -2.0, 0.5]).unwrap();
        let g = L2Fn::new(s, vec![0.3, 4.0, -1.0]).unwrap();
        let c = NamedContraction::Abs.build().unwrap();
        let r = compatibility_residual(&e, &c, &f, &g, Tolerance::default()).unwrap();
        assert_eq!(r.slack, Some(0.0));
        let (a, b) = cg_residuals(&e, &f, &g, 1.0, Tolerance::default()).unwrap();
        assert_eq!((a.slack, b.slack), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn cg_diagonal_and_parameter_validation() {
        let e = two_node_power(2.0);
        let v = fns(&[&[1.0, -1.0]]);
        let (a, b) = cg_residuals(&e, &v[0], &v[0], 0.7, Tolerance::default()).unwrap();
        assert_eq!(a.slack, Some(0.0));
        assert_eq!(b.slack, Some(0.0));
        assert!(matches!(
            cg_residuals(&e, &v[0], &v[0], 0.0, Tolerance::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn bp_star_degenerate_maps_have_zero_slack() {
        let e = two_node_power(2.0);
        let v = fns(&[&[1.0, -0.5], &[0.25, 2.0]]);
        let zero = PiecewiseLinear::zero_map();
        let r = bp_star_residual(&e, &zero, &v[0], &v[1], Tolerance::default()).unwrap();
        assert_eq!(r.slack, Some(0.0));
        let id = PiecewiseLinear::identity();
        let r = bp_star_residual(&e, &id, &v[0], &v[1], Tolerance::default()).unwrap();
        assert_eq!(r.slack, Some(0.0));
        let neg = PiecewiseLinear::negation();
        assert!(matches!(
            bp_star_residual(&e, &neg, &v[0], &v[1], Tolerance::default()),
            Err(Error::NotIncreasing(_))
        ));
    }

    #[test]
    fn bh_diagonal_and_zero_band() {
        let e = two_node_power(2.0);
        let v = fns(&[&[1.0, -0.5], &[0.25, 2.0]]);
        let (a, b) = bh_residuals(&e, &v[0], &v[0], 0.9, Tolerance::default()).unwrap();
        assert_eq!(a.slack, Some(0.0));
        assert_eq!(b.slack, Some(0.0));
        // zero band: the clamped pair is exactly (g, f)
        let (_, b) = bh_residuals(&e, &v[0], &v[1], 0.0, Tolerance::default()).unwrap();
        assert_eq!(b.slack, Some(0.0));
    }

    #[test]
    fn transport_gaps_vanish_on_quadratic_instances() {
        let e = two_node_power(2.0);
        let v = fns(&[&[1.3, -0.4], &[-0.8, 2.1]]);
        let tol = Tolerance::default();
        let p = PiecewiseLinear::new(vec![-1.0, 0.5], vec![0.3, 1.0, 0.0], 0.0).unwrap();
        assert!(bp_transport_gap(&e, &p, &v[0], &v[1], tol).unwrap() <= 1e-10);
        let (ga, gb) = cg_transport_gaps(&e, &v[0], &v[1], 0.9, tol).unwrap();
        assert!(ga <= 1e-10 && gb <= 1e-10);
        let (ga, gb) = bh_transport_gaps(&e, &v[0], &v[1], 0.6, tol).unwrap();
        assert!(ga <= 1e-10 && gb <= 1e-10);
    }

    #[test]
    fn homogeneous_reduction_power_two() {
        let e = two_node_power(2.0);
        let v = fns(&[&[0.6, -0.2], &[1.5, 2.5]]);
        let tol = Tolerance::default();
        let r = homogeneous_reduction_check(&e, &v[0], &v[1], 2.0, 2.0, tol).unwrap();
        assert_eq!(r.status, ResidualStatus::Satisfied);
        // alpha = 1 compares an expression with itself
        let r = homogeneous_reduction_check(&e, &v[0], &v[1], 1.0, 2.0, tol).unwrap();
        assert_eq!(r.slack, Some(0.0));
        // a non-homogeneous energy is flagged
        let s = MeasureSpace::counting(2);
        let huber = EnergyFunctional::mixed(
            s,
            vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Huber { delta: 1.0 } }],
        )
        .unwrap();
        assert!(matches!(
            homogeneous_reduction_check(&huber, &v[0], &v[1], 2.0, 2.0, tol),
            Err(Error::NotHomogeneous(_))
        ));
    }

    #[test]
    fn report_aggregates_and_serializes_deterministically() {
        let tol = Tolerance::default();
        let fin = |x: f64| ExtReal::new(x).unwrap();
        let mut acc = CheckAccumulator::new("demo");
        acc.record(&Residual::from_pair(fin(1.0), fin(2.0), tol), || {
            serde_json::json!({"i": 0})
        });
        acc.record(&Residual::from_pair(fin(3.0), fin(1.0), tol), || {
            serde_json::json!({"i": 1})
        });
        acc.record(&Residual::from_pair(fin(0.0), ExtReal::INFINITY, tol), || {
            serde_json::json!({"i": 2})
        });
        let check = acc.finish();
        assert_eq!((check.n, check.violations, check.vacuous), (3, 1, 1));
        assert_eq!(check.min_slack, Some(-2.0));
        assert_eq!(check.worst_case_inputs, Some(serde_json::json!({"i": 1})));
        let report = Report::from_checks("demo instance", 42, tol, vec![check]);
        assert_eq!(report.violations, 1);
        assert_eq!(report.min_slack, Some(-2.0));
        let a = report.to_json();
        let b = report.to_json();
        assert_eq!(a, b);
        let round: Report = serde_json::from_str(&a).unwrap();
        assert_eq!(round, report);
    }
}
