//! Instance generation and suite orchestration.
//!
//! This module turns the rest of the crate into a runnable laboratory: seeded
//! random instance generation over a configurable mix of edge functions, a
//! small set of canonical instances with known behavior (including a crafted
//! negative control whose contraction slack is exactly -0.5), suite
//! configuration and execution with per-instance sweep reports, CSV/JSON
//! rendering, and exact re-evaluation of recorded worst cases.
//!
//! Exit-code convention for suite outcomes: 0 when every non-control check
//! passes, 1 when a regular instance violates (or a control fails to), and
//! 3 when the only violations are the expected ones on negative controls.
//! Code 2 is reserved for configuration and IO failures and is produced by
//! the caller from `Err` results, not from an outcome.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contraction::{build_dn, NamedContraction, PiecewiseLinear};
use crate::criteria::{
    bh_residuals, bp_star_residual, cg_residuals, compatibility_residual, fuzz_sweep, CheckReport,
    FamilyKind, Report, Residual, Tolerance,
};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::functional::{EdgeFunction, EdgeTerm, EnergyFunctional};
use crate::instance::InstanceDoc;
use crate::rng::stream;
use crate::space::{L2Fn, MeasureSpace};

/// Edge-function draw used by [`generate_instance`]; each token names the
/// shape drawn, with parameters sampled per edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKindSpec {
    /// `Power { p: 2 }` exactly.
    Power2,
    /// `Power` with `p` uniform in [1, 4).
    Power,
    /// `Huber` with `delta` uniform in [0.2, 2).
    Huber,
    /// `IntervalIndicator` with half-width uniform in [0.5, 3).
    Indicator,
    /// `IntervalIndicator` with half-width 0 (equality constraint).
    IndicatorZero,
    /// `PwlConvex` with one or two random breakpoints.
    Pwl,
    /// `QuadraticWeighted` with weight uniform in [0.2, 2).
    Quad,
    /// `CappedAbs` with cap uniform in [0.5, 1.5); nonconvex.
    Capped,
}

impl EdgeKindSpec {
    pub const ALL: [EdgeKindSpec; 8] = [
        EdgeKindSpec::Power2,
        EdgeKindSpec::Power,
        EdgeKindSpec::Huber,
        EdgeKindSpec::Indicator,
        EdgeKindSpec::IndicatorZero,
        EdgeKindSpec::Pwl,
        EdgeKindSpec::Quad,
        EdgeKindSpec::Capped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeKindSpec::Power2 => "power2",
            EdgeKindSpec::Power => "power",
            EdgeKindSpec::Huber => "huber",
            EdgeKindSpec::Indicator => "indicator",
            EdgeKindSpec::IndicatorZero => "indicator0",
            EdgeKindSpec::Pwl => "pwl",
            EdgeKindSpec::Quad => "quad",
            EdgeKindSpec::Capped => "capped",
        }
    }

    pub fn is_convex(self) -> bool {
        self != EdgeKindSpec::Capped
    }
}

impl fmt::Display for EdgeKindSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeKindSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeKindSpec::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown edge kind {s:?}")))
    }
}

/// Shape of a generated instance: node count, edge-function mix, and the
/// range node weights are drawn from. `nonconvex` opts into capped edges and
/// guarantees at least one is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub nodes: usize,
    pub kinds: Vec<EdgeKindSpec>,
    pub weight_min: f64,
    pub weight_max: f64,
    #[serde(default)]
    pub nonconvex: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            nodes: 4,
            kinds: vec![EdgeKindSpec::Power2, EdgeKindSpec::Huber, EdgeKindSpec::Indicator],
            weight_min: 0.5,
            weight_max: 2.0,
            nonconvex: false,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::InvalidConfig(format!(
                "instances need at least 2 nodes, got {}",
                self.nodes
            )));
        }
        if self.nodes > 10_000 {
            return Err(Error::InvalidConfig(format!(
                "instances are capped at 10000 nodes, got {}",
                self.nodes
            )));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidConfig("edge kind mix must be nonempty".into()));
        }
        if !(self.weight_min.is_finite()
            && self.weight_max.is_finite()
            && self.weight_min > 0.0
            && self.weight_min <= self.weight_max)
        {
            return Err(Error::InvalidConfig(format!(
                "weight range must satisfy 0 < min <= max, got [{}, {}]",
                self.weight_min, self.weight_max
            )));
        }
        if !self.nonconvex && self.kinds.iter().any(|k| !k.is_convex()) {
            return Err(Error::InvalidConfig(
                "capped edges require the nonconvex flag".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for InstanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kinds: Vec<&str> = self.kinds.iter().map(|k| k.name()).collect();
        write!(
            f,
            "nodes={},kinds={},wmin={},wmax={}",
            self.nodes,
            kinds.join(":"),
            self.weight_min,
            self.weight_max
        )?;
        if self.nonconvex {
            f.write_str(",nonconvex")?;
        }
        Ok(())
    }
}

impl FromStr for InstanceSpec {
    type Err = Error;

    /// Compact form `nodes=5,kinds=power:huber,wmin=0.5,wmax=2,nonconvex`;
    /// omitted fields keep their defaults.
    fn from_str(s: &str) -> Result<Self> {
        let mut spec = InstanceSpec::default();
        for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) = match token.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => (token, ""),
            };
            match key {
                "nodes" => {
                    spec.nodes = value.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad node count {value:?}"))
                    })?;
                }
                "kinds" => {
                    spec.kinds = value
                        .split(':')
                        .map(|k| k.trim().parse())
                        .collect::<Result<Vec<_>>>()?;
                }
                "wmin" => {
                    spec.weight_min = value.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad weight bound {value:?}"))
                    })?;
                }
                "wmax" => {
                    spec.weight_max = value.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad weight bound {value:?}"))
                    })?;
                }
                "nonconvex" => {
                    spec.nonconvex = match value {
                        "" | "true" => true,
                        "false" => false,
                        other => {
                            return Err(Error::InvalidConfig(format!(
                                "bad nonconvex flag {other:?}"
                            )))
                        }
                    };
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown instance field {other:?}"
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn random_edge(kind: EdgeKindSpec, rng: &mut impl Rng) -> EdgeFunction {
    match kind {
        EdgeKindSpec::Power2 => EdgeFunction::Power { p: 2.0 },
        EdgeKindSpec::Power => EdgeFunction::Power { p: rng.gen_range(1.0..4.0) },
        EdgeKindSpec::Huber => EdgeFunction::Huber { delta: rng.gen_range(0.2..2.0) },
        EdgeKindSpec::Indicator => {
            EdgeFunction::IntervalIndicator { c: rng.gen_range(0.5..3.0) }
        }
        EdgeKindSpec::IndicatorZero => EdgeFunction::IntervalIndicator { c: 0.0 },
        EdgeKindSpec::Pwl => {
            let b1 = rng.gen_range(0.5..2.0);
            let s1 = rng.gen_range(0.0..1.5);
            if rng.gen_bool(0.5) {
                let s2 = s1 + rng.gen_range(0.0..2.0);
                EdgeFunction::PwlConvex { breakpoints: vec![b1], slopes: vec![s1, s2] }
            } else {
                let b2 = b1 + rng.gen_range(0.5..1.5);
                let s2 = s1 + rng.gen_range(0.0..1.0);
                let s3 = s2 + rng.gen_range(0.0..2.0);
                EdgeFunction::PwlConvex { breakpoints: vec![b1, b2], slopes: vec![s1, s2, s3] }
            }
        }
        EdgeKindSpec::Quad => EdgeFunction::QuadraticWeighted { w: rng.gen_range(0.2..2.0) },
        EdgeKindSpec::Capped => EdgeFunction::CappedAbs { cap: rng.gen_range(0.5..1.5) },
    }
}

/// Seeded random instance: node weights uniform in the spec range, a random
/// spanning tree plus `nodes / 2` extra edges, each carrying an edge function
/// drawn from the spec's mix. The same spec and seed always produce the same
/// functional.
pub fn generate_instance(spec: &InstanceSpec, seed: u64) -> Result<EnergyFunctional> {
    spec.validate()?;
    let mut rng = stream(seed, "generate_instance", 0);
    let weights: Vec<f64> = (0..spec.nodes)
        .map(|_| rng.gen_range(spec.weight_min..=spec.weight_max))
        .collect();
    let space = MeasureSpace::with_weights(weights)?;

    // Tree edges guarantee connectivity; extras may duplicate, which just
    // deepens that pair's coupling.
    let mut pairs: Vec<(usize, usize)> = (1..spec.nodes).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..spec.nodes / 2 {
        let i = rng.gen_range(0..spec.nodes);
        let j = rng.gen_range(0..spec.nodes);
        if i != j {
            pairs.push((i.min(j), i.max(j)));
        }
    }

    let mut terms: Vec<EdgeTerm> = Vec::with_capacity(pairs.len() + 1);
    for (from, to) in pairs {
        let kind = spec.kinds[rng.gen_range(0..spec.kinds.len())];
        terms.push(EdgeTerm { from, to, edge: random_edge(kind, &mut rng) });
    }
    if spec.nonconvex
        && !terms.iter().any(|t| matches!(t.edge, EdgeFunction::CappedAbs { .. }))
    {
        terms.push(EdgeTerm { from: 0, to: 1, edge: EdgeFunction::CappedAbs { cap: 1.0 } });
    }

    if spec.nonconvex {
        EnergyFunctional::mixed_allowing_nonconvex(space, terms)
    } else {
        EnergyFunctional::mixed(space, terms)
    }
}

/// Two nodes, counting measure, graph Laplacian energy `(x0 - x1)^2 / ...`:
/// the workhorse with closed-form resolvent.
pub fn two_node_quadratic() -> EnergyFunctional {
    EnergyFunctional::quadratic_form(
        MeasureSpace::counting(2),
        vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
    )
    .expect("two-node laplacian is a valid quadratic form")
}

/// Two nodes, weights (2, 3), equality indicator on the edge: the resolvent
/// is the weighted-mean projection.
pub fn pure_indicator() -> EnergyFunctional {
    EnergyFunctional::mixed(
        MeasureSpace::with_weights(vec![2.0, 3.0]).expect("positive weights"),
        vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::IntervalIndicator { c: 0.0 } }],
    )
    .expect("single indicator edge is valid")
}

/// Three nodes, counting measure, one quadratic and one Huber edge: smooth
/// but not a quadratic form.
pub fn mixed_smooth() -> EnergyFunctional {
    EnergyFunctional::mixed(
        MeasureSpace::counting(3),
        vec![
            EdgeTerm { from: 0, to: 1, edge: EdgeFunction::Power { p: 2.0 } },
            EdgeTerm { from: 1, to: 2, edge: EdgeFunction::Huber { delta: 1.0 } },
        ],
    )
    .expect("smooth mixed instance is valid")
}

/// A crafted certificate that the harness can detect failures: a capped
/// (hence nonconvex) energy together with inputs and a contraction whose
/// compatibility slack is exactly -0.5.
pub struct NegativeControl {
    pub energy: EnergyFunctional,
    pub f: L2Fn,
    pub g: L2Fn,
    pub contraction: PiecewiseLinear,
}

/// Two nodes, capped absolute value with cap 1, `f = g = (1, 0)`, and the
/// halving map `t/2`. Then `f + g` and `f - g` have differences 2 and 0
/// across the edge (energies 1 + 0), while `f + g/2` and `f - g/2` have
/// differences 1.5 and 0.5 (energies 1 + 0.5), so the slack is exactly -0.5.
pub fn negative_control() -> NegativeControl {
    let energy = EnergyFunctional::mixed_allowing_nonconvex(
        MeasureSpace::counting(2),
        vec![EdgeTerm { from: 0, to: 1, edge: EdgeFunction::CappedAbs { cap: 1.0 } }],
    )
    .expect("capped edge is a valid nonconvex instance");
    let f = L2Fn::new(energy.space().clone(), vec![1.0, 0.0]).expect("two values");
    let g = f.clone();
    NegativeControl { energy, f, g, contraction: PiecewiseLinear::affine(0.5, 0.0) }
}

pub fn canonical_names() -> [&'static str; 4] {
    ["two_node_quadratic", "pure_indicator", "mixed_smooth", "negative_control"]
}

pub fn canonical_instance(name: &str) -> Result<EnergyFunctional> {
    match name {
        "two_node_quadratic" => Ok(two_node_quadratic()),
        "pure_indicator" => Ok(pure_indicator()),
        "mixed_smooth" => Ok(mixed_smooth()),
        "negative_control" => Ok(negative_control().energy),
        other => Err(Error::InvalidConfig(format!(
            "unknown canonical instance {other:?}; known: {:?}",
            canonical_names()
        ))),
    }
}

/// Randomized search for a midpoint-convexity violation
/// `2 E((a + b) / 2) > E(a) + E(b)`. Returns the first witness `(a, b, slack)`
/// found, or `None` after `max_samples` attempts. Convex instances never
/// yield one; capped instances usually do within a few hundred samples.
pub fn find_midpoint_violation(
    e: &EnergyFunctional,
    seed: u64,
    max_samples: u64,
) -> Result<Option<(L2Fn, L2Fn, f64)>> {
    let tol = Tolerance::default();
    for index in 0..max_samples {
        let mut rng = stream(seed, "find_midpoint_violation", index);
        let a = crate::criteria::sweep::sample_fn(&mut rng, e.space());
        let b = crate::criteria::sweep::sample_fn(&mut rng, e.space());
        let mid = (&a + &b).scale(0.5);
        let lhs = e.eval(&mid)?.scale(2.0);
        let rhs = e.eval(&a)? + e.eval(&b)?;
        let r = Residual::from_pair(lhs, rhs, tol);
        if r.status == crate::criteria::ResidualStatus::Violated {
            return Ok(Some((a, b, r.slack_value())));
        }
    }
    Ok(None)
}

/// One instance slot in a [`SuiteConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InstanceEntry {
    /// Looked up by [`canonical_instance`]. The `negative_control` name also
    /// injects the crafted certificate check into its report.
    Canonical { name: String },
    /// Loaded from an instance document on disk.
    File { path: PathBuf },
    /// Generated from a spec with a per-entry seed.
    Generated { spec: InstanceSpec },
}

impl InstanceEntry {
    /// Label, energy, and (for the crafted control) a deterministic
    /// certificate check to merge into the sweep report.
    fn realize(&self, seed: u64, tol: Tolerance) -> Result<(String, EnergyFunctional, Option<CheckReport>)> {
        match self {
            InstanceEntry::Canonical { name } => {
                let energy = canonical_instance(name)?;
                let crafted = if name == "negative_control" {
                    let nc = negative_control();
                    let r = compatibility_residual(&nc.energy, &nc.contraction, &nc.f, &nc.g, tol)?;
                    Some(CheckReport::single("crafted_halving", r))
                } else {
                    None
                };
                Ok((name.clone(), energy, crafted))
            }
            InstanceEntry::File { path } => {
                let doc = InstanceDoc::load(path)?;
                Ok((path.display().to_string(), doc.build()?, None))
            }
            InstanceEntry::Generated { spec } => {
                Ok((spec.to_string(), generate_instance(spec, seed)?, None))
            }
        }
    }
}

/// Full description of a suite run. Serializable so runs can be pinned in
/// config files; `Default` covers the three convex canonical instances over
/// every check family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n_samples: u64,
    #[serde(default)]
    pub tolerance: Tolerance,
    pub families: Vec<FamilyKind>,
    pub instances: Vec<InstanceEntry>,
    #[serde(default)]
    pub mode: ExecMode,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 17,
            n_samples: 200,
            tolerance: Tolerance::default(),
            families: FamilyKind::ALL.to_vec(),
            instances: vec![
                InstanceEntry::Canonical { name: "two_node_quadratic".into() },
                InstanceEntry::Canonical { name: "pure_indicator".into() },
                InstanceEntry::Canonical { name: "mixed_smooth".into() },
            ],
            mode: ExecMode::default(),
        }
    }
}

/// Sweep report for one suite entry. Nonconvex instances are negative
/// controls: their violations are expected and counted separately.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub label: String,
    pub expected_violation: bool,
    pub report: Report,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub reports: Vec<SuiteReport>,
    /// Violations on instances that must pass.
    pub violations: u64,
    /// Violations on negative controls, which are supposed to appear.
    pub expected_violations: u64,
    /// Negative controls that failed to produce any violation.
    pub missed_controls: Vec<String>,
}

impl SuiteOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations > 0 || !self.missed_controls.is_empty() {
            1
        } else if self.expected_violations > 0 {
            3
        } else {
            0
        }
    }
}

/// Run every entry's sweep and aggregate the pass/fail split. Entry `i` uses
/// seed `config.seed + i` for generation so entries decouple, while the
/// sweep itself keeps the config seed for reproducibility.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut reports = Vec::with_capacity(config.instances.len());
    let mut violations = 0;
    let mut expected_violations = 0;
    let mut missed_controls = Vec::new();

    for (index, entry) in config.instances.iter().enumerate() {
        let entry_seed = config.seed.wrapping_add(index as u64);
        let (label, energy, crafted) = entry.realize(entry_seed, config.tolerance)?;
        let control = !energy.is_convex();
        let mut report = fuzz_sweep(
            &energy,
            &config.families,
            config.seed,
            config.n_samples,
            config.tolerance,
            config.mode,
        )?;
        if let Some(check) = crafted {
            let mut checks = report.checks;
            checks.push(check);
            report = Report::from_checks(report.instance, config.seed, config.tolerance, checks);
        }

        if control {
            expected_violations += report.violations;
            if report.violations == 0 {
                missed_controls.push(label.clone());
            }
        } else {
            violations += report.violations;
        }
        reports.push(SuiteReport { label, expected_violation: control, report });
    }

    Ok(SuiteOutcome { reports, violations, expected_violations, missed_controls })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format {other:?}; expected json or csv"
            ))),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render a suite outcome: pretty JSON of the whole structure, or a flat CSV
/// with one row per (instance, check).
pub fn render_outcome(outcome: &SuiteOutcome, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(outcome)? + "\n"),
        OutputFormat::Csv => {
            let mut out = String::from("instance,check,samples,violations,vacuous,min_slack\n");
            for sr in &outcome.reports {
                for check in &sr.report.checks {
                    let slack = check.min_slack.map_or(String::new(), |s| s.to_string());
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        csv_field(&sr.label),
                        csv_field(&check.name),
                        check.n,
                        check.violations,
                        check.vacuous,
                        slack
                    ));
                }
            }
            Ok(out)
        }
    }
}

fn input_fn(e: &EnergyFunctional, inputs: &serde_json::Value, key: &str) -> Result<L2Fn> {
    let values: Vec<f64> = serde_json::from_value(
        inputs
            .get(key)
            .cloned()
            .ok_or_else(|| Error::InvalidConfig(format!("worst case record lacks {key:?}")))?,
    )?;
    L2Fn::new(e.space().clone(), values)
}

fn input_param<T: serde::de::DeserializeOwned>(
    inputs: &serde_json::Value,
    key: &str,
) -> Result<T> {
    let v = inputs
        .get("params")
        .and_then(|p| p.get(key))
        .cloned()
        .ok_or_else(|| Error::InvalidConfig(format!("worst case record lacks param {key:?}")))?;
    Ok(serde_json::from_value(v)?)
}

/// Recompute the residual a sweep recorded as some check's worst case. The
/// recorded inputs round-trip exactly, so the returned slack is bitwise
/// equal to the recorded one; this turns any report into a replayable
/// witness.
pub fn reevaluate_worst_case(
    e: &EnergyFunctional,
    check: &str,
    inputs: &serde_json::Value,
    tol: Tolerance,
) -> Result<Residual> {
    let f = input_fn(e, inputs, "f")?;
    let g = input_fn(e, inputs, "g")?;
    let compat = |c: &PiecewiseLinear| compatibility_residual(e, c, &f, &g, tol);
    match check {
        "pos_part" => compat(&NamedContraction::PosPart.build()?),
        "abs" => compat(&NamedContraction::Abs.build()?),
        "halving" => compat(&PiecewiseLinear::affine(0.5, 0.0)),
        "clamp_sym" => compat(&NamedContraction::ClampSym { alpha: input_param(inputs, "alpha")? }.build()?),
        "min_alpha" => compat(&NamedContraction::MinAlpha { alpha: input_param(inputs, "alpha")? }.build()?),
        "clamp_0_alpha" => {
            compat(&NamedContraction::Clamp0Alpha { alpha: input_param(inputs, "alpha")? }.build()?)
        }
        "tent" => compat(&NamedContraction::Tent { alpha: input_param(inputs, "alpha")? }.build()?),
        "phi" => compat(&NamedContraction::Phi { x: input_param(inputs, "x")? }.build()?),
        "phi_pair" => compat(
            &NamedContraction::PhiPair {
                x1: input_param(inputs, "x1")?,
                x2: input_param(inputs, "x2")?,
            }
            .build()?,
        ),
        "dn" => compat(&build_dn(input_param(inputs, "n")?)),
        "cg.lattice" | "cg.banded" => {
            let (lattice, banded) = cg_residuals(e, &f, &g, input_param(inputs, "alpha")?, tol)?;
            Ok(if check == "cg.lattice" { lattice } else { banded })
        }
        "bh.lattice" | "bh.banded" => {
            let (lattice, banded) = bh_residuals(e, &f, &g, input_param(inputs, "alpha")?, tol)?;
            Ok(if check == "bh.lattice" { lattice } else { banded })
        }
        "bp_star" => {
            let p = PiecewiseLinear::new(
                input_param(inputs, "p_breaks")?,
                input_param(inputs, "p_slopes")?,
                0.0,
            )?;
            bp_star_residual(e, &p, &f, &g, tol)
        }
        "composition.outer_step" | "composition.inner_step" | "composition.composed" => {
            let outer = PiecewiseLinear::new(
                input_param(inputs, "outer_breaks")?,
                input_param(inputs, "outer_slopes")?,
                0.0,
            )?;
            let inner = PiecewiseLinear::new(
                input_param(inputs, "inner_breaks")?,
                input_param(inputs, "inner_slopes")?,
                0.0,
            )?;
            match check {
                "composition.outer_step" => {
                    compatibility_residual(e, &outer, &f, &inner.apply(&g), tol)
                }
                "composition.inner_step" => compatibility_residual(e, &inner, &f, &g, tol),
                _ => compatibility_residual(e, &outer.compose(&inner), &f, &g, tol),
            }
        }
        "midpoint_vacuity" => {
            let ef = e.eval(&f)?;
            Ok(Residual::from_pair(ef + ef, e.eval(&(&f + &g))? + e.eval(&(&f - &g))?, tol))
        }
        "crafted_halving" => compat(&PiecewiseLinear::affine(0.5, 0.0)),
        other => Err(Error::InvalidConfig(format!("unknown check name {other:?}"))),
    }
}
