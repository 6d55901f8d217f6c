//! Characterizing measures of exchangeable coalescents.
//!
//! A Λ-measure on `[0, 1]` is a Kingman mass at 0, a star mass at 1, weighted
//! beta densities and point atoms in `(0, 1)`. A Ξ-measure on the simplex is a
//! Kingman mass plus finitely many atoms with finite support. Everything the
//! other modules need from a measure goes through [`Measure`], which can only
//! be obtained by validation.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::{self, ABS_TOL, REL_TOL};
use crate::special::{ln_beta, one_minus_survival, survival_kernel};

/// Beyond this integer order `Φ(η)` of a beta component switches from the
/// positive Beta-ratio series to quadrature.
const BETA_SERIES_MAX_ORDER: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaComponent {
    pub a: f64,
    pub b: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointAtom {
    pub u: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    #[serde(default)]
    pub kingman_mass: f64,
    #[serde(default)]
    pub star_mass: f64,
    #[serde(default)]
    pub beta: Vec<BetaComponent>,
    #[serde(default)]
    pub atoms: Vec<PointAtom>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplexAtom {
    pub x: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSpec {
    #[serde(default)]
    pub kingman_mass: f64,
    #[serde(default)]
    pub atoms: Vec<SimplexAtom>,
}

/// Raw measure as read from a measure file; `kind` selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureSpec {
    Lambda(LambdaSpec),
    Xi(XiSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Lambda,
    Xi,
}

/// A nonnegative quantity that may be `+∞`. Infinite integrals never enter
/// float arithmetic; callers have to match on them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    fn add(self, other: Extended) -> Extended {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::Infinite,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("infinity"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::Infinite => s.serialize_str("infinity"),
        }
    }
}

/// One additive piece of a validated measure (the Kingman mass is kept apart).
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// Λ-mass at `u = 1`.
    Star { weight: f64 },
    /// `weight` times the beta(a, b) probability density on `(0, 1)`.
    Beta { a: f64, b: f64, weight: f64 },
    /// Λ-atom at `u ∈ (0, 1)`.
    Point { u: f64, weight: f64 },
    /// Ξ-atom; `norm1 = |x|`, `norm2 = (x, x)`.
    Simplex { x: Vec<f64>, weight: f64, norm1: f64, norm2: f64 },
}

impl Component {
    /// Total mass of the component under Ξ (or Λ).
    pub fn weight(&self) -> f64 {
        match *self {
            Component::Star { weight }
            | Component::Beta { weight, .. }
            | Component::Point { weight, .. }
            | Component::Simplex { weight, .. } => weight,
        }
    }
}

/// Classification of a measure by the two integrability conditions that
/// govern the `K_n / n` limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    /// No Kingman mass and `∫ |x|/(x,x) Ξ(dx) < ∞`: the coalescent lacks
    /// proper frequencies (a positive dust fraction survives).
    pub proper_freq_condition: bool,
    /// No Kingman mass and `∫ Ξ(dx)/(x,x) < ∞`.
    pub simple_condition: bool,
    pub h1: Extended,
    pub m0: Extended,
}

/// Summary of the Lévy measure of the subordinator `-log S_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevyPart {
    /// Point mass at `-log(1 - |x|)` (infinity when `|x| = 1`).
    PointMass { location: Extended, mass: f64 },
    /// Density `y ↦ weight / B(a, b) · (1 - e^{-y})^(a-3) e^{-b y}` on `(0, ∞)`.
    BetaDensity { a: f64, b: f64, weight: f64 },
}

impl fmt::Display for LevyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevyPart::PointMass { location, mass } => write!(f, "point mass {mass} at {location}"),
            LevyPart::BetaDensity { a, b, weight } => write!(
                f,
                "density y -> {weight} / B({a}, {b}) * (1 - exp(-y))^({}) * exp(-{b} y) on (0, infinity)",
                a - 3.0
            ),
        }
    }
}

/// Validated characterizing measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    kind: MeasureKind,
    kingman: f64,
    components: Vec<Component>,
    spec: MeasureSpec,
}

fn check_mass(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonfiniteMass(format!("{name} = {v}")));
    }
    if v < 0.0 {
        return Err(Error::NegativeWeight(format!("{name} = {v}")));
    }
    Ok(())
}

fn trimmed(x: &[f64]) -> Vec<f64> {
    let mut x = x.to_vec();
    while x.last() == Some(&0.0) {
        x.pop();
    }
    x
}

impl Measure {
    /// Checks every invariant of the raw spec.
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        match &spec {
            MeasureSpec::Lambda(l) => Self::from_lambda(l, spec.clone()),
            MeasureSpec::Xi(x) => Self::from_xi(x, spec.clone()),
        }
    }

    fn from_lambda(l: &LambdaSpec, spec: MeasureSpec) -> Result<Self> {
        check_mass("kingman_mass", l.kingman_mass)?;
        check_mass("star_mass", l.star_mass)?;
        let mut components = Vec::new();
        if l.star_mass > 0.0 {
            components.push(Component::Star { weight: l.star_mass });
        }
        for (i, c) in l.beta.iter().enumerate() {
            check_mass(&format!("beta[{i}].weight"), c.weight)?;
            if !(c.a.is_finite() && c.b.is_finite() && c.a > 0.0 && c.b > 0.0) {
                return Err(Error::invalid(format!(
                    "beta[{i}] needs finite a > 0 and b > 0, got a = {}, b = {}",
                    c.a, c.b
                )));
            }
            if c.weight > 0.0 {
                components.push(Component::Beta { a: c.a, b: c.b, weight: c.weight });
            }
        }
        for (i, atom) in l.atoms.iter().enumerate() {
            check_mass(&format!("atoms[{i}].weight"), atom.weight)?;
            if atom.weight == 0.0 {
                return Err(Error::invalid(format!("atoms[{i}] must have positive weight")));
            }
            if !(atom.u > 0.0 && atom.u < 1.0) {
                return Err(Error::invalid(format!(
                    "atoms[{i}].u = {} must lie in (0, 1); use kingman_mass or star_mass for the endpoints",
                    atom.u
                )));
            }
            if l.atoms[..i].iter().any(|o| o.u == atom.u) {
                return Err(Error::DuplicateAtom(format!("u = {}", atom.u)));
            }
            components.push(Component::Point { u: atom.u, weight: atom.weight });
        }
        let total = l.kingman_mass + components.iter().map(Component::weight).sum::<f64>();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonfiniteMass(format!("total mass = {total}")));
        }
        Ok(Measure { kind: MeasureKind::Lambda, kingman: l.kingman_mass, components, spec })
    }

    fn from_xi(xi: &XiSpec, spec: MeasureSpec) -> Result<Self> {
        check_mass("kingman_mass", xi.kingman_mass)?;
        let mut components = Vec::new();
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for (i, atom) in xi.atoms.iter().enumerate() {
            check_mass(&format!("atoms[{i}].weight"), atom.weight)?;
            if atom.weight == 0.0 {
                return Err(Error::invalid(format!("atoms[{i}] must have positive weight")));
            }
            let x = trimmed(&atom.x);
            if x.is_empty() {
                return Err(Error::SimplexViolation(format!(
                    "atoms[{i}] has (x,x) = 0; put mass at zero into kingman_mass"
                )));
            }
            if x.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::SimplexViolation(format!("atoms[{i}] has nonpositive coordinates {x:?}")));
            }
            if x.windows(2).any(|w| w[0] < w[1]) {
                return Err(Error::SimplexViolation(format!("atoms[{i}] = {x:?} is not nonincreasing")));
            }
            let norm1: f64 = x.iter().sum();
            if norm1 > 1.0 + 4.0 * f64::EPSILON {
                return Err(Error::SimplexViolation(format!("atoms[{i}] has |x| = {norm1} > 1")));
            }
            let norm1 = norm1.min(1.0);
            if seen.contains(&x) {
                return Err(Error::DuplicateAtom(format!("x = {x:?}")));
            }
            seen.push(x.clone());
            let norm2 = x.iter().map(|v| v * v).sum();
            components.push(Component::Simplex { x, weight: atom.weight, norm1, norm2 });
        }
        let total = xi.kingman_mass + components.iter().map(Component::weight).sum::<f64>();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::NonfiniteMass(format!("total mass = {total}")));
        }
        Ok(Measure { kind: MeasureKind::Xi, kingman: xi.kingman_mass, components, spec })
    }

    /// Kingman coalescent with `Λ = mass · δ_0`.
    pub fn kingman(mass: f64) -> Result<Self> {
        Self::new(MeasureSpec::Lambda(LambdaSpec { kingman_mass: mass, ..Default::default() }))
    }

    /// Star-shaped coalescent with `Λ = mass · δ_1`.
    pub fn star(mass: f64) -> Result<Self> {
        Self::new(MeasureSpec::Lambda(LambdaSpec { star_mass: mass, ..Default::default() }))
    }

    /// `Λ = beta(a, b)` probability measure.
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Self::new(MeasureSpec::Lambda(LambdaSpec {
            beta: vec![BetaComponent { a, b, weight: 1.0 }],
            ..Default::default()
        }))
    }

    /// `Ξ = δ_x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::new(MeasureSpec::Xi(XiSpec {
            kingman_mass: 0.0,
            atoms: vec![SimplexAtom { x: x.to_vec(), weight: 1.0 }],
        }))
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn kingman_mass(&self) -> f64 {
        self.kingman
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn has_beta(&self) -> bool {
        self.components.iter().any(|c| matches!(c, Component::Beta { .. }))
    }

    /// The equivalent Ξ-measure: a Λ-atom at `u` becomes the simplex point
    /// `(u, 0, 0, ...)`. Beta densities have no finite-atom Ξ form.
    pub fn to_xi(&self) -> Result<Measure> {
        if self.kind == MeasureKind::Xi {
            return Ok(self.clone());
        }
        let mut atoms = Vec::new();
        for c in &self.components {
            match *c {
                Component::Star { weight } => atoms.push(SimplexAtom { x: vec![1.0], weight }),
                Component::Point { u, weight } => atoms.push(SimplexAtom { x: vec![u], weight }),
                Component::Beta { .. } => {
                    return Err(Error::UnsupportedMeasure(
                        "beta densities cannot be embedded as finitely many simplex atoms".into(),
                    ))
                }
                Component::Simplex { .. } => unreachable!("Λ-measure holds no simplex atoms"),
            }
        }
        Measure::new(MeasureSpec::Xi(XiSpec { kingman_mass: self.kingman, atoms }))
    }

    /// Exact classification against the proper-frequency and simple-measure
    /// conditions.
    pub fn condition_report(&self) -> ConditionReport {
        let kingman = self.kingman > 0.0;
        let mut h1 = Extended::Finite(0.0);
        let mut m0 = Extended::Finite(0.0);
        for c in &self.components {
            let (ch, cm) = match *c {
                Component::Star { weight } => (Extended::Finite(weight), Extended::Finite(weight)),
                Component::Point { u, weight } => (Extended::Finite(weight / u), Extended::Finite(weight / (u * u))),
                Component::Beta { a, b, weight } => {
                    // ∫ u^(a-2)(1-u)^(b-1) du < ∞ iff a > 1; ∫ u^(a-3)... iff a > 2.
                    let ch = if a > 1.0 { Extended::Finite(weight * (a + b - 1.0) / (a - 1.0)) } else { Extended::Infinite };
                    let cm = if a > 2.0 {
                        Extended::Finite(weight * (a + b - 1.0) * (a + b - 2.0) / ((a - 1.0) * (a - 2.0)))
                    } else {
                        Extended::Infinite
                    };
                    (ch, cm)
                }
                Component::Simplex { weight, norm1, norm2, .. } => {
                    (Extended::Finite(weight * norm1 / norm2), Extended::Finite(weight / norm2))
                }
            };
            h1 = h1.add(ch);
            m0 = m0.add(cm);
        }
        if kingman {
            h1 = Extended::Infinite;
            m0 = Extended::Infinite;
        }
        ConditionReport {
            proper_freq_condition: !kingman && h1.is_finite(),
            simple_condition: !kingman && m0.is_finite(),
            h1,
            m0,
        }
    }

    fn condition_label(&self) -> &'static str {
        match self.kind {
            MeasureKind::Lambda => "cond2",
            MeasureKind::Xi => "cond",
        }
    }

    /// Fails with [`Error::ConditionViolated`] unless the coalescent lacks
    /// proper frequencies.
    pub fn require_proper_frequencies(&self) -> Result<ConditionReport> {
        let report = self.condition_report();
        if report.proper_freq_condition {
            return Ok(report);
        }
        let detail = if self.kingman > 0.0 {
            format!("mass at zero is {} > 0", self.kingman)
        } else {
            match self.kind {
                MeasureKind::Lambda => "∫ u^-1 Λ(du) is infinite".to_string(),
                MeasureKind::Xi => "∫ |x|/(x,x) Ξ(dx) is infinite".to_string(),
            }
        };
        Err(Error::ConditionViolated { condition: self.condition_label(), detail })
    }

    /// Fails with [`Error::ConditionViolated`] unless `∫ Ξ(dx)/(x,x)` is finite.
    pub fn require_simple(&self) -> Result<(ConditionReport, f64)> {
        let report = self.condition_report();
        match (report.simple_condition, report.m0) {
            (true, Extended::Finite(m0)) => Ok((report, m0)),
            _ => Err(Error::ConditionViolated {
                condition: "cond3",
                detail: if self.kingman > 0.0 {
                    format!("mass at zero is {} > 0", self.kingman)
                } else {
                    "∫ Ξ(dx)/(x,x) is infinite".to_string()
                },
            }),
        }
    }

    /// Laplace exponent `Φ(η) = ∫ (1 - (1-|x|)^η) Ξ(dx)/(x,x)` of the
    /// subordinator `-log S_t`.
    pub fn laplace_exponent(&self, eta: f64) -> Result<f64> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be finite and nonnegative, got {eta}")));
        }
        self.require_proper_frequencies()?;
        if eta == 0.0 {
            return Ok(0.0);
        }
        let mut phi = 0.0;
        for c in &self.components {
            phi += match *c {
                Component::Star { weight } => weight,
                Component::Point { u, weight } => weight * one_minus_survival(u, eta) / (u * u),
                Component::Simplex { weight, norm1, norm2, .. } => weight * one_minus_survival(norm1, eta) / norm2,
                Component::Beta { a, b, weight } => weight * beta_laplace_exponent(a, b, eta)?,
            };
        }
        Ok(phi)
    }

    /// `∫ |x|^2/(x,x) Ξ(dx)` (for Λ: the mass on `(0, 1]`), which equals
    /// `2Φ(1) - Φ(2)`.
    pub fn square_functional(&self) -> f64 {
        self.components
            .iter()
            .map(|c| match *c {
                Component::Simplex { weight, norm1, norm2, .. } => weight * norm1 * norm1 / norm2,
                ref other => other.weight(),
            })
            .sum()
    }

    /// The Lévy measure `ϱ`: image of `Ξ(dx)/(x,x)` under `x ↦ -log(1-|x|)`.
    pub fn levy_density_description(&self) -> Result<Vec<LevyPart>> {
        self.require_proper_frequencies()?;
        let location = |s: f64| {
            if s >= 1.0 {
                Extended::Infinite
            } else {
                Extended::Finite(-(-s).ln_1p())
            }
        };
        Ok(self
            .components
            .iter()
            .map(|c| match *c {
                Component::Star { weight } => LevyPart::PointMass { location: Extended::Infinite, mass: weight },
                Component::Point { u, weight } => LevyPart::PointMass { location: location(u), mass: weight / (u * u) },
                Component::Simplex { weight, norm1, norm2, .. } => {
                    LevyPart::PointMass { location: location(norm1), mass: weight / norm2 }
                }
                Component::Beta { a, b, weight } => LevyPart::BetaDensity { a, b, weight },
            })
            .collect())
    }
}

/// `Φ(η)` of the beta(a, b) probability measure, `a > 1`.
///
/// For integer `η`, `1 - (1-u)^η = u Σ_{i<η} (1-u)^i` turns the integral into
/// `Σ_{i<η} B(a-1, b+i) / B(a, b)`, a sum of positive Beta ratios. Other
/// orders go through quadrature with the `u^(a-2)` singularity absorbed.
pub fn beta_laplace_exponent(a: f64, b: f64, eta: f64) -> Result<f64> {
    debug_assert!(a > 1.0);
    if eta == eta.trunc() && eta <= BETA_SERIES_MAX_ORDER {
        let mut term = (a + b - 1.0) / (a - 1.0);
        let mut sum = 0.0;
        for i in 0..eta as usize {
            sum += term;
            let bi = b + i as f64;
            term *= bi / (a - 1.0 + bi);
        }
        return Ok(sum);
    }
    let integral = quadrature::beta_weighted(|u| survival_kernel(eta, u), a - 1.0, b, ABS_TOL, REL_TOL)?;
    Ok(integral * (-ln_beta(a, b)).exp())
}
