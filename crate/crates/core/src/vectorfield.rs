//! Polynomial right-hand sides `h(x) = c0 + c1 x + ... + cd x^d` on `[0, x_max]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Bracket};

/// Grid density used when bracketing zeros of `h`.
pub const ROOT_GRID_POINTS: usize = 4096;

/// Default bisection tolerance for equilibria.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

/// Autonomous scalar vector field with polynomial coefficients, restricted to
/// the state interval `[0, x_max]`.
///
/// Construction only checks that the numbers are usable. Whether the field
/// satisfies the modelling hypotheses (vanishing at the origin, hyperbolic
/// linear part, nonzero nonlinear part, alternating equilibria) is reported
/// by [`PolynomialVectorField::validate_hypotheses`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialVectorField {
    coeffs: Vec<f64>,
    x_max: f64,
}

impl PolynomialVectorField {
    pub fn new(coeffs: Vec<f64>, x_max: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("coefficient list is empty".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coefficient {c}")));
        }
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::InvalidParameter(format!("x_max must be positive, got {x_max}")));
        }
        Ok(Self { coeffs, x_max })
    }

    /// `h(x) = a x`; degenerate (no nonlinear part) but useful as a closed-form reference.
    pub fn linear(a: f64, x_max: f64) -> Result<Self> {
        Self::new(vec![0.0, a], x_max)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Index of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// `A = h'(0)`.
    pub fn linear_coefficient(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }

    /// True when `H(x) = h(x) - h(0) - A x` is not identically zero.
    pub fn has_nonlinear_part(&self) -> bool {
        self.coeffs.iter().skip(2).any(|&c| c != 0.0)
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if (0.0..=self.x_max).contains(&x) {
            Ok(())
        } else {
            Err(Error::Domain { x, x_max: self.x_max })
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.value(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.slope(x))
    }

    /// Horner evaluation without the domain check; integrator stages may
    /// probe slightly outside the interval.
    #[inline]
    pub(crate) fn value(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    #[inline]
    pub(crate) fn slope(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c)
    }

    /// Zeros of `h` in `[0, x_max]` in increasing order, each with its slope
    /// and stability.
    ///
    /// Fails when a zero is non-hyperbolic (`|h'| < tol`, or a tangential
    /// zero without sign change) or when the zeros do not alternate
    /// stable/unstable ending with a stable one.
    pub fn find_equilibria(&self, tol: f64) -> Result<Vec<Equilibrium>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        let scan = self.scan_equilibria(tol);
        if let Some(x) = scan.non_hyperbolic.first() {
            return Err(Error::Hypothesis(format!(
                "non-hyperbolic equilibrium near x = {x}"
            )));
        }
        if let Some(msg) = pattern_violation(&scan.equilibria) {
            return Err(Error::Hypothesis(msg));
        }
        Ok(scan.equilibria)
    }

    fn scan_equilibria(&self, tol: f64) -> EquilibriumScan {
        let grid = scalar::linspace(0.0, self.x_max, ROOT_GRID_POINTS);
        let values: Vec<f64> = grid.iter().map(|&x| self.value(x)).collect();
        let mut roots = Vec::new();
        for b in scalar::brackets(&values) {
            let x = match b {
                Bracket::Node(i) => grid[i],
                Bracket::Cell(i) => {
                    let s = scalar::sign(values[i]);
                    // infallible objective
                    scalar::bisect(|x| Ok(self.value(x)), grid[i], grid[i + 1], s, tol)
                        .unwrap_or(grid[i])
                }
            };
            roots.push(x);
        }

        let mut non_hyperbolic = Vec::new();
        let scale = self.coeffs.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        for i in scalar::touch_candidates(&values) {
            let (a, b) = (grid[i - 1], grid[i + 1]);
            let (sa, sb) = (scalar::sign(self.slope(a)), scalar::sign(self.slope(b)));
            if sa == 0 || sa == sb {
                continue;
            }
            let x = scalar::bisect(|x| Ok(self.slope(x)), a, b, sa, tol).unwrap_or(grid[i]);
            if self.value(x).abs() <= 1e-9 * scale {
                non_hyperbolic.push(x);
            }
        }

        let mut equilibria = Vec::with_capacity(roots.len());
        for x in roots {
            let slope = self.slope(x);
            if slope.abs() < tol || slope == 0.0 {
                non_hyperbolic.push(x);
                continue;
            }
            let kind = if slope < 0.0 {
                EquilibriumKind::Stable
            } else {
                EquilibriumKind::Unstable
            };
            equilibria.push(Equilibrium { location: x, slope, kind });
        }
        non_hyperbolic.sort_by(f64::total_cmp);
        EquilibriumScan { equilibria, non_hyperbolic }
    }

    /// Check the standing hypotheses on `h` and report each outcome.
    pub fn validate_hypotheses(&self) -> ValidationReport {
        let a = self.linear_coefficient();
        let c0 = self.coeffs[0];
        let mut checks = Vec::new();

        checks.push(if c0 == 0.0 {
            Check::pass("P1", "h(0) = 0", String::new())
        } else {
            Check::fail("P1", "h(0) = 0", format!("c0 = {c0}"))
        });
        checks.push(if a != 0.0 {
            Check::pass("P1", "origin hyperbolic", format!("A = {a}"))
        } else {
            Check::fail("P1", "origin hyperbolic", "A = h'(0) = 0".into())
        });
        if a > 0.0 {
            checks.push(Check::warn(
                "P1",
                "A < 0",
                format!("A = {a} > 0; regime tables assume A < 0"),
            ));
        } else if a < 0.0 {
            checks.push(Check::pass("P1", "A < 0", format!("A = {a}")));
        }
        checks.push(if self.has_nonlinear_part() {
            Check::pass("P1", "nonlinear part", format!("degree {}", self.degree()))
        } else {
            Check::fail("P1", "nonlinear part", "H(x) is identically zero".into())
        });

        let scan = self.scan_equilibria(EQUILIBRIUM_TOL);
        checks.push(if scan.non_hyperbolic.is_empty() {
            Check::pass("P2", "hyperbolic equilibria", format!("k = {}", scan.equilibria.len()))
        } else {
            Check::fail(
                "P2",
                "hyperbolic equilibria",
                format!("non-hyperbolic zero(s) at {:?}", scan.non_hyperbolic),
            )
        });
        checks.push(match pattern_violation(&scan.equilibria) {
            None => Check::pass("P2", "alternating equilibria", format!("k = {}", scan.equilibria.len())),
            Some(msg) => Check::fail("P2", "alternating equilibria", msg),
        });

        ValidationReport {
            linear_coefficient: a,
            equilibria: scan.equilibria,
            checks,
        }
    }
}

struct EquilibriumScan {
    equilibria: Vec<Equilibrium>,
    non_hyperbolic: Vec<f64>,
}

fn pattern_violation(eqs: &[Equilibrium]) -> Option<String> {
    let last = match eqs.last() {
        None => return Some("no equilibria in the domain".into()),
        Some(e) => e,
    };
    if eqs.windows(2).any(|w| w[0].kind == w[1].kind) {
        return Some("equilibria do not alternate stable/unstable".into());
    }
    if last.kind == EquilibriumKind::Unstable {
        return Some(format!(
            "largest equilibrium x = {} is unstable (k = {}, wrong parity)",
            last.location,
            eqs.len()
        ));
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: f64,
    /// `h'(location)`.
    pub slope: f64,
    pub kind: EquilibriumKind,
}

/// Stable equilibria `0 = X1s < X2s < ...` of an ordered equilibrium list.
pub fn stable_equilibria(eqs: &[Equilibrium]) -> Vec<f64> {
    eqs.iter()
        .filter(|e| e.kind == EquilibriumKind::Stable)
        .map(|e| e.location)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "ok",
            CheckStatus::Warn => "warn",
            CheckStatus::Fail => "FAIL",
        })
    }
}

/// Outcome of a single hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    /// Hypothesis label, e.g. `"P1"`.
    pub hypothesis: &'static str,
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    pub(crate) fn pass(hypothesis: &'static str, name: &'static str, detail: String) -> Self {
        Self { hypothesis, name, status: CheckStatus::Pass, detail }
    }
    pub(crate) fn warn(hypothesis: &'static str, name: &'static str, detail: String) -> Self {
        Self { hypothesis, name, status: CheckStatus::Warn, detail }
    }
    pub(crate) fn fail(hypothesis: &'static str, name: &'static str, detail: String) -> Self {
        Self { hypothesis, name, status: CheckStatus::Fail, detail }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:<4} {}", self.hypothesis, self.status, self.name)?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub linear_coefficient: f64,
    pub equilibria: Vec<Equilibrium>,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    /// No check failed (warnings allowed).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn has_warnings(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Warn)
    }

    fn status_of(&self, hypothesis: &str) -> CheckStatus {
        self.checks
            .iter()
            .filter(|c| c.hypothesis == hypothesis)
            .map(|c| c.status)
            .max_by_key(|s| *s as u8)
            .unwrap_or(CheckStatus::Pass)
    }

    /// One-line summary such as `P1 ok (A=-2), P2 ok (k=3)`.
    pub fn summary(&self) -> String {
        format!(
            "P1 {} (A={}), P2 {} (k={})",
            self.status_of("P1"),
            self.linear_coefficient,
            self.status_of("P2"),
            self.equilibria.len()
        )
    }
}
