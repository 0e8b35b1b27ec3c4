//! The time-omega map `R_omega(x) = phi(omega, x)` of the unpulsed flow and
//! the quantities derived from it:
//!
//! * `R_omega'(x)`, from the variational equation;
//! * `g(x) = x / R_omega(x) - 1`, the pulse strength that makes `x` the seed
//!   of an `omega`-periodic solution, and its derivative
//!   `g'(x) = (R_omega(x) - x R_omega'(x)) / R_omega(x)^2`;
//! * per-interval extrema of the ratio `R_omega(x) / x` between consecutive
//!   stable equilibria.
//!
//! At `x = 0` the ratio is replaced by its limit `exp(A omega)` and `g` by
//! `exp(-A omega) - 1`, where `A = h'(0)`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{flow_with_variational, IntegratorConfig};
use crate::output::{fmt_real, CsvWriter};
use crate::scalar::{self, Goal};
use crate::vectorfield::{stable_equilibria, Check, Equilibrium, EquilibriumKind, PolynomialVectorField};

/// Grid density for the ratio extremization.
pub const EXTREMUM_GRID_POINTS: usize = 4096;

/// Golden-section bracket width for ratio extrema.
pub const EXTREMUM_X_TOL: f64 = 1e-10;

/// Samples per sub-interval in the shape checks.
const SHAPE_GRID_POINTS: usize = 257;

/// Evaluates the time-omega map of a fixed vector field and period.
///
/// `(R_omega(x), R_omega'(x))` pairs are memoized per abscissa. The cache is
/// keyed by the exact bit pattern of `x`, so cached and fresh evaluations are
/// identical and results never depend on evaluation order. The analyzer is
/// `Sync` and may be shared across worker threads.
#[derive(Debug)]
pub struct StroboscopicAnalyzer {
    vf: PolynomialVectorField,
    omega: f64,
    cfg: IntegratorConfig,
    cache: Mutex<HashMap<u64, (f64, f64)>>,
}

impl StroboscopicAnalyzer {
    pub fn new(vf: PolynomialVectorField, omega: f64, cfg: IntegratorConfig) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        cfg.validate()?;
        Ok(Self { vf, omega, cfg, cache: Mutex::new(HashMap::new()) })
    }

    pub fn vector_field(&self) -> &PolynomialVectorField {
        &self.vf
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    /// Number of memoized abscissae.
    pub fn cache_len(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    /// `(R_omega(x), R_omega'(x))`.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let key = x.to_bits();
        if let Some(&v) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = flow_with_variational(&self.vf, x, self.omega, &self.cfg)?;
        self.cache.lock().expect("cache poisoned").insert(key, v);
        Ok(v)
    }

    /// Evaluate many abscissae in parallel; output order follows `xs`.
    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<(f64, f64)>> {
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    pub fn r_omega(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.0)
    }

    pub fn r_omega_prime(&self, x: f64) -> Result<f64> {
        Ok(self.eval(x)?.1)
    }

    /// `exp(A omega)`: the limit of `R_omega(x) / x` at 0 and the origin's
    /// stroboscopic multiplier without pulses.
    pub fn origin_multiplier(&self) -> f64 {
        (self.vf.linear_coefficient() * self.omega).exp()
    }

    /// `R_omega(x) / x`, continuously extended to `x = 0`.
    pub fn ratio(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(self.origin_multiplier());
        }
        Ok(self.r_omega(x)? / x)
    }

    /// `g(x) = x / R_omega(x) - 1`, with `g(0) = exp(-A omega) - 1`.
    pub fn g(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok((-self.vf.linear_coefficient() * self.omega).exp_m1());
        }
        Ok(x / self.r_omega(x)? - 1.0)
    }

    /// `R_omega(x) - x R_omega'(x)`, the numerator of `g'`; its sign is the
    /// sign of `g'`.
    pub fn g_numerator(&self, x: f64) -> Result<f64> {
        let (r, rp) = self.eval(x)?;
        Ok(r - x * rp)
    }

    /// `g'(x)` for `x > 0`.
    pub fn g_prime(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::InvalidParameter(format!("g' is undefined at x = {x}")));
        }
        let (r, rp) = self.eval(x)?;
        Ok((r - x * rp) / (r * r))
    }

    /// Extrema of `R_omega(x) / x` on the `j`-th interval between stable
    /// equilibria (1-based). The last interval runs from the largest stable
    /// equilibrium to `x_max` and is flagged as truncated.
    pub fn interval_bounds(&self, j: usize, equilibria: &[Equilibrium]) -> Result<IntervalBounds> {
        let stable = stable_equilibria(equilibria);
        let n = stable.len();
        if j == 0 || j > n {
            return Err(Error::InvalidParameter(format!("interval index {j} outside 1..={n}")));
        }
        let lower = stable[j - 1];
        let truncated = j == n;
        let upper = if truncated { self.vf.x_max() } else { stable[j] };

        let grid = scalar::linspace(lower, upper, EXTREMUM_GRID_POINTS);
        let ratios = self.ratios_on(&grid)?;

        let (min_point, beta, min_unique) = self.refine_extremum(&grid, &ratios, Goal::Minimize)?;
        let (max_point, gamma, max_unique) = self.refine_extremum(&grid, &ratios, Goal::Maximize)?;
        Ok(IntervalBounds {
            j,
            lower,
            upper,
            min_point,
            max_point,
            beta,
            gamma,
            unique: min_unique && max_unique,
            truncated,
        })
    }

    fn ratios_on(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let pairs = self.eval_many(grid)?;
        Ok(grid
            .iter()
            .zip(pairs)
            .map(|(&x, (r, _))| if x == 0.0 { self.origin_multiplier() } else { r / x })
            .collect())
    }

    /// Grid extremum refined by golden section, then polished by bisection on
    /// the sign of `g_numerator` (the ratio's derivative is `-numerator / x^2`)
    /// when the neighbouring nodes bracket it. Returns `(x, value, unique)`.
    fn refine_extremum(&self, grid: &[f64], ratios: &[f64], goal: Goal) -> Result<(f64, f64, bool)> {
        let better = |a: f64, b: f64| match goal {
            Goal::Minimize => a < b,
            Goal::Maximize => a > b,
        };
        let mut best = 0;
        for (i, &r) in ratios.iter().enumerate() {
            if better(r, ratios[best]) {
                best = i;
            }
        }
        let extreme = ratios[best];
        let band = 1e-9 * extreme.abs().max(1e-300);
        let unique = ratios
            .iter()
            .enumerate()
            .all(|(i, &r)| i.abs_diff(best) <= 1 || (r - extreme).abs() > band);

        if best == 0 || best + 1 == grid.len() {
            return Ok((grid[best], extreme, unique));
        }
        let (a, b) = (grid[best - 1], grid[best + 1]);
        let golden = scalar::golden_section(|x| self.ratio(x), a, b, goal, EXTREMUM_X_TOL)?;
        let mut x = golden.x;
        let mut value = golden.value;

        let (na, nb) = (self.g_numerator(a)?, self.g_numerator(b)?);
        let (sa, sb) = (scalar::sign(na), scalar::sign(nb));
        if sa != 0 && sb != 0 && sa != sb {
            let polished = scalar::bisect(|x| self.g_numerator(x), a, b, sa, 1e-14)?;
            let v = self.ratio(polished)?;
            let golden_clearly_better = match goal {
                Goal::Minimize => value < v - band,
                Goal::Maximize => value > v + band,
            };
            if !golden_clearly_better {
                x = polished;
                value = v;
            }
        }
        Ok((x, value, unique))
    }

    /// Shape hypotheses: convexity of `R_omega` below each unstable
    /// equilibrium and concavity above it, uniqueness of the ratio extrema,
    /// and the sign pattern of `R_omega' - R_omega / x` between consecutive
    /// extrema. Violations are reported, never fatal.
    pub fn check_shape_hypotheses(&self, equilibria: &[Equilibrium]) -> Result<ShapeReport> {
        let stable = stable_equilibria(equilibria);
        let n = stable.len();
        let bounds: Vec<IntervalBounds> = (1..=n)
            .map(|j| self.interval_bounds(j, equilibria))
            .collect::<Result<_>>()?;
        let scale = stable.iter().fold(1.0_f64, |m, &x| m.max(x));
        let floor = 1e3 * self.cfg.rel_tol * scale;

        let mut intervals = Vec::with_capacity(n);
        for (idx, b) in bounds.iter().enumerate() {
            let unstable = equilibria
                .iter()
                .find(|e| e.kind == EquilibriumKind::Unstable && e.location > b.lower && e.location < b.upper)
                .map(|e| e.location);

            let (mut convex_violations, mut concave_violations) = (0, 0);
            if let (Some(u), false) = (unstable, b.truncated) {
                convex_violations = self.curvature_violations(b.lower, u, 1.0, floor)?;
                concave_violations = self.curvature_violations(u, b.upper, -1.0, floor)?;
            }

            // R' - R/x should be positive on (m_j, M_j) and negative on
            // (M_j, m_{j+1}); equivalently the numerator R - x R' is negative
            // then positive.
            let next_min = bounds.get(idx + 1).map_or(self.vf.x_max(), |nb| nb.min_point);
            let mut sign_violations = 0;
            if b.min_point < b.max_point {
                sign_violations += self.numerator_violations(b.min_point, b.max_point, -1, floor)?;
            }
            if b.max_point < next_min {
                sign_violations += self.numerator_violations(b.max_point, next_min, 1, floor)?;
            }

            intervals.push(IntervalShape {
                bounds: *b,
                unstable,
                convex_violations,
                concave_violations,
                sign_violations,
            });
        }

        let p4_bad: Vec<usize> = intervals
            .iter()
            .filter(|s| s.convex_violations + s.concave_violations > 0)
            .map(|s| s.bounds.j)
            .collect();
        let p5_bad: Vec<usize> = intervals.iter().filter(|s| !s.bounds.unique).map(|s| s.bounds.j).collect();
        let sign_bad: Vec<usize> = intervals.iter().filter(|s| s.sign_violations > 0).map(|s| s.bounds.j).collect();

        let mut checks = Vec::new();
        checks.push(if p4_bad.is_empty() {
            Check::pass("P4", "convex/concave pattern", String::new())
        } else {
            Check::warn("P4", "convex/concave pattern", format!("violated on interval(s) {p4_bad:?}"))
        });
        checks.push(if p5_bad.is_empty() {
            Check::pass("P5", "unique ratio extrema", String::new())
        } else {
            Check::warn("P5", "unique ratio extrema", format!("plateau on interval(s) {p5_bad:?}"))
        });
        checks.push(if sign_bad.is_empty() {
            Check::pass("P5", "R' vs R/x sign pattern", String::new())
        } else {
            Check::warn("P5", "R' vs R/x sign pattern", format!("violated on interval(s) {sign_bad:?}"))
        });
        Ok(ShapeReport { intervals, checks })
    }

    /// Interior points of `(a, b)` whose second difference of `R_omega` has
    /// the wrong sign (`expected = 1` for convex) beyond `floor`.
    fn curvature_violations(&self, a: f64, b: f64, expected: f64, floor: f64) -> Result<usize> {
        let grid = scalar::linspace(a, b, SHAPE_GRID_POINTS);
        let r: Vec<f64> = self.eval_many(&grid)?.into_iter().map(|p| p.0).collect();
        Ok(r.windows(3)
            .filter(|w| expected * (w[0] - 2.0 * w[1] + w[2]) < -floor)
            .count())
    }

    /// Interior points of `(a, b)`, away from the ends, where the numerator
    /// has the sign opposite to `expected` beyond `floor`.
    fn numerator_violations(&self, a: f64, b: f64, expected: i8, floor: f64) -> Result<usize> {
        let grid = scalar::linspace(a, b, SHAPE_GRID_POINTS);
        let inner = &grid[2..grid.len() - 2];
        let pairs = self.eval_many(inner)?;
        Ok(inner
            .iter()
            .zip(pairs)
            .filter(|(&x, (r, rp))| {
                let num = r - x * rp;
                num.abs() > floor * x.max(1.0) && scalar::sign(num) != expected
            })
            .count())
    }

    /// Grid table `x, R, R', g, g'` over `n` points of `[0, x_max]`. `g'` is
    /// undefined at `x = 0` and written as `nan`.
    pub fn grid_rows(&self, n: usize) -> Result<Vec<GridRow>> {
        let grid = scalar::linspace(0.0, self.vf.x_max(), n);
        let pairs = self.eval_many(&grid)?;
        let g0 = self.g(0.0)?;
        Ok(grid
            .into_iter()
            .zip(pairs)
            .map(|(x, (r, rp))| {
                let (g, gp) = if x == 0.0 { (g0, f64::NAN) } else { (x / r - 1.0, (r - x * rp) / (r * r)) };
                GridRow { x, r_omega: r, r_omega_prime: rp, g, g_prime: gp }
            })
            .collect())
    }

    pub fn write_grid_csv<W: Write>(&self, n: usize, out: W) -> Result<()> {
        let rows = self.grid_rows(n)?;
        let mut w = CsvWriter::new(out, &["x", "r_omega", "r_omega_prime", "g", "g_prime"])?;
        for r in rows {
            w.row(&[
                fmt_real(r.x),
                fmt_real(r.r_omega),
                fmt_real(r.r_omega_prime),
                fmt_real(r.g),
                fmt_real(r.g_prime),
            ])?;
        }
        w.finish()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub x: f64,
    pub r_omega: f64,
    pub r_omega_prime: f64,
    pub g: f64,
    pub g_prime: f64,
}

/// Envelope of `R_omega` on one interval: `beta x <= R_omega(x) <= gamma x`,
/// with the minimum attained at `min_point` and the maximum at `max_point`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalBounds {
    /// 1-based interval index.
    pub j: usize,
    pub lower: f64,
    pub upper: f64,
    pub min_point: f64,
    pub max_point: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Both extrema attained at a single point (no plateau).
    pub unique: bool,
    /// The interval was cut at `x_max`; its extrema describe the truncated
    /// range only.
    pub truncated: bool,
}

impl IntervalBounds {
    /// `1 / gamma - 1`: pulse strength at which two periodic orbits are born
    /// near `max_point`.
    pub fn lambda_at_max(&self) -> f64 {
        1.0 / self.gamma - 1.0
    }

    /// `1 / beta - 1`.
    pub fn lambda_at_min(&self) -> f64 {
        1.0 / self.beta - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalShape {
    pub bounds: IntervalBounds,
    pub unstable: Option<f64>,
    pub convex_violations: usize,
    pub concave_violations: usize,
    pub sign_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub intervals: Vec<IntervalShape>,
    pub checks: Vec<Check>,
}

impl ShapeReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == crate::vectorfield::CheckStatus::Pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::flow_map;

    fn cubic_analyzer(omega: f64) -> StroboscopicAnalyzer {
        let vf = PolynomialVectorField::new(vec![0.0, -2.0, 3.0, -1.0], 30.0).unwrap();
        StroboscopicAnalyzer::new(vf, omega, IntegratorConfig::default()).unwrap()
    }

    #[test]
    fn linear_map_closed_form() {
        let vf = PolynomialVectorField::linear(-2.0, 2.0).unwrap();
        let an = StroboscopicAnalyzer::new(vf, 1.0, IntegratorConfig::default()).unwrap();
        let e2 = (-2.0f64).exp();
        assert!((an.r_omega(1.0).unwrap() - e2).abs() < 1e-9);
        assert!((an.r_omega_prime(0.3).unwrap() - e2).abs() < 1e-9);
        for x in [0.1, 0.5, 1.7] {
            assert!((an.g(x).unwrap() - (2.0f64.exp() - 1.0)).abs() < 1e-7);
            assert!(an.g_prime(x).unwrap().abs() < 1e-7);
        }
    }

    #[test]
    fn cubic_fixed_points_and_limits() {
        let an = cubic_analyzer(1.0);
        assert_eq!(an.r_omega(1.0).unwrap(), 1.0);
        assert_eq!(an.g(1.0).unwrap(), 0.0);
        assert_eq!(an.g(2.0).unwrap(), 0.0);
        assert!((an.g(0.0).unwrap() - 6.389_056_098_930_65).abs() < 1e-12);
        assert!((an.r_omega_prime(0.0).unwrap() - (-2.0f64).exp()).abs() < 1e-9);
        assert!(an.g_prime(0.0).is_err());
    }

    #[test]
    fn cache_does_not_change_values() {
        let an = cubic_analyzer(1.0);
        let first = an.eval(0.731).unwrap();
        assert_eq!(an.cache_len(), 1);
        let second = an.eval(0.731).unwrap();
        assert_eq!(first, second);
        let fresh = flow_with_variational(an.vector_field(), 0.731, 1.0, an.config()).unwrap();
        assert_eq!(first, fresh);
    }

    #[test]
    fn cubic_first_interval_bounds() {
        let an = cubic_analyzer(1.0);
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let b = an.interval_bounds(1, &eqs).unwrap();
        assert_eq!(b.min_point, 0.0);
        assert!((b.beta - (-2.0f64).exp()).abs() < 1e-12);
        assert!(b.max_point > 1.0 && b.max_point < 2.0);
        assert!(b.gamma > 1.0 && b.beta <= 1.0);
        assert!(b.unique && !b.truncated);
        // g' vanishes at the maximizer
        assert!(an.g_prime(b.max_point).unwrap().abs() < 1e-6);
        assert!(matches!(an.interval_bounds(3, &eqs), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn cubic_shape_hypotheses_hold() {
        let an = cubic_analyzer(1.0);
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let rep = an.check_shape_hypotheses(&eqs).unwrap();
        assert!(rep.all_pass(), "{:#?}", rep.checks);
    }

    #[test]
    fn linear_field_flags_plateau() {
        let vf = PolynomialVectorField::linear(-1.0, 2.0).unwrap();
        let an = StroboscopicAnalyzer::new(vf, 1.0, IntegratorConfig::default()).unwrap();
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let rep = an.check_shape_hypotheses(&eqs).unwrap();
        assert!(!rep.intervals[0].bounds.unique);
        assert!(rep.checks.iter().any(|c| c.hypothesis == "P5" && c.status != crate::vectorfield::CheckStatus::Pass));
    }

    #[test]
    fn r_omega_matches_flow_map() {
        let an = cubic_analyzer(1.0);
        let via_flow = flow_map(an.vector_field(), 0.5, 1.0, an.config()).unwrap();
        assert!((an.r_omega(0.5).unwrap() - via_flow).abs() < 1e-9);
    }

    #[test]
    fn grid_rows_cover_domain() {
        let an = cubic_analyzer(1.0);
        let rows = an.grid_rows(31).unwrap();
        assert_eq!(rows.len(), 31);
        assert_eq!(rows[0].x, 0.0);
        assert!(rows[0].g_prime.is_nan());
        assert_eq!(rows[30].x, 30.0);
        // x = 1 and x = 2 are grid nodes here
        assert_eq!(rows[1].g, 0.0);
        assert_eq!(rows[2].g, 0.0);
    }
}
