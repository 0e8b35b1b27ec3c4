//! Periodic solutions of the pulsed equation.
//!
//! An `omega`-periodic solution through `x0` exists exactly when `x0` is a
//! fixed point of the pulsed time map `x -> (1 + lambda) R_omega(x)`, i.e. a
//! zero of `F(x) = (1 + lambda) R_omega(x) - x`, or equivalently when
//! `lambda = g(x0)`. A nontrivial orbit is asymptotically stable when
//! `g'(x0) > 0` and unstable when `g'(x0) < 0`. The origin is always a
//! periodic solution; its multiplier is `(1 + lambda) exp(A omega)`.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{pulse_iterates, sequence_trend, Trend};
use crate::output::{fmt_real, CsvWriter};
use crate::rmap::StroboscopicAnalyzer;
use crate::scalar::{self, Bracket};

/// Grid density for bracketing zeros of `F`.
pub const ORBIT_GRID_POINTS: usize = 4096;

/// Bisection tolerance on orbit seeds.
pub const ROOT_X_TOL: f64 = 1e-12;

/// `|F|` below which a zero without sign change is accepted as a tangency.
pub const TANGENCY_TOL: f64 = 1e-9;

/// Band around zero in which `g'` (or the origin multiplier minus one) is
/// treated as vanishing.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Largest `|F(x0)|` for `x0` to count as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Monotonicity noise floor for pulse sequences, relative to `max(1, |x|)`.
pub const TREND_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    AsymptoticallyStable,
    Unstable,
    Degenerate,
}

impl Stability {
    pub fn label(self) -> &'static str {
        match self {
            Stability::AsymptoticallyStable => "stable",
            Stability::Unstable => "unstable",
            Stability::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Initial condition of an `omega`-periodic solution with its classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub x0: f64,
    pub omega: f64,
    pub lambda: f64,
    pub stability: Stability,
    /// `|(1 + lambda) R_omega(x0) - x0|`.
    pub residual: f64,
    /// `g'(x0)`; `NaN` for the origin, where `g'` is undefined.
    pub g_prime_value: f64,
    /// `(1 + lambda) R_omega'(x0)`, the derivative of the pulsed time map.
    pub multiplier: f64,
    /// Found by the tangency sweep rather than by a sign change.
    pub tangential: bool,
    /// Within one grid cell of `x_max`; the domain cut may hide a partner.
    pub near_boundary: bool,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("lambda must be > -1, got {lambda}")))
    }
}

fn classify_origin(multiplier: f64) -> Stability {
    if multiplier < 1.0 - DEGENERACY_TOL {
        Stability::AsymptoticallyStable
    } else if multiplier > 1.0 + DEGENERACY_TOL {
        Stability::Unstable
    } else {
        Stability::Degenerate
    }
}

fn classify_g_prime(gp: f64) -> Stability {
    if gp > DEGENERACY_TOL {
        Stability::AsymptoticallyStable
    } else if gp < -DEGENERACY_TOL {
        Stability::Unstable
    } else {
        Stability::Degenerate
    }
}

fn origin_orbit(an: &StroboscopicAnalyzer, lambda: f64) -> PeriodicOrbit {
    let multiplier = (1.0 + lambda) * an.origin_multiplier();
    PeriodicOrbit {
        x0: 0.0,
        omega: an.omega(),
        lambda,
        stability: classify_origin(multiplier),
        residual: 0.0,
        g_prime_value: f64::NAN,
        multiplier,
        tangential: false,
        near_boundary: false,
    }
}

fn nontrivial_orbit(an: &StroboscopicAnalyzer, x0: f64, lambda: f64, tangential: bool, cell: f64) -> Result<PeriodicOrbit> {
    let (r, rp) = an.eval(x0)?;
    let gain = 1.0 + lambda;
    let g_prime_value = (r - x0 * rp) / (r * r);
    Ok(PeriodicOrbit {
        x0,
        omega: an.omega(),
        lambda,
        stability: if tangential { Stability::Degenerate } else { classify_g_prime(g_prime_value) },
        residual: (gain * r - x0).abs(),
        g_prime_value,
        multiplier: gain * rp,
        tangential,
        near_boundary: an.vector_field().x_max() - x0 <= cell,
    })
}

/// All `omega`-periodic solutions in `[0, x_max]` for pulse strength
/// `lambda`, ordered by seed. Transversal zeros of `F` are bracketed on a
/// uniform grid and bisected; zeros where `F` only touches the axis are
/// located at the extremum of `F` and labelled degenerate.
pub fn find_periodic_orbits(an: &StroboscopicAnalyzer, lambda: f64) -> Result<Vec<PeriodicOrbit>> {
    check_lambda(lambda)?;
    let gain = 1.0 + lambda;
    let x_max = an.vector_field().x_max();
    let grid = scalar::linspace(0.0, x_max, ORBIT_GRID_POINTS);
    let cell = grid[1] - grid[0];
    let pairs = an.eval_many(&grid)?;

    let origin = origin_orbit(an, lambda);
    // Near 0, F(x) ~ (multiplier - 1) x, so node 0 carries that sign.
    let mut values: Vec<f64> = grid.iter().zip(&pairs).map(|(&x, &(r, _))| gain * r - x).collect();
    values[0] = f64::from(scalar::sign(origin.multiplier - 1.0));

    let f = |x: f64| -> Result<f64> { Ok(gain * an.r_omega(x)? - x) };
    let mut seeds: Vec<(f64, bool)> = Vec::new();
    for b in scalar::brackets(&values) {
        match b {
            Bracket::Node(0) => {}
            Bracket::Node(i) => seeds.push((grid[i], false)),
            Bracket::Cell(i) => {
                let s = scalar::sign(values[i]);
                let x = scalar::bisect(f, grid[i], grid[i + 1], s, ROOT_X_TOL)?;
                seeds.push((x, false));
            }
        }
    }

    let fprime = |x: f64| -> Result<f64> { Ok(gain * an.r_omega_prime(x)? - 1.0) };
    for i in scalar::touch_candidates(&values).into_iter().filter(|&i| i >= 2) {
        let (a, b) = (grid[i - 1], grid[i + 1]);
        let (sa, sb) = (scalar::sign(fprime(a)?), scalar::sign(fprime(b)?));
        if sa == 0 || sa == sb {
            continue;
        }
        let x = scalar::bisect(fprime, a, b, sa, ROOT_X_TOL)?;
        if f(x)?.abs() < TANGENCY_TOL * x.max(1.0) && seeds.iter().all(|&(s, _)| (s - x).abs() > 2.0 * cell) {
            seeds.push((x, true));
        }
    }

    let mut orbits = vec![origin];
    for (x, tangential) in seeds {
        orbits.push(nontrivial_orbit(an, x, lambda, tangential, cell)?);
    }
    orbits.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    Ok(orbits)
}

/// Stability of the periodic solution through the fixed point `x0`.
pub fn classify(an: &StroboscopicAnalyzer, x0: f64, lambda: f64) -> Result<Stability> {
    check_lambda(lambda)?;
    if x0 == 0.0 {
        return Ok(origin_orbit(an, lambda).stability);
    }
    let r = an.r_omega(x0)?;
    let residual = ((1.0 + lambda) * r - x0).abs();
    if residual > FIXED_POINT_TOL * x0.max(1.0) {
        return Err(Error::NotFixedPoint { x0, residual });
    }
    Ok(classify_g_prime(an.g_prime(x0)?))
}

/// `g(x0)`: the pulse strength for which `x0` seeds an `omega`-periodic solution.
pub fn lambda_for_initial_condition(an: &StroboscopicAnalyzer, x0: f64) -> Result<f64> {
    let x_max = an.vector_field().x_max();
    if !(x0 > 0.0 && x0 <= x_max) {
        return Err(Error::Domain { x: x0, x_max });
    }
    an.g(x0)
}

/// What perturbed pulse sequences did near an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    Contracting,
    Expanding,
    Inconclusive,
}

/// Pulse sequence started at `x0 + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbedRun {
    pub start: f64,
    pub final_value: f64,
    pub escaped: bool,
    pub trend: Trend,
    /// `|final_value - x0|`, infinite after an escape.
    pub final_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub orbit: PeriodicOrbit,
    /// `|phi_lambda(omega, x0) - x0|` from direct simulation.
    pub one_period_residual: f64,
    /// `max_k |phi_lambda(k omega, x0) - x0|` over the run; round-off is
    /// amplified along unstable orbits, so this can be large for them.
    pub return_residual: f64,
    /// Perturbation actually used after clamping to the basin bracket.
    pub eps: f64,
    pub runs: Vec<PerturbedRun>,
    pub observed: Observed,
    /// `eps / final_distance`, minimized over the perturbed runs.
    pub contraction: f64,
}

impl VerificationReport {
    /// Simulation agrees with the classification. Degenerate orbits never agree.
    pub fn agrees(&self) -> bool {
        matches!(
            (self.orbit.stability, self.observed),
            (Stability::AsymptoticallyStable, Observed::Contracting) | (Stability::Unstable, Observed::Expanding)
        )
    }
}

/// Check an orbit by brute-force simulation: the return residual from `x0`
/// itself, and the fate of pulse sequences started at `x0 +- eps`. `eps` is
/// clamped to a tenth of the distance to the nearest other orbit in
/// `neighbours`, which keeps both starts inside the orbit's monotone basin.
pub fn verify_orbit(
    an: &StroboscopicAnalyzer,
    orbit: &PeriodicOrbit,
    neighbours: &[PeriodicOrbit],
    n_pulses: usize,
    eps: f64,
) -> Result<VerificationReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let vf = an.vector_field();
    let cfg = an.config();
    let (omega, lambda, x0) = (orbit.omega, orbit.lambda, orbit.x0);

    let home = pulse_iterates(vf, omega, lambda, x0, n_pulses, cfg)?;
    let one_period_residual = home.values.first().map_or(f64::INFINITY, |v| (v - x0).abs());
    let return_residual = if home.escaped {
        f64::INFINITY
    } else {
        home.values.iter().map(|v| (v - x0).abs()).fold(0.0, f64::max)
    };

    let gap = neighbours
        .iter()
        .map(|o| (o.x0 - x0).abs())
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let eps = eps.min(0.1 * gap);

    let mut runs = Vec::with_capacity(2);
    for start in [x0 - eps, x0 + eps] {
        if start < 0.0 || start > vf.x_max() {
            continue;
        }
        let run = pulse_iterates(vf, omega, lambda, start, n_pulses, cfg)?;
        let final_value = run.values.last().copied().unwrap_or(start);
        runs.push(PerturbedRun {
            start,
            final_value,
            escaped: run.escaped,
            trend: sequence_trend(start, &run.values, TREND_FLOOR),
            final_distance: if run.escaped { f64::INFINITY } else { (final_value - x0).abs() },
        });
    }

    let toward = |r: &PerturbedRun| {
        let monotone = if r.start > x0 {
            matches!(r.trend, Trend::Decreasing | Trend::Constant)
        } else {
            matches!(r.trend, Trend::Increasing | Trend::Constant)
        };
        !r.escaped && monotone && r.final_distance < eps
    };
    let away = |r: &PerturbedRun| {
        let monotone = if r.start > x0 {
            r.trend == Trend::Increasing
        } else {
            r.trend == Trend::Decreasing
        };
        r.escaped || (monotone && r.final_distance > eps)
    };
    let observed = if runs.is_empty() {
        Observed::Inconclusive
    } else if runs.iter().all(toward) {
        Observed::Contracting
    } else if runs.iter().all(away) {
        Observed::Expanding
    } else {
        Observed::Inconclusive
    };
    let contraction = runs.iter().map(|r| eps / r.final_distance).fold(f64::INFINITY, f64::min);

    Ok(VerificationReport {
        orbit: *orbit,
        one_period_residual,
        return_residual,
        eps,
        runs,
        observed,
        contraction,
    })
}

/// CSV with columns `lambda,x0,stability,residual,g_prime`.
pub fn write_orbits_csv<W: Write>(orbits: &[PeriodicOrbit], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &["lambda", "x0", "stability", "residual", "g_prime"])?;
    for o in orbits {
        w.row(&[
            fmt_real(o.lambda),
            fmt_real(o.x0),
            o.stability.label().to_string(),
            fmt_real(o.residual),
            fmt_real(o.g_prime_value),
        ])?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::IntegratorConfig;
    use crate::vectorfield::PolynomialVectorField;

    fn cubic_analyzer() -> StroboscopicAnalyzer {
        let vf = PolynomialVectorField::new(vec![0.0, -2.0, 3.0, -1.0], 30.0).unwrap();
        StroboscopicAnalyzer::new(vf, 1.0, IntegratorConfig::default()).unwrap()
    }

    fn pattern(orbits: &[PeriodicOrbit]) -> Vec<Stability> {
        orbits.iter().map(|o| o.stability).collect()
    }

    use Stability::*;

    #[test]
    fn identity_pulse_gives_equilibria() {
        let an = cubic_analyzer();
        let orbits = find_periodic_orbits(&an, 0.0).unwrap();
        let xs: Vec<f64> = orbits.iter().map(|o| o.x0).collect();
        assert_eq!(xs.len(), 3, "{orbits:#?}");
        for (x, want) in xs.iter().zip([0.0, 1.0, 2.0]) {
            assert!((x - want).abs() < 1e-10);
        }
        assert_eq!(pattern(&orbits), vec![AsymptoticallyStable, Unstable, AsymptoticallyStable]);
    }

    #[test]
    fn strong_pulse_leaves_two_orbits() {
        let an = cubic_analyzer();
        let orbits = find_periodic_orbits(&an, 10.0).unwrap();
        assert_eq!(pattern(&orbits), vec![Unstable, AsymptoticallyStable]);
        assert!(orbits.iter().all(|o| o.residual < FIXED_POINT_TOL));
    }

    #[test]
    fn lambda_from_g_reproduces_seed() {
        let an = cubic_analyzer();
        for x in [0.3, 0.5, 1.5, 2.5, 7.0] {
            let lambda = lambda_for_initial_condition(&an, x).unwrap();
            let orbits = find_periodic_orbits(&an, lambda).unwrap();
            assert!(orbits.iter().any(|o| (o.x0 - x).abs() < 1e-8), "x = {x}, lambda = {lambda}");
        }
        assert!(lambda_for_initial_condition(&an, 0.5).unwrap() > 0.0);
        assert!(lambda_for_initial_condition(&an, 1.5).unwrap() < 0.0);
        assert_eq!(lambda_for_initial_condition(&an, 1.0).unwrap(), 0.0);
        assert!(lambda_for_initial_condition(&an, 0.0).is_err());
    }

    #[test]
    fn classification_at_equilibria() {
        let an = cubic_analyzer();
        assert_eq!(classify(&an, 1.0, 0.0).unwrap(), Unstable);
        assert_eq!(classify(&an, 2.0, 0.0).unwrap(), AsymptoticallyStable);
        assert_eq!(classify(&an, 0.0, 0.0).unwrap(), AsymptoticallyStable);
        assert!(matches!(classify(&an, 1.5, 0.0), Err(Error::NotFixedPoint { .. })));
    }

    #[test]
    fn saddle_node_seed_is_degenerate() {
        let an = cubic_analyzer();
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let b = an.interval_bounds(1, &eqs).unwrap();
        assert_eq!(classify(&an, b.max_point, b.lambda_at_max()).unwrap(), Degenerate);
    }

    #[test]
    fn invalid_lambda() {
        let an = cubic_analyzer();
        assert!(matches!(find_periodic_orbits(&an, -1.0), Err(Error::InvalidParameter(_))));
        assert!(find_periodic_orbits(&an, -2.0).is_err());
    }

    #[test]
    fn verification_of_equilibria() {
        let an = cubic_analyzer();
        let orbits = find_periodic_orbits(&an, 0.0).unwrap();
        for o in &orbits {
            let rep = verify_orbit(&an, o, &orbits, 50, 1e-3).unwrap();
            assert!(rep.agrees(), "{rep:#?}");
            assert!(rep.return_residual < 1e-10, "{rep:#?}");
            if o.stability == AsymptoticallyStable {
                assert!(rep.contraction >= 10.0);
            }
        }
    }

    #[test]
    fn csv_layout() {
        let an = cubic_analyzer();
        let orbits = find_periodic_orbits(&an, 0.0).unwrap();
        let mut buf = Vec::new();
        write_orbits_csv(&orbits, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lambda,x0,stability,residual,g_prime");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains(",unstable,"));
    }
}
