//! Bifurcations of the periodic solutions under changes of `lambda` and
//! `omega`.
//!
//! * Saddle-nodes sit where `g'` vanishes: the critical pulse strength is
//!   `g(x*)`, which coincides with `1/gamma_j - 1` or `1/beta_j - 1` of the
//!   interval envelope.
//! * At `lambda = exp(-A omega) - 1` the origin exchanges stability with a
//!   nontrivial orbit (transcritical).
//! * The regime table evaluates the orbit structure between consecutive
//!   critical values.
//! * The omega scan follows one orbit as the pulse period shrinks until it
//!   disappears, then simulates where the seed goes.

use std::fmt::{self, Write as _};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{pulse_iterates, IntegratorConfig};
use crate::output::{fmt_real, CsvWriter};
use crate::periodic::{find_periodic_orbits, PeriodicOrbit, Stability};
use crate::rmap::StroboscopicAnalyzer;
use crate::scalar::{self, Bracket};
use crate::vectorfield::{stable_equilibria, Equilibrium, PolynomialVectorField};

/// Grid density for locating zeros of `g'`.
pub const SADDLE_GRID_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationKind {
    SaddleNode,
    Transcritical,
}

impl fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BifurcationKind::SaddleNode => "saddle_node",
            BifurcationKind::Transcritical => "transcritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationPoint {
    pub kind: BifurcationKind,
    pub lambda_star: f64,
    pub x_star: f64,
    pub omega: f64,
    /// Interval between stable equilibria containing `x_star` (1-based).
    pub interval: Option<usize>,
}

/// Zeros of `g'` in `(0, x_max)` and any stretches where `g'` vanishes
/// identically (a plateau of `g`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleNodeScan {
    pub points: Vec<BifurcationPoint>,
    pub degenerate_ranges: Vec<(f64, f64)>,
}

fn interval_of(stable: &[f64], x: f64) -> Option<usize> {
    stable.iter().rposition(|&s| s <= x).map(|i| i + 1)
}

/// All interior saddle-node points: zeros of the numerator
/// `R_omega - x R_omega'` of `g'`, each paired with `lambda* = g(x*)`.
pub fn saddle_node_points(an: &StroboscopicAnalyzer, equilibria: &[Equilibrium]) -> Result<SaddleNodeScan> {
    let x_max = an.vector_field().x_max();
    let grid: Vec<f64> = scalar::linspace(0.0, x_max, SADDLE_GRID_POINTS).into_iter().skip(1).collect();
    let pairs = an.eval_many(&grid)?;
    let floor = 1e3 * an.config().rel_tol;
    let values: Vec<f64> = grid
        .iter()
        .zip(&pairs)
        .map(|(&x, &(r, rp))| {
            let num = r - x * rp;
            if num.abs() <= floor * x.max(1.0) {
                0.0
            } else {
                num
            }
        })
        .collect();

    // runs of three or more vanishing nodes form plateaus
    let mut degenerate_ranges = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=values.len() {
        let zero = i < values.len() && values[i] == 0.0;
        match (zero, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= 3 {
                    degenerate_ranges.push((grid[s], grid[i - 1]));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let in_plateau = |x: f64| degenerate_ranges.iter().any(|&(a, b)| x >= a && x <= b);

    let stable = stable_equilibria(equilibria);
    let numerator = |x: f64| an.g_numerator(x);
    let mut points = Vec::new();
    for b in scalar::brackets(&values) {
        let x_star = match b {
            Bracket::Node(i) => grid[i],
            Bracket::Cell(i) => scalar::bisect(numerator, grid[i], grid[i + 1], scalar::sign(values[i]), 1e-14)?,
        };
        if in_plateau(x_star) {
            continue;
        }
        points.push(BifurcationPoint {
            kind: BifurcationKind::SaddleNode,
            lambda_star: an.g(x_star)?,
            x_star,
            omega: an.omega(),
            interval: interval_of(&stable, x_star),
        });
    }
    Ok(SaddleNodeScan { points, degenerate_ranges })
}

/// The origin's transcritical point `lambda* = exp(-A omega) - 1`.
pub fn transcritical_lambda(an: &StroboscopicAnalyzer) -> Result<BifurcationPoint> {
    let a = an.vector_field().linear_coefficient();
    if !(a < 0.0) {
        return Err(Error::Precondition(format!("transcritical point requires A = h'(0) < 0, got {a}")));
    }
    Ok(BifurcationPoint {
        kind: BifurcationKind::Transcritical,
        lambda_star: (-a * an.omega()).exp_m1(),
        x_star: 0.0,
        omega: an.omega(),
        interval: Some(1),
    })
}

/// One open interval of pulse strengths with a constant orbit structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    /// Lower end; `-1` for the first row.
    pub lambda_lower: f64,
    /// Upper end; `+inf` for the last row.
    pub lambda_upper: f64,
    /// Pulse strength at which the structure was evaluated.
    pub lambda_probe: f64,
    pub orbit_count: usize,
    pub signature: Vec<Stability>,
    /// Some orbit at the probe sits next to `x_max`.
    pub near_boundary: bool,
}

impl RegimeRow {
    /// Labels in the `0=Y^s_1, Y^u_1, Y^s_2` style; stable and unstable
    /// orbits are numbered separately from the origin upwards.
    pub fn signature_label(&self) -> String {
        signature_label(&self.signature, ", ")
    }
}

fn signature_label(signature: &[Stability], sep: &str) -> String {
    let (mut ns, mut nu, mut nd) = (0, 0, 0);
    let labels: Vec<String> = signature
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let tag = match s {
                Stability::AsymptoticallyStable => {
                    ns += 1;
                    format!("Y^s_{ns}")
                }
                Stability::Unstable => {
                    nu += 1;
                    format!("Y^u_{nu}")
                }
                Stability::Degenerate => {
                    nd += 1;
                    format!("Y^d_{nd}")
                }
            };
            if i == 0 {
                format!("0={tag}")
            } else {
                tag
            }
        })
        .collect();
    labels.join(sep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeTable {
    pub omega: f64,
    /// Critical pulse strengths in increasing order.
    pub critical: Vec<BifurcationPoint>,
    pub rows: Vec<RegimeRow>,
    /// Shape-hypothesis warnings carried over from the analysis.
    pub warnings: Vec<String>,
}

impl RegimeTable {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(
            out,
            &["lambda_lower", "lambda_upper", "lambda_probe", "orbit_count", "signature"],
        )?;
        for r in &self.rows {
            w.row(&[
                fmt_real(r.lambda_lower),
                fmt_real(r.lambda_upper),
                fmt_real(r.lambda_probe),
                r.orbit_count.to_string(),
                signature_label(&r.signature, ";"),
            ])?;
        }
        w.finish()
    }

    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "omega = {}", self.omega);
        let _ = writeln!(s, "critical values:");
        for c in &self.critical {
            let _ = writeln!(s, "  {:<13} lambda* = {:>22.15e}  x* = {:.12}", c.kind, c.lambda_star, c.x_star);
        }
        let interval = |r: &RegimeRow| format!("({:.9}, {:.9})", r.lambda_lower, r.lambda_upper);
        let width = self.rows.iter().map(|r| interval(r).len()).max().unwrap_or(0).max(8);
        let _ = writeln!(s, "{:>3}  {:<width$}  {:>6}  signature", "row", "interval", "orbits");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{:>3}  {:<width$}  {:>6}  {}{}",
                i + 1,
                interval(r),
                r.orbit_count,
                r.signature_label(),
                if r.near_boundary { "  (orbit near x_max)" } else { "" }
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Orbit structure on every interval between consecutive critical pulse
/// strengths (saddle-nodes and the transcritical value). Outer intervals are
/// probed at `(lambda_min - 1) / 2` and `lambda_max + 1`; inner ones at
/// their midpoints.
pub fn regime_table(an: &StroboscopicAnalyzer, equilibria: &[Equilibrium]) -> Result<RegimeTable> {
    let transcritical = transcritical_lambda(an)?;
    let shape = an.check_shape_hypotheses(equilibria)?;
    let mut warnings: Vec<String> = shape
        .checks
        .iter()
        .filter(|c| c.status != crate::vectorfield::CheckStatus::Pass)
        .map(|c| c.to_string())
        .collect();

    let scan = saddle_node_points(an, equilibria)?;
    for (a, b) in &scan.degenerate_ranges {
        warnings.push(format!("g' vanishes on [{a}, {b}]"));
    }
    let mut critical = scan.points;
    critical.push(transcritical);
    critical.sort_by(|a, b| a.lambda_star.total_cmp(&b.lambda_star));
    critical.dedup_by(|a, b| (a.lambda_star - b.lambda_star).abs() <= 1e-12 * a.lambda_star.abs().max(1.0));

    let cuts: Vec<f64> = critical.iter().map(|c| c.lambda_star).collect();
    let mut bounds = Vec::with_capacity(cuts.len() + 1);
    bounds.push((-1.0, cuts[0], 0.5 * (cuts[0] - 1.0)));
    for w in cuts.windows(2) {
        bounds.push((w[0], w[1], 0.5 * (w[0] + w[1])));
    }
    let last = cuts[cuts.len() - 1];
    bounds.push((last, f64::INFINITY, last + 1.0));

    let rows = bounds
        .par_iter()
        .map(|&(lo, hi, probe)| {
            let orbits = find_periodic_orbits(an, probe)?;
            Ok(RegimeRow {
                lambda_lower: lo,
                lambda_upper: hi,
                lambda_probe: probe,
                orbit_count: orbits.len(),
                signature: orbits.iter().map(|o| o.stability).collect(),
                near_boundary: orbits.iter().any(|o| o.near_boundary),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RegimeTable { omega: an.omega(), critical, rows, warnings })
}

/// Orbit sets over a uniform grid of pulse strengths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepDiagram {
    pub lambdas: Vec<f64>,
    pub orbit_sets: Vec<Vec<PeriodicOrbit>>,
}

/// A continuous family of orbits across consecutive sweep values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    /// `(lambda, x0, stability)` in sweep order.
    pub points: Vec<(f64, f64, Stability)>,
}

impl SweepDiagram {
    /// `(lambda, x0, stability)` triples in sweep order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, Stability)> + '_ {
        self.orbit_sets.iter().flatten().map(|o| (o.lambda, o.x0, o.stability))
    }

    /// Chain orbits of neighbouring sweep values into branches by mutual
    /// nearest-neighbour matching of their seeds.
    pub fn branches(&self) -> Vec<Branch> {
        let mut done: Vec<Branch> = Vec::new();
        let mut open: Vec<(Branch, f64)> = Vec::new();
        for set in &self.orbit_sets {
            let prev: Vec<f64> = open.iter().map(|(_, x)| *x).collect();
            let cur: Vec<f64> = set.iter().map(|o| o.x0).collect();
            let nearest = |x: f64, pool: &[f64]| {
                pool.iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                    .map(|(i, _)| i)
            };
            let mut next_open = Vec::with_capacity(set.len());
            let mut taken = vec![false; open.len()];
            let mut continued: Vec<Option<usize>> = vec![None; set.len()];
            for (ci, &x) in cur.iter().enumerate() {
                if let Some(pi) = nearest(x, &prev) {
                    if nearest(prev[pi], &cur) == Some(ci) {
                        continued[ci] = Some(pi);
                        taken[pi] = true;
                    }
                }
            }
            let mut old: Vec<Option<(Branch, f64)>> = open.into_iter().map(Some).collect();
            for (pi, slot) in old.iter_mut().enumerate() {
                if !taken[pi] {
                    if let Some((b, _)) = slot.take() {
                        done.push(b);
                    }
                }
            }
            for (ci, o) in set.iter().enumerate() {
                let mut branch = match continued[ci].and_then(|pi| old[pi].take()) {
                    Some((b, _)) => b,
                    None => Branch { points: Vec::new() },
                };
                branch.points.push((o.lambda, o.x0, o.stability));
                next_open.push((branch, o.x0));
            }
            open = next_open;
        }
        done.extend(open.into_iter().map(|(b, _)| b));
        done
    }

    /// CSV with columns `lambda,x0,stability`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["lambda", "x0", "stability"])?;
        for (l, x, s) in self.points() {
            w.row(&[fmt_real(l), fmt_real(x), s.label().to_string()])?;
        }
        w.finish()
    }
}

/// Periodic orbits at `n_points` evenly spaced pulse strengths in
/// `[lambda_min, lambda_max]`. Grid values are processed in parallel; the
/// result is ordered by `lambda`.
pub fn lambda_sweep(an: &StroboscopicAnalyzer, lambda_min: f64, lambda_max: f64, n_points: usize) -> Result<SweepDiagram> {
    if !(lambda_min > -1.0 && lambda_min < lambda_max && lambda_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs -1 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter(format!("sweep needs at least 2 points, got {n_points}")));
    }
    let lambdas = scalar::linspace(lambda_min, lambda_max, n_points);
    let orbit_sets = lambdas
        .par_iter()
        .map(|&l| find_periodic_orbits(an, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepDiagram { lambdas, orbit_sets })
}

/// Decreasing geometric grid `omega1, ratio omega1, ...` down to
/// `min_factor * omega1`.
pub fn geometric_omega_grid(omega1: f64, ratio: f64, min_factor: f64) -> Result<Vec<f64>> {
    if !(omega1 > 0.0 && ratio > 0.0 && ratio < 1.0 && min_factor > 0.0 && min_factor < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "bad omega grid (omega1 = {omega1}, ratio = {ratio}, min_factor = {min_factor})"
        )));
    }
    let floor = min_factor * omega1;
    let mut grid = Vec::new();
    let mut k = 0;
    loop {
        let w = omega1 * ratio.powi(k);
        if w < floor * (1.0 - 1e-12) {
            break;
        }
        grid.push(w);
        k += 1;
    }
    Ok(grid)
}

/// Where the seed goes once its periodic orbit is gone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFate {
    ConvergesToZero,
    /// Left `[0, x_max]`.
    Diverges,
    /// Neither: stayed in the domain away from zero for the whole run.
    Bounded,
}

impl fmt::Display for ScanFate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanFate::ConvergesToZero => "converges_to_zero",
            ScanFate::Diverges => "diverges",
            ScanFate::Bounded => "bounded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaScanRow {
    pub omega: f64,
    pub orbit_present: bool,
    pub x_tracked: Option<f64>,
    /// Set on the first row without the tracked orbit.
    pub fate: Option<ScanFate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaScanReport {
    pub lambda: f64,
    pub x_ref: f64,
    pub rows: Vec<OmegaScanRow>,
    /// First grid value without the tracked orbit.
    pub omega_lost: Option<f64>,
    pub fate: Option<ScanFate>,
    /// Last pulse value of the fate simulation.
    pub fate_final_value: Option<f64>,
    pub fate_pulses: usize,
    /// The orbit reappeared at a smaller omega after being lost.
    pub reappeared: bool,
}

impl OmegaScanReport {
    /// CSV with columns `omega,orbit_present,x_tracked,fate`; absent values
    /// are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["omega", "orbit_present", "x_tracked", "fate"])?;
        for r in &self.rows {
            w.row(&[
                fmt_real(r.omega),
                u8::from(r.orbit_present).to_string(),
                r.x_tracked.map(fmt_real).unwrap_or_default(),
                r.fate.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
        w.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaScanOptions {
    /// Pulses simulated to decide the fate at the loss point.
    pub fate_pulses: usize,
    /// A final pulse value below this counts as convergence to zero.
    pub zero_threshold: f64,
    /// Tracking window as a fraction of the distance to the nearest other orbit.
    pub window_fraction: f64,
    /// Relative tolerance for `x_ref` to match an orbit at the first omega.
    pub seed_tol: f64,
}

impl Default for OmegaScanOptions {
    fn default() -> Self {
        Self { fate_pulses: 500, zero_threshold: 1e-4, window_fraction: 0.25, seed_tol: 1e-6 }
    }
}

/// Follow the periodic orbit through `x_ref` along a decreasing omega grid
/// with default options.
pub fn omega_scan(
    vf: &PolynomialVectorField,
    lambda: f64,
    x_ref: f64,
    omega_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<OmegaScanReport> {
    omega_scan_with(vf, lambda, x_ref, omega_grid, cfg, &OmegaScanOptions::default())
}

fn window_around(x: f64, orbits: &[PeriodicOrbit], fraction: f64) -> f64 {
    let gap = orbits
        .iter()
        .map(|o| (o.x0 - x).abs())
        .filter(|&d| d > 1e-12 * x.max(1.0))
        .fold(x, f64::min);
    fraction * gap
}

fn nearest_nontrivial(x: f64, orbits: &[PeriodicOrbit]) -> Option<&PeriodicOrbit> {
    orbits
        .iter()
        .filter(|o| o.x0 > 0.0)
        .min_by(|a, b| (a.x0 - x).abs().total_cmp(&(b.x0 - x).abs()))
}

/// Position, window and stability of the orbit being followed.
#[derive(Debug, Clone, Copy)]
struct Tracked {
    x: f64,
    window: f64,
    stability: Stability,
}

impl Tracked {
    fn matching(&self, orbits: &[PeriodicOrbit], fraction: f64) -> Option<Tracked> {
        let o = nearest_nontrivial(self.x, orbits)?;
        let same_branch = o.stability == self.stability || o.stability == Stability::Degenerate;
        ((o.x0 - self.x).abs() <= self.window && same_branch).then(|| Tracked {
            x: o.x0,
            window: window_around(o.x0, orbits, fraction),
            stability: self.stability,
        })
    }
}

/// Halvings of the log-omega step allowed when the orbit drifts out of its
/// window between two grid values.
const MAX_SUBDIVISIONS: u32 = 10;

/// Intermediate orbit searches allowed between two grid values. An orbit
/// sliding into a merger shrinks its own window, so continuation toward the
/// merger point would otherwise take ever smaller steps.
const MAX_SUBSTEPS: usize = 24;

/// Continue `from` at `omega_a` to the orbit set at `omega_b`, inserting
/// intermediate omegas while the window misses.
#[allow(clippy::too_many_arguments)]
fn follow(
    vf: &PolynomialVectorField,
    lambda: f64,
    cfg: &IntegratorConfig,
    fraction: f64,
    from: Tracked,
    omega_a: f64,
    omega_b: f64,
    orbits_b: &[PeriodicOrbit],
) -> Result<Option<Tracked>> {
    if let Some(t) = from.matching(orbits_b, fraction) {
        return Ok(Some(t));
    }
    let mut cur = from;
    let mut w = omega_a;
    let mut depth = 1;
    for _ in 0..MAX_SUBSTEPS {
        if depth > MAX_SUBDIVISIONS {
            break;
        }
        let target = w * (omega_b / w).powf(0.5f64.powi(depth as i32));
        let orbits = find_periodic_orbits(&StroboscopicAnalyzer::new(vf.clone(), target, *cfg)?, lambda)?;
        match cur.matching(&orbits, fraction) {
            Some(t) => {
                cur = t;
                w = target;
                if let Some(t) = cur.matching(orbits_b, fraction) {
                    return Ok(Some(t));
                }
                depth = depth.saturating_sub(1).max(1);
            }
            None => depth += 1,
        }
    }
    Ok(None)
}

pub fn omega_scan_with(
    vf: &PolynomialVectorField,
    lambda: f64,
    x_ref: f64,
    omega_grid: &[f64],
    cfg: &IntegratorConfig,
    opts: &OmegaScanOptions,
) -> Result<OmegaScanReport> {
    if lambda == 0.0 {
        return Err(Error::Precondition("omega scan requires lambda != 0".into()));
    }
    if !(lambda > -1.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be > -1, got {lambda}")));
    }
    if omega_grid.is_empty() || omega_grid.iter().any(|&w| !(w > 0.0)) || omega_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("omega grid must be positive and strictly decreasing".into()));
    }

    let orbit_sets = omega_grid
        .par_iter()
        .map(|&w| {
            let an = StroboscopicAnalyzer::new(vf.clone(), w, *cfg)?;
            find_periodic_orbits(&an, lambda)
        })
        .collect::<Result<Vec<_>>>()?;

    let first = &orbit_sets[0];
    let seed = nearest_nontrivial(x_ref, first)
        .filter(|o| (o.x0 - x_ref).abs() <= opts.seed_tol * x_ref.abs().max(1.0))
        .ok_or_else(|| {
            Error::Precondition(format!(
                "x_ref = {x_ref} is not the seed of a nontrivial periodic orbit at omega = {} and lambda = {lambda}",
                omega_grid[0]
            ))
        })?;
    if seed.stability == Stability::Degenerate {
        return Err(Error::Precondition(format!("the orbit through x_ref = {x_ref} is degenerate")));
    }

    let mut tracked = Tracked {
        x: seed.x0,
        window: window_around(seed.x0, first, opts.window_fraction),
        stability: seed.stability,
    };
    let mut rows = vec![OmegaScanRow { omega: omega_grid[0], orbit_present: true, x_tracked: Some(seed.x0), fate: None }];
    let mut omega_lost = None;
    let mut reappeared = false;
    for i in 1..omega_grid.len() {
        let (omega, orbits) = (omega_grid[i], &orbit_sets[i]);
        let hit = if omega_lost.is_none() {
            let next = follow(vf, lambda, cfg, opts.window_fraction, tracked, omega_grid[i - 1], omega, orbits)?;
            match next {
                Some(t) => tracked = t,
                None => omega_lost = Some(omega),
            }
            next.map(|t| t.x)
        } else {
            // after the loss, look for the branch near its last known position
            let again = tracked.matching(orbits, opts.window_fraction).map(|t| t.x);
            reappeared |= again.is_some();
            again
        };
        rows.push(OmegaScanRow { omega, orbit_present: hit.is_some(), x_tracked: hit, fate: None });
    }

    let mut fate = None;
    let mut fate_final_value = None;
    if let Some(w2) = omega_lost {
        let run = pulse_iterates(vf, w2, lambda, x_ref, opts.fate_pulses, cfg)?;
        let last = run.values.last().copied().unwrap_or(x_ref);
        let f = if run.escaped {
            ScanFate::Diverges
        } else if last < opts.zero_threshold {
            ScanFate::ConvergesToZero
        } else {
            ScanFate::Bounded
        };
        fate = Some(f);
        fate_final_value = Some(last);
        if let Some(row) = rows.iter_mut().find(|r| r.omega == w2) {
            row.fate = Some(f);
        }
    }

    Ok(OmegaScanReport {
        lambda,
        x_ref,
        rows,
        omega_lost,
        fate,
        fate_final_value,
        fate_pulses: opts.fate_pulses,
        reappeared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> PolynomialVectorField {
        PolynomialVectorField::new(vec![0.0, -2.0, 3.0, -1.0], 30.0).unwrap()
    }

    fn analyzer(omega: f64) -> StroboscopicAnalyzer {
        StroboscopicAnalyzer::new(cubic(), omega, IntegratorConfig::default()).unwrap()
    }

    #[test]
    fn transcritical_closed_form() {
        let p = transcritical_lambda(&analyzer(1.0)).unwrap();
        assert!((p.lambda_star - 6.389_056_098_930_65).abs() < 1e-12);
        assert_eq!(p.x_star, 0.0);
        let p = transcritical_lambda(&analyzer(0.5)).unwrap();
        assert!((p.lambda_star - 1.718_281_828_459_045).abs() < 1e-12);
        let p = transcritical_lambda(&analyzer(1e-9)).unwrap();
        assert!(p.lambda_star.abs() < 1e-8);

        let vf = PolynomialVectorField::new(vec![0.0, 1.0, -1.0], 3.0).unwrap();
        let an = StroboscopicAnalyzer::new(vf, 1.0, IntegratorConfig::default()).unwrap();
        assert!(matches!(transcritical_lambda(&an), Err(Error::Precondition(_))));
    }

    #[test]
    fn cubic_has_one_saddle_node_at_the_ratio_maximum() {
        let an = analyzer(1.0);
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let scan = saddle_node_points(&an, &eqs).unwrap();
        assert_eq!(scan.points.len(), 1, "{scan:#?}");
        assert!(scan.degenerate_ranges.is_empty());
        let p = scan.points[0];
        let b = an.interval_bounds(1, &eqs).unwrap();
        assert!(p.x_star > 1.0 && p.x_star < 2.0);
        assert!(p.lambda_star < 0.0);
        assert!((p.lambda_star - b.lambda_at_max()).abs() < 1e-8);
        assert_eq!(p.interval, Some(1));
    }

    #[test]
    fn linear_field_is_degenerate_everywhere() {
        let vf = PolynomialVectorField::linear(-1.0, 2.0).unwrap();
        let an = StroboscopicAnalyzer::new(vf, 1.0, IntegratorConfig::default()).unwrap();
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let scan = saddle_node_points(&an, &eqs).unwrap();
        assert!(scan.points.is_empty());
        assert_eq!(scan.degenerate_ranges.len(), 1);
    }

    #[test]
    fn cubic_regime_table() {
        let an = analyzer(1.0);
        let eqs = an.vector_field().find_equilibria(1e-12).unwrap();
        let t = regime_table(&an, &eqs).unwrap();
        use Stability::*;
        let sigs: Vec<Vec<Stability>> = t.rows.iter().map(|r| r.signature.clone()).collect();
        assert_eq!(
            sigs,
            vec![
                vec![AsymptoticallyStable],
                vec![AsymptoticallyStable, Unstable, AsymptoticallyStable],
                vec![Unstable, AsymptoticallyStable],
            ],
            "{}",
            t.to_text()
        );
        assert_eq!(t.rows[2].signature_label(), "0=Y^u_1, Y^s_1");
        assert!(t.warnings.is_empty(), "{:?}", t.warnings);
    }

    #[test]
    fn sweep_branches_split_at_saddle_node() {
        let an = analyzer(1.0);
        let d = lambda_sweep(&an, -0.3, -0.1, 5).unwrap();
        let counts: Vec<usize> = d.orbit_sets.iter().map(|s| s.len()).collect();
        assert_eq!(counts[0], 1);
        assert_eq!(counts[4], 3);
        let branches = d.branches();
        // origin plus the two branches born at the fold
        assert_eq!(branches.len(), 3, "{branches:#?}");
        assert!(lambda_sweep(&an, 0.5, 0.5, 3).is_err());
        assert!(lambda_sweep(&an, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn geometric_grid() {
        let g = geometric_omega_grid(1.0, 0.9, 1e-3).unwrap();
        assert_eq!(g[0], 1.0);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(*g.last().unwrap() >= 1e-3 * (1.0 - 1e-12));
        assert!(g.last().unwrap() * 0.9 < 1e-3);
        assert!(geometric_omega_grid(1.0, 1.1, 1e-3).is_err());
    }

    #[test]
    fn omega_scan_rejects_zero_lambda() {
        let err = omega_scan(&cubic(), 0.0, 1.5, &[1.0, 0.5], &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn omega_scan_requires_seed() {
        let err = omega_scan(&cubic(), -0.1, 1.234, &[1.0, 0.5], &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
    }
}
