//! Smooth flow, variational flow and pulsed trajectories.
//!
//! The smooth flow `phi(t, x0)` of `x' = h(x)` is integrated with an adaptive
//! Dormand–Prince 5(4) pair that lands exactly on the requested end time.
//! Pulsed trajectories alternate smooth segments of length `omega` with the
//! jump `x -> (1 + lambda) x` at `T_k = k omega`, `k >= 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{fmt_real, CsvWriter};
use crate::vectorfield::PolynomialVectorField;

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::InvalidParameter(format!(
                "integrator tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so stage times are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (w, k) in terms {
        for i in 0..N {
            out[i] += w * k[i];
        }
    }
    out
}

/// Integrate the autonomous system `y' = rhs(y)` from `0` to `t_end`, landing
/// exactly on `t_end`. Component 0 is the state `x` and must stay in
/// `[0, x_max]`. `observe` sees every accepted step `(t, y)` including the
/// final one.
pub(crate) fn integrate<const N: usize, F, O>(
    rhs: F,
    y0: [f64; N],
    t_end: f64,
    x_max: f64,
    cfg: &IntegratorConfig,
    mut observe: O,
) -> Result<[f64; N]>
where
    F: Fn(&[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]),
{
    if t_end == 0.0 {
        return Ok(y0);
    }
    let scale = |a: &[f64; N], b: &[f64; N], i: usize| cfg.abs_tol + cfg.rel_tol * a[i].abs().max(b[i].abs());

    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = rhs(&y);

    let mut h = {
        let d0 = (0..N).map(|i| (y[i] / scale(&y, &y, i)).abs()).fold(0.0, f64::max);
        let d1 = (0..N).map(|i| (k1[i] / scale(&y, &y, i)).abs()).fold(0.0, f64::max);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(cfg.max_step).min(t_end)
    };

    let mut steps = 0usize;
    loop {
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit { max_steps: cfg.max_steps, t_end });
        }
        steps += 1;

        let mut last = false;
        if t + h >= t_end || t_end - (t + h) < 1e-12 * h {
            h = t_end - t;
            last = true;
        }
        if h <= 1e-15 * t_end.max(1.0) && !last {
            return Err(Error::StepUnderflow { t });
        }

        let k2 = rhs(&axpy(&y, &[(h * A21, &k1)]));
        let k3 = rhs(&axpy(&y, &[(h * A31, &k1), (h * A32, &k2)]));
        let k4 = rhs(&axpy(&y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]));
        let k5 = rhs(&axpy(
            &y,
            &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)],
        ));
        let k6 = rhs(&axpy(
            &y,
            &[(h * A61, &k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)],
        ));
        let y_new = axpy(
            &y,
            &[(h * B1, &k1), (h * B3, &k3), (h * B4, &k4), (h * B5, &k5), (h * B6, &k6)],
        );
        let k7 = rhs(&y_new);

        let mut err = 0.0_f64;
        for i in 0..N {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err = err.max((e / scale(&y, &y_new, i)).abs());
        }
        if !err.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }

        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            let x = y[0];
            if !(0.0..=x_max).contains(&x) {
                return Err(Error::Escape { t, x, x_max });
            }
            observe(t, &y);
            if last {
                return Ok(y);
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h = (h * factor).min(cfg.max_step);
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
}

fn check_start(vf: &PolynomialVectorField, x0: f64, t: f64, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    if !(0.0..=vf.x_max()).contains(&x0) {
        return Err(Error::Domain { x: x0, x_max: vf.x_max() });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `phi(t, x0)` for the unpulsed equation.
pub fn flow_map(vf: &PolynomialVectorField, x0: f64, t: f64, cfg: &IntegratorConfig) -> Result<f64> {
    check_start(vf, x0, t, cfg)?;
    let [x] = integrate(|y: &[f64; 1]| [vf.value(y[0])], [x0], t, vf.x_max(), cfg, |_, _| {})?;
    Ok(x)
}

/// `(phi(t, x0), d phi(t, x0) / d x0)`, the second component solving the
/// variational equation `y' = h'(phi) y`, `y(0) = 1`.
pub fn flow_with_variational(
    vf: &PolynomialVectorField,
    x0: f64,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    check_start(vf, x0, t, cfg)?;
    let rhs = |s: &[f64; 2]| [vf.value(s[0]), vf.slope(s[0]) * s[1]];
    let [x, y] = integrate(rhs, [x0, 1.0], t, vf.x_max(), cfg, |_, _| {})?;
    Ok((x, y))
}

/// The jump at `T_k`: `x_after = (1 + lambda) x_before`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRecord {
    pub t_k: f64,
    pub x_before: f64,
    pub x_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Completed,
    EscapedDomain,
}

/// A pulsed solution: accepted integrator steps plus the jump records.
/// The sample at each `T_k` carries the post-jump value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, f64)>,
    pub jumps: Vec<JumpRecord>,
    pub fate: Fate,
}

impl Trajectory {
    /// Post-jump values `phi_lambda(T_k, x0)`.
    pub fn pulse_values(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.x_after).collect()
    }

    /// CSV with columns `t,x,is_jump`. At each `T_k` the pre-jump row
    /// (`is_jump = 0`) precedes the post-jump row (`is_jump = 1`).
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["t", "x", "is_jump"])?;
        let mut jumps = self.jumps.iter().peekable();
        for &(t, x) in &self.samples {
            match jumps.peek() {
                Some(j) if j.t_k == t => {
                    w.row(&[fmt_real(t), fmt_real(j.x_before), "0".into()])?;
                    w.row(&[fmt_real(t), fmt_real(j.x_after), "1".into()])?;
                    jumps.next();
                }
                _ => w.row(&[fmt_real(t), fmt_real(x), "0".into()])?,
            }
        }
        w.finish()
    }
}

fn check_pulse_params(
    vf: &PolynomialVectorField,
    omega: f64,
    lambda: f64,
    x0: f64,
    cfg: &IntegratorConfig,
) -> Result<()> {
    check_start(vf, x0, 0.0, cfg)?;
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
    }
    // lambda = -1 is accepted: every pulse sends the state to 0.
    if !(lambda.is_finite() && lambda >= -1.0) {
        return Err(Error::InvalidParameter(format!("lambda must be >= -1, got {lambda}")));
    }
    Ok(())
}

/// Integrate the pulsed equation through `n_pulses` jumps (the first at
/// `T_1 = omega`, none at `t = 0`). A post-jump value above `x_max`, or a
/// smooth segment leaving the domain, ends the run with
/// [`Fate::EscapedDomain`].
pub fn simulate_impulsive(
    vf: &PolynomialVectorField,
    omega: f64,
    lambda: f64,
    x0: f64,
    n_pulses: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_pulse_params(vf, omega, lambda, x0, cfg)?;
    let gain = 1.0 + lambda;
    let mut samples = vec![(0.0, x0)];
    let mut jumps = Vec::with_capacity(n_pulses);
    let mut x = x0;
    for k in 1..=n_pulses {
        let t0 = (k - 1) as f64 * omega;
        let t_k = k as f64 * omega;
        let segment = integrate(
            |y: &[f64; 1]| [vf.value(y[0])],
            [x],
            omega,
            vf.x_max(),
            cfg,
            |s, y| {
                let t = t0 + s;
                if t < t_k && samples.last().is_some_and(|&(tl, _)| t > tl) {
                    samples.push((t, y[0]));
                }
            },
        );
        let before = match segment {
            Ok([v]) => v,
            Err(Error::Escape { .. }) => {
                return Ok(Trajectory { samples, jumps, fate: Fate::EscapedDomain });
            }
            Err(e) => return Err(e),
        };
        let after = gain * before;
        jumps.push(JumpRecord { t_k, x_before: before, x_after: after });
        samples.push((t_k, after));
        if after > vf.x_max() {
            return Ok(Trajectory { samples, jumps, fate: Fate::EscapedDomain });
        }
        x = after;
    }
    Ok(Trajectory { samples, jumps, fate: Fate::Completed })
}

/// Post-jump values of a pulsed run and whether it left the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseRun {
    pub values: Vec<f64>,
    pub escaped: bool,
}

/// Iterate `x -> (1 + lambda) R_omega(x)` up to `count` times, stopping early
/// if the state leaves `[0, x_max]`.
pub fn pulse_iterates(
    vf: &PolynomialVectorField,
    omega: f64,
    lambda: f64,
    x0: f64,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<PulseRun> {
    check_pulse_params(vf, omega, lambda, x0, cfg)?;
    let gain = 1.0 + lambda;
    let mut values = Vec::with_capacity(count);
    let mut x = x0;
    for _ in 0..count {
        let before = match integrate(|y: &[f64; 1]| [vf.value(y[0])], [x], omega, vf.x_max(), cfg, |_, _| {}) {
            Ok([v]) => v,
            Err(Error::Escape { .. }) => return Ok(PulseRun { values, escaped: true }),
            Err(e) => return Err(e),
        };
        x = gain * before;
        values.push(x);
        if x > vf.x_max() {
            return Ok(PulseRun { values, escaped: true });
        }
    }
    Ok(PulseRun { values, escaped: false })
}

/// `[phi_lambda(T_1, x0), ..., phi_lambda(T_K, x0)]`. Leaving the domain is
/// reported as [`Error::Escape`].
pub fn pulse_sequence(
    vf: &PolynomialVectorField,
    omega: f64,
    lambda: f64,
    x0: f64,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let run = pulse_iterates(vf, omega, lambda, x0, count, cfg)?;
    if run.escaped {
        let k = run.values.len();
        return Err(Error::Escape {
            t: k as f64 * omega,
            x: run.values.last().copied().unwrap_or(f64::INFINITY),
            x_max: vf.x_max(),
        });
    }
    Ok(run.values)
}

/// Shape of a pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Constant,
    Increasing,
    Decreasing,
    Oscillating,
}

/// Classify a sequence (prefixed by its seed `x0`) as constant or strictly
/// monotone. Steps smaller than `floor * max(1, |x|)` count as stationary,
/// which absorbs integrator noise once the sequence has settled on a fixed
/// point.
pub fn sequence_trend(x0: f64, values: &[f64], floor: f64) -> Trend {
    let mut up = false;
    let mut down = false;
    let mut prev = x0;
    for &v in values {
        let d = v - prev;
        if d.abs() > floor * prev.abs().max(1.0) {
            if d > 0.0 {
                up = true;
            } else {
                down = true;
            }
        }
        prev = v;
    }
    match (up, down) {
        (false, false) => Trend::Constant,
        (true, false) => Trend::Increasing,
        (false, true) => Trend::Decreasing,
        (true, true) => Trend::Oscillating,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> PolynomialVectorField {
        PolynomialVectorField::new(vec![0.0, -2.0, 3.0, -1.0], 30.0).unwrap()
    }

    /// Classical RK4 at a fixed step, independent of the adaptive integrator.
    fn rk4(vf: &PolynomialVectorField, x0: f64, t: f64, h: f64) -> f64 {
        let n = (t / h).round() as usize;
        let h = t / n as f64;
        let f = |x: f64| vf.value(x);
        let mut x = x0;
        for _ in 0..n {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn linear_flow_closed_form() {
        let vf = PolynomialVectorField::linear(-1.0, 2.0).unwrap();
        let x = flow_map(&vf, 1.0, 0.5, &IntegratorConfig::default()).unwrap();
        assert!((x - 0.606_530_659_712_633_4).abs() < 1e-9);
    }

    #[test]
    fn equilibria_are_fixed() {
        let vf = cubic();
        let cfg = IntegratorConfig::default();
        for x in [0.0, 1.0, 2.0] {
            assert_eq!(flow_map(&vf, x, 3.7, &cfg).unwrap(), x);
        }
    }

    #[test]
    fn cubic_flow_matches_fixed_step_oracle() {
        let vf = cubic();
        let x = flow_map(&vf, 0.5, 1.0, &IntegratorConfig::default()).unwrap();
        let oracle = rk4(&vf, 0.5, 1.0, 1e-5);
        assert!((x - oracle).abs() < 1e-8, "{x} vs {oracle}");
    }

    #[test]
    fn variational_closed_forms() {
        let cfg = IntegratorConfig::default();
        let vf = PolynomialVectorField::linear(-2.0, 2.0).unwrap();
        let (_, y) = flow_with_variational(&vf, 0.7, 1.0, &cfg).unwrap();
        assert!((y - (-2.0f64).exp()).abs() < 1e-9);
        // frozen coefficient at the unstable equilibrium: exp(h'(1) t)
        let (x, y) = flow_with_variational(&cubic(), 1.0, 0.8, &cfg).unwrap();
        assert_eq!(x, 1.0);
        assert!((y - 0.8f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn variational_matches_finite_difference() {
        let vf = cubic();
        let cfg = IntegratorConfig::default();
        let (_, y) = flow_with_variational(&vf, 0.5, 1.0, &cfg).unwrap();
        let d = 1e-6;
        let fd = (flow_map(&vf, 0.5 + d, 1.0, &cfg).unwrap() - flow_map(&vf, 0.5 - d, 1.0, &cfg).unwrap()) / (2.0 * d);
        assert!(((y - fd) / y).abs() < 1e-6, "{y} vs {fd}");
    }

    #[test]
    fn escape_is_reported() {
        // x' = x + x^2 blows up
        let vf = PolynomialVectorField::new(vec![0.0, 1.0, 1.0], 5.0).unwrap();
        let err = flow_map(&vf, 1.0, 2.0, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Escape { .. }), "{err}");
    }

    #[test]
    fn step_limit_is_reported() {
        let cfg = IntegratorConfig { max_steps: 3, max_step: 0.01, ..Default::default() };
        let err = flow_map(&cubic(), 0.5, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::StepLimit { .. }));
    }

    #[test]
    fn zero_lambda_reproduces_smooth_flow() {
        let vf = cubic();
        let cfg = IntegratorConfig::default();
        let tr = simulate_impulsive(&vf, 1.0, 0.0, 0.5, 3, &cfg).unwrap();
        assert_eq!(tr.fate, Fate::Completed);
        assert_eq!(tr.jumps.len(), 3);
        assert!(tr.jumps.iter().all(|j| j.x_before == j.x_after));
        let smooth = flow_map(&vf, 0.5, 3.0, &cfg).unwrap();
        assert!((tr.jumps[2].x_after - smooth).abs() < 1e-9);
    }

    #[test]
    fn annihilating_pulse() {
        let tr = simulate_impulsive(&cubic(), 1.0, -1.0, 1.5, 4, &IntegratorConfig::default()).unwrap();
        assert!(tr.jumps.iter().all(|j| j.x_after == 0.0));
        assert_eq!(tr.samples.last().unwrap().1, 0.0);
    }

    #[test]
    fn exact_cancellation_keeps_linear_sequence_constant() {
        let vf = PolynomialVectorField::linear(-0.5, 2.0).unwrap();
        let omega = 0.8;
        let lambda = (0.5f64 * omega).exp() - 1.0;
        let seq = pulse_sequence(&vf, omega, lambda, 1.3, 10, &IntegratorConfig::default()).unwrap();
        assert!(seq.iter().all(|v| (v - 1.3).abs() < 1e-9), "{seq:?}");
    }

    #[test]
    fn trajectory_invariants() {
        let tr = simulate_impulsive(&cubic(), 0.7, 0.4, 0.9, 6, &IntegratorConfig::default()).unwrap();
        assert!(tr.samples.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(tr.samples.iter().all(|&(_, x)| x >= 0.0));
        for j in &tr.jumps {
            assert_eq!(j.x_after, 1.4 * j.x_before);
            let s = tr.samples.iter().find(|s| s.0 == j.t_k).unwrap();
            assert_eq!(s.1, j.x_after);
        }
    }

    #[test]
    fn escape_ends_simulation() {
        let tr = simulate_impulsive(&cubic(), 1.0, 40.0, 2.0, 10, &IntegratorConfig::default()).unwrap();
        assert_eq!(tr.fate, Fate::EscapedDomain);
        assert_eq!(tr.jumps.len(), 1);
        let err = pulse_sequence(&cubic(), 1.0, 40.0, 2.0, 10, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Escape { .. }));
    }

    #[test]
    fn invalid_pulse_parameters() {
        let cfg = IntegratorConfig::default();
        assert!(simulate_impulsive(&cubic(), 0.0, 0.1, 1.0, 1, &cfg).is_err());
        assert!(simulate_impulsive(&cubic(), 1.0, -1.5, 1.0, 1, &cfg).is_err());
        assert!(simulate_impulsive(&cubic(), 1.0, 0.1, -1.0, 1, &cfg).is_err());
    }

    #[test]
    fn csv_has_pre_and_post_rows() {
        let tr = simulate_impulsive(&cubic(), 1.0, 0.5, 1.5, 2, &IntegratorConfig::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,is_jump");
        assert_eq!(lines.iter().filter(|l| l.ends_with(",1")).count(), 2);
        assert_eq!(lines.len(), 1 + tr.samples.len() + tr.jumps.len());
    }

    #[test]
    fn trend_classification() {
        assert_eq!(sequence_trend(1.0, &[1.0, 1.0], 1e-10), Trend::Constant);
        assert_eq!(sequence_trend(1.0, &[1.1, 1.2, 1.2], 1e-10), Trend::Increasing);
        assert_eq!(sequence_trend(1.0, &[0.9, 0.8], 1e-10), Trend::Decreasing);
        assert_eq!(sequence_trend(1.0, &[1.1, 1.0], 1e-10), Trend::Oscillating);
    }
}
