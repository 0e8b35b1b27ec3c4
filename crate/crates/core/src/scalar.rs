//! One-dimensional helpers shared by the analysis modules: uniform grids,
//! sign-change bracketing, bisection and golden-section search.
//!
//! Every routine accepts a fallible objective because the interesting
//! functions here (the time map and its relatives) are computed by numerical
//! integration that may fail.

use crate::error::Result;

/// Golden ratio conjugate, (sqrt(5) - 1) / 2.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `n` equally spaced points covering `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

/// Sign of `v` as -1, 0 or 1.
pub(crate) fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Bisection on `[a, b]` where `f` has sign `sign_a` at (or just right of) `a`
/// and the opposite sign at `b`. Stops when the bracket is narrower than
/// `x_tol` or an exact zero is hit.
pub fn bisect<F>(mut f: F, mut a: f64, mut b: f64, sign_a: i8, x_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    debug_assert!(sign_a != 0);
    // 200 halvings exhaust any f64 interval.
    for _ in 0..200 {
        if (b - a).abs() <= x_tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let s = sign(f(mid)?);
        if s == 0 {
            return Ok(mid);
        }
        if s == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Location and value of an extremum found by [`golden_section`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
}

/// Direction of a one-dimensional search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Minimize,
    Maximize,
}

/// Golden-section search for an extremum of a unimodal `f` on `[a, b]`,
/// refined until the bracket is narrower than `x_tol`.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, goal: Goal, x_tol: f64) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let better = |u: f64, v: f64| match goal {
        Goal::Minimize => u < v,
        Goal::Maximize => u > v,
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > x_tol {
        if better(fc, fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        if c >= d {
            break;
        }
    }
    Ok(if better(fc, fd) {
        Extremum { x: c, value: fc }
    } else {
        Extremum { x: d, value: fd }
    })
}

/// A root of a sampled function: either an exact zero at a grid node or a
/// sign change between two neighbouring nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Bracket {
    Node(usize),
    Cell(usize),
}

/// Scan sampled values for exact zeros and sign changes. Cells adjacent to an
/// exact zero are not reported again.
pub(crate) fn brackets(values: &[f64]) -> Vec<Bracket> {
    let mut out = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            out.push(Bracket::Node(i));
        } else if i + 1 < values.len() {
            let w = values[i + 1];
            if w != 0.0 && sign(v) != sign(w) {
                out.push(Bracket::Cell(i));
            }
        }
    }
    out
}

/// Indices of strict local minima of `|values|` where the sampled sign does not
/// change across the neighbourhood; candidates for tangential zeros.
pub(crate) fn touch_candidates(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    (1..n.saturating_sub(1))
        .filter(|&i| {
            let (l, m, r) = (values[i - 1], values[i], values[i + 1]);
            m != 0.0
                && sign(l) == sign(m)
                && sign(m) == sign(r)
                && m.abs() <= l.abs()
                && m.abs() < r.abs()
        })
        .collect()
}
