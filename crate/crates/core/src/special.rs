//! Associated Laguerre polynomials `L_n^α(x)` with integer order.
//!
//! These set the oscillator part of the sideband coupling strengths. A zero
//! of `L_n^α(η²)` switches off the `|n⟩ → |n+α⟩` transition, which is how
//! a finite closed subspace is cut out of the infinite ladder.
//!
//! The blue-sideband cut between `|↓,6⟩` and `|↑,7⟩` sits at the *smallest*
//! root of `L_6^1`, `η² ≈ 0.527668`. The carrier cut between `|↓,5⟩` and
//! `|↑,5⟩` sits at the smallest root of `L_5^0`, `η² ≈ 0.263560`; the value
//! `0.322548` often quoted for it is the smallest root of `L_4^0` and cuts the
//! `n = 4` carrier instead.

/// Degree and order of an associated Laguerre polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaguerreSpec {
    pub n: usize,
    pub alpha: usize,
}

impl LaguerreSpec {
    pub fn new(n: usize, alpha: usize) -> Self {
        Self { n, alpha }
    }
}

/// `L_n^α(x)` by upward three-term recurrence in `n`.
pub fn laguerre(spec: LaguerreSpec, x: f64) -> f64 {
    let alpha = spec.alpha as f64;
    let mut prev = 1.0;
    if spec.n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..spec.n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `d/dx L_n^α(x) = -L_{n-1}^{α+1}(x)`.
pub fn laguerre_derivative(spec: LaguerreSpec, x: f64) -> f64 {
    if spec.n == 0 {
        return 0.0;
    }
    -laguerre(LaguerreSpec::new(spec.n - 1, spec.alpha + 1), x)
}

const BISECTION_TOL: f64 = 1e-12;

/// All `n` roots of `L_n^α`, increasing.
///
/// Scans `[0, 4n + 2α + 2]` for sign changes, bisects each bracket to
/// `1e-12` and finishes with one Newton step. If two roots share a scan
/// cell the grid is refined until `n` brackets are found.
pub fn laguerre_zeros(spec: LaguerreSpec) -> Vec<f64> {
    if spec.n == 0 {
        return Vec::new();
    }
    let upper = (4 * spec.n + 2 * spec.alpha + 2) as f64;
    let mut cells = 10 * spec.n;
    loop {
        let brackets = sign_changes(spec, upper, cells);
        // 2^20 cells on a finite interval would mean something is badly wrong
        if brackets.len() == spec.n || cells > (1 << 20) {
            return brackets
                .into_iter()
                .map(|(lo, hi)| polish(spec, lo, hi))
                .collect();
        }
        cells *= 2;
    }
}

fn sign_changes(spec: LaguerreSpec, upper: f64, cells: usize) -> Vec<(f64, f64)> {
    let step = upper / cells as f64;
    let mut out = Vec::with_capacity(spec.n);
    let mut x0 = 0.0;
    let mut f0 = laguerre(spec, x0);
    for i in 1..=cells {
        let x1 = step * i as f64;
        let f1 = laguerre(spec, x1);
        if f1 == 0.0 {
            // root exactly on the grid: bracket it with the next cell
            out.push((x1 - 0.5 * step, x1 + 0.5 * step));
        } else if f0 != 0.0 && f0.signum() != f1.signum() {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

fn polish(spec: LaguerreSpec, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = laguerre(spec, lo);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = laguerre(spec, mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let d = laguerre_derivative(spec, x);
    if d != 0.0 {
        let newton = x - laguerre(spec, x) / d;
        // keep the Newton step only if it stays in the bracket
        if (newton - x).abs() <= 2.0 * BISECTION_TOL {
            return newton;
        }
    }
    x
}

/// Tabulates `(x, L_n^α(x))` over a grid.
pub fn laguerre_curve(spec: LaguerreSpec, x_grid: &[f64]) -> Vec<(f64, f64)> {
    x_grid.iter().map(|&x| (x, laguerre(spec, x))).collect()
}

/// Writes a curve as CSV with header `x,value`.
pub fn write_curve_csv<W: std::io::Write>(out: &mut W, curve: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "x,value")?;
    for (x, v) in curve {
        writeln!(out, "{x:.15e},{v:.15e}")?;
    }
    Ok(())
}
