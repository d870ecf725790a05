//! Dynamical Lie algebra generated by `i·H₀` and `i·H_k`, controllability
//! verdicts, and degeneracy checks on the transitions each color drives.
//!
//! The algebra is grown by bracketing every newly found direction with the
//! generators. Left-normed brackets `[g₁,[g₂,[…,g_k]]]` span the generated
//! algebra, so this reaches the same span as bracketing all basis pairs at a
//! fraction of the cost. Directions are kept orthonormal under the
//! Hilbert–Schmidt inner product `Re tr(A†B)` with two Gram–Schmidt passes.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{FieldColor, SystemModel};
use crate::quantum::{commutator, is_hermitian, OperatorMatrix};
use crate::C64;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub new_directions: usize,
    pub cumulative_dimension: usize,
}

#[derive(Debug, Clone)]
pub struct LieAlgebraResult {
    /// Orthonormal skew-Hermitian basis.
    pub basis: Vec<OperatorMatrix>,
    pub dimension: usize,
    /// A full sweep found no new direction.
    pub saturated: bool,
    /// Commutator depth reached.
    pub generations: usize,
    pub history: Vec<GenerationRecord>,
}

impl LieAlgebraResult {
    /// Report CSV: `generation,new_directions,cumulative_dimension`.
    pub fn write_report_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "generation,new_directions,cumulative_dimension")?;
        for r in &self.history {
            writeln!(out, "{},{},{}", r.generation, r.new_directions, r.cumulative_dimension)?;
        }
        Ok(())
    }

    /// Norm of the part of `x` (skew-Hermitian) outside the span.
    pub fn residual_norm(&self, x: &OperatorMatrix) -> f64 {
        let vectors: Vec<Vec<f64>> = self.basis.iter().map(to_real).collect();
        let mut v = to_real(x);
        project_out(&vectors, &mut v);
        project_out(&vectors, &mut v);
        norm(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Controllable,
    Uncontrollable,
    Inconclusive,
}

/// Real coordinates of a skew-Hermitian matrix, isometric to `Re tr(A†B)`.
fn to_real(x: &OperatorMatrix) -> Vec<f64> {
    let d = x.nrows();
    let mut v = Vec::with_capacity(d * d);
    for k in 0..d {
        v.push(x[(k, k)].im);
    }
    let s = std::f64::consts::SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            v.push(s * x[(j, k)].re);
            v.push(s * x[(j, k)].im);
        }
    }
    v
}

fn from_real(v: &[f64], d: usize) -> OperatorMatrix {
    let mut x = OperatorMatrix::zeros(d, d);
    for k in 0..d {
        x[(k, k)] = C64::new(0.0, v[k]);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut i = d;
    for j in 0..d {
        for k in (j + 1)..d {
            let z = C64::new(s * v[i], s * v[i + 1]);
            x[(j, k)] = z;
            x[(k, j)] = -z.conj();
            i += 2;
        }
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(basis: &[Vec<f64>], v: &mut [f64]) {
    for b in basis {
        let c = dot(b, v);
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= c * bi;
        }
    }
}

struct Span {
    vectors: Vec<Vec<f64>>,
    matrices: Vec<OperatorMatrix>,
    dim: usize,
    tol: f64,
}

impl Span {
    /// Adds the new part of `x`; returns its index if one was found.
    fn insert(&mut self, x: &OperatorMatrix) -> Option<usize> {
        let mut v = to_real(x);
        let scale = norm(&v);
        if scale <= self.tol {
            return None;
        }
        for e in v.iter_mut() {
            *e /= scale;
        }
        project_out(&self.vectors, &mut v);
        project_out(&self.vectors, &mut v);
        let r = norm(&v);
        if r <= self.tol {
            return None;
        }
        for e in v.iter_mut() {
            *e /= r;
        }
        self.matrices.push(from_real(&v, self.dim));
        self.vectors.push(v);
        Some(self.vectors.len() - 1)
    }
}

/// Grows the Lie algebra generated by `i·drift` and `i·controls`.
///
/// Stops when a sweep adds nothing (`saturated`) or when the dimension
/// reaches `max_dim` (`saturated == false`, the growth symptom). `max_dim`
/// defaults to `dim²`.
pub fn dynamical_lie_algebra(
    drift: &OperatorMatrix,
    controls: &[OperatorMatrix],
    tol: f64,
    max_dim: Option<usize>,
) -> Result<LieAlgebraResult> {
    let dim = drift.nrows();
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    for h in std::iter::once(drift).chain(controls) {
        if h.nrows() != dim || h.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: h.nrows(),
            });
        }
        let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if !is_hermitian(h, 1e-10 * scale) {
            return Err(Error::InvalidArgument("generators must be Hermitian".into()));
        }
    }
    let max_dim = max_dim.unwrap_or(dim * dim).min(dim * dim);

    let i = C64::new(0.0, 1.0);
    let mut span = Span {
        vectors: Vec::new(),
        matrices: Vec::new(),
        dim,
        tol,
    };
    let mut generators = Vec::new();
    for h in std::iter::once(drift).chain(controls) {
        let x = h * i;
        let n = x.norm();
        if n == 0.0 {
            continue;
        }
        generators.push(&x / C64::new(n, 0.0));
        span.insert(&x);
    }

    let mut history = vec![GenerationRecord {
        generation: 0,
        new_directions: span.vectors.len(),
        cumulative_dimension: span.vectors.len(),
    }];
    let mut frontier: Vec<usize> = (0..span.vectors.len()).collect();
    let mut generation = 0;
    let mut saturated = false;

    while span.vectors.len() < max_dim {
        if frontier.is_empty() {
            saturated = true;
            break;
        }
        generation += 1;
        let candidates: Vec<OperatorMatrix> = frontier
            .par_iter()
            .flat_map_iter(|&e| {
                let elem = &span.matrices[e];
                generators.iter().map(move |g| commutator(g, elem))
            })
            .collect();
        let mut next = Vec::new();
        for c in &candidates {
            if span.vectors.len() >= max_dim {
                break;
            }
            if let Some(idx) = span.insert(c) {
                next.push(idx);
            }
        }
        history.push(GenerationRecord {
            generation,
            new_directions: next.len(),
            cumulative_dimension: span.vectors.len(),
        });
        frontier = next;
    }
    if frontier.is_empty() && span.vectors.len() < max_dim {
        saturated = true;
    }

    let dimension = span.vectors.len();
    Ok(LieAlgebraResult {
        basis: span.matrices,
        dimension,
        saturated,
        generations: generation,
        history,
    })
}

/// Controllable iff the algebra closed and contains `su(space_dim)`.
pub fn controllability_verdict(result: &LieAlgebraResult, space_dim: usize) -> Verdict {
    if !result.saturated {
        Verdict::Inconclusive
    } else if result.dimension + 1 >= space_dim * space_dim {
        Verdict::Controllable
    } else {
        Verdict::Uncontrollable
    }
}

/// One single-ion ladder transition `|↓, n_from⟩ → |↑, n_to⟩` driven by a color.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTransition {
    pub ion: usize,
    pub n_from: usize,
    pub n_to: usize,
    pub magnitude: f64,
}

/// Transitions that one color drives at a common resonance frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateGroup {
    pub color: usize,
    pub tag: String,
    pub transitions: Vec<LadderTransition>,
    /// Coupling magnitudes pairwise unequal beyond tolerance.
    pub distinguishable: bool,
}

pub const DEGENERACY_TOL: f64 = 1e-9;

/// Groups the transitions of each color and flags whether their coupling
/// strengths tell them apart. Vanishing couplings are left out.
pub fn degeneracy_report(model: &SystemModel, colors: &[FieldColor]) -> Result<Vec<DegenerateGroup>> {
    let cutoff = model.basis.fock_cutoff() as i64;
    let mut out = Vec::with_capacity(colors.len());
    for (ci, color) in colors.iter().enumerate() {
        let mut transitions = Vec::new();
        for ion in model.driven_ions(color)? {
            for n_from in 0..cutoff {
                let n_to = n_from + color.sideband.order();
                if n_to < 0 || n_to >= cutoff {
                    continue;
                }
                let magnitude = model.coupling(ion, n_to as usize, n_from as usize).norm();
                if magnitude > DEGENERACY_TOL {
                    transitions.push(LadderTransition {
                        ion,
                        n_from: n_from as usize,
                        n_to: n_to as usize,
                        magnitude,
                    });
                }
            }
        }
        let distinguishable = transitions.iter().enumerate().all(|(i, a)| {
            transitions[i + 1..]
                .iter()
                .all(|b| (a.magnitude - b.magnitude).abs() > DEGENERACY_TOL)
        });
        out.push(DegenerateGroup {
            color: ci,
            tag: color.tag(),
            transitions,
            distinguishable,
        });
    }
    Ok(out)
}
