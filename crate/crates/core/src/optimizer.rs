//! Learning-control search over color amplitudes, phases and the target time.
//!
//! An elitist evolutionary strategy with Gaussian mutation: each generation
//! the population is scored in parallel, the elite survive unchanged, and the
//! rest is refilled by blending two elite parents and mutating with a step
//! proportional to each parameter's bound width. The step decays every
//! generation and the population is reseeded after a long stall.
//!
//! Every random draw happens on the serial side of the generation barrier, so
//! the candidate sequence depends only on the seed.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{propagate, PulseSchedule, Segment};
use crate::error::{Error, Result};
use crate::model::{FieldColor, SystemModel};
use crate::quantum::{check_normalized, StateVector, TruncatedBasis};
use crate::C64;

const NORM_TOL: f64 = 1e-10;

/// Gains below this count as stalled.
const IMPROVEMENT_TOL: f64 = 1e-9;

/// `|⟨target|psi⟩|²`.
pub fn state_fidelity(psi: &StateVector, target: &StateVector) -> Result<f64> {
    if psi.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: psi.len(),
        });
    }
    Ok(target.dotc(psi).norm_sqr())
}

/// Reduced spin density matrix with the phonon traced out.
pub fn reduced_spin_state(psi: &StateVector, basis: &TruncatedBasis) -> Result<DMatrix<C64>> {
    if psi.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: psi.len(),
        });
    }
    let (s, n) = (basis.spin_dim(), basis.fock_cutoff());
    Ok(DMatrix::from_fn(s, s, |a, b| {
        (0..n).map(|k| psi[a * n + k] * psi[b * n + k].conj()).sum()
    }))
}

/// `(⟨t|ρ|t⟩, tr ρ²)` for the reduced spin state `ρ`. Purity is 1 exactly
/// when the motion factors out.
pub fn spin_fidelity(psi: &StateVector, target_spin: &StateVector, basis: &TruncatedBasis) -> Result<(f64, f64)> {
    check_normalized(psi, NORM_TOL)?;
    if target_spin.len() != basis.spin_dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.spin_dim(),
            got: target_spin.len(),
        });
    }
    let rho = reduced_spin_state(psi, basis)?;
    let fidelity = target_spin.dotc(&(&rho * target_spin)).re;
    let purity = (&rho * &rho).trace().re;
    Ok((fidelity, purity))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    StateFidelity {
        initial: StateVector,
        target: StateVector,
    },
    /// Scored as the fidelity when the purity clears `purity_floor`, else
    /// fidelity × purity.
    SpinFidelity {
        initial: StateVector,
        target_spin: StateVector,
        purity_floor: f64,
    },
}

impl Objective {
    pub fn initial(&self) -> &StateVector {
        match self {
            Objective::StateFidelity { initial, .. } | Objective::SpinFidelity { initial, .. } => initial,
        }
    }

    fn validate(&self, model: &SystemModel) -> Result<()> {
        let initial = self.initial();
        if initial.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: initial.len(),
            });
        }
        check_normalized(initial, NORM_TOL)?;
        match self {
            Objective::StateFidelity { target, .. } => {
                if target.len() != model.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: model.dim(),
                        got: target.len(),
                    });
                }
                check_normalized(target, NORM_TOL)
            }
            Objective::SpinFidelity {
                target_spin,
                purity_floor,
                ..
            } => {
                if target_spin.len() != model.basis.spin_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: model.basis.spin_dim(),
                        got: target_spin.len(),
                    });
                }
                if !(0.0..=1.0).contains(purity_floor) {
                    return Err(Error::InvalidArgument(format!("purity floor {purity_floor} outside [0, 1]")));
                }
                check_normalized(target_spin, NORM_TOL)
            }
        }
    }

    /// Score of a final state.
    pub fn score(&self, model: &SystemModel, psi: &StateVector) -> Result<f64> {
        match self {
            Objective::StateFidelity { target, .. } => state_fidelity(psi, target),
            Objective::SpinFidelity {
                target_spin,
                purity_floor,
                ..
            } => {
                let (f, p) = spin_fidelity(psi, target_spin, &model.basis)?;
                Ok(if p >= *purity_floor { f } else { f * p })
            }
        }
    }
}

/// Amplitude and phase of every color in every segment, plus the total
/// duration shared equally by the segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseParams {
    /// `segments[k][c] = (amplitude, phase)`.
    pub segments: Vec<Vec<(f64, f64)>>,
    pub duration: f64,
}

impl PulseParams {
    pub fn dimension(&self) -> usize {
        2 * self.segments.iter().map(Vec::len).sum::<usize>() + 1
    }

    pub fn to_schedule(&self, colors: &[FieldColor]) -> PulseSchedule {
        let k = self.segments.len().max(1) as f64;
        PulseSchedule::new(
            self.segments
                .iter()
                .map(|seg| {
                    let active = colors
                        .iter()
                        .zip(seg)
                        .map(|(c, &(a, p))| c.with_amplitude(a, p))
                        .collect();
                    Segment::new(active, self.duration / k)
                })
                .collect(),
        )
    }

    fn from_vector(v: &[f64], segments: usize, colors: usize) -> Self {
        let segs = (0..segments)
            .map(|k| {
                (0..colors)
                    .map(|c| {
                        let i = 2 * (k * colors + c);
                        (v[i], v[i + 1])
                    })
                    .collect()
            })
            .collect();
        Self {
            segments: segs,
            duration: *v.last().expect("duration slot"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population: usize,
    pub elite: usize,
    /// Initial mutation step as a fraction of each bound width.
    pub initial_scale: f64,
    pub decay: f64,
    pub min_scale: f64,
    /// Generations without improvement before the population is reseeded.
    pub stagnation_limit: usize,
    pub max_generations: usize,
    /// Stop once the best score reaches this.
    pub target_score: f64,
    pub rabi_max: f64,
    pub t_max: f64,
    pub segments: usize,
}

impl SearchConfig {
    /// Defaults scaled to the trap: `Ω_max = 0.2 ω_m`, `t_max = 400 / Ω_max`.
    pub fn for_model(model: &SystemModel) -> Self {
        let rabi_max = 0.2 * model.trap.mode_freq;
        Self {
            population: 32,
            elite: 8,
            initial_scale: 0.3,
            decay: 0.97,
            min_scale: 1e-7,
            stagnation_limit: 50,
            max_generations: 2000,
            target_score: 1.0,
            rabi_max,
            t_max: 400.0 / rabi_max,
            segments: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("search: {what}")));
        if self.population < 2 || self.elite == 0 || self.elite >= self.population {
            return bad("need 0 < elite < population");
        }
        if !(self.rabi_max > 0.0 && self.rabi_max.is_finite() && self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("bounds must be positive and finite");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) || !(self.initial_scale > 0.0) || self.min_scale < 0.0 {
            return bad("mutation scale settings out of range");
        }
        if !(1..=8).contains(&self.segments) {
            return bad("segments must be between 1 and 8");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best score seen so far.
    pub best_score: f64,
    pub mean_score: f64,
    pub mutation_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: PulseParams,
    pub best_score: f64,
    pub history: Vec<GenerationStats>,
    pub evaluations: usize,
    pub restarts: usize,
}

impl OptimizationResult {
    /// Log CSV: `generation,best_score,mean_score,mutation_scale`.
    pub fn write_log_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "generation,best_score,mean_score,mutation_scale")?;
        for g in &self.history {
            writeln!(
                out,
                "{},{:.15e},{:.15e},{:.15e}",
                g.generation, g.best_score, g.mean_score, g.mutation_scale
            )?;
        }
        Ok(())
    }
}

/// Score of one parameter set.
pub fn evaluate(model: &SystemModel, colors: &[FieldColor], objective: &Objective, params: &PulseParams) -> Result<f64> {
    let traj = propagate(model, &params.to_schedule(colors), objective.initial(), 1)?;
    objective.score(model, traj.final_state())
}

/// Parameter layout: `[a, φ]` per color per segment, then `t_f`.
struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    periodic: Vec<bool>,
}

impl Bounds {
    fn new(config: &SearchConfig, colors: usize) -> Self {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut periodic = Vec::new();
        for _ in 0..config.segments * colors {
            lower.extend([0.0, 0.0]);
            upper.extend([config.rabi_max, 2.0 * PI]);
            periodic.extend([false, true]);
        }
        // a zero-length pulse is not a schedule
        lower.push(1e-6 * config.t_max);
        upper.push(config.t_max);
        periodic.push(false);
        Self { lower, upper, periodic }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| rng.random_range(lo..hi))
            .collect()
    }

    fn confine(&self, v: &mut [f64]) {
        for (i, x) in v.iter_mut().enumerate() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            let w = hi - lo;
            if self.periodic[i] {
                *x = lo + (*x - lo).rem_euclid(w);
            } else {
                // reflect back inside, folding repeatedly for large steps
                let mut y = (*x - lo).rem_euclid(2.0 * w);
                if y > w {
                    y = 2.0 * w - y;
                }
                *x = lo + y;
            }
        }
    }
}

/// Searches amplitudes, phases and the duration for the best objective score.
///
/// Deterministic for a given `seed`; candidates whose evaluation fails are
/// logged and ranked last.
pub fn optimize(
    model: &SystemModel,
    colors: &[FieldColor],
    objective: &Objective,
    search: &SearchConfig,
    seed: u64,
) -> Result<OptimizationResult> {
    search.validate()?;
    objective.validate(model)?;
    if colors.is_empty() {
        return Err(Error::InvalidArgument("no colors to optimize".into()));
    }
    let bounds = Bounds::new(search, colors.len());
    let widths: Vec<f64> = bounds.lower.iter().zip(&bounds.upper).map(|(l, u)| u - l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let score_all = |pop: &[Vec<f64>]| -> Vec<f64> {
        pop.par_iter()
            .map(|v| {
                let p = PulseParams::from_vector(v, search.segments, colors.len());
                match evaluate(model, colors, objective, &p) {
                    Ok(s) if s.is_finite() => s,
                    Ok(_) => f64::NEG_INFINITY,
                    Err(e) => {
                        log::warn!("discarding candidate: {e}");
                        f64::NEG_INFINITY
                    }
                }
            })
            .collect()
    };

    let mut population: Vec<Vec<f64>> = (0..search.population).map(|_| bounds.sample(&mut rng)).collect();
    let mut scale = search.initial_scale;
    let mut best = population[0].clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut evaluations = 0;
    let mut restarts = 0;
    let mut stalled = 0;

    for generation in 0..search.max_generations {
        let scores = score_all(&population);
        evaluations += scores.len();

        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let top = order[0];
        if scores[top] > best_score {
            if scores[top] > best_score + IMPROVEMENT_TOL {
                stalled = 0;
            } else {
                stalled += 1;
            }
            best_score = scores[top];
            best = population[top].clone();
        } else {
            stalled += 1;
        }
        let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
        let mean_score = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        history.push(GenerationStats {
            generation,
            best_score,
            mean_score,
            mutation_scale: scale,
        });
        if best_score >= search.target_score || generation + 1 == search.max_generations {
            break;
        }

        if stalled >= search.stagnation_limit {
            log::debug!("generation {generation}: reseeding after {stalled} stalled generations");
            restarts += 1;
            stalled = 0;
            scale = search.initial_scale;
            population = (0..search.population).map(|_| bounds.sample(&mut rng)).collect();
            population[0] = best.clone();
            continue;
        }

        let elite: Vec<Vec<f64>> = order[..search.elite].iter().map(|&i| population[i].clone()).collect();
        let mut next = elite.clone();
        while next.len() < search.population {
            let a = &elite[rng.random_range(0..elite.len())];
            let b = &elite[rng.random_range(0..elite.len())];
            let mut child: Vec<f64> = a
                .iter()
                .zip(b)
                .enumerate()
                .map(|(i, (&x, &y))| {
                    let w: f64 = rng.random();
                    let mut z = if bounds.periodic[i] {
                        // blend along the shorter arc
                        let d = (y - x + PI).rem_euclid(2.0 * PI) - PI;
                        x + w * d
                    } else {
                        x + w * (y - x)
                    };
                    let step: f64 = StandardNormal.sample(&mut rng);
                    z += scale * widths[i] * step;
                    z
                })
                .collect();
            bounds.confine(&mut child);
            next.push(child);
        }
        population = next;
        scale = (scale * search.decay).max(search.min_scale);
    }

    Ok(OptimizationResult {
        best: PulseParams::from_vector(&best, search.segments, colors.len()),
        best_score,
        history,
        evaluations,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{BasisState, Spin};

    fn s(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn state_fidelity_basics() {
        let a = StateVector::from_vec(vec![s(1.0), s(0.0)]);
        let b = StateVector::from_vec(vec![s(0.0), s(1.0)]);
        let h = StateVector::from_vec(vec![s(0.5f64.sqrt()), s(0.5f64.sqrt())]);
        assert_eq!(state_fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(state_fidelity(&a, &b).unwrap(), 0.0);
        assert!((state_fidelity(&h, &a).unwrap() - 0.5).abs() < 1e-15);
        assert!(state_fidelity(&a, &StateVector::zeros(3)).is_err());
    }

    fn two_ion_state(m: &SystemModel, terms: &[(Spin, Spin, usize, f64)]) -> StateVector {
        let mut psi = StateVector::zeros(m.dim());
        for &(a, b, n, c) in terms {
            psi += m.basis.ket(&BasisState::new(vec![a, b], n)).unwrap() * s(c);
        }
        psi
    }

    fn bell() -> StateVector {
        // spin order |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩
        let r = 0.5f64.sqrt();
        StateVector::from_vec(vec![s(r), s(0.0), s(0.0), s(r)])
    }

    #[test]
    fn spin_fidelity_cases() {
        use Spin::{Down as D, Up as U};
        let m = SystemModel::two_ion(0.3, 3, true).unwrap();
        let r = 0.5f64.sqrt();

        let psi = two_ion_state(&m, &[(D, D, 0, r), (U, U, 0, r)]);
        let (f, p) = spin_fidelity(&psi, &bell(), &m.basis).unwrap();
        assert!((f - 1.0).abs() < 1e-12 && (p - 1.0).abs() < 1e-12);

        let psi = two_ion_state(&m, &[(D, D, 0, r), (U, U, 1, r)]);
        let (f, p) = spin_fidelity(&psi, &bell(), &m.basis).unwrap();
        assert!((f - 0.5).abs() < 1e-12 && (p - 0.5).abs() < 1e-12);

        let psi = two_ion_state(&m, &[(D, D, 0, r), (D, D, 1, r)]);
        let dd = StateVector::from_vec(vec![s(0.0), s(0.0), s(0.0), s(1.0)]);
        let (f, p) = spin_fidelity(&psi, &dd, &m.basis).unwrap();
        assert!((f - 1.0).abs() < 1e-12 && (p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purity_floor_scoring() {
        use Spin::{Down as D, Up as U};
        let m = SystemModel::two_ion(0.3, 3, true).unwrap();
        let r = 0.5f64.sqrt();
        let ground = two_ion_state(&m, &[(D, D, 0, 1.0)]);
        let obj = Objective::SpinFidelity {
            initial: ground,
            target_spin: bell(),
            purity_floor: 0.99,
        };
        let mixed = two_ion_state(&m, &[(D, D, 0, r), (U, U, 1, r)]);
        assert!((obj.score(&m, &mixed).unwrap() - 0.25).abs() < 1e-12);
        let pure = two_ion_state(&m, &[(D, D, 2, r), (U, U, 2, r)]);
        assert!((obj.score(&m, &pure).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_layout() {
        let colors = [FieldColor::carrier(0), FieldColor::blue(0)];
        let v = [0.1, 1.0, 0.2, 2.0, 0.3, 3.0, 0.4, 4.0, 10.0];
        let p = PulseParams::from_vector(&v, 2, 2);
        assert_eq!(p.dimension(), 9);
        let sched = p.to_schedule(&colors);
        assert_eq!(sched.segments.len(), 2);
        assert_eq!(sched.segments[1].colors[0].rabi, 0.3);
        assert_eq!(sched.segments[1].colors[1].phase, 4.0);
        assert_eq!(sched.total_time(), 10.0);
    }

    #[test]
    fn confine_respects_bounds() {
        let cfg = SearchConfig {
            segments: 1,
            ..SearchConfig::for_model(&SystemModel::single_ion(0.1, 2, true).unwrap())
        };
        let b = Bounds::new(&cfg, 1);
        let mut v = vec![-0.05, 7.0, 2500.0];
        b.confine(&mut v);
        assert!((v[0] - 0.05).abs() < 1e-12);
        assert!((v[1] - (7.0 - 2.0 * PI)).abs() < 1e-12);
        assert!((v[2] - 1500.0).abs() < 1e-9);
        let mut v = vec![1e3, -1e3, -1e5];
        b.confine(&mut v);
        for (i, x) in v.iter().enumerate() {
            assert!(*x >= b.lower[i] && *x <= b.upper[i]);
        }
    }

    fn pi_pulse_problem() -> (SystemModel, Vec<FieldColor>, Objective) {
        let m = SystemModel::single_ion(0.1, 3, true).unwrap();
        let ket = |spin| m.basis.ket(&BasisState::new(vec![spin], 0)).unwrap();
        let obj = Objective::StateFidelity {
            initial: ket(Spin::Down),
            target: ket(Spin::Up),
        };
        (m.clone(), vec![FieldColor::carrier(0)], obj)
    }

    #[test]
    fn finds_carrier_pi_pulse() {
        let (m, colors, obj) = pi_pulse_problem();
        let cfg = SearchConfig {
            max_generations: 600,
            target_score: 1.0 - 1e-9,
            t_max: 50.0,
            ..SearchConfig::for_model(&m)
        };
        let r = optimize(&m, &colors, &obj, &cfg, 7).unwrap();
        assert!(r.best_score >= 1.0 - 1e-6, "{}", r.best_score);
        assert!(r.history.windows(2).all(|w| w[1].best_score >= w[0].best_score));
        let again = optimize(&m, &colors, &obj, &cfg, 7).unwrap();
        assert_eq!(r, again);
        let replay = evaluate(&m, &colors, &obj, &r.best).unwrap();
        assert_eq!(replay, r.best_score);
    }

    #[test]
    fn global_phase_does_not_change_scores() {
        let (m, colors, obj) = pi_pulse_problem();
        let Objective::StateFidelity { initial, target } = obj.clone() else { unreachable!() };
        let rotated = Objective::StateFidelity {
            initial,
            target: target * C64::from_polar(1.0, 1.234),
        };
        let p = PulseParams {
            segments: vec![vec![(0.13, 0.7)]],
            duration: 9.0,
        };
        let a = evaluate(&m, &colors, &obj, &p).unwrap();
        let b = evaluate(&m, &colors, &rotated, &p).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configuration() {
        let (m, colors, obj) = pi_pulse_problem();
        let base = SearchConfig::for_model(&m);
        let bad = [
            SearchConfig { elite: 32, ..base.clone() },
            SearchConfig { rabi_max: f64::INFINITY, ..base.clone() },
            SearchConfig { segments: 9, ..base.clone() },
        ];
        for cfg in &bad {
            assert!(optimize(&m, &colors, &obj, cfg, 0).is_err());
        }
        assert!(optimize(&m, &[], &obj, &base, 0).is_err());
    }
}
