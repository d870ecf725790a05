//! Pulse propagation in the resonant interaction picture, a time-dependent
//! reference integrator that keeps every off-resonant term, BCH splitting
//! diagnostics, leakage measurement and the Law–Eberly construction.
//!
//! Angle convention: a constant Hamiltonian whose element between a resonant
//! pair is `g` rotates that pair by `2|g|t`, so a π-pulse (full population
//! transfer) needs `|g|t = π/2`.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::model::{color_hamiltonian, control_raising, FieldColor, Sideband, SystemModel};
use crate::quantum::{check_normalized, commutator, exp_i_hermitian, BasisState, OperatorMatrix, Spin, StateVector};
use crate::C64;

const NORM_TOL: f64 = 1e-10;

/// Colors held at constant amplitude and phase for `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub colors: Vec<FieldColor>,
    pub duration: f64,
}

impl Segment {
    pub fn new(colors: Vec<FieldColor>, duration: f64) -> Self {
        Self { colors, duration }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSchedule {
    pub segments: Vec<Segment>,
}

impl PulseSchedule {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &PulseSchedule) -> PulseSchedule {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        PulseSchedule { segments }
    }

    fn validate(&self, model: &SystemModel) -> Result<()> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.duration > 0.0 && seg.duration.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i}: duration must be positive, got {}",
                    seg.duration
                )));
            }
            for c in &seg.colors {
                if c.detuning != 0.0 {
                    return Err(Error::NonzeroDetuning { detuning: c.detuning });
                }
                if c.target_ion >= model.ion_count() {
                    return Err(Error::IonIndex {
                        index: c.target_ion,
                        ion_count: model.ion_count(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Sampled states along a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn subspace_population(&self, subspace: &[usize]) -> Vec<f64> {
        self.states
            .iter()
            .map(|psi| subspace.iter().map(|&i| psi[i].norm_sqr()).sum())
            .collect()
    }

    /// Sparse amplitude CSV: `time,index,re_amp,im_amp`, amplitudes above `1e-12` only.
    pub fn write_amplitudes_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "time,index,re_amp,im_amp")?;
        for (t, psi) in self.times.iter().zip(&self.states) {
            for (i, z) in psi.iter().enumerate() {
                if z.norm() > 1e-12 {
                    writeln!(out, "{t:.15e},{i},{:.15e},{:.15e}", z.re, z.im)?;
                }
            }
        }
        Ok(())
    }

    /// `time,subspace_population`.
    pub fn write_population_csv<W: Write>(&self, out: &mut W, subspace: &[usize]) -> io::Result<()> {
        writeln!(out, "time,subspace_population")?;
        for (t, p) in self.times.iter().zip(self.subspace_population(subspace)) {
            writeln!(out, "{t:.15e},{p:.15e}")?;
        }
        Ok(())
    }
}

fn check_state(model: &SystemModel, psi: &StateVector) -> Result<()> {
    if psi.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: psi.len(),
        });
    }
    check_normalized(psi, NORM_TOL)
}

/// Sum of the segment's color Hamiltonians.
pub fn segment_hamiltonian(model: &SystemModel, segment: &Segment) -> Result<OperatorMatrix> {
    let mut h = OperatorMatrix::zeros(model.dim(), model.dim());
    for c in &segment.colors {
        h += color_hamiltonian(model, c)?;
    }
    Ok(h)
}

/// Piecewise-constant propagation with `samples_per_segment` uniform samples
/// per segment (the segment end included) after the initial state.
pub fn propagate(
    model: &SystemModel,
    schedule: &PulseSchedule,
    psi0: &StateVector,
    samples_per_segment: usize,
) -> Result<Trajectory> {
    check_state(model, psi0)?;
    schedule.validate(model)?;
    let samples = samples_per_segment.max(1);
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut t0 = 0.0;
    let mut psi = psi0.clone();
    for seg in &schedule.segments {
        let h = segment_hamiltonian(model, seg)?;
        let eig = SymmetricEigen::new(h);
        let v = eig.eigenvectors;
        let start = v.adjoint() * &psi;
        for k in 1..=samples {
            let tau = seg.duration * k as f64 / samples as f64;
            let rotated = StateVector::from_fn(start.len(), |i, _| {
                start[i] * C64::from_polar(1.0, -eig.eigenvalues[i] * tau)
            });
            let state = &v * rotated;
            times.push(t0 + tau);
            states.push(state);
        }
        psi = states.last().expect("just pushed").clone();
        t0 += seg.duration;
    }
    Ok(Trajectory { times, states })
}

/// One raising matrix element with its rotating frequency in the
/// interaction picture: `coeff · e^{i freq t} |to⟩⟨from|`.
#[derive(Debug, Clone, Copy)]
struct RotatingEntry {
    to: usize,
    from: usize,
    coeff: C64,
    freq: f64,
}

/// Every `↓→↑` element a color couples, resonant or not.
fn rotating_entries(model: &SystemModel, color: &FieldColor) -> Result<Vec<RotatingEntry>> {
    let basis = &model.basis;
    let cutoff = basis.fock_cutoff();
    let w = model.trap.mode_freq;
    let amp = C64::from_polar(color.rabi, color.phase);
    let mut out = Vec::new();
    for ion in model.driven_ions(color)? {
        for (from, state) in basis.states().enumerate() {
            if state.spins[ion] != Spin::Down {
                continue;
            }
            let mut spins = state.spins.clone();
            spins[ion] = Spin::Up;
            for n_to in 0..cutoff {
                let c = model.coupling(ion, n_to, state.phonon);
                if c.norm() == 0.0 {
                    continue;
                }
                let to = basis
                    .index(&BasisState::new(spins.clone(), n_to))
                    .expect("within cutoff");
                let detune = n_to as f64 - state.phonon as f64 - color.sideband.order() as f64;
                out.push(RotatingEntry {
                    to,
                    from,
                    coeff: amp * c,
                    freq: detune * w,
                });
            }
        }
    }
    Ok(out)
}

fn hamiltonian_at(dim: usize, entries: &[RotatingEntry], t: f64) -> OperatorMatrix {
    let mut h = OperatorMatrix::zeros(dim, dim);
    for e in entries {
        let z = e.coeff * C64::from_polar(1.0, e.freq * t);
        h[(e.to, e.from)] += z;
        h[(e.from, e.to)] += z.conj();
    }
    h
}

/// `exp(a)·psi` by Taylor series, with squaring-style splitting when `a` is large.
fn apply_exp(a: &OperatorMatrix, psi: &StateVector) -> StateVector {
    let scale = a.norm();
    let pieces = (scale / 0.5).ceil().max(1.0) as usize;
    let a = a / C64::new(pieces as f64, 0.0);
    let mut out = psi.clone();
    for _ in 0..pieces {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..40 {
            term = &a * term / C64::new(k as f64, 0.0);
            acc += &term;
            if term.norm() < 1e-17 {
                break;
            }
        }
        out = acc;
    }
    out
}

fn integrate_oracle(
    dim: usize,
    segments: &[(Vec<RotatingEntry>, f64)],
    psi0: &StateVector,
    dt: f64,
) -> (Vec<f64>, Vec<StateVector>) {
    let g = 3f64.sqrt() / 6.0;
    let minus_i = C64::new(0.0, -1.0);
    let mut psi = psi0.clone();
    let mut t0 = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    for (entries, duration) in segments {
        let steps = (duration / dt).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        for k in 0..steps {
            let t = t0 + k as f64 * h;
            let h1 = hamiltonian_at(dim, entries, t + (0.5 - g) * h);
            let h2 = hamiltonian_at(dim, entries, t + (0.5 + g) * h);
            // fourth-order Magnus generator for ψ' = -iH(t)ψ
            let gen = (&h1 + &h2) * (minus_i * (0.5 * h))
                - commutator(&h2, &h1) * C64::new(3f64.sqrt() / 12.0 * h * h, 0.0);
            psi = apply_exp(&gen, &psi);
        }
        t0 += duration;
        times.push(t0);
        states.push(psi.clone());
    }
    (times, states)
}

/// Reference integrator with the full `exp(iη(a+a†))` coupling of every color
/// to every manifold, each off-resonant element rotating at its detuning.
///
/// Steps with fourth-order Magnus exponentials of at most `dt`, repeats with
/// half the step and fails if the final states differ by more than `1e-6`.
/// Samples at segment boundaries.
pub fn propagate_timedep_oracle(
    model: &SystemModel,
    schedule: &PulseSchedule,
    psi0: &StateVector,
    dt: f64,
) -> Result<Trajectory> {
    check_state(model, psi0)?;
    schedule.validate(model)?;
    if !(dt > 0.0) || dt * model.trap.mode_freq >= 0.05 {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} must satisfy 0 < dt·ω_m < 0.05"
        )));
    }
    let mut segments = Vec::with_capacity(schedule.segments.len());
    for seg in &schedule.segments {
        let mut entries = Vec::new();
        for c in &seg.colors {
            entries.extend(rotating_entries(model, c)?);
        }
        segments.push((entries, seg.duration));
    }
    let dim = model.dim();
    let (_, coarse) = integrate_oracle(dim, &segments, psi0, dt);
    let (times, states) = integrate_oracle(dim, &segments, psi0, 0.5 * dt);
    let change = (coarse.last().expect("nonempty") - states.last().expect("nonempty")).norm();
    if change > 1e-6 {
        return Err(Error::StepConvergence { change });
    }
    Ok(Trajectory { times, states })
}

/// Maximum population outside `subspace` over all samples.
pub fn leakage(trajectory: &Trajectory, subspace: &[usize]) -> Result<f64> {
    let dim = trajectory.states.first().map_or(0, |s| s.len());
    let mut inside = vec![false; dim];
    for &i in subspace {
        if i >= dim {
            return Err(Error::InvalidArgument(format!("subspace index {i} out of range")));
        }
        inside[i] = true;
    }
    Ok(trajectory
        .states
        .iter()
        .map(|psi| {
            psi.iter()
                .zip(&inside)
                .filter(|(_, &keep)| !keep)
                .map(|(z, _)| z.norm_sqr())
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BchRow {
    pub dt: f64,
    /// `‖e^{i(A+B)dt} − e^{iA dt} e^{iB dt}‖`
    pub defect1: f64,
    /// Same with the `e^{½[A,B]dt²}` correction appended.
    pub defect2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BchTable {
    pub rows: Vec<BchRow>,
    /// Log-log slope of `defect1` vs `dt`; `None` when the defects are at roundoff.
    pub slope1: Option<f64>,
    pub slope2: Option<f64>,
}

fn spectral_norm(m: &OperatorMatrix) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .filter(|&(_, y)| y > 1e-13)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Splitting error of `e^{i(A+B)dt}` by the product of single-color
/// propagators, without and with the first commutator correction.
///
/// For `X = iA·dt`, `Y = iB·dt`, `e^{X+Y} = e^X e^Y e^{-½[X,Y]} …` and
/// `-½[X,Y] = ½[A,B]dt²`, so the corrected defect falls off one order faster.
pub fn bch_defect(hc: &OperatorMatrix, hb: &OperatorMatrix, dt_list: &[f64]) -> Result<BchTable> {
    if hc.shape() != hb.shape() || !hc.is_square() {
        return Err(Error::DimensionMismatch {
            expected: hc.nrows(),
            got: hb.nrows(),
        });
    }
    let sum = hc + hb;
    // [A,B] is skew-Hermitian; -i[A,B] is Hermitian and e^{½[A,B]s} = e^{i·½(-i[A,B])s}
    let comm = commutator(hc, hb) * C64::new(0.0, -1.0);
    let rows: Vec<BchRow> = dt_list
        .iter()
        .map(|&dt| {
            let exact = exp_i_hermitian(&sum, dt);
            let split = exp_i_hermitian(hc, dt) * exp_i_hermitian(hb, dt);
            let corrected = &split * exp_i_hermitian(&comm, 0.5 * dt * dt);
            BchRow {
                dt,
                defect1: spectral_norm(&(&exact - &split)),
                defect2: spectral_norm(&(&exact - corrected)),
            }
        })
        .collect();
    Ok(BchTable {
        slope1: loglog_slope(rows.iter().map(|r| (r.dt, r.defect1))),
        slope2: loglog_slope(rows.iter().map(|r| (r.dt, r.defect2))),
        rows,
    })
}

/// Law–Eberly preparation of `target` from `|↓,0⟩` with alternating carrier
/// and red-sideband pulses at unit Rabi amplitude.
pub fn law_eberly_sequence(model: &SystemModel, target: &StateVector) -> Result<PulseSchedule> {
    law_eberly_sequence_with(model, target, Sideband::Red, 1.0)
}

/// Law–Eberly with a chosen sideband (red or blue) and Rabi amplitude.
///
/// Works backwards from the target: at the highest occupied rung a carrier
/// pulse gathers that rung's amplitude into the state the sideband couples
/// downwards, and a sideband pulse then empties the rung. Each backward
/// rotation is exact on the full state; the forward schedule is the reverse
/// with every phase shifted by π. All segments are single-color.
pub fn law_eberly_sequence_with(
    model: &SystemModel,
    target: &StateVector,
    sideband: Sideband,
    rabi: f64,
) -> Result<PulseSchedule> {
    if model.ion_count() != 1 {
        return Err(Error::InvalidArgument("Law-Eberly construction needs one ion".into()));
    }
    if sideband == Sideband::Carrier {
        return Err(Error::InvalidArgument("Law-Eberly needs a red or blue sideband".into()));
    }
    if !(rabi > 0.0) {
        return Err(Error::InvalidArgument(format!("Rabi amplitude must be positive, got {rabi}")));
    }
    check_state(model, target)?;

    let basis = &model.basis;
    let at = |spin: Spin, n: usize| basis.index(&BasisState::new(vec![spin], n)).expect("n < cutoff");
    let n_max = (0..basis.dim())
        .filter(|&i| target[i].norm() > 1e-14)
        .map(|i| i % basis.fock_cutoff())
        .max()
        .unwrap_or(0);

    let carrier = FieldColor::new(0, Sideband::Carrier, rabi, 0.0);
    let side = FieldColor::new(0, sideband, rabi, 0.0);
    let carrier_r = control_raising(model, &carrier)?;
    let side_r = control_raising(model, &side)?;

    let mut psi = target.clone();
    let mut backward: Vec<Segment> = Vec::new();
    let mut step = |psi: &mut StateVector, color: &FieldColor, raising: &OperatorMatrix, down: usize, up: usize, zero_up: bool| -> Result<()> {
        if let Some(seg) = zeroing_segment(model, psi, color, raising, down, up, zero_up)? {
            let h = color_hamiltonian(model, &seg.colors[0])?;
            *psi = exp_i_hermitian(&h, -seg.duration) * &*psi;
            backward.push(seg);
        }
        Ok(())
    };

    for n in (1..=n_max).rev() {
        match sideband {
            Sideband::Red => {
                // gather rung n into |↓,n⟩, then red: |↓,n⟩ → |↑,n-1⟩
                step(&mut psi, &carrier, &carrier_r, at(Spin::Down, n), at(Spin::Up, n), true)?;
                step(&mut psi, &side, &side_r, at(Spin::Down, n), at(Spin::Up, n - 1), false)?;
            }
            Sideband::Blue => {
                // gather rung n into |↑,n⟩, then blue: |↑,n⟩ → |↓,n-1⟩
                step(&mut psi, &carrier, &carrier_r, at(Spin::Down, n), at(Spin::Up, n), false)?;
                step(&mut psi, &side, &side_r, at(Spin::Down, n - 1), at(Spin::Up, n), true)?;
            }
            Sideband::Carrier => unreachable!(),
        }
    }
    step(&mut psi, &carrier, &carrier_r, at(Spin::Down, 0), at(Spin::Up, 0), true)?;

    let segments = backward
        .into_iter()
        .rev()
        .map(|mut seg| {
            let c = &mut seg.colors[0];
            c.phase = (c.phase + PI).rem_euclid(2.0 * PI);
            seg
        })
        .collect();
    Ok(PulseSchedule { segments })
}

const ZERO_AMP: f64 = 1e-14;

/// Single-color segment that rotates the pair (`down`, `up`) so that the
/// `up` (or `down`) amplitude vanishes.
fn zeroing_segment(
    model: &SystemModel,
    psi: &StateVector,
    color: &FieldColor,
    raising: &OperatorMatrix,
    down: usize,
    up: usize,
    zero_up: bool,
) -> Result<Option<Segment>> {
    let (x, y) = (psi[down], psi[up]);
    let gone = if zero_up { y } else { x };
    if gone.norm() < ZERO_AMP {
        return Ok(None);
    }
    let d = raising[(up, down)];
    if d.norm() < 1e-12 {
        let (s, n) = (model.basis.state(down).expect("valid"), model.basis.state(up).expect("valid"));
        return Err(Error::VanishingCoupling {
            what: format!("{} {s} ↔ {n}", color.sideband),
        });
    }
    let unit = |z: C64| if z.norm() == 0.0 { C64::new(1.0, 0.0) } else { z / z.norm() };
    // pair evolution: y' = cos θ y − i sin θ u x,  x' = cos θ x − i sin θ ū y
    let (u, theta) = if zero_up {
        let u = if x.norm() == 0.0 { C64::new(1.0, 0.0) } else { C64::new(0.0, -1.0) * unit(y / x) };
        (u, y.norm().atan2(x.norm()))
    } else {
        let u = if y.norm() == 0.0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) * unit(x / y).conj() };
        (u, x.norm().atan2(y.norm()))
    };
    let phase = (u.arg() - d.arg()).rem_euclid(2.0 * PI);
    let duration = theta / (color.rabi * d.norm());
    Ok(Some(Segment::new(vec![color.with_amplitude(color.rabi, phase)], duration)))
}
