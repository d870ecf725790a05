//! Drift and per-color control Hamiltonians for one or two ions sharing a
//! single motional mode, in the resonant rotating-wave picture.
//!
//! Each color keeps only its resonant manifold: a carrier flips the target
//! spin at fixed `n`, a blue sideband flips `↓→↑` while adding a phonon, a red
//! sideband flips `↓→↑` while removing one. Off-resonant cross-driving is left
//! to [`crate::dynamics::propagate_timedep_oracle`].

use std::fmt;
use std::str::FromStr;

use crate::connectivity::{build_graph, connected_components, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::quantum::{displacement_element, BasisState, OperatorMatrix, Spin, TruncatedBasis};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sideband {
    Carrier,
    Blue,
    Red,
}

impl Sideband {
    /// Phonon change accompanying a `↓→↑` flip.
    pub fn order(self) -> i64 {
        match self {
            Sideband::Carrier => 0,
            Sideband::Blue => 1,
            Sideband::Red => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sideband::Carrier => "carrier",
            Sideband::Blue => "blue",
            Sideband::Red => "red",
        }
    }
}

impl fmt::Display for Sideband {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sideband {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "carrier" => Ok(Sideband::Carrier),
            "blue" => Ok(Sideband::Blue),
            "red" => Ok(Sideband::Red),
            other => Err(Error::InvalidArgument(format!("unknown sideband {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapConfig {
    /// ω_m
    pub mode_freq: f64,
    /// η_m
    pub lamb_dicke: f64,
    /// M_m^i, one entry per ion.
    pub participation: Vec<f64>,
}

impl TrapConfig {
    /// Equal unit participation for every ion.
    pub fn new(mode_freq: f64, lamb_dicke: f64, ion_count: usize) -> Self {
        Self {
            mode_freq,
            lamb_dicke,
            participation: vec![1.0; ion_count],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonConfig {
    /// ω₀
    pub qubit_splitting: f64,
    pub individually_addressable: bool,
}

impl IonConfig {
    pub fn new(qubit_splitting: f64, individually_addressable: bool) -> Self {
        Self {
            qubit_splitting,
            individually_addressable,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldColor {
    pub target_ion: usize,
    pub sideband: Sideband,
    pub rabi: f64,
    pub phase: f64,
    pub detuning: f64,
}

impl FieldColor {
    pub fn new(target_ion: usize, sideband: Sideband, rabi: f64, phase: f64) -> Self {
        Self {
            target_ion,
            sideband,
            rabi,
            phase,
            detuning: 0.0,
        }
    }

    pub fn carrier(target_ion: usize) -> Self {
        Self::new(target_ion, Sideband::Carrier, 1.0, 0.0)
    }

    pub fn blue(target_ion: usize) -> Self {
        Self::new(target_ion, Sideband::Blue, 1.0, 0.0)
    }

    pub fn red(target_ion: usize) -> Self {
        Self::new(target_ion, Sideband::Red, 1.0, 0.0)
    }

    pub fn with_amplitude(&self, rabi: f64, phase: f64) -> Self {
        Self {
            rabi,
            phase,
            ..self.clone()
        }
    }

    /// Short tag such as `b1` or `c2` (ions counted from 1).
    pub fn tag(&self) -> String {
        let letter = match self.sideband {
            Sideband::Carrier => 'c',
            Sideband::Blue => 'b',
            Sideband::Red => 'r',
        };
        format!("{letter}{}", self.target_ion + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub trap: TrapConfig,
    pub ions: Vec<IonConfig>,
    pub basis: TruncatedBasis,
    pub ldl: bool,
}

impl SystemModel {
    pub fn new(trap: TrapConfig, ions: Vec<IonConfig>, fock_cutoff: usize, ldl: bool) -> Result<Self> {
        let basis = TruncatedBasis::new(ions.len(), fock_cutoff)?;
        let model = Self {
            trap,
            ions,
            basis,
            ldl,
        };
        model.validate()?;
        Ok(model)
    }

    /// One ion, unit mode frequency, `fock_cutoff` phonon levels.
    pub fn single_ion(lamb_dicke: f64, fock_cutoff: usize, ldl: bool) -> Result<Self> {
        Self::new(
            TrapConfig::new(1.0, lamb_dicke, 1),
            vec![IonConfig::new(100.0, true)],
            fock_cutoff,
            ldl,
        )
    }

    /// Two same-mass ions with equal participation.
    pub fn two_ion(lamb_dicke: f64, fock_cutoff: usize, individually_addressable: bool) -> Result<Self> {
        Self::new(
            TrapConfig::new(1.0, lamb_dicke, 2),
            vec![IonConfig::new(100.0, individually_addressable); 2],
            fock_cutoff,
            false,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.trap.mode_freq > 0.0) {
            return bad(format!("mode frequency must be positive, got {}", self.trap.mode_freq));
        }
        if !(self.trap.lamb_dicke >= 0.0) {
            return bad(format!("Lamb-Dicke parameter must be nonnegative, got {}", self.trap.lamb_dicke));
        }
        if self.trap.participation.len() != self.ions.len() {
            return bad(format!(
                "{} participation factors for {} ions",
                self.trap.participation.len(),
                self.ions.len()
            ));
        }
        if self.basis.ion_count() != self.ions.len() {
            return bad("basis ion count differs from the ion list".into());
        }
        if let [a, b] = self.trap.participation[..] {
            if (a.abs() - b.abs()).abs() > 1e-12 {
                return bad(format!("two-ion participation magnitudes differ: {a} vs {b}"));
            }
        }
        for (i, ion) in self.ions.iter().enumerate() {
            if !(ion.qubit_splitting > 0.0) {
                return bad(format!("ion {i}: qubit splitting must be positive"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn ion_count(&self) -> usize {
        self.ions.len()
    }

    /// Effective Lamb-Dicke parameter `M_m^i η_m` seen by `ion`.
    pub fn effective_eta(&self, ion: usize) -> f64 {
        (self.trap.participation[ion] * self.trap.lamb_dicke).abs()
    }

    /// Ions whose transitions a color drives. An individually addressed
    /// target sees the color alone; otherwise every non-addressable ion with
    /// the same qubit splitting is illuminated too.
    pub fn driven_ions(&self, color: &FieldColor) -> Result<Vec<usize>> {
        let target = self.ion(color.target_ion)?;
        if target.individually_addressable {
            return Ok(vec![color.target_ion]);
        }
        let tol = 1e-12 * target.qubit_splitting;
        Ok(self
            .ions
            .iter()
            .enumerate()
            .filter(|(i, ion)| {
                *i == color.target_ion
                    || (!ion.individually_addressable
                        && (ion.qubit_splitting - target.qubit_splitting).abs() <= tol)
            })
            .map(|(i, _)| i)
            .collect())
    }

    fn ion(&self, index: usize) -> Result<&IonConfig> {
        self.ions.get(index).ok_or(Error::IonIndex {
            index,
            ion_count: self.ions.len(),
        })
    }

    /// Oscillator factor of a `↓→↑` flip on `ion` taking `n_from` to `n_to`.
    pub fn coupling(&self, ion: usize, n_to: usize, n_from: usize) -> C64 {
        let eta = self.effective_eta(ion);
        if self.ldl {
            let diff = n_to as i64 - n_from as i64;
            let mag = match diff {
                0 => ldl_coupling(n_from, Sideband::Carrier, eta),
                1 => ldl_coupling(n_from, Sideband::Blue, eta),
                -1 => ldl_coupling(n_from, Sideband::Red, eta),
                _ => 0.0,
            };
            // same i^|Δn| phase as the full element
            if diff == 0 {
                C64::new(mag, 0.0)
            } else {
                C64::new(0.0, mag)
            }
        } else {
            displacement_element(n_to, n_from, eta)
        }
    }
}

/// Coupling magnitude in the Lamb-Dicke limit: carrier `1`, blue `η√(n+1)`, red `η√n`.
pub fn ldl_coupling(n: usize, sideband: Sideband, eta: f64) -> f64 {
    match sideband {
        Sideband::Carrier => 1.0,
        Sideband::Blue => eta * ((n + 1) as f64).sqrt(),
        Sideband::Red => eta * (n as f64).sqrt(),
    }
}

/// `ω_m n̂` on the truncated basis.
pub fn build_drift(model: &SystemModel) -> OperatorMatrix {
    let n = model.basis.fock_cutoff();
    let w = model.trap.mode_freq;
    let diag = nalgebra::DVector::from_fn(model.dim(), |i, _| C64::new(w * (i % n) as f64, 0.0));
    OperatorMatrix::from_diagonal(&diag)
}

/// Total phonon number operator.
pub fn number_operator(basis: &TruncatedBasis) -> OperatorMatrix {
    let n = basis.fock_cutoff();
    let diag = nalgebra::DVector::from_fn(basis.dim(), |i, _| C64::new((i % n) as f64, 0.0));
    OperatorMatrix::from_diagonal(&diag)
}

/// Flips `ion` in `state` from `from` to the other spin, if it currently is `from`.
fn flipped(state: &BasisState, ion: usize, from: Spin) -> Option<Vec<Spin>> {
    if state.spins[ion] != from {
        return None;
    }
    let mut spins = state.spins.clone();
    spins[ion] = match from {
        Spin::Up => Spin::Down,
        Spin::Down => Spin::Up,
    };
    Some(spins)
}

/// Raising half `Σ c |…↑…, n'⟩⟨…↓…, n|` of a color at unit Rabi and zero phase.
pub fn control_raising(model: &SystemModel, color: &FieldColor) -> Result<OperatorMatrix> {
    if color.detuning != 0.0 {
        return Err(Error::NonzeroDetuning {
            detuning: color.detuning,
        });
    }
    let basis = &model.basis;
    let cutoff = basis.fock_cutoff() as i64;
    let mut out = OperatorMatrix::zeros(basis.dim(), basis.dim());
    for ion in model.driven_ions(color)? {
        for (from, state) in basis.states().enumerate() {
            let Some(spins) = flipped(&state, ion, Spin::Down) else {
                continue;
            };
            let n_to = state.phonon as i64 + color.sideband.order();
            if n_to < 0 || n_to >= cutoff {
                continue;
            }
            let to = basis
                .index(&BasisState::new(spins, n_to as usize))
                .expect("target within cutoff");
            out[(to, from)] += model.coupling(ion, n_to as usize, state.phonon);
        }
    }
    Ok(out)
}

/// Hermitian coupling matrix of one color at unit Rabi amplitude and zero phase.
pub fn build_control(model: &SystemModel, color: &FieldColor) -> Result<OperatorMatrix> {
    let raising = control_raising(model, color)?;
    let lowering = raising.adjoint();
    Ok(raising + lowering)
}

/// The two phase quadratures `R + R†` and `i(R − R†)` of a color.
///
/// With amplitude and phase both free, a color's Hamiltonian is any real
/// combination of these two.
pub fn control_quadratures(model: &SystemModel, color: &FieldColor) -> Result<[OperatorMatrix; 2]> {
    let raising = control_raising(model, color)?;
    let lowering = raising.adjoint();
    let y = (&raising - &lowering) * C64::new(0.0, 1.0);
    Ok([raising + lowering, y])
}

/// `Ω (e^{iφ} R + e^{-iφ} R†)` for the color's own amplitude and phase.
pub fn color_hamiltonian(model: &SystemModel, color: &FieldColor) -> Result<OperatorMatrix> {
    if !(color.rabi >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Rabi amplitude must be nonnegative, got {}",
            color.rabi
        )));
    }
    let raising = control_raising(model, color)? * C64::from_polar(color.rabi, color.phase);
    let lowering = raising.adjoint();
    Ok(raising + lowering)
}

/// Does a coupling out of the truncated basis survive for some state in `set`?
fn leaves_basis(model: &SystemModel, colors: &[FieldColor], set: &[usize], threshold: f64) -> Result<bool> {
    let basis = &model.basis;
    let cutoff = basis.fock_cutoff() as i64;
    for color in colors {
        let order = color.sideband.order();
        for ion in model.driven_ions(color)? {
            for &idx in set {
                let state = basis.state(idx).expect("valid index");
                let n = state.phonon as i64;
                // ↓→↑ raising leaves if n+order ≥ cutoff; ↑→↓ lowering if n-order ≥ cutoff
                let target = match state.spins[ion] {
                    Spin::Down => n + order,
                    Spin::Up => n - order,
                };
                if target < cutoff || target < 0 {
                    continue;
                }
                let c = match state.spins[ion] {
                    Spin::Down => model.coupling(ion, target as usize, n as usize),
                    Spin::Up => model.coupling(ion, n as usize, target as usize),
                };
                if c.norm() > threshold {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}

/// The finite component of the coupling graph that contains `|↓…↓,0⟩`,
/// if the applied colors sever it from the rest of the ladder.
///
/// Returns `None` when the component reaches the truncation boundary
/// through a coupling above threshold, i.e. when it is really infinite.
pub fn closed_subspace(model: &SystemModel, colors: &[FieldColor]) -> Result<Option<Vec<usize>>> {
    closed_subspace_with(model, colors, DEFAULT_THRESHOLD)
}

pub fn closed_subspace_with(
    model: &SystemModel,
    colors: &[FieldColor],
    threshold: f64,
) -> Result<Option<Vec<usize>>> {
    let graph = build_graph(model, colors, threshold)?;
    let ground = model.basis.ground_index();
    let component = connected_components(&graph)
        .into_iter()
        .find(|c| c.contains(&ground))
        .expect("every vertex is in some component");
    if leaves_basis(model, colors, &component, threshold)? {
        return Ok(None);
    }
    Ok(Some(component))
}

/// Restricts an operator to the rows and columns listed in `indices`.
pub fn restrict(op: &OperatorMatrix, indices: &[usize]) -> OperatorMatrix {
    OperatorMatrix::from_fn(indices.len(), indices.len(), |r, c| op[(indices[r], indices[c])])
}
