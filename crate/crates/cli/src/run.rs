//! Task dispatch and output files.
//!
//! Every file starts with a `#` provenance line carrying the tool version,
//! the SHA-256 of the canonical scenario text and the seed. The canonical
//! scenario itself, defaults included, is written next to the results.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ion_control::connectivity::{build_graph, connected_components};
use ion_control::controllability::{controllability_verdict, degeneracy_report, dynamical_lie_algebra};
use ion_control::dynamics::{law_eberly_sequence_with, leakage, propagate, propagate_timedep_oracle};
use ion_control::model::{build_control, build_drift, closed_subspace_with, control_quadratures, restrict, Sideband};
use ion_control::optimizer::{optimize, spin_fidelity, state_fidelity, Objective};
use ion_control::quantum::{displacement_element, displacement_exact, OperatorMatrix, Spin, StateVector};
use ion_control::special::{laguerre_curve, laguerre_zeros, write_curve_csv, LaguerreSpec};
use sha2::{Digest, Sha256};

use crate::scenario::{emit_scenario, ColorSection, Scenario, ScenarioError, SegmentSection, StateTerm, Task};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ion_control::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// `(key, value)` pairs, also written to the summary CSV.
    pub summary: Vec<(String, String)>,
}

pub fn scenario_hash(scenario: &Scenario) -> String {
    hex::encode(Sha256::digest(emit_scenario(scenario).as_bytes()))
}

pub fn provenance_line(scenario: &Scenario) -> String {
    format!(
        "# ionctl {TOOL_VERSION} scenario_sha256={} seed={}",
        scenario_hash(scenario),
        scenario.seed
    )
}

struct Outputs<'a> {
    dir: &'a Path,
    prefix: &'a str,
    header: String,
    report: RunReport,
}

impl Outputs<'_> {
    fn write(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(format!("{}_{name}", self.prefix));
        let mut buf = Vec::new();
        let filled = writeln!(buf, "{}", self.header).and_then(|_| body(&mut buf));
        filled
            .and_then(|_| fs::write(&path, &buf))
            .map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.report.files.push(path);
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.report.summary.push((key.to_string(), value.to_string()));
    }
}

fn sci(x: f64) -> String {
    format!("{x:.15e}")
}

/// Runs the scenario's task and writes its outputs under `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunReport, RunError> {
    scenario.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut out = Outputs {
        dir: out_dir,
        prefix: &scenario.output,
        header: provenance_line(scenario),
        report: RunReport::default(),
    };
    out.note("task", scenario.task.kind());
    out.note("seed", scenario.seed);
    let text = emit_scenario(scenario);
    out.write("scenario.toml", |w| w.write_all(text.as_bytes()))?;

    match &scenario.task {
        Task::Zeros { .. } => zeros(scenario, &mut out)?,
        Task::Matelem { .. } => matelem(scenario, &mut out)?,
        Task::Graph { .. } => graph(scenario, &mut out)?,
        Task::Liealg { .. } => liealg(scenario, &mut out)?,
        Task::Evolve { .. } => evolve(scenario, &mut out)?,
        Task::Laweberly { .. } => laweberly(scenario, &mut out)?,
        Task::Optimize { .. } => run_optimize(scenario, &mut out)?,
    }

    let summary = out.report.summary.clone();
    out.write("summary.csv", |w| {
        writeln!(w, "key,value")?;
        for (k, v) in &summary {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })?;
    Ok(out.report)
}

fn zeros(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Zeros { n, alpha, curve_min, curve_max, curve_points } = &s.task else { unreachable!() };
    let spec = LaguerreSpec::new(*n, *alpha);
    let roots = laguerre_zeros(spec);
    out.write("zeros.csv", |w| {
        writeln!(w, "index,root")?;
        for (i, r) in roots.iter().enumerate() {
            writeln!(w, "{i},{}", sci(*r))?;
        }
        Ok(())
    })?;
    let hi = curve_max.expect("filled by the parser");
    let step = (hi - curve_min) / (*curve_points - 1) as f64;
    let grid: Vec<f64> = (0..*curve_points).map(|i| curve_min + step * i as f64).collect();
    let curve = laguerre_curve(spec, &grid);
    out.write("curve.csv", |w| write_curve_csv(w, &curve))?;
    out.note("root_count", roots.len());
    if let Some(r) = roots.first() {
        out.note("smallest_root", sci(*r));
    }
    Ok(())
}

fn matelem(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Matelem { etas, max_n, oracle } = &s.task else { unreachable!() };
    let etas = if etas.is_empty() {
        vec![s.model.lamb_dicke.resolve()?]
    } else {
        etas.clone()
    };
    let levels = max_n + 1;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &eta in &etas {
        let exact = if *oracle { Some(displacement_exact(eta, levels, 10)?) } else { None };
        for to in 0..levels {
            for from in 0..levels {
                let z = displacement_element(to, from, eta);
                let err = exact.as_ref().map(|e| (z - e[(to, from)]).norm());
                worst = worst.max(err.unwrap_or(0.0));
                rows.push((eta, to, from, z, err));
            }
        }
    }
    out.write("matelem.csv", |w| {
        write!(w, "eta,n_to,n_from,re,im,abs")?;
        writeln!(w, "{}", if *oracle { ",oracle_abs_error" } else { "" })?;
        for (eta, to, from, z, err) in &rows {
            write!(w, "{},{to},{from},{},{},{}", sci(*eta), sci(z.re), sci(z.im), sci(z.norm()))?;
            match err {
                Some(e) => writeln!(w, ",{}", sci(*e))?,
                None => writeln!(w)?,
            }
        }
        Ok(())
    })?;
    if *oracle {
        out.note("max_oracle_abs_error", sci(worst));
    }
    Ok(())
}

fn graph(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Graph { threshold } = &s.task else { unreachable!() };
    let model = s.system_model()?;
    let colors = s.field_colors();
    let g = build_graph(&model, &colors, *threshold)?;
    let comps = connected_components(&g);
    out.write("edges.csv", |w| g.write_edges_csv(w))?;
    out.write("vertices.csv", |w| g.write_vertices_csv(w))?;
    out.write("components.csv", |w| {
        writeln!(w, "component,index,spins,n")?;
        for (c, comp) in comps.iter().enumerate() {
            for &v in comp {
                let st = &g.vertices[v];
                writeln!(w, "{c},{v},{},{}", st.spin_label(), st.phonon)?;
            }
        }
        Ok(())
    })?;
    out.note("edges", g.edges.len());
    out.note("components", comps.len());
    let ground = model.basis.ground_index();
    let size = comps.iter().find(|c| c.contains(&ground)).map_or(0, Vec::len);
    out.note("ground_component_size", size);
    let closed = closed_subspace_with(&model, &colors, *threshold)?;
    out.note("ground_component_closed", closed.is_some());
    Ok(())
}

fn liealg(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Liealg { tol, max_dim, include_drift, quadratures, restrict: restrict_sub } = &s.task else {
        unreachable!()
    };
    let model = s.system_model()?;
    let colors = s.field_colors();
    let mut controls: Vec<OperatorMatrix> = Vec::new();
    for c in &colors {
        if *quadratures {
            controls.extend(control_quadratures(&model, c)?);
        } else {
            controls.push(build_control(&model, c)?);
        }
    }
    let mut drift = if *include_drift {
        build_drift(&model)
    } else {
        OperatorMatrix::zeros(model.dim(), model.dim())
    };
    let sub = if *restrict_sub {
        closed_subspace_with(&model, &colors, ion_control::connectivity::DEFAULT_THRESHOLD)?
    } else {
        None
    };
    if let Some(sub) = &sub {
        drift = restrict(&drift, sub);
        controls = controls.iter().map(|h| restrict(h, sub)).collect();
    }
    let d = drift.nrows();
    let cap = if *max_dim == 0 { None } else { Some(*max_dim) };
    let r = dynamical_lie_algebra(&drift, &controls, *tol, cap)?;
    let verdict = controllability_verdict(&r, d);
    out.write("liealg.csv", |w| r.write_report_csv(w))?;
    let groups = degeneracy_report(&model, &colors)?;
    out.write("degeneracy.csv", |w| {
        writeln!(w, "color_tag,ion,n_from,n_to,magnitude,distinguishable")?;
        for g in &groups {
            for t in &g.transitions {
                writeln!(w, "{},{},{},{},{},{}", g.tag, t.ion + 1, t.n_from, t.n_to, sci(t.magnitude), g.distinguishable)?;
            }
        }
        Ok(())
    })?;
    out.note("space_dim", d);
    out.note("restricted_to_closed_component", sub.is_some());
    out.note("dimension", r.dimension);
    out.note("saturated", r.saturated);
    out.note("generations", r.generations);
    out.note("verdict", format!("{verdict:?}").to_lowercase());
    Ok(())
}

fn write_trajectory(out: &mut Outputs, name: &str, traj: &ion_control::dynamics::Trajectory) -> Result<(), RunError> {
    out.write(name, |w| traj.write_amplitudes_csv(w))
}

fn evolve(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Evolve { samples_per_segment, initial, oracle_dt } = &s.task else { unreachable!() };
    let model = s.system_model()?;
    let colors = s.field_colors();
    let psi0 = s.state(initial, "task.initial")?;
    let schedule = s.pulse_schedule();
    let traj = propagate(&model, &schedule, &psi0, *samples_per_segment)?;
    write_trajectory(out, "amplitudes.csv", &traj)?;
    out.note("samples", traj.times.len());
    out.note("final_norm", sci(traj.final_state().norm()));
    let closed = closed_subspace_with(&model, &colors, ion_control::connectivity::DEFAULT_THRESHOLD)?;
    // Leakage is only meaningful when the initial state starts inside the ground component.
    let inside = |sub: &Vec<usize>| 1.0 - sub.iter().map(|&i| psi0[i].norm_sqr()).sum::<f64>() < 1e-12;
    if let Some(sub) = closed.filter(inside) {
        out.write("population.csv", |w| traj.write_population_csv(w, &sub))?;
        out.note("closed_component_size", sub.len());
        out.note("leakage", sci(leakage(&traj, &sub)?));
    }
    if *oracle_dt > 0.0 {
        let full = propagate_timedep_oracle(&model, &schedule, &psi0, *oracle_dt)?;
        write_trajectory(out, "oracle_amplitudes.csv", &full)?;
        out.note("rwa_distance", sci((traj.final_state() - full.final_state()).norm()));
    }
    Ok(())
}

/// Terms of a full-space state, amplitudes above `1e-15`.
fn state_terms(s: &Scenario, psi: &StateVector) -> Vec<StateTerm> {
    let model = s.system_model().expect("validated");
    psi.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-15)
        .map(|(i, z)| {
            let st = model.basis.state(i).expect("in range");
            StateTerm {
                spins: st
                    .spins
                    .iter()
                    .map(|sp| if *sp == Spin::Up { 'u' } else { 'd' })
                    .collect(),
                n: st.phonon,
                re: z.re,
                im: z.im,
            }
        })
        .collect()
}

/// A scenario that replays `segments` through `evolve`.
fn replay_scenario(s: &Scenario, colors: Vec<ColorSection>, segments: Vec<SegmentSection>, initial: Vec<StateTerm>) -> Scenario {
    Scenario {
        output: format!("{}_replay", s.output),
        seed: s.seed,
        model: s.model.clone(),
        colors,
        schedule: segments,
        task: Task::Evolve {
            samples_per_segment: 10,
            initial,
            oracle_dt: 0.0,
        },
    }
}

fn color(target_ion: usize, sideband: Sideband, rabi: f64) -> ColorSection {
    ColorSection {
        target_ion,
        sideband: sideband.name().into(),
        rabi,
        phase: 0.0,
        detuning: 0.0,
    }
}

fn laweberly(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Laweberly { target, sideband, rabi } = &s.task else { unreachable!() };
    let model = s.system_model()?;
    let target = s.state(target, "task.target")?;
    let sideband: Sideband = sideband.parse()?;
    let schedule = law_eberly_sequence_with(&model, &target, sideband, *rabi)?;
    out.write("schedule.csv", |w| {
        writeln!(w, "segment,sideband,rabi,phase,duration")?;
        for (i, seg) in schedule.segments.iter().enumerate() {
            let c = &seg.colors[0];
            writeln!(w, "{i},{},{},{},{}", c.sideband, sci(c.rabi), sci(c.phase), sci(seg.duration))?;
        }
        Ok(())
    })?;
    let g = model.basis.ground_index();
    let ground = StateVector::from_fn(model.dim(), |r, _| ion_control::C64::new(if r == g { 1.0 } else { 0.0 }, 0.0));
    let traj = propagate(&model, &schedule, &ground, 1)?;
    let fidelity = state_fidelity(traj.final_state(), &target)?;
    // color 0 is the carrier, color 1 the sideband; each segment drives one
    let segments = schedule
        .segments
        .iter()
        .map(|seg| {
            let c = &seg.colors[0];
            let on = [c.rabi, c.phase];
            SegmentSection {
                duration: seg.duration,
                amplitudes: if c.sideband == Sideband::Carrier { vec![on, [0.0, 0.0]] } else { vec![[0.0, 0.0], on] },
            }
        })
        .collect();
    let replay = replay_scenario(
        s,
        vec![color(0, Sideband::Carrier, *rabi), color(0, sideband, *rabi)],
        segments,
        Vec::new(),
    );
    let text = emit_scenario(&replay);
    out.write("replay.toml", |w| w.write_all(text.as_bytes()))?;
    out.note("segments", schedule.segments.len());
    out.note("total_time", sci(schedule.total_time()));
    out.note("replay_fidelity", sci(fidelity));
    Ok(())
}

fn run_optimize(s: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let Task::Optimize { initial, .. } = &s.task else { unreachable!() };
    let model = s.system_model()?;
    let colors = s.field_colors();
    let objective = s.objective()?;
    let search = s.search_config()?;
    let result = optimize(&model, &colors, &objective, &search, s.seed)?;
    out.write("log.csv", |w| result.write_log_csv(w))?;
    let schedule = result.best.to_schedule(&colors);
    let traj = propagate(&model, &schedule, objective.initial(), 1)?;
    out.note("best_score", sci(result.best_score));
    out.note("generations", result.history.len());
    out.note("evaluations", result.evaluations);
    out.note("restarts", result.restarts);
    out.note("duration", sci(result.best.duration));
    match &objective {
        Objective::StateFidelity { target, .. } => {
            out.note("state_fidelity", sci(state_fidelity(traj.final_state(), target)?));
        }
        Objective::SpinFidelity { target_spin, .. } => {
            let (f, p) = spin_fidelity(traj.final_state(), target_spin, &model.basis)?;
            out.note("spin_fidelity", sci(f));
            out.note("spin_purity", sci(p));
        }
    }
    let initial_terms = if initial.is_empty() {
        Vec::new()
    } else {
        state_terms(s, objective.initial())
    };
    let segments = result
        .best
        .segments
        .iter()
        .map(|amps| SegmentSection {
            duration: result.best.duration / result.best.segments.len() as f64,
            amplitudes: amps.iter().map(|&(a, p)| [a, p]).collect(),
        })
        .collect();
    let replay = replay_scenario(s, s.colors.clone(), segments, initial_terms);
    let text = emit_scenario(&replay);
    out.write("best.toml", |w| w.write_all(text.as_bytes()))?;
    Ok(())
}
