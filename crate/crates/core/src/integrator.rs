//! Fixed-step RK4 evolution of the coupled lattice equations with
//! conservation monitoring.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{DriftQuantity, Error, Result};
use crate::experiments::{SidebandAmplitudes, SidebandProbe};
use crate::model::{self, ConservedQuantities, LatticeState, ModelParams, Species};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub observe_every: usize,
    /// Relative per-species norm drift that aborts the run.
    pub norm_drift_tol: f64,
    /// Relative Hamiltonian drift that aborts the run.
    pub energy_drift_tol: f64,
    /// Samples between stored density snapshots; 0 disables snapshots.
    pub density_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 50.0,
            observe_every: 100,
            norm_drift_tol: 1e-6,
            energy_drift_tol: 1e-6,
            density_every: 0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.observe_every == 0 {
            return bad("observe_every must be at least 1".into());
        }
        if !(self.norm_drift_tol > 0.0 && self.energy_drift_tol > 0.0) {
            return bad("drift tolerances must be positive".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Scratch buffers for one RK4 step.
struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); len];
        Rk4 {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, y: &mut [Complex64], m: usize, params: &ModelParams, dt: f64) {
        let half = 0.5 * dt;
        model::rhs_into(y, m, params, &mut self.k1);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k1) {
            *t = y + k * half;
        }
        model::rhs_into(&self.tmp, m, params, &mut self.k2);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *t = y + k * half;
        }
        model::rhs_into(&self.tmp, m, params, &mut self.k3);
        for ((t, y), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *t = y + k * dt;
        }
        model::rhs_into(&self.tmp, m, params, &mut self.k4);
        let w = dt / 6.0;
        for (i, y) in y.iter_mut().enumerate() {
            *y += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
    }
}

/// One classical RK4 step. `dt` may be negative for backward integration.
pub fn step_rk4(state: &LatticeState, params: &ModelParams, dt: f64) -> Result<LatticeState> {
    if !state.is_finite() {
        return Err(Error::Diverged {
            last_finite_t: f64::NAN,
        });
    }
    if !dt.is_finite() || dt == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "dt must be finite and nonzero, got {dt}"
        )));
    }
    let mut next = state.clone();
    let m = state.sites();
    Rk4::new(2 * m).step(next.amplitudes_mut(), m, params, dt);
    next.t = state.t + dt;
    if !next.is_finite() {
        return Err(Error::Diverged {
            last_finite_t: state.t,
        });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub norm1: f64,
    pub norm2: f64,
    #[serde(rename = "H")]
    pub hamiltonian: f64,
    pub max_density1: f64,
    pub max_density2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sideband: Option<SidebandAmplitudes>,
}

impl Sample {
    pub fn norm(&self, s: Species) -> f64 {
        match s {
            Species::One => self.norm1,
            Species::Two => self.norm2,
        }
    }

    pub fn max_density(&self, s: Species) -> f64 {
        match s {
            Species::One => self.max_density1,
            Species::Two => self.max_density2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub t: f64,
    pub density: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Diverged {
        last_finite_t: f64,
    },
    DriftExceeded {
        quantity: DriftQuantity,
        drift: f64,
        tol: f64,
        t: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<DensitySnapshot>,
    pub outcome: Outcome,
    /// Last finite state reached.
    pub final_state: LatticeState,
}

impl Trajectory {
    pub fn is_completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }

    /// Converts an aborted run into the matching error.
    pub fn ensure_completed(&self) -> Result<()> {
        match self.outcome {
            Outcome::Completed => Ok(()),
            Outcome::Diverged { last_finite_t } => Err(Error::Diverged { last_finite_t }),
            Outcome::DriftExceeded {
                quantity,
                drift,
                tol,
                t,
            } => Err(Error::DriftExceeded {
                quantity,
                drift,
                tol,
                t,
            }),
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
        }
        Ok(())
    }

    pub fn export_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Density matrix: one row per snapshot, `t` followed by every site.
    pub fn write_density_csv<W: Write>(&self, species: Species, mut w: W) -> std::io::Result<()> {
        let m = self.final_state.sites();
        write!(w, "t")?;
        for j in 0..m {
            write!(w, ",{j}")?;
        }
        writeln!(w)?;
        for snap in &self.snapshots {
            write!(w, "{}", crate::stability_map::sig9(snap.t))?;
            for d in &snap.density[species.index()] {
                write!(w, ",{}", crate::stability_map::sig9(*d))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn export_density_csv(&self, species: Species, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_density_csv(species, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Callback invoked at every recorded sample.
pub trait Observer {
    fn observe(&mut self, state: &LatticeState);
}

impl<F: FnMut(&LatticeState)> Observer for F {
    fn observe(&mut self, state: &LatticeState) {
        self(state)
    }
}

fn relative_drift(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        (value - reference).abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

fn make_sample(
    state: &LatticeState,
    q: &ConservedQuantities,
    probe: Option<&SidebandProbe>,
) -> Sample {
    Sample {
        t: state.t,
        norm1: q.norm1,
        norm2: q.norm2,
        hamiltonian: q.hamiltonian,
        max_density1: state.max_density(Species::One),
        max_density2: state.max_density(Species::Two),
        sideband: probe.map(|p| p.amplitudes(state)),
    }
}

/// Integrates from `initial` to `initial.t + t_end`.
///
/// Aborted runs (divergence, drift beyond tolerance) still return the
/// trajectory up to the last accepted sample, with [`Trajectory::outcome`] set.
pub fn evolve(
    initial: LatticeState,
    params: &ModelParams,
    config: &IntegratorConfig,
    probe: Option<&SidebandProbe>,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    config.validate()?;
    if !initial.is_finite() {
        return Err(Error::Diverged {
            last_finite_t: f64::NAN,
        });
    }
    if let Some(p) = probe {
        if p.sites() != initial.sites() {
            return Err(Error::DimensionMismatch {
                expected: initial.sites(),
                got: p.sites(),
            });
        }
    }
    let m = initial.sites();
    let t0 = initial.t;
    let steps = config.steps();
    let mut state = initial;
    let mut backup = state.clone();
    let mut rk = Rk4::new(2 * m);

    let reference = model::conserved_unchecked(state.amplitudes(), m, params);
    let mut samples = vec![make_sample(&state, &reference, probe)];
    let mut snapshots = Vec::new();
    let snapshot = |s: &LatticeState| DensitySnapshot {
        t: s.t,
        density: [s.density(Species::One), s.density(Species::Two)],
    };
    if config.density_every > 0 {
        snapshots.push(snapshot(&state));
    }
    for obs in observers.iter_mut() {
        obs.observe(&state);
    }

    let mut outcome = Outcome::Completed;
    for n in 1..=steps {
        backup.amplitudes_mut().copy_from_slice(state.amplitudes());
        backup.t = state.t;
        rk.step(state.amplitudes_mut(), m, params, config.dt);
        state.t = t0 + n as f64 * config.dt;
        if !state.is_finite() {
            outcome = Outcome::Diverged {
                last_finite_t: backup.t,
            };
            state = backup;
            break;
        }
        if n % config.observe_every != 0 && n != steps {
            continue;
        }

        let q = model::conserved_unchecked(state.amplitudes(), m, params);
        let norm_drift = Species::BOTH
            .map(|s| relative_drift(q.norm(s), reference.norm(s)))
            .into_iter()
            .fold(0.0, f64::max);
        let energy_drift = relative_drift(q.hamiltonian, reference.hamiltonian);
        if norm_drift > config.norm_drift_tol {
            outcome = Outcome::DriftExceeded {
                quantity: DriftQuantity::Norm,
                drift: norm_drift,
                tol: config.norm_drift_tol,
                t: state.t,
            };
            break;
        }
        if energy_drift > config.energy_drift_tol {
            outcome = Outcome::DriftExceeded {
                quantity: DriftQuantity::Energy,
                drift: energy_drift,
                tol: config.energy_drift_tol,
                t: state.t,
            };
            break;
        }

        samples.push(make_sample(&state, &q, probe));
        if config.density_every > 0 && (samples.len() - 1) % config.density_every == 0 {
            snapshots.push(snapshot(&state));
        }
        for obs in observers.iter_mut() {
            obs.observe(&state);
        }
    }

    Ok(Trajectory {
        samples,
        snapshots,
        outcome,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftReport {
    /// Max relative norm drift per species.
    pub norm: [f64; 2],
    /// Max relative Hamiltonian drift.
    pub energy: f64,
}

/// Largest deviations from the first sample.
pub fn drift_report(trajectory: &Trajectory) -> Result<DriftReport> {
    let first = trajectory
        .samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let mut report = DriftReport {
        norm: [0.0; 2],
        energy: 0.0,
    };
    for s in &trajectory.samples {
        for sp in Species::BOTH {
            let d = relative_drift(s.norm(sp), first.norm(sp));
            report.norm[sp.index()] = report.norm[sp.index()].max(d);
        }
        report.energy = report
            .energy
            .max(relative_drift(s.hamiltonian, first.hamiltonian));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::bogoliubov::CarrierSpec;
    use crate::model::{wave_number, LatticeConfig};

    fn carrier_state(
        params: &ModelParams,
        m: usize,
        l: usize,
        psi0: [f64; 2],
    ) -> (LatticeState, CarrierSpec) {
        let k = wave_number(l, m);
        let state = LatticeState::from_fn(LatticeConfig::new(m).unwrap(), |s, j| {
            Complex64::from_polar(psi0[s.index()], k * j as f64)
        });
        (
            state,
            CarrierSpec::new(params, k, psi0[0], psi0[1]).unwrap(),
        )
    }

    /// Max deviation from the exact rotating carrier at time `t`.
    fn carrier_error(state: &LatticeState, carrier: &CarrierSpec, t: f64) -> f64 {
        let mut err: f64 = 0.0;
        for s in Species::BOTH {
            for (j, z) in state.species(s).iter().enumerate() {
                let exact = Complex64::from_polar(
                    carrier.psi0(s),
                    carrier.k() * j as f64 - carrier.mu(s) * t,
                );
                err = err.max((z - exact).norm());
            }
        }
        err
    }

    #[test]
    fn zero_state_stays_zero() {
        let s = LatticeState::zeros(LatticeConfig::new(6).unwrap());
        let next = step_rk4(&s, &ModelParams::reference_miscible(), 0.1).unwrap();
        assert!(next.amplitudes().iter().all(|z| z.norm() == 0.0));
        assert_eq!(next.t, 0.1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::reference_miscible();
        let s = LatticeState::zeros(LatticeConfig::new(6).unwrap());
        assert!(step_rk4(&s, &p, 0.0).is_err());
        let cfg = IntegratorConfig {
            dt: -1.0,
            ..Default::default()
        };
        assert!(evolve(s.clone(), &p, &cfg, None, &mut []).is_err());
        let cfg = IntegratorConfig {
            observe_every: 0,
            ..Default::default()
        };
        assert!(evolve(s, &p, &cfg, None, &mut []).is_err());
    }

    #[test]
    fn overflow_is_reported_as_divergence() {
        let p = ModelParams::with_equal_hopping(1.0, 1e300, 1e300, 0.0).unwrap();
        let s = LatticeState::from_fn(LatticeConfig::new(4).unwrap(), |_, _| {
            Complex64::new(1e10, 0.0)
        });
        assert!(
            matches!(step_rk4(&s, &p, 1.0), Err(Error::Diverged { last_finite_t }) if last_finite_t == 0.0)
        );
        let cfg = IntegratorConfig {
            dt: 1.0,
            t_end: 5.0,
            observe_every: 1,
            ..Default::default()
        };
        let traj = evolve(s, &p, &cfg, None, &mut []).unwrap();
        assert!(matches!(traj.outcome, Outcome::Diverged { .. }));
        assert!(traj.final_state.is_finite());
        assert!(matches!(
            traj.ensure_completed(),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn single_step_local_error_is_fifth_order() {
        let p = ModelParams::reference_immiscible();
        let (s, c) = carrier_state(&p, 40, 15, [0.2, 0.15]);
        let e1 = carrier_error(&step_rk4(&s, &p, 0.02).unwrap(), &c, 0.02);
        let e2 = carrier_error(&step_rk4(&s, &p, 0.01).unwrap(), &c, 0.01);
        let ratio = e1 / e2;
        assert!((ratio - 32.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn carrier_density_is_stationary() {
        let p = ModelParams::reference_miscible();
        let a = 1.0 / 801f64.sqrt();
        let (s, _) = carrier_state(&p, 400, 150, [a, a]);
        let cfg = IntegratorConfig {
            t_end: 10.0,
            observe_every: 1000,
            ..Default::default()
        };
        let mut worst: f64 = 0.0;
        let mut obs = |st: &LatticeState| {
            for sp in Species::BOTH {
                for d in st.density(sp) {
                    worst = worst.max((d - a * a).abs());
                }
            }
        };
        let traj = evolve(s, &p, &cfg, None, &mut [&mut obs]).unwrap();
        assert!(traj.is_completed());
        assert_eq!(traj.samples.len(), 11);
        assert!(worst <= 1e-8, "{worst}");
    }

    #[test]
    fn global_phase_equivariance() {
        let p = ModelParams::reference_immiscible();
        let m = 16;
        let s = LatticeState::from_fn(LatticeConfig::new(m).unwrap(), |sp, j| {
            Complex64::new(
                0.2 + 0.05 * (j as f64 * 0.7).sin(),
                0.03 * sp.index() as f64,
            )
        });
        let theta = 0.83;
        let mut a = s.clone();
        let mut b = s.with_global_phase(theta);
        for _ in 0..200 {
            a = step_rk4(&a, &p, 1e-3).unwrap();
            b = step_rk4(&b, &p, 1e-3).unwrap();
        }
        let rotated = a.with_global_phase(theta);
        for (x, y) in rotated.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let p = ModelParams::reference_miscible();
        let m = 32;
        // linearly stable carrier, so reversal errors are not amplified
        let s = LatticeState::from_fn(LatticeConfig::new(m).unwrap(), |_, j| {
            let k = PI / 4.0;
            Complex64::from_polar(
                0.1 * (1.0 + 0.05 * (PI / 4.0 * j as f64).cos()),
                k * j as f64,
            )
        });
        // coarse step so both errors sit well above round-off
        let dt = 0.02;
        let steps = 200;
        let max_rel = |a: &LatticeState, b: &LatticeState| {
            let scale = b.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max);
            a.amplitudes()
                .iter()
                .zip(b.amplitudes())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
                / scale
        };
        let mut x = s.clone();
        for _ in 0..steps {
            x = step_rk4(&x, &p, dt).unwrap();
        }
        let mut reference = s.clone();
        for _ in 0..steps * 8 {
            reference = step_rk4(&reference, &p, dt / 8.0).unwrap();
        }
        let forward_drift = max_rel(&x, &reference);
        for _ in 0..steps {
            x = step_rk4(&x, &p, -dt).unwrap();
        }
        let back = max_rel(&x, &s);
        assert!(forward_drift > 1e-12);
        assert!(back <= 10.0 * forward_drift, "{back} vs {forward_drift}");
    }

    #[test]
    fn drift_report_on_trivial_runs() {
        let p = ModelParams::reference_miscible();
        let s = LatticeState::zeros(LatticeConfig::new(8).unwrap());
        let cfg = IntegratorConfig {
            t_end: 1e-4,
            ..Default::default()
        };
        assert_eq!(cfg.steps(), 0);
        let traj = evolve(s, &p, &cfg, None, &mut []).unwrap();
        assert_eq!(traj.samples.len(), 1);
        let d = drift_report(&traj).unwrap();
        assert_eq!(
            d,
            DriftReport {
                norm: [0.0, 0.0],
                energy: 0.0
            }
        );
    }

    #[test]
    fn jsonl_and_density_exports() {
        let p = ModelParams::reference_miscible();
        let (s, _) = carrier_state(&p, 8, 2, [0.1, 0.2]);
        let cfg = IntegratorConfig {
            dt: 0.01,
            t_end: 0.1,
            observe_every: 2,
            density_every: 2,
            ..Default::default()
        };
        let traj = evolve(s, &p, &cfg, None, &mut []).unwrap();
        assert_eq!(traj.samples.len(), 6);
        assert_eq!(traj.snapshots.len(), 3);
        let mut buf = Vec::new();
        traj.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["t", "norm1", "norm2", "H", "max_density1", "max_density2"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        let mut buf = Vec::new();
        traj.write_density_csv(Species::Two, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "t,0,1,2,3,4,5,6,7");
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 9);
    }
}
