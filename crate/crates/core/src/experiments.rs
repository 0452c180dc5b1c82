//! Modulated plane-wave runs: initial states, sideband extraction, growth
//! fits and the figure-reproduction presets.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bogoliubov::{self, CarrierSpec};
use crate::error::{Error, Result};
use crate::integrator::{self, IntegratorConfig, Observer, Trajectory};
use crate::linearization;
use crate::model::{wave_number, LatticeConfig, LatticeState, ModelParams, Species};
use crate::stability_map::{self, GridSpec, Solver, StabilityGrid};

/// `ψ_{j,1}(0) = ψ_{j,2}(0) = [A + α cos(qj)] e^{ikj}` with `k = 2πl/M`, `q = 2πs/M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatedStateSpec {
    pub amplitude: f64,
    pub alpha: f64,
    pub l: usize,
    pub s: usize,
    pub sites: usize,
}

impl ModulatedStateSpec {
    pub const DEFAULT_SITES: usize = 400;
    pub const DEFAULT_ALPHA_RATIO: f64 = 0.05;

    /// `M = 400`, `A = 1/√(2M+1)`, `α = 0.05 A`.
    pub fn standard(l: usize, s: usize) -> Self {
        let m = Self::DEFAULT_SITES;
        let a = 1.0 / ((2 * m + 1) as f64).sqrt();
        ModulatedStateSpec {
            amplitude: a,
            alpha: Self::DEFAULT_ALPHA_RATIO * a,
            l,
            s,
            sites: m,
        }
    }

    pub fn validate(&self) -> Result<LatticeConfig> {
        let lattice = LatticeConfig::new(self.sites)?;
        if self.l >= self.sites || self.s >= self.sites {
            return Err(Error::InvalidParameter(format!(
                "wave indices l={}, s={} must be below M={}",
                self.l, self.s, self.sites
            )));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "invalid amplitudes A={}, alpha={}",
                self.amplitude, self.alpha
            )));
        }
        Ok(lattice)
    }

    pub fn k(&self) -> f64 {
        wave_number(self.l, self.sites)
    }

    pub fn q(&self) -> f64 {
        wave_number(self.s, self.sites)
    }
}

/// `e^{i 2π n j / M}` with the phase reduced exactly in integers.
fn lattice_phase(n: usize, j: usize, m: usize) -> Complex64 {
    let r = (n % m) * (j % m) % m;
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / m as f64)
}

pub fn build_modulated_state(spec: &ModulatedStateSpec) -> Result<LatticeState> {
    let lattice = spec.validate()?;
    let m = spec.sites;
    Ok(LatticeState::from_fn(lattice, |_, j| {
        let envelope =
            spec.amplitude + spec.alpha * (2.0 * PI * ((spec.s * j) % m) as f64 / m as f64).cos();
        lattice_phase(spec.l, j, m) * envelope
    }))
}

/// Fourier projections onto the carrier and its two sidebands, per species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidebandAmplitudes {
    /// Component at `k + q`.
    pub plus: [Complex64; 2],
    /// Component at `k - q`.
    pub minus: [Complex64; 2],
    /// Component at `k`.
    pub carrier: [Complex64; 2],
}

impl SidebandAmplitudes {
    /// `max(|a₊|, |a₋|)`
    pub fn magnitude(&self, s: Species) -> f64 {
        self.plus[s.index()]
            .norm()
            .max(self.minus[s.index()].norm())
    }

    /// `|a₊|² + |a₋|²`
    pub fn power(&self, s: Species) -> f64 {
        self.plus[s.index()].norm_sqr() + self.minus[s.index()].norm_sqr()
    }
}

/// Precomputed projection kernels `e^{-i(k±q)j}/M` for repeated sampling.
#[derive(Debug, Clone)]
pub struct SidebandProbe {
    sites: usize,
    carrier: Vec<Complex64>,
    plus: Vec<Complex64>,
    minus: Vec<Complex64>,
}

impl SidebandProbe {
    pub fn new(l: usize, s: usize, sites: usize) -> Result<Self> {
        LatticeConfig::new(sites)?;
        if l >= sites || s >= sites {
            return Err(Error::InvalidParameter(format!(
                "wave indices l={l}, s={s} must be below M={sites}"
            )));
        }
        let kernel = |n: usize| -> Vec<Complex64> {
            let back = (sites - n % sites) % sites;
            (0..sites)
                .map(|j| lattice_phase(back, j, sites) / sites as f64)
                .collect()
        };
        Ok(SidebandProbe {
            sites,
            carrier: kernel(l),
            plus: kernel(l + s),
            minus: kernel(l + sites - s),
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self, state: &LatticeState) -> SidebandAmplitudes {
        let project = |kernel: &[Complex64]| {
            Species::BOTH.map(|s| {
                state
                    .species(s)
                    .iter()
                    .zip(kernel)
                    .map(|(z, w)| z * w)
                    .sum::<Complex64>()
            })
        };
        SidebandAmplitudes {
            plus: project(&self.plus),
            minus: project(&self.minus),
            carrier: project(&self.carrier),
        }
    }
}

/// `a±_σ = (1/M) Σ_j ψ_{j,σ} e^{-i(k±q)j}`
pub fn sideband_amplitudes(state: &LatticeState, l: usize, s: usize) -> Result<SidebandAmplitudes> {
    Ok(SidebandProbe::new(l, s, state.sites())?.amplitudes(state))
}

/// Amplitude band used for the exponential fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    /// Lower edge as a multiple of the initial sideband amplitude.
    pub lower_factor: f64,
    /// Upper edge as a fraction of the initial carrier amplitude.
    pub upper_fraction: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            lower_factor: 3.0,
            upper_fraction: 0.1,
        }
    }
}

/// Minimum samples inside the window for a fit to count as well resolved.
pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    /// Fitted on fewer than [`MIN_FIT_SAMPLES`] points.
    Sparse,
    /// The sideband never reached the window.
    NoGrowth,
    /// Saturated from the start or no usable initial amplitude.
    Unfittable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesFit {
    pub rate: f64,
    pub window: Option<[f64; 2]>,
    /// RMS residual of `ln a` about the fitted line.
    pub residual: f64,
    pub samples: usize,
    pub status: FitStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub species: [SpeciesFit; 2],
    pub analytic_rate: f64,
    /// `|rate - analytic| / analytic`; absent when the analytic rate is zero.
    pub relative_error: Option<f64>,
}

impl GrowthFit {
    /// Largest fitted rate over both species (zero if neither grew).
    pub fn rate(&self) -> f64 {
        self.species
            .iter()
            .filter(|f| matches!(f.status, FitStatus::Fitted | FitStatus::Sparse))
            .map(|f| f.rate)
            .fold(0.0, f64::max)
    }

    pub fn no_growth(&self) -> bool {
        self.species.iter().all(|f| f.status == FitStatus::NoGrowth)
    }

    pub fn within(&self, rtol: f64) -> bool {
        match self.relative_error {
            Some(e) => e <= rtol,
            None => self.no_growth(),
        }
    }
}

fn fit_line(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rms = (ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - ym - slope * (t - tm)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, rms)
}

fn fit_species(traj: &Trajectory, s: Species, window: &FitWindow) -> Result<SpeciesFit> {
    let series: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|smp| {
            smp.sideband
                .map(|sb| (smp.t, sb.magnitude(s)))
                .ok_or_else(|| {
                    Error::InvalidParameter("trajectory has no sideband observables".into())
                })
        })
        .collect::<Result<_>>()?;
    let first = traj.samples[0].sideband.expect("checked above");
    let initial = first.magnitude(s);
    let background = first.carrier[s.index()].norm();
    let lo = window.lower_factor * initial;
    let hi = window.upper_fraction * background;

    let unfittable = SpeciesFit {
        rate: 0.0,
        window: None,
        residual: 0.0,
        samples: 0,
        status: FitStatus::Unfittable,
    };
    if initial <= 0.0 || lo >= hi {
        return Ok(unfittable);
    }
    let Some(start) = series.iter().position(|&(_, a)| a >= lo) else {
        return Ok(SpeciesFit {
            status: FitStatus::NoGrowth,
            ..unfittable
        });
    };
    let end = series[start..]
        .iter()
        .position(|&(_, a)| a < lo || a > hi)
        .map_or(series.len(), |n| start + n);
    if end - start < 2 {
        return Ok(unfittable);
    }
    let ts: Vec<f64> = series[start..end].iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series[start..end].iter().map(|p| p.1.ln()).collect();
    let (slope, residual) = fit_line(&ts, &ys);
    let samples = ts.len();
    Ok(SpeciesFit {
        rate: slope.max(0.0),
        window: Some([ts[0], ts[samples - 1]]),
        residual,
        samples,
        status: if samples >= MIN_FIT_SAMPLES {
            FitStatus::Fitted
        } else {
            FitStatus::Sparse
        },
    })
}

/// Log-linear fit of the sideband magnitude inside `window`.
pub fn measure_growth_rate(
    trajectory: &Trajectory,
    analytic_rate: f64,
    window: &FitWindow,
) -> Result<GrowthFit> {
    if trajectory.samples.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let species = [
        fit_species(trajectory, Species::One, window)?,
        fit_species(trajectory, Species::Two, window)?,
    ];
    let mut fit = GrowthFit {
        species,
        analytic_rate,
        relative_error: None,
    };
    if analytic_rate > 0.0 {
        fit.relative_error = Some((fit.rate() - analytic_rate).abs() / analytic_rate);
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferSeries {
    pub t: Vec<f64>,
    /// `f_σ = P_σ / (P₁ + P₂)` with `P_σ = |a₊_σ|² + |a₋_σ|²`.
    pub share: Vec<[f64; 2]>,
    /// Times at which the dominant species changes.
    pub crossings: Vec<f64>,
}

/// Per-species share of the sideband power over time.
pub fn instability_transfer_metric(trajectory: &Trajectory) -> Result<TransferSeries> {
    let mut out = TransferSeries {
        t: Vec::new(),
        share: Vec::new(),
        crossings: Vec::new(),
    };
    let mut dominant: Option<Species> = None;
    for smp in &trajectory.samples {
        let sb = smp.sideband.ok_or_else(|| {
            Error::InvalidParameter("trajectory has no sideband observables".into())
        })?;
        let p = Species::BOTH.map(|s| sb.power(s));
        let total = p[0] + p[1];
        if total <= 0.0 {
            continue;
        }
        let f = [p[0] / total, p[1] / total];
        let now = if f[0] > f[1] {
            Some(Species::One)
        } else if f[1] > f[0] {
            Some(Species::Two)
        } else {
            None
        };
        if let (Some(prev), Some(cur)) = (dominant, now) {
            if prev != cur {
                out.crossings.push(smp.t);
            }
        }
        if now.is_some() {
            dominant = now;
        }
        out.t.push(smp.t);
        out.share.push(f);
    }
    Ok(out)
}

/// `(Σ|ψ|²)² / Σ|ψ|⁴`, between 1 (one site) and `M` (uniform).
pub fn participation_ratio(state: &LatticeState, species: Species) -> Result<f64> {
    let (n, n4) = state
        .species(species)
        .iter()
        .map(|z| z.norm_sqr())
        .fold((0.0, 0.0), |(a, b), d| (a + d, b + d * d));
    if n <= 0.0 {
        return Err(Error::InvalidParameter(
            "participation ratio of an empty species".into(),
        ));
    }
    Ok(n * n / n4)
}

/// Observer tracking `max_j | |ψ_j|² - background |` per species.
#[derive(Debug, Clone)]
pub struct DensityDeviation {
    pub background: f64,
    pub t: Vec<f64>,
    pub deviation: Vec<[f64; 2]>,
}

impl DensityDeviation {
    pub fn new(background: f64) -> Self {
        DensityDeviation {
            background,
            t: Vec::new(),
            deviation: Vec::new(),
        }
    }

    /// Largest deviation of either species at or before `t_max`.
    pub fn max_until(&self, t_max: f64) -> f64 {
        self.t
            .iter()
            .zip(&self.deviation)
            .take_while(|(t, _)| **t <= t_max)
            .map(|(_, d)| d[0].max(d[1]))
            .fold(0.0, f64::max)
    }

    pub fn initial(&self) -> f64 {
        self.deviation.first().map_or(0.0, |d| d[0].max(d[1]))
    }
}

impl Observer for DensityDeviation {
    fn observe(&mut self, state: &LatticeState) {
        let bg = self.background;
        let dev = Species::BOTH.map(|s| {
            state
                .species(s)
                .iter()
                .map(|z| (z.norm_sqr() - bg).abs())
                .fold(0.0, f64::max)
        });
        self.t.push(state.t);
        self.deviation.push(dev);
    }
}

/// A complete simulation job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSetup {
    pub params: ModelParams,
    pub state: ModulatedStateSpec,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub window: FitWindow,
}

impl SimulationSetup {
    /// Fastest linear growth rate of the carrier at the setup's `(k, q)`.
    pub fn analytic_rate(&self) -> Result<f64> {
        let carrier = CarrierSpec::new(
            &self.params,
            self.state.k(),
            self.state.amplitude.abs(),
            self.state.amplitude.abs(),
        )?;
        match bogoliubov::spectrum(&self.params, &carrier, self.state.q()) {
            Ok(s) => Ok(s.growth[0].max(s.growth[1])),
            Err(Error::UnsupportedClosedForm { .. }) => {
                Ok(
                    linearization::bogoliubov_matrix(&self.params, &carrier, self.state.q())?
                        .growth_rate(),
                )
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub setup: SimulationSetup,
    pub trajectory: Trajectory,
    pub fit: GrowthFit,
    pub deviation: DensityDeviation,
}

/// Runs `setup`, fits the growth rate and optionally writes the run directory.
///
/// Aborted runs are returned (not turned into errors) so truncated outputs
/// can still be written; check `trajectory.outcome`.
pub fn run_simulation(setup: &SimulationSetup, out_dir: Option<&Path>) -> Result<SimulationRun> {
    let initial = build_modulated_state(&setup.state)?;
    let probe = SidebandProbe::new(setup.state.l, setup.state.s, setup.state.sites)?;
    let mut deviation = DensityDeviation::new(setup.state.amplitude * setup.state.amplitude);
    let trajectory = integrator::evolve(
        initial,
        &setup.params,
        &setup.integrator,
        Some(&probe),
        &mut [&mut deviation],
    )?;
    let fit = measure_growth_rate(&trajectory, setup.analytic_rate()?, &setup.window)?;
    let run = SimulationRun {
        setup: *setup,
        trajectory,
        fit,
        deviation,
    };
    if let Some(dir) = out_dir {
        write_run_artifacts(&run, dir)?;
    }
    Ok(run)
}

/// Writes `trajectory.jsonl`, `density_s1.csv`, `density_s2.csv` and `growthfit.json`.
pub fn write_run_artifacts(run: &SimulationRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    run.trajectory.export_jsonl(dir.join("trajectory.jsonl"))?;
    run.trajectory
        .export_density_csv(Species::One, dir.join("density_s1.csv"))?;
    run.trajectory
        .export_density_csv(Species::Two, dir.join("density_s2.csv"))?;
    let path = dir.join("growthfit.json");
    let json = serde_json::to_string_pretty(&run.fit)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1a,
    Fig1b,
    Fig2a,
    Fig2b,
    Fig2c,
    Fig3a,
    Fig3b,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig1a,
        Preset::Fig1b,
        Preset::Fig2a,
        Preset::Fig2b,
        Preset::Fig2c,
        Preset::Fig3a,
        Preset::Fig3b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig2c => "fig2c",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
        }
    }

    pub fn params(self) -> ModelParams {
        match self {
            Preset::Fig1a | Preset::Fig2a | Preset::Fig2b | Preset::Fig2c => {
                ModelParams::reference_miscible()
            }
            Preset::Fig1b | Preset::Fig3a | Preset::Fig3b => ModelParams::reference_immiscible(),
        }
    }

    /// `ψ₀² = 1/(2M+1)` with `M = 400`.
    pub fn background_density(self) -> f64 {
        1.0 / (2 * ModulatedStateSpec::DEFAULT_SITES + 1) as f64
    }

    pub fn grid(self) -> Option<GridSpec> {
        matches!(self, Preset::Fig1a | Preset::Fig1b)
            .then(|| GridSpec::lattice(ModulatedStateSpec::DEFAULT_SITES).expect("valid grid"))
    }

    pub fn simulation(self) -> Option<SimulationSetup> {
        let (l, s, t_end) = match self {
            Preset::Fig1a | Preset::Fig1b => return None,
            Preset::Fig2a => (50, 100, 100.0),
            Preset::Fig2b => (150, 100, 100.0),
            Preset::Fig2c => (150, 50, 60.0),
            Preset::Fig3a => (150, 5, 250.0),
            Preset::Fig3b => (150, 10, 130.0),
        };
        Some(SimulationSetup {
            params: self.params(),
            state: ModulatedStateSpec::standard(l, s),
            integrator: IntegratorConfig {
                dt: 1e-3,
                t_end,
                observe_every: 20,
                norm_drift_tol: 1e-6,
                energy_drift_tol: 1e-6,
                density_every: 50,
            },
            window: FitWindow::default(),
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {s:?}")))
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum PresetOutput {
    Grid(StabilityGrid),
    Simulation(Box<SimulationRun>),
}

/// Executes a preset; with `out_dir` the artifacts are written there.
pub fn run_preset(preset: Preset, out_dir: Option<&Path>) -> Result<PresetOutput> {
    if let Some(grid) = preset.grid() {
        let g = stability_map::scan_plane(
            &preset.params(),
            preset.background_density(),
            &grid,
            Solver::ClosedForm,
            None,
        )?;
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            g.export_csv(dir.join("grid.csv"))?;
        }
        return Ok(PresetOutput::Grid(g));
    }
    let setup = preset.simulation().expect("simulation preset");
    Ok(PresetOutput::Simulation(Box::new(run_simulation(
        &setup, out_dir,
    )?)))
}
