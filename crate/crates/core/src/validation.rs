//! Self-checks comparing independent computations of the same quantity.
//!
//! Four suites: closed form against the numerical linearization on random
//! parameters, the long-wavelength reduction, the integrator's convergence
//! order on an exact plane wave, and conservation on a modulated run.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bogoliubov::{self, CarrierSpec};
use crate::error::Result;
use crate::experiments::{self, Preset};
use crate::integrator::{self, IntegratorConfig};
use crate::linearization;
use crate::model::{LatticeConfig, LatticeState, ModelParams, Species};

/// Closed-form frequencies `[ω₁₊, ω₁₋, ω₂₊, ω₂₋]` at `q`.
pub type ClosedForm = fn(&ModelParams, &CarrierSpec, f64) -> Result<[Complex64; 4]>;

/// The library's closed form.
pub fn closed_form_frequencies(
    params: &ModelParams,
    carrier: &CarrierSpec,
    q: f64,
) -> Result<[Complex64; 4]> {
    Ok(bogoliubov::spectrum(params, carrier, q)?.frequencies())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationConfig {
    pub samples: usize,
    pub seed: u64,
    pub oracle_rtol: f64,
    pub long_wavelength_rtol: f64,
    pub order_target: f64,
    pub order_tol: f64,
    pub drift_tol: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            samples: 1000,
            seed: 0,
            oracle_rtol: 1e-9,
            long_wavelength_rtol: 1e-4,
            order_target: 4.0,
            order_tol: 0.2,
            drift_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: bool,
    /// Worst value of the suite's metric.
    pub measured: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// One random draw for the oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSample {
    pub hopping: f64,
    pub lambda11: f64,
    pub lambda22: f64,
    pub lambda12: f64,
    pub psi0_sq: [f64; 2],
    pub k: f64,
    pub q: f64,
}

/// `K ∈ (0, 2]`, `Λ ∈ [0, 200]`, `ψ₀² ∈ (0, 0.01]`, `k, q ∈ [0, 2π)`.
pub fn oracle_samples(count: usize, seed: u64) -> Vec<OracleSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| OracleSample {
            hopping: 2.0 * (1.0 - rng.random::<f64>()),
            lambda11: 200.0 * rng.random::<f64>(),
            lambda22: 200.0 * rng.random::<f64>(),
            lambda12: 200.0 * rng.random::<f64>(),
            psi0_sq: [
                0.01 * (1.0 - rng.random::<f64>()),
                0.01 * (1.0 - rng.random::<f64>()),
            ],
            k: 2.0 * PI * rng.random::<f64>(),
            q: 2.0 * PI * rng.random::<f64>(),
        })
        .collect()
}

/// Matched relative error between the matrix eigenvalues and `closed_form`.
pub fn oracle_error(sample: &OracleSample, closed_form: ClosedForm) -> Result<f64> {
    let p = ModelParams::with_equal_hopping(
        sample.hopping,
        sample.lambda11,
        sample.lambda22,
        sample.lambda12,
    )?;
    let c = CarrierSpec::new(
        &p,
        sample.k,
        sample.psi0_sq[0].sqrt(),
        sample.psi0_sq[1].sqrt(),
    )?;
    let lin = linearization::bogoliubov_matrix(&p, &c, sample.q)?;
    let closed = closed_form(&p, &c, sample.q)?;
    Ok(linearization::matched_relative_error(
        &lin.eigenvalues,
        &closed,
    ))
}

pub fn oracle_suite(config: &ValidationConfig, closed_form: ClosedForm) -> SuiteReport {
    let samples = oracle_samples(config.samples, config.seed);
    let errors: Vec<Result<f64>> = samples
        .par_iter()
        .map(|s| oracle_error(s, closed_form))
        .collect();
    let mut worst = (0.0_f64, None);
    let mut failures = 0;
    for (i, e) in errors.iter().enumerate() {
        match e {
            Ok(e) if e.is_finite() => {
                if *e > worst.0 {
                    worst = (*e, Some(i));
                }
            }
            _ => failures += 1,
        }
    }
    let detail = match worst.1 {
        Some(i) => format!(
            "worst sample #{i}: {:?}; {failures} evaluation failures",
            samples[i]
        ),
        None => format!("{failures} evaluation failures"),
    };
    SuiteReport {
        suite: "oracle",
        passed: failures == 0 && worst.0 <= config.oracle_rtol,
        measured: worst.0,
        tolerance: config.oracle_rtol,
        cases: samples.len(),
        detail,
    }
}

/// Relative disagreement of the full and long-wavelength spectra at `k = q = 10⁻³`.
pub fn long_wavelength_error(params: &ModelParams) -> Result<f64> {
    let psi0_sq = Preset::Fig1a.background_density();
    let c = CarrierSpec::equal_amplitude(params, 1e-3, psi0_sq)?;
    let full = bogoliubov::spectrum(params, &c, 1e-3)?;
    let reduced = bogoliubov::spectrum_long_wavelength(params, &c, 1e-3)?;
    Ok(linearization::matched_relative_error(
        &reduced.frequencies(),
        &full.frequencies(),
    ))
}

pub fn long_wavelength_suite(config: &ValidationConfig) -> SuiteReport {
    let sets = [
        ModelParams::reference_miscible(),
        ModelParams::reference_immiscible(),
    ];
    let errors: Vec<Result<f64>> = sets.iter().map(long_wavelength_error).collect();
    let ok = errors.iter().all(|e| e.is_ok());
    let worst = errors
        .iter()
        .filter_map(|e| e.as_ref().ok())
        .copied()
        .fold(0.0, f64::max);
    SuiteReport {
        suite: "long_wavelength",
        passed: ok && worst <= config.long_wavelength_rtol,
        measured: worst,
        tolerance: config.long_wavelength_rtol,
        cases: sets.len(),
        detail: format!("miscible and immiscible sets: {errors:?}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub dt: Vec<f64>,
    /// Max-norm error against the exact solution, relative to the amplitude.
    pub error: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln dt`.
    pub order: f64,
}

/// Integrates the plane wave `ψ_σ = A e^{i(kj - μt)}` to `t_end` at each step size.
pub fn convergence_study(dts: &[f64], t_end: f64) -> Result<ConvergenceStudy> {
    let params = ModelParams::reference_miscible();
    let sites = 8;
    let k = 2.0 * PI / sites as f64;
    let amp = 0.4;
    let carrier = CarrierSpec::new(&params, k, amp, amp)?;
    let initial = LatticeState::from_fn(LatticeConfig::new(sites)?, |_, j| {
        Complex64::from_polar(amp, k * j as f64)
    });

    let mut error = Vec::with_capacity(dts.len());
    for &dt in dts {
        let steps = (t_end / dt).round() as usize;
        let mut state = initial.clone();
        for _ in 0..steps {
            state = integrator::step_rk4(&state, &params, dt)?;
        }
        let t = steps as f64 * dt;
        let mut worst = 0.0_f64;
        for s in Species::BOTH {
            let mu = carrier.mu(s);
            for (j, z) in state.species(s).iter().enumerate() {
                let exact = Complex64::from_polar(amp, k * j as f64 - mu * t);
                worst = worst.max((z - exact).norm() / amp);
            }
        }
        error.push(worst);
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = error.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    Ok(ConvergenceStudy {
        dt: dts.to_vec(),
        error,
        order: sxy / sxx,
    })
}

/// Step sizes of the order check.
pub const ORDER_STEPS: [f64; 3] = [2e-3, 1e-3, 5e-4];

pub fn convergence_suite(config: &ValidationConfig) -> SuiteReport {
    match convergence_study(&ORDER_STEPS, 1.0) {
        Ok(study) => SuiteReport {
            suite: "convergence_order",
            passed: (study.order - config.order_target).abs() <= config.order_tol,
            measured: study.order,
            tolerance: config.order_tol,
            cases: study.dt.len(),
            detail: format!("dt {:?} -> error {:?}", study.dt, study.error),
        },
        Err(e) => SuiteReport {
            suite: "convergence_order",
            passed: false,
            measured: f64::NAN,
            tolerance: config.order_tol,
            cases: 0,
            detail: e.to_string(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationCheck {
    /// Largest relative drift over both norms and the Hamiltonian.
    pub drift: f64,
    pub completed: bool,
    /// Whether the coarse-step run was stopped by the guard.
    pub guard_aborted: bool,
    pub guard_outcome: integrator::Outcome,
}

/// Drift of the fig2c modulated state up to `t_end` at `dt = 10⁻³`, and the
/// same state at `dt = 0.5`, which the guard has to stop.
pub fn conservation_check(t_end: f64) -> Result<ConservationCheck> {
    let setup = Preset::Fig2c.simulation().expect("simulation preset");
    let initial = experiments::build_modulated_state(&setup.state)?;
    let config = IntegratorConfig {
        t_end,
        density_every: 0,
        ..setup.integrator
    };
    let traj = integrator::evolve(initial.clone(), &setup.params, &config, None, &mut [])?;
    let report = integrator::drift_report(&traj)?;
    let coarse = IntegratorConfig {
        dt: 0.5,
        t_end: 50.0,
        observe_every: 1,
        ..config
    };
    let guard = integrator::evolve(initial, &setup.params, &coarse, None, &mut [])?;
    Ok(ConservationCheck {
        drift: report.norm[0].max(report.norm[1]).max(report.energy),
        completed: traj.is_completed(),
        guard_aborted: !guard.is_completed(),
        guard_outcome: guard.outcome,
    })
}

pub fn conservation_suite(config: &ValidationConfig) -> SuiteReport {
    match conservation_check(20.0) {
        Ok(c) => SuiteReport {
            suite: "conservation",
            passed: c.completed && c.guard_aborted && c.drift <= config.drift_tol,
            measured: c.drift,
            tolerance: config.drift_tol,
            cases: 2,
            detail: format!(
                "completed={}, coarse-step outcome {:?}",
                c.completed, c.guard_outcome
            ),
        },
        Err(e) => SuiteReport {
            suite: "conservation",
            passed: false,
            measured: f64::NAN,
            tolerance: config.drift_tol,
            cases: 0,
            detail: e.to_string(),
        },
    }
}

/// Runs all suites with the library closed form.
pub fn validate(config: &ValidationConfig) -> ValidationReport {
    validate_with(config, closed_form_frequencies)
}

/// Runs all suites, checking `closed_form` in the oracle suite.
pub fn validate_with(config: &ValidationConfig, closed_form: ClosedForm) -> ValidationReport {
    let suites = vec![
        oracle_suite(config, closed_form),
        long_wavelength_suite(config),
        convergence_suite(config),
        conservation_suite(config),
    ];
    ValidationReport {
        seed: config.seed,
        samples: config.samples,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}
