//! Closed-form Bogoliubov spectrum of a plane-wave carrier and the
//! modulational-instability classification built on it.
//!
//! For a carrier `ψ_{j,σ} = ψ⁰_σ e^{i(kj - μ_σ t)}` with real `ψ⁰_σ` and equal
//! hopping `K`, a perturbation of wave number `q` oscillates at
//!
//! ```text
//! ω±_{q,σ} = 2K sin k sin q ± √(ε_q (ε_q + Δ_σ)),   ε_q = 4K cos k sin²(q/2)
//! ```
//!
//! and grows exponentially whenever the radicand is negative.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Species};

/// Plane-wave carrier with wave number `k` and real amplitudes `ψ⁰_σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CarrierSpec {
    k: f64,
    psi0: [f64; 2],
    mu: [f64; 2],
}

impl CarrierSpec {
    pub fn new(params: &ModelParams, k: f64, psi0_1: f64, psi0_2: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "carrier wave number must be finite, got {k}"
            )));
        }
        for a in [psi0_1, psi0_2] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "carrier amplitudes must be real and nonnegative, got {a}"
                )));
            }
        }
        let psi0 = [psi0_1, psi0_2];
        let mu = Species::BOTH.map(|s| mu_raw(params, k, psi0, s));
        Ok(CarrierSpec { k, psi0, mu })
    }

    /// Both species at density `psi0_sq`.
    pub fn equal_amplitude(params: &ModelParams, k: f64, psi0_sq: f64) -> Result<Self> {
        if !(psi0_sq.is_finite() && psi0_sq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "background density must be nonnegative, got {psi0_sq}"
            )));
        }
        let a = psi0_sq.sqrt();
        Self::new(params, k, a, a)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn psi0(&self, s: Species) -> f64 {
        self.psi0[s.index()]
    }

    pub fn mu(&self, s: Species) -> f64 {
        self.mu[s.index()]
    }
}

fn mu_raw(params: &ModelParams, k: f64, psi0: [f64; 2], s: Species) -> f64 {
    let o = s.other();
    -2.0 * params.hopping(s) * k.cos()
        + params.intra(s) * psi0[s.index()].powi(2)
        + params.inter() * psi0[o.index()].powi(2)
}

/// `μ_σ = -2K_σ cos k + Λ_σσ (ψ⁰_σ)² + Λ_σσ' (ψ⁰_σ')²`
pub fn chemical_potential(params: &ModelParams, carrier: &CarrierSpec, species: Species) -> f64 {
    mu_raw(params, carrier.k, carrier.psi0, species)
}

/// Lattice kinetic factor `ε_q = 4K cos k sin²(q/2)`.
pub fn epsilon_q(hopping: f64, k: f64, q: f64) -> f64 {
    let s = (0.5 * q).sin();
    4.0 * hopping * k.cos() * s * s
}

/// Both eigenvalues of the symmetric matrix `[[a, c], [c, b]]` times two,
/// `a + b ∓ √((a-b)² + 4c²)`, with `det = ab - c²` supplied separately so the
/// smaller root does not lose digits to cancellation.
fn split_pair(a: f64, b: f64, c: f64, det: f64) -> [f64; 2] {
    let sum = a + b;
    let root = ((a - b).powi(2) + 4.0 * c * c).sqrt();
    if sum >= 0.0 {
        let hi = sum + root;
        let lo = if hi > 0.0 { 4.0 * det / hi } else { 0.0 };
        [lo.min(hi), hi]
    } else {
        let lo = sum - root;
        let hi = 4.0 * det / lo;
        [lo, hi.max(lo)]
    }
}

/// Effective interaction `Δ_σ`; species one takes the lower root so `Δ₁ ≤ Δ₂`.
pub fn delta_sigma(params: &ModelParams, psi0_1: f64, psi0_2: f64, species: Species) -> f64 {
    deltas(params, psi0_1, psi0_2)[species.index()]
}

pub(crate) fn deltas(params: &ModelParams, psi0_1: f64, psi0_2: f64) -> [f64; 2] {
    let (l1, l2, l12) = (
        params.intra(Species::One),
        params.intra(Species::Two),
        params.inter(),
    );
    let (n1, n2) = (psi0_1 * psi0_1, psi0_2 * psi0_2);
    let det = n1 * n2 * (l1 * l2 - l12 * l12);
    split_pair(l1 * n1, l2 * n2, l12 * psi0_1 * psi0_2, det)
}

/// `Ω_σ = Λ₁ + Λ₂ ∓ √((Λ₁-Λ₂)² + 4Λ₁₂²)`, so that `Δ_σ = Ω_σ ψ₀²` for equal amplitudes.
pub fn omega_uniform(params: &ModelParams, species: Species) -> f64 {
    let (l1, l2, l12) = (
        params.intra(Species::One),
        params.intra(Species::Two),
        params.inter(),
    );
    split_pair(l1, l2, l12, l1 * l2 - l12 * l12)[species.index()]
}

/// The two frequencies of one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPair {
    pub plus: Complex64,
    pub minus: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub q: f64,
    pub epsilon_q: f64,
    pub delta: [f64; 2],
    /// Indexed by species.
    pub omega: [BranchPair; 2],
    pub growth: [f64; 2],
}

impl SpectrumResult {
    pub fn delta(&self, s: Species) -> f64 {
        self.delta[s.index()]
    }

    pub fn omega(&self, s: Species) -> BranchPair {
        self.omega[s.index()]
    }

    pub fn growth(&self, s: Species) -> f64 {
        self.growth[s.index()]
    }

    /// All four frequencies, species one first.
    pub fn frequencies(&self) -> [Complex64; 4] {
        [
            self.omega[0].plus,
            self.omega[0].minus,
            self.omega[1].plus,
            self.omega[1].minus,
        ]
    }

    pub fn class(&self) -> StabilityClass {
        StabilityClass::from_growth(self.growth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StabilityClass {
    Stable,
    PartiallyUnstable(Species),
    FullyUnstable,
}

impl StabilityClass {
    pub fn from_growth(growth: [f64; 2]) -> Self {
        match (growth[0] > 0.0, growth[1] > 0.0) {
            (false, false) => StabilityClass::Stable,
            (true, false) => StabilityClass::PartiallyUnstable(Species::One),
            (false, true) => StabilityClass::PartiallyUnstable(Species::Two),
            (true, true) => StabilityClass::FullyUnstable,
        }
    }

    /// Label used in grid exports.
    pub fn label(&self) -> &'static str {
        match self {
            StabilityClass::Stable => "STABLE",
            StabilityClass::PartiallyUnstable(Species::One) => "UNSTABLE_1",
            StabilityClass::PartiallyUnstable(Species::Two) => "UNSTABLE_2",
            StabilityClass::FullyUnstable => "UNSTABLE_BOTH",
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityClass::Stable)
    }
}

fn branches(doppler: f64, kinetic: f64, delta: [f64; 2]) -> ([BranchPair; 2], [f64; 2]) {
    let mut omega = [BranchPair {
        plus: Complex64::new(0.0, 0.0),
        minus: Complex64::new(0.0, 0.0),
    }; 2];
    let mut growth = [0.0; 2];
    for i in 0..2 {
        let radicand = kinetic * (kinetic + delta[i]);
        let (plus, minus) = if radicand >= 0.0 {
            let r = radicand.sqrt();
            (
                Complex64::new(doppler + r, 0.0),
                Complex64::new(doppler - r, 0.0),
            )
        } else {
            let g = (-radicand).sqrt();
            growth[i] = g;
            (Complex64::new(doppler, g), Complex64::new(doppler, -g))
        };
        omega[i] = BranchPair { plus, minus };
    }
    (omega, growth)
}

fn require_equal_hopping(params: &ModelParams) -> Result<f64> {
    params.equal_hopping().ok_or(Error::UnsupportedClosedForm {
        k1: params.hopping(Species::One),
        k2: params.hopping(Species::Two),
    })
}

/// Closed-form excitation spectrum at perturbation wave number `q`.
///
/// Only valid for `K₁ == K₂`; other hoppings need [`crate::linearization::bogoliubov_matrix`].
pub fn spectrum(params: &ModelParams, carrier: &CarrierSpec, q: f64) -> Result<SpectrumResult> {
    let kk = require_equal_hopping(params)?;
    let eps = epsilon_q(kk, carrier.k, q);
    let doppler = 2.0 * kk * carrier.k.sin() * q.sin();
    let delta = deltas(params, carrier.psi0[0], carrier.psi0[1]);
    let (omega, growth) = branches(doppler, eps, delta);
    Ok(SpectrumResult {
        q,
        epsilon_q: eps,
        delta,
        omega,
        growth,
    })
}

/// Small-`k`, small-`q` form `ω = 2Kqk ± √(Kq²(Kq² + Δ_σ))`.
///
/// The `epsilon_q` field holds the continuum kinetic term `Kq²`.
pub fn spectrum_long_wavelength(
    params: &ModelParams,
    carrier: &CarrierSpec,
    q: f64,
) -> Result<SpectrumResult> {
    let kk = require_equal_hopping(params)?;
    let kinetic = kk * q * q;
    let doppler = 2.0 * kk * q * carrier.k;
    let delta = deltas(params, carrier.psi0[0], carrier.psi0[1]);
    let (omega, growth) = branches(doppler, kinetic, delta);
    Ok(SpectrumResult {
        q,
        epsilon_q: kinetic,
        delta,
        omega,
        growth,
    })
}

pub fn classify(params: &ModelParams, carrier: &CarrierSpec, q: f64) -> Result<StabilityClass> {
    Ok(spectrum(params, carrier, q)?.class())
}

/// Background density above which the mixture is unstable for every `q`:
/// `4K/Ω₁` when miscible, `4K/|Ω₁|` when phase separating, `+∞` when `Ω₁ = 0`.
pub fn critical_amplitude(params: &ModelParams) -> Result<f64> {
    let kk = require_equal_hopping(params)?;
    let omega1 = omega_uniform(params, Species::One);
    if omega1 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(if params.is_miscible() {
        4.0 * kk / omega1
    } else {
        4.0 * kk / omega1.abs()
    })
}
