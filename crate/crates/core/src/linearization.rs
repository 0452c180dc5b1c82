//! Numerical linearization of the lattice equations around a plane-wave carrier.
//!
//! Writing the fluctuation as `u_σ e^{i(qj-ωt)} + v*_σ e^{-i(qj-ωt)}` gives a
//! real 4×4 eigenproblem in `(u₁, v₁, u₂, v₂)`. Its eigenvalues are the
//! excitation frequencies for arbitrary `K₁, K₂`, and for equal hopping they
//! must reproduce the closed form in [`crate::bogoliubov`].

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::bogoliubov::CarrierSpec;
use crate::error::{Error, Result};
use crate::model::{ModelParams, Species};

const SCHUR_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Serialize)]
pub struct LinearizationSpectrum {
    /// Row-major, ordering `(u₁, v₁, u₂, v₂)`.
    pub matrix: [[f64; 4]; 4],
    pub eigenvalues: [Complex64; 4],
    /// `min ‖(M - ω)v‖/‖v‖` for each eigenvalue.
    pub residuals: [f64; 4],
    #[serde(skip)]
    eigenvectors: [Vector4<Complex64>; 4],
}

impl LinearizationSpectrum {
    /// Largest `|Im ω|`.
    pub fn growth_rate(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|w| w.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn matrix_norm(&self) -> f64 {
        self.matrix
            .iter()
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn eigenvector(&self, i: usize) -> &Vector4<Complex64> {
        &self.eigenvectors[i]
    }

    /// Per-branch growth rates in the `Δ₁ ≤ Δ₂` labelling.
    ///
    /// Each eigenvector's density part `(u₁+v₁, u₂+v₂)` is projected on the
    /// upper eigenvector of the interaction matrix `[[Λ₁ψ₁², Λ₁₂ψ₁ψ₂], [Λ₁₂ψ₁ψ₂, Λ₂ψ₂²]]`;
    /// the two eigenvalues with the largest overlap form branch two. Imaginary
    /// parts below `tol · max(1, ‖M‖∞)` count as zero.
    pub fn branch_growth(&self, params: &ModelParams, carrier: &CarrierSpec, tol: f64) -> [f64; 2] {
        let b1 = params.intra(Species::One) * carrier.psi0(Species::One).powi(2);
        let b2 = params.intra(Species::Two) * carrier.psi0(Species::Two).powi(2);
        let c = params.inter() * carrier.psi0(Species::One) * carrier.psi0(Species::Two);
        let theta = 0.5 * (2.0 * c).atan2(b1 - b2);
        let (g1, g2) = (theta.cos(), theta.sin());

        let mut overlap: Vec<(f64, usize)> = (0..4)
            .map(|i| {
                let v = &self.eigenvectors[i];
                let s1 = v[0] + v[1];
                let s2 = v[2] + v[3];
                let total = s1.norm_sqr() + s2.norm_sqr();
                let o = if total > 1e-24 {
                    (s1 * g1 + s2 * g2).norm_sqr() / total
                } else {
                    0.5
                };
                (o, i)
            })
            .collect();
        overlap.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let cutoff = tol * self.matrix_norm().max(1.0);
        let growth_of = |idx: &[(f64, usize)]| {
            idx.iter()
                .map(|&(_, i)| self.eigenvalues[i].im.abs())
                .filter(|g| *g > cutoff)
                .fold(0.0, f64::max)
        };
        [growth_of(&overlap[..2]), growth_of(&overlap[2..])]
    }
}

/// Builds the linearization matrix around `carrier` at wave number `q`.
pub fn linearization_matrix(params: &ModelParams, carrier: &CarrierSpec, q: f64) -> Matrix4<f64> {
    let k = carrier.k();
    let a = |s: Species, sign: f64| {
        let kk = params.hopping(s);
        let half = (0.5 * q).sin();
        sign * 2.0 * kk * k.sin() * q.sin()
            + 4.0 * kk * k.cos() * half * half
            + params.intra(s) * carrier.psi0(s).powi(2)
    };
    let b1 = params.intra(Species::One) * carrier.psi0(Species::One).powi(2);
    let b2 = params.intra(Species::Two) * carrier.psi0(Species::Two).powi(2);
    let c = params.inter() * carrier.psi0(Species::One) * carrier.psi0(Species::Two);
    let (a1p, a1m) = (a(Species::One, 1.0), a(Species::One, -1.0));
    let (a2p, a2m) = (a(Species::Two, 1.0), a(Species::Two, -1.0));
    #[rustfmt::skip]
    let m = Matrix4::new(
        a1p,  b1,   c,    c,
        -b1,  -a1m, -c,   -c,
        c,    c,    a2p,  b2,
        -c,   -c,   -b2,  -a2m,
    );
    m
}

/// Eigen-decomposes the linearization matrix.
pub fn bogoliubov_matrix(
    params: &ModelParams,
    carrier: &CarrierSpec,
    q: f64,
) -> Result<LinearizationSpectrum> {
    let m = linearization_matrix(params, carrier, q);
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::EigenNoConvergence)?;
    let (_, t) = schur.unpack();
    let eigenvalues = quasi_triangular_eigenvalues(&t);
    if eigenvalues
        .iter()
        .any(|w| !(w.re.is_finite() && w.im.is_finite()))
    {
        return Err(Error::EigenNoConvergence);
    }

    let mc: Matrix4<Complex64> = m.map(|x| Complex64::new(x, 0.0));
    let mut residuals = [0.0; 4];
    let mut eigenvectors = [Vector4::zeros(); 4];
    for (i, w) in eigenvalues.iter().enumerate() {
        let (v, r) = inverse_iteration(&mc, *w)?;
        eigenvectors[i] = v;
        residuals[i] = r;
    }

    Ok(LinearizationSpectrum {
        matrix: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
        eigenvalues,
        residuals,
        eigenvectors,
    })
}

/// Eigenvalues of a real quasi-upper-triangular matrix, reading its 1×1 and 2×2 diagonal blocks.
fn quasi_triangular_eigenvalues(t: &Matrix4<f64>) -> [Complex64; 4] {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    let mut i = 0;
    while i < 4 {
        if i + 1 < 4 && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mean = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            let root = Complex64::new(disc, 0.0).sqrt();
            out[i] = mean + root;
            out[i + 1] = mean - root;
            i += 2;
        } else {
            out[i] = Complex64::new(t[(i, i)], 0.0);
            i += 1;
        }
    }
    out
}

/// Unit eigenvector estimate for `w` by shifted inverse iteration, with its residual.
fn inverse_iteration(m: &Matrix4<Complex64>, w: Complex64) -> Result<(Vector4<Complex64>, f64)> {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut start = Vector4::new(1.0, 0.7, -0.4, 0.3).map(|x| Complex64::new(x, 0.1 * x));
    start /= Complex64::new(start.norm(), 0.0);
    let mut best = (start, f64::INFINITY);
    for rel_shift in INVERSE_SHIFTS {
        let shift = w + Complex64::new(rel_shift * scale, 0.0);
        let lu = (m - Matrix4::from_diagonal_element(shift)).lu();
        let mut v = start;
        for _ in 0..INVERSE_ITERATIONS {
            let Some(x) = lu.solve(&v) else { break };
            let n = x.norm();
            if !n.is_finite() || n == 0.0 {
                break;
            }
            v = x / Complex64::new(n, 0.0);
            let r = (m * v - v * w).norm();
            if r < best.1 {
                best = (v, r);
            }
        }
        if best.1 <= INVERSE_ACCEPT * scale {
            break;
        }
    }
    if best.1.is_finite() {
        Ok(best)
    } else {
        Err(Error::EigenNoConvergence)
    }
}

const INVERSE_SHIFTS: [f64; 3] = [1e-13, 1e-10, 1e-7];
const INVERSE_ITERATIONS: usize = 4;
const INVERSE_ACCEPT: f64 = 1e-12;

/// Smallest worst-case distance between two sets of four values over all
/// pairings, relative to `max(|b_i|)`.
pub fn matched_relative_error(a: &[Complex64; 4], b: &[Complex64; 4]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut best = f64::INFINITY;
    for perm in PERMUTATIONS_4 {
        let worst = (0..4)
            .map(|i| (a[perm[i]] - b[i]).norm())
            .fold(0.0, f64::max);
        best = best.min(worst);
    }
    if scale > 0.0 {
        best / scale
    } else {
        best
    }
}

const PERMUTATIONS_4: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];
