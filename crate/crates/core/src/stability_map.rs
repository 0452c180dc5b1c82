//! Stability scans over the `(q, k)` plane at equal background densities.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::bogoliubov::{self, CarrierSpec, StabilityClass};
use crate::error::{Error, Result};
use crate::linearization;
use crate::model::{ModelParams, Species};

/// Header of the exported grid.
pub const CSV_HEADER: &str = "k,q,eps_q,delta1,delta2,growth1,growth2,class";

/// Imaginary parts below this fraction of the matrix norm are treated as zero on the matrix path.
pub const MATRIX_GROWTH_TOL: f64 = 1e-10;

/// Sample points along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub steps: usize,
    pub start: f64,
    pub end: f64,
    /// Whether `end` itself is sampled; `[start, end)` otherwise.
    pub inclusive: bool,
}

impl Axis {
    /// `[0, 2π)` in `steps` equal increments.
    pub fn full_circle(steps: usize) -> Self {
        Axis {
            steps,
            start: 0.0,
            end: 2.0 * PI,
            inclusive: false,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        let n = if self.inclusive {
            self.steps - 1
        } else {
            self.steps
        };
        self.start + (self.end - self.start) * i as f64 / n as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|i| self.value(i))
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidParameter(format!(
                "{name} needs at least 2 steps"
            )));
        }
        if !(self.start.is_finite() && self.end.is_finite() && self.end > self.start) {
            return Err(Error::InvalidParameter(format!(
                "{name} range [{}, {}] is empty",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub k: Axis,
    pub q: Axis,
}

impl GridSpec {
    pub fn new(k: Axis, q: Axis) -> Result<Self> {
        k.validate("k axis")?;
        q.validate("q axis")?;
        Ok(GridSpec { k, q })
    }

    /// `k_steps × q_steps` over `[0, 2π)²`.
    pub fn full(k_steps: usize, q_steps: usize) -> Result<Self> {
        Self::new(Axis::full_circle(k_steps), Axis::full_circle(q_steps))
    }

    /// The lattice-admissible wave numbers `2πl/M` on both axes.
    pub fn lattice(sites: usize) -> Result<Self> {
        Self::full(sites, sites)
    }

    pub fn cell_count(&self) -> usize {
        self.k.steps * self.q.steps
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::lattice(400).expect("valid default grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Solver {
    #[default]
    ClosedForm,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CellClass {
    Class(StabilityClass),
    Failed,
}

impl CellClass {
    pub fn label(&self) -> &'static str {
        match self {
            CellClass::Class(c) => c.label(),
            CellClass::Failed => "FAILED",
        }
    }

    pub fn is_unstable(&self) -> bool {
        matches!(self, CellClass::Class(c) if !c.is_stable())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub k: f64,
    pub q: f64,
    pub eps_q: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub growth1: f64,
    pub growth2: f64,
    pub class: CellClass,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityGrid {
    pub spec: GridSpec,
    pub psi0_sq: f64,
    /// Row-major: `k` outer, `q` inner.
    pub cells: Vec<GridCell>,
}

impl StabilityGrid {
    pub fn cell(&self, k_index: usize, q_index: usize) -> &GridCell {
        &self.cells[k_index * self.spec.q.steps + q_index]
    }

    /// All cells sharing the `k_index`-th carrier wave number.
    pub fn column(&self, k_index: usize) -> &[GridCell] {
        let n = self.spec.q.steps;
        &self.cells[k_index * n..(k_index + 1) * n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[GridCell]> {
        self.cells.chunks(self.spec.q.steps)
    }

    /// Number of cells per class label, in label order.
    pub fn class_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        for c in &self.cells {
            *counts.entry(c.class.label()).or_insert(0) += 1;
        }
        counts
    }

    pub fn failed_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.class == CellClass::Failed)
            .count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                sig9(c.k),
                sig9(c.q),
                sig9(c.eps_q),
                sig9(c.delta1),
                sig9(c.delta2),
                sig9(c.growth1),
                sig9(c.growth2),
                c.class.label()
            )?;
        }
        Ok(())
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Nine significant digits in scientific notation.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000e0"
        return "0.00000000e0".to_owned();
    }
    format!("{x:.8e}")
}

fn evaluate_cell(params: &ModelParams, psi0_sq: f64, k: f64, q: f64, solver: Solver) -> GridCell {
    let failed = GridCell {
        k,
        q,
        eps_q: f64::NAN,
        delta1: f64::NAN,
        delta2: f64::NAN,
        growth1: f64::NAN,
        growth2: f64::NAN,
        class: CellClass::Failed,
    };
    let Ok(carrier) = CarrierSpec::equal_amplitude(params, k, psi0_sq) else {
        return failed;
    };
    match solver {
        Solver::ClosedForm => match bogoliubov::spectrum(params, &carrier, q) {
            Ok(s) => GridCell {
                k,
                q,
                eps_q: s.epsilon_q,
                delta1: s.delta[0],
                delta2: s.delta[1],
                growth1: s.growth[0],
                growth2: s.growth[1],
                class: CellClass::Class(s.class()),
            },
            Err(_) => failed,
        },
        Solver::Matrix => match linearization::bogoliubov_matrix(params, &carrier, q) {
            Ok(lin) => {
                let growth = lin.branch_growth(params, &carrier, MATRIX_GROWTH_TOL);
                let a = psi0_sq.sqrt();
                // species-one hopping for the reported kinetic factor
                GridCell {
                    k,
                    q,
                    eps_q: bogoliubov::epsilon_q(params.hopping(Species::One), k, q),
                    delta1: bogoliubov::delta_sigma(params, a, a, Species::One),
                    delta2: bogoliubov::delta_sigma(params, a, a, Species::Two),
                    growth1: growth[0],
                    growth2: growth[1],
                    class: CellClass::Class(StabilityClass::from_growth(growth)),
                }
            }
            Err(_) => failed,
        },
    }
}

/// Classifies every cell of `grid` with both species at density `psi0_sq`.
///
/// `workers` caps the thread count (`None` uses the global pool). Output
/// order is always row-major regardless of scheduling.
pub fn scan_plane(
    params: &ModelParams,
    psi0_sq: f64,
    grid: &GridSpec,
    solver: Solver,
    workers: Option<usize>,
) -> Result<StabilityGrid> {
    if !(psi0_sq.is_finite() && psi0_sq > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "background density must be positive, got {psi0_sq}"
        )));
    }
    grid.k.validate("k axis")?;
    grid.q.validate("q axis")?;

    let run = || -> Vec<GridCell> {
        (0..grid.k.steps)
            .into_par_iter()
            .flat_map_iter(|ki| {
                let k = grid.k.value(ki);
                (0..grid.q.steps)
                    .map(move |qi| evaluate_cell(params, psi0_sq, k, grid.q.value(qi), solver))
            })
            .collect()
    };
    let cells = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(StabilityGrid {
        spec: *grid,
        psi0_sq,
        cells,
    })
}

/// Minimal equal-amplitude density `ψ₀²` at which each branch turns unstable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetThreshold {
    /// Onset of the first branch to go unstable.
    pub onset: f64,
    /// Per branch; `+∞` where that branch never destabilises.
    pub per_species: [f64; 2],
}

impl OnsetThreshold {
    pub fn first_unstable(&self) -> Option<Species> {
        if self.onset.is_infinite() {
            return None;
        }
        Species::BOTH
            .into_iter()
            .find(|s| self.per_species[s.index()] == self.onset)
    }
}

/// Instability onset at `(k, q)` for equal amplitudes.
///
/// With `ε_q > 0` a branch needs `Ω_σ < 0` and `ψ₀² > ε_q/|Ω_σ|`; with
/// `ε_q < 0` it needs `Ω_σ > 0` and `ψ₀² > -ε_q/Ω_σ`.
pub fn threshold_curve(params: &ModelParams, k: f64, q: f64) -> Result<OnsetThreshold> {
    let kk = params.equal_hopping().ok_or(Error::UnsupportedClosedForm {
        k1: params.hopping(Species::One),
        k2: params.hopping(Species::Two),
    })?;
    let eps = bogoliubov::epsilon_q(kk, k, q);
    let per_species = Species::BOTH.map(|s| {
        let omega = bogoliubov::omega_uniform(params, s);
        if eps > 0.0 && omega < 0.0 {
            eps / -omega
        } else if eps < 0.0 && omega > 0.0 {
            -eps / omega
        } else {
            f64::INFINITY
        }
    });
    Ok(OnsetThreshold {
        onset: per_species[0].min(per_species[1]),
        per_species,
    })
}
