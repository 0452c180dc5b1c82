mod args;
mod run;

use std::fs;
use std::process::ExitCode;

use clap::Parser;
use dnls_mi::bogoliubov::{self, CarrierSpec};
use dnls_mi::experiments::Preset;
use dnls_mi::linearization;
use dnls_mi::model::ModelParams;
use dnls_mi::stability_map::{self, GridSpec, Solver, MATRIX_GROWTH_TOL};
use dnls_mi::validation::{self, ValidationConfig};
use serde_json::json;

use args::{Cli, Command, ParamArgs, PhaseDiagramArgs, SolverArg, SpectrumArgs, ValidateArgs};

/// Reasons for a nonzero exit.
#[derive(Debug)]
pub enum Failure {
    /// Computation or validation failure, exit 1.
    Failed(String),
    /// Aborted time integration, exit 3.
    Aborted(String),
}

impl From<dnls_mi::Error> for Failure {
    fn from(e: dnls_mi::Error) -> Self {
        match e {
            dnls_mi::Error::Diverged { .. } | dnls_mi::Error::DriftExceeded { .. } => {
                Failure::Aborted(e.to_string())
            }
            other => Failure::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Failed(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

/// `base` with any parameters given on the command line replaced.
pub fn resolve_params(flags: &ParamArgs, base: ModelParams) -> Result<ModelParams, Failure> {
    let k1 = flags
        .hopping
        .unwrap_or(base.hopping(dnls_mi::model::Species::One));
    let k2 = match (flags.hopping2, flags.hopping) {
        (Some(k2), _) => k2,
        (None, Some(k)) => k,
        (None, None) => base.hopping(dnls_mi::model::Species::Two),
    };
    let p = ModelParams::new(
        k1,
        k2,
        flags
            .lambda1
            .unwrap_or(base.intra(dnls_mi::model::Species::One)),
        flags
            .lambda2
            .unwrap_or(base.intra(dnls_mi::model::Species::Two)),
        flags.lambda12.unwrap_or(base.inter()),
    )?;
    for w in p.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(p)
}

fn print_json(v: &impl serde::Serialize) -> CmdResult {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Failed(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn wave_number(radians: Option<f64>, index: Option<usize>, sites: usize) -> Result<f64, Failure> {
    match (radians, index) {
        (Some(x), _) => Ok(x),
        (None, Some(i)) => Ok(dnls_mi::model::LatticeConfig::new(sites)?.wave_number(i)?),
        (None, None) => Err(Failure::Failed("missing wave number".into())),
    }
}

fn cmd_spectrum(a: &SpectrumArgs) -> CmdResult {
    let params = resolve_params(&a.params, ModelParams::reference_miscible())?;
    let psi0_sq = a.psi0sq.unwrap_or(Preset::Fig1a.background_density());
    let k = wave_number(a.k, a.l, a.sites)?;
    let q = wave_number(a.q, a.s, a.sites)?;
    let carrier = CarrierSpec::equal_amplitude(&params, k, psi0_sq)?;

    if params.equal_hopping().is_some() {
        let s = bogoliubov::spectrum(&params, &carrier, q)?;
        let class = s.class();
        if a.json {
            return print_json(&json!({
                "k": k,
                "q": q,
                "psi0sq": psi0_sq,
                "params": params,
                "solver": "closed_form",
                "eps_q": s.epsilon_q,
                "delta1": s.delta[0],
                "delta2": s.delta[1],
                "omega": s.omega,
                "growth1": s.growth[0],
                "growth2": s.growth[1],
                "class": class.label(),
            }));
        }
        println!("k        {k:.10}");
        println!("q        {q:.10}");
        println!("eps_q    {:.10e}", s.epsilon_q);
        println!("delta1   {:.10e}", s.delta[0]);
        println!("delta2   {:.10e}", s.delta[1]);
        for (i, b) in s.omega.iter().enumerate() {
            println!("omega{}+  {:+.10e} {:+.10e}i", i + 1, b.plus.re, b.plus.im);
            println!(
                "omega{}-  {:+.10e} {:+.10e}i",
                i + 1,
                b.minus.re,
                b.minus.im
            );
        }
        println!("growth1  {:.10e}", s.growth[0]);
        println!("growth2  {:.10e}", s.growth[1]);
        println!("class    {}", class.label());
        return Ok(());
    }

    let lin = linearization::bogoliubov_matrix(&params, &carrier, q)?;
    let growth = lin.branch_growth(&params, &carrier, MATRIX_GROWTH_TOL);
    let class = bogoliubov::StabilityClass::from_growth(growth);
    if a.json {
        return print_json(&json!({
            "k": k,
            "q": q,
            "psi0sq": psi0_sq,
            "params": params,
            "solver": "matrix",
            "eigenvalues": lin.eigenvalues,
            "residuals": lin.residuals,
            "growth1": growth[0],
            "growth2": growth[1],
            "class": class.label(),
        }));
    }
    println!("k        {k:.10}");
    println!("q        {q:.10}");
    println!("unequal hopping: eigenvalues of the linearization matrix");
    for w in lin.eigenvalues {
        println!("omega    {:+.10e} {:+.10e}i", w.re, w.im);
    }
    println!("growth1  {:.10e}", growth[0]);
    println!("growth2  {:.10e}", growth[1]);
    println!("class    {}", class.label());
    Ok(())
}

fn cmd_phase_diagram(a: &PhaseDiagramArgs) -> CmdResult {
    let preset = match a.preset {
        Some(p) if p.grid().is_none() => {
            return Err(Failure::Failed(format!(
                "{p} is not a phase-diagram preset (use fig1a or fig1b)"
            )));
        }
        p => p,
    };
    let base = preset.map_or(ModelParams::reference_miscible(), |p| p.params());
    let params = resolve_params(&a.params, base)?;
    let psi0_sq = a.psi0sq.unwrap_or(Preset::Fig1a.background_density());
    let grid = GridSpec::full(a.k_steps, a.q_steps)?;
    let solver = match a.solver {
        SolverArg::ClosedForm => Solver::ClosedForm,
        SolverArg::Matrix => Solver::Matrix,
        SolverArg::Auto if params.equal_hopping().is_some() => Solver::ClosedForm,
        SolverArg::Auto => Solver::Matrix,
    };
    let result = stability_map::scan_plane(&params, psi0_sq, &grid, solver, None)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("grid.csv");
    result.export_csv(&path)?;

    let counts = result.class_counts();
    let failed = result.failed_count();
    if a.json {
        print_json(&json!({
            "out": path,
            "cells": result.cells.len(),
            "k_steps": a.k_steps,
            "q_steps": a.q_steps,
            "psi0sq": psi0_sq,
            "params": params,
            "class_counts": counts,
            "failed": failed,
        }))?;
    } else {
        println!("wrote {} cells to {}", result.cells.len(), path.display());
        for (label, n) in &counts {
            println!("{label:<14} {n}");
        }
    }
    if a.strict && failed > 0 {
        return Err(Failure::Failed(format!(
            "{failed} cells could not be evaluated"
        )));
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> CmdResult {
    let config = ValidationConfig {
        samples: a.samples,
        seed: a.seed,
        ..Default::default()
    };
    let report = validation::validate(&config);
    if a.json {
        print_json(&report)?;
    } else {
        for s in &report.suites {
            println!(
                "{:<18} {}  measured {:.3e}, tolerance {:.1e}, {} cases",
                s.suite,
                if s.passed { "PASS" } else { "FAIL" },
                s.measured,
                s.tolerance,
                s.cases
            );
        }
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Failed("validation failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::PhaseDiagram(a) => cmd_phase_diagram(a),
        Command::Simulate(a) => run::cmd_simulate(a),
        Command::GrowthRate(a) => run::cmd_growth_rate(a),
        Command::Validate(a) => cmd_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Aborted(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
