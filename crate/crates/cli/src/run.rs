use std::fs;
use std::path::{Path, PathBuf};

use dnls_mi::experiments::{
    self, FitWindow, ModulatedStateSpec, Preset, SimulationRun, SimulationSetup,
};
use dnls_mi::integrator::{self, IntegratorConfig, Outcome};
use dnls_mi::model::ModelParams;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{GrowthRateArgs, RunArgs, SimulateArgs};
use crate::{print_json, resolve_params, CmdResult, Failure};

/// Contents of a `--config` file. Every field is optional; missing ones come
/// from `preset` (if any) and then from the fig2c setup.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub params: Option<ModelParams>,
    pub state: Option<ModulatedStateSpec>,
    pub integrator: Option<IntegratorConfig>,
    pub window: Option<FitWindow>,
    pub out: Option<PathBuf>,
    /// Worker threads when `--workers` is not given.
    pub workers: Option<usize>,
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))
}

/// Preset, then config file, then flags.
fn resolve(a: &RunArgs) -> Result<(SimulationSetup, PathBuf), Failure> {
    let file = match &a.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = file.workers {
        if n == 0 {
            return Err(Failure::Failed("workers must be at least 1".into()));
        }
        // a no-op when --workers already configured the pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let preset = a.preset.or(file.preset);
    let mut setup = match preset {
        Some(p) => p.simulation().ok_or_else(|| {
            Failure::Failed(format!("{p} is a phase-diagram preset; use phase-diagram"))
        })?,
        None => Preset::Fig2c.simulation().expect("simulation preset"),
    };
    if let Some(p) = file.params {
        setup.params = p;
    }
    if let Some(s) = file.state {
        setup.state = s;
    }
    if let Some(i) = file.integrator {
        setup.integrator = i;
    }
    if let Some(w) = file.window {
        setup.window = w;
    }

    setup.params = resolve_params(&a.params, setup.params)?;
    let st = &mut setup.state;
    if let Some(m) = a.sites {
        let ratio = st.alpha / st.amplitude;
        st.sites = m;
        st.amplitude = 1.0 / ((2 * m + 1) as f64).sqrt();
        st.alpha = ratio * st.amplitude;
    }
    if let Some(l) = a.l {
        st.l = l;
    }
    if let Some(s) = a.s {
        st.s = s;
    }
    if let Some(r) = a.alpha_ratio {
        st.alpha = r * st.amplitude;
    }
    if let Some(dt) = a.dt {
        setup.integrator.dt = dt;
    }
    if let Some(t) = a.t_end {
        setup.integrator.t_end = t;
    }
    setup.state.validate()?;
    setup.integrator.validate()?;

    let out =
        a.out.clone().or(file.out).unwrap_or_else(|| {
            PathBuf::from(preset.map_or("run".to_owned(), |p| format!("run-{p}")))
        });
    Ok((setup, out))
}

fn execute(a: &RunArgs) -> Result<(SimulationRun, PathBuf), Failure> {
    let (setup, out) = resolve(a)?;
    let run = experiments::run_simulation(&setup, Some(&out))?;
    Ok((run, out))
}

fn summary(run: &SimulationRun, out: &Path) -> serde_json::Value {
    let drift = integrator::drift_report(&run.trajectory).ok();
    json!({
        "out": out,
        "outcome": run.trajectory.outcome,
        "samples": run.trajectory.samples.len(),
        "t_final": run.trajectory.final_state.t,
        "drift": drift,
        "fit": run.fit,
    })
}

fn print_text(run: &SimulationRun, out: &Path) {
    println!("run directory  {}", out.display());
    match run.trajectory.outcome {
        Outcome::Completed => println!(
            "outcome        completed at t = {}",
            run.trajectory.final_state.t
        ),
        Outcome::Diverged { last_finite_t } => {
            println!("outcome        diverged after t = {last_finite_t}")
        }
        Outcome::DriftExceeded {
            quantity,
            drift,
            tol,
            t,
        } => {
            println!("outcome        {quantity} drift {drift:.3e} exceeded {tol:.1e} at t = {t}")
        }
    }
    if !run.trajectory.is_completed() {
        return;
    }
    if let Ok(d) = integrator::drift_report(&run.trajectory) {
        println!("norm drift     {:.3e} / {:.3e}", d.norm[0], d.norm[1]);
        println!("energy drift   {:.3e}", d.energy);
    }
}

fn print_fit(run: &SimulationRun) {
    for (i, f) in run.fit.species.iter().enumerate() {
        println!(
            "species {}      rate {:.6} ({:?}, {} samples)",
            i + 1,
            f.rate,
            f.status,
            f.samples
        );
    }
    println!("analytic       {:.6}", run.fit.analytic_rate);
    if let Some(e) = run.fit.relative_error {
        println!("relative error {e:.4}");
    }
}

fn check_outcome(run: &SimulationRun) -> CmdResult {
    run.trajectory.ensure_completed().map_err(Failure::from)
}

pub fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let (run, out) = execute(&a.run)?;
    if a.run.json {
        print_json(&summary(&run, &out))?;
    } else {
        print_text(&run, &out);
        if run.trajectory.is_completed() && run.fit.no_growth() {
            println!("sidebands      no growth");
        }
    }
    check_outcome(&run)
}

pub fn cmd_growth_rate(a: &GrowthRateArgs) -> CmdResult {
    let (run, out) = execute(&a.run)?;
    let rate = run.fit.rate();
    let verdict = a.expect.map(|e| {
        let ok = if e == 0.0 {
            rate == 0.0
        } else {
            (rate - e).abs() / e.abs() <= a.rtol
        };
        (e, ok)
    });
    if a.run.json {
        let mut v = summary(&run, &out);
        v["rate"] = json!(rate);
        if let Some((e, ok)) = verdict {
            v["expect"] = json!({ "rate": e, "rtol": a.rtol, "passed": ok });
        }
        print_json(&v)?;
    } else {
        print_text(&run, &out);
        if run.trajectory.is_completed() {
            print_fit(&run);
        }
        if let Some((e, ok)) = verdict {
            println!(
                "expected       {e} ± {}: {}",
                a.rtol,
                if ok { "PASS" } else { "FAIL" }
            );
        }
    }
    check_outcome(&run)?;
    match verdict {
        Some((e, false)) => Err(Failure::Failed(format!(
            "fitted rate {rate:.6} outside {e} ± {} relative",
            a.rtol
        ))),
        _ => Ok(()),
    }
}
