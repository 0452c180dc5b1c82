use dnls_mi::bogoliubov::{epsilon_q, CarrierSpec};
use dnls_mi::model::{ModelParams, Species};
use dnls_mi::validation::{self, ValidationConfig};
use dnls_mi::Result;
use num_complex::Complex64;

/// Closed form with the sign of `Δ_σ` flipped.
fn flipped_delta(params: &ModelParams, carrier: &CarrierSpec, q: f64) -> Result<[Complex64; 4]> {
    let kk = params.hopping(Species::One);
    let eps = epsilon_q(kk, carrier.k(), q);
    let doppler = 2.0 * kk * carrier.k().sin() * q.sin();
    let (a, b) = (carrier.psi0(Species::One), carrier.psi0(Species::Two));
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for s in Species::BOTH {
        let delta = -dnls_mi::bogoliubov::delta_sigma(params, a, b, s);
        let root = Complex64::new(eps * (eps + delta), 0.0).sqrt();
        out[2 * s.index()] = doppler + root;
        out[2 * s.index() + 1] = doppler - root;
    }
    Ok(out)
}

#[test]
fn default_run_passes() {
    let report = validation::validate(&ValidationConfig::default());
    assert!(report.passed, "{report:#?}");
    assert_eq!(report.suites.len(), 4);
    assert_eq!(report.suites[0].cases, 1000);
}

#[test]
fn seeded_subset_is_reproducible() {
    let config = ValidationConfig {
        samples: 10,
        seed: 42,
        ..Default::default()
    };
    let a = validation::oracle_suite(&config, validation::closed_form_frequencies);
    let b = validation::oracle_suite(&config, validation::closed_form_frequencies);
    assert_eq!(a, b);
    assert!(a.passed);
    assert_eq!(
        serde_json::to_string(&validation::validate(&config)).unwrap(),
        serde_json::to_string(&validation::validate(&config)).unwrap()
    );
}

#[test]
fn sign_error_in_delta_is_caught() {
    let config = ValidationConfig {
        samples: 50,
        ..Default::default()
    };
    let report = validation::validate_with(&config, flipped_delta);
    assert!(!report.passed);
    let oracle = &report.suites[0];
    assert_eq!(oracle.suite, "oracle");
    assert!(!oracle.passed);
    assert!(oracle.measured > 1e-3, "{}", oracle.measured);
    assert!(report.suites[1..].iter().all(|s| s.passed));
}

#[test]
fn report_json_shape() {
    let config = ValidationConfig {
        samples: 5,
        seed: 1,
        ..Default::default()
    };
    let v: serde_json::Value = serde_json::to_value(validation::validate(&config)).unwrap();
    assert_eq!(v["seed"], 1);
    let names: Vec<&str> = v["suites"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["suite"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "oracle",
            "long_wavelength",
            "convergence_order",
            "conservation"
        ]
    );
    assert!(v["suites"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| s["passed"].is_boolean()));
}
