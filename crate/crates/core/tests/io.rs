mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sofcma::io::{load_problem, parse_problem, write_problem};
use sofcma::Error;

fn shipped(name: &str) -> String {
    format!("{}/../../problems/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn shipped_problems_load() {
    let expected = [
        ("first_order_lag.json", [1, 1, 1, 1, 1]),
        ("lag_feedthrough.json", [1, 1, 1, 1, 1]),
        ("double_integrator.json", [2, 1, 1, 2, 2]),
        ("resonant.json", [2, 1, 1, 1, 1]),
        ("random4.json", [4, 2, 2, 2, 2]),
        ("unstabilizable.json", [1, 1, 1, 1, 1]),
    ];
    for (name, dims) in expected {
        let p = load_problem(shipped(name)).unwrap();
        let d = p.dims;
        assert_eq!([d.n_x, d.n_w, d.n_u, d.n_y, d.n_z], dims, "{name}");
    }
    assert_eq!(
        load_problem(shipped("double_integrator.json")).unwrap(),
        double_integrator()
    );
}

#[test]
fn random_plants_round_trip_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let mut plant = random_plant(&mut rng, 3, 2, 2);
        plant.a[(0, 0)] *= 1e-200;
        plant.b[(1, 1)] *= 1e250;
        let text = write_problem(&plant);
        assert_eq!(parse_problem(&text).unwrap(), plant);
    }
}

#[test]
fn missing_file_error_names_the_path() {
    let err = load_problem("/nonexistent/plant.json").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/plant.json"));
}
