use r2ch_wasm_demo::{preset_names, spectrum, Simulation};

#[test]
fn catalog_is_exposed() {
    let names = preset_names();
    assert!(names.lines().any(|n| n == "smooth-I"));
}

#[test]
fn stepping_a_preset_conserves_mass() {
    let mut sim = Simulation::from_preset("smooth-I").unwrap();
    let before = sim.invariants();
    assert_eq!(sim.try_advance(5).unwrap(), 5);
    assert_eq!(sim.steps(), 5);
    assert!((sim.time() - 1.0).abs() < 1e-12);
    let after = sim.invariants();
    assert!((after[0] - before[0]).abs() < 1e-10 * before[0]);
    assert_eq!(sim.u().len(), sim.x().len());
    assert!(Simulation::from_preset("missing").is_err());
}

#[test]
fn advance_stops_at_the_end_time() {
    let mut sim = Simulation::from_preset("zero").unwrap();
    assert_eq!(sim.try_advance(1000).unwrap(), 10);
    assert_eq!(sim.try_advance(1).unwrap(), 0);
}

#[test]
fn spectrum_is_bounded_below_by_one() {
    let s = spectrum(16, 4.0).unwrap();
    assert_eq!(s[0], 1.0);
    assert!(s.iter().all(|&l| l >= 1.0));
    assert!(spectrum(3, 1.0).is_err());
}
