use hubbard_scatter::gadget::{simulate_gate_G, GadgetConfig};
use hubbard_scatter::switch::{catalog_switch, DEFAULT_SWITCH};
use hubbard_scatter::{Error, ModelParams};

// Triplet pairs are spatially antisymmetric, so hard-core t-J particles in
// a triplet never occupy a singlet bond and evolve exactly like free
// fermions. Total spin is conserved, so channels cannot mix. Both hold for
// any routing quality, which at this size is far from perfect.
#[test]
fn gadget_leaves_triplets_free_and_keeps_channels_apart() {
    let sw = catalog_switch(DEFAULT_SWITCH).unwrap();
    let cfg = GadgetConfig::new(ModelParams::tj(1.0, 2.0), 16);
    let est = simulate_gate_G(&sw, &cfg).unwrap();

    assert!(est.triplet_error() < 1e-9, "triplet error {}", est.triplet_error());
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                assert!(est.matrix[i][j].norm() < 1e-9, "M[{i}][{j}] = {}", est.matrix[i][j]);
            }
        }
    }
    assert!(est.matrix[2][2].norm() <= 1.0 + 1e-9);
    for c in est.expected {
        assert!((c.norm() - 1.0).abs() < 1e-12);
    }
    assert!(est.exit_spread <= est.allowed_spread);
    assert!(est.boundary_probability < 1e-2, "boundary {}", est.boundary_probability);
    assert!(est.single_particle_routing[0][3] > est.single_particle_routing[0][0]);
    assert!(est.single_particle_routing[1][2] > est.single_particle_routing[1][1]);
}

#[test]
fn swapped_momenta_are_misrouted() {
    let sw = catalog_switch(DEFAULT_SWITCH).unwrap();
    let mut cfg = GadgetConfig::new(ModelParams::tj(1.0, 2.0), 16);
    cfg.swap_momenta = true;
    match simulate_gate_G(&sw, &cfg) {
        Err(Error::RoutingFailure(_)) => {}
        other => panic!("expected a routing failure, got {:?}", other.map(|e| e.max_error)),
    }
}
