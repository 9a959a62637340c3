use phaseshift_core::forward::phase_shift_range;
use phaseshift_core::oracle::{oracle_phase_shift, phase_gap};
use phaseshift_core::potential::sample_uniform;
use phaseshift_core::{AdmissibleSet, PotentialConfig};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

fn worst_gap(p: &PotentialConfig, k: f64, l_max: usize) -> f64 {
    let tm = phase_shift_range(p, k, l_max).unwrap();
    (0..=l_max)
        .map(|l| phase_gap(tm[l], oracle_phase_shift(p, k, l).unwrap()))
        .fold(0.0, f64::max)
}

#[test]
fn random_layered_potentials() {
    let adm = AdmissibleSet::new(3.0, 5, -5.0, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..8 {
        let p = sample_uniform(&adm, &mut rng);
        for k in [3.0, 6.0, 9.0] {
            let gap = worst_gap(&p, k, 10);
            assert!(gap <= 1e-6, "k = {k}, {p:?}: gap {gap:e}");
        }
    }
}

#[test]
fn reference_five_layer_potential() {
    let q1 = PotentialConfig::new(
        vec![0.3, 1.0, 1.9, 2.2, 2.4],
        vec![4.0, 1.0, -2.0, 3.5, 1.0],
    )
    .unwrap();
    assert!(worst_gap(&q1, 9.0, 10) <= 1e-6);
}

#[test]
fn strong_barrier_near_threshold() {
    // k^2 only slightly above the barrier height.
    let p = PotentialConfig::new(vec![0.8, 1.6], vec![8.5, -4.0]).unwrap();
    assert!(worst_gap(&p, 3.0, 6) <= 1e-6);
}
