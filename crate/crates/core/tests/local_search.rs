use phaseshift_core::forward::target_shifts;
use phaseshift_core::local::{basic_powell, Bounds};
use phaseshift_core::potential::sample_uniform;
use phaseshift_core::{
    lmm, AdmissibleSet, InverseProblem, LocalParams, PotentialConfig, SearchPoint,
};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

#[test]
fn single_layer_recovered_from_random_starts() {
    let truth = PotentialConfig::single(1.3, 2.0).unwrap();
    let adm = AdmissibleSet::new(3.0, 1, -5.0, 5.0).unwrap();
    let prob = InverseProblem::new(target_shifts(&truth, 4.0).unwrap(), adm, true).unwrap();
    let eval = prob.evaluator();
    let f = |p: &PotentialConfig| eval.value(p);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let p = sample_uniform(&adm, &mut rng);
        let start = SearchPoint::from_config(&p, f(&p));
        let out = lmm(&f, &start, &adm, &LocalParams::default());
        assert!(out.value < 1e-8, "from {p:?}: {out:?}");
    }
}

fn quadratic(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    // A = L L^T + I with small off-diagonal L, minimizer c, start x0.
    (
        prop::collection::vec(-0.3..0.3f64, dim * dim),
        prop::collection::vec(-0.5..0.5f64, dim),
        prop::collection::vec(-0.9..0.9f64, dim),
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn powell_solves_interior_quadratics((l, c, x0) in quadratic(3)) {
        let dim = 3;
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                a[i * dim + j] = (0..dim).map(|m| l[i * dim + m] * l[j * dim + m]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let f = |x: &[f64]| {
            let d: Vec<f64> = x.iter().zip(&c).map(|(x, c)| x - c).collect();
            (0..dim).map(|i| (0..dim).map(|j| d[i] * a[i * dim + j] * d[j]).sum::<f64>()).sum::<f64>()
        };
        let b = Bounds::new(vec![-1.0; dim], vec![1.0; dim]).unwrap();
        let params = LocalParams { max_powell_iters: 2 * dim, ..LocalParams::default() };
        let start = SearchPoint::evaluate(&f, x0);
        let out = basic_powell(&f, start.clone(), &b, &params);
        prop_assert!(out.value <= start.value);
        for (x, c) in out.coords.iter().zip(&c) {
            prop_assert!((x - c).abs() <= 10.0 * params.line_tol, "{:?} vs {:?}", out.coords, c);
        }
    }
}
