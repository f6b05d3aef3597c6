use pemkit::learn::{
    fit_car, learn_pem, CarSpec, FieldScale, Frame, Observation, PerceptionDataset, Scene, FIELD_NAMES,
};
use pemkit::pem::{GridSpec, GroundTruthObject, OcclusionLevel, PolarCoord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn inner_ring_dataset() -> PerceptionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let positions: Vec<(f64, f64)> = (0..4).map(|s| (5.0, 0.6 + s as f64 * std::f64::consts::FRAC_PI_2)).collect();
    let mut visible = [true; 4];
    let frames = (0..400)
        .map(|t| {
            let gt: Vec<GroundTruthObject> = positions
                .iter()
                .enumerate()
                .map(|(i, &(r, th))| GroundTruthObject {
                    id: i as u64,
                    position: PolarCoord::new(r, th),
                    occlusion: OcclusionLevel::Vis2,
                })
                .collect();
            let mut detections = Vec::new();
            for (i, &(r, th)) in positions.iter().enumerate() {
                let p = if visible[i] { 0.85 } else { 0.4 };
                visible[i] = rng.random::<f64>() < p;
                if visible[i] {
                    let er = 1.0 + 0.05 * (rng.random::<f64>() - 0.5);
                    let et = 0.02 * (rng.random::<f64>() - 0.5);
                    detections.push(PolarCoord::new(r * er, th + et));
                }
            }
            Frame {
                t: t as f64 * 0.5,
                gt,
                detections,
            }
        })
        .collect();
    PerceptionDataset {
        scenes: vec![Scene {
            name: "inner".into(),
            frames,
        }],
        frame_rate_hz: 2.0,
    }
}

#[test]
fn outer_ring_is_neighbor_extrapolation() {
    let grid = GridSpec::new(90.0, 10.0, 20.0).unwrap();
    let spec = CarSpec::for_grid(&grid);
    let out = learn_pem(&inner_ring_dataset(), grid, &spec).unwrap();

    let observations = pemkit::learn::field_observations(&out.stats);
    for (k, (obs, scale)) in observations.iter().enumerate() {
        let standalone = fit_car(obs, *scale, &spec).unwrap();
        for c in 0..grid.n_conditions() {
            let p = out.model.params_at(c);
            let learned = [
                p.transition.a01,
                p.transition.a11,
                p.error.mu_r,
                p.error.mu_theta,
                p.error.sigma_r,
                p.error.sigma_theta,
                p.error.rho,
            ][k];
            assert_eq!(learned, standalone.values[c], "{} at {c}", FIELD_NAMES[k]);
        }
        // every unobserved condition sits at alpha times its neighbors' mean
        for (c, o) in obs.iter().enumerate() {
            if !o.is_empty() {
                continue;
            }
            let nb = spec.adjacency.neighbors(c);
            let mean = nb.iter().map(|&m| standalone.latent[m]).sum::<f64>() / nb.len() as f64;
            assert!(
                (standalone.latent[c] - spec.alpha * mean).abs() < 1e-6,
                "{} at {c}: {} vs {}",
                FIELD_NAMES[k],
                standalone.latent[c],
                spec.alpha * mean
            );
        }
    }
    let ring1 = grid
        .condition_of(PolarCoord::new(15.0, 0.6), OcclusionLevel::Vis2)
        .unwrap();
    assert!(out.stats.conditions[grid.condition_index(ring1)].transitions() == 0);
}

fn observation() -> impl Strategy<Value = Observation> {
    prop_oneof![
        Just(Observation::Empty),
        (0u32..200, 1u32..200).prop_map(|(s, n)| Observation::Binomial {
            successes: s.min(n) as f64,
            trials: n as f64,
        }),
    ]
}

fn gaussian(lo: f64, hi: f64) -> impl Strategy<Value = Observation> {
    prop_oneof![
        Just(Observation::Empty),
        (lo..hi, 1.0f64..1e4).prop_map(|(value, precision)| Observation::Gaussian { value, precision }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn probability_fields_bounded(obs in proptest::collection::vec(observation(), 32)) {
        let grid = GridSpec::new(90.0, 10.0, 20.0).unwrap();
        let fit = fit_car(&obs, FieldScale::Probability, &CarSpec::for_grid(&grid)).unwrap();
        prop_assert!(fit.values.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn sigma_fields_positive(obs in proptest::collection::vec(gaussian(1e-6, 5.0), 32)) {
        let grid = GridSpec::new(90.0, 10.0, 20.0).unwrap();
        let fit = fit_car(&obs, FieldScale::Positive, &CarSpec::for_grid(&grid)).unwrap();
        prop_assert!(fit.values.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn correlation_fields_open_interval(obs in proptest::collection::vec(gaussian(-0.99, 0.99), 32)) {
        let grid = GridSpec::new(90.0, 10.0, 20.0).unwrap();
        let fit = fit_car(&obs, FieldScale::Correlation, &CarSpec::for_grid(&grid)).unwrap();
        prop_assert!(fit.values.iter().all(|r| *r > -1.0 && *r < 1.0));
    }
}
