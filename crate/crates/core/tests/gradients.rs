mod common;

use common::*;
use deepkm::clustering::{Assignment, Centroids};
use deepkm::losses::{ct_loss, dcn_penalty, dkm_loss, reconstruction_loss, LossConfig, Variant};
use ndarray::Array2;
use proptest::prelude::*;

type LatentLoss<'a> = dyn Fn(&Array2<f64>) -> (f64, Array2<f64>) + 'a;

fn check_latent_gradient(z: &Array2<f64>, loss: &LatentLoss<'_>) {
    let (_, analytic) = loss(z);
    for ((i, j), &a) in analytic.indexed_iter() {
        let mut f = |v: f64| {
            let mut moved = z.clone();
            moved[[i, j]] = v;
            loss(&moved).0
        };
        let n = central_difference(&mut f, z[[i, j]]);
        assert!(grad_close(a, n), "latent[{i},{j}]: analytic {a} vs numeric {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_objectives_match_finite_differences(seed in any::<u64>()) {
        if let Err((obj, param, a, n)) = check_gradients(seed) {
            prop_assert!(false, "{obj} {param}: analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn ct_latent_gradient(seed in any::<u64>(), alpha in 0.5f64..6.0) {
        let mut r = rng(seed);
        let z = random_matrix(&mut r, 3, 4, 2.0);
        let c = Centroids::new(random_matrix(&mut r, 3, 4, 2.0)).unwrap();
        let cfg = LossConfig::new(Variant::Ct, 1.0, alpha).unwrap();
        check_latent_gradient(&z, &|z| {
            let l = ct_loss(z.view(), &c, &cfg).unwrap();
            (l.value, l.grad_latent)
        });
    }

    #[test]
    fn dkm_latent_gradient(seed in any::<u64>(), alpha in 0.1f64..4.0) {
        let mut r = rng(seed);
        let z = random_matrix(&mut r, 4, 3, 1.5);
        let c = Centroids::new(random_matrix(&mut r, 4, 3, 1.5)).unwrap();
        let cfg = LossConfig::new(Variant::Dkm, 1.0, alpha).unwrap();
        check_latent_gradient(&z, &|z| {
            let l = dkm_loss(z.view(), &c, &cfg).unwrap();
            (l.value, l.grad_latent)
        });
    }
}

#[test]
fn dcn_gradient_with_fixed_assignment() {
    for seed in 0..50 {
        let mut r = rng(seed);
        let z = random_matrix(&mut r, 4, 3, 1.0);
        let c = Centroids::new(random_matrix(&mut r, 2, 3, 1.0)).unwrap();
        // deliberately not the nearest-center labels: the penalty is defined for any fixed labelling
        let s = Assignment::new(vec![0, 1, 1, 0], 2).unwrap();
        check_latent_gradient(&z, &|z| {
            let l = dcn_penalty(z.view(), &c, &s).unwrap();
            (l.value, l.grad_latent)
        });
        let (_, analytic) = {
            let l = dcn_penalty(z.view(), &c, &s).unwrap();
            (l.value, l.grad_centroids)
        };
        for ((k, j), &a) in analytic.indexed_iter() {
            let mut f = |v: f64| {
                let mut m = c.as_array().clone();
                m[[k, j]] = v;
                dcn_penalty(z.view(), &Centroids::new(m).unwrap(), &s).unwrap().value
            };
            let n = central_difference(&mut f, c.as_array()[[k, j]]);
            assert!(grad_close(a, n));
        }
    }
}

#[test]
fn reconstruction_gradient() {
    let mut r = rng(7);
    let x = random_matrix(&mut r, 3, 5, 1.0);
    let recon = random_matrix(&mut r, 3, 5, 1.0);
    check_latent_gradient(&recon, &|y| reconstruction_loss(y.view(), x.view()));
}

#[test]
fn ct_gradient_vanishes_on_floored_distance() {
    let c = Centroids::new(Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 3.0, 0.0]).unwrap()).unwrap();
    let cfg = LossConfig::new(Variant::Ct, 1.0, 2.0).unwrap();
    let z = Array2::zeros((1, 2));
    let l = ct_loss(z.view(), &c, &cfg).unwrap();
    assert!(l.value.abs() < 1e-9);
    assert!(l.grad_latent.iter().all(|g| g.abs() < 1e-9));
}
