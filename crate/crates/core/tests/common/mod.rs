//! Test-only oracles. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use deepkm::nn::{Activation, Architecture, Autoencoder, LayerSpec};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_TOL: f64 = 1e-7;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// Central difference of `f` around `x[i]`.
pub fn central_difference(f: &mut dyn FnMut(f64) -> f64, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

/// `|a − n| ≤ max(ABS_TOL, REL_TOL · max(|a|, |n|))`.
pub fn grad_close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= ABS_TOL.max(REL_TOL * analytic.abs().max(numeric.abs()))
}

/// Random autoencoder with 1..=3 layers per half and widths ≤ 8.
pub fn random_autoencoder(rng: &mut ChaCha8Rng) -> Autoencoder {
    let layers = rng.random_range(1..=3);
    let mut widths: Vec<usize> = (0..=layers).map(|_| rng.random_range(1..=8)).collect();
    widths[0] = rng.random_range(2..=8);
    let act = |i: usize, n: usize, rng: &mut ChaCha8Rng| {
        if i + 1 == n || rng.random_bool(0.3) {
            Activation::Linear
        } else {
            Activation::Relu
        }
    };
    let mut encoder = Vec::new();
    for i in 0..layers {
        encoder.push(LayerSpec::new(widths[i], widths[i + 1], act(i, layers, rng)));
    }
    let mut decoder = Vec::new();
    let rev: Vec<usize> = widths.iter().rev().copied().collect();
    for i in 0..layers {
        decoder.push(LayerSpec::new(rev[i], rev[i + 1], act(i, layers, rng)));
    }
    let arch = Architecture { encoder, decoder };
    let mut ae = Autoencoder::new(&arch, rng.random()).unwrap();
    // non-zero biases so every parameter gets exercised
    for layer in ae.encoder.iter_mut().chain(ae.decoder.iter_mut()) {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    ae
}

/// Mutable reference to element `elem` of parameter tensor `tensor`
/// (weight, bias, weight, bias, … over encoder then decoder layers).
pub fn param_mut(ae: &mut Autoencoder, tensor: usize, elem: usize) -> &mut f64 {
    let layer = tensor / 2;
    let n_enc = ae.encoder.len();
    let dense = if layer < n_enc {
        &mut ae.encoder[layer]
    } else {
        &mut ae.decoder[layer - n_enc]
    };
    if tensor % 2 == 0 {
        &mut dense.weight.as_slice_mut().unwrap()[elem]
    } else {
        &mut dense.bias.as_slice_mut().unwrap()[elem]
    }
}

/// Every labelling of `n` points with labels in `[0, k)`.
pub fn all_labelings(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total).map(move |mut code| {
        let mut labels = vec![0; n];
        for l in labels.iter_mut() {
            *l = code % k;
            code /= k;
        }
        labels
    })
}

/// Minimum K-means objective over all labelings that use every cluster.
pub fn brute_force_kmeans(points: &Array2<f64>, k: usize) -> f64 {
    let mut best = f64::INFINITY;
    for labels in all_labelings(points.nrows(), k) {
        let mut cost = 0.0;
        let mut valid = true;
        for c in 0..k {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if members.is_empty() {
                valid = false;
                break;
            }
            for j in 0..points.ncols() {
                let mean = members.iter().map(|&i| points[[i, j]]).sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|&i| (points[[i, j]] - mean).powi(2)).sum::<f64>();
            }
        }
        if valid && cost < best {
            best = cost;
        }
    }
    best
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Best accuracy over every injective mapping of predicted labels `0..kp`
/// into true labels `0..kt`, by enumeration.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize], kp: usize, kt: usize) -> f64 {
    let n = kp.max(kt);
    let mut best = 0usize;
    for perm in permutations(n) {
        let hits = pred
            .iter()
            .zip(truth)
            .filter(|(&p, &t)| perm[p] == t && t < kt)
            .count();
        best = best.max(hits);
    }
    best as f64 / pred.len() as f64
}

/// Plug-in NMI written out term by term from the probability tables.
pub fn direct_nmi(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let kp = pred.iter().max().unwrap() + 1;
    let kt = truth.iter().max().unwrap() + 1;
    let mut counts = vec![vec![0usize; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        counts[p][t] += 1;
    }
    let joint: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|&c| c as f64 / n).collect()).collect();
    let pc: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..kt).map(|t| joint.iter().map(|r| r[t]).sum()).collect();
    let h = |p: &[f64]| -> f64 { p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum() };
    let mut mi = 0.0;
    for c in 0..kp {
        for y in 0..kt {
            if joint[c][y] > 0.0 {
                mi += joint[c][y] * (joint[c][y] / (pc[c] * py[y])).ln();
            }
        }
    }
    let denom = h(&pc) + h(&py);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * mi / denom
    }
}

/// Inverse-power weights evaluated literally as `d^(−α) / Σ d^(−α)`.
pub fn direct_ct_weights(z: &[f64], centers: &[Vec<f64>], alpha: f64, eps: f64) -> Vec<f64> {
    let inv: Vec<f64> = centers
        .iter()
        .map(|r| {
            let d: f64 = z.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum();
            1.0 / d.max(eps).powf(alpha)
        })
        .collect();
    let s: f64 = inv.iter().sum();
    inv.iter().map(|v| v / s).collect()
}

/// Softmax weights evaluated literally as `e^(−α·d) / Σ e^(−α·d)`.
pub fn direct_dkm_weights(z: &[f64], centers: &[Vec<f64>], alpha: f64) -> Vec<f64> {
    let e: Vec<f64> = centers
        .iter()
        .map(|r| {
            let d: f64 = z.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum();
            (-alpha * d).exp()
        })
        .collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

use deepkm::clustering::Centroids;
use deepkm::losses::{combined_objective, LossConfig, Variant};

/// Gradient mismatch report: (objective, parameter, analytic, numeric).
pub type Mismatch = (String, String, f64, f64);

/// Draws one random instance from `seed` and compares every analytic
/// parameter and centroid gradient of the reconstruction, CT, DKM and DCN
/// objectives against central differences. Returns the first mismatch.
pub fn check_gradients(seed: u64) -> Result<usize, Mismatch> {
    let mut rng = rng(seed);
    let mut ae = random_autoencoder(&mut rng);
    let b = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    let batch = random_matrix(&mut rng, b, ae.input_dim(), 1.0);
    let centers = Centroids::new(random_matrix(&mut rng, k, ae.latent_dim(), 1.0)).unwrap();
    let alpha = rng.random_range(0.5..4.0);
    let lambda = rng.random_range(0.1..3.0);

    let objectives: [(&str, Option<Variant>); 4] = [
        ("reconstruction", None),
        ("ct", Some(Variant::Ct)),
        ("dkm", Some(Variant::Dkm)),
        ("dcn", Some(Variant::Dcn)),
    ];
    let mut checked = 0;
    for (name, variant) in objectives {
        let cfg = LossConfig::new(variant.unwrap_or(Variant::Ct), lambda, alpha).unwrap();
        let cents = variant.map(|_| &centers);
        let obj = combined_objective(&ae, batch.view(), cents, &cfg).unwrap();
        let names = ae.tensor_names();
        let analytic: Vec<Vec<f64>> = obj.gradients.tensors().iter().map(|t| t.to_vec()).collect();
        for (t, grads) in analytic.iter().enumerate() {
            for (e, &a) in grads.iter().enumerate() {
                let orig = *param_mut(&mut ae, t, e);
                let mut f = |v: f64| {
                    *param_mut(&mut ae, t, e) = v;
                    combined_objective(&ae, batch.view(), cents, &cfg).unwrap().total
                };
                let n = central_difference(&mut f, orig);
                *param_mut(&mut ae, t, e) = orig;
                checked += 1;
                if !grad_close(a, n) {
                    return Err((name.into(), format!("{}[{e}]", names[t]), a, n));
                }
            }
        }
        if let Some(gc) = &obj.grad_centroids {
            for ((r, c), &a) in gc.indexed_iter() {
                let mut f = |v: f64| {
                    let mut m = centers.as_array().clone();
                    m[[r, c]] = v;
                    let moved = Centroids::new(m).unwrap();
                    combined_objective(&ae, batch.view(), Some(&moved), &cfg).unwrap().total
                };
                let n = central_difference(&mut f, centers.as_array()[[r, c]]);
                checked += 1;
                if !grad_close(a, n) {
                    return Err((name.into(), format!("centroids[{r},{c}]"), a, n));
                }
            }
        }
    }
    Ok(checked)
}
