#![allow(dead_code)]

use blocktoep::asymptotics::gaussian_matrix;
use blocktoep::numkernel::singular_values;
use blocktoep::transfer::ordered_spectrum;
use blocktoep::{BoundaryTriple, CMatrix, CoefficientTriple, C64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Gaussian matrix with condition number at most `max_cond`.
pub fn conditioned(rng: &mut ChaCha8Rng, l: usize, max_cond: f64) -> CMatrix {
    loop {
        let m = gaussian_matrix(rng, l, l);
        let s = singular_values(&m).unwrap();
        if s[0] <= max_cond * s[l - 1] {
            return m;
        }
    }
}

pub fn random_model(rng: &mut ChaCha8Rng, l: usize) -> CoefficientTriple {
    let r = conditioned(rng, l, 20.0);
    let t = conditioned(rng, l, 20.0);
    let v = gaussian_matrix(rng, l, l);
    CoefficientTriple::new(r, t, v).unwrap()
}

/// `A` of exact rank `rank`, `B` invertible, `C` Gaussian.
pub fn random_perturbation(rng: &mut ChaCha8Rng, l: usize, rank: usize) -> BoundaryTriple {
    let a = &gaussian_matrix(rng, l, rank) * &gaussian_matrix(rng, rank, l);
    let b = conditioned(rng, l, 20.0);
    let cc = gaussian_matrix(rng, l, l);
    BoundaryTriple::perturbed(a, b, cc).unwrap()
}

pub fn gaussian(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal)) * scale
}

/// A random energy whose transfer spectrum is nondegenerate, untied and
/// at least `margin` away from the unit circle.
pub fn clean_energy(rng: &mut ChaCha8Rng, m: &CoefficientTriple, scale: f64, margin: f64) -> C64 {
    loop {
        let e = gaussian(rng, scale);
        let Ok(spec) = ordered_spectrum(m, e) else {
            continue;
        };
        if spec.degenerate || !spec.tie_groups.is_empty() {
            continue;
        }
        if spec.moduli.iter().all(|r| (r - 1.0).abs() > margin) {
            return e;
        }
    }
}
