mod common;

use blocktoep::fixtures::{example_a, example_b, example_c, example_coefficients, laplacian};
use blocktoep::numkernel::determinant;
use blocktoep::transfer::{
    boundary_transfer_matrix, match_branches, ordered_spectrum, riesz_projection,
    riesz_projection_contour, transfer_matrix,
};
use blocktoep::{BoundaryTriple, CMatrix, Error, IndexSet, TieSplit, C64};
use common::{c, clean_energy, random_model};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn worked_transfer_determinant() {
    let m = example_coefficients();
    let e = c(0.3, 0.1);
    let det = determinant(&transfer_matrix(&m, e).unwrap()).unwrap();
    // det R = (0.3i)^2, det T = 1.5^2
    let expected = c(0.0, 0.3) * c(0.0, 0.3) / 2.25;
    assert!((det - expected).norm() < 1e-14);
    let prod: C64 = ordered_spectrum(&m, e).unwrap().values.iter().product();
    assert!((prod - expected).norm() < 1e-12);
}

#[test]
fn worked_boundary_transfer_at_zero() {
    let bd = BoundaryTriple::perturbed(example_a(), example_b(), example_c()).unwrap();
    let tb = boundary_transfer_matrix(&bd, c(0.0, 0.0)).unwrap();
    let b_inv = CMatrix::diag(&[c(1.0, 0.0), c(1.0, 0.0) / c(0.2, 1.0)]);
    let expected = CMatrix::from_blocks(
        &(&example_c() * &b_inv).scale(c(-1.0, 0.0)),
        &example_a().scale(c(-1.0, 0.0)),
        &b_inv,
        &CMatrix::zeros(2, 2),
    );
    assert!((&tb - &expected).max_abs() < 1e-14);
}

#[test]
fn circulant_boundary_transfer_is_bulk_transfer() {
    let m = example_coefficients();
    let e = c(-0.7, 0.4);
    let tb = boundary_transfer_matrix(&BoundaryTriple::circulant(&m), e).unwrap();
    assert!((&tb - &transfer_matrix(&m, e).unwrap()).max_abs() < 1e-14);
}

#[test]
fn open_boundary_transfer_needs_invertible_b() {
    let m = example_coefficients();
    assert!(boundary_transfer_matrix(&BoundaryTriple::open(&m), c(0.0, 0.0)).is_err());
}

#[test]
fn laplacian_degeneracy_and_ties() {
    let m = laplacian();
    assert!(ordered_spectrum(&m, c(2.0, 0.0)).unwrap().degenerate);
    let s = ordered_spectrum(&m, c(1.0, 0.0)).unwrap();
    assert!(!s.degenerate);
    assert_eq!(s.tie_groups, vec![vec![1, 2]]);
    let one = IndexSet::new(&[1], 2).unwrap();
    assert!(matches!(
        riesz_projection(&s, &one, TieSplit::Forbid),
        Err(Error::DegenerateSplit)
    ));
}

#[test]
fn branches_swap_across_the_laplacian_interval() {
    let m = laplacian();
    let above = ordered_spectrum(&m, c(0.5, 0.01)).unwrap();
    let below = ordered_spectrum(&m, c(0.5, -0.01)).unwrap();
    assert_eq!(match_branches(&above, &below), vec![1, 0]);
    assert_eq!(match_branches(&above, &above), vec![0, 1]);
    let near = ordered_spectrum(&m, c(0.5, 0.0101)).unwrap();
    assert_eq!(match_branches(&above, &near), vec![0, 1]);
}

#[test]
fn index_set_enumeration() {
    assert_eq!(IndexSet::subsets_up_to(4, 4).len(), 16);
    assert_eq!(IndexSet::subsets_up_to(6, 2).len(), 1 + 6 + 15);
    assert_eq!(IndexSet::subsets_of_size(6, 3).len(), 20);
    let s = IndexSet::new(&[2, 4], 5).unwrap();
    assert_eq!(s.complement().members(), vec![1, 3, 5]);
    assert_eq!(IndexSet::from_mask(s.mask(), 5), s);
    assert_eq!(IndexSet::range(3, 5, 5).unwrap().members(), vec![3, 4, 5]);
    assert!(IndexSet::new(&[0], 3).is_err());
    assert!(IndexSet::new(&[4], 3).is_err());
    assert_eq!(IndexSet::full(3).complement(), IndexSet::empty(3));
}

fn random_set(rng: &mut ChaCha8Rng, dim: usize) -> IndexSet {
    IndexSet::from_mask(rng.random_range(0..(1u64 << dim)), dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ordered_spectrum_invariants(seed: u64, l in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, l);
        let e = clean_energy(&mut rng, &m, 2.0, 0.0);
        let s = ordered_spectrum(&m, e).unwrap();
        prop_assert_eq!(s.len(), 2 * l);
        prop_assert!(s.moduli.windows(2).all(|w| w[0] <= w[1]));
        let prod: C64 = s.values.iter().product();
        let expected = m.det_r() / m.det_t();
        prop_assert!((prod - expected).norm() <= 1e-8 * expected.norm());
    }

    #[test]
    fn projections_are_spectral(seed: u64, l in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, l);
        let e = clean_energy(&mut rng, &m, 2.0, 0.0);
        let s = ordered_spectrum(&m, e).unwrap();
        let tm = transfer_matrix(&m, e).unwrap();
        let set = random_set(&mut rng, 2 * l);
        let p = riesz_projection(&s, &set, TieSplit::Forbid).unwrap();
        let q = riesz_projection(&s, &set.complement(), TieSplit::Forbid).unwrap();
        let id = CMatrix::identity(2 * l);
        let scale = 1.0 + p.max_abs();
        prop_assert!((&(&p * &p) - &p).max_abs() < 1e-8 * scale);
        prop_assert!((&(&p + &q) - &id).max_abs() < 1e-8 * scale);
        prop_assert!((&(&tm * &p) - &(&p * &tm)).max_abs() < 1e-8 * scale * (1.0 + tm.max_abs()));
        let mut restricted = CMatrix::zeros(2 * l, 2 * l);
        for j in set.members() {
            let pj = riesz_projection(&s, &IndexSet::new(&[j], 2 * l).unwrap(), TieSplit::Forbid).unwrap();
            restricted = &restricted + &pj.scale(s.z(j));
        }
        prop_assert!((&(&tm * &p) - &restricted).max_abs() < 1e-8 * scale * (1.0 + tm.max_abs()));
    }

    #[test]
    fn contour_projection_agrees(seed: u64, l in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, l);
        let e = clean_energy(&mut rng, &m, 2.0, 0.0);
        let s = ordered_spectrum(&m, e).unwrap();
        let tm = transfer_matrix(&m, e).unwrap();
        let set = random_set(&mut rng, 2 * l);
        let p = riesz_projection(&s, &set, TieSplit::Forbid).unwrap();
        let pc = riesz_projection_contour(&tm, &s, &set, 256).unwrap();
        prop_assert!((&p - &pc).max_abs() < 1e-6 * (1.0 + p.max_abs()));
    }

    #[test]
    fn nearby_energies_continue_branches_in_place(seed: u64, l in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, l);
        let e = clean_energy(&mut rng, &m, 2.0, 0.05);
        let a = ordered_spectrum(&m, e).unwrap();
        let gap = a.values.windows(2).map(|w| (w[1] - w[0]).norm()).fold(f64::INFINITY, f64::min);
        let modgap = a.moduli.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 1e-2 && modgap > 1e-2);
        let b = ordered_spectrum(&m, e + c(1e-7, 1e-7)).unwrap();
        let identity: Vec<usize> = (0..2 * l).collect();
        prop_assert_eq!(match_branches(&a, &b), identity);
    }
}
