use blocktoep::fixtures::{
    example_c, example_coefficients, example_perturbation, example_reversed, laplacian,
};
use blocktoep::limitsets::*;
use blocktoep::operators::{assemble_operator, finite_spectrum};
use blocktoep::{BoundaryTriple, CoefficientTriple, Parallelism, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn scan(m: &CoefficientTriple, n: usize, r: usize) -> ScanGrid {
    scan_grid(m, Region::square(3.0), n, n, r, Parallelism::Parallel).unwrap()
}

fn inner_cloud(cloud: &[C64], s: &ScanGrid) -> Vec<C64> {
    cloud
        .iter()
        .copied()
        .filter(|p| s.region.contains_inner(*p, s.h))
        .collect()
}

#[test]
fn scan_rejects_coarse_grid() {
    assert!(scan_grid(
        &laplacian(),
        Region::square(3.0),
        8,
        64,
        1,
        Parallelism::Sequential
    )
    .is_err());
}

#[test]
fn laplacian_moduli_multiply_to_one() {
    let s = scan(&laplacian(), 64, 1);
    for n in &s.nodes {
        assert!(!n.masked);
        assert!((n.moduli[0] * n.moduli[1] - 1.0).abs() < 1e-10);
    }
    let zero = s.evaluate(c(0.0, 0.0));
    assert!(zero.tied);
    assert!((zero.moduli[0] - 1.0).abs() < 1e-12 && (zero.moduli[1] - 1.0).abs() < 1e-12);
}

#[test]
fn worked_model_scan_is_clean() {
    let s = scan(&example_coefficients(), 256, 1);
    assert!(s.masked_fraction() < 1e-3);
    assert_eq!(s.nodes.len(), 256 * 256);
    assert!((s.h - 6.0 / 255.0).abs() < 1e-15);
}

#[test]
fn sequential_and_parallel_scans_agree() {
    let m = example_coefficients();
    let a = scan_grid(&m, Region::square(3.0), 32, 24, 1, Parallelism::Sequential).unwrap();
    let b = scan_grid(&m, Region::square(3.0), 32, 24, 1, Parallelism::Parallel).unwrap();
    for (x, y) in a.nodes.iter().zip(&b.nodes) {
        assert_eq!(x.values, y.values);
    }
    assert_eq!(a.perm_x, b.perm_x);
    assert_eq!(a.perm_y, b.perm_y);
}

#[test]
fn periodic_cloud_of_laplacian_fills_interval() {
    let pts = sigma_periodic(&laplacian(), 64, Parallelism::Sequential).unwrap();
    assert_eq!(pts.len(), 64);
    for p in &pts {
        assert!(p.im.abs() < 1e-12 && p.re.abs() <= 2.0 + 1e-12);
    }
    assert!(sigma_periodic(&laplacian(), 32, Parallelism::Sequential).is_err());
}

#[test]
fn periodic_cloud_is_an_ellipse() {
    let m = CoefficientTriple::scalar(c(1.0, 0.0), c(2.0, 0.0), c(7.0, 0.0)).unwrap();
    for p in sigma_periodic(&m, 128, Parallelism::Parallel).unwrap() {
        let on = ((p.re - 7.0) / 3.0).powi(2) + p.im.powi(2);
        assert!((on - 1.0).abs() < 1e-10);
    }
}

#[test]
fn sigma_full_rank_matches_periodic_cloud() {
    let m = example_coefficients();
    let s = scan(&m, 128, 2);
    let arcs: Vec<C64> = sigma_r(&s, 2).points().collect();
    let cloud = sigma_periodic(&m, 4096, Parallelism::Parallel).unwrap();
    assert!(directed_hausdorff(&arcs, &cloud) <= 2.0 * s.h);
    assert!(directed_hausdorff(&inner_cloud(&cloud, &s), &arcs) <= 2.0 * s.h);
}

#[test]
fn sigma_r_sits_inside_sigma() {
    let m = example_reversed();
    let s = scan(&m, 128, 1);
    let cloud = sigma_periodic(&m, 4096, Parallelism::Parallel).unwrap();
    for r in 0..=2 {
        let pts: Vec<C64> = sigma_r(&s, r).points().collect();
        assert!(directed_hausdorff(&pts, &cloud) <= 2.0 * s.h, "r = {r}");
    }
}

#[test]
fn laplacian_sigma_is_the_interval() {
    let s = scan(&laplacian(), 65, 1);
    let set = sigma_r(&s, 1);
    assert!(!set.is_empty());
    let interval: Vec<C64> = (0..=400)
        .map(|k| c(-2.0 + 4.0 * k as f64 / 400.0, 0.0))
        .collect();
    let pts: Vec<C64> = set.points().collect();
    assert!(hausdorff(&pts, &interval) <= 2.0 * s.h);
}

#[test]
fn laplacian_lambda_is_the_interval() {
    let s = scan(&laplacian(), 64, 0);
    let lam = lambda_open(&s);
    let interval: Vec<C64> = (0..=400)
        .map(|k| c(-2.0 + 4.0 * k as f64 / 400.0, 0.0))
        .collect();
    let pts: Vec<C64> = lam.points().collect();
    assert!(hausdorff(&pts, &interval) <= 2.0 * s.h);
}

#[test]
fn worked_model_lambda_one_is_empty_and_sigma_one_is_sigma() {
    let s = scan(&example_coefficients(), 128, 1);
    assert!(lambda_r(&s, 1).is_empty());
    let s1: Vec<C64> = sigma_r(&s, 1).points().collect();
    let s2: Vec<C64> = sigma_r(&s, 2).points().collect();
    assert!(hausdorff(&s1, &s2) <= 2.0 * s.h);
}

#[test]
fn reversed_model_lambda_one_is_nonempty() {
    let s = scan(&example_reversed(), 128, 1);
    let l1 = lambda_r(&s, 1);
    assert!(!l1.is_empty());
    for arc in &l1.arcs {
        assert_eq!(arc.label, SetLabel::LambdaR);
        assert_eq!(arc.r, Some(1));
    }
    assert!(lambda_r(&s, 2).is_empty());
}

#[test]
fn lambda_r_points_satisfy_side_conditions() {
    let s = scan(&example_reversed(), 128, 1);
    for p in lambda_r(&s, 1).points() {
        let n = s.evaluate(p);
        assert!((n.moduli[0] - n.moduli[1]).abs() < 0.05 * (1.0 + n.moduli[1]));
        assert!(n.moduli[1] > 1.0 - 0.05);
    }
}

#[test]
fn omega_membership_examples() {
    let lap = laplacian();
    assert!(!omega_r_membership(&lap, c(3.0, 0.0), 0).unwrap());
    assert!(omega_r_membership(&lap, c(3.0, 0.0), 1).unwrap());
    assert!(omega_r_membership(&example_coefficients(), c(40.0, 40.0), 2).unwrap());
    assert!(omega_r_membership(&lap, c(1.0, 0.0), 1).is_err());
}

#[test]
fn omega_boundary_follows_sigma_r() {
    for m in [example_coefficients(), example_reversed()] {
        let s = scan(&m, 128, 1);
        for r in 0..=2 {
            let sr = sigma_r(&s, r);
            let b = omega_r_boundary_cells(&s, r);
            assert_eq!(cells_outside_layer(&b, &sr.cells), 0, "r = {r}");
            assert_eq!(cells_outside_layer(&sr.cells, &b), 0, "r = {r}");
        }
    }
}

#[test]
fn open_model_has_two_outliers() {
    let m = example_coefficients();
    let mut found = Vec::new();
    for n in [128, 256] {
        let s = scan(&m, n, 0);
        let lam = lambda_open(&s);
        let out = outliers_open(&s, &example_c(), &lam.arcs, &OutlierOptions::default()).unwrap();
        assert_eq!(out.outliers.len(), 2, "grid {n}");
        for o in &out.outliers {
            assert!(o.residual < 1e-10 * out.scale);
            assert!(distance_to_arcs(o.point, &lam.arcs) > 3.0 * s.h);
        }
        let mut pts: Vec<C64> = out.outliers.iter().map(|o| o.point).collect();
        pts.sort_by(|a, b| a.re.total_cmp(&b.re));
        found.push(pts);
    }
    for (a, b) in found[0].iter().zip(&found[1]) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn open_outliers_match_finite_eigenvalues() {
    let m = example_coefficients();
    let s = scan(&m, 128, 0);
    let lam = lambda_open(&s);
    let out = outliers_open(&s, m.v(), &lam.arcs, &OutlierOptions::default()).unwrap();
    let h = assemble_operator(&m, &BoundaryTriple::open(&m), 55).unwrap();
    let spec = finite_spectrum(&h).unwrap();
    for o in &out.outliers {
        assert!(distance_to_cloud(o.point, &spec.eigenvalues) < 0.1);
    }
    let far = spec
        .eigenvalues
        .iter()
        .filter(|e| distance_to_arcs(**e, &lam.arcs) > 0.1)
        .count();
    assert!(far <= out.outliers.len());
}

#[test]
fn nonvanishing_field_gives_no_outliers() {
    // Circulant laplacian corners: q never vanishes off the interval.
    let lap = laplacian();
    let s = scan(&lap, 64, 1);
    let bd = BoundaryTriple::circulant(&lap);
    let mut arcs = sigma_r(&s, 1).arcs;
    arcs.extend(lambda_r(&s, 1).arcs);
    let out = outliers_perturbed(&s, &bd, 1, &arcs, &OutlierOptions::default()).unwrap();
    assert!(out.outliers.is_empty());
}

#[test]
fn perturbed_outliers_are_excluded_from_arcs() {
    for m in [example_coefficients(), example_reversed()] {
        let s = scan(&m, 128, 1);
        let mut arcs = sigma_r(&s, 1).arcs;
        arcs.extend(lambda_r(&s, 1).arcs);
        let out = outliers_perturbed(
            &s,
            &example_perturbation(),
            1,
            &arcs,
            &OutlierOptions::default(),
        )
        .unwrap();
        for o in &out.outliers {
            assert!(distance_to_arcs(o.point, &arcs) > 3.0 * s.h);
            assert!(o.residual < 1e-10 * out.scale);
        }
    }
}

#[test]
fn finite_spectrum_follows_perturbed_limit_sets() {
    let m = example_coefficients();
    let s = scan(&m, 128, 1);
    let mut arcs = sigma_r(&s, 1).arcs;
    arcs.extend(lambda_r(&s, 1).arcs);
    let out = outliers_perturbed(
        &s,
        &example_perturbation(),
        1,
        &arcs,
        &OutlierOptions::default(),
    )
    .unwrap();
    let spec =
        finite_spectrum(&assemble_operator(&m, &example_perturbation(), 55).unwrap()).unwrap();
    let close = spec
        .eigenvalues
        .iter()
        .filter(|e| {
            distance_to_arcs(**e, &arcs) < 0.1
                || out.outliers.iter().any(|o| (o.point - **e).norm() < 0.1)
        })
        .count();
    assert!(close as f64 >= 0.95 * spec.len() as f64);
}

#[test]
fn limit_spectrum_dispatches_on_boundary_case() {
    let m = example_coefficients();
    let opts = LimitSpectrumOptions {
        nx: 96,
        ny: 96,
        ..Default::default()
    };

    let open = limit_spectrum(&m, &BoundaryTriple::boundary(example_c()), &opts).unwrap();
    assert!(open.arcs.iter().all(|a| a.label == SetLabel::Lambda));
    assert_eq!(open.outliers.len(), 2);
    assert!(open.outliers.iter().all(|o| o.label == SetLabel::GammaC));

    let pert = limit_spectrum(&m, &example_perturbation(), &opts).unwrap();
    assert_eq!(pert.metadata.r, Some(1));
    assert!(pert
        .arcs
        .iter()
        .all(|a| matches!(a.label, SetLabel::SigmaR | SetLabel::LambdaR)));

    let per = limit_spectrum(&m, &BoundaryTriple::circulant(&m), &opts).unwrap();
    assert!(per.arcs.iter().all(|a| a.label == SetLabel::Sigma));
    assert!(per.outliers.is_empty());
    assert_ne!(per.metadata.model_hash, pert.metadata.model_hash);
    assert_eq!(per.metadata.model_hash.len(), 64);
}

#[test]
fn result_serializes_to_documented_layout() {
    let m = example_coefficients();
    let opts = LimitSpectrumOptions {
        nx: 64,
        ny: 64,
        ..Default::default()
    };
    let res = limit_spectrum(&m, &BoundaryTriple::boundary(example_c()), &opts).unwrap();
    let v = res.to_json();
    let arc = &v["arcs"][0];
    assert_eq!(arc["label"], "Lambda");
    assert!(arc["points"][0].as_array().unwrap().len() == 2);
    let o = &v["outliers"][0];
    for key in ["label", "re", "im", "residual", "status"] {
        assert!(!o[key].is_null(), "{key}");
    }
    assert_eq!(o["label"], "Gamma_C");
    assert!(v["metadata"]["model_hash"].is_string());

    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("set_label,r,re,im,aux"));
    assert!(text.lines().filter(|l| l.starts_with("Gamma_C,")).count() == 2);
}
