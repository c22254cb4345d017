use super::*;
use crate::grid::Grid;
use crate::restriction::BodyPath;

fn restrictor(n: usize) -> Restrictor {
    Restrictor::new(&Grid::new(2, n, 1.0).unwrap())
}

#[test]
fn extension_and_restriction_bounds_are_uniform() {
    let r = restrictor(128);
    let phi = fields::smooth_flow(r.grid());
    let radii = [1.0 / 10.0, 1.0 / 16.0, 1.0 / 24.0, 1.0 / 40.0];
    for mode in [BoundMode::Extension, BoundMode::Restriction] {
        let rep = uniform_bound_sweep(&r, &phi, &[[0.4, 0.55, 0.0]], &radii, &[2.0, 4.0], mode).unwrap();
        assert_eq!(rep.rows.len(), 8);
        // 1/40 is 3.2 nodes per radius
        assert_eq!(rep.flagged.iter().filter(|&&f| f).count(), 2);
        assert!(rep.passed(), "{mode:?}\n{}", rep.summary());
    }
}

#[test]
fn multi_body_bound_is_uniform() {
    let r = restrictor(256);
    let phi = fields::random_solenoidal(r.grid(), 5, 10, 3);
    let centers = [[0.3, 0.3, 0.0], [0.32, 0.31, 0.0]];
    let radii = [1.0 / 48.0, 1.0 / 64.0, 1.0 / 96.0];
    let rep = uniform_bound_sweep(&r, &phi, &centers, &radii, &[2.0], BoundMode::Multi).unwrap();
    assert!(rep.passed(), "{}", rep.summary());
}

#[test]
fn identical_fields_have_unit_ratio() {
    assert_eq!(ratio(0.0, 0.0), 1.0);
    assert_eq!(spread(&[2.0, 1.0, 1.5]), 2.0);
}

#[test]
fn error_decays_at_least_like_the_volume() {
    let r = restrictor(128);
    let phi = fields::smooth_flow(r.grid());
    let eps = [1.0 / 8.0, 1.0 / 11.0, 1.0 / 16.0, 1.0 / 22.0, 1.0 / 40.0];
    let rep = error_decay_study(&r, &phi, &[[0.5, 0.5, 0.0]], &eps, 2.0).unwrap();
    assert_eq!(rep.flagged, vec![false, false, false, false, true]);
    assert!(rep.passed(), "{}", rep.summary());
    assert!(rep.fit.unwrap().slope >= 1.0 - THRESHOLDS.slope_margin);
}

#[test]
fn decay_needs_enough_resolved_points() {
    let r = restrictor(64);
    let phi = fields::smooth_flow(r.grid());
    let rep = error_decay_study(&r, &phi, &[[0.5, 0.5, 0.0]], &[1.0 / 8.0, 1.0 / 12.0], 2.0).unwrap();
    assert_eq!(rep.verdict("resolved_points").unwrap().outcome, Outcome::Fail);
}

#[test]
fn remainder_is_local_and_decays() {
    let r = restrictor(128);
    let phi = fields::smooth_flow(r.grid());
    let path = BodyPath::constant_velocity(&[[0.4, 0.5, 0.0]], &[[0.2, 0.1, 0.0]], 0.0, 0.5).unwrap();
    let eps = [1.0 / 9.0, 1.0 / 13.0, 1.0 / 18.0, 1.0 / 26.0];
    let rep = remainder_bound_check(&r, &phi, &path, &eps, &[0.0, 0.25, 0.5], 2.0).unwrap();
    assert_eq!(rep.rows.len(), 12);
    assert!(rep.passed(), "{}", rep.summary());
}

#[test]
fn remainder_terms_match_center_gradient() {
    let r = restrictor(128);
    let phi = fields::random_solenoidal(r.grid(), 2, 8, 3);
    let cfg = RestrictionConfig::new(vec![[0.5, 0.5, 0.0], [0.52, 0.5, 0.0]], 1.0 / 40.0);
    let (a, b) = remainder_terms(&r, &phi, &cfg, 0).unwrap();
    let g = r.center_gradient(&phi, &cfg, 0).unwrap();
    assert!((&(&b - &a) - &g).max_abs() <= 1e-12 * g.max_abs().max(1.0));
    let w = remainder_weight(&a, &b);
    assert!(w.data().iter().all(|&x| x >= 0.0));
}

#[test]
fn arrangements_have_the_requested_geometry() {
    let g = Grid::new(2, 128, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let radii = [0.01, 0.05];
    let c = arrange_centers(&g, &mut rng, Arrangement::Touching, &radii);
    assert!((g.wrapped_distance(&c[0], &c[1]) - 0.02).abs() < 1e-12);
    let c = arrange_centers(&g, &mut rng, Arrangement::Colliding, &radii);
    assert_eq!(c[0], c[1]);
    let c = arrange_centers(&g, &mut rng, Arrangement::Nested, &radii);
    assert!(g.wrapped_distance(&c[0], &c[1]) < 0.01);
    let c = arrange_centers(&g, &mut rng, Arrangement::Far, &radii);
    assert!(g.wrapped_distance(&c[0], &c[1]) > 0.12);
}

#[test]
fn ball_constancy_holds_with_ratio_five() {
    let r = restrictor(256);
    let rep = lemma_b1_suite(&r, 7, 12, RADIUS_RATIO).unwrap();
    assert_eq!(rep.rows.len(), 12);
    assert!(rep.passed(), "{}", rep.summary());
}

#[test]
fn ratio_three_breaks_constancy() {
    let r = restrictor(256);
    let rep = lemma_b1_suite(&r, 7, 12, 3.0).unwrap();
    assert_eq!(rep.verdict("constancy").unwrap().outcome, Outcome::ExpectedNegative);
    assert_eq!(rep.verdict("outside_identity").unwrap().outcome, Outcome::Pass);
}

#[test]
fn same_seed_same_suite() {
    let r = restrictor(256);
    let a = lemma_b1_suite(&r, 3, 3, RADIUS_RATIO).unwrap();
    let b = lemma_b1_suite(&r, 3, 3, RADIUS_RATIO).unwrap();
    assert_eq!(a.rows, b.rows);
    assert!(matches!(lemma_b1_suite(&restrictor(128), 3, 3, RADIUS_RATIO), Err(Error::Resolution(_))));
}

#[test]
fn derivative_check_shapes() {
    let r = restrictor(128);
    let phi = fields::smooth_flow(r.grid());
    let path = BodyPath::constant_velocity(
        &[[0.5, 0.5, 0.0], [0.52, 0.49, 0.0]],
        &[[0.4, 0.0, 0.0], [0.0, -0.3, 0.0]],
        0.0,
        1.0,
    )
    .unwrap();
    let (centers, time) = derivative_check(&r, &phi, &path, 1.0 / 50.0, 0.5).unwrap();
    assert_eq!(centers.columns, vec!["axis", "residual_body0", "residual_body1"]);
    assert_eq!(centers.rows.len(), 2);
    assert_eq!(time.rows.len(), 1);
    // coarse: only the order of magnitude is meaningful here
    assert!(centers.rows.iter().flat_map(|r| &r[1..]).all(|&g| g < 0.5));
}

#[test]
fn resting_bodies_have_no_time_residual() {
    let r = restrictor(64);
    let phi = fields::smooth_flow(r.grid());
    let path = BodyPath::constant_velocity(&[[0.5, 0.5, 0.0]], &[[0.0; 3]], 0.0, 1.0).unwrap();
    let (_, time) = derivative_check(&r, &phi, &path, 0.1, 0.5).unwrap();
    assert_eq!(time.rows[0][2], 0.0);
}
