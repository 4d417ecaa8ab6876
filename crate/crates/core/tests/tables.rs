mod common;

use common::{q, rel_close, to_f64};
use tropsamp::hepp::ensemble_sum_oracle;
use tropsamp::series::{cross_check_tables, solve_gamma_tr};
use tropsamp::{CoefficientTables, Error, Mode, Rational};

fn compare_with_oracle(k: usize, d: Rational, mode: Mode, cells: &[(usize, usize)]) {
    let t = CoefficientTables::build(k, to_f64(&d), mode, 3, 10).unwrap();
    for &(l, n) in cells {
        let exact = ensemble_sum_oracle(k, &d, l, n, mode).unwrap();
        assert!(
            rel_close(t.z(l, n), to_f64(&exact), 1e-10),
            "k={k} D={d} ({l},{n}): table {} oracle {exact}",
            t.z(l, n)
        );
    }
}

#[test]
fn phi3_cells_match_enumeration() {
    let cells = [(0, 3), (0, 4), (1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3)];
    compare_with_oracle(3, q(3, 1), Mode::Plain, &cells);
    compare_with_oracle(3, q(7, 2), Mode::Plain, &cells);
}

#[test]
fn phi4_positive_cells_match_enumeration() {
    let cells = [(0, 4), (1, 2), (1, 4), (1, 6), (2, 2), (2, 4), (2, 6)];
    compare_with_oracle(4, q(4, 1), Mode::Positive, &cells);
}

#[test]
fn signed_cells_below_a_pole() {
    // ω(1,2) = −1/2 at D = 5: the plain ensemble is signed.
    let t = CoefficientTables::build(3, 5.0, Mode::Plain, 1, 8).unwrap();
    for (l, n) in [(1, 2), (1, 3), (1, 4), (1, 5)] {
        let exact = to_f64(&ensemble_sum_oracle(3, &q(5, 1), l, n, Mode::Plain).unwrap());
        assert!(rel_close(t.z(l, n), exact, 1e-10), "({l},{n})");
    }
    assert_eq!(t.z(1, 2), -2.0);
    assert!(t.alias(1, 2).is_none());
    let err = CoefficientTables::build(3, 5.0, Mode::Plain, 2, 8).unwrap_err();
    assert!(matches!(err, Error::NonGenericDimension { what } if what.contains("L=2, n=2")));
}

#[test]
fn tables_agree_with_the_series() {
    let d = q(7, 2);
    let s = solve_gamma_tr(3, 3, &d, 4, 3).unwrap();
    let t = CoefficientTables::build(3, 3.5, Mode::Plain, 4, 11).unwrap();
    let r = cross_check_tables(&s, &t, 4).unwrap();
    assert!(r.passed(), "{:?}", r.failures);
    assert!(r.checked >= 15, "{r:?}");
}

#[test]
fn recursion_residuals_to_fifty_loops() {
    for (k, d, mode) in [(3, 3.0, Mode::Plain), (4, 4.0, Mode::Positive), (3, 3.5, Mode::Plain), (5, 2.5, Mode::Plain)] {
        let t = CoefficientTables::build(k, d, mode, 50, 104).unwrap();
        let r = t.recursion_residual();
        assert!(r <= 1e-12, "k={k} D={d} {mode}: {r}");
    }
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi4.json");
    let t = CoefficientTables::build(4, 4.0, Mode::Positive, 8, 20).unwrap();
    t.save(&path).unwrap();
    let u = CoefficientTables::load_expecting(&path, 4, 4.0, Mode::Positive).unwrap();
    for l in 0..=8 {
        for n in 0..=20 {
            assert_eq!(t.z(l, n).to_bits(), u.z(l, n).to_bits());
            assert_eq!(t.b(l, n).to_bits(), u.b(l, n).to_bits());
            assert_eq!(t.z_top(l, n), u.z_top(l, n));
        }
    }
    assert!(matches!(
        CoefficientTables::load_expecting(&path, 4, 4.0, Mode::Plain),
        Err(Error::Format(_))
    ));
    assert!(matches!(
        CoefficientTables::load(&dir.path().join("missing.json")),
        Err(Error::Io(_))
    ));
}

#[test]
fn fifty_loop_phi4_build_is_fast() {
    let start = std::time::Instant::now();
    let t = CoefficientTables::build_for_sector(4, 4.0, Mode::Positive, 50, 4).unwrap();
    assert!(start.elapsed().as_secs_f64() < 1.0);
    assert!(t.z_top(50, 4) > 0.0 && t.z_top(50, 4).is_finite());
}
