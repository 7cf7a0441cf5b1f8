use std::path::Path;

use hapdyad_core::special::{phi, probit};
use hapdyad_core::stats::t_cdf;

fn grid(name: &str) -> Vec<Vec<f64>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect()
}

#[test]
fn normal_cdf_matches_high_precision_grid() {
    let rows = grid("normal_cdf_grid.csv");
    assert!(rows.len() > 500);
    for row in rows {
        let (z, want) = (row[0], row[1]);
        let got = phi(z);
        let tol = 1e-15_f64.max(1e-13 * want);
        assert!((got - want).abs() <= tol, "z={z}: {got} vs {want}");
    }
}

// Only the lower half: above 0.5 the rounding of p itself dominates.
#[test]
fn probit_inverts_grid_values() {
    for row in grid("normal_cdf_grid.csv") {
        let (z, p) = (row[0], row[1]);
        if z > 0.0 {
            continue;
        }
        let back = probit(p).unwrap();
        assert!((back - z).abs() <= 1e-9 * z.abs().max(1.0), "p={p}: {back} vs {z}");
    }
}

#[test]
fn t_cdf_matches_high_precision_grid() {
    let rows = grid("t_cdf_grid.csv");
    assert_eq!(rows.len(), 1000);
    let worst = rows
        .iter()
        .map(|r| (t_cdf(r[0], r[1]).unwrap() - r[2]).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-10, "worst {worst}");
}
