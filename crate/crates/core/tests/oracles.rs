use mdsd_core::grid::{Extent, GridSpec};
use mdsd_core::interp::{interpolate, uncertainty_weighted_map, InterpConfig, InterpMethod, Sample, SampleSet, Variogram};
use mdsd_core::network::deploy_nodes;
use mdsd_core::synth::Blob;
use mdsd_core::Point;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

// Dense Gauss-Jordan with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

// Ordinary kriging in covariance form, C(h) = sill − γ(h).
fn oracle_krige(points: &[Point], values: &[f64], v: &Variogram, q: Point) -> f64 {
    let sill = v.nugget + v.psill;
    let cov = |h: f64| {
        if h == 0.0 {
            sill
        } else {
            v.psill * (-h / v.range).exp()
        }
    };
    let m = points.len();
    let mut a = vec![vec![0.0; m + 1]; m + 1];
    let mut b = vec![0.0; m + 1];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = cov(points[i].distance(points[j]));
        }
        a[i][m] = 1.0;
        a[m][i] = 1.0;
        b[i] = cov(points[i].distance(q));
    }
    b[m] = 1.0;
    let w = solve(a, b);
    (0..m).map(|i| w[i] * values[i]).sum()
}

#[test]
fn global_kriging_matches_covariance_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points: Vec<Point> = (0..50).map(|_| Point::new(rng.random::<f64>() * 40.0, rng.random::<f64>() * 20.0)).collect();
    let values: Vec<f64> = points.iter().map(|p| (p.x / 9.0).sin() + 0.05 * p.y + 0.1 * rng.random::<f64>()).collect();
    let variogram = Variogram { nugget: 0.02, psill: 0.6, range: 8.0 };
    let spec = GridSpec::new(Extent::from_size(40.0, 20.0).unwrap(), 12, 6).unwrap();
    let cfg = InterpConfig {
        method: InterpMethod::Kriging,
        variogram: Some(variogram),
        max_neighbors: None,
        ..InterpConfig::default()
    };
    let grid = interpolate(&SampleSet::from_values(&points, &values).unwrap(), &spec, &cfg).unwrap();
    for (c, got) in spec.centers().into_iter().zip(&grid.values) {
        let want = oracle_krige(&points, &values, &variogram, c);
        assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{got} vs {want} at {c:?}");
    }
}

#[test]
fn weighted_map_single_cell_by_hand() {
    let samples = SampleSet::new(vec![
        Sample::new(Point::new(0.0, 0.0), 1.0, 1.0),
        Sample::new(Point::new(10.0, 0.0), 2.0, 2.0),
        Sample::new(Point::new(0.0, 10.0), 3.0, 4.0),
    ])
    .unwrap();
    // one cell centred at (5, 5): every d²/L² is 0.5, scaled variances 0.5, 1, 2
    let spec = GridSpec::new(Extent::from_size(10.0, 10.0).unwrap(), 1, 1).unwrap();
    let grid = uncertainty_weighted_map(&samples, &spec, 1.0, 10.0).unwrap();
    assert!((grid.values[0] - 53.0 / 31.0).abs() < 1e-12);
    let plain = uncertainty_weighted_map(&samples, &spec, 0.0, 10.0).unwrap();
    assert!((plain.values[0] - 2.0).abs() < 1e-12);
}

#[test]
fn node_deployment_is_uniform() {
    let area = Extent::from_size(120.0, 60.0).unwrap();
    let mut counts = [0usize; 100];
    for seed in 0..50 {
        for p in deploy_nodes(200, &area, seed).unwrap() {
            let i = ((p.x / 12.0) as usize).min(9);
            let j = ((p.y / 6.0) as usize).min(9);
            counts[j * 10 + i] += 1;
        }
    }
    let expected = 100.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(99.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} above {critical}");
}

#[test]
fn drifting_blob_keeps_its_integral() {
    let blob = Blob {
        center: Point::new(0.0, 0.0),
        velocity: (0.8, -0.3),
        sigma_major: 6.0,
        sigma_minor: 2.5,
        angle: 0.7,
        peak: 1.7,
    };
    let h = 0.25;
    let quad = |t: f64| {
        let c = blob.center_at(t);
        let mut sum = 0.0;
        for i in 0..480 {
            for j in 0..480 {
                let p = Point::new(c.x - 60.0 + (i as f64 + 0.5) * h, c.y - 60.0 + (j as f64 + 0.5) * h);
                sum += blob.value_at(p, t);
            }
        }
        sum * h * h
    };
    let exact = blob.integral();
    for t in [0.0, 50.0, 240.0] {
        let q = quad(t);
        assert!((q - exact).abs() < 1e-6 * exact, "t={t}: {q} vs {exact}");
    }
}
