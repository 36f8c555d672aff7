use flhsions::losses::make_scaled_squared_loss;
use flhsions::oracle::{solve_offline, OracleOptions, VariationBudget};
use flhsions::partition::{
    bin_count_bound, greedy_partition, length_threshold, linear_fit_residuals,
    refine_boundary_touches, residual_decomposition, split_monotonic, write_partition_csv, Bin,
    MonotonicSplit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn column(u: &[f64]) -> Vec<Vec<f64>> {
    u.iter().map(|x| vec![*x]).collect()
}

/// The greedy rule evaluated from scratch for every candidate end.
fn direct_greedy(u: &[f64]) -> Vec<(usize, usize)> {
    let n = u.len();
    let tv = |s: usize, e: usize| -> f64 {
        (s..=e)
            .filter(|j| j + 2 <= e)
            .map(|j| (u[j] - 2.0 * u[j + 1] + u[j + 2]).abs())
            .sum()
    };
    let mut out = Vec::new();
    let mut s = 0;
    while s < n {
        let mut e = s;
        while e + 1 < n && tv(s, e + 1) <= ((e + 2 - s) as f64).powf(-1.5) {
            e += 1;
        }
        out.push((s, e));
        s = e + 1;
    }
    out
}

fn random_offline_optimum(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = rng.random_range(60..240);
    let amp = rng.random_range(0.5..1.6);
    let freq = rng.random_range(10.0..60.0);
    let y: Vec<f64> = (0..n)
        .map(|t| (amp * (t as f64 / freq).sin() + rng.random_range(-0.3..0.3)).clamp(-1.0, 1.0))
        .collect();
    let f: Vec<_> = y.iter().map(|v| make_scaled_squared_loss(&[*v]).unwrap()).collect();
    let c_n = rng.random_range(0.5..30.0);
    let sol = solve_offline(&f, VariationBudget::new(c_n, n).unwrap(), &OracleOptions::default()).unwrap();
    let gm = sol.gamma_minus.iter().map(|g| g[0]).collect();
    let gp = sol.gamma_plus.iter().map(|g| g[0]).collect();
    (sol.coordinate(0), gm, gp)
}

#[test]
fn midpoint_kink_matches_direct_rule() {
    for magnitude in [1.0, 1e-2, 1e-3] {
        let u: Vec<f64> = (0..64).map(|t| magnitude * (t as f64 - 32.0).max(0.0)).collect();
        let p = greedy_partition(&column(&u)).unwrap();
        let got: Vec<(usize, usize)> = p.bins.iter().map(|b| (b.start, b.end)).collect();
        assert_eq!(got, direct_greedy(&u), "magnitude {magnitude}");
    }
    // Magnitude 1 exceeds every threshold, so the kink row (31, 32, 33) cannot
    // sit inside one bin.
    let u: Vec<f64> = (0..64).map(|t| (t as f64 - 32.0).max(0.0)).collect();
    let p = greedy_partition(&column(&u)).unwrap();
    assert_eq!(p.bins[0].end, 32);
}

#[test]
fn greedy_matches_direct_rule_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..50 {
        let n = rng.random_range(3..120);
        let scale = 10f64.powf(rng.random_range(-5.0..-1.0));
        let mut u = vec![0.0; n];
        let mut slope = 0.0;
        for t in 1..n {
            slope += scale * rng.random_range(-1.0..1.0);
            u[t] = u[t - 1] + slope;
        }
        let p = greedy_partition(&column(&u)).unwrap();
        let got: Vec<(usize, usize)> = p.bins.iter().map(|b| (b.start, b.end)).collect();
        assert_eq!(got, direct_greedy(&u));
    }
}

#[test]
fn lines_and_constants_are_single_bins() {
    let line: Vec<f64> = (0..50).map(|t| 0.01 * t as f64).collect();
    assert_eq!(greedy_partition(&column(&line)).unwrap().count, 1);
    assert_eq!(greedy_partition(&column(&[0.2; 9])).unwrap().count, 1);
    assert!(greedy_partition(&column(&[0.0, 1.0])).is_err());
}

#[test]
fn bins_tile_and_satisfy_both_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..20 {
        let (u, _, _) = random_offline_optimum(&mut rng);
        let p = greedy_partition(&column(&u)).unwrap();
        assert_eq!(p.bins[0].start, 0);
        assert_eq!(p.bins.last().unwrap().end, u.len() - 1);
        for w in p.bins.windows(2) {
            assert_eq!(w[0].end + 1, w[1].start);
        }
        let tv = |s: usize, e: usize| -> f64 {
            (s..e.saturating_sub(1)).map(|j| (u[j] - 2.0 * u[j + 1] + u[j + 2]).abs()).sum()
        };
        for (i, b) in p.bins.iter().enumerate() {
            assert_eq!(b.length, b.end - b.start + 1);
            assert!(b.tv1 <= length_threshold(b.length));
            if i + 1 < p.bins.len() {
                assert!(tv(b.start, b.end + 1) > length_threshold(b.length + 1));
            }
        }
        let total: f64 = tv(0, u.len() - 1);
        assert!(p.count as f64 <= bin_count_bound(u.len(), total));
    }
}

#[test]
fn bound_arithmetic() {
    assert_eq!(bin_count_bound(10, 0.0), 1.0);
    let b = bin_count_bound(1024, 1.0 / 32.0);
    assert!((b - (1024f64.powf(0.4) + 1.0)).abs() < 1e-9);
}

#[test]
fn descending_bin_is_cut_at_the_first_lower_touch() {
    let n = 21;
    let u: Vec<f64> = (0..n).map(|t| 1.0 - 2.0 * t as f64 / (n - 1) as f64).collect();
    let zeros = vec![vec![0.0]; n];
    let p = greedy_partition(&column(&u)).unwrap();
    assert_eq!(p.count, 1);
    let r = refine_boundary_touches(&p, &column(&u), &zeros, &zeros).unwrap();
    let got: Vec<(usize, usize)> = r.bins.iter().map(|b| (b.start, b.end)).collect();
    assert_eq!(got, vec![(0, n - 2), (n - 1, n - 1)]);
    assert_eq!(r.refinement_splits, vec![n - 1]);
}

#[test]
fn interior_sequences_are_not_refined() {
    let u: Vec<f64> = (0..40).map(|t| 0.5 * (t as f64 / 6.0).sin()).collect();
    let zeros = vec![vec![0.0]; 40];
    let p = greedy_partition(&column(&u)).unwrap();
    let r = refine_boundary_touches(&p, &column(&u), &zeros, &zeros).unwrap();
    assert_eq!(r.bins, p.bins);
    assert!(r.refinement_splits.is_empty());
}

#[test]
fn refinement_separates_faces_with_few_extra_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let touches = |x: f64, gm: f64, gp: f64| -> i32 {
        if gp > 0.0 || x >= 1.0 - 1e-9 {
            1
        } else if gm > 0.0 || x <= -1.0 + 1e-9 {
            -1
        } else {
            0
        }
    };
    let mut refined_any = false;
    for _ in 0..40 {
        let (u, gm, gp) = random_offline_optimum(&mut rng);
        let p = greedy_partition(&column(&u)).unwrap();
        let r = refine_boundary_touches(&p, &column(&u), &column(&gm), &column(&gp)).unwrap();
        refined_any |= r.count > p.count;
        for b in &r.bins {
            let faces: Vec<i32> = (b.start..=b.end).map(|t| touches(u[t], gm[t], gp[t])).collect();
            assert!(!(faces.contains(&1) && faces.contains(&-1)), "bin {b:?}");
        }
        for b in &p.bins {
            assert!(r.bins.iter().any(|x| x.start == b.start));
            let inside = r.refinement_splits.iter().filter(|s| **s > b.start && **s <= b.end).count();
            assert!(inside <= 2, "{inside} splits in {b:?}");
        }
    }
    assert!(refined_any, "fixtures should exercise the refinement");
}

#[test]
fn monotonic_splits() {
    let bin = |s, e| Bin { start: s, end: e, length: e - s + 1, tv1: 0.0 };
    let line: Vec<f64> = (0..10).map(|t| 0.1 * t as f64).collect();
    assert_eq!(
        split_monotonic(&column(&line), &bin(2, 8), 0).unwrap(),
        MonotonicSplit::Constant { start: 2, end: 8 }
    );
    // Flat head on 0..=3, growing slopes on 4..=6, flat-slope tail after.
    let z = [0.0, 0.0, 0.0, 0.0, 0.1, 0.3, 0.6, 0.6, 0.6, 0.6];
    let mut u = vec![0.0];
    for s in z {
        u.push(u.last().unwrap() + s);
    }
    let s = split_monotonic(&column(&u), &bin(0, 10), 0).unwrap();
    assert_eq!(s, MonotonicSplit::Split { start: 0, b: 3, c: 5, end: 10, increasing: true });
    assert_eq!(s.indices(), vec![0, 3, 4, 5, 6, 10]);
    assert_eq!(s.bins(), vec![(0, 3), (4, 5), (6, 10)]);
    for (a, b) in s.bins() {
        if b > a + 1 {
            let slopes: Vec<f64> = (a..b).map(|j| u[j + 1] - u[j]).collect();
            if (a, b) != (4, 5) {
                assert!(slopes.iter().all(|x| (x - slopes[0]).abs() < 1e-12));
            }
        }
    }
    let wiggle = [0.0, 0.1, 0.0, 0.2, 0.1];
    assert_eq!(split_monotonic(&column(&wiggle), &bin(0, 4), 0).unwrap(), MonotonicSplit::NonMonotonic);
    assert!(split_monotonic(&column(&wiggle), &bin(0, 5), 0).is_err());
}

#[test]
fn residual_examples() {
    let (beta, r) = linear_fit_residuals(&[0.0, 1.0, 2.0], 0, 2).unwrap();
    assert!((beta[0] + 1.0).abs() < 1e-12 && (beta[1] - 1.0).abs() < 1e-12);
    assert!(r.iter().all(|x| x.abs() < 1e-12));
    let line: Vec<f64> = (0..30).map(|t| 0.3 - 0.02 * t as f64).collect();
    let (beta, r) = linear_fit_residuals(&line, 10, 29).unwrap();
    // Local covariate [1, t - 10 + 1]: intercept is u at t = 9.
    assert!((beta[0] - line[9]).abs() < 1e-12 && (beta[1] + 0.02).abs() < 1e-12);
    assert!(r.iter().all(|x| x.abs() < 1e-12));
    assert!(linear_fit_residuals(&line, 4, 4).is_err());
}

#[test]
fn residual_bound_and_decomposition_on_random_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(54);
    for _ in 0..200 {
        let l = rng.random_range(6..=200);
        let mut u: Vec<f64> = vec![rng.random_range(-1.0..1.0)];
        let mut slope: f64 = rng.random_range(-0.01..0.01);
        for _ in 1..l {
            if rng.random_bool(0.05) {
                slope += rng.random_range(-0.02..0.02);
            }
            u.push(u.last().unwrap() + slope);
        }
        let tv: f64 = u.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).sum();
        let (beta, r) = linear_fit_residuals(&u, 0, l - 1).unwrap();
        for (i, ri) in r.iter().enumerate() {
            assert!((ri - (beta[0] + beta[1] * (i + 1) as f64 - u[i])).abs() < 1e-9);
        }
        let worst = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(worst <= 20.0 * l as f64 * tv + 1e-12);
        let (m, c) = residual_decomposition(&r).unwrap();
        for i in 0..l {
            assert!((r[i] - ((i + 1) as f64 * m[i] + c[i])).abs() < 1e-9);
        }
        assert!((m[0] - (r[1] - r[0])).abs() < 1e-15);
        assert!(m[0].abs() <= tv + 1e-12 && m[l - 1].abs() <= tv + 1e-12);
    }
}

#[test]
fn partition_csv_uses_one_based_rounds() {
    let u: Vec<f64> = (0..64).map(|t| (t as f64 - 32.0).max(0.0)).collect();
    let p = greedy_partition(&column(&u)).unwrap();
    let mut buf = Vec::new();
    write_partition_csv(&p, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("start,end,length,tv1"));
    assert!(lines.next().unwrap().starts_with("1,33,33,"));
    assert_eq!(text.lines().count(), p.count + 1);
}
