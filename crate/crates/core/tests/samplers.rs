//! Distributional tests of the samplers at 1% level with fixed seeds.

use nscascade::kernels::{make_H_pair, make_Hp_pair, make_h0_pair, make_h1_pair, Kernel};
use nscascade::rng::RngStream;
use nscascade::samplers::{
    kappa_probabilities, sample_hbm_endpoint, sample_kappa, sample_tau0, sample_tau1, sample_y_given_z, tau0_cdf, tau1_cdf,
    Branch,
};
use nscascade::verify::{chi_square, hbm_chi_square, ks_p_value, ks_statistic, z_chi_square};
use nscascade::Vec3;

const LEVEL: f64 = 0.01;

#[test]
fn kappa_frequencies() {
    for (p, seed) in [(0.5, 1), (0.25, 2), (0.05, 3)] {
        let mut rng = RngStream::from_seed(seed);
        let mut counts = [0u64; 5];
        for _ in 0..50_000 {
            counts[(sample_kappa(p, &mut rng).unwrap().0 - 1) as usize] += 1;
        }
        let (_, pv) = chi_square(&counts, &kappa_probabilities(p).unwrap()).unwrap();
        assert!(pv >= LEVEL, "p = {p}: {counts:?}, p-value {pv}");
    }
}

#[test]
fn waiting_times_at_several_levels() {
    let mut rng = RngStream::from_seed(10);
    for (a, nu) in [(0.05, 1.0), (1.0, 0.3), (3.0, 2.0)] {
        let n = 20_000;
        let mut s1: Vec<f64> = (0..n).map(|_| sample_tau1(a, nu, &mut rng).unwrap()).collect();
        let mut s0: Vec<f64> = (0..n).map(|_| sample_tau0(a, nu, &mut rng).unwrap()).collect();
        let p1 = ks_p_value(ks_statistic(&mut s1, |s| tau1_cdf(s, a, nu)), n);
        let p0 = ks_p_value(ks_statistic(&mut s0, |s| tau0_cdf(s, a, nu)), n);
        assert!(p1 >= LEVEL && p0 >= LEVEL, "a = {a}, ν = {nu}: p = {p1}, {p0}");
    }
}

#[test]
fn waiting_times_reject_bad_levels() {
    let mut rng = RngStream::from_seed(1);
    assert!(sample_tau1(0.0, 1.0, &mut rng).is_err());
    assert!(sample_tau0(1.0, -1.0, &mut rng).is_err());
    assert!(sample_tau1(f64::NAN, 1.0, &mut rng).is_err());
}

#[test]
fn y_given_z_radius_and_direction() {
    let z = Vec3::new(0.3, -1.2, 0.5);
    let r = z.norm();
    let mut rng = RngStream::from_seed(20);
    let n = 20_000;
    let mut u = Vec::with_capacity(n);
    let mut mean = Vec3::ZERO;
    for _ in 0..n {
        let y = sample_y_given_z(z, &mut rng).unwrap();
        u.push((y.norm() / r).powi(2));
        mean += y / y.norm();
    }
    let p = ks_p_value(ks_statistic(&mut u, |v| v.clamp(0.0, 1.0)), n);
    assert!(p >= LEVEL, "(|Y|/|Z|)² not uniform: p = {p}");
    // mean of n unit vectors has per-component sd 1/√(3n)
    assert!((mean / n as f64).max_abs() <= 4.0 / (3.0 * n as f64).sqrt());
    assert!(sample_y_given_z(Vec3::ZERO, &mut rng).is_err());
}

#[test]
fn z_bins_for_h0_at_several_points() {
    let pair = make_h0_pair(Kernel::tail_profile(1.0)).unwrap().theorem_scaled(1.0, 0.5).unwrap();
    for (i, x) in [Vec3::new(0.05, 0.0, 0.0), Vec3::new(3.0, -2.0, 1.0)].into_iter().enumerate() {
        for b in [Branch::Bilinear, Branch::Forcing] {
            let (stat, p, bins) = z_chi_square(&pair, x, b, 30_000, 30 + i as u64).unwrap();
            assert!(p >= LEVEL, "x = {x:?}, {b:?}: χ² = {stat} on {bins} bins, p = {p}");
        }
    }
}

#[test]
fn z_bins_for_other_kernels() {
    let x = Vec3::new(0.8, 0.4, -0.6);
    for (k, pair) in [make_H_pair(), make_Hp_pair(1.5).unwrap(), make_h1_pair()].into_iter().enumerate() {
        let (stat, p, bins) = z_chi_square(&pair, x, Branch::Bilinear, 30_000, 40 + k as u64).unwrap();
        assert!(p >= LEVEL, "{}: χ² = {stat} on {bins} bins, p = {p}", pair.name);
    }
}

#[test]
fn endpoint_law_near_and_far() {
    let pair = make_h0_pair(Kernel::tail_profile(1.0)).unwrap();
    for (i, (x, t)) in [(Vec3::new(0.1, 0.0, 0.05), 1.0), (Vec3::new(2.0, 1.0, 0.0), 0.05)].into_iter().enumerate() {
        let (stat, p, trap, _) = hbm_chi_square(&pair, x, t, 0.7, 30_000, 50 + i as u64).unwrap();
        assert!(p >= LEVEL, "x = {x:?}, t = {t}: χ² = {stat}, p = {p}, trap mass {trap}");
    }
}

#[test]
fn endpoint_needs_an_excessive_pair() {
    let mut rng = RngStream::from_seed(1);
    assert!(sample_hbm_endpoint(Vec3::E1, 1.0, &make_H_pair(), 1.0, &mut rng).is_err());
    let h0 = make_h0_pair(Kernel::zero()).unwrap();
    assert!(sample_hbm_endpoint(Vec3::E1, 0.0, &h0, 1.0, &mut rng).is_err());
}
