//! Frozen reference values. Closed forms are checked against independent constants;
//! seeded Monte Carlo and oracle values guard against silent changes in the streams
//! or the numerics.

use std::f64::consts::PI;

use nscascade::cascade::Mode;
use nscascade::estimator::{mc_estimate, RunOptions};
use nscascade::heat::{ball_mass, bilinear_weights, erf, gamma_kernel, heat_kernel};
use nscascade::oracle::{oracle_at, picard_solve, FieldGrid, PicardOptions};
use nscascade::samplers::{tau0_cdf, tau1_cdf};
use nscascade::verify::reference_problem;
use nscascade::Vec3;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn special_functions() {
    assert!(close(erf(1.0), 0.842_700_792_949_714_9, 1e-14));
    assert!(close(erf(0.5), 0.520_499_877_813_046_5, 1e-14));
    // K at |y| = 1/2, T = 0.7
    let want = (2.0 * PI * 0.7f64).powf(-1.5) * (-0.25f64 / 1.4).exp();
    assert!(close(heat_kernel(Vec3::new(0.3, 0.4, 0.0), 0.7).unwrap(), want, 1e-14));
    // mass of K(·, 2νs) in the ball of radius √(2νs): P(χ₃ < 1)
    let chi3 = erf(std::f64::consts::FRAC_1_SQRT_2) - (2.0 / PI).sqrt() * (-0.5f64).exp();
    assert!(close(ball_mass(1.0, 0.5).unwrap(), chi3, 1e-13));
    assert!(close(chi3, 0.198_748_043_098_799, 1e-12));
}

#[test]
fn waiting_time_cdfs() {
    // F₁(s) = erfc(a/(2√(νs)))
    assert!(close(tau1_cdf(0.5, 0.8, 1.0), 1.0 - erf(0.8 / (2.0 * 0.5f64.sqrt())), 1e-13));
    assert!(close(tau1_cdf(0.5, 0.8, 1.0), 4.237_107_971_667_933e-1, 1e-12));
    assert!(close(tau0_cdf(0.5, 0.8, 1.0), 8.872_172_815_851_657e-1, 1e-12));
}

#[test]
fn oseen_and_bilinear_weights() {
    let g = gamma_kernel(Vec3::new(0.3, -0.4, 0.8), 1.0, 1.0).unwrap();
    let want = [
        [0.011_583_970_775_748_693, -0.000_230_058_240_546_555_5, 0.000_460_116_481_093_311],
        [-0.000_230_058_240_546_555_5, 0.011_718_171_416_067_576, -0.000_613_488_641_457_748_6],
        [0.000_460_116_481_093_311, -0.000_613_488_641_457_748_6, 0.012_638_404_378_254_2],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!(close(g.0[i][j], want[i][j], 1e-12), "Γ[{i}][{j}] = {}", g.0[i][j]);
        }
    }
    let (w1, w2) = bilinear_weights(0.7, 0.3, 1.0);
    assert!(close(w1, 0.052_976_492_686_835_804, 1e-12));
    assert!(close(w2, -0.023_904_927_046_245_12, 1e-12));
}

#[test]
fn theorem_scaled_reference_pair() {
    let spec = reference_problem(Mode::Xi).unwrap();
    assert!(close(spec.pair.gamma, 8.0 * PI * 0.5 / 11.0, 1e-12));
    assert!(close(spec.pair.gamma_tilde, PI, 1e-12));
    assert!(close(spec.pair.h.eval(Vec3::E1), 3.684_406_677_903_192e-2, 1e-12));
}

#[test]
fn seeded_estimates() {
    let x = Vec3::new(1.0, 0.0, 0.0);
    let xi = mc_estimate(x, 0.5, &reference_problem(Mode::Xi).unwrap(), RunOptions::new(20_000, 1, 1)).unwrap();
    assert!(close(xi.u.x2, 7.073_072_302_777_753e-4, 1e-10), "{:e}", xi.u.x2);
    assert!(close(xi.stderr.x2, 1.228_061_155_204_148_9e-6, 1e-9));
    assert_eq!(xi.kappa_counts, [3238, 13308, 19903, 18305, 18262]);
    let up = mc_estimate(x, 0.5, &reference_problem(Mode::Upsilon).unwrap(), RunOptions::new(20_000, 1, 1)).unwrap();
    assert!(close(up.u.x2, 7.015_217_164_413_599e-4, 1e-10), "{:e}", up.u.x2);
}

#[test]
fn picard_reference_value() {
    let spec = reference_problem(Mode::Xi).unwrap();
    let grid = FieldGrid::new(0.0625, 16.0, 9, 5, &[0.125, 0.25, 0.5, 1.0, 2.0]).unwrap();
    let opts = PicardOptions { n_polar: 8, n_azimuth: 12, ..Default::default() };
    let (f, rep) = picard_solve(&spec, &grid, &opts).unwrap();
    let u = oracle_at(&f, Vec3::E1, 0.5).unwrap();
    assert!(close(u.x2, 7.093_298_480_324_608e-4, 1e-8), "{:e}", u.x2);
    assert!(close(u.x1, 7.828_405_518_896_186e-8, 1e-5), "{:e}", u.x1);
    assert!(u.x3.abs() < 1e-18);
    assert!(rep.diffs[1] < 1e-6 && rep.diffs.last().copied().unwrap() < 1e-15);
}
