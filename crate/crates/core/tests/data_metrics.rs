use d2gan::data::*;
use d2gan::metrics::*;
use ndarray::{Array2, Axis};
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

fn points(rng: &mut Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, 2), |_| 4.0 * rng.uniform() - 2.0)
}

#[test]
fn mode_counts_are_binomial() {
    let spec = RingSpec::default();
    let mut rng = Rng::new(1, Stream::Data);
    let x = sample_ring(&spec, 100_000, &mut rng);
    let rep = mode_coverage(x.view(), &spec).unwrap();
    let sd = (100_000.0f64 * 0.125 * 0.875).sqrt();
    for &c in &rep.assigned {
        assert!((c as f64 - 12_500.0).abs() < 4.0 * sd, "{:?}", rep.assigned);
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    assert!(mean[0].abs() < 0.02 && mean[1].abs() < 0.02, "{mean}");
}

#[test]
fn ring_second_moment() {
    let spec = RingSpec::default();
    let mut rng = Rng::new(2, Stream::Data);
    let x = sample_ring(&spec, 1_000_000, &mut rng);
    let expect = spec.radius * spec.radius / 2.0 + spec.covariance_scale;
    for j in 0..2 {
        let m2 = x.column(j).mapv(|v| v * v).mean().unwrap();
        assert!((m2 - expect).abs() / expect < 0.01, "{m2} vs {expect}");
    }
}

#[test]
fn noise_moments() {
    let mut rng = Rng::new(3, Stream::Noise);
    let z = sample_noise(1000, 1000, &mut rng);
    let mean = z.mean().unwrap();
    let var = z.mapv(|v| v * v).mean().unwrap() - mean * mean;
    assert!(mean.abs() < 0.01 && (var - 1.0).abs() < 0.01, "{mean} {var}");
}

fn brute_force_cost(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    fn rec(a: &Array2<f64>, b: &Array2<f64>, i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if i == a.nrows() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.nrows() {
            if !used[j] {
                used[j] = true;
                let d = (a[[i, 0]] - b[[j, 0]]).hypot(a[[i, 1]] - b[[j, 1]]);
                rec(a, b, i + 1, used, acc + d, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(a, b, 0, &mut vec![false; b.nrows()], 0.0, &mut best);
    best / a.nrows() as f64
}

#[test]
fn wasserstein_matches_brute_force_on_eight_points() {
    let mut rng = Rng::new(4, Stream::Eval);
    for _ in 0..50 {
        let a = points(&mut rng, 8);
        let b = points(&mut rng, 8);
        let w = wasserstein(a.view(), b.view()).unwrap();
        let bf = brute_force_cost(&a, &b);
        assert!((w - bf).abs() < 1e-12 * (1.0 + bf), "{w} vs {bf}");
    }
}

#[test]
fn wasserstein_is_a_metric_on_sample_sets() {
    let mut rng = Rng::new(5, Stream::Eval);
    for _ in 0..20 {
        let (a, b, c) = (points(&mut rng, 32), points(&mut rng, 32), points(&mut rng, 32));
        let w = |x: &Array2<f64>, y: &Array2<f64>| wasserstein(x.view(), y.view()).unwrap();
        assert!(w(&a, &a).abs() < 1e-12);
        assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-12);
        assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-12);
        let shifted = &a + &ndarray::array![[0.3, -0.7]];
        let shifted_b = &b + &ndarray::array![[0.3, -0.7]];
        assert!((w(&shifted, &shifted_b) - w(&a, &b)).abs() < 1e-12);
    }
}

/// Symmetric KL between the ring and the ring blurred by an isotropic kernel
/// of variance `h`, by grid quadrature.
fn blurred_ring_sym_kl(spec: &RingSpec, h: f64) -> f64 {
    let wider = RingSpec {
        covariance_scale: spec.covariance_scale + h,
        ..*spec
    };
    let (lo, hi, n) = (-6.0, 6.0, 1200);
    let step = (hi - lo) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = [lo + (i as f64 + 0.5) * step, lo + (j as f64 + 0.5) * step];
            let (lp, lq) = (ring_log_density(spec, x), ring_log_density(&wider, x));
            total += (lp.exp() - lq.exp()) * (lp - lq);
        }
    }
    total * step * step
}

#[test]
fn kde_floor_on_true_samples_matches_quadrature() {
    let spec = RingSpec::default();
    let n = 4000;
    let mut rng = Rng::new(6, Stream::Eval);
    let x = sample_ring(&spec, n, &mut rng);
    let est = symmetric_kl(x.view(), &spec).unwrap();
    // Scott bandwidth with the population covariance of the ring
    let h = (n as f64).powf(-1.0 / 3.0) * (spec.radius * spec.radius / 2.0 + spec.covariance_scale);
    let oracle = blurred_ring_sym_kl(&spec, h);
    assert!((est - oracle).abs() / oracle < 0.15, "estimate {est}, quadrature {oracle}");
}

#[test]
fn one_mode_is_far_from_the_ring() {
    let spec = RingSpec::default();
    let mut rng = Rng::new(7, Stream::Eval);
    let c = spec.center(0);
    let x = Array2::from_shape_fn((512, 2), |(_, j)| c[j] + spec.std_dev() * rng.normal());
    assert!(symmetric_kl(x.view(), &spec).unwrap() > 2.0);
    assert_eq!(mode_coverage(x.view(), &spec).unwrap().modes_covered, 1);
}

#[test]
fn kl_estimate_falls_with_sample_size() {
    let spec = RingSpec::default();
    let mut rng = Rng::new(8, Stream::Eval);
    let kl: Vec<f64> = [500, 2000, 8000]
        .iter()
        .map(|&n| symmetric_kl(sample_ring(&spec, n, &mut rng).view(), &spec).unwrap())
        .collect();
    assert!(kl[0] > kl[1] && kl[1] > kl[2], "{kl:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn metrics_ignore_sample_order(seed in 0u64..1000) {
        let spec = RingSpec::default();
        let mut rng = Rng::new(seed, Stream::Eval);
        let x = sample_ring(&spec, 200, &mut rng);
        let y = sample_ring(&spec, 200, &mut rng);
        let mut perm: Vec<usize> = (0..200).collect();
        for i in (1..200).rev() {
            perm.swap(i, rng.index(i + 1));
        }
        let xp = x.select(Axis(0), &perm);
        prop_assert!((wasserstein(x.view(), y.view()).unwrap() - wasserstein(xp.view(), y.view()).unwrap()).abs() < 1e-9);
        prop_assert_eq!(mode_coverage(x.view(), &spec).unwrap(), mode_coverage(xp.view(), &spec).unwrap());
        // the KL estimate draws from the KDE by sample index, so order only
        // moves it within Monte Carlo error
        let a = symmetric_kl(x.view(), &spec).unwrap();
        let b = symmetric_kl(xp.view(), &spec).unwrap();
        prop_assert!((a - b).abs() < 0.02 * a.abs(), "{} vs {}", a, b);
    }
}
