//! Independent numerical routes for the closed-form results: trapezoid
//! quadrature for the Gaussian null probabilities, an FFT-convolution power
//! iteration for the band-limiting eigenvalue, and dense materialization of
//! the banded joint distributions.

mod common;

use common::{normal_cdf, rng, trapezoid_gaussian_mass};
use eurlab::continuous::{
    analytic_overlap, slepian_overlap_oracle, IntervalBinSpec, QuadratureRule, SlepianGrid,
};
use eurlab::states::{
    frequency_marginal_std, joint_time_banded, null_prob_frequency, null_prob_time,
    time_marginal_std, ChannelModel, GaussianBiphoton, TimeStdConvention,
};
use num_complex::Complex64;
use rand::Rng;

const TRAPEZOID_POINTS: usize = 200_000;

#[test]
fn time_null_probability_matches_trapezoid_quadrature() {
    let mut rng = rng(0x0417);
    for k in 0..100 {
        let sigma_coh = 10f64.powf(rng.random_range(-9.5..-7.5));
        let sigma_cor = sigma_coh * 10f64.powf(rng.random_range(-3.0..-0.7));
        let conv = if k % 2 == 0 {
            TimeStdConvention::PaperCalibrated
        } else {
            TimeStdConvention::DirectEq11
        };
        let src = GaussianBiphoton::new(sigma_coh, sigma_cor, 1.2e15, conv).unwrap();
        let std = time_marginal_std(sigma_coh, sigma_cor, conv);
        let t_c = rng.random_range(0.5..5.0) * std;
        let inside = trapezoid_gaussian_mass(0.0, std, -t_c, t_c, TRAPEZOID_POINTS);
        let oracle = 1.0 - inside;
        let lib = null_prob_time(&src, t_c).unwrap();
        assert!((0.0..=1.0).contains(&lib));
        assert!(
            (lib - oracle).abs() <= 1e-8,
            "draw {k}: lib {lib} vs quadrature {oracle}"
        );
    }
}

#[test]
fn frequency_null_probability_matches_trapezoid_quadrature() {
    let mut rng = rng(0x0F17);
    for k in 0..100 {
        let sigma_coh = 10f64.powf(rng.random_range(-9.5..-7.5));
        let sigma_cor = sigma_coh * 10f64.powf(rng.random_range(-3.0..-0.7));
        let src = GaussianBiphoton::new(
            sigma_coh,
            sigma_cor,
            1.2e15,
            TimeStdConvention::PaperCalibrated,
        )
        .unwrap();
        let std = frequency_marginal_std(sigma_coh, sigma_cor);
        let omega_o = src.omega_o();
        let offset = rng.random_range(-2.0..2.0) * std;
        // The window must contain the carrier, so it at least covers the
        // offset itself.
        let half = offset.abs() + rng.random_range(0.1..6.0) * std;
        let center = omega_o + offset;
        let (lo, hi) = (center - half, center + half);
        let inside = trapezoid_gaussian_mass(omega_o, std, lo, hi, TRAPEZOID_POINTS);
        let oracle = 1.0 - inside;
        let lib = null_prob_frequency(&src, lo, hi).unwrap();
        assert!((0.0..=1.0).contains(&lib));
        assert!(
            (lib - oracle).abs() <= 1e-8,
            "draw {k}: lib {lib} vs quadrature {oracle}"
        );
    }
}

/// Largest eigenvalue of the band-limiting operator restricted to a time
/// interval, computed by power iteration with the sinc-kernel convolution
/// done via zero-padded FFTs. Independent of the library's quadrature
/// eigensolver in both discretization and algorithm.
fn fft_overlap(delta_omega: f64, delta_t: f64) -> f64 {
    use rustfft::FftPlanner;
    let n = 4096usize;
    let m = 2 * n;
    let h = delta_t / n as f64;
    let kernel = |u: f64| -> f64 {
        if u.abs() < 1e-300 {
            delta_omega / (2.0 * std::f64::consts::PI)
        } else {
            (0.5 * delta_omega * u).sin() / (std::f64::consts::PI * u)
        }
    };

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);

    // Toeplitz symbol of h·k((i−j)h), laid out circularly; size 2n leaves
    // every difference a distinct residue, so the convolution is linear.
    let mut khat = vec![Complex64::new(0.0, 0.0); m];
    khat[0] = Complex64::new(kernel(0.0) * h, 0.0);
    for d in 1..n {
        let v = kernel(d as f64 * h) * h;
        khat[d] = Complex64::new(v, 0.0);
        khat[m - d] = Complex64::new(v, 0.0);
    }
    fwd.process(&mut khat);

    let mut v = vec![1.0_f64; n];
    let mut lambda = 0.0;
    for _ in 0..120 {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (b, &x) in buf.iter_mut().zip(&v) {
            *b = Complex64::new(x, 0.0);
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&khat) {
            *b *= *k;
        }
        inv.process(&mut buf);
        let w: Vec<f64> = buf[..n].iter().map(|c| c.re / m as f64).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        lambda = vw / vv;
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / norm).collect();
    }
    lambda
}

#[test]
fn fft_power_iteration_confirms_the_band_limiting_eigenvalue() {
    let delta_t = 2e-11;
    for product_over_two_pi in [1e-3, 1e-1, 1.0] {
        let delta_omega = 2.0 * std::f64::consts::PI * product_over_two_pi / delta_t;
        let by_fft = fft_overlap(delta_omega, delta_t);
        let analytic = analytic_overlap(delta_omega, delta_t).unwrap();
        let rel = (by_fft - analytic).abs() / analytic;
        assert!(
            rel < 1e-2,
            "product {product_over_two_pi}: fft {by_fft} vs analytic {analytic}"
        );
    }

    // Triple route at the published operating point: Gauss-Legendre Nystrom
    // (above), midpoint Nystrom, and the FFT iteration must all agree.
    let delta_omega = 2.0 * std::f64::consts::PI * 1e-3 / delta_t;
    let midpoint_grid = SlepianGrid::new(96, QuadratureRule::CompositeMidpoint).unwrap();
    let by_quadrature = slepian_overlap_oracle(delta_omega, delta_t, midpoint_grid).unwrap();
    let by_fft = fft_overlap(delta_omega, delta_t);
    assert!((by_fft - by_quadrature).abs() / by_quadrature < 1e-2);
}

#[test]
fn dense_and_banded_joint_forms_agree() {
    let src = GaussianBiphoton::telecom_default();
    let bins = IntervalBinSpec::tile(5e-10, -3e-9, 3e-9).unwrap();
    let channel = ChannelModel::new(3.0, 1.0).unwrap();
    let banded = joint_time_banded(&src, &bins, &bins, &channel, true).unwrap();
    let dense = banded.to_dense().unwrap();

    let (p_a, p_a_null) = banded.alice_marginal();
    let rows = dense.row_marginal();
    for (i, &expect) in p_a.iter().enumerate() {
        assert!((rows[i] - expect).abs() < 1e-12, "row {i}");
    }
    assert!((rows[p_a.len()] - p_a_null).abs() < 1e-12);

    let (p_b, p_b_null) = banded.bob_marginal();
    let cols = dense.col_marginal();
    for (j, &expect) in p_b.iter().enumerate() {
        assert!((cols[j] - expect).abs() < 1e-12, "col {j}");
    }
    assert!((cols[p_b.len()] - p_b_null).abs() < 1e-12);

    // Conditional Shannon entropy from the dense table.
    let m = dense.probs();
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    let mut h_ab = 0.0;
    for v in m.iter() {
        h_ab += h(*v);
    }
    let mut h_b = 0.0;
    for j in 0..m.ncols() {
        h_b += h(m.column(j).iter().sum::<f64>());
    }
    let direct = h_ab - h_b;
    assert!(
        (banded.cond_shannon_bits() - direct).abs() < 1e-9,
        "banded {} vs dense {direct}",
        banded.cond_shannon_bits()
    );
}

#[test]
fn unit_transmission_marginals_match_the_binned_gaussian() {
    let src = GaussianBiphoton::telecom_default();
    let bins = IntervalBinSpec::tile(2e-10, -9e-9, 9e-9).unwrap();
    let banded =
        joint_time_banded(&src, &bins, &bins, &ChannelModel::identity(), false).unwrap();
    let dense = banded.to_dense().unwrap();
    let (_, time_std) = src.marginal_stds();

    let rows = dense.row_marginal();
    let n = bins.n_bins();
    let mut tv = 0.0;
    let mut informative_expected = 0.0;
    for i in 0..n {
        let (lo, hi) = bins.bin_edges(i);
        let expect = normal_cdf(hi / time_std) - normal_cdf(lo / time_std);
        informative_expected += expect;
        tv += (rows[i] - expect).abs();
    }
    tv += (rows[n] - (1.0 - informative_expected)).abs();
    tv *= 0.5;
    assert!(tv <= 1e-6, "total variation {tv}");

    // Same source, same window on both sides: the two marginals agree.
    let cols = dense.col_marginal();
    for (i, r) in rows.iter().enumerate() {
        assert!((r - cols[i]).abs() < 1e-9, "bin {i}");
    }
}
