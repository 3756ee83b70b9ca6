use multifrac::analysis::{
    fig2_contrast, hurst_law_at, kc_moment_check, ks_distance, rescaling_test, Fig2Config, KcVerdict,
};
use multifrac::gaussian::Law;
use multifrac::hurst::{HurstPath, HurstSpec};
use multifrac::kernels::KernelSpec;
use multifrac::simulate::{simulate_ensemble, Process, SimConfig};
use multifrac::UniformGrid;

fn brownian_paths(n_paths: usize) -> Vec<multifrac::SampledPath> {
    let mut cfg = SimConfig::new(UniformGrid::new(0.0, 1.0, 64).unwrap()).with_seed(4, 0);
    cfg.substeps = 1;
    simulate_ensemble(&KernelSpec::ito_mbm(), &HurstSpec::Constant { value: 0.5 }, &cfg, n_paths, Process::Ito)
        .unwrap()
        .into_iter()
        .map(|(x, _)| x)
        .collect()
}

#[test]
fn kc_check_is_deterministic_and_flags_overclaims() {
    let paths = brownian_paths(2000);
    let g = *paths[0].grid();
    let t = [0.0, 0.25, 0.5];
    let h = [0.25, 0.125, 0.0625, 0.03125, 0.015625];
    let honest = [HurstPath::constant(g, 0.5).unwrap()];
    let a = kc_moment_check(&paths, &honest, 4.0, &t, &h).unwrap();
    let b = kc_moment_check(&paths, &honest, 4.0, &t, &h).unwrap();
    assert_eq!(a.ratios, b.ratios);
    assert_eq!(a.verdict, KcVerdict::Bounded);
    let (pooled, se) = a.pooled_ratio();
    assert!((pooled - 3.0).abs() < 4.0 * se + 0.05, "{pooled} +- {se}");

    let over = [HurstPath::constant(g, 0.8).unwrap()];
    let bad = kc_moment_check(&paths, &over, 4.0, &t, &h).unwrap();
    assert_eq!(bad.verdict, KcVerdict::UnboundedTrend);
    assert!(bad.slope < -0.9);

    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,h,ratio,stderr\n"));
    assert_eq!(text.lines().count(), 1 + t.len() * h.len());
}

#[test]
fn kc_check_rejects_bad_inputs() {
    let paths = brownian_paths(4);
    let g = *paths[0].grid();
    let field = [HurstPath::constant(g, 0.5).unwrap()];
    assert!(kc_moment_check(&[], &field, 4.0, &[0.0], &[0.1, 0.2]).is_err());
    assert!(kc_moment_check(&paths, &field, 4.0, &[0.0], &[0.125]).is_err());
    assert!(kc_moment_check(&paths, &field, -1.0, &[0.0], &[0.125, 0.25]).is_err());
    assert!(kc_moment_check(&paths, &field, 4.0, &[0.01], &[0.125, 0.25]).is_err());
}

#[test]
fn rescaling_report_for_brownian_motion() {
    let mut cfg = SimConfig::new(UniformGrid::new(0.0, 1.0, 64).unwrap()).with_seed(8, 0);
    cfg.substeps = 2;
    let hs = [0.125, 0.0625, 0.03125];
    let pairs = [(1.0, 1.0), (1.0, -1.0), (2.0, 1.0)];
    let rep = rescaling_test(&KernelSpec::ito_mbm(), &HurstSpec::Constant { value: 0.5 }, &cfg, 0.5, &hs, &pairs, 3000)
        .unwrap();
    let c = rep.checks();
    assert!(c.final_within_3se && c.monotone);
    assert_eq!(rep.entry(0, 0).limit, 1.0);
    assert_eq!(rep.entry(0, 1).limit, 0.0);
    assert_eq!(rep.entry(0, 2).limit, 1.0);
    assert!(rep.ks_distance.iter().all(|&d| d < 0.05));
    assert!(rescaling_test(&KernelSpec::ito_mbm(), &HurstSpec::Constant { value: 0.5 }, &cfg, 0.5, &[0.1, 0.2], &pairs, 10)
        .is_err());
}

#[test]
fn law_of_the_hurst_level() {
    let g = UniformGrid::new(0.0, 1.0, 256).unwrap();
    let law = hurst_law_at(&HurstSpec::Constant { value: 0.3 }, 0.5, g, 0, 100).unwrap();
    assert_eq!(law, Law::point(0.3));
    let spec = HurstSpec::TanhOfFbm { center: 0.9, amplitude: 0.05, driver_hurst: 0.2, driver_seed: None };
    let law = hurst_law_at(&spec, 0.5, g, 0, 500).unwrap();
    let s = law.support();
    assert_eq!(s.len(), 500);
    assert!(s.iter().all(|&h| h > 0.85 && h < 0.95));
}

#[test]
fn ks_distance_of_a_uniform_sample() {
    let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
    assert!(d <= 0.0005 + 1e-12);
    assert!(ks_distance(&xs, |x| (x * 2.0).clamp(0.0, 1.0)) > 0.4);
}

#[test]
fn small_fig2_run_produces_a_full_table() {
    let cfg = Fig2Config { n_cells: 4096, n_paths: 3, n_scales: 4, ..Fig2Config::default() };
    let s = fig2_contrast(&cfg).unwrap();
    assert_eq!(s.rows.len(), 3 * cfg.points.len());
    assert!(s.median_alpha_ito > s.median_alpha_field);
    assert!(s.rows.iter().all(|r| r.h_t > 0.85 && r.h_t < 0.95));
    let mut csv = Vec::new();
    s.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("path,t,H,alpha_mbm,alpha_ito_mbm\n"));
}
