use multifrac::analysis::{estimate_holder, median};
use multifrac::hurst::{generate_hurst, lsc_variant, HurstPath, HurstSpec};
use multifrac::kernels::{KernelFamily, KernelSpec, Sigma};
use multifrac::noise::make_noise;
use multifrac::simulate::{
    ensemble, simulate_ensemble, simulate_mbm_field, simulate_moving_average, Process, SimConfig, SimPlan,
};
use multifrac::{Error, SampledPath, UniformGrid};

fn config(n: usize, sub: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(UniformGrid::new(0.0, 1.0, n).unwrap()).with_seed(seed, 0);
    c.substeps = sub;
    c
}

#[test]
fn outputs_before_a_cut_ignore_later_hurst_and_sigma() {
    let cfg = config(64, 4, 3);
    let a = HurstSpec::DeterministicFunction { points: vec![(0.0, 0.4), (0.5, 0.5), (1.0, 0.6)] };
    let b = HurstSpec::DeterministicFunction { points: vec![(0.0, 0.4), (0.5, 0.5), (1.0, 0.8)] };
    let plan_for = |kernel: &KernelSpec| SimPlan::new(kernel, 0.4, 0.8, &cfg).unwrap();
    let kernel = KernelSpec::ito_mbm();
    let plan = plan_for(&kernel);
    let ha = generate_hurst(&a, plan.hurst_grid(), 0, 0).unwrap();
    let hb = generate_hurst(&b, plan.hurst_grid(), 0, 0).unwrap();
    let draw = plan.draw(3, 0);
    let xa = plan.ito(&draw, &ha).unwrap();
    let xb = plan.ito(&draw, &hb).unwrap();
    let cut = 32;
    for k in 0..=cut {
        assert!((xa.values()[k] - xb.values()[k]).abs() < 1e-12, "node {k}");
    }
    assert!(xa.values()[cut + 8..].iter().zip(&xb.values()[cut + 8..]).any(|(p, q)| (p - q).abs() > 1e-3));

    let sgrid = UniformGrid::new(-4.0, 1.0, 500).unwrap();
    let sig = |late: f64| {
        let v = sgrid.nodes().map(|s| if s < 0.5 { 1.0 } else { late }).collect();
        Sigma::Path(SampledPath::new(sgrid, v, "sigma").unwrap())
    };
    let k1 = KernelSpec::new(KernelFamily::ItoMbm, sig(1.0), None).unwrap();
    let k2 = KernelSpec::new(KernelFamily::ItoMbm, sig(0.5), None).unwrap();
    let (p1, p2) = (plan_for(&k1), plan_for(&k2));
    let y1 = p1.ito(&p1.draw(3, 0), &ha).unwrap();
    let y2 = p2.ito(&p2.draw(3, 0), &ha).unwrap();
    for k in 0..=cut {
        assert!((y1.values()[k] - y2.values()[k]).abs() < 1e-12, "node {k}");
    }
    assert_ne!(y1.values()[64], y2.values()[64]);
}

#[test]
fn field_and_adapted_process_share_the_driver() {
    for h in [0.2, 0.5, 0.8] {
        let cfg = config(128, 2, 17).with_seed(17, 5);
        let hp = HurstPath::constant(UniformGrid::new(0.0, 1.0, 256).unwrap(), h).unwrap();
        let x = simulate_moving_average(&KernelSpec::ito_mbm(), &hp, &cfg).unwrap();
        let b = simulate_mbm_field(&hp, &cfg).unwrap();
        assert_eq!(x.values(), b.values(), "H = {h}");
    }
    let cfg = config(128, 2, 17);
    let spec = HurstSpec::TanhOfFbm { center: 0.5, amplitude: 0.2, driver_hurst: 0.3, driver_seed: None };
    let k = simulate_ensemble(&KernelSpec::ito_mbm(), &spec, &cfg, 1, Process::Ito).unwrap();
    let f = simulate_ensemble(&KernelSpec::ito_mbm(), &spec, &cfg, 1, Process::Field).unwrap();
    assert_eq!(k[0].1, f[0].1);
    assert_ne!(k[0].0.values(), f[0].0.values());
}

#[test]
fn doubling_substeps_converges() {
    let n = 16;
    let subs = [1usize, 2, 4, 8, 16];
    let n_paths = 100;
    for h in [0.6, 0.8] {
        let plans: Vec<SimPlan> =
            subs.iter().map(|&s| SimPlan::new(&KernelSpec::ito_mbm(), h, h, &config(n, s, 5)).unwrap()).collect();
        let finest = plans.last().unwrap();
        let hp = HurstPath::constant(finest.hurst_grid(), h).unwrap();
        let ends = ensemble(n_paths, |i| {
            let fine = make_noise(5, i, *finest.driver_grid())?;
            subs.iter()
                .zip(&plans)
                .map(|(&s, plan)| {
                    let draw = plan.draw_with_noise(fine.coarsen(16 / s)?, 5, i)?;
                    Ok(*plan.ito(&draw, &hp)?.values().last().unwrap())
                })
                .collect::<multifrac::Result<Vec<f64>>>()
        })
        .unwrap();
        let rms: Vec<f64> = (1..subs.len())
            .map(|j| (ends.iter().map(|e| (e[j] - e[j - 1]).powi(2)).sum::<f64>() / n_paths as f64).sqrt())
            .collect();
        assert!(rms.windows(2).all(|w| w[1] < w[0]), "H = {h}: {rms:?}");
    }
}

#[test]
fn driver_must_match_the_plan_grid() {
    let plan = SimPlan::new(&KernelSpec::ito_mbm(), 0.5, 0.5, &config(16, 2, 1)).unwrap();
    let wrong = make_noise(1, 0, UniformGrid::new(0.0, 1.0, 32).unwrap()).unwrap();
    assert!(matches!(plan.draw_with_noise(wrong, 1, 0), Err(Error::GridMismatch(_))));
}

#[test]
fn adapted_process_stays_continuous_across_a_hurst_jump() {
    let spec = HurstSpec::Step { levels: vec![0.3, 0.7], breakpoints: vec![0.5] };
    let mut near_k = Vec::new();
    let mut jump_b = Vec::new();
    for n in [128usize, 512, 2048] {
        let cfg = config(n, 1, 21);
        let plan = SimPlan::new(&KernelSpec::ito_mbm(), 0.3, 0.7, &cfg).unwrap();
        let hp = generate_hurst(&spec, plan.hurst_grid(), 0, 0).unwrap();
        let mid = n / 2;
        let rows = ensemble(50, |i| {
            let draw = plan.draw(21, i);
            let k = plan.ito(&draw, &hp)?;
            let b = plan.field(&draw, &hp)?;
            let kv = k.values();
            let near = (kv[mid] - kv[mid - 1]).abs().max((kv[mid + 1] - kv[mid]).abs());
            Ok((near, (b.values()[mid] - b.values()[mid - 1]).abs()))
        })
        .unwrap();
        near_k.push(rows.iter().map(|r| r.0).sum::<f64>() / 50.0);
        let mut j: Vec<f64> = rows.iter().map(|r| r.1).collect();
        jump_b.push(median(&mut j));
    }
    assert!(near_k.windows(2).all(|w| w[1] < 0.8 * w[0]), "{near_k:?}");
    assert!(jump_b.iter().all(|&j| j > 0.25), "{jump_b:?}");
}

#[test]
fn exponent_at_the_breakpoint_is_bounded_below() {
    let spec = HurstSpec::Step { levels: vec![0.3, 0.7], breakpoints: vec![0.5] };
    let cfg = config(1 << 14, 1, 33);
    let paths = simulate_ensemble(&KernelSpec::ito_mbm(), &spec, &cfg, 100, Process::Ito).unwrap();
    let star = lsc_variant(&paths[0].1).at(0.5);
    assert_eq!(star, 0.3);
    let mut alphas: Vec<f64> = paths.iter().map(|(x, _)| estimate_holder(x, 0.5, 6, 1.0 / 32.0).unwrap().alpha_hat).collect();
    let m = median(&mut alphas);
    assert!(m >= star - 0.1, "median alpha {m}");
}

#[test]
fn ensemble_is_reproducible_and_ordered() {
    let cfg = config(64, 2, 9);
    let spec = HurstSpec::StationaryConstantPerPath { values: vec![0.3, 0.7], weights: vec![1.0, 1.0] };
    let a = simulate_ensemble(&KernelSpec::matern(3.0).unwrap(), &spec, &cfg, 6, Process::Ito).unwrap();
    let b = simulate_ensemble(&KernelSpec::matern(3.0).unwrap(), &spec, &cfg, 6, Process::Ito).unwrap();
    assert_eq!(a, b);
    let mut single = cfg;
    single.stream_id = 4;
    let c = simulate_ensemble(&KernelSpec::matern(3.0).unwrap(), &spec, &single, 1, Process::Ito).unwrap();
    assert_eq!(c[0], a[4]);
}

#[test]
fn every_family_simulates() {
    let cfg = config(64, 4, 2);
    let spec = HurstSpec::Constant { value: 0.4 };
    for family in [
        KernelFamily::ItoMbm,
        KernelFamily::Matern { lambda: 2.0 },
        KernelFamily::LogModified,
        KernelFamily::Truncated { cutoff: 1.5 },
    ] {
        let k = KernelSpec::new(family, Sigma::Constant(1.0), None).unwrap();
        let x = simulate_ensemble(&k, &spec, &cfg, 1, Process::Ito).unwrap();
        assert!(x[0].0.values().iter().all(|v| v.is_finite()), "{family:?}");
    }
    let k = KernelSpec::matern(2.0).unwrap();
    assert!(simulate_ensemble(&k, &spec, &cfg, 1, Process::Field).is_err());
}
