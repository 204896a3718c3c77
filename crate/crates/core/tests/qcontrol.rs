use qflrl_core::numkit::RngStream;
use qflrl_core::qcontrol::{decile_means, run_episode_batch, train, ControlConfig};

fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = ys.iter().enumerate().map(|(x, y)| (x as f64 - xm) * (y - ym)).sum();
    let den: f64 = (0..ys.len()).map(|x| (x as f64 - xm).powi(2)).sum();
    num / den
}

#[test]
fn unmeasured_training_trends_toward_open_loop() {
    let mut cfg = ControlConfig::default();
    cfg.sme.kappa_meas = 0.0;
    cfg.sme.substeps = cfg.sme.min_substeps(cfg.cutoff);
    let seeds = 4;
    let mut avg = vec![0.0; 10];
    for seed in 0..seeds {
        let report = train(&cfg, seed).unwrap();
        let spread: Vec<f64> = report.log.iter().map(|r| r.policy_spread).collect();
        for (a, d) in avg.iter_mut().zip(decile_means(&spread)) {
            *a += d / seeds as f64;
        }
        // nothing beats a coherent drive without measurement
        assert!(report.final_window_population() < qflrl_core::qcontrol::COHERENT_CEILING);
    }
    println!("seed-averaged spread by decile: {avg:?}");
    assert!(slope(&avg) < 0.0, "spread trend {}", slope(&avg));
}

#[test]
fn batch_mean_error_scales_with_batch_size() {
    let mut cfg = ControlConfig::default();
    cfg.horizon = 10;
    cfg.amplitudes = qflrl_core::qcontrol::uniform_grid(-0.75, 0.75, 9);
    let policy = cfg.init_policy(&mut RngStream::new(2, 0)).unwrap();
    let repeats = 40u64;
    let spread_of_means = |batch: usize| {
        let c = ControlConfig { batch, ..cfg.clone() };
        let means: Vec<f64> = (0..repeats)
            .map(|r| run_episode_batch(&policy, &c, 17, 1 + r * 1000).unwrap().mean_return())
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
    };
    let small = spread_of_means(4);
    let large = spread_of_means(16);
    // i.i.d. returns: ratio √(16/4) = 2; 40 repeats give roughly ±25%
    let ratio = small / large;
    assert!((1.4..2.8).contains(&ratio), "ratio {ratio}");
}
