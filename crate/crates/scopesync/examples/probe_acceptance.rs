use scopesync::sim::*;
use scopesync::sync::*;
use scopesync::types::Modality;

fn paper_cfg(seed: u64, noisy: bool) -> SimConfig {
    let mut cfg = SimConfig {
        transmission: TransmissionConfig::fast_actuation(),
        ..SimConfig::default()
    };
    cfg.scope.frame_width = 160;
    cfg.scope.frame_height = 120;
    cfg.latency.latency_ms.state = 102.0;
    cfg.latency.latency_ms.pose = 435.0;
    cfg.latency.latency_ms.frame = 412.0;
    cfg.latency.seed = seed;
    if noisy {
        cfg.latency.pose_noise_std_m = 1e-3;
        cfg.latency.jitter_std_ms = 2.0;
    }
    cfg
}

fn main() {
    let t0 = std::time::Instant::now();
    // Criterion 1 noisy: 20 seeds
    let profile = sinusoid_profile(0.2, 0.5, Axis::BendX).unwrap();
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..20 {
        let bundle = emit_streams(&profile, 60.0, &paper_cfg(seed, true)).unwrap();
        let cal = characterize_latency(&bundle, 0.2).unwrap();
        let s = cal.lag_behind_action_ms(Modality::State) - 102.0;
        let p = cal.lag_behind_action_ms(Modality::Pose) - 435.0;
        let f = cal.lag_behind_action_ms(Modality::Frame) - 412.0;
        if s.abs() > worst.0.abs() { worst.0 = s }
        if p.abs() > worst.1.abs() { worst.1 = p }
        if f.abs() > worst.2.abs() { worst.2 = f }
    }
    println!("noisy recovery worst errors: state {:.2} pose {:.2} frame {:.2} ms ({:.1}s)",
        worst.0, worst.1, worst.2, t0.elapsed().as_secs_f64());

    // Criterion 2: state-pose median over 50 seeds with teleop profile
    let t1 = std::time::Instant::now();
    let cal = OffsetCalibration::from_lags_behind_action_ms(102.0, 435.0, 412.0);
    let mut taus = Vec::new();
    let mut taus_miscal = Vec::new();
    for seed in 0..50 {
        let mut cfg = paper_cfg(seed, false);
        cfg.latency.pose_noise_std_m = 1e-4;
        cfg.latency.jitter_std_ms = 2.0;
        let profile = teleop_profile(1000 + seed, 60.0).unwrap();
        let bundle = emit_streams(&profile, 60.0, &cfg).unwrap();
        let ep = align_episode(&bundle, &cal).unwrap();
        let state_rows: Vec<Vec<f64>> = ep.records.iter().map(|r| r.state_deg.to_vec()).collect();
        let pose_rows: Vec<Vec<f64>> = ep.records.iter()
            .map(|r| vec![r.position_m.x, r.position_m.y, r.position_m.z]).collect();
        let action_rows: Vec<Vec<f64>> = ep.records.iter().map(|r| r.action.to_vec()).collect();
        let vs = minmax_normalize(&velocity_norm(&state_rows, ep.rate_hz).unwrap());
        let vp = minmax_normalize(&velocity_norm(&pose_rows, ep.rate_hz).unwrap());
        let est = residual_lag(&vs, &vp, 1000.0).unwrap();
        taus.push(est.tau_star_samples);

        // action-state with 55.6 ms mis-calibration: action offset reduced
        let mut bad = cal;
        bad.offsets_ms.action -= 55.6;
        let ep2 = align_episode(&bundle, &bad).unwrap();
        let a2: Vec<Vec<f64>> = ep2.records.iter().map(|r| r.action.to_vec()).collect();
        let s2: Vec<Vec<f64>> = ep2.records.iter().map(|r| r.state_deg.to_vec()).collect();
        let va = minmax_normalize(&velocity_norm(&a2, ep2.rate_hz).unwrap());
        let vs2 = minmax_normalize(&velocity_norm(&s2, ep2.rate_hz).unwrap());
        let est2 = residual_lag(&va, &vs2, 1000.0).unwrap();
        taus_miscal.push(est2.tau_star_samples);
        let _ = &action_rows;
    }
    taus.sort();
    taus_miscal.sort();
    println!("state-pose tau* values: {:?}", taus);
    println!("  median |tau*| = {}", taus.iter().map(|t| t.abs()).collect::<Vec<_>>()[25]);
    println!("action-state miscal tau*: {:?}", taus_miscal);
    println!("  median = {}", taus_miscal[25]);
    println!("50 episodes took {:.1}s", t1.elapsed().as_secs_f64());
}
