use dynlfm_wasm::{sample_prior, BarsDemo};

#[test]
fn prior_draw_shapes_and_horizon() {
    let draw = sample_prior(40, 2.0, 0.5, 1).unwrap_or_else(|_| panic!("valid arguments"));
    let (n, k) = (draw.n_rows(), draw.n_features());
    assert_eq!(n, 40);
    let lifetimes = draw.lifetimes();
    assert_eq!(lifetimes.len(), n * k);
    for r in 0..n {
        for c in 0..k {
            assert!(lifetimes[r * k + c] as usize <= n - r);
        }
    }
    let active = draw.active();
    let total_active: u32 = active.iter().sum();
    let total_life: u32 = lifetimes.iter().sum();
    assert_eq!(total_active, total_life);
}

#[test]
fn bars_demo_learns() {
    let mut demo = BarsDemo::new(3, 120, 0.5, true, 10).unwrap_or_else(|_| panic!("valid arguments"));
    assert_eq!(demo.n_dims(), 36);
    assert!(demo.heldout_mse().is_nan());
    let frame = demo.observation(0);
    assert_eq!(frame.len(), 36);
    demo.step(150).unwrap_or_else(|_| panic!("sampler runs"));
    assert_eq!(demo.iteration(), 150);
    let mse = demo.heldout_mse();
    assert!(mse.is_finite() && mse < 1.5, "mse {mse}");
    assert_eq!(demo.features().len(), demo.n_features() * 36);
    assert!(demo.avg_persistence() >= 1.0);
    demo.reset_average();
    assert!(demo.heldout_mse().is_nan());
}
