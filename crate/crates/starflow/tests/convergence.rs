//! Resolution and discretization convergence gates, plus property-based
//! invariants over randomized shapes.

use proptest::prelude::*;
use starflow::flow::{self, FlowConfig, TerminalEvent};
use starflow::geometry::{self, build_shape, compute_frame, ShapeSpec};
use starflow::monitors::{self, MonitorParams};

fn dumbbell_cfg(intervals: usize, t_max: f64) -> FlowConfig {
    FlowConfig {
        shape: ShapeSpec::Dumbbell { bulb_radius: 1.0, neck_radius: 0.15, sharpness: 2.0 },
        n: 2,
        intervals,
        cfl_geom: 0.2,
        cfl_curv: 0.2,
        stop_amax: None,
        stop_rmin: None,
        t_max,
        monitor_every: 1_000_000,
        a1: 1.0,
        a2: 0.0,
    }
}

fn mon_params() -> MonitorParams {
    MonitorParams { ladder: vec![1.0, 4.0, 10.0, 25.0], z_images: 64, a1: 1.0, a2: 0.0 }
}

#[test]
fn gradient_ratio_is_resolution_converged() {
    // G at the top rung changes by under 10% when N doubles, compared at a
    // matched mid-pinch time.
    let ladder = [1.0, 4.0, 10.0, 25.0];
    let mut values = Vec::new();
    for intervals in [512usize, 1024] {
        let run = flow::run(&dumbbell_cfg(intervals, 0.0152), &mon_params()).expect("run");
        assert_eq!(run.trajectory.terminal, TerminalEvent::TimeCeiling);
        let frame = compute_frame(&run.trajectory.checkpoints.last().unwrap().graph).unwrap();
        values.push(monitors::gradient_ratio(&frame, &ladder)[3]);
    }
    let rel = (values[0] - values[1]).abs() / values[1];
    assert!(rel <= 0.10, "G(hـtop) at N=512 vs N=1024: {values:?}, rel {rel:.3}");
}

#[test]
fn z_extremes_converged_in_azimuthal_images() {
    // Doubling the image ring changes the Z extremes by under 1e-4
    // relative on the dumbbell fixture.
    let g = build_shape(
        &ShapeSpec::Dumbbell { bulb_radius: 1.0, neck_radius: 0.15, sharpness: 2.0 },
        2,
        256,
    )
    .unwrap();
    let f = compute_frame(&g).unwrap();
    let (zs64, zp64) = monitors::z_extremes(&f, 64);
    let (zs128, zp128) = monitors::z_extremes(&f, 128);
    let mut worst = 0.0_f64;
    for i in 0..f.num_nodes() {
        worst = worst.max((zs64[i] - zs128[i]).abs() / zs128[i].abs().max(1e-300));
        worst = worst.max((zp64[i] - zp128[i]).abs() / zp128[i].abs().max(1e-300));
    }
    assert!(worst < 1e-4, "image-doubling relative change {worst:.2e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Fixture CSV round-trips bit-exactly for arbitrary valid graphs.
    #[test]
    fn graph_csv_round_trips(
        dim in 1usize..4,
        seed in any::<u64>(),
        t in 0.0f64..2.0,
    ) {
        let dim = if dim == 1 { 1 } else { dim };
        let mode = if dim == 1 { geometry::Mode::Curve2d } else { geometry::Mode::Axisym };
        let intervals = 32;
        let nodes = match mode {
            geometry::Mode::Curve2d => intervals,
            geometry::Mode::Axisym => intervals + 1,
        };
        // Smooth positive radii from a seeded low-frequency expansion.
        let mut r = Vec::with_capacity(nodes);
        let extent = mode.angular_extent();
        for i in 0..nodes {
            let a = extent * i as f64 / intervals as f64;
            let s1 = ((seed % 97) as f64 / 97.0 - 0.5) * 0.4;
            let s2 = ((seed % 53) as f64 / 53.0 - 0.5) * 0.3;
            r.push(1.0 + s1 * (2.0 * a).cos() + s2 * (3.0 * a).cos());
        }
        let g = geometry::RadialGraph::new(dim, mode, t, r, intervals).unwrap();
        let text = geometry::graph_to_csv(&g);
        let back = geometry::graph_from_csv(&text).unwrap();
        prop_assert_eq!(back, g);
    }

    /// Z extremes scale like 1/lambda under spatial dilation, so the
    /// implied noncollapsing radius scales like lambda.
    #[test]
    fn z_extremes_scale_under_dilation(
        amplitude in 0.01f64..0.25,
        lambda in 0.2f64..5.0,
    ) {
        let g = build_shape(
            &ShapeSpec::PerturbedSphere { amplitude, frequency: 2 },
            1,
            64,
        ).unwrap();
        let f = compute_frame(&g).unwrap();
        let (zs, _) = monitors::z_extremes(&f, 8);
        let mut scaled = g.clone();
        for r in &mut scaled.r {
            *r *= lambda;
        }
        let fs = compute_frame(&scaled).unwrap();
        let (zs_l, _) = monitors::z_extremes(&fs, 8);
        for i in 0..f.num_nodes() {
            let expect = zs[i] / lambda;
            prop_assert!(
                (zs_l[i] - expect).abs() <= 1e-12 * expect.abs(),
                "node {}: {} vs {}", i, zs_l[i], expect
            );
        }
    }
}
