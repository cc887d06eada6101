//! The two rescalings of the flow and the blowup classifier.
//!
//! Continuous rescaling sends a slice at time t > 0 to `X~ = X / sqrt(t)`,
//! `tau = log t`; the rescaled motion has speed `-(H~ + <X~,nu~>/2)`, which
//! is negative exactly when `F = 2 sqrt(t) F~` is positive. Rescaled slices
//! are one-sided minimizers of the Gaussian-type weighted area
//! `Area_w = int exp(|x|^2/4) dmu`, which is checked here against sphere
//! competitors only.
//!
//! Parabolic rescaling about the origin maps `(x, t) -> (lambda x,
//! lambda^2 (t - t0))` and multiplies curvatures by `1/lambda`; the
//! dimensionless invariants `lambda_i / H` and `H^2 (t0 - t)` feed the
//! tangent-flow classifier, which decides between a static halfspace, a
//! shrinking round sphere, and a shrinking round cylinder.

use crate::flow::{Checkpoint, FlowError, Trajectory};
use crate::geometry::{self, unit_sphere_area, SurfaceFrame};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Classifier acceptance threshold on the best model residual.
pub const CLASSIFY_RESIDUAL_CEILING: f64 = 0.1;

/// Required curvature growth factor between the first and last checkpoint.
pub const BLOWUP_GROWTH_FACTOR: f64 = 10.0;

/// H * diameter below this reads as a static halfspace.
pub const HALFSPACE_PRODUCT_CEILING: f64 = 0.1;

/// Weighted-area exponent guard: exp overflows f64 near 709.
pub const OVERFLOW_EXPONENT: f64 = 600.0;

/// Slack accepted in the one-sided comparison.
pub const ONE_SIDED_SLACK: f64 = 0.005;

#[derive(Debug, Error)]
pub enum RescaleError {
    #[error("NONPOSITIVE_TIME: t = {0} must be positive")]
    NonpositiveTime(f64),
    #[error("OVERFLOW_GUARD: |x|^2/4 reaches {0:.1}, beyond the exp range")]
    OverflowGuard(f64),
    #[error("NOT_ENCLOSING: radius {radius} is below max |x~| = {needed}")]
    NotEnclosing { radius: f64, needed: f64 },
    #[error("EMPTY_WINDOW: no checkpoints before t0 = {0}")]
    EmptyWindow(f64),
    #[error("NO_BLOWUP: max H grew from {initial:.3e} to only {last:.3e}")]
    NoBlowup { initial: f64, last: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

/// A slice mapped by the continuous rescaling.
#[derive(Debug, Clone)]
pub struct RescaledFrame {
    pub dim: usize,
    pub tau: f64,
    pub h: f64,
    /// Rescaled profile positions X~ = X / sqrt(t).
    pub pos_a: Vec<f64>,
    pub pos_b: Vec<f64>,
    /// Normals are scale invariant.
    pub nu_a: Vec<f64>,
    pub nu_b: Vec<f64>,
    /// H~ = sqrt(t) H.
    pub h_tilde: Vec<f64>,
    /// F~ = H~ + <X~, nu~>/2.
    pub f_tilde: Vec<f64>,
    /// Rescaled-flow speed s~ = -F~, negative along star-shaped flows.
    pub speed: Vec<f64>,
    /// |X~|^2 per node.
    pub x_norm_sq: Vec<f64>,
    /// Rescaled area element dmu~ = dmu / t^{n/2}.
    pub area_elem: Vec<f64>,
}

impl RescaledFrame {
    pub fn max_x_norm(&self) -> f64 {
        self.x_norm_sq.iter().cloned().fold(0.0_f64, f64::max).sqrt()
    }
}

/// Map a frame at time t > 0 through X~ = X / sqrt(t), tau = log t.
pub fn continuous_rescale(frame: &SurfaceFrame, t: f64) -> Result<RescaledFrame, RescaleError> {
    if !(t > 0.0) {
        return Err(RescaleError::NonpositiveTime(t));
    }
    let scale = t.sqrt();
    let nn = frame.num_nodes();
    let mut out = RescaledFrame {
        dim: frame.dim,
        tau: t.ln(),
        h: frame.h,
        pos_a: vec![0.0; nn],
        pos_b: vec![0.0; nn],
        nu_a: frame.nu_a.clone(),
        nu_b: frame.nu_b.clone(),
        h_tilde: vec![0.0; nn],
        f_tilde: vec![0.0; nn],
        speed: vec![0.0; nn],
        x_norm_sq: vec![0.0; nn],
        area_elem: vec![0.0; nn],
    };
    let area_scale = scale.powi(frame.dim as i32);
    for i in 0..nn {
        out.pos_a[i] = frame.pos_a[i] / scale;
        out.pos_b[i] = frame.pos_b[i] / scale;
        out.h_tilde[i] = scale * frame.mean_curv[i];
        let support_tilde = frame.support[i] / scale;
        out.f_tilde[i] = out.h_tilde[i] + 0.5 * support_tilde;
        out.speed[i] = -out.f_tilde[i];
        out.x_norm_sq[i] = out.pos_a[i] * out.pos_a[i] + out.pos_b[i] * out.pos_b[i];
        out.area_elem[i] = frame.area_elem[i] / area_scale;
    }
    Ok(out)
}

/// Fixed-order quadrature of exp(|x~|^2/4) dmu~.
pub fn weighted_area(rf: &RescaledFrame) -> Result<f64, RescaleError> {
    let mut max_exp = 0.0_f64;
    for &q in &rf.x_norm_sq {
        max_exp = max_exp.max(q / 4.0);
    }
    if max_exp > OVERFLOW_EXPONENT {
        return Err(RescaleError::OverflowGuard(max_exp));
    }
    let mut total = 0.0;
    for i in 0..rf.x_norm_sq.len() {
        total += (rf.x_norm_sq[i] / 4.0).exp() * rf.area_elem[i];
    }
    Ok(total * rf.h)
}

/// Closed-form weighted area of the round n-sphere of the given radius.
pub fn sphere_weighted_area(dim: usize, radius: f64) -> f64 {
    unit_sphere_area(dim) * radius.powi(dim as i32) * (radius * radius / 4.0).exp()
}

/// One-sided minimization witness: the rescaled slice weighs no more than
/// any enclosing sphere. Radii below max |x~| are rejected.
pub fn one_sided_check(
    rf: &RescaledFrame,
    enclosers: &[f64],
) -> Result<Vec<(f64, bool)>, RescaleError> {
    let needed = rf.max_x_norm();
    let area = weighted_area(rf)?;
    let mut out = Vec::with_capacity(enclosers.len());
    for &radius in enclosers {
        if radius < needed {
            return Err(RescaleError::NotEnclosing { radius, needed });
        }
        let pass = area <= sphere_weighted_area(rf.dim, radius) * (1.0 + ONE_SIDED_SLACK);
        out.push((radius, pass));
    }
    Ok(out)
}

/// Parabolic rescaling of a trajectory about the origin:
/// (x, t) -> (lambda x, lambda^2 (t - t0)). Every checkpoint is mapped.
/// The radial gauge is origin-centered, so the rescaling center is the
/// origin by construction; fixtures place the singular point there.
/// Recentering at a positive t0 requires checkpoints before it.
pub fn parabolic_rescale(
    traj: &Trajectory,
    t0: f64,
    lambda: f64,
) -> Result<Trajectory, RescaleError> {
    assert!(lambda > 0.0, "rescaling factor must be positive");
    if traj.checkpoints.is_empty() || (t0 > 0.0 && traj.checkpoints[0].t >= t0) {
        return Err(RescaleError::EmptyWindow(t0));
    }
    let mut checkpoints = Vec::new();
    for ck in &traj.checkpoints {
        let mut graph = ck.graph.clone();
        for r in &mut graph.r {
            *r *= lambda;
        }
        graph.t = lambda * lambda * (ck.t - t0);
        checkpoints.push(Checkpoint {
            t: graph.t,
            step: ck.step,
            graph,
            max_h: ck.max_h / lambda,
            max_abs_a: ck.max_abs_a / lambda,
            min_r: ck.min_r * lambda,
        });
    }
    Ok(Trajectory {
        checkpoints,
        terminal: traj.terminal,
        t0_estimate: traj.t0_estimate.map(|e| crate::flow::SingularTimeEstimate {
            t0: lambda * lambda * (e.t0 - t0),
            residual: e.residual,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Halfspace,
    Sphere,
    Cylinder,
    Unresolved,
}

/// Dimensionless state of one blowup-window checkpoint, taken at the
/// max-H node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlowupSample {
    pub t: f64,
    pub max_h: f64,
    /// Principal curvature ratios lambda_i / H, ascending.
    pub ratios: Vec<f64>,
    /// H^2 (t0 - t), the self-similarity invariant.
    pub h2_gap: f64,
    pub diameter: f64,
    /// Angular location of the max-H node.
    pub angle: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelResiduals {
    pub halfspace: f64,
    pub sphere: f64,
    pub cylinder: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TangentFlowReport {
    pub t0: f64,
    /// Angle of the singular node at the last checkpoint.
    pub singular_angle: f64,
    /// Blowup scales lambda_j = max H per window checkpoint, increasing.
    pub scales: Vec<f64>,
    pub samples: Vec<BlowupSample>,
    pub classification: Classification,
    pub residuals: ModelResiduals,
    /// Best model residual at the last checkpoint.
    pub residual: f64,
    /// H^2 (t0 - t) at the last sample recomputed with t0 shifted by
    /// +/- (fit residual * t0); bounds the sensitivity to the t0 estimate.
    pub t0_sensitivity: [f64; 2],
}

/// Extract blowup samples from the trailing increasing-max-H checkpoints.
pub fn blowup_samples(
    traj: &Trajectory,
    t0: f64,
    window: usize,
) -> Result<Vec<BlowupSample>, RescaleError> {
    let mut picked: Vec<&Checkpoint> = Vec::new();
    for ck in traj.checkpoints.iter().rev() {
        if ck.t >= t0 {
            continue;
        }
        match picked.last() {
            Some(prev) => {
                if ck.max_h < prev.max_h && ck.t < prev.t {
                    picked.push(ck);
                } else {
                    break;
                }
            }
            None => picked.push(ck),
        }
        if picked.len() == window {
            break;
        }
    }
    if picked.is_empty() {
        return Err(RescaleError::EmptyWindow(t0));
    }
    picked.reverse();
    let mut samples = Vec::with_capacity(picked.len());
    for ck in picked {
        let frame = geometry::compute_frame(&ck.graph)?;
        let (imax, hmax) = frame
            .mean_curv
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite H"))
            .expect("nonempty frame");
        samples.push(BlowupSample {
            t: ck.t,
            max_h: hmax,
            ratios: frame.principal_ratios_sorted(imax),
            h2_gap: hmax * hmax * (t0 - ck.t),
            diameter: frame.diameter,
            angle: ck.graph.angle(imax),
        });
    }
    Ok(samples)
}

fn sphere_residual(s: &BlowupSample, dim: usize) -> f64 {
    let target = 1.0 / dim as f64;
    let mut worst = 0.0_f64;
    for &r in &s.ratios {
        worst = worst.max((r - target).abs() / target);
    }
    let h2_target = dim as f64 / 2.0;
    worst.max((s.h2_gap - h2_target).abs() / h2_target)
}

fn cylinder_residual(s: &BlowupSample, dim: usize) -> f64 {
    if dim < 2 {
        return f64::INFINITY;
    }
    let target = 1.0 / (dim - 1) as f64;
    // Smallest ratio heads to zero, measured against the cylinder scale.
    let mut worst = s.ratios[0].abs() / target;
    for &r in &s.ratios[1..] {
        worst = worst.max((r - target).abs() / target);
    }
    let h2_target = (dim - 1) as f64 / 2.0;
    worst.max((s.h2_gap - h2_target).abs() / h2_target)
}

/// Classify a sample sequence. `initial_max_h` is max H of the run's first
/// checkpoint, used by the blowup gate.
pub fn classify_samples(
    samples: &[BlowupSample],
    dim: usize,
    initial_max_h: f64,
    t0: f64,
    fit_residual: f64,
) -> Result<TangentFlowReport, RescaleError> {
    assert!(samples.len() >= 4, "classifier needs at least 4 window checkpoints");
    let last = samples.last().expect("nonempty");
    let halfspace_product = last.max_h.abs() * last.diameter;
    let sphere_res = sphere_residual(last, dim);
    let cylinder_res = cylinder_residual(last, dim);
    let residuals = ModelResiduals {
        halfspace: halfspace_product,
        sphere: sphere_res,
        cylinder: cylinder_res,
    };

    let (classification, best) = if halfspace_product < HALFSPACE_PRODUCT_CEILING {
        (Classification::Halfspace, halfspace_product)
    } else if last.max_h < BLOWUP_GROWTH_FACTOR * initial_max_h {
        return Err(RescaleError::NoBlowup { initial: initial_max_h, last: last.max_h });
    } else {
        let (cls, best) = if sphere_res <= cylinder_res {
            (Classification::Sphere, sphere_res)
        } else {
            (Classification::Cylinder, cylinder_res)
        };
        if best > CLASSIFY_RESIDUAL_CEILING {
            (Classification::Unresolved, best)
        } else {
            (cls, best)
        }
    };

    let delta = fit_residual * t0;
    let sens = [
        last.max_h * last.max_h * (t0 - delta - last.t),
        last.max_h * last.max_h * (t0 + delta - last.t),
    ];
    Ok(TangentFlowReport {
        t0,
        singular_angle: last.angle,
        scales: samples.iter().map(|s| s.max_h).collect(),
        samples: samples.to_vec(),
        classification,
        residuals,
        residual: best,
        t0_sensitivity: sens,
    })
}

/// End-to-end classification of a finished run.
pub fn classify_tangent_flow(
    traj: &Trajectory,
    t0: f64,
    fit_residual: f64,
) -> Result<TangentFlowReport, RescaleError> {
    let samples = blowup_samples(traj, t0, crate::flow::FIT_WINDOW)?;
    if samples.len() < 4 {
        return Err(RescaleError::EmptyWindow(t0));
    }
    let initial_max_h = traj
        .checkpoints
        .first()
        .map(|c| c.max_h)
        .ok_or(RescaleError::EmptyWindow(t0))?;
    classify_samples(&samples, traj.checkpoints[0].graph.dim, initial_max_h, t0, fit_residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{self, FlowConfig, TerminalEvent};
    use crate::geometry::{build_shape, compute_frame, ShapeSpec};
    use crate::monitors::{self, MonitorParams};

    fn rescaled_sphere_slice() -> RescaledFrame {
        // Unit-sphere flow at t = 0.1: R = sqrt(0.6), rescaled radius sqrt(6).
        let r = 0.6_f64.sqrt();
        let mut g = build_shape(&ShapeSpec::Sphere { radius: r }, 2, 256).unwrap();
        g.t = 0.1;
        let f = compute_frame(&g).unwrap();
        continuous_rescale(&f, 0.1).unwrap()
    }

    #[test]
    fn rescale_sphere_closed_forms() {
        let rf = rescaled_sphere_slice();
        let want_norm = 6.0_f64.sqrt();
        assert!((rf.tau - 0.1_f64.ln()).abs() < 1e-14);
        for i in 0..rf.x_norm_sq.len() {
            assert!((rf.x_norm_sq[i].sqrt() - want_norm).abs() < 1e-12);
            // Speed -sqrt(t) (H + <X,nu>/2t) at t = 0.1 is about -2.0412.
            assert!((rf.speed[i] + 2.041241452319315).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_at_unit_time_is_identity() {
        let g = build_shape(&ShapeSpec::Sphere { radius: 0.8 }, 2, 64).unwrap();
        let mut g = g;
        g.t = 1.0;
        let f = compute_frame(&g).unwrap();
        let rf = continuous_rescale(&f, 1.0).unwrap();
        assert_eq!(rf.tau, 0.0);
        for i in 0..f.num_nodes() {
            assert_eq!(rf.pos_a[i], f.pos_a[i]);
            assert_eq!(rf.pos_b[i], f.pos_b[i]);
        }
    }

    #[test]
    fn rescale_rejects_nonpositive_time() {
        let g = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 2, 64).unwrap();
        let f = compute_frame(&g).unwrap();
        assert!(matches!(
            continuous_rescale(&f, 0.0),
            Err(RescaleError::NonpositiveTime(_))
        ));
    }

    #[test]
    fn f_identity_with_unrescaled_quantity() {
        // F = 2 sqrt(t) F~ to relative 1e-12 on a non-round slice.
        let g0 = build_shape(&ShapeSpec::PerturbedSphere { amplitude: 0.1, frequency: 3 }, 1, 128)
            .unwrap();
        let mut g = g0;
        g.t = 0.05;
        let f = compute_frame(&g).unwrap();
        let rf = continuous_rescale(&f, g.t).unwrap();
        let f_vals = monitors::star_f(&f, g.t, 1.0, 0.0);
        for i in 0..f.num_nodes() {
            let lhs = f_vals[i];
            let rhs = 2.0 * g.t.sqrt() * rf.f_tilde[i];
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn weighted_area_sphere_quadrature() {
        let rf = rescaled_sphere_slice();
        let area = weighted_area(&rf).unwrap();
        let exact = sphere_weighted_area(2, 6.0_f64.sqrt());
        assert!(
            (area - exact).abs() < 1e-3 * exact,
            "area {area} vs closed form {exact}"
        );
        // Closed-form anchors: omega_2 * 6 * e^1.5 and the radius-3 encloser.
        assert!((exact - 4.0 * std::f64::consts::PI * 6.0 * 1.5_f64.exp()).abs() < 1e-9 * exact);
        let enc = sphere_weighted_area(2, 3.0);
        assert!((enc - 4.0 * std::f64::consts::PI * 9.0 * 2.25_f64.exp()).abs() < 1e-9 * enc);
        // Degenerate radius-zero sphere weighs nothing.
        assert_eq!(sphere_weighted_area(2, 0.0), 0.0);
    }

    #[test]
    fn weighted_area_overflow_guard() {
        let mut rf = rescaled_sphere_slice();
        rf.x_norm_sq[5] = 4.0 * 601.0;
        assert!(matches!(weighted_area(&rf), Err(RescaleError::OverflowGuard(_))));
    }

    #[test]
    fn one_sided_check_sphere_cases() {
        let rf = rescaled_sphere_slice();
        let max_norm = rf.max_x_norm();
        // Strictly larger enclosers pass, the tight one passes within slack.
        let results = one_sided_check(&rf, &[max_norm, 1.2 * max_norm, 3.0]).unwrap();
        assert!(results.iter().all(|&(_, pass)| pass), "{results:?}");
        // Radius 2 < sqrt(6) is not enclosing.
        assert!(matches!(
            one_sided_check(&rf, &[2.0]),
            Err(RescaleError::NotEnclosing { .. })
        ));
    }

    fn short_sphere_run() -> flow::RunOutput {
        let cfg = FlowConfig {
            shape: ShapeSpec::Sphere { radius: 1.0 },
            n: 2,
            intervals: 96,
            cfl_geom: 0.2,
            cfl_curv: 0.2,
            stop_amax: None,
            stop_rmin: None,
            t_max: 1.0,
            monitor_every: 1000,
            a1: 1.0,
            a2: 0.0,
        };
        let mon = MonitorParams { ladder: vec![0.5, 2.0, 8.0, 32.0], z_images: 16, a1: 1.0, a2: 0.0 };
        flow::run(&cfg, &mon).unwrap()
    }

    #[test]
    fn parabolic_rescale_scaling_laws() {
        let out = short_sphere_run();
        let traj = &out.trajectory;
        let t0 = traj.t0_estimate.unwrap().t0;
        for lambda in [0.5, 2.0, 10.0] {
            let mapped = parabolic_rescale(traj, 0.0, lambda).unwrap();
            for (a, b) in traj.checkpoints.iter().zip(&mapped.checkpoints) {
                assert!((b.t - lambda * lambda * a.t).abs() <= 1e-12 * a.t.abs().max(1e-300));
                let fa = compute_frame(&a.graph).unwrap();
                let fb = compute_frame(&b.graph).unwrap();
                for i in 0..fa.num_nodes() {
                    let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1e-300);
                    assert!(rel(fa.mean_curv[i] / lambda, fb.mean_curv[i]) < 1e-10);
                    assert!(rel(fa.kappa_profile[i] / lambda, fb.kappa_profile[i]) < 1e-10);
                    assert!(
                        rel(fa.area_elem[i] * lambda.powi(fa.dim as i32), fb.area_elem[i]) < 1e-10
                    );
                }
            }
            // lambda chosen as max H of a slice normalizes that slice to H = 1.
            let ck = &traj.checkpoints[3];
            let norm = parabolic_rescale(traj, t0, ck.max_h).unwrap();
            let normalized = norm
                .checkpoints
                .iter()
                .find(|c| (c.t - ck.max_h * ck.max_h * (ck.t - t0)).abs() < 1e-9)
                .expect("matching slice");
            assert!((normalized.max_h - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn parabolic_rescale_alpha_covariance() {
        // Implied alpha scales by lambda^2 exactly (1e-12 relative).
        let out = short_sphere_run();
        let ck = &out.trajectory.checkpoints[2];
        let frame = compute_frame(&ck.graph).unwrap();
        let alpha_of = |frame: &crate::geometry::SurfaceFrame, t: f64| -> f64 {
            let fv = monitors::star_f(frame, t, 1.0, 0.0);
            let (zs, zp) = monitors::z_extremes(frame, 16);
            monitors::noncollapsing_report(&fv, &zs, &zp)
                .unwrap()
                .alpha_int
                .unwrap()
        };
        let base = alpha_of(&frame, ck.t);
        for lambda in [0.5_f64, 2.0, 10.0] {
            let mapped = parabolic_rescale(&out.trajectory, 0.0, lambda).unwrap();
            let mck = mapped
                .checkpoints
                .iter()
                .find(|c| (c.t - lambda * lambda * ck.t).abs() < 1e-12 * ck.t.max(1e-300))
                .unwrap();
            let mframe = compute_frame(&mck.graph).unwrap();
            let alpha = alpha_of(&mframe, mck.t);
            let rel = (alpha - lambda * lambda * base).abs() / (lambda * lambda * base);
            assert!(rel < 1e-12, "lambda {lambda}: rel {rel:.2e}");
        }
    }

    #[test]
    fn parabolic_rescale_empty_window() {
        let out = short_sphere_run();
        // Recentering before the earliest checkpoint leaves no window.
        let mut late = out.trajectory.clone();
        late.checkpoints.retain(|c| c.t > 0.01);
        assert!(!late.checkpoints.is_empty());
        assert!(matches!(
            parabolic_rescale(&late, 0.005, 2.0),
            Err(RescaleError::EmptyWindow(_))
        ));
        let empty = Trajectory {
            checkpoints: vec![],
            terminal: TerminalEvent::TimeCeiling,
            t0_estimate: None,
        };
        assert!(matches!(
            parabolic_rescale(&empty, 0.0, 2.0),
            Err(RescaleError::EmptyWindow(_))
        ));
    }

    fn synthetic_sample(ratios: Vec<f64>, h2: f64, max_h: f64, t: f64, d: f64) -> BlowupSample {
        BlowupSample { t, max_h, ratios, h2_gap: h2, diameter: d, angle: 0.0 }
    }

    #[test]
    fn classifier_exact_synthetic_models() {
        // Shrinking round sphere in R^3: ratios (1/2, 1/2), H^2 gap 1.
        let sphere: Vec<BlowupSample> = (0..5)
            .map(|j| synthetic_sample(vec![0.5, 0.5], 1.0, 10.0 * (j + 1) as f64, 0.1 * j as f64, 1.0))
            .collect();
        let rep = classify_samples(&sphere, 2, 1.0, 1.0, 1e-9).unwrap();
        assert_eq!(rep.classification, Classification::Sphere);
        assert!(rep.residual < 1e-6);

        // Shrinking round cylinder: ratios (0, 1), H^2 gap 1/2.
        let cyl: Vec<BlowupSample> = (0..5)
            .map(|j| synthetic_sample(vec![0.0, 1.0], 0.5, 10.0 * (j + 1) as f64, 0.1 * j as f64, 3.0))
            .collect();
        let rep = classify_samples(&cyl, 2, 1.0, 1.0, 1e-9).unwrap();
        assert_eq!(rep.classification, Classification::Cylinder);
        assert!(rep.residual < 1e-6);

        // Flat data: H ~ 0 classifies as a halfspace before any growth gate.
        let flat: Vec<BlowupSample> = (0..5)
            .map(|j| synthetic_sample(vec![0.5, 0.5], 0.0, 1e-9, 0.1 * j as f64, 5.0))
            .collect();
        let rep = classify_samples(&flat, 2, 1e-9, 1.0, 1e-9).unwrap();
        assert_eq!(rep.classification, Classification::Halfspace);
        assert!(rep.residual < 1e-6);
    }

    #[test]
    fn classifier_no_blowup_and_unresolved() {
        let slow: Vec<BlowupSample> = (0..5)
            .map(|j| synthetic_sample(vec![0.5, 0.5], 1.0, 2.0 + 0.1 * j as f64, 0.1 * j as f64, 1.0))
            .collect();
        assert!(matches!(
            classify_samples(&slow, 2, 1.0, 1.0, 1e-9),
            Err(RescaleError::NoBlowup { .. })
        ));
        let junk: Vec<BlowupSample> = (0..5)
            .map(|j| synthetic_sample(vec![0.3, 0.7], 0.75, 100.0 * (j + 1) as f64, 0.1 * j as f64, 1.0))
            .collect();
        let rep = classify_samples(&junk, 2, 1.0, 1.0, 1e-9).unwrap();
        assert_eq!(rep.classification, Classification::Unresolved);
        assert!(rep.residual > CLASSIFY_RESIDUAL_CEILING);
    }

    #[test]
    fn sphere_run_classifies_as_sphere() {
        let out = short_sphere_run();
        let est = out.trajectory.t0_estimate.unwrap();
        let rep = classify_tangent_flow(&out.trajectory, est.t0, est.residual).unwrap();
        assert_eq!(rep.classification, Classification::Sphere);
        assert!((rep.samples.last().unwrap().h2_gap - 1.0).abs() < 0.05);
        let ratios = &rep.samples.last().unwrap().ratios;
        assert!(ratios.iter().all(|r| (r - 0.5).abs() < 1e-6));
        assert!(out.trajectory.terminal == TerminalEvent::RadialFloor);
        assert!(rep.scales.windows(2).all(|w| w[0] < w[1]));
    }
}
