//! Explicit time stepping of the radial-graph mean curvature flow.
//!
//! The graph PDE is `dr/dt = -H w / r` with `w = sqrt(r^2 + r'^2)`, which is
//! normal speed `-H` converted to radial speed. Steps are classical RK4
//! under a dual CFL ceiling: a grid-limited parabolic step
//! `cfl_geom * (h * min r)^2` and a curvature-limited step
//! `cfl_curv / max |A|^2`.
//!
//! A run terminates at exactly one of: the radial gauge degenerating, the
//! curvature ceiling, the radial floor, or the time ceiling. Checkpoints are
//! cut every time max H grows by sqrt(2), which for a type-I singularity is
//! a geometric schedule in (t0 - t) with ratio 2.

use crate::geometry::{self, Mode, RadialGraph, ShapeSpec, SurfaceFrame, GAUGE_CEILING};
use crate::monitors::{self, MonitorError, MonitorParams, StarMonitorRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Number of trailing checkpoints used by the singular-time fit.
pub const FIT_WINDOW: usize = 8;

/// Gauge-growth checkpoint cadence; quarter-octave keeps the approach to
/// a DEGENERATE stop densely sampled without touching well-gauged runs.
pub const GAUGE_CKPT_FACTOR: f64 = 1.189207115002721;

/// Relative fit residual above which the singular-time fit is rejected.
pub const FIT_RESIDUAL_CEILING: f64 = 0.2;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("BLOWUP: non-finite radius after step at t = {0}")]
    Blowup(f64),
    #[error("FIT_FAILED: {0}")]
    FitFailed(String),
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
}

/// Flow run configuration. `stop_amax` and `stop_rmin` default to
/// `1000 / max r0` and `3 h min r0` when absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowConfig {
    pub shape: ShapeSpec,
    pub n: usize,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub cfl_geom: f64,
    pub cfl_curv: f64,
    #[serde(rename = "stop_Amax", default, skip_serializing_if = "Option::is_none")]
    pub stop_amax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_rmin: Option<f64>,
    pub t_max: f64,
    pub monitor_every: u64,
    pub a1: f64,
    pub a2: f64,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::InvalidConfig(m));
        if !(self.cfl_geom > 0.0 && self.cfl_geom < 1.0) {
            return bad(format!("cfl_geom = {} must lie in (0, 1)", self.cfl_geom));
        }
        if !(self.cfl_curv > 0.0 && self.cfl_curv < 1.0) {
            return bad(format!("cfl_curv = {} must lie in (0, 1)", self.cfl_curv));
        }
        if self.a1 + self.a2 <= 0.0 {
            return bad(format!("a1 + a2 = {} must be positive", self.a1 + self.a2));
        }
        if let Some(a) = self.stop_amax {
            if a <= 0.0 {
                return bad("stop_Amax must be positive".into());
            }
        }
        if let Some(r) = self.stop_rmin {
            if r <= 0.0 {
                return bad("stop_rmin must be positive".into());
            }
        }
        if !(self.t_max >= 0.0) {
            return bad("t_max must be nonnegative".into());
        }
        if self.monitor_every == 0 {
            return bad("monitor_every must be at least 1".into());
        }
        Ok(())
    }
}

/// The terminal event of a run; exactly one per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TerminalEvent {
    Degenerate,
    CurvatureCeiling,
    RadialFloor,
    TimeCeiling,
}

/// Cheap per-state extremes gathered during the first RK stage.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub min_r: f64,
    pub max_gauge: f64,
    pub max_a2: f64,
    pub max_h: f64,
    pub min_f: f64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub t: f64,
    /// Step index at which the checkpoint was cut.
    pub step: u64,
    pub graph: RadialGraph,
    pub max_h: f64,
    pub max_abs_a: f64,
    pub min_r: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SingularTimeEstimate {
    pub t0: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub terminal: TerminalEvent,
    pub t0_estimate: Option<SingularTimeEstimate>,
}

/// Scalars of the initial slice that parameterize the run-level bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InitialSummary {
    pub diameter: f64,
    pub beta: f64,
    pub star_gauge: f64,
    pub max_h: f64,
    pub max_abs_a: f64,
    pub min_r: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EffectiveLimits {
    pub stop_amax: f64,
    pub stop_rmin: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub records: Vec<StarMonitorRecord>,
    pub initial: InitialSummary,
    pub effective: EffectiveLimits,
    pub steps: u64,
    /// Minimum of F over all nodes of all visited states, not just records.
    pub min_f_over_run: f64,
}

struct Limits {
    stop_amax: f64,
    stop_rmin: f64,
    t_max: f64,
    cfl_geom: f64,
    cfl_curv: f64,
}

enum Advance {
    Stepped,
    Stopped { event: TerminalEvent, pre: StepStats },
}

/// Reusable RK4 workspace. Holds the fixed angle tables and stage buffers.
pub struct Stepper {
    mode: Mode,
    dim: usize,
    h: f64,
    sin_tab: Vec<f64>,
    cos_tab: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    a1: f64,
    a2: f64,
}

impl Stepper {
    pub fn new(g: &RadialGraph, a1: f64, a2: f64) -> Self {
        let nn = g.num_nodes();
        let h = g.spacing();
        let sin_tab: Vec<f64> = (0..nn).map(|i| (i as f64 * h).sin()).collect();
        let cos_tab: Vec<f64> = (0..nn).map(|i| (i as f64 * h).cos()).collect();
        Stepper {
            mode: g.mode,
            dim: g.dim,
            h,
            sin_tab,
            cos_tab,
            k: [vec![0.0; nn], vec![0.0; nn], vec![0.0; nn], vec![0.0; nn]],
            tmp: vec![0.0; nn],
            a1,
            a2,
        }
    }

    /// Radial speed -H w / r per node, plus the state extremes. `t` only
    /// enters the F statistic.
    fn eval(&self, r: &[f64], t: f64, out: &mut [f64]) -> StepStats {
        let nn = r.len();
        let h = self.h;
        let n = self.dim;
        let f_coef = self.a2 + 2.0 * self.a1 * t;
        let mut stats = StepStats {
            min_r: f64::INFINITY,
            max_gauge: 0.0,
            max_a2: 0.0,
            max_h: f64::NEG_INFINITY,
            min_f: f64::INFINITY,
        };
        let mut node = |i: usize, prev: f64, next: f64, rot: bool| {
            let ri = r[i];
            let r1 = (next - prev) / (2.0 * h);
            let r2 = (next - 2.0 * ri + prev) / (h * h);
            let w2 = ri * ri + r1 * r1;
            let w = w2.sqrt();
            let kp = (w2 + r1 * r1 - ri * r2) / (w2 * w);
            let (hh, a2v) = if self.mode == Mode::Curve2d {
                (kp, kp * kp)
            } else if rot {
                let s = self.sin_tab[i];
                let c = self.cos_tab[i];
                let kr = (ri * s - r1 * c) / (w * ri * s);
                (
                    kp + (n - 1) as f64 * kr,
                    kp * kp + (n - 1) as f64 * kr * kr,
                )
            } else {
                // Pole: umbilic, all curvatures equal the profile one.
                (n as f64 * kp, n as f64 * kp * kp)
            };
            out[i] = -hh * w / ri;
            stats.min_r = stats.min_r.min(ri);
            stats.max_gauge = stats.max_gauge.max(r1.abs() / ri);
            stats.max_a2 = stats.max_a2.max(a2v);
            stats.max_h = stats.max_h.max(hh);
            stats.min_f = stats.min_f.min(self.a1 * ri * ri / w + f_coef * hh);
        };
        match self.mode {
            Mode::Curve2d => {
                node(0, r[nn - 1], r[1], true);
                for i in 1..nn - 1 {
                    node(i, r[i - 1], r[i + 1], true);
                }
                node(nn - 1, r[nn - 2], r[0], true);
            }
            Mode::Axisym => {
                node(0, r[1], r[1], false);
                for i in 1..nn - 1 {
                    node(i, r[i - 1], r[i + 1], true);
                }
                node(nn - 1, r[nn - 2], r[nn - 2], false);
            }
        }
        stats
    }

    /// Extremes of the current state without stepping.
    pub fn stats(&mut self, g: &RadialGraph) -> StepStats {
        let mut buf = std::mem::take(&mut self.tmp);
        let st = self.eval(&g.r, g.t, &mut buf);
        self.tmp = buf;
        st
    }

    /// One RK4 step with the given dt. Errors mirror the run-level events:
    /// a degenerate gauge or a non-finite state aborts.
    pub fn step_in_place(&mut self, g: &mut RadialGraph, dt: f64) -> Result<StepStats, FlowError> {
        let lim = Limits {
            stop_amax: f64::INFINITY,
            stop_rmin: 0.0,
            t_max: f64::INFINITY,
            cfl_geom: 1.0,
            cfl_curv: 1.0,
        };
        match self.advance_with_dt(g, &lim, Some(dt), |_, _| {})? {
            Advance::Stepped => {
                // Stats describe the pre-step state; re-derive for callers
                // that want the committed one.
                Ok(self.stats(g))
            }
            Advance::Stopped { event, .. } => Err(match event {
                TerminalEvent::Degenerate => {
                    geometry::GeometryError::Degenerate { gauge: f64::NAN, ceiling: GAUGE_CEILING }
                        .into()
                }
                _ => FlowError::Blowup(g.t),
            }),
        }
    }

    fn advance_with_dt<F: FnMut(&RadialGraph, &StepStats)>(
        &mut self,
        g: &mut RadialGraph,
        lim: &Limits,
        forced_dt: Option<f64>,
        mut observe: F,
    ) -> Result<Advance, FlowError> {
        let nn = g.num_nodes();
        let mut k1 = std::mem::take(&mut self.k[0]);
        let pre = self.eval(&g.r, g.t, &mut k1);
        self.k[0] = k1;

        if pre.max_gauge > GAUGE_CEILING {
            return Ok(Advance::Stopped { event: TerminalEvent::Degenerate, pre });
        }
        if pre.max_a2.sqrt() >= lim.stop_amax {
            return Ok(Advance::Stopped { event: TerminalEvent::CurvatureCeiling, pre });
        }
        if pre.min_r <= lim.stop_rmin {
            return Ok(Advance::Stopped { event: TerminalEvent::RadialFloor, pre });
        }
        if g.t >= lim.t_max * (1.0 - 1e-14) {
            return Ok(Advance::Stopped { event: TerminalEvent::TimeCeiling, pre });
        }

        observe(g, &pre);

        let dt_stab = (lim.cfl_geom * (self.h * pre.min_r).powi(2))
            .min(lim.cfl_curv / pre.max_a2.max(1e-300));
        let remaining = lim.t_max - g.t;
        let (dt, landed) = match forced_dt {
            Some(d) => (d, false),
            None => {
                if dt_stab >= remaining {
                    (remaining, true)
                } else {
                    (dt_stab, false)
                }
            }
        };

        // Remaining RK4 stages. Stage stats are only inspected for gauge
        // blowup, which aborts before committing.
        let mut tmp = std::mem::take(&mut self.tmp);
        for stage in 1..4 {
            let (frac, prev_k) = match stage {
                1 => (0.5, 0),
                2 => (0.5, 1),
                _ => (1.0, 2),
            };
            for i in 0..nn {
                tmp[i] = g.r[i] + dt * frac * self.k[prev_k][i];
            }
            let mut kbuf = std::mem::take(&mut self.k[stage]);
            let st = self.eval(&tmp, g.t + dt * frac, &mut kbuf);
            self.k[stage] = kbuf;
            if st.max_gauge > GAUGE_CEILING || !st.max_gauge.is_finite() {
                self.tmp = tmp;
                return Ok(Advance::Stopped { event: TerminalEvent::Degenerate, pre });
            }
        }
        self.tmp = tmp;

        let mut finite = true;
        for i in 0..nn {
            let incr =
                self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i];
            g.r[i] += dt / 6.0 * incr;
            finite &= g.r[i].is_finite() && g.r[i] > 0.0;
        }
        g.t = if landed { lim.t_max } else { g.t + dt };
        if !finite {
            return Err(FlowError::Blowup(g.t));
        }
        Ok(Advance::Stepped)
    }
}

/// Stability step: min(cfl_geom (h min r)^2, cfl_curv / max |A|^2).
pub fn select_dt(g: &RadialGraph, cfl_geom: f64, cfl_curv: f64) -> f64 {
    let mut st = Stepper::new(g, 1.0, 0.0);
    let stats = st.stats(g);
    (cfl_geom * (g.spacing() * stats.min_r).powi(2)).min(cfl_curv / stats.max_a2.max(1e-300))
}

/// One RK4 step of the radial flow; returns the advanced graph.
pub fn step(g: &RadialGraph, dt: f64) -> Result<RadialGraph, FlowError> {
    let mut out = g.clone();
    let mut stepper = Stepper::new(g, 1.0, 0.0);
    stepper.step_in_place(&mut out, dt)?;
    Ok(out)
}

/// Run the flow to its terminal event, recording monitors every
/// `monitor_every` steps and checkpoints on the sqrt(2)-in-max-H cadence.
pub fn run(cfg: &FlowConfig, mon: &MonitorParams) -> Result<RunOutput, FlowError> {
    cfg.validate()?;
    mon.validate().map_err(FlowError::InvalidConfig)?;
    if (mon.a1, mon.a2) != (cfg.a1, cfg.a2) {
        return Err(FlowError::InvalidConfig("monitor (a1, a2) must match the flow".into()));
    }
    let mut g = geometry::build_shape(&cfg.shape, cfg.n, cfg.intervals)?;
    let f0 = geometry::compute_frame(&g)?;
    let initial = InitialSummary {
        diameter: f0.diameter,
        beta: f0.beta,
        star_gauge: geometry::star_gauge(&f0),
        max_h: f0.max_h(),
        max_abs_a: f0.max_abs_a(),
        min_r: g.min_r(),
    };
    let effective = EffectiveLimits {
        stop_amax: cfg.stop_amax.unwrap_or(1000.0 / g.max_r()),
        stop_rmin: cfg.stop_rmin.unwrap_or(3.0 * g.spacing() * g.min_r()),
    };
    let lim = Limits {
        stop_amax: effective.stop_amax,
        stop_rmin: effective.stop_rmin,
        t_max: cfg.t_max,
        cfl_geom: cfg.cfl_geom,
        cfl_curv: cfg.cfl_curv,
    };
    let mut stepper = Stepper::new(&g, cfg.a1, cfg.a2);
    let mut records: Vec<StarMonitorRecord> = Vec::new();
    let mut checkpoints: Vec<Checkpoint> = Vec::new();
    let mut min_f_over_run = f64::INFINITY;
    let mut last_ckpt_maxh = f64::NEG_INFINITY;
    let mut last_ckpt_minr = f64::INFINITY;
    let mut last_ckpt_gauge = f64::INFINITY;
    let mut steps: u64 = 0;

    let terminal = loop {
        let mut observer_err: Option<FlowError> = None;
        let adv = {
            let records = &mut records;
            let checkpoints = &mut checkpoints;
            let min_f = &mut min_f_over_run;
            let last_maxh = &mut last_ckpt_maxh;
            let last_minr = &mut last_ckpt_minr;
            let last_gauge = &mut last_ckpt_gauge;
            let err = &mut observer_err;
            stepper.advance_with_dt(&mut g, &lim, None, |state, pre| {
                *min_f = min_f.min(pre.min_f);
                if steps % cfg.monitor_every == 0 && err.is_none() {
                    match geometry::compute_frame(state)
                        .map_err(FlowError::from)
                        .and_then(|fr| {
                            monitors::record_from_frame(&fr, mon, initial.diameter)
                                .map_err(FlowError::from)
                        }) {
                        Ok(rec) => records.push(rec),
                        Err(e) => *err = Some(e),
                    }
                }
                // Max H growth and min r decay both track (t0 - t)
                // geometrically with ratio 2 for a type-I singularity; the
                // gauge trigger preserves the approach to a DEGENERATE
                // stop, whose terminal state itself has no valid frame.
                if pre.max_h >= SQRT2 * *last_maxh
                    || pre.min_r <= *last_minr / SQRT2
                    || pre.max_gauge >= GAUGE_CKPT_FACTOR * *last_gauge
                {
                    checkpoints.push(Checkpoint {
                        t: state.t,
                        step: steps,
                        graph: state.clone(),
                        max_h: pre.max_h,
                        max_abs_a: pre.max_a2.sqrt(),
                        min_r: pre.min_r,
                    });
                    *last_maxh = pre.max_h;
                    *last_minr = pre.min_r;
                    *last_gauge = pre.max_gauge.max(1.0);
                }
            })?
        };
        if let Some(e) = observer_err {
            return Err(e);
        }
        match adv {
            Advance::Stepped => steps += 1,
            Advance::Stopped { event, pre } => {
                min_f_over_run = min_f_over_run.min(pre.min_f);
                // Terminal state: record and checkpoint it, except when the
                // stop is the gauge ceiling itself, where no valid frame
                // exists; the last valid checkpoint then closes the run.
                if event != TerminalEvent::Degenerate {
                    let fr = geometry::compute_frame(&g)?;
                    let rec = monitors::record_from_frame(&fr, mon, initial.diameter)?;
                    if records.last().map(|r| r.t) != Some(rec.t) {
                        records.push(rec);
                    }
                    if checkpoints.last().map(|c| c.t) != Some(g.t) {
                        checkpoints.push(Checkpoint {
                            t: g.t,
                            step: steps,
                            graph: g.clone(),
                            max_h: pre.max_h,
                            max_abs_a: pre.max_a2.sqrt(),
                            min_r: pre.min_r,
                        });
                    }
                }
                break event;
            }
        }
    };

    let mut trajectory = Trajectory { checkpoints, terminal, t0_estimate: None };
    trajectory.t0_estimate = estimate_singular_time(&trajectory).ok();
    Ok(RunOutput { trajectory, records, initial, effective, steps, min_f_over_run })
}

/// Least-squares fit of max H(t) = c / sqrt(t0 - t) over the trailing
/// checkpoints with increasing max H. The substitution y = 1 / max H^2
/// makes the model linear: y = (t0 - t) / c^2.
pub fn estimate_singular_time(traj: &Trajectory) -> Result<SingularTimeEstimate, FlowError> {
    let cks = &traj.checkpoints;
    let mut increasing: Vec<(f64, f64)> = Vec::new();
    for ck in cks.iter().rev() {
        match increasing.last() {
            Some(&(t_prev, h_prev)) => {
                if ck.max_h < h_prev && ck.t < t_prev {
                    increasing.push((ck.t, ck.max_h));
                } else {
                    break;
                }
            }
            None => increasing.push((ck.t, ck.max_h)),
        }
        if increasing.len() == FIT_WINDOW {
            break;
        }
    }
    if increasing.len() < 5 {
        return Err(FlowError::FitFailed(format!(
            "need at least 5 checkpoints with increasing max H, have {}",
            increasing.len()
        )));
    }
    if increasing.iter().any(|&(_, h)| h <= 0.0) {
        return Err(FlowError::FitFailed("max H must be positive in the fit window".into()));
    }
    increasing.reverse();
    // Early checkpoints may predate the self-similar regime; among the
    // trailing windows of 5 to 8 checkpoints, keep the cleanest fit.
    let mut best: Option<SingularTimeEstimate> = None;
    for k in (5..=increasing.len()).rev() {
        let window = &increasing[increasing.len() - k..];
        if let Ok(est) = fit_inverse_square(window) {
            if best.map_or(true, |b| est.residual < b.residual) {
                best = Some(est);
            }
        }
    }
    match best {
        Some(est) if est.residual <= FIT_RESIDUAL_CEILING => Ok(est),
        Some(est) => Err(FlowError::FitFailed(format!(
            "relative residual {:.3} exceeds 0.2",
            est.residual
        ))),
        None => Err(FlowError::FitFailed("no admissible shrinking fit".into())),
    }
}

fn fit_inverse_square(window: &[(f64, f64)]) -> Result<SingularTimeEstimate, FlowError> {
    let k = window.len() as f64;
    let ys: Vec<f64> = window.iter().map(|&(_, h)| 1.0 / (h * h)).collect();
    let ts: Vec<f64> = window.iter().map(|&(t, _)| t).collect();
    let mean_t = ts.iter().sum::<f64>() / k;
    let mean_y = ys.iter().sum::<f64>() / k;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for i in 0..window.len() {
        stt += (ts[i] - mean_t).powi(2);
        sty += (ts[i] - mean_t) * (ys[i] - mean_y);
    }
    let slope = sty / stt; // expected negative: y decreases toward t0
    let b = -slope;
    if !(b > 0.0) {
        return Err(FlowError::FitFailed(format!("non-shrinking fit, slope {slope:.3e}")));
    }
    let a = mean_y + b * mean_t;
    let t0 = a / b;
    let t_last = *ts.last().expect("nonempty window");
    if !(t0 > t_last) {
        return Err(FlowError::FitFailed(format!("fitted t0 = {t0} not beyond t = {t_last}")));
    }
    let mut ss = 0.0;
    for i in 0..window.len() {
        let fit = a - b * ts[i];
        ss += (ys[i] - fit).powi(2);
    }
    let residual = (ss / k).sqrt() / mean_y;
    Ok(SingularTimeEstimate { t0, residual })
}

/// Frame of a checkpoint, for callers that need full geometry.
pub fn checkpoint_frame(ck: &Checkpoint) -> Result<SurfaceFrame, FlowError> {
    Ok(geometry::compute_frame(&ck.graph)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_shape, ShapeSpec};

    fn sphere_cfg(intervals: usize) -> FlowConfig {
        FlowConfig {
            shape: ShapeSpec::Sphere { radius: 1.0 },
            n: 2,
            intervals,
            cfl_geom: 0.2,
            cfl_curv: 0.2,
            stop_amax: None,
            stop_rmin: None,
            t_max: 1.0,
            monitor_every: 400,
            a1: 1.0,
            a2: 0.0,
        }
    }

    fn mon_params() -> MonitorParams {
        MonitorParams { ladder: vec![0.5, 2.0, 8.0, 32.0], z_images: 32, a1: 1.0, a2: 0.0 }
    }

    #[test]
    fn sphere_single_step_matches_exact_law() {
        let g = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 2, 64).unwrap();
        let g1 = step(&g, 1e-4).unwrap();
        let exact = (1.0_f64 - 4.0 * 1e-4).sqrt();
        for &r in &g1.r {
            assert!((r - exact).abs() < 1e-10, "r = {r}, exact = {exact}");
        }
        assert_eq!(g1.t, 1e-4);
    }

    #[test]
    fn zero_step_is_identity() {
        let g = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 1, 64).unwrap();
        let g1 = step(&g, 0.0).unwrap();
        assert_eq!(g.r, g1.r);
        assert_eq!(g1.t, 0.0);
    }

    #[test]
    fn one_step_respects_comparison_circles() {
        // Enclosing and enclosed circles evolve by R^2 - 2t; avoidance keeps
        // the perturbed curve between them.
        let g = build_shape(&ShapeSpec::PerturbedSphere { amplitude: 0.05, frequency: 2 }, 1, 256)
            .unwrap();
        let (r_max0, r_min0) = (g.max_r(), g.min_r());
        let dt = select_dt(&g, 0.2, 0.2);
        let g1 = step(&g, dt).unwrap();
        let outer = (r_max0 * r_max0 - 2.0 * dt).sqrt();
        let inner = (r_min0 * r_min0 - 2.0 * dt).sqrt();
        // The bump is more curved than its circumscribed circle and the
        // dimple less curved than its inscribed one, so the gaps to the
        // exactly-evolved comparison circles open up from zero.
        assert!(g1.max_r() < r_max0 && g1.max_r() < outer);
        assert!(g1.min_r() < r_min0 && g1.min_r() > inner);
    }

    #[test]
    fn select_dt_examples() {
        // Grid-limited at N = 64 for the unit sphere: 0.2 (h * 1)^2 beats
        // 0.2 / |A|^2 = 0.1.
        let g = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 2, 64).unwrap();
        let dt = select_dt(&g, 0.2, 0.2);
        let h = std::f64::consts::PI / 64.0;
        assert!((dt - 0.2 * h * h).abs() < 1e-15 * dt);
        // Doubling N quarters the grid-limited step.
        let g2 = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 2, 128).unwrap();
        let dt2 = select_dt(&g2, 0.2, 0.2);
        assert!((dt / dt2 - 4.0).abs() < 1e-10);
        // dt is the min of the two ceilings and shrinks monotonically as
        // max |A|^2 grows.
        let g3 = build_shape(
            &ShapeSpec::Dumbbell { bulb_radius: 1.0, neck_radius: 0.15, sharpness: 2.0 },
            2,
            128,
        )
        .unwrap();
        let f3 = crate::geometry::compute_frame(&g3).unwrap();
        let max_a2 = f3.second_form_sq.iter().cloned().fold(0.0_f64, f64::max);
        let h3 = g3.spacing();
        let expect = (0.2 * (h3 * g3.min_r()).powi(2)).min(0.2 / max_a2);
        let dt3 = select_dt(&g3, 0.2, 0.2);
        assert!((dt3 - expect).abs() < 1e-14 * expect);
        let shrunk = build_shape(&ShapeSpec::Sphere { radius: 1e-3 }, 2, 64).unwrap();
        assert!(select_dt(&shrunk, 0.2, 0.2) < dt);
    }

    #[test]
    fn rk4_order_under_dt_halving() {
        // Richardson: err(dt)/err(dt/2) ~ 2^4 for RK4. Compare terminal
        // states at a fixed time reached with dt, dt/2, dt/4.
        let g0 = build_shape(&ShapeSpec::PerturbedSphere { amplitude: 0.1, frequency: 2 }, 1, 64)
            .unwrap();
        let dt = select_dt(&g0, 0.2, 0.2);
        let run_fixed = |substeps: u32| -> Vec<f64> {
            let mut g = g0.clone();
            let mut st = Stepper::new(&g, 1.0, 0.0);
            let n_steps = 16 * substeps;
            for _ in 0..n_steps {
                st.step_in_place(&mut g, dt / substeps as f64).unwrap();
            }
            g.r
        };
        let r1 = run_fixed(1);
        let r2 = run_fixed(2);
        let r4 = run_fixed(4);
        let diff = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        };
        let e1 = diff(&r1, &r2);
        let e2 = diff(&r2, &r4);
        assert!(e1 / e2 > 10.0, "observed ratio {} (e1={e1:.3e}, e2={e2:.3e})", e1 / e2);
    }

    #[test]
    fn sphere_run_reaches_extinction_estimate() {
        let out = run(&sphere_cfg(128), &mon_params()).unwrap();
        assert_eq!(out.trajectory.terminal, TerminalEvent::RadialFloor);
        // Defaulting rules echoed into the effective limits.
        let h = std::f64::consts::PI / 128.0;
        assert!((out.effective.stop_rmin - 3.0 * h).abs() < 1e-15);
        assert!((out.effective.stop_amax - 1000.0).abs() < 1e-12);
        let est = out.trajectory.t0_estimate.expect("fit succeeds");
        assert!((est.t0 - 0.25).abs() < 0.25 * 0.01, "t0 = {}", est.t0);
        assert!(est.residual < 0.05);
        assert!(out.min_f_over_run > 0.0);
        // Checkpoint times strictly increase and records stay ordered.
        let times: Vec<f64> = out.trajectory.checkpoints.iter().map(|c| c.t).collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        let rec_times: Vec<f64> = out.records.iter().map(|r| r.t).collect();
        assert!(rec_times.windows(2).all(|w| w[0] < w[1]));
        assert!(out.trajectory.checkpoints.len() >= 8);
    }

    #[test]
    fn sphere_run_tracks_exact_radius() {
        let out = run(&sphere_cfg(128), &mon_params()).unwrap();
        for ck in &out.trajectory.checkpoints {
            let exact = (1.0 - 4.0 * ck.t).max(0.0).sqrt();
            let mean_r = ck.graph.r.iter().sum::<f64>() / ck.graph.num_nodes() as f64;
            assert!((mean_r - exact).abs() < 1e-6, "t = {}: {} vs {}", ck.t, mean_r, exact);
        }
    }

    #[test]
    fn t_max_zero_yields_time_ceiling() {
        let mut cfg = sphere_cfg(64);
        cfg.t_max = 0.0;
        let out = run(&cfg, &mon_params()).unwrap();
        assert_eq!(out.trajectory.terminal, TerminalEvent::TimeCeiling);
        assert_eq!(out.steps, 0);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.trajectory.checkpoints.len(), 1);
        assert!(out.trajectory.t0_estimate.is_none());
    }

    #[test]
    fn t_max_landing_is_exact() {
        let mut cfg = sphere_cfg(64);
        cfg.t_max = 0.01;
        let out = run(&cfg, &mon_params()).unwrap();
        assert_eq!(out.trajectory.terminal, TerminalEvent::TimeCeiling);
        let last = out.trajectory.checkpoints.last().unwrap();
        assert_eq!(last.t, 0.01);
    }

    #[test]
    fn singular_fit_exact_model() {
        // H(t) = 1/sqrt(0.25 - t) sampled on {0.20 .. 0.24}.
        let g = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 1, 16).unwrap();
        let mk = |t: f64| Checkpoint {
            t,
            step: 0,
            graph: g.clone(),
            max_h: 1.0 / (0.25 - t).sqrt(),
            max_abs_a: 0.0,
            min_r: 1.0,
        };
        let traj = Trajectory {
            checkpoints: vec![mk(0.20), mk(0.21), mk(0.22), mk(0.23), mk(0.24)],
            terminal: TerminalEvent::TimeCeiling,
            t0_estimate: None,
        };
        let est = estimate_singular_time(&traj).unwrap();
        assert!((est.t0 - 0.25).abs() < 1e-6, "t0 = {}", est.t0);
        assert!(est.residual < 1e-8);
    }

    #[test]
    fn singular_fit_rejects_constant_h() {
        let g = build_shape(&ShapeSpec::Sphere { radius: 1.0 }, 1, 16).unwrap();
        let mk = |t: f64, h: f64| Checkpoint {
            t,
            step: 0,
            graph: g.clone(),
            max_h: h,
            max_abs_a: 0.0,
            min_r: 1.0,
        };
        // Constant H: no increasing window of length 5 exists.
        let traj = Trajectory {
            checkpoints: (0..6).map(|i| mk(0.1 * i as f64, 2.0)).collect(),
            terminal: TerminalEvent::TimeCeiling,
            t0_estimate: None,
        };
        assert!(matches!(estimate_singular_time(&traj), Err(FlowError::FitFailed(_))));
        // Decreasing H gives no usable window either.
        let traj2 = Trajectory {
            checkpoints: (0..6).map(|i| mk(0.1 * i as f64, 5.0 - 0.5 * i as f64)).collect(),
            terminal: TerminalEvent::TimeCeiling,
            t0_estimate: None,
        };
        assert!(matches!(estimate_singular_time(&traj2), Err(FlowError::FitFailed(_))));
    }

    #[test]
    fn circle_run_extinction_near_half() {
        // For a unit circle the exact law is R^2 = 1 - 2t, extinct at 0.5.
        let cfg = FlowConfig {
            shape: ShapeSpec::Sphere { radius: 1.0 },
            n: 1,
            intervals: 128,
            cfl_geom: 0.2,
            cfl_curv: 0.2,
            stop_amax: None,
            stop_rmin: None,
            t_max: 1.0,
            monitor_every: 2000,
            a1: 1.0,
            a2: 0.0,
        };
        let out = run(&cfg, &mon_params()).unwrap();
        let est = out.trajectory.t0_estimate.expect("fit succeeds");
        assert!((est.t0 - 0.5).abs() < 0.5 * 0.01, "t0 = {}", est.t0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = sphere_cfg(64);
        cfg.a1 = 0.0;
        cfg.a2 = 0.0;
        assert!(matches!(run(&cfg, &mon_params()), Err(FlowError::InvalidConfig(_))));
        let mut cfg = sphere_cfg(64);
        cfg.cfl_geom = 1.5;
        assert!(cfg.validate().is_err());
    }
}
