//! Radial-graph representation of star-shaped hypersurfaces and the
//! extrinsic geometry computed from it.
//!
//! Two symmetry reductions are supported:
//!
//! - `Curve2d`: a closed curve in the plane, `r(theta)` with
//!   `theta in [0, 2*pi)` periodic (hypersurface dimension n = 1);
//! - `Axisym`: a hypersurface of revolution in `R^{n+1}`, `r(phi)` with
//!   `phi in [0, pi]` and SO(n) symmetry about the last coordinate axis.
//!
//! Everything is discretized with second-order centered finite differences
//! on a uniform angular grid. At the `Axisym` poles the stencils use
//! symmetric ghost nodes, `r(-phi) = r(phi)`, which also enforces the pole
//! regularity condition `r'(0) = r'(pi) = 0` exactly.
//!
//! Sign conventions: `nu` is the outward unit normal and the principal
//! curvatures are the eigenvalues of the differential of the Gauss map, so
//! a round sphere of radius R has `lambda_i = 1/R` and `H = n/R`. In polar
//! form both modes share
//!
//! ```text
//! kappa_profile = (r^2 + 2 r'^2 - r r'') / w^3,   w = sqrt(r^2 + r'^2),
//! <X, nu> = r^2 / w,
//! ```
//!
//! and the surface of revolution adds `n - 1` rotational curvatures
//! `kappa_rot = nu_rho / rho`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Radial gauge ceiling: `|r'|/r` beyond this means the surface is about to
/// stop being a radial graph, and the run must fail loudly.
pub const GAUGE_CEILING: f64 = 50.0;

/// Minimum number of angular intervals.
pub const MIN_GRID: usize = 16;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("NON_STAR_SHAPED: {0}")]
    NonStarShaped(String),
    #[error("BAD_GRID: N = {0} is below the minimum of 16")]
    BadGrid(usize),
    #[error("DEGENERATE: max |r'|/r = {gauge:.3e} exceeds the gauge ceiling {ceiling}")]
    Degenerate { gauge: f64, ceiling: f64 },
    #[error("CSV error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Symmetry reduction of the hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Closed plane curve, n = 1, periodic grid on [0, 2*pi).
    Curve2d,
    /// Surface of revolution, n >= 2, grid on [0, pi] including both poles.
    Axisym,
}

impl Mode {
    pub fn angular_extent(self) -> f64 {
        match self {
            Mode::Curve2d => 2.0 * PI,
            Mode::Axisym => PI,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Curve2d => write!(f, "CURVE_2D"),
            Mode::Axisym => write!(f, "AXISYM"),
        }
    }
}

/// Initial shape descriptors for fixture generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Sphere {
        radius: f64,
    },
    /// `r = 1 + amplitude * cos(frequency * angle)`.
    PerturbedSphere {
        amplitude: f64,
        frequency: u32,
    },
    /// Polar form of an axis-aligned ellipse, Curve2d only.
    Ellipse {
        a: f64,
        b: f64,
    },
    /// Two bulbs joined by a mean-convex quadratic waist at phi = pi/2,
    /// Axisym only. The profile is the implicit surface of revolution
    /// `rho^2 = (a^2 - z^2)(z^2 + b)^(2 sharpness) / C` with `a` the pole
    /// distance, scaled so the bulb thickness is `bulb_radius` and the
    /// waist radius is exactly `neck_radius`. Symmetric about phi = pi/2
    /// with the origin at the waist center.
    Dumbbell {
        bulb_radius: f64,
        neck_radius: f64,
        #[serde(default = "default_sharpness")]
        sharpness: f64,
    },
}

fn default_sharpness() -> f64 {
    2.0
}

/// Log-polar dumbbell profile
/// `r(phi) = neck * exp(A sigma(cos^2 phi))`, `A = ln(bulb/neck)`,
/// `sigma(x) = s2 x + (1 - s2) x^2`.
///
/// The log form bounds the radial gauge by construction (|r'|/r =
/// A |d sigma/d phi|). The waist at phi = pi/2 is an exact quadratic
/// minimum of the cylindrical profile, with positive mean curvature when
/// the waist strength w = A s2 lies in (1/2, 1), so the pinch focuses
/// there; the poles carry lobes of polar radius `bulb`.
struct DumbbellParams {
    neck: f64,
    log_contrast: f64,
    s2: f64,
}

impl DumbbellParams {
    /// `sharpness` sets the waist strength w = 0.3 * sharpness; the
    /// default 2.0 gives w = 0.6, a gently pinching hyperbola waist.
    fn fit(bulb: f64, neck: f64, sharpness: f64) -> Result<Self, GeometryError> {
        let w = 0.3 * sharpness;
        if !(bulb > 0.0 && neck > 0.0 && neck < bulb) {
            return Err(GeometryError::NonStarShaped(format!(
                "dumbbell needs 0 < neck < bulb, got ({bulb}, {neck})"
            )));
        }
        if !(w > 0.5 && w < 1.0) {
            return Err(GeometryError::NonStarShaped(format!(
                "dumbbell sharpness {sharpness} leaves the pinching window (1.67, 3.33)"
            )));
        }
        let log_contrast = (bulb / neck).ln();
        let s2 = w / log_contrast;
        // Contrast floor: keeps the waist the narrowest point by a clear
        // margin so the pinch focuses there.
        if s2 >= 0.75 {
            return Err(GeometryError::NonStarShaped(format!(
                "dumbbell contrast {:.3} too small for waist strength {w}",
                bulb / neck
            )));
        }
        Ok(DumbbellParams { neck, log_contrast, s2 })
    }

    fn polar_radius(&self, phi: f64) -> f64 {
        let c = phi.cos();
        let x = c * c;
        let sigma = self.s2 * x + (1.0 - self.s2) * x * x;
        self.neck * (self.log_contrast * sigma).exp()
    }
}

/// Symmetry-reduced star-shaped hypersurface: radial values on a uniform
/// angular grid, plus the hypersurface dimension and the current flow time.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGraph {
    /// Hypersurface dimension n (ambient dimension n + 1).
    pub dim: usize,
    pub mode: Mode,
    /// Flow time, length^2 units.
    pub t: f64,
    /// Radial distance per node. Curve2d stores N nodes on [0, 2*pi);
    /// Axisym stores N + 1 nodes on [0, pi] including both poles.
    pub r: Vec<f64>,
    /// Number of angular intervals N; the grid spacing is extent / N.
    pub intervals: usize,
}

impl RadialGraph {
    pub fn new(dim: usize, mode: Mode, t: f64, r: Vec<f64>, intervals: usize) -> Result<Self, GeometryError> {
        if intervals < MIN_GRID {
            return Err(GeometryError::BadGrid(intervals));
        }
        let expected = match mode {
            Mode::Curve2d => intervals,
            Mode::Axisym => intervals + 1,
        };
        if r.len() != expected {
            return Err(GeometryError::Csv {
                line: 0,
                msg: format!("node count {} does not match N = {}", r.len(), intervals),
            });
        }
        if mode == Mode::Curve2d && dim != 1 {
            return Err(GeometryError::NonStarShaped(format!(
                "CURVE_2D requires n = 1, got n = {dim}"
            )));
        }
        if mode == Mode::Axisym && dim < 2 {
            return Err(GeometryError::NonStarShaped(format!(
                "AXISYM requires n >= 2, got n = {dim}"
            )));
        }
        for (i, &ri) in r.iter().enumerate() {
            if !ri.is_finite() || ri <= 0.0 {
                return Err(GeometryError::NonStarShaped(format!(
                    "r[{i}] = {ri} is not positive"
                )));
            }
        }
        Ok(Self { dim, mode, t, r, intervals })
    }

    pub fn num_nodes(&self) -> usize {
        self.r.len()
    }

    /// Uniform grid spacing h = extent / N.
    pub fn spacing(&self) -> f64 {
        self.mode.angular_extent() / self.intervals as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn min_r(&self) -> f64 {
        self.r.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_r(&self) -> f64 {
        self.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First and second angular derivatives of r at node i (centered,
    /// periodic wrap for Curve2d, symmetric ghosts at the Axisym poles).
    pub fn derivs(&self, i: usize) -> (f64, f64) {
        let h = self.spacing();
        let r = &self.r;
        let nn = r.len();
        let (prev, next) = match self.mode {
            Mode::Curve2d => (r[(i + nn - 1) % nn], r[(i + 1) % nn]),
            Mode::Axisym => {
                if i == 0 {
                    (r[1], r[1])
                } else if i == nn - 1 {
                    (r[nn - 2], r[nn - 2])
                } else {
                    (r[i - 1], r[i + 1])
                }
            }
        };
        let d1 = (next - prev) / (2.0 * h);
        let d2 = (next - 2.0 * r[i] + prev) / (h * h);
        (d1, d2)
    }
}

/// Per-node extrinsic geometry of a radial graph, plus the global scalars
/// needed by the monitors.
#[derive(Debug, Clone)]
pub struct SurfaceFrame {
    pub dim: usize,
    pub mode: Mode,
    pub t: f64,
    /// Grid spacing of the underlying graph.
    pub h: f64,
    /// Profile-plane position, (x, y) for Curve2d and (rho, z) for Axisym.
    pub pos_a: Vec<f64>,
    pub pos_b: Vec<f64>,
    /// Outward unit normal in the profile plane.
    pub nu_a: Vec<f64>,
    pub nu_b: Vec<f64>,
    /// Profile principal curvature.
    pub kappa_profile: Vec<f64>,
    /// Rotational principal curvature (multiplicity n - 1); zero for Curve2d.
    pub kappa_rot: Vec<f64>,
    /// Mean curvature H = sum of principal curvatures.
    pub mean_curv: Vec<f64>,
    /// |A|^2 = sum of squared principal curvatures.
    pub second_form_sq: Vec<f64>,
    /// Support function <X, nu>.
    pub support: Vec<f64>,
    /// Area element weight, including the rotational factor for Axisym;
    /// the total area is sum(area_elem) * h.
    pub area_elem: Vec<f64>,
    /// Norm of the derivative of the second fundamental form along the
    /// profile direction.
    pub grad_a_norm: Vec<f64>,
    /// Metric factor w = sqrt(r^2 + r'^2) per node.
    pub metric_w: Vec<f64>,
    /// Extrinsic diameter (rotational images accounted for in Axisym).
    pub diameter: f64,
    /// beta = max(max |A|, diameter); the scale constant of the flow bounds.
    pub beta: f64,
}

impl SurfaceFrame {
    pub fn num_nodes(&self) -> usize {
        self.mean_curv.len()
    }

    /// Smallest principal curvature at node i.
    pub fn lambda_min(&self, i: usize) -> f64 {
        match self.mode {
            Mode::Curve2d => self.kappa_profile[i],
            Mode::Axisym => self.kappa_profile[i].min(self.kappa_rot[i]),
        }
    }

    /// Principal curvatures at node i, ascending. Rotational multiplicity
    /// is collapsed to one entry plus a count.
    pub fn principal_ratios_sorted(&self, i: usize) -> Vec<f64> {
        let h = self.mean_curv[i];
        let mut v = match self.mode {
            Mode::Curve2d => vec![self.kappa_profile[i] / h],
            Mode::Axisym => {
                let mut v = vec![self.kappa_profile[i] / h];
                for _ in 0..self.dim - 1 {
                    v.push(self.kappa_rot[i] / h);
                }
                v
            }
        };
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite curvature ratios"));
        v
    }

    pub fn max_abs_a(&self) -> f64 {
        self.second_form_sq
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max)
            .sqrt()
    }

    pub fn max_h(&self) -> f64 {
        self.mean_curv.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_h(&self) -> f64 {
        self.mean_curv.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        // Fixed accumulation order keeps results identical across thread counts.
        self.area_elem.iter().sum::<f64>() * self.h
    }

    pub fn max_x_norm(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.num_nodes() {
            m = m.max(self.pos_a[i].hypot(self.pos_b[i]));
        }
        m
    }
}

/// Surface area of the unit m-sphere S^m: 2 pi^{(m+1)/2} / Gamma((m+1)/2).
pub fn unit_sphere_area(m: usize) -> f64 {
    // Gamma((m+1)/2) by the half-integer recurrence.
    let half = (m + 1) as f64 / 2.0;
    let mut gamma = if (m + 1) % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if (m + 1) % 2 == 0 { 1.0 } else { 0.5 };
    while x < half - 0.25 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(half) / gamma
}

/// Build a fixture shape at t = 0.
pub fn build_shape(spec: &ShapeSpec, dim: usize, intervals: usize) -> Result<RadialGraph, GeometryError> {
    if intervals < MIN_GRID {
        return Err(GeometryError::BadGrid(intervals));
    }
    let mode = if dim == 1 { Mode::Curve2d } else { Mode::Axisym };
    match spec {
        ShapeSpec::Ellipse { .. } if mode != Mode::Curve2d => {
            return Err(GeometryError::NonStarShaped(
                "ellipse is a CURVE_2D fixture; use n = 1".into(),
            ));
        }
        ShapeSpec::Dumbbell { .. } if mode != Mode::Axisym => {
            return Err(GeometryError::NonStarShaped(
                "dumbbell is an AXISYM fixture; use n >= 2".into(),
            ));
        }
        _ => {}
    }
    let nodes = match mode {
        Mode::Curve2d => intervals,
        Mode::Axisym => intervals + 1,
    };
    let h = mode.angular_extent() / intervals as f64;
    let dumbbell = match spec {
        ShapeSpec::Dumbbell { bulb_radius, neck_radius, sharpness } => {
            Some(DumbbellParams::fit(*bulb_radius, *neck_radius, *sharpness)?)
        }
        _ => None,
    };
    let mut r = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let ang = i as f64 * h;
        let ri = match *spec {
            ShapeSpec::Sphere { radius } => radius,
            ShapeSpec::PerturbedSphere { amplitude, frequency } => {
                1.0 + amplitude * (frequency as f64 * ang).cos()
            }
            ShapeSpec::Ellipse { a, b } => {
                let (s, c) = ang.sin_cos();
                a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
            }
            ShapeSpec::Dumbbell { .. } => {
                dumbbell.as_ref().expect("params fitted above").polar_radius(ang)
            }
        };
        if !ri.is_finite() || ri <= 0.0 {
            return Err(GeometryError::NonStarShaped(format!(
                "shape yields r = {ri} at angle {ang}"
            )));
        }
        r.push(ri);
    }
    let g = RadialGraph::new(dim, mode, 0.0, r, intervals)?;
    // A positive radial graph always has <X, nu> = r^2/w > 0; the gauge
    // ceiling still rejects shapes too steep to trust the representation.
    let frame = compute_frame(&g)?;
    if star_gauge(&frame) <= 0.0 {
        return Err(GeometryError::NonStarShaped("support function is not positive".into()));
    }
    Ok(g)
}

/// Compute all per-node extrinsic geometry of a radial graph.
pub fn compute_frame(g: &RadialGraph) -> Result<SurfaceFrame, GeometryError> {
    let nn = g.num_nodes();
    let n = g.dim;
    let h = g.spacing();

    let mut gauge_max = 0.0_f64;
    let mut pos_a = vec![0.0; nn];
    let mut pos_b = vec![0.0; nn];
    let mut nu_a = vec![0.0; nn];
    let mut nu_b = vec![0.0; nn];
    let mut kp = vec![0.0; nn];
    let mut krot = vec![0.0; nn];
    let mut mean = vec![0.0; nn];
    let mut a2 = vec![0.0; nn];
    let mut supp = vec![0.0; nn];
    let mut dmu = vec![0.0; nn];
    let mut ws = vec![0.0; nn];

    let rot_area = if g.mode == Mode::Axisym { unit_sphere_area(n - 1) } else { 1.0 };

    for i in 0..nn {
        let r = g.r[i];
        let (r1, r2) = g.derivs(i);
        gauge_max = gauge_max.max(r1.abs() / r);
        let w = (r * r + r1 * r1).sqrt();
        let ang = g.angle(i);
        let (s, c) = ang.sin_cos();
        // Curve2d: position (r cos, r sin), normal ((r c + r' s), (r s - r' c)) / w.
        // Axisym: position (rho, z) = (r s, r c), normal ((r s - r' c), (r c + r' s)) / w.
        let (pa, pb, na, nb) = match g.mode {
            Mode::Curve2d => (r * c, r * s, (r * c + r1 * s) / w, (r * s - r1 * c) / w),
            Mode::Axisym => (r * s, r * c, (r * s - r1 * c) / w, (r * c + r1 * s) / w),
        };
        pos_a[i] = pa;
        pos_b[i] = pb;
        nu_a[i] = na;
        nu_b[i] = nb;
        ws[i] = w;

        let kappa_p = (r * r + 2.0 * r1 * r1 - r * r2) / (w * w * w);
        kp[i] = kappa_p;
        let kappa_r = if g.mode == Mode::Axisym {
            if i == 0 || i == nn - 1 {
                // Poles are umbilic; the rotational curvature limit equals
                // the profile curvature there.
                kappa_p
            } else {
                na / pa
            }
        } else {
            0.0
        };
        krot[i] = kappa_r;

        let (hh, aa) = match g.mode {
            Mode::Curve2d => (kappa_p, kappa_p * kappa_p),
            Mode::Axisym => (
                kappa_p + (n - 1) as f64 * kappa_r,
                kappa_p * kappa_p + (n - 1) as f64 * kappa_r * kappa_r,
            ),
        };
        mean[i] = hh;
        a2[i] = aa;
        supp[i] = r * r / w;
        dmu[i] = match g.mode {
            Mode::Curve2d => w,
            Mode::Axisym => rot_area * pa.powi((n - 1) as i32) * w,
        };
    }

    if gauge_max > GAUGE_CEILING {
        return Err(GeometryError::Degenerate { gauge: gauge_max, ceiling: GAUGE_CEILING });
    }

    // |grad A| along the profile: arc-length derivative of the principal
    // curvatures, with the same ghost-node conventions as for r.
    let deriv_along = |f: &[f64], i: usize| -> f64 {
        let (prev, next) = match g.mode {
            Mode::Curve2d => (f[(i + nn - 1) % nn], f[(i + 1) % nn]),
            Mode::Axisym => {
                if i == 0 {
                    (f[1], f[1])
                } else if i == nn - 1 {
                    (f[nn - 2], f[nn - 2])
                } else {
                    (f[i - 1], f[i + 1])
                }
            }
        };
        (next - prev) / (2.0 * h)
    };
    let mut grad_a = vec![0.0; nn];
    for i in 0..nn {
        let dkp = deriv_along(&kp, i) / ws[i];
        let v = match g.mode {
            Mode::Curve2d => dkp.abs(),
            Mode::Axisym => {
                let dkr = deriv_along(&krot, i) / ws[i];
                (dkp * dkp + (n - 1) as f64 * dkr * dkr).sqrt()
            }
        };
        grad_a[i] = v;
    }

    let diameter = match g.mode {
        Mode::Curve2d => {
            let mut d = 0.0_f64;
            for i in 0..nn {
                for j in (i + 1)..nn {
                    let dx = pos_a[i] - pos_a[j];
                    let dy = pos_b[i] - pos_b[j];
                    d = d.max(dx * dx + dy * dy);
                }
            }
            d.sqrt()
        }
        Mode::Axisym => {
            // Antipodal azimuthal images realize the maximum over the
            // rotation, so the profile pairs give the exact diameter.
            let mut d = 0.0_f64;
            for i in 0..nn {
                for j in i..nn {
                    let dr = pos_a[i] + pos_a[j];
                    let dz = pos_b[i] - pos_b[j];
                    d = d.max(dr * dr + dz * dz);
                }
            }
            d.sqrt()
        }
    };

    let max_a = a2.iter().cloned().fold(0.0_f64, f64::max).sqrt();

    Ok(SurfaceFrame {
        dim: n,
        mode: g.mode,
        t: g.t,
        h,
        pos_a,
        pos_b,
        nu_a,
        nu_b,
        kappa_profile: kp,
        kappa_rot: krot,
        mean_curv: mean,
        second_form_sq: a2,
        support: supp,
        area_elem: dmu,
        grad_a_norm: grad_a,
        metric_w: ws,
        diameter,
        beta: max_a.max(diameter),
    })
}

/// Minimum of the support function over the surface. Positive means the
/// surface is star-shaped about the origin.
pub fn star_gauge(f: &SurfaceFrame) -> f64 {
    f.support.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Laplace-Beltrami operator of an axisymmetric scalar field on the
/// surface, discretized in conservative form so constants are annihilated
/// exactly: (1/(J w)) d/dphi ((J/w) f_phi) with J = rho^{n-1} for Axisym
/// and J = 1 for Curve2d. At the Axisym poles the coordinate-singular form
/// is replaced by the umbilic limit n * f_ss.
pub fn laplace_beltrami(f: &SurfaceFrame, field: &[f64]) -> Vec<f64> {
    let nn = f.num_nodes();
    let h = f.h;
    let n = f.dim;
    let jac = |i: usize| -> f64 {
        match f.mode {
            Mode::Curve2d => 1.0,
            Mode::Axisym => f.pos_a[i].powi((n - 1) as i32),
        }
    };
    let mut coeff = vec![0.0; nn];
    for i in 0..nn {
        coeff[i] = jac(i) / f.metric_w[i];
    }
    let mut out = vec![0.0; nn];
    let interior = |i: usize, im: usize, ip: usize| -> f64 {
        let ap = 0.5 * (coeff[i] + coeff[ip]);
        let am = 0.5 * (coeff[i] + coeff[im]);
        (ap * (field[ip] - field[i]) - am * (field[i] - field[im]))
            / (h * h * jac(i) * f.metric_w[i])
    };
    match f.mode {
        Mode::Curve2d => {
            for i in 0..nn {
                out[i] = interior(i, (i + nn - 1) % nn, (i + 1) % nn);
            }
        }
        Mode::Axisym => {
            for i in 1..nn - 1 {
                out[i] = interior(i, i - 1, i + 1);
            }
            // Pole limit: by symmetry f'(pole) = 0 and the surface Laplacian
            // tends to n * f_ss, with f_ss = 2 (f_1 - f_0) / (h w)^2.
            let ds0 = h * f.metric_w[0];
            out[0] = n as f64 * 2.0 * (field[1] - field[0]) / (ds0 * ds0);
            let dsn = h * f.metric_w[nn - 1];
            out[nn - 1] = n as f64 * 2.0 * (field[nn - 2] - field[nn - 1]) / (dsn * dsn);
        }
    }
    out
}

/// Serialize a graph to the fixture CSV format:
/// a `# n=<n> mode=<mode> t=<t>` header line, then `angle,r` rows.
pub fn graph_to_csv(g: &RadialGraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("# n={} mode={} t={}\n", g.dim, g.mode, fmt_float(g.t)));
    for i in 0..g.num_nodes() {
        out.push_str(&format!("{},{}\n", fmt_float(g.angle(i)), fmt_float(g.r[i])));
    }
    out
}

/// Parse the fixture CSV format. Never panics on malformed input.
pub fn graph_from_csv(text: &str) -> Result<RadialGraph, GeometryError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(GeometryError::Csv { line: 1, msg: "empty input".into() })?;
    let header = header.trim();
    if !header.starts_with('#') {
        return Err(GeometryError::Csv { line: 1, msg: "missing `# n=... mode=... t=...` header".into() });
    }
    let mut dim: Option<usize> = None;
    let mut mode: Option<Mode> = None;
    let mut t: Option<f64> = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            dim = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("mode=") {
            mode = match v {
                "CURVE_2D" => Some(Mode::Curve2d),
                "AXISYM" => Some(Mode::Axisym),
                _ => None,
            };
        } else if let Some(v) = tok.strip_prefix("t=") {
            t = v.parse().ok();
        }
    }
    let dim = dim.ok_or(GeometryError::Csv { line: 1, msg: "bad or missing n=".into() })?;
    let mode = mode.ok_or(GeometryError::Csv { line: 1, msg: "bad or missing mode=".into() })?;
    let t = t.ok_or(GeometryError::Csv { line: 1, msg: "bad or missing t=".into() })?;
    if !t.is_finite() || t < 0.0 {
        return Err(GeometryError::Csv { line: 1, msg: format!("bad time {t}") });
    }

    let mut r = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (a, v) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(v), None) => (a, v),
            _ => {
                return Err(GeometryError::Csv { line: idx + 1, msg: "expected `angle,r`".into() });
            }
        };
        let ang: f64 = a.trim().parse().map_err(|_| GeometryError::Csv {
            line: idx + 1,
            msg: format!("bad angle {a:?}"),
        })?;
        let val: f64 = v.trim().parse().map_err(|_| GeometryError::Csv {
            line: idx + 1,
            msg: format!("bad radius {v:?}"),
        })?;
        if !ang.is_finite() {
            return Err(GeometryError::Csv { line: idx + 1, msg: "non-finite angle".into() });
        }
        if !val.is_finite() || val <= 0.0 {
            return Err(GeometryError::NonStarShaped(format!("r = {val} at line {}", idx + 1)));
        }
        r.push(val);
    }
    let intervals = match mode {
        Mode::Curve2d => r.len(),
        Mode::Axisym => r.len().saturating_sub(1),
    };
    RadialGraph::new(dim, mode, t, r, intervals)
}

/// 17-significant-digit float rendering; round-trips f64 exactly and maps
/// infinities to the `inf` sentinel.
pub fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}
