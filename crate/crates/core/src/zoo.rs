//! The manifold zoo: concrete charts with closed-form geometry.
//!
//! Members: `euclidean(n)`, `flat_torus(periods)`, `sphere2(radius)`,
//! `poincare_disk()` and `surface_of_revolution(tube, center)` (a torus of
//! revolution). The sphere and the disk also carry closed-form exponential
//! and transport maps used as oracles by the test suites.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{ChartSpec, ClosedFormGeodesics, ManifoldChart};

/// Polar cutoff of the (theta, phi) sphere chart. Geodesics may approach the
/// poles up to this margin; base points should stay well inside (the
/// operational window used by experiments is theta in [0.2, pi - 0.2]).
pub const SPHERE_POLE_MARGIN: f64 = 0.05;

/// Flat `R^n` with the identity metric.
pub fn euclidean(dim: usize) -> ManifoldChart {
    let n = dim;
    ManifoldChart::from_spec(ChartSpec {
        name: format!("euclidean{n}"),
        dim: n,
        metric: Arc::new(move |_, out| {
            out.fill(0.0);
            for i in 0..n {
                out[i * n + i] = 1.0;
            }
        }),
        christoffel: Some(Arc::new(|_, out| out.fill(0.0))),
        inj_radius: Arc::new(|_| f64::INFINITY),
        chart_bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
        periodicity: vec![None; n],
        sample_region: vec![(-1.0, 1.0); n],
        closed_form: Some(Arc::new(FlatClosedForm { periods: None })),
    })
}

/// Flat torus `R^n / (period_i Z)` with the identity metric.
pub fn flat_torus(periods: &[f64]) -> ManifoldChart {
    let n = periods.len();
    let periods = periods.to_vec();
    let min_period = periods.iter().cloned().fold(f64::INFINITY, f64::min);
    ManifoldChart::from_spec(ChartSpec {
        name: format!("flat_torus{n}"),
        dim: n,
        metric: Arc::new(move |_, out| {
            out.fill(0.0);
            for i in 0..n {
                out[i * n + i] = 1.0;
            }
        }),
        christoffel: Some(Arc::new(|_, out| out.fill(0.0))),
        // half the shortest closed geodesic
        inj_radius: Arc::new(move |_| min_period / 2.0),
        chart_bounds: periods.iter().map(|&p| (0.0, p)).collect(),
        periodicity: periods.iter().map(|&p| Some(p)).collect(),
        sample_region: periods.iter().map(|&p| (0.0, p)).collect(),
        closed_form: Some(Arc::new(FlatClosedForm {
            periods: Some(periods.clone()),
        })),
    })
}

/// Round 2-sphere of the given radius in the (theta, phi) chart,
/// metric `r^2 (dtheta^2 + sin^2 theta dphi^2)`.
#[allow(clippy::identity_op, clippy::erasing_op)] // flat index k*n*n + i*n + j
pub fn sphere2(radius: f64) -> ManifoldChart {
    let r2 = radius * radius;
    ManifoldChart::from_spec(ChartSpec {
        name: "sphere2".to_string(),
        dim: 2,
        metric: Arc::new(move |x, out| {
            let s = x[0].sin();
            out[0] = r2;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = r2 * s * s;
        }),
        christoffel: Some(Arc::new(|x, out| {
            let (s, c) = x[0].sin_cos();
            out.fill(0.0);
            // Gamma^theta_{phi phi} = -sin cos ; Gamma^phi_{theta phi} = cot
            out[0 * 4 + 1 * 2 + 1] = -s * c;
            out[1 * 4 + 0 * 2 + 1] = c / s;
            out[1 * 4 + 1 * 2 + 0] = c / s;
        })),
        // antipodal cut locus
        inj_radius: Arc::new(move |_| PI * radius),
        chart_bounds: vec![(SPHERE_POLE_MARGIN, PI - SPHERE_POLE_MARGIN), (0.0, TAU)],
        periodicity: vec![None, Some(TAU)],
        // randomized suites run geodesics of arc up to ~0.6 from sampled
        // points; keep that much margin to the polar cutoff
        sample_region: vec![(0.7, PI - 0.7), (0.0, TAU)],
        closed_form: Some(Arc::new(SphereClosedForm { radius })),
    })
}

/// Poincare disk with metric `4 / (1 - |z|^2)^2 (dx^2 + dy^2)`, curvature -1.
/// The chart box stays strictly inside the unit disk.
pub fn poincare_disk() -> ManifoldChart {
    ManifoldChart::from_spec(ChartSpec {
        name: "poincare_disk".to_string(),
        dim: 2,
        metric: Arc::new(|x, out| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let c = 4.0 / (1.0 - r2).powi(2);
            out[0] = c;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = c;
        }),
        christoffel: Some(Arc::new(|x, out| {
            // conformal metric e^{2f} delta with f = ln(2/(1-r^2)):
            // Gamma^k_{ij} = delta_{ik} df_j + delta_{jk} df_i - delta_{ij} df_k
            let r2 = x[0] * x[0] + x[1] * x[1];
            let df = [2.0 * x[0] / (1.0 - r2), 2.0 * x[1] / (1.0 - r2)];
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = 0.0;
                        if i == k {
                            v += df[j];
                        }
                        if j == k {
                            v += df[i];
                        }
                        if i == j {
                            v -= df[k];
                        }
                        out[k * 4 + i * 2 + j] = v;
                    }
                }
            }
        })),
        inj_radius: Arc::new(|_| f64::INFINITY),
        chart_bounds: vec![(-0.7, 0.7), (-0.7, 0.7)],
        periodicity: vec![None, None],
        sample_region: vec![(-0.3, 0.3), (-0.3, 0.3)],
        closed_form: Some(Arc::new(DiskClosedForm)),
    })
}

/// Torus of revolution with tube radius `a` and center radius `c` (`c > a`),
/// chart (t, phi), metric `diag(a^2, (c + a cos t)^2)`.
#[allow(clippy::identity_op, clippy::erasing_op)] // flat index k*n*n + i*n + j
pub fn surface_of_revolution(tube_radius: f64, center_radius: f64) -> ManifoldChart {
    let (a, c) = (tube_radius, center_radius);
    // Klingenberg-style conservative bound: meridian half-length pi*a vs
    // conjugate radius pi*sqrt(a(c+a)) from the curvature maximum, with a
    // 0.9 safety factor.
    let inj = 0.9 * (PI * a).min(PI * (a * (c + a)).sqrt());
    ManifoldChart::from_spec(ChartSpec {
        name: "surface_of_revolution".to_string(),
        dim: 2,
        metric: Arc::new(move |x, out| {
            let rr = c + a * x[0].cos();
            out[0] = a * a;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = rr * rr;
        }),
        christoffel: Some(Arc::new(move |x, out| {
            let (s, co) = x[0].sin_cos();
            let rr = c + a * co;
            out.fill(0.0);
            out[0 * 4 + 1 * 2 + 1] = rr * s / a;
            out[1 * 4 + 0 * 2 + 1] = -a * s / rr;
            out[1 * 4 + 1 * 2 + 0] = -a * s / rr;
        })),
        inj_radius: Arc::new(move |_| inj),
        chart_bounds: vec![(0.0, TAU), (0.0, TAU)],
        periodicity: vec![Some(TAU), Some(TAU)],
        sample_region: vec![(0.0, TAU), (0.0, TAU)],
        closed_form: None,
    })
}

/// Parameters for building a zoo member by name.
#[derive(Debug, Clone, Default)]
pub struct ZooParams {
    pub dim: Option<usize>,
    pub radius: Option<f64>,
    pub periods: Option<Vec<f64>>,
    pub tube_radius: Option<f64>,
    pub center_radius: Option<f64>,
}

/// Build a zoo member by name. Unknown names report `UnknownManifold`.
pub fn by_name(name: &str, params: &ZooParams) -> Result<ManifoldChart> {
    match name {
        "euclidean" => {
            let dim = params.dim.unwrap_or(2);
            if dim == 0 {
                return Err(Error::InvalidArgument("euclidean dimension must be >= 1".into()));
            }
            Ok(euclidean(dim))
        }
        "flat_torus" => {
            let periods = params.periods.clone().unwrap_or_else(|| vec![1.0, 1.0]);
            if periods.is_empty() || periods.iter().any(|&p| p <= 0.0) {
                return Err(Error::InvalidArgument("torus periods must be positive".into()));
            }
            Ok(flat_torus(&periods))
        }
        "sphere2" => {
            let radius = params.radius.unwrap_or(1.0);
            if radius <= 0.0 {
                return Err(Error::InvalidArgument("sphere radius must be positive".into()));
            }
            Ok(sphere2(radius))
        }
        "poincare_disk" => Ok(poincare_disk()),
        "surface_of_revolution" => {
            let a = params.tube_radius.unwrap_or(1.0);
            let c = params.center_radius.unwrap_or(3.0);
            if a <= 0.0 || c <= a {
                return Err(Error::InvalidArgument(
                    "surface_of_revolution requires center_radius > tube_radius > 0".into(),
                ));
            }
            Ok(surface_of_revolution(a, c))
        }
        other => Err(Error::UnknownManifold(other.to_string())),
    }
}

/// Names accepted by [`by_name`].
pub const ZOO_NAMES: [&str; 5] = [
    "euclidean",
    "flat_torus",
    "sphere2",
    "poincare_disk",
    "surface_of_revolution",
];

// ---------------------------------------------------------------------------
// closed-form oracles
// ---------------------------------------------------------------------------

struct FlatClosedForm {
    periods: Option<Vec<f64>>,
}

impl ClosedFormGeodesics for FlatClosedForm {
    fn exp(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut end: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
        if let Some(periods) = &self.periods {
            for (c, p) in end.iter_mut().zip(periods) {
                *c = c.rem_euclid(*p);
            }
        }
        (end, v.to_vec())
    }

    fn transport(&self, _x: &[f64], _v: &[f64], w: &[f64]) -> Vec<f64> {
        w.to_vec()
    }
}

struct SphereClosedForm {
    radius: f64,
}

impl SphereClosedForm {
    fn embed(&self, x: &[f64]) -> [f64; 3] {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        [self.radius * st * cp, self.radius * st * sp, self.radius * ct]
    }

    /// Coordinate basis vectors pushed to the embedding.
    fn basis(&self, x: &[f64]) -> ([f64; 3], [f64; 3]) {
        let (st, ct) = x[0].sin_cos();
        let (sp, cp) = x[1].sin_cos();
        let e_t = [self.radius * ct * cp, self.radius * ct * sp, -self.radius * st];
        let e_p = [-self.radius * st * sp, self.radius * st * cp, 0.0];
        (e_t, e_p)
    }

    fn push(&self, x: &[f64], v: &[f64]) -> [f64; 3] {
        let (e_t, e_p) = self.basis(x);
        [
            v[0] * e_t[0] + v[1] * e_p[0],
            v[0] * e_t[1] + v[1] * e_p[1],
            v[0] * e_t[2] + v[1] * e_p[2],
        ]
    }

    fn pull(&self, x: &[f64], w: &[f64; 3]) -> Vec<f64> {
        let (e_t, e_p) = self.basis(x);
        let gtt = dot3(&e_t, &e_t);
        let gpp = dot3(&e_p, &e_p);
        vec![dot3(w, &e_t) / gtt, dot3(w, &e_p) / gpp]
    }

    fn chart_of(&self, p: &[f64; 3]) -> Vec<f64> {
        let theta = (p[2] / self.radius).clamp(-1.0, 1.0).acos();
        let phi = p[1].atan2(p[0]).rem_euclid(TAU);
        vec![theta, phi]
    }
}

impl ClosedFormGeodesics for SphereClosedForm {
    fn exp(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.embed(x);
        let vv = self.push(x, v);
        let speed = dot3(&vv, &vv).sqrt();
        if speed == 0.0 {
            return (x.to_vec(), v.to_vec());
        }
        let omega = speed / self.radius;
        let (so, co) = omega.sin_cos();
        let mut end = [0.0; 3];
        let mut vel = [0.0; 3];
        for i in 0..3 {
            end[i] = co * p[i] + so * (self.radius / speed) * vv[i];
            vel[i] = -so * (speed / self.radius) * p[i] + co * vv[i];
        }
        let chart_end = self.chart_of(&end);
        let chart_vel = self.pull(&chart_end, &vel);
        (chart_end, chart_vel)
    }

    fn transport(&self, x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let vv = self.push(x, v);
        let speed = dot3(&vv, &vv).sqrt();
        if speed == 0.0 {
            return w.to_vec();
        }
        let p = self.embed(x);
        let t0 = [vv[0] / speed, vv[1] / speed, vv[2] / speed];
        let phat = [p[0] / self.radius, p[1] / self.radius, p[2] / self.radius];
        // unit normal of the great-circle plane; constant, tangent, parallel
        let nrm = cross3(&phat, &t0);
        let ww = self.push(x, w);
        let a = dot3(&ww, &t0);
        let b = dot3(&ww, &nrm);
        let (end, vel) = {
            let omega = speed / self.radius;
            let (so, co) = omega.sin_cos();
            let mut end = [0.0; 3];
            let mut vel = [0.0; 3];
            for i in 0..3 {
                end[i] = co * p[i] + so * self.radius * t0[i];
                vel[i] = -so * phat[i] + co * t0[i];
            }
            (end, vel)
        };
        let out = [
            a * vel[0] + b * nrm[0],
            a * vel[1] + b * nrm[1],
            a * vel[2] + b * nrm[2],
        ];
        let chart_end = self.chart_of(&end);
        self.pull(&chart_end, &out)
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

struct DiskClosedForm;

impl DiskClosedForm {
    fn lambda(z: (f64, f64)) -> f64 {
        2.0 / (1.0 - (z.0 * z.0 + z.1 * z.1))
    }
}

impl ClosedFormGeodesics for DiskClosedForm {
    fn exp(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        use num_complex::Complex64 as C;
        let p = C::new(x[0], x[1]);
        let v = C::new(v[0], v[1]);
        if v.norm() == 0.0 {
            return (x.to_vec(), vec![0.0, 0.0]);
        }
        // pull back through the Moebius map T(w) = (w + p)/(1 + conj(p) w)
        let v0 = v / (1.0 - p.norm_sqr());
        let s = 2.0 * v0.norm();
        let dir = v0 / v0.norm();
        let pre = (s / 2.0).tanh() * dir;
        let end = (pre + p) / (1.0 + p.conj() * pre);
        let dt = (1.0 - p.norm_sqr()) / (1.0 + p.conj() * pre).powi(2);
        let sech = 1.0 / (s / 2.0).cosh();
        let vel = dt * (s / 2.0) * sech * sech * dir;
        (vec![end.re, end.im], vec![vel.re, vel.im])
    }

    fn transport(&self, x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        use num_complex::Complex64 as C;
        let v_c = C::new(v[0], v[1]);
        if v_c.norm() == 0.0 {
            return w.to_vec();
        }
        let w_c = C::new(w[0], w[1]);
        let lam0 = Self::lambda((x[0], x[1]));
        // conformal surface: a g-orthonormal pair at z is (T, iT)
        let t_start = v_c / (lam0 * v_c.norm());
        let n_start = C::i() * t_start;
        let g = |z: (f64, f64), a: C, b: C| -> f64 {
            let l = Self::lambda(z);
            l * l * (a * b.conj()).re
        };
        let a = g((x[0], x[1]), w_c, t_start);
        let b = g((x[0], x[1]), w_c, n_start);
        let (end, vel) = self.exp(x, v);
        let vel_c = C::new(vel[0], vel[1]);
        let lam1 = Self::lambda((end[0], end[1]));
        let t_end = vel_c / (lam1 * vel_c.norm());
        let n_end = C::i() * t_end;
        let out = a * t_end + b * n_end;
        vec![out.re, out.im]
    }
}
