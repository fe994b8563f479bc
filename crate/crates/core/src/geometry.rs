//! Chart-based Riemannian geometry: metric, Christoffel symbols and
//! orthonormal frames.
//!
//! A manifold is represented by a single coordinate chart with optional
//! per-axis periodicity. The metric and the connection coefficients are
//! evaluation callbacks; Christoffel symbols either come in closed form or
//! are derived from the metric by central differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array3, ArrayD};

use crate::error::{Error, Result};

/// Default step for finite-difference Christoffel symbols.
pub const DEFAULT_CHRISTOFFEL_STEP: f64 = 1e-4;

/// Residual allowed when checking metric symmetry.
const SYMMETRY_TOL: f64 = 1e-12;

/// A point in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords)
    }
}

/// Tangent vector in the chart coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub comps: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, comps: Vec<f64>) -> Self {
        Self { base, comps }
    }
}

/// Cotangent vector in the chart coordinate coframe.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentVector {
    pub base: ChartPoint,
    pub comps: Vec<f64>,
}

impl CotangentVector {
    pub fn new(base: ChartPoint, comps: Vec<f64>) -> Self {
        Self { base, comps }
    }

    /// Plain component contraction with a tangent vector at the same base.
    pub fn pair(&self, v: &TangentVector) -> f64 {
        self.comps.iter().zip(&v.comps).map(|(a, b)| a * b).sum()
    }
}

/// A `g`-orthonormal basis of the tangent space at a point, together with
/// the dual coframe. Columns of `frame` are tangent vectors in chart
/// components; columns of `coframe` are the dual covectors.
#[derive(Debug, Clone)]
pub struct OrthonormalFrame {
    pub base: ChartPoint,
    pub frame: DMatrix<f64>,
    pub coframe: DMatrix<f64>,
}

impl OrthonormalFrame {
    /// Chart components of the tangent vector with the given frame coordinates.
    pub fn tangent_from_frame(&self, frame_coords: &[f64]) -> Vec<f64> {
        let v = &self.frame * DVector::from_column_slice(frame_coords);
        v.as_slice().to_vec()
    }

    /// Frame coordinates of a tangent vector given in chart components.
    pub fn tangent_to_frame(&self, chart_comps: &[f64]) -> Vec<f64> {
        // frame^{-1} = coframe^T because coframe^T * frame = I.
        let v = self.coframe.transpose() * DVector::from_column_slice(chart_comps);
        v.as_slice().to_vec()
    }

    /// Chart components of the covector with the given dual-frame coordinates.
    pub fn cotangent_from_frame(&self, frame_coords: &[f64]) -> Vec<f64> {
        let v = &self.coframe * DVector::from_column_slice(frame_coords);
        v.as_slice().to_vec()
    }
}

/// How Christoffel symbols are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChristoffelSource {
    ClosedForm,
    FiniteDifference { step: f64 },
}

/// Closed-form geodesic data carried by zoo members that admit it; used as
/// an independent oracle against the integrated geodesics and transports.
pub trait ClosedFormGeodesics: Send + Sync {
    /// Endpoint and endpoint velocity of the geodesic with initial data
    /// `(x, v)` evaluated at parameter 1.
    fn exp(&self, x: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>);

    /// Parallel transport of the tangent vector `w` from `x` to the endpoint
    /// of the geodesic `t -> exp_x(t v)`.
    fn transport(&self, x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64>;
}

type MetricFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type ChristoffelFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type InjRadiusFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One coordinate chart of a Riemannian manifold: dimension, metric field,
/// Christoffel field, injectivity radius, chart bounds and periodicity.
#[derive(Clone)]
pub struct ManifoldChart {
    name: String,
    dim: usize,
    metric: MetricFn,
    christoffel: Option<ChristoffelFn>,
    christoffel_source: ChristoffelSource,
    inj_radius: InjRadiusFn,
    chart_bounds: Vec<(f64, f64)>,
    periodicity: Vec<Option<f64>>,
    sample_region: Vec<(f64, f64)>,
    closed_form: Option<Arc<dyn ClosedFormGeodesics>>,
}

impl fmt::Debug for ManifoldChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("christoffel_source", &self.christoffel_source)
            .finish()
    }
}

/// Builder-style constructor arguments for [`ManifoldChart`].
pub struct ChartSpec {
    pub name: String,
    pub dim: usize,
    pub metric: MetricFn,
    pub christoffel: Option<ChristoffelFn>,
    pub inj_radius: InjRadiusFn,
    pub chart_bounds: Vec<(f64, f64)>,
    pub periodicity: Vec<Option<f64>>,
    pub sample_region: Vec<(f64, f64)>,
    pub closed_form: Option<Arc<dyn ClosedFormGeodesics>>,
}

impl ManifoldChart {
    pub fn from_spec(spec: ChartSpec) -> Self {
        let source = if spec.christoffel.is_some() {
            ChristoffelSource::ClosedForm
        } else {
            ChristoffelSource::FiniteDifference {
                step: DEFAULT_CHRISTOFFEL_STEP,
            }
        };
        Self {
            name: spec.name,
            dim: spec.dim,
            metric: spec.metric,
            christoffel: spec.christoffel,
            christoffel_source: source,
            inj_radius: spec.inj_radius,
            chart_bounds: spec.chart_bounds,
            periodicity: spec.periodicity,
            sample_region: spec.sample_region,
            closed_form: spec.closed_form,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn christoffel_source(&self) -> ChristoffelSource {
        self.christoffel_source
    }

    pub fn chart_bounds(&self) -> &[(f64, f64)] {
        &self.chart_bounds
    }

    pub fn periodicity(&self) -> &[Option<f64>] {
        &self.periodicity
    }

    /// Region used by randomized suites to draw base points.
    pub fn sample_region(&self) -> &[(f64, f64)] {
        &self.sample_region
    }

    pub fn closed_form(&self) -> Option<&Arc<dyn ClosedFormGeodesics>> {
        self.closed_form.as_ref()
    }

    /// Switch to finite-difference Christoffel symbols with the given step.
    pub fn with_finite_difference_christoffels(mut self, step: f64) -> Self {
        self.christoffel = None;
        self.christoffel_source = ChristoffelSource::FiniteDifference { step };
        self
    }

    /// Fault-injection hook: perturb one Christoffel component by `delta`.
    /// Used by the property suite to prove that the metric-compatibility
    /// check actually catches a corrupted connection.
    pub fn with_corrupted_christoffel(mut self, delta: f64) -> Self {
        let dim = self.dim;
        let inner = self.clone();
        let corrupted: ChristoffelFn = Arc::new(move |coords, out| {
            inner.christoffel_into(coords, out);
            out[0] += delta;
            if dim > 1 {
                // keep lower-index symmetry so only compatibility breaks
                let k = 0;
                let (i, j) = (0, 1);
                out[k * dim * dim + i * dim + j] += delta;
                out[k * dim * dim + j * dim + i] += delta;
            }
        });
        self.christoffel = Some(corrupted);
        self.christoffel_source = ChristoffelSource::ClosedForm;
        self
    }

    /// Wrap periodic axes into `[lo, lo + period)`.
    pub fn wrap_coords(&self, coords: &mut [f64]) {
        for (axis, period) in self.periodicity.iter().enumerate() {
            if let Some(p) = period {
                let lo = self.chart_bounds[axis].0;
                coords[axis] = lo + (coords[axis] - lo).rem_euclid(*p);
            }
        }
    }

    /// A copy of the point with periodic axes wrapped.
    pub fn wrapped(&self, x: &ChartPoint) -> ChartPoint {
        let mut coords = x.coords.clone();
        self.wrap_coords(&mut coords);
        ChartPoint::new(coords)
    }

    /// Whether the (wrapped) point lies inside the chart bounds.
    pub fn contains(&self, x: &ChartPoint) -> bool {
        let mut coords = x.coords.clone();
        self.wrap_coords(&mut coords);
        self.coords_inside(&coords)
    }

    pub(crate) fn coords_inside(&self, coords: &[f64]) -> bool {
        coords.iter().enumerate().all(|(axis, &c)| {
            if self.periodicity[axis].is_some() {
                true
            } else {
                let (lo, hi) = self.chart_bounds[axis];
                c >= lo && c <= hi
            }
        })
    }

    fn check_inside(&self, x: &ChartPoint) -> Result<()> {
        if x.coords.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, chart has dimension {}",
                x.coords.len(),
                self.dim
            )));
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfChart {
                coords: x.coords.clone(),
            })
        }
    }

    /// Chart distance between two points, shortest-image per periodic axis.
    pub fn chart_distance(&self, a: &ChartPoint, b: &ChartPoint) -> f64 {
        let mut acc = 0.0;
        for axis in 0..self.dim {
            let mut d = a.coords[axis] - b.coords[axis];
            if let Some(p) = self.periodicity[axis] {
                d = d.rem_euclid(p);
                if d > p / 2.0 {
                    d -= p;
                }
            }
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Raw metric evaluation into a row-major `n*n` buffer (no bounds check).
    pub(crate) fn metric_into(&self, coords: &[f64], out: &mut [f64]) {
        (self.metric)(coords, out);
    }

    /// Metric components at a chart point.
    pub fn metric_at(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check_inside(x)?;
        let n = self.dim;
        let mut buf = vec![0.0; n * n];
        self.metric_into(&x.coords, &mut buf);
        let g = DMatrix::from_row_slice(n, n, &buf);
        for i in 0..n {
            for j in 0..i {
                if (g[(i, j)] - g[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::NotSpd {
                        coords: x.coords.clone(),
                    });
                }
            }
        }
        if g.clone().cholesky().is_none() {
            return Err(Error::NotSpd {
                coords: x.coords.clone(),
            });
        }
        Ok(g)
    }

    /// Inverse metric at a chart point.
    pub fn inverse_metric_at(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        let g = self.metric_at(x)?;
        g.clone().cholesky().map(|c| c.inverse()).ok_or(Error::NotSpd {
            coords: x.coords.clone(),
        })
    }

    /// Squared metric norm of tangent components at a point.
    pub fn tangent_norm_sq(&self, x: &ChartPoint, comps: &[f64]) -> Result<f64> {
        let g = self.metric_at(x)?;
        let v = DVector::from_column_slice(comps);
        Ok((v.transpose() * g * v)[(0, 0)])
    }

    pub fn tangent_norm(&self, x: &ChartPoint, comps: &[f64]) -> Result<f64> {
        Ok(self.tangent_norm_sq(x, comps)?.max(0.0).sqrt())
    }

    /// Squared inverse-metric norm of cotangent components.
    pub fn cotangent_norm_sq(&self, x: &ChartPoint, comps: &[f64]) -> Result<f64> {
        let ginv = self.inverse_metric_at(x)?;
        let v = DVector::from_column_slice(comps);
        Ok((v.transpose() * ginv * v)[(0, 0)])
    }

    /// Christoffel symbols into a flat `n^3` buffer, index `k*n*n + i*n + j`
    /// for Gamma^k_{ij} (no bounds check; hot path of the integrator).
    pub(crate) fn christoffel_into(&self, coords: &[f64], out: &mut [f64]) {
        match (&self.christoffel, self.christoffel_source) {
            (Some(f), _) => f(coords, out),
            (None, ChristoffelSource::FiniteDifference { step }) => {
                self.finite_difference_christoffel(coords, step, out)
            }
            (None, ChristoffelSource::ClosedForm) => {
                unreachable!("closed-form source without a closure")
            }
        }
    }

    /// Christoffel symbols `Gamma^k_{ij}` at a chart point.
    pub fn christoffel_at(&self, x: &ChartPoint) -> Result<Array3<f64>> {
        self.check_inside(x)?;
        let n = self.dim;
        let mut buf = vec![0.0; n * n * n];
        self.christoffel_into(&x.coords, &mut buf);
        Ok(Array3::from_shape_vec((n, n, n), buf).expect("buffer has n^3 entries"))
    }

    /// Central-difference Christoffel symbols from the metric field:
    /// Gamma^k_{ij} = g^{kl} (d_i g_{jl} + d_j g_{il} - d_l g_{ij}) / 2.
    fn finite_difference_christoffel(&self, coords: &[f64], step: f64, out: &mut [f64]) {
        let n = self.dim;
        let mut gp = vec![0.0; n * n];
        let mut gm = vec![0.0; n * n];
        // dg[l][i][j] = d_l g_{ij}
        let mut dg = vec![0.0; n * n * n];
        let mut shifted = coords.to_vec();
        for l in 0..n {
            shifted[l] = coords[l] + step;
            self.metric_into(&shifted, &mut gp);
            shifted[l] = coords[l] - step;
            self.metric_into(&shifted, &mut gm);
            shifted[l] = coords[l];
            for i in 0..n {
                for j in 0..n {
                    dg[l * n * n + i * n + j] = (gp[i * n + j] - gm[i * n + j]) / (2.0 * step);
                }
            }
        }
        let mut g0 = vec![0.0; n * n];
        self.metric_into(coords, &mut g0);
        let g = DMatrix::from_row_slice(n, n, &g0);
        let ginv = g
            .cholesky()
            .map(|c| c.inverse())
            .unwrap_or_else(|| DMatrix::identity(n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += ginv[(k, l)]
                            * (dg[i * n * n + j * n + l] + dg[j * n * n + i * n + l]
                                - dg[l * n * n + i * n + j]);
                    }
                    out[k * n * n + i * n + j] = 0.5 * acc;
                }
            }
        }
    }

    /// Injectivity radius at a chart point (may be infinite).
    pub fn inj_radius_at(&self, x: &ChartPoint) -> f64 {
        (self.inj_radius)(&x.coords)
    }

    /// Deterministic `g`-orthonormal frame: with `g = L L^T` the Cholesky
    /// factorization (L lower triangular), the frame is `F = L^{-T}` and the
    /// coframe is `L`. Then `F^T g F = I` and `coframe^T frame = I`.
    pub fn orthonormal_frame_at(&self, x: &ChartPoint) -> Result<OrthonormalFrame> {
        let g = self.metric_at(x)?;
        let chol = g.cholesky().ok_or(Error::NotSpd {
            coords: x.coords.clone(),
        })?;
        let l = chol.l();
        let frame = l
            .transpose()
            .try_inverse()
            .ok_or(Error::NotSpd {
                coords: x.coords.clone(),
            })?;
        Ok(OrthonormalFrame {
            base: self.wrapped(x),
            frame,
            coframe: l,
        })
    }
}

/// Convenience: flatten an `Array3` Christoffel block for comparisons.
pub fn christoffel_max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Max-norm of a dynamic complex array; used by fiber comparisons.
pub fn max_abs(values: &ArrayD<num_complex::Complex64>) -> f64 {
    values.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
