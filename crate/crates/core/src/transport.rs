//! Tensor fibers and parallel transport along radial geodesics.
//!
//! Fibers of `T^{a} tensor (T^*)^{b}` carry complex components in the chart
//! coordinate frame. Transport integrates a full tangent basis outward from
//! the base point (jointly with the geodesic), then inverts the basis matrix
//! once; the induced action on a fiber contracts every contravariant axis
//! with the vector matrix and every covariant axis with its inverse
//! transpose.

use nalgebra::DMatrix;
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geodesics::{integrate_geodesic, GeodesicPath};
use crate::geometry::{ChartPoint, ManifoldChart, TangentVector};
use crate::operators::TensorSection;

/// Determinant floor below which a transport basis counts as singular.
const SINGULAR_DET: f64 = 1e-12;

/// Tensor valence: `contravariant` copies of `T` and `covariant` copies of
/// `T^*`. The fiber dimension is `n^(a+b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorType {
    pub contravariant: usize,
    pub covariant: usize,
}

impl TensorType {
    pub const fn new(contravariant: usize, covariant: usize) -> Self {
        Self {
            contravariant,
            covariant,
        }
    }

    pub const fn scalar() -> Self {
        Self::new(0, 0)
    }

    pub const fn vector() -> Self {
        Self::new(1, 0)
    }

    pub const fn covector() -> Self {
        Self::new(0, 1)
    }

    pub fn rank(&self) -> usize {
        self.contravariant + self.covariant
    }

    pub fn fiber_dim(&self, n: usize) -> usize {
        n.pow(self.rank() as u32)
    }

    /// Axis lengths of the component array: contravariant axes first.
    pub fn shape(&self, n: usize) -> Vec<usize> {
        vec![n; self.rank()]
    }
}

impl std::fmt::Display for TensorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.contravariant, self.covariant)
    }
}

/// A fiber of `T^{a} tensor (T^*)^{b}` with complex components in the chart
/// frame; axis order is all contravariant axes, then all covariant axes.
#[derive(Debug, Clone)]
pub struct FiberValue {
    pub ttype: TensorType,
    pub comps: ArrayD<Complex64>,
}

impl FiberValue {
    pub fn new(ttype: TensorType, comps: ArrayD<Complex64>) -> Result<Self> {
        let n = comps.shape().first().copied().unwrap_or(1);
        let expected = ttype.shape(if ttype.rank() == 0 { 1 } else { n });
        if ttype.rank() != comps.ndim()
            || (ttype.rank() > 0 && comps.shape().iter().any(|&s| s != n))
        {
            return Err(Error::ShapeMismatch {
                expected,
                got: comps.shape().to_vec(),
            });
        }
        Ok(Self { ttype, comps })
    }

    pub fn zeros(ttype: TensorType, n: usize) -> Self {
        Self {
            ttype,
            comps: ArrayD::zeros(IxDyn(&ttype.shape(n))),
        }
    }

    pub fn scalar(value: Complex64) -> Self {
        Self {
            ttype: TensorType::scalar(),
            comps: ArrayD::from_elem(IxDyn(&[]), value),
        }
    }

    pub fn scalar_value(&self) -> Complex64 {
        self.comps.iter().next().copied().unwrap_or_default()
    }

    /// Row-major flattening of the components.
    pub fn flatten(&self) -> Vec<Complex64> {
        self.comps.iter().copied().collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &FiberValue) -> f64 {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            ttype: self.ttype,
            comps: self.comps.mapv(|c| c * factor),
        }
    }

    pub fn add(&self, other: &FiberValue) -> Result<Self> {
        if self.ttype != other.ttype || self.comps.shape() != other.comps.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.comps.shape().to_vec(),
                got: other.comps.shape().to_vec(),
            });
        }
        Ok(Self {
            ttype: self.ttype,
            comps: &self.comps + &other.comps,
        })
    }

    /// Tensor product, concatenating contravariant and covariant axes.
    pub fn tensor_product(&self, other: &FiberValue) -> FiberValue {
        let ttype = TensorType::new(
            self.ttype.contravariant + other.ttype.contravariant,
            self.ttype.covariant + other.ttype.covariant,
        );
        let a = &self.comps;
        let b = &other.comps;
        let mut shape: Vec<usize> = Vec::new();
        // interleave so that axis order stays contra-then-co
        let (ac, av) = (self.ttype.contravariant, self.ttype.covariant);
        let (bc, bv) = (other.ttype.contravariant, other.ttype.covariant);
        let n = a
            .shape()
            .first()
            .or_else(|| b.shape().first())
            .copied()
            .unwrap_or(1);
        shape.extend(std::iter::repeat_n(n, ac + bc + av + bv));
        let mut out = ArrayD::zeros(IxDyn(&shape));
        for (ia, va) in a.indexed_iter() {
            for (ib, vb) in b.indexed_iter() {
                let mut idx = Vec::with_capacity(shape.len());
                idx.extend_from_slice(&ia.slice()[..ac]);
                idx.extend_from_slice(&ib.slice()[..bc]);
                idx.extend_from_slice(&ia.slice()[ac..]);
                idx.extend_from_slice(&ib.slice()[bc..]);
                out[IxDyn(&idx)] = *va * *vb;
            }
        }
        FiberValue { ttype, comps: out }
    }
}

/// Contract one axis of a complex fiber array with a real matrix:
/// `out[k, rest] = sum_l m[k, l] a[l, rest]`.
pub(crate) fn apply_matrix_to_axis(
    a: &ArrayD<Complex64>,
    m: &DMatrix<f64>,
    axis: usize,
) -> ArrayD<Complex64> {
    let n = m.nrows();
    let mut out = ArrayD::zeros(a.raw_dim());
    for (idx, val) in a.indexed_iter() {
        let l = idx[axis];
        let mut target = idx.slice().to_vec();
        for k in 0..n {
            let c = m[(k, l)];
            if c != 0.0 {
                target[axis] = k;
                out[IxDyn(&target)] += val * c;
            }
        }
    }
    out
}

/// Parallel transport of fibers from the exp point (`source`) back to the
/// base point (`target`): a linear isometry per tensor type, induced by the
/// tangent action `vector_matrix` and its inverse transpose on covectors.
#[derive(Debug, Clone)]
pub struct TransportOperator {
    pub source: ChartPoint,
    pub target: ChartPoint,
    pub vector_matrix: DMatrix<f64>,
    pub covector_matrix: DMatrix<f64>,
    /// Outward action (target -> source) on tangent components; kept because
    /// holonomy compositions and oracles need both directions.
    pub forward_matrix: DMatrix<f64>,
}

impl TransportOperator {
    pub(crate) fn from_forward_basis(
        source: ChartPoint,
        target: ChartPoint,
        forward: DMatrix<f64>,
    ) -> Result<Self> {
        let det = forward.determinant();
        if det.abs() < SINGULAR_DET {
            return Err(Error::SingularTransport { det });
        }
        let inverse = forward
            .clone()
            .try_inverse()
            .ok_or(Error::SingularTransport { det })?;
        // covector_matrix = (vector_matrix)^{-T} = forward^T
        let covector_matrix = forward.transpose();
        Ok(Self {
            source,
            target,
            vector_matrix: inverse,
            covector_matrix,
            forward_matrix: forward,
        })
    }

    pub fn identity(point: ChartPoint, n: usize) -> Self {
        Self {
            source: point.clone(),
            target: point,
            vector_matrix: DMatrix::identity(n, n),
            covector_matrix: DMatrix::identity(n, n),
            forward_matrix: DMatrix::identity(n, n),
        }
    }
}

/// Integrate the basis-transport ODE `dV^k + Gamma^k_{ij} dgamma^i V^j = 0`
/// along the given geodesic path (same RK4 parameter grid) and return the
/// exp-point-to-base transport operator.
pub fn transport_along(chart: &ManifoldChart, path: &GeodesicPath) -> Result<TransportOperator> {
    let start = path.start();
    let result = integrate_geodesic(
        chart,
        &start.position.coords,
        &start.velocity,
        path.step_count,
        false,
        true,
    )?;
    let forward = result.forward_basis.expect("transport was requested");
    TransportOperator::from_forward_basis(
        ChartPoint::new(result.final_position),
        start.position.clone(),
        forward,
    )
}

/// One-pass exponential + transport used by the pullback machinery: returns
/// the endpoint and the transport operator from the endpoint back to `x`.
pub(crate) fn exp_and_transport(
    chart: &ManifoldChart,
    x: &ChartPoint,
    xi_comps: &[f64],
    steps: usize,
) -> Result<(ChartPoint, TransportOperator)> {
    let result = integrate_geodesic(chart, &x.coords, xi_comps, steps, false, true)?;
    let endpoint = ChartPoint::new(result.final_position);
    let op = TransportOperator::from_forward_basis(
        endpoint.clone(),
        x.clone(),
        result.forward_basis.expect("transport was requested"),
    )?;
    Ok((endpoint, op))
}

/// Apply the induced fiber transport: vector matrix on every contravariant
/// axis, covector matrix on every covariant axis. Scalars pass through.
pub fn apply_transport(op: &TransportOperator, v: &FiberValue) -> Result<FiberValue> {
    let n = op.vector_matrix.nrows();
    if v.ttype.rank() > 0 && v.comps.shape().iter().any(|&s| s != n) {
        return Err(Error::ShapeMismatch {
            expected: v.ttype.shape(n),
            got: v.comps.shape().to_vec(),
        });
    }
    let mut comps = v.comps.clone();
    for axis in 0..v.ttype.contravariant {
        comps = apply_matrix_to_axis(&comps, &op.vector_matrix, axis);
    }
    for k in 0..v.ttype.covariant {
        let axis = v.ttype.contravariant + k;
        comps = apply_matrix_to_axis(&comps, &op.covector_matrix, axis);
    }
    Ok(FiberValue {
        ttype: v.ttype,
        comps,
    })
}

/// Evaluate the section at `exp_{g,x}(xi)` and transport the fiber back to
/// `x`: the composite `tau_x u(exp_{g,x}(xi))`.
pub fn transport_field_pullback(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    xi: &TangentVector,
    steps: usize,
) -> Result<FiberValue> {
    if xi.base != *x {
        return Err(Error::BaseMismatch {
            expected: x.coords.clone(),
            got: xi.base.coords.clone(),
        });
    }
    let speed = chart.tangent_norm(x, &xi.comps)?;
    let radius = chart.inj_radius_at(x);
    if speed >= radius {
        return Err(Error::OutsideInjectivity { speed, radius });
    }
    let (endpoint, op) = exp_and_transport(chart, x, &xi.comps, steps)?;
    let value = u.eval(&chart.wrapped(&endpoint));
    apply_transport(&op, &value)
}

/// Metric norm of a fiber: converts every axis to the orthonormal frame
/// (inverse frame on contravariant axes, frame transpose on covariant axes)
/// and takes the Euclidean norm of the resulting components.
pub fn fiber_norm(chart: &ManifoldChart, x: &ChartPoint, v: &FiberValue) -> Result<f64> {
    let frame = chart.orthonormal_frame_at(x)?;
    // chart -> frame on tangent components is coframe^T; on cotangent
    // components it is frame^T
    let to_frame_vec = frame.coframe.transpose();
    let to_frame_cov = frame.frame.transpose();
    let mut comps = v.comps.clone();
    for axis in 0..v.ttype.contravariant {
        comps = apply_matrix_to_axis(&comps, &to_frame_vec, axis);
    }
    for k in 0..v.ttype.covariant {
        let axis = v.ttype.contravariant + k;
        comps = apply_matrix_to_axis(&comps, &to_frame_cov, axis);
    }
    Ok(comps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
}

/// Pairing `<alpha, v>` of a covector fiber with a vector fiber.
pub fn fiber_pairing(alpha: &FiberValue, v: &FiberValue) -> Result<Complex64> {
    if alpha.ttype != TensorType::covector() || v.ttype != TensorType::vector() {
        return Err(Error::TypeMismatch(format!(
            "pairing needs (0,1) and (1,0), got {} and {}",
            alpha.ttype, v.ttype
        )));
    }
    Ok(alpha
        .comps
        .iter()
        .zip(v.comps.iter())
        .map(|(a, b)| a * b)
        .sum())
}
