//! Tensor sections, differential operators of order at most 2, their total
//! symbols, and covariant-derivative application.
//!
//! An operator is `A = sum_r A_r nabla^{p-r}` with coefficients `A_r` in
//! `S^{p-r}T tensor E^* tensor F`, realized as evaluation callbacks that
//! return a multi-array with `p-r` contravariant symbol axes followed by an
//! `F x E` matrix over flattened fibers. The total symbol replaces each
//! covariant derivative by the pairing `2 pi i lambda`; the symbol tensor is
//! contracted against the symbol axes without any factorial normalization,
//! which is what makes the order-2 sphere eigenvalue test come out right.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{Array2, ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, CotangentVector, ManifoldChart, TangentVector};
use crate::transport::{
    apply_matrix_to_axis, apply_transport, exp_and_transport, FiberValue, TensorType,
};

/// Finite-difference step sizes used by the derivative operations.
#[derive(Debug, Clone, Copy)]
pub struct FdSettings {
    /// Step for first chart derivatives of sections.
    pub h_first: f64,
    /// Outer step for nested (second and higher) stencils.
    pub h_nested: f64,
    /// Step for the t-derivatives through the exponential map.
    pub t_step: f64,
    /// Step for chart derivatives of Christoffel symbols.
    pub h_christoffel: f64,
}

impl Default for FdSettings {
    fn default() -> Self {
        Self {
            h_first: 1e-5,
            h_nested: 1e-3,
            t_step: 1e-3,
            h_christoffel: 1e-4,
        }
    }
}

/// Whether a section carries closed-form partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeHint {
    ClosedFormAvailable,
    NumericOnly,
}

type EvalFn = Arc<dyn Fn(&ChartPoint) -> FiberValue + Send + Sync>;
type PartialFn = Arc<dyn Fn(&ChartPoint, &[usize]) -> Option<FiberValue> + Send + Sync>;

/// A smooth field of tensor fibers, supplied as an evaluation callback plus
/// an optional closed-form mixed-partial callback (`axes` lists the
/// differentiation axes of the requested partial, outer first).
#[derive(Clone)]
pub struct TensorSection {
    ttype: TensorType,
    eval: EvalFn,
    partial: Option<PartialFn>,
    zero: bool,
    name: String,
}

impl std::fmt::Debug for TensorSection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorSection")
            .field("ttype", &self.ttype)
            .field("name", &self.name)
            .field("hint", &self.derivative_hint())
            .finish()
    }
}

impl TensorSection {
    pub fn new(ttype: TensorType, name: &str, eval: EvalFn) -> Self {
        Self {
            ttype,
            eval,
            partial: None,
            zero: false,
            name: name.to_string(),
        }
    }

    pub fn with_partials(mut self, partial: PartialFn) -> Self {
        self.partial = Some(partial);
        self
    }

    /// The identically-zero section; inversion short-circuits on it.
    pub fn zero(ttype: TensorType, n: usize) -> Self {
        let mut s = Self::new(
            ttype,
            "zero",
            Arc::new(move |_| FiberValue::zeros(ttype, n)),
        );
        s.partial = Some(Arc::new(move |_, _| Some(FiberValue::zeros(ttype, n))));
        s.zero = true;
        s
    }

    pub fn ttype(&self) -> TensorType {
        self.ttype
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn derivative_hint(&self) -> DerivativeHint {
        if self.partial.is_some() {
            DerivativeHint::ClosedFormAvailable
        } else {
            DerivativeHint::NumericOnly
        }
    }

    pub fn eval(&self, x: &ChartPoint) -> FiberValue {
        (self.eval)(x)
    }

    /// Closed-form mixed partial along the given axes, if available.
    pub fn partial(&self, x: &ChartPoint, axes: &[usize]) -> Option<FiberValue> {
        self.partial.as_ref().and_then(|p| p(x, axes))
    }
}

// ---------------------------------------------------------------------------
// covariant derivatives
// ---------------------------------------------------------------------------

fn stencil_partial(
    chart: &ManifoldChart,
    x: &ChartPoint,
    axis: usize,
    h: f64,
    value: &dyn Fn(&ChartPoint) -> Result<FiberValue>,
) -> Result<FiberValue> {
    let mut plus = x.coords.clone();
    plus[axis] += h;
    let mut minus = x.coords.clone();
    minus[axis] -= h;
    let plus = ChartPoint::new(plus);
    let minus = ChartPoint::new(minus);
    if !chart.contains(&plus) || !chart.contains(&minus) {
        return Err(Error::OutOfChart {
            coords: x.coords.clone(),
        });
    }
    let vp = value(&chart.wrapped(&plus))?;
    let vm = value(&chart.wrapped(&minus))?;
    let scale = Complex64::new(1.0 / (2.0 * h), 0.0);
    Ok(FiberValue {
        ttype: vp.ttype,
        comps: (vp.comps - vm.comps).mapv(|c| c * scale),
    })
}

/// One covariant derivative of a fiber field given by callbacks. The new
/// covariant axis is inserted before the existing covariant axes.
fn cov_derivative_with(
    chart: &ManifoldChart,
    x: &ChartPoint,
    h: f64,
    ttype: TensorType,
    value: &dyn Fn(&ChartPoint) -> Result<FiberValue>,
    closed_partial: &dyn Fn(&ChartPoint, usize) -> Option<FiberValue>,
) -> Result<FiberValue> {
    let n = chart.dim();
    let x = chart.wrapped(x);
    let gamma = chart.christoffel_at(&x)?;
    let u0 = value(&x)?;
    let (a, b) = (ttype.contravariant, ttype.covariant);
    let mut out = ArrayD::<Complex64>::zeros(IxDyn(&vec![n; a + 1 + b]));
    for i in 0..n {
        let mut slice = match closed_partial(&x, i) {
            Some(p) => p,
            None => stencil_partial(chart, &x, i, h, value)?,
        };
        // connection corrections from Gamma(x)
        for s in 0..a {
            let m = nalgebra::DMatrix::from_fn(n, n, |k, l| gamma[(k, i, l)]);
            let corr = apply_matrix_to_axis(&u0.comps, &m, s);
            slice.comps = slice.comps + corr;
        }
        for t in 0..b {
            let m = nalgebra::DMatrix::from_fn(n, n, |j, l| gamma[(l, i, j)]);
            let corr = apply_matrix_to_axis(&u0.comps, &m, a + t);
            slice.comps = slice.comps - corr;
        }
        out.index_axis_mut(Axis(a), i).assign(&slice.comps);
    }
    FiberValue::new(TensorType::new(a, b + 1), out)
}

/// Covariant derivative `nabla u` at `x`: partial derivatives (closed form
/// when the section provides them, central differences otherwise) plus
/// Christoffel corrections on every axis. Result type `(a, b+1)`.
pub fn covariant_derivative(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    fd: &FdSettings,
) -> Result<FiberValue> {
    cov_derivative_with(
        chart,
        x,
        fd.h_first,
        u.ttype(),
        &|y| Ok(u.eval(y)),
        &|y, axis| u.partial(y, &[axis]),
    )
}

/// Second covariant derivative `nabla^2 u` at `x`; axis order is
/// (outer derivative, inner derivative, fiber axes).
///
/// Scalar sections with closed-form second partials take the exact route
/// `nabla^2_{ij} u = d_i d_j u - Gamma^l_{ij} d_l u`; otherwise the outer
/// stencil uses the wider `h_nested` step since its input already carries
/// stencil error.
pub fn second_covariant_derivative(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    fd: &FdSettings,
) -> Result<FiberValue> {
    if u.ttype() == TensorType::scalar() {
        if let Some(hessian) = scalar_hessian_from_partials(chart, u, x)? {
            return Ok(hessian);
        }
    }
    let inner = TensorType::new(u.ttype().contravariant, u.ttype().covariant + 1);
    cov_derivative_with(
        chart,
        x,
        fd.h_nested,
        inner,
        &|y| covariant_derivative(chart, u, y, fd),
        &|_, _| None,
    )
}

fn scalar_hessian_from_partials(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
) -> Result<Option<FiberValue>> {
    let n = chart.dim();
    let x = chart.wrapped(x);
    let mut du = Vec::with_capacity(n);
    for l in 0..n {
        match u.partial(&x, &[l]) {
            Some(v) => du.push(v.scalar_value()),
            None => return Ok(None),
        }
    }
    let gamma = chart.christoffel_at(&x)?;
    let mut out = ArrayD::<Complex64>::zeros(IxDyn(&[n, n]));
    for i in 0..n {
        for j in 0..n {
            let mut v = match u.partial(&x, &[i, j]) {
                Some(v) => v.scalar_value(),
                None => return Ok(None),
            };
            for l in 0..n {
                v -= du[l] * gamma[(l, i, j)];
            }
            out[IxDyn(&[i, j])] = v;
        }
    }
    Ok(Some(FiberValue::new(TensorType::new(0, 2), out)?))
}

/// `nabla^d u` for `d` in 0..=2.
pub fn nabla_power(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    d: usize,
    fd: &FdSettings,
) -> Result<FiberValue> {
    match d {
        0 => Ok(u.eval(&chart.wrapped(x))),
        1 => covariant_derivative(chart, u, x, fd),
        2 => second_covariant_derivative(chart, u, x, fd),
        _ => Err(Error::OrderTooHigh(d)),
    }
}

/// Third covariant derivative of a scalar section with closed-form partials
/// up to order 3; `Gamma` derivatives come from central differences. This
/// exists for the order-3 breakdown demo, not for the inversion formula.
pub fn scalar_third_covariant_derivative(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    fd: &FdSettings,
) -> Result<FiberValue> {
    if u.ttype() != TensorType::scalar() {
        return Err(Error::TypeMismatch(format!(
            "third derivative demo expects a scalar section, got {}",
            u.ttype()
        )));
    }
    let n = chart.dim();
    let x = chart.wrapped(x);
    let scalar_partial = |axes: &[usize]| -> Result<Complex64> {
        u.partial(&x, axes)
            .map(|f| f.scalar_value())
            .ok_or_else(|| {
                Error::InvalidArgument(
                    "scalar_third_covariant_derivative needs closed-form partials to order 3"
                        .into(),
                )
            })
    };
    let gamma = chart.christoffel_at(&x)?;
    // dGamma[m][l][j][k] = d_m Gamma^l_{jk}
    let hb = fd.h_christoffel;
    let mut dgamma = vec![0.0; n * n * n * n];
    let mut bufp = vec![0.0; n * n * n];
    let mut bufm = vec![0.0; n * n * n];
    for m in 0..n {
        let mut cp = x.coords.clone();
        cp[m] += hb;
        let mut cm = x.coords.clone();
        cm[m] -= hb;
        chart.christoffel_into(&cp, &mut bufp);
        chart.christoffel_into(&cm, &mut bufm);
        for idx in 0..n * n * n {
            dgamma[m * n * n * n + idx] = (bufp[idx] - bufm[idx]) / (2.0 * hb);
        }
    }
    let dg = |m: usize, l: usize, j: usize, k: usize| dgamma[((m * n + l) * n + j) * n + k];

    let mut du = vec![Complex64::default(); n];
    for (l, slot) in du.iter_mut().enumerate() {
        *slot = scalar_partial(&[l])?;
    }
    let mut d2u = vec![Complex64::default(); n * n];
    for i in 0..n {
        for j in 0..n {
            d2u[i * n + j] = scalar_partial(&[i, j])?;
        }
    }
    // hessian H_{jk} = d_j d_k u - Gamma^l_{jk} d_l u
    let mut hess = vec![Complex64::default(); n * n];
    for j in 0..n {
        for k in 0..n {
            let mut v = d2u[j * n + k];
            for l in 0..n {
                v -= du[l] * gamma[(l, j, k)];
            }
            hess[j * n + k] = v;
        }
    }
    let mut out = ArrayD::<Complex64>::zeros(IxDyn(&[n, n, n]));
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = scalar_partial(&[i, j, k])?;
                for l in 0..n {
                    v -= du[l] * dg(i, l, j, k);
                    v -= d2u[i * n + l] * gamma[(l, j, k)];
                }
                for m in 0..n {
                    v -= hess[m * n + k] * gamma[(m, i, j)];
                    v -= hess[j * n + m] * gamma[(m, i, k)];
                }
                out[IxDyn(&[i, j, k])] = v;
            }
        }
    }
    FiberValue::new(TensorType::new(0, 3), out)
}

/// Contract the `p` derivative axes of `nabla^p u` (positions `a..a+p`)
/// against direction vectors, outermost first.
pub fn contract_derivative_axes(
    deriv: &FiberValue,
    base: TensorType,
    etas: &[Vec<f64>],
) -> FiberValue {
    let a = base.contravariant;
    let mut comps = deriv.comps.clone();
    for eta in etas {
        // contracting the axis at position `a` consumes it; the next
        // direction again contracts at position `a`
        let mut shape: Vec<usize> = comps.shape().to_vec();
        shape.remove(a);
        let mut out = ArrayD::<Complex64>::zeros(IxDyn(&shape));
        for (idx, val) in comps.indexed_iter() {
            let mut target = idx.slice().to_vec();
            let i = target.remove(a);
            out[IxDyn(&target)] += *val * eta[i];
        }
        comps = out;
    }
    FiberValue {
        ttype: base,
        comps,
    }
}

/// Symmetrized multi-covariant derivative through the exponential map
/// (mixed central differences of `tau_x u(exp_x(sum t_i eta_i))` at 0).
/// `p = etas.len()` must be at most 2; `p = 0` returns `u(x)`.
pub fn symmetrized_derivative_via_exp(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    etas: &[TangentVector],
    fd: &FdSettings,
    steps: usize,
) -> Result<FiberValue> {
    let n = chart.dim();
    let t = fd.t_step;
    let pullback = |weights: &[f64]| -> Result<FiberValue> {
        let mut xi = vec![0.0; n];
        for (w, eta) in weights.iter().zip(etas) {
            for (c, e) in xi.iter_mut().zip(&eta.comps) {
                *c += w * e;
            }
        }
        let speed = chart.tangent_norm(x, &xi)?;
        let radius = chart.inj_radius_at(x);
        if speed >= radius {
            return Err(Error::OutsideInjectivity { speed, radius });
        }
        let (endpoint, op) = exp_and_transport(chart, x, &xi, steps)?;
        let value = u.eval(&chart.wrapped(&endpoint));
        apply_transport(&op, &value)
    };
    match etas.len() {
        0 => Ok(u.eval(&chart.wrapped(x))),
        1 => {
            let plus = pullback(&[t])?;
            let minus = pullback(&[-t])?;
            let scale = Complex64::new(1.0 / (2.0 * t), 0.0);
            Ok(FiberValue {
                ttype: plus.ttype,
                comps: (plus.comps - minus.comps).mapv(|c| c * scale),
            })
        }
        2 => {
            let pp = pullback(&[t, t])?;
            let pm = pullback(&[t, -t])?;
            let mp = pullback(&[-t, t])?;
            let mm = pullback(&[-t, -t])?;
            let scale = Complex64::new(1.0 / (4.0 * t * t), 0.0);
            Ok(FiberValue {
                ttype: pp.ttype,
                comps: (pp.comps - pm.comps - mp.comps + mm.comps).mapv(|c| c * scale),
            })
        }
        p => Err(Error::OrderTooHigh(p)),
    }
}

/// Explicit symmetrization `1/p! sum_sigma nabla^p_{eta_sigma}` of stencil
/// covariant derivatives; the cross-check partner of
/// [`symmetrized_derivative_via_exp`].
pub fn symmetrized_stencil_derivative(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    etas: &[TangentVector],
    fd: &FdSettings,
) -> Result<FiberValue> {
    let base = u.ttype();
    match etas.len() {
        0 => Ok(u.eval(&chart.wrapped(x))),
        1 => {
            let du = covariant_derivative(chart, u, x, fd)?;
            Ok(contract_derivative_axes(&du, base, &[etas[0].comps.clone()]))
        }
        2 => {
            let ddu = second_covariant_derivative(chart, u, x, fd)?;
            let ab = contract_derivative_axes(
                &ddu,
                base,
                &[etas[0].comps.clone(), etas[1].comps.clone()],
            );
            let ba = contract_derivative_axes(
                &ddu,
                base,
                &[etas[1].comps.clone(), etas[0].comps.clone()],
            );
            let half = Complex64::new(0.5, 0.0);
            Ok(FiberValue {
                ttype: ab.ttype,
                comps: (ab.comps + ba.comps).mapv(|c| c * half),
            })
        }
        p => Err(Error::OrderTooHigh(p)),
    }
}

/// Antisymmetric part of the second covariant derivative of a vector field:
/// `nabla^2_{eta1, eta2} u - nabla^2_{eta2, eta1} u`, the zeroth-order
/// curvature action responsible for the order cap of the inversion formula.
pub fn curvature_commutator(
    chart: &ManifoldChart,
    u: &TensorSection,
    x: &ChartPoint,
    eta1: &TangentVector,
    eta2: &TangentVector,
    fd: &FdSettings,
) -> Result<FiberValue> {
    if u.ttype() != TensorType::vector() {
        return Err(Error::TypeMismatch(format!(
            "curvature commutator expects a (1,0) section, got {}",
            u.ttype()
        )));
    }
    let ddu = second_covariant_derivative(chart, u, x, fd)?;
    let ab = contract_derivative_axes(&ddu, u.ttype(), &[eta1.comps.clone(), eta2.comps.clone()]);
    let ba = contract_derivative_axes(&ddu, u.ttype(), &[eta2.comps.clone(), eta1.comps.clone()]);
    Ok(FiberValue {
        ttype: ab.ttype,
        comps: ab.comps - ba.comps,
    })
}

// ---------------------------------------------------------------------------
// differential operators
// ---------------------------------------------------------------------------

type CoeffFn = Arc<dyn Fn(&ChartPoint) -> ArrayD<Complex64> + Send + Sync>;

/// A differential operator `A = sum_{r=0}^{p} A_r nabla^{p-r}` of order
/// `p <= 2`. Coefficient `r` carries `p - r` contravariant symbol axes plus
/// an `F x E` matrix over flattened fibers; symbol axes are symmetrized on
/// construction.
#[derive(Clone)]
pub struct DifferentialOperator {
    order: usize,
    ttype_in: TensorType,
    ttype_out: TensorType,
    dim: usize,
    coeffs: Vec<CoeffFn>,
    name: String,
}

impl std::fmt::Debug for DifferentialOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DifferentialOperator")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("ttype_in", &self.ttype_in)
            .field("ttype_out", &self.ttype_out)
            .finish()
    }
}

fn symmetrize_symbol_axes(arr: ArrayD<Complex64>, symbol_axes: usize) -> ArrayD<Complex64> {
    if symbol_axes < 2 {
        return arr;
    }
    // order <= 2 means at most two symbol axes
    let mut swapped = arr.clone();
    swapped.swap_axes(0, 1);
    let half = Complex64::new(0.5, 0.0);
    (&arr + &swapped.as_standard_layout().to_owned()).mapv(|c| c * half)
}

impl DifferentialOperator {
    /// Build from raw coefficient callbacks. `coeffs[r]` must return an
    /// array of shape `[n; p-r] ++ [dim_F, dim_E]`.
    pub fn from_coeffs(
        name: &str,
        order: usize,
        dim: usize,
        ttype_in: TensorType,
        ttype_out: TensorType,
        coeffs: Vec<CoeffFn>,
    ) -> Result<Self> {
        if order > 2 {
            return Err(Error::OrderTooHigh(order));
        }
        if coeffs.len() != order + 1 {
            return Err(Error::InvalidArgument(format!(
                "order-{order} operator needs {} coefficients, got {}",
                order + 1,
                coeffs.len()
            )));
        }
        let coeffs = coeffs
            .into_iter()
            .enumerate()
            .map(|(r, f)| {
                let symbol_axes = order - r;
                let wrapped: CoeffFn =
                    Arc::new(move |x: &ChartPoint| symmetrize_symbol_axes(f(x), symbol_axes));
                wrapped
            })
            .collect();
        Ok(Self {
            order,
            ttype_in,
            ttype_out,
            dim,
            coeffs,
            name: name.to_string(),
        })
    }

    /// The identity operator on fibers of the given type.
    pub fn identity(dim: usize, ttype: TensorType) -> Self {
        let d = ttype.fiber_dim(dim);
        Self {
            order: 0,
            ttype_in: ttype,
            ttype_out: ttype,
            dim,
            coeffs: vec![Arc::new(move |_| identity_matrix_array(&[], d, d))],
            name: "identity".to_string(),
        }
    }

    /// First-order operator `nabla_eta` for a constant-component direction
    /// field `eta` (chart components).
    pub fn covariant_derivative_along(dim: usize, ttype: TensorType, eta: Vec<f64>) -> Self {
        let d = ttype.fiber_dim(dim);
        let eta0 = eta.clone();
        let a0: CoeffFn = Arc::new(move |_| {
            let mut arr = ArrayD::<Complex64>::zeros(IxDyn(&[dim, d, d]));
            for (i, &e) in eta0.iter().enumerate() {
                for k in 0..d {
                    arr[IxDyn(&[i, k, k])] = Complex64::new(e, 0.0);
                }
            }
            arr
        });
        let a1: CoeffFn = Arc::new(move |_| ArrayD::<Complex64>::zeros(IxDyn(&[d, d])));
        Self {
            order: 1,
            ttype_in: ttype,
            ttype_out: ttype,
            dim,
            coeffs: vec![a0, a1],
            name: format!("covariant_derivative_along{eta:?}"),
        }
    }

    /// The Laplace-Beltrami operator on scalars: `g^{ij} nabla^2_{ij}`.
    pub fn laplace_beltrami(chart: &ManifoldChart) -> Self {
        let dim = chart.dim();
        let chart = chart.clone();
        let a0: CoeffFn = Arc::new(move |x: &ChartPoint| {
            let ginv = chart
                .inverse_metric_at(x)
                .expect("laplace_beltrami coefficient evaluated inside the chart");
            let mut arr = ArrayD::<Complex64>::zeros(IxDyn(&[dim, dim, 1, 1]));
            for i in 0..dim {
                for j in 0..dim {
                    arr[IxDyn(&[i, j, 0, 0])] = Complex64::new(ginv[(i, j)], 0.0);
                }
            }
            arr
        });
        let a1: CoeffFn = Arc::new(move |_| ArrayD::<Complex64>::zeros(IxDyn(&[dim, 1, 1])));
        let a2: CoeffFn = Arc::new(move |_| ArrayD::<Complex64>::zeros(IxDyn(&[1, 1])));
        Self {
            order: 2,
            ttype_in: TensorType::scalar(),
            ttype_out: TensorType::scalar(),
            dim,
            coeffs: vec![a0, a1, a2],
            name: "laplace_beltrami".to_string(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ttype_in(&self) -> TensorType {
        self.ttype_in
    }

    pub fn ttype_out(&self) -> TensorType {
        self.ttype_out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Evaluate coefficient `r` at a point.
    pub fn coeff_at(&self, r: usize, x: &ChartPoint) -> ArrayD<Complex64> {
        (self.coeffs[r])(x)
    }

    /// Pointwise linear combination `sum_k factors_k * ops_k`; operators must
    /// share fiber types. The result has the maximum order.
    pub fn linear_combination(terms: &[(Complex64, DifferentialOperator)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let (tt_in, tt_out, dim) = (first.1.ttype_in, first.1.ttype_out, first.1.dim);
        if terms
            .iter()
            .any(|(_, op)| op.ttype_in != tt_in || op.ttype_out != tt_out || op.dim != dim)
        {
            return Err(Error::TypeMismatch(
                "linear combination needs matching fiber types".into(),
            ));
        }
        let order = terms.iter().map(|(_, op)| op.order).max().unwrap_or(0);
        let n = dim;
        let de = tt_in.fiber_dim(n);
        let df = tt_out.fiber_dim(n);
        let mut coeffs: Vec<CoeffFn> = Vec::with_capacity(order + 1);
        for r in 0..=order {
            let symbol_axes = order - r;
            let parts: Vec<(Complex64, DifferentialOperator)> = terms.to_vec();
            coeffs.push(Arc::new(move |x: &ChartPoint| {
                let mut shape = vec![n; symbol_axes];
                shape.push(df);
                shape.push(de);
                let mut acc = ArrayD::<Complex64>::zeros(IxDyn(&shape));
                for (factor, op) in &parts {
                    if symbol_axes > op.order {
                        continue;
                    }
                    let r_op = op.order - symbol_axes;
                    let piece = op.coeff_at(r_op, x);
                    acc = acc + piece.mapv(|c| c * factor);
                }
                acc
            }));
        }
        Ok(Self {
            order,
            ttype_in: tt_in,
            ttype_out: tt_out,
            dim,
            coeffs,
            name: "linear_combination".to_string(),
        })
    }
}

fn identity_matrix_array(symbol_shape: &[usize], df: usize, de: usize) -> ArrayD<Complex64> {
    let mut shape = symbol_shape.to_vec();
    shape.push(df);
    shape.push(de);
    let mut arr = ArrayD::<Complex64>::zeros(IxDyn(&shape));
    if symbol_shape.is_empty() {
        for k in 0..df.min(de) {
            arr[IxDyn(&[k, k])] = Complex64::new(1.0, 0.0);
        }
    }
    arr
}

/// A total-symbol value: a complex `F x E` linear map over flattened fibers.
#[derive(Debug, Clone)]
pub struct SymbolValue {
    pub ttype_in: TensorType,
    pub ttype_out: TensorType,
    pub matrix: Array2<Complex64>,
}

impl SymbolValue {
    /// Apply the symbol to a fiber of the input type.
    pub fn apply(&self, v: &FiberValue, n: usize) -> Result<FiberValue> {
        if v.ttype != self.ttype_in {
            return Err(Error::TypeMismatch(format!(
                "symbol expects {}, got {}",
                self.ttype_in, v.ttype
            )));
        }
        let flat = v.flatten();
        let mut out = vec![Complex64::default(); self.matrix.nrows()];
        for (f, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for (e, val) in flat.iter().enumerate() {
                acc += self.matrix[(f, e)] * val;
            }
            *slot = acc;
        }
        let shape = self.ttype_out.shape(n);
        let comps = ArrayD::from_shape_vec(IxDyn(&shape), out).expect("shape matches fiber dim");
        FiberValue::new(self.ttype_out, comps)
    }
}

/// Contract the symbol tensor `(2 pi i lambda)^{p-r}` into the symbol axes of
/// the evaluated coefficient arrays; plain full contraction, no factorials.
pub(crate) fn symbol_from_coeff_arrays(
    coeff_arrays: &[ArrayD<Complex64>],
    order: usize,
    n: usize,
    df: usize,
    de: usize,
    lambda_chart: &[f64],
) -> Array2<Complex64> {
    let mut matrix = Array2::<Complex64>::zeros((df, de));
    for (r, arr) in coeff_arrays.iter().enumerate() {
        let d = order - r;
        let factor = Complex64::new(0.0, TAU).powu(d as u32);
        match d {
            0 => {
                for f in 0..df {
                    for e in 0..de {
                        matrix[(f, e)] += factor * arr[IxDyn(&[f, e])];
                    }
                }
            }
            1 => {
                for i in 0..n {
                    let li = lambda_chart[i];
                    if li == 0.0 {
                        continue;
                    }
                    for f in 0..df {
                        for e in 0..de {
                            matrix[(f, e)] += factor * li * arr[IxDyn(&[i, f, e])];
                        }
                    }
                }
            }
            2 => {
                for i in 0..n {
                    for j in 0..n {
                        let w = lambda_chart[i] * lambda_chart[j];
                        if w == 0.0 {
                            continue;
                        }
                        for f in 0..df {
                            for e in 0..de {
                                matrix[(f, e)] += factor * w * arr[IxDyn(&[i, j, f, e])];
                            }
                        }
                    }
                }
            }
            _ => unreachable!("order is at most 2"),
        }
    }
    matrix
}

/// Total symbol `a(lambda) = sum_r (2 pi i lambda)^{tensor (p-r)}
/// contracted into A_r`, coefficients evaluated at the base of `lambda`.
/// For `p <= 2` the entries are polynomials of degree at most 2 in `lambda`.
pub fn total_symbol(a: &DifferentialOperator, lambda: &CotangentVector) -> Result<SymbolValue> {
    let n = a.dim();
    if lambda.comps.len() != n {
        return Err(Error::InvalidArgument(format!(
            "lambda has {} components, operator lives in dimension {n}",
            lambda.comps.len()
        )));
    }
    let x = &lambda.base;
    let coeff_arrays: Vec<ArrayD<Complex64>> =
        (0..=a.order()).map(|r| a.coeff_at(r, x)).collect();
    let de = a.ttype_in().fiber_dim(n);
    let df = a.ttype_out().fiber_dim(n);
    let matrix = symbol_from_coeff_arrays(&coeff_arrays, a.order(), n, df, de, &lambda.comps);
    Ok(SymbolValue {
        ttype_in: a.ttype_in(),
        ttype_out: a.ttype_out(),
        matrix,
    })
}

/// Direct application `A u (x) = sum_r A_r(x) . nabla^{p-r} u (x)` through
/// the covariant-derivative stencils; the independent side of every
/// inversion check.
pub fn direct_apply(
    chart: &ManifoldChart,
    a: &DifferentialOperator,
    u: &TensorSection,
    x: &ChartPoint,
    fd: &FdSettings,
) -> Result<FiberValue> {
    if a.ttype_in() != u.ttype() {
        return Err(Error::TypeMismatch(format!(
            "operator expects {}, section has {}",
            a.ttype_in(),
            u.ttype()
        )));
    }
    let n = chart.dim();
    let p = a.order();
    let df = a.ttype_out().fiber_dim(n);
    let a_axes = a.ttype_in().contravariant;
    let b_axes = a.ttype_in().covariant;
    let mut out = vec![Complex64::default(); df];
    for r in 0..=p {
        let d = p - r;
        let coeff = a.coeff_at(r, x);
        let du = nabla_power(chart, u, x, d, fd)?;
        // iterate the full derivative tensor once, accumulating every
        // E-component into the right coefficient slice
        for (idx, val) in du.comps.indexed_iter() {
            if du.comps.ndim() == 0 {
                // scalar, d = 0
                let e = 0usize;
                for (f, slot) in out.iter_mut().enumerate() {
                    *slot += coeff[IxDyn(&[f, e])] * *val;
                }
                continue;
            }
            let idx = idx.slice();
            let deriv_idx = &idx[a_axes..a_axes + d];
            let mut e = 0usize;
            for &c in idx.iter().take(a_axes) {
                e = e * n + c;
            }
            for &c in idx.iter().skip(a_axes + d).take(b_axes) {
                e = e * n + c;
            }
            let mut coeff_idx = deriv_idx.to_vec();
            coeff_idx.push(0);
            coeff_idx.push(e);
            for (f, slot) in out.iter_mut().enumerate() {
                coeff_idx[d] = f;
                *slot += coeff[IxDyn(&coeff_idx)] * *val;
            }
        }
    }
    let comps = ArrayD::from_shape_vec(IxDyn(&a.ttype_out().shape(n)), out)
        .expect("shape matches fiber dim");
    FiberValue::new(a.ttype_out(), comps)
}
