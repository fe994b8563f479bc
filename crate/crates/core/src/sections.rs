//! Ready-made tensor sections: constants, monomials, trigonometric waves,
//! Gaussian bumps and component-wise sums of waves for randomized suites.
//!
//! Where a closed form is cheap the sections carry exact mixed partials of
//! every order the derivative stencils may request; the stencil path then
//! only kicks in for derived fields.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::operators::TensorSection;
use crate::transport::{FiberValue, TensorType};

/// One cosine term `amplitude * cos(angular_freq . x + phase)`.
#[derive(Debug, Clone)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub angular_freq: Vec<f64>,
    pub phase: f64,
}

impl TrigTerm {
    fn value(&self, coords: &[f64]) -> f64 {
        let arg: f64 = self
            .angular_freq
            .iter()
            .zip(coords)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.phase;
        self.amplitude * arg.cos()
    }

    /// Mixed partial along `axes` (any order): each derivative multiplies by
    /// the axis frequency and advances the phase by pi/2.
    fn partial(&self, coords: &[f64], axes: &[usize]) -> f64 {
        let mut amp = self.amplitude;
        for &axis in axes {
            amp *= self.angular_freq[axis];
        }
        if amp == 0.0 {
            return 0.0;
        }
        let arg: f64 = self
            .angular_freq
            .iter()
            .zip(coords)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.phase
            + axes.len() as f64 * FRAC_PI_2;
        amp * arg.cos()
    }
}

fn scalar_fiber(v: f64) -> FiberValue {
    FiberValue::scalar(Complex64::new(v, 0.0))
}

/// Scalar section `sum_k terms_k` of cosine waves with exact partials.
pub fn trig_sum_scalar(name: &str, terms: Vec<TrigTerm>) -> TensorSection {
    let eval_terms = terms.clone();
    let section = TensorSection::new(
        TensorType::scalar(),
        name,
        Arc::new(move |x| scalar_fiber(eval_terms.iter().map(|t| t.value(&x.coords)).sum())),
    );
    section.with_partials(Arc::new(move |x, axes| {
        Some(scalar_fiber(
            terms.iter().map(|t| t.partial(&x.coords, axes)).sum(),
        ))
    }))
}

/// `amplitude * cos(angular_freq . x + phase)` with exact partials.
pub fn trig_wave(dim: usize, angular_freq: &[f64], phase: f64, amplitude: f64) -> TensorSection {
    assert_eq!(angular_freq.len(), dim);
    trig_sum_scalar(
        "trig_wave",
        vec![TrigTerm {
            amplitude,
            angular_freq: angular_freq.to_vec(),
            phase,
        }],
    )
}

/// `sin(2 pi freq . x + phase)`.
pub fn sin_wave(dim: usize, freq_cycles: &[f64], phase: f64) -> TensorSection {
    let w: Vec<f64> = freq_cycles.iter().map(|f| std::f64::consts::TAU * f).collect();
    trig_sum_scalar(
        "sin_wave",
        vec![TrigTerm {
            amplitude: 1.0,
            angular_freq: w[..dim].to_vec(),
            phase: phase - FRAC_PI_2,
        }],
    )
}

/// The zonal harmonic `cos(theta)` on a (theta, phi) chart.
pub fn cos_theta() -> TensorSection {
    trig_sum_scalar(
        "cos_theta",
        vec![TrigTerm {
            amplitude: 1.0,
            angular_freq: vec![1.0, 0.0],
            phase: 0.0,
        }],
    )
}

/// Constant scalar section.
pub fn constant_scalar(value: Complex64) -> TensorSection {
    TensorSection::new(
        TensorType::scalar(),
        "constant",
        Arc::new(move |_| FiberValue::scalar(value)),
    )
    .with_partials(Arc::new(move |_, _| {
        Some(FiberValue::scalar(Complex64::default()))
    }))
}

/// Vector field with constant chart components.
pub fn constant_vector(dim: usize, comps: &[f64]) -> TensorSection {
    let comps: Vec<Complex64> = comps.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    constant_components(dim, TensorType::vector(), comps)
}

/// Tensor section with constant chart components (row-major fiber order).
pub fn constant_components(dim: usize, ttype: TensorType, comps: Vec<Complex64>) -> TensorSection {
    assert_eq!(comps.len(), ttype.fiber_dim(dim));
    let shape = ttype.shape(dim);
    let eval_comps = comps;
    let arr = ArrayD::from_shape_vec(IxDyn(&shape), eval_comps).expect("component count");
    let zero = arr.mapv(|_| Complex64::default());
    let value = FiberValue {
        ttype,
        comps: arr,
    };
    let zero_value = FiberValue {
        ttype,
        comps: zero,
    };
    TensorSection::new(ttype, "constant_components", {
        let value = value.clone();
        Arc::new(move |_| value.clone())
    })
    .with_partials(Arc::new(move |_, _| Some(zero_value.clone())))
}

/// Gaussian bump `amplitude * exp(-|x - center|^2 / (2 width^2))` with exact
/// partials up to order 3.
pub fn gaussian_bump(center: &[f64], width: f64, amplitude: f64) -> TensorSection {
    let c = center.to_vec();
    let w2 = width * width;
    let value = move |coords: &[f64]| -> f64 {
        let q: f64 = coords
            .iter()
            .zip(&c)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            / (2.0 * w2);
        amplitude * (-q).exp()
    };
    let c2 = center.to_vec();
    let partial = move |coords: &[f64], axes: &[usize]| -> Option<f64> {
        let xi: Vec<f64> = coords.iter().zip(&c2).map(|(x, c)| x - c).collect();
        let q: f64 = xi.iter().map(|v| v * v).sum::<f64>() / (2.0 * w2);
        let e = amplitude * (-q).exp();
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        match axes {
            [] => Some(e),
            [i] => Some(-xi[*i] / w2 * e),
            [i, j] => Some((xi[*i] * xi[*j] / (w2 * w2) - d(*i, *j) / w2) * e),
            [i, j, k] => Some(
                (-xi[*i] * xi[*j] * xi[*k] / (w2 * w2 * w2)
                    + (d(*i, *j) * xi[*k] + d(*i, *k) * xi[*j] + d(*j, *k) * xi[*i])
                        / (w2 * w2))
                    * e,
            ),
            _ => None,
        }
    };
    TensorSection::new(
        TensorType::scalar(),
        "gaussian_bump",
        Arc::new(move |x| scalar_fiber(value(&x.coords))),
    )
    .with_partials(Arc::new(move |x, axes| {
        partial(&x.coords, axes).map(scalar_fiber)
    }))
}

/// Tensor section whose components are independent cosine sums; used by the
/// randomized property suites (callers draw the terms from a seeded RNG).
pub fn trig_sum_tensor(
    dim: usize,
    ttype: TensorType,
    per_component: Vec<Vec<TrigTerm>>,
) -> TensorSection {
    assert_eq!(per_component.len(), ttype.fiber_dim(dim));
    let shape = ttype.shape(dim);
    let eval_terms = per_component.clone();
    let eval_shape = shape.clone();
    let section = TensorSection::new(
        ttype,
        "trig_sum_tensor",
        Arc::new(move |x| {
            let vals: Vec<Complex64> = eval_terms
                .iter()
                .map(|terms| {
                    Complex64::new(terms.iter().map(|t| t.value(&x.coords)).sum(), 0.0)
                })
                .collect();
            FiberValue {
                ttype,
                comps: ArrayD::from_shape_vec(IxDyn(&eval_shape), vals)
                    .expect("component count"),
            }
        }),
    );
    section.with_partials(Arc::new(move |x, axes| {
        let vals: Vec<Complex64> = per_component
            .iter()
            .map(|terms| {
                Complex64::new(
                    terms.iter().map(|t| t.partial(&x.coords, axes)).sum(),
                    0.0,
                )
            })
            .collect();
        Some(FiberValue {
            ttype,
            comps: ArrayD::from_shape_vec(IxDyn(&shape), vals).expect("component count"),
        })
    }))
}

/// Ad-hoc real scalar section without closed-form partials.
pub fn scalar_field(
    name: &str,
    f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> TensorSection {
    TensorSection::new(
        TensorType::scalar(),
        name,
        Arc::new(move |x| scalar_fiber(f(&x.coords))),
    )
}

// Small polynomial fixtures used across the test suites.

/// `u = x0^2` with exact partials.
pub fn monomial_x0_squared() -> TensorSection {
    TensorSection::new(
        TensorType::scalar(),
        "x0_squared",
        Arc::new(|x| scalar_fiber(x.coords[0] * x.coords[0])),
    )
    .with_partials(Arc::new(|x, axes| {
        let v = match axes {
            [] => x.coords[0] * x.coords[0],
            [0] => 2.0 * x.coords[0],
            [0, 0] => 2.0,
            _ => 0.0,
        };
        Some(scalar_fiber(v))
    }))
}

/// `u = x0 * x1` with exact partials.
pub fn monomial_x0_x1() -> TensorSection {
    TensorSection::new(
        TensorType::scalar(),
        "x0_x1",
        Arc::new(|x| scalar_fiber(x.coords[0] * x.coords[1])),
    )
    .with_partials(Arc::new(|x, axes| {
        let v = match axes {
            [] => x.coords[0] * x.coords[1],
            [0] => x.coords[1],
            [1] => x.coords[0],
            [0, 1] | [1, 0] => 1.0,
            _ => 0.0,
        };
        Some(scalar_fiber(v))
    }))
}

/// `u = x0^2 + x1^2` with exact partials.
pub fn monomial_sum_of_squares() -> TensorSection {
    TensorSection::new(
        TensorType::scalar(),
        "sum_of_squares",
        Arc::new(|x| scalar_fiber(x.coords[0] * x.coords[0] + x.coords[1] * x.coords[1])),
    )
    .with_partials(Arc::new(|x, axes| {
        let v = match axes {
            [] => x.coords[0] * x.coords[0] + x.coords[1] * x.coords[1],
            [i] => 2.0 * x.coords[*i],
            [i, j] if i == j => 2.0,
            _ => 0.0,
        };
        Some(scalar_fiber(v))
    }))
}
