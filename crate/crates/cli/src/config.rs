//! Experiment configuration: a single TOML file selecting a zoo manifold,
//! an operator, a section, base points and the accuracy knobs.

use std::path::Path;
use std::sync::Arc;

use geofourier_core::sections::TrigTerm;
use geofourier_core::zoo::ZooParams;
use geofourier_core::{
    DifferentialOperator, Error as CoreError, ManifoldChart, TensorSection, TensorType,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::CliError;

fn default_seed() -> u64 {
    42
}

fn default_tolerance() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub section: Option<SectionSpec>,
    #[serde(default)]
    pub base_points: Vec<Vec<f64>>,
    pub plan: PlanSpec,
    #[serde(default)]
    pub sweeps: Option<SweepSpec>,
    #[serde(default)]
    pub props: Option<PropsSpec>,
    #[serde(default)]
    pub breakdown: Option<BreakdownSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub name: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub periods: Option<Vec<f64>>,
    #[serde(default)]
    pub tube_radius: Option<f64>,
    #[serde(default)]
    pub center_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub name: String,
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    pub name: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub freq: Option<Vec<f64>>,
    #[serde(default)]
    pub phase: Option<f64>,
    #[serde(default)]
    pub terms: Option<usize>,
}

fn default_nodes() -> usize {
    64
}

fn default_steps() -> usize {
    256
}

fn default_epsilon_cap() -> f64 {
    1.0
}

fn default_h_fd() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_epsilon_cap")]
    pub epsilon_cap: f64,
    #[serde(default = "default_h_fd")]
    pub h_fd: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub steps: Vec<usize>,
    #[serde(default)]
    pub nodes_for_steps: Option<usize>,
}

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropsSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub fault_injection: Option<String>,
    #[serde(default)]
    pub manifolds: Vec<ManifoldSpec>,
}

fn default_flat_nodes() -> usize {
    320
}

fn default_curved_nodes() -> Vec<usize> {
    vec![128, 256]
}

fn default_flat_eta_scale() -> f64 {
    0.5
}

/// Knobs of the order-3 breakdown demo. The demo itself is canonical: the
/// unit sphere with the zonal section against a flat-torus control.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakdownSpec {
    #[serde(default = "default_flat_nodes")]
    pub flat_nodes: usize,
    #[serde(default = "default_curved_nodes")]
    pub curved_nodes: Vec<usize>,
    #[serde(default = "default_flat_eta_scale")]
    pub flat_eta_scale: f64,
}

impl Default for BreakdownSpec {
    fn default() -> Self {
        Self {
            flat_nodes: default_flat_nodes(),
            curved_nodes: default_curved_nodes(),
            flat_eta_scale: default_flat_eta_scale(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.plan.nodes < 2 || !self.plan.nodes.is_multiple_of(2) {
            return Err(CliError::Config(format!(
                "plan.nodes must be even and >= 2, got {}",
                self.plan.nodes
            )));
        }
        if self.plan.steps < 8 {
            return Err(CliError::Config(format!(
                "plan.steps must be >= 8, got {}",
                self.plan.steps
            )));
        }
        if self.plan.epsilon_cap <= 0.0 {
            return Err(CliError::Config("plan.epsilon_cap must be positive".into()));
        }
        if let Some(sweeps) = &self.sweeps {
            if sweeps.nodes.iter().any(|&n| n < 2 || !n.is_multiple_of(2)) {
                return Err(CliError::Config("sweeps.nodes must all be even".into()));
            }
            if sweeps.steps.iter().any(|&s| s < 8) {
                return Err(CliError::Config("sweeps.steps must all be >= 8".into()));
            }
        }
        Ok(())
    }

    pub fn build_manifold(&self) -> Result<ManifoldChart, CliError> {
        self.manifold.build()
    }

    pub fn build_operator(&self, chart: &ManifoldChart) -> Result<DifferentialOperator, CliError> {
        let spec = self
            .operator
            .as_ref()
            .ok_or_else(|| CliError::Config("operator section is required".into()))?;
        spec.build(chart)
    }

    pub fn build_section(&self, chart: &ManifoldChart) -> Result<TensorSection, CliError> {
        let spec = self
            .section
            .as_ref()
            .ok_or_else(|| CliError::Config("section table is required".into()))?;
        spec.build(chart, self.seed)
    }
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ManifoldChart, CliError> {
        let params = ZooParams {
            dim: self.dim,
            radius: self.radius,
            periods: self.periods.clone(),
            tube_radius: self.tube_radius,
            center_radius: self.center_radius,
        };
        geofourier_core::zoo::by_name(&self.name, &params).map_err(|e| match e {
            CoreError::UnknownManifold(name) => {
                CliError::Config(format!("manifold.name: unknown manifold `{name}`"))
            }
            other => CliError::Config(format!("manifold: {other}")),
        })
    }
}

impl OperatorSpec {
    pub fn build(&self, chart: &ManifoldChart) -> Result<DifferentialOperator, CliError> {
        let n = chart.dim();
        match self.name.as_str() {
            "identity" => Ok(DifferentialOperator::identity(n, TensorType::scalar())),
            "covariant_derivative_along" => {
                let eta = self.eta.clone().ok_or_else(|| {
                    CliError::Config("operator.eta is required for covariant_derivative_along".into())
                })?;
                if eta.len() != n {
                    return Err(CliError::Config(format!(
                        "operator.eta has {} components, manifold has dimension {n}",
                        eta.len()
                    )));
                }
                Ok(DifferentialOperator::covariant_derivative_along(
                    n,
                    TensorType::scalar(),
                    eta,
                ))
            }
            "laplace_beltrami" => Ok(DifferentialOperator::laplace_beltrami(chart)),
            // declared refusal: third-order operators are outside the
            // inversion formula; rows carry the error, the batch continues
            "nabla3_along" => Err(CliError::Core(CoreError::OrderTooHigh(3))),
            other => Err(CliError::Config(format!(
                "operator.name: unknown operator `{other}`"
            ))),
        }
    }
}

impl SectionSpec {
    pub fn build(&self, chart: &ManifoldChart, seed: u64) -> Result<TensorSection, CliError> {
        let n = chart.dim();
        match self.name.as_str() {
            "constant" => Ok(geofourier_core::sections::constant_scalar(
                num_complex::Complex64::new(self.value.unwrap_or(1.0), 0.0),
            )),
            "gaussian_bump" => {
                let center = self
                    .center
                    .clone()
                    .ok_or_else(|| CliError::Config("section.center is required".into()))?;
                if center.len() != n {
                    return Err(CliError::Config("section.center dimension mismatch".into()));
                }
                let width = self.width.unwrap_or(0.35);
                if width <= 0.0 {
                    return Err(CliError::Config("section.width must be positive".into()));
                }
                Ok(geofourier_core::sections::gaussian_bump(
                    &center,
                    width,
                    self.amplitude.unwrap_or(1.0),
                ))
            }
            "sin_wave" => {
                let freq = self
                    .freq
                    .clone()
                    .ok_or_else(|| CliError::Config("section.freq is required".into()))?;
                if freq.len() != n {
                    return Err(CliError::Config("section.freq dimension mismatch".into()));
                }
                Ok(geofourier_core::sections::sin_wave(
                    n,
                    &freq,
                    self.phase.unwrap_or(0.0),
                ))
            }
            "cos_theta" => {
                if n != 2 {
                    return Err(CliError::Config(
                        "section cos_theta expects a 2-dimensional chart".into(),
                    ));
                }
                Ok(geofourier_core::sections::cos_theta())
            }
            "random_trig" => Ok(random_trig_section(
                chart,
                self.terms.unwrap_or(3),
                seed,
            )),
            other => Err(CliError::Config(format!(
                "section.name: unknown section `{other}`"
            ))),
        }
    }
}

/// Seeded sum of cosine waves, periodic along the chart's periodic axes.
pub fn random_trig_section(chart: &ManifoldChart, terms: usize, seed: u64) -> TensorSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_trig_with_rng(chart, TensorType::scalar(), terms, &mut rng)
}

/// The same builder with caller-held RNG state (used by the property suite
/// to draw many sections from one stream).
pub fn random_trig_with_rng(
    chart: &ManifoldChart,
    ttype: TensorType,
    terms: usize,
    rng: &mut ChaCha8Rng,
) -> TensorSection {
    let n = chart.dim();
    let per_component: Vec<Vec<TrigTerm>> = (0..ttype.fiber_dim(n))
        .map(|_| {
            (0..terms)
                .map(|_| {
                    let angular_freq: Vec<f64> = chart
                        .periodicity()
                        .iter()
                        .take(n)
                        .map(|p| match p {
                            Some(period) => {
                                std::f64::consts::TAU * rng.random_range(0..=1) as f64 / period
                            }
                            None => rng.random_range(-1.5..1.5),
                        })
                        .collect();
                    TrigTerm {
                        amplitude: rng.random_range(-0.5..0.5),
                        angular_freq,
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                    }
                })
                .collect()
        })
        .collect();
    geofourier_core::sections::trig_sum_tensor(n, ttype, per_component)
}

/// Seeded base-point draw from the chart's sample region.
pub fn sample_point(chart: &ManifoldChart, rng: &mut ChaCha8Rng) -> geofourier_core::ChartPoint {
    let coords = chart
        .sample_region()
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..hi))
        .collect();
    geofourier_core::ChartPoint::new(coords)
}

/// Seeded tangent direction with the given metric speed.
pub fn sample_direction(
    chart: &ManifoldChart,
    x: &geofourier_core::ChartPoint,
    speed: f64,
    rng: &mut ChaCha8Rng,
) -> geofourier_core::TangentVector {
    let n = chart.dim();
    loop {
        let comps: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = chart.tangent_norm(x, &comps).expect("sample region point");
        if norm > 1e-3 {
            let comps = comps.iter().map(|c| c * speed / norm).collect();
            return geofourier_core::TangentVector::new(x.clone(), comps);
        }
    }
}

/// An `Arc`-backed clone of the section closure for ad-hoc scalar products.
pub fn scale_section(section: &TensorSection, factor: f64) -> TensorSection {
    let inner = section.clone();
    let ttype = section.ttype();
    TensorSection::new(
        ttype,
        "scaled",
        Arc::new(move |x| {
            let v = inner.eval(x);
            v.scale(num_complex::Complex64::new(factor, 0.0))
        }),
    )
}
