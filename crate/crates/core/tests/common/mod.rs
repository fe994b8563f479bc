//! Shared helpers for the property suites: seeded sampling of zoo points,
//! directions and smooth random sections.
#![allow(dead_code)] // each test binary uses its own subset

use geofourier_core::sections::{trig_sum_tensor, TrigTerm};
use geofourier_core::{ChartPoint, ManifoldChart, TangentVector, TensorSection, TensorType};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn zoo_members() -> Vec<ManifoldChart> {
    vec![
        geofourier_core::zoo::euclidean(2),
        geofourier_core::zoo::flat_torus(&[1.0, 1.0]),
        geofourier_core::zoo::sphere2(1.0),
        geofourier_core::zoo::poincare_disk(),
        geofourier_core::zoo::surface_of_revolution(1.0, 3.0),
    ]
}

/// Uniform draw from the chart's sample region.
pub fn sample_point(chart: &ManifoldChart, rng: &mut ChaCha8Rng) -> ChartPoint {
    let coords = chart
        .sample_region()
        .iter()
        .map(|&(lo, hi)| rng.random_range(lo..hi))
        .collect();
    ChartPoint::new(coords)
}

/// Random tangent direction normalized to the given metric speed.
pub fn sample_direction(
    chart: &ManifoldChart,
    x: &ChartPoint,
    speed: f64,
    rng: &mut ChaCha8Rng,
) -> TangentVector {
    let n = chart.dim();
    loop {
        let comps: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = chart.tangent_norm(x, &comps).unwrap();
        if norm > 1e-3 {
            let comps = comps.iter().map(|c| c * speed / norm).collect();
            return TangentVector::new(x.clone(), comps);
        }
    }
}

fn random_terms(chart: &ManifoldChart, rng: &mut ChaCha8Rng, terms: usize) -> Vec<TrigTerm> {
    let n = chart.dim();
    (0..terms)
        .map(|_| {
            let angular_freq: Vec<f64> = chart
                .periodicity()
                .iter()
                .take(n)
                .map(|p| match p {
                    // integer harmonics keep the section smooth across the seam
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
}

/// Random smooth section with exact partials, periodic where the chart is.
pub fn random_section(
    chart: &ManifoldChart,
    ttype: TensorType,
    rng: &mut ChaCha8Rng,
) -> TensorSection {
    let n = chart.dim();
    let per_component = (0..ttype.fiber_dim(n))
        .map(|_| random_terms(chart, rng, 3))
        .collect();
    trig_sum_tensor(n, ttype, per_component)
}
