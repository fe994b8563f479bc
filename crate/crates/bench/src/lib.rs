//! Benchmark-only crate; see `benches/inversion.rs`.
//!
//! Shared fixtures for the benchmarks live here so the bench target stays
//! a thin harness.

use geofourier_core::{
    make_window, ChartPoint, CutoffWindow, DifferentialOperator, ManifoldChart, QuadraturePlan,
    TensorSection,
};

/// The standard curved benchmark scene: unit sphere, zonal harmonic,
/// Laplace-Beltrami at a mid-latitude point.
pub struct SphereScene {
    pub chart: ManifoldChart,
    pub operator: DifferentialOperator,
    pub section: TensorSection,
    pub x: ChartPoint,
    pub window: CutoffWindow,
}

impl SphereScene {
    pub fn new() -> Self {
        let chart = geofourier_core::zoo::sphere2(1.0);
        let operator = DifferentialOperator::laplace_beltrami(&chart);
        let section = geofourier_core::sections::cos_theta();
        let x = ChartPoint::new(vec![1.25, 0.8]);
        let window = make_window(&chart, &x, 0.45).expect("admissible window");
        Self {
            chart,
            operator,
            section,
            x,
            window,
        }
    }

    pub fn plan(&self, nodes: usize) -> QuadraturePlan {
        QuadraturePlan::new(&self.chart, &self.x, &self.window, nodes).expect("plan")
    }
}

impl Default for SphereScene {
    fn default() -> Self {
        Self::new()
    }
}
