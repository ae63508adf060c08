//! Charts, component fields, coordinate differential forms, spectral differentiation and quadrature.

mod chart;
mod field;
mod forms;
pub mod io;

pub use chart::{Axis, Chart, ChartKind, Frame};
pub use field::Field;
pub use forms::{apply_vector, masks, wedge_sign, CoordForm};

use crate::error::{CrError, Result};

/// Trapezoidal quadrature ∫ f·vol over a periodic or fiber chart.
///
/// Orientation is the coordinate (frame) order. The imaginary part of the
/// integrand is ignored; callers pass real fields.
pub fn integrate(f: &Field, vol: &CoordForm) -> Result<f64> {
    let chart = f.chart();
    if !chart.is_grid() || chart.axes().iter().any(|a| matches!(a, Axis::Interval { .. })) {
        return Err(CrError::Unsupported(format!("integration over a {} chart", chart.kind())));
    }
    let top = vol.top()?;
    f.check_chart(top)?;
    let s: f64 = f.data().iter().zip(top.data()).map(|(a, b)| (a * b).re).sum();
    Ok(s * chart.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use std::f64::consts::PI;

    fn volume(chart: &std::sync::Arc<Chart>) -> CoordForm {
        CoordForm::from_components(chart, 3, vec![(0b111, Field::real_constant(chart, 1.0))])
    }

    #[test]
    fn box_volume_and_single_mode() {
        let c = Chart::periodic3([8, 10, 12], [2.0 * PI; 3]).unwrap();
        let vol = volume(&c);
        let one = Field::real_constant(&c, 1.0);
        assert!((integrate(&one, &vol).unwrap() - (2.0 * PI).powi(3)).abs() < 1e-12);
        let s = Field::from_fn(&c, |x| C64::new(x[0].sin(), 0.0));
        assert!(integrate(&s, &vol).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fiber_length_enters_integral() {
        let c = Chart::invariant2([8, 8], [1.0, 2.0], 3.0).unwrap();
        let one = Field::real_constant(&c, 1.0);
        assert!((integrate(&one, &volume(&c)).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn non_top_form_is_rejected() {
        let c = Chart::periodic3([8; 3], [1.0; 3]).unwrap();
        let two = CoordForm::zero(&c, 2);
        assert!(integrate(&Field::real_constant(&c, 1.0), &two).is_err());
    }
}
