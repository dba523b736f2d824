//! Closed-form scalar operators on `[0, 1]` with a biased low-fidelity model.

use rand::Rng;

use crate::error::Result;
use crate::grid::{uniform_grid, Axis, Domain, GridFunction};
use crate::rng::rng_from;

pub fn benchmark1_domain() -> Domain {
    Domain::new(vec![Axis::nodal(0.0, 1.0)]).expect("unit interval")
}

/// `a(x) = k x - 4` on `n` nodes.
pub fn benchmark1_input_with_slope(k: f64, n: usize) -> Result<GridFunction> {
    GridFunction::from_fn(benchmark1_domain(), vec![n], |x| k * x[0] - 4.0)
}

/// Input with slope drawn from `U(k_range)`.
pub fn benchmark1_input(k_range: (f64, f64), n: usize, seed: u64) -> Result<GridFunction> {
    let k = rng_from(seed).gen_range(k_range.0..k_range.1);
    benchmark1_input_with_slope(k, n)
}

/// `sin(a(x))`.
pub fn benchmark1_hf(a: &GridFunction) -> GridFunction {
    a.map(f64::sin)
}

/// `sin(a(x)) + x - a(x) / 4`.
pub fn benchmark1_lf(a: &GridFunction) -> Result<GridFunction> {
    let x = &uniform_grid(&a.domain, &a.shape)?[0];
    let values = a.values.iter().zip(x.iter().cycle()).map(|(&av, &xv)| av.sin() + xv - 0.25 * av).collect();
    GridFunction::new(a.domain.clone(), a.shape.clone(), a.channels, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_values() {
        let a = benchmark1_input_with_slope(12.0, 5).unwrap(); // x = 0, .25, .5, .75, 1
        assert!((a.values[2] - 2.0).abs() < 1e-15);
        let hf = benchmark1_hf(&a);
        let lf = benchmark1_lf(&a).unwrap();
        assert!((hf.values[2] - 0.90930).abs() < 1e-5);
        assert!((hf.values[1] + 0.84147).abs() < 1e-5);
        assert!((lf.values[1] + 0.34147).abs() < 1e-5);
    }

    #[test]
    fn fidelities_agree_where_corrections_cancel() {
        // k = 8: x = (8x - 4) / 4 at x = 1
        let a = benchmark1_input_with_slope(8.0, 3).unwrap();
        let (hf, lf) = (benchmark1_hf(&a), benchmark1_lf(&a).unwrap());
        assert!((hf.values[2] - lf.values[2]).abs() < 1e-15);
    }

    #[test]
    fn slope_in_range_and_seeded() {
        let a = benchmark1_input((10.0, 14.0), 9, 1).unwrap();
        let k = a.values[8] - a.values[0];
        assert!((10.0..14.0).contains(&k));
        assert_eq!(a, benchmark1_input((10.0, 14.0), 9, 1).unwrap());
    }
}
