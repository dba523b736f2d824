//! Linear advection `u_t + beta u_x = 0` on a periodic line.

use crate::error::{FloralError, Result};
use crate::grid::{Axis, Domain, GridFunction};

/// Space-time domain `x in [lo, hi)` periodic by `t in [0, t_final]`.
pub fn space_time_domain(x_axis: Axis, t_final: f64) -> Result<Domain> {
    Domain::new(vec![x_axis, Axis::nodal(0.0, t_final)])
}

/// First-order upwind in space, forward Euler in time, one step per stored slice.
///
/// Returns an `nx x nt` trajectory whose first time slice is `u0`.
pub fn solve_advection(u0: &GridFunction, beta: f64, nt: usize, t_final: f64) -> Result<GridFunction> {
    if u0.domain.ndim() != 1 || !u0.domain.axes[0].is_periodic() {
        return Err(FloralError::Grid("advection needs a periodic 1D initial condition".into()));
    }
    if nt < 2 || !(t_final > 0.0) {
        return Err(FloralError::Config(format!("need nt >= 2 and T > 0, got {nt}, {t_final}")));
    }
    let nx = u0.shape[0];
    let dx = u0.domain.axes[0].spacing(nx);
    let dt = t_final / (nt - 1) as f64;
    let cfl = beta.abs() * dt / dx;
    if cfl > 1.0 {
        return Err(FloralError::Solver(format!("advection CFL number {cfl:.3} exceeds 1")));
    }
    let mut traj = vec![0.0; nx * nt];
    let mut u = u0.channel(0).to_vec();
    let mut next = vec![0.0; nx];
    for it in 0..nt {
        for i in 0..nx {
            traj[i * nt + it] = u[i];
        }
        if it + 1 == nt {
            break;
        }
        for i in 0..nx {
            let diff = if beta >= 0.0 { u[i] - u[(i + nx - 1) % nx] } else { u[(i + 1) % nx] - u[i] };
            next[i] = u[i] - cfl.copysign(beta) * diff;
        }
        std::mem::swap(&mut u, &mut next);
    }
    let domain = space_time_domain(u0.domain.axes[0], t_final)?;
    GridFunction::new(domain, vec![nx, nt], 1, traj)
}
