//! Viscous Burgers `u_t + (u^2 / 2)_x = nu u_xx` on a periodic line.

use crate::error::{FloralError, Result};
use crate::grid::GridFunction;

use super::advection::space_time_domain;

/// Advective CFL number targeted by the automatic substepping.
pub const BURGERS_CFL: f64 = 0.4;
/// Diffusion number `nu dt / dx^2` targeted by the automatic substepping.
pub const BURGERS_DIFFUSION_NUMBER: f64 = 0.25;

/// Conservative right-hand side: second-order upwind convective flux, central diffusion.
fn rhs(u: &[f64], nu: f64, dx: f64, out: &mut [f64], flux: &mut [f64]) {
    let n = u.len();
    let at = |i: isize| u[i.rem_euclid(n as isize) as usize];
    // flux[i] lives on the interface between cells i and i + 1
    for i in 0..n as isize {
        let (ul, ur) = (at(i), at(i + 1));
        let ustar = if ul + ur >= 0.0 { 1.5 * ul - 0.5 * at(i - 1) } else { 1.5 * ur - 0.5 * at(i + 2) };
        let diff = nu * (ur - ul) / dx;
        flux[i as usize] = 0.5 * ustar * ustar - diff;
    }
    for i in 0..n {
        out[i] = -(flux[i] - flux[(i + n - 1) % n]) / dx;
    }
}

/// SSP-RK3 integration with substeps chosen from the current solution.
///
/// Returns an `nx x nt` trajectory whose first time slice is `u0`.
pub fn solve_burgers(u0: &GridFunction, nu: f64, nt: usize, t_final: f64) -> Result<GridFunction> {
    if u0.domain.ndim() != 1 || !u0.domain.axes[0].is_periodic() {
        return Err(FloralError::Grid("Burgers needs a periodic 1D initial condition".into()));
    }
    if nt < 2 || !(t_final > 0.0) || nu < 0.0 {
        return Err(FloralError::Config(format!("need nt >= 2, T > 0, nu >= 0; got {nt}, {t_final}, {nu}")));
    }
    let nx = u0.shape[0];
    let dx = u0.domain.axes[0].spacing(nx);
    let dt_slice = t_final / (nt - 1) as f64;
    let mut u = u0.channel(0).to_vec();
    let mut traj = vec![0.0; nx * nt];
    let (mut k, mut u1, mut u2, mut flux) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    for it in 0..nt {
        for i in 0..nx {
            traj[i * nt + it] = u[i];
        }
        if it + 1 == nt {
            break;
        }
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut dt_max = BURGERS_CFL * dx / umax.max(1e-12);
        if nu > 0.0 {
            dt_max = dt_max.min(BURGERS_DIFFUSION_NUMBER * dx * dx / nu);
        }
        let steps = (dt_slice / dt_max).ceil().max(1.0) as usize;
        let dt = dt_slice / steps as f64;
        for _ in 0..steps {
            rhs(&u, nu, dx, &mut k, &mut flux);
            for i in 0..nx {
                u1[i] = u[i] + dt * k[i];
            }
            rhs(&u1, nu, dx, &mut k, &mut flux);
            for i in 0..nx {
                u2[i] = 0.75 * u[i] + 0.25 * (u1[i] + dt * k[i]);
            }
            rhs(&u2, nu, dx, &mut k, &mut flux);
            for i in 0..nx {
                u[i] = (u[i] + 2.0 * (u2[i] + dt * k[i])) / 3.0;
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(FloralError::Solver(format!("Burgers solution became non-finite at slice {}", it + 1)));
        }
    }
    let domain = space_time_domain(u0.domain.axes[0], t_final)?;
    GridFunction::new(domain, vec![nx, nt], 1, traj)
}
