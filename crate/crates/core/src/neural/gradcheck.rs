//! Central finite-difference checks of reverse-mode gradients.

use super::autograd::{no_grad, Var};
use crate::error::{FloralError, Result};

/// Magnitude below which gradient errors are measured absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// `(parameter, entry, analytic, finite difference)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares analytic gradients with `(L(θ + h) - L(θ - h)) / 2h` at `picks`.
///
/// `params` exposes the leaves owned by `state`; `loss` must rebuild the graph
/// from `state` on every call. The relative error of an entry is
/// `|a - f| / max(|a|, |f|, GRADCHECK_FLOOR)`.
pub fn gradient_check<S>(
    state: &mut S,
    params: impl Fn(&mut S) -> &mut [Var],
    loss: impl Fn(&S) -> Result<Var>,
    picks: &[(usize, usize)],
    h: f64,
) -> Result<GradCheckReport> {
    for p in params(state).iter() {
        p.zero_grad();
    }
    {
        let l = loss(state)?;
        l.backward()?;
    }
    let analytic: Vec<f64> = {
        let ps = params(state);
        picks
            .iter()
            .map(|&(k, i)| ps[k].grad().map_or(0.0, |g| g[i]))
            .collect()
    };
    let mut report = GradCheckReport { checked: 0, max_relative_error: 0.0, worst: None };
    for (&(k, i), &a) in picks.iter().zip(&analytic) {
        let eval = |delta: f64, state: &mut S| -> Result<f64> {
            let v = params(state)[k]
                .value_mut()
                .ok_or_else(|| FloralError::Autograd("parameter is still shared by a live graph".into()))?;
            let orig = v.data[i];
            v.data[i] = orig + delta;
            let out = no_grad(|| loss(state)).map(|l| l.data()[0]);
            params(state)[k].value_mut().expect("unique after eval").data[i] = orig;
            out
        };
        let fp = eval(h, state)?;
        let fm = eval(-h, state)?;
        let fd = (fp - fm) / (2.0 * h);
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(GRADCHECK_FLOOR);
        report.checked += 1;
        if rel >= report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = Some((k, i, a, fd));
        }
    }
    Ok(report)
}

/// Every entry of every parameter.
pub fn all_entries(params: &[Var]) -> Vec<(usize, usize)> {
    params
        .iter()
        .enumerate()
        .flat_map(|(k, p)| (0..p.value().numel()).map(move |i| (k, i)))
        .collect()
}

#[cfg(test)]
pub(crate) fn assert_gradients(params: Vec<Var>, loss: impl Fn(&[Var]) -> Result<Var>) {
    let picks = all_entries(&params);
    let mut state = params;
    let report = gradient_check(&mut state, |s| s.as_mut_slice(), |s| loss(s), &picks, 1e-5).unwrap();
    assert!(report.max_relative_error <= 1e-6, "{report:?}");
}
