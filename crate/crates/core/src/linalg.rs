//! Thin safe wrapper over a strided matrix multiply.

/// `c = alpha * a * b + beta * c` for an `m x k` by `k x n` product.
///
/// Strides are in elements: `rs*` between rows, `cs*` between columns.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs + 1;
    if k > 0 {
        assert!(a.len() >= span(m, k, rsa, csa), "gemm: lhs too short");
        assert!(b.len() >= span(k, n, rsb, csb), "gemm: rhs too short");
    }
    assert!(c.len() >= span(m, n, rsc, csc), "gemm: output too short");
    // SAFETY: the bounds of every accessed element were checked above and
    // `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Row-major `c = a * b` with `a: m x k`, `b: k x n`.
pub fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, 1.0, a, k, 1, b, n, 1, 0.0, &mut c, n, 1);
    c
}
