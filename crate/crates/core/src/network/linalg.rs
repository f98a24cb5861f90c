//! Dense kernels over row-major matrices stored in flat slices.

/// `y += W x` for `W` of shape `y.len() × x.len()`.
#[inline]
pub(crate) fn add_matvec(w: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(w.len(), y.len() * n);
    for (yi, row) in y.iter_mut().zip(w.chunks_exact(n)) {
        *yi += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `x += Wᵀ y` for `W` of shape `y.len() × x.len()`.
#[inline]
pub(crate) fn add_matvec_transposed(w: &[f64], y: &[f64], x: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(w.len(), y.len() * n);
    for (yi, row) in y.iter().zip(w.chunks_exact(n)) {
        if *yi == 0.0 {
            continue;
        }
        for (xj, a) in x.iter_mut().zip(row) {
            *xj += a * yi;
        }
    }
}

/// `W += y xᵀ`.
#[inline]
pub(crate) fn add_outer(w: &mut [f64], y: &[f64], x: &[f64]) {
    let n = x.len();
    debug_assert_eq!(w.len(), y.len() * n);
    for (yi, row) in y.iter().zip(w.chunks_exact_mut(n)) {
        if *yi == 0.0 {
            continue;
        }
        for (a, xj) in row.iter_mut().zip(x) {
            *a += yi * xj;
        }
    }
}
