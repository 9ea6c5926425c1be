//! Small dense linear algebra on flat row-major `Vec<f64>` buffers.
//! Dimensions here are tiny (tens), so plain loops beat pulling in a
//! matrix library.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y = M x for a row-major n×n matrix.
pub(crate) fn mat_vec(m: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.len(), n * n);
    debug_assert_eq!(x.len(), n);
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * n..(i + 1) * n], x);
    }
    out
}

/// M += scale * u vᵀ.
pub(crate) fn add_outer(m: &mut [f64], n: usize, scale: f64, u: &[f64], v: &[f64]) {
    debug_assert_eq!(m.len(), n * n);
    for i in 0..n {
        let row = &mut m[i * n..(i + 1) * n];
        let ui = scale * u[i];
        for (j, cell) in row.iter_mut().enumerate() {
            *cell += ui * v[j];
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting. Returns `None` when the
/// matrix is numerically singular.
pub(crate) fn invert(m: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(m.len(), n * n);
    // Augmented [M | I] worked in place.
    let width = 2 * n;
    let mut work = vec![0.0; n * width];
    for i in 0..n {
        work[i * width..i * width + n].copy_from_slice(&m[i * n..(i + 1) * n]);
        work[i * width + n + i] = 1.0;
    }
    for col in 0..n {
        let mut pivot = col;
        let mut best = work[col * width + col].abs();
        for row in col + 1..n {
            let v = work[row * width + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-12 {
            return None;
        }
        if pivot != col {
            for k in 0..width {
                work.swap(col * width + k, pivot * width + k);
            }
        }
        let inv_pivot = 1.0 / work[col * width + col];
        for k in 0..width {
            work[col * width + k] *= inv_pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work[row * width + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..width {
                work[row * width + k] -= factor * work[col * width + k];
            }
        }
    }
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n..(i + 1) * n].copy_from_slice(&work[i * width + n..(i + 1) * width]);
    }
    Some(inv)
}
