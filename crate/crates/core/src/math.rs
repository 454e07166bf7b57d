//! Small dense linear algebra helpers over row-major `f64` slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `out = m · x` where `m` is `rows × x.len()`.
pub fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(m.len(), out.len() * cols);
    for (row, o) in m.chunks_exact(cols).zip(out.iter_mut()) {
        *o = dot(row, x);
    }
}

/// `out += mᵀ · g` where `m` is `g.len() × out.len()`.
pub fn matvec_t_acc(m: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (row, &gi) in m.chunks_exact(cols).zip(g) {
        if gi != 0.0 {
            axpy(gi, row, out);
        }
    }
}

/// `m += g ⊗ x`.
pub fn outer_acc(g: &[f64], x: &[f64], m: &mut [f64]) {
    let cols = x.len();
    for (row, &gi) in m.chunks_exact_mut(cols).zip(g) {
        if gi != 0.0 {
            axpy(gi, x, row);
        }
    }
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// 64-bit FNV-1a, used where a stable string hash is needed.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
