//! Dense linear algebra for the tiny matrices of phase-space geometry
//! (`d × d` Hessians and `2d × 2d` variational matrices, `d ≤ 2`).

use num_traits::Float;

pub type Mat2 = [[f64; 2]; 2];
pub type Mat4 = [[f64; 4]; 4];

/// Determinant of the leading `n × n` block by partial-pivot elimination.
pub fn det<const M: usize>(a: &[[f64; M]; M], n: usize) -> f64 {
    let mut m = *a;
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| Float::abs(m[i][c]).total_cmp(&Float::abs(m[j][c])))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

/// Eigenvalues of a symmetric `n × n` block, `n ≤ 2`, ascending.
pub fn sym_eigenvalues(a: &Mat2, n: usize) -> [f64; 2] {
    if n == 1 {
        return [a[0][0], a[0][0]];
    }
    let tr = 0.5 * (a[0][0] + a[1][1]);
    let diff = 0.5 * (a[0][0] - a[1][1]);
    let r = Float::sqrt(diff * diff + a[0][1] * a[0][1]);
    [tr - r, tr + r]
}

/// Inverse of the leading `n × n` block (`n ≤ 2`); `None` when singular.
pub fn inverse2(a: &Mat2, n: usize) -> Option<Mat2> {
    if n == 1 {
        if a[0][0] == 0.0 {
            return None;
        }
        return Some([[1.0 / a[0][0], 0.0], [0.0, 0.0]]);
    }
    let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if d == 0.0 {
        return None;
    }
    Some([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]])
}

/// Condition number of a symmetric block in the spectral norm.
pub fn sym_condition(a: &Mat2, n: usize) -> f64 {
    let ev = sym_eigenvalues(a, n);
    let (lo, hi) = if n == 1 {
        (Float::abs(ev[0]), Float::abs(ev[0]))
    } else {
        let x = Float::abs(ev[0]);
        let y = Float::abs(ev[1]);
        (x.min(y), x.max(y))
    };
    if lo == 0.0 { f64::INFINITY } else { hi / lo }
}

/// Quadratic form `vᵀ A v` over the leading `n` components.
pub fn quad_form(a: &Mat2, v: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += v[i] * a[i][j] * v[j];
        }
    }
    s
}

/// `C = A B` on leading `n × n` blocks.
pub fn matmul4(a: &Mat4, b: &Mat4, n: usize) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn identity4(n: usize) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinants() {
        let a: Mat4 = [[2.0, 1.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0], [0.0, 0.0, 1.0, 4.0], [0.0, 0.0, 0.5, 1.0]];
        assert!((det(&a, 4) - 5.0 * (1.0 - 2.0)).abs() < 1e-12);
        assert!((det(&a, 2) - 5.0).abs() < 1e-12);
        let s: Mat4 = [[0.0, 1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0; 4], [0.0; 4]];
        assert!((det(&s, 2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_eigen_and_inverse() {
        let a: Mat2 = [[2.0, 1.0], [1.0, 2.0]];
        let ev = sym_eigenvalues(&a, 2);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
        let inv = inverse2(&a, 2).unwrap();
        assert!((inv[0][0] - 2.0 / 3.0).abs() < 1e-14);
        assert!(inverse2(&[[1.0, 1.0], [1.0, 1.0]], 2).is_none());
        assert!((sym_condition(&a, 2) - 3.0).abs() < 1e-14);
    }
}
