//! Row-major dense kernels used by the encoder. Inner loops run over
//! contiguous slices so the compiler can vectorize them.

/// `out[j] += Σ_r s[r]·rows[r][j]` over four rows at once, so each output
/// element is loaded and stored once per four updates.
#[inline]
fn axpy4(out: &mut [f64], s: [f64; 4], rows: [&[f64]; 4]) {
    let [r0, r1, r2, r3] = rows;
    let n = out.len();
    let (r0, r1, r2, r3) = (&r0[..n], &r1[..n], &r2[..n], &r3[..n]);
    for j in 0..n {
        out[j] += s[0] * r0[j] + s[1] * r1[j] + s[2] * r2[j] + s[3] * r3[j];
    }
}

#[inline]
fn axpy(out: &mut [f64], s: f64, row: &[f64]) {
    for (o, &v) in out.iter_mut().zip(row) {
        *o += s * v;
    }
}

/// `out (m×n) += a (m×k) · b (k×n)`
pub(crate) fn gemm_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let b_row = |kk: usize| &b[kk * n..(kk + 1) * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        let mut kk = 0;
        while kk + 4 <= k {
            let s = [a_row[kk], a_row[kk + 1], a_row[kk + 2], a_row[kk + 3]];
            if s != [0.0; 4] {
                axpy4(out_row, s, [b_row(kk), b_row(kk + 1), b_row(kk + 2), b_row(kk + 3)]);
            }
            kk += 4;
        }
        for kk in kk..k {
            if a_row[kk] != 0.0 {
                axpy(out_row, a_row[kk], b_row(kk));
            }
        }
    }
}

/// `out (k×n) += aᵀ · b` with `a (m×k)`, `b (m×n)`.
pub(crate) fn gemm_tn_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(out.len(), k * n);
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    let b_row = |i: usize| &b[i * n..(i + 1) * n];
    let mut i = 0;
    while i + 4 <= m {
        let rows = [b_row(i), b_row(i + 1), b_row(i + 2), b_row(i + 3)];
        for kk in 0..k {
            let s = [a[i * k + kk], a[(i + 1) * k + kk], a[(i + 2) * k + kk], a[(i + 3) * k + kk]];
            if s != [0.0; 4] {
                axpy4(&mut out[kk * n..(kk + 1) * n], s, rows);
            }
        }
        i += 4;
    }
    for i in i..m {
        for kk in 0..k {
            let s = a[i * k + kk];
            if s != 0.0 {
                axpy(&mut out[kk * n..(kk + 1) * n], s, b_row(i));
            }
        }
    }
}

/// `out (m×k) += a (m×n) · bᵀ` with `b (k×n)`.
pub(crate) fn gemm_nt_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, n: usize, k: usize) {
    let bt = transpose(b, k, n);
    gemm_acc(out, a, &bt, m, n, k);
}

pub(crate) fn transpose(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

/// Adds `bias` to every row of `out`.
pub(crate) fn add_row_bias(out: &mut [f64], bias: &[f64]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o += b;
        }
    }
}

/// `acc += Σ_rows a`
pub(crate) fn sum_rows_acc(acc: &mut [f64], a: &[f64]) {
    for row in a.chunks_exact(acc.len()) {
        for (s, &v) in acc.iter_mut().zip(row) {
            *s += v;
        }
    }
}
