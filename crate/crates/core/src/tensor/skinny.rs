//! GEMM kernels for operands with one very small dimension.
//!
//! The deep U-net layers multiply large weight matrices by a handful of
//! columns; a packing GEMM spends most of its time copying the weights
//! there. These kernels read the large operand once, in a fixed order.

use super::Scalar;

/// Largest output width, output height and inner size handled here.
const MAX_N: usize = 32;
const MAX_M: usize = 16;
const MAX_K: usize = 16;

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn axpy<T: Scalar>(y: &mut [T], alpha: T, x: &[T]) {
    for (v, &u) in y.iter_mut().zip(x) {
        *v = *v + alpha * u;
    }
}

/// Row-major copy of the `rows x cols` matrix `x`, transposed.
fn transpose<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = x[r * cols + c];
        }
    }
    t
}

fn store<T: Scalar>(c: &mut T, v: T, accumulate: bool) {
    *c = if accumulate { *c + v } else { v };
}

/// `c (m x n) = op(a) op(b)`; returns false when no dimension is small.
#[allow(clippy::too_many_arguments)]
pub(super) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_trans: bool,
    b: &[T],
    b_trans: bool,
    c: &mut [T],
    accumulate: bool,
) -> bool {
    if n <= MAX_N && n < m.min(k) {
        if !a_trans {
            // dot products of a's rows with b's columns
            let owned;
            let bt: &[T] = if b_trans {
                &b[..n * k]
            } else {
                owned = transpose(&b[..k * n], k, n);
                &owned
            };
            for i in 0..m {
                let row = &a[i * k..(i + 1) * k];
                for j in 0..n {
                    store(
                        &mut c[i * n + j],
                        dot(row, &bt[j * k..(j + 1) * k]),
                        accumulate,
                    );
                }
            }
        } else {
            // a is stored k x m: accumulate c^T row by row from a's rows
            let mut ct = vec![T::zero(); n * m];
            for p in 0..k {
                let arow = &a[p * m..(p + 1) * m];
                for j in 0..n {
                    let bv = if b_trans { b[j * k + p] } else { b[p * n + j] };
                    axpy(&mut ct[j * m..(j + 1) * m], bv, arow);
                }
            }
            for i in 0..m {
                for j in 0..n {
                    store(&mut c[i * n + j], ct[j * m + i], accumulate);
                }
            }
        }
        true
    } else if m <= MAX_M && m < n.min(k) {
        // solve the transposed problem, whose column count is small
        let mut ct = vec![T::zero(); n * m];
        gemm(n, k, m, b, !b_trans, a, !a_trans, &mut ct, false);
        for i in 0..m {
            for j in 0..n {
                store(&mut c[i * n + j], ct[j * m + i], accumulate);
            }
        }
        true
    } else if k <= MAX_K && k < m.min(n) {
        // sum of k outer products, one output row at a time
        let owned;
        let brows: &[T] = if b_trans {
            owned = transpose(&b[..n * k], n, k);
            &owned
        } else {
            &b[..k * n]
        };
        for i in 0..m {
            let crow = &mut c[i * n..(i + 1) * n];
            if !accumulate {
                crow.iter_mut().for_each(|v| *v = T::zero());
            }
            for p in 0..k {
                let av = if a_trans { a[p * m + i] } else { a[i * k + p] };
                axpy(crow, av, &brows[p * n..(p + 1) * n]);
            }
        }
        true
    } else {
        false
    }
}
