use num_traits::Float;
use std::fmt::Debug;

/// Storage type tag used by on-disk tensor blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// Floating-point element type of a [`Tensor`](super::Tensor).
pub trait Scalar: Float + Default + Debug + Send + Sync + 'static {
    const DTYPE: DType;

    fn from_f64(v: f64) -> Self;

    fn to_f64(self) -> f64;

    /// Largest representable value strictly below one.
    fn below_one() -> Self;

    /// `c = op(a) * op(b) (+ c if accumulate)` for row-major operands, where
    /// `op(a)` is `m x k` and `op(b)` is `k x n`. A transposed operand is
    /// stored in its untransposed row-major layout.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_trans: bool,
        b: &[Self],
        b_trans: bool,
        c: &mut [Self],
        accumulate: bool,
    );

    fn write_le(self, out: &mut Vec<u8>);

    fn read_le(bytes: &[u8]) -> Self;
}

fn strides(rows: usize, cols: usize, trans: bool) -> (isize, isize) {
    // (row stride, col stride) of the logical rows x cols operand
    if trans {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! gemm_body {
    ($f:path, $t:ty, $m:ident, $k:ident, $n:ident, $a:ident, $a_trans:ident, $b:ident, $b_trans:ident, $c:ident, $acc:ident) => {{
        assert!($a.len() >= $m * $k, "gemm: lhs too short");
        assert!($b.len() >= $k * $n, "gemm: rhs too short");
        assert!($c.len() >= $m * $n, "gemm: output too short");
        if $m == 0 || $n == 0 {
            return;
        }
        let beta: $t = if $acc { 1.0 } else { 0.0 };
        if $k == 0 {
            if !$acc {
                $c[..$m * $n].iter_mut().for_each(|v| *v = 0.0);
            }
            return;
        }
        if super::skinny::gemm($m, $k, $n, $a, $a_trans, $b, $b_trans, $c, $acc) {
            return;
        }
        let (rsa, csa) = strides($m, $k, $a_trans);
        let (rsb, csb) = strides($k, $n, $b_trans);
        // SAFETY: the length asserts above bound every index the kernel
        // touches for these shapes and strides.
        unsafe {
            $f(
                $m,
                $k,
                $n,
                1.0,
                $a.as_ptr(),
                rsa,
                csa,
                $b.as_ptr(),
                rsb,
                csb,
                beta,
                $c.as_mut_ptr(),
                $n as isize,
                1,
            );
        }
    }};
}

impl Scalar for f32 {
    const DTYPE: DType = DType::F32;

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn below_one() -> Self {
        1.0 - f32::EPSILON / 2.0
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        a_trans: bool,
        b: &[f32],
        b_trans: bool,
        c: &mut [f32],
        accumulate: bool,
    ) {
        gemm_body!(
            matrixmultiply::sgemm,
            f32,
            m,
            k,
            n,
            a,
            a_trans,
            b,
            b_trans,
            c,
            accumulate
        )
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: DType = DType::F64;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn below_one() -> Self {
        1.0 - f64::EPSILON / 2.0
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        a_trans: bool,
        b: &[f64],
        b_trans: bool,
        c: &mut [f64],
        accumulate: bool,
    ) {
        gemm_body!(
            matrixmultiply::dgemm,
            f64,
            m,
            k,
            n,
            a,
            a_trans,
            b,
            b_trans,
            c,
            accumulate
        )
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], at: bool, b: &[f64], bt: bool) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0;
                for p in 0..k {
                    let av = if at { a[p * m + i] } else { a[i * k + p] };
                    let bv = if bt { b[j * k + p] } else { b[p * n + j] };
                    s += av * bv;
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_for_all_transpose_combinations() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        for at in [false, true] {
            for bt in [false, true] {
                let mut c = vec![0.0; m * n];
                f64::gemm(m, k, n, &a, at, &b, bt, &mut c, false);
                let want = naive(m, k, n, &a, at, &b, bt);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn skinny_shapes_match_naive() {
        for (m, k, n) in [
            (40, 50, 3),
            (3, 50, 40),
            (40, 3, 50),
            (1, 30, 1),
            (20, 1, 20),
            (33, 17, 16),
        ] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
            for at in [false, true] {
                for bt in [false, true] {
                    let mut c = vec![0.5; m * n];
                    f64::gemm(m, k, n, &a, at, &b, bt, &mut c, true);
                    let want = naive(m, k, n, &a, at, &b, bt);
                    for (x, y) in c.iter().zip(&want) {
                        assert!((x - 0.5 - y).abs() < 1e-12, "{m}x{k}x{n} {at} {bt}");
                    }
                }
            }
        }
    }

    #[test]
    fn below_one_is_strictly_below_one() {
        assert!(f64::below_one() < 1.0);
        assert!(f32::below_one() < 1.0);
        assert!(f64::below_one() > 0.9999);
    }
}
