//! Raw loops behind the tensor ops. Layouts are row-major: sequences are
//! `[N, C, T]`, conv weights `[C_out, C_in, K]`, transposed-conv weights
//! `[C_in, C_out, K]`, dense weights `[out, in]`.

/// Range of output positions `o` for which `o * stride + k - pad` lands in
/// `[0, t_in)`, clipped to `[0, t_out)`.
#[inline]
fn valid_outputs(k: usize, stride: usize, pad: usize, t_in: usize, t_out: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    let top = t_in as isize - 1 + pad as isize - k as isize;
    if top < 0 {
        return (0, 0);
    }
    let hi = ((top as usize) / stride + 1).min(t_out);
    (lo.min(hi), hi)
}

pub fn conv_out_len(t: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = t + 2 * pad;
    if padded < k || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

pub fn conv_transpose_out_len(t: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    if t == 0 || stride == 0 {
        return None;
    }
    ((t - 1) * stride + k).checked_sub(2 * pad).filter(|&n| n > 0)
}

#[derive(Debug, Clone, Copy)]
pub struct ConvDims {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvDims {
    /// Dimensions of the convolution whose input-gradient map is the
    /// transposed convolution described by `self`.
    fn adjoint(&self) -> ConvDims {
        ConvDims {
            c_in: self.c_out,
            c_out: self.c_in,
            t_in: self.t_out,
            t_out: self.t_in,
            ..*self
        }
    }
}

/// `c ← beta·c + a·b` for strided `a: [m, k]`, `b: [k, n]`, `c: [m, n]`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rs: usize, cs: usize, r: usize, q: usize| (r - 1) * rs + (q - 1) * cs;
    assert!(last(rsc, csc, m, n) < c.len());
    if k == 0 {
        if beta != 1.0 {
            for r in 0..m {
                for q in 0..n {
                    c[r * rsc + q * csc] *= beta;
                }
            }
        }
        return;
    }
    assert!(last(rsa, csa, m, k) < a.len() && last(rsb, csb, k, n) < b.len());
    // SAFETY: every index touched is bounded by the asserts above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
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

/// Unfolds `x: [N, C_in, T_in]` into `[C_in·K, N·T_out]`, zero where the
/// window hangs over the padding.
fn im2col(x: &[f64], d: &ConvDims) -> Vec<f64> {
    let cols = d.n * d.t_out;
    let mut out = vec![0.0; d.c_in * d.k * cols];
    for ci in 0..d.c_in {
        for k in 0..d.k {
            let row = &mut out[(ci * d.k + k) * cols..][..cols];
            let (lo, hi) = valid_outputs(k, d.stride, d.pad, d.t_in, d.t_out);
            for n in 0..d.n {
                let xrow = &x[(n * d.c_in + ci) * d.t_in..][..d.t_in];
                let dst = &mut row[n * d.t_out..][..d.t_out];
                for o in lo..hi {
                    dst[o] = xrow[o * d.stride + k - d.pad];
                }
            }
        }
    }
    out
}

/// Adds the columns back onto `dx: [N, C_in, T_in]`; adjoint of [`im2col`].
fn col2im(cols_buf: &[f64], d: &ConvDims, dx: &mut [f64]) {
    let cols = d.n * d.t_out;
    for ci in 0..d.c_in {
        for k in 0..d.k {
            let row = &cols_buf[(ci * d.k + k) * cols..][..cols];
            let (lo, hi) = valid_outputs(k, d.stride, d.pad, d.t_in, d.t_out);
            for n in 0..d.n {
                let dxrow = &mut dx[(n * d.c_in + ci) * d.t_in..][..d.t_in];
                let src = &row[n * d.t_out..][..d.t_out];
                for o in lo..hi {
                    dxrow[o * d.stride + k - d.pad] += src[o];
                }
            }
        }
    }
}

/// `[N, C, T]` to `[C, N·T]`.
fn channels_first(y: &[f64], n: usize, c: usize, t: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * c * t];
    for i in 0..n {
        for ch in 0..c {
            out[ch * n * t + i * t..][..t].copy_from_slice(&y[(i * c + ch) * t..][..t]);
        }
    }
    out
}

/// Convolution without bias, written to or added onto `y`.
fn conv_forward(x: &[f64], w: &[f64], d: &ConvDims, y: &mut [f64], accumulate: bool) {
    let cols = im2col(x, d);
    let nc = d.n * d.t_out;
    let ck = d.c_in * d.k;
    let mut ym = vec![0.0; d.c_out * nc];
    gemm(d.c_out, ck, nc, w, (ck, 1), &cols, (nc, 1), 0.0, &mut ym, (nc, 1));
    for n in 0..d.n {
        for co in 0..d.c_out {
            let dst = &mut y[(n * d.c_out + co) * d.t_out..][..d.t_out];
            let src = &ym[co * nc + n * d.t_out..][..d.t_out];
            if accumulate {
                dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
            } else {
                dst.copy_from_slice(src);
            }
        }
    }
}

fn conv_input_grad(w: &[f64], dy: &[f64], d: &ConvDims, dx: &mut [f64]) {
    let nc = d.n * d.t_out;
    let ck = d.c_in * d.k;
    let dym = channels_first(dy, d.n, d.c_out, d.t_out);
    let mut dcols = vec![0.0; ck * nc];
    gemm(ck, d.c_out, nc, w, (1, ck), &dym, (nc, 1), 0.0, &mut dcols, (nc, 1));
    col2im(&dcols, d, dx);
}

fn conv_weight_grad(x: &[f64], dy: &[f64], d: &ConvDims, dw: &mut [f64]) {
    let nc = d.n * d.t_out;
    let ck = d.c_in * d.k;
    let cols = im2col(x, d);
    let dym = channels_first(dy, d.n, d.c_out, d.t_out);
    gemm(d.c_out, nc, ck, &dym, (nc, 1), &cols, (1, nc), 1.0, dw, (ck, 1));
}

fn channel_sums(dy: &[f64], n: usize, c: usize, t: usize, db: &mut [f64]) {
    for i in 0..n {
        for ch in 0..c {
            db[ch] += dy[(i * c + ch) * t..][..t].iter().sum::<f64>();
        }
    }
}

fn fill_bias(y: &mut [f64], b: &[f64], t: usize) {
    for (row, chunk) in y.chunks_mut(t).enumerate() {
        chunk.fill(b[row % b.len()]);
    }
}

pub fn conv1d(x: &[f64], w: &[f64], b: &[f64], d: &ConvDims, y: &mut [f64]) {
    conv_forward(x, w, d, y, false);
    for n in 0..d.n {
        for co in 0..d.c_out {
            y[(n * d.c_out + co) * d.t_out..][..d.t_out]
                .iter_mut()
                .for_each(|v| *v += b[co]);
        }
    }
}

/// Accumulates input, weight and bias gradients of [`conv1d`].
pub fn conv1d_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    d: &ConvDims,
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(db) = db {
        channel_sums(dy, d.n, d.c_out, d.t_out, db);
    }
    if let Some(dw) = dw {
        conv_weight_grad(x, dy, d, dw);
    }
    if let Some(dx) = dx {
        conv_input_grad(w, dy, d, dx);
    }
}

/// Transposed convolution: input position `i` scatters into outputs
/// `i * stride + k - pad`. This is the input-gradient map of the
/// convolution with the same weights and the roles of the sides swapped.
pub fn conv_transpose1d(x: &[f64], w: &[f64], b: &[f64], d: &ConvDims, y: &mut [f64]) {
    if d.t_out == 0 {
        return;
    }
    fill_bias(y, b, d.t_out);
    conv_input_grad(w, x, &d.adjoint(), y);
}

pub fn conv_transpose1d_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    d: &ConvDims,
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let adj = d.adjoint();
    if let Some(db) = db {
        channel_sums(dy, d.n, d.c_out, d.t_out, db);
    }
    if let Some(dw) = dw {
        conv_weight_grad(dy, x, &adj, dw);
    }
    if let Some(dx) = dx {
        conv_forward(dy, w, &adj, dx, true);
    }
}

/// `y[n, o] = b[o] + Σ_i x[n, i] w[o, i]`
pub fn linear(x: &[f64], w: &[f64], b: &[f64], n: usize, n_in: usize, n_out: usize, y: &mut [f64]) {
    if n_out == 0 {
        return;
    }
    for row in y.chunks_mut(n_out) {
        row.copy_from_slice(b);
    }
    gemm(n, n_in, n_out, x, (n_in, 1), w, (1, n_in), 1.0, y, (n_out, 1));
}

#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    n: usize,
    n_in: usize,
    n_out: usize,
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(db) = db {
        for r in 0..n {
            for o in 0..n_out {
                db[o] += dy[r * n_out + o];
            }
        }
    }
    if let Some(dw) = dw {
        gemm(n_out, n, n_in, dy, (1, n_out), x, (n_in, 1), 1.0, dw, (n_in, 1));
    }
    if let Some(dx) = dx {
        gemm(n, n_out, n_in, dy, (n_out, 1), w, (n_in, 1), 1.0, dx, (n_in, 1));
    }
}
