//! Row-pivoted LU factorization of dense complex matrices.
//!
//! The factorization runs on split real/imaginary planes so that the
//! trailing-matrix update vectorizes. It is blocked by column panels; the
//! rank-`NB` update is the only O(n³) part and is dispatched to an AVX2/FMA
//! build of the kernel when the CPU supports it.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;

use super::{ComplexMatrix, ComplexVector, LinalgError};

const PANEL: usize = 48;
const TILE: usize = 256;
const CONDEST_ITERATIONS: usize = 5;

#[derive(Clone, Copy)]
enum PivotPolicy {
    /// Fail when a pivot modulus drops below the threshold.
    Fail(f64),
    /// Replace tiny pivots by the floor, keeping their phase.
    Floor(f64),
}

/// `P M = L U` with unit lower-triangular `L`, stored packed.
///
/// `solve` and `solve_adjoint` count their calls; the solves made internally by
/// the condition estimator are not counted.
#[derive(Debug)]
pub struct Factorization {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    /// `perm[i]` is the original row now at position `i`.
    perm: Vec<usize>,
    norm_fro: f64,
    norm_one: f64,
    pivot_growth: f64,
    cond_estimate: f64,
    solves: AtomicUsize,
}

/// Factorizes a square matrix with partial pivoting.
///
/// Fails with `SingularMatrix` when a pivot modulus falls below
/// `1e-14 · ‖M‖_F`.
pub fn factorize(m: &ComplexMatrix) -> Result<Factorization, LinalgError> {
    check_input(m)?;
    let threshold = 1e-14 * m.norm_fro();
    factor_impl(m, PivotPolicy::Fail(threshold))
}

/// Factorization used by inverse iteration: tiny pivots are floored at
/// `ε_mach · ‖M‖_F` instead of failing, so exactly singular matrices still
/// produce a usable (huge) inverse.
pub(crate) fn factorize_regularized(m: &ComplexMatrix) -> Result<Factorization, LinalgError> {
    check_input(m)?;
    let floor = (f64::EPSILON * m.norm_fro()).max(f64::MIN_POSITIVE);
    factor_impl(m, PivotPolicy::Floor(floor))
}

fn check_input(m: &ComplexMatrix) -> Result<(), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "cannot factorize a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() == 0 {
        return Err(LinalgError::DimensionMismatch("empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

fn factor_impl(m: &ComplexMatrix, policy: PivotPolicy) -> Result<Factorization, LinalgError> {
    let n = m.rows();
    let mut re: Vec<f64> = m.as_slice().iter().map(|z| z.re).collect();
    let mut im: Vec<f64> = m.as_slice().iter().map(|z| z.im).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let max_in = m.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);

    let fused = fma_available();
    let mut kb = 0;
    while kb < n {
        let ke = (kb + PANEL).min(n);
        factor_panel(n, kb, ke, &mut re, &mut im, &mut perm, policy)?;
        if ke < n {
            solve_u12(n, kb, ke, &mut re, &mut im, fused);
            update_trailing(n, kb, ke, &mut re, &mut im, fused);
        }
        kb = ke;
    }

    let mut max_u: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            max_u = max_u.max(re[i * n + j].hypot(im[i * n + j]));
        }
    }
    if !max_u.is_finite() {
        return Err(LinalgError::NonFinite);
    }

    let mut f = Factorization {
        n,
        re,
        im,
        perm,
        norm_fro: m.norm_fro(),
        norm_one: m.norm_one(),
        pivot_growth: if max_in > 0.0 { max_u / max_in } else { 1.0 },
        cond_estimate: f64::NAN,
        solves: AtomicUsize::new(0),
    };
    f.cond_estimate = f.norm_one * f.estimate_inverse_norm_one();
    Ok(f)
}

fn factor_panel(
    n: usize,
    kb: usize,
    ke: usize,
    re: &mut [f64],
    im: &mut [f64],
    perm: &mut [usize],
    policy: PivotPolicy,
) -> Result<(), LinalgError> {
    for k in kb..ke {
        let mut p = k;
        let mut best = -1.0;
        for i in k..n {
            let a = re[i * n + k] * re[i * n + k] + im[i * n + k] * im[i * n + k];
            if a > best {
                best = a;
                p = i;
            }
        }
        if !best.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        if p != k {
            swap_rows(n, re, k, p);
            swap_rows(n, im, k, p);
            perm.swap(k, p);
        }
        let modulus = best.sqrt();
        match policy {
            PivotPolicy::Fail(threshold) => {
                if modulus <= threshold {
                    return Err(LinalgError::SingularMatrix {
                        step: k,
                        pivot: modulus,
                        threshold,
                    });
                }
            }
            PivotPolicy::Floor(floor) => {
                if modulus < floor {
                    let (pr, pi) = if modulus > 0.0 {
                        (
                            re[k * n + k] / modulus * floor,
                            im[k * n + k] / modulus * floor,
                        )
                    } else {
                        (floor, 0.0)
                    };
                    re[k * n + k] = pr;
                    im[k * n + k] = pi;
                }
            }
        }
        let piv = Complex64::new(re[k * n + k], im[k * n + k]);
        let inv = piv.inv();
        for i in k + 1..n {
            let l = Complex64::new(re[i * n + k], im[i * n + k]) * inv;
            re[i * n + k] = l.re;
            im[i * n + k] = l.im;
            if l.re == 0.0 && l.im == 0.0 {
                continue;
            }
            for j in k + 1..ke {
                let (ur, ui) = (re[k * n + j], im[k * n + j]);
                re[i * n + j] -= l.re * ur - l.im * ui;
                im[i * n + j] -= l.re * ui + l.im * ur;
            }
        }
    }
    Ok(())
}

fn swap_rows(n: usize, a: &mut [f64], r1: usize, r2: usize) {
    let (lo, hi) = (r1.min(r2), r1.max(r2));
    let (top, bottom) = a.split_at_mut(hi * n);
    top[lo * n..(lo + 1) * n].swap_with_slice(&mut bottom[..n]);
}

/// `U12 ← L11⁻¹ A12` for the block row `kb..ke`.
fn solve_u12(n: usize, kb: usize, ke: usize, re: &mut [f64], im: &mut [f64], fused: bool) {
    for k in kb..ke {
        for i in k + 1..ke {
            let (lr, li) = (re[i * n + k], im[i * n + k]);
            if lr == 0.0 && li == 0.0 {
                continue;
            }
            let (re_top, re_bot) = re.split_at_mut(i * n);
            let (im_top, im_bot) = im.split_at_mut(i * n);
            let src_re = &re_top[k * n + ke..(k + 1) * n];
            let src_im = &im_top[k * n + ke..(k + 1) * n];
            let dst_re = &mut re_bot[ke..n];
            let dst_im = &mut im_bot[ke..n];
            axpy1(fused, dst_re, dst_im, lr, li, src_re, src_im);
        }
    }
}

/// `A22 ← A22 − L21 U12`.
fn update_trailing(n: usize, kb: usize, ke: usize, re: &mut [f64], im: &mut [f64], fused: bool) {
    let width = ke - kb;
    let (re_top, re_bot) = re.split_at_mut(ke * n);
    let (im_top, im_bot) = im.split_at_mut(ke * n);
    let rows = n - ke;
    let mut coef = vec![0.0; 8 * width];

    let mut r0 = 0;
    while r0 < rows {
        let block = (rows - r0).min(4);
        for r in 0..block {
            let base = (r0 + r) * n;
            for k in 0..width {
                coef[(k * 4 + r) * 2] = re_bot[base + kb + k];
                coef[(k * 4 + r) * 2 + 1] = im_bot[base + kb + k];
            }
        }
        let mut c0 = ke;
        while c0 < n {
            let c1 = (c0 + TILE).min(n);
            if block == 4 {
                let (re_rows, im_rows) = (
                    &mut re_bot[r0 * n..(r0 + 4) * n],
                    &mut im_bot[r0 * n..(r0 + 4) * n],
                );
                let (re0, rest) = re_rows.split_at_mut(n);
                let (re1, rest) = rest.split_at_mut(n);
                let (re2, re3) = rest.split_at_mut(n);
                let (im0, rest) = im_rows.split_at_mut(n);
                let (im1, rest) = rest.split_at_mut(n);
                let (im2, im3) = rest.split_at_mut(n);
                let mut rows4 = [
                    &mut re0[c0..c1],
                    &mut im0[c0..c1],
                    &mut re1[c0..c1],
                    &mut im1[c0..c1],
                    &mut re2[c0..c1],
                    &mut im2[c0..c1],
                    &mut re3[c0..c1],
                    &mut im3[c0..c1],
                ];
                for k in 0..width {
                    let src = (kb + k) * n;
                    let cf: &[f64; 8] = coef[k * 8..k * 8 + 8].try_into().unwrap();
                    axpy4(
                        fused,
                        &mut rows4,
                        cf,
                        &re_top[src + c0..src + c1],
                        &im_top[src + c0..src + c1],
                    );
                }
            } else {
                for r in 0..block {
                    let base = (r0 + r) * n;
                    for k in 0..width {
                        let (lr, li) = (coef[(k * 4 + r) * 2], coef[(k * 4 + r) * 2 + 1]);
                        let src = (kb + k) * n;
                        axpy1(
                            fused,
                            &mut re_bot[base + c0..base + c1],
                            &mut im_bot[base + c0..base + c1],
                            lr,
                            li,
                            &re_top[src + c0..src + c1],
                            &im_top[src + c0..src + c1],
                        );
                    }
                }
            }
            c0 = c1;
        }
        r0 += block;
    }
}

fn fma_available() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

#[inline(always)]
fn nmadd<const FUSED: bool>(a: f64, b: f64, c: f64) -> f64 {
    if FUSED {
        (-a).mul_add(b, c)
    } else {
        c - a * b
    }
}

#[inline(always)]
fn axpy1_body<const FUSED: bool>(
    dre: &mut [f64],
    dim: &mut [f64],
    lr: f64,
    li: f64,
    sre: &[f64],
    sim: &[f64],
) {
    let len = dre.len();
    let (dim, sre, sim) = (&mut dim[..len], &sre[..len], &sim[..len]);
    for c in 0..len {
        let (sr, si) = (sre[c], sim[c]);
        dre[c] = nmadd::<FUSED>(-li, si, nmadd::<FUSED>(lr, sr, dre[c]));
        dim[c] = nmadd::<FUSED>(li, sr, nmadd::<FUSED>(lr, si, dim[c]));
    }
}

#[inline(always)]
fn axpy4_body<const FUSED: bool>(
    rows: &mut [&mut [f64]; 8],
    cf: &[f64; 8],
    sre: &[f64],
    sim: &[f64],
) {
    let len = sre.len();
    let sim = &sim[..len];
    let [r0, i0, r1, i1, r2, i2, r3, i3] = rows;
    let (r0, i0, r1, i1) = (
        &mut r0[..len],
        &mut i0[..len],
        &mut r1[..len],
        &mut i1[..len],
    );
    let (r2, i2, r3, i3) = (
        &mut r2[..len],
        &mut i2[..len],
        &mut r3[..len],
        &mut i3[..len],
    );
    for c in 0..len {
        let (sr, si) = (sre[c], sim[c]);
        r0[c] = nmadd::<FUSED>(-cf[1], si, nmadd::<FUSED>(cf[0], sr, r0[c]));
        i0[c] = nmadd::<FUSED>(cf[1], sr, nmadd::<FUSED>(cf[0], si, i0[c]));
        r1[c] = nmadd::<FUSED>(-cf[3], si, nmadd::<FUSED>(cf[2], sr, r1[c]));
        i1[c] = nmadd::<FUSED>(cf[3], sr, nmadd::<FUSED>(cf[2], si, i1[c]));
        r2[c] = nmadd::<FUSED>(-cf[5], si, nmadd::<FUSED>(cf[4], sr, r2[c]));
        i2[c] = nmadd::<FUSED>(cf[5], sr, nmadd::<FUSED>(cf[4], si, i2[c]));
        r3[c] = nmadd::<FUSED>(-cf[7], si, nmadd::<FUSED>(cf[6], sr, r3[c]));
        i3[c] = nmadd::<FUSED>(cf[7], sr, nmadd::<FUSED>(cf[6], si, i3[c]));
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy1_fma(dre: &mut [f64], dim: &mut [f64], lr: f64, li: f64, sre: &[f64], sim: &[f64]) {
    axpy1_body::<true>(dre, dim, lr, li, sre, sim)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy4_fma(rows: &mut [&mut [f64]; 8], cf: &[f64; 8], sre: &[f64], sim: &[f64]) {
    axpy4_body::<true>(rows, cf, sre, sim)
}

fn axpy1(
    fused: bool,
    dre: &mut [f64],
    dim: &mut [f64],
    lr: f64,
    li: f64,
    sre: &[f64],
    sim: &[f64],
) {
    #[cfg(target_arch = "x86_64")]
    if fused {
        // SAFETY: `fused` is only true when avx2 and fma were detected at runtime.
        unsafe { axpy1_fma(dre, dim, lr, li, sre, sim) };
        return;
    }
    let _ = fused;
    axpy1_body::<false>(dre, dim, lr, li, sre, sim)
}

fn axpy4(fused: bool, rows: &mut [&mut [f64]; 8], cf: &[f64; 8], sre: &[f64], sim: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if fused {
        // SAFETY: `fused` is only true when avx2 and fma were detected at runtime.
        unsafe { axpy4_fma(rows, cf, sre, sim) };
        return;
    }
    let _ = fused;
    axpy4_body::<false>(rows, cf, sre, sim)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of caller-requested solves so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// 1-norm condition estimate `‖M‖₁ · est(‖M⁻¹‖₁)` from a Hager–Higham
    /// power iteration capped at five steps. It is a lower bound in general.
    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// `max |U_ij| / max |M_ij|`.
    pub fn pivot_growth(&self) -> f64 {
        self.pivot_growth
    }

    pub fn norm_fro(&self) -> f64 {
        self.norm_fro
    }

    /// Solves `M y = rhs`.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<ComplexVector, LinalgError> {
        self.check_rhs(rhs)?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(self.solve_raw(rhs))
    }

    /// Solves `Mᴴ y = rhs`.
    pub fn solve_adjoint(&self, rhs: &[Complex64]) -> Result<ComplexVector, LinalgError> {
        self.check_rhs(rhs)?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(self.solve_adjoint_raw(rhs))
    }

    fn check_rhs(&self, rhs: &[Complex64]) -> Result<(), LinalgError> {
        if rhs.len() != self.n {
            return Err(LinalgError::DimensionMismatch(format!(
                "rhs of length {} for a system of dimension {}",
                rhs.len(),
                self.n
            )));
        }
        Ok(())
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re[i * self.n + j], self.im[i * self.n + j])
    }

    fn solve_raw(&self, rhs: &[Complex64]) -> ComplexVector {
        let n = self.n;
        let mut y: ComplexVector = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row_re = &self.re[i * n..i * n + i];
            let row_im = &self.im[i * n..i * n + i];
            let mut acc = y[i];
            for ((lr, li), yj) in row_re.iter().zip(row_im).zip(&y[..i]) {
                acc -= Complex64::new(*lr, *li) * yj;
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let row_re = &self.re[i * n + i + 1..(i + 1) * n];
            let row_im = &self.im[i * n + i + 1..(i + 1) * n];
            let mut acc = y[i];
            for ((ur, ui), yj) in row_re.iter().zip(row_im).zip(&y[i + 1..]) {
                acc -= Complex64::new(*ur, *ui) * yj;
            }
            y[i] = acc / self.at(i, i);
        }
        y
    }

    fn solve_adjoint_raw(&self, rhs: &[Complex64]) -> ComplexVector {
        let n = self.n;
        // Uᴴ w = rhs, column sweep over rows of U.
        let mut w = rhs.to_vec();
        for j in 0..n {
            let wj = w[j] / self.at(j, j).conj();
            w[j] = wj;
            let row_re = &self.re[j * n + j + 1..(j + 1) * n];
            let row_im = &self.im[j * n + j + 1..(j + 1) * n];
            for ((ur, ui), wi) in row_re.iter().zip(row_im).zip(&mut w[j + 1..]) {
                *wi -= Complex64::new(*ur, -*ui) * wj;
            }
        }
        // Lᴴ z = w, backward sweep over rows of L.
        for j in (0..n).rev() {
            let zj = w[j];
            let row_re = &self.re[j * n..j * n + j];
            let row_im = &self.im[j * n..j * n + j];
            for ((lr, li), wi) in row_re.iter().zip(row_im).zip(&mut w[..j]) {
                *wi -= Complex64::new(*lr, -*li) * zj;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    fn estimate_inverse_norm_one(&self) -> f64 {
        let n = self.n;
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for iter in 0..CONDEST_ITERATIONS {
            let y = self.solve_raw(&x);
            let new_est: f64 = y.iter().map(|z| z.norm()).sum();
            if iter > 0 && new_est <= est {
                break;
            }
            est = new_est;
            let xi: ComplexVector = y
                .iter()
                .map(|z| {
                    let a = z.norm();
                    if a > 0.0 {
                        z / a
                    } else {
                        Complex64::new(1.0, 0.0)
                    }
                })
                .collect();
            let z = self.solve_adjoint_raw(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if iter > 0 && (zmax <= ztx || j == last_j) {
                break;
            }
            last_j = j;
            x = vec![Complex64::new(0.0, 0.0); n];
            x[j] = Complex64::new(1.0, 0.0);
        }
        est
    }

    /// Rebuilds `M = Pᵀ L U` from the stored factors.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.n;
        let mut lu = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..=i.min(j) {
                    let l = if k == i {
                        Complex64::new(1.0, 0.0)
                    } else {
                        self.at(i, k)
                    };
                    acc += l * self.at(k, j);
                }
                lu[(self.perm[i], j)] = acc;
            }
        }
        lu
    }
}
