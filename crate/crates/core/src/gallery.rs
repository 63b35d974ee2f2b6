//! Deterministic test matrices: Kahan, Grcar and a Kahan block embedded in
//! the identity.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::ComplexMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("bad gallery parameter: {0}")]
pub struct BadParameter(pub String);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GalleryKind {
    /// `s^{n−1} = target`.
    Kahan {
        target: f64,
    },
    Grcar,
    EmbeddedKahan {
        block: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GallerySpec {
    pub kind: GalleryKind,
    pub n: usize,
}

pub const DEFAULT_KAHAN_TARGET: f64 = 0.1;
pub const DEFAULT_EMBEDDED_BLOCK: usize = 6;

impl GallerySpec {
    pub fn kahan(n: usize) -> Self {
        Self {
            kind: GalleryKind::Kahan {
                target: DEFAULT_KAHAN_TARGET,
            },
            n,
        }
    }

    pub fn grcar(n: usize) -> Self {
        Self {
            kind: GalleryKind::Grcar,
            n,
        }
    }

    pub fn embedded_kahan(n: usize) -> Self {
        Self {
            kind: GalleryKind::EmbeddedKahan {
                block: DEFAULT_EMBEDDED_BLOCK,
            },
            n,
        }
    }

    pub fn build(&self) -> Result<ComplexMatrix, BadParameter> {
        match self.kind {
            GalleryKind::Kahan { target } => kahan(self.n, target),
            GalleryKind::Grcar => grcar(self.n),
            GalleryKind::EmbeddedKahan { block } => embedded_kahan(self.n, block),
        }
    }
}

fn check_n(n: usize) -> Result<(), BadParameter> {
    if n < 2 {
        return Err(BadParameter(format!("n must be at least 2, got {n}")));
    }
    Ok(())
}

/// Upper triangular with `(i,i) = sⁱ` and `(i,j) = −sⁱc` for `j > i`, where
/// `s = target^{1/(n−1)}` and `c = √(1 − s²)`.
pub fn kahan(n: usize, target: f64) -> Result<ComplexMatrix, BadParameter> {
    check_n(n)?;
    if !(target > 0.0 && target < 1.0) {
        return Err(BadParameter(format!(
            "kahan target must lie in (0, 1), got {target}"
        )));
    }
    let s = target.powf(1.0 / (n - 1) as f64);
    let c = (1.0 - s * s).sqrt();
    // Last diagonal pinned to target; s^{n−1} may round away from it.
    let powers: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { target } else { s.powi(i as i32) })
        .collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let v = match j.cmp(&i) {
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => powers[i],
            std::cmp::Ordering::Greater => -powers[i] * c,
        };
        Complex64::new(v, 0.0)
    }))
}

/// Toeplitz with −1 on the subdiagonal and 1 on the diagonal and the first
/// three superdiagonals.
pub fn grcar(n: usize) -> Result<ComplexMatrix, BadParameter> {
    check_n(n)?;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let v = if i == j + 1 {
            -1.0
        } else if j >= i && j - i <= 3 {
            1.0
        } else {
            0.0
        };
        Complex64::new(v, 0.0)
    }))
}

/// Identity with the leading `block × block` part replaced by `kahan(block, 0.1)`.
pub fn embedded_kahan(n: usize, block: usize) -> Result<ComplexMatrix, BadParameter> {
    check_n(n)?;
    if block > n {
        return Err(BadParameter(format!("block size {block} exceeds n = {n}")));
    }
    let k = kahan(block, DEFAULT_KAHAN_TARGET)?;
    let mut a = ComplexMatrix::identity(n);
    for i in 0..block {
        for j in 0..block {
            a[(i, j)] = k[(i, j)];
        }
    }
    Ok(a)
}
