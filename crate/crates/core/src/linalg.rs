//! Small dense complex linear algebra: LU with partial pivoting for patch
//! matrices and the dense coarsest-level fallback, and a Durand-Kerner root
//! finder for the quartic characteristic polynomials of two-grid symbols.

use num_complex::Complex64;

/// LU-factor the row-major n-by-n matrix `a` in place with partial pivoting,
/// recording the row swap done at each elimination step in `piv`.
///
/// Returns Err(()) when a pivot falls below 1e-14 of the largest entry of the
/// original matrix, which the callers report as a singular patch or a failed
/// coarse factorization.
pub fn lu_factor(a: &mut [Complex64], n: usize, piv: &mut [usize]) -> Result<(), ()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(piv.len(), n);
    let scale = a.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(());
    }
    let tiny = 1e-14 * scale;
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].norm();
        for r in k + 1..n {
            let v = a[r * n + k].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= tiny {
            return Err(());
        }
        piv[k] = p;
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
        }
        let inv = Complex64::new(1.0, 0.0) / a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] * inv;
            a[r * n + k] = f;
            for c in k + 1..n {
                let u = a[k * n + c];
                a[r * n + c] -= f * u;
            }
        }
    }
    Ok(())
}

/// Solve L U x = P b for one right-hand side, overwriting `b` with x.
pub fn lu_solve(lu: &[Complex64], n: usize, piv: &[usize], b: &mut [Complex64]) {
    debug_assert_eq!(lu.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for k in 0..n {
        b.swap(k, piv[k]);
        let bk = b[k];
        for r in k + 1..n {
            let f = lu[r * n + k];
            b[r] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= lu[k * n + c] * b[c];
        }
        b[k] = s / lu[k * n + k];
    }
}

/// Owned LU factorization, for call sites that factor once and solve often.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: Vec<Complex64>, n: usize) -> Result<Self, ()> {
        let mut piv = vec![0usize; n];
        lu_factor(&mut a, n, &mut piv)?;
        Ok(DenseLu { n, lu: a, piv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        lu_solve(&self.lu, self.n, &self.piv, b);
    }
}
