//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TlsError};

const SVD_MAX_ITER: usize = 200_000;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Thin SVD `M = U diag(s) Vᵀ` with singular values sorted descending.
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl ThinSvd {
    fn transposed(self) -> Self {
        Self {
            u: self.v,
            s: self.s,
            v: self.u,
        }
    }

    /// `‖U diag(s) Vᵀ − M‖_F / ‖M‖_F` and the worse of the two
    /// orthonormality defects.
    fn defects(&self, m: &DMatrix<f64>) -> (f64, f64) {
        let back = &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose();
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let orth = orthonormality_defect(&self.u).max(orthonormality_defect(&self.v));
        ((back - m).norm() / scale, orth)
    }
}

/// nalgebra's implicit-shift SVD is checked for backward error and
/// orthonormality; on the rare inputs where it returns inconsistent factors
/// the one-sided Jacobi method is used instead. Two-column inputs always
/// go through Jacobi: nalgebra's closed-form 2 × 2 solver loses most digits
/// of the small component of the singular vectors.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(TlsError::Convergence("non-finite entry".into()));
    }
    if m.nrows() < m.ncols() {
        return thin_svd(&m.transpose()).map(ThinSvd::transposed);
    }
    if m.ncols() == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(m.nrows(), 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        });
    }
    if m.ncols() > 2 {
        if let Some(svd) = nalgebra_svd(m) {
            let tol = 64.0 * f64::EPSILON * (m.nrows() as f64).sqrt() * m.ncols() as f64;
            let (recon, orth) = svd.defects(m);
            if recon <= tol && orth <= tol {
                return Ok(svd);
            }
        }
    }
    jacobi_svd(m)
}

fn nalgebra_svd(m: &DMatrix<f64>) -> Option<ThinSvd> {
    let svd = m.clone().try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)?;
    let (u, v_t) = (svd.u?, svd.v_t?);
    if svd.singular_values.iter().any(|s| !s.is_finite()) {
        return None;
    }
    Some(sorted(u, svd.singular_values, v_t.transpose()))
}

fn sorted(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> ThinSvd {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    ThinSvd {
        u: DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]),
        s: DVector::from_fn(order.len(), |j, _| s[order[j]]),
        v: DMatrix::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]),
    }
}

/// One-sided (Hestenes) Jacobi on a tall matrix, after a QR step so that
/// the rotations act on the square factor `R`.
fn jacobi_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let n = m.ncols();
    let qr = m.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let mut w = r;
    let mut v = DMatrix::<f64>::identity(n, n);
    // columns below this are rounding noise of a rank-deficient matrix
    let negligible = (f64::EPSILON * w.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n - 1 {
            for k in p + 1..n {
                let a = w.column(p).norm_squared();
                let b = w.column(k).norm_squared();
                let c = w.column(p).dot(&w.column(k));
                if c == 0.0 || c.abs() <= f64::EPSILON * (a * b).sqrt() || a.min(b) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let cs = 1.0 / t.hypot(1.0);
                let sn = cs * t;
                for mat in [&mut w, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, k)]);
                        mat[(i, p)] = cs * x - sn * y;
                        mat[(i, k)] = sn * x + cs * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(TlsError::Convergence(format!("Jacobi SVD of {} x {n} matrix", m.nrows())));
    }

    let s = DVector::from_fn(n, |j, _| w.column(j).norm());
    let mut u_r = DMatrix::zeros(n, n);
    for j in 0..n {
        if s[j] > 0.0 {
            u_r.set_column(j, &(w.column(j) / s[j]));
        }
    }
    let svd = sorted(&q * u_r, s, v);
    Ok(complete_basis(svd))
}

/// Re-orthogonalizes the `U` columns of negligible singular values against
/// the earlier ones, replacing them by unit vectors when nothing is left.
fn complete_basis(mut svd: ThinSvd) -> ThinSvd {
    let rows = svd.u.nrows();
    let k = svd.s.len();
    let tiny = f64::EPSILON * k as f64 * svd.s.get(0).copied().unwrap_or(0.0);
    let project_out = |u: &DMatrix<f64>, j: usize, mut e: DVector<f64>| {
        for _ in 0..2 {
            for l in 0..j {
                let col = u.column(l);
                let d = col.dot(&e);
                e -= col * d;
            }
        }
        e
    };
    for j in 0..k {
        if svd.s[j] > tiny {
            continue;
        }
        let e = project_out(&svd.u, j, svd.u.column(j).into_owned());
        if e.norm() > 0.5 {
            svd.u.set_column(j, &e.normalize());
            continue;
        }
        for r in 0..rows {
            let mut unit = DVector::zeros(rows);
            unit[r] = 1.0;
            let e = project_out(&svd.u, j, unit);
            if e.norm() > 0.5 {
                svd.u.set_column(j, &e.normalize());
                break;
            }
        }
    }
    svd
}

/// Singular values only, descending.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(thin_svd(m)?.s)
}

/// Spectral norm `‖M‖₂`.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(singular_values(m)?[0])
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(k, k)).norm()
}

/// Solve `M Y = R` by LU with partial pivoting.
pub fn lu_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let y = m.clone().lu().solve(rhs)?;
    y.iter().all(|v| v.is_finite()).then_some(y)
}
