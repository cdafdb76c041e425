//! Penalized thin-plate spline regression in two dimensions.
//!
//! A spline with knots `κ_1..κ_m` is
//!
//! ```text
//! f(s) = a0 + a1 x + a2 y + Σ_m δ_m φ(‖s − κ_m‖),   φ(r) = r² log r,
//! ```
//!
//! with the side condition `Tᵀ δ = 0` (`T` = `[1, x, y]` at the knots). Its
//! bending energy `∫ f_xx² + 2 f_xy² + f_yy²` equals `8π δᵀ Ω δ` where
//! `Ω_kl = φ(‖κ_k − κ_l‖)`.
//!
//! Fitting minimizes `Σ (y_k − f(s_k))² + λ · energy`. The side condition is
//! removed by writing `δ = Z δ'` with `Z` spanning the null space of `Tᵀ`.
//! With `X = QR` and `R⁻ᵀ S R⁻¹ = U D Uᵀ` every λ is then a diagonal solve,
//! which makes a GCV sweep cheap.

use nalgebra::{DMatrix, DVector, SymmetricEigen, QR};

use crate::error::{Error, Result};
use crate::num::Real;

/// `r² log r`, continuous at 0, computed from the squared distance.
#[inline]
pub fn tps_kernel<T: Real>(dist2: T) -> T {
    if dist2 > T::zero() {
        T::lit(0.5) * dist2 * dist2.ln()
    } else {
        T::zero()
    }
}

#[inline]
fn dist2<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// An evaluated thin-plate spline: knots, kernel weights and affine part.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinPlateSpline<T: Real = f64> {
    pub knots: Vec<[T; 2]>,
    pub weights: Vec<T>,
    /// `(a0, a1, a2)` of `a0 + a1 x + a2 y`.
    pub affine: [T; 3],
}

impl<T: Real> ThinPlateSpline<T> {
    pub fn constant(value: T) -> Self {
        ThinPlateSpline {
            knots: Vec::new(),
            weights: Vec::new(),
            affine: [value, T::zero(), T::zero()],
        }
    }

    pub fn evaluate(&self, s: [T; 2]) -> T {
        let a = &self.affine;
        let mut acc = a[0] + a[1] * s[0] + a[2] * s[1];
        for (k, w) in self.knots.iter().zip(&self.weights) {
            acc += *w * tps_kernel(dist2(s, *k));
        }
        acc
    }

    /// Bending energy `8π δᵀ Ω δ`.
    pub fn bending_energy(&self) -> T {
        let m = self.knots.len();
        let mut quad = T::zero();
        for i in 0..m {
            for j in 0..m {
                quad += self.weights[i] * self.weights[j] * tps_kernel(dist2(self.knots[i], self.knots[j]));
            }
        }
        T::lit(8.0 * std::f64::consts::PI) * quad
    }

    /// Penalized least-squares objective at the given data.
    pub fn objective(&self, sites: &[[T; 2]], targets: &[T], lambda: T) -> T {
        let rss = sites
            .iter()
            .zip(targets)
            .fold(T::zero(), |acc, (s, y)| {
                let r = *y - self.evaluate(*s);
                acc + r * r
            });
        rss + lambda * self.bending_energy()
    }
}

/// One solved smoothing problem.
#[derive(Debug, Clone)]
pub struct TpsFit<T: Real = f64> {
    pub spline: ThinPlateSpline<T>,
    pub lambda: T,
    /// Residual sum of squares at the data sites.
    pub rss: T,
    /// Trace of the influence matrix `A(λ)`.
    pub trace: T,
}

/// Design, penalty and spectral factors of a smoothing problem, reusable
/// across smoothing parameters.
#[derive(Debug, Clone)]
pub struct TpsProblem<T: Real = f64> {
    knots: Vec<[T; 2]>,
    targets: DVector<T>,
    design: DMatrix<T>,
    /// `m × (m − 3)` null-space basis of the knot affine matrix.
    null_basis: DMatrix<T>,
    /// `R⁻¹ U`: maps spectral coordinates to reduced coefficients.
    to_coef: DMatrix<T>,
    eigenvalues: Vec<T>,
    /// `Uᵀ Qᵀ y`.
    spectral_targets: Vec<T>,
}

impl<T: Real> TpsProblem<T> {
    /// Sets up the problem of smoothing `targets` observed at `sites` with a
    /// spline on `knots`. Needs at least three non-collinear knots and at
    /// least as many sites as knots.
    pub fn new(sites: &[[T; 2]], targets: &[T], knots: &[[T; 2]]) -> Result<Self> {
        let n = sites.len();
        let m = knots.len();
        if targets.len() != n {
            return Err(Error::Dimension(format!("{n} sites but {} targets", targets.len())));
        }
        if m < 3 {
            return Err(Error::Singular(format!("{m} knots; a thin-plate spline needs at least 3")));
        }
        if n < m {
            return Err(Error::Singular(format!("{n} data sites cannot determine {m} knot coefficients")));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("smoothing target".into()));
        }

        let knot_affine = DMatrix::from_fn(m, 3, |i, j| match j {
            0 => T::one(),
            1 => knots[i][0],
            _ => knots[i][1],
        });
        let affine_qr = QR::new(knot_affine);
        let affine_r = affine_qr.r();
        check_triangular_rank(&affine_r, || {
            format!("{m} knots are collinear or coincident; the affine part is not identifiable")
        })?;
        let mut qt = DMatrix::<T>::identity(m, m);
        affine_qr.q_tr_mul(&mut qt);
        let null_basis = qt.rows(3, m - 3).transpose();

        let kernel = DMatrix::from_fn(n, m, |i, j| tps_kernel(dist2(sites[i], knots[j])));
        let reduced = &kernel * &null_basis;
        let mut design = DMatrix::<T>::zeros(n, m);
        design.columns_mut(0, m - 3).copy_from(&reduced);
        for i in 0..n {
            design[(i, m - 3)] = T::one();
            design[(i, m - 2)] = sites[i][0];
            design[(i, m - 1)] = sites[i][1];
        }

        let omega = DMatrix::from_fn(m, m, |i, j| tps_kernel(dist2(knots[i], knots[j])));
        let penalty_reduced = null_basis.transpose() * omega * &null_basis * T::lit(8.0 * std::f64::consts::PI);
        let mut penalty = DMatrix::<T>::zeros(m, m);
        penalty.view_mut((0, 0), (m - 3, m - 3)).copy_from(&penalty_reduced);

        let y = DVector::from_column_slice(targets);
        let qr = QR::new(design.clone());
        let r = qr.r();
        check_triangular_rank(&r, || {
            format!("design of {n} sites against {m} knots is rank deficient (duplicate knots or degenerate sites)")
        })?;
        let mut qty = y.clone();
        qr.q_tr_mul(&mut qty);
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(m, m))
            .ok_or_else(|| Error::Singular(format!("triangular factor of {m} knots is singular")))?;
        let mut scaled = r_inv.transpose() * &penalty * &r_inv;
        scaled = (&scaled + scaled.transpose()) * T::lit(0.5);
        let eigen = SymmetricEigen::new(scaled);
        let eigenvalues: Vec<T> = eigen.eigenvalues.iter().map(|&d| d.max(T::zero())).collect();
        let to_coef = &r_inv * &eigen.eigenvectors;
        let spectral_targets = (eigen.eigenvectors.transpose() * qty.rows(0, m)).iter().copied().collect();

        Ok(TpsProblem {
            knots: knots.to_vec(),
            targets: y,
            design,
            null_basis,
            to_coef,
            eigenvalues,
            spectral_targets,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.design.nrows()
    }

    pub fn knots(&self) -> &[[T; 2]] {
        &self.knots
    }

    /// Trace of the influence matrix at `lambda`.
    pub fn trace(&self, lambda: T) -> T {
        self.eigenvalues
            .iter()
            .fold(T::zero(), |acc, &d| acc + T::one() / (T::one() + lambda * d))
    }

    fn reduced_coefficients(&self, lambda: T) -> DVector<T> {
        let shrunk = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues
                .iter()
                .zip(&self.spectral_targets)
                .map(|(&d, &c)| c / (T::one() + lambda * d)),
        );
        &self.to_coef * shrunk
    }

    fn rss_of(&self, coef: &DVector<T>) -> T {
        let resid = &self.targets - &self.design * coef;
        resid.dot(&resid)
    }

    pub fn fit(&self, lambda: T) -> Result<TpsFit<T>> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("smoothing parameter {lambda} must be finite and >= 0")));
        }
        let m = self.knots.len();
        let coef = self.reduced_coefficients(lambda);
        let rss = self.rss_of(&coef);
        let weights = &self.null_basis * coef.rows(0, m - 3);
        let spline = ThinPlateSpline {
            knots: self.knots.clone(),
            weights: weights.iter().copied().collect(),
            affine: [coef[m - 3], coef[m - 2], coef[m - 1]],
        };
        if spline.weights.iter().chain(&spline.affine).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("spline coefficients at lambda {lambda}")));
        }
        Ok(TpsFit {
            spline,
            lambda,
            rss,
            trace: self.trace(lambda),
        })
    }

    /// `GCV(λ) = n · RSS(λ) / (n − tr A(λ))²`.
    pub fn gcv(&self, lambda: T) -> T {
        let n = T::from_count(self.n_sites());
        let coef = self.reduced_coefficients(lambda);
        let rss = self.rss_of(&coef);
        let denom = n - self.trace(lambda);
        n * rss / (denom * denom)
    }

    /// Squared norm of the targets over the number of sites, the scale of a
    /// GCV score.
    pub(crate) fn target_scale(&self) -> T {
        self.targets.dot(&self.targets) / T::from_count(self.n_sites())
    }
}

fn check_triangular_rank<T: Real, F: FnOnce() -> String>(r: &DMatrix<T>, msg: F) -> Result<()> {
    let diag: Vec<T> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let largest = diag.iter().copied().fold(T::zero(), T::max);
    let tol = largest * T::lit(1e-11);
    if !(largest > T::zero()) || diag.iter().any(|&d| !(d > tol)) {
        return Err(Error::Singular(msg()));
    }
    Ok(())
}

/// Index of the smallest finite score; scores within a relative `1e-10` of
/// the target scale count as ties and resolve to the largest λ.
pub(crate) fn select_min<T: Real>(lambdas: &[T], scores: &[T], scale: T) -> Option<usize> {
    let best = scores
        .iter()
        .copied()
        .filter(|s| s.is_finite())
        .fold(None, |acc: Option<T>, s| Some(acc.map_or(s, |a| a.min(s))))?;
    let tol = T::lit(1e-10) * scale.max(best.abs());
    lambdas
        .iter()
        .zip(scores)
        .enumerate()
        .filter(|(_, (_, s))| s.is_finite() && **s <= best + tol)
        .max_by(|(_, (a, _)), (_, (b, _))| a.partial_cmp(b).expect("finite lambdas"))
        .map(|(i, _)| i)
}
