//! Normalized spatial effect fields estimated from tile counts.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::spatial::court::{tile_center, tile_centers, tile_index, CourtLocation, TileGrid, N_TILES};
use crate::spatial::tps::{select_min, ThinPlateSpline, TpsProblem};

/// Upper bound on the number of spline knots for a tile grid.
pub const MAX_KNOTS: usize = 400;
/// Side of the uniform knot lattice laid over the court.
pub const LATTICE_SIDE: usize = 6;

/// 25 log-spaced smoothing parameters spanning `[1e-4, 1e4]`.
pub fn default_lambda_grid<T: Real>() -> Vec<T> {
    (0..25).map(|k| T::lit(10f64.powf(-4.0 + 8.0 * k as f64 / 24.0))).collect()
}

/// How the smoothing parameter of a field is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice<T = f64> {
    /// Minimize GCV over the given candidates.
    Gcv(Vec<T>),
    Fixed(T),
}

impl<T: Real> Default for LambdaChoice<T> {
    fn default() -> Self {
        LambdaChoice::Gcv(default_lambda_grid())
    }
}

/// A smooth signed density over the half court with unit grid integral.
///
/// Values are `spline(s) / scale`; `grid_values` caches the tile-center
/// evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField<T: Real = f64> {
    spline: ThinPlateSpline<T>,
    lambda: T,
    scale: T,
    grid_values: Vec<T>,
}

impl<T: Real> SpatialField<T> {
    /// Wraps a raw (unnormalized) spline.
    pub fn from_spline(spline: ThinPlateSpline<T>, lambda: T) -> Self {
        let mut field = SpatialField {
            spline,
            lambda,
            scale: T::one(),
            grid_values: Vec::new(),
        };
        field.refresh_grid();
        field
    }

    /// The constant field `1/2350` per tile. Its λ is recorded as infinite.
    pub fn uniform() -> Self {
        let mut field = SpatialField {
            spline: ThinPlateSpline::constant(T::one()),
            lambda: T::lit(f64::INFINITY),
            scale: T::from_count(N_TILES),
            grid_values: Vec::new(),
        };
        field.refresh_grid();
        field
    }

    fn refresh_grid(&mut self) {
        self.grid_values = (0..N_TILES)
            .map(|k| self.spline.evaluate(tile_center(k)) / self.scale)
            .collect();
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn spline(&self) -> &ThinPlateSpline<T> {
        &self.spline
    }

    /// Divisor applied to the raw spline.
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn grid_values(&self) -> &[T] {
        &self.grid_values
    }

    /// `Σ_k value_k · 1 ft²`.
    pub fn grid_integral(&self) -> T {
        self.grid_values.iter().copied().fold(T::zero(), |a, v| a + v)
    }

    /// Field value at `s`; off-court points are evaluated at the nearest court point.
    pub fn evaluate(&self, s: CourtLocation<T>) -> T {
        self.spline.evaluate(s.clamped().as_array()) / self.scale
    }

    /// Tile with the largest value (first on ties).
    pub fn argmax_tile(&self) -> usize {
        let mut best = 0;
        for (k, v) in self.grid_values.iter().enumerate() {
            if *v > self.grid_values[best] {
                best = k;
            }
        }
        best
    }
}

/// Rescales a field so its grid integral is one.
pub fn normalize_field<T: Real>(field: SpatialField<T>) -> Result<SpatialField<T>> {
    let integral = field.grid_integral();
    if !integral.is_finite() || integral == T::zero() {
        return Err(Error::InvalidInput(format!(
            "field integral is {integral}; cannot normalize"
        )));
    }
    let mut out = field;
    out.scale *= integral;
    out.refresh_grid();
    Ok(out)
}

pub fn evaluate_field<T: Real>(field: &SpatialField<T>, s: CourtLocation<T>) -> T {
    field.evaluate(s)
}

/// Knots for a tile grid: a 6 × 6 lattice of tile centers plus the tiles
/// with data, thinned by count-weighted systematic sampling to at most
/// [`MAX_KNOTS`] in total. Depends only on the counts.
pub fn select_knots<T: Real>(grid: &TileGrid) -> Vec<[T; 2]> {
    let lattice: Vec<usize> = (0..LATTICE_SIDE)
        .flat_map(|a| {
            let ix = ((a as f64 + 0.5) * 47.0 / LATTICE_SIDE as f64) as usize;
            (0..LATTICE_SIDE).map(move |b| {
                let iy = ((b as f64 + 0.5) * 50.0 / LATTICE_SIDE as f64) as usize;
                tile_index(ix, iy)
            })
        })
        .collect();
    let mut chosen = vec![false; N_TILES];
    for &k in &lattice {
        chosen[k] = true;
    }
    let mut candidates: Vec<usize> = grid.support().filter(|&k| !chosen[k]).collect();
    let mut budget = MAX_KNOTS - lattice.len();
    // Tiles heavy enough to be drawn with certainty are taken outright.
    loop {
        if candidates.len() <= budget {
            for &k in &candidates {
                chosen[k] = true;
            }
            candidates.clear();
            break;
        }
        let total: u64 = candidates.iter().map(|&k| grid.counts()[k] as u64).sum();
        let step = total as f64 / budget as f64;
        let (certain, rest): (Vec<usize>, Vec<usize>) =
            candidates.iter().partition(|&&k| grid.counts()[k] as f64 >= step);
        if certain.is_empty() {
            break;
        }
        for &k in &certain {
            chosen[k] = true;
        }
        budget -= certain.len();
        candidates = rest;
    }
    if !candidates.is_empty() {
        let total: u64 = candidates.iter().map(|&k| grid.counts()[k] as u64).sum();
        let step = total as f64 / budget as f64;
        let mut cumulative = 0u64;
        let mut next = 0usize;
        for &k in &candidates {
            cumulative += grid.counts()[k] as u64;
            if next < budget && (next as f64 + 0.5) * step < cumulative as f64 {
                chosen[k] = true;
                next += 1;
            }
        }
    }
    (0..N_TILES).filter(|&k| chosen[k]).map(tile_center).collect()
}

/// The smoothing problem of one tile grid: targets `n_k / Σ n`, data at all
/// 2350 tile centers.
pub fn grid_problem<T: Real>(grid: &TileGrid) -> Result<TpsProblem<T>> {
    if grid.total() == 0 {
        return Err(Error::InvalidInput("tile grid has no counts".into()));
    }
    let knots = select_knots::<T>(grid);
    let targets = grid.proportions::<T>();
    TpsProblem::new(&tile_centers::<T>(), &targets, &knots)
}

/// Fits and normalizes the field of `grid` at smoothing parameter `lambda`.
pub fn tps_fit<T: Real>(grid: &TileGrid, lambda: T) -> Result<SpatialField<T>> {
    let problem = grid_problem(grid)?;
    field_from_problem(&problem, lambda)
}

pub(crate) fn field_from_problem<T: Real>(problem: &TpsProblem<T>, lambda: T) -> Result<SpatialField<T>> {
    let fit = problem.fit(lambda)?;
    normalize_field(SpatialField::from_spline(fit.spline, lambda))
}

fn check_lambdas<T: Real>(lambdas: &[T]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty smoothing-parameter grid".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= T::zero()) || !l.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothing parameter {bad} must be finite and >= 0")));
    }
    Ok(())
}

pub(crate) fn select_from_problem<T: Real>(problem: &TpsProblem<T>, lambdas: &[T]) -> Result<T> {
    check_lambdas(lambdas)?;
    let scores: Vec<T> = lambdas.iter().map(|&l| problem.gcv(l)).collect();
    select_min(lambdas, &scores, problem.target_scale())
        .map(|i| lambdas[i])
        .ok_or_else(|| Error::NonFinite("every GCV score is non-finite".into()))
}

/// GCV score of every candidate λ.
pub fn gcv_scores<T: Real>(grid: &TileGrid, lambdas: &[T]) -> Result<Vec<T>> {
    check_lambdas(lambdas)?;
    let problem = grid_problem(grid)?;
    Ok(lambdas.iter().map(|&l| problem.gcv(l)).collect())
}

/// The λ among `lambdas` minimizing `K·RSS / (K − tr A)²`.
pub fn gcv_select<T: Real>(grid: &TileGrid, lambdas: &[T]) -> Result<T> {
    let problem = grid_problem(grid)?;
    select_from_problem(&problem, lambdas)
}

/// Fits the field of `grid`, choosing λ as requested.
pub fn fit_field<T: Real>(grid: &TileGrid, choice: &LambdaChoice<T>) -> Result<SpatialField<T>> {
    let problem = grid_problem(grid)?;
    let lambda = match choice {
        LambdaChoice::Fixed(l) => *l,
        LambdaChoice::Gcv(candidates) => select_from_problem(&problem, candidates)?,
    };
    field_from_problem(&problem, lambda)
}
