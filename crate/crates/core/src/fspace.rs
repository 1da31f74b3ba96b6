//! Discretized function-space core.
//!
//! Curves are real functions observed on a common grid of points with
//! quadrature weights. Inner products and norms are the weighted sums
//!
//! ```text
//! <f, g> = sum_j w_j f(t_j) g(t_j),      ||f||_p = (sum_j w_j |f(t_j)|^p)^(1/p)
//! ```
//!
//! which discretize the L2\[a,b\] (and Lp) geometry that all test statistics
//! live in. The default weights implement the trapezoid rule; ingested
//! non-equispaced grids get the general trapezoid weights. Grids and curves
//! are immutable after construction and safe to share across threads.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Observation grid: strictly increasing points with positive quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Equispaced grid on `[a, b]` with trapezoid weights
    /// (`h/2` at the ends, `h` inside, `h = (b-a)/(m-1)`).
    pub fn equispaced(a: f64, b: f64, m: usize) -> Result<Arc<Grid>> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid(format!("need a < b, got a={a}, b={b}")));
        }
        if m < 2 {
            return Err(Error::invalid(format!("need m >= 2 grid points, got {m}")));
        }
        let h = (b - a) / (m - 1) as f64;
        let points: Vec<f64> = (0..m).map(|j| a + h * j as f64).collect();
        let mut weights = vec![h; m];
        weights[0] = h / 2.0;
        weights[m - 1] = h / 2.0;
        Ok(Arc::new(Grid { points, weights }))
    }

    /// Grid over arbitrary strictly increasing points with general trapezoid
    /// weights: `w_1 = (t_2-t_1)/2`, `w_j = (t_{j+1}-t_{j-1})/2`,
    /// `w_m = (t_m-t_{m-1})/2`. Requires at least two points.
    pub fn trapezoid_from_points(points: Vec<f64>) -> Result<Arc<Grid>> {
        if points.len() < 2 {
            return Err(Error::invalid("need at least 2 grid points"));
        }
        check_points(&points)?;
        let m = points.len();
        let mut weights = vec![0.0; m];
        weights[0] = (points[1] - points[0]) / 2.0;
        weights[m - 1] = (points[m - 1] - points[m - 2]) / 2.0;
        for j in 1..m - 1 {
            weights[j] = (points[j + 1] - points[j - 1]) / 2.0;
        }
        Ok(Arc::new(Grid { points, weights }))
    }

    /// Grid from explicit points and weights. Accepts a single point, which
    /// is how univariate (m = 1) data enter the statistics.
    pub fn from_points_weights(points: Vec<f64>, weights: Vec<f64>) -> Result<Arc<Grid>> {
        if points.is_empty() {
            return Err(Error::invalid("grid must have at least one point"));
        }
        if points.len() != weights.len() {
            return Err(Error::invalid("points/weights length mismatch"));
        }
        check_points(&points)?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(
                "quadrature weights must be positive and finite",
            ));
        }
        Ok(Arc::new(Grid { points, weights }))
    }

    /// Single-point grid with unit weight, for univariate data.
    pub fn scalar() -> Arc<Grid> {
        Arc::new(Grid {
            points: vec![0.0],
            weights: vec![1.0],
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("grid points must be finite"));
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("grid points must be strictly increasing"));
    }
    Ok(())
}

/// Whether two grids are interchangeable: same allocation or equal contents.
pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// A function observed on a grid.
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Curve> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "curve has {} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve values must be finite"));
        }
        Ok(Curve { grid, values })
    }

    /// Curve from a pointwise function of the grid points.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Curve> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve::new(grid, values)
    }

    pub fn zero(grid: Arc<Grid>) -> Curve {
        let values = vec![0.0; grid.len()];
        Curve { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Weighted inner product `sum_j w_j f_j g_j`.
    pub fn inner(&self, other: &Curve) -> Result<f64> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(inner_unchecked(
            self.grid.weights(),
            &self.values,
            &other.values,
        ))
    }

    /// Weighted Lp norm, `p >= 1`. `p = 2` is the norm used by every test.
    pub fn norm(&self, p: f64) -> Result<f64> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::invalid(format!(
                "norm order must satisfy p >= 1, got {p}"
            )));
        }
        if p == 2.0 {
            return Ok(self.norm2());
        }
        let s: f64 = self
            .grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    /// L2 norm, computed from the same summation as [`Curve::inner`].
    pub fn norm2(&self) -> f64 {
        inner_unchecked(self.grid.weights(), &self.values, &self.values).sqrt()
    }

    pub fn scale(&self, c: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn negate(&self) -> Curve {
        self.scale(-1.0)
    }
}

fn inner_unchecked(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    weights
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum()
}

/// Pointwise linear combination `alpha*f + beta*g` on a shared grid.
pub fn axpby(alpha: f64, f: &Curve, beta: f64, g: &Curve) -> Result<Curve> {
    if !same_grid(f.grid(), g.grid()) {
        return Err(Error::GridMismatch);
    }
    let values = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| alpha * a + beta * b)
        .collect();
    Ok(Curve {
        grid: f.grid.clone(),
        values,
    })
}

/// In-place accumulation `acc += c * f`, used by the O(n^2) pair loops.
pub(crate) fn accumulate(acc: &mut [f64], c: f64, f: &[f64]) {
    for (a, v) in acc.iter_mut().zip(f) {
        *a += c * v;
    }
}

/// The n difference curves `W_i = Y_i - X_i` of a paired sample, on one grid.
#[derive(Debug, Clone)]
pub struct PairedDiffSample {
    grid: Arc<Grid>,
    diffs: Vec<Curve>,
}

impl PairedDiffSample {
    pub fn new(diffs: Vec<Curve>) -> Result<PairedDiffSample> {
        let first = diffs
            .first()
            .ok_or(Error::SampleTooSmall { needed: 1, got: 0 })?;
        let grid = first.grid().clone();
        if diffs.iter().any(|c| !same_grid(c.grid(), &grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(PairedDiffSample { grid, diffs })
    }

    /// Sample from raw rows of values sharing one grid.
    pub fn from_rows(grid: Arc<Grid>, rows: Vec<Vec<f64>>) -> Result<PairedDiffSample> {
        let diffs = rows
            .into_iter()
            .map(|row| Curve::new(grid.clone(), row))
            .collect::<Result<Vec<_>>>()?;
        PairedDiffSample::new(diffs)
    }

    pub fn n(&self) -> usize {
        self.diffs.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn diffs(&self) -> &[Curve] {
        &self.diffs
    }

    /// Mean difference curve `W-bar`.
    pub fn mean_curve(&self) -> Curve {
        let mut acc = vec![0.0; self.grid.len()];
        for c in &self.diffs {
            accumulate(&mut acc, 1.0, c.values());
        }
        let n = self.n() as f64;
        for a in &mut acc {
            *a /= n;
        }
        Curve {
            grid: self.grid.clone(),
            values: acc,
        }
    }

    pub fn negate(&self) -> PairedDiffSample {
        PairedDiffSample {
            grid: self.grid.clone(),
            diffs: self.diffs.iter().map(Curve::negate).collect(),
        }
    }
}
