//! Discrete probability measures on `R^d` and exact Wasserstein-2 couplings.
//!
//! Distances are computed by solving the transportation linear program exactly
//! with a network simplex over the bipartite transport polytope, see
//! [`transport`]. Zero-weight atoms are skipped by the solver and reappear as
//! empty rows or columns of the returned plan, so plan indices always match the
//! atom indices of the input measures.

pub mod transport;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid measure: {0}")]
    Invalid(Violation),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("transport solver did not converge after {0} pivots")]
    NotConverged(usize),
}

/// A point of `R^d`, `d >= 1`, with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, MeasureError> {
        if coords.is_empty() {
            return Err(MeasureError::InvalidPoint("zero-dimensional point".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(MeasureError::InvalidPoint(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    /// Wraps coordinates without validation. Arithmetic on valid points stays
    /// valid unless it overflows.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        linalg::dist_sq(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point(vec![x])
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(c: [f64; N]) -> Self {
        Point(c.to_vec())
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// First violated invariant of a [`DiscreteMeasure`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    LengthMismatch { points: usize, weights: usize },
    MixedDimensions { first: usize, other: usize },
    NonFinitePoint(usize),
    NegativeWeight(usize),
    NotNormalized(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "measure has no atoms"),
            Violation::LengthMismatch { points, weights } => {
                write!(f, "{points} points but {weights} weights")
            }
            Violation::MixedDimensions { first, other } => {
                write!(f, "mixed dimensions {first} and {other}")
            }
            Violation::NonFinitePoint(j) => write!(f, "point {j} is not a finite point"),
            Violation::NegativeWeight(j) => write!(f, "weight {j} is negative or not finite"),
            Violation::NotNormalized(s) => write!(f, "weights sum {s}"),
        }
    }
}

/// Weighted point cloud. Fields are public so that invalid measures can be
/// represented and diagnosed with [`DiscreteMeasure::validate`]; every
/// operation in this module validates its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        let mu = DiscreteMeasure { points, weights };
        mu.validate().map_err(MeasureError::Invalid)?;
        Ok(mu)
    }

    /// `(1/m) Σ δ_{x_j}`.
    pub fn uniform(points: Vec<Point>) -> Result<Self, MeasureError> {
        let m = points.len();
        let w = if m == 0 { 0.0 } else { 1.0 / m as f64 };
        DiscreteMeasure::new(points, vec![w; m])
    }

    pub fn dirac(point: Point) -> Self {
        DiscreteMeasure { points: vec![point], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Point::dim)
    }

    /// Reports the first violated invariant.
    pub fn validate(&self) -> Result<(), Violation> {
        if self.points.len() != self.weights.len() {
            return Err(Violation::LengthMismatch {
                points: self.points.len(),
                weights: self.weights.len(),
            });
        }
        let Some(first) = self.points.first() else {
            return Err(Violation::Empty);
        };
        let d = first.dim();
        for (j, p) in self.points.iter().enumerate() {
            if p.dim() != d {
                return Err(Violation::MixedDimensions { first: d, other: p.dim() });
            }
            if d == 0 || !p.is_finite() {
                return Err(Violation::NonFinitePoint(j));
            }
        }
        if let Some(j) = self.weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Violation::NegativeWeight(j));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > tolerances::NORMALIZATION {
            return Err(Violation::NotNormalized(total));
        }
        Ok(())
    }
}

/// The fixed hubs `z_1, …, z_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSet {
    points: Vec<Point>,
}

impl GridSet {
    pub fn new(points: Vec<Point>) -> Result<Self, MeasureError> {
        let Some(first) = points.first() else {
            return Err(MeasureError::InvalidGrid("grid must contain at least one point".into()));
        };
        let d = first.dim();
        for p in &points {
            if p.dim() != d {
                return Err(MeasureError::DimensionMismatch { expected: d, found: p.dim() });
            }
            if d == 0 || !p.is_finite() {
                return Err(MeasureError::InvalidGrid("grid point is not a finite point".into()));
            }
        }
        // Sorting by the first coordinate keeps the duplicate scan near linear.
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]));
        for (k, &a) in order.iter().enumerate() {
            for &b in &order[k + 1..] {
                if points[b][0] - points[a][0] > tolerances::GRID_DUPLICATE {
                    break;
                }
                let same = points[a]
                    .coords()
                    .iter()
                    .zip(points[b].coords())
                    .all(|(x, y)| (x - y).abs() <= tolerances::GRID_DUPLICATE);
                if same {
                    return Err(MeasureError::InvalidGrid(format!(
                        "duplicate grid points {} and {}",
                        a.min(b),
                        a.max(b)
                    )));
                }
            }
        }
        Ok(GridSet { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Index of the grid point equal to `p` within the duplicate tolerance.
    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.points.iter().position(|z| {
            z.dim() == p.dim()
                && z.coords()
                    .iter()
                    .zip(p.coords())
                    .all(|(a, b)| (a - b).abs() <= tolerances::GRID_DUPLICATE)
        })
    }
}

/// A transport plan between two measures, stored densely in row-major order.
/// `plan[j * cols + i]` is the mass moved from row atom `j` to column atom `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    plan: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CouplingJson {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Serialize for Coupling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CouplingJson { rows: self.rows, cols: self.cols, entries: self.entries() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = CouplingJson::deserialize(d)?;
        let mut plan = vec![0.0; raw.rows * raw.cols];
        for (j, i, mass) in raw.entries {
            if j >= raw.rows || i >= raw.cols {
                return Err(serde::de::Error::custom(format!("entry ({j}, {i}) out of range")));
            }
            plan[j * raw.cols + i] = mass;
        }
        Ok(Coupling { rows: raw.rows, cols: raw.cols, plan })
    }
}

impl Coupling {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.plan[j * self.cols + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.plan[j * self.cols..(j + 1) * self.cols]
    }

    /// Nonzero entries `(j, i, mass)` in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.rows {
            for (i, &mass) in self.row(j).iter().enumerate() {
                if mass > 0.0 {
                    out.push((j, i, mass));
                }
            }
        }
        out
    }

    /// `Σ_{j,i} plan[j][i] ‖x_j − z_i‖²`.
    pub fn cost(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        self.entries()
            .into_iter()
            .map(|(j, i, mass)| mass * mu.points[j].dist_sq(&nu.points[i]))
            .sum()
    }

    /// Largest deviation of the row and column sums from the given marginals.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let mut err: f64 = 0.0;
        for j in 0..self.rows {
            let s: f64 = self.row(j).iter().sum();
            err = err.max((s - mu.weights[j]).abs());
        }
        for i in 0..self.cols {
            let s: f64 = (0..self.rows).map(|j| self.get(j, i)).sum();
            err = err.max((s - nu.weights[i]).abs());
        }
        err
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("coupling serializes")
    }
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(), MeasureError> {
    mu.validate().map_err(MeasureError::Invalid)?;
    nu.validate().map_err(MeasureError::Invalid)?;
    if mu.dim() != nu.dim() {
        return Err(MeasureError::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    Ok(())
}

/// An optimal coupling for the squared Euclidean cost.
pub fn optimal_coupling(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<Coupling, MeasureError> {
    check_pair(mu, nu)?;

    let rows: Vec<usize> = (0..mu.len()).filter(|&j| mu.weights[j] > 0.0).collect();
    let cols: Vec<usize> = (0..nu.len()).filter(|&i| nu.weights[i] > 0.0).collect();
    let supply: Vec<f64> = rows.iter().map(|&j| mu.weights[j]).collect();
    let demand: Vec<f64> = cols.iter().map(|&i| nu.weights[i]).collect();
    let mut cost = Vec::with_capacity(rows.len() * cols.len());
    for &j in &rows {
        for &i in &cols {
            cost.push(mu.points[j].dist_sq(&nu.points[i]));
        }
    }
    let solved = transport::solve(&supply, &demand, &cost)?;

    let mut plan = vec![0.0; mu.len() * nu.len()];
    for (r, &j) in rows.iter().enumerate() {
        for (c, &i) in cols.iter().enumerate() {
            plan[j * nu.len() + i] = solved.plan[r * cols.len() + c];
        }
    }
    Ok(Coupling { rows: mu.len(), cols: nu.len(), plan })
}

/// `W₂²(μ, ν)`, the minimal expected squared displacement over all couplings.
pub fn w2_squared(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64, MeasureError> {
    let plan = optimal_coupling(mu, nu)?;
    Ok(plan.cost(mu, nu).max(0.0))
}
