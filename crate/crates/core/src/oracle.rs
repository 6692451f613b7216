//! Deterministic reference solution by Picard iteration on the integral form
//!
//! ```text
//! u(x, t) = v(x, t) + (1/2) * integral over the cone of (x, t) of F(u)
//! ```
//!
//! on a uniform space-time grid. The cone integral uses composite midpoint
//! quadrature over grid cells: each cell contributes the exact area of its
//! intersection with the cone times `F` evaluated at the cell center (the
//! average of its four corner values). The cone edges have slope one, so the
//! intersection length is piecewise linear in time and its area is integrated
//! exactly.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dalembert::{DalembertError, InitialData, QuadratureSpec};
use crate::estimator::{fmt17, EstimateRecord};
use crate::series::PowerSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point ({x}, {t}) lies outside the grid")]
    OutOfRange { x: f64, t: f64 },
    #[error("the grid does not contain the light cone of ({x}, {t})")]
    Coverage { x: f64, t: f64 },
    #[error(
        "Picard iteration did not converge in {iterations} iterations (residual {residual:e})"
    )]
    NotConverged { iterations: usize, residual: f64 },
    #[error("Picard iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error(transparent)]
    Data(#[from] DalembertError),
    #[error("malformed field file: {0}")]
    Parse(String),
}

/// Uniform grid on `[x_lo, x_hi] x [0, t_max]` with `nx * nt` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub t_max: f64,
    pub nt: usize,
}

// relative slack for range checks, in units of the grid spacing
const RANGE_SLACK: f64 = 1e-9;

impl GridSpec {
    pub fn new(
        x_lo: f64,
        x_hi: f64,
        nx: usize,
        t_max: f64,
        nt: usize,
    ) -> Result<Self, OracleError> {
        let spec = Self {
            x_lo,
            x_hi,
            nx,
            t_max,
            nt,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.x_lo.is_finite() && self.x_hi.is_finite() && self.x_lo < self.x_hi) {
            return Err(OracleError::InvalidGrid(format!(
                "need x_lo < x_hi, got [{}, {}]",
                self.x_lo, self.x_hi
            )));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(OracleError::InvalidGrid(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.nx < 2 || self.nt < 2 {
            return Err(OracleError::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {} x {}",
                self.nx, self.nt
            )));
        }
        Ok(())
    }

    pub fn hx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nx - 1) as f64
    }

    pub fn ht(&self) -> f64 {
        self.t_max / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x_hi
        } else {
            self.x_lo + (self.x_hi - self.x_lo) * i as f64 / (self.nx - 1) as f64
        }
    }

    pub fn t(&self, j: usize) -> f64 {
        if j == self.nt - 1 {
            self.t_max
        } else {
            self.t_max * j as f64 / (self.nt - 1) as f64
        }
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        let sx = RANGE_SLACK * self.hx();
        let st = RANGE_SLACK * self.ht();
        x >= self.x_lo - sx && x <= self.x_hi + sx && t >= -st && t <= self.t_max + st
    }

    /// Whether the whole backward light cone of `(x, t)` lies inside the grid.
    pub fn covers(&self, x: f64, t: f64) -> bool {
        let sx = RANGE_SLACK * self.hx();
        self.contains(x, t) && x - t >= self.x_lo - sx && x + t <= self.x_hi + sx
    }
}

/// Node values `u[j * nx + i] = u(x_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, OracleError> {
        grid.validate()?;
        if values.len() != grid.nx * grid.nt {
            return Err(OracleError::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.nx * grid.nt,
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn hx(&self) -> f64 {
        self.grid.hx()
    }

    pub fn ht(&self) -> f64 {
        self.grid.ht()
    }

    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation.
    pub fn lookup(&self, x: f64, t: f64) -> Result<f64, OracleError> {
        let g = &self.grid;
        if !g.contains(x, t) {
            return Err(OracleError::OutOfRange { x, t });
        }
        let fx = ((x - g.x_lo) / g.hx()).clamp(0.0, (g.nx - 1) as f64);
        let ft = (t / g.ht()).clamp(0.0, (g.nt - 1) as f64);
        let i = (fx.floor() as usize).min(g.nx - 2);
        let j = (ft.floor() as usize).min(g.nt - 2);
        let ax = fx - i as f64;
        let at = ft - j as f64;
        let lower = (1.0 - ax) * self.node(i, j) + ax * self.node(i + 1, j);
        let upper = (1.0 - ax) * self.node(i, j + 1) + ax * self.node(i + 1, j + 1);
        Ok((1.0 - at) * lower + at * upper)
    }

    /// Writes `x,t,u` rows, time-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,t,u")?;
        for j in 0..self.grid.nt {
            for i in 0..self.grid.nx {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt17(self.grid.x(i)),
                    fmt17(self.grid.t(j)),
                    fmt17(self.node(i, j))
                )?;
            }
        }
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self, OracleError> {
        let bad = |m: String| OracleError::Parse(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("x,t,u") {
            return Err(bad("expected header `x,t,u`".into()));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("row {}: {e}", n + 1)))?;
            if cols.len() != 3 {
                return Err(bad(format!("row {}: expected 3 columns", n + 1)));
            }
            rows.push((cols[0], cols[1], cols[2]));
        }
        let nx = rows
            .iter()
            .position(|r| r.1 != rows.first().map(|f| f.1).unwrap_or(0.0))
            .unwrap_or(rows.len());
        if nx < 2 || rows.len() % nx != 0 {
            return Err(bad("rows do not form a rectangular grid".into()));
        }
        let nt = rows.len() / nx;
        let grid = GridSpec::new(rows[0].0, rows[nx - 1].0, nx, rows[rows.len() - 1].1, nt)?;
        if rows[0].1 != 0.0 {
            return Err(bad("the first time level must be t = 0".into()));
        }
        let tol = 1e-9;
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k % nx, k / nx);
            if (r.0 - grid.x(i)).abs() > tol * grid.hx()
                || (r.1 - grid.t(j)).abs() > tol * grid.ht()
            {
                return Err(bad(format!("row {} is off the uniform grid", k + 1)));
            }
        }
        Field::from_values(grid, rows.into_iter().map(|r| r.2).collect())
    }
}

/// Solver limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardSpec {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub field: Field,
    /// Max-norm of the last update.
    pub residual: f64,
    pub iterations: usize,
    /// Max-norm update of every iteration, in order.
    pub residuals: Vec<f64>,
}

/// Length of `[xa, xb] ∩ [xc - h, xc + h]`.
fn overlap(xa: f64, xb: f64, xc: f64, h: f64) -> f64 {
    (xb.min(xc + h) - xa.max(xc - h)).max(0.0)
}

/// Exact area of the cell `[xa, xb] x [s0, s1]` inside the cone of `(xc, tc)`, `s1 <= tc`.
pub fn clipped_area(xa: f64, xb: f64, s0: f64, s1: f64, xc: f64, tc: f64) -> f64 {
    let mut cuts = [s0, tc - (xa - xc).abs(), tc - (xb - xc).abs(), s1];
    cuts[1] = cuts[1].clamp(s0, s1);
    cuts[2] = cuts[2].clamp(s0, s1);
    if cuts[1] > cuts[2] {
        cuts.swap(1, 2);
    }
    cuts.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            0.5 * (hi - lo) * (overlap(xa, xb, xc, tc - lo) + overlap(xa, xb, xc, tc - hi))
        })
        .sum()
}

/// Cone quadrature helper: cell-center integrand values with row prefix sums.
struct CellSource<'a> {
    grid: &'a GridSpec,
    // g[b * ncx + a] for cell (a, b)
    g: Vec<f64>,
    // prefix[b * (ncx + 1) + a] = sum of g over cells 0..a of row b
    prefix: Vec<f64>,
}

impl<'a> CellSource<'a> {
    fn new(grid: &'a GridSpec, u: &[f64], series: &PowerSeries) -> Self {
        let (nx, ncx, nct) = (grid.nx, grid.nx - 1, grid.nt - 1);
        let g: Vec<f64> = (0..ncx * nct)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (k % ncx, k / ncx);
                let center = 0.25
                    * (u[b * nx + a]
                        + u[b * nx + a + 1]
                        + u[(b + 1) * nx + a]
                        + u[(b + 1) * nx + a + 1]);
                series.evaluate(center)
            })
            .collect();
        let mut prefix = vec![0.0; (ncx + 1) * nct];
        for b in 0..nct {
            let row = &mut prefix[b * (ncx + 1)..(b + 1) * (ncx + 1)];
            for a in 0..ncx {
                row[a + 1] = row[a] + g[b * ncx + a];
            }
        }
        Self { grid, g, prefix }
    }

    /// Midpoint-rule integral of the source over the cone of node `(i, j)`,
    /// restricted to the grid.
    fn cone_integral(&self, i: usize, j: usize) -> f64 {
        let grid = self.grid;
        let (hx, ht) = (grid.hx(), grid.ht());
        let ncx = grid.nx - 1;
        let (xc, tc) = (grid.x(i), grid.t(j));
        let cell_area = hx * ht;
        let last = ncx as i64 - 1;
        let mut total = 0.0;
        for b in 0..j {
            let (s0, s1) = (grid.t(b), grid.t(b + 1));
            let (h0, h1) = (tc - s0, (tc - s1).max(0.0));
            let a_lo = (((xc - h0 - grid.x_lo) / hx).floor() as i64).clamp(0, last);
            let a_hi = ((((xc + h0 - grid.x_lo) / hx).ceil() as i64) - 1).clamp(0, last);
            if a_lo > a_hi {
                continue;
            }
            let f_lo = (((xc - h1 - grid.x_lo) / hx - RANGE_SLACK).ceil() as i64).max(a_lo);
            let f_hi = ((((xc + h1 - grid.x_lo) / hx + RANGE_SLACK).floor() as i64) - 1).min(a_hi);
            let row = b * ncx;
            let partial = |a: i64| {
                let a = a as usize;
                let xa = grid.x(a);
                let area = clipped_area(xa, grid.x(a + 1), s0, s1, xc, tc);
                area * self.g[row + a]
            };
            if f_lo <= f_hi {
                let p = &self.prefix[b * (ncx + 1)..];
                total += cell_area * (p[f_hi as usize + 1] - p[f_lo as usize]);
                for a in a_lo..f_lo {
                    total += partial(a);
                }
                for a in f_hi + 1..=a_hi {
                    total += partial(a);
                }
            } else {
                for a in a_lo..=a_hi {
                    total += partial(a);
                }
            }
        }
        total
    }
}

/// Picard iteration `u_{m+1} = v + (1/2) Q[F(u_m)]` starting from `u_0 = v`.
///
/// Every node is computed, but nodes whose cone leaves the grid only see the
/// part inside it; use [`GridSpec::covers`] to decide which values are valid.
pub fn picard_solve(
    series: &PowerSeries,
    data: &InitialData,
    grid: &GridSpec,
    q: &QuadratureSpec,
    spec: &PicardSpec,
) -> Result<PicardSolution, OracleError> {
    grid.validate()?;
    let (nx, nt) = (grid.nx, grid.nt);
    let free: Vec<f64> = (0..nx * nt)
        .into_par_iter()
        .map(|k| data.homogeneous_solution(q, grid.x(k % nx), grid.t(k / nx)))
        .collect::<Result<_, _>>()?;
    let mut u = free.clone();
    let mut residuals = Vec::new();
    for iteration in 1..=spec.max_iter {
        let source = CellSource::new(grid, &u, series);
        let next: Vec<f64> = (0..nx * nt)
            .into_par_iter()
            .map(|k| free[k] + 0.5 * source.cone_integral(k % nx, k / nx))
            .collect();
        let residual = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !residual.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::Diverged { iteration });
        }
        u = next;
        residuals.push(residual);
        if residual <= spec.tol {
            return Ok(PicardSolution {
                field: Field::from_values(*grid, u)?,
                residual,
                iterations: iteration,
                residuals,
            });
        }
    }
    Err(OracleError::NotConverged {
        iterations: spec.max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Monte Carlo estimate versus oracle at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub x: f64,
    pub t: f64,
    pub mc: f64,
    pub stderr: f64,
    pub oracle: f64,
    pub diff: f64,
    /// `diff / stderr`; infinite when `stderr = 0` and `diff != 0`.
    pub z: f64,
    pub pass: bool,
}

/// Compares estimates with the field; a point passes when
/// `|mc - oracle| <= z_threshold * stderr + oracle_tol`.
pub fn compare(
    estimates: &[EstimateRecord],
    field: &Field,
    z_threshold: f64,
    oracle_tol: f64,
) -> Result<Vec<Comparison>, OracleError> {
    estimates
        .iter()
        .map(|e| {
            if !field.grid().covers(e.x, e.t) {
                return Err(OracleError::Coverage { x: e.x, t: e.t });
            }
            let oracle = field.lookup(e.x, e.t)?;
            let diff = e.mean - oracle;
            let z = if diff == 0.0 { 0.0 } else { diff / e.stderr };
            Ok(Comparison {
                x: e.x,
                t: e.t,
                mc: e.mean,
                stderr: e.stderr,
                oracle,
                diff,
                z,
                pass: diff.abs() <= z_threshold * e.stderr + oracle_tol,
            })
        })
        .collect()
}

pub const COMPARE_HEADER: &str = "x,t,mc,stderr,oracle,diff,z,pass";

pub fn write_comparison_csv<W: Write>(mut out: W, rows: &[Comparison]) -> io::Result<()> {
    writeln!(out, "{COMPARE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt17(r.x),
            fmt17(r.t),
            fmt17(r.mc),
            fmt17(r.stderr),
            fmt17(r.oracle),
            fmt17(r.diff),
            fmt17(r.z),
            r.pass
        )?;
    }
    Ok(())
}
