//! Uniform rectangular grids and sampled functions on them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Ghost-value rule at the ends of an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Nodes `min + i Δx`, `i < n`, with `Δx = (max - min) / n`; `max` is identified with `min`.
    Periodic,
    /// Nodes `min + i Δx`, `i < n`, with `Δx = (max - min) / (n - 1)`; ghost values repeat the edge value.
    #[serde(alias = "extrapolate_constant")]
    Extrapolate,
    /// Nodes as for [`Boundary::Extrapolate`]; ghost values continue the edge slope, so affine data stay affine.
    #[serde(alias = "extrapolate_linear")]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub boundary: Boundary,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize, boundary: Boundary) -> Result<Self> {
        let axis = Self { min, max, n, boundary };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidGrid(format!("axis needs at least 3 points, got {}", self.n)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::InvalidGrid(format!("axis bounds [{}, {}] are not an interval", self.min, self.max)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => (self.max - self.min) / self.n as f64,
            Boundary::Extrapolate | Boundary::Linear => (self.max - self.min) / (self.n - 1) as f64,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    pub fn period(&self) -> Option<f64> {
        (self.boundary == Boundary::Periodic).then_some(self.max - self.min)
    }

    /// Index of the neighbour `i + step`, following the boundary rule.
    fn neighbour(&self, i: usize, step: isize) -> usize {
        let j = i as isize + step;
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => j.rem_euclid(n) as usize,
            Boundary::Extrapolate | Boundary::Linear => j.clamp(0, n - 1) as usize,
        }
    }

    /// Cell index `i` and weight `w ∈ [0, 1)` with `x = (1 - w) x_i + w x_{i+1}`.
    /// Positions within `1e-9` cells of a node snap onto it.
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let h = self.spacing();
        let mut s = (x - self.min) / h;
        if let Some(period) = self.period() {
            s = ((x - self.min).rem_euclid(period)) / h;
        }
        if (s - s.round()).abs() <= 1e-9 {
            s = s.round();
        }
        if !s.is_finite() {
            return None;
        }
        match self.boundary {
            Boundary::Periodic => {
                let i = (s.floor() as usize) % self.n;
                Some((i, s - s.floor()))
            }
            Boundary::Extrapolate | Boundary::Linear => {
                let last = (self.n - 1) as f64;
                if s < 0.0 || s > last {
                    return None;
                }
                if s == last {
                    return Some((self.n - 1, 0.0));
                }
                Some((s.floor() as usize, s - s.floor()))
            }
        }
    }
}

/// Tensor-product grid; the last axis varies fastest in flat indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one axis".into()));
        }
        for a in &axes {
            a.validate()?;
        }
        Ok(Self { axes })
    }

    /// The same box with `n` points on every axis.
    pub fn uniform(bounds: &[(f64, f64)], n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(bounds.iter().map(|&(lo, hi)| Axis { min: lo, max: hi, n, boundary }).collect())
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::spacing).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(0.0, f64::max)
    }

    fn stride(&self, axis: usize) -> usize {
        self.axes[axis + 1..].iter().map(|a| a.n).product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % a.n;
            flat /= a.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.n + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(flat, &mut x);
        x
    }

    /// Writes the coordinates of node `flat` into `out`.
    pub fn node_into(&self, mut flat: usize, out: &mut [f64]) {
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = a.node(flat % a.n);
            flat /= a.n;
        }
    }

    /// Flat index of the neighbour of `flat` one step along `axis` in direction `step`.
    pub fn neighbour(&self, flat: usize, axis: usize, step: isize) -> usize {
        let a = &self.axes[axis];
        let stride = self.stride(axis);
        let i = (flat / stride) % a.n;
        let j = a.neighbour(i, step);
        flat - i * stride + j * stride
    }

    /// Value at the neighbour of `flat` one step along `axis`, using a ghost
    /// value beyond a non-periodic edge.
    pub fn neighbour_value(&self, values: &[f64], flat: usize, axis: usize, step: isize) -> f64 {
        let a = &self.axes[axis];
        let stride = self.stride(axis);
        let i = (flat / stride) % a.n;
        let j = i as isize + step;
        if a.boundary == Boundary::Linear && (j < 0 || j >= a.n as isize) {
            let inner = a.neighbour(i, -step.signum());
            return 2.0 * values[flat] - values[flat - i * stride + inner * stride];
        }
        values[flat - i * stride + a.neighbour(i, step) * stride]
    }

    /// Distance from `x` to the nearest non-periodic face, in units of each axis; infinite when all axes are periodic.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        self.axes
            .iter()
            .zip(x)
            .filter(|(a, _)| a.boundary != Boundary::Periodic)
            .map(|(a, &xi)| (xi - a.min).min(a.max - xi))
            .fold(f64::INFINITY, f64::min)
    }

    /// The grid with `(n - 1) k + 1` points per non-periodic axis and `n k` per periodic axis, so that old nodes stay nodes.
    pub fn refined(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGrid("refinement factor must be positive".into()));
        }
        Self::new(
            self.axes
                .iter()
                .map(|a| Axis {
                    n: match a.boundary {
                        Boundary::Periodic => a.n * k,
                        Boundary::Extrapolate | Boundary::Linear => (a.n - 1) * k + 1,
                    },
                    ..a.clone()
                })
                .collect(),
        )
    }
}

/// Values of a function on the nodes of a grid at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub t: f64,
}

const MAGIC: &[u8; 4] = b"HJGF";
const VERSION: u32 = 1;

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, t: f64) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node, t });
        }
        Ok(Self { grid, values, t })
    }

    /// Samples `f` at every node, in parallel.
    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let values: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| f(&grid.node(i))).collect();
        Self::new(grid, values, t)
    }

    /// Like [`Self::from_fn`] for fallible closures; the first error in node order wins.
    pub fn try_from_fn(grid: Grid, t: f64, f: impl Fn(&[f64]) -> Result<f64> + Sync) -> Result<Self> {
        let values: Vec<Result<f64>> = (0..grid.len()).into_par_iter().map(|i| f(&grid.node(i))).collect();
        let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
        Self::new(grid, values, t)
    }

    /// Multilinear interpolation; second order in the spacing for smooth data.
    /// Periodic axes wrap; positions outside a non-periodic axis fail.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.grid.dim(), x.len())?;
        let mut cells = Vec::with_capacity(x.len());
        for (a, &xi) in self.grid.axes.iter().zip(x) {
            cells.push(a.locate(xi).ok_or_else(|| Error::OutOfGrid { point: x.to_vec() })?);
        }
        let d = x.len();
        let mut total = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0;
            for (k, (a, &(i, w))) in self.grid.axes.iter().zip(&cells).enumerate() {
                let upper = corner >> (d - 1 - k) & 1 == 1;
                let (j, wk) = if upper { (a.neighbour(i, 1), w) } else { (i, 1.0 - w) };
                weight *= wk;
                flat = flat * a.n + j;
            }
            if weight != 0.0 {
                total += weight * self.values[flat];
            }
        }
        Ok(total)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - f|` over nodes accepted by `keep`.
    pub fn max_error_where(&self, f: impl Fn(&[f64]) -> f64 + Sync, keep: impl Fn(&[f64]) -> bool + Sync) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .filter_map(|i| {
                let x = self.grid.node(i);
                keep(&x).then(|| (self.values[i] - f(&x)).abs())
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header: Vec<String> = (1..=self.grid.dim()).map(|i| format!("q{i}")).chain(["u".to_string()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let row: Vec<String> = self.grid.node(i).iter().chain([v]).map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads values written by [`Self::write_csv`] back onto a known grid.
    pub fn read_csv(grid: Grid, t: f64, r: impl Read) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (line_no, line) in BufReader::new(r).lines().enumerate().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line.rsplit(',').next().unwrap_or("");
            let v: f64 =
                last.trim().parse().map_err(|_| Error::Io(format!("line {}: cannot parse `{last}`", line_no + 1)))?;
            values.push(v);
        }
        Self::new(grid, values, t)
    }

    /// Binary layout: magic `HJGF`, `u32` version, `u32` dimension, then per
    /// axis `min: f64, max: f64, n: u64, boundary: u8` (0 periodic, 1
    /// constant, 2 linear), then `t: f64` and the row-major values. Little-endian.
    pub fn write_binary(&self, w: impl Write) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u32::<LittleEndian>(self.grid.dim() as u32)?;
        for a in &self.grid.axes {
            w.write_f64::<LittleEndian>(a.min)?;
            w.write_f64::<LittleEndian>(a.max)?;
            w.write_u64::<LittleEndian>(a.n as u64)?;
            w.write_u8(match a.boundary {
                Boundary::Periodic => 0,
                Boundary::Extrapolate => 1,
                Boundary::Linear => 2,
            })?;
        }
        w.write_f64::<LittleEndian>(self.t)?;
        for &v in &self.values {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Io("not a grid function file".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != VERSION {
            return Err(Error::Io(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let mut axes = Vec::with_capacity(dim);
        for _ in 0..dim {
            let min = r.read_f64::<LittleEndian>()?;
            let max = r.read_f64::<LittleEndian>()?;
            let n = r.read_u64::<LittleEndian>()? as usize;
            let boundary = match r.read_u8()? {
                0 => Boundary::Periodic,
                1 => Boundary::Extrapolate,
                2 => Boundary::Linear,
                b => return Err(Error::Io(format!("unknown boundary tag {b}"))),
            };
            axes.push(Axis { min, max, n, boundary });
        }
        let grid = Grid::new(axes)?;
        let t = r.read_f64::<LittleEndian>()?;
        let mut values = vec![0.0; grid.len()];
        r.read_f64_into::<LittleEndian>(&mut values)?;
        Self::new(grid, values, t)
    }

    pub fn save(&self, path: &Path, format: SnapshotFormat) -> Result<()> {
        let f = File::create(path)?;
        match format {
            SnapshotFormat::Csv => self.write_csv(f),
            SnapshotFormat::Binary => self.write_binary(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    Csv,
    Binary,
}
