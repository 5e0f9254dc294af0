//! Single-band rasters: ESRI ASCII I/O, resampling onto a reference geometry
//! and cell-wise differencing.
//!
//! Values are stored row-major with the first row being the northernmost, the
//! same order the ASCII format lists them in.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

const GEOMETRY_RTOL: f64 = 1e-9;

/// Placement and size of a raster.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridGeometry {
    pub ncols: usize,
    pub nrows: usize,
    /// West edge.
    pub xll: f64,
    /// South edge.
    pub yll: f64,
    pub cellsize: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= GEOMETRY_RTOL * a.abs().max(b.abs()).max(1.0)
}

impl PartialEq for GridGeometry {
    fn eq(&self, other: &Self) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && close(self.xll, other.xll)
            && close(self.yll, other.yll)
            && close(self.cellsize, other.cellsize)
    }
}

impl GridGeometry {
    pub fn new(ncols: usize, nrows: usize, xll: f64, yll: f64, cellsize: f64) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::domain("grid dimensions must be positive"));
        }
        if !(cellsize > 0.0 && cellsize.is_finite()) {
            return Err(Error::domain(format!("cellsize must be positive, got {cellsize}")));
        }
        if !xll.is_finite() || !yll.is_finite() {
            return Err(Error::domain("corner coordinates must be finite"));
        }
        Ok(Self {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
        })
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// North edge.
    pub fn ytop(&self) -> f64 {
        self.yll + self.nrows as f64 * self.cellsize
    }

    /// East edge.
    pub fn xright(&self) -> f64 {
        self.xll + self.ncols as f64 * self.cellsize
    }

    /// Map coordinates of the center of cell (row, col).
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.ytop() - (row as f64 + 0.5) * self.cellsize,
        )
    }

    pub fn ensure_same(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Geometry(format!("{what}: {self:?} vs {other:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    Nearest,
    Bilinear,
}

/// A georeferenced single-band raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    geometry: GridGeometry,
    nodata: T,
    values: Vec<T>,
    pub crs_label: Option<String>,
}

impl<T: Scalar> Grid<T> {
    /// Builds a grid, checking the value count and that every value is either
    /// finite or the nodata sentinel.
    pub fn new(geometry: GridGeometry, nodata: T, values: Vec<T>) -> Result<Self> {
        if !nodata.is_finite() {
            return Err(Error::domain("nodata sentinel must be finite"));
        }
        if values.len() != geometry.len() {
            return Err(Error::domain(format!(
                "expected {} values for {}x{} grid, got {}",
                geometry.len(),
                geometry.ncols,
                geometry.nrows,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite value at cell {} (row {}, col {})",
                i,
                i / geometry.ncols,
                i % geometry.ncols
            )));
        }
        Ok(Self {
            geometry,
            nodata,
            values,
            crs_label: None,
        })
    }

    pub fn filled(geometry: GridGeometry, nodata: T, value: T) -> Result<Self> {
        Self::new(geometry, nodata, vec![value; geometry.len()])
    }

    /// Grid whose cells are produced by `f(row, col)`; `None` becomes nodata.
    pub fn from_fn(
        geometry: GridGeometry,
        nodata: T,
        mut f: impl FnMut(usize, usize) -> Option<T>,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(geometry.len());
        for r in 0..geometry.nrows {
            for c in 0..geometry.ncols {
                values.push(f(r, c).unwrap_or(nodata));
            }
        }
        Self::new(geometry, nodata, values)
    }

    /// Same geometry and sentinel as `self`, new values from per-cell options.
    /// Non-finite results are stored as nodata.
    pub(crate) fn with_cells(&self, cells: Vec<Option<T>>) -> Self {
        debug_assert_eq!(cells.len(), self.values.len());
        let nodata = self.nodata;
        Self {
            geometry: self.geometry,
            nodata,
            values: cells
                .into_iter()
                .map(|v| v.filter(|x| x.is_finite()).unwrap_or(nodata))
                .collect(),
            crs_label: self.crs_label.clone(),
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn ncols(&self) -> usize {
        self.geometry.ncols
    }

    pub fn nrows(&self) -> usize {
        self.geometry.nrows
    }

    pub fn cellsize(&self) -> f64 {
        self.geometry.cellsize
    }

    pub fn nodata(&self) -> T {
        self.nodata
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.geometry.ncols + col
    }

    /// Raw stored value, which may be the sentinel.
    #[inline]
    pub fn raw(&self, row: usize, col: usize) -> T {
        self.values[self.index(row, col)]
    }

    /// Cell value, `None` for nodata.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Option<T> {
        let v = self.raw(row, col);
        (v != self.nodata).then_some(v)
    }

    /// Like `get` but with signed coordinates; out-of-bounds is `None`.
    #[inline]
    pub fn get_signed(&self, row: isize, col: isize) -> Option<T> {
        if row < 0 || col < 0 {
            return None;
        }
        let (r, c) = (row as usize, col as usize);
        if r >= self.nrows() || c >= self.ncols() {
            return None;
        }
        self.get(r, c)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<T> {
        let v = self.values[i];
        (v != self.nodata).then_some(v)
    }

    pub fn is_valid_index(&self, i: usize) -> bool {
        self.values[i] != self.nodata
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != self.nodata).count()
    }

    /// Overwrites one cell; `None` stores the sentinel.
    pub fn set(&mut self, row: usize, col: usize, value: Option<T>) -> Result<()> {
        let v = match value {
            Some(v) if !v.is_finite() => {
                return Err(Error::domain(format!("non-finite value at ({row}, {col})")))
            }
            Some(v) => v,
            None => self.nodata,
        };
        let i = self.index(row, col);
        self.values[i] = v;
        Ok(())
    }

    /// Applies `f` to every valid cell, keeping nodata as is.
    pub fn map_valid(&self, mut f: impl FnMut(T) -> T) -> Self {
        let cells = self
            .values
            .iter()
            .map(|&v| (v != self.nodata).then(|| f(v)))
            .collect();
        self.with_cells(cells)
    }

    /// Cell-wise binary operation over two grids of identical geometry; nodata
    /// in either operand gives nodata.
    pub fn zip_valid(&self, other: &Grid<T>, what: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.geometry.ensure_same(&other.geometry, what)?;
        let cells = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a != self.nodata && b != other.nodata).then(|| f(a, b)))
            .collect();
        Ok(self.with_cells(cells))
    }

    /// Converts the element type, e.g. to write an `f32` raster from `f64` math.
    pub fn cast<U: Scalar>(&self) -> Result<Grid<U>> {
        let conv = |v: T| {
            U::from_f64(v.as_f64()).ok_or_else(|| Error::domain("value not representable"))
        };
        let nodata = conv(self.nodata)?;
        let values = self
            .values
            .iter()
            .map(|&v| if v == self.nodata { Ok(nodata) } else { conv(v) })
            .collect::<Result<Vec<_>>>()?;
        let mut g = Grid::new(self.geometry, nodata, values)?;
        g.crs_label = self.crs_label.clone();
        Ok(g)
    }
}

// ---------------------------------------------------------------------------
// ESRI ASCII grid
// ---------------------------------------------------------------------------

const HEADER_KEYS: [&str; 6] = [
    "ncols",
    "nrows",
    "xllcorner",
    "yllcorner",
    "cellsize",
    "nodata_value",
];

/// Parses an ESRI ASCII grid. The six header lines must appear in the
/// canonical order; keywords are matched case-insensitively.
pub fn read_ascii_grid<T: Scalar>(text: &str) -> Result<Grid<T>> {
    let mut lines = text.lines().enumerate();
    let mut header = [""; 6];
    for (slot, key) in HEADER_KEYS.iter().enumerate() {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: slot + 1,
            message: format!("missing header line `{key}`"),
        })?;
        let mut parts = line.split_whitespace();
        let found = parts.next().unwrap_or("");
        if !found.eq_ignore_ascii_case(key) {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected header keyword `{key}`, found `{found}`"),
            });
        }
        header[slot] = parts.next().ok_or_else(|| Error::Parse {
            line: idx + 1,
            message: format!("header `{key}` has no value"),
        })?;
        if parts.next().is_some() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("trailing tokens after `{key}`"),
            });
        }
    }

    let header_err = |slot: usize, what: &str| Error::Parse {
        line: slot + 1,
        message: format!("invalid {what} `{}`", header[slot]),
    };
    let ncols: usize = header[0].parse().map_err(|_| header_err(0, "ncols"))?;
    let nrows: usize = header[1].parse().map_err(|_| header_err(1, "nrows"))?;
    let xll: f64 = header[2].parse().map_err(|_| header_err(2, "xllcorner"))?;
    let yll: f64 = header[3].parse().map_err(|_| header_err(3, "yllcorner"))?;
    let cellsize: f64 = header[4].parse().map_err(|_| header_err(4, "cellsize"))?;
    let nodata: T = header[5].parse().map_err(|_| header_err(5, "NODATA_value"))?;
    let geometry = GridGeometry::new(ncols, nrows, xll, yll, cellsize).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if !nodata.is_finite() {
        return Err(header_err(5, "NODATA_value"));
    }

    let expected = geometry.len();
    let mut values = Vec::with_capacity(expected);
    let mut last_line = HEADER_KEYS.len();
    for (idx, line) in lines {
        last_line = idx + 1;
        for tok in line.split_whitespace() {
            if values.len() == expected {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("more than {expected} values"),
                });
            }
            let v: T = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("non-numeric token `{tok}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("non-finite value `{tok}`"),
                });
            }
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: last_line,
            message: format!("expected {expected} values, found {}", values.len()),
        });
    }
    Grid::new(geometry, nodata, values)
}

/// Renders a grid as ESRI ASCII. Values use the shortest decimal form that
/// parses back to the same number.
pub fn write_ascii_grid<T: Scalar>(grid: &Grid<T>) -> String {
    let g = &grid.geometry;
    let mut out = String::with_capacity(64 + g.len() * 8);
    let _ = writeln!(out, "ncols {}", g.ncols);
    let _ = writeln!(out, "nrows {}", g.nrows);
    let _ = writeln!(out, "xllcorner {}", g.xll);
    let _ = writeln!(out, "yllcorner {}", g.yll);
    let _ = writeln!(out, "cellsize {}", g.cellsize);
    let _ = writeln!(out, "NODATA_value {}", grid.nodata);
    for row in grid.values.chunks(g.ncols) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn load_ascii_grid<T: Scalar>(path: impl AsRef<std::path::Path>) -> Result<Grid<T>> {
    let text = std::fs::read_to_string(path)?;
    read_ascii_grid(&text)
}

pub fn save_ascii_grid<T: Scalar>(grid: &Grid<T>, path: impl AsRef<std::path::Path>) -> Result<()> {
    std::fs::write(path, write_ascii_grid(grid))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Alignment and differencing
// ---------------------------------------------------------------------------

/// Resamples `source` onto the geometry of `reference`, sampling at output
/// cell centers. Cells outside the source, or whose interpolation stencil
/// touches nodata, become nodata.
pub fn align_to<T: Scalar>(
    reference: &GridGeometry,
    source: &Grid<T>,
    method: Resampling,
) -> Result<Grid<T>> {
    let src = &source.geometry;
    let overlaps = reference.xll < src.xright()
        && src.xll < reference.xright()
        && reference.yll < src.ytop()
        && src.yll < reference.ytop();
    if !overlaps {
        return Err(Error::domain("source grid does not overlap the reference extent"));
    }

    let cs = src.cellsize;
    let top = src.ytop();
    let mut out = Vec::with_capacity(reference.len());
    for r in 0..reference.nrows {
        for c in 0..reference.ncols {
            let (x, y) = reference.cell_center(r, c);
            // continuous source coordinates in cell units
            let fc = (x - src.xll) / cs;
            let fr = (top - y) / cs;
            let v = match method {
                Resampling::Nearest => sample_nearest(source, fr, fc),
                Resampling::Bilinear => sample_bilinear(source, fr - 0.5, fc - 0.5),
            };
            out.push(v.unwrap_or(source.nodata));
        }
    }
    Grid::new(*reference, source.nodata, out)
}

fn sample_nearest<T: Scalar>(src: &Grid<T>, fr: f64, fc: f64) -> Option<T> {
    let (r, c) = (fr.floor(), fc.floor());
    if r < 0.0 || c < 0.0 {
        return None;
    }
    src.get_signed(r as isize, c as isize)
}

/// `fr`/`fc` are offsets from the center of cell (0, 0).
fn sample_bilinear<T: Scalar>(src: &Grid<T>, fr: f64, fc: f64) -> Option<T> {
    let (r0, c0) = (fr.floor(), fc.floor());
    let (dr, dc) = (fr - r0, fc - c0);
    let (r0, c0) = (r0 as isize, c0 as isize);
    let z00 = src.get_signed(r0, c0);
    // neighbors only count when they carry weight
    let z01 = if dc > 0.0 { src.get_signed(r0, c0 + 1) } else { z00 };
    let z10 = if dr > 0.0 { src.get_signed(r0 + 1, c0) } else { z00 };
    let z11 = if dr > 0.0 && dc > 0.0 {
        src.get_signed(r0 + 1, c0 + 1)
    } else if dr > 0.0 {
        z10
    } else {
        z01
    };
    let (z00, z01, z10, z11) = (z00?, z01?, z10?, z11?);
    if dr == 0.0 && dc == 0.0 {
        return Some(z00);
    }
    let (wr, wc) = (T::lit(dr), T::lit(dc));
    let one = T::one();
    let top = z00 * (one - wc) + z01 * wc;
    let bottom = z10 * (one - wc) + z11 * wc;
    Some(top * (one - wr) + bottom * wr)
}

/// Cell-wise `a − b`; nodata in either input yields nodata.
pub fn difference<T: Scalar>(a: &Grid<T>, b: &Grid<T>) -> Result<Grid<T>> {
    a.zip_valid(b, "difference", |x, y| x - y)
}
