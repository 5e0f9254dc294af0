//! Terrain and land-cover predictors computed from a DEM.
//!
//! Gradients use Horn's 3×3 weighted differences. Every focal operator leaves
//! a cell as nodata when its window runs off the grid or holds too much
//! nodata; nothing is extrapolated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridGeometry};
use crate::numeric::median;
use crate::{Error, Result, Scalar};

/// Canonical predictor order.
pub const FEATURE_NAMES: [&str; 11] = [
    "elevation",
    "slope",
    "aspect",
    "roughness",
    "tpi",
    "tri",
    "texture",
    "vrm",
    "pct_bare",
    "urban",
    "pct_forest",
];

/// Aspect value for cells with zero gradient.
pub const FLAT_ASPECT: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub radius: usize,
    /// Minimum share of the (2r+1)² window that must be in bounds and valid.
    pub min_valid_fraction: f64,
}

impl WindowSpec {
    pub fn new(radius: usize, min_valid_fraction: f64) -> Result<Self> {
        let w = Self {
            radius,
            min_valid_fraction,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::domain("window radius must be positive"));
        }
        if !(self.min_valid_fraction > 0.0 && self.min_valid_fraction <= 1.0) {
            return Err(Error::domain(format!(
                "min_valid_fraction must lie in (0, 1], got {}",
                self.min_valid_fraction
            )));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        let side = 2 * self.radius + 1;
        side * side
    }

    fn enough(&self, valid: usize) -> bool {
        valid as f64 >= self.min_valid_fraction * self.cells() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextureSpec {
    /// Minimum |z − neighbor median| for a cell to count as a pit or peak.
    pub threshold: f64,
    pub window: WindowSpec,
}

/// Window and threshold settings for [`build_feature_stack`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub roughness: WindowSpec,
    pub tpi: WindowSpec,
    pub vrm: WindowSpec,
    pub landcover: WindowSpec,
    pub texture: TextureSpec,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let w = |radius| WindowSpec {
            radius,
            min_valid_fraction: 1.0,
        };
        Self {
            roughness: w(1),
            tpi: w(1),
            vrm: w(3),
            landcover: w(3),
            texture: TextureSpec {
                threshold: 1.0,
                window: w(10),
            },
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        self.roughness.validate()?;
        self.tpi.validate()?;
        self.vrm.validate()?;
        self.landcover.validate()?;
        self.texture.window.validate()?;
        if !(self.texture.threshold >= 0.0 && self.texture.threshold.is_finite()) {
            return Err(Error::domain("texture threshold must be a finite value >= 0"));
        }
        Ok(())
    }
}

/// Evaluates `f(row, col)` for every cell, rows in parallel, results in
/// row-major order.
fn per_cell<T: Scalar>(
    grid: &Grid<T>,
    f: impl Fn(usize, usize) -> Option<T> + Sync,
) -> Grid<T> {
    let ncols = grid.ncols();
    let cells: Vec<Option<T>> = (0..grid.nrows())
        .into_par_iter()
        .flat_map_iter(|r| (0..ncols).map(move |c| (r, c)).collect::<Vec<_>>())
        .map(|(r, c)| f(r, c))
        .collect();
    grid.with_cells(cells)
}

/// The 3×3 neighborhood in reading order (NW, N, NE, W, C, E, SW, S, SE), or
/// `None` if any cell is missing.
fn window3<T: Scalar>(dem: &Grid<T>, r: usize, c: usize) -> Option<[T; 9]> {
    let mut out = [T::zero(); 9];
    let (r, c) = (r as isize, c as isize);
    for dr in -1..=1 {
        for dc in -1..=1 {
            out[((dr + 1) * 3 + dc + 1) as usize] = dem.get_signed(r + dr, c + dc)?;
        }
    }
    Some(out)
}

/// Valid values in the square window of `radius` around (r, c), center
/// included, plus whether the validity fraction is met.
fn window_values<T: Scalar>(
    g: &Grid<T>,
    r: usize,
    c: usize,
    w: &WindowSpec,
    buf: &mut Vec<T>,
) -> bool {
    buf.clear();
    let rad = w.radius as isize;
    let (r, c) = (r as isize, c as isize);
    for dr in -rad..=rad {
        for dc in -rad..=rad {
            if let Some(v) = g.get_signed(r + dr, c + dc) {
                buf.push(v);
            }
        }
    }
    w.enough(buf.len())
}

/// Horn gradient `(dz/dx east, dz/dy north)` at an interior cell.
pub fn horn_gradient<T: Scalar>(dem: &Grid<T>, r: usize, c: usize) -> Option<(T, T)> {
    let [a, b, cc, d, _, f, g, h, i] = window3(dem, r, c)?;
    let two = T::lit(2.0);
    let denom = T::lit(8.0 * dem.cellsize());
    let east = ((cc + two * f + i) - (a + two * d + g)) / denom;
    let north = ((a + two * b + cc) - (g + two * h + i)) / denom;
    Some((east, north))
}

/// Slope in degrees.
pub fn slope<T: Scalar>(dem: &Grid<T>) -> Grid<T> {
    per_cell(dem, |r, c| {
        let (p, q) = horn_gradient(dem, r, c)?;
        Some((p * p + q * q).sqrt().atan().to_degrees())
    })
}

/// Compass azimuth of steepest descent, clockwise from north, in [0, 360).
/// Flat cells get [`FLAT_ASPECT`].
pub fn aspect<T: Scalar>(dem: &Grid<T>) -> Grid<T> {
    per_cell(dem, |r, c| {
        let (p, q) = horn_gradient(dem, r, c)?;
        Some(aspect_from_gradient(p, q))
    })
}

pub(crate) fn aspect_from_gradient<T: Scalar>(east: T, north: T) -> T {
    if east == T::zero() && north == T::zero() {
        return T::lit(FLAT_ASPECT);
    }
    let full = T::lit(360.0);
    let mut deg = (-east).atan2(-north).to_degrees();
    if deg < T::zero() {
        deg += full;
    }
    if deg >= full {
        deg = T::zero();
    }
    deg
}

/// Focal range (max − min).
pub fn roughness<T: Scalar>(dem: &Grid<T>, w: &WindowSpec) -> Grid<T> {
    per_cell(dem, |r, c| {
        dem.get(r, c)?;
        let mut buf = Vec::with_capacity(w.cells());
        if !window_values(dem, r, c, w, &mut buf) {
            return None;
        }
        let (lo, hi) = buf
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Some(hi - lo)
    })
}

/// Center minus the mean of the valid cells around it (center excluded).
pub fn tpi<T: Scalar>(dem: &Grid<T>, w: &WindowSpec) -> Grid<T> {
    per_cell(dem, |r, c| {
        let center = dem.get(r, c)?;
        let mut buf = Vec::with_capacity(w.cells());
        if !window_values(dem, r, c, w, &mut buf) || buf.len() < 2 {
            return None;
        }
        // the center contributes a zero offset
        let offset: T = buf.iter().map(|&v| v - center).sum();
        Some(-offset / T::from_usize_lossy(buf.len() - 1))
    })
}

/// Riley terrain ruggedness: root of the summed squared differences between
/// the center and its eight neighbors.
pub fn tri<T: Scalar>(dem: &Grid<T>) -> Grid<T> {
    per_cell(dem, |r, c| {
        let win = window3(dem, r, c)?;
        let center = win[4];
        let ss: T = win.iter().map(|&z| (z - center) * (z - center)).sum();
        Some(ss.sqrt())
    })
}

/// 1 where a cell stands more than `threshold` above or below the median of
/// its eight neighbors, 0 otherwise, nodata where the 3×3 window is incomplete.
pub fn pit_peak_flags<T: Scalar>(dem: &Grid<T>, threshold: T) -> Grid<T> {
    per_cell(dem, |r, c| {
        let win = window3(dem, r, c)?;
        let mut ring = [win[0], win[1], win[2], win[3], win[5], win[6], win[7], win[8]];
        let m = median(&mut ring);
        Some(if (win[4] - m).abs() > threshold {
            T::one()
        } else {
            T::zero()
        })
    })
}

/// Percentage of pit/peak cells within the window.
pub fn texture<T: Scalar>(dem: &Grid<T>, threshold: T, w: &WindowSpec) -> Grid<T> {
    let flags = pit_peak_flags(dem, threshold);
    percent_of_ones(&flags, w)
}

/// Unit surface normal from the Horn gradient. Equals
/// (sin S·sin A, sin S·cos A, cos S) for slope S and aspect A; flat cells
/// give (0, 0, 1).
pub fn surface_normal<T: Scalar>(dem: &Grid<T>, r: usize, c: usize) -> Option<[T; 3]> {
    let (p, q) = horn_gradient(dem, r, c)?;
    let norm = (T::one() + p * p + q * q).sqrt();
    Some([-p / norm, -q / norm, T::one() / norm])
}

/// `1 − |Σ n| / count` for a set of unit normals.
pub fn vrm_from_normals<T: Scalar>(normals: &[[T; 3]]) -> Option<T> {
    if normals.is_empty() {
        return None;
    }
    let mut s = [T::zero(); 3];
    for n in normals {
        for k in 0..3 {
            s[k] += n[k];
        }
    }
    let resultant = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let v = T::one() - resultant / T::from_usize_lossy(normals.len());
    Some(v.max(T::zero()).min(T::one()))
}

/// Vector ruggedness measure over the window.
pub fn vrm<T: Scalar>(dem: &Grid<T>, w: &WindowSpec) -> Grid<T> {
    let (nrows, ncols) = (dem.nrows(), dem.ncols());
    let normals: Vec<Option<[T; 3]>> = (0..nrows)
        .into_par_iter()
        .flat_map_iter(|r| (0..ncols).map(move |c| surface_normal(dem, r, c)).collect::<Vec<_>>())
        .collect();
    let rad = w.radius as isize;
    per_cell(dem, |r, c| {
        surface_normal(dem, r, c)?;
        let mut buf = Vec::with_capacity(w.cells());
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                let (rr, cc) = (r as isize + dr, c as isize + dc);
                if rr < 0 || cc < 0 || rr >= nrows as isize || cc >= ncols as isize {
                    continue;
                }
                if let Some(n) = normals[rr as usize * ncols + cc as usize] {
                    buf.push(n);
                }
            }
        }
        if !w.enough(buf.len()) {
            return None;
        }
        vrm_from_normals(&buf)
    })
}

fn percent_of_ones<T: Scalar>(binary: &Grid<T>, w: &WindowSpec) -> Grid<T> {
    per_cell(binary, |r, c| {
        binary.get(r, c)?;
        let mut buf = Vec::with_capacity(w.cells());
        if !window_values(binary, r, c, w, &mut buf) {
            return None;
        }
        let ones = buf.iter().filter(|&&v| v == T::one()).count();
        Some(T::lit(100.0) * T::from_usize_lossy(ones) / T::from_usize_lossy(buf.len()))
    })
}

fn ensure_binary<T: Scalar>(mask: &Grid<T>, what: &str) -> Result<()> {
    for (i, &v) in mask.values().iter().enumerate() {
        if v != mask.nodata() && v != T::zero() && v != T::one() {
            return Err(Error::domain(format!(
                "{what} mask must be binary; found {v} at row {}, col {}",
                i / mask.ncols(),
                i % mask.ncols()
            )));
        }
    }
    Ok(())
}

/// Percentage of valid window cells equal to 1 in a {0, 1, nodata} mask.
pub fn focal_fraction<T: Scalar>(mask: &Grid<T>, w: &WindowSpec) -> Result<Grid<T>> {
    ensure_binary(mask, "land-cover")?;
    Ok(percent_of_ones(mask, w))
}

/// Geometry-aligned predictor layers, addressed by name.
#[derive(Debug, Clone)]
pub struct FeatureStack<T> {
    names: Vec<String>,
    layers: Vec<Grid<T>>,
}

impl<T: Scalar> FeatureStack<T> {
    pub fn new(names: Vec<String>, layers: Vec<Grid<T>>) -> Result<Self> {
        if names.len() != layers.len() {
            return Err(Error::domain("one layer per feature name is required"));
        }
        if names.is_empty() {
            return Err(Error::domain("feature stack is empty"));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::domain(format!("duplicate feature name `{n}`")));
            }
        }
        let geometry = *layers[0].geometry();
        for (n, l) in names.iter().zip(&layers) {
            geometry.ensure_same(l.geometry(), &format!("feature layer `{n}`"))?;
        }
        Ok(Self { names, layers })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn layers(&self) -> &[Grid<T>] {
        &self.layers
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.layers[0].geometry()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Grid<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.layers[i])
    }

    /// Column indices of `names` within the stack.
    pub fn indices_of(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::domain(format!("feature layer `{n}` missing from stack")))
            })
            .collect()
    }

    /// Values of the selected layers at one cell; `None` if any is nodata.
    pub fn cell_vector(&self, cell: usize, columns: &[usize]) -> Option<Vec<T>> {
        columns.iter().map(|&k| self.layers[k].get_index(cell)).collect()
    }
}

/// Computes the eleven predictors in canonical order.
pub fn build_feature_stack<T: Scalar>(
    dem: &Grid<T>,
    bare: &Grid<T>,
    urban: &Grid<T>,
    forest: &Grid<T>,
    cfg: &FeatureConfig,
) -> Result<FeatureStack<T>> {
    cfg.validate()?;
    let g = dem.geometry();
    g.ensure_same(bare.geometry(), "bare-ground mask")?;
    g.ensure_same(urban.geometry(), "urban mask")?;
    g.ensure_same(forest.geometry(), "forest mask")?;
    ensure_binary(urban, "urban")?;

    let layers = vec![
        dem.clone(),
        slope(dem),
        aspect(dem),
        roughness(dem, &cfg.roughness),
        tpi(dem, &cfg.tpi),
        tri(dem),
        texture(dem, T::lit(cfg.texture.threshold), &cfg.texture.window),
        vrm(dem, &cfg.vrm),
        focal_fraction(bare, &cfg.landcover)?,
        urban.clone(),
        focal_fraction(forest, &cfg.landcover)?,
    ];
    FeatureStack::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const ND: f64 = -9999.0;

    fn grid(n: usize, f: impl Fn(usize, usize) -> f64) -> Grid<f64> {
        let geo = GridGeometry::new(n, n, 0.0, 0.0, 1.0).unwrap();
        Grid::from_fn(geo, ND, |r, c| Some(f(r, c))).unwrap()
    }

    fn interior(g: &Grid<f64>, border: usize) -> Vec<f64> {
        let n = g.nrows();
        let mut out = vec![];
        for r in border..n - border {
            for c in border..n - border {
                out.push(g.get(r, c).expect("interior cell valid"));
            }
        }
        out
    }

    fn w(radius: usize) -> WindowSpec {
        WindowSpec::new(radius, 1.0).unwrap()
    }

    #[test]
    fn plane_slopes() {
        let flat = grid(5, |_, _| 10.0);
        assert!(interior(&slope(&flat), 1).iter().all(|&v| v == 0.0));
        assert_eq!(slope(&flat).get(0, 0), None);

        let east = grid(5, |_, c| c as f64);
        for v in interior(&slope(&east), 1) {
            assert_abs_diff_eq!(v, 45.0, epsilon = 1e-9);
        }
        // rows run southward, so -r rises northward
        let steep = grid(5, |r, c| 3.0 * c as f64 - 4.0 * r as f64);
        for v in interior(&slope(&steep), 1) {
            assert_abs_diff_eq!(v, 5.0f64.atan().to_degrees(), epsilon = 1e-9);
        }
    }

    #[test]
    fn plane_aspects() {
        assert!(interior(&aspect(&grid(5, |_, _| 3.0)), 1).iter().all(|&v| v == -1.0));
        for v in interior(&aspect(&grid(5, |_, c| c as f64)), 1) {
            assert_abs_diff_eq!(v, 270.0, epsilon = 1e-9);
        }
        for v in interior(&aspect(&grid(5, |r, _| -(r as f64))), 1) {
            assert_abs_diff_eq!(v, 180.0, epsilon = 1e-9);
        }
        // descending east and north
        for v in interior(&aspect(&grid(5, |r, c| r as f64 - c as f64)), 1) {
            assert_abs_diff_eq!(v, 45.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn cellsize_scales_gradient() {
        let geo = GridGeometry::new(4, 4, 0.0, 0.0, 30.0).unwrap();
        let dem = Grid::from_fn(geo, ND, |_, c| Some(30.0 * c as f64)).unwrap();
        assert_abs_diff_eq!(slope(&dem).get(1, 1).unwrap(), 45.0, epsilon = 1e-9);
    }

    #[test]
    fn roughness_fixtures() {
        assert!(interior(&roughness(&grid(5, |_, _| 2.0), &w(1)), 1).iter().all(|&v| v == 0.0));
        let nine = grid(3, |r, c| (r * 3 + c + 1) as f64);
        assert_eq!(roughness(&nine, &w(1)).get(1, 1), Some(8.0));
        let vals = [2.0, 7.0, 3.0, 4.0, 5.0, 6.0, 3.0, 4.0, 5.0];
        let g = grid(3, |r, c| vals[r * 3 + c]);
        assert_eq!(roughness(&g, &w(1)).get(1, 1), Some(5.0));
    }

    #[test]
    fn tpi_fixtures() {
        assert!(interior(&tpi(&grid(5, |_, _| 2.0), &w(1)), 1).iter().all(|&v| v == 0.0));
        let peak = grid(3, |r, c| if (r, c) == (1, 1) { 5.0 } else { 1.0 });
        assert_eq!(tpi(&peak, &w(1)).get(1, 1), Some(4.0));
        let vals = [1.0, 2.0, 3.0, 2.0, 0.0, 2.0, 1.0, 2.0, 3.0];
        let pit = grid(3, |r, c| vals[r * 3 + c]);
        assert_eq!(tpi(&pit, &w(1)).get(1, 1), Some(-2.0));
    }

    #[test]
    fn tri_fixtures() {
        assert!(interior(&tri(&grid(5, |_, _| 2.0)), 1).iter().all(|&v| v == 0.0));
        let bump = grid(3, |r, c| if (r, c) == (1, 1) { 1.0 } else { 2.0 });
        assert_abs_diff_eq!(tri(&bump).get(1, 1).unwrap(), 8f64.sqrt(), epsilon = 1e-12);
        let vals = [1.0, -1.0, 1.0, -1.0, 0.0, -1.0, 1.0, -1.0, 1.0];
        let mixed = grid(3, |r, c| vals[r * 3 + c]);
        assert_abs_diff_eq!(tri(&mixed).get(1, 1).unwrap(), 8f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn texture_fixtures() {
        assert!(interior(&texture(&grid(25, |_, _| 1.0), 1.0, &w(10)), 11)
            .iter()
            .all(|&v| v == 0.0));

        let spike = grid(9, |r, c| if (r, c) == (4, 4) { 10.0 } else { 0.0 });
        let t = texture(&spike, 0.5, &w(2));
        assert_abs_diff_eq!(t.get(4, 4).unwrap(), 4.0, epsilon = 1e-12);

        let checker = grid(9, |r, c| if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
        let t = texture(&checker, 0.5, &w(1));
        for v in interior(&t, 2) {
            assert_abs_diff_eq!(v, 100.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn vrm_fixtures() {
        assert!(interior(&vrm(&grid(9, |_, _| 4.0), &w(3)), 4).iter().all(|&v| v == 0.0));
        for v in interior(&vrm(&grid(9, |r, c| 2.0 * c as f64 + r as f64), &w(3)), 4) {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
        let two = vrm_from_normals(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(two, 1.0 - 2f64.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_matches_slope_aspect_decomposition() {
        let dem = grid(3, |r, c| 0.7 * c as f64 + 0.2 * r as f64);
        let n = surface_normal(&dem, 1, 1).unwrap();
        let s = slope(&dem).get(1, 1).unwrap().to_radians();
        let a = aspect(&dem).get(1, 1).unwrap().to_radians();
        let expected = [s.sin() * a.sin(), s.sin() * a.cos(), s.cos()];
        for k in 0..3 {
            assert_abs_diff_eq!(n[k], expected[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn focal_fraction_fixtures() {
        let ones = grid(5, |_, _| 1.0);
        assert!(interior(&focal_fraction(&ones, &w(1)).unwrap(), 1).iter().all(|&v| v == 100.0));
        let zeros = grid(5, |_, _| 0.0);
        assert!(interior(&focal_fraction(&zeros, &w(1)).unwrap(), 1).iter().all(|&v| v == 0.0));
        let three = grid(3, |r, _| if r == 0 { 1.0 } else { 0.0 });
        let f = focal_fraction(&three, &w(1)).unwrap();
        assert_abs_diff_eq!(f.get(1, 1).unwrap(), 100.0 / 3.0, epsilon = 1e-12);

        let bad = grid(3, |_, _| 0.5);
        assert!(matches!(focal_fraction(&bad, &w(1)), Err(Error::Domain(_))));
    }

    #[test]
    fn partial_windows_follow_min_valid_fraction() {
        let ones = grid(3, |_, _| 1.0);
        // the corner's window has 4 of 9 cells in bounds
        let strict = focal_fraction(&ones, &w(1)).unwrap();
        assert_eq!(strict.get(0, 0), None);
        let lax = focal_fraction(&ones, &WindowSpec::new(1, 0.4).unwrap()).unwrap();
        assert_eq!(lax.get(0, 0), Some(100.0));
        let lax = focal_fraction(&ones, &WindowSpec::new(1, 0.5).unwrap()).unwrap();
        assert_eq!(lax.get(0, 0), None);
    }

    #[test]
    fn nodata_propagates_through_horn_window() {
        let mut dem = grid(5, |_, c| c as f64);
        dem.set(2, 2, None).unwrap();
        let s = slope(&dem);
        assert_eq!(s.get(1, 1), None);
        assert_eq!(s.get(3, 3), None);
        assert!(s.get(1, 3).is_none() && s.get(3, 1).is_none());
        assert_eq!(tri(&dem).get(2, 1), None);
        assert_eq!(roughness(&dem, &w(1)).get(2, 3), None);
        assert!(WindowSpec::new(0, 1.0).is_err());
        assert!(WindowSpec::new(1, 0.0).is_err());
    }

    #[test]
    fn flat_stack_is_all_zero() {
        let dem = grid(25, |_, _| 50.0);
        let zero = grid(25, |_, _| 0.0);
        let stack = build_feature_stack(&dem, &zero, &zero, &zero, &FeatureConfig::default()).unwrap();
        assert_eq!(stack.names(), FEATURE_NAMES.map(String::from).as_slice());
        for l in stack.layers() {
            assert_eq!(l.geometry(), dem.geometry());
        }
        for name in ["slope", "tpi", "tri", "texture", "vrm", "roughness"] {
            let g = stack.get(name).unwrap();
            assert!(g.values().iter().all(|&v| v == 0.0 || v == ND), "{name}");
            assert!(g.valid_count() > 0, "{name}");
        }
        let asp = stack.get("aspect").unwrap();
        assert!(asp.values().iter().all(|&v| v == -1.0 || v == ND));
    }

    #[test]
    fn stack_rejects_misaligned_masks() {
        let dem = grid(5, |_, _| 1.0);
        let small = grid(4, |_, _| 0.0);
        let zero = grid(5, |_, _| 0.0);
        let err = build_feature_stack(&dem, &small, &zero, &zero, &FeatureConfig::default());
        assert!(matches!(err, Err(Error::Geometry(_))));
    }

    /// Recomputes a cell's derivatives from an isolated copy of its window.
    #[test]
    fn derivatives_depend_only_on_window() {
        let dem = grid(15, |r, c| ((r * 7 + c * 13) % 11) as f64 + 0.3 * r as f64);
        let (r0, c0) = (7, 6);
        let rad = 3;
        let patch = grid(2 * rad + 1, |r, c| dem.get(r + r0 - rad, c + c0 - rad).unwrap());
        let (pr, pc) = (rad, rad);
        assert_eq!(slope(&dem).get(r0, c0), slope(&patch).get(pr, pc));
        assert_eq!(aspect(&dem).get(r0, c0), aspect(&patch).get(pr, pc));
        assert_eq!(tri(&dem).get(r0, c0), tri(&patch).get(pr, pc));
        assert_eq!(roughness(&dem, &w(1)).get(r0, c0), roughness(&patch, &w(1)).get(pr, pc));
        assert_eq!(tpi(&dem, &w(2)).get(r0, c0), tpi(&patch, &w(2)).get(pr, pc));
        assert_eq!(texture(&dem, 1.0, &w(2)).get(r0, c0), texture(&patch, 1.0, &w(2)).get(pr, pc));
        // VRM at r=2 needs normals from a 5x5 block, each needing a 3x3 window
        assert_eq!(vrm(&dem, &w(2)).get(r0, c0), vrm(&patch, &w(2)).get(pr, pc));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn offset_and_translation_invariance(
            vals in proptest::collection::vec(0.0f64..100.0, 64),
            shift in -500.0f64..500.0,
            dx in -1e4f64..1e4,
        ) {
            let dem = grid(8, |r, c| vals[r * 8 + c]);
            // integer shifts keep every difference exact
            let shifted = dem.map_valid(|z| z + shift.round());
            let geo = GridGeometry::new(8, 8, dx, -dx, 1.0).unwrap();
            let moved = Grid::new(geo, ND, dem.values().to_vec()).unwrap();
            let same = |a: &Grid<f64>, b: &Grid<f64>, tol: f64, circular: bool| {
                a.values().iter().zip(b.values()).all(|(&x, &y)| {
                    if x == ND || y == ND {
                        return x == y;
                    }
                    let mut d = (x - y).abs();
                    if circular {
                        d = d.min(360.0 - d);
                    }
                    d <= tol
                })
            };
            prop_assert!(same(&slope(&dem), &slope(&shifted), 1e-9, false));
            prop_assert!(same(&slope(&dem), &slope(&moved), 0.0, false));
            prop_assert!(same(&aspect(&dem), &aspect(&shifted), 1e-6, true));
            prop_assert!(same(&aspect(&dem), &aspect(&moved), 0.0, false));
            prop_assert!(same(&roughness(&dem, &w(1)), &roughness(&shifted, &w(1)), 1e-9, false));
            prop_assert!(same(&tri(&dem), &tri(&shifted), 1e-9, false));
            prop_assert!(same(&vrm(&dem, &w(1)), &vrm(&shifted, &w(1)), 1e-12, false));
            // pit/peak flags sit on a threshold, so use integer elevations for texture
            let idem = dem.map_valid(|z| z.round());
            let ishift = idem.map_valid(|z| z + shift.round());
            prop_assert!(same(&texture(&idem, 1.0, &w(1)), &texture(&ishift, 1.0, &w(1)), 0.0, false));
        }

        #[test]
        fn ranges_hold(vals in proptest::collection::vec(0.0f64..100.0, 64), mask in proptest::collection::vec(0u8..2, 64)) {
            let dem = grid(8, |r, c| vals[r * 8 + c]);
            let m = grid(8, |r, c| f64::from(mask[r * 8 + c]));
            let valid = |g: &Grid<f64>| g.values().iter().copied().filter(|&v| v != ND).collect::<Vec<_>>();
            prop_assert!(valid(&roughness(&dem, &w(1))).iter().all(|&v| v >= 0.0));
            prop_assert!(valid(&tri(&dem)).iter().all(|&v| v >= 0.0));
            prop_assert!(valid(&texture(&dem, 1.0, &w(1))).iter().all(|&v| (0.0..=100.0).contains(&v)));
            prop_assert!(valid(&vrm(&dem, &w(1))).iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!(valid(&focal_fraction(&m, &w(1)).unwrap()).iter().all(|&v| (0.0..=100.0).contains(&v)));
            prop_assert!(valid(&aspect(&dem)).iter().all(|&v| v == -1.0 || (0.0..360.0).contains(&v)));
        }
    }
}
