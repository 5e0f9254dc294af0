//! Synthetic terrain, land cover and feature-dependent elevation error.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, GridGeometry};
use crate::numeric::compensated_sum;
use crate::terrain::{FeatureStack, FEATURE_NAMES};
use crate::{Error, Result, Scalar};

pub const SYNTH_CELLSIZE: f64 = 30.0;
pub const SYNTH_NODATA: f64 = -9999.0;

/// Raw diamond–square surface of side `2^k + 1`, values roughly in [-1, 1]
/// scaled by the per-level decay.
fn diamond_square(k: u32, decay: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = (1usize << k) + 1;
    let mut z = vec![0.0; n * n];
    for &(r, c) in &[(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
        z[r * n + c] = rng.random_range(-1.0..=1.0);
    }
    let mut step = n - 1;
    let mut scale = 1.0;
    while step > 1 {
        let h = step / 2;
        for r in (h..n).step_by(step) {
            for c in (h..n).step_by(step) {
                let avg = (z[(r - h) * n + c - h] + z[(r - h) * n + c + h] + z[(r + h) * n + c - h] + z[(r + h) * n + c + h]) / 4.0;
                z[r * n + c] = avg + scale * rng.random_range(-1.0..=1.0);
            }
        }
        for r in (0..n).step_by(h) {
            let start = if (r / h).is_multiple_of(2) { h } else { 0 };
            for c in (start..n).step_by(step) {
                let mut sum = 0.0;
                let mut cnt = 0.0;
                if r >= h {
                    sum += z[(r - h) * n + c];
                    cnt += 1.0;
                }
                if r + h < n {
                    sum += z[(r + h) * n + c];
                    cnt += 1.0;
                }
                if c >= h {
                    sum += z[r * n + c - h];
                    cnt += 1.0;
                }
                if c + h < n {
                    sum += z[r * n + c + h];
                    cnt += 1.0;
                }
                z[r * n + c] = sum / cnt + scale * rng.random_range(-1.0..=1.0);
            }
        }
        scale *= decay;
        step = h;
    }
    z
}

/// Diamond–square DEM of `(2^k + 1)²` cells at 30 m, rescaled so its range
/// is exactly `[base − relief, base + relief]`.
///
/// `roughness_decay` multiplies the random displacement at each finer level;
/// values near 0.5 give smooth rolling terrain, values near 1 rugged terrain.
pub fn fractal_dem<T: Scalar>(
    k: u32,
    base_height: f64,
    relief_amplitude: f64,
    roughness_decay: f64,
    seed: u64,
) -> Result<Grid<T>> {
    if !(2..=14).contains(&k) {
        return Err(Error::domain(format!("size exponent must lie in 2..=14, got {k}")));
    }
    if !(relief_amplitude >= 0.0 && relief_amplitude.is_finite() && base_height.is_finite()) {
        return Err(Error::domain("base height and relief amplitude must be finite, relief ≥ 0"));
    }
    if !(roughness_decay > 0.0 && roughness_decay <= 1.0) {
        return Err(Error::domain(format!("roughness decay must lie in (0, 1], got {roughness_decay}")));
    }
    let n = (1usize << k) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = diamond_square(k, roughness_decay, &mut rng);
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let geometry = GridGeometry::new(n, n, 0.0, 0.0, SYNTH_CELLSIZE)?;
    let values = raw
        .into_iter()
        .map(|v| {
            let z = if relief_amplitude == 0.0 || hi <= lo {
                base_height
            } else {
                base_height - relief_amplitude + 2.0 * relief_amplitude * (v - lo) / (hi - lo)
            };
            T::lit(z)
        })
        .collect();
    Grid::new(geometry, T::lit(SYNTH_NODATA), values)
}

/// Percentile rank in [0, 1] of each entry, ties broken by position.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let denom = (values.len().max(2) - 1) as f64;
    let mut out = vec![0.0; values.len()];
    for (rank, i) in order.into_iter().enumerate() {
        out[i] = rank as f64 / denom;
    }
    out
}

/// Rank-transformed fractal noise cropped to `nrows × ncols`.
fn noise_field(nrows: usize, ncols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let need = nrows.max(ncols).max(2);
    let k = (usize::BITS - (need - 2).leading_zeros()).max(2);
    let n = (1usize << k) + 1;
    let full = diamond_square(k, 0.55, rng);
    let mut out = Vec::with_capacity(nrows * ncols);
    for r in 0..nrows {
        out.extend_from_slice(&full[r * n..r * n + ncols]);
    }
    ranks(&out)
}

/// Landscape classes and binary land-cover masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Landcover<T> {
    pub bare: Grid<T>,
    pub urban: Grid<T>,
    pub forest: Grid<T>,
    /// Labels 1..=5, see [`crate::eval::LANDSCAPES`].
    pub strata: Grid<T>,
}

/// Derives strata and masks from elevation rank and seeded noise patches.
///
/// Strata: the highest fifth of cells is mountain; of the rest, the top
/// noise patches form the peninsula, then low ground is urban, mid ground
/// agricultural and the remainder grassland. Urban cells are urban-stratum
/// patches; forest and bare ground are independent noise patches outside them.
pub fn synth_landcover<T: Scalar>(dem: &Grid<T>, seed: u64) -> Result<Landcover<T>> {
    let g = *dem.geometry();
    if dem.valid_count() != g.len() {
        return Err(Error::domain("land-cover synthesis needs a DEM without nodata"));
    }
    let elev = ranks(&dem.values().iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let patch = noise_field(g.nrows, g.ncols, &mut rng);
    let town = noise_field(g.nrows, g.ncols, &mut rng);
    let trees = noise_field(g.nrows, g.ncols, &mut rng);
    let rock = noise_field(g.nrows, g.ncols, &mut rng);

    let nodata = T::lit(SYNTH_NODATA);
    let (mut strata, mut urban, mut forest, mut bare) =
        (Vec::with_capacity(g.len()), Vec::with_capacity(g.len()), Vec::with_capacity(g.len()), Vec::with_capacity(g.len()));
    for i in 0..g.len() {
        let e = elev[i];
        let label = if e > 0.8 {
            3
        } else if patch[i] > 0.8 {
            4
        } else if e < 0.3 {
            1
        } else if e < 0.55 {
            2
        } else {
            5
        };
        let u = label == 1 && town[i] > 0.35;
        let f = !u && label != 1 && trees[i] > 0.55;
        let b = !u && !f && (e > 0.85 || rock[i] > 0.8);
        strata.push(T::lit(label as f64));
        urban.push(if u { T::one() } else { T::zero() });
        forest.push(if f { T::one() } else { T::zero() });
        bare.push(if b { T::one() } else { T::zero() });
    }
    Ok(Landcover {
        bare: Grid::new(g, nodata, bare)?,
        urban: Grid::new(g, nodata, urban)?,
        forest: Grid::new(g, nodata, forest)?,
        strata: Grid::new(g, nodata, strata)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    /// `amplitude · sin(scale · x)`
    Sine,
    /// `amplitude · [x > scale]`
    Step,
    /// `amplitude · scale · x · partner`
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearTerm {
    pub feature: String,
    pub kind: TermKind,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<String>,
}

fn one() -> f64 {
    1.0
}

/// Generative model of DEM error in terms of standardized features.
///
/// Every feature is standardized to zero mean and unit variance over the
/// cells where all stack layers are valid, so coefficients are in meters per
/// standard deviation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorSpec {
    #[serde(default)]
    pub linear_terms: BTreeMap<String, f64>,
    #[serde(default)]
    pub nonlinear_terms: Vec<NonlinearTerm>,
    #[serde(default)]
    pub noise_std: f64,
    /// When set, `noise_std` is a multiple of the noise-free error's
    /// standard deviation rather than meters.
    #[serde(default)]
    pub relative_noise: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ErrorSpec {
    pub fn validate(&self) -> Result<()> {
        let known = |n: &str| -> Result<()> {
            if FEATURE_NAMES.contains(&n) {
                Ok(())
            } else {
                Err(Error::domain(format!("unknown feature `{n}` in error spec")))
            }
        };
        for (name, c) in &self.linear_terms {
            known(name)?;
            if !c.is_finite() {
                return Err(Error::domain(format!("coefficient for `{name}` is not finite")));
            }
        }
        for t in &self.nonlinear_terms {
            known(&t.feature)?;
            if !(t.amplitude.is_finite() && t.scale.is_finite()) {
                return Err(Error::domain(format!("non-finite parameter in term on `{}`", t.feature)));
            }
            match (t.kind, &t.partner) {
                (TermKind::Product, Some(p)) => known(p)?,
                (TermKind::Product, None) => {
                    return Err(Error::domain(format!("product term on `{}` needs a partner", t.feature)))
                }
                _ => {}
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::domain("noise_std must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// Degraded DEM and its exact error.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedError<T> {
    pub degraded: Grid<T>,
    /// `degraded − dem`; nodata where any feature is nodata.
    pub true_dh: Grid<T>,
}

/// Population-standardized copy of `layer` over `cells`; zero variance gives zeros.
pub fn standardize<T: Scalar>(layer: &Grid<T>, cells: &[usize]) -> Vec<f64> {
    let vals: Vec<f64> = cells.iter().map(|&i| layer.values()[i].as_f64()).collect();
    if vals.is_empty() {
        return vals;
    }
    let n = vals.len() as f64;
    let mean = compensated_sum(vals.iter().copied()) / n;
    let sd = (compensated_sum(vals.iter().map(|v| (v - mean) * (v - mean))) / n).sqrt();
    vals.iter()
        .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
        .collect()
}

/// Adds feature-driven error plus Gaussian noise to `dem`.
pub fn inject_error<T: Scalar>(dem: &Grid<T>, stack: &FeatureStack<T>, spec: &ErrorSpec) -> Result<InjectedError<T>> {
    spec.validate()?;
    dem.geometry().ensure_same(stack.geometry(), "feature stack")?;
    let all: Vec<usize> = (0..stack.len()).collect();
    let cells: Vec<usize> = (0..dem.geometry().len())
        .filter(|&i| dem.is_valid_index(i) && stack.cell_vector(i, &all).is_some())
        .collect();

    let mut cache: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut std_of = |name: &str| -> Result<Vec<f64>> {
        if let Some(v) = cache.get(name) {
            return Ok(v.clone());
        }
        let layer = stack
            .get(name)
            .ok_or_else(|| Error::domain(format!("feature layer `{name}` missing from stack")))?;
        let key = FEATURE_NAMES.iter().find(|n| **n == name).expect("validated name");
        let z = standardize(layer, &cells);
        cache.insert(key, z.clone());
        Ok(z)
    };

    let mut signal = vec![0.0; cells.len()];
    for (name, &coef) in &spec.linear_terms {
        let z = std_of(name)?;
        for (s, x) in signal.iter_mut().zip(z) {
            *s += coef * x;
        }
    }
    for t in &spec.nonlinear_terms {
        let z = std_of(&t.feature)?;
        let partner = match &t.partner {
            Some(p) if t.kind == TermKind::Product => Some(std_of(p)?),
            _ => None,
        };
        for (i, (s, x)) in signal.iter_mut().zip(z).enumerate() {
            *s += match t.kind {
                TermKind::Sine => t.amplitude * (t.scale * x).sin(),
                TermKind::Step => {
                    if x > t.scale {
                        t.amplitude
                    } else {
                        0.0
                    }
                }
                TermKind::Product => t.amplitude * t.scale * x * partner.as_ref().expect("partner")[i],
            };
        }
    }

    let sigma = if spec.relative_noise {
        let n = signal.len().max(1) as f64;
        let mean = compensated_sum(signal.iter().copied()) / n;
        spec.noise_std * (compensated_sum(signal.iter().map(|v| (v - mean) * (v - mean))) / n).sqrt()
    } else {
        spec.noise_std
    };
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for s in signal.iter_mut() {
            *s += normal.sample(&mut rng);
        }
    }

    let mut degraded: Vec<Option<T>> = (0..dem.geometry().len()).map(|i| dem.get_index(i)).collect();
    let mut dh: Vec<Option<T>> = vec![None; degraded.len()];
    for (&i, s) in cells.iter().zip(signal) {
        let z = dem.values()[i];
        let d = z + T::lit(s);
        degraded[i] = Some(d);
        dh[i] = Some(d - z);
    }
    Ok(InjectedError {
        degraded: dem.with_cells(degraded),
        true_dh: dem.with_cells(dh),
    })
}
