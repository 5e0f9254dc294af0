//! Multicollinearity diagnostics and ordinary least squares.
//!
//! Least squares goes through a Householder QR factorization of the design
//! matrix; the normal equations are never formed.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::SampleTable;
use crate::numeric::compensated_sum;
use crate::{Error, Result, Scalar};

/// R² at or above `1 − VIF_SATURATION` reports an infinite VIF.
pub const VIF_SATURATION: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Householder least squares
// ---------------------------------------------------------------------------

/// Result of a rank-tolerant least-squares solve.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares<T> {
    /// One entry per design column; `None` for columns found to be dependent.
    pub coefficients: Vec<Option<T>>,
    pub residuals: Vec<T>,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn first_dependent(&self) -> Option<usize> {
        self.coefficients.iter().position(Option::is_none)
    }
}

/// Solves min ‖y − Xβ‖ for a column-major design `cols` (each of length n).
///
/// Columns are processed left to right; a column whose component orthogonal
/// to the already-accepted columns is negligible relative to its own norm is
/// marked dependent and skipped.
pub(crate) fn least_squares<T: Scalar>(cols: &[Vec<T>], y: &[T]) -> LeastSquares<T> {
    let n = y.len();
    let p = cols.len();
    let tol = T::epsilon() * T::lit(1024.0);
    let mut a: Vec<Vec<T>> = cols.to_vec();
    let mut qty: Vec<T> = y.to_vec();
    // accepted columns as (column index, pivot row)
    let mut accepted: Vec<usize> = Vec::with_capacity(p);
    let mut diag: Vec<T> = Vec::with_capacity(p);

    for j in 0..p {
        let k = accepted.len();
        if k >= n {
            break;
        }
        let full_norm = norm(&cols[j]);
        let tail_norm = norm(&a[j][k..]);
        if full_norm == T::zero() || tail_norm <= tol * full_norm {
            continue;
        }
        // Householder reflector v zeroing a[j][k+1..]
        let alpha = if a[j][k] > T::zero() { -tail_norm } else { tail_norm };
        let mut v: Vec<T> = a[j][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|&x| x * x).sum();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for col in a.iter_mut().skip(j) {
                let dot: T = v.iter().zip(&col[k..]).map(|(&vi, &ci)| vi * ci).sum();
                let s = two * dot / vnorm2;
                for (ci, &vi) in col[k..].iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
            let dot: T = v.iter().zip(&qty[k..]).map(|(&vi, &yi)| vi * yi).sum();
            let s = two * dot / vnorm2;
            for (yi, &vi) in qty[k..].iter_mut().zip(&v) {
                *yi -= s * vi;
            }
        }
        accepted.push(j);
        diag.push(a[j][k]);
    }

    // back substitution on the accepted columns
    let r = accepted.len();
    let mut beta = vec![T::zero(); r];
    for i in (0..r).rev() {
        let mut acc = qty[i];
        for l in i + 1..r {
            acc -= a[accepted[l]][i] * beta[l];
        }
        beta[i] = acc / diag[i];
    }
    let mut coefficients = vec![None; p];
    for (slot, &j) in accepted.iter().enumerate() {
        coefficients[j] = Some(beta[slot]);
    }
    let residuals = (0..n)
        .map(|i| {
            let fit: T = accepted
                .iter()
                .zip(&beta)
                .map(|(&j, &b)| cols[j][i] * b)
                .sum();
            y[i] - fit
        })
        .collect();
    LeastSquares {
        coefficients,
        residuals,
    }
}

fn norm<T: Scalar>(v: &[T]) -> T {
    // scaled to avoid overflow on large elevations squared in f32
    let scale = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    let ss: T = v.iter().map(|&x| (x / scale) * (x / scale)).sum();
    scale * ss.sqrt()
}

fn mean<T: Scalar>(v: &[T]) -> T {
    compensated_sum(v.iter().copied()) / T::from_usize_lossy(v.len())
}

/// Total sum of squares about the mean.
fn centered_ss<T: Scalar>(v: &[T]) -> T {
    let m = mean(v);
    compensated_sum(v.iter().map(|&x| (x - m) * (x - m)))
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

fn columns<T: Scalar>(table: &SampleTable<T>) -> Vec<Vec<T>> {
    (0..table.n_features()).map(|k| table.column(k)).collect()
}

fn check_variance<T: Scalar>(table: &SampleTable<T>, cols: &[Vec<T>]) -> Result<()> {
    for (k, c) in cols.iter().enumerate() {
        if centered_ss(c) == T::zero() {
            return Err(Error::ZeroVariance {
                feature: table.feature_names()[k].clone(),
            });
        }
    }
    Ok(())
}

/// Sample Pearson correlation matrix of the table's features.
pub fn pearson_matrix<T: Scalar>(table: &SampleTable<T>) -> Result<Vec<Vec<T>>> {
    if table.len() < 2 {
        return Err(Error::domain("Pearson correlation needs at least 2 rows"));
    }
    let cols = columns(table);
    check_variance(table, &cols)?;
    let centered: Vec<Vec<T>> = cols
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|&x| x - m).collect()
        })
        .collect();
    let p = cols.len();
    let ss: Vec<T> = centered
        .iter()
        .map(|c| compensated_sum(c.iter().map(|&x| x * x)))
        .collect();
    let mut r = vec![vec![T::zero(); p]; p];
    for i in 0..p {
        r[i][i] = T::one();
        for j in i + 1..p {
            let sxy = compensated_sum(centered[i].iter().zip(&centered[j]).map(|(&a, &b)| a * b));
            let v = (sxy / (ss[i].sqrt() * ss[j].sqrt())).max(-T::one()).min(T::one());
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(r)
}

/// R² of regressing `y` on `xs` with an intercept. Dependent regressors are
/// dropped rather than rejected.
fn auxiliary_r2<T: Scalar>(y: &[T], xs: &[&Vec<T>]) -> T {
    let n = y.len();
    let mut design = Vec::with_capacity(xs.len() + 1);
    design.push(vec![T::one(); n]);
    design.extend(xs.iter().map(|c| (*c).clone()));
    let fit = least_squares(&design, y);
    let sse = compensated_sum(fit.residuals.iter().map(|&e| e * e));
    let sst = centered_ss(y);
    if sst == T::zero() {
        return T::zero();
    }
    (T::one() - sse / sst).max(T::zero()).min(T::one())
}

fn vif_of_columns<T: Scalar>(cols: &[Vec<T>]) -> Vec<T> {
    let p = cols.len();
    (0..p)
        .into_par_iter()
        .map(|k| {
            if p == 1 {
                return T::one();
            }
            let others: Vec<&Vec<T>> = (0..p).filter(|&j| j != k).map(|j| &cols[j]).collect();
            let r2 = auxiliary_r2(&cols[k], &others);
            if r2 >= T::one() - T::lit(VIF_SATURATION) {
                T::infinity()
            } else {
                (T::one() / (T::one() - r2)).max(T::one())
            }
        })
        .collect()
}

/// Variance inflation factor per feature; exact collinearity gives +∞.
pub fn vif<T: Scalar>(table: &SampleTable<T>) -> Result<Vec<T>> {
    if table.len() < table.n_features() + 1 {
        return Err(Error::domain(format!(
            "VIF needs at least {} rows, table has {}",
            table.n_features() + 1,
            table.len()
        )));
    }
    let cols = columns(table);
    check_variance(table, &cols)?;
    Ok(vif_of_columns(&cols))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollinearityThresholds {
    /// Pairs with |r| at or above this are noted in the report.
    pub r_abs: f64,
    /// Variables are removed while any VIF is at or above this.
    pub vif: f64,
}

impl Default for CollinearityThresholds {
    fn default() -> Self {
        Self {
            r_abs: 0.9,
            vif: 10.0,
        }
    }
}

/// JSON has no infinity; saturated VIFs are written as `null`.
mod inf_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mapped: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        mapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollinearityReport {
    pub variable_names: Vec<String>,
    pub pearson: Vec<Vec<f64>>,
    /// VIF of every variable before any removal.
    #[serde(with = "inf_as_null")]
    pub vif: Vec<f64>,
    /// Removed variables, in removal order.
    pub flagged: Vec<String>,
    pub retained: Vec<String>,
    /// VIF of the retained variables after the last removal.
    #[serde(with = "inf_as_null")]
    pub retained_vif: Vec<f64>,
    pub thresholds: CollinearityThresholds,
    pub notes: Vec<String>,
}

/// Removes the highest-VIF variable while any VIF reaches the threshold
/// (ties remove the later variable), recomputing after each removal, then
/// notes surviving pairs whose |r| reaches `r_abs`.
pub fn flag_collinear<T: Scalar>(
    table: &SampleTable<T>,
    thresholds: CollinearityThresholds,
) -> Result<CollinearityReport> {
    let pearson = pearson_matrix(table)?;
    let initial = vif(table)?;
    let names = table.feature_names().to_vec();
    let cols = columns(table);

    let mut alive: Vec<usize> = (0..names.len()).collect();
    let mut current: Vec<T> = initial.clone();
    let mut flagged = Vec::new();
    loop {
        let mut worst: Option<usize> = None;
        for (slot, &v) in current.iter().enumerate() {
            if v.as_f64() >= thresholds.vif && worst.is_none_or(|w| v >= current[w]) {
                worst = Some(slot);
            }
        }
        let Some(slot) = worst else { break };
        flagged.push(names[alive[slot]].clone());
        alive.remove(slot);
        if alive.is_empty() {
            current.clear();
            break;
        }
        let sub: Vec<Vec<T>> = alive.iter().map(|&k| cols[k].clone()).collect();
        current = vif_of_columns(&sub);
    }

    let mut notes = Vec::new();
    for (a, &i) in alive.iter().enumerate() {
        for &j in &alive[a + 1..] {
            let r = pearson[i][j].as_f64();
            if r.abs() >= thresholds.r_abs {
                notes.push(format!("|r({}, {})| = {:.4} >= {}", names[i], names[j], r.abs(), thresholds.r_abs));
            }
        }
    }

    Ok(CollinearityReport {
        pearson: pearson
            .iter()
            .map(|row| row.iter().map(|v| v.as_f64()).collect())
            .collect(),
        vif: initial.iter().map(|v| v.as_f64()).collect(),
        retained: alive.iter().map(|&k| names[k].clone()).collect(),
        retained_vif: current.iter().map(|v| v.as_f64()).collect(),
        variable_names: names,
        flagged,
        thresholds,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Multiple linear regression
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub feature_names: Vec<String>,
    pub intercept: T,
    pub coefficients: Vec<T>,
    pub r_squared: T,
    pub residual_std: T,
}

impl<T: Scalar> LinearModel<T> {
    pub fn predict(&self, x: &[T]) -> Result<T> {
        if x.len() != self.coefficients.len() {
            return Err(Error::domain(format!(
                "expected {} features, got {}",
                self.coefficients.len(),
                x.len()
            )));
        }
        Ok(self.intercept + self.coefficients.iter().zip(x).map(|(&b, &v)| b * v).sum::<T>())
    }
}

/// Fits Δh = β₀ + βᵀx by least squares on the named features.
pub fn fit_ols<T: Scalar>(train: &SampleTable<T>, features: &[String]) -> Result<LinearModel<T>> {
    let n = train.len();
    let p = features.len();
    if n <= p + 1 {
        return Err(Error::domain(format!(
            "OLS with {p} features needs more than {} rows, got {n}",
            p + 1
        )));
    }
    let idx = features
        .iter()
        .map(|f| train.feature_index(f))
        .collect::<Result<Vec<_>>>()?;
    let y = train.targets();
    let mut design = Vec::with_capacity(p + 1);
    design.push(vec![T::one(); n]);
    design.extend(idx.iter().map(|&k| train.column(k)));

    let fit = least_squares(&design, &y);
    if let Some(j) = fit.first_dependent() {
        let column = if j == 0 {
            "(intercept)".to_string()
        } else {
            features[j - 1].clone()
        };
        return Err(Error::SingularDesign { column });
    }

    let sst = centered_ss(&y);
    if sst == T::zero() {
        return Ok(LinearModel {
            feature_names: features.to_vec(),
            intercept: y[0],
            coefficients: vec![T::zero(); p],
            r_squared: T::zero(),
            residual_std: T::zero(),
        });
    }
    let beta: Vec<T> = fit.coefficients.into_iter().map(|b| b.expect("full rank")).collect();
    let sse = compensated_sum(fit.residuals.iter().map(|&e| e * e));
    Ok(LinearModel {
        feature_names: features.to_vec(),
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        r_squared: (T::one() - sse / sst).max(T::zero()).min(T::one()),
        residual_std: (sse / T::from_usize_lossy(n - p - 1)).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    fn table(cols: &[Vec<f64>], y: &[f64]) -> SampleTable<f64> {
        let rows = (0..y.len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        SampleTable::from_columns(names(cols.len()), rows, y.to_vec()).unwrap()
    }

    /// (XᵀX)⁻¹Xᵀy by Gauss-Jordan elimination with partial pivoting.
    fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut x = vec![vec![1.0; n]];
        x.extend(cols.iter().cloned());
        let p = x.len();
        let mut m = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                m[i][j] = (0..n).map(|k| x[i][k] * x[j][k]).sum();
            }
            m[i][p] = (0..n).map(|k| x[i][k] * y[k]).sum();
        }
        for c in 0..p {
            let piv = (c..p).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
            m.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = m[r][c] / m[c][c];
                    for k in c..=p {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
        (0..p).map(|i| m[i][p] / m[i][i]).collect()
    }

    #[test]
    fn pearson_fixtures() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let t = table(&[x.clone(), x.iter().map(|v| 2.0 * v).collect(), x.iter().map(|v| -v).collect(), vec![1.0, 2.0, 2.0, 4.0]], &[0.0; 4]);
        let r = pearson_matrix(&t).unwrap();
        assert_abs_diff_eq!(r[0][1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0][2], -1.0, epsilon = 1e-15);
        // sxy = 4.5, sxx = 5, syy = 4.75
        assert_abs_diff_eq!(r[0][3], 4.5 / (5.0f64 * 4.75).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r[0][3], 0.92338, epsilon = 1e-5);
        for i in 0..4 {
            assert_eq!(r[i][i], 1.0);
            for j in 0..4 {
                assert_eq!(r[i][j], r[j][i]);
            }
        }
    }

    #[test]
    fn zero_variance_is_named() {
        let t = table(&[vec![1.0, 2.0, 3.0], vec![5.0; 3]], &[0.0; 3]);
        match pearson_matrix(&t) {
            Err(Error::ZeroVariance { feature }) => assert_eq!(feature, "x1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn orthogonal_features_have_unit_vif() {
        let a = vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = vec![1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let c = vec![1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        let v = vif(&table(&[a, b, c], &[0.0; 8])).unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicated_feature_saturates() {
        let a: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let c: Vec<f64> = (0..10).map(|i| ((i * 7) % 5) as f64).collect();
        let v = vif(&table(&[a.clone(), a, c], &[0.0; 10])).unwrap();
        assert!(v[0].is_infinite() && v[1].is_infinite());
        assert!(v[2].is_finite());
    }

    #[test]
    fn vif_matches_brute_force_r2() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x1: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = x1.iter().map(|v| v + 0.1 * rng.random_range(-1.0..1.0)).collect();
        // R² of x2 on x1 from the normal-equations oracle
        let beta = normal_equations(std::slice::from_ref(&x1), &x2);
        let sse: f64 = x1.iter().zip(&x2).map(|(a, b)| (b - beta[0] - beta[1] * a).powi(2)).sum();
        let m = x2.iter().sum::<f64>() / 200.0;
        let sst: f64 = x2.iter().map(|b| (b - m).powi(2)).sum();
        let expected = 1.0 / (sse / sst);
        let v = vif(&table(&[x1, x2], &[0.0; 200])).unwrap();
        assert_abs_diff_eq!(v[1], expected, epsilon = 1e-8 * expected);
        assert_abs_diff_eq!(v[0], v[1], epsilon = 1e-8 * expected);
        assert!(expected > 50.0);
    }

    #[test]
    fn flagging_removes_one_of_a_near_duplicate_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 300;
        let mut cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        cols[3] = cols[1].iter().map(|v| v + 0.01 * rng.random_range(-1.0..1.0)).collect();
        let t = table(&cols, &vec![0.0; n]);
        let rep = flag_collinear(&t, CollinearityThresholds::default()).unwrap();
        assert_eq!(rep.flagged.len(), 1);
        assert!(rep.flagged[0] == "x1" || rep.flagged[0] == "x3");
        assert!(rep.retained_vif.iter().all(|&v| v < 10.0));
        assert_eq!(rep.retained.len(), 3);

        let indep = table(&cols[..3], &vec![0.0; n]);
        assert!(flag_collinear(&indep, CollinearityThresholds::default()).unwrap().flagged.is_empty());
        let off = CollinearityThresholds { r_abs: f64::INFINITY, vif: f64::INFINITY };
        let rep = flag_collinear(&t, off).unwrap();
        assert!(rep.flagged.is_empty() && rep.notes.is_empty());
    }

    #[test]
    fn exact_duplicate_tie_removes_later_variable() {
        let a: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let t = table(&[a.clone(), b, a], &[0.0; 12]);
        let rep = flag_collinear(&t, CollinearityThresholds::default()).unwrap();
        assert_eq!(rep.flagged, vec!["x2".to_string()]);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("null"));
        let back: CollinearityReport = serde_json::from_str(&json).unwrap();
        assert!(back.vif[0].is_infinite());
    }

    #[test]
    fn ols_recovers_generating_plane() {
        let a: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
        let b: Vec<f64> = (0..20).map(|i| ((i * 13) % 7) as f64).collect();
        let y: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 2.0 + 3.0 * a - b).collect();
        let m = fit_ols(&table(&[a, b], &y), &names(2)).unwrap();
        assert_abs_diff_eq!(m.intercept, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.coefficients[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.coefficients[1], -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_constant_target() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        let m = fit_ols(&table(&[a, b], &[0.1; 10]), &names(2)).unwrap();
        assert_eq!(m.intercept, 0.1);
        assert_eq!(m.coefficients, vec![0.0, 0.0]);
        assert_eq!(m.r_squared, 0.0);
        assert_eq!(m.predict(&[3.0, 4.0]).unwrap(), 0.1);
    }

    #[test]
    fn ols_rank_deficiency_names_column() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        let y: Vec<f64> = (0..10).map(|i| (i % 4) as f64).collect();
        match fit_ols(&table(&[a, b], &y), &names(2)) {
            Err(Error::SingularDesign { column }) => assert_eq!(column, "x1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn predict_linear_cases() {
        let m = LinearModel { feature_names: names(2), intercept: 2.0, coefficients: vec![3.0, -1.0], r_squared: 1.0, residual_std: 0.0 };
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 4.0);
        assert!(matches!(m.predict(&[1.0]), Err(Error::Domain(_))));
        let c = LinearModel { feature_names: names(2), intercept: 5.0, coefficients: vec![0.0, 0.0], r_squared: 0.0, residual_std: 0.0 };
        assert_eq!(c.predict(&[-7.0, 1e6]).unwrap(), 5.0);
    }

    #[test]
    fn ols_matches_normal_equations_on_random_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..50).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
        let m = fit_ols(&table(&cols, &y), &names(4)).unwrap();
        let oracle = normal_equations(&cols, &y);
        assert_abs_diff_eq!(m.intercept, oracle[0], epsilon = 1e-8);
        for k in 0..4 {
            assert_abs_diff_eq!(m.coefficients[k], oracle[k + 1], epsilon = 1e-8);
        }
    }

    #[test]
    fn works_in_f32() {
        let a: Vec<f32> = (0..20).map(|i| i as f32 * 0.5).collect();
        let y: Vec<f32> = a.iter().map(|v| 1.0 + 2.0 * v).collect();
        let t = SampleTable::from_columns(vec!["a".into()], a.iter().map(|&v| vec![v]).collect(), y).unwrap();
        let m = fit_ols(&t, &["a".to_string()]).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn residuals_orthogonal_and_centered(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..40).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = table(&cols, &y);
            let m = fit_ols(&t, &names(3)).unwrap();
            let resid: Vec<f64> = t.rows().iter().map(|s| s.target - m.predict(&s.features).unwrap()).collect();
            prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8);
            for c in &cols {
                let dot: f64 = c.iter().zip(&resid).map(|(a, b)| a * b).sum();
                prop_assert!(dot.abs() < 1e-8);
            }
        }

        #[test]
        fn vif_is_permutation_equivariant(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cols: Vec<Vec<f64>> = (0..3).map(|_| (0..30).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            cols[2] = cols[0].iter().zip(&cols[2]).map(|(a, b)| a + 0.5 * b).collect();
            let v = vif(&table(&cols, &[0.0; 30])).unwrap();
            let perm = vec![cols[2].clone(), cols[0].clone(), cols[1].clone()];
            let w = vif(&table(&perm, &[0.0; 30])).unwrap();
            prop_assert!(v.iter().all(|&x| x >= 1.0));
            for (a, b) in [(v[2], w[0]), (v[0], w[1]), (v[1], w[2])] {
                prop_assert!((a - b).abs() <= 1e-9 * a);
            }
        }
    }
}
