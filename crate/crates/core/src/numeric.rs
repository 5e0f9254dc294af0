//! Small numeric helpers: compensated accumulation and robust means.

use crate::Scalar;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().collect::<CompensatedSum<T>>().value()
}

/// Mean computed around the first element, so a constant sequence returns
/// that constant bit-exactly. `None` when empty.
pub fn shifted_mean<T: Scalar>(values: &[T]) -> Option<T> {
    let first = *values.first()?;
    let offset = compensated_sum(values.iter().map(|&v| v - first));
    Some(first + offset / T::from_usize_lossy(values.len()))
}

/// Median of a non-empty slice; the even case averages the two middle values.
pub fn median<T: Scalar>(values: &mut [T]) -> T {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut v = vec![1.0e16_f64];
        v.extend(std::iter::repeat_n(1.0, 1000));
        v.push(-1.0e16);
        assert_eq!(compensated_sum(v), 1000.0);
    }

    #[test]
    fn shifted_mean_is_exact_on_constants() {
        let v = vec![0.1_f64; 37];
        assert_eq!(shifted_mean(&v), Some(0.1));
        assert_eq!(shifted_mean::<f64>(&[]), None);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0_f64, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [1.0_f64, -1.0, 1.0, -1.0]), 0.0);
    }
}
