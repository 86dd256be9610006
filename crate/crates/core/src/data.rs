//! Datasets, column standardization, and the positive-trait response
//! transform with its exact inverse.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Predictors `x` (`N × P`) and responses `y` (`N × R`) on original scales.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub x: Matrix,
    pub y: Matrix,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
}

impl RawDataset {
    pub fn new(x: Matrix, y: Matrix, x_names: Vec<String>, y_names: Vec<String>) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::shape(format!("{} response rows", x.rows()), format!("{}", y.rows())));
        }
        if x.rows() < 2 {
            return Err(Error::DegenerateInput(format!("need at least 2 rows, got {}", x.rows())));
        }
        if x.cols() == 0 || y.cols() == 0 {
            return Err(Error::DegenerateInput("need at least one predictor and one response".into()));
        }
        if x_names.len() != x.cols() || y_names.len() != y.cols() {
            return Err(Error::shape("one name per column", "mismatched name list"));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::DegenerateInput("non-finite values".into()));
        }
        Ok(RawDataset { x, y, x_names, y_names })
    }

    /// Default column names `x1..xP`, `y1..yR`.
    pub fn unnamed(x: Matrix, y: Matrix) -> Result<Self> {
        let xn = (1..=x.cols()).map(|i| format!("x{i}")).collect();
        let yn = (1..=y.cols()).map(|i| format!("y{i}")).collect();
        Self::new(x, y, xn, yn)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn subset(&self, rows: &[usize]) -> RawDataset {
        RawDataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
        }
    }
}

/// Training data after response transform and standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    pub x: Matrix,
    pub y: Matrix,
}

impl StandardizedDataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::shape(format!("{} response rows", x.rows()), format!("{}", y.rows())));
        }
        Ok(StandardizedDataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }
    pub fn p(&self) -> usize {
        self.x.cols()
    }
    pub fn r(&self) -> usize {
        self.y.cols()
    }
}

/// `f(y) = y0 (log(y / y0) + 1)` below the changepoint, identity above.
pub fn transform_response(y_raw: f64, y0: f64) -> Result<f64> {
    if !(y_raw > 0.0) {
        return Err(Error::invalid("y_raw", format!("must be positive, got {y_raw}")));
    }
    if !(y0 > 0.0) {
        return Err(Error::invalid("y0", format!("must be positive, got {y0}")));
    }
    Ok(if y_raw < y0 { y0 * (libm::log(y_raw / y0) + 1.0) } else { y_raw })
}

/// Exact inverse of [`transform_response`]; total on the reals.
pub fn inverse_transform_response(y: f64, y0: f64) -> f64 {
    if y < y0 {
        y0 * libm::exp(y / y0 - 1.0)
    } else {
        y
    }
}

/// How the changepoint of a transformed trait is chosen from training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChangepointPolicy {
    #[default]
    MinObserved,
    /// Sample mean minus two sample standard deviations; falls back to the
    /// observed minimum when that is not positive.
    MeanMinus2Sd,
}

impl ChangepointPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangepointPolicy::MinObserved => "min-observed",
            ChangepointPolicy::MeanMinus2Sd => "mean-minus-2sd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "min-observed" | "min" => Some(ChangepointPolicy::MinObserved),
            "mean-minus-2sd" | "mean-2sd" => Some(ChangepointPolicy::MeanMinus2Sd),
            _ => None,
        }
    }
}

/// Per-trait response transform. `changepoints[r]` is `Some(y0)` for
/// transformed (positive-valued) traits.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTransform {
    pub changepoints: Vec<Option<f64>>,
    pub policy: ChangepointPolicy,
}

impl ResponseTransform {
    pub fn identity(r: usize) -> Self {
        ResponseTransform { changepoints: alloc::vec![None; r], policy: ChangepointPolicy::default() }
    }

    /// Computes changepoints for the flagged traits from `y` (training rows).
    pub fn fit(y: &Matrix, positive_valued: &[bool], policy: ChangepointPolicy) -> Result<Self> {
        if positive_valued.len() != y.cols() {
            return Err(Error::shape(format!("{} trait flags", y.cols()), format!("{}", positive_valued.len())));
        }
        let mut changepoints = Vec::with_capacity(y.cols());
        for (r, &flag) in positive_valued.iter().enumerate() {
            if !flag {
                changepoints.push(None);
                continue;
            }
            let col = y.column(r);
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(Error::invalid("positive_valued", format!("trait {r} has non-positive values")));
            }
            let y0 = match policy {
                ChangepointPolicy::MinObserved => min,
                ChangepointPolicy::MeanMinus2Sd => {
                    let (m, sd) = mean_sd(&col);
                    let c = m - 2.0 * sd;
                    if c > 0.0 {
                        c
                    } else {
                        min
                    }
                }
            };
            changepoints.push(Some(y0));
        }
        Ok(ResponseTransform { changepoints, policy })
    }

    /// Flags every trait whose values are all strictly positive.
    pub fn fit_auto(y: &Matrix, policy: ChangepointPolicy) -> Result<Self> {
        let flags: Vec<bool> =
            (0..y.cols()).map(|r| y.column(r).iter().all(|&v| v > 0.0)).collect();
        Self::fit(y, &flags, policy)
    }

    pub fn apply(&self, y: &Matrix) -> Result<Matrix> {
        let mut out = y.clone();
        for i in 0..y.rows() {
            for (r, cp) in self.changepoints.iter().enumerate() {
                if let Some(y0) = *cp {
                    out[(i, r)] = transform_response(y[(i, r)], y0)?;
                }
            }
        }
        Ok(out)
    }

    pub fn invert_value(&self, r: usize, v: f64) -> f64 {
        match self.changepoints[r] {
            Some(y0) => inverse_transform_response(v, y0),
            None => v,
        }
    }
}

/// Per-column means and standard deviations of `x` and transformed `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_sd: Vec<f64>,
}

/// Mean and sample standard deviation (`n − 1` denominator).
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (m, libm::sqrt(ss / (n - 1.0)))
}

fn column_stats(m: &Matrix, names: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut means = Vec::with_capacity(m.cols());
    let mut sds = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let (mu, sd) = mean_sd(&m.column(j));
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::ConstantColumn(names[j].clone()));
        }
        means.push(mu);
        sds.push(sd);
    }
    Ok((means, sds))
}

/// Fits column means/sds on `d` after applying `t` to its responses.
pub fn fit_standardizer(d: &RawDataset, t: &ResponseTransform) -> Result<Standardizer> {
    let ty = t.apply(&d.y)?;
    let (x_mean, x_sd) = column_stats(&d.x, &d.x_names)?;
    let (y_mean, y_sd) = column_stats(&ty, &d.y_names)?;
    Ok(Standardizer { x_mean, x_sd, y_mean, y_sd })
}

fn apply_cols(m: &Matrix, mean: &[f64], sd: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] - mean[j]) / sd[j])
}

fn invert_cols(m: &Matrix, mean: &[f64], sd: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * sd[j] + mean[j])
}

impl Standardizer {
    /// Identity map for `p` predictors and `r` responses.
    pub fn identity(p: usize, r: usize) -> Self {
        Standardizer {
            x_mean: alloc::vec![0.0; p],
            x_sd: alloc::vec![1.0; p],
            y_mean: alloc::vec![0.0; r],
            y_sd: alloc::vec![1.0; r],
        }
    }

    pub fn apply_x(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.x_mean.len() {
            return Err(Error::shape(format!("{} predictors", self.x_mean.len()), format!("{}", x.cols())));
        }
        Ok(apply_cols(x, &self.x_mean, &self.x_sd))
    }

    /// Standardizes already-transformed responses.
    pub fn apply_y(&self, y: &Matrix) -> Result<Matrix> {
        if y.cols() != self.y_mean.len() {
            return Err(Error::shape(format!("{} responses", self.y_mean.len()), format!("{}", y.cols())));
        }
        Ok(apply_cols(y, &self.y_mean, &self.y_sd))
    }

    pub fn invert_x(&self, x: &Matrix) -> Matrix {
        invert_cols(x, &self.x_mean, &self.x_sd)
    }

    pub fn invert_y(&self, y: &Matrix) -> Matrix {
        invert_cols(y, &self.y_mean, &self.y_sd)
    }

    pub fn invert_y_value(&self, r: usize, v: f64) -> f64 {
        v * self.y_sd[r] + self.y_mean[r]
    }

    /// Transform then standardize a raw dataset.
    pub fn standardize(&self, d: &RawDataset, t: &ResponseTransform) -> Result<StandardizedDataset> {
        let ty = t.apply(&d.y)?;
        StandardizedDataset::new(self.apply_x(&d.x)?, self.apply_y(&ty)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn transform_examples() {
        assert_eq!(transform_response(0.5, 0.5).unwrap(), 0.5);
        assert_eq!(transform_response(3.0, 0.5).unwrap(), 3.0);
        let v = transform_response(0.5 / core::f64::consts::E, 0.5).unwrap();
        assert!(v.abs() < 1e-15, "{v}");
        assert!(transform_response(0.0, 0.5).is_err());
        assert!(transform_response(-1.0, 0.5).is_err());
    }

    #[test]
    fn inverse_examples() {
        let v = inverse_transform_response(0.0, 0.5);
        assert!((v - 0.5 / core::f64::consts::E).abs() < 1e-15);
        assert_eq!(inverse_transform_response(7.2, 0.5), 7.2);
        let mut r = RngStream::new(21);
        for _ in 0..1000 {
            let y = -5.0 + 10.0 * r.uniform();
            let back = transform_response(inverse_transform_response(y, 0.5), 0.5).unwrap();
            assert!((back - y).abs() <= 1e-12 * y.abs().max(1.0), "{y} -> {back}");
        }
    }

    #[test]
    fn derivative_continuous_at_changepoint() {
        let y0 = 0.5;
        let h = 1e-6;
        let left = (transform_response(y0, y0).unwrap() - transform_response(y0 - h, y0).unwrap()) / h;
        assert!((left - 1.0).abs() <= 10.0 * h, "{left}");
    }

    #[test]
    fn standardizer_symmetric_column() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let d = RawDataset::unnamed(x, y).unwrap();
        let t = ResponseTransform::identity(1);
        let s = fit_standardizer(&d, &t).unwrap();
        assert_eq!(s.x_mean, vec![2.0]);
        assert_eq!(s.x_sd, vec![1.0]);
        let z = s.apply_x(&d.x).unwrap();
        assert_eq!(z.column(0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_column_named() {
        let x = Matrix::from_rows(&[vec![1.0, 4.0], vec![2.0, 4.0], vec![3.0, 4.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        let d = RawDataset::unnamed(x, y).unwrap();
        let err = fit_standardizer(&d, &ResponseTransform::identity(1)).unwrap_err();
        assert_eq!(err, Error::ConstantColumn("x2".into()));
    }

    #[test]
    fn standardized_columns_centred_and_scaled() {
        let mut r = RngStream::new(22);
        let x = Matrix::from_fn(50, 6, |_, j| 3.0 * r.normal() + j as f64);
        let y = Matrix::from_fn(50, 2, |_, _| r.normal() * 10.0 + 4.0);
        let d = RawDataset::unnamed(x, y).unwrap();
        let t = ResponseTransform::identity(2);
        let s = fit_standardizer(&d, &t).unwrap();
        let sd = s.standardize(&d, &t).unwrap();
        for j in 0..6 {
            let (m, v) = mean_sd(&sd.x.column(j));
            assert!(m.abs() < 1e-10);
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn changepoint_policies() {
        let y = Matrix::from_rows(&[vec![1.0, -1.0], vec![2.0, 2.0], vec![30.0, 3.0]]).unwrap();
        let t = ResponseTransform::fit_auto(&y, ChangepointPolicy::MinObserved).unwrap();
        assert_eq!(t.changepoints, vec![Some(1.0), None]);
        // mean − 2 sd is negative here, so the minimum is used
        let t = ResponseTransform::fit(&y, &[true, false], ChangepointPolicy::MeanMinus2Sd).unwrap();
        assert_eq!(t.changepoints, vec![Some(1.0), None]);
        assert!(ResponseTransform::fit(&y, &[true, true], ChangepointPolicy::MinObserved).is_err());
    }

    proptest! {
        #[test]
        fn transform_round_trip(y in 1e-6f64..1e6, y0 in 1e-3f64..1e3) {
            let back = inverse_transform_response(transform_response(y, y0).unwrap(), y0);
            prop_assert!((back - y).abs() <= 1e-12 * y);
        }

        #[test]
        fn transform_increasing(a in 1e-6f64..100.0, b in 1e-6f64..100.0, y0 in 1e-3f64..10.0) {
            prop_assume!(a < b);
            prop_assert!(transform_response(a, y0).unwrap() < transform_response(b, y0).unwrap());
        }

        #[test]
        fn standardizer_apply_invert(vals in proptest::collection::vec(-1e3f64..1e3, 12),
                                     mean in -10.0f64..10.0, sd in 0.1f64..10.0) {
            let s = Standardizer { x_mean: vec![mean; 3], x_sd: vec![sd; 3], y_mean: vec![], y_sd: vec![] };
            let m = Matrix::from_vec(4, 3, vals).unwrap();
            let back = s.invert_x(&s.apply_x(&m).unwrap());
            for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
