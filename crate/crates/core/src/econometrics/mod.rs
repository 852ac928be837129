//! Fixed-effects OLS, multiway cluster-robust variances, dummy marginal
//! effects and Wald tests.
//!
//! Fixed effects are expanded into explicit dummies with the last level of
//! each dimension as reference. Cluster-robust variances combine every
//! nonempty intersection of the clustering dimensions by inclusion–exclusion,
//! each component scaled by `G/(G-1) · (N-1)/(N-K)`; negative eigenvalues of
//! the combined matrix are set to zero. p-values use the standard normal.

mod panel;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

pub use panel::{build_panel, read_panel_csv, trim_outliers, write_panel_csv, PanelInputs, PanelRow};

pub const INTERCEPT: &str = "(intercept)";
const DEPENDENCE_TOL: f64 = 1e-9;

/// Row access by variable and grouping-dimension name.
pub trait Observation {
    /// `Ok(None)` for a missing value; errors for an unknown variable.
    fn value(&self, var: &str) -> Result<Option<f64>>;
    /// Level of a fixed-effect or cluster dimension.
    fn key(&self, dim: &str) -> Result<String>;
}

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Two-sided p-value of a z statistic.
pub fn normal_p_value(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * standard_normal().sf(z.abs())).min(1.0)
}

/// 97.5% standard-normal quantile.
pub fn z_975() -> f64 {
    standard_normal().inverse_cdf(0.975)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterVcov {
    pub matrix: DMatrix<f64>,
    /// Clusters per dimension, in the order requested.
    pub n_clusters: Vec<(String, usize)>,
    /// Whether any eigenvalue had to be clamped.
    pub repaired: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub outcome: String,
    /// Intercept, named regressors, then retained fixed-effect dummies.
    pub names: Vec<String>,
    pub coef: DVector<f64>,
    pub n_obs: usize,
    pub fixed_effects: Vec<String>,
    pub vcov: Option<ClusterVcov>,
    n_named: usize,
    design: DMatrix<f64>,
    residuals: DVector<f64>,
    bread: DMatrix<f64>,
    used_rows: Vec<usize>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::MissingCoefficient(name.into()))
    }

    pub fn coef(&self, name: &str) -> Result<f64> {
        Ok(self.coef[self.index(name)?])
    }

    /// Intercept and named regressors, without fixed-effect dummies.
    pub fn terms(&self) -> &[String] {
        &self.names[..self.n_named]
    }

    pub fn residuals(&self) -> &DVector<f64> {
        &self.residuals
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// Indices of the input rows that entered the fit.
    pub fn used_rows(&self) -> &[usize] {
        &self.used_rows
    }

    /// `(X'X)^{-1}`.
    pub fn bread(&self) -> &DMatrix<f64> {
        &self.bread
    }

    fn vcov_matrix(&self) -> Result<&DMatrix<f64>> {
        self.vcov
            .as_ref()
            .map(|v| &v.matrix)
            .ok_or_else(|| invalid("fit has no clustered variance attached"))
    }

    pub fn se(&self, name: &str) -> Result<f64> {
        let i = self.index(name)?;
        Ok(self.vcov_matrix()?[(i, i)].max(0.0).sqrt())
    }

    pub fn t(&self, name: &str) -> Result<f64> {
        Ok(self.coef(name)? / self.se(name)?)
    }

    pub fn p_value(&self, name: &str) -> Result<f64> {
        Ok(normal_p_value(self.t(name)?))
    }

    pub fn ci95(&self, name: &str) -> Result<(f64, f64)> {
        let (b, se) = (self.coef(name)?, self.se(name)?);
        let z = z_975();
        Ok((b - z * se, b + z * se))
    }
}

struct Column {
    name: String,
    values: DVector<f64>,
}

/// Modified Gram-Schmidt with one reorthogonalization pass; returns whether
/// `v` adds a new direction, extending `basis` if so.
fn extend_basis(basis: &mut Vec<DVector<f64>>, v: &DVector<f64>) -> bool {
    let scale = v.norm();
    if scale == 0.0 {
        return false;
    }
    let mut w = v.clone();
    for _ in 0..2 {
        for q in basis.iter() {
            let c = q.dot(&w);
            w.axpy(-c, q, 1.0);
        }
    }
    let n = w.norm();
    if n <= DEPENDENCE_TOL * scale {
        return false;
    }
    basis.push(w / n);
    true
}

/// OLS of `outcome` on an intercept, `regressors` and dummy-expanded
/// `fixed_effects`. Rows with any missing value are dropped.
pub fn ols_fe<R: Observation>(
    rows: &[R],
    outcome: &str,
    regressors: &[&str],
    fixed_effects: &[&str],
) -> Result<FitResult> {
    let mut used_rows = Vec::new();
    let mut ys = Vec::new();
    let mut xs: Vec<Vec<f64>> = vec![Vec::new(); regressors.len()];
    let mut fe_keys: Vec<Vec<String>> = vec![Vec::new(); fixed_effects.len()];
    'rows: for (i, row) in rows.iter().enumerate() {
        let Some(y) = row.value(outcome)? else { continue };
        let mut vals = Vec::with_capacity(regressors.len());
        for reg in regressors {
            match row.value(reg)? {
                Some(v) => vals.push(v),
                None => continue 'rows,
            }
        }
        for (j, dim) in fixed_effects.iter().enumerate() {
            fe_keys[j].push(row.key(dim)?);
        }
        for (col, v) in xs.iter_mut().zip(vals) {
            col.push(v);
        }
        ys.push(y);
        used_rows.push(i);
    }
    let n = ys.len();
    if n == 0 {
        return Err(Error::Degenerate(format!("no complete rows for `{outcome}`")));
    }
    if ys.iter().chain(xs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite value in regression data"));
    }

    let mut basis = Vec::new();
    let intercept = Column { name: INTERCEPT.into(), values: DVector::from_element(n, 1.0) };
    extend_basis(&mut basis, &intercept.values);

    let mut dummies = Vec::new();
    for (dim, keys) in fixed_effects.iter().zip(&fe_keys) {
        let levels: BTreeSet<&String> = keys.iter().collect();
        let reference = levels.iter().next_back().copied();
        for level in levels.iter().filter(|l| Some(**l) != reference) {
            let values = DVector::from_iterator(n, keys.iter().map(|k| f64::from(u8::from(k == *level))));
            if extend_basis(&mut basis, &values) {
                dummies.push(Column { name: format!("{dim}={level}"), values });
            }
        }
    }

    let mut named = vec![intercept];
    let mut dependent = Vec::new();
    for (reg, col) in regressors.iter().zip(xs) {
        let values = DVector::from_vec(col);
        if extend_basis(&mut basis, &values) {
            named.push(Column { name: reg.to_string(), values });
        } else {
            dependent.push(reg.to_string());
        }
    }
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent));
    }

    let n_named = named.len();
    let columns: Vec<Column> = named.into_iter().chain(dummies).collect();
    let k = columns.len();
    let design = DMatrix::from_fn(n, k, |i, j| columns[j].values[i]);
    let y = DVector::from_vec(ys);

    let qr = design.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Degenerate("singular triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Degenerate("singular triangular factor".into()))?;
    let bread = &r_inv * r_inv.transpose();
    let residuals = &y - &design * &coef;

    Ok(FitResult {
        outcome: outcome.into(),
        names: columns.into_iter().map(|c| c.name).collect(),
        coef,
        n_obs: n,
        fixed_effects: fixed_effects.iter().map(|s| s.to_string()).collect(),
        vcov: None,
        n_named,
        design,
        residuals,
        bread,
        used_rows,
    })
}

fn cluster_ids<R: Observation>(rows: &[R], used: &[usize], dims: &[&str]) -> Result<Vec<usize>> {
    let mut ids = BTreeMap::new();
    let mut out = Vec::with_capacity(used.len());
    for &i in used {
        let row = rows.get(i).ok_or_else(|| invalid("rows do not match the fit"))?;
        let key = dims.iter().map(|d| row.key(d)).collect::<Result<Vec<_>>>()?;
        let next = ids.len();
        out.push(*ids.entry(key).or_insert(next));
    }
    Ok(out)
}

/// One-way clustered sandwich for the given cluster ids, with the HC1-style factor.
fn clustered_component(fit: &FitResult, ids: &[usize]) -> (DMatrix<f64>, usize) {
    let k = fit.design.ncols();
    let n = fit.design.nrows();
    let g = ids.iter().copied().max().map_or(0, |m| m + 1);
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for (i, &c) in ids.iter().enumerate() {
        let e = fit.residuals[i];
        for j in 0..k {
            scores[(c, j)] += fit.design[(i, j)] * e;
        }
    }
    let meat = scores.transpose() * &scores;
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64));
    (&fit.bread * meat * &fit.bread * factor, g)
}

/// Inclusion–exclusion combination before eigenvalue repair.
pub fn cluster_vcov_raw<R: Observation>(
    fit: &FitResult,
    rows: &[R],
    dims: &[&str],
) -> Result<(DMatrix<f64>, Vec<(String, usize)>)> {
    if dims.is_empty() {
        return Err(invalid("at least one cluster dimension required"));
    }
    if fit.n_obs <= fit.design.ncols() {
        return Err(Error::Degenerate("no residual degrees of freedom".into()));
    }
    let k = fit.design.ncols();
    let mut total = DMatrix::<f64>::zeros(k, k);
    let mut counts = vec![0; dims.len()];
    for mask in 1usize..(1 << dims.len()) {
        let subset: Vec<&str> = (0..dims.len()).filter(|b| mask & (1 << b) != 0).map(|b| dims[b]).collect();
        let ids = cluster_ids(rows, &fit.used_rows, &subset)?;
        let (component, g) = clustered_component(fit, &ids);
        if subset.len() == 1 {
            if g < 2 {
                return Err(Error::Degenerate(format!("cluster dimension `{}` has a single cluster", subset[0])));
            }
            counts[mask.trailing_zeros() as usize] = g;
        }
        if subset.len() % 2 == 1 {
            total += component;
        } else {
            total -= component;
        }
    }
    let n_clusters = dims.iter().map(|d| d.to_string()).zip(counts).collect();
    Ok((total, n_clusters))
}

/// Clamps negative eigenvalues to zero; returns whether anything changed.
pub fn repair_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return (sym, false);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    (v * DMatrix::from_diagonal(&clamped) * v.transpose(), true)
}

pub fn cluster_vcov<R: Observation>(fit: &FitResult, rows: &[R], dims: &[&str]) -> Result<ClusterVcov> {
    let (raw, n_clusters) = cluster_vcov_raw(fit, rows, dims)?;
    let (matrix, repaired) = repair_psd(&raw);
    Ok(ClusterVcov { matrix, n_clusters, repaired })
}

/// Regression with clustered variance attached.
#[derive(Debug, Clone, Copy)]
pub struct Spec<'a> {
    pub outcome: &'a str,
    pub regressors: &'a [&'a str],
    pub fixed_effects: &'a [&'a str],
    pub cluster_dims: &'a [&'a str],
}

pub fn fit_clustered<R: Observation>(rows: &[R], spec: &Spec<'_>) -> Result<FitResult> {
    let mut fit = ols_fe(rows, spec.outcome, spec.regressors, spec.fixed_effects)?;
    fit.vcov = Some(cluster_vcov(&fit, rows, spec.cluster_dims)?);
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldTest {
    pub difference: f64,
    pub variance: f64,
    pub statistic: f64,
    pub p_value: f64,
}

/// Wald test of `β_a = β_b`.
pub fn linear_hypothesis(fit: &FitResult, a: &str, b: &str) -> Result<WaldTest> {
    let (ia, ib) = (fit.index(a)?, fit.index(b)?);
    let v = fit.vcov_matrix()?;
    let difference = fit.coef[ia] - fit.coef[ib];
    let variance = (v[(ia, ia)] + v[(ib, ib)] - 2.0 * v[(ia, ib)]).max(0.0);
    let statistic = if difference == 0.0 { 0.0 } else { difference * difference / variance };
    let p_value = normal_p_value(statistic.sqrt());
    Ok(WaldTest { difference, variance, statistic, p_value })
}

/// Integer driver levels, optionally grouped into bins given by ascending
/// lower edges (`[0, 1, 3]` gives `0`, `1-2`, `3+`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binning(Vec<i64>);

impl Binning {
    pub fn new(edges: Vec<i64>) -> Result<Self> {
        if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("bin edges must be nonempty and strictly increasing"));
        }
        Ok(Self(edges))
    }

    fn bin(&self, v: i64) -> Option<usize> {
        self.0.iter().rposition(|&e| e <= v)
    }

    fn label(&self, b: usize) -> (String, i64, Option<i64>) {
        let lo = self.0[b];
        match self.0.get(b + 1) {
            Some(&next) if next - 1 == lo => (lo.to_string(), lo, Some(lo)),
            Some(&next) => (format!("{lo}-{}", next - 1), lo, Some(next - 1)),
            None => (format!("{lo}+"), lo, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEffect {
    pub level: String,
    pub lower: i64,
    pub upper: Option<i64>,
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub is_reference: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct EffectsSpec<'a> {
    pub outcome: &'a str,
    pub driver: &'a str,
    pub reference: i64,
    pub bins: Option<&'a Binning>,
    pub controls: &'a [&'a str],
    pub fixed_effects: &'a [&'a str],
    pub cluster_dims: &'a [&'a str],
}

struct WithLevel<'a, R> {
    row: &'a R,
    prefix: &'a str,
    level: Option<i64>,
}

impl<R: Observation> Observation for WithLevel<'_, R> {
    fn value(&self, var: &str) -> Result<Option<f64>> {
        match var.strip_prefix(self.prefix) {
            Some(level) => {
                let level: i64 = level.parse().map_err(|_| invalid(format!("bad level column {var}")))?;
                Ok(self.level.map(|l| f64::from(u8::from(l == level))))
            }
            None => self.row.value(var),
        }
    }

    fn key(&self, dim: &str) -> Result<String> {
        self.row.key(dim)
    }
}

/// One indicator per observed driver level (or bin) other than the
/// reference, estimated jointly; the reference row is reported as zero.
pub fn dummy_marginal_effects<R: Observation>(rows: &[R], spec: &EffectsSpec<'_>) -> Result<Vec<LevelEffect>> {
    let to_level = |v: f64| -> Result<i64> {
        if v.fract() != 0.0 || !v.is_finite() {
            return Err(invalid(format!("driver `{}` is not integer-valued: {v}", spec.driver)));
        }
        let v = v as i64;
        match spec.bins {
            Some(b) => b
                .bin(v)
                .map(|i| i as i64)
                .ok_or_else(|| invalid(format!("driver value {v} below the first bin edge"))),
            None => Ok(v),
        }
    };
    let reference = to_level(spec.reference as f64)?;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    let mut levels = Vec::with_capacity(rows.len());
    for row in rows {
        let level = row.value(spec.driver)?.map(to_level).transpose()?;
        if let Some(l) = level {
            *counts.entry(l).or_default() += 1;
        }
        levels.push(level);
    }
    if !counts.contains_key(&reference) {
        return Err(invalid(format!("reference level {} of `{}` absent", spec.reference, spec.driver)));
    }
    if counts.len() < 2 {
        return Err(Error::Degenerate(format!("driver `{}` has no estimable levels", spec.driver)));
    }

    let prefix = format!("{}=", spec.driver);
    let wrapped: Vec<WithLevel<'_, R>> = rows
        .iter()
        .zip(levels)
        .map(|(row, level)| WithLevel { row, prefix: &prefix, level })
        .collect();
    let level_cols: Vec<String> =
        counts.keys().filter(|&&l| l != reference).map(|l| format!("{prefix}{l}")).collect();
    let regressors: Vec<&str> = level_cols.iter().map(String::as_str).chain(spec.controls.iter().copied()).collect();
    let fit = fit_clustered(
        &wrapped,
        &Spec {
            outcome: spec.outcome,
            regressors: &regressors,
            fixed_effects: spec.fixed_effects,
            cluster_dims: spec.cluster_dims,
        },
    )?;

    let z = z_975();
    counts
        .iter()
        .map(|(&level, &n)| {
            let (label, lower, upper) = match spec.bins {
                Some(b) => b.label(level as usize),
                None => (level.to_string(), level, Some(level)),
            };
            let (estimate, se) = if level == reference {
                (0.0, 0.0)
            } else {
                let name = format!("{prefix}{level}");
                (fit.coef(&name)?, fit.se(&name)?)
            };
            Ok(LevelEffect {
                level: label,
                lower,
                upper,
                n,
                estimate,
                se,
                ci_low: estimate - z * se,
                ci_high: estimate + z * se,
                is_reference: level == reference,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub term: String,
    pub estimate: f64,
    pub clustered_se: f64,
    pub t: f64,
    pub p: f64,
}

pub fn regression_table(fit: &FitResult) -> Result<Vec<RegressionRow>> {
    fit.terms()
        .iter()
        .map(|term| {
            Ok(RegressionRow {
                term: term.clone(),
                estimate: fit.coef(term)?,
                clustered_se: fit.se(term)?,
                t: fit.t(term)?,
                p: fit.p_value(term)?,
            })
        })
        .collect()
}

pub fn write_regression_csv<W: Write>(w: W, fit: &FitResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in regression_table(fit)? {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Estimator choices and sample sizes stored next to each regression table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub outcome: String,
    pub n_obs: usize,
    pub fixed_effects: Vec<String>,
    pub n_fixed_effect_dummies: usize,
    pub n_clusters: Vec<(String, usize)>,
    pub variance: String,
    pub small_sample: String,
    pub p_value_reference: String,
    pub eigenvalue_repair_applied: bool,
}

impl FitSummary {
    pub fn of(fit: &FitResult) -> Self {
        let vcov = fit.vcov.as_ref();
        Self {
            outcome: fit.outcome.clone(),
            n_obs: fit.n_obs,
            fixed_effects: fit.fixed_effects.clone(),
            n_fixed_effect_dummies: fit.names.len() - fit.n_named,
            n_clusters: vcov.map(|v| v.n_clusters.clone()).unwrap_or_default(),
            variance: "multiway cluster-robust, inclusion-exclusion".into(),
            small_sample: "G/(G-1)*(N-1)/(N-K) per component".into(),
            p_value_reference: "standard normal".into(),
            eigenvalue_repair_applied: vcov.is_some_and(|v| v.repaired),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[derive(Debug, Clone)]
    struct Row {
        y: Option<f64>,
        x: f64,
        z: f64,
        g: String,
        h: String,
    }

    impl Observation for Row {
        fn value(&self, var: &str) -> Result<Option<f64>> {
            match var {
                "y" => Ok(self.y),
                "x" => Ok(Some(self.x)),
                "z" => Ok(Some(self.z)),
                _ => Err(invalid(format!("unknown variable {var}"))),
            }
        }

        fn key(&self, dim: &str) -> Result<String> {
            match dim {
                "g" => Ok(self.g.clone()),
                "h" => Ok(self.h.clone()),
                "id" => Ok(format!("{}-{}-{}", self.x, self.z, self.g)),
                _ => Err(invalid(format!("unknown dim {dim}"))),
            }
        }
    }

    fn rows(n: usize) -> Vec<Row> {
        (0..n)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 3.0;
                let z = (i as f64 * 1.3).cos();
                Row {
                    y: Some(1.0 + 2.0 * x - 0.5 * z + ((i * 7919) % 13) as f64 / 13.0 - 0.5),
                    x,
                    z,
                    g: format!("g{}", i % 5),
                    h: format!("h{}", i % 3),
                }
            })
            .collect()
    }

    #[test]
    fn exact_linear_fit() {
        let data: Vec<Row> = (0..10)
            .map(|i| Row { y: Some(3.0 - 1.5 * i as f64), x: i as f64, z: 0.0, g: "a".into(), h: "b".into() })
            .collect();
        let fit = ols_fe(&data, "y", &["x"], &[]).unwrap();
        assert_abs_diff_eq!(fit.coef("x").unwrap(), -1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.coef(INTERCEPT).unwrap(), 3.0, epsilon = 1e-10);
        assert!(fit.residuals().amax() < 1e-10);
    }

    #[test]
    fn textbook_slope() {
        let pts = [(1.0, 2.0), (2.0, 4.1), (3.0, 5.9), (4.0, 8.2), (5.0, 9.9)];
        let data: Vec<Row> =
            pts.iter().map(|&(x, y)| Row { y: Some(y), x, z: 0.0, g: "a".into(), h: "b".into() }).collect();
        let fit = ols_fe(&data, "y", &["x"], &[]).unwrap();
        let (mx, my) = (3.0, pts.iter().map(|p| p.1).sum::<f64>() / 5.0);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        assert_abs_diff_eq!(fit.coef("x").unwrap(), sxy / sxx, epsilon = 1e-12);
    }

    #[test]
    fn fixed_effects_absorb_group_shifts() {
        let base = rows(40);
        let shifted: Vec<Row> = base
            .iter()
            .map(|r| {
                let g: f64 = r.g[1..].parse().unwrap();
                Row { y: r.y.map(|y| y + 10.0 * g * g), ..r.clone() }
            })
            .collect();
        let a = ols_fe(&base, "y", &["x", "z"], &["g"]).unwrap();
        let b = ols_fe(&shifted, "y", &["x", "z"], &["g"]).unwrap();
        assert_abs_diff_eq!(a.coef("x").unwrap(), b.coef("x").unwrap(), epsilon = 1e-10);
        assert_eq!(a.names.len(), 3 + 4);
        assert!(a.names.contains(&"g=g0".to_string()));
        assert!(!a.names.contains(&"g=g4".to_string()));
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let data = rows(50);
        let fit = ols_fe(&data, "y", &["x", "z"], &["g", "h"]).unwrap();
        let xe = fit.design().transpose() * fit.residuals();
        assert!(xe.amax() < 1e-8 * fit.design().norm() * fit.residuals().norm().max(1.0));
    }

    #[test]
    fn rank_deficiency_names_regressor() {
        let data: Vec<Row> = rows(20).into_iter().map(|r| Row { z: 2.0 * r.x, ..r }).collect();
        match ols_fe(&data, "y", &["x", "z"], &[]) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, ["z"]),
            other => panic!("{other:?}"),
        }
        let constant: Vec<Row> = rows(20).into_iter().map(|r| Row { z: 1.0, ..r }).collect();
        assert!(matches!(ols_fe(&constant, "y", &["z"], &[]), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn collinear_dummies_dropped_silently() {
        // h is a function of g here, so h dummies add nothing
        let data: Vec<Row> = rows(30).into_iter().map(|r| Row { h: format!("h-{}", r.g), ..r }).collect();
        let fit = ols_fe(&data, "y", &["x"], &["g", "h"]).unwrap();
        assert_eq!(fit.names.len(), 2 + 4);
    }

    #[test]
    fn missing_outcome_rows_dropped() {
        let mut data = rows(20);
        data[3].y = None;
        let fit = ols_fe(&data, "y", &["x"], &[]).unwrap();
        assert_eq!(fit.n_obs, 19);
        assert!(!fit.used_rows().contains(&3));
    }

    #[test]
    fn identical_dimensions_collapse_to_one_way() {
        let data = rows(40);
        let fit = ols_fe(&data, "y", &["x", "z"], &[]).unwrap();
        let one = cluster_vcov_raw(&fit, &data, &["g"]).unwrap().0;
        let three = cluster_vcov_raw(&fit, &data, &["g", "g", "g"]).unwrap().0;
        assert!((one - three).amax() < 1e-12);
    }

    #[test]
    fn single_cluster_dimension_errors() {
        let data: Vec<Row> = rows(20).into_iter().map(|r| Row { h: "same".into(), ..r }).collect();
        let fit = ols_fe(&data, "y", &["x"], &[]).unwrap();
        assert!(matches!(cluster_vcov(&fit, &data, &["g", "h"]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn repair_clamps_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (fixed, repaired) = repair_psd(&m);
        assert!(repaired);
        let eig = SymmetricEigen::new(fixed).eigenvalues;
        assert!(eig.iter().all(|&l| l > -1e-12));
        assert_abs_diff_eq!(eig.max(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn wald_against_direct_formula() {
        let data = rows(50);
        let fit = fit_clustered(
            &data,
            &Spec { outcome: "y", regressors: &["x", "z"], fixed_effects: &[], cluster_dims: &["g", "h"] },
        )
        .unwrap();
        let w = linear_hypothesis(&fit, "x", "z").unwrap();
        let v = &fit.vcov.as_ref().unwrap().matrix;
        let d = fit.coef("x").unwrap() - fit.coef("z").unwrap();
        let var = v[(1, 1)] + v[(2, 2)] - 2.0 * v[(1, 2)];
        assert_abs_diff_eq!(w.statistic, d * d / var, epsilon = 1e-12);
        let same = linear_hypothesis(&fit, "x", "x").unwrap();
        assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
        assert!(matches!(linear_hypothesis(&fit, "x", "nope"), Err(Error::MissingCoefficient(_))));
    }

    #[test]
    fn zero_variance_difference_has_zero_p() {
        assert_eq!(normal_p_value(f64::INFINITY), 0.0);
        assert_abs_diff_eq!(normal_p_value(1.959963984540054), 0.05, epsilon = 1e-9);
    }

    #[test]
    fn binning_labels() {
        let b = Binning::new(vec![0, 1, 3, 6]).unwrap();
        assert_eq!(b.bin(0), Some(0));
        assert_eq!(b.bin(2), Some(1));
        assert_eq!(b.bin(100), Some(3));
        assert_eq!(b.bin(-1), None);
        assert_eq!(b.label(0).0, "0");
        assert_eq!(b.label(1).0, "1-2");
        assert_eq!(b.label(3).0, "6+");
        assert!(Binning::new(vec![1, 1]).is_err());
    }

    #[derive(Debug, Clone)]
    struct Visits {
        y: f64,
        v: f64,
        user: usize,
        day: usize,
    }

    impl Observation for Visits {
        fn value(&self, var: &str) -> Result<Option<f64>> {
            match var {
                "y" => Ok(Some(self.y)),
                "v" => Ok(Some(self.v)),
                _ => Err(invalid(var)),
            }
        }
        fn key(&self, dim: &str) -> Result<String> {
            match dim {
                "user" => Ok(self.user.to_string()),
                "day" => Ok(self.day.to_string()),
                _ => Err(invalid(dim)),
            }
        }
    }

    #[test]
    fn marginal_effects_recover_step_truth() {
        let data: Vec<Visits> = (0..300)
            .map(|i| {
                let v = (i % 4) as f64;
                Visits { y: v + ((i * 37 % 11) as f64 - 5.0) * 0.01, v, user: i % 30, day: i % 7 }
            })
            .collect();
        let spec = EffectsSpec {
            outcome: "y",
            driver: "v",
            reference: 0,
            bins: None,
            controls: &[],
            fixed_effects: &[],
            cluster_dims: &["user", "day"],
        };
        let eff = dummy_marginal_effects(&data, &spec).unwrap();
        assert_eq!(eff.len(), 4);
        assert!(eff[0].is_reference && eff[0].estimate == 0.0);
        for e in &eff[1..] {
            assert!((e.estimate - e.lower as f64).abs() < 0.05, "{e:?}");
        }

        let constant: Vec<Visits> = data.iter().map(|r| Visits { v: 0.0, ..r.clone() }).collect();
        assert!(matches!(dummy_marginal_effects(&constant, &spec), Err(Error::Degenerate(_))));
        let shifted: Vec<Visits> = data.iter().map(|r| Visits { v: r.v + 1.0, ..r.clone() }).collect();
        assert!(dummy_marginal_effects(&shifted, &spec).is_err());
    }
}
