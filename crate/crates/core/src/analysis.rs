//! Success-rate statistics over trial records.
//!
//! A trial is one attempt with a set of encoded factors and a boolean
//! outcome. On top of that: exact success rates, trailing moving averages,
//! Wilson score intervals, and a logistic regression (Newton/IRLS) whose
//! report mirrors the usual coefficient table (estimate, standard error,
//! z, p, 95% bounds).
//!
//! The numeric kernels are generic over the scalar (`f32`/`f64` through
//! [`Real`]); the crate-root alias [`crate::Scalar`] is the default.

use std::collections::BTreeMap;
use std::io::Read;

use num_traits::Float;

/// Scalar bound for the statistics kernels.
pub trait Real: Float + num_traits::FromPrimitive + num_traits::ToPrimitive + std::fmt::Debug {}
impl<T> Real for T where
    T: Float + num_traits::FromPrimitive + num_traits::ToPrimitive + std::fmt::Debug
{
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("no trials match the filter")]
    EmptySelection,
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("window must be between 2 and 5, got {0}")]
    InvalidWindow(usize),
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("factor '{0}' missing from a trial")]
    MissingFactor(String),
    #[error("factor '{0}' is not numeric; regression needs encoded values")]
    NonNumericFactor(String),
    #[error("outcomes are all identical; the likelihood is unbounded (separation)")]
    Separation,
    #[error("design matrix is singular (collinear factors)")]
    Singular,
    #[error("bad outcome value '{0}' (want 0/1/true/false)")]
    BadOutcome(String),
    #[error("trial file has no '{0}' column")]
    MissingColumn(&'static str),
    #[error("cannot read trials: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse trials: {0}")]
    Csv(#[from] csv::Error),
}

/// A factor value: numeric encoding or a free-form tag.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum FactorValue {
    Num(f64),
    Tag(String),
}

impl FactorValue {
    pub fn parse(text: &str) -> FactorValue {
        match text.trim().parse::<f64>() {
            Ok(v) => FactorValue::Num(v),
            Err(_) => FactorValue::Tag(text.trim().to_string()),
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            FactorValue::Num(v) => Some(*v),
            FactorValue::Tag(_) => None,
        }
    }

    pub fn matches(&self, text: &str) -> bool {
        match self {
            FactorValue::Num(v) => text.parse::<f64>().is_ok_and(|t| t == *v),
            FactorValue::Tag(t) => t == text,
        }
    }
}

impl std::fmt::Display for FactorValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FactorValue::Num(v) => write!(f, "{v}"),
            FactorValue::Tag(t) => write!(f, "{t}"),
        }
    }
}

/// One experimental trial: factor values and a success/failure outcome.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrialRecord {
    pub factors: BTreeMap<String, FactorValue>,
    pub outcome: bool,
}

impl TrialRecord {
    pub fn new(
        factors: impl IntoIterator<Item = (impl Into<String>, FactorValue)>,
        outcome: bool,
    ) -> Self {
        TrialRecord {
            factors: factors.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            outcome,
        }
    }

    pub fn factor(&self, name: &str) -> Option<&FactorValue> {
        self.factors.get(name)
    }
}

/// An exact success fraction: kept as a ratio, rounded only for display.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateEstimate {
    pub successes: u64,
    pub n: u64,
}

impl RateEstimate {
    pub fn value(&self) -> f64 {
        self.successes as f64 / self.n as f64
    }

    /// Percentage rounded to two decimals, e.g. `66.67%`.
    pub fn percent(&self) -> String {
        format!("{:.2}%", self.value() * 100.0)
    }
}

impl std::fmt::Display for RateEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (n={})", self.percent(), self.n)
    }
}

/// Success rate over the trials selected by `filter`.
pub fn success_rate(
    trials: &[TrialRecord],
    filter: impl Fn(&TrialRecord) -> bool,
) -> Result<RateEstimate, AnalysisError> {
    let mut n = 0u64;
    let mut successes = 0u64;
    for trial in trials.iter().filter(|t| filter(t)) {
        n += 1;
        successes += trial.outcome as u64;
    }
    if n == 0 {
        return Err(AnalysisError::EmptySelection);
    }
    Ok(RateEstimate { successes, n })
}

/// Trailing moving average with window 2..=5. Output has
/// `len - window + 1` points; point `i` averages `series[i..i+window]`.
pub fn moving_average<R: Real>(series: &[R], window: usize) -> Result<Vec<R>, AnalysisError> {
    if window > series.len() {
        return Err(AnalysisError::WindowTooLarge { window, len: series.len() });
    }
    if !(2..=5).contains(&window) {
        return Err(AnalysisError::InvalidWindow(window));
    }
    let w = R::from_usize(window).expect("small window fits any float");
    Ok(series
        .windows(window)
        .map(|chunk| chunk.iter().fold(R::zero(), |a, &b| a + b) / w)
        .collect())
}

/// Wilson score interval for a binomial proportion, clamped to [0, 1].
/// `level` is the two-sided confidence level, e.g. 0.95.
pub fn binomial_ci<R: Real>(
    successes: u64,
    n: u64,
    level: R,
) -> Result<(R, R), AnalysisError> {
    if n == 0 || successes > n {
        return Err(AnalysisError::EmptySelection);
    }
    let level_f = level.to_f64().unwrap_or(f64::NAN);
    if !(0.0..1.0).contains(&level_f) || level_f == 0.0 {
        return Err(AnalysisError::InvalidLevel(level_f));
    }
    let z = R::from_f64(normal_quantile((1.0 + level_f) / 2.0)).unwrap();
    let nf = R::from_u64(n).unwrap();
    let p = R::from_u64(successes).unwrap() / nf;
    let z2 = z * z;
    let denom = R::one() + z2 / nf;
    let center = (p + z2 / (R::from_u8(2).unwrap() * nf)) / denom;
    let spread = (p * (R::one() - p) / nf
        + z2 / (R::from_u8(4).unwrap() * nf * nf))
        .sqrt()
        * z
        / denom;
    // At the extremes the bound is exactly 0 or 1 algebraically; rounding
    // in the square root must not push it off the point estimate.
    let low =
        if successes == 0 { R::zero() } else { (center - spread).max(R::zero()) };
    let high =
        if successes == n { R::one() } else { (center + spread).min(R::one()) };
    Ok((low, high))
}

/// Fitted logistic regression. Variables are in the order given to
/// [`logistic_fit`], with the intercept first.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RegressionFit<R = crate::Scalar> {
    pub variables: Vec<String>,
    pub coefficients: Vec<R>,
    pub std_errors: Vec<R>,
    pub z_scores: Vec<R>,
    pub p_values: Vec<R>,
    pub conf_low: Vec<R>,
    pub conf_high: Vec<R>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: R,
    pub n: usize,
}

impl<R: Real + std::fmt::Display> RegressionFit<R> {
    /// Plain-text coefficient table.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22}{:>10}{:>11}{:>9}{:>9}{:>10}{:>10}\n",
            "Variable", "Coef.", "Std. Err.", "z", "P>|z|", "[0.025", "0.975]"
        ));
        for i in 0..self.variables.len() {
            out.push_str(&format!(
                "{:<22}{:>10.3}{:>11.3}{:>9.3}{:>9.4}{:>10.3}{:>10.3}\n",
                self.variables[i],
                self.coefficients[i].to_f64().unwrap(),
                self.std_errors[i].to_f64().unwrap(),
                self.z_scores[i].to_f64().unwrap(),
                self.p_values[i].to_f64().unwrap(),
                self.conf_low[i].to_f64().unwrap(),
                self.conf_high[i].to_f64().unwrap(),
            ));
        }
        out
    }
}

/// Maximum-likelihood logistic regression with intercept, by Newton/IRLS.
///
/// Convergence: max coefficient change below 1e-8, at most 100 iterations.
/// Standard errors come from the inverse observed information; p-values
/// from the normal approximation; bounds are estimate ± 1.96·SE.
/// Divergence of the coefficient norm (perfect separation) and collinear
/// designs are reported as errors, not returned as numbers.
pub fn logistic_fit<R: Real>(
    trials: &[TrialRecord],
    variables: &[&str],
) -> Result<RegressionFit<R>, AnalysisError> {
    let n = trials.len();
    let successes = trials.iter().filter(|t| t.outcome).count();
    if successes == 0 || successes == n || n == 0 {
        return Err(AnalysisError::Separation);
    }
    let p = variables.len() + 1; // intercept first

    let mut design = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for trial in trials {
        let mut row = Vec::with_capacity(p);
        row.push(1.0f64);
        for &name in variables {
            let value = trial
                .factor(name)
                .ok_or_else(|| AnalysisError::MissingFactor(name.to_string()))?
                .as_num()
                .ok_or_else(|| AnalysisError::NonNumericFactor(name.to_string()))?;
            row.push(value);
        }
        design.push(row);
        y.push(trial.outcome as u8 as f64);
    }

    let mut beta = vec![0.0f64; p];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < 100 {
        iterations += 1;
        // Gradient and observed information at the current coefficients.
        let mut grad = vec![0.0f64; p];
        let mut info = vec![vec![0.0f64; p]; p];
        for (row, &yi) in design.iter().zip(&y) {
            let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            let w = mu * (1.0 - mu);
            for j in 0..p {
                grad[j] += row[j] * (yi - mu);
                for k in 0..p {
                    info[j][k] += row[j] * row[k] * w;
                }
            }
        }
        let delta = solve(&info, &grad).ok_or(AnalysisError::Singular)?;
        for j in 0..p {
            beta[j] += delta[j];
        }
        if beta.iter().any(|b| b.abs() > 50.0) {
            return Err(AnalysisError::Separation);
        }
        if delta.iter().all(|d| d.abs() < 1e-8) {
            converged = true;
            break;
        }
    }

    // Information and log-likelihood at the solution.
    let mut info = vec![vec![0.0f64; p]; p];
    let mut log_likelihood = 0.0f64;
    for (row, &yi) in design.iter().zip(&y) {
        let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        let mu = 1.0 / (1.0 + (-eta).exp());
        let mu_safe = mu.clamp(1e-15, 1.0 - 1e-15);
        log_likelihood += yi * mu_safe.ln() + (1.0 - yi) * (1.0 - mu_safe).ln();
        let w = mu * (1.0 - mu);
        for j in 0..p {
            for k in 0..p {
                info[j][k] += row[j] * row[k] * w;
            }
        }
    }
    let covariance = invert(&info).ok_or(AnalysisError::Singular)?;

    let mut names = Vec::with_capacity(p);
    names.push("Constant".to_string());
    names.extend(variables.iter().map(|s| s.to_string()));

    let mut fit = RegressionFit {
        variables: names,
        coefficients: Vec::with_capacity(p),
        std_errors: Vec::with_capacity(p),
        z_scores: Vec::with_capacity(p),
        p_values: Vec::with_capacity(p),
        conf_low: Vec::with_capacity(p),
        conf_high: Vec::with_capacity(p),
        converged,
        iterations,
        log_likelihood: R::from_f64(log_likelihood).unwrap(),
        n,
    };
    for j in 0..p {
        let se = covariance[j][j].sqrt();
        let z = beta[j] / se;
        let p_value = libm::erfc(z.abs() / std::f64::consts::SQRT_2);
        fit.coefficients.push(R::from_f64(beta[j]).unwrap());
        fit.std_errors.push(R::from_f64(se).unwrap());
        fit.z_scores.push(R::from_f64(z).unwrap());
        fit.p_values.push(R::from_f64(p_value).unwrap());
        fit.conf_low.push(R::from_f64(beta[j] - 1.96 * se).unwrap());
        fit.conf_high.push(R::from_f64(beta[j] + 1.96 * se).unwrap());
    }
    Ok(fit)
}

/// Gaussian elimination with partial pivoting.
fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            let (pivot_rows, rest) = m.split_at_mut(row);
            let pivot_row = &pivot_rows[col];
            for (target, source) in rest[0][col..n].iter_mut().zip(&pivot_row[col..n]) {
                *target -= f * source;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = rhs[row];
        for k in row + 1..n {
            sum -= m[row][k] * x[k];
        }
        x[row] = sum / m[row][row];
    }
    Some(x)
}

/// Matrix inverse by Gauss-Jordan with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut wide = row.clone();
            wide.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            wide
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        let f = m[col][col];
        for v in &mut m[col] {
            *v /= f;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col];
            if f == 0.0 {
                continue;
            }
            let (source, target) = if row < col {
                let (lo, hi) = m.split_at_mut(col);
                (&hi[0], &mut lo[row])
            } else {
                let (lo, hi) = m.split_at_mut(row);
                (&lo[col], &mut hi[0])
            };
            for k in 0..2 * n {
                target[k] -= f * source[k];
            }
        }
    }
    Some(m.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Inverse standard normal CDF (Acklam's rational approximation, absolute
/// error below 1.2e-9 over (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// A factor cell with an observed success count, for rebuilding trial sets
/// from published aggregate rates.
#[derive(Debug, Clone)]
pub struct CellRate {
    pub factors: Vec<(String, FactorValue)>,
    pub successes: u64,
    pub n: u64,
}

impl CellRate {
    pub fn new(
        factors: impl IntoIterator<Item = (impl Into<String>, FactorValue)>,
        successes: u64,
        n: u64,
    ) -> Self {
        CellRate {
            factors: factors.into_iter().map(|(k, v)| (k.into(), v)).collect(),
            successes,
            n,
        }
    }
}

/// Expands per-cell aggregate rates into individual trials (outcome order
/// within a cell is irrelevant to every statistic here).
pub fn reconstruct_trials(cells: &[CellRate]) -> Vec<TrialRecord> {
    let mut trials = Vec::new();
    for cell in cells {
        for i in 0..cell.n {
            trials.push(TrialRecord::new(
                cell.factors.iter().map(|(k, v)| (k.clone(), v.clone())),
                i < cell.successes,
            ));
        }
    }
    trials
}

/// Reads trials from delimiter-separated text with a header row. Every
/// column is a factor except `outcome` (1/0/true/false/yes/no). The
/// delimiter is sniffed from the header (tab, semicolon or comma).
pub fn read_trials(reader: impl Read) -> Result<Vec<TrialRecord>, AnalysisError> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') {
        b'\t'
    } else if header.contains(';') {
        b';'
    } else {
        b','
    };
    let mut csv_reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> =
        csv_reader.headers()?.iter().map(|h| h.to_string()).collect();
    let outcome_idx = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("outcome"))
        .ok_or(AnalysisError::MissingColumn("outcome"))?;

    let mut trials = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        let outcome_text = record.get(outcome_idx).unwrap_or("");
        let outcome = match outcome_text.to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "success" => true,
            "0" | "false" | "no" | "failure" => false,
            other => return Err(AnalysisError::BadOutcome(other.to_string())),
        };
        let mut factors = BTreeMap::new();
        for (i, header) in headers.iter().enumerate() {
            if i == outcome_idx {
                continue;
            }
            factors.insert(header.clone(), FactorValue::parse(record.get(i).unwrap_or("")));
        }
        trials.push(TrialRecord { factors, outcome });
    }
    Ok(trials)
}

/// Reads trials from a file path; see [`read_trials`].
pub fn read_trials_path(
    path: impl AsRef<std::path::Path>,
) -> Result<Vec<TrialRecord>, AnalysisError> {
    read_trials(std::fs::File::open(path)?)
}

/// Serializes trials as a tab-separated file with a header row.
pub fn write_trials_tsv(trials: &[TrialRecord]) -> String {
    let mut columns: Vec<String> = Vec::new();
    for trial in trials {
        for key in trial.factors.keys() {
            if !columns.contains(key) {
                columns.push(key.clone());
            }
        }
    }
    let mut out = String::new();
    out.push_str(&columns.join("\t"));
    out.push_str("\toutcome\n");
    for trial in trials {
        for column in &columns {
            if let Some(v) = trial.factors.get(column) { out.push_str(&v.to_string()) }
            out.push('\t');
        }
        out.push_str(if trial.outcome { "1" } else { "0" });
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rate_trials(successes: u64, n: u64) -> Vec<TrialRecord> {
        reconstruct_trials(&[CellRate::new(
            [("kind", FactorValue::Tag("x".into()))],
            successes,
            n,
        )])
    }

    #[test]
    fn success_rates_round_to_quoted_percentages() {
        let checks = [(30u64, "50.00%"), (40, "66.67%"), (26, "43.33%"), (18, "30.00%"), (0, "0.00%")];
        for (successes, expected) in checks {
            let trials = rate_trials(successes, 60);
            let rate = success_rate(&trials, |_| true).unwrap();
            assert_eq!(rate.percent(), expected);
            assert_eq!(rate.n, 60);
        }
    }

    #[test]
    fn empty_selection_is_an_error() {
        let trials = rate_trials(3, 6);
        assert!(matches!(
            success_rate(&trials, |_| false),
            Err(AnalysisError::EmptySelection)
        ));
    }

    #[test]
    fn success_rate_is_permutation_invariant() {
        let mut trials = rate_trials(7, 20);
        let before = success_rate(&trials, |_| true).unwrap();
        trials.reverse();
        trials.rotate_left(5);
        assert_eq!(success_rate(&trials, |_| true).unwrap(), before);
    }

    #[test]
    fn moving_average_of_constant_series_is_constant() {
        let series = [0.3f64, 0.3, 0.3];
        assert_eq!(moving_average(&series, 2).unwrap(), vec![0.3, 0.3]);
    }

    #[test]
    fn moving_average_two_point_mean() {
        let smoothed = moving_average(&[0.1f64, 0.5], 2).unwrap();
        assert_eq!(smoothed.len(), 1);
        assert!((smoothed[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn moving_average_matches_naive_resummation() {
        let series: Vec<f64> =
            (0..40).map(|i| ((i * 2654435761u64 as usize) % 1000) as f64 / 1000.0).collect();
        for window in 2..=5usize {
            let smoothed = moving_average(&series, window).unwrap();
            assert_eq!(smoothed.len(), series.len() - window + 1);
            for (i, value) in smoothed.iter().enumerate() {
                let mut naive = 0.0;
                for j in 0..window {
                    naive += series[i + j];
                }
                naive /= window as f64;
                assert!((value - naive).abs() < 1e-12, "window {window} point {i}");
            }
        }
    }

    #[test]
    fn moving_average_rejects_bad_windows() {
        let series = [0.1f64, 0.2, 0.3, 0.4, 0.5];
        assert!(matches!(
            moving_average(&series, 6),
            Err(AnalysisError::WindowTooLarge { window: 6, len: 5 })
        ));
        assert!(matches!(moving_average(&series, 1), Err(AnalysisError::InvalidWindow(1))));
        let long = [0.1f64; 10];
        assert!(matches!(moving_average(&long, 6), Err(AnalysisError::InvalidWindow(6))));
    }

    #[test]
    fn wilson_interval_clamps_at_the_boundaries() {
        let (low, _) = binomial_ci(0u64, 60, 0.95f64).unwrap();
        assert_eq!(low, 0.0);
        let (_, high) = binomial_ci(60u64, 60, 0.95f64).unwrap();
        assert_eq!(high, 1.0);
    }

    #[test]
    fn wilson_interval_matches_direct_formula_evaluation() {
        // Independent evaluation with the textbook constant.
        let z = 1.959963984540054f64;
        let (n, s) = (60.0f64, 30.0f64);
        let p = s / n;
        let denom = 1.0 + z * z / n;
        let center = (p + z * z / (2.0 * n)) / denom;
        let spread = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;

        // The library's quantile approximation is good to ~1e-9.
        let (low, high) = binomial_ci(30u64, 60, 0.95f64).unwrap();
        assert!((low - (center - spread)).abs() < 1e-8);
        assert!((high - (center + spread)).abs() < 1e-8);
        // Symmetric about 0.5 for a centered estimate.
        assert!((low + high - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wilson_interval_contains_the_point_estimate() {
        for (s, n) in [(0u64, 7u64), (3, 9), (5, 5), (17, 60), (59, 60)] {
            let (low, high) = binomial_ci(s, n, 0.95f64).unwrap();
            let p = s as f64 / n as f64;
            assert!(low <= p && p <= high, "{s}/{n}");
        }
    }

    #[test]
    fn normal_quantile_hits_known_values() {
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((normal_quantile(0.025) + 1.959963984540054).abs() < 1e-8);
    }

    #[test]
    fn logistic_fit_rejects_degenerate_outcomes() {
        let all_success = reconstruct_trials(&[CellRate::new(
            [("x", FactorValue::Num(1.0))],
            10,
            10,
        )]);
        assert!(matches!(
            logistic_fit::<f64>(&all_success, &["x"]),
            Err(AnalysisError::Separation)
        ));
    }

    #[test]
    fn logistic_fit_rejects_collinear_designs() {
        let cells = [
            CellRate::new([("a", FactorValue::Num(0.0)), ("b", FactorValue::Num(0.0))], 2, 10),
            CellRate::new([("a", FactorValue::Num(1.0)), ("b", FactorValue::Num(2.0))], 8, 10),
        ];
        let trials = reconstruct_trials(&cells);
        assert!(matches!(
            logistic_fit::<f64>(&trials, &["a", "b"]),
            Err(AnalysisError::Singular)
        ));
    }

    #[test]
    fn logistic_fit_gradient_vanishes_at_the_solution() {
        let cells = [
            CellRate::new([("x", FactorValue::Num(0.0))], 10, 40),
            CellRate::new([("x", FactorValue::Num(1.0))], 20, 40),
            CellRate::new([("x", FactorValue::Num(2.0))], 32, 40),
        ];
        let trials = reconstruct_trials(&cells);
        let fit = logistic_fit::<f64>(&trials, &["x"]).unwrap();
        assert!(fit.converged);

        // First-order optimality, evaluated from scratch.
        let mut grad = [0.0f64; 2];
        for t in &trials {
            let x = t.factor("x").unwrap().as_num().unwrap();
            let eta = fit.coefficients[0] + fit.coefficients[1] * x;
            let mu = 1.0 / (1.0 + (-eta).exp());
            let r = (t.outcome as u8 as f64) - mu;
            grad[0] += r;
            grad[1] += r * x;
        }
        assert!(grad[0].abs() < 1e-6 && grad[1].abs() < 1e-6, "{grad:?}");
        // z = coef / se and bounds = coef ± 1.96 se by construction.
        for j in 0..2 {
            assert!(
                (fit.z_scores[j] - fit.coefficients[j] / fit.std_errors[j]).abs() < 1e-12
            );
            assert!(
                (fit.conf_high[j] - (fit.coefficients[j] + 1.96 * fit.std_errors[j])).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn logistic_fit_is_calibrated_per_cell() {
        let cells = [
            CellRate::new([("x", FactorValue::Num(0.0))], 12, 60),
            CellRate::new([("x", FactorValue::Num(1.0))], 30, 60),
            CellRate::new([("x", FactorValue::Num(2.0))], 48, 60),
        ];
        let trials = reconstruct_trials(&cells);
        let fit = logistic_fit::<f64>(&trials, &["x"]).unwrap();
        for cell in &cells {
            let x = cell.factors[0].1.as_num().unwrap();
            let eta = fit.coefficients[0] + fit.coefficients[1] * x;
            let mu = 1.0 / (1.0 + (-eta).exp());
            let observed = cell.successes as f64 / cell.n as f64;
            assert!((mu - observed).abs() < 0.05, "cell x={x}: {mu} vs {observed}");
        }
    }

    #[test]
    fn trials_round_trip_through_tsv() {
        let cells = [
            CellRate::new(
                [
                    ("sensitivity_level", FactorValue::Num(0.0)),
                    ("data_type", FactorValue::Tag("person_name".into())),
                ],
                3,
                5,
            ),
            CellRate::new(
                [
                    ("sensitivity_level", FactorValue::Num(2.0)),
                    ("data_type", FactorValue::Tag("ssn".into())),
                ],
                0,
                4,
            ),
        ];
        let trials = reconstruct_trials(&cells);
        let tsv = write_trials_tsv(&trials);
        let back = read_trials(tsv.as_bytes()).unwrap();
        assert_eq!(back, trials);

        let rate = success_rate(&back, |t| {
            t.factor("data_type").is_some_and(|v| v.matches("person_name"))
        })
        .unwrap();
        assert_eq!(rate.successes, 3);
        assert_eq!(rate.n, 5);
    }

    #[test]
    fn read_trials_sniffs_commas_too() {
        let csv_text = "x,outcome\n0,1\n1,0\n";
        let trials = read_trials(csv_text.as_bytes()).unwrap();
        assert_eq!(trials.len(), 2);
        assert_eq!(trials[0].factor("x"), Some(&FactorValue::Num(0.0)));
        assert!(trials[0].outcome && !trials[1].outcome);
    }

    #[test]
    fn read_trials_requires_outcome_column() {
        assert!(matches!(
            read_trials("a,b\n1,2\n".as_bytes()),
            Err(AnalysisError::MissingColumn("outcome"))
        ));
    }

    #[test]
    fn bad_outcome_value_is_reported() {
        assert!(matches!(
            read_trials("x,outcome\n1,maybe\n".as_bytes()),
            Err(AnalysisError::BadOutcome(v)) if v == "maybe"
        ));
    }
}
