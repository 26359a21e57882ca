//! Gain statistics: relative gains, Spearman rank correlation, and a
//! least-squares fit of `gain = a / baseline + b`.

use std::fmt;

use crate::error::{Error, Result};

/// Percentage gain of `enhanced` over `baseline`.
pub fn relative_gain(baseline: f64, enhanced: f64) -> f64 {
    (enhanced - baseline) / baseline * 100.0
}

/// 1-based ranks, ties sharing the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need two equal-length series of at least 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData("a series is constant".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman's rho: Pearson correlation of the average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

impl HyperbolicFit {
    pub fn predict(&self, baseline: f64) -> f64 {
        self.a / baseline + self.b
    }
}

impl fmt::Display for HyperbolicFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gain = {:.4}/baseline + {:.4} (R^2 = {:.4})",
            self.a, self.b, self.r_squared
        )
    }
}

/// Ordinary least squares of `gains` on `1 / baselines`.
pub fn fit_hyperbolic(baselines: &[f64], gains: &[f64]) -> Result<HyperbolicFit> {
    if baselines.len() != gains.len() || baselines.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 paired points, got {}",
            baselines.len().min(gains.len())
        )));
    }
    if baselines.iter().any(|&b| b == 0.0 || !b.is_finite()) {
        return Err(Error::InsufficientData(
            "baseline scores must be finite and non-zero".into(),
        ));
    }
    let xs: Vec<f64> = baselines.iter().map(|b| 1.0 / b).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = gains.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all baselines are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(gains).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(gains)
        .map(|(x, y)| (y - (a * x + b)).powi(2))
        .sum();
    let ss_tot: f64 = gains.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(HyperbolicFit { a, b, r_squared })
}

/// Correlation and fit over paired (baseline, enhanced) scores.
#[derive(Debug, Clone, PartialEq)]
pub struct GainStats {
    pub baselines: Vec<f64>,
    pub gains: Vec<f64>,
    pub spearman: f64,
    pub fit: HyperbolicFit,
}

pub fn gain_stats(pairs: &[(f64, f64)]) -> Result<GainStats> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 (baseline, enhanced) pairs, got {}",
            pairs.len()
        )));
    }
    let baselines: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    if baselines.contains(&0.0) {
        return Err(Error::InsufficientData(
            "relative gain is undefined for a zero baseline".into(),
        ));
    }
    let gains: Vec<f64> = pairs.iter().map(|&(b, e)| relative_gain(b, e)).collect();
    let spearman = spearman(&baselines, &gains)?;
    let fit = fit_hyperbolic(&baselines, &gains)?;
    Ok(GainStats {
        baselines,
        gains,
        spearman,
        fit,
    })
}

impl fmt::Display for GainStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pairs: {}", self.baselines.len())?;
        writeln!(f, "{:>12} {:>12}", "baseline", "gain_%")?;
        for (b, g) in self.baselines.iter().zip(&self.gains) {
            writeln!(f, "{b:>12.4} {g:>12.4}")?;
        }
        writeln!(f, "spearman_rho: {:.4}", self.spearman)?;
        writeln!(f, "fit: {}", self.fit)
    }
}
