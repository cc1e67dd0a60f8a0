//! Multiplicity adjustment of r-values across primary endpoints.

use serde::Serialize;

use crate::error::{Error, Result};

/// A family of per-endpoint r-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointFamily {
    entries: Vec<(String, f64)>,
}

impl EndpointFamily {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidFamily(
                "family needs at least one endpoint".into(),
            ));
        }
        for (label, r) in &entries {
            if !(0.0..=1.0).contains(r) {
                return Err(Error::InvalidFamily(format!(
                    "r-value {r} of endpoint {label:?} is outside [0, 1]"
                )));
            }
        }
        Ok(EndpointFamily { entries })
    }

    /// Labels endpoints "1", "2", ... in input order.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &r)| ((i + 1).to_string(), r))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, r)| *r).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    /// Family-wise error rate control.
    Bonferroni,
    /// False discovery rate control (Benjamini–Hochberg).
    Bh,
}

impl std::str::FromStr for Adjustment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(Adjustment::Bonferroni),
            "bh" | "fdr" => Ok(Adjustment::Bh),
            other => Err(format!(
                "unknown method {other:?} (expected bh or bonferroni)"
            )),
        }
    }
}

/// `min(1, M r_i)`, in input order.
pub fn bonferroni_adjust(family: &EndpointFamily) -> Vec<f64> {
    let m = family.len() as f64;
    family.values().iter().map(|r| (m * r).min(1.0)).collect()
}

/// Benjamini–Hochberg adjusted values `min_{i >= j} M r_(i) / i`, capped at 1
/// and mapped back to input order.
pub fn bh_adjust(family: &EndpointFamily) -> Vec<f64> {
    let values = family.values();
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    // Stable, so tied r-values keep input order.
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut adjusted = vec![0.0; m];
    let mut running = f64::INFINITY;
    for rank in (0..m).rev() {
        let i = order[rank];
        // Factor first: m / rank >= 1, so rounding never pushes below the raw value.
        let candidate = (m as f64 / (rank + 1) as f64) * values[i];
        running = running.min(candidate);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

pub fn adjust(family: &EndpointFamily, method: Adjustment) -> Vec<f64> {
    match method {
        Adjustment::Bonferroni => bonferroni_adjust(family),
        Adjustment::Bh => bh_adjust(family),
    }
}

/// Labels whose adjusted value is at most `alpha`, in input order.
pub fn declare(family: &EndpointFamily, adjusted: &[f64], alpha: f64) -> Vec<String> {
    family
        .entries()
        .iter()
        .zip(adjusted)
        .filter(|(_, &a)| a <= alpha)
        .map(|((label, _), _)| label.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd005211() -> EndpointFamily {
        EndpointFamily::from_values(&[0.1231, 0.0017, 0.0167, 0.1776]).unwrap()
    }

    #[test]
    fn bonferroni_example() {
        let f = cd005211();
        let adj = bonferroni_adjust(&f);
        assert_eq!(declare(&f, &adj, 0.05), vec!["2"]);
        let one = EndpointFamily::from_values(&[0.03]).unwrap();
        assert_eq!(bonferroni_adjust(&one), vec![0.03]);
        let capped = EndpointFamily::from_values(&[0.4, 0.5, 0.6]).unwrap();
        assert_eq!(bonferroni_adjust(&capped), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn bh_example() {
        let f = cd005211();
        let adj = bh_adjust(&f);
        let expected = [0.164_133_333_333_333_3, 0.0068, 0.0334, 0.1776];
        for (a, e) in adj.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15, "{a} vs {e}");
        }
        assert_eq!(declare(&f, &adj, 0.05), vec!["2", "3"]);
    }

    #[test]
    fn bh_small_cases() {
        let one = EndpointFamily::from_values(&[0.2]).unwrap();
        assert_eq!(bh_adjust(&one), vec![0.2]);
        let equal = EndpointFamily::from_values(&[0.01; 5]).unwrap();
        for a in bh_adjust(&equal) {
            assert!((a - 0.01).abs() < 1e-17);
        }
        let none = EndpointFamily::from_values(&[0.9, 0.8]).unwrap();
        assert!(declare(&none, &bh_adjust(&none), 0.05).is_empty());
    }

    #[test]
    fn invalid_family() {
        assert!(EndpointFamily::from_values(&[]).is_err());
        assert!(EndpointFamily::from_values(&[0.1, 1.2]).is_err());
        assert!(EndpointFamily::from_values(&[f64::NAN]).is_err());
    }
}
