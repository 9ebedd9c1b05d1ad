use crate::error::{invalid, Result};

/// Lower median: after sorting ascending, the report at 1-based position
/// `N/2` for even `N` and `(N+1)/2` for odd `N`.
pub fn median_aggregate(reports: &[f64]) -> Result<f64> {
    if reports.is_empty() {
        return Err(invalid("median of zero reports"));
    }
    let mut sorted = reports.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let s = if n.is_multiple_of(2) { n / 2 } else { n.div_ceil(2) };
    Ok(sorted[s - 1])
}

/// Median benchmark. Weights are uniform and never change; the optional
/// subsample draws `k` workers per slot before taking the median.
#[derive(Debug, Clone, PartialEq)]
pub struct Median {
    pub weights: Vec<f64>,
    pub subsample: Option<usize>,
    pub subset: Option<Vec<usize>>,
}

impl Median {
    pub fn new(workers: usize, subsample: Option<usize>) -> Result<Self> {
        if let Some(k) = subsample {
            if k == 0 || k > workers {
                return Err(invalid(format!("median subsample {k} must lie in [1, {workers}]")));
            }
        }
        Ok(Self { weights: vec![1.0; workers], subsample, subset: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(median_aggregate(&[0.1, 0.4, 0.9]).unwrap(), 0.4);
        assert_eq!(median_aggregate(&[0.9, 0.1, 0.8, 0.2]).unwrap(), 0.2);
        assert_eq!(median_aggregate(&[0.7]).unwrap(), 0.7);
        assert!(median_aggregate(&[]).is_err());
    }
}
