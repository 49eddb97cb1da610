use crate::error::{Error, Result};
use crate::types::{Label, WeightVector};

/// Area under the ROC curve from the rank-sum statistic, ties counted ½.
pub fn auc(scores: &[(f64, Label)]) -> Result<f64> {
    if let Some((s, _)) = scores.iter().find(|(s, _)| s.is_nan()) {
        return Err(Error::Metric(format!("score {s} is not comparable")));
    }
    let positives = scores.iter().filter(|(_, l)| l.is_positive()).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric("AUC needs at least one positive and one negative label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    // Sum of 1-based average ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| scores[k].1.is_positive()).count();
        rank_sum += avg_rank * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Stored nonzeros over the number of features present in the data.
pub fn density(x: &WeightVector, universe: usize) -> Result<f64> {
    if universe == 0 {
        return Err(Error::Metric("density needs a nonempty feature universe".into()));
    }
    if x.nnz() > universe {
        return Err(Error::Metric(format!("{} stored entries exceed the universe of {universe}", x.nnz())));
    }
    Ok(x.nnz() as f64 / universe as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn separated_and_tied() {
        assert_eq!(auc(&[(2.0, P), (1.0, N), (3.0, P), (0.0, N)]).unwrap(), 1.0);
        assert_eq!(auc(&[(1.0, P), (1.0, N), (1.0, P), (1.0, N)]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(auc(&[(1.0, P), (2.0, P)]), Err(Error::Metric(_))));
    }

    #[test]
    fn density_examples() {
        assert_eq!(density(&WeightVector::new(), 100).unwrap(), 0.0);
        let x: WeightVector = (0..5).map(|c| (c, 1.0)).collect();
        assert_eq!(density(&x, 50).unwrap(), 0.1);
        assert!(density(&x, 0).is_err());
    }
}
