use crate::error::{Error, Result};
use crate::models::Logits;
use crate::numerics::Real;

/// Number of classes ranked strictly ahead of `truth`: higher score, or an
/// equal score with a lower class index.
pub fn rank_of<T: Real>(row: &[T], truth: usize) -> usize {
    let target = row[truth];
    row.iter()
        .enumerate()
        .filter(|&(c, &v)| v > target || (v == target && c < truth))
        .count()
}

/// Fraction of rows whose true class is among the `k` highest logits. Ties
/// at the cut-off admit lower class indices first.
pub fn top_k_accuracy<T: Real>(logits: &Logits<T>, truths: &[usize], k: usize) -> Result<f64> {
    let classes = logits.classes();
    if k == 0 || k > classes {
        return Err(Error::Parameter(format!("k = {k} must lie in 1..={classes}")));
    }
    if truths.len() != logits.batch() {
        return Err(Error::Dimension(format!(
            "{} truths for {} logit rows",
            truths.len(),
            logits.batch()
        )));
    }
    if truths.is_empty() {
        return Err(Error::Protocol("accuracy of an empty set is undefined".into()));
    }
    let mut hits = 0usize;
    for (i, &truth) in truths.iter().enumerate() {
        if truth >= classes {
            return Err(Error::Parameter(format!("truth {truth} out of range for {classes} classes")));
        }
        if rank_of(logits.row(i), truth) < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / truths.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Rng, Tensor};
    use proptest::prelude::*;

    fn logits(rows: Vec<Vec<f64>>) -> Logits<f64> {
        let k = rows[0].len();
        Logits::new(Tensor::new(vec![rows.len(), k], rows.concat()).unwrap()).unwrap()
    }

    /// Full stable argsort per row, then membership in the first k.
    fn brute(l: &Logits<f64>, truths: &[usize], k: usize) -> f64 {
        let mut hits = 0;
        for (i, &t) in truths.iter().enumerate() {
            let row = l.row(i);
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            if order[..k].contains(&t) {
                hits += 1;
            }
        }
        hits as f64 / truths.len() as f64
    }

    #[test]
    fn hand_ranked_case() {
        // Truth ranks (1-based) 1, 2, 6, 3.
        let l = logits(vec![
            vec![9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![1.0, 8.0, 2.0, 3.0, 4.0, 5.0, 9.0],
            vec![9.0, 8.0, 1.0, 7.0, 6.0, 5.0, 0.0],
            vec![9.0, 1.0, 2.0, 7.0, 8.0, 5.0, 0.0],
        ]);
        let truths = [0, 1, 2, 3];
        assert_eq!(top_k_accuracy(&l, &truths, 1).unwrap(), 0.25);
        assert_eq!(top_k_accuracy(&l, &truths, 5).unwrap(), 0.75);
    }

    #[test]
    fn uniform_logits_admit_low_indices() {
        let l = logits(vec![vec![0.5; 10]; 10]);
        let truths: Vec<usize> = (0..10).collect();
        assert_eq!(top_k_accuracy(&l, &truths, 5).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        let l = logits(vec![vec![0.0, 1.0]]);
        assert!(matches!(top_k_accuracy(&l, &[0], 3), Err(Error::Parameter(_))));
        assert!(matches!(top_k_accuracy(&l, &[2], 1), Err(Error::Parameter(_))));
        assert!(matches!(top_k_accuracy(&l, &[0, 1], 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn matches_argsort_oracle_on_random_instances() {
        let mut rng = Rng::new(5, "topk");
        for _ in 0..1000 {
            let n = 1 + rng.below(12);
            let k_classes = 2 + rng.below(12);
            // Coarse values so ties are common.
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k_classes).map(|_| rng.below(4) as f64).collect())
                .collect();
            let truths: Vec<usize> = (0..n).map(|_| rng.below(k_classes)).collect();
            let l = logits(rows);
            let mut prev = 0.0;
            for k in 1..=k_classes {
                let got = top_k_accuracy(&l, &truths, k).unwrap();
                assert_eq!(got, brute(&l, &truths, k));
                assert!(got >= prev);
                prev = got;
            }
            assert_eq!(prev, 1.0);
        }
    }

    proptest! {
        #[test]
        fn top5_dominates_top1(values in prop::collection::vec(-3.0f64..3.0, 40), truths in prop::collection::vec(0usize..8, 5)) {
            let l = logits(values.chunks(8).map(<[f64]>::to_vec).collect());
            let t1 = top_k_accuracy(&l, &truths, 1).unwrap();
            let t5 = top_k_accuracy(&l, &truths, 5).unwrap();
            prop_assert!(t5 >= t1);
        }
    }
}
