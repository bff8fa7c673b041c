//! Evaluation protocols: explanation AUROC/AUPRC against ground-truth masks,
//! model-performance deterioration under carry-forward masking, the generator
//! ablation, the cascading-randomization sanity check, and the rank
//! statistics they share.

use ndarray::Array2;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

/// Ranks 1..n with ties given the average of their covered positions.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite scores"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via the rank statistic, ties averaged.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::DegenerateLabels(0));
    }
    if n_neg == 0 {
        return Err(Error::DegenerateLabels(1));
    }
    let ranks = average_ranks(scores);
    let pos_rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(r, _)| r)
        .sum();
    Ok((pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64)
}

/// Area under the precision-recall curve by step integration over distinct
/// score thresholds (descending).
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 {
        return Err(Error::DegenerateLabels(0));
    }
    if n_pos == labels.len() {
        return Err(Error::DegenerateLabels(1));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut area = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for k in i..=j {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(area)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 2, "need at least two points");
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..a.len() {
        let dx = ra[i] - ma;
        let dy = rb[i] - mb;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

// ---------------------------------------------------------------------------
// Explanation metrics against ground truth
// ---------------------------------------------------------------------------

/// Pool importance cells across samples (micro-averaged) and score them
/// against the binary masks.
pub fn explanation_auroc_auprc(
    importances: &[Array2<f64>],
    masks: &[&Array2<u8>],
    include_t0: bool,
) -> Result<(f64, f64)> {
    assert_eq!(importances.len(), masks.len());
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (imp, gt) in importances.iter().zip(masks) {
        assert_eq!(imp.dim(), (gt.nrows(), gt.ncols()), "shape mismatch");
        let t_start = usize::from(!include_t0);
        for f in 0..imp.nrows() {
            for t in t_start..imp.ncols() {
                scores.push(imp[[f, t]]);
                labels.push(gt[[f, t]]);
            }
        }
    }
    Ok((auroc(&scores, &labels)?, auprc(&scores, &labels)?))
}

/// Per-sample (macro) average of the explanation AUROC, skipping samples
/// whose mask is single-class.
pub fn explanation_auroc_macro(
    importances: &[Array2<f64>],
    masks: &[&Array2<u8>],
    include_t0: bool,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (imp, gt) in importances.iter().zip(masks) {
        let t_start = usize::from(!include_t0);
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for f in 0..imp.nrows() {
            for t in t_start..imp.ncols() {
                scores.push(imp[[f, t]]);
                labels.push(gt[[f, t]]);
            }
        }
        if let Ok(a) = auroc(&scores, &labels) {
            sum += a;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::DegenerateLabels(0));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    // Brute-force oracles: pairwise comparison for AUROC, threshold sweep
    // for AUPRC. Kept independent of the rank-based implementations.
    fn auroc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &yi) in labels.iter().enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, &yj) in labels.iter().enumerate() {
                if yj != 0 {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    fn auprc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let mut thresholds: Vec<f64> = scores.to_vec();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let mut area = 0.0;
        let mut prev_recall = 0.0;
        for &th in &thresholds {
            let tp = scores
                .iter()
                .zip(labels)
                .filter(|&(&s, &y)| s >= th && y == 1)
                .count() as f64;
            let fp = scores
                .iter()
                .zip(labels)
                .filter(|&(&s, &y)| s >= th && y == 0)
                .count() as f64;
            let recall = tp / n_pos;
            let precision = tp / (tp + fp);
            area += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        area
    }

    fn random_case(seed: u64, n: usize, tie_prone: bool) -> (Vec<f64>, Vec<u8>) {
        use rand::Rng;
        let mut rng = crate::prob::SeededRng::new(seed, 0);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if tie_prone {
                    f64::from(rng.gen_range(0..5)) / 4.0
                } else {
                    rng.gen_range(0.0..1.0)
                }
            })
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_range(0.0..1.0) < 0.3)).collect();
        if labels.iter().all(|&y| y == 0) {
            labels[0] = 1;
        }
        if labels.iter().all(|&y| y == 1) {
            labels[0] = 0;
        }
        (scores, labels)
    }

    #[test]
    fn auroc_auprc_match_brute_force_oracles() {
        for seed in 0..30 {
            let (scores, labels) = random_case(seed, 120, seed % 2 == 0);
            let fast = auroc(&scores, &labels).unwrap();
            let slow = auroc_oracle(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "seed {seed}: {fast} vs {slow}");
            let fast_pr = auprc(&scores, &labels).unwrap();
            let slow_pr = auprc_oracle(&scores, &labels);
            assert!(
                (fast_pr - slow_pr).abs() < 1e-12,
                "seed {seed}: {fast_pr} vs {slow_pr}"
            );
        }
    }

    #[test]
    fn perfect_scores_hit_one() {
        let labels = vec![0u8, 1, 0, 1, 1];
        let scores: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
        assert_eq!(auroc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(auprc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn constant_scores_are_uninformative() {
        let labels = vec![0u8, 1, 0, 1, 0, 0, 0, 1];
        let scores = vec![0.4; 8];
        assert_eq!(auroc(&scores, &labels).unwrap(), 0.5);
        let prevalence = 3.0 / 8.0;
        assert!((auprc(&scores, &labels).unwrap() - prevalence).abs() < 1e-12);
    }

    #[test]
    fn random_scores_near_half() {
        use rand::Rng;
        let mut rng = crate::prob::SeededRng::new(99, 0);
        let n = 10_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let a = auroc(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() < 0.02, "auroc {a}");
    }

    #[test]
    fn degenerate_labels_rejected() {
        assert!(matches!(
            auroc(&[0.1, 0.2], &[0, 0]),
            Err(Error::DegenerateLabels(0))
        ));
        assert!(matches!(
            auroc(&[0.1, 0.2], &[1, 1]),
            Err(Error::DegenerateLabels(1))
        ));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 0.8).abs() < 1e-12);
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn pooled_explanation_metrics() {
        let imp = array![[0.9, 0.1], [0.2, 0.05]];
        let gt = array![[1u8, 0], [0, 0]];
        let masks = [&gt];
        let (a, p) = explanation_auroc_auprc(&[imp], &masks, true).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(p, 1.0);
    }
}
