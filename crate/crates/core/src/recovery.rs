//! Thresholding block norms into graphs, and scoring against a reference.

use crate::error::{Error, Result};
use crate::operator::BlockNormMatrix;
use crate::partition::PixelGraph;

/// Pixels whose block norm exceeds `rho`, symmetrised, with the diagonal set.
pub fn threshold_graph(norms: &BlockNormMatrix, rho: f64) -> PixelGraph {
    PixelGraph::from_fn(norms.cells(), |i, j| norms.get(i, j) > rho)
}

/// True and false positive rates over all `p²` ordered pixels.
///
/// When the reference graph is complete there are no negatives and the
/// false positive rate is reported as 0.
pub fn tpr_fpr(est: &PixelGraph, truth: &PixelGraph) -> Result<(f64, f64)> {
    let p = truth.cells();
    if est.cells() != p {
        return Err(Error::DimensionMismatch(format!(
            "estimated graph has p = {} but the reference has p = {p}",
            est.cells()
        )));
    }
    let (mut tp, mut fp, mut pos) = (0usize, 0usize, 0usize);
    for i in 0..p {
        for j in 0..p {
            match (est.get(i, j), truth.get(i, j)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                _ => {}
            }
            pos += truth.get(i, j) as usize;
        }
    }
    let neg = p * p - pos;
    let tpr = tp as f64 / pos as f64;
    let fpr = if neg == 0 { 0.0 } else { fp as f64 / neg as f64 };
    Ok((tpr, fpr))
}

/// Receiver operating characteristic over every distinct threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(FPR, TPR)` pairs from `(0, 0)` to `(1, 1)`, sorted by FPR.
    pub points: Vec<(f64, f64)>,
    /// Threshold producing each point; `None` for the two end points.
    pub thresholds: Vec<Option<f64>>,
}

/// Sweeps `rho` over the distinct norms in descending order.
pub fn roc(norms: &BlockNormMatrix, truth: &PixelGraph) -> Result<RocCurve> {
    if norms.cells() != truth.cells() {
        return Err(Error::DimensionMismatch(format!(
            "norm matrix has p = {} but the reference has p = {}",
            norms.cells(),
            truth.cells()
        )));
    }
    let mut levels: Vec<f64> = norms.matrix().iter().copied().collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![None];
    for rho in levels {
        let (tpr, fpr) = tpr_fpr(&threshold_graph(norms, rho), truth)?;
        if points.last() != Some(&(fpr, tpr)) {
            points.push((fpr, tpr));
            thresholds.push(Some(rho));
        }
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
        thresholds.push(None);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band(p: usize) -> PixelGraph {
        PixelGraph::from_fn(p, |i, j| i.abs_diff(j) <= 1)
    }

    fn norms(p: usize, v: &[f64]) -> BlockNormMatrix {
        BlockNormMatrix::new(DMatrix::from_row_slice(p, p, v)).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let n = norms(2, &[4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0]);
        assert_eq!(threshold_graph(&n, 1.0), PixelGraph::diagonal(2));
        assert_eq!(threshold_graph(&n, 0.5), PixelGraph::complete(2));
        assert_eq!(threshold_graph(&n, 5.0), PixelGraph::diagonal(2));
        assert_eq!(threshold_graph(&n, 0.1), PixelGraph::complete(2));
    }

    #[test]
    fn rate_examples() {
        let truth = band(20);
        assert_eq!(truth.count(), 58);
        assert_eq!(tpr_fpr(&truth, &truth).unwrap(), (1.0, 0.0));
        assert_eq!(tpr_fpr(&PixelGraph::complete(20), &truth).unwrap(), (1.0, 1.0));
        let (tpr, fpr) = tpr_fpr(&PixelGraph::diagonal(20), &truth).unwrap();
        assert_eq!((tpr, fpr), (20.0 / 58.0, 0.0));
        assert!(tpr_fpr(&PixelGraph::diagonal(3), &truth).is_err());
        assert_eq!(tpr_fpr(&PixelGraph::complete(4), &PixelGraph::complete(4)).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn auc_examples() {
        let perfect = RocCurve { points: vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)], thresholds: vec![None; 3] };
        assert_eq!(auc(&perfect), 1.0);
        let chance = RocCurve { points: vec![(0.0, 0.0), (1.0, 1.0)], thresholds: vec![None; 2] };
        assert_eq!(auc(&chance), 0.5);
        let stair = RocCurve {
            points: vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)],
            thresholds: vec![None; 5],
        };
        // Trapezoids: 0.5 * 0.5 + 0.5 * 1.
        assert_eq!(auc(&stair), 0.75);
    }

    #[test]
    fn roc_special_cases() {
        let truth = band(6);
        let sep = BlockNormMatrix::new(DMatrix::from_fn(6, 6, |i, j| if truth.get(i, j) { 2.0 } else { 1.0 })).unwrap();
        let c = roc(&sep, &truth).unwrap();
        assert!(c.points.contains(&(0.0, 1.0)));
        assert_eq!(auc(&c), 1.0);
        let flat = BlockNormMatrix::new(DMatrix::from_element(6, 6, 1.0)).unwrap();
        let c = roc(&flat, &truth).unwrap();
        // Only the forced diagonal survives at rho = 1.
        assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
    }

    /// Enumerates every threshold (each norm value and one below the minimum).
    fn brute_force_roc(n: &BlockNormMatrix, truth: &PixelGraph) -> Vec<(f64, f64)> {
        let mut rhos: Vec<f64> = n.matrix().iter().copied().collect();
        rhos.push(n.min() - 1.0);
        let mut pts: Vec<(f64, f64)> = rhos
            .iter()
            .map(|&rho| {
                let p = truth.cells();
                let mut tp = 0;
                let mut fp = 0;
                let mut pos = 0;
                for i in 0..p {
                    for j in 0..p {
                        let e = i == j || n.get(i, j) > rho || n.get(j, i) > rho;
                        let t = truth.get(i, j);
                        tp += (e && t) as usize;
                        fp += (e && !t) as usize;
                        pos += t as usize;
                    }
                }
                let neg = p * p - pos;
                (if neg == 0 { 0.0 } else { fp as f64 / neg as f64 }, tp as f64 / pos as f64)
            })
            .collect();
        pts.push((0.0, 0.0));
        pts.push((1.0, 1.0));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        pts
    }

    fn random_instance(rng: &mut ChaCha8Rng, p: usize) -> (BlockNormMatrix, PixelGraph) {
        let mut m = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>());
        m = (&m + m.transpose()) * 0.5;
        let flags: Vec<bool> = (0..p * p).map(|_| rng.random::<f64>() < 0.3).collect();
        let truth = PixelGraph::from_fn(p, |i, j| flags[i * p + j]);
        (BlockNormMatrix::new(m).unwrap(), truth)
    }

    #[test]
    fn roc_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let (n, truth) = random_instance(&mut rng, 5);
            let c = roc(&n, &truth).unwrap();
            assert_eq!(c.points, brute_force_roc(&n, &truth));
        }
    }

    proptest! {
        #[test]
        fn threshold_monotone(seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, _) = random_instance(&mut rng, 7);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(threshold_graph(&n, hi).is_subset_of(&threshold_graph(&n, lo)));
        }

        #[test]
        fn roc_invariants(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, truth) = random_instance(&mut rng, 6);
            let c = roc(&n, &truth).unwrap();
            prop_assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
            prop_assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
            for w in c.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            let a = auc(&c);
            prop_assert!((0.0..=1.0).contains(&a));
            // Perfect ranking of off-diagonal pixels iff AUC = 1.
            let p = truth.cells();
            let mut pos_min = f64::INFINITY;
            let mut neg_max = f64::NEG_INFINITY;
            for i in 0..p { for j in 0..p {
                if i == j { continue; }
                let v = n.get(i, j).max(n.get(j, i));
                if truth.get(i, j) { pos_min = pos_min.min(v) } else { neg_max = neg_max.max(v) }
            }}
            prop_assert_eq!((a - 1.0).abs() < 1e-12, pos_min > neg_max);
        }
    }
}
