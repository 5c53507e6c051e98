//! Classification metrics shared by the tagger and compound classifier.

use std::collections::BTreeMap;

/// `2PR / (P + R)` from raw counts; 0 when undefined.
pub fn f1(correct: usize, gold: usize, predicted: usize) -> f64 {
    if correct == 0 || gold == 0 || predicted == 0 {
        return 0.0;
    }
    let p = correct as f64 / predicted as f64;
    let r = correct as f64 / gold as f64;
    2.0 * p * r / (p + r)
}

/// Mean per-class F1 over the classes that occur in `gold`. A prediction
/// of a class absent from gold lowers the recall of the gold class it
/// replaced and is otherwise ignored.
pub fn macro_f1<T: Ord + Clone>(gold: &[T], predicted: &[T]) -> f64 {
    assert_eq!(gold.len(), predicted.len());
    let mut counts: BTreeMap<&T, (usize, usize, usize)> = BTreeMap::new();
    for g in gold {
        counts.entry(g).or_default().1 += 1;
    }
    for (g, p) in gold.iter().zip(predicted) {
        if let Some(c) = counts.get_mut(p) {
            c.2 += 1;
            if g == p {
                c.0 += 1;
            }
        }
    }
    if counts.is_empty() {
        return 0.0;
    }
    counts.values().map(|&(c, g, p)| f1(c, g, p)).sum::<f64>() / counts.len() as f64
}

pub fn accuracy<T: PartialEq>(gold: &[T], predicted: &[T]) -> f64 {
    assert_eq!(gold.len(), predicted.len());
    if gold.is_empty() {
        return 0.0;
    }
    gold.iter().zip(predicted).filter(|(g, p)| g == p).count() as f64 / gold.len() as f64
}
