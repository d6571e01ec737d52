//! Scoring against planted ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Arc, NodeIx};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// All ordered pairs of distinct nodes inside each group, unioned.
pub fn group_pair_universe(groups: &[Vec<NodeIx>]) -> BTreeSet<Arc> {
    let mut universe = BTreeSet::new();
    for g in groups {
        for &u in g {
            for &v in g {
                if u != v {
                    universe.insert((u, v));
                }
            }
        }
    }
    universe
}

/// Hamming comparison of two arc sets over `universe`. Arcs outside the
/// universe are counted anyway (the universe is widened by them) so that a
/// stray learned arc can never be silently ignored.
pub fn arc_accuracy(
    truth: &BTreeSet<Arc>,
    learned: &BTreeSet<Arc>,
    universe: &BTreeSet<Arc>,
) -> Result<(ConfusionCounts, f64)> {
    if universe.is_empty() {
        return Err(Error::Empty("arc universe"));
    }
    let mut c = ConfusionCounts::default();
    let extra = truth.union(learned).filter(|a| !universe.contains(a)).count();
    for a in universe
        .iter()
        .chain(truth.union(learned).filter(|a| !universe.contains(a)))
    {
        match (truth.contains(a), learned.contains(a)) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    if extra > 0 {
        log::debug!("{extra} arcs outside the universe were counted");
    }
    Ok((c, c.accuracy()))
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, `I(X;Y) / ((H(X) + H(Y)) / 2)`, natural log.
/// Two single-cluster labelings score 1; one single-cluster side against a
/// split one scores 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParam(format!(
            "labelings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidParam("NMI needs at least two labeled items".into()));
    }
    let n = a.len() as f64;
    let mut ca: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cb: BTreeMap<usize, usize> = BTreeMap::new();
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
        *joint.entry((x, y)).or_default() += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (ca[&x] as f64 * cb[&y] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two
/// values.
pub fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_example() {
        let c = ConfusionCounts {
            tp: 3,
            tn: 5,
            fp: 1,
            fn_: 1,
        };
        assert!((c.accuracy() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_arcs_score_one() {
        let universe = group_pair_universe(&[vec![0, 1, 2]]);
        let truth: BTreeSet<Arc> = [(0, 1), (1, 2)].into();
        let (c, acc) = arc_accuracy(&truth, &truth, &universe).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(c.total(), 6);
    }

    #[test]
    fn empty_universe_is_an_error() {
        assert!(arc_accuracy(&BTreeSet::new(), &BTreeSet::new(), &BTreeSet::new()).is_err());
    }

    #[test]
    fn nmi_edge_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[5, 5, 7, 7]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0], &[0]).is_err());
    }

    #[test]
    fn stdev_of_known_sample() {
        let (m, s) = mean_stdev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - 2.138089935299395).abs() < 1e-12);
    }
}
