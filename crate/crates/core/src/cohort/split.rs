use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Cohort;
use crate::error::{Error, Result};

/// How to partition a cohort into auxiliary-fit, cross-validation and test
/// sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    /// (aux, kf, test), each in (0, 1), summing to 1.
    pub fractions: (f64, f64, f64),
    pub fixed_counts: Option<(usize, usize, usize)>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            fractions: (0.15, 0.70, 0.15),
            fixed_counts: None,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, k, t) = self.fractions;
        for (name, v) in [("aux", a), ("kf", k), ("test", t)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!(
                    "split fraction `{name}` must lie in (0, 1), got {v}"
                )));
            }
        }
        if ((a + k + t) - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split fractions must sum to 1, got {}",
                a + k + t
            )));
        }
        Ok(())
    }

    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        if let Some((a, k, t)) = self.fixed_counts {
            if a + k + t != n {
                return Err(Error::Validation(format!(
                    "fixed split counts {a}+{k}+{t} do not sum to the cohort size {n}"
                )));
            }
            return Ok((a, k, t));
        }
        let c = largest_remainder_counts(n, &[self.fractions.0, self.fractions.1, self.fractions.2]);
        Ok((c[0], c[1], c[2]))
    }
}

/// Apportions `n` items by `fractions` with the largest-remainder method;
/// equal remainders go to the earlier slot.
pub fn largest_remainder_counts(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // Stable sort keeps split order for ties.
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.partial_cmp(&ri).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Ids sorted lexicographically, then shuffled by `seed`. Depends only on the
/// id set, never on record order.
pub fn seeded_id_order<'a>(ids: &[&'a str], seed: u64) -> Vec<&'a str> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    sorted
}

#[derive(Debug, Clone)]
pub struct Split {
    pub aux: Cohort,
    pub kf: Cohort,
    pub test: Cohort,
}

/// Disjoint, exhaustive three-way partition. Records keep their original
/// relative order inside each part.
pub fn split(cohort: &Cohort, spec: &SplitSpec) -> Result<Split> {
    let n = cohort.len();
    let (n_aux, n_kf, _) = spec.counts(n)?;
    let order = seeded_id_order(&cohort.ids(), spec.seed);
    let part: HashMap<&str, u8> = order
        .iter()
        .enumerate()
        .map(|(pos, id)| {
            let p = if pos < n_aux {
                0
            } else if pos < n_aux + n_kf {
                1
            } else {
                2
            };
            (*id, p)
        })
        .collect();
    let mut idx: [Vec<usize>; 3] = Default::default();
    for (i, r) in cohort.records().iter().enumerate() {
        idx[part[r.id.as_str()] as usize].push(i);
    }
    Ok(Split {
        aux: cohort.subset(&idx[0]),
        kf: cohort.subset(&idx[1]),
        test: cohort.subset(&idx[2]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::test_support::record;

    fn cohort(n: usize) -> Cohort {
        Cohort::new(
            (0..n)
                .map(|i| record(&format!("p{i:04}"), 60.0, 40.0, 200.0, 3.0, (i % 2) as u8))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fixed_counts_exact() {
        let c = cohort(812);
        let spec = SplitSpec {
            fixed_counts: Some((122, 568, 122)),
            ..SplitSpec::default()
        };
        let s = split(&c, &spec).unwrap();
        assert_eq!((s.aux.len(), s.kf.len(), s.test.len()), (122, 568, 122));
    }

    #[test]
    fn fractions_on_100() {
        assert_eq!(largest_remainder_counts(100, &[0.15, 0.70, 0.15]), vec![15, 70, 15]);
        assert_eq!(largest_remainder_counts(812, &[0.15, 0.70, 0.15]), vec![122, 568, 122]);
        // Remainders 0.5/0.0/0.5 on 5 items: floor (2, 0, 2) + tie goes to aux.
        assert_eq!(largest_remainder_counts(5, &[0.5, 0.1, 0.4]), vec![3, 0, 2]);
    }

    #[test]
    fn infeasible_counts_rejected() {
        let c = cohort(10);
        let spec = SplitSpec {
            fixed_counts: Some((2, 5, 2)),
            ..SplitSpec::default()
        };
        assert!(split(&c, &spec).is_err());
        let bad = SplitSpec {
            fractions: (0.5, 0.6, -0.1),
            ..SplitSpec::default()
        };
        assert!(split(&c, &bad).is_err());
    }

    #[test]
    fn partition_and_determinism() {
        let c = cohort(97);
        let spec = SplitSpec::default();
        let a = split(&c, &spec).unwrap();
        let b = split(&c, &spec).unwrap();
        assert_eq!(a.test.ids(), b.test.ids());
        let mut all: Vec<&str> = a.aux.ids();
        all.extend(a.kf.ids());
        all.extend(a.test.ids());
        all.sort_unstable();
        let mut orig = c.ids();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn record_order_does_not_change_assignment() {
        let c = cohort(50);
        let mut rev = c.records().to_vec();
        rev.reverse();
        let r = Cohort::new(rev).unwrap();
        let spec = SplitSpec::default();
        let mut a = split(&c, &spec)
            .unwrap()
            .test
            .ids()
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        let mut b = split(&r, &spec)
            .unwrap()
            .test
            .ids()
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
