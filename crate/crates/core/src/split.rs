//! Random row-level train/validation/test assignment.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowLabel {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    /// Cross-validation fold count; only meaningful when `val_frac > 0`.
    pub folds: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(
        train_frac: f64,
        val_frac: f64,
        test_frac: f64,
        folds: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
            folds,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 50% train, 10% validation, 40% test with 6 folds over the non-test rows.
    pub fn with_validation(seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.5,
            val_frac: 0.1,
            test_frac: 0.4,
            folds: 6,
            seed,
        }
    }

    /// 60% train, 40% test.
    pub fn without_validation(seed: u64) -> Self {
        SplitSpec {
            train_frac: 0.6,
            val_frac: 0.0,
            test_frac: 0.4,
            folds: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidSplit(format!(
                "fractions {fracs:?} outside [0, 1]"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSplit(format!(
                "fractions sum to {sum}, not 1"
            )));
        }
        if self.folds == 0 {
            return Err(Error::InvalidSplit("folds must be positive".into()));
        }
        if self.val_frac > 0.0 && self.folds < 2 {
            return Err(Error::InvalidSplit(format!(
                "validation requires at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }

    pub fn has_validation(&self) -> bool {
        self.val_frac > 0.0
    }
}

/// Per-row label produced by [`make_split`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    labels: Vec<RowLabel>,
    folds: usize,
}

impl SplitAssignment {
    pub fn from_labels(labels: Vec<RowLabel>, folds: usize) -> Self {
        SplitAssignment { labels, folds }
    }

    pub fn labels(&self) -> &[RowLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    /// Row indices carrying `label`, ascending.
    pub fn rows(&self, label: RowLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Train and validation rows, ascending.
    pub fn non_test_rows(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != RowLabel::Test)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn count(&self, label: RowLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Largest-remainder apportionment of `n` rows to the three fractions, so
/// every count is within one row of `n * frac`.
fn apportion(n: usize, fracs: [f64; 3]) -> [usize; 3] {
    let exact = fracs.map(|f| f * n as f64);
    let mut counts = exact.map(|e| e.floor() as usize);
    let mut assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < n {
        counts[order[i % 3]] += 1;
        assigned += 1;
        i += 1;
    }
    counts
}

/// Uniformly random assignment of `n_rows` rows, deterministic in
/// `(n_rows, spec)`.
pub fn make_split(n_rows: usize, spec: &SplitSpec) -> Result<SplitAssignment> {
    spec.validate()?;
    if n_rows == 0 || n_rows < spec.folds {
        return Err(Error::InvalidSplit(format!(
            "{n_rows} rows cannot be split into {} folds",
            spec.folds
        )));
    }
    let [n_train, n_val, n_test] =
        apportion(n_rows, [spec.train_frac, spec.val_frac, spec.test_frac]);
    let mut labels = Vec::with_capacity(n_rows);
    labels.extend(std::iter::repeat_n(RowLabel::Train, n_train));
    labels.extend(std::iter::repeat_n(RowLabel::Val, n_val));
    labels.extend(std::iter::repeat_n(RowLabel::Test, n_test));
    let mut rng = rng::seeded(spec.seed);
    labels.shuffle(&mut rng);
    Ok(SplitAssignment {
        labels,
        folds: spec.folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_proportions() {
        let a = make_split(100, &SplitSpec::with_validation(7)).unwrap();
        assert_eq!(a.count(RowLabel::Train), 50);
        assert_eq!(a.count(RowLabel::Val), 10);
        assert_eq!(a.count(RowLabel::Test), 40);
    }

    #[test]
    fn degenerate_all_train() {
        let spec = SplitSpec::new(1.0, 0.0, 0.0, 1, 0).unwrap();
        let a = make_split(10, &spec).unwrap();
        assert!(a.labels().iter().all(|&l| l == RowLabel::Train));
    }

    #[test]
    fn deterministic() {
        let spec = SplitSpec::with_validation(11);
        assert_eq!(
            make_split(100, &spec).unwrap(),
            make_split(100, &spec).unwrap()
        );
    }

    #[test]
    fn seeds_differ() {
        let base = make_split(100, &SplitSpec::with_validation(0)).unwrap();
        for seed in 1..=100 {
            let other = make_split(100, &SplitSpec::with_validation(seed)).unwrap();
            assert_ne!(base.labels(), other.labels(), "seed {seed}");
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(
            SplitSpec::new(0.5, 0.1, 0.3, 6, 0),
            Err(Error::InvalidSplit(_))
        ));
        assert!(SplitSpec::new(0.5, 0.1, 0.4, 1, 0).is_err());
        assert!(SplitSpec::new(1.2, -0.2, 0.0, 1, 0).is_err());
        assert!(matches!(
            make_split(3, &SplitSpec::with_validation(0)),
            Err(Error::InvalidSplit(_))
        ));
    }

    proptest! {
        #[test]
        fn counts_within_one_row(n in 6usize..500, a in 0.0f64..1.0, b in 0.0f64..1.0, seed in any::<u64>()) {
            let (a, b) = if a + b > 1.0 { (a / 2.0, b / 2.0) } else { (a, b) };
            let c = 1.0 - a - b;
            let spec = SplitSpec { train_frac: a, val_frac: b, test_frac: c, folds: 2, seed };
            let s = make_split(n, &spec).unwrap();
            prop_assert_eq!(s.len(), n);
            for (label, frac) in [(RowLabel::Train, a), (RowLabel::Val, b), (RowLabel::Test, c)] {
                let want = frac * n as f64;
                prop_assert!((s.count(label) as f64 - want).abs() <= 1.0);
            }
        }
    }
}
