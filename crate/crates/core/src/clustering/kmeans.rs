use std::ops::RangeInclusive;

use rand::Rng as _;

use super::dba::{argmin, dba};
use super::dtw::{dtw_values, DtwConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Independent seedings; the run with the lowest inertia is kept.
    pub restarts: usize,
    /// DBA refinement passes per centroid update.
    pub dba_iters: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 50,
            restarts: 5,
            dba_iters: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum over series of the DTW cost to their own centroid.
    pub inertia: f64,
    /// Calinski-Harabasz index; `None` when `k < 2` or `k ≥ n`.
    pub ch_score: Option<f64>,
    /// Inertia after every centroid update of the retained run.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Centroids as series named `centroid0`, `centroid1`, … on the grid of
    /// `template`.
    pub fn centroid_series(&self, template: &TimeSeries) -> Result<Vec<TimeSeries>> {
        self.centroids
            .iter()
            .enumerate()
            .map(|(c, v)| {
                TimeSeries::new(
                    format!("centroid{c}"),
                    template.t0(),
                    template.dt(),
                    v.clone(),
                )
            })
            .collect()
    }
}

/// Outcome of scanning a range of `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub best: ClusteringResult,
    /// `(k, Calinski-Harabasz)` for every scanned `k`, ascending.
    pub curve: Vec<(usize, f64)>,
}

/// Series values plus their pairwise DTW matrix, shared across restarts and
/// candidate `k`.
struct Corpus<'a> {
    values: Vec<&'a [f64]>,
    pairwise: Vec<f64>,
    cfg: DtwConfig,
}

impl<'a> Corpus<'a> {
    fn new(series: &'a [TimeSeries], cfg: &DtwConfig) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::TooFewSeries { k: 0, n: 0 });
        }
        if let Some(s) = series.iter().find(|s| s.len() < 2) {
            return Err(Error::InvalidSeries(format!(
                "{:?} is shorter than 2 samples",
                s.id()
            )));
        }
        let values: Vec<&[f64]> = series.iter().map(TimeSeries::values).collect();
        let n = values.len();
        let mut pairwise = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = dtw_values(values[i], values[j], cfg)?;
                pairwise[i * n + j] = d;
                pairwise[j * n + i] = d;
            }
        }
        Ok(Corpus {
            values,
            pairwise,
            cfg: *cfg,
        })
    }

    fn n(&self) -> usize {
        self.values.len()
    }

    fn pair(&self, i: usize, j: usize) -> f64 {
        self.pairwise[i * self.n() + j]
    }

    fn medoid_of(&self, members: &[usize]) -> usize {
        let totals: Vec<f64> = members
            .iter()
            .map(|&i| members.iter().map(|&j| self.pair(i, j)).sum())
            .collect();
        members[argmin(&totals)]
    }

    fn cost_to(&self, members: &[usize], centroid: &[f64]) -> Result<f64> {
        members
            .iter()
            .map(|&i| dtw_values(self.values[i], centroid, &self.cfg))
            .sum()
    }

    fn barycenter(&self, dba_iters: usize) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.n()).collect();
        let m = self.medoid_of(&all);
        dba(&self.values, self.values[m], dba_iters, &self.cfg)
    }

    /// k-means++ seeding with DTW costs as weights.
    fn seed_centers(&self, k: usize, rng: &mut rng::Rng) -> Vec<usize> {
        let n = self.n();
        let mut centers = vec![rng.random_range(0..n)];
        let mut nearest: Vec<f64> = (0..n).map(|i| self.pair(i, centers[0])).collect();
        while centers.len() < k {
            let total: f64 = nearest.iter().sum();
            let pick = if total > 0.0 {
                let mut target = rng.random::<f64>() * total;
                let mut chosen = None;
                for (i, &w) in nearest.iter().enumerate() {
                    if w > 0.0 {
                        chosen = Some(i);
                        if target < w {
                            break;
                        }
                        target -= w;
                    }
                }
                chosen.expect("positive total weight")
            } else {
                (0..n).find(|i| !centers.contains(i)).expect("k ≤ n")
            };
            centers.push(pick);
            for (i, w) in nearest.iter_mut().enumerate() {
                *w = w.min(self.pair(i, pick));
            }
        }
        centers
    }

    fn run(&self, k: usize, opts: &KMeansOptions, seed: u64) -> Result<ClusteringResult> {
        let n = self.n();
        let mut rng = rng::seeded(seed);
        let mut centroids: Vec<Vec<f64>> = self
            .seed_centers(k, &mut rng)
            .into_iter()
            .map(|i| self.values[i].to_vec())
            .collect();
        let mut assignments: Vec<usize> = Vec::new();
        let mut inertia_trace = Vec::new();
        let mut iterations = 0;

        for _ in 0..opts.max_iter.max(1) {
            // assignment step, ties to the lowest centroid index
            let mut dist = vec![0.0; n];
            let mut next = vec![0; n];
            for i in 0..n {
                let costs = centroids
                    .iter()
                    .map(|c| dtw_values(self.values[i], c, &self.cfg))
                    .collect::<Result<Vec<_>>>()?;
                next[i] = argmin(&costs);
                dist[i] = costs[next[i]];
            }
            // empty clusters take the series farthest from its centroid
            loop {
                let mut sizes = vec![0usize; k];
                for &a in &next {
                    sizes[a] += 1;
                }
                let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                    break;
                };
                let donor = (0..n)
                    .filter(|&i| sizes[next[i]] > 1)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k ≤ n leaves a cluster with two members");
                next[donor] = empty;
                dist[donor] = 0.0;
                centroids[empty] = self.values[donor].to_vec();
            }
            if next == assignments {
                break;
            }
            assignments = next;
            iterations += 1;

            // update step: DBA from the medoid, with the warm-started DBA and
            // the current centroid as fallbacks so inertia never increases
            let mut inertia = 0.0;
            for (c, centroid) in centroids.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == c).collect();
                let member_values: Vec<&[f64]> = members.iter().map(|&i| self.values[i]).collect();
                let from_medoid = dba(
                    &member_values,
                    self.values[self.medoid_of(&members)],
                    opts.dba_iters,
                    &self.cfg,
                )?;
                let warm = dba(&member_values, centroid, opts.dba_iters, &self.cfg)?;
                let mut best_cost = self.cost_to(&members, centroid)?;
                let mut best: Option<Vec<f64>> = None;
                for candidate in [from_medoid, warm] {
                    let cost = self.cost_to(&members, &candidate)?;
                    if cost <= best_cost {
                        best_cost = cost;
                        best = Some(candidate);
                        break;
                    }
                }
                if let Some(b) = best {
                    *centroid = b;
                }
                inertia += best_cost;
            }
            if let Some(&last) = inertia_trace.last() {
                debug_assert!(
                    inertia <= last * (1.0 + 1e-12) + 1e-12,
                    "inertia rose from {last} to {inertia}"
                );
            }
            inertia_trace.push(inertia);
        }

        let inertia = (0..n)
            .map(|i| dtw_values(self.values[i], &centroids[assignments[i]], &self.cfg))
            .sum::<Result<f64>>()?;
        Ok(ClusteringResult {
            k,
            assignments,
            centroids,
            inertia,
            ch_score: None,
            inertia_trace,
            iterations,
        })
    }

    fn best_of_restarts(
        &self,
        k: usize,
        opts: &KMeansOptions,
        seed: u64,
    ) -> Result<ClusteringResult> {
        if k == 0 || k > self.n() {
            return Err(Error::TooFewSeries { k, n: self.n() });
        }
        let mut best: Option<ClusteringResult> = None;
        for r in 0..opts.restarts.max(1) {
            let run = self.run(k, opts, rng::derive_seed(seed, r as u64))?;
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one restart"))
    }

    fn calinski_harabasz(&self, result: &ClusteringResult, barycenter: &[f64]) -> Result<f64> {
        let (n, k) = (self.n(), result.k);
        if k < 2 || k >= n || result.assignments.len() != n {
            return Err(Error::DegenerateK { k, n });
        }
        let within = (0..n)
            .map(|i| {
                dtw_values(
                    self.values[i],
                    &result.centroids[result.assignments[i]],
                    &self.cfg,
                )
            })
            .sum::<Result<f64>>()?;
        let sizes = result.cluster_sizes();
        let between = result
            .centroids
            .iter()
            .zip(&sizes)
            .map(|(c, &size)| Ok(size as f64 * dtw_values(c, barycenter, &self.cfg)?))
            .sum::<Result<f64>>()?;
        if within == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
    }
}

/// DTW k-means with the default restart and DBA settings.
pub fn kmeans_dtw(
    series: &[TimeSeries],
    k: usize,
    cfg: &DtwConfig,
    max_iter: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    let opts = KMeansOptions {
        max_iter,
        ..Default::default()
    };
    kmeans_dtw_with(series, k, cfg, &opts, seed)
}

pub fn kmeans_dtw_with(
    series: &[TimeSeries],
    k: usize,
    cfg: &DtwConfig,
    opts: &KMeansOptions,
    seed: u64,
) -> Result<ClusteringResult> {
    let corpus = Corpus::new(series, cfg)?;
    let mut result = corpus.best_of_restarts(k, opts, seed)?;
    if k >= 2 && k < corpus.n() {
        let barycenter = corpus.barycenter(opts.dba_iters)?;
        result.ch_score = Some(corpus.calinski_harabasz(&result, &barycenter)?);
    }
    Ok(result)
}

/// Calinski-Harabasz index with DTW dispersions: between-cluster cost is
/// `Σ_c n_c·DTW(centroid_c, global barycenter)`. Returns `+∞` when the
/// within-cluster cost is zero.
pub fn calinski_harabasz(
    series: &[TimeSeries],
    result: &ClusteringResult,
    cfg: &DtwConfig,
) -> Result<f64> {
    let n = series.len();
    if result.k < 2 || result.k >= n {
        return Err(Error::DegenerateK { k: result.k, n });
    }
    let corpus = Corpus::new(series, cfg)?;
    let barycenter = corpus.barycenter(KMeansOptions::default().dba_iters)?;
    corpus.calinski_harabasz(result, &barycenter)
}

/// Runs DTW k-means for every `k` in range and keeps the result with the
/// largest Calinski-Harabasz index, ties going to the smaller `k`.
pub fn select_k(
    series: &[TimeSeries],
    k_range: RangeInclusive<usize>,
    cfg: &DtwConfig,
    opts: &KMeansOptions,
    seed: u64,
) -> Result<KSelection> {
    let n = series.len();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi + 1 > n || lo > hi {
        return Err(Error::DegenerateK {
            k: if lo < 2 { lo } else { hi },
            n,
        });
    }
    let corpus = Corpus::new(series, cfg)?;
    let barycenter = corpus.barycenter(opts.dba_iters)?;
    let mut curve = Vec::with_capacity(hi - lo + 1);
    let mut best: Option<ClusteringResult> = None;
    for k in k_range {
        let mut result = corpus.best_of_restarts(k, opts, rng::derive_seed(seed, k as u64))?;
        let ch = corpus.calinski_harabasz(&result, &barycenter)?;
        result.ch_score = Some(ch);
        curve.push((k, ch));
        if best
            .as_ref()
            .is_none_or(|b| ch > b.ch_score.unwrap_or(f64::NEG_INFINITY))
        {
            best = Some(result);
        }
    }
    Ok(KSelection {
        best: best.expect("non-empty range"),
        curve,
    })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().map(|&m| pairs(m)).sum();
    let rows: f64 = (0..ka)
        .map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let cols: f64 = (0..kb)
        .map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = pairs(n as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::synth_template_corpus;

    fn cfg() -> DtwConfig {
        DtwConfig::default()
    }

    fn ts(id: &str, v: &[f64]) -> TimeSeries {
        TimeSeries::hourly(id, v.to_vec()).unwrap()
    }

    #[test]
    fn single_cluster_uses_barycenter() {
        let (series, _) = synth_template_corpus(4, 24, 0.05, 1);
        let r = kmeans_dtw(&series, 1, &cfg(), 20, 0).unwrap();
        assert!(r.assignments.iter().all(|&a| a == 0));
        assert_eq!(r.ch_score, None);
        let direct: f64 = series
            .iter()
            .map(|s| dtw_values(s.values(), &r.centroids[0], &cfg()).unwrap())
            .sum();
        assert!((direct - r.inertia).abs() < 1e-9);
    }

    #[test]
    fn k_equal_n_gives_zero_inertia() {
        let series: Vec<_> = (0..5)
            .map(|i| ts(&format!("s{i}"), &[i as f64, 2.0 * i as f64, 0.5]))
            .collect();
        let r = kmeans_dtw(&series, 5, &cfg(), 20, 3).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut sorted = r.assignments.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicate_series_still_fill_every_cluster() {
        let series: Vec<_> = (0..4)
            .map(|i| ts(&format!("s{i}"), &[1.0, 2.0, 3.0]))
            .collect();
        let r = kmeans_dtw(&series, 3, &cfg(), 10, 0).unwrap();
        assert!(r.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn too_many_clusters() {
        let series = vec![ts("a", &[1.0, 2.0]), ts("b", &[2.0, 1.0])];
        assert!(matches!(
            kmeans_dtw(&series, 3, &cfg(), 10, 0),
            Err(Error::TooFewSeries { .. })
        ));
        assert!(matches!(
            kmeans_dtw(&series, 0, &cfg(), 10, 0),
            Err(Error::TooFewSeries { .. })
        ));
        assert!(kmeans_dtw(&[ts("a", &[1.0])], 1, &cfg(), 10, 0).is_err());
    }

    #[test]
    fn recovers_templates_with_monotone_inertia() {
        let (series, truth) = synth_template_corpus(10, 48, 0.05, 11);
        let r = kmeans_dtw(&series, 3, &cfg(), 50, 5).unwrap();
        assert!(adjusted_rand_index(&r.assignments, &truth) >= 0.9);
        for w in r.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.inertia_trace);
        }
        let direct: f64 = series
            .iter()
            .zip(&r.assignments)
            .map(|(s, &a)| dtw_values(s.values(), &r.centroids[a], &cfg()).unwrap())
            .sum();
        assert!((direct - r.inertia).abs() <= 1e-9 * (1.0 + direct));
    }

    #[test]
    fn ch_prefers_two_separated_groups() {
        use rand_distr::{Distribution, Normal};
        let mut rng = rng::seeded(42);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut series = Vec::new();
        for i in 0..16 {
            let level = if i % 2 == 0 { 0.0 } else { 5.0 };
            let v: Vec<f64> = (0..12).map(|_| level + noise.sample(&mut rng)).collect();
            series.push(ts(&format!("s{i}"), &v));
        }
        let sel = select_k(&series, 2..=4, &cfg(), &KMeansOptions::default(), 1).unwrap();
        let ch: Vec<f64> = sel.curve.iter().map(|&(_, c)| c).collect();
        assert!(ch[0] > ch[1] && ch[0] > ch[2], "{ch:?}");
        assert_eq!(sel.best.k, 2);
    }

    #[test]
    fn ch_degenerate_cases() {
        let same: Vec<_> = (0..4)
            .map(|i| ts(&format!("s{i}"), &[1.0, 2.0, 1.0]))
            .collect();
        let r = kmeans_dtw(&same, 2, &cfg(), 10, 0).unwrap();
        assert_eq!(calinski_harabasz(&same, &r, &cfg()).unwrap(), f64::INFINITY);

        let distinct: Vec<_> = (0..5)
            .map(|i| ts(&format!("s{i}"), &[i as f64, (i * i) as f64, 1.0]))
            .collect();
        let r = kmeans_dtw(&distinct, 4, &cfg(), 10, 0).unwrap();
        let ch = calinski_harabasz(&distinct, &r, &cfg()).unwrap();
        assert!(ch.is_finite() && ch > 0.0);

        let r1 = kmeans_dtw(&distinct, 1, &cfg(), 10, 0).unwrap();
        assert!(matches!(
            calinski_harabasz(&distinct, &r1, &cfg()),
            Err(Error::DegenerateK { .. })
        ));
        let r5 = kmeans_dtw(&distinct, 5, &cfg(), 10, 0).unwrap();
        assert!(matches!(
            calinski_harabasz(&distinct, &r5, &cfg()),
            Err(Error::DegenerateK { .. })
        ));
    }

    #[test]
    fn select_k_singleton_range_and_bounds() {
        let (series, _) = synth_template_corpus(3, 24, 0.05, 2);
        let sel = select_k(&series, 2..=2, &cfg(), &KMeansOptions::default(), 0).unwrap();
        assert_eq!(sel.best.k, 2);
        assert_eq!(sel.curve.len(), 1);
        assert!(select_k(&series, 1..=3, &cfg(), &KMeansOptions::default(), 0).is_err());
        assert!(select_k(&series, 2..=9, &cfg(), &KMeansOptions::default(), 0).is_err());
    }

    #[test]
    fn ari_reference_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        // sklearn.metrics.adjusted_rand_score([0,0,1,1],[0,0,1,2]) = 0.5714285714285715
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[0, 0, 1, 2]) - 4.0 / 7.0).abs() < 1e-12);
        assert!(adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 1, 2, 0, 1, 2]) < 0.0);
    }
}
