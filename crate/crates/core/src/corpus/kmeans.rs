//! k-means dictionaries and nearest-centroid quantization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{group_features, validate_features, Clip, Corpus, FeatureClip, VideoDoc};
use crate::error::{CatmError, Result};

/// A codebook of `k` centroids in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centroids.is_empty() {
            return Err(CatmError::InvalidInput(
                "dictionary has no centroids".into(),
            ));
        }
        for c in &self.centroids {
            if c.len() != self.dim {
                return Err(CatmError::DimensionMismatch {
                    expected: self.dim,
                    got: c.len(),
                });
            }
        }
        Ok(())
    }

    /// Index of the closest centroid; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop when inertia improves by less than this fraction.
    pub rel_tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 100,
            rel_tol: 1e-4,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    let cmp = |a: &&Vec<f64>, b: &&Vec<f64>| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    sorted.sort_by(cmp);
    sorted.dedup_by(|a, b| cmp(&&**a, &&**b).is_eq());
    sorted.len()
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = dist.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters `points` into `k` centroids with k-means++ seeding and Lloyd
/// iterations. Deterministic for a given seed.
pub fn build_dictionary(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Dictionary> {
    build_dictionary_with(points, k, seed, KMeansOptions::default())
}

pub fn build_dictionary_with(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: KMeansOptions,
) -> Result<Dictionary> {
    if k == 0 {
        return Err(CatmError::InvalidInput(
            "dictionary size must be positive".into(),
        ));
    }
    let dim = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| CatmError::InvalidInput("no feature vectors to cluster".into()))?;
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(CatmError::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(CatmError::InvalidInput(format!(
            "dictionary size {k} exceeds the {distinct} distinct feature vectors"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(points, k, &mut rng);
    let mut assign = vec![0usize; points.len()];
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..opts.max_iter {
        let mut inertia = 0.0;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(&centroids, p);
            assign[i] = c;
            dists[i] = d;
            inertia += d;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        // Empty clusters take the point currently worst served by its centroid.
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = std::mem::take(&mut sums[c]);
            } else {
                let far = (0..points.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("k <= number of points");
                taken[far] = true;
                dists[far] = 0.0;
                centroids[c] = points[far].clone();
            }
        }

        let converged = prev_inertia.is_finite()
            && (prev_inertia - inertia).abs() <= opts.rel_tol * prev_inertia.max(f64::MIN_POSITIVE);
        prev_inertia = inertia;
        if converged || inertia == 0.0 {
            break;
        }
    }
    Ok(Dictionary { dim, centroids })
}

/// Maps every feature clip to its nearest human and object words.
///
/// Without an object dictionary every clip gets object word 0 and the corpus
/// declares a single object word.
pub fn quantize(
    features: &[FeatureClip],
    dict_h: &Dictionary,
    dict_o: Option<&Dictionary>,
) -> Result<Corpus> {
    validate_features(features)?;
    dict_h.validate()?;
    if let Some(d) = dict_o {
        d.validate()?;
    }
    let mut docs = Vec::new();
    for (doc_id, clips) in group_features(features) {
        let mut out = Vec::with_capacity(clips.len());
        for f in &clips {
            if f.human_feat.len() != dict_h.dim {
                return Err(CatmError::DimensionMismatch {
                    expected: dict_h.dim,
                    got: f.human_feat.len(),
                });
            }
            let object_word = match dict_o {
                Some(d) if f.object_feat.len() != d.dim => {
                    return Err(CatmError::DimensionMismatch {
                        expected: d.dim,
                        got: f.object_feat.len(),
                    })
                }
                Some(d) => d.nearest(&f.object_feat),
                None => 0,
            };
            out.push(Clip {
                human_word: dict_h.nearest(&f.human_feat),
                object_word,
                t: f.t,
            });
        }
        let frame_spans = clips
            .iter()
            .map(|f| f.frame_span)
            .collect::<Option<Vec<_>>>();
        docs.push(VideoDoc {
            doc_id,
            clips: out,
            frame_spans,
            gt_labels: None,
        });
    }
    Corpus::new(docs, dict_h.len(), dict_o.map_or(1, Dictionary::len))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(center: [f64; 2], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                vec![
                    center[0] + rng.random_range(-0.5..0.5),
                    center[1] + rng.random_range(-0.5..0.5),
                ]
            })
            .collect()
    }

    #[test]
    fn separates_two_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = cloud([0.0, 0.0], 50, &mut rng);
        pts.extend(cloud([10.0, 10.0], 50, &mut rng));
        let dict = build_dictionary(&pts, 2, 3).unwrap();
        let mut inside = [false, false];
        for c in &dict.centroids {
            if c.iter().all(|x| (-0.5..=0.5).contains(x)) {
                inside[0] = true;
            }
            if c.iter().all(|x| (9.5..=10.5).contains(x)) {
                inside[1] = true;
            }
        }
        assert_eq!(inside, [true, true]);
    }

    #[test]
    fn one_centroid_per_distinct_point() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let dict = build_dictionary(&pts, 6, 0).unwrap();
        for p in &pts {
            let c = &dict.centroids[dict.nearest(p)];
            assert_eq!(sq_dist(c, p), 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random(), rng.random(), rng.random()])
            .collect();
        let a = serde_json::to_string(&build_dictionary(&pts, 8, 11).unwrap()).unwrap();
        let b = serde_json::to_string(&build_dictionary(&pts, 8, 11).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(build_dictionary(&pts, 3, 0).is_err());
        assert!(build_dictionary(&pts, 2, 0).is_ok());
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let dict = Dictionary {
            dim: 1,
            centroids: vec![
                vec![10.0],
                vec![20.0],
                vec![-1.0],
                vec![30.0],
                vec![40.0],
                vec![1.0],
            ],
        };
        assert_eq!(dict.nearest(&[0.0]), 2);
        assert_eq!(dict.nearest(&[30.0]), 3);
    }

    #[test]
    fn centroids_quantize_to_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random(), rng.random()]).collect();
        let dict = build_dictionary(&pts, 10, 1).unwrap();
        let feats: Vec<FeatureClip> = dict
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| FeatureClip {
                doc_id: "d".into(),
                human_feat: c.clone(),
                object_feat: vec![],
                t: (i as f64 + 0.5) / 10.0,
                frame_span: None,
            })
            .collect();
        let corpus = quantize(&feats, &dict, None).unwrap();
        let ids: Vec<usize> = corpus.docs[0].clips.iter().map(|c| c.human_word).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        assert_eq!(corpus.n_object_words, 1);
    }
}
