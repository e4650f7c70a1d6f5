//! Clipification of frame streams and skeleton-trajectory features.

use crate::error::{CatmError, Result};

pub const N_JOINTS: usize = 25;

/// 3D coordinates of every tracked joint in one frame.
pub type Frame = [[f64; 3]; N_JOINTS];

const TIMESTAMP_EPS: f64 = 1e-6;

/// Kinect v2 bone list: 24 edges forming a tree over the 25 joints.
pub fn kinect_v2_edges() -> Vec<(usize, usize)> {
    vec![
        (0, 1),
        (1, 20),
        (20, 2),
        (2, 3),
        (20, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (7, 21),
        (6, 22),
        (20, 8),
        (8, 9),
        (9, 10),
        (10, 11),
        (11, 23),
        (10, 24),
        (0, 12),
        (12, 13),
        (13, 14),
        (14, 15),
        (0, 16),
        (16, 17),
        (17, 18),
        (18, 19),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonStream {
    pub frames: Vec<Frame>,
    /// Body parts as joint-index pairs.
    pub edges: Vec<(usize, usize)>,
}

impl SkeletonStream {
    pub fn new(frames: Vec<Frame>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= N_JOINTS || *b >= N_JOINTS) {
            return Err(CatmError::InvalidInput(format!(
                "edge ({a}, {b}) references a joint outside 0..{N_JOINTS}"
            )));
        }
        Ok(SkeletonStream { frames, edges })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Half-open frame window `[start, end)` with its normalized timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipWindow {
    pub start: usize,
    pub end: usize,
    pub t: f64,
}

/// Slides a window of `clip_len` frames over the stream with step `stride`.
/// A window's timestamp is its center frame over the stream length, clamped
/// into the open unit interval.
pub fn clipify(stream: &SkeletonStream, clip_len: usize, stride: usize) -> Result<Vec<ClipWindow>> {
    clip_windows(stream.len(), clip_len, stride)
}

pub fn clip_windows(n_frames: usize, clip_len: usize, stride: usize) -> Result<Vec<ClipWindow>> {
    if clip_len == 0 || stride == 0 {
        return Err(CatmError::InvalidInput(
            "clip length and stride must be positive".into(),
        ));
    }
    if n_frames < clip_len {
        return Err(CatmError::StreamTooShort {
            frames: n_frames,
            clip_len,
        });
    }
    let total = n_frames as f64;
    Ok((0..=n_frames - clip_len)
        .step_by(stride)
        .map(|start| {
            let center = start as f64 + clip_len as f64 / 2.0;
            ClipWindow {
                start,
                end: start + clip_len,
                t: (center / total).clamp(TIMESTAMP_EPS, 1.0 - TIMESTAMP_EPS),
            }
        })
        .collect())
}

/// Pairs of body parts that share a joint, as indices into `edges`.
fn connected_part_pairs(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            if a == c || a == d || b == c || b == d {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn sub(x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
}

fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Cosine of the angle between every connected pair of body parts. A
/// zero-length body part yields cosine 0.
fn part_angle_cosines(
    frame: &Frame,
    edges: &[(usize, usize)],
    pairs: &[(usize, usize)],
) -> Vec<f64> {
    let parts: Vec<[f64; 3]> = edges
        .iter()
        .map(|&(i, j)| sub(frame[i], frame[j]))
        .collect();
    pairs
        .iter()
        .map(|&(p, q)| {
            let (u, v) = (parts[p], parts[q]);
            let denom = norm(u) * norm(v);
            if denom == 0.0 {
                0.0
            } else {
                (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / denom
            }
        })
        .collect()
}

/// Motion and offset features of a window.
///
/// For every frame after the first, appends in order: the 25 joint
/// displacements to the previous frame, the angle-cosine changes to the
/// previous frame, the 25 joint displacements to the first frame and the
/// angle-cosine changes to the first frame.
pub fn skeleton_features(window: &[Frame], edges: &[(usize, usize)]) -> Result<Vec<f64>> {
    if window.len() < 2 {
        return Err(CatmError::InvalidInput(
            "a feature window needs at least two frames".into(),
        ));
    }
    if edges.is_empty() {
        return Err(CatmError::InvalidInput("edge list is empty".into()));
    }
    let pairs = connected_part_pairs(edges);
    let angles: Vec<Vec<f64>> = window
        .iter()
        .map(|f| part_angle_cosines(f, edges, &pairs))
        .collect();
    let per_frame = 2 * (N_JOINTS + pairs.len());
    let mut out = Vec::with_capacity(per_frame * (window.len() - 1));
    for u in 1..window.len() {
        for reference in [u - 1, 0] {
            out.extend((0..N_JOINTS).map(|i| norm(sub(window[u][i], window[reference][i]))));
            out.extend(
                angles[u]
                    .iter()
                    .zip(&angles[reference])
                    .map(|(a, b)| (a - b).abs()),
            );
        }
    }
    Ok(out)
}
