//! Tagging, decoding, detection and alignment of suspect geometry.
//!
//! The verifier holds the original field `F` and the layout. Each suspect
//! point is tagged with the sign of `F` there; a partition decodes to the
//! majority of its tags, and detection counts points whose tag matches the
//! bit embedded in their partition.

mod align;
mod transform;

pub use align::{align, AlignConfig, Alignment};
pub use transform::SimilarityTransform;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::field::ScalarField;
use crate::partition::{PartitionIndex, PartitionLayout};
use crate::{message, Error, Result, Vec3};

/// Field values at or below this tag as bit 0.
pub const TAG_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tag {
    pub partition: PartitionIndex,
    pub bit: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TagSet {
    pub tags: Vec<Tag>,
    /// Points at the origin or outside the field domain.
    pub skipped: usize,
}

/// Tags each point with the sign of `F` (1 when `F ≥ 1e-12`).
pub fn tag_points<F: ScalarField + ?Sized>(points: &[Vec3], base: &F, layout: &PartitionLayout) -> TagSet {
    let tags: Vec<Option<Tag>> = points
        .par_iter()
        .map(|p| {
            let partition = layout.partition_of(p).ok()?;
            let f = base.eval(p).ok()?;
            Some(Tag {
                partition,
                bit: f >= TAG_THRESHOLD,
            })
        })
        .collect();
    let skipped = tags.iter().filter(|t| t.is_none()).count();
    if skipped > 0 {
        log::warn!("tagging skipped {skipped} of {} points", points.len());
    }
    TagSet {
        tags: tags.into_iter().flatten().collect(),
        skipped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub count_1: usize,
    pub count_0: usize,
}

impl Tally {
    /// Majority bit; `None` on a tie or an empty partition.
    pub fn majority(&self) -> Option<bool> {
        match self.count_1.cmp(&self.count_0) {
            std::cmp::Ordering::Greater => Some(true),
            std::cmp::Ordering::Less => Some(false),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoding {
    /// Per partition in `i·N_s + j` order.
    pub tallies: Vec<Tally>,
    pub decoded: Vec<Option<bool>>,
    pub decodable: usize,
    pub correct: usize,
    /// Fraction of decodable partitions matching the embedded bit.
    pub bit_accuracy: f64,
    /// Message estimate by majority over each slot's decodable repetitions.
    pub message: Vec<Option<bool>>,
}

impl Decoding {
    pub fn undecodable_partitions(&self) -> usize {
        self.decoded.len() - self.decodable
    }

    /// Hex form of the message estimate, undecided bits as 0.
    pub fn message_hex(&self) -> String {
        let bits: Vec<bool> = self.message.iter().map(|b| b.unwrap_or(false)).collect();
        message::to_hex(&bits)
    }
}

pub fn tally(tags: &[Tag], layout: &PartitionLayout) -> Vec<Tally> {
    let mut t = vec![Tally::default(); layout.n_partitions()];
    for tag in tags {
        let c = &mut t[layout.flat(tag.partition)];
        if tag.bit {
            c.count_1 += 1;
        } else {
            c.count_0 += 1;
        }
    }
    t
}

/// Per-partition majority decoding.
pub fn decode_tags(tags: &[Tag], layout: &PartitionLayout) -> Result<Decoding> {
    let tallies = tally(tags, layout);
    let decoded: Vec<Option<bool>> = tallies.iter().map(Tally::majority).collect();
    let mut votes = vec![Tally::default(); layout.n_m()];
    let mut decodable = 0;
    let mut correct = 0;
    for (k, d) in decoded.iter().enumerate() {
        let Some(bit) = *d else { continue };
        let idx = layout.unflat(k);
        decodable += 1;
        correct += (bit == layout.bit_of_partition(idx)) as usize;
        let v = &mut votes[layout.message_slot(idx)];
        if bit {
            v.count_1 += 1;
        } else {
            v.count_0 += 1;
        }
    }
    if decodable == 0 {
        return Err(Error::UndecodableMessage);
    }
    Ok(Decoding {
        tallies,
        decoded,
        decodable,
        correct,
        bit_accuracy: correct as f64 / decodable as f64,
        message: votes.iter().map(Tally::majority).collect(),
    })
}

pub fn decode<F: ScalarField + ?Sized>(points: &[Vec3], base: &F, layout: &PartitionLayout) -> Result<Decoding> {
    decode_tags(&tag_points(points, base, layout).tags, layout)
}

/// `z = 2(s - N_v/2)/√N_v`; zero when there are no points.
pub fn z_score(matches: usize, n_points: usize) -> f64 {
    if n_points == 0 {
        return 0.0;
    }
    let n = n_points as f64;
    2.0 * (matches as f64 - n / 2.0) / n.sqrt()
}

/// One-sided standard-normal critical value at level `alpha`.
pub fn z_threshold(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Watermark present.
    Reject,
    Accept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub n_points: usize,
    pub matches: usize,
    pub z_score: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub bit_accuracy: Option<f64>,
    pub decoded_message_hex: Option<String>,
    pub undecodable_partitions: usize,
    pub skipped_points: usize,
    pub decoded_bits: Vec<Option<bool>>,
    pub tallies: Vec<Tally>,
}

/// Counts per-point matches against the embedded bits and runs the z-test.
pub fn detect_tags(tags: &TagSet, layout: &PartitionLayout, alpha: f64) -> Result<DetectionReport> {
    let threshold = z_threshold(alpha)?;
    let n_points = tags.tags.len();
    let matches = tags
        .tags
        .iter()
        .filter(|t| t.bit == layout.bit_of_partition(t.partition))
        .count();
    let z = z_score(matches, n_points);
    let decoding = decode_tags(&tags.tags, layout).ok();
    Ok(DetectionReport {
        n_points,
        matches,
        z_score: z,
        alpha,
        threshold,
        verdict: if z > threshold { Verdict::Reject } else { Verdict::Accept },
        bit_accuracy: decoding.as_ref().map(|d| d.bit_accuracy),
        decoded_message_hex: decoding.as_ref().map(Decoding::message_hex),
        undecodable_partitions: decoding
            .as_ref()
            .map_or(layout.n_partitions(), Decoding::undecodable_partitions),
        skipped_points: tags.skipped,
        decoded_bits: decoding
            .as_ref()
            .map_or_else(|| vec![None; layout.n_partitions()], |d| d.decoded.clone()),
        tallies: tally(&tags.tags, layout),
    })
}

pub fn detect<F: ScalarField + ?Sized>(
    points: &[Vec3],
    base: &F,
    layout: &PartitionLayout,
    alpha: f64,
) -> Result<DetectionReport> {
    detect_tags(&tag_points(points, base, layout), layout, alpha)
}
