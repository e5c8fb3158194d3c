use serde::{Deserialize, Deserializer, Serialize};

/// Axis-aligned box `(x, y, w, h)` in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// One ground-truth box (no score) or prediction (with score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(deserialize_with = "image_id_from_any")]
    pub image_id: String,
    pub category_id: i64,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Which side of the evaluation a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    GroundTruth,
    Prediction,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("bbox {0:?} must have finite coordinates and positive width and height")]
    BadBox([f64; 4]),
    #[error("ground-truth record carries a score")]
    UnexpectedScore,
    #[error("prediction has no score")]
    MissingScore,
    #[error("score {0} outside [0, 1]")]
    ScoreRange(f64),
}

impl DetectionRecord {
    pub fn ground_truth(image_id: impl Into<String>, category_id: i64, bbox: BBox) -> Self {
        Self {
            image_id: image_id.into(),
            category_id,
            bbox,
            score: None,
        }
    }

    pub fn prediction(image_id: impl Into<String>, category_id: i64, bbox: BBox, score: f64) -> Self {
        Self {
            image_id: image_id.into(),
            category_id,
            bbox,
            score: Some(score),
        }
    }

    pub fn area(&self) -> f64 {
        self.bbox.area()
    }

    /// Score used for ranking; ground truth ranks as zero.
    pub fn rank_score(&self) -> f64 {
        self.score.unwrap_or(0.0)
    }

    pub fn check(&self, kind: RecordKind) -> Result<(), RecordError> {
        if !self.bbox.is_valid() {
            return Err(RecordError::BadBox(self.bbox.into()));
        }
        match (kind, self.score) {
            (RecordKind::GroundTruth, Some(_)) => Err(RecordError::UnexpectedScore),
            (RecordKind::Prediction, None) => Err(RecordError::MissingScore),
            (RecordKind::Prediction, Some(s)) if !(0.0..=1.0).contains(&s) => {
                Err(RecordError::ScoreRange(s))
            }
            _ => Ok(()),
        }
    }
}

fn image_id_from_any<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Int(i64),
        Uint(u64),
    }
    Ok(match Id::deserialize(d)? {
        Id::Text(s) => s,
        Id::Int(i) => i.to_string(),
        Id::Uint(u) => u.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert_eq!(iou(&a, &BBox::new(2.0, 0.0, 1.0, 2.0)), 0.0);
        assert!((iou(&a, &BBox::new(1.0, 1.0, 2.0, 2.0)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn record_checks() {
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        assert!(DetectionRecord::ground_truth("a", 1, b).check(RecordKind::GroundTruth).is_ok());
        assert_eq!(
            DetectionRecord::ground_truth("a", 1, b).check(RecordKind::Prediction),
            Err(RecordError::MissingScore)
        );
        assert_eq!(
            DetectionRecord::prediction("a", 1, b, 0.5).check(RecordKind::GroundTruth),
            Err(RecordError::UnexpectedScore)
        );
        assert_eq!(
            DetectionRecord::prediction("a", 1, b, 1.5).check(RecordKind::Prediction),
            Err(RecordError::ScoreRange(1.5))
        );
        let flat = BBox::new(0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            DetectionRecord::ground_truth("a", 1, flat).check(RecordKind::GroundTruth),
            Err(RecordError::BadBox(_))
        ));
    }
}
