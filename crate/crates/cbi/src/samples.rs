//! Labeled RGB training points and the built-in tissue class ranges.
//!
//! Classifier training data is a list of `(r, g, b, class)` points. Six
//! tissue classes cover the appearance of an IHC stain under brightfield
//! scanning, from slide background through counterstain to strong DAB
//! positivity:
//!
//! | class | tissue       | R range | G range | B range |
//! |-------|--------------|---------|---------|---------|
//! | 0     | background   | 214-247 | 214-247 | 213-247 |
//! | 1     | blue         | 24-208  | 44-217  | 79-228  |
//! | 2     | gray         | 63-221  | 65-221  | 77-226  |
//! | 3     | light brown  | 163-251 | 124-218 | 107-214 |
//! | 4     | medium brown | 136-192 | 87-157  | 70-147  |
//! | 5     | dark brown   | 37-98   | 0-67    | 0-61    |
//!
//! The ranges overlap heavily (blue vs gray in particular), so box
//! membership alone cannot label a pixel. [`oracle_classify`] resolves the
//! ambiguity with a nearest-range-midpoint rule and serves as the
//! independent reference classifier throughout the test suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

/// Number of tissue classes in the built-in table.
pub const NUM_CLASSES: usize = 6;

/// One labeled training point: an 8-bit RGB value and its tissue class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassSample {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    /// Tissue class id in `0..=5`.
    pub class_id: u8,
}

impl ClassSample {
    pub fn new(r: u8, g: u8, b: u8, class_id: u8) -> Result<Self, SampleError> {
        if class_id as usize >= NUM_CLASSES {
            return Err(SampleError::ClassOutOfRange(class_id));
        }
        Ok(Self { r, g, b, class_id })
    }

    pub fn rgb(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

/// Inclusive per-channel bound of a class box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelRange {
    pub lo: u8,
    pub hi: u8,
}

impl ChannelRange {
    pub fn new(lo: u8, hi: u8) -> Self {
        assert!(lo <= hi, "channel range lo must not exceed hi");
        Self { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        (self.lo as f64 + self.hi as f64) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.hi as f64 - self.lo as f64
    }

    pub fn contains(&self, v: u8) -> bool {
        (self.lo..=self.hi).contains(&v)
    }
}

/// Per-class RGB boxes the training data is drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRangeTable {
    ranges: [[ChannelRange; 3]; NUM_CLASSES],
}

impl ClassRangeTable {
    /// The built-in class ranges (see the module table).
    pub fn builtin() -> Self {
        const T: [[(u8, u8); 3]; NUM_CLASSES] = [
            [(214, 247), (214, 247), (213, 247)], // 0 background
            [(24, 208), (44, 217), (79, 228)],    // 1 blue
            [(63, 221), (65, 221), (77, 226)],    // 2 gray
            [(163, 251), (124, 218), (107, 214)], // 3 light brown
            [(136, 192), (87, 157), (70, 147)],   // 4 medium brown
            [(37, 98), (0, 67), (0, 61)],         // 5 dark brown
        ];
        let ranges = T.map(|cls| cls.map(|(lo, hi)| ChannelRange::new(lo, hi)));
        Self { ranges }
    }

    /// Builds a table from raw `(lo, hi)` channel pairs.
    pub fn from_bounds(bounds: [[(u8, u8); 3]; NUM_CLASSES]) -> Self {
        Self {
            ranges: bounds.map(|cls| cls.map(|(lo, hi)| ChannelRange::new(lo, hi))),
        }
    }

    pub fn class_ranges(&self, class_id: u8) -> &[ChannelRange; 3] {
        &self.ranges[class_id as usize]
    }

    /// Range midpoint vector of a class, in raw channel units.
    pub fn midpoint(&self, class_id: u8) -> [f64; 3] {
        let r = &self.ranges[class_id as usize];
        [r[0].midpoint(), r[1].midpoint(), r[2].midpoint()]
    }

    /// Whether a pixel lies inside the class box on all three channels.
    pub fn contains(&self, class_id: u8, rgb: [u8; 3]) -> bool {
        let r = &self.ranges[class_id as usize];
        r[0].contains(rgb[0]) && r[1].contains(rgb[1]) && r[2].contains(rgb[2])
    }
}

/// Reference classifier: nearest class-box midpoint under Euclidean
/// distance on channels normalized by 255, ties to the lower class id.
///
/// This is deliberately independent of the fuzzy classifier and is the
/// ground-truth rule the acceptance tests compare against.
pub fn oracle_classify(table: &ClassRangeTable, rgb: [u8; 3]) -> u8 {
    let mut best = 0u8;
    let mut best_dist = f64::INFINITY;
    for class_id in 0..NUM_CLASSES as u8 {
        let mid = table.midpoint(class_id);
        let mut dist = 0.0;
        for c in 0..3 {
            let d = (rgb[c] as f64 - mid[c]) / 255.0;
            dist += d * d;
        }
        if dist < best_dist {
            best_dist = dist;
            best = class_id;
        }
    }
    best
}

/// Draws `per_class` synthetic samples for every class.
///
/// Each channel is drawn from a normal centered at the range midpoint with
/// sigma = range_width / 4, clamped into the range. Deterministic for a
/// given seed. Output order is class-major, then sample index.
pub fn synth_samples(table: &ClassRangeTable, per_class: usize, seed: u64) -> Vec<ClassSample> {
    assert!(per_class >= 1, "per_class must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * NUM_CLASSES);
    for class_id in 0..NUM_CLASSES as u8 {
        let ranges = table.class_ranges(class_id);
        for _ in 0..per_class {
            let mut ch = [0u8; 3];
            for c in 0..3 {
                ch[c] = truncated_normal_channel(&mut rng, &ranges[c]);
            }
            out.push(ClassSample {
                r: ch[0],
                g: ch[1],
                b: ch[2],
                class_id,
            });
        }
    }
    out
}

pub(crate) fn truncated_normal_channel(rng: &mut ChaCha8Rng, range: &ChannelRange) -> u8 {
    truncated_normal_channel_scaled(rng, range, 4.0)
}

/// Normal draw centered on the range midpoint with sigma = width/divisor,
/// clamped into the range. A degenerate range (lo == hi) returns lo.
pub(crate) fn truncated_normal_channel_scaled(
    rng: &mut ChaCha8Rng,
    range: &ChannelRange,
    divisor: f64,
) -> u8 {
    let lo = range.lo as f64;
    let hi = range.hi as f64;
    if range.lo == range.hi {
        return range.lo;
    }
    let sigma = range.width() / divisor;
    let dist = Normal::new(range.midpoint(), sigma).expect("finite normal parameters");
    let v: f64 = rng.sample(dist);
    v.clamp(lo, hi).round() as u8
}

/// Splits a class-major sample list into per-class head/tail portions:
/// the first `train_per_class` samples of every class go to the first
/// list, the remainder to the second.
pub fn split_per_class(samples: &[ClassSample], train_per_class: usize) -> (Vec<ClassSample>, Vec<ClassSample>) {
    let mut counts = [0usize; NUM_CLASSES];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in samples {
        let k = s.class_id as usize;
        if counts[k] < train_per_class {
            train.push(*s);
        } else {
            test.push(*s);
        }
        counts[k] += 1;
    }
    (train, test)
}

/// Errors raised while parsing or constructing samples.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("missing or malformed header, expected \"r,g,b,class\"")]
    Header,
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("class id {0} out of range 0-5")]
    ClassOutOfRange(u8),
}

/// Parses sample CSV text with header `r,g,b,class`.
///
/// Row numbers in errors count data rows starting at 1. Row order is
/// preserved in the output.
pub fn load_samples(csv_text: &str) -> Result<Vec<ClassSample>, SampleError> {
    let mut lines = csv_text.lines();
    match lines.next() {
        Some(h) if h.trim() == "r,g,b,class" => {}
        _ => return Err(SampleError::Header),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(SampleError::Parse {
                row,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0u16; 4];
        for (j, f) in fields.iter().enumerate() {
            vals[j] = f.parse::<u16>().map_err(|_| SampleError::Parse {
                row,
                msg: format!("field {:?} is not a non-negative integer", f),
            })?;
        }
        for (name, v) in [("r", vals[0]), ("g", vals[1]), ("b", vals[2])] {
            if v > 255 {
                return Err(SampleError::Parse {
                    row,
                    msg: format!("channel {name}={v} out of range 0-255"),
                });
            }
        }
        if vals[3] as usize >= NUM_CLASSES {
            return Err(SampleError::Parse {
                row,
                msg: format!("class {} out of range 0-5", vals[3]),
            });
        }
        out.push(ClassSample {
            r: vals[0] as u8,
            g: vals[1] as u8,
            b: vals[2] as u8,
            class_id: vals[3] as u8,
        });
    }
    Ok(out)
}

/// Serializes samples back to CSV text (`r,g,b,class` header, LF endings).
pub fn save_samples(samples: &[ClassSample]) -> String {
    let mut out = String::from("r,g,b,class\n");
    for s in samples {
        out.push_str(&format!("{},{},{},{}\n", s.r, s.g, s.b, s.class_id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_quoted_classes() {
        let t = ClassRangeTable::builtin();
        let bounds = |k: u8| {
            let r = t.class_ranges(k);
            (r[0].lo, r[0].hi, r[1].lo, r[1].hi, r[2].lo, r[2].hi)
        };
        assert_eq!(bounds(0), (214, 247, 214, 247, 213, 247));
        assert_eq!(bounds(3), (163, 251, 124, 218, 107, 214));
        assert_eq!(bounds(5), (37, 98, 0, 67, 0, 61));
    }

    #[test]
    fn oracle_background_and_dark_brown() {
        let t = ClassRangeTable::builtin();
        // (230,230,230) sits a fraction from the background midpoint
        // (230.5, 230.5, 230.0) and far from all others.
        assert_eq!(oracle_classify(&t, [230, 230, 230]), 0);
        // integer rounding of the dark-brown midpoint (67.5, 33.5, 30.5)
        assert_eq!(oracle_classify(&t, [67, 33, 30]), 5);
    }

    #[test]
    fn oracle_midpoints_recover_their_class() {
        let t = ClassRangeTable::builtin();
        for k in 0..NUM_CLASSES as u8 {
            let m = t.midpoint(k);
            let px = [m[0].round() as u8, m[1].round() as u8, m[2].round() as u8];
            assert_eq!(oracle_classify(&t, px), k, "midpoint of class {k}");
        }
    }

    #[test]
    fn oracle_is_a_strict_argmin_with_low_tiebreak() {
        let t = ClassRangeTable::builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let px = [rng.random::<u8>(), rng.random::<u8>(), rng.random::<u8>()];
            let got = oracle_classify(&t, px);
            let dist = |k: u8| {
                let m = t.midpoint(k);
                (0..3)
                    .map(|c| ((px[c] as f64 - m[c]) / 255.0).powi(2))
                    .sum::<f64>()
            };
            let dg = dist(got);
            for k in 0..NUM_CLASSES as u8 {
                if k < got {
                    assert!(dist(k) > dg);
                } else {
                    assert!(dist(k) >= dg);
                }
            }
        }
    }

    #[test]
    fn synth_samples_stay_inside_their_box() {
        let t = ClassRangeTable::builtin();
        let samples = synth_samples(&t, 25, 7);
        assert_eq!(samples.len(), 150);
        for s in &samples {
            assert!(t.contains(s.class_id, s.rgb()), "sample {s:?} escaped its box");
        }
    }

    #[test]
    fn synth_samples_deterministic_per_seed() {
        let t = ClassRangeTable::builtin();
        assert_eq!(synth_samples(&t, 10, 42), synth_samples(&t, 10, 42));
        assert_ne!(synth_samples(&t, 10, 42), synth_samples(&t, 10, 43));
    }

    #[test]
    fn synth_degenerate_range_returns_lo() {
        let bounds = [[(9, 9), (9, 9), (9, 9)]; NUM_CLASSES];
        let t = ClassRangeTable::from_bounds(bounds);
        for s in synth_samples(&t, 1, 0) {
            assert_eq!(s.rgb(), [9, 9, 9]);
        }
    }

    #[test]
    fn load_single_row() {
        let samples = load_samples("r,g,b,class\n230,230,230,0").unwrap();
        assert_eq!(samples, vec![ClassSample { r: 230, g: 230, b: 230, class_id: 0 }]);
    }

    #[test]
    fn load_rejects_out_of_range_channel_with_row_number() {
        let err = load_samples("r,g,b,class\n300,0,0,1").unwrap_err();
        match err {
            SampleError::Parse { row, ref msg } => {
                assert_eq!(row, 1);
                assert!(msg.contains("300"), "message was {msg:?}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn load_rejects_bad_header_and_bad_class() {
        assert_eq!(load_samples("x,y,z\n1,2,3,4").unwrap_err(), SampleError::Header);
        let err = load_samples("r,g,b,class\n1,2,3,6").unwrap_err();
        assert!(matches!(err, SampleError::Parse { row: 1, .. }));
    }

    #[test]
    fn save_then_load_is_identity() {
        let t = ClassRangeTable::builtin();
        let samples = synth_samples(&t, 5, 1);
        assert_eq!(load_samples(&save_samples(&samples)).unwrap(), samples);
    }

    #[test]
    fn shipped_demo_csv_has_30_per_class() {
        let text = include_str!("../../../data/demo_samples.csv");
        let samples = load_samples(text).unwrap();
        assert_eq!(samples.len(), 180);
        let mut counts = [0usize; NUM_CLASSES];
        for s in &samples {
            counts[s.class_id as usize] += 1;
        }
        assert_eq!(counts, [30; NUM_CLASSES]);
    }

    #[test]
    fn split_per_class_takes_heads() {
        let t = ClassRangeTable::builtin();
        let samples = synth_samples(&t, 30, 7);
        let (train, test) = split_per_class(&samples, 25);
        assert_eq!(train.len(), 150);
        assert_eq!(test.len(), 30);
        // the generated fixture is class-major, so heads stay class-major
        assert_eq!(&samples[0..25], &train[0..25]);
        assert_eq!(&samples[25..30], &test[0..5]);
    }
}
