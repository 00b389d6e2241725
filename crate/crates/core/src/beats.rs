//! Heartbeat records and datasets: segmentation around R-peaks, amplitude
//! standardization, CSV persistence and synthetic desk-scale corpora.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::BEAT_LEN;
use crate::error::{Error, Result};
use crate::estimate::{class_default_eta, simulator_only_generate_with, EtaDistribution};
use crate::rng::substream;

/// Samples kept before the R-peak (200 ms at 360 Hz).
pub const PRE_R: usize = 72;
/// Samples kept from the R-peak onward (400 ms at 360 Hz).
pub const POST_R: usize = 144;

/// AAMI heartbeat classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    /// Normal
    N,
    /// Supraventricular ectopic
    S,
    /// Ventricular ectopic
    V,
    /// Fusion
    F,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::N, Label::S, Label::V, Label::F];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::N => "N",
            Label::S => "S",
            Label::V => "V",
            Label::F => "F",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "N" => Ok(Label::N),
            "S" => Ok(Label::S),
            "V" => Ok(Label::V),
            "F" => Ok(Label::F),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

/// Where a beat came from. Generated beats carry a `gan:` or `sim:` record
/// prefix, which is how the source survives a CSV round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Real,
    Gan,
    Simulator,
}

impl Source {
    fn from_record_id(id: &str) -> Source {
        if id.starts_with("gan:") {
            Source::Gan
        } else if id.starts_with("sim:") {
            Source::Simulator
        } else {
            Source::Real
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heartbeat {
    pub samples: Vec<f64>,
    pub label: Label,
    pub source: Source,
    pub record_id: String,
}

impl Heartbeat {
    pub fn new(samples: Vec<f64>, label: Label, record_id: impl Into<String>) -> Result<Self> {
        let record_id = record_id.into();
        let source = Source::from_record_id(&record_id);
        Self::with_source(samples, label, source, record_id)
    }

    pub fn with_source(samples: Vec<f64>, label: Label, source: Source, record_id: impl Into<String>) -> Result<Self> {
        if samples.len() != BEAT_LEN {
            return Err(Error::LengthMismatch {
                expected: BEAT_LEN,
                actual: samples.len(),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("heartbeat contains non-finite samples".into()));
        }
        let record_id = record_id.into();
        if record_id.contains(',') || record_id.contains('\n') {
            return Err(Error::InvalidArgument(format!(
                "record id {record_id:?} contains a separator"
            )));
        }
        Ok(Heartbeat {
            samples,
            label,
            source,
            record_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatDataset {
    beats: Vec<Heartbeat>,
    split: Split,
    class_counts: [usize; 4],
}

impl BeatDataset {
    pub fn new(beats: Vec<Heartbeat>, split: Split) -> Self {
        let mut class_counts = [0; 4];
        for b in &beats {
            class_counts[b.label.index()] += 1;
        }
        BeatDataset {
            beats,
            split,
            class_counts,
        }
    }

    pub fn beats(&self) -> &[Heartbeat] {
        &self.beats
    }

    pub fn into_beats(self) -> Vec<Heartbeat> {
        self.beats
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn class_counts(&self) -> [usize; 4] {
        self.class_counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.class_counts[label.index()]
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    pub fn of_class(&self, label: Label) -> Vec<Heartbeat> {
        self.beats.iter().filter(|b| b.label == label).cloned().collect()
    }

    pub fn record_ids(&self) -> BTreeSet<&str> {
        self.beats.iter().map(|b| b.record_id.as_str()).collect()
    }

    /// Header `label,record_id,s0,...,s215`, samples at 17 significant digits.
    pub fn write_csv<W: Write>(beats: &[Heartbeat], out: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        write!(w, "label,record_id")?;
        for i in 0..BEAT_LEN {
            write!(w, ",s{i}")?;
        }
        writeln!(w)?;
        for b in beats {
            write!(w, "{},{}", b.label, b.record_id)?;
            for v in &b.samples {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        save_beats(&self.beats, path)
    }

    pub fn load_csv(path: &Path, split: Split) -> Result<Self> {
        Ok(BeatDataset::new(load_beats(path)?, split))
    }
}

pub fn save_beats(beats: &[Heartbeat], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    BeatDataset::write_csv(beats, file)
}

pub fn load_beats(path: &Path) -> Result<Vec<Heartbeat>> {
    let bytes = std::fs::read(path)?;
    read_beats(&bytes[..], path)
}

pub fn read_beats<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<Heartbeat>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let expected = 2 + BEAT_LEN;
    let header_ok = headers.len() == expected
        && &headers[0] == "label"
        && &headers[1] == "record_id"
        && (0..BEAT_LEN).all(|i| headers[i + 2] == *format!("s{i}"));
    if !header_ok {
        return Err(err(1, "header must be label,record_id,s0,...,s215".into()));
    }
    let mut beats = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != expected {
            return Err(err(line, format!("expected {expected} fields, found {}", row.len())));
        }
        let label: Label = row[0].parse()?;
        let samples = row
            .iter()
            .skip(2)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(line, format!("bad sample {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let beat = Heartbeat::new(samples, label, &row[1]).map_err(|e| err(line, e.to_string()))?;
        beats.push(beat);
    }
    Ok(beats)
}

/// Train/test pair with disjoint record ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDatasets {
    pub train: BeatDataset,
    pub test: BeatDataset,
}

impl SplitDatasets {
    pub fn new(train: BeatDataset, test: BeatDataset) -> Result<Self> {
        if train.split != Split::Train || test.split != Split::Test {
            return Err(Error::Split("datasets carry the wrong split tags".into()));
        }
        ensure_disjoint(&train, &test)?;
        Ok(SplitDatasets { train, test })
    }
}

pub fn ensure_disjoint(train: &BeatDataset, test: &BeatDataset) -> Result<()> {
    let train_ids = train.record_ids();
    if let Some(shared) = test.record_ids().into_iter().find(|id| train_ids.contains(id)) {
        return Err(Error::Split(format!(
            "record {shared:?} appears in both train and test"
        )));
    }
    Ok(())
}

/// Record lists assigning whole recordings to the train or test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

/// Conventional inter-patient partition of the MIT-BIH arrhythmia records
/// (DS1 for training, DS2 for testing).
pub const MITBIH_INTER_PATIENT: &str = include_str!("../data/mitbih_ds1_ds2.txt");

impl SplitManifest {
    /// Lines `train: id id ...` / `test: id id ...`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut train = BTreeSet::new();
        let mut test = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, ids) = line.split_once(':').ok_or_else(|| Error::Parse {
                path: "split manifest".into(),
                line: i as u64 + 1,
                message: "expected `train:` or `test:`".into(),
            })?;
            let target = match key.trim() {
                "train" => &mut train,
                "test" => &mut test,
                other => {
                    return Err(Error::Parse {
                        path: "split manifest".into(),
                        line: i as u64 + 1,
                        message: format!("unknown split {other:?}"),
                    })
                }
            };
            target.extend(ids.split_whitespace().map(str::to_string));
        }
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::Split(format!("record {id:?} listed in both splits")));
        }
        Ok(SplitManifest { train, test })
    }

    pub fn mitbih() -> Self {
        Self::parse(MITBIH_INTER_PATIENT).expect("bundled manifest parses")
    }

    /// Partitions beats by record id; beats from unlisted records are dropped
    /// and counted.
    pub fn apply(&self, beats: Vec<Heartbeat>) -> (SplitDatasets, usize) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut dropped = 0;
        for b in beats {
            if self.train.contains(&b.record_id) {
                train.push(b);
            } else if self.test.contains(&b.record_id) {
                test.push(b);
            } else {
                dropped += 1;
            }
        }
        let pair = SplitDatasets {
            train: BeatDataset::new(train, Split::Train),
            test: BeatDataset::new(test, Split::Test),
        };
        (pair, dropped)
    }
}

/// Windows `[r - 72, r + 144)` around each R-peak. Peaks too close to either
/// end of the signal are skipped; the second value is how many.
pub fn segment(signal: &[f64], r_peaks: &[usize]) -> (Vec<Vec<f64>>, usize) {
    let mut windows = Vec::with_capacity(r_peaks.len());
    let mut skipped = 0;
    for &r in r_peaks {
        if r < PRE_R || r + POST_R > signal.len() {
            skipped += 1;
            continue;
        }
        windows.push(signal[r - PRE_R..r + POST_R].to_vec());
    }
    (windows, skipped)
}

/// Global amplitude statistics used to standardize beats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    pub fn identity() -> Self {
        Stats { mean: 0.0, std: 1.0 }
    }

    pub fn compute(beats: &[Heartbeat]) -> Result<Self> {
        let n: usize = beats.iter().map(|b| b.samples.len()).sum();
        if n == 0 {
            return Err(Error::InvalidArgument("cannot standardize an empty set".into()));
        }
        let mean = beats.iter().flat_map(|b| &b.samples).sum::<f64>() / n as f64;
        let var = beats
            .iter()
            .flat_map(|b| &b.samples)
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::InvalidArgument("zero standard deviation".into()));
        }
        Ok(Stats { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{:.16e},{:.16e}", self.mean, self.std)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: m,
        };
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| err("empty".into()))?;
        let (m, s) = line.split_once(',').ok_or_else(|| err("expected `mean,std`".into()))?;
        let mean = m.trim().parse::<f64>().map_err(|e| err(e.to_string()))?;
        let std = s.trim().parse::<f64>().map_err(|e| err(e.to_string()))?;
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(err("std must be positive".into()));
        }
        Ok(Stats { mean, std })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }
}

/// Subtracts the mean and divides by the std. Statistics are computed from
/// `beats` unless supplied (pass the training statistics for test and
/// generated data).
pub fn standardize(beats: &[Heartbeat], stats: Option<Stats>) -> Result<(Vec<Heartbeat>, Stats)> {
    let stats = match stats {
        Some(s) => s,
        None => Stats::compute(beats)?,
    };
    let out = beats
        .iter()
        .map(|b| Heartbeat {
            samples: b.samples.iter().map(|&v| stats.apply(v)).collect(),
            ..b.clone()
        })
        .collect();
    Ok((out, stats))
}

/// One class of a synthetic corpus.
#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub dist: EtaDistribution,
    pub train: usize,
    pub test: usize,
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub classes: Vec<ClassSpec>,
    /// Extra parameter noise, relative to each mean component.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Beats grouped under one pseudo-record id.
    pub beats_per_record: usize,
}

impl CorpusSpec {
    /// Four-class corpus built from [`class_default_eta`] with `rel_std`
    /// spread; `counts[c]` is the (train, test) size of class `c`.
    pub fn desk(counts: [(usize, usize); 4], rel_std: f64, noise_sigma: f64, seed: u64) -> Self {
        CorpusSpec {
            classes: Label::ALL
                .iter()
                .zip(counts)
                .filter(|(_, (tr, te))| tr + te > 0)
                .map(|(&label, (train, test))| ClassSpec {
                    dist: EtaDistribution::relative(label, &class_default_eta(label), rel_std),
                    train,
                    test,
                })
                .collect(),
            noise_sigma,
            seed,
            beats_per_record: 25,
        }
    }
}

/// Simulator-generated stand-in for a recorded database. Beats are in
/// simulator units and tagged as real; train and test draw from separate
/// random streams and use disjoint pseudo-record ids.
pub fn make_synthetic_corpus(spec: &CorpusSpec) -> Result<SplitDatasets> {
    let per_record = spec.beats_per_record.max(1);
    let make = |split: Split| -> Result<BeatDataset> {
        let tag = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        let mut beats = Vec::new();
        for (ci, class) in spec.classes.iter().enumerate() {
            let n = match split {
                Split::Train => class.train,
                Split::Test => class.test,
            };
            let stream = (ci as u64) * 2 + matches!(split, Split::Test) as u64;
            let mut rng = substream(spec.seed, stream);
            let generated = simulator_only_generate_with(&class.dist, n, spec.noise_sigma, &mut rng, "tmp")?;
            for (k, mut beat) in generated.into_iter().enumerate() {
                beat.source = Source::Real;
                beat.record_id = format!("syn-{tag}-{}-{:03}", class.dist.class_label, k / per_record);
                beats.push(beat);
            }
        }
        Ok(BeatDataset::new(beats, split))
    };
    let train = make(Split::Train)?;
    let test = make(Split::Test)?;
    SplitDatasets::new(train, test)
}
