use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{config_err, data_err, usage_err, PalsError, Result};
use crate::label::{Instance, Label};
use crate::pipeline::{Manifest, SegmentFeatures, SensorRecord};

fn parse_error(e: &csv::Error, fallback_line: u64) -> PalsError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    PalsError::Parse { line, message: e.to_string() }
}

/// Reads one session CSV (`t_ms,<channels...>,label`) and maps activity
/// strings through the manifest.
pub fn load_session(path: &Path, manifest: &Manifest) -> Result<Vec<SensorRecord>> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| data_err(format!("cannot open session {}: {e}", path.display())))?
        .read_to_string(&mut text)?;
    parse_session(&text, manifest).map_err(|e| match e {
        PalsError::Data(m) => data_err(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// [`load_session`] on in-memory text.
pub fn parse_session(text: &str, manifest: &Manifest) -> Result<Vec<SensorRecord>> {
    if text.trim().is_empty() {
        log::warn!("empty session file");
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_error(&e, 1))?.clone();
    let channels = manifest.channel_count();
    if header.len() != channels + 2 {
        return Err(PalsError::Parse {
            line: 1,
            message: format!("expected t_ms, {channels} channel columns and label; found {} columns", header.len()),
        });
    }
    if &header[0] != "t_ms" || &header[header.len() - 1] != "label" {
        return Err(PalsError::Parse { line: 1, message: "header must start with t_ms and end with label".into() });
    }

    let mut out: Vec<SensorRecord> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| parse_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let number = |field: &str| -> Result<f64> {
            let v: f64 = field
                .parse()
                .map_err(|_| PalsError::Parse { line, message: format!("not a number: {field:?}") })?;
            if !v.is_finite() {
                return Err(PalsError::Parse { line, message: format!("non-finite value {field:?}") });
            }
            Ok(v)
        };
        let t_ms = number(&record[0])?;
        let values = (1..=channels).map(|i| number(&record[i])).collect::<Result<Vec<_>>>()?;
        let activity = &record[channels + 1];
        if let Some(prev) = out.last() {
            if t_ms <= prev.t_ms {
                return Err(data_err(format!("line {line}: timestamp {t_ms} does not increase (previous {})", prev.t_ms)));
            }
        }
        let mut rec = SensorRecord::new(t_ms, values);
        if !activity.is_empty() {
            if manifest.labels.classify(activity).is_none() {
                return Err(data_err(format!("line {line}: unknown label {activity:?} not in the manifest")));
            }
            rec = rec.with_label(activity);
        }
        out.push(rec);
    }
    Ok(out)
}

/// One dataset directory: `manifest.toml` plus session CSVs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub sessions: Vec<PathBuf>,
}

impl Dataset {
    /// Returns `Ok(None)` when the directory or its manifest is missing.
    pub fn open(root: &Path) -> Result<Option<Dataset>> {
        let manifest_path = root.join("manifest.toml");
        if !manifest_path.is_file() {
            return Ok(None);
        }
        let manifest = Manifest::load(&manifest_path)?;
        let mut sessions: Vec<PathBuf> = std::fs::read_dir(root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        sessions.sort();
        if sessions.is_empty() {
            return Ok(None);
        }
        Ok(Some(Dataset { root: root.to_path_buf(), manifest, sessions }))
    }
}

/// A feature CSV in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub label: Option<Label>,
    pub start_ms: f64,
}

impl FeatureTable {
    pub fn from_segments(segments: &[SegmentFeatures]) -> Result<Self> {
        let names = match segments.first() {
            Some(s) => s.features.names.iter().cloned().collect(),
            None => Vec::new(),
        };
        let rows = segments
            .iter()
            .map(|s| FeatureRow { values: s.features.values.clone(), label: s.label, start_ms: s.start_ms })
            .collect();
        Ok(FeatureTable { names, rows })
    }

    /// Header: feature names, then `label` (0, 1 or empty) and
    /// `segment_start_ms`.
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.names.clone();
        header.push("label".into());
        header.push("segment_start_ms".into());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut fields: Vec<String> = row.values.iter().map(f64::to_string).collect();
            fields.push(row.label.map(|l| l.as_digit().to_string()).unwrap_or_default());
            fields.push(row.start_ms.to_string());
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers().map_err(|e| parse_error(&e, 1))?.clone();
        let n = header.len();
        if n < 2 || &header[n - 2] != "label" || &header[n - 1] != "segment_start_ms" {
            return Err(PalsError::Parse { line: 1, message: "feature CSV must end with label,segment_start_ms".into() });
        }
        let names: Vec<String> = header.iter().take(n - 2).map(str::to_string).collect();
        let mut rows = Vec::new();
        for result in reader.records() {
            let record = result.map_err(|e| parse_error(&e, 0))?;
            let line = record.position().map_or(0, |p| p.line());
            let bad = |m: String| PalsError::Parse { line, message: m };
            let values = (0..n - 2)
                .map(|i| record[i].parse::<f64>().map_err(|_| bad(format!("not a number: {:?}", &record[i]))))
                .collect::<Result<Vec<_>>>()?;
            let label = match &record[n - 2] {
                "" => None,
                s => Some(Label::parse_digit(s).ok_or_else(|| bad(format!("label must be 0 or 1, got {s:?}")))?),
            };
            let start_ms = record[n - 1].parse::<f64>().map_err(|_| bad("bad segment_start_ms".into()))?;
            rows.push(FeatureRow { values, label, start_ms });
        }
        Ok(FeatureTable { names, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| usage_err(format!("cannot open {}: {e}", path.display())))?;
        FeatureTable::read(file)
    }

    /// Instances numbered from `first_id`, carrying the table's labels.
    pub fn to_instances(&self, first_id: u64) -> Vec<Instance> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| Instance { id: crate::label::InstanceId(first_id + i as u64), features: r.values.clone(), label: r.label })
            .collect()
    }
}

/// Splits indices into a train and a test part, class by class, so both
/// keep the class proportions. Each class with at least two members puts
/// at least one in each part. Returned indices are sorted.
pub fn stratified_split(labels: &[Label], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(config_err(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in Label::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let mut n_train = (train_fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            n_train = n_train.clamp(1, idx.len() - 1);
        }
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::LabelMap;

    fn manifest(channels: usize) -> Manifest {
        Manifest {
            sampling_rate_hz: 50.0,
            channels: (0..channels).map(|i| format!("ch{i}")).collect(),
            labels: LabelMap::new(["eating"], ["walking", "talking"]),
        }
    }

    #[test]
    fn parses_three_channels() {
        let text = "t_ms,ch0,ch1,ch2,label\n0,1,2,3,eating\n20,1.5,2,3,walking\n40,0,0,0,\n";
        let s = parse_session(text, &manifest(3)).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].channels, vec![1.0, 2.0, 3.0]);
        assert_eq!(s[1].label.as_deref(), Some("walking"));
        assert_eq!(s[2].label, None);
    }

    #[test]
    fn reports_bad_rows() {
        let m = manifest(2);
        let err = parse_session("t_ms,ch0,ch1,label\n0,1,2,eating\n20,x,2,eating\n", &m).unwrap_err();
        assert!(matches!(err, PalsError::Parse { line: 3, .. }), "{err}");
        let err = parse_session("t_ms,ch0,ch1,label\n0,1,2,eating\n20,1,2,swimming\n", &m).unwrap_err();
        assert!(matches!(err, PalsError::Data(ref s) if s.contains("\"swimming\"")), "{err}");
        let err = parse_session("t_ms,ch0,ch1,label\n10,1,2,eating\n10,1,2,eating\n", &m).unwrap_err();
        assert!(matches!(err, PalsError::Data(_)));
        assert!(matches!(parse_session("t_ms,ch0,label\n0,1,eating\n", &m), Err(PalsError::Parse { line: 1, .. })));
        assert!(matches!(parse_session("t_ms,ch0,ch1,label\n0,1,eating\n", &m), Err(PalsError::Parse { .. })));
    }

    #[test]
    fn empty_file_is_an_empty_stream() {
        assert!(parse_session("", &manifest(3)).unwrap().is_empty());
    }

    #[test]
    fn feature_table_round_trip() {
        let t = FeatureTable {
            names: vec!["a".into(), "b".into()],
            rows: vec![
                FeatureRow { values: vec![0.1, -2.5], label: Some(Label::Eating), start_ms: 0.0 },
                FeatureRow { values: vec![1e-300, 3.0], label: None, start_ms: 3000.0 },
            ],
        };
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("a,b,label,segment_start_ms\n"));
        assert_eq!(FeatureTable::read(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<Label> = (0..100).map(|i| Label::from_bool(i % 10 == 0)).collect();
        let (train, test) = stratified_split(&labels, 0.2, 4).unwrap();
        assert_eq!(train.len(), 20);
        assert_eq!(test.len(), 80);
        assert_eq!(train.iter().filter(|&&i| labels[i].is_eating()).count(), 2);
        assert_eq!((train.clone(), test.clone()), stratified_split(&labels, 0.2, 4).unwrap());
        assert!(stratified_split(&labels, 1.0, 0).is_err());
    }
}
