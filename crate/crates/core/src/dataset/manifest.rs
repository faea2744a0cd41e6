use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetError, Result};
use crate::metrics::{grade_from_lesions, DRGrade};

pub const MANIFEST_HEADER: [&str; 4] = ["image_path", "grade", "ma_count", "neovasc"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_path: String,
    pub grade: DRGrade,
    pub ma_count: Option<u32>,
    pub neovascularisation: Option<bool>,
}

impl ManifestRecord {
    pub fn new(image_path: impl Into<String>, grade: DRGrade) -> Self {
        Self { image_path: image_path.into(), grade, ma_count: None, neovascularisation: None }
    }

    /// Whether the lesion fields (when both present) agree with the grade.
    pub fn is_consistent(&self) -> bool {
        match (self.ma_count, self.neovascularisation) {
            (Some(ma), Some(nv)) => grade_from_lesions(ma, nv) == self.grade,
            _ => true,
        }
    }
}

/// Per-grade tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: [u64; DRGrade::COUNT],
    pub total: u64,
}

impl ClassDistribution {
    pub fn count(&self, grade: DRGrade) -> u64 {
        self.counts[grade.index()]
    }
}

pub fn class_distribution(records: &[ManifestRecord]) -> ClassDistribution {
    let mut dist = ClassDistribution::default();
    for r in records {
        dist.counts[r.grade.index()] += 1;
        dist.total += 1;
    }
    dist
}

fn parse_grade(line: u64, raw: &str) -> Result<DRGrade> {
    raw.trim()
        .parse::<u8>()
        .ok()
        .and_then(|v| DRGrade::from_index(v as usize))
        .ok_or_else(|| DatasetError::BadGrade { line, value: raw.to_string() })
}

fn parse_opt<T>(line: u64, column: &str, raw: Option<&str>, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
    match raw.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => parse(s)
            .map(Some)
            .ok_or_else(|| DatasetError::Malformed { line, detail: format!("bad {column} value {s:?}") }),
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// Reads `image_path,grade[,ma_count,neovasc]` CSV. Errors carry 1-based line numbers.
pub fn read_manifest<R: std::io::Read>(reader: R) -> Result<Vec<ManifestRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| DatasetError::Malformed { line: 1, detail: e.to_string() })?.clone();
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields != MANIFEST_HEADER && fields != MANIFEST_HEADER[..2] {
        return Err(DatasetError::BadHeader { found: fields.join(",") });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| DatasetError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let image_path = row.get(0).unwrap_or("").trim().to_string();
        if image_path.is_empty() {
            return Err(DatasetError::Malformed { line, detail: "empty image_path".into() });
        }
        let grade = parse_grade(line, row.get(1).unwrap_or(""))?;
        let ma_count = parse_opt(line, "ma_count", row.get(2), |s| s.parse::<u32>().ok())?;
        let neovascularisation = parse_opt(line, "neovasc", row.get(3), parse_flag)?;
        out.push(ManifestRecord { image_path, grade, ma_count, neovascularisation });
    }
    Ok(out)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::MissingFile { path: path.display().to_string(), source: e })?;
    read_manifest(file).map_err(|e| e.in_file(path))
}

pub fn write_manifest_to<W: std::io::Write>(writer: W, records: &[ManifestRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| DatasetError::Write(e.to_string());
    w.write_record(MANIFEST_HEADER).map_err(io)?;
    for r in records {
        let ma = r.ma_count.map(|v| v.to_string()).unwrap_or_default();
        let nv = r.neovascularisation.map(|v| if v { "1" } else { "0" }).unwrap_or_default();
        w.write_record([r.image_path.as_str(), &r.grade.index().to_string(), &ma, nv]).map_err(io)?;
    }
    w.flush().map_err(|e| DatasetError::Write(e.to_string()))
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DatasetError::Write(format!("{}: {e}", path.display())))?;
    write_manifest_to(file, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_only_is_empty() {
        assert!(read_manifest("image_path,grade,ma_count,neovasc\n".as_bytes()).unwrap().is_empty());
        assert!(read_manifest("image_path,grade\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn parses_full_row() {
        let recs = read_manifest("image_path,grade,ma_count,neovasc\nimg1.png,2,10,0\nimg2.png,4,,\n".as_bytes()).unwrap();
        assert_eq!(
            recs[0],
            ManifestRecord {
                image_path: "img1.png".into(),
                grade: DRGrade::ModerateNPDR,
                ma_count: Some(10),
                neovascularisation: Some(false)
            }
        );
        assert!(recs[0].is_consistent());
        assert_eq!(recs[1].ma_count, None);
    }

    #[test]
    fn bad_grade_cites_line() {
        let err = read_manifest("image_path,grade,ma_count,neovasc\na.png,1,,\nb.png,7,,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::BadGrade { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn bad_header_and_bad_cells() {
        assert!(matches!(read_manifest("path,label\n".as_bytes()), Err(DatasetError::BadHeader { .. })));
        let err = read_manifest("image_path,grade,ma_count,neovasc\na.png,1,x,\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 2, .. }));
        let err = read_manifest("image_path,grade,ma_count,neovasc\na.png,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { .. }));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(load_manifest("/no/such/manifest.csv"), Err(DatasetError::MissingFile { .. })));
    }

    #[test]
    fn distribution_counts() {
        assert_eq!(class_distribution(&[]), ClassDistribution::default());
        let d = class_distribution(&[ManifestRecord::new("x", DRGrade::ProliferativeDR)]);
        assert_eq!(d.counts, [0, 0, 0, 0, 1]);
        assert_eq!(d.total, 1);
    }

    fn record() -> impl Strategy<Value = ManifestRecord> {
        ("[a-z0-9_/]{1,12}\\.png", 0usize..5, proptest::option::of(0u32..40), proptest::option::of(any::<bool>()))
            .prop_map(|(p, g, ma, nv)| ManifestRecord {
                image_path: p,
                grade: DRGrade::from_index(g).unwrap(),
                ma_count: ma,
                neovascularisation: nv,
            })
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(records in proptest::collection::vec(record(), 0..20)) {
            let mut buf = Vec::new();
            write_manifest_to(&mut buf, &records).unwrap();
            prop_assert_eq!(read_manifest(buf.as_slice()).unwrap(), records);
        }
    }
}
