use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::{FeatureSet, Pca, Standardizer};
use crate::blob::{BlobReader, BlobWriter};
use crate::error::{Error, Result};
use crate::Real;

const STD_MAGIC: &[u8; 4] = b"GSTD";
const PCA_MAGIC: &[u8; 4] = b"GPCA";
const VERSION: u16 = 1;

/// Columns: `label,recording,day,f0,f1,...`.
pub fn write_features_csv<R: Real>(path: impl AsRef<Path>, set: &FeatureSet<R>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("label,recording,day");
    for j in 0..set.dim() {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for (i, row) in set.data.rows().into_iter().enumerate() {
        let _ = write!(
            out,
            "{},{},{}",
            set.labels[i], set.recordings[i], set.days[i]
        );
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_features_csv<R: Real>(path: impl AsRef<Path>) -> Result<FeatureSet<R>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad =
        |line: usize, msg: &str| Error::format(format!("{}:{}: {msg}", path.display(), line + 1));
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
    let dim = header
        .split(',')
        .count()
        .checked_sub(3)
        .ok_or_else(|| bad(0, "missing columns"))?;
    let (mut labels, mut recordings, mut days, mut values) = (vec![], vec![], vec![], vec![]);
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 3 {
            return Err(bad(ln, "wrong number of fields"));
        }
        let int = |s: &str| s.parse::<u32>().map_err(|_| bad(ln, "bad integer"));
        labels.push(int(fields[0])?);
        recordings.push(int(fields[1])?);
        days.push(int(fields[2])?);
        for f in &fields[3..] {
            values.push(R::lit(f.parse::<f64>().map_err(|_| bad(ln, "bad number"))?));
        }
    }
    let data = Array2::from_shape_vec((labels.len(), dim), values)
        .map_err(|e| Error::format(e.to_string()))?;
    Ok(FeatureSet {
        data,
        labels,
        recordings,
        days,
    })
}

pub fn standardizer_to_bytes<R: Real>(s: &Standardizer<R>) -> Vec<u8> {
    let mut w = BlobWriter::new::<R>(STD_MAGIC, VERSION);
    w.len(s.dim());
    w.reals(s.mean.iter().copied());
    w.reals(s.std.iter().copied());
    w.finish()
}

pub fn standardizer_from_bytes<R: Real>(bytes: &[u8]) -> Result<Standardizer<R>> {
    let mut r = BlobReader::open::<R>(bytes, STD_MAGIC, VERSION, "standardizer")?;
    let d = r.len(2 * R::BYTES as usize)?;
    let mean = r.reals(d)?;
    let std = r.reals(d)?;
    r.finish()?;
    if std.iter().any(|&s| !(s > R::zero())) {
        return Err(Error::format("standardizer has non-positive std"));
    }
    Ok(Standardizer { mean, std })
}

pub fn pca_to_bytes<R: Real>(p: &Pca<R>) -> Vec<u8> {
    let mut w = BlobWriter::new::<R>(PCA_MAGIC, VERSION);
    w.len(p.dim());
    w.len(p.rank());
    w.reals(p.mean.iter().copied());
    w.reals(p.variances.iter().copied());
    w.reals(p.components.iter().copied());
    w.finish()
}

pub fn pca_from_bytes<R: Real>(bytes: &[u8]) -> Result<Pca<R>> {
    let mut r = BlobReader::open::<R>(bytes, PCA_MAGIC, VERSION, "PCA basis")?;
    let d = r.len(R::BYTES as usize)?;
    let k = r.len(R::BYTES as usize)?;
    let mean = r.reals(d)?;
    let variances = r.reals(k)?;
    let comps = r.reals(
        k.checked_mul(d)
            .ok_or_else(|| Error::format("size overflow"))?,
    )?;
    r.finish()?;
    let components =
        Array2::from_shape_vec((k, d), comps).map_err(|e| Error::format(e.to_string()))?;
    Ok(Pca {
        mean,
        components,
        variances,
    })
}

fn write_bytes(path: &Path, bytes: Vec<u8>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_standardizer<R: Real>(path: impl AsRef<Path>, s: &Standardizer<R>) -> Result<()> {
    write_bytes(path.as_ref(), standardizer_to_bytes(s))
}

pub fn read_standardizer<R: Real>(path: impl AsRef<Path>) -> Result<Standardizer<R>> {
    standardizer_from_bytes(&read_bytes(path.as_ref())?)
}

pub fn write_pca<R: Real>(path: impl AsRef<Path>, p: &Pca<R>) -> Result<()> {
    write_bytes(path.as_ref(), pca_to_bytes(p))
}

pub fn read_pca<R: Real>(path: impl AsRef<Path>) -> Result<Pca<R>> {
    pca_from_bytes(&read_bytes(path.as_ref())?)
}
