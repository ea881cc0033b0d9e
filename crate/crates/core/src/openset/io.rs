use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{GmmModel, ScoreSet, Trial};
use crate::blob::{BlobReader, BlobWriter};
use crate::error::{Error, Result};
use crate::Real;

const MAGIC: &[u8; 4] = b"GGMM";
const VERSION: u16 = 1;

pub fn gmm_to_bytes<R: Real>(m: &GmmModel<R>) -> Vec<u8> {
    let mut w = BlobWriter::new::<R>(MAGIC, VERSION);
    w.len(m.components());
    w.len(m.dim());
    w.reals(m.weights.iter().copied());
    w.reals(m.means.iter().copied());
    w.reals(m.variances.iter().copied());
    w.finish()
}

pub fn gmm_from_bytes<R: Real>(bytes: &[u8]) -> Result<GmmModel<R>> {
    let mut r = BlobReader::open::<R>(bytes, MAGIC, VERSION, "GMM")?;
    let k = r.len(R::BYTES as usize)?;
    let d = r.len(R::BYTES as usize)?;
    let cells = k
        .checked_mul(d)
        .ok_or_else(|| Error::format("GMM size overflow"))?;
    let weights = Array1::from(r.reals(k)?);
    let means = Array2::from_shape_vec((k, d), r.reals(cells)?)
        .map_err(|e| Error::format(e.to_string()))?;
    let variances = Array2::from_shape_vec((k, d), r.reals(cells)?)
        .map_err(|e| Error::format(e.to_string()))?;
    r.finish()?;
    GmmModel::new(weights, means, variances)
}

pub fn write_gmm<R: Real>(path: impl AsRef<Path>, m: &GmmModel<R>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, gmm_to_bytes(m)).map_err(|e| Error::io(path, e))
}

pub fn read_gmm<R: Real>(path: impl AsRef<Path>) -> Result<GmmModel<R>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    gmm_from_bytes(&bytes)
}

/// Columns: `trial,claimed,true,score,genuine`.
pub fn write_scores_csv(path: impl AsRef<Path>, scores: &ScoreSet) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("trial,claimed,true,score,genuine\n");
    for t in &scores.trials {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            t.trial,
            t.claimed,
            t.truth,
            t.score,
            u8::from(t.is_genuine())
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<ScoreSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut set = ScoreSet::default();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || {
            Error::format(format!(
                "{}:{}: malformed score row",
                path.display(),
                ln + 1
            ))
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let int = |s: &str| s.parse::<u32>().map_err(|_| bad());
        let t = Trial {
            trial: int(f[0])?,
            claimed: int(f[1])?,
            truth: int(f[2])?,
            score: f[3].parse().map_err(|_| bad())?,
        };
        if (f[4] == "1") != t.is_genuine() {
            return Err(bad());
        }
        set.push(t);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gmm_blob_round_trip() {
        let m = GmmModel::new(
            array![0.25f64, 0.75],
            array![[0.1, -3.0, 1.0 / 7.0], [2.0, 0.0, 5.5]],
            array![[1.0, 0.5, 2.0], [1e-6, 3.0, 0.125]],
        )
        .unwrap();
        let bytes = gmm_to_bytes(&m);
        assert_eq!(gmm_from_bytes::<f64>(&bytes).unwrap(), m);
        assert!(gmm_from_bytes::<f32>(&bytes).is_err());
        assert!(gmm_from_bytes::<f64>(&bytes[..bytes.len() - 8]).is_err());
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scores.csv");
        let mut s = ScoreSet::default();
        s.push(Trial {
            trial: 3,
            claimed: 1,
            truth: 1,
            score: 0.123_456_789,
        });
        s.push(Trial {
            trial: 3,
            claimed: 2,
            truth: 1,
            score: -4.5,
        });
        write_scores_csv(&p, &s).unwrap();
        assert_eq!(read_scores_csv(&p).unwrap(), s);
    }
}
