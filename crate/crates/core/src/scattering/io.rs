use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use super::ScatteringMatrix;
use crate::blob::{BlobReader, BlobWriter};
use crate::error::{Error, Result};
use crate::signal_io::Modality;
use crate::Real;

const MAGIC: &[u8; 4] = b"GSCM";
const VERSION: u16 = 1;

fn modality_code(m: Modality) -> u8 {
    match m {
        Modality::Audio => 0,
        Modality::Geophone => 1,
    }
}

pub fn scattering_to_bytes<R: Real>(s: &ScatteringMatrix<R>) -> Vec<u8> {
    let mut w = BlobWriter::new::<R>(MAGIC, VERSION);
    w.u8(modality_code(s.modality));
    w.u32(s.q as u32);
    w.f64(s.t);
    w.f64(s.sample_rate);
    w.u64(s.segment_len as u64);
    match s.epsilon {
        Some(e) => {
            w.u8(1);
            w.f64(e);
        }
        None => w.u8(0),
    }
    w.len(s.paths());
    w.len(s.frames());
    w.f64s(&s.centers);
    w.f64s(&s.frame_times);
    w.reals(s.order0.iter().copied());
    w.reals(s.envelope.iter().copied());
    w.reals(s.order1.iter().copied());
    w.finish()
}

pub fn scattering_from_bytes<R: Real>(bytes: &[u8]) -> Result<ScatteringMatrix<R>> {
    let mut r = BlobReader::open::<R>(bytes, MAGIC, VERSION, "scattering matrix")?;
    let modality = match r.u8()? {
        0 => Modality::Audio,
        1 => Modality::Geophone,
        c => return Err(Error::format(format!("unknown modality code {c}"))),
    };
    let q = r.u32()? as usize;
    let t = r.f64()?;
    let sample_rate = r.f64()?;
    let segment_len = r.u64()? as usize;
    let epsilon = match r.u8()? {
        0 => None,
        _ => Some(r.f64()?),
    };
    let paths = r.len(8)?;
    let frames = r.len(8)?;
    let centers = r.f64s(paths)?;
    let frame_times = r.f64s(frames)?;
    let order0 = r.reals(frames)?;
    let envelope = r.reals(frames)?;
    let cells = paths
        .checked_mul(frames)
        .ok_or_else(|| Error::format("matrix size overflow"))?;
    let order1 = Array2::from_shape_vec((paths, frames), r.reals(cells)?)
        .map_err(|e| Error::format(e.to_string()))?;
    r.finish()?;
    Ok(ScatteringMatrix {
        order0,
        order1,
        envelope,
        centers,
        frame_times,
        t,
        q,
        sample_rate,
        segment_len,
        modality,
        epsilon,
    })
}

/// Binary form; round-trips bit-exactly.
pub fn write_scattering<R: Real>(path: impl AsRef<Path>, s: &ScatteringMatrix<R>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scattering_to_bytes(s)).map_err(|e| Error::io(path, e))
}

pub fn read_scattering<R: Real>(path: impl AsRef<Path>) -> Result<ScatteringMatrix<R>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    scattering_from_bytes(&bytes)
}

/// Human-readable form: one row per path (`order0` first), one column per
/// frame, prefixed by `#` metadata lines. Values use shortest round-trip
/// formatting so reading back is exact.
pub fn write_scattering_csv<R: Real>(
    path: impl AsRef<Path>,
    s: &ScatteringMatrix<R>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "# modality={}", s.modality);
    let _ = writeln!(out, "# T={}", s.t);
    let _ = writeln!(out, "# Q={}", s.q);
    let _ = writeln!(out, "# sample_rate={}", s.sample_rate);
    let _ = writeln!(out, "# segment_len={}", s.segment_len);
    if let Some(e) = s.epsilon {
        let _ = writeln!(out, "# epsilon={e}");
    }
    out.push_str("path,center_rad_s");
    for t in &s.frame_times {
        let _ = write!(out, ",{t}");
    }
    out.push('\n');
    let mut row = |name: &str, center: &str, vals: &mut dyn Iterator<Item = R>| {
        let _ = write!(out, "{name},{center}");
        for v in vals {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    };
    row("order0", "", &mut s.order0.iter().copied());
    row("envelope", "", &mut s.envelope.iter().copied());
    for (j, r) in s.order1.rows().into_iter().enumerate() {
        row(
            &format!("{j}"),
            &format!("{}", s.centers[j]),
            &mut r.iter().copied(),
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_scattering_csv<R: Real>(path: impl AsRef<Path>) -> Result<ScatteringMatrix<R>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::format(format!("{}: {msg}", path.display()));
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("not a number: {s:?}")))
    };

    let (mut modality, mut t, mut q, mut sr, mut seg_len, mut eps) =
        (None, None, None, None, None, None);
    let mut frame_times = None;
    let (mut order0, mut envelope) = (None, None);
    let mut centers = Vec::new();
    let mut rows: Vec<Vec<R>> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        if let Some(meta) = line.strip_prefix('#') {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| bad(format!("bad metadata line {line:?}")))?;
            let v = v.trim();
            match k.trim() {
                "modality" => {
                    modality = Some(match v {
                        "audio" => Modality::Audio,
                        "geophone" => Modality::Geophone,
                        _ => return Err(bad(format!("unknown modality {v:?}"))),
                    })
                }
                "T" => t = Some(num(v)?),
                "Q" => q = Some(num(v)? as usize),
                "sample_rate" => sr = Some(num(v)?),
                "segment_len" => seg_len = Some(num(v)? as usize),
                "epsilon" => eps = Some(num(v)?),
                _ => {}
            }
            continue;
        }
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or("").trim();
        let center = fields.next().unwrap_or("").trim();
        if name == "path" {
            frame_times = Some(fields.map(num).collect::<Result<Vec<f64>>>()?);
            continue;
        }
        let vals = fields
            .map(|f| num(f).map(R::lit))
            .collect::<Result<Vec<R>>>()?;
        match name {
            "order0" => order0 = Some(vals),
            "envelope" => envelope = Some(vals),
            _ => {
                centers.push(num(center)?);
                rows.push(vals);
            }
        }
    }
    let frame_times = frame_times.ok_or_else(|| bad("missing header row".into()))?;
    let frames = frame_times.len();
    if rows.iter().any(|r| r.len() != frames) {
        return Err(bad("ragged rows".into()));
    }
    let paths = rows.len();
    let order1 =
        Array2::from_shape_vec((paths, frames), rows.concat()).map_err(|e| bad(e.to_string()))?;
    let missing = |what: &str| bad(format!("missing {what}"));
    Ok(ScatteringMatrix {
        order0: order0.ok_or_else(|| missing("order0 row"))?,
        order1,
        envelope: envelope.ok_or_else(|| missing("envelope row"))?,
        centers,
        frame_times,
        t: t.ok_or_else(|| missing("T"))?,
        q: q.ok_or_else(|| missing("Q"))?,
        sample_rate: sr.ok_or_else(|| missing("sample_rate"))?,
        segment_len: seg_len.ok_or_else(|| missing("segment_len"))?,
        modality: modality.ok_or_else(|| missing("modality"))?,
        epsilon: eps,
    })
}
