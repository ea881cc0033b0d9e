use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    extract_descriptors, job_seed, partition, run_prefix, ExtractConfig, FeatureType, ModelConfig,
    Partition, PartitionSpec, Recording,
};
use crate::error::{Error, Result, StageContext};
use crate::features::{FeatureSet, Postprocessor};
use crate::synthgait::Corpus;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub t_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub features: Vec<FeatureType>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            t_values: vec![0.046, 0.093, 0.186, 0.371],
            n_values: vec![30, 50, 100, 150],
            features: FeatureType::ALL.to_vec(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_values.is_empty() || self.n_values.is_empty() || self.features.is_empty() {
            return Err(Error::invalid("sweep grids must be nonempty"));
        }
        if self.t_values.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::invalid("T values must be positive"));
        }
        if self.n_values.contains(&0) {
            return Err(Error::invalid("N values must be >= 1"));
        }
        Ok(())
    }

    /// Cells in output order: feature type, then T, then N.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &feature in &self.features {
            for &t in &self.t_values {
                for &n in &self.n_values {
                    out.push(CellKey { feature, t, n });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub feature: FeatureType,
    pub t: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(BoxStats {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Per-repeat outcomes of one cell; failed repeats keep their error text.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub outcomes: Vec<std::result::Result<f64, String>>,
}

impl CellResult {
    pub fn eers(&self) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter_map(|o| o.as_ref().ok().copied())
            .collect()
    }

    pub fn stats(&self) -> Option<BoxStats> {
        BoxStats::of(&self.eers())
    }

    pub fn median(&self) -> Option<f64> {
        self.stats().map(|s| s.median)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub spec: SweepSpec,
    pub repeats: usize,
    pub cells: Vec<CellResult>,
}

impl ResultsTable {
    pub fn cell(&self, feature: FeatureType, t: f64, n: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.key.feature == feature && c.key.t == t && c.key.n == n)
    }

    /// Cell with the lowest median EER for `feature` (first one on ties).
    pub fn best(&self, feature: FeatureType) -> Option<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.key.feature == feature)
            .filter_map(|c| c.median().map(|m| (m, c)))
            .fold(
                None,
                |best: Option<(f64, &CellResult)>, (m, c)| match best {
                    Some((bm, _)) if bm <= m => best,
                    _ => Some((m, c)),
                },
            )
            .map(|(_, c)| c)
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from("cell,feature,T,N,repeat,eer,error\n");
        for (i, c) in self.cells.iter().enumerate() {
            for (r, o) in c.outcomes.iter().enumerate() {
                let (eer, err) = match o {
                    Ok(e) => (e.to_string(), String::new()),
                    Err(msg) => (String::new(), csv_escape(msg)),
                };
                let _ = writeln!(
                    out,
                    "{i},{},{},{},{r},{eer},{err}",
                    c.key.feature, c.key.t, c.key.n
                );
            }
        }
        out
    }

    pub fn boxstats_csv(&self) -> String {
        let mut out = String::from("cell,feature,T,N,count,min,q1,median,q3,max\n");
        for (i, c) in self.cells.iter().enumerate() {
            let k = c.key;
            let count = c.eers().len();
            match c.stats() {
                Some(s) => {
                    let _ = writeln!(
                        out,
                        "{i},{},{},{},{count},{},{},{},{},{}",
                        k.feature, k.t, k.n, s.min, s.q1, s.median, s.q3, s.max
                    );
                }
                None => {
                    let _ = writeln!(out, "{i},{},{},{},0,,,,,", k.feature, k.t, k.n);
                }
            }
        }
        out
    }

    /// Median EER in percent, one block per feature type, N down and T across.
    pub fn table_md(&self) -> String {
        let mut out = format!("# Median EER (%) over {} repeats\n", self.repeats);
        for &f in &self.spec.features {
            let best = self.best(f).map(|c| c.key);
            let _ = write!(out, "\n## {f}\n\n| N \\ T |");
            for t in &self.spec.t_values {
                let _ = write!(out, " {t} s |");
            }
            out.push_str("\n|---|");
            out.push_str(&"---:|".repeat(self.spec.t_values.len()));
            out.push('\n');
            for &n in &self.spec.n_values {
                let _ = write!(out, "| {n} |");
                for &t in &self.spec.t_values {
                    let text = match self.cell(f, t, n).and_then(CellResult::median) {
                        Some(m) if best.is_some_and(|b| b.t == t && b.n == n) => {
                            format!("**{:.2}**", 100.0 * m)
                        }
                        Some(m) => format!("{:.2}", 100.0 * m),
                        None => "n/a".to_string(),
                    };
                    let _ = write!(out, " {text} |");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Write `results.csv`, `table.md` and `boxstats.csv` into `dir`.
    pub fn write_all(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("results.csv", self.results_csv()),
            ("table.md", self.table_md()),
            ("boxstats.csv", self.boxstats_csv()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn csv_escape(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
}

/// All N cells of one (feature type, T) pair from precomputed descriptors.
pub fn sweep_descriptors<R: Real>(
    desc: &FeatureSet<R>,
    feature: FeatureType,
    t: f64,
    n_values: &[usize],
    parts: &[Partition],
    model: &ModelConfig,
    base_seed: u64,
) -> Vec<CellResult> {
    let mut cells: Vec<CellResult> = n_values
        .iter()
        .map(|&n| CellResult {
            key: CellKey { feature, t, n },
            outcomes: Vec::with_capacity(parts.len()),
        })
        .collect();
    let dim = desc.dim();
    let n_fit = n_values.iter().copied().filter(|&n| n <= dim).max();
    for (repeat, part) in parts.iter().enumerate() {
        let reduced = n_fit.map(|n| {
            let train =
                |i: usize| desc.days[i] != part.test_day && part.ubm.contains(&desc.labels[i]);
            let idx: Vec<usize> = (0..desc.len()).filter(|&i| train(i)).collect();
            let ubm_raw = desc.data.select(ndarray::Axis(0), &idx);
            let post =
                Postprocessor::fit(ubm_raw.view(), model.postprocess(n)).stage("postprocess")?;
            Ok::<_, Error>((post.n(), post.apply_rows(desc.data.view())?))
        });
        for cell in cells.iter_mut() {
            let n = cell.key.n;
            let outcome = match &reduced {
                _ if n > dim => Err(format!("N = {n} exceeds descriptor dimension {dim}")),
                Some(Ok((kept, z))) => {
                    let seed = job_seed(base_seed, feature, t, n, repeat);
                    run_prefix(z.view(), n.min(*kept), desc, part, model, seed)
                        .map(|e| e.eer)
                        .map_err(|e| e.to_string())
                }
                Some(Err(e)) => Err(e.to_string()),
                None => unreachable!("n <= dim implies a fitted reduction"),
            };
            if let Err(msg) = &outcome {
                log::warn!("{feature} T={t} N={n} repeat {repeat}: {msg}");
            }
            cell.outcomes.push(outcome);
        }
    }
    cells
}

/// Full grid over feature types, T and N with `part_spec.repeats` random
/// partitions each. Cell failures are recorded and the sweep continues.
pub fn sweep<R: Real>(
    corpus: &Corpus<R>,
    spec: &SweepSpec,
    part_spec: &PartitionSpec,
    extract: &ExtractConfig,
    model: &ModelConfig,
) -> Result<ResultsTable> {
    spec.validate()?;
    if part_spec.repeats == 0 {
        return Err(Error::invalid("need at least one repeat"));
    }
    let recs = Recording::from_corpus(corpus);
    let parts = (0..part_spec.repeats)
        .map(|r| partition(&recs, part_spec, r))
        .collect::<Result<Vec<_>>>()
        .stage("partition")?;
    let mut by_key: Vec<CellResult> = Vec::new();
    for &t in &spec.t_values {
        log::info!("extracting descriptors for T = {t} s");
        match extract_descriptors(corpus, t, &spec.features, extract) {
            Ok(descs) => {
                for (&f, desc) in spec.features.iter().zip(&descs) {
                    log::info!(
                        "{f} T = {t} s: {} segments of dimension {}",
                        desc.len(),
                        desc.dim()
                    );
                    by_key.extend(sweep_descriptors(
                        desc,
                        f,
                        t,
                        &spec.n_values,
                        &parts,
                        model,
                        part_spec.base_seed,
                    ));
                }
            }
            Err(e) => {
                log::warn!("T = {t} s: {e}");
                for &f in &spec.features {
                    for &n in &spec.n_values {
                        by_key.push(CellResult {
                            key: CellKey { feature: f, t, n },
                            outcomes: vec![Err(e.to_string()); part_spec.repeats],
                        });
                    }
                }
            }
        }
    }
    let cells = spec
        .cells()
        .into_iter()
        .map(|k| {
            let i = by_key
                .iter()
                .position(|c| c.key == k)
                .expect("every cell computed");
            by_key.swap_remove(i)
        })
        .collect();
    Ok(ResultsTable {
        spec: spec.clone(),
        repeats: part_spec.repeats,
        cells,
    })
}
