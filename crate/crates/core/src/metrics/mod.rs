//! Cross-lingual representation alignment between per-language embedding
//! matrices whose rows are parallel sentences in a shared order.

pub mod embx;
mod svcca;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use svcca::{svcca, SvccaOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub lang: String,
    pub values: DMatrix<f64>,
}

impl EmbeddingMatrix {
    pub fn new(lang: impl Into<String>, values: DMatrix<f64>) -> Result<Self> {
        let lang = lang.into();
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Shape(format!("{lang}: empty matrix")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Numerical(format!(
                "{lang}: non-finite value at row {row}, column {col}"
            )));
        }
        Ok(EmbeddingMatrix { lang, values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }
}

fn same_rows(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "row counts differ: {} vs {}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

fn same_shape(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    same_rows(x, y)?;
    if x.ncols() != y.ncols() {
        return Err(Error::Shape(format!(
            "dimensions differ: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    Ok(())
}

fn row_normalized(m: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::Numerical(format!("{which} row {i} has zero norm")));
        }
        row /= norm;
    }
    Ok(out)
}

/// Mean cosine similarity of corresponding rows.
pub fn mean_cosine(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    same_shape(x, y)?;
    let xn = row_normalized(x, "X")?;
    let yn = row_normalized(y, "Y")?;
    let total: f64 = xn
        .row_iter()
        .zip(yn.row_iter())
        .map(|(a, b)| a.dot(&b).clamp(-1.0, 1.0))
        .sum();
    Ok(total / x.nrows() as f64)
}

pub(crate) fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mean: RowDVector<f64> = m.row_mean();
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= &mean;
    }
    out
}

/// Linear CKA: ‖Ycᵀ Xc‖²_F / (‖Xcᵀ Xc‖_F ‖Ycᵀ Yc‖_F) on column-centred inputs.
/// Widths may differ.
pub fn linear_cka(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    same_rows(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::Shape("CKA needs at least two rows".into()));
    }
    let xc = center_columns(x);
    let yc = center_columns(y);

    let (cross, xx, yy) = if x.nrows() < x.ncols().max(y.ncols()) {
        // n x n Gram route for wide matrices; same Frobenius norms
        let k = &xc * xc.transpose();
        let l = &yc * yc.transpose();
        (k.dot(&l), k.norm(), l.norm())
    } else {
        let c = yc.transpose() * &xc;
        (
            c.norm_squared(),
            (xc.transpose() * &xc).norm(),
            (yc.transpose() * &yc).norm(),
        )
    };
    let denom = xx * yy;
    if denom == 0.0 {
        return Err(Error::Numerical("CKA undefined: a centred matrix is zero".into()));
    }
    Ok((cross / denom).clamp(0.0, 1.0))
}

/// Fraction of rows of `x` whose parallel row of `y` ranks in the top `k`
/// by cosine similarity (ties go to the lower row index).
fn retrieval_one_way(sim: &DMatrix<f64>, k: usize) -> f64 {
    let n = sim.nrows();
    let hits = (0..n)
        .filter(|&i| {
            let own = sim[(i, i)];
            let ahead = (0..n)
                .filter(|&j| sim[(i, j)] > own || (sim[(i, j)] == own && j < i))
                .count();
            ahead < k
        })
        .count();
    hits as f64 / n as f64
}

fn similarity(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    same_shape(x, y)?;
    let xn = row_normalized(x, "X")?;
    let yn = row_normalized(y, "Y")?;
    Ok(xn * yn.transpose())
}

/// P@k averaged over both retrieval directions.
pub fn retrieval_precision(x: &DMatrix<f64>, y: &DMatrix<f64>, k: usize) -> Result<f64> {
    Ok(retrieval_precisions(x, y, &[k])?[0])
}

/// P@k for several `k` from one similarity matrix.
pub fn retrieval_precisions(x: &DMatrix<f64>, y: &DMatrix<f64>, ks: &[usize]) -> Result<Vec<f64>> {
    let n = x.nrows();
    if let Some(k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::Domain(format!("P@{k} needs 1 <= k <= n = {n}")));
    }
    let sim = similarity(x, y)?;
    let sim_t = sim.transpose();
    Ok(ks
        .iter()
        .map(|&k| 0.5 * (retrieval_one_way(&sim, k) + retrieval_one_way(&sim_t, k)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Measure {
    Cosine,
    Cka,
    P1,
    P5,
    P10,
    Svcca,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Cosine,
        Measure::Cka,
        Measure::P1,
        Measure::P5,
        Measure::P10,
        Measure::Svcca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Cosine => "cosine",
            Measure::Cka => "cka",
            Measure::P1 => "p@1",
            Measure::P5 => "p@5",
            Measure::P10 => "p@10",
            Measure::Svcca => "svcca",
        }
    }

    fn k(self) -> Option<usize> {
        match self {
            Measure::P1 => Some(1),
            Measure::P5 => Some(5),
            Measure::P10 => Some(10),
            _ => None,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown measure {s:?}")))
    }
}

/// All requested measures for one ordered pair of matrices.
pub fn measure_pair(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    measures: &[Measure],
    svcca_opts: &SvccaOptions,
) -> Result<BTreeMap<Measure, f64>> {
    let mut out = BTreeMap::new();
    let ks: Vec<usize> = measures.iter().filter_map(|m| m.k()).collect();
    let precisions = if ks.is_empty() {
        Vec::new()
    } else {
        retrieval_precisions(x, y, &ks)?
    };
    let mut p = precisions.into_iter();
    for &m in measures {
        let v = match m {
            Measure::Cosine => mean_cosine(x, y)?,
            Measure::Cka => linear_cka(x, y)?,
            Measure::Svcca => svcca(x, y, svcca_opts)?,
            Measure::P1 | Measure::P5 | Measure::P10 => p.next().expect("one precision per k"),
        };
        out.insert(m, v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScores {
    pub lang_a: String,
    pub lang_b: String,
    pub values: BTreeMap<Measure, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub languages: Vec<String>,
    pub measures: Vec<Measure>,
    /// Unordered pairs, `lang_a < lang_b`, in lexicographic order.
    pub pairs: Vec<PairScores>,
    /// Self-comparison of each language, for heatmap diagonals.
    pub diagonal: BTreeMap<String, BTreeMap<Measure, f64>>,
    /// Mean over pairs; `None` when there are no pairs.
    pub aggregate: BTreeMap<Measure, Option<f64>>,
}

/// Every requested measure for every unordered language pair.
pub fn pairwise_report(
    mats: &[EmbeddingMatrix],
    measures: &[Measure],
    svcca_opts: &SvccaOptions,
) -> Result<AlignmentReport> {
    let mut sorted: Vec<&EmbeddingMatrix> = mats.iter().collect();
    sorted.sort_by(|a, b| a.lang.cmp(&b.lang));
    if let Some(w) = sorted.windows(2).find(|w| w[0].lang == w[1].lang) {
        return Err(Error::Config(format!("language {} given twice", w[0].lang)));
    }
    let mut measures = measures.to_vec();
    measures.sort_unstable();
    measures.dedup();

    let name_pair = |a: &str, b: &str, e: Error| match e {
        Error::Shape(msg) => Error::Shape(format!("{a} vs {b}: {msg}")),
        Error::Numerical(msg) => Error::Numerical(format!("{a} vs {b}: {msg}")),
        Error::Domain(msg) => Error::Domain(format!("{a} vs {b}: {msg}")),
        other => other,
    };

    let index_pairs: Vec<(usize, usize)> = (0..sorted.len())
        .flat_map(|i| (i + 1..sorted.len()).map(move |j| (i, j)))
        .collect();
    let pairs: Vec<PairScores> = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (sorted[i], sorted[j]);
            let values = measure_pair(&a.values, &b.values, &measures, svcca_opts)
                .map_err(|e| name_pair(&a.lang, &b.lang, e))?;
            Ok(PairScores {
                lang_a: a.lang.clone(),
                lang_b: b.lang.clone(),
                values,
            })
        })
        .collect::<Result<_>>()?;

    let diagonal = sorted
        .par_iter()
        .map(|m| {
            measure_pair(&m.values, &m.values, &measures, svcca_opts)
                .map(|v| (m.lang.clone(), v))
                .map_err(|e| name_pair(&m.lang, &m.lang, e))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    let aggregate = measures
        .iter()
        .map(|m| {
            let mean = (!pairs.is_empty()).then(|| pairs.iter().map(|p| p.values[m]).sum::<f64>() / pairs.len() as f64);
            (*m, mean)
        })
        .collect();

    Ok(AlignmentReport {
        languages: sorted.iter().map(|m| m.lang.clone()).collect(),
        measures,
        pairs,
        diagonal,
        aggregate,
    })
}

impl AlignmentReport {
    /// Long CSV `pair,measure,value`; pairs are written `a/b`, aggregates as `mean`.
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pair", "measure", "value"])?;
        for p in &self.pairs {
            let pair = format!("{}/{}", p.lang_a, p.lang_b);
            for (m, v) in &p.values {
                w.write_record([pair.as_str(), m.name(), &v.to_string()])?;
            }
        }
        for (m, v) in &self.aggregate {
            let v = v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record(["mean", m.name(), &v])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Square language x language matrix for one measure.
    pub fn write_square_csv<W: Write>(&self, measure: Measure, out: W) -> Result<()> {
        let mut lookup: BTreeMap<(&str, &str), f64> = BTreeMap::new();
        for p in &self.pairs {
            let v = p.values[&measure];
            lookup.insert((&p.lang_a, &p.lang_b), v);
            lookup.insert((&p.lang_b, &p.lang_a), v);
        }
        for (lang, vals) in &self.diagonal {
            lookup.insert((lang, lang), vals[&measure]);
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["lang".to_string()];
        header.extend(self.languages.iter().cloned());
        w.write_record(&header)?;
        for a in &self.languages {
            let mut row = vec![a.clone()];
            row.extend(
                self.languages
                    .iter()
                    .map(|b| lookup[&(a.as_str(), b.as_str())].to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
