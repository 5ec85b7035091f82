//! Library search: an exact-scan cosine index over spectrum embeddings, the
//! modified-cosine baseline, and exact / approximate top-1 accuracy with
//! macro averaging over query structures.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::encoder::SpectrumEncoder;
use crate::error::{Error, Result};
use crate::similarity::tanimoto;
use crate::spectra::{LabelTable, Spectrum};
use crate::tensor::ParamStore;

pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_THRESHOLD: f64 = 0.6;
/// Candidate-pair count up to which matching is solved exactly.
pub const EXACT_MATCH_PAIRS: usize = 12;
/// Spectra with at most this many fragments on both sides are matched
/// exactly whatever the candidate count.
pub const EXACT_MATCH_PEAKS: usize = 6;

/// Modified cosine similarity of the fragment lists of `a` and `b`.
///
/// Peaks pair when their m/z agree within `tol`, directly or after shifting
/// by the precursor difference. Each pair scores `√Iₐ·√I_b`; a one-to-one
/// matching maximizes the total, which is divided by `√ΣIₐ·√ΣI_b`.
pub fn modified_cosine(a: &Spectrum, b: &Spectrum, tol: f64) -> f64 {
    let shift = a.precursor.mz - b.precursor.mz;
    let mut pairs = Vec::new();
    for (i, pa) in a.fragments.iter().enumerate() {
        for (j, pb) in b.fragments.iter().enumerate() {
            let diff = pa.mz - pb.mz;
            if diff.abs() <= tol || (diff - shift).abs() <= tol {
                let w = pa.intensity.sqrt() * pb.intensity.sqrt();
                if w > 0.0 {
                    pairs.push((i, j, w));
                }
            }
        }
    }
    let norm_a: f64 = a.fragments.iter().map(|p| p.intensity).sum();
    let norm_b: f64 = b.fragments.iter().map(|p| p.intensity).sum();
    if pairs.is_empty() || norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let small = a.fragments.len() <= EXACT_MATCH_PEAKS && b.fragments.len() <= EXACT_MATCH_PEAKS;
    let total = if pairs.len() <= EXACT_MATCH_PAIRS || small {
        exact_matching(&pairs)
    } else {
        greedy_matching(pairs)
    };
    (total / (norm_a.sqrt() * norm_b.sqrt())).min(1.0)
}

fn greedy_matching(mut pairs: Vec<(usize, usize, f64)>) -> f64 {
    pairs.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
    let mut used_a = Vec::new();
    let mut used_b = Vec::new();
    let mut total = 0.0;
    for (i, j, w) in pairs {
        if !used_a.contains(&i) && !used_b.contains(&j) {
            used_a.push(i);
            used_b.push(j);
            total += w;
        }
    }
    total
}

/// Maximum-weight one-to-one matching by dynamic programming over the
/// involved `a` peaks and a bitmask of used `b` peaks.
fn exact_matching(pairs: &[(usize, usize, f64)]) -> f64 {
    let mut a_ids: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut b_ids: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    a_ids.sort_unstable();
    a_ids.dedup();
    b_ids.sort_unstable();
    b_ids.dedup();
    // Put the bitmask on the smaller side.
    let flip = b_ids.len() > a_ids.len();
    let (rows, cols) = if flip { (&b_ids, &a_ids) } else { (&a_ids, &b_ids) };
    let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
    for &(i, j, w) in pairs {
        let (r, c) = if flip { (j, i) } else { (i, j) };
        let r = rows.binary_search(&r).unwrap();
        let c = cols.binary_search(&c).unwrap();
        edges[r].push((c, w));
    }
    let masks = 1usize << cols.len();
    let mut best = vec![f64::NEG_INFINITY; masks];
    best[0] = 0.0;
    for row in &edges {
        let mut next = best.clone();
        for mask in 0..masks {
            if best[mask] == f64::NEG_INFINITY {
                continue;
            }
            for &(c, w) in row {
                if mask & (1 << c) == 0 {
                    let m = mask | (1 << c);
                    next[m] = next[m].max(best[mask] + w);
                }
            }
        }
        best = next;
    }
    best.into_iter().fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub spectrum_id: String,
    pub structure_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub query_id: String,
    pub k: usize,
    pub hits: Vec<Hit>,
}

/// Reference embeddings with unit-norm rows and aligned ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    dim: usize,
    rows: Vec<f64>,
    ids: Vec<String>,
    structure_ids: Vec<String>,
}

fn normalized(id: &str, v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Numeric(format!("embedding of {id} has norm {n}")));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

impl EmbeddingIndex {
    pub fn from_embeddings(
        dim: usize,
        entries: impl IntoIterator<Item = (String, String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut index = EmbeddingIndex {
            dim,
            rows: Vec::new(),
            ids: Vec::new(),
            structure_ids: Vec::new(),
        };
        for (id, sid, v) in entries {
            if v.len() != dim {
                return Err(Error::shape("index row", &[v.len()], &[dim]));
            }
            index.rows.extend(normalized(&id, &v)?);
            index.ids.push(id);
            index.structure_ids.push(sid);
        }
        Ok(index)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn structure_ids(&self) -> &[String] {
        &self.structure_ids
    }

    /// Top `k` rows by cosine with `query`; ties go to the smaller id.
    pub fn search_embedding(&self, query_id: &str, query: &[f64], k: usize) -> Result<SearchResult> {
        if self.is_empty() {
            return Err(Error::Search("index is empty".into()));
        }
        if query.len() != self.dim {
            return Err(Error::shape("search", &[query.len()], &[self.dim]));
        }
        let q = normalized(query_id, query)?;
        let scores: Vec<f64> = (0..self.len())
            .map(|i| self.row(i).iter().zip(&q).map(|(a, b)| a * b).sum())
            .collect();
        Ok(rank(query_id, &scores, &self.ids, &self.structure_ids, k))
    }
}

fn rank(query_id: &str, scores: &[f64], ids: &[String], sids: &[String], k: usize) -> SearchResult {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| {
        scores[y]
            .partial_cmp(&scores[x])
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids[x].cmp(&ids[y]))
    });
    SearchResult {
        query_id: query_id.to_string(),
        k,
        hits: order
            .into_iter()
            .take(k)
            .map(|i| Hit {
                spectrum_id: ids[i].clone(),
                structure_id: sids[i].clone(),
                score: scores[i],
            })
            .collect(),
    }
}

/// Encodes `references` and indexes their normalized embeddings.
pub fn build_index(
    encoder: &SpectrumEncoder,
    store: &ParamStore,
    references: &[&Spectrum],
) -> Result<EmbeddingIndex> {
    let embs = encoder.encode_all(store, references.to_vec())?;
    EmbeddingIndex::from_embeddings(
        encoder.config().d,
        references
            .iter()
            .zip(embs)
            .map(|(s, e)| (s.id.clone(), s.structure_id.clone(), e)),
    )
}

pub fn search(
    encoder: &SpectrumEncoder,
    store: &ParamStore,
    index: &EmbeddingIndex,
    query: &Spectrum,
    k: usize,
) -> Result<SearchResult> {
    if index.is_empty() {
        return Err(Error::Search("index is empty".into()));
    }
    let e = encoder.encode(store, query, crate::encoder::Mode::Infer)?;
    index.search_embedding(&query.id, &e, k)
}

/// Searches every query, in parallel, keeping input order.
pub fn search_all(
    encoder: &SpectrumEncoder,
    store: &ParamStore,
    index: &EmbeddingIndex,
    queries: &[&Spectrum],
    k: usize,
) -> Result<Vec<SearchResult>> {
    if index.is_empty() {
        return Err(Error::Search("index is empty".into()));
    }
    let embs = encoder.encode_all(store, queries.to_vec())?;
    queries
        .par_iter()
        .zip(embs)
        .map(|(q, e)| index.search_embedding(&q.id, &e, k))
        .collect()
}

/// Ranks `references` by modified cosine against `query`.
pub fn search_modified_cosine(
    query: &Spectrum,
    references: &[&Spectrum],
    k: usize,
    tol: f64,
) -> Result<SearchResult> {
    if references.is_empty() {
        return Err(Error::Search("reference library is empty".into()));
    }
    let scores: Vec<f64> = references.par_iter().map(|r| modified_cosine(query, r, tol)).collect();
    let ids: Vec<String> = references.iter().map(|r| r.id.clone()).collect();
    let sids: Vec<String> = references.iter().map(|r| r.structure_id.clone()).collect();
    Ok(rank(&query.id, &scores, &ids, &sids, k))
}

/// Top-1 judgement for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query_id: String,
    pub query_structure: String,
    pub hit_id: String,
    pub hit_structure: String,
    pub score: f64,
    pub exact: bool,
    pub tanimoto: f64,
}

impl QueryOutcome {
    pub fn approximate(&self, threshold: f64) -> bool {
        self.tanimoto >= threshold
    }
}

/// Mean of `judge` within each query structure, then across structures.
pub fn macro_accuracy(outcomes: &[QueryOutcome], judge: impl Fn(&QueryOutcome) -> bool) -> Option<f64> {
    let mut per: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for o in outcomes {
        let e = per.entry(&o.query_structure).or_default();
        e.0 += judge(o) as usize;
        e.1 += 1;
    }
    if per.is_empty() {
        return None;
    }
    let sum: f64 = per.values().map(|&(hit, n)| hit as f64 / n as f64).sum();
    Some(sum / per.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetAccuracy {
    pub set: String,
    /// Absent for novel queries, whose structures are not in the index.
    pub exact: Option<f64>,
    pub approximate: f64,
    pub query_structures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchEvaluation {
    pub accuracy: SetAccuracy,
    pub outcomes: Vec<QueryOutcome>,
}

/// Judges the top hit of each result against the labels.
pub fn evaluate_search(
    set: &str,
    queries: &[&Spectrum],
    results: &[SearchResult],
    labels: &LabelTable,
    threshold: f64,
    report_exact: bool,
) -> Result<SearchEvaluation> {
    if queries.len() != results.len() {
        return Err(Error::Evaluation(format!(
            "{} queries but {} results",
            queries.len(),
            results.len()
        )));
    }
    let record = |sid: &str| {
        labels
            .get(sid)
            .ok_or_else(|| Error::Evaluation(format!("structure {sid} has no labels")))
    };
    let mut outcomes = Vec::with_capacity(queries.len());
    for (q, r) in queries.iter().zip(results) {
        let hit = r
            .hits
            .first()
            .ok_or_else(|| Error::Evaluation(format!("no hit for query {}", q.id)))?;
        let t = tanimoto(
            &record(&q.structure_id)?.fingerprint,
            &record(&hit.structure_id)?.fingerprint,
        )?;
        outcomes.push(QueryOutcome {
            query_id: q.id.clone(),
            query_structure: q.structure_id.clone(),
            hit_id: hit.spectrum_id.clone(),
            hit_structure: hit.structure_id.clone(),
            score: hit.score,
            exact: q.structure_id == hit.structure_id,
            tanimoto: t,
        });
    }
    let approximate = macro_accuracy(&outcomes, |o| o.approximate(threshold))
        .ok_or_else(|| Error::Evaluation(format!("{set}: no queries")))?;
    let exact = if report_exact {
        macro_accuracy(&outcomes, |o| o.exact)
    } else {
        None
    };
    let query_structures = outcomes
        .iter()
        .map(|o| o.query_structure.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    Ok(SearchEvaluation {
        accuracy: SetAccuracy {
            set: set.to_string(),
            exact,
            approximate,
            query_structures,
        },
        outcomes,
    })
}

/// `query_set<TAB>match<TAB>accuracy<TAB>query_structures` rows.
pub fn accuracy_report(rows: &[SetAccuracy]) -> String {
    let mut out = String::from("query_set\tmatch\taccuracy\tquery_structures\n");
    for r in rows {
        if let Some(e) = r.exact {
            out.push_str(&format!("{}\texact\t{e:.6}\t{}\n", r.set, r.query_structures));
        }
        out.push_str(&format!(
            "{}\tapproximate\t{:.6}\t{}\n",
            r.set, r.approximate, r.query_structures
        ));
    }
    out
}

/// `query_id<TAB>hit_id<TAB>score<TAB>exact<TAB>tanimoto` rows.
pub fn audit_text(outcomes: &[QueryOutcome]) -> String {
    let mut out = String::from("query_id\thit_id\tscore\texact\ttanimoto\n");
    for o in outcomes {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\t{:.6}\n",
            o.query_id, o.hit_id, o.score, o.exact, o.tanimoto
        ));
    }
    out
}
