//! Brute-force reference implementations.

use std::collections::HashMap;

use ms2embed::spectra::Spectrum;

/// Tanimoto over explicit bit lists.
pub fn tanimoto(a: &[bool], b: &[bool]) -> f64 {
    let mut both = 0;
    let mut either = 0;
    for i in 0..a.len() {
        if a[i] && b[i] {
            both += 1;
        }
        if a[i] || b[i] {
            either += 1;
        }
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

/// R² as squared-error reduction relative to the mean predictor.
pub fn r2(predicted: &[f64], actual: &[f64]) -> f64 {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    for i in 0..actual.len() {
        sse += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
        sst += (actual[i] - mean) * (actual[i] - mean);
    }
    1.0 - sse / sst
}

/// Welford mean and population standard deviation of one column.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, (m2 / xs.len() as f64).sqrt())
}

/// Per-structure hit rate averaged over structures.
pub fn macro_accuracy(rows: &[(String, bool)]) -> Option<f64> {
    let mut per: HashMap<&str, Vec<bool>> = HashMap::new();
    for (s, hit) in rows {
        per.entry(s.as_str()).or_default().push(*hit);
    }
    if per.is_empty() {
        return None;
    }
    let rates: Vec<f64> = per
        .values()
        .map(|v| v.iter().filter(|h| **h).count() as f64 / v.len() as f64)
        .collect();
    Some(rates.iter().sum::<f64>() / rates.len() as f64)
}

/// Modified cosine by enumerating every one-to-one matching.
pub fn modified_cosine(a: &Spectrum, b: &Spectrum, tol: f64) -> f64 {
    let shift = a.precursor.mz - b.precursor.mz;
    let fa = &a.fragments;
    let fb = &b.fragments;
    let ok = |i: usize, j: usize| {
        let d = fa[i].mz - fb[j].mz;
        d.abs() <= tol || (d - shift).abs() <= tol
    };
    fn best(i: usize, used: &mut Vec<bool>, n: usize, score: &dyn Fn(usize, usize) -> Option<f64>) -> f64 {
        if i == n {
            return 0.0;
        }
        let mut top = best(i + 1, used, n, score);
        for j in 0..used.len() {
            if !used[j] {
                if let Some(w) = score(i, j) {
                    used[j] = true;
                    top = top.max(w + best(i + 1, used, n, score));
                    used[j] = false;
                }
            }
        }
        top
    }
    let score = |i: usize, j: usize| ok(i, j).then(|| (fa[i].intensity * fb[j].intensity).sqrt());
    let total = best(0, &mut vec![false; fb.len()], fa.len(), &score);
    let na: f64 = fa.iter().map(|p| p.intensity).sum();
    let nb: f64 = fb.iter().map(|p| p.intensity).sum();
    if total == 0.0 {
        return 0.0;
    }
    (total / (na * nb).sqrt()).min(1.0)
}
