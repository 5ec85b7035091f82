//! Train / known / novel partitioning.
//!
//! Novel spectra come from structures held out entirely. Known spectra are
//! held out individually, and their structures keep at least one spectrum
//! in train.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::{LabelTable, Spectrum};
use crate::error::{Error, Result};
use crate::tensor::rng;

const SPLIT_STREAM: u64 = 0x5151;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Known,
    Novel,
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitName::Train => "train",
            SplitName::Known => "known",
            SplitName::Novel => "novel",
        })
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "known" => Ok(SplitName::Known),
            "novel" => Ok(SplitName::Novel),
            other => Err(Error::Config(format!("unknown split name {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitCounts {
    pub novel_structures: usize,
    pub known_spectra: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    /// Spectrum id to split, in the order spectra were supplied.
    entries: Vec<(String, String, SplitName)>,
}

impl SplitAssignment {
    fn ids(&self, which: SplitName) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.2 == which)
            .map(|e| e.0.as_str())
            .collect()
    }

    fn structures(&self, which: SplitName) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.2 == which)
            .map(|e| e.1.as_str())
            .collect()
    }

    pub fn train_spectra(&self) -> BTreeSet<&str> {
        self.ids(SplitName::Train)
    }

    pub fn known_spectra(&self) -> BTreeSet<&str> {
        self.ids(SplitName::Known)
    }

    pub fn novel_spectra(&self) -> BTreeSet<&str> {
        self.ids(SplitName::Novel)
    }

    pub fn train_structures(&self) -> BTreeSet<&str> {
        self.structures(SplitName::Train)
    }

    pub fn known_structures(&self) -> BTreeSet<&str> {
        self.structures(SplitName::Known)
    }

    pub fn novel_structures(&self) -> BTreeSet<&str> {
        self.structures(SplitName::Novel)
    }

    pub fn split_of(&self, spectrum_id: &str) -> Option<SplitName> {
        self.entries
            .iter()
            .find(|e| e.0 == spectrum_id)
            .map(|e| e.2)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Spectra belonging to `which`, in input order.
    pub fn select<'a>(&self, spectra: &'a [Spectrum], which: SplitName) -> Vec<&'a Spectrum> {
        let ids = self.ids(which);
        spectra
            .iter()
            .filter(|s| ids.contains(s.id.as_str()))
            .collect()
    }

    /// Verifies the split invariants over every entry.
    pub fn check(&self) -> Result<()> {
        let train = self.train_structures();
        if let Some(s) = self.novel_structures().intersection(&train).next() {
            return Err(Error::Contract(format!("novel structure {s} also in train")));
        }
        if let Some(s) = self.known_structures().difference(&train).next() {
            return Err(Error::Contract(format!("known structure {s} missing from train")));
        }
        let mut seen = HashSet::new();
        if let Some(e) = self.entries.iter().find(|e| !seen.insert(&e.0)) {
            return Err(Error::Contract(format!("spectrum {} assigned twice", e.0)));
        }
        Ok(())
    }

    /// `spectrum_id<TAB>structure_id<TAB>split` rows under a header line.
    pub fn manifest(&self) -> String {
        let mut out = String::from("spectrum_id\tstructure_id\tsplit\n");
        for (id, sid, split) in &self.entries {
            out.push_str(&format!("{id}\t{sid}\t{split}\n"));
        }
        out
    }

    pub fn parse_manifest(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            let [id, sid, split] = f[..] else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "manifest rows need spectrum_id, structure_id, split".into(),
                });
            };
            entries.push((id.to_string(), sid.to_string(), split.parse()?));
        }
        let a = SplitAssignment { entries };
        a.check()?;
        Ok(a)
    }
}

/// Partitions `spectra` deterministically under `seed`.
pub fn split_dataset(
    spectra: &[Spectrum],
    labels: &LabelTable,
    counts: SplitCounts,
    seed: u64,
) -> Result<SplitAssignment> {
    labels.check_resolves(spectra)?;
    let mut seen = HashSet::new();
    if let Some(s) = spectra.iter().find(|s| !seen.insert(s.id.as_str())) {
        return Err(Error::Contract(format!("duplicate spectrum id {}", s.id)));
    }

    let mut by_structure: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in spectra.iter().enumerate() {
        by_structure.entry(&s.structure_id).or_default().push(i);
    }
    if counts.novel_structures > by_structure.len() {
        return Err(Error::Split(format!(
            "{} novel structures requested, only {} available",
            counts.novel_structures,
            by_structure.len()
        )));
    }

    let mut rng = rng::stream(seed, SPLIT_STREAM);
    let mut structures: Vec<&str> = by_structure.keys().copied().collect();
    structures.shuffle(&mut rng);
    let novel: HashSet<&str> = structures[..counts.novel_structures].iter().copied().collect();

    let mut assigned = vec![SplitName::Train; spectra.len()];
    let mut remaining: BTreeMap<&str, usize> = BTreeMap::new();
    let mut candidates = Vec::new();
    for (sid, idxs) in &by_structure {
        if novel.contains(sid) {
            idxs.iter().for_each(|&i| assigned[i] = SplitName::Novel);
        } else {
            remaining.insert(sid, idxs.len());
            candidates.extend(idxs.iter().copied());
        }
    }
    candidates.sort_unstable();
    candidates.shuffle(&mut rng);

    let mut known = 0;
    for i in candidates {
        if known == counts.known_spectra {
            break;
        }
        let left = remaining.get_mut(spectra[i].structure_id.as_str()).unwrap();
        if *left > 1 {
            *left -= 1;
            assigned[i] = SplitName::Known;
            known += 1;
        }
    }
    if known < counts.known_spectra {
        return Err(Error::Split(format!(
            "only {known} spectra can be held out as known, {} requested",
            counts.known_spectra
        )));
    }

    let a = SplitAssignment {
        entries: spectra
            .iter()
            .zip(assigned)
            .map(|(s, split)| (s.id.clone(), s.structure_id.clone(), split))
            .collect(),
    };
    a.check()?;
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{Fingerprint, MoleculeRecord, Peak};

    fn dataset(structures: usize, per: usize) -> (Vec<Spectrum>, LabelTable) {
        let mut spectra = Vec::new();
        let mut records = Vec::new();
        for s in 0..structures {
            records.push(MoleculeRecord {
                structure_id: format!("S{s}"),
                fingerprint: Fingerprint::from_bits(16, &[s % 16]).unwrap(),
                properties: [s as f64; 10],
            });
            for k in 0..per {
                let frag = vec![Peak::new(100.0 + k as f64, 1.0).unwrap()];
                spectra.push(Spectrum::new(format!("S{s}_{k}"), format!("S{s}"), 500.0, frag).unwrap());
            }
        }
        (spectra, LabelTable::from_records(records).unwrap())
    }

    #[test]
    fn ten_by_five() {
        let (spectra, labels) = dataset(10, 5);
        let counts = SplitCounts {
            novel_structures: 2,
            known_spectra: 5,
        };
        let a = split_dataset(&spectra, &labels, counts, 42).unwrap();
        assert_eq!(a.novel_spectra().len(), 10);
        assert_eq!(a.novel_structures().len(), 2);
        assert_eq!(a.known_spectra().len(), 5);
        assert_eq!(a.train_spectra().len(), 35);
        assert!(a.known_structures().is_subset(&a.train_structures()));
        assert!(a.novel_structures().is_disjoint(&a.train_structures()));
        assert!(a.known_spectra().is_disjoint(&a.train_spectra()));
        assert!(a.novel_spectra().is_disjoint(&a.known_spectra()));
    }

    #[test]
    fn zero_counts_keep_everything_in_train() {
        let (spectra, labels) = dataset(4, 3);
        let a = split_dataset(&spectra, &labels, SplitCounts::default(), 1).unwrap();
        assert_eq!(a.train_spectra().len(), 12);
    }

    #[test]
    fn same_seed_same_assignment() {
        let (spectra, labels) = dataset(10, 5);
        let counts = SplitCounts {
            novel_structures: 3,
            known_spectra: 7,
        };
        let a = split_dataset(&spectra, &labels, counts, 9).unwrap();
        let b = split_dataset(&spectra, &labels, counts, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.manifest(), b.manifest());
    }

    #[test]
    fn oversized_requests_fail() {
        let (spectra, labels) = dataset(3, 2);
        let too_many_structures = SplitCounts {
            novel_structures: 4,
            known_spectra: 0,
        };
        assert!(matches!(
            split_dataset(&spectra, &labels, too_many_structures, 0),
            Err(Error::Split(_))
        ));
        // Each structure can lend at most one of its two spectra.
        let too_many_known = SplitCounts {
            novel_structures: 0,
            known_spectra: 4,
        };
        assert!(matches!(
            split_dataset(&spectra, &labels, too_many_known, 0),
            Err(Error::Split(_))
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let (spectra, labels) = dataset(6, 3);
        let counts = SplitCounts {
            novel_structures: 1,
            known_spectra: 2,
        };
        let a = split_dataset(&spectra, &labels, counts, 5).unwrap();
        assert_eq!(SplitAssignment::parse_manifest(&a.manifest()).unwrap(), a);
    }
}
