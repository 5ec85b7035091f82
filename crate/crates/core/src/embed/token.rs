//! Fixed-resolution m/z tokenization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenVocab {
    /// Bin width in Daltons.
    pub resolution: f64,
    pub max_mz: f64,
}

impl Default for TokenVocab {
    fn default() -> Self {
        TokenVocab {
            resolution: 0.1,
            max_mz: 2000.0,
        }
    }
}

impl TokenVocab {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.max_mz > 0.0) {
            return Err(Error::Config(format!(
                "token resolution and max m/z must be positive, got {} and {}",
                self.resolution, self.max_mz
            )));
        }
        Ok(())
    }

    fn max_index(&self) -> usize {
        (self.max_mz / self.resolution).round_ties_even() as usize
    }

    /// Id reserved for m/z values outside `0..=max_mz`.
    pub fn unknown_id(&self) -> usize {
        self.max_index() + 1
    }

    /// Number of rows in the embedding table, including the unknown slot.
    pub fn size(&self) -> usize {
        self.max_index() + 2
    }
}

/// Rounds `mz` to the vocabulary grid, ties to even.
pub fn tokenize_mz(mz: f64, vocab: &TokenVocab) -> usize {
    if !(mz >= 0.0) || mz > vocab.max_mz {
        return vocab.unknown_id();
    }
    let k = (mz / vocab.resolution).round_ties_even() as usize;
    k.min(vocab.max_index())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_to_tenths() {
        let v = TokenVocab::default();
        assert_eq!(tokenize_mz(123.456, &v), 1235);
        assert_eq!(tokenize_mz(123.44999, &v), 1234);
        assert_eq!(tokenize_mz(0.0, &v), 0);
        assert_eq!(tokenize_mz(2000.0, &v), 20000);
    }

    #[test]
    fn ties_go_to_even() {
        let v = TokenVocab {
            resolution: 0.5,
            max_mz: 100.0,
        };
        assert_eq!(tokenize_mz(0.25, &v), 0);
        assert_eq!(tokenize_mz(0.75, &v), 2);
    }

    #[test]
    fn out_of_range_is_unknown() {
        let v = TokenVocab::default();
        assert_eq!(tokenize_mz(2000.5, &v), v.unknown_id());
        assert_eq!(tokenize_mz(f64::NAN, &v), v.unknown_id());
        assert_eq!(v.size(), 20002);
    }
}
