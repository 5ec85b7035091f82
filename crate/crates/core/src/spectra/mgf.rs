//! Mascot Generic Format reader and canonical writer.
//!
//! ```text
//! BEGIN IONS
//! TITLE=spectrum id
//! PEPMASS=500.2500 1200.0
//! STRUCTUREID=structure key
//! CHARGE=1+
//! 100.0123 15.0
//! 200.0456 30.5
//! END IONS
//! ```
//!
//! Parsing is strict: any malformed line aborts with its 1-based line number.
//! Decimal places of every number are recorded so the written resolution
//! survives parsing and can be checked by [`super::clean_spectra`].

use std::fmt::Write as _;

use super::{Peak, Spectrum};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Number of decimal places written in a numeric token (`"1.25e1"` has one).
fn written_decimals(token: &str) -> u8 {
    let (mantissa, exp) = match token.find(['e', 'E']) {
        Some(i) => (&token[..i], token[i + 1..].parse::<i32>().unwrap_or(0)),
        None => (token, 0),
    };
    let frac = mantissa.find('.').map_or(0, |i| mantissa.len() - i - 1) as i32;
    (frac - exp).clamp(0, u8::MAX as i32) as u8
}

fn number(token: &str, line: usize, what: &str) -> Result<(f64, u8)> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("{what} is not numeric: {token:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} is not finite: {token:?}")));
    }
    Ok((v, written_decimals(token)))
}

#[derive(Default)]
struct Block {
    start: usize,
    title: Option<String>,
    pepmass: Option<(Peak, bool)>,
    structure_id: Option<String>,
    metadata: Vec<(String, String)>,
    fragments: Vec<Peak>,
}

impl Block {
    fn header(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        match key {
            "TITLE" => self.title = Some(value.to_string()),
            "STRUCTUREID" => self.structure_id = Some(value.to_string()),
            "PEPMASS" => {
                let mut tokens = value.split_whitespace();
                let mz_tok = tokens
                    .next()
                    .ok_or_else(|| parse_err(line, "empty PEPMASS"))?;
                let (mz, mz_dec) = number(mz_tok, line, "PEPMASS m/z")?;
                let (intensity, int_dec, given) = match tokens.next() {
                    Some(t) => {
                        let (v, d) = number(t, line, "PEPMASS intensity")?;
                        (v, Some(d), true)
                    }
                    None => (0.0, None, false),
                };
                if tokens.next().is_some() {
                    return Err(parse_err(line, "PEPMASS has more than two fields"));
                }
                let mut peak =
                    Peak::new(mz, intensity).map_err(|e| parse_err(line, e.to_string()))?;
                peak.mz_decimals = Some(mz_dec);
                peak.intensity_decimals = int_dec;
                self.pepmass = Some((peak, given));
            }
            _ => self.metadata.push((key.to_string(), value.to_string())),
        }
        Ok(())
    }

    fn peak(&mut self, text: &str, line: usize) -> Result<()> {
        let mut tokens = text.split_whitespace();
        let (Some(m), Some(i), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(parse_err(line, format!("expected \"mz intensity\", got {text:?}")));
        };
        let (mz, mz_dec) = number(m, line, "peak m/z")?;
        let (intensity, int_dec) = number(i, line, "peak intensity")?;
        let mut peak = Peak::new(mz, intensity).map_err(|e| parse_err(line, e.to_string()))?;
        peak.mz_decimals = Some(mz_dec);
        peak.intensity_decimals = Some(int_dec);
        self.fragments.push(peak);
        Ok(())
    }

    fn finish(self, end_line: usize) -> Result<Spectrum> {
        let (precursor, given) = self
            .pepmass
            .ok_or_else(|| parse_err(self.start, "block has no PEPMASS"))?;
        let id = self
            .title
            .ok_or_else(|| parse_err(self.start, "block has no TITLE"))?;
        if self.fragments.is_empty() {
            return Err(parse_err(end_line, format!("spectrum {id} has no fragment peaks")));
        }
        Ok(Spectrum {
            id,
            precursor,
            fragments: self.fragments,
            structure_id: self.structure_id.unwrap_or_default(),
            precursor_intensity_given: given,
            metadata: self.metadata,
        })
    }
}

/// Parses every `BEGIN IONS … END IONS` block of `text`.
pub fn parse_mgf(text: &str) -> Result<Vec<Spectrum>> {
    let mut out = Vec::new();
    let mut block: Option<Block> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match (&mut block, line) {
            (None, "BEGIN IONS") => {
                block = Some(Block {
                    start: line_no,
                    ..Block::default()
                })
            }
            (None, _) => {
                return Err(parse_err(line_no, format!("content outside a block: {line:?}")))
            }
            (Some(_), "BEGIN IONS") => {
                return Err(parse_err(line_no, "BEGIN IONS inside an unterminated block"))
            }
            (Some(_), "END IONS") => out.push(block.take().unwrap().finish(line_no)?),
            (Some(b), _) => match line.split_once('=') {
                Some((key, value)) if key.chars().next().is_some_and(char::is_alphabetic) => {
                    b.header(key.trim(), value.trim(), line_no)?
                }
                _ => b.peak(line, line_no)?,
            },
        }
    }
    if let Some(b) = block {
        return Err(parse_err(b.start, "BEGIN IONS without END IONS"));
    }
    Ok(out)
}

fn fmt_value(out: &mut String, v: f64, decimals: Option<u8>) {
    match decimals {
        Some(d) => write!(out, "{v:.*}", d as usize),
        None => write!(out, "{v}"),
    }
    .unwrap();
}

/// Writes spectra in canonical form: fixed header order, fragments sorted by
/// m/z, numbers printed with their recorded decimal places, blocks separated
/// by one blank line.
pub fn serialize_mgf(spectra: &[Spectrum]) -> String {
    let mut out = String::new();
    for (k, s) in spectra.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        out.push_str("BEGIN IONS\n");
        writeln!(out, "TITLE={}", s.id).unwrap();
        out.push_str("PEPMASS=");
        fmt_value(&mut out, s.precursor.mz, s.precursor.mz_decimals);
        if s.precursor_intensity_given {
            out.push(' ');
            fmt_value(&mut out, s.precursor.intensity, s.precursor.intensity_decimals);
        }
        out.push('\n');
        if !s.structure_id.is_empty() {
            writeln!(out, "STRUCTUREID={}", s.structure_id).unwrap();
        }
        for (key, value) in &s.metadata {
            writeln!(out, "{key}={value}").unwrap();
        }
        for p in s.sorted_fragments() {
            fmt_value(&mut out, p.mz, p.mz_decimals);
            out.push(' ');
            fmt_value(&mut out, p.intensity, p.intensity_decimals);
            out.push('\n');
        }
        out.push_str("END IONS\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = "BEGIN IONS\nTITLE=s1\nPEPMASS=500.25\nSTRUCTUREID=ABC\n100.0 1.0\n200.0 2.0\nEND IONS\n";

    #[test]
    fn maps_fields() {
        let s = parse_mgf(ONE).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].id, "s1");
        assert_eq!(s[0].structure_id, "ABC");
        assert_eq!(s[0].precursor.mz, 500.25);
        assert_eq!(s[0].fragments.len(), 2);
        assert_eq!(s[0].fragments[1].intensity, 2.0);
        assert!(!s[0].precursor_intensity_given);
    }

    #[test]
    fn empty_input_is_empty() {
        assert!(parse_mgf("").unwrap().is_empty());
        assert!(parse_mgf("\n# comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn unknown_headers_are_kept_in_order() {
        let text = "BEGIN IONS\nTITLE=a\nCHARGE=1+\nPEPMASS=300.1234 55.5\nRTINSECONDS=12\n50.1234 1.0\nEND IONS\n";
        let s = &parse_mgf(text).unwrap()[0];
        assert_eq!(
            s.metadata,
            vec![
                ("CHARGE".to_string(), "1+".to_string()),
                ("RTINSECONDS".to_string(), "12".to_string())
            ]
        );
        assert_eq!(s.precursor.intensity, 55.5);
        assert!(s.precursor_intensity_given);
    }

    #[test]
    fn strict_errors_carry_line_numbers() {
        let missing = "BEGIN IONS\nTITLE=a\n100.0 1.0\nEND IONS\n";
        assert!(matches!(parse_mgf(missing), Err(Error::Parse { line: 1, .. })));

        let bad_peak = "BEGIN IONS\nTITLE=a\nPEPMASS=1.0\n100.0 abc\nEND IONS\n";
        assert!(matches!(parse_mgf(bad_peak), Err(Error::Parse { line: 4, .. })));

        let open = "BEGIN IONS\nTITLE=a\nPEPMASS=1.0\n100.0 1\n";
        assert!(matches!(parse_mgf(open), Err(Error::Parse { line: 1, .. })));

        let nested = "BEGIN IONS\nBEGIN IONS\n";
        assert!(matches!(parse_mgf(nested), Err(Error::Parse { line: 2, .. })));

        let stray = "100.0 1.0\n";
        assert!(matches!(parse_mgf(stray), Err(Error::Parse { line: 1, .. })));

        let three = "BEGIN IONS\nTITLE=a\nPEPMASS=1.0\n100.0 1 2\nEND IONS\n";
        assert!(matches!(parse_mgf(three), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn records_written_decimals() {
        assert_eq!(written_decimals("100.1"), 1);
        assert_eq!(written_decimals("100.1000"), 4);
        assert_eq!(written_decimals("100"), 0);
        assert_eq!(written_decimals("1.2345e2"), 2);
        assert_eq!(written_decimals("1e-3"), 3);
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "BEGIN IONS\nTITLE=x\nPEPMASS=412.1234 10.00\nSTRUCTUREID=K1\nCHARGE=1+\n101.0100 3.5\n250.2500 100.0\nEND IONS\n\nBEGIN IONS\nTITLE=y\nPEPMASS=300.000\n99.999 0.125\nEND IONS\n";
        assert_eq!(serialize_mgf(&parse_mgf(text).unwrap()), text);
    }

    #[test]
    fn serialization_sorts_fragments() {
        let text = "BEGIN IONS\nTITLE=x\nPEPMASS=400.000\n300.000 1.0\n100.000 2.0\nEND IONS\n";
        let out = serialize_mgf(&parse_mgf(text).unwrap());
        assert!(out.find("100.000").unwrap() < out.find("300.000").unwrap());
    }
}
