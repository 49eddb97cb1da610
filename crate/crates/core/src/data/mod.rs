//! Datasets: LIBSVM text input and output, normalization, shuffling and a
//! synthetic sparse classification generator.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};
use crate::types::{Coord, Label, SparseExample};

/// An in-memory sequence of examples with its feature universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<SparseExample>,
    feature_universe: usize,
}

impl Dataset {
    pub fn new(examples: Vec<SparseExample>) -> Self {
        let feature_universe = examples
            .iter()
            .flat_map(|ex| ex.features().iter().map(|&(c, _)| c))
            .collect::<BTreeSet<Coord>>()
            .len();
        Self { examples, feature_universe }
    }

    pub fn examples(&self) -> &[SparseExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<SparseExample> {
        self.examples
    }

    /// Number of distinct coordinates present in any example.
    pub fn feature_universe(&self) -> usize {
        self.feature_universe
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Streaming LIBSVM reader yielding one example per non-empty line.
///
/// Memory use is one line at a time; errors carry the 1-based line number.
pub struct LibsvmReader<R> {
    input: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> LibsvmReader<R> {
    pub fn new(input: R) -> Self {
        Self { input, line: 0, buf: String::new() }
    }
}

impl<R: BufRead> Iterator for LibsvmReader<R> {
    type Item = Result<SparseExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            return Some(parse_line(text, self.line));
        }
    }
}

fn parse_line(text: &str, line: usize) -> Result<SparseExample> {
    let err = |message: String| Error::Parse { line, message };
    let mut tokens = text.split_ascii_whitespace();
    let label_tok = tokens.next().expect("line is non-empty");
    let label = match label_tok.parse::<f64>() {
        Ok(v) if v == 1.0 => Label::Positive,
        Ok(v) if v == -1.0 || v == 0.0 => Label::Negative,
        _ => return Err(err(format!("label must be -1, 0 or +1, found `{label_tok}`"))),
    };
    let mut features = Vec::new();
    let mut prev: Option<Coord> = None;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected `index:value`, found `{tok}`")))?;
        let idx: Coord = idx.parse().map_err(|_| err(format!("bad feature index `{idx}`")))?;
        let val: f64 = val.parse().map_err(|_| err(format!("bad feature value `{val}`")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite feature value `{val}`")));
        }
        if prev.is_some_and(|p| p >= idx) {
            return Err(err(format!("feature indices must be strictly increasing (index {idx})")));
        }
        prev = Some(idx);
        features.push((idx, val));
    }
    SparseExample::new(features, label).map_err(|e| err(e.to_string()))
}

/// Reads a whole LIBSVM stream. An input without any example is an error.
pub fn parse_libsvm<R: BufRead>(input: R) -> Result<Dataset> {
    let examples = LibsvmReader::new(input).collect::<Result<Vec<_>>>()?;
    if examples.is_empty() {
        return Err(Error::Parse { line: 1, message: "no examples in input".into() });
    }
    Ok(Dataset::new(examples))
}

/// Opens a file for reading, decompressing when the name ends in `.gz`.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

pub fn read_libsvm_file(path: &Path) -> Result<Dataset> {
    parse_libsvm(open_input(path)?)
}

/// Writes one `label index:value ...` line per example. Labels are `+1`/`-1`
/// and values use shortest round-trip formatting. Importance weights are not
/// part of the format and are dropped.
pub fn serialize_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    for ex in ds.examples() {
        out.write_all(if ex.label().is_positive() { b"+1" } else { b"-1" })?;
        for (c, v) in ex.features() {
            write!(out, " {c}:{v}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Divides every feature vector by its Euclidean norm.
pub fn unit_scale(ds: &Dataset) -> Result<Dataset> {
    let examples = ds
        .examples()
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let norm = ex.squared_norm().sqrt();
            if norm == 0.0 {
                return Err(Error::Data(format!("example {i} has an all-zero feature vector")));
            }
            if norm == 1.0 {
                return Ok(ex.clone());
            }
            ex.map_values(|v| v / norm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { examples, feature_universe: ds.feature_universe })
}

/// Fisher-Yates permutation driven by ChaCha8 seeded with `seed`.
pub fn shuffle(ds: &Dataset, seed: u64) -> Dataset {
    let mut examples = ds.examples.clone();
    examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Dataset { examples, feature_universe: ds.feature_universe }
}

/// Parameters of [`synth_linear`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub d: usize,
    pub informative: usize,
    pub noise: f64,
    /// Tokens drawn per example. Repeats add up, so the number of distinct
    /// features per example is smaller (about 1% of `d` at the defaults).
    pub tokens: usize,
    /// Exponent of the Zipf law over token frequencies.
    pub skew: f64,
}

impl SynthParams {
    pub fn new(n: usize, d: usize, informative: usize, noise: f64) -> Self {
        Self { n, d, informative, noise, tokens: (d / 50).max(1), skew: 1.1 }
    }
}

/// Sparse binary classification data with a sparse linear ground truth.
///
/// Each example is a bag of tokens drawn from a Zipf law over a random
/// ranking of the `d` coordinates; feature values are the token counts scaled
/// to unit length. The `informative` coordinates carry nonzero true weights
/// of alternating sign and sit just below the most frequent ranks. An example
/// without any of them receives one. Labels are `sign(w·θ)`, flipped
/// independently with probability `noise`.
pub fn synth_linear(n: usize, d: usize, informative: usize, noise: f64, seed: u64) -> Result<Dataset> {
    synth_with(&SynthParams::new(n, d, informative, noise), seed)
}

pub fn synth_with(p: &SynthParams, seed: u64) -> Result<Dataset> {
    if p.d == 0 || p.informative == 0 || p.informative > p.d {
        return Err(Error::Config(format!(
            "need 0 < informative <= d, got informative={} d={}",
            p.informative, p.d
        )));
    }
    if !(0.0..0.5).contains(&p.noise) {
        return Err(Error::Config(format!("noise must lie in [0, 0.5), got {}", p.noise)));
    }
    if p.tokens == 0 {
        return Err(Error::Config("need at least one token per example".into()));
    }
    if !(p.skew.is_finite() && p.skew > 0.0) {
        return Err(Error::Config(format!("skew must be finite and > 0, got {}", p.skew)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranking: Vec<Coord> = (0..p.d as Coord).collect();
    ranking.shuffle(&mut rng);

    // Informative ranks come from [2k, 12k), clipped to the universe.
    let hi = (12 * p.informative).min(p.d);
    let lo = (2 * p.informative).min(hi - p.informative);
    let mut pool: Vec<usize> = (lo..hi).collect();
    pool.shuffle(&mut rng);
    let mut truth = vec![0.0; p.d];
    let mut informative: Vec<Coord> = Vec::with_capacity(p.informative);
    for (k, &rank) in pool[..p.informative].iter().enumerate() {
        let c = ranking[rank];
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        truth[c as usize] = sign * (0.5 + rng.random::<f64>());
        informative.push(c);
    }

    let zipf = Zipf::new(p.d as f64, p.skew).map_err(|e| Error::Config(e.to_string()))?;
    let mut examples = Vec::with_capacity(p.n);
    let mut counts: BTreeMap<Coord, f64> = BTreeMap::new();
    for _ in 0..p.n {
        counts.clear();
        for _ in 0..p.tokens {
            let rank = zipf.sample(&mut rng) as usize - 1;
            *counts.entry(ranking[rank]).or_default() += 1.0;
        }
        if !counts.keys().any(|&c| truth[c as usize] != 0.0) {
            *counts.entry(informative[rng.random_range(0..informative.len())]).or_default() += 1.0;
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        let features: Vec<(Coord, f64)> = counts.iter().map(|(&c, &v)| (c, v / norm)).collect();
        let margin: f64 = features.iter().map(|&(c, v)| truth[c as usize] * v).sum();
        let clean = if margin >= 0.0 { Label::Positive } else { Label::Negative };
        let flip = rng.random::<f64>() < p.noise;
        let label = if flip { Label::from_sign(-clean.sign()) } else { clean };
        examples.push(SparseExample::new(features, label)?);
    }
    Ok(Dataset::new(examples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_line() {
        let ds = parse_libsvm("+1 3:1.5 7:2\n".as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.examples()[0].features(), &[(3, 1.5), (7, 2.0)]);
        assert_eq!(ds.examples()[0].label(), Label::Positive);
        assert_eq!(ds.feature_universe(), 2);
    }

    #[test]
    fn zero_label_is_negative() {
        let ds = parse_libsvm("0 1:1\n".as_bytes()).unwrap();
        assert_eq!(ds.examples()[0].label(), Label::Negative);
    }

    #[test]
    fn decreasing_index_reports_line() {
        let err = parse_libsvm("1 5:2 3:1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err:?}");
        let err = parse_libsvm("1 1:1\n\n-1 2:x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn empty_input_is_error() {
        assert!(matches!(parse_libsvm("\n\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn bad_label_is_error() {
        assert!(parse_libsvm("2 1:1\n".as_bytes()).is_err());
        assert!(parse_libsvm("abc 1:1\n".as_bytes()).is_err());
    }

    #[test]
    fn unit_scale_three_four_five() {
        let ds = parse_libsvm("1 1:3 2:4\n".as_bytes()).unwrap();
        let scaled = unit_scale(&ds).unwrap();
        let f = scaled.examples()[0].features();
        assert!((f[0].1 - 0.6).abs() < 1e-15 && (f[1].1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn unit_scale_rejects_zero_vector() {
        let ds = Dataset::new(vec![
            SparseExample::new(vec![(0, 1.0)], Label::Positive).unwrap(),
            SparseExample::new(vec![], Label::Negative).unwrap(),
        ]);
        assert!(matches!(unit_scale(&ds), Err(Error::Data(m)) if m.contains("example 1")));
    }

    #[test]
    fn shuffle_single_is_unchanged() {
        let ds = parse_libsvm("1 1:3\n".as_bytes()).unwrap();
        assert_eq!(shuffle(&ds, 9), ds);
    }

    #[test]
    fn synth_rejects_bad_params() {
        assert!(synth_linear(10, 5, 6, 0.0, 0).is_err());
        assert!(synth_linear(10, 5, 2, 0.5, 0).is_err());
        assert!(synth_linear(10, 5, 5, 0.0, 0).is_ok());
    }
}
