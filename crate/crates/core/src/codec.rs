//! Modified minimum-distance encoder and modified nearest-neighbour decoder.

use serde::{Deserialize, Serialize};

use crate::ensemble::{Classification, CodeEnsemble};
use crate::error::{bail, Result};

/// Output of the encoder for a typical source sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeResult {
    pub type_index: usize,
    pub codeword_index: usize,
    /// `d(S, Ŝ(I, J))`.
    pub distortion: f64,
}

/// Output of the decoder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub type_index: usize,
    pub codeword_index: usize,
    /// Value of the minimised objective (or maximised metric for
    /// [`decode_via_density`]).
    pub score: f64,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline]
pub(crate) fn sq_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Normalised quadratic distortion `‖x − y‖² / len`.
pub fn distortion(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        bail!(Usage, "distortion of vectors with lengths {} and {}", x.len(), y.len());
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    Ok(sq_dist(x, y) / x.len() as f64)
}

/// Encodes `s`: classify it, then pick the closest codeword of its type,
/// smallest index on ties. `None` when `s` is atypical or its type was
/// dropped (the encoder declares an error).
pub fn encode(s: &[f64], ensemble: &CodeEnsemble) -> Result<Option<EncodeResult>> {
    if s.len() != ensemble.k() {
        bail!(Usage, "source sequence has length {}, expected k={}", s.len(), ensemble.k());
    }
    let i = match ensemble.partition().classify(s) {
        Classification::Type(i) if ensemble.m(i) > 0 => i,
        _ => return Ok(None),
    };
    let k = ensemble.k();
    let mut best = (1, f64::INFINITY);
    for (j, cw) in ensemble.source_book(i).chunks_exact(k).enumerate() {
        let d = sq_dist(s, cw);
        if d < best.1 {
            best = (j + 1, d);
        }
    }
    Ok(Some(EncodeResult { type_index: i, codeword_index: best.0, distortion: best.1 / k as f64 }))
}

/// Decodes `y` by minimising `‖X(ĩ, j̃) − y‖² + 2 ln M_ĩ` over all
/// codewords, lexicographically smallest `(ĩ, j̃)` on ties.
pub fn decode(y: &[f64], ensemble: &CodeEnsemble) -> Result<DecodeResult> {
    let n = check_output(y, ensemble)?;
    let mut best: Option<DecodeResult> = None;
    for i in 1..=ensemble.num_types() {
        if ensemble.m(i) == 0 {
            continue;
        }
        let penalty = 2.0 * ensemble.ln_m(i);
        for (j, cw) in ensemble.channel_book(i).chunks_exact(n).enumerate() {
            let score = sq_dist(cw, y) + penalty;
            if best.map_or(true, |b| score < b.score) {
                best = Some(DecodeResult { type_index: i, codeword_index: j + 1, score });
            }
        }
    }
    best.ok_or_else(|| crate::Error::Usage("decoding with an empty ensemble".into()))
}

/// Mismatched information density
/// `ı(x; y) = nC(P) + ‖y‖²/(2(P+1)) − ‖y − x‖²/2`.
pub fn mismatched_density(x: &[f64], y: &[f64], power: f64) -> Result<f64> {
    if x.len() != y.len() {
        bail!(Usage, "information density of vectors with lengths {} and {}", x.len(), y.len());
    }
    if !(power >= 0.0) {
        bail!(Domain, "channel power must be nonnegative, got {power}");
    }
    let n = x.len() as f64;
    Ok(n * 0.5 * libm::log1p(power) + sq_norm(y) / (2.0 * (power + 1.0)) - 0.5 * sq_dist(y, x))
}

/// Decodes `y` by maximising `ı(X(ĩ, j̃); y) − ln M_ĩ`, with the same
/// tie-break as [`decode`]. Selects the same codeword as [`decode`].
pub fn decode_via_density(y: &[f64], ensemble: &CodeEnsemble, power: f64) -> Result<DecodeResult> {
    let n = check_output(y, ensemble)?;
    let mut best: Option<DecodeResult> = None;
    for i in 1..=ensemble.num_types() {
        if ensemble.m(i) == 0 {
            continue;
        }
        let ln_m = ensemble.ln_m(i);
        for (j, cw) in ensemble.channel_book(i).chunks_exact(n).enumerate() {
            let score = mismatched_density(cw, y, power)? - ln_m;
            if best.map_or(true, |b| score > b.score) {
                best = Some(DecodeResult { type_index: i, codeword_index: j + 1, score });
            }
        }
    }
    best.ok_or_else(|| crate::Error::Usage("decoding with an empty ensemble".into()))
}

fn check_output(y: &[f64], ensemble: &CodeEnsemble) -> Result<usize> {
    if y.len() != ensemble.n() {
        bail!(Usage, "channel output has length {}, expected n={}", y.len(), ensemble.n());
    }
    Ok(ensemble.n())
}
