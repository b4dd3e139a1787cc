//! Output formats: CSV tables, atomic file writes and the binary ensemble
//! dump.
//!
//! CSV uses `,` separators, `.` decimals, LF line endings and 17
//! significant digits for every float, so files diff cleanly across
//! platforms.

use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::Path;

use nnjscc_core::ensemble::{build_partition, CodeEnsemble};
use nnjscc_core::montecarlo::TrialOutcome;
use nnjscc_core::CodebookKind;

use crate::error::{AppError, AppResult};

/// Magic bytes opening an ensemble dump.
pub const ENSEMBLE_MAGIC: &[u8; 8] = b"NNJSCC1\0";

/// Formats a float with 17 significant digits; non-finite values as
/// `nan`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table built in memory.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Csv { text: String::new() };
        csv.raw_row(header.iter().copied());
        csv
    }

    fn raw_row<'a>(&mut self, cells: impl IntoIterator<Item = &'a str>) {
        for (i, c) in cells.into_iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(c);
        }
        self.text.push('\n');
    }

    pub fn row(&mut self, cells: &[String]) {
        self.raw_row(cells.iter().map(String::as_str));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Per-trial table with columns `trial, category, I, J, Ihat, Jhat,
/// distortion`; fields that do not apply are left empty.
pub fn trials_csv(outcomes: &[TrialOutcome]) -> String {
    let mut text = String::from("trial,category,I,J,Ihat,Jhat,distortion\n");
    let opt = |v: Option<u128>| v.map(|x| x.to_string()).unwrap_or_default();
    for (t, o) in outcomes.iter().enumerate() {
        let _ = writeln!(
            text,
            "{t},{},{},{},{},{},{}",
            o.category.as_str(),
            opt(o.type_index.map(|i| i as u128)),
            opt(o.codeword_index),
            opt(o.decoded_type.map(|i| i as u128)),
            opt(o.decoded_codeword),
            o.distortion.map(fmt_f64).unwrap_or_default(),
        );
    }
    text
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory, so the path either keeps its old content or gets the whole
/// new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| AppError::Io(e.error))?;
    Ok(())
}

fn kind_code(kind: CodebookKind) -> u64 {
    match kind {
        CodebookKind::Spherical => 0,
        CodebookKind::Iid => 1,
    }
}

fn kind_from_code(code: u64) -> io::Result<CodebookKind> {
    match code {
        0 => Ok(CodebookKind::Spherical),
        1 => Ok(CodebookKind::Iid),
        _ => Err(io::Error::new(io::ErrorKind::InvalidData, format!("unknown codebook kind {code}"))),
    }
}

/// Serialises an ensemble: the magic, then little-endian `u64` fields
/// `k, n, N, source kind, channel kind, M_1..M_N`, then the `ξ` and `σ²`
/// of the partition and every source codeword followed by every channel
/// codeword as little-endian `f64`, type-major then index-major.
pub fn write_ensemble(ens: &CodeEnsemble, out: &mut impl Write) -> io::Result<()> {
    out.write_all(ENSEMBLE_MAGIC)?;
    let n_types = ens.num_types();
    let header = [ens.k(), ens.n(), n_types].map(|v| v as u64);
    for v in header.into_iter().chain([kind_code(ens.source_kind()), kind_code(ens.channel_kind())]) {
        out.write_all(&v.to_le_bytes())?;
    }
    for &m in ens.sizes() {
        out.write_all(&(m as u64).to_le_bytes())?;
    }
    let p = ens.partition();
    for x in [p.xi(), p.sigma2()].iter().chain(ens.source_values()).chain(ens.channel_values()) {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads back an ensemble written by [`write_ensemble`].
pub fn read_ensemble(input: &mut impl Read) -> AppResult<CodeEnsemble> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != ENSEMBLE_MAGIC {
        return Err(AppError::Io(io::Error::new(io::ErrorKind::InvalidData, "not an ensemble dump")));
    }
    let mut word = || -> io::Result<[u8; 8]> {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        Ok(b)
    };
    let mut u = || word().map(u64::from_le_bytes);
    let (k, n, n_types) = (u()? as usize, u()? as usize, u()? as usize);
    let (src_kind, ch_kind) = (kind_from_code(u()?)?, kind_from_code(u()?)?);
    let m: Vec<usize> = (0..n_types).map(|_| u().map(|v| v as usize)).collect::<io::Result<_>>()?;
    let mut f = || word().map(f64::from_le_bytes);
    let (xi, sigma2) = (f()?, f()?);
    let total: usize = m.iter().sum();
    let source = (0..total * k).map(|_| f()).collect::<io::Result<Vec<_>>>()?;
    let channel = (0..total * n).map(|_| f()).collect::<io::Result<Vec<_>>>()?;
    let partition = build_partition(k, xi, sigma2)?;
    Ok(CodeEnsemble::from_codewords(partition, k, n, m, source, channel, src_kind, ch_kind)?)
}
