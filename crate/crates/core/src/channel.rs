//! Interference-channel instances: generation, validation, serialization.
//!
//! Channel entries are i.i.d. circular-symmetric complex Gaussian with unit
//! variance (real and imaginary parts each `N(0, 1/2)`), drawn from a
//! counter-based stream so that equal `(seed, stream_id)` pairs reproduce an
//! instance bit-exactly regardless of worker-thread count.
//!
//! Instances round-trip through a plain-text format with one `re im` pair per
//! vector entry at 17 significant digits, which is enough to reproduce every
//! `f64` exactly. See the crate README for the layout.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector, Cpx};

/// Default smallest-singular-value threshold for the general-position check.
pub const GENERAL_POSITION_TOL: f64 = 1e-9;

/// Seed plus per-trial stream offset identifying one random draw.
///
/// Streams let Monte Carlo trials run on independent generators without any
/// shared mutable state: trial `t` uses `RngSpec::with_stream(seed, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Instantiate the generator for this (seed, stream) pair.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Errors from instance construction, validation, and (de)serialization.
#[derive(Debug)]
pub enum ChannelError {
    /// Field values violate an invariant (non-positive powers, shape
    /// mismatches, out-of-range stream counts).
    Invalid(String),
    /// Malformed instance or table file.
    Parse { line: usize, msg: String },
    Io(std::io::Error),
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::Invalid(msg) => write!(f, "invalid instance: {msg}"),
            ChannelError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            ChannelError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ChannelError {}

impl From<std::io::Error> for ChannelError {
    fn from(e: std::io::Error) -> Self {
        ChannelError::Io(e)
    }
}

fn sample_unit_gaussian(rng: &mut ChaCha12Rng) -> Cpx {
    // Re and Im each N(0, 1/2) so that E|entry|^2 = 1.
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cpx::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A K-pair MISO interference channel: all K^2 channel vectors plus noise
/// powers and transmit power budgets.
///
/// `h(i, j)` is the length-`N` (conjugated) channel vector from transmitter
/// `j` to receiver `i`; indices are 0-based in the API and 1-based in files.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoChannelSet {
    k: usize,
    n: usize,
    h: Vec<CVector>, // receiver-major: h[i * k + j]
    sigma2: Vec<f64>,
    p: Vec<f64>,
}

impl MisoChannelSet {
    pub fn new(
        k: usize,
        n: usize,
        h: Vec<CVector>,
        sigma2: Vec<f64>,
        p: Vec<f64>,
    ) -> Result<Self, ChannelError> {
        if k == 0 || n == 0 {
            return Err(ChannelError::Invalid("K and N must be at least 1".into()));
        }
        if h.len() != k * k {
            return Err(ChannelError::Invalid(format!(
                "expected {} channel vectors, got {}",
                k * k,
                h.len()
            )));
        }
        if let Some(bad) = h.iter().position(|v| v.len() != n) {
            return Err(ChannelError::Invalid(format!(
                "channel vector {} has length {}, expected {}",
                bad,
                h[bad].len(),
                n
            )));
        }
        check_powers(k, &sigma2, &p)?;
        Ok(Self { k, n, h, sigma2, p })
    }

    /// Draw a random instance with unit-variance entries.
    pub fn sample(
        k: usize,
        n: usize,
        sigma2: &[f64],
        p: &[f64],
        rng_spec: &RngSpec,
    ) -> Result<Self, ChannelError> {
        let mut rng = rng_spec.rng();
        let h = (0..k * k)
            .map(|_| CVector::from_fn(n, |_, _| sample_unit_gaussian(&mut rng)))
            .collect();
        Self::new(k, n, h, sigma2.to_vec(), p.to_vec())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Channel vector from transmitter `j` to receiver `i`.
    pub fn h(&self, i: usize, j: usize) -> &CVector {
        &self.h[i * self.k + j]
    }

    pub fn sigma2(&self, i: usize) -> f64 {
        self.sigma2[i]
    }

    pub fn power(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn sigma2_all(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn power_all(&self) -> &[f64] {
        &self.p
    }

    /// Check the general-position assumption: for every receiver-side bundle
    /// `{h_ji : j = 0..K}` at transmitter `i`, every subset of size
    /// `min(N, K)` must have smallest singular value above `tol`.
    pub fn validate_general_position(&self, tol: f64) -> bool {
        let m = self.n.min(self.k);
        for i in 0..self.k {
            for subset in (0..self.k).combinations(m) {
                let mut a = CMatrix::zeros(self.n, m);
                for (col, &j) in subset.iter().enumerate() {
                    a.set_column(col, self.h(j, i));
                }
                let sv = a.svd(false, false).singular_values;
                if sv[sv.len() - 1] <= tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ChannelError> {
        let mut out = String::new();
        self.write_text(&mut out);
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    fn write_text(&self, out: &mut String) {
        use fmt::Write as _;
        let _ = writeln!(out, "miso {} {}", self.k, self.n);
        let _ = writeln!(out, "sigma2 {}", join_f64(&self.sigma2));
        let _ = writeln!(out, "P {}", join_f64(&self.p));
        for i in 0..self.k {
            for j in 0..self.k {
                let _ = writeln!(out, "h {} {}", i + 1, j + 1);
                for z in self.h(i, j).iter() {
                    let _ = writeln!(out, "{:.16e} {:.16e}", z.re, z.im);
                }
            }
        }
    }
}

/// A K-pair MIMO interference channel with `M x N` channel matrices and a
/// per-transmitter stream count `d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannelSet {
    k: usize,
    m: usize,
    n: usize,
    h: Vec<CMatrix>, // receiver-major: h[i * k + j]
    sigma2: Vec<f64>,
    p: Vec<f64>,
    d: Vec<usize>,
}

impl MimoChannelSet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        m: usize,
        n: usize,
        h: Vec<CMatrix>,
        sigma2: Vec<f64>,
        p: Vec<f64>,
        d: Vec<usize>,
    ) -> Result<Self, ChannelError> {
        if k == 0 || m == 0 || n == 0 {
            return Err(ChannelError::Invalid("K, M, N must be at least 1".into()));
        }
        if h.len() != k * k {
            return Err(ChannelError::Invalid(format!(
                "expected {} channel matrices, got {}",
                k * k,
                h.len()
            )));
        }
        if let Some(bad) = h.iter().position(|hm| hm.nrows() != m || hm.ncols() != n) {
            return Err(ChannelError::Invalid(format!(
                "channel matrix {} has shape {}x{}, expected {}x{}",
                bad,
                h[bad].nrows(),
                h[bad].ncols(),
                m,
                n
            )));
        }
        check_powers(k, &sigma2, &p)?;
        if d.len() != k {
            return Err(ChannelError::Invalid("d must have K entries".into()));
        }
        if let Some(bad) = d.iter().position(|&di| di == 0 || di > m.min(n)) {
            return Err(ChannelError::Invalid(format!(
                "stream count d[{}] = {} outside 1..=min(M, N)",
                bad, d[bad]
            )));
        }
        Ok(Self { k, m, n, h, sigma2, p, d })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        k: usize,
        m: usize,
        n: usize,
        sigma2: &[f64],
        p: &[f64],
        d: &[usize],
        rng_spec: &RngSpec,
    ) -> Result<Self, ChannelError> {
        let mut rng = rng_spec.rng();
        let h = (0..k * k)
            .map(|_| DMatrix::from_fn(m, n, |_, _| sample_unit_gaussian(&mut rng)))
            .collect();
        Self::new(k, m, n, h, sigma2.to_vec(), p.to_vec(), d.to_vec())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Channel matrix from transmitter `j` to receiver `i`.
    pub fn h(&self, i: usize, j: usize) -> &CMatrix {
        &self.h[i * self.k + j]
    }

    pub fn sigma2(&self, i: usize) -> f64 {
        self.sigma2[i]
    }

    pub fn power(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn d(&self, i: usize) -> usize {
        self.d[i]
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ChannelError> {
        let mut out = String::new();
        self.write_text(&mut out);
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    fn write_text(&self, out: &mut String) {
        use fmt::Write as _;
        let _ = writeln!(out, "mimo {} {} {}", self.k, self.m, self.n);
        let _ = writeln!(out, "sigma2 {}", join_f64(&self.sigma2));
        let _ = writeln!(out, "P {}", join_f64(&self.p));
        let _ = writeln!(
            out,
            "d {}",
            self.d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        );
        for i in 0..self.k {
            for j in 0..self.k {
                let _ = writeln!(out, "H {} {}", i + 1, j + 1);
                let hm = self.h(i, j);
                for r in 0..self.m {
                    let row = (0..self.n)
                        .map(|c| format!("{:.16e} {:.16e}", hm[(r, c)].re, hm[(r, c)].im))
                        .collect::<Vec<_>>()
                        .join(" ");
                    let _ = writeln!(out, "{row}");
                }
            }
        }
    }
}

fn check_powers(k: usize, sigma2: &[f64], p: &[f64]) -> Result<(), ChannelError> {
    if sigma2.len() != k || p.len() != k {
        return Err(ChannelError::Invalid(format!(
            "sigma2 and P must each have {k} entries"
        )));
    }
    if let Some(bad) = sigma2.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(ChannelError::Invalid(format!(
            "sigma2[{}] = {} must be positive",
            bad, sigma2[bad]
        )));
    }
    if let Some(bad) = p.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(ChannelError::Invalid(format!(
            "P[{}] = {} must be positive",
            bad, p[bad]
        )));
    }
    Ok(())
}

fn join_f64(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

/// Either flavor of channel instance, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Miso(MisoChannelSet),
    Mimo(MimoChannelSet),
}

impl Instance {
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ChannelError> {
        match self {
            Instance::Miso(ch) => ch.save(path),
            Instance::Mimo(ch) => ch.save(path),
        }
    }

    pub fn into_miso(self) -> Result<MisoChannelSet, ChannelError> {
        match self {
            Instance::Miso(ch) => Ok(ch),
            Instance::Mimo(_) => Err(ChannelError::Invalid(
                "expected a miso instance, found mimo".into(),
            )),
        }
    }

    pub fn into_mimo(self) -> Result<MimoChannelSet, ChannelError> {
        match self {
            Instance::Mimo(ch) => Ok(ch),
            Instance::Miso(_) => Err(ChannelError::Invalid(
                "expected a mimo instance, found miso".into(),
            )),
        }
    }
}

/// Load a `miso`/`mimo` instance file written by [`MisoChannelSet::save`] or
/// [`MimoChannelSet::save`].
pub fn load_instance<P: AsRef<Path>>(path: P) -> Result<Instance, ChannelError> {
    let text = fs::read_to_string(path)?;
    parse_instance(&text)
}

/// Save either instance flavor.
pub fn save_instance<P: AsRef<Path>>(inst: &Instance, path: P) -> Result<(), ChannelError> {
    inst.save(path)
}

struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate() }
    }

    /// Next non-empty line as (1-based line number, tokens).
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (idx, line) in self.lines.by_ref() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((idx + 1, tokens));
            }
        }
        None
    }

    fn expect_tokens(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ChannelError> {
        self.next_tokens().ok_or_else(|| ChannelError::Parse {
            line: 0,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_usize(tok: &str, line: usize, field: &str) -> Result<usize, ChannelError> {
    tok.parse().map_err(|_| ChannelError::Parse {
        line,
        msg: format!("invalid {field}: {tok:?}"),
    })
}

fn parse_f64(tok: &str, line: usize, field: &str) -> Result<f64, ChannelError> {
    tok.parse().map_err(|_| ChannelError::Parse {
        line,
        msg: format!("invalid {field}: {tok:?}"),
    })
}

fn parse_labeled_f64_row(
    reader: &mut LineReader,
    label: &str,
    count: usize,
) -> Result<Vec<f64>, ChannelError> {
    let (line, tokens) = reader.expect_tokens(label)?;
    if tokens.first() != Some(&label) {
        return Err(ChannelError::Parse {
            line,
            msg: format!("expected `{label}` line, found {:?}", tokens.first()),
        });
    }
    if tokens.len() != count + 1 {
        return Err(ChannelError::Parse {
            line,
            msg: format!("`{label}` line needs {count} values, found {}", tokens.len() - 1),
        });
    }
    tokens[1..]
        .iter()
        .map(|t| parse_f64(t, line, label))
        .collect()
}

fn parse_block_header(
    reader: &mut LineReader,
    label: &str,
    want_i: usize,
    want_j: usize,
) -> Result<(), ChannelError> {
    let (line, tokens) = reader.expect_tokens(label)?;
    if tokens.len() != 3 || tokens[0] != label {
        return Err(ChannelError::Parse {
            line,
            msg: format!("expected `{label} {want_i} {want_j}` block header"),
        });
    }
    let i = parse_usize(tokens[1], line, "receiver index")?;
    let j = parse_usize(tokens[2], line, "transmitter index")?;
    if i != want_i || j != want_j {
        return Err(ChannelError::Parse {
            line,
            msg: format!("expected block `{label} {want_i} {want_j}`, found `{label} {i} {j}`"),
        });
    }
    Ok(())
}

fn parse_instance(text: &str) -> Result<Instance, ChannelError> {
    let mut reader = LineReader::new(text);
    let (line, header) = reader.expect_tokens("header")?;
    match header[0] {
        "miso" => {
            if header.len() != 3 {
                return Err(ChannelError::Parse {
                    line,
                    msg: "miso header needs `miso K N`".into(),
                });
            }
            let k = parse_usize(header[1], line, "K")?;
            let n = parse_usize(header[2], line, "N")?;
            let sigma2 = parse_labeled_f64_row(&mut reader, "sigma2", k)?;
            let p = parse_labeled_f64_row(&mut reader, "P", k)?;
            let mut h = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    parse_block_header(&mut reader, "h", i + 1, j + 1)?;
                    let mut v = CVector::zeros(n);
                    for row in 0..n {
                        let (ln, toks) = reader.expect_tokens("re im pair")?;
                        if toks.len() != 2 {
                            return Err(ChannelError::Parse {
                                line: ln,
                                msg: format!("expected `re im` pair, found {} tokens", toks.len()),
                            });
                        }
                        v[row] = Cpx::new(
                            parse_f64(toks[0], ln, "re")?,
                            parse_f64(toks[1], ln, "im")?,
                        );
                    }
                    h.push(v);
                }
            }
            MisoChannelSet::new(k, n, h, sigma2, p).map(Instance::Miso)
        }
        "mimo" => {
            if header.len() != 4 {
                return Err(ChannelError::Parse {
                    line,
                    msg: "mimo header needs `mimo K M N`".into(),
                });
            }
            let k = parse_usize(header[1], line, "K")?;
            let m = parse_usize(header[2], line, "M")?;
            let n = parse_usize(header[3], line, "N")?;
            let sigma2 = parse_labeled_f64_row(&mut reader, "sigma2", k)?;
            let p = parse_labeled_f64_row(&mut reader, "P", k)?;
            let d = parse_labeled_f64_row(&mut reader, "d", k)?
                .into_iter()
                .map(|v| v as usize)
                .collect::<Vec<_>>();
            let mut h = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    parse_block_header(&mut reader, "H", i + 1, j + 1)?;
                    let mut hm = CMatrix::zeros(m, n);
                    for row in 0..m {
                        let (ln, toks) = reader.expect_tokens("matrix row")?;
                        if toks.len() != 2 * n {
                            return Err(ChannelError::Parse {
                                line: ln,
                                msg: format!(
                                    "matrix row needs {} re/im values, found {}",
                                    2 * n,
                                    toks.len()
                                ),
                            });
                        }
                        for c in 0..n {
                            hm[(row, c)] = Cpx::new(
                                parse_f64(toks[2 * c], ln, "re")?,
                                parse_f64(toks[2 * c + 1], ln, "im")?,
                            );
                        }
                    }
                    h.push(hm);
                }
            }
            MimoChannelSet::new(k, m, n, h, sigma2, p, d).map(Instance::Mimo)
        }
        other => Err(ChannelError::Parse {
            line,
            msg: format!("unknown instance kind {other:?}, expected `miso` or `mimo`"),
        }),
    }
}
