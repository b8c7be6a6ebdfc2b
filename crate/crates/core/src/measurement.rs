//! POVM outcome distributions, record sampling and record files.
//!
//! Three POVMs are supported, all built from the projectors `Pi_k^(m)` of a
//! [`MubFamily`]:
//!
//! | mode            | bases        | element               |
//! |-----------------|--------------|-----------------------|
//! | `Offdiag`       | `2..=d+1`    | `Pi_k^(m) / d`        |
//! | `Full`          | `1..=d+1`    | `Pi_k^(m) / (d + 1)`  |
//! | `Computational` | `1`          | `Pi_k^(1)`            |
//!
//! Picking a basis uniformly and then measuring in it is the same as drawing
//! `(m, k)` from the flat distribution over all included pairs, so sampling
//! is one alias-table draw per copy.
//!
//! Sampling is sharded into blocks of [`SHARD_LEN`] draws. Block `c` uses
//! ChaCha8 seeded with the record seed on stream `c`, so the output does not
//! depend on how many worker threads run the blocks.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqstError};
use crate::mub::MubFamily;
use crate::qstate::DensityMatrix;

/// Draws per deterministic sampling shard.
pub const SHARD_LEN: u64 = 1 << 16;

const BINARY_MAGIC: &[u8; 8] = b"SQSTBIN1";
const BINARY_HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmMode {
    Offdiag,
    Full,
    Computational,
}

impl PovmMode {
    /// First and last basis label included.
    pub fn basis_range(self, d: usize) -> (usize, usize) {
        match self {
            PovmMode::Offdiag => (2, d + 1),
            PovmMode::Full => (1, d + 1),
            PovmMode::Computational => (1, 1),
        }
    }

    /// Divisor `B` in `p_km = <k,m|rho|k,m> / B`.
    pub fn weight_divisor(self, d: usize) -> f64 {
        match self {
            PovmMode::Offdiag => d as f64,
            PovmMode::Full => (d + 1) as f64,
            PovmMode::Computational => 1.0,
        }
    }

    pub fn outcome_count(self, d: usize) -> usize {
        let (lo, hi) = self.basis_range(d);
        (hi - lo + 1) * d
    }

    /// Flat index of `(m, k)`, or `None` if the pair is not an outcome of this mode.
    pub fn index(self, d: usize, m: usize, k: usize) -> Option<usize> {
        let (lo, hi) = self.basis_range(d);
        (m >= lo && m <= hi && k < d).then(|| (m - lo) * d + k)
    }

    pub fn outcome(self, d: usize, index: usize) -> Outcome {
        let (lo, _) = self.basis_range(d);
        Outcome {
            m: (lo + index / d) as u16,
            k: (index % d) as u16,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PovmMode::Offdiag => "offdiag",
            PovmMode::Full => "full",
            PovmMode::Computational => "computational",
        }
    }

    fn code(self) -> u8 {
        match self {
            PovmMode::Offdiag => 0,
            PovmMode::Full => 1,
            PovmMode::Computational => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        [PovmMode::Offdiag, PovmMode::Full, PovmMode::Computational]
            .into_iter()
            .find(|m| m.code() == c)
    }
}

impl fmt::Display for PovmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PovmMode {
    type Err = SqstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "offdiag" => Ok(PovmMode::Offdiag),
            "full" => Ok(PovmMode::Full),
            "computational" => Ok(PovmMode::Computational),
            other => Err(SqstError::InvalidArgument(format!(
                "unknown POVM mode '{other}'"
            ))),
        }
    }
}

/// One measurement result: basis label `m` (1-based) and outcome `k` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Outcome {
    pub m: u16,
    pub k: u16,
}

/// Vose alias table over `0..len`.
#[derive(Debug, Clone)]
pub struct AliasTable {
    accept: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// `weights` must be nonnegative with a positive sum.
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        if n == 0
            || total.is_nan()
            || total <= 0.0
            || weights.iter().any(|w| *w < 0.0 || !w.is_finite())
        {
            return Err(SqstError::InvalidArgument(
                "alias table needs nonnegative weights with positive sum".into(),
            ));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut accept = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            accept[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers carry rounding residue only
        for i in small.into_iter().chain(large) {
            accept[i] = 1.0;
        }
        Ok(AliasTable { accept, alias })
    }

    pub fn len(&self) -> usize {
        self.accept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accept.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let col = rng.random_range(0..self.accept.len());
        if rng.random::<f64>() < self.accept[col] {
            col
        } else {
            self.alias[col] as usize
        }
    }
}

/// Exact outcome probabilities of one POVM on one state.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    mode: PovmMode,
    d: usize,
    probs: Vec<f64>,
    table: AliasTable,
    fingerprint: u64,
}

/// Born-rule probabilities `p_km = <k,m|rho|k,m> / B` for every outcome of `mode`.
pub fn outcome_distribution(
    rho: &DensityMatrix,
    family: &MubFamily,
    mode: PovmMode,
) -> Result<OutcomeDistribution> {
    let d = family.dim();
    if rho.dim() != d {
        return Err(SqstError::DimensionMismatch {
            expected: d,
            actual: rho.dim(),
        });
    }
    let (lo, hi) = mode.basis_range(d);
    let b = mode.weight_divisor(d);
    let probs: Vec<f64> = (lo..=hi)
        .flat_map(|m| (0..d).map(move |k| (m, k)))
        .map(|(m, k)| (family.expectation(rho.as_matrix(), m, k).re / b).max(0.0))
        .collect();
    OutcomeDistribution::from_probabilities(mode, d, probs, family.fingerprint())
}

impl OutcomeDistribution {
    /// Wraps a probability table in canonical `(m, k)` order for `mode`.
    pub fn from_probabilities(
        mode: PovmMode,
        d: usize,
        probs: Vec<f64>,
        fingerprint: u64,
    ) -> Result<Self> {
        if probs.len() != mode.outcome_count(d) {
            return Err(SqstError::DimensionMismatch {
                expected: mode.outcome_count(d),
                actual: probs.len(),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 || probs.iter().any(|p| *p < 0.0) {
            return Err(SqstError::InvalidArgument(format!(
                "probabilities must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        let table = AliasTable::new(&probs)?;
        Ok(OutcomeDistribution {
            mode,
            d,
            probs,
            table,
            fingerprint,
        })
    }

    pub fn mode(&self) -> PovmMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, m: usize, k: usize) -> f64 {
        self.mode.index(self.d, m, k).map_or(0.0, |i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Outcome, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (self.mode.outcome(self.d, i), p))
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        self.mode.outcome(self.d, self.table.sample(rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordHeader {
    pub d: usize,
    pub mode: PovmMode,
    pub seed: u64,
    pub n: u64,
    pub mub: u64,
}

impl RecordHeader {
    pub fn text_line(&self) -> String {
        format!(
            "#SQST v1 d={} mode={} seed={} n={} mub={:016x}",
            self.d, self.mode, self.seed, self.n, self.mub
        )
    }

    fn parse_text(line: &str) -> Result<Self> {
        let bad = |why: &str| SqstError::CorruptHeader(format!("{why}: '{line}'"));
        let mut parts = line.split_whitespace();
        if parts.next() != Some("#SQST") || parts.next() != Some("v1") {
            return Err(bad("missing '#SQST v1' tag"));
        }
        let mut field = |key: &str| -> Result<String> {
            let tok = parts.next().ok_or_else(|| bad("missing field"))?;
            tok.strip_prefix(key)
                .and_then(|r| r.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| bad(&format!("expected {key}=")))
        };
        let d = field("d")?.parse().map_err(|_| bad("bad d"))?;
        let mode = field("mode")?.parse().map_err(|_| bad("bad mode"))?;
        let seed = field("seed")?.parse().map_err(|_| bad("bad seed"))?;
        let n = field("n")?.parse().map_err(|_| bad("bad n"))?;
        let mub =
            u64::from_str_radix(&field("mub")?, 16).map_err(|_| bad("bad mub fingerprint"))?;
        Ok(RecordHeader {
            d,
            mode,
            seed,
            n,
            mub,
        })
    }

    fn to_binary(self) -> [u8; BINARY_HEADER_LEN] {
        let mut out = [0u8; BINARY_HEADER_LEN];
        out[..8].copy_from_slice(BINARY_MAGIC);
        out[8..12].copy_from_slice(&(self.d as u32).to_le_bytes());
        out[12] = self.mode.code();
        out[16..24].copy_from_slice(&self.seed.to_le_bytes());
        out[24..32].copy_from_slice(&self.n.to_le_bytes());
        out[32..40].copy_from_slice(&self.mub.to_le_bytes());
        out
    }

    fn from_binary(b: &[u8; BINARY_HEADER_LEN]) -> Result<Self> {
        if &b[..8] != BINARY_MAGIC {
            return Err(SqstError::CorruptHeader("bad binary magic".into()));
        }
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().expect("8-byte slice"));
        let d = u32::from_le_bytes(b[8..12].try_into().expect("4-byte slice")) as usize;
        let mode = PovmMode::from_code(b[12])
            .ok_or_else(|| SqstError::CorruptHeader(format!("mode code {}", b[12])))?;
        Ok(RecordHeader {
            d,
            mode,
            seed: u64_at(16),
            n: u64_at(24),
            mub: u64_at(32),
        })
    }
}

/// Header plus the ordered outcome sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementRecord {
    header: RecordHeader,
    outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Text,
    Binary,
}

impl MeasurementRecord {
    pub fn new(header: RecordHeader, outcomes: Vec<Outcome>) -> Result<Self> {
        if header.n != outcomes.len() as u64 {
            return Err(SqstError::CorruptHeader(format!(
                "header n={} but {} outcomes",
                header.n,
                outcomes.len()
            )));
        }
        if header.d == 0 || header.d > u16::MAX as usize {
            return Err(SqstError::CorruptHeader(format!("dimension {}", header.d)));
        }
        if let Some(o) = outcomes.iter().find(|o| {
            header
                .mode
                .index(header.d, o.m as usize, o.k as usize)
                .is_none()
        }) {
            return Err(SqstError::IndexOutOfRange(format!(
                "outcome ({}, {}) invalid for mode {} in dimension {}",
                o.m, o.k, header.mode, header.d
            )));
        }
        Ok(MeasurementRecord { header, outcomes })
    }

    pub fn header(&self) -> &RecordHeader {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.header.d
    }

    pub fn mode(&self) -> PovmMode {
        self.header.mode
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn check_family(&self, family: &MubFamily) -> Result<()> {
        if family.dim() != self.header.d || family.fingerprint() != self.header.mub {
            return Err(SqstError::FingerprintMismatch {
                record: self.header.mub,
                family: family.fingerprint(),
            });
        }
        Ok(())
    }

    pub fn require_mode(&self, mode: PovmMode) -> Result<()> {
        if self.header.mode != mode {
            return Err(SqstError::ModeMismatch {
                expected: mode.to_string(),
                actual: self.header.mode.to_string(),
            });
        }
        Ok(())
    }

    /// Occurrence counts in the canonical outcome order of the record's mode.
    pub fn counts(&self) -> Vec<u64> {
        let d = self.header.d;
        let mut counts = vec![0u64; self.header.mode.outcome_count(d)];
        for o in &self.outcomes {
            if let Some(i) = self.header.mode.index(d, o.m as usize, o.k as usize) {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// `n` independent draws from `dist`, reproducible from `(dist, n, seed)`.
pub fn sample_record(dist: &OutcomeDistribution, n: u64, seed: u64) -> Result<MeasurementRecord> {
    if n == 0 {
        return Err(SqstError::InvalidArgument(
            "copy count must be at least 1".into(),
        ));
    }
    let shards = n.div_ceil(SHARD_LEN);
    let draw_shard = |c: u64| -> Vec<Outcome> {
        let len = SHARD_LEN.min(n - c * SHARD_LEN) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c);
        (0..len).map(|_| dist.sample(&mut rng)).collect()
    };
    let outcomes: Vec<Outcome> = if shards == 1 {
        draw_shard(0)
    } else {
        let parts: Vec<Vec<Outcome>> = (0..shards).into_par_iter().map(draw_shard).collect();
        parts.concat()
    };
    let header = RecordHeader {
        d: dist.dim(),
        mode: dist.mode(),
        seed,
        n,
        mub: dist.fingerprint(),
    };
    MeasurementRecord::new(header, outcomes)
}

pub fn write_record(record: &MeasurementRecord, path: &Path, format: RecordFormat) -> Result<()> {
    let io = |e| SqstError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    match format {
        RecordFormat::Text => {
            writeln!(w, "{}", record.header.text_line()).map_err(io)?;
            for o in &record.outcomes {
                writeln!(w, "{},{}", o.m, o.k).map_err(io)?;
            }
        }
        RecordFormat::Binary => {
            w.write_all(&record.header.to_binary()).map_err(io)?;
            for o in &record.outcomes {
                w.write_all(&o.m.to_le_bytes()).map_err(io)?;
                w.write_all(&o.k.to_le_bytes()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Reads either record format (detected from the first bytes). When `family`
/// is given, its dimension and fingerprint must match the header.
pub fn read_record(path: &Path, family: Option<&MubFamily>) -> Result<MeasurementRecord> {
    let io = |e| SqstError::io(path, e);
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let head = reader.fill_buf().map_err(io)?;
    let record = if head.is_empty() {
        return Err(SqstError::CorruptHeader("empty file".into()));
    } else if head.starts_with(b"#") {
        read_text(reader)?
    } else {
        read_binary(reader, path)?
    };
    if let Some(f) = family {
        record.check_family(f)?;
    }
    Ok(record)
}

fn read_text<R: BufRead>(reader: R) -> Result<MeasurementRecord> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .transpose()
        .map_err(|e| SqstError::CorruptHeader(e.to_string()))?
        .ok_or_else(|| SqstError::CorruptHeader("empty file".into()))?;
    let header = RecordHeader::parse_text(&first)?;
    let mut outcomes = Vec::with_capacity(header.n.min(1 << 24) as usize);
    for line in lines {
        let line = line.map_err(|e| SqstError::CorruptHeader(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(m, k)| {
            Some(Outcome {
                m: m.trim().parse().ok()?,
                k: k.trim().parse().ok()?,
            })
        });
        let o =
            parsed.ok_or_else(|| SqstError::CorruptHeader(format!("bad outcome line '{line}'")))?;
        outcomes.push(o);
    }
    if (outcomes.len() as u64) < header.n {
        return Err(SqstError::TruncatedBody {
            expected: header.n,
            found: outcomes.len() as u64,
        });
    }
    MeasurementRecord::new(header, outcomes)
}

fn read_binary<R: Read>(mut reader: R, path: &Path) -> Result<MeasurementRecord> {
    let mut hb = [0u8; BINARY_HEADER_LEN];
    reader
        .read_exact(&mut hb)
        .map_err(|_| SqstError::CorruptHeader("short binary header".into()))?;
    let header = RecordHeader::from_binary(&hb)?;
    let mut body = Vec::new();
    reader
        .read_to_end(&mut body)
        .map_err(|e| SqstError::io(path, e))?;
    let found = (body.len() / 4) as u64;
    if found < header.n {
        return Err(SqstError::TruncatedBody {
            expected: header.n,
            found,
        });
    }
    if body.len() as u64 != header.n * 4 {
        return Err(SqstError::CorruptHeader(format!(
            "body holds {} bytes for n={}",
            body.len(),
            header.n
        )));
    }
    let outcomes = body
        .chunks_exact(4)
        .map(|c| Outcome {
            m: u16::from_le_bytes([c[0], c[1]]),
            k: u16::from_le_bytes([c[2], c[3]]),
        })
        .collect();
    MeasurementRecord::new(header, outcomes)
}
