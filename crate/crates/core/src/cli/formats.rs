//! Readers and writers for the on-disk artifacts.
//!
//! Record files are text: a header `N=<int>` and one record per line as
//! ascending 0-based positions separated by single spaces. Signature and
//! codebook files are binary, little-endian, with packed patterns of
//! `ceil(n/8)` bytes (bit `i` in byte `i / 8`, least significant first).

use crate::bitkit::BitPattern;
use crate::codegen::{CodeKind, CodeSpec, Codebook};
use crate::optimizer::WeightPlan;

use super::CliError;

pub const SIGNATURE_MAGIC: &[u8; 4] = b"SIC1";
pub const CODEBOOK_MAGIC: &[u8; 4] = b"SCB1";
const SIGNATURE_HEADER: usize = 16;
const CODEBOOK_HEADER: usize = 20;
const SPEC_BYTES: usize = 9;

fn parse_header(line: Option<&str>, key: &str) -> Result<usize, CliError> {
    let line = line.ok_or_else(|| CliError::format(format!("missing `{key}=` header")))?;
    line.trim_end_matches('\r')
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::format(format!("bad header `{line}`, expected `{key}=<int>`")))
}

/// Parses one record line into a pattern of length `len`.
pub fn parse_record_line(line: &str, len: usize) -> Result<BitPattern, String> {
    let line = line.trim_end_matches('\r');
    let mut positions = Vec::new();
    if !line.is_empty() {
        for tok in line.split(' ') {
            let pos: usize = tok
                .parse()
                .map_err(|_| format!("`{tok}` is not a bit position"))?;
            if pos >= len {
                return Err(format!("position {pos} out of range for N = {len}"));
            }
            if positions.last().is_some_and(|&last| last >= pos) {
                return Err(format!("position {pos} is not strictly ascending"));
            }
            positions.push(pos);
        }
    }
    BitPattern::from_positions(len, &positions).map_err(|e| e.to_string())
}

pub fn parse_records(text: &str) -> Result<(usize, Vec<BitPattern>), CliError> {
    let mut lines = text.lines();
    let len = parse_header(lines.next(), "N")?;
    if len == 0 {
        return Err(CliError::format("N must be positive"));
    }
    let records = lines
        .enumerate()
        .map(|(i, line)| {
            parse_record_line(line, len)
                .map_err(|e| CliError::format(format!("line {}: {e}", i + 2)))
        })
        .collect::<Result<_, _>>()?;
    Ok((len, records))
}

pub fn format_records(len: usize, records: &[BitPattern]) -> String {
    let mut out = format!("N={len}\n");
    for rec in records {
        let line: Vec<String> = rec.positions().map(|p| p.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], k: usize, what: &str) -> Result<&'a [u8], CliError> {
    if bytes.len() < k {
        return Err(CliError::format(format!(
            "truncated file while reading {what}"
        )));
    }
    let (head, tail) = bytes.split_at(k);
    *bytes = tail;
    Ok(head)
}

fn read_u32(bytes: &mut &[u8], what: &str) -> Result<u32, CliError> {
    Ok(u32::from_le_bytes(
        take(bytes, 4, what)?.try_into().expect("4 bytes"),
    ))
}

fn read_u64(bytes: &mut &[u8], what: &str) -> Result<u64, CliError> {
    Ok(u64::from_le_bytes(
        take(bytes, 8, what)?.try_into().expect("8 bytes"),
    ))
}

fn read_magic(bytes: &mut &[u8], magic: &[u8; 4]) -> Result<(), CliError> {
    let found = take(bytes, 4, "magic")?;
    if found != magic {
        return Err(CliError::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(found),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn read_patterns(bytes: &mut &[u8], n: usize, count: usize) -> Result<Vec<BitPattern>, CliError> {
    let width = n.div_ceil(8);
    (0..count)
        .map(|i| {
            let chunk = take(bytes, width, "packed patterns")?;
            BitPattern::from_bytes(n, chunk)
                .map_err(|e| CliError::format(format!("pattern {i}: {e}")))
        })
        .collect()
}

pub fn signatures_to_bytes(n: usize, signatures: &[BitPattern]) -> Vec<u8> {
    let width = n.div_ceil(8);
    let mut out = Vec::with_capacity(SIGNATURE_HEADER + signatures.len() * width);
    out.extend_from_slice(SIGNATURE_MAGIC);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(signatures.len() as u64).to_le_bytes());
    for sig in signatures {
        out.extend_from_slice(&sig.to_bytes());
    }
    out
}

pub fn parse_signatures(mut bytes: &[u8]) -> Result<(usize, Vec<BitPattern>), CliError> {
    read_magic(&mut bytes, SIGNATURE_MAGIC)?;
    let n = read_u32(&mut bytes, "n")? as usize;
    if n == 0 {
        return Err(CliError::format("n must be positive"));
    }
    let count = read_u64(&mut bytes, "record count")?;
    count
        .checked_mul(n.div_ceil(8) as u64)
        .filter(|&b| b == bytes.len() as u64)
        .ok_or_else(|| {
            CliError::format(format!(
                "file length {} does not match {count} records of n = {n}",
                bytes.len() + SIGNATURE_HEADER
            ))
        })?;
    let sigs = read_patterns(&mut bytes, n, count as usize)?;
    Ok((n, sigs))
}

pub fn codebook_to_bytes(cb: &Codebook) -> Vec<u8> {
    let width = cb.n().div_ceil(8);
    let big_n = cb.source_len();
    let mut out = Vec::with_capacity(CODEBOOK_HEADER + big_n * (SPEC_BYTES + width));
    out.extend_from_slice(CODEBOOK_MAGIC);
    out.extend_from_slice(&(cb.n() as u32).to_le_bytes());
    out.extend_from_slice(&(big_n as u32).to_le_bytes());
    out.extend_from_slice(&cb.seed().to_le_bytes());
    for spec in cb.specs() {
        let (kind, param) = match spec.kind() {
            CodeKind::FixedWeight { w } => (0u8, w as f64),
            CodeKind::Binomial { q } => (1u8, q),
        };
        out.push(kind);
        out.extend_from_slice(&param.to_le_bytes());
    }
    for word in cb.words() {
        out.extend_from_slice(&word.to_bytes());
    }
    out
}

/// Parses a codebook file and regenerates it from the stored seed and
/// specs; stored words that differ from the regenerated ones are rejected.
pub fn parse_codebook(mut bytes: &[u8]) -> Result<Codebook, CliError> {
    read_magic(&mut bytes, CODEBOOK_MAGIC)?;
    let n = read_u32(&mut bytes, "n")? as usize;
    let big_n = read_u32(&mut bytes, "N")? as usize;
    let seed = read_u64(&mut bytes, "seed")?;
    if n == 0 || big_n == 0 {
        return Err(CliError::format("n and N must be positive"));
    }
    let expected = big_n * (SPEC_BYTES + n.div_ceil(8));
    if bytes.len() != expected {
        return Err(CliError::format(format!(
            "file length {} does not match N = {big_n}, n = {n}",
            bytes.len() + CODEBOOK_HEADER
        )));
    }
    let specs = (0..big_n)
        .map(|j| {
            let kind = take(&mut bytes, 1, "code kind")?[0];
            let param = f64::from_le_bytes(
                take(&mut bytes, 8, "code parameter")?
                    .try_into()
                    .expect("8 bytes"),
            );
            let spec = match kind {
                0 if param.fract() == 0.0 && param >= 0.0 => {
                    CodeSpec::fixed_weight(n, param as usize)
                }
                0 => {
                    return Err(CliError::format(format!(
                        "bit {j}: weight {param} is not an integer"
                    )))
                }
                1 => CodeSpec::binomial(n, param),
                k => return Err(CliError::format(format!("bit {j}: unknown code kind {k}"))),
            };
            spec.map_err(|e| CliError::format(format!("bit {j}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let stored = read_patterns(&mut bytes, n, big_n)?;
    let cb = Codebook::build(specs, seed).map_err(|e| CliError::format(e.to_string()))?;
    if let Some(j) = (0..big_n).find(|&j| cb.words()[j] != stored[j]) {
        return Err(CliError::format(format!(
            "stored code word {j} differs from the one regenerated from seed {seed}"
        )));
    }
    Ok(cb)
}

/// Parses one frequency per line; blank lines and `#` comments are skipped.
pub fn parse_frequencies(text: &str) -> Result<Vec<f64>, CliError> {
    let mut p = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::usage(format!("line {}: `{line}` is not a number", i + 1)))?;
        if !(0.0..1.0).contains(&v) {
            return Err(CliError::usage(format!(
                "line {}: frequency {v} is outside [0, 1)",
                i + 1
            )));
        }
        p.push(v);
    }
    if p.is_empty() {
        return Err(CliError::usage("frequency file has no entries"));
    }
    Ok(p)
}

pub fn format_weight_plan(plan: &WeightPlan) -> String {
    let mut out = format!("n={}\n", plan.n);
    out.push_str(&format!("# max_p = {}\n", plan.max_p));
    out.push_str(&format!("# lambda_minus_2 = {:.6e}\n", plan.lambda_diag));
    for w in &plan.warnings {
        out.push_str(&format!("# warning: {w}\n"));
    }
    for w in &plan.weights {
        out.push_str(&format!("{w}\n"));
    }
    out
}

/// Reads a weight plan back as fixed-weight code specs.
pub fn parse_weight_plan(text: &str) -> Result<Vec<CodeSpec>, CliError> {
    let mut lines = text.lines();
    let n = parse_header(lines.next(), "n")?;
    let mut specs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let spec = line
            .parse::<usize>()
            .map_err(|e| e.to_string())
            .and_then(|w| CodeSpec::fixed_weight(n, w).map_err(|e| e.to_string()))
            .map_err(|e| CliError::format(format!("line {}: {e}", i + 2)))?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(CliError::format("weight plan has no weights"));
    }
    Ok(specs)
}
