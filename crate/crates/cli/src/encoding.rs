//! Raw bytes <-> field elements for byte-mode secrets.

use crate::CliError;

const HEADER: usize = 8;

/// Largest byte secret that fits in `capacity` elements.
pub fn max_bytes(capacity: usize) -> usize {
    capacity.saturating_sub(HEADER)
}

/// 8-byte little-endian length, then one byte per element, zero-padded to
/// `capacity`. Needs `q > 256` so every byte is a field element.
pub fn bytes_to_elements(bytes: &[u8], capacity: usize, q: u64) -> Result<Vec<u64>, CliError> {
    if q <= 256 {
        return Err(CliError::Param(format!("byte secrets need q > 256, got q = {q}")));
    }
    if bytes.len() > max_bytes(capacity) {
        return Err(CliError::Param(format!(
            "secret of {} bytes exceeds capacity of {} bytes",
            bytes.len(),
            max_bytes(capacity)
        )));
    }
    let mut out: Vec<u64> = (bytes.len() as u64).to_le_bytes().iter().map(|&b| u64::from(b)).collect();
    out.extend(bytes.iter().map(|&b| u64::from(b)));
    out.resize(capacity, 0);
    Ok(out)
}

pub fn elements_to_bytes(elements: &[u64]) -> Result<Vec<u8>, CliError> {
    let corrupt = || CliError::Internal("recovered secret is not a valid byte encoding".into());
    if elements.len() < HEADER || elements.iter().any(|&e| e > 255) {
        return Err(corrupt());
    }
    let header: Vec<u8> = elements[..HEADER].iter().map(|&e| e as u8).collect();
    let len = u64::from_le_bytes(header.try_into().expect("eight bytes")) as usize;
    if len > elements.len() - HEADER {
        return Err(corrupt());
    }
    Ok(elements[HEADER..HEADER + len].iter().map(|&e| e as u8).collect())
}

/// Whitespace- or comma-separated decimal integers.
pub fn parse_elements(text: &str, q: u64) -> Result<Vec<u64>, CliError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            let x: u64 = t.parse().map_err(|_| CliError::Param(format!("not an integer: {t:?}")))?;
            if x >= q {
                return Err(CliError::Param(format!("element {x} is not below q = {q}")));
            }
            Ok(x)
        })
        .collect()
}

pub fn format_elements(elements: &[u64]) -> String {
    let mut s = elements.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
    s.push('\n');
    s
}
