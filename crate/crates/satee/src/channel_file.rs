//! Plain-text channel files.
//!
//! ```text
//! K M
//! re im re im …        (K lines, 2M numbers each)
//! 0 1 0 …              (K virtual-user flags)
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! `load(save(H)) == H` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use satee_core::channel::ChannelMatrix;
use satee_core::linalg::CMat;
use satee_core::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum ChannelFileError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("expected {expected} channel rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("line {line}: expected {expected} numbers, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: '{token}' is not a number")]
    NonNumeric { line: usize, token: String },
    #[error("virtual mask: {0}")]
    Mask(String),
    #[error("invalid channel: {0}")]
    Invalid(#[from] satee_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn format_channel(h: &ChannelMatrix) -> String {
    let (k, m) = (h.num_users(), h.num_feeds());
    let mut out = String::new();
    let _ = writeln!(out, "{k} {m}");
    for r in 0..k {
        let line: Vec<String> = h
            .entries()
            .row(r)
            .iter()
            .flat_map(|v| [format!("{:?}", v.re), format!("{:?}", v.im)])
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let mask: Vec<&str> = h.virtual_mask().iter().map(|&v| if v { "1" } else { "0" }).collect();
    let _ = writeln!(out, "{}", mask.join(" "));
    out
}

/// Parses a channel file. The format has no notion of beams, so the caller
/// supplies the users-per-beam grouping.
pub fn parse_channel(text: &str, users_per_beam: usize) -> Result<ChannelMatrix, ChannelFileError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| ChannelFileError::MalformedHeader("empty file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| ChannelFileError::MalformedHeader(format!("'{header}'")))
    };
    let (k, m) = match dims.as_slice() {
        [k, m] => (parse_dim(k)?, parse_dim(m)?),
        _ => return Err(ChannelFileError::MalformedHeader(format!("'{header}'"))),
    };
    if k == 0 || m == 0 {
        return Err(ChannelFileError::MalformedHeader(format!("'{header}'")));
    }
    let rest: Vec<(usize, &str)> = lines.collect();
    if rest.len() != k + 1 {
        // one mask line follows the K rows
        return Err(ChannelFileError::RowCount {
            expected: k,
            found: rest.len().saturating_sub(1),
        });
    }
    let mut data = Vec::with_capacity(k * m);
    for &(idx, line) in &rest[..k] {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 * m {
            return Err(ChannelFileError::ColumnCount {
                line: idx + 1,
                expected: 2 * m,
                found: tokens.len(),
            });
        }
        let mut nums = Vec::with_capacity(2 * m);
        for t in tokens {
            nums.push(t.parse::<f64>().map_err(|_| ChannelFileError::NonNumeric {
                line: idx + 1,
                token: t.to_string(),
            })?);
        }
        data.extend(nums.chunks(2).map(|p| Complex64::new(p[0], p[1])));
    }
    let (mask_idx, mask_line) = rest[k];
    let mask = mask_line
        .split_whitespace()
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(ChannelFileError::Mask(format!(
                "line {}: bad flag '{other}'",
                mask_idx + 1
            ))),
        })
        .collect::<Result<Vec<bool>, _>>()?;
    if mask.len() != k {
        return Err(ChannelFileError::Mask(format!(
            "expected {k} flags, found {}",
            mask.len()
        )));
    }
    let entries = CMat::from_rows(k, m, data)?;
    Ok(ChannelMatrix::new(entries, users_per_beam, mask)?)
}

pub fn save_channel(path: &Path, h: &ChannelMatrix) -> Result<(), ChannelFileError> {
    fs::write(path, format_channel(h))?;
    Ok(())
}

pub fn load_channel(path: &Path, users_per_beam: usize) -> Result<ChannelMatrix, ChannelFileError> {
    parse_channel(&fs::read_to_string(path)?, users_per_beam)
}
