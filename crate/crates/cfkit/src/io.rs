//! File formats.
//!
//! * `MCS1` — multi-channel signals: `MCS1 K N M\n` followed by
//!   `K*N*M` little-endian f64 samples, channel-major, row-major.
//! * `CFT1` — filter templates: `CFT1 kind K N M N_F M_F b\n` followed by
//!   the `K*N_F*M_F` spatial template samples. The bias `b` uses the
//!   shortest round-trip decimal form, so write/read is bit-exact.
//! * `CFMAN1` — plain-text dataset manifests.
//! * PGM (binary `P5`) — grayscale images, scaled to `[0, 1]` on load.
//! * CSV — report tables; all floats in shortest round-trip form.
//!
//! All writers go through a temp-file-then-rename so a crash never leaves
//! a half-written artifact behind.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::designs::{DesignKind, FilterTemplate, SolverKind, Variant};
use crate::error::{CfError, Result};
use crate::eval::SuiteReport;
use crate::prox::ProxTrace;
use crate::spectral::{self, MultiChannelSignal, SupportRegion};

/// Writes via a temporary file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CfError::Io(e.error))?;
    Ok(())
}

fn format_err(offset: usize, reason: impl Into<String>) -> CfError {
    CfError::Format { offset, reason: reason.into() }
}

/// Splits off the first line as the header; returns (header, payload,
/// payload offset).
fn split_header(bytes: &[u8]) -> Result<(&str, &[u8], usize)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err(bytes.len(), "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|e| format_err(e.valid_up_to(), "header is not UTF-8"))?;
    Ok((header, &bytes[nl + 1..], nl + 1))
}

fn parse_usize(token: &str, offset: usize, what: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| format_err(offset, format!("bad {what} `{token}`")))
}

fn read_f64s(payload: &[u8], count: usize, offset: usize) -> Result<Vec<f64>> {
    if payload.len() < count * 8 {
        return Err(format_err(
            offset + payload.len(),
            format!("truncated payload: need {} bytes, have {}", count * 8, payload.len()),
        ));
    }
    if payload.len() > count * 8 {
        return Err(format_err(
            offset + count * 8,
            format!("trailing bytes after payload of {} samples", count),
        ));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn f64s_to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_mcs(signal: &MultiChannelSignal) -> Vec<u8> {
    let mut out = format!("MCS1 {} {} {}\n", signal.channels, signal.height, signal.width)
        .into_bytes();
    out.extend_from_slice(&f64s_to_bytes(signal.data()));
    out
}

pub fn decode_mcs(bytes: &[u8]) -> Result<MultiChannelSignal> {
    let (header, payload, offset) = split_header(bytes)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "MCS1" {
        return Err(format_err(0, "expected header `MCS1 K N M`"));
    }
    let k = parse_usize(tokens[1], 0, "channel count")?;
    let n = parse_usize(tokens[2], 0, "height")?;
    let m = parse_usize(tokens[3], 0, "width")?;
    let data = read_f64s(payload, k * n * m, offset)?;
    MultiChannelSignal::new(k, n, m, data)
}

pub fn write_mcs(path: &Path, signal: &MultiChannelSignal) -> Result<()> {
    atomic_write(path, &encode_mcs(signal))
}

pub fn read_mcs(path: &Path) -> Result<MultiChannelSignal> {
    decode_mcs(&fs::read(path)?)
}

fn kind_token(template: &FilterTemplate) -> String {
    format!("{}-{}", template.variant.token(), template.kind.token())
}

fn parse_kind_token(token: &str) -> Result<(DesignKind, Variant)> {
    let (variant_tok, kind_tok) = token
        .split_once('-')
        .ok_or_else(|| format_err(5, format!("bad kind token `{token}`")))?;
    let kind = match kind_tok {
        "mace" => DesignKind::Mace,
        "otsdf" => DesignKind::Otsdf,
        "mosse" => DesignKind::Mosse,
        "mmcf" => DesignKind::Mmcf,
        other => return Err(format_err(5, format!("unknown design kind `{other}`"))),
    };
    let variant = if variant_tok == "conv" {
        Variant::Conventional
    } else if variant_tok == "za" {
        Variant::ZeroAliasing
    } else if let Some(frac) = variant_tok.strip_prefix("racf") {
        let pad_fraction: f64 = frac
            .parse()
            .map_err(|_| format_err(5, format!("bad pad fraction `{frac}`")))?;
        Variant::Racf { pad_fraction }
    } else {
        return Err(format_err(5, format!("unknown variant `{variant_tok}`")));
    };
    Ok((kind, variant))
}

pub fn encode_cft(template: &FilterTemplate) -> Vec<u8> {
    let mut out = format!(
        "CFT1 {} {} {} {} {} {} {}\n",
        kind_token(template),
        template.spatial.channels,
        template.support.height,
        template.support.width,
        template.spatial.height,
        template.spatial.width,
        template.bias,
    )
    .into_bytes();
    out.extend_from_slice(&f64s_to_bytes(template.spatial.data()));
    out
}

pub fn decode_cft(bytes: &[u8]) -> Result<FilterTemplate> {
    let (header, payload, offset) = split_header(bytes)?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 8 || tokens[0] != "CFT1" {
        return Err(format_err(0, "expected header `CFT1 kind K N M N_F M_F b`"));
    }
    let (kind, variant) = parse_kind_token(tokens[1])?;
    let k = parse_usize(tokens[2], 0, "channel count")?;
    let n = parse_usize(tokens[3], 0, "support height")?;
    let m = parse_usize(tokens[4], 0, "support width")?;
    let nf = parse_usize(tokens[5], 0, "grid height")?;
    let mf = parse_usize(tokens[6], 0, "grid width")?;
    let bias: f64 = tokens[7]
        .parse()
        .map_err(|_| format_err(0, format!("bad bias `{}`", tokens[7])))?;
    let data = read_f64s(payload, k * nf * mf, offset)?;
    let spatial = MultiChannelSignal::new(k, nf, mf, data)?;
    let spectrum = spectral::forward_dft(&spatial, (nf, mf))?;
    Ok(FilterTemplate {
        spatial,
        spectrum,
        bias,
        support: SupportRegion::new(n, m),
        kind,
        variant,
        delta: 0.0,
        trade_off: 0.0,
        solver: SolverKind::ClosedForm,
        iterations: 0,
        objective: 0.0,
    })
}

pub fn write_cft(path: &Path, template: &FilterTemplate) -> Result<()> {
    atomic_write(path, &encode_cft(template))
}

pub fn read_cft(path: &Path) -> Result<FilterTemplate> {
    decode_cft(&fs::read(path)?)
}

/// One dataset entry in a manifest.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifestEntry {
    Train { class: usize, path: String },
    Probe { class: usize, row: i64, col: i64, path: String },
    Frame { path: String },
}

pub fn encode_manifest(entries: &[ManifestEntry]) -> Vec<u8> {
    let mut out = format!("CFMAN1 {}\n", entries.len());
    for e in entries {
        match e {
            ManifestEntry::Train { class, path } => {
                out.push_str(&format!("train {class} {path}\n"));
            }
            ManifestEntry::Probe { class, row, col, path } => {
                out.push_str(&format!("probe {class} {row} {col} {path}\n"));
            }
            ManifestEntry::Frame { path } => {
                out.push_str(&format!("frame {path}\n"));
            }
        }
    }
    out.into_bytes()
}

pub fn decode_manifest(bytes: &[u8]) -> Result<Vec<ManifestEntry>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| format_err(e.valid_up_to(), "manifest is not UTF-8"))?;
    let mut offset = 0usize;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(0, "empty manifest"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 2 || tokens[0] != "CFMAN1" {
        return Err(format_err(0, "expected header `CFMAN1 count`"));
    }
    let count = parse_usize(tokens[1], 0, "entry count")?;
    offset += header.len() + 1;
    let mut entries = Vec::with_capacity(count);
    for line in lines {
        if line.is_empty() {
            offset += 1;
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        let entry = match t.as_slice() {
            ["train", class, path] => ManifestEntry::Train {
                class: parse_usize(class, offset, "class")?,
                path: path.to_string(),
            },
            ["probe", class, row, col, path] => ManifestEntry::Probe {
                class: parse_usize(class, offset, "class")?,
                row: row
                    .parse()
                    .map_err(|_| format_err(offset, format!("bad row `{row}`")))?,
                col: col
                    .parse()
                    .map_err(|_| format_err(offset, format!("bad col `{col}`")))?,
                path: path.to_string(),
            },
            ["frame", path] => ManifestEntry::Frame { path: path.to_string() },
            _ => return Err(format_err(offset, format!("bad manifest line `{line}`"))),
        };
        entries.push(entry);
        offset += line.len() + 1;
    }
    if entries.len() != count {
        return Err(format_err(
            offset,
            format!("manifest declares {count} entries but carries {}", entries.len()),
        ));
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    atomic_write(path, &encode_manifest(entries))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    decode_manifest(&fs::read(path)?)
}

/// Binary PGM (`P5`) loader; samples are scaled by the declared maxval so
/// the result lies in `[0, 1]`.
pub fn decode_pgm(bytes: &[u8]) -> Result<MultiChannelSignal> {
    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<(String, usize)> {
        // Skip whitespace and `#` comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(start, "unexpected end of PGM header"));
        }
        let tok = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| format_err(start, "non-ASCII PGM header token"))?;
        Ok((tok.to_string(), start))
    };

    let (magic, off) = next_token(bytes)?;
    if magic != "P5" {
        return Err(format_err(off, format!("expected P5 magic, got `{magic}`")));
    }
    let (w_tok, w_off) = next_token(bytes)?;
    let (h_tok, h_off) = next_token(bytes)?;
    let (max_tok, max_off) = next_token(bytes)?;
    let width = parse_usize(&w_tok, w_off, "width")?;
    let height = parse_usize(&h_tok, h_off, "height")?;
    let maxval = parse_usize(&max_tok, max_off, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format_err(max_off, format!("maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format_err(pos, "missing raster separator"));
    }
    pos += 1;
    let wide = maxval > 255;
    let sample_bytes = if wide { 2 } else { 1 };
    let need = width * height * sample_bytes;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(format_err(
            pos + raster.len(),
            format!("truncated raster: need {need} bytes, have {}", raster.len()),
        ));
    }
    if raster.len() > need {
        return Err(format_err(pos + need, "trailing bytes after raster"));
    }
    let mut data = Vec::with_capacity(width * height);
    if wide {
        for c in raster.chunks_exact(2) {
            data.push(u16::from_be_bytes([c[0], c[1]]) as f64 / maxval as f64);
        }
    } else {
        for &b in raster {
            data.push(b as f64 / maxval as f64);
        }
    }
    MultiChannelSignal::new(1, height, width, data)
}

pub fn read_pgm(path: &Path) -> Result<MultiChannelSignal> {
    decode_pgm(&fs::read(path)?)
}

/// Writes a single-channel signal as 8-bit PGM, clamping to `[0, 1]`.
pub fn write_pgm(path: &Path, signal: &MultiChannelSignal) -> Result<()> {
    if signal.channels != 1 {
        return Err(CfError::ChannelMismatch(signal.channels, 1));
    }
    let mut out = format!("P5\n{} {}\n255\n", signal.width, signal.height).into_bytes();
    for &v in signal.data() {
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    atomic_write(path, &out)
}

/// Serializes rows of display-formatted cells; floats keep their shortest
/// round-trip form, so equal values always produce equal bytes.
pub fn encode_csv(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    atomic_write(path, &encode_csv(header, rows))
}

pub fn scores_csv(report: &SuiteReport, truth: &[usize]) -> Vec<u8> {
    let rows: Vec<Vec<String>> = report
        .scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cells = vec![i.to_string(), truth[i].to_string()];
            cells.push(report.locations[i].0.to_string());
            cells.push(report.locations[i].1.to_string());
            cells.extend(row.iter().map(|v| v.to_string()));
            cells
        })
        .collect();
    let mut header = vec!["probe".to_string(), "class".to_string(), "row".to_string(), "col".to_string()];
    let nclasses = report.scores.first().map_or(0, |r| r.len());
    for c in 0..nclasses {
        header.push(format!("score_{c}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    encode_csv(&header_refs, &rows)
}

pub fn metrics_csv(report: &SuiteReport) -> Vec<u8> {
    encode_csv(
        &["metric", "value"],
        &[
            vec!["rank1".into(), report.rank1.to_string()],
            vec!["eer".into(), report.eer.to_string()],
            vec!["localization_rate".into(), report.localization_rate.to_string()],
        ],
    )
}

pub fn trace_csv(trace: &ProxTrace) -> Vec<u8> {
    let rows: Vec<Vec<String>> = trace
        .rows
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                r.objective.to_string(),
                r.step.to_string(),
                r.residual.to_string(),
            ]
        })
        .collect();
    encode_csv(&["iteration", "objective", "step", "residual"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{DesignKind, DesignProblem, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, k: usize, n: usize, m: usize) -> MultiChannelSignal {
        let data: Vec<f64> = (0..k * n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MultiChannelSignal::new(k, n, m, data).unwrap()
    }

    #[test]
    fn mcs_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let x = random_signal(&mut rng, 2, 5, 3);
        let bytes = encode_mcs(&x);
        let back = decode_mcs(&bytes).unwrap();
        assert_eq!(x.data(), back.data());
        assert_eq!(bytes, encode_mcs(&back));
    }

    #[test]
    fn mcs_truncation_reports_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let x = random_signal(&mut rng, 1, 4, 1);
        let mut bytes = encode_mcs(&x);
        bytes.truncate(bytes.len() - 3);
        match decode_mcs(&bytes) {
            Err(CfError::Format { offset, reason }) => {
                assert_eq!(offset, bytes.len());
                assert!(reason.contains("truncated"));
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn cft_roundtrip_preserves_template_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let training: Vec<_> = (0..4).map(|_| random_signal(&mut rng, 1, 5, 1)).collect();
        let p = DesignProblem::new(
            training, vec![1.0, 1.0, -1.0, -1.0], DesignKind::Mmcf,
            Variant::ZeroAliasing, (9, 1), 0.1, 1.0,
        )
        .unwrap();
        let (t, _) = crate::designs::solve_zammcf_closed(&p).unwrap();
        let bytes = encode_cft(&t);
        let back = decode_cft(&bytes).unwrap();
        assert_eq!(t.spatial.data(), back.spatial.data());
        assert_eq!(t.bias.to_bits(), back.bias.to_bits());
        assert_eq!(back.kind, DesignKind::Mmcf);
        assert_eq!(back.variant, Variant::ZeroAliasing);
        assert_eq!(back.support, t.support);
        assert_eq!(bytes, encode_cft(&back));
    }

    #[test]
    fn cft_kind_tokens_parse() {
        assert!(matches!(
            parse_kind_token("racf0.25-otsdf").unwrap(),
            (DesignKind::Otsdf, Variant::Racf { .. })
        ));
        assert!(parse_kind_token("za-unknown").is_err());
        assert!(parse_kind_token("nosuch-mace").is_err());
    }

    #[test]
    fn manifest_roundtrip_and_count_check() {
        let entries = vec![
            ManifestEntry::Train { class: 0, path: "train/a.mcs".into() },
            ManifestEntry::Probe { class: 1, row: -2, col: 7, path: "probe/b.mcs".into() },
            ManifestEntry::Frame { path: "frames/c.mcs".into() },
        ];
        let bytes = encode_manifest(&entries);
        assert_eq!(decode_manifest(&bytes).unwrap(), entries);
        let bad = b"CFMAN1 5\ntrain 0 x.mcs\n";
        assert!(matches!(decode_manifest(bad), Err(CfError::Format { .. })));
    }

    #[test]
    fn pgm_parses_comments_and_scales() {
        let bytes = b"P5\n# a comment\n3 2\n255\n\x00\x7f\xff\x10\x20\x30";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!((img.height, img.width), (2, 3));
        assert!((img.at(0, 0, 2) - 1.0).abs() < 1e-12);
        assert!((img.at(0, 0, 1) - 127.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn pgm_rejects_truncation_with_offset() {
        let bytes = b"P5\n3 2\n255\n\x00\x7f\xff";
        match decode_pgm(bytes) {
            Err(CfError::Format { offset, reason }) => {
                assert_eq!(offset, bytes.len());
                assert!(reason.contains("truncated"));
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn pgm_16bit_big_endian() {
        let bytes = b"P5\n1 1\n65535\n\xff\xff";
        let img = decode_pgm(bytes).unwrap();
        assert!((img.at(0, 0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.bin");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"second");
        // No stray temp files remain.
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn csv_is_deterministic() {
        let rows = vec![vec!["1".to_string(), (0.1_f64 + 0.2).to_string()]];
        let a = encode_csv(&["i", "v"], &rows);
        let b = encode_csv(&["i", "v"], &rows);
        assert_eq!(a, b);
        assert_eq!(a, b"i,v\n1,0.30000000000000004\n".to_vec());
    }
}
