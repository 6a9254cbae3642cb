//! Experiment harness: loads family and experiment specs, runs the oracle
//! checks over an n-list, and writes versioned CSV tables with a JSON run
//! manifest. Also the file front-end of the bitstream codec.

pub mod experiments;
pub mod spec;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mdl_core::codec::{decode_bitstream, encode_bitstream, CodeConfig};
use mdl_core::models::family::FamilyRef;
use mdl_core::models::spec::FamilySpec;
use mdl_core::{MdlError, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::experiments::{columns, Cell, Row};
pub use crate::spec::{ExperimentKind, ExperimentSpec, Overrides, SymbolFormat};

/// Version of every CSV schema and of the manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when some certificate fails.
pub const EXIT_FAILED: u8 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateStatus {
    pub n: u64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: ExperimentKind,
    pub spec: ExperimentSpec,
    pub family: FamilySpec,
    pub family_name: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub certificates: Vec<CertificateStatus>,
    pub passed: bool,
    pub wall_time_seconds: f64,
}

/// Result of `run`: the manifest and the file it was written to.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.manifest.passed {
            0
        } else {
            EXIT_FAILED
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> MdlError {
    MdlError::Io(format!("{}: {e}", path.display()))
}

/// Writes a table whose first line names the schema version and kind.
pub fn write_csv(path: &Path, kind: ExperimentKind, rows: &[Row]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(file, "# mdl-csv schema={SCHEMA_VERSION} kind={}", kind.name()).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(columns(kind)).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r.cells.iter().map(Cell::render)).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Runs one experiment over its n-list. Sample sizes run concurrently;
/// rows come back in n-list order.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutcome> {
    let start = Instant::now();
    spec.validate()?;
    let family_spec = spec.family_spec()?;
    let family = family_spec.build()?;
    fs::create_dir_all(&spec.out).map_err(|e| io_err(&spec.out, e))?;
    let kind = spec.kind;
    let rows: Vec<Row> = if kind == ExperimentKind::Compress {
        vec![compress_row(&family, spec)?]
    } else {
        spec.n
            .par_iter()
            .map(|&n| match kind {
                ExperimentKind::RegretCurve => experiments::regret_curve(&family, spec, n),
                ExperimentKind::BoundAudit => experiments::bound_audit(&family, spec, n),
                ExperimentKind::RiskCert => experiments::risk_cert(&family, spec, n),
                ExperimentKind::KraftSweep => experiments::kraft_sweep(&family, spec, n),
                ExperimentKind::NmlCompare => experiments::nml_compare(&family, spec, n),
                ExperimentKind::Compress => unreachable!(),
            })
            .collect::<Result<_>>()?
    };

    let csv_path = spec.out.join(format!("{}.csv", kind.name()));
    write_csv(&csv_path, kind, &rows)?;
    let mut outputs = vec![csv_path];
    let mut certificates = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let n = spec.n.get(i).copied().unwrap_or(0);
        if let Some(passed) = row.passed {
            certificates.push(CertificateStatus { n, passed });
        }
        for cert in &row.certificates {
            let p = spec.out.join(format!("{}-n{}.json", cert.check, cert.n));
            write_json(&p, cert)?;
            outputs.push(p);
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "mdl",
        version: env!("CARGO_PKG_VERSION"),
        kind,
        spec: spec.clone(),
        family_name: family.name(),
        family: family_spec,
        seed: spec.seed,
        outputs,
        passed: rows.iter().all(|r| r.passed != Some(false)),
        certificates,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let manifest_path = spec.out.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
    })
}

/// Parses a symbol file.
pub fn read_symbols(bytes: &[u8], format: SymbolFormat) -> Result<Vec<usize>> {
    match format {
        SymbolFormat::Bytes => Ok(bytes.iter().map(|&b| b as usize).collect()),
        SymbolFormat::Text => std::str::from_utf8(bytes)
            .map_err(|e| MdlError::Config(format!("symbol file is not UTF-8: {e}")))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| MdlError::Config(format!("bad symbol {t:?}: {e}"))))
            .collect(),
    }
}

/// Inverse of `read_symbols` for files it would accept in canonical form
/// (text output is one space-separated line).
pub fn write_symbols(xs: &[usize], format: SymbolFormat) -> Result<Vec<u8>> {
    match format {
        SymbolFormat::Bytes => xs
            .iter()
            .map(|&x| u8::try_from(x).map_err(|_| MdlError::Config(format!("symbol {x} does not fit in a byte"))))
            .collect(),
        SymbolFormat::Text => {
            if xs.is_empty() {
                return Ok(Vec::new());
            }
            let line: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
            Ok(format!("{}\n", line.join(" ")).into_bytes())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressReport {
    pub n: u64,
    pub payload_bits: u64,
    pub ideal_bits: f64,
    pub file_bytes: u64,
}

pub fn load_family(path: &Path) -> Result<FamilyRef> {
    FamilySpec::load(path)?.build()
}

pub fn compress_file(
    family: &FamilyRef,
    input: &Path,
    output: &Path,
    format: SymbolFormat,
    config: &CodeConfig,
) -> Result<CompressReport> {
    let raw = fs::read(input).map_err(|e| MdlError::Config(format!("{}: {e}", input.display())))?;
    let xs = read_symbols(&raw, format)?;
    let m = family.alphabet_size();
    if let Some(&bad) = xs.iter().find(|&&x| x >= m) {
        return Err(MdlError::Alphabet {
            symbol: bad,
            alphabet: m,
        });
    }
    let bs = encode_bitstream(family, &xs, config)?;
    fs::write(output, &bs.bytes).map_err(|e| io_err(output, e))?;
    Ok(CompressReport {
        n: xs.len() as u64,
        payload_bits: bs.payload_bits,
        ideal_bits: bs.ideal_bits,
        file_bytes: bs.bytes.len() as u64,
    })
}

pub fn decompress_file(
    family: &FamilyRef,
    input: &Path,
    output: &Path,
    format: SymbolFormat,
    config: &CodeConfig,
) -> Result<usize> {
    let bytes = fs::read(input).map_err(|e| MdlError::Config(format!("{}: {e}", input.display())))?;
    let xs = decode_bitstream(family, &bytes, config)?;
    fs::write(output, write_symbols(&xs, format)?).map_err(|e| io_err(output, e))?;
    Ok(xs.len())
}

fn compress_row(family: &FamilyRef, spec: &ExperimentSpec) -> Result<Row> {
    let input = spec.input.as_deref().expect("validated");
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
    let packed = spec.out.join(format!("{stem}.mdl"));
    let report = compress_file(family, input, &packed, spec.format, &spec.config)?;
    let original = read_symbols(&fs::read(input).map_err(|e| io_err(input, e))?, spec.format)?;
    let back = decode_bitstream(family, &fs::read(&packed).map_err(|e| io_err(&packed, e))?, &spec.config)?;
    let ok = back == original;
    Ok(Row {
        cells: vec![
            report.n.into(),
            report.payload_bits.into(),
            report.ideal_bits.into(),
            report.file_bytes.into(),
            ok.into(),
        ],
        passed: Some(ok),
        certificates: Vec::new(),
    })
}
