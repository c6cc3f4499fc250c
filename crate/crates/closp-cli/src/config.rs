//! Flat key=value run configuration files.
//!
//! One assignment per line; blank lines and `#` comments are skipped.
//! Every diagnostic names the offending 1-based line.

use closp::corpus::GeneratorConfig;
use closp::encoders::EncoderConfig;
use closp::trainer::TrainConfig;
use closp::vocab::LABEL_COUNT;
use closp::{Error, Result};

struct Assignment<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

fn assignments(text: &str) -> Result<Vec<Assignment<'_>>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.trim();
        if stripped.is_empty() || stripped.starts_with('#') {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(Error::Config(format!(
                "line {line}: expected key=value, got {stripped:?}"
            )));
        };
        out.push(Assignment {
            line,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(out)
}

fn at_line(line: usize, err: Error) -> Error {
    match err {
        Error::Config(message) => Error::Config(format!("line {line}: {message}")),
        other => other,
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: {key} does not accept {value:?}")))
}

/// Settings for a training run: encoder geometry plus the optimisation
/// schedule. Both groups share one flat namespace; the five geometry keys
/// are routed here, everything else goes through [`TrainConfig::set`].
#[derive(Debug, Clone, Default)]
pub struct TrainFile {
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
}

impl TrainFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut file = TrainFile::default();
        for a in assignments(text)? {
            match a.key {
                "embed_dim" => file.encoder.embed_dim = parse_field(a.line, a.key, a.value)?,
                "image_side" => file.encoder.image_side = parse_field(a.line, a.key, a.value)?,
                "sh_degree" => file.encoder.sh_degree = parse_field(a.line, a.key, a.value)?,
                "siren_layers" => file.encoder.siren_layers = parse_field(a.line, a.key, a.value)?,
                "siren_omega0" => file.encoder.siren_omega0 = parse_field(a.line, a.key, a.value)?,
                _ => file
                    .train
                    .set(a.key, a.value)
                    .map_err(|e| at_line(a.line, e))?,
            }
        }
        Ok(file)
    }
}

/// Settings for the synthetic corpus generator.
#[derive(Debug, Clone, Default)]
pub struct GenFile {
    pub generator: GeneratorConfig,
}

impl GenFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut file = GenFile::default();
        for a in assignments(text)? {
            match a.key {
                "sar_count" => file.generator.sar_count = parse_field(a.line, a.key, a.value)?,
                "msi_count" => file.generator.msi_count = parse_field(a.line, a.key, a.value)?,
                "image_side" => file.generator.image_side = parse_field(a.line, a.key, a.value)?,
                "priors" => file.generator.priors = parse_priors(a.line, a.value)?,
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown generator key {other:?}",
                        a.line
                    )))
                }
            }
        }
        Ok(file)
    }
}

fn parse_priors(line: usize, value: &str) -> Result<[f64; LABEL_COUNT]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != LABEL_COUNT {
        return Err(Error::Config(format!(
            "line {line}: priors needs {LABEL_COUNT} comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut priors = [0.0; LABEL_COUNT];
    for (slot, part) in priors.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| {
            Error::Config(format!("line {line}: priors entry {part:?} is not a number"))
        })?;
    }
    Ok(priors)
}
