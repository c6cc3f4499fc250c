//! Corpus persistence: a JSON-lines metadata file plus one binary image
//! container per modality. Round trips are bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::encoders::Modality;
use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::vocab::LabelSet;

use super::{CorpusItem, CrisisTag};

pub const METADATA_FILE: &str = "metadata.jsonl";

fn images_file(modality: Modality) -> String {
    format!("images_{modality}.bin")
}

#[derive(Serialize, Deserialize)]
struct MetaRecord {
    id: u64,
    modality: Modality,
    labels: LabelSet,
    lon: f64,
    lat: f64,
    crisis: Option<CrisisTag>,
    source: String,
}

/// Writes `metadata.jsonl` plus `images_sar.bin` / `images_msi.bin` into
/// `dir`. Image payloads are stored in metadata order within each modality.
pub fn save_corpus(dir: &Path, items: &[CorpusItem]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Contract("refusing to save an empty corpus".into()));
    }
    for item in items {
        item.validate()?;
    }
    let side = items[0].image_side();
    if items.iter().any(|it| it.image_side() != side) {
        return Err(Error::Contract("all images must share one side length".into()));
    }
    std::fs::create_dir_all(dir)?;

    let mut meta = BufWriter::new(File::create(dir.join(METADATA_FILE))?);
    for item in items {
        let record = MetaRecord {
            id: item.id,
            modality: item.modality,
            labels: item.labels,
            lon: item.lon,
            lat: item.lat,
            crisis: item.crisis,
            source: item.source.clone(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Data(format!("cannot encode item {}: {e}", item.id)))?;
        writeln!(meta, "{line}")?;
    }
    meta.flush()?;

    for modality in [Modality::Sar, Modality::Msi] {
        let of_modality: Vec<&CorpusItem> =
            items.iter().filter(|it| it.modality == modality).collect();
        let mut w = BufWriter::new(File::create(dir.join(images_file(modality)))?);
        binio::write_header(&mut w, binio::KIND_IMAGES)?;
        binio::write_u64(&mut w, of_modality.len() as u64)?;
        binio::write_u32(&mut w, modality.channels() as u32)?;
        binio::write_u32(&mut w, side as u32)?;
        for item in of_modality {
            binio::write_f64s(&mut w, item.image.values())?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Reads a corpus saved by [`save_corpus`], validating every item.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusItem>> {
    let meta = BufReader::new(File::open(dir.join(METADATA_FILE))?);
    let mut records = Vec::new();
    for (n, line) in meta.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetaRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("metadata line {}: {e}", n + 1)))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Data("metadata holds no items".into()));
    }

    let mut items = Vec::with_capacity(records.len());
    for modality in [Modality::Sar, Modality::Msi] {
        let expected: Vec<&MetaRecord> =
            records.iter().filter(|r| r.modality == modality).collect();
        if expected.is_empty() {
            continue;
        }
        let path = dir.join(images_file(modality));
        let mut r = BufReader::new(File::open(&path)?);
        binio::read_header(&mut r, binio::KIND_IMAGES)?;
        let count = binio::read_u64(&mut r)? as usize;
        let channels = binio::read_u32(&mut r)? as usize;
        let side = binio::read_u32(&mut r)? as usize;
        if count != expected.len() {
            return Err(Error::Data(format!(
                "{} holds {count} images but metadata lists {}",
                path.display(),
                expected.len()
            )));
        }
        if channels != modality.channels() {
            return Err(Error::Data(format!(
                "{} claims {channels} channels for {modality}",
                path.display()
            )));
        }
        for record in expected {
            let values = binio::read_f64s(&mut r, channels * side * side)?;
            let image = Tensor::new(&[channels, side, side], values)?;
            items.push(CorpusItem {
                id: record.id,
                modality: record.modality,
                image,
                labels: record.labels,
                lon: record.lon,
                lat: record.lat,
                crisis: record.crisis,
                source: record.source.clone(),
            });
        }
    }

    items.sort_by_key(|it| it.id);
    let mut seen = std::collections::BTreeSet::new();
    for item in &items {
        if !seen.insert(item.id) {
            return Err(Error::Data(format!("duplicate item id {}", item.id)));
        }
        item.validate()?;
    }
    Ok(items)
}
