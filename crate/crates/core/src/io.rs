//! JSON and CSV persistence for instances, classes, datasets and families.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instances::{FamilyKind, FamilyParams, HardFamily, SignVector};
use crate::model::{BanditInstance, Dataset, FunctionClass, PreferenceDataset};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads and validates an instance.
pub fn read_instance(path: &Path) -> Result<BanditInstance> {
    read_json::<BanditInstance>(path)?.validated()
}

pub fn read_class(path: &Path) -> Result<FunctionClass> {
    let class: FunctionClass = read_json(path)?;
    FunctionClass::new(class.members, class.realizable_index)
}

pub fn write_bandit_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if data.is_empty() {
        w.write_record(["s", "a", "r"])?;
    }
    for row in &data.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_preference_csv<W: Write>(writer: W, data: &PreferenceDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if data.is_empty() {
        w.write_record(["s", "a1", "a2", "y"])?;
    }
    for row in &data.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bandit_csv<R: Read>(reader: R) -> Result<Dataset> {
    let rows = csv::Reader::from_reader(reader).deserialize().collect::<Result<_, _>>()?;
    Ok(Dataset::new(rows))
}

pub fn read_preference_csv<R: Read>(reader: R) -> Result<PreferenceDataset> {
    let rows = csv::Reader::from_reader(reader).deserialize().collect::<Result<_, _>>()?;
    Ok(PreferenceDataset::new(rows))
}

/// `family.json`: parameters and the label of each instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub kind: FamilyKind,
    pub params: FamilyParams,
    pub members: Vec<FamilyEntry>,
    pub class_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub file: String,
    pub label: SignVector,
}

/// Writes `instance_XXXX.json` per member, `class.json` and `family.json`.
pub fn write_family(dir: &Path, family: &HardFamily) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut members = Vec::with_capacity(family.len());
    for (i, (inst, label)) in family.instances.iter().zip(&family.labels).enumerate() {
        let file = format!("instance_{i:04}.json");
        write_json(&dir.join(&file), inst)?;
        members.push(FamilyEntry { file, label: label.clone() });
    }
    let class_file = "class.json".to_string();
    write_json(&dir.join(&class_file), &family.shared_function_class)?;
    let manifest = FamilyManifest { kind: family.kind, params: family.params.clone(), members, class_file };
    write_json(&dir.join("family.json"), &manifest)
}

pub fn read_family(dir: &Path) -> Result<HardFamily> {
    let manifest: FamilyManifest = read_json(&dir.join("family.json"))?;
    let instances = manifest
        .members
        .iter()
        .map(|e| read_instance(&dir.join(&e.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok(HardFamily {
        kind: manifest.kind,
        labels: manifest.members.into_iter().map(|e| e.label).collect(),
        instances,
        shared_function_class: read_class(&dir.join(&manifest.class_file))?,
        params: manifest.params,
    })
}
