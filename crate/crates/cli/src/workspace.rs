//! Artifact layout of an output directory and all-or-nothing writes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use fuelrec_core::anomaly::read_labels_csv;
use fuelrec_core::explain::{read_explanations_csv, ExplanationRow};
use fuelrec_core::ingest::{GroupMedians, VinTable};
use fuelrec_core::metrics::Catalog;
use fuelrec_core::model::{FuelModel, ModelMode};
use fuelrec_core::recommend::DayKms;
use fuelrec_core::split::Split;
use fuelrec_core::{AnomalyLabel, AnomalyLimitTable, Far, FeatureRegistry};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const SYNTH_DIR: &str = "synth";
pub const RAW: &str = "synth/raw.csv";
pub const ORACLE: &str = "synth/oracle.csv";
pub const VIN_TABLE: &str = "synth/vin_table.csv";
pub const CATALOG: &str = "synth/catalog.csv";
pub const FAR: &str = "far.csv";
pub const FAR_IMPUTED: &str = "far_imputed.csv";
pub const DAY_KMS: &str = "day_kms.csv";
pub const SPLIT: &str = "split.csv";
pub const INGEST_REPORT: &str = "ingest_report.csv";
pub const MEDIANS_IMPUTE: &str = "medians_impute.csv";
pub const LABELS: &str = "labels.csv";
pub const LIMITS: &str = "limits.csv";
pub const MEDIANS_INLIER: &str = "medians_inlier.csv";
pub const METRICS: &str = "metrics.csv";
pub const CONTRAST: &str = "contrast.csv";

pub fn model_file(mode: ModelMode) -> String {
    format!("models/{mode}.json")
}

pub fn model_metrics_file(mode: ModelMode) -> String {
    format!("models/{mode}_metrics.csv")
}

pub fn mode_file(mode: ModelMode, name: &str) -> String {
    format!("{mode}/{name}")
}

/// Resolves artifact paths and reads them back.
pub struct Workspace<'a> {
    pub cfg: &'a PipelineConfig,
    pub root: PathBuf,
}

impl<'a> Workspace<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Self {
            cfg,
            root: cfg.paths.output.clone(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn stage(&self) -> Staged {
        Staged {
            header: self.cfg.header(),
            files: Vec::new(),
        }
    }

    fn open(&self, what: &'static str, path: &Path) -> CliResult<BufReader<File>> {
        match File::open(path) {
            Ok(f) => Ok(BufReader::new(f)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::MissingArtifact {
                what,
                path: path.to_path_buf(),
            }),
            Err(e) => Err(CliError::Internal(format!("{}: {e}", path.display()))),
        }
    }

    fn open_artifact(&self, what: &'static str, name: &str) -> CliResult<BufReader<File>> {
        self.open(what, &self.path(name))
    }

    /// A configured path, else the synthetic artifact when it exists.
    fn optional_input(&self, configured: &Option<PathBuf>, synth: &str) -> Option<PathBuf> {
        configured
            .clone()
            .or_else(|| Some(self.path(synth)).filter(|p| p.exists()))
    }

    pub fn input_path(&self) -> CliResult<PathBuf> {
        self.optional_input(&self.cfg.paths.input, RAW)
            .ok_or_else(|| CliError::MissingArtifact {
                what: "raw telemetry input",
                path: self.cfg.paths.input.clone().unwrap_or_else(|| self.path(RAW)),
            })
    }

    pub fn registry(&self) -> CliResult<FeatureRegistry> {
        match &self.cfg.paths.registry {
            Some(p) => Ok(FeatureRegistry::from_reader(self.open("feature registry", p)?)?),
            None => Ok(FeatureRegistry::builtin()),
        }
    }

    pub fn vin_table(&self) -> CliResult<VinTable> {
        match self.optional_input(&self.cfg.paths.vin_table, VIN_TABLE) {
            Some(p) => Ok(VinTable::from_reader(self.open("VIN table", &p)?)?),
            None => Ok(VinTable::new(Vec::new())),
        }
    }

    pub fn catalog(&self) -> CliResult<Option<Catalog>> {
        self.optional_input(&self.cfg.paths.catalog, CATALOG)
            .map(|p| Ok(Catalog::read_csv(self.open("catalog", &p)?)?))
            .transpose()
    }

    pub fn oracle_path(&self) -> Option<PathBuf> {
        self.optional_input(&self.cfg.paths.oracle, ORACLE)
    }

    pub fn far(&self) -> CliResult<Far> {
        let mut far = Far::read_csv(self.open_artifact("FAR (run ingest first)", FAR)?)?;
        far.apply_mask_csv(self.open_artifact("imputation mask (run ingest first)", FAR_IMPUTED)?)?;
        if far.is_empty() {
            return Err(CliError::Data("the FAR has no rows".into()));
        }
        Ok(far)
    }

    pub fn split(&self, far: &Far) -> CliResult<Split> {
        read_split(far, self.open_artifact("train/test split (run ingest first)", SPLIT)?)
    }

    pub fn day_kms(&self) -> CliResult<DayKms> {
        read_day_kms(self.open_artifact("daily distance file (run ingest first)", DAY_KMS)?)
    }

    pub fn labels(&self, far: &Far) -> CliResult<Vec<AnomalyLabel>> {
        Ok(read_labels_csv(far, self.open_artifact("anomaly labels (run detect first)", LABELS)?)?)
    }

    pub fn limits(&self) -> CliResult<AnomalyLimitTable> {
        Ok(AnomalyLimitTable::read_csv(
            self.open_artifact("anomaly limits (run detect first)", LIMITS)?,
        )?)
    }

    pub fn inlier_medians(&self) -> CliResult<GroupMedians> {
        Ok(GroupMedians::read_csv(
            self.open_artifact("inlier medians (run detect first)", MEDIANS_INLIER)?,
        )?)
    }

    pub fn model(&self, mode: ModelMode, registry: &FeatureRegistry) -> CliResult<FuelModel> {
        let m = FuelModel::read(self.open_artifact("trained model file (run train first)", &model_file(mode))?)?;
        if m.mode != mode {
            return Err(CliError::Data(format!("{} holds a {} model", model_file(mode), m.mode)));
        }
        m.check_registry(registry)?;
        Ok(m)
    }

    pub fn explanations(&self, mode: ModelMode, name: &str) -> CliResult<Vec<ExplanationRow>> {
        Ok(read_explanations_csv(
            self.open_artifact("explanations (run explain first)", &mode_file(mode, name))?,
        )?)
    }
}

/// Output files held in memory until every one of a command's outputs exists.
pub struct Staged {
    header: String,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    /// Adds a file whose first line is the version/config header.
    pub fn add(
        &mut self,
        path: PathBuf,
        write: impl FnOnce(&mut Vec<u8>) -> fuelrec_core::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        writeln!(buf, "{}", self.header).map_err(|e| CliError::Internal(e.to_string()))?;
        write(&mut buf)?;
        self.files.push((path, buf));
        Ok(())
    }

    /// Writes every file to a temporary sibling, then renames them all into
    /// place. On failure the temporaries are removed.
    pub fn commit(self) -> CliResult<Vec<PathBuf>> {
        let tmp_of = |p: &Path| {
            let mut name = p.file_name().expect("file path").to_os_string();
            name.push(".partial");
            p.with_file_name(name)
        };
        let internal = |p: &Path, e: std::io::Error| CliError::Internal(format!("{}: {e}", p.display()));
        let mut written = Vec::new();
        let result = (|| {
            for (p, bytes) in &self.files {
                if let Some(dir) = p.parent() {
                    fs::create_dir_all(dir).map_err(|e| internal(dir, e))?;
                }
                let tmp = tmp_of(p);
                written.push(tmp.clone());
                let mut f = File::create(&tmp).map_err(|e| internal(&tmp, e))?;
                f.write_all(bytes).map_err(|e| internal(&tmp, e))?;
                f.sync_all().map_err(|e| internal(&tmp, e))?;
            }
            for (p, _) in &self.files {
                fs::rename(tmp_of(p), p).map_err(|e| internal(p, e))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for t in &written {
                let _ = fs::remove_file(t);
            }
        }
        result.map(|()| self.files.into_iter().map(|(p, _)| p).collect())
    }
}

fn parse_date(s: &str, context: &'static str, line: usize) -> CliResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| CliError::Data(format!("{context}: line {line}: {e}")))
}

pub fn write_split<W: Write>(far: &Far, split: &Split, writer: W) -> fuelrec_core::Result<()> {
    let mut side = vec!["train"; far.len()];
    for &i in &split.test {
        side[i] = "test";
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vehicle_id", "date_tx", "side"])?;
    for (r, s) in far.rows.iter().zip(side) {
        w.write_record([r.vehicle_id.as_str(), &r.date.to_string(), s])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_split<R: std::io::Read>(far: &Far, reader: R) -> CliResult<Split> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut side: BTreeMap<(String, NaiveDate), bool> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(e.to_string()))?;
        let test = match &rec[2] {
            "test" => true,
            "train" => false,
            other => return Err(CliError::Data(format!("split file: line {}: side `{other}`", i + 2))),
        };
        side.insert((rec[0].to_string(), parse_date(&rec[1], "split file", i + 2)?), test);
    }
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, r) in far.rows.iter().enumerate() {
        match side.get(&(r.vehicle_id.clone(), r.date)) {
            Some(true) => split.test.push(i),
            Some(false) => split.train.push(i),
            None => {
                return Err(CliError::Data(format!(
                    "split file has no entry for ({}, {})",
                    r.vehicle_id, r.date
                )))
            }
        }
    }
    Ok(split)
}

pub fn write_day_kms<W: Write>(kms: &DayKms, writer: W) -> fuelrec_core::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vehicle_id", "date_tx", "trip_kms"])?;
    for ((v, d), k) in kms {
        w.write_record([v.as_str(), &d.to_string(), &k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_day_kms<R: std::io::Read>(reader: R) -> CliResult<DayKms> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    let mut out = DayKms::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(e.to_string()))?;
        let k: f64 = rec[2]
            .parse()
            .map_err(|e| CliError::Data(format!("daily distance file: line {}: {e}", i + 2)))?;
        out.insert((rec[0].to_string(), parse_date(&rec[1], "daily distance file", i + 2)?), k);
    }
    Ok(out)
}
