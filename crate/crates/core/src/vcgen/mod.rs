//! Vehicle-claims dataset generator.
//!
//! Starting from a base vehicle population, every row receives an issue and
//! issue id, a maker-dependent repair complexity, and the derived repair
//! hours and cost. Periodic rows then have their cost/hours pushed into a
//! sigma band above the mean, and missing categorical cells are replaced by
//! out-of-vocabulary sentinels. Both kinds of rows are labeled anomalous.

mod base;
mod catalog;
mod inject;

use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use base::{
    acquire_base, base_from_table, synthesize_base, BaseSource, BaseVehicle, SynthSpec, BODY_TYPES,
    COLORS, DOORS, FUEL_TYPES, GEARBOXES,
};
pub use catalog::{
    compute_repair_cost, compute_repair_hours, ComplexityTable, IssueCatalog, IssueEntry,
    LABOR_RATE,
};
pub use inject::{
    inject_anomalies, rebalance, substitute_missing, ColumnStats, InjectionStats, Rebalance,
    SENTINEL_BODY_TYPE, SENTINEL_COLOR, SENTINEL_DOOR_NUM, SENTINEL_ENGINE_SIZE,
    SENTINEL_FUEL_TYPE, SENTINEL_GEARBOX, SENTINEL_REG_YEAR, SUBSTITUTABLE,
};

use crate::encode::ColumnKind;
use crate::rng::keyed;
use crate::table::{fmt6, Table};
use crate::{Error, Result};

/// Output column order of the dataset CSV.
pub const COLUMNS: [&str; 16] = [
    "maker",
    "model",
    "color",
    "reg_year",
    "body_type",
    "door_num",
    "engine_size",
    "gearbox",
    "fuel_type",
    "price",
    "issue",
    "issue_id",
    "repair_complexity",
    "repair_hours",
    "repair_cost",
    "label",
];

pub const DATE_COLUMNS: [&str; 2] = ["breakdown_date", "repair_date"];

/// Feature columns treated as numerical when encoding a generated dataset;
/// every other feature column is categorical.
pub const NUMERICAL_COLUMNS: [&str; 3] = ["price", "repair_hours", "repair_cost"];

/// Column kinds for a generated dataset's feature columns.
pub fn column_kinds() -> Vec<(String, ColumnKind)> {
    COLUMNS[..COLUMNS.len() - 1]
        .iter()
        .map(|c| {
            let kind = if NUMERICAL_COLUMNS.contains(c) {
                ColumnKind::Numerical
            } else {
                ColumnKind::Categorical
            };
            (c.to_string(), kind)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    pub cost_period: usize,
    pub hours_period: usize,
    pub cost_sigma_range: [f64; 2],
    pub hours_sigma_range: [f64; 2],
    /// Fraction of rows given a sentinel categorical value when the base has
    /// no missing cells of its own.
    pub missing_rate: f64,
    pub target_ratio: Option<f64>,
    pub seed: u64,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig {
            cost_period: 10,
            hours_period: 20,
            cost_sigma_range: [3.0, 6.0],
            hours_sigma_range: [3.0, 4.0],
            // 29,924 sentinel rows out of 268,255 in the reference dataset
            missing_rate: 0.1116,
            target_ratio: None,
            seed: 42,
        }
    }
}

impl AnomalyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cost_period == 0 || self.hours_period == 0 {
            return Err(Error::Config("anomaly periods must be >= 1".into()));
        }
        for (name, r) in [("cost", self.cost_sigma_range), ("hours", self.hours_sigma_range)] {
            if !(r[0] >= 0.0 && r[1] >= r[0] && r[1].is_finite()) {
                return Err(Error::Config(format!(
                    "{name}_sigma_range must satisfy 0 <= lo <= hi, got {r:?}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config("missing_rate must lie in [0, 1)".into()));
        }
        if let Some(t) = self.target_ratio {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config("target_ratio must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Why a row is labeled anomalous.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyFlags {
    pub cost: bool,
    pub hours: bool,
    pub sentinel: bool,
}

impl AnomalyFlags {
    pub fn numeric(&self) -> bool {
        self.cost || self.hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub base: BaseVehicle,
    pub issue: String,
    pub issue_id: u32,
    pub repair_complexity: u8,
    pub repair_hours: f64,
    pub repair_cost: f64,
    pub breakdown_date: Option<NaiveDate>,
    pub repair_date: Option<NaiveDate>,
    pub label: u8,
    pub flags: AnomalyFlags,
}

/// Draws an issue uniformly from the catalog, then an issue id uniformly
/// from its sub-categories.
pub fn assign_issue<R: Rng + ?Sized>(rng: &mut R, catalog: &IssueCatalog) -> (String, u32) {
    let entry = &catalog.entries[rng.random_range(0..catalog.entries.len())];
    let id = rng.random_range(1..=entry.sub_count());
    (entry.issue.clone(), id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub base_rows: usize,
    pub dropped_nonpositive_price: usize,
    pub rows: usize,
    pub cost_perturbed: usize,
    pub hours_perturbed: usize,
    pub sentinel_rows: usize,
    pub anomalies: usize,
    pub normals: usize,
}

/// Provenance and summary statistics written next to a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub numerical_columns: Vec<String>,
    pub config: AnomalyConfig,
    pub with_dates: bool,
    pub counts: Counts,
    pub achieved_ratio: f64,
    pub clean_stats: InjectionStats,
    pub output_stats: InjectionStats,
    pub rebalance: Option<Rebalance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<ClaimRecord>,
    pub manifest: Manifest,
}

const DATE_START: (i32, u32, u32) = (2015, 1, 1);
const DATE_SPAN_DAYS: u64 = 6 * 365;
const WORK_DAY_HOURS: f64 = 8.0;

fn assign_dates(rec: &mut ClaimRecord, seed: u64, row: usize) {
    let start = NaiveDate::from_ymd_opt(DATE_START.0, DATE_START.1, DATE_START.2)
        .expect("valid start date");
    let offset = keyed(seed, row as u64, "date").random_range(0..DATE_SPAN_DAYS);
    let breakdown = start + Days::new(offset);
    let days = (rec.repair_hours.max(0.0) / WORK_DAY_HOURS).ceil() as u64;
    rec.breakdown_date = Some(breakdown);
    rec.repair_date = Some(breakdown + Days::new(days.max(1)));
}

/// Runs the whole generator: issues, complexity, hours and cost, anomaly
/// injection, sentinel substitution, optional ratio rebalancing.
pub fn generate_dataset(
    base: Vec<BaseVehicle>,
    catalog: &IssueCatalog,
    complexity: &ComplexityTable,
    cfg: &AnomalyConfig,
    with_dates: bool,
) -> Result<Dataset> {
    catalog.validate()?;
    complexity.validate()?;
    cfg.validate()?;
    let base_rows = base.len();
    let mut records = Vec::with_capacity(base_rows);
    let mut dropped = 0;
    for (i, vehicle) in base.into_iter().enumerate() {
        if !(vehicle.price > 0.0) {
            dropped += 1;
            continue;
        }
        let (issue, issue_id) = assign_issue(&mut keyed(cfg.seed, i as u64, "issue"), catalog);
        let level = complexity.complexity_of(&vehicle.maker);
        let hours = compute_repair_hours(catalog, &issue, issue_id, level)?;
        let cost = compute_repair_cost(catalog, hours, vehicle.price, &issue, issue_id)?;
        records.push(ClaimRecord {
            base: vehicle,
            issue,
            issue_id,
            repair_complexity: level,
            repair_hours: hours,
            repair_cost: cost,
            breakdown_date: None,
            repair_date: None,
            label: 0,
            flags: AnomalyFlags::default(),
        });
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} base rows with a non-positive price");
    }

    let clean_stats = inject_anomalies(&mut records, cfg)?;
    let sentinel_rows = substitute_missing(&mut records, cfg);
    if with_dates {
        for (i, rec) in records.iter_mut().enumerate() {
            assign_dates(rec, cfg.seed, i);
        }
    }
    let cost_perturbed = records.iter().filter(|r| r.flags.cost).count();
    let hours_perturbed = records.iter().filter(|r| r.flags.hours).count();
    let rebalanced = match cfg.target_ratio {
        Some(t) => Some(rebalance(&mut records, t, cfg.seed)?),
        None => None,
    };

    let anomalies = records.iter().filter(|r| r.label == 1).count();
    let output_stats = InjectionStats {
        repair_cost: ColumnStats::of(records.iter().map(|r| r.repair_cost)),
        repair_hours: ColumnStats::of(records.iter().map(|r| r.repair_hours)),
    };
    let mut columns: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
    if with_dates {
        columns.extend(DATE_COLUMNS.iter().map(|c| c.to_string()));
    }
    let manifest = Manifest {
        generator: format!("auditbench-vcgen {}", env!("CARGO_PKG_VERSION")),
        seed: cfg.seed,
        columns,
        numerical_columns: NUMERICAL_COLUMNS.iter().map(|c| c.to_string()).collect(),
        config: cfg.clone(),
        with_dates,
        counts: Counts {
            base_rows,
            dropped_nonpositive_price: dropped,
            rows: records.len(),
            cost_perturbed,
            hours_perturbed,
            sentinel_rows,
            anomalies,
            normals: records.len() - anomalies,
        },
        achieved_ratio: anomalies as f64 / records.len() as f64,
        clean_stats,
        output_stats,
        rebalance: rebalanced,
    };
    Ok(Dataset { records, manifest })
}

fn opt_text(v: &Option<String>) -> String {
    v.clone().unwrap_or_default()
}

fn opt_int(v: Option<i32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ClaimRecord {
    /// CSV cells in [`COLUMNS`] order, followed by dates when requested.
    pub fn cells(&self, with_dates: bool) -> Vec<String> {
        let b = &self.base;
        let mut cells = vec![
            b.maker.clone(),
            b.model.clone(),
            opt_text(&b.color),
            opt_int(b.reg_year),
            opt_text(&b.body_type),
            opt_int(b.door_num),
            opt_text(&b.engine_size),
            opt_text(&b.gearbox),
            opt_text(&b.fuel_type),
            fmt6(b.price),
            self.issue.clone(),
            self.issue_id.to_string(),
            self.repair_complexity.to_string(),
            fmt6(self.repair_hours),
            fmt6(self.repair_cost),
            self.label.to_string(),
        ];
        if with_dates {
            let date = |d: Option<NaiveDate>| d.map(|d| d.to_string()).unwrap_or_default();
            cells.push(date(self.breakdown_date));
            cells.push(date(self.repair_date));
        }
        cells
    }
}

impl Dataset {
    pub fn to_table(&self) -> Table {
        let with_dates = self.manifest.with_dates;
        Table {
            columns: self.manifest.columns.clone(),
            rows: self.records.iter().map(|r| r.cells(with_dates)).collect(),
        }
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.to_table().to_writer(&mut buf)?;
        Ok(buf)
    }

    pub fn write(&self, csv_path: &Path, manifest_path: &Path) -> Result<()> {
        self.to_table().write_csv(csv_path)?;
        let json = serde_json::to_vec_pretty(&self.manifest)?;
        std::fs::write(manifest_path, json).map_err(|e| Error::io(manifest_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(n: usize, seed: u64) -> Vec<BaseVehicle> {
        synthesize_base(&SynthSpec {
            n_rows: n,
            seed,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    fn generate(n: usize, cfg: &AnomalyConfig) -> Dataset {
        generate_dataset(
            synth(n, 1),
            &IssueCatalog::default(),
            &ComplexityTable::default(),
            cfg,
            false,
        )
        .unwrap()
    }

    #[test]
    fn issue_ids_respect_sub_counts() {
        let catalog = IssueCatalog::default();
        let mut seen_warning = std::collections::BTreeSet::new();
        for row in 0..4000u64 {
            let (issue, id) = assign_issue(&mut keyed(3, row, "issue"), &catalog);
            let subs = catalog.get(&issue).unwrap().sub_count();
            assert!(id >= 1 && id <= subs);
            if issue == "Flat Tyres" {
                assert_eq!(id, 1);
            }
            if issue == "Warning Light" {
                seen_warning.insert(id);
            }
        }
        assert_eq!(seen_warning.into_iter().collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn issue_sequence_is_deterministic() {
        let catalog = IssueCatalog::default();
        let a: Vec<_> = (0..50).map(|r| assign_issue(&mut keyed(9, r, "issue"), &catalog)).collect();
        let b: Vec<_> = (0..50).map(|r| assign_issue(&mut keyed(9, r, "issue"), &catalog)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn hundred_rows_counts() {
        let cfg = AnomalyConfig {
            missing_rate: 0.0,
            ..AnomalyConfig::default()
        };
        let ds = generate(100, &cfg);
        let cost: Vec<usize> = (0..100).filter(|&i| ds.records[i].flags.cost).map(|i| i + 1).collect();
        let hours: Vec<usize> = (0..100).filter(|&i| ds.records[i].flags.hours).map(|i| i + 1).collect();
        assert_eq!(cost, (1..=10).map(|k| 10 * k).collect::<Vec<_>>());
        assert_eq!(hours, vec![20, 40, 60, 80, 100]);
        assert_eq!(ds.manifest.counts.anomalies, 10);
        let stats = ds.manifest.clean_stats;
        for r in ds.records.iter().filter(|r| r.flags.cost) {
            let z = stats.repair_cost.z(r.repair_cost);
            assert!((3.0 - 1e-9..=6.0 + 1e-9).contains(&z), "z = {z}");
        }
        for r in ds.records.iter().filter(|r| r.flags.hours) {
            let z = stats.repair_hours.z(r.repair_hours);
            assert!((3.0 - 1e-9..=4.0 + 1e-9).contains(&z), "z = {z}");
        }
    }

    #[test]
    fn normal_rows_reproduce_formulas() {
        let ds = generate(500, &AnomalyConfig::default());
        let catalog = IssueCatalog::default();
        for r in ds.records.iter().filter(|r| r.label == 0) {
            let h = compute_repair_hours(&catalog, &r.issue, r.issue_id, r.repair_complexity).unwrap();
            let c = compute_repair_cost(&catalog, h, r.base.price, &r.issue, r.issue_id).unwrap();
            assert_eq!(h, r.repair_hours);
            assert_eq!(c, r.repair_cost);
        }
    }

    #[test]
    fn labels_match_flags() {
        let ds = generate(1000, &AnomalyConfig::default());
        for r in &ds.records {
            let f = r.flags;
            assert_eq!(r.label == 1, f.cost || f.hours || f.sentinel);
        }
        assert_eq!(ds.manifest.counts.sentinel_rows, 112);
    }

    #[test]
    fn missing_cells_get_sentinels() {
        let mut base = synth(20, 5);
        base[3].color = None;
        base[4].fuel_type = None;
        let ds = generate_dataset(
            base,
            &IssueCatalog::default(),
            &ComplexityTable::default(),
            &AnomalyConfig::default(),
            false,
        )
        .unwrap();
        assert_eq!(ds.records[3].base.color.as_deref(), Some("Gelb"));
        assert_eq!(ds.records[3].label, 1);
        assert_eq!(ds.records[4].base.fuel_type.as_deref(), Some("Hydrogen"));
        assert_eq!(ds.records[4].label, 1);
        // only the rows with missing cells, not missing_rate rows
        assert_eq!(ds.manifest.counts.sentinel_rows, 2);
    }

    #[test]
    fn no_missing_and_zero_rate_is_noop() {
        let cfg = AnomalyConfig {
            missing_rate: 0.0,
            ..AnomalyConfig::default()
        };
        let ds = generate(200, &cfg);
        assert!(ds.records.iter().all(|r| !r.flags.sentinel));
        let base = synth(200, 1);
        for (r, b) in ds.records.iter().zip(&base) {
            assert_eq!(&r.base, b);
        }
    }

    #[test]
    fn dilution_to_one_percent() {
        let cfg = AnomalyConfig {
            target_ratio: Some(0.01),
            ..AnomalyConfig::default()
        };
        let ds = generate(1000, &cfg);
        let r = ds.manifest.achieved_ratio;
        assert!((0.005..=0.015).contains(&r), "ratio {r}");
        assert_eq!(ds.manifest.counts.anomalies, ds.records.iter().filter(|r| r.label == 1).count());
    }

    #[test]
    fn raising_ratio_drops_normals() {
        let cfg = AnomalyConfig {
            target_ratio: Some(0.5),
            ..AnomalyConfig::default()
        };
        let ds = generate(1000, &cfg);
        assert!((ds.manifest.achieved_ratio - 0.5).abs() <= 0.005);
        assert!(ds.manifest.rebalance.unwrap().normals_removed > 0);
    }

    #[test]
    fn degenerate_cost_column_is_refused() {
        let base: Vec<BaseVehicle> = (0..20)
            .map(|_| BaseVehicle {
                maker: "Audi".into(),
                model: "A".into(),
                color: Some("Red".into()),
                reg_year: Some(2010),
                body_type: Some("SUV".into()),
                door_num: Some(4),
                engine_size: Some("2.0L".into()),
                gearbox: Some("Manual".into()),
                fuel_type: Some("Petrol".into()),
                price: 10000.0,
            })
            .collect();
        let catalog = IssueCatalog {
            entries: vec![IssueEntry {
                issue: "Flat Tyres".into(),
                base_hours: vec![1.0],
                cost_ratios: vec![0.0003],
            }],
        };
        let r = generate_dataset(base, &catalog, &ComplexityTable::default(), &AnomalyConfig::default(), false);
        assert!(matches!(r, Err(Error::DegenerateColumn(_))));
    }

    #[test]
    fn too_few_rows() {
        let r = generate_dataset(
            synth(5, 1),
            &IssueCatalog::default(),
            &ComplexityTable::default(),
            &AnomalyConfig::default(),
            false,
        );
        assert!(r.is_err());
    }

    #[test]
    fn dates_follow_work_day_rule() {
        let ds = generate_dataset(
            synth(40, 2),
            &IssueCatalog::default(),
            &ComplexityTable::default(),
            &AnomalyConfig::default(),
            true,
        )
        .unwrap();
        for r in &ds.records {
            let days = (r.repair_date.unwrap() - r.breakdown_date.unwrap()).num_days();
            let expect = ((r.repair_hours / 8.0).ceil() as i64).max(1);
            assert_eq!(days, expect);
        }
        assert_eq!(ds.to_table().columns.len(), 18);
    }

    #[test]
    fn csv_header_and_determinism() {
        let cfg = AnomalyConfig::default();
        let a = generate(300, &cfg).to_csv_bytes().unwrap();
        let b = generate(300, &cfg).to_csv_bytes().unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(
            "maker,model,color,reg_year,body_type,door_num,engine_size,gearbox,fuel_type,price,issue,issue_id,repair_complexity,repair_hours,repair_cost,label\n"
        ));
    }

    #[test]
    fn config_validation() {
        let bad = AnomalyConfig {
            missing_rate: 1.0,
            ..AnomalyConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AnomalyConfig {
            cost_sigma_range: [4.0, 3.0],
            ..AnomalyConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AnomalyConfig {
            target_ratio: Some(1.0),
            ..AnomalyConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
