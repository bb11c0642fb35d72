//! Anomaly injection: sigma-band perturbation of repair cost/hours, sentinel
//! substitution of missing categorical cells, and anomaly-ratio rebalancing.

use rand::Rng;

use super::{AnomalyConfig, ClaimRecord};
use crate::rng::{key, keyed, unit_from_key};
use crate::{Error, Result};

pub const SENTINEL_COLOR: &str = "Gelb";
pub const SENTINEL_REG_YEAR: i32 = 3010;
pub const SENTINEL_BODY_TYPE: &str = "Wood";
pub const SENTINEL_DOOR_NUM: i32 = 0;
pub const SENTINEL_ENGINE_SIZE: &str = "999.0L";
pub const SENTINEL_GEARBOX: &str = "Hybrid";
pub const SENTINEL_FUEL_TYPE: &str = "Hydrogen";

/// Columns that carry a sentinel substitute, in output order.
pub const SUBSTITUTABLE: [&str; 7] = [
    "color",
    "reg_year",
    "body_type",
    "door_num",
    "engine_size",
    "gearbox",
    "fuel_type",
];

/// Population mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

impl ColumnStats {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> ColumnStats {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        ColumnStats { mean, std: var.sqrt() }
    }

    pub fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InjectionStats {
    pub repair_cost: ColumnStats,
    pub repair_hours: ColumnStats,
}

fn draw_multiplier(seed: u64, row: usize, stream: &str, range: [f64; 2]) -> f64 {
    if range[1] <= range[0] {
        return range[0];
    }
    keyed(seed, row as u64, stream).random_range(range[0]..=range[1])
}

/// Perturbs every `cost_period`-th repair cost and every `hours_period`-th
/// repair hours (1-based row positions) to `mean + s * std` of the clean
/// column, with `s` drawn from the configured band. Statistics are taken
/// before any perturbation.
pub fn inject_anomalies(
    records: &mut [ClaimRecord],
    cfg: &AnomalyConfig,
) -> Result<InjectionStats> {
    cfg.validate()?;
    if records.len() < cfg.cost_period {
        return Err(Error::InvalidInput(format!(
            "{} records is fewer than the cost period {}",
            records.len(),
            cfg.cost_period
        )));
    }
    let cost = ColumnStats::of(records.iter().map(|r| r.repair_cost));
    let hours = ColumnStats::of(records.iter().map(|r| r.repair_hours));
    if cost.std == 0.0 {
        return Err(Error::DegenerateColumn("repair_cost".into()));
    }
    if hours.std == 0.0 {
        return Err(Error::DegenerateColumn("repair_hours".into()));
    }
    for (i, rec) in records.iter_mut().enumerate() {
        let pos = i + 1;
        if pos % cfg.cost_period == 0 {
            let s = draw_multiplier(cfg.seed, i, "cost", cfg.cost_sigma_range);
            rec.repair_cost = cost.mean + s * cost.std;
            rec.flags.cost = true;
            rec.label = 1;
        }
        if pos % cfg.hours_period == 0 {
            let s = draw_multiplier(cfg.seed, i, "hours", cfg.hours_sigma_range);
            rec.repair_hours = hours.mean + s * hours.std;
            rec.flags.hours = true;
            rec.label = 1;
        }
    }
    Ok(InjectionStats {
        repair_cost: cost,
        repair_hours: hours,
    })
}

fn fill_sentinel(rec: &mut ClaimRecord, column: usize) {
    let b = &mut rec.base;
    match column {
        0 => b.color = Some(SENTINEL_COLOR.into()),
        1 => b.reg_year = Some(SENTINEL_REG_YEAR),
        2 => b.body_type = Some(SENTINEL_BODY_TYPE.into()),
        3 => b.door_num = Some(SENTINEL_DOOR_NUM),
        4 => b.engine_size = Some(SENTINEL_ENGINE_SIZE.into()),
        5 => b.gearbox = Some(SENTINEL_GEARBOX.into()),
        _ => b.fuel_type = Some(SENTINEL_FUEL_TYPE.into()),
    }
}

fn missing_columns(rec: &ClaimRecord) -> Vec<usize> {
    let b = &rec.base;
    let present = [
        b.color.is_some(),
        b.reg_year.is_some(),
        b.body_type.is_some(),
        b.door_num.is_some(),
        b.engine_size.is_some(),
        b.gearbox.is_some(),
        b.fuel_type.is_some(),
    ];
    (0..7).filter(|&c| !present[c]).collect()
}

/// Replaces missing cells with their column sentinel and labels the row.
///
/// If the base has no missing cells at all, `round(missing_rate * n)` rows
/// are picked uniformly without replacement among rows that were not
/// numerically perturbed, and one uniformly chosen substitutable column of
/// each is blanked and substituted. Returns the number of sentinel rows.
pub fn substitute_missing(records: &mut [ClaimRecord], cfg: &AnomalyConfig) -> usize {
    let any_missing = records.iter().any(|r| r.base.has_missing());
    if any_missing {
        let mut count = 0;
        for rec in records.iter_mut() {
            let cols = missing_columns(rec);
            if cols.is_empty() {
                continue;
            }
            for c in cols {
                fill_sentinel(rec, c);
            }
            rec.flags.sentinel = true;
            rec.label = 1;
            count += 1;
        }
        return count;
    }

    let target = (cfg.missing_rate * records.len() as f64).round() as usize;
    if target == 0 {
        return 0;
    }
    let mut candidates: Vec<(f64, usize)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.flags.cost && !r.flags.hours)
        .map(|(i, _)| (unit_from_key(key(cfg.seed, i as u64, "missing")), i))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(target);
    for &(_, i) in &candidates {
        let column = keyed(cfg.seed, i as u64, "missing_column").random_range(0..SUBSTITUTABLE.len());
        let rec = &mut records[i];
        fill_sentinel(rec, column);
        rec.flags.sentinel = true;
        rec.label = 1;
    }
    candidates.len()
}

/// Outcome of resampling normal rows towards a target anomaly ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rebalance {
    pub normals_removed: usize,
    pub normals_added: usize,
}

/// Down- or up-samples normal rows so that the anomaly ratio is within 0.005
/// of `target`. Anomalies are never touched. Kept rows preserve their order;
/// duplicated normals are appended at the end.
pub fn rebalance(records: &mut Vec<ClaimRecord>, target: f64, seed: u64) -> Result<Rebalance> {
    let anomalies = records.iter().filter(|r| r.label == 1).count();
    let normals = records.len() - anomalies;
    if anomalies == 0 {
        return Err(Error::InvalidInput("cannot rebalance a dataset without anomalies".into()));
    }
    if normals == 0 {
        return Err(Error::InvalidInput("cannot rebalance a dataset without normal rows".into()));
    }
    let wanted = (anomalies as f64 * (1.0 - target) / target).round() as usize;
    let mut out = Rebalance::default();
    if wanted < normals {
        let mut keys: Vec<(f64, usize)> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == 0)
            .map(|(i, _)| (unit_from_key(key(seed, i as u64, "rebalance")), i))
            .collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut drop = vec![false; records.len()];
        for &(_, i) in &keys[wanted..] {
            drop[i] = true;
        }
        let mut idx = 0;
        records.retain(|_| {
            let keep = !drop[idx];
            idx += 1;
            keep
        });
        out.normals_removed = normals - wanted;
    } else if wanted > normals {
        let normal_idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].label == 0).collect();
        let extra = wanted - normals;
        for j in 0..extra {
            let pick = keyed(seed, j as u64, "rebalance_dup").random_range(0..normal_idx.len());
            let dup = records[normal_idx[pick]].clone();
            records.push(dup);
        }
        out.normals_added = extra;
    }
    let achieved = anomalies as f64 / records.len() as f64;
    if (achieved - target).abs() > 0.005 {
        return Err(Error::InvalidInput(format!(
            "anomaly ratio {achieved:.4} cannot reach target {target} within 0.005"
        )));
    }
    Ok(out)
}
