//! Base vehicle population: read from CSV or synthesized under a seed.

use std::path::PathBuf;

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use super::catalog::ComplexityTable;
use crate::rng::keyed;
use crate::table::Table;
use crate::{Error, Result};

/// One vehicle from the base population. `None` marks a missing cell in a
/// column that has a sentinel substitute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseVehicle {
    pub maker: String,
    pub model: String,
    pub color: Option<String>,
    pub reg_year: Option<i32>,
    pub body_type: Option<String>,
    pub door_num: Option<i32>,
    pub engine_size: Option<String>,
    pub gearbox: Option<String>,
    pub fuel_type: Option<String>,
    pub price: f64,
}

impl BaseVehicle {
    pub fn has_missing(&self) -> bool {
        self.color.is_none()
            || self.reg_year.is_none()
            || self.body_type.is_none()
            || self.door_num.is_none()
            || self.engine_size.is_none()
            || self.gearbox.is_none()
            || self.fuel_type.is_none()
    }
}

/// Parameters for a synthetic base population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub seed: u64,
    /// Models generated per maker; drives the cardinality of `model`.
    pub models_per_maker: usize,
    /// Relative sampling weight of makers at complexity 1..=4.
    pub maker_weights: [f64; 4],
    /// Median price at complexity 1..=4.
    pub price_median: [f64; 4],
    /// Standard deviation of log-price.
    pub price_log_sd: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_rows: 10_000,
            seed: 42,
            models_per_maker: 12,
            maker_weights: [4.0, 1.0, 2.0, 1.0],
            price_median: [18_000.0, 22_000.0, 45_000.0, 90_000.0],
            price_log_sd: 0.45,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaseSource {
    Csv(PathBuf),
    Synth(SynthSpec),
}

pub const COLORS: &[&str] = &[
    "Beige", "Black", "Blue", "Bronze", "Brown", "Gold", "Green", "Grey", "Maroon", "Multicolour",
    "Navy", "Orange", "Pink", "Purple", "Red", "Silver", "Turquoise", "White", "Yellow",
];
pub const BODY_TYPES: &[&str] = &[
    "Convertible", "Coupe", "Estate", "Hatchback", "Limousine", "MPV", "Minibus", "Pickup",
    "SUV", "Saloon",
];
pub const DOORS: &[i32] = &[2, 3, 4, 5];
pub const GEARBOXES: &[&str] = &["Automatic", "Manual", "Semi-Automatic"];
pub const FUEL_TYPES: &[&str] = &[
    "Bi Fuel", "Diesel", "Electric", "Petrol", "Petrol Hybrid", "Petrol Plug-in Hybrid",
];

pub fn acquire_base(source: &BaseSource) -> Result<Vec<BaseVehicle>> {
    match source {
        BaseSource::Csv(path) => base_from_table(&Table::read_csv(path)?),
        BaseSource::Synth(spec) => synthesize_base(spec),
    }
}

const ALIASES: &[(&str, &[&str])] = &[
    ("maker", &["maker", "make", "brand"]),
    ("model", &["model", "genmodel"]),
    ("color", &["color", "colour"]),
    ("reg_year", &["reg_year", "year"]),
    ("body_type", &["body_type", "bodytype"]),
    ("door_num", &["door_num", "doors", "door"]),
    ("engine_size", &["engine_size", "engin_size"]),
    ("gearbox", &["gearbox", "transmission"]),
    ("fuel_type", &["fuel_type", "fueltype", "fuel"]),
    ("price", &["price", "entry_price"]),
];

fn find_column(table: &Table, field: &str) -> Option<usize> {
    let names = ALIASES.iter().find(|(f, _)| *f == field).map(|(_, a)| *a)?;
    names.iter().find_map(|n| table.column_index(n))
}

fn non_empty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

/// Maps a table with at least `maker` and `price` columns onto base vehicles.
/// Missing cells pass through as `None`; substitution happens later.
pub fn base_from_table(table: &Table) -> Result<Vec<BaseVehicle>> {
    let maker = find_column(table, "maker").ok_or_else(|| Error::MissingColumn("maker".into()))?;
    let price = find_column(table, "price").ok_or_else(|| Error::MissingColumn("price".into()))?;
    let col = |f: &str| find_column(table, f);
    let (model, color, year, body, doors, engine, gearbox, fuel) = (
        col("model"),
        col("color"),
        col("reg_year"),
        col("body_type"),
        col("door_num"),
        col("engine_size"),
        col("gearbox"),
        col("fuel_type"),
    );
    let text = |row: &[String], c: Option<usize>| c.and_then(|c| non_empty(&row[c]));
    let int = |row: &[String], c: Option<usize>| {
        c.and_then(|c| row[c].trim().parse::<f64>().ok()).map(|v| v.round() as i32)
    };

    let mut out = Vec::with_capacity(table.len());
    let mut bad_price = 0usize;
    for row in &table.rows {
        let p = row[price].trim().parse::<f64>().unwrap_or(0.0);
        if !(p > 0.0 && p.is_finite()) {
            bad_price += 1;
        }
        out.push(BaseVehicle {
            maker: non_empty(&row[maker]).unwrap_or_default(),
            model: text(row, model).unwrap_or_default(),
            color: text(row, color),
            reg_year: int(row, year),
            body_type: text(row, body),
            door_num: int(row, doors),
            engine_size: text(row, engine),
            gearbox: text(row, gearbox),
            fuel_type: text(row, fuel),
            price: if p.is_finite() { p } else { 0.0 },
        });
    }
    if !out.is_empty() && bad_price * 2 > out.len() {
        return Err(Error::InvalidInput(format!(
            "{bad_price} of {} rows have a non-positive price; check the price column mapping",
            out.len()
        )));
    }
    Ok(out)
}

/// Deterministic synthetic base population. Each row draws from its own
/// keyed generator, so row `i` is the same regardless of `n_rows`.
pub fn synthesize_base(spec: &SynthSpec) -> Result<Vec<BaseVehicle>> {
    if spec.n_rows == 0 {
        return Err(Error::InvalidInput("n_rows must be >= 1".into()));
    }
    if spec.models_per_maker == 0 || spec.price_log_sd < 0.0 {
        return Err(Error::InvalidInput("models_per_maker must be >= 1 and price_log_sd >= 0".into()));
    }
    let makers: Vec<(&str, u8)> = ComplexityTable::default_makers().collect();
    let weights: Vec<f64> = makers
        .iter()
        .map(|(_, c)| spec.maker_weights[usize::from(*c) - 1])
        .collect();
    let maker_dist =
        WeightedIndex::new(&weights).map_err(|e| Error::InvalidInput(format!("maker weights: {e}")))?;
    let price_dists = spec
        .price_median
        .iter()
        .map(|m| {
            LogNormal::new(m.ln(), spec.price_log_sd)
                .map_err(|e| Error::InvalidInput(format!("price distribution: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = (0..spec.n_rows)
        .map(|i| {
            let mut rng = keyed(spec.seed, i as u64, "base");
            let (maker, complexity) = makers[maker_dist.sample(&mut rng)];
            let model_no = rng.random_range(1..=spec.models_per_maker);
            // newer and pricier makers skew towards larger engines
            let engine_tenths = 10 + rng.random_range(0..=16) * 2 + 4 * (i32::from(complexity) - 1);
            let fuel = FUEL_TYPES[rng.random_range(0..FUEL_TYPES.len())];
            let price = price_dists[usize::from(complexity) - 1].sample(&mut rng).max(500.0);
            BaseVehicle {
                maker: maker.to_string(),
                model: format!("{maker} M{model_no}"),
                color: Some(COLORS[rng.random_range(0..COLORS.len())].to_string()),
                reg_year: Some(rng.random_range(2001..=2020)),
                body_type: Some(BODY_TYPES[rng.random_range(0..BODY_TYPES.len())].to_string()),
                door_num: Some(DOORS[rng.random_range(0..DOORS.len())]),
                engine_size: Some(format!("{}.{}L", engine_tenths / 10, engine_tenths % 10)),
                gearbox: Some(GEARBOXES[rng.random_range(0..GEARBOXES.len())].to_string()),
                fuel_type: Some(fuel.to_string()),
                price: price.round(),
            }
        })
        .collect();
    Ok(rows)
}
