//! Issue catalog (hours and cost ratios per issue/issue_id) and the maker to
//! repair-complexity table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hourly labor rate applied to repair hours.
pub const LABOR_RATE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueEntry {
    pub issue: String,
    pub base_hours: Vec<f64>,
    pub cost_ratios: Vec<f64>,
}

impl IssueEntry {
    pub fn sub_count(&self) -> u32 {
        self.base_hours.len() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueCatalog {
    pub entries: Vec<IssueEntry>,
}

fn entry(issue: &str, base_hours: &[f64], cost_ratios: &[f64]) -> IssueEntry {
    IssueEntry {
        issue: issue.to_string(),
        base_hours: base_hours.to_vec(),
        cost_ratios: cost_ratios.to_vec(),
    }
}

impl Default for IssueCatalog {
    fn default() -> Self {
        IssueCatalog {
            entries: vec![
                entry("Brake Pads Worn", &[2.0], &[0.0005]),
                entry("Alternator Failing", &[2.0], &[0.02]),
                entry("Windscreen Crack", &[1.0], &[0.0006]),
                entry("Gear Box Issue", &[2.0], &[0.01]),
                entry("Flat Tyres", &[1.0], &[0.0003]),
                entry("Radiator Leaking", &[2.0], &[0.02]),
                entry("Excessive Emissions", &[1.0], &[0.0009]),
                entry("Steering Wheel Shaking", &[1.0], &[0.001]),
                entry("Tyre Alignment", &[0.5], &[0.0001]),
                entry("Starter Motor Issue", &[3.0], &[0.01]),
                entry("Sensor Malfunction", &[3.0], &[0.05]),
                entry(
                    "Electrical Issue",
                    &[2.0, 0.5, 1.0, 2.0, 3.0],
                    &[0.001, 0.002, 0.005, 0.003, 0.001],
                ),
                // The source table prints the last two ratios run together as
                // "0.004.0.01"; they are read as 0.004 and 0.01.
                entry(
                    "Warning Light",
                    &[1.0, 0.5, 2.0, 5.0, 3.0, 2.0, 1.0, 9.0],
                    &[0.001, 0.005, 0.003, 0.005, 0.004, 0.002, 0.004, 0.01],
                ),
                entry(
                    "Engine Issue",
                    &[8.0, 16.0, 12.0, 10.0],
                    &[0.2, 0.15, 0.1, 0.05],
                ),
                entry("Transmission Issue", &[1.0, 2.0, 8.0], &[0.003, 0.007, 0.009]),
            ],
        }
    }
}

impl IssueCatalog {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("issue catalog is empty".into()));
        }
        for e in &self.entries {
            if e.base_hours.is_empty() || e.base_hours.len() != e.cost_ratios.len() {
                return Err(Error::Config(format!(
                    "issue {:?}: base_hours and cost_ratios must be non-empty and equally long",
                    e.issue
                )));
            }
            if e.base_hours.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return Err(Error::Config(format!("issue {:?}: hours must be > 0", e.issue)));
            }
            if e.cost_ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                return Err(Error::Config(format!(
                    "issue {:?}: cost ratios must lie in (0, 1)",
                    e.issue
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, issue: &str) -> Option<&IssueEntry> {
        self.entries.iter().find(|e| e.issue == issue)
    }

    fn slot(&self, issue: &str, issue_id: u32) -> Result<(&IssueEntry, usize)> {
        let unknown = || Error::UnknownIssue {
            issue: issue.to_string(),
            issue_id,
        };
        let e = self.get(issue).ok_or_else(unknown)?;
        if issue_id == 0 || issue_id > e.sub_count() {
            return Err(unknown());
        }
        Ok((e, issue_id as usize - 1))
    }

    pub fn base_hours(&self, issue: &str, issue_id: u32) -> Result<f64> {
        self.slot(issue, issue_id).map(|(e, i)| e.base_hours[i])
    }

    pub fn cost_ratio(&self, issue: &str, issue_id: u32) -> Result<f64> {
        self.slot(issue, issue_id).map(|(e, i)| e.cost_ratios[i])
    }
}

/// Maker to repair complexity. Lookups are case-insensitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTable {
    pub mapping: BTreeMap<String, u8>,
    pub default_complexity: u8,
}

pub const COMPLEXITY_1: &[&str] = &[
    "Audi", "BMW", "Chevrolet", "Dacia", "Daewoo", "Daimler", "Fiat", "Ford", "GMC", "Honda",
    "Hyundai", "Jeep", "Kia", "Lexus", "Mazda", "Mercedes-Benz", "Mitsubishi", "Nissan", "Opel",
    "Peugeot", "Renault", "SKODA", "Santana", "Smart", "Suzuki", "Toyota", "Vauxhall",
    "Volkswagen",
];

pub const COMPLEXITY_2: &[&str] = &[
    "Brooke", "Caterham", "Citroen", "DAX", "DS", "Abarth", "Ginetta", "Great Wall", "Grinnall",
    "Infiniti", "Isuzu", "Jensen", "Koenigsegg", "London Taxis International", "MEV", "MG", "MINI",
    "Morgan", "Noble", "Perodua", "Pilgrim", "Proton", "Radical", "Raw", "Reva", "SEAT", "Saab",
    "Sebring", "Ssangyong", "TVR", "Tiger", "Westfield", "Zenos",
];

pub const COMPLEXITY_3: &[&str] = &[
    "Alfa Romeo", "Aston Martin", "Bentley", "Cadillac", "Chrysler", "Daihatsu", "Ferrari",
    "Jaguar", "KTM", "Land Rover", "Lincoln", "Lotus", "McLaren", "Porsche", "Rolls-Royce", "Rover",
    "Subaru", "Volvo",
];

pub const COMPLEXITY_4: &[&str] = &[
    "Corvette", "Buggati", "Dodge", "Hummer", "Lamborghini", "Maserati", "Maybach", "Pagani",
    "Tesla",
];

fn normalize(maker: &str) -> String {
    maker.trim().to_lowercase()
}

impl Default for ComplexityTable {
    fn default() -> Self {
        let mut mapping = BTreeMap::new();
        for (level, makers) in [(1, COMPLEXITY_1), (2, COMPLEXITY_2), (3, COMPLEXITY_3), (4, COMPLEXITY_4)] {
            for m in makers {
                mapping.insert(normalize(m), level);
            }
        }
        ComplexityTable {
            mapping,
            default_complexity: 2,
        }
    }
}

impl ComplexityTable {
    pub fn validate(&self) -> Result<()> {
        let ok = |c: u8| (1..=4).contains(&c);
        if !ok(self.default_complexity) || self.mapping.values().any(|c| !ok(*c)) {
            return Err(Error::Config("repair complexity must be in 1..=4".into()));
        }
        Ok(())
    }

    /// Re-keys a user-supplied mapping so lookups stay case-insensitive.
    pub fn normalized(self) -> Self {
        ComplexityTable {
            mapping: self.mapping.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
            default_complexity: self.default_complexity,
        }
    }

    pub fn complexity_of(&self, maker: &str) -> u8 {
        self.mapping
            .get(&normalize(maker))
            .copied()
            .unwrap_or(self.default_complexity)
    }

    /// All makers listed in the default table, in table order.
    pub fn default_makers() -> impl Iterator<Item = (&'static str, u8)> {
        COMPLEXITY_1
            .iter()
            .map(|m| (*m, 1))
            .chain(COMPLEXITY_2.iter().map(|m| (*m, 2)))
            .chain(COMPLEXITY_3.iter().map(|m| (*m, 3)))
            .chain(COMPLEXITY_4.iter().map(|m| (*m, 4)))
    }
}

/// Repair time: catalog hours for the issue scaled by the maker complexity.
pub fn compute_repair_hours(
    catalog: &IssueCatalog,
    issue: &str,
    issue_id: u32,
    complexity: u8,
) -> Result<f64> {
    if !(1..=4).contains(&complexity) {
        return Err(Error::InvalidInput(format!("complexity {complexity} outside 1..=4")));
    }
    Ok(catalog.base_hours(issue, issue_id)? * f64::from(complexity))
}

/// Repair cost: labor at [`LABOR_RATE`] plus the issue's share of the price.
pub fn compute_repair_cost(
    catalog: &IssueCatalog,
    repair_hours: f64,
    price: f64,
    issue: &str,
    issue_id: u32,
) -> Result<f64> {
    if repair_hours < 0.0 {
        return Err(Error::InvalidInput(format!("negative repair hours {repair_hours}")));
    }
    if price <= 0.0 {
        return Err(Error::InvalidInput(format!("non-positive price {price}")));
    }
    Ok(repair_hours * LABOR_RATE + catalog.cost_ratio(issue, issue_id)? * price)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_shape() {
        let c = IssueCatalog::default();
        c.validate().unwrap();
        assert_eq!(c.entries.len(), 15);
        let subs = |name: &str| c.get(name).unwrap().sub_count();
        assert_eq!(subs("Warning Light"), 8);
        assert_eq!(subs("Electrical Issue"), 5);
        assert_eq!(subs("Engine Issue"), 4);
        assert_eq!(subs("Transmission Issue"), 3);
        let singles = c.entries.iter().filter(|e| e.sub_count() == 1).count();
        assert_eq!(singles, 11);
        assert_eq!(c.cost_ratio("Warning Light", 7).unwrap(), 0.004);
        assert_eq!(c.cost_ratio("Warning Light", 8).unwrap(), 0.01);
    }

    #[test]
    fn complexity_lookup() {
        let t = ComplexityTable::default();
        t.validate().unwrap();
        assert_eq!(t.complexity_of("Volkswagen"), 1);
        assert_eq!(t.complexity_of("Tesla"), 4);
        assert_eq!(t.complexity_of("Ferrari"), 3);
        assert_eq!(t.complexity_of("  ferrari "), 3);
        assert_eq!(t.complexity_of("Skoda"), 1);
        assert_eq!(t.complexity_of("UnknownMaker"), 2);
        assert_eq!(ComplexityTable::default_makers().count(), 88);
    }

    #[test]
    fn repair_hours_examples() {
        let c = IssueCatalog::default();
        assert_eq!(compute_repair_hours(&c, "Flat Tyres", 1, 3).unwrap(), 3.0);
        assert_eq!(compute_repair_hours(&c, "Engine Issue", 2, 1).unwrap(), 16.0);
        assert_eq!(compute_repair_hours(&c, "Tyre Alignment", 1, 2).unwrap(), 1.0);
        assert!(matches!(
            compute_repair_hours(&c, "Flat Tyres", 2, 1),
            Err(Error::UnknownIssue { .. })
        ));
        assert!(compute_repair_hours(&c, "Teleporter", 1, 1).is_err());
    }

    #[test]
    fn repair_cost_examples() {
        let c = IssueCatalog::default();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(compute_repair_cost(&c, 1.0, 10000.0, "Flat Tyres", 1).unwrap(), 23.0));
        assert!(close(compute_repair_cost(&c, 24.0, 30000.0, "Engine Issue", 1).unwrap(), 6480.0));
        assert!(close(compute_repair_cost(&c, 0.5, 1000.0, "Tyre Alignment", 1).unwrap(), 10.1));
        assert!(compute_repair_cost(&c, 1.0, 0.0, "Flat Tyres", 1).is_err());
    }
}
