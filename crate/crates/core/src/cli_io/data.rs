use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::Dataset;

use super::format::machine;

/// Which CSV columns play which part in the analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRoles {
    pub exposure: String,
    pub mediators: Vec<String>,
    pub outcomes: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl ColumnRoles {
    pub fn validate(&self) -> Result<()> {
        if self.mediators.is_empty() {
            return Err(Error::config("/columns/mediators", "at least one mediator column is required"));
        }
        if self.outcomes.is_empty() {
            return Err(Error::config("/columns/outcomes", "at least one outcome column is required"));
        }
        let mut seen = BTreeSet::new();
        let named = std::iter::once(("/columns/exposure".to_string(), &self.exposure))
            .chain(self.mediators.iter().enumerate().map(|(i, c)| (format!("/columns/mediators/{i}"), c)))
            .chain(self.outcomes.iter().enumerate().map(|(i, c)| (format!("/columns/outcomes/{i}"), c)))
            .chain(self.covariates.iter().enumerate().map(|(i, c)| (format!("/columns/covariates/{i}"), c)));
        for (path, col) in named {
            if col.is_empty() {
                return Err(Error::config(path, "column name is empty"));
            }
            if !seen.insert(col.as_str()) {
                return Err(Error::config(path, format!("column `{col}` is assigned more than one role")));
            }
        }
        Ok(())
    }

    fn columns(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.exposure)
            .chain(&self.mediators)
            .chain(&self.outcomes)
            .chain(&self.covariates)
    }
}

/// Numeric columns of a CSV file, restricted to the columns named by a
/// [`ColumnRoles`]. Empty cells are `None`.
#[derive(Debug, Clone)]
pub struct Table {
    rows: usize,
    columns: HashMap<String, Vec<Option<f64>>>,
}

impl Table {
    /// Reads a comma-delimited, header-first file.
    pub fn read_path(path: &Path, roles: &ColumnRoles) -> Result<Self> {
        Self::read(std::fs::File::open(path)?, roles)
    }

    /// Parse errors report 1-based data rows, not counting the header.
    pub fn read<R: Read>(reader: R, roles: &ColumnRoles) -> Result<Self> {
        roles.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut wanted = Vec::new();
        for name in roles.columns() {
            match headers.iter().position(|h| h == name) {
                Some(idx) => wanted.push((name.clone(), idx)),
                None => return Err(Error::MissingColumn(name.clone())),
            }
        }
        let mut columns: HashMap<String, Vec<Option<f64>>> =
            wanted.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
        let mut rows = 0;
        for record in rdr.records() {
            let record = record?;
            rows += 1;
            for (name, idx) in &wanted {
                let cell = record.get(*idx).unwrap_or("");
                let value = if cell.is_empty() {
                    None
                } else {
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => Some(v),
                        _ => {
                            return Err(Error::Parse {
                                row: rows,
                                column: name.clone(),
                                value: cell.to_string(),
                            })
                        }
                    }
                };
                columns.get_mut(name).expect("column registered").push(value);
            }
        }
        Ok(Self { rows, columns })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Dataset for one `(mediator, outcome)` pair after listwise deletion of
    /// rows with a missing value in any active column.
    pub fn pair_dataset(&self, roles: &ColumnRoles, mediator: &str, outcome: &str) -> Result<PairDataset> {
        let active: Vec<&[Option<f64>]> = [roles.exposure.as_str(), mediator, outcome]
            .into_iter()
            .chain(roles.covariates.iter().map(String::as_str))
            .map(|c| self.column(c))
            .collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.rows)
            .filter(|&r| active.iter().all(|col| col[r].is_some()))
            .collect();
        let dropped = self.rows - keep.len();
        if dropped > 0 {
            log::info!("{mediator} -> {outcome}: dropped {dropped} of {} rows with missing values", self.rows);
        }
        let take = |col: &[Option<f64>]| -> Vec<f64> { keep.iter().map(|&r| col[r].unwrap_or(f64::NAN)).collect() };
        let q = roles.covariates.len();
        if keep.len() < q + 4 {
            return Err(Error::InsufficientData(format!(
                "{mediator} -> {outcome}: {} complete rows, the outcome regression with {q} covariates needs {}",
                keep.len(),
                q + 4
            )));
        }
        let dataset = Dataset::new(
            take(active[0]),
            take(active[1]),
            take(active[2]),
            active[3..].iter().map(|c| take(c)).collect(),
        )?
        .with_covariate_names(roles.covariates.clone())?
        .with_row_ids(keep.iter().map(|r| (r + 1).to_string()).collect())?;
        Ok(PairDataset {
            mediator: mediator.to_string(),
            outcome: outcome.to_string(),
            dataset,
            dropped,
        })
    }

    /// Every `(mediator, outcome)` combination; outcomes vary slowest.
    pub fn pairs<'a>(&self, roles: &'a ColumnRoles) -> Vec<(&'a str, &'a str)> {
        roles
            .outcomes
            .iter()
            .flat_map(|o| roles.mediators.iter().map(move |m| (m.as_str(), o.as_str())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub mediator: String,
    pub outcome: String,
    pub dataset: Dataset,
    /// Rows removed by listwise deletion.
    pub dropped: usize,
}

/// Loads one dataset per `(mediator, outcome)` pair, failing on the first
/// pair that cannot be built.
pub fn load_csv(path: &Path, roles: &ColumnRoles) -> Result<Vec<PairDataset>> {
    let table = Table::read_path(path, roles)?;
    table
        .pairs(roles)
        .into_iter()
        .map(|(m, o)| table.pair_dataset(roles, m, o))
        .collect()
}

/// Writes `ds` with header `exposure, mediator, outcome, covariates...` at
/// 17 significant digits, so that reloading reproduces every value.
pub fn write_dataset_csv<W: Write>(ds: &Dataset, roles: &ColumnRoles, writer: W) -> Result<()> {
    let mediator = roles.mediators.first().map_or("G", String::as_str);
    let outcome = roles.outcomes.first().map_or("Y", String::as_str);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![roles.exposure.as_str(), mediator, outcome];
    header.extend(ds.covariate_names().iter().map(String::as_str));
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut row = vec![machine(ds.s()[i]), machine(ds.g()[i]), machine(ds.y()[i])];
        row.extend(ds.covariates().iter().map(|c| machine(c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
