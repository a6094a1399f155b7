//! Monthly death series: data model, CSV ingestion, exposures and windows.
//!
//! Deaths arrive as `stratum,year,month,deaths` rows and population as
//! `stratum,year,jan1_population` rows. Stratum labels are opaque strings of
//! the form `COUNTRY[:SEX][:AGEGROUP]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEATHS_HEADER: [&str; 4] = ["stratum", "year", "month", "deaths"];
pub const POPULATION_HEADER: [&str; 3] = ["stratum", "year", "jan1_population"];

/// Calendar month, ordered by `(year, month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct MonthKey {
    year: i32,
    month: u8,
}

impl MonthKey {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self {
            year,
            month: month as u8,
        })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month as u32
    }

    /// Months since year 0, January.
    pub fn ordinal(self) -> i64 {
        self.year as i64 * 12 + self.month as i64 - 1
    }

    pub fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(12) as i32,
            month: (ordinal.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: MonthKey) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for MonthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        MonthKey::new(year, month).ok_or_else(|| format!("month out of range in {s:?}"))
    }
}

impl From<MonthKey> for String {
    fn from(m: MonthKey) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for MonthKey {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

/// Deaths (and optionally exposures) for one stratum over contiguous months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    stratum: String,
    months: Vec<MonthKey>,
    deaths: Vec<u64>,
    exposure: Option<Vec<f64>>,
}

impl MonthlySeries {
    pub fn new(stratum: impl Into<String>, start: MonthKey, deaths: Vec<u64>) -> Result<Self> {
        let stratum = stratum.into();
        if deaths.is_empty() {
            return Err(Error::InvalidSeries(format!("stratum {stratum}: no months")));
        }
        let months = (0..deaths.len() as i64).map(|i| start.add_months(i)).collect();
        Ok(Self {
            stratum,
            months,
            deaths,
            exposure: None,
        })
    }

    pub fn with_exposure(mut self, exposure: Vec<f64>) -> Result<Self> {
        if exposure.len() != self.deaths.len() {
            return Err(Error::ExposureLengthMismatch {
                got: exposure.len(),
                expected: self.deaths.len(),
            });
        }
        if let Some((i, &e)) = exposure
            .iter()
            .enumerate()
            .find(|(_, e)| !(e.is_finite() && **e > 0.0))
        {
            return Err(Error::InvalidSeries(format!(
                "stratum {}: exposure {e} in {} is not positive",
                self.stratum, self.months[i]
            )));
        }
        self.exposure = Some(exposure);
        Ok(self)
    }

    pub fn stratum(&self) -> &str {
        &self.stratum
    }

    pub fn months(&self) -> &[MonthKey] {
        &self.months
    }

    pub fn first_month(&self) -> MonthKey {
        self.months[0]
    }

    pub fn last_month(&self) -> MonthKey {
        self.months[self.months.len() - 1]
    }

    pub fn deaths(&self) -> &[u64] {
        &self.deaths
    }

    pub fn deaths_f64(&self) -> Vec<f64> {
        self.deaths.iter().map(|&d| d as f64).collect()
    }

    pub fn exposure(&self) -> Option<&[f64]> {
        self.exposure.as_deref()
    }

    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    /// Position of `month` in the series, if covered.
    pub fn position(&self, month: MonthKey) -> Option<usize> {
        let offset = self.first_month().months_until(month);
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    /// Death rates `deaths / exposure`; `None` without exposures.
    pub fn rates(&self) -> Option<RateSeries> {
        let exposure = self.exposure.as_ref()?;
        Some(RateSeries {
            months: self.months.clone(),
            rate: self
                .deaths
                .iter()
                .zip(exposure)
                .map(|(&d, &e)| d as f64 / e)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub months: Vec<MonthKey>,
    pub rate: Vec<f64>,
}

fn read_records(csv_text: &str, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let found = reader.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header {}, got {}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", header.len(), record.len()),
            });
        }
        rows.push((line, record));
    }
    Ok(rows)
}

fn field<T: FromStr>(record: &csv::StringRecord, idx: usize, line: usize, name: &str) -> Result<T> {
    record[idx].parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("cannot parse {name} from {:?}", &record[idx]),
    })
}

/// Parses a deaths CSV into one series per stratum, sorted by stratum label.
pub fn parse_monthly_deaths(csv_text: &str) -> Result<Vec<MonthlySeries>> {
    let mut grouped: BTreeMap<String, BTreeMap<MonthKey, u64>> = BTreeMap::new();
    for (line, record) in read_records(csv_text, &DEATHS_HEADER)? {
        let stratum = record[0].to_string();
        if stratum.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty stratum".into(),
            });
        }
        let year: i32 = field(&record, 1, line, "year")?;
        let month_num: u32 = field(&record, 2, line, "month")?;
        let month = MonthKey::new(year, month_num).ok_or_else(|| Error::MalformedRow {
            line,
            reason: format!("month {month_num} outside 1..12"),
        })?;
        let deaths: i64 = field(&record, 3, line, "deaths")?;
        if deaths < 0 {
            return Err(Error::NegativeDeaths { stratum, month });
        }
        let slot = grouped.entry(stratum.clone()).or_default();
        if slot.insert(month, deaths as u64).is_some() {
            return Err(Error::DuplicateMonth { stratum, month });
        }
    }

    grouped
        .into_iter()
        .map(|(stratum, rows)| {
            let start = *rows.keys().next().expect("group has at least one row");
            let mut expected = start;
            for month in rows.keys() {
                if *month != expected {
                    return Err(Error::MissingMonth {
                        stratum,
                        month: expected,
                    });
                }
                expected = expected.add_months(1);
            }
            MonthlySeries::new(stratum, start, rows.into_values().collect())
        })
        .collect()
}

/// Parses a population CSV into `stratum -> year -> population on 1 January`.
pub fn parse_population(csv_text: &str) -> Result<BTreeMap<String, BTreeMap<i32, f64>>> {
    let mut out: BTreeMap<String, BTreeMap<i32, f64>> = BTreeMap::new();
    for (line, record) in read_records(csv_text, &POPULATION_HEADER)? {
        let stratum = record[0].to_string();
        let year: i32 = field(&record, 1, line, "year")?;
        let pop: f64 = field(&record, 2, line, "jan1_population")?;
        if !(pop.is_finite() && pop > 0.0) {
            return Err(Error::NonPositivePopulation {
                stratum,
                year,
                value: pop,
            });
        }
        if out.entry(stratum.clone()).or_default().insert(year, pop).is_some() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("duplicate population year {year} for {stratum}"),
            });
        }
    }
    Ok(out)
}

/// Canonical deaths CSV, sorted by (stratum, year, month), LF line endings.
pub fn serialize_deaths(series: &[MonthlySeries]) -> String {
    let mut sorted: Vec<&MonthlySeries> = series.iter().collect();
    sorted.sort_by(|a, b| a.stratum.cmp(&b.stratum));
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(DEATHS_HEADER).expect("write to Vec");
    for s in sorted {
        for (month, deaths) in s.months.iter().zip(&s.deaths) {
            writer
                .write_record([
                    s.stratum.as_str(),
                    &month.year().to_string(),
                    &month.month().to_string(),
                    &deaths.to_string(),
                ])
                .expect("write to Vec");
        }
    }
    String::from_utf8(writer.into_inner().expect("flush Vec")).expect("csv output is UTF-8")
}

/// Canonical population CSV for a `stratum -> year -> population` map.
pub fn serialize_population(population: &BTreeMap<String, BTreeMap<i32, f64>>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(POPULATION_HEADER).expect("write to Vec");
    for (stratum, years) in population {
        for (year, pop) in years {
            writer
                .write_record([stratum.as_str(), &year.to_string(), &pop.to_string()])
                .expect("write to Vec");
        }
    }
    String::from_utf8(writer.into_inner().expect("flush Vec")).expect("csv output is UTF-8")
}

/// Monthly exposure from 1 January populations: the mid-year population
/// `(pop[Y] + pop[Y+1]) / 2` spread evenly over the 12 months of year `Y`.
pub fn derive_exposure(series: &MonthlySeries, jan1_population: &BTreeMap<i32, f64>) -> Result<MonthlySeries> {
    let lookup = |year: i32| -> Result<f64> {
        let pop = *jan1_population
            .get(&year)
            .ok_or_else(|| Error::MissingPopulationYear {
                stratum: series.stratum.clone(),
                year,
            })?;
        if !(pop.is_finite() && pop > 0.0) {
            return Err(Error::NonPositivePopulation {
                stratum: series.stratum.clone(),
                year,
                value: pop,
            });
        }
        Ok(pop)
    };
    let exposure = series
        .months
        .iter()
        .map(|m| Ok((lookup(m.year())? + lookup(m.year() + 1)?) / 2.0 / 12.0))
        .collect::<Result<Vec<_>>>()?;
    series.clone().with_exposure(exposure)
}

/// Contiguous sub-series of `n_months` starting at `start`.
pub fn window(series: &MonthlySeries, start: MonthKey, n_months: usize) -> Result<MonthlySeries> {
    let out_of_range = || Error::OutOfRange {
        stratum: series.stratum.clone(),
        start,
        len: n_months,
    };
    let from = series.position(start).ok_or_else(out_of_range)?;
    if n_months == 0 || from + n_months > series.len() {
        return Err(out_of_range());
    }
    let range = from..from + n_months;
    Ok(MonthlySeries {
        stratum: series.stratum.clone(),
        months: series.months[range.clone()].to_vec(),
        deaths: series.deaths[range.clone()].to_vec(),
        exposure: series.exposure.as_ref().map(|e| e[range].to_vec()),
    })
}
