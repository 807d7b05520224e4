//! Reader for the subset of the EPANET INP format needed for steady-state
//! snapshots.

use std::collections::{BTreeSet, HashMap};

use super::units::FlowUnits;
use super::{Network, NetworkBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Title,
    Junctions,
    Reservoirs,
    Tanks,
    Pipes,
    Pumps,
    Valves,
    Curves,
    Demands,
    Coordinates,
    Options,
    Skipped,
}

impl Section {
    fn from_header(header: &str) -> Self {
        match header.to_ascii_uppercase().as_str() {
            "[TITLE]" => Self::Title,
            "[JUNCTIONS]" => Self::Junctions,
            "[RESERVOIRS]" => Self::Reservoirs,
            "[TANKS]" => Self::Tanks,
            "[PIPES]" => Self::Pipes,
            "[PUMPS]" => Self::Pumps,
            "[VALVES]" => Self::Valves,
            "[CURVES]" => Self::Curves,
            "[DEMANDS]" => Self::Demands,
            "[COORDINATES]" => Self::Coordinates,
            "[OPTIONS]" => Self::Options,
            _ => Self::Skipped,
        }
    }
}

struct Row<'a> {
    line: usize,
    fields: Vec<&'a str>,
    raw: &'a str,
}

impl Row<'_> {
    fn need(&self, count: usize) -> Result<()> {
        if self.fields.len() < count {
            return Err(Error::Parse {
                line: self.line,
                message: format!("expected at least {count} fields, got {}", self.fields.len()),
            });
        }
        Ok(())
    }

    fn num(&self, i: usize) -> Result<f64> {
        let token = self.fields[i];
        token.parse::<f64>().map_err(|_| Error::Parse {
            line: self.line,
            message: format!("'{token}' is not a number"),
        })
    }

    fn opt_num(&self, i: usize) -> Result<Option<f64>> {
        if i < self.fields.len() {
            self.num(i).map(Some)
        } else {
            Ok(None)
        }
    }
}

/// Parses INP text into a validated [`Network`].
///
/// Demands given in `[DEMANDS]` replace the junction's base demand (categories
/// are summed). Unsupported sections are skipped with a warning.
pub fn parse_inp(text: &str) -> Result<Network> {
    let mut rows: HashMap<Section, Vec<Row<'_>>> = HashMap::new();
    let mut seen = BTreeSet::new();
    let mut skipped = BTreeSet::new();
    let mut section = Section::Skipped;

    for (i, line) in text.lines().enumerate() {
        let raw = line.trim_end_matches('\r');
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            section = Section::from_header(content);
            if section == Section::Skipped {
                skipped.insert(content.to_ascii_uppercase());
            } else {
                seen.insert(section as u8);
            }
            continue;
        }
        if section == Section::Skipped {
            continue;
        }
        rows.entry(section).or_default().push(Row {
            line: i + 1,
            fields: content.split_whitespace().collect(),
            raw: content,
        });
    }

    // sections without effect on a steady demand-driven snapshot
    const INERT: [&str; 13] = [
        "[END]", "[TAGS]", "[PATTERNS]", "[VERTICES]", "[LABELS]", "[BACKDROP]", "[REPORT]",
        "[TIMES]", "[QUALITY]", "[REACTIONS]", "[MIXING]", "[SOURCES]", "[ENERGY]",
    ];
    let ignored: Vec<&str> = skipped
        .iter()
        .map(String::as_str)
        .filter(|s| !INERT.contains(s))
        .collect();
    if !ignored.is_empty() {
        log::warn!("ignoring sections {}", ignored.join(" "));
    }

    if !seen.contains(&(Section::Junctions as u8)) {
        return Err(Error::MissingSection("JUNCTIONS"));
    }
    if ![Section::Pipes, Section::Pumps, Section::Valves]
        .iter()
        .any(|s| seen.contains(&(*s as u8)))
    {
        return Err(Error::MissingSection("PIPES"));
    }

    let take = |s: Section| rows.get(&s).map(Vec::as_slice).unwrap_or(&[]);

    let mut units = FlowUnits::Gpm;
    for row in take(Section::Options) {
        let key = row.fields[0].to_ascii_uppercase();
        match key.as_str() {
            "UNITS" => {
                row.need(2)?;
                units = FlowUnits::parse(row.fields[1])?;
            }
            "HEADLOSS" => {
                row.need(2)?;
                if !row.fields[1].eq_ignore_ascii_case("H-W") {
                    return Err(Error::Unsupported(format!(
                        "headloss formula '{}' (only H-W)",
                        row.fields[1]
                    )));
                }
            }
            _ => {}
        }
    }
    let q = units.to_cfs();
    let len = units.length_to_ft();
    let dia = units.diameter_to_ft();

    let title = take(Section::Title)
        .iter()
        .map(|r| r.raw)
        .collect::<Vec<_>>()
        .join(" ");
    let mut builder = NetworkBuilder::new().title(title);

    let mut demand_overrides: HashMap<&str, f64> = HashMap::new();
    for row in take(Section::Demands) {
        row.need(2)?;
        *demand_overrides.entry(row.fields[0]).or_insert(0.0) += row.num(1)? * q;
    }

    for row in take(Section::Junctions) {
        row.need(2)?;
        let name = row.fields[0];
        let base = match demand_overrides.get(name) {
            Some(d) => *d,
            None => row.opt_num(2)?.unwrap_or(0.0) * q,
        };
        // negative demands are inflows; the demand model has no sources
        let base = if base < 0.0 {
            log::warn!("junction '{name}' has negative demand {base} cfs, using 0");
            0.0
        } else {
            base
        };
        builder = builder.junction(name, row.num(1)? * len, base);
    }

    // fixed-head nodes in order of first appearance in the file
    let mut fixed: Vec<(usize, &Row<'_>, bool)> = take(Section::Reservoirs)
        .iter()
        .map(|r| (r.line, r, false))
        .chain(take(Section::Tanks).iter().map(|r| (r.line, r, true)))
        .collect();
    fixed.sort_by_key(|(line, _, _)| *line);
    for (_, row, is_tank) in fixed {
        if is_tank {
            row.need(3)?;
            builder = builder.tank(row.fields[0], row.num(1)? * len, row.num(2)? * len);
        } else {
            row.need(2)?;
            builder = builder.reservoir(row.fields[0], row.num(1)? * len);
        }
    }

    for row in take(Section::Pipes) {
        row.need(6)?;
        builder = builder.pipe(
            row.fields[0],
            row.fields[1],
            row.fields[2],
            row.num(3)? * len,
            row.num(4)? * dia,
            row.num(5)?,
        );
    }

    let mut curves: HashMap<&str, Vec<(f64, f64)>> = HashMap::new();
    for row in take(Section::Curves) {
        row.need(3)?;
        curves
            .entry(row.fields[0])
            .or_default()
            .push((row.num(1)? * q, row.num(2)? * len));
    }

    for row in take(Section::Pumps) {
        row.need(3)?;
        let mut curve_id = None;
        let mut params = row.fields[3..].iter();
        while let Some(key) = params.next() {
            let value = params.next().ok_or_else(|| Error::Parse {
                line: row.line,
                message: format!("pump keyword '{key}' has no value"),
            })?;
            match key.to_ascii_uppercase().as_str() {
                "HEAD" => curve_id = Some(*value),
                "POWER" => {
                    return Err(Error::Unsupported(format!(
                        "constant-power pump '{}'",
                        row.fields[0]
                    )))
                }
                _ => {}
            }
        }
        let curve_id = curve_id.ok_or_else(|| Error::Parse {
            line: row.line,
            message: format!("pump '{}' has no HEAD curve", row.fields[0]),
        })?;
        let curve = curves
            .get(curve_id)
            .cloned()
            .ok_or_else(|| Error::UnknownCurve {
                pump: row.fields[0].to_string(),
                curve: curve_id.to_string(),
            })?;
        builder = builder.pump(row.fields[0], row.fields[1], row.fields[2], curve);
    }

    for row in take(Section::Valves) {
        row.need(5)?;
        builder = builder.valve(
            row.fields[0],
            row.fields[1],
            row.fields[2],
            row.num(3)? * dia,
            row.fields[4],
        );
    }

    for row in take(Section::Coordinates) {
        row.need(3)?;
        builder = builder.coordinates(row.fields[0], row.num(1)?, row.num(2)?);
    }

    builder.build()
}
