//! Mass-spectrum range tables in a simplified RRNG dialect.
//!
//! ```text
//! [Ions]
//! Number=2
//! Ion1=Nb
//! Ion2=N
//! [Ranges]
//! Number=1
//! Range1=106.40 107.40 Nb:1 N:1 tag=R3   # NbN+
//! ```
//!
//! Windows are half-open, `[low, high)`. When the `[Ions]` section is
//! absent, any element symbol is accepted and the element list is taken
//! from the ranges in order of first appearance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::elements::{is_element_symbol, nominal_mass};
use super::epos::IonEvent;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesRange {
    pub name: String,
    pub mz_low: f64,
    pub mz_high: f64,
    /// Element symbol and atom count, in declaration order.
    pub composition: Vec<(String, u32)>,
    pub pair_tag: Option<String>,
}

impl SpeciesRange {
    pub fn new(mz_low: f64, mz_high: f64, composition: Vec<(String, u32)>) -> Self {
        let name = formula(&composition);
        SpeciesRange {
            name,
            mz_low,
            mz_high,
            composition,
            pair_tag: None,
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.pair_tag = Some(tag.into());
        self
    }

    #[inline]
    pub fn contains(&self, mz: f64) -> bool {
        self.mz_low <= mz && mz < self.mz_high
    }

    pub fn count_of(&self, element: &str) -> u32 {
        self.composition
            .iter()
            .find(|(e, _)| e == element)
            .map_or(0, |&(_, n)| n)
    }

    pub fn atom_count(&self) -> u32 {
        self.composition.iter().map(|(_, n)| n).sum()
    }

    /// Molecular mass from the built-in table, when every element is known.
    pub fn nominal_mass(&self) -> Option<f64> {
        self.composition
            .iter()
            .map(|(e, n)| nominal_mass(e).map(|m| m * *n as f64))
            .sum()
    }
}

fn formula(composition: &[(String, u32)]) -> String {
    let mut s = String::new();
    for (el, n) in composition {
        s.push_str(el);
        if *n > 1 {
            let _ = write!(s, "{n}");
        }
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RangeTable {
    ranges: Vec<SpeciesRange>,
    elements: Vec<String>,
}

impl RangeTable {
    /// Builds a validated table. Ranges are sorted by lower bound.
    pub fn new(mut ranges: Vec<SpeciesRange>, elements: Vec<String>) -> Result<Self> {
        for r in &ranges {
            if !(r.mz_low.is_finite() && r.mz_high.is_finite()) {
                return Err(Error::RangeValidation(format!("range {} has non-finite bounds", r.name)));
            }
            if r.mz_low >= r.mz_high {
                return Err(Error::RangeValidation(format!(
                    "range {} has low bound {} >= high bound {}",
                    r.name, r.mz_low, r.mz_high
                )));
            }
            if r.composition.is_empty() {
                return Err(Error::RangeValidation(format!(
                    "range [{}, {}) declares no composition",
                    r.mz_low, r.mz_high
                )));
            }
            for (el, _) in &r.composition {
                if !elements.contains(el) {
                    return Err(Error::RangeValidation(format!(
                        "range {} uses undeclared element `{el}`",
                        r.name
                    )));
                }
            }
        }
        ranges.sort_by(|a, b| a.mz_low.total_cmp(&b.mz_low));
        for w in ranges.windows(2) {
            if w[1].mz_low < w[0].mz_high {
                return Err(Error::RangeValidation(format!(
                    "overlapping ranges {} [{}, {}) and {} [{}, {})",
                    w[0].name, w[0].mz_low, w[0].mz_high, w[1].name, w[1].mz_low, w[1].mz_high
                )));
            }
        }
        Ok(RangeTable { ranges, elements })
    }

    pub fn ranges(&self) -> &[SpeciesRange] {
        &self.ranges
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&SpeciesRange> {
        self.ranges.get(index)
    }

    pub fn tag_of(&self, index: usize) -> Option<&str> {
        self.ranges.get(index)?.pair_tag.as_deref()
    }

    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        self.ranges.iter().position(|r| r.name == name)
    }

    pub fn index_of_tag(&self, tag: &str) -> Option<usize> {
        self.ranges.iter().position(|r| r.pair_tag.as_deref() == Some(tag))
    }

    /// Index of the range containing `mz`, or `None` when unranged.
    pub fn assign(&self, mz: f64) -> Option<usize> {
        let i = self.ranges.partition_point(|r| r.mz_low <= mz);
        if i == 0 {
            return None;
        }
        let cand = i - 1;
        self.ranges[cand].contains(mz).then_some(cand)
    }

    /// Serializes back to the simplified RRNG dialect.
    pub fn to_rrng(&self) -> String {
        let mut s = String::new();
        s.push_str("[Ions]\n");
        let _ = writeln!(s, "Number={}", self.elements.len());
        for (i, el) in self.elements.iter().enumerate() {
            let _ = writeln!(s, "Ion{}={el}", i + 1);
        }
        s.push_str("[Ranges]\n");
        let _ = writeln!(s, "Number={}", self.ranges.len());
        for (i, r) in self.ranges.iter().enumerate() {
            let _ = write!(s, "Range{}={:.4} {:.4}", i + 1, r.mz_low, r.mz_high);
            for (el, n) in &r.composition {
                let _ = write!(s, " {el}:{n}");
            }
            if let Some(tag) = &r.pair_tag {
                let _ = write!(s, " tag={tag}");
            }
            if r.name != formula(&r.composition) {
                let _ = write!(s, " name={}", r.name);
            }
            s.push('\n');
        }
        s
    }
}

/// Species index of `event` in `table`, `None` when no window covers its mass.
pub fn assign_species(event: &IonEvent, table: &RangeTable) -> Option<usize> {
    table.assign(event.mz as f64)
}

pub fn assign_all(events: &[IonEvent], table: &RangeTable) -> Vec<Option<usize>> {
    events.iter().map(|e| assign_species(e, table)).collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Ions,
    Ranges,
    Unknown,
}

const VENDOR_KEYS: [&str; 3] = ["vol", "color", "name"];

pub fn parse_range_file(text: &str) -> Result<RangeTable> {
    let mut section = Section::None;
    let mut declared: Option<Vec<String>> = None;
    let mut seen_elements: Vec<String> = Vec::new();
    let mut ranges = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            let name = line
                .strip_prefix('[')
                .and_then(|l| l.strip_suffix(']'))
                .ok_or_else(|| Error::RangeSyntax {
                    line: line_no,
                    message: format!("malformed section header `{line}`"),
                })?
                .trim();
            section = match name.to_ascii_lowercase().as_str() {
                "ions" => {
                    declared.get_or_insert_with(Vec::new);
                    Section::Ions
                }
                "ranges" => Section::Ranges,
                _ => {
                    log::warn!("range file line {line_no}: ignoring unknown section [{name}]");
                    Section::Unknown
                }
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::RangeSyntax {
                line: line_no,
                message: format!("expected key=value, found `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let lkey = key.to_ascii_lowercase();
        match section {
            Section::Unknown => {}
            Section::None => {
                return Err(Error::RangeSyntax {
                    line: line_no,
                    message: "entry outside of any section".into(),
                })
            }
            _ if lkey == "number" => {
                if value.parse::<usize>().is_err() {
                    return Err(Error::RangeSyntax {
                        line: line_no,
                        message: format!("invalid Number `{value}`"),
                    });
                }
            }
            Section::Ions if lkey.starts_with("ion") => {
                if !is_element_symbol(value) {
                    return Err(Error::RangeValidation(format!(
                        "line {line_no}: unknown element symbol `{value}`"
                    )));
                }
                let list = declared.get_or_insert_with(Vec::new);
                if list.iter().any(|e| e == value) {
                    log::warn!("range file line {line_no}: element {value} declared twice");
                } else {
                    list.push(value.to_string());
                }
            }
            Section::Ranges if lkey.starts_with("range") => {
                let r = parse_range_line(value, line_no, declared.as_deref())?;
                for (el, _) in &r.composition {
                    if !seen_elements.contains(el) {
                        seen_elements.push(el.clone());
                    }
                }
                ranges.push(r);
            }
            _ => log::warn!("range file line {line_no}: ignoring unknown key `{key}`"),
        }
    }

    let table = RangeTable::new(ranges, declared.unwrap_or(seen_elements))?;
    for r in table.ranges() {
        if let Some(m) = r.nominal_mass() {
            let plausible = (1..=4).any(|q| {
                let mq = m / q as f64;
                mq >= r.mz_low - 0.5 && mq < r.mz_high + 0.5
            });
            if !plausible {
                log::warn!(
                    "range {} [{}, {}) does not bracket any charge state of its nominal mass {m:.3} Da",
                    r.name,
                    r.mz_low,
                    r.mz_high
                );
            }
        }
    }
    Ok(table)
}

fn parse_range_line(value: &str, line: usize, declared: Option<&[String]>) -> Result<SpeciesRange> {
    let syntax = |message: String| Error::RangeSyntax { line, message };
    let mut tokens = value.split_whitespace();
    let mut bound = |what: &str| -> Result<f64> {
        let tok = tokens.next().ok_or_else(|| syntax(format!("missing {what} bound")))?;
        tok.parse::<f64>()
            .map_err(|_| syntax(format!("invalid {what} bound `{tok}`")))
    };
    let low = bound("low")?;
    let high = bound("high")?;
    if low >= high {
        return Err(Error::RangeValidation(format!(
            "line {line}: low bound {low} >= high bound {high}"
        )));
    }

    let mut composition: Vec<(String, u32)> = Vec::new();
    let mut tag = None;
    let mut name = None;
    for tok in tokens {
        if let Some((k, v)) = tok.split_once('=') {
            match k.to_ascii_lowercase().as_str() {
                "tag" => tag = Some(v.to_string()),
                "name" => name = Some(v.to_string()),
                _ => log::warn!("range file line {line}: ignoring unknown key `{k}`"),
            }
            continue;
        }
        let Some((el, n)) = tok.split_once(':') else {
            return Err(syntax(format!("unrecognized token `{tok}`")));
        };
        if VENDOR_KEYS.contains(&el.to_ascii_lowercase().as_str()) {
            log::warn!("range file line {line}: ignoring vendor field `{el}`");
            continue;
        }
        let known = match declared {
            Some(list) => list.iter().any(|e| e == el),
            None => is_element_symbol(el),
        };
        if !known {
            return Err(Error::RangeValidation(format!(
                "line {line}: unknown element symbol `{el}`"
            )));
        }
        let count: u32 = n
            .parse()
            .map_err(|_| syntax(format!("invalid atom count `{n}` for {el}")))?;
        if count == 0 {
            continue;
        }
        match composition.iter_mut().find(|(e, _)| e == el) {
            Some(entry) => entry.1 += count,
            None => composition.push((el.to_string(), count)),
        }
    }
    let mut r = SpeciesRange::new(low, high, composition);
    r.pair_tag = tag;
    if let Some(name) = name {
        r.name = name;
    }
    Ok(r)
}
