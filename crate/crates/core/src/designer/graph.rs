use std::collections::BTreeMap;
use std::fmt;

use crate::diagnostics::{Diagnostic, Diagnostics};
use crate::mode_solver::ModeId;
use crate::textfile::read_sections;

/// Normalized length of one path segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentLength {
    /// Unknown to be solved for; the same name in several samples is one
    /// physical, shared segment.
    Variable(String),
    /// Known fraction of the fiber length (`fixed` in graph files means 1).
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub mode: ModeId,
    pub length: SegmentLength,
}

/// One TTDL sample: the modes it travels in, from fiber input to output.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: u32,
    pub segments: Vec<Segment>,
}

/// A mode conversion (one grating) shared by every sample whose path
/// starts with the same segments and then switches to the same mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub from_mode: ModeId,
    pub to_mode: ModeId,
    /// Samples passing through this conversion.
    pub samples: Vec<u32>,
    /// Index of the first segment after the conversion, in the first sample
    /// of `samples`.
    pub segment: usize,
}

/// Per-sample mode paths, ordered by sample label.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionGraph {
    samples: Vec<Sample>,
}

impl ConversionGraph {
    /// Validates and orders the samples by label.
    pub fn new(mut samples: Vec<Sample>) -> Result<Self, String> {
        samples.sort_by_key(|s| s.label);
        for pair in samples.windows(2) {
            if pair[0].label == pair[1].label {
                return Err(format!("sample {} defined twice", pair[0].label));
            }
        }
        let mut var_modes: BTreeMap<&str, ModeId> = BTreeMap::new();
        for s in &samples {
            if s.segments.is_empty() {
                return Err(format!("sample {} has no segments", s.label));
            }
            for pair in s.segments.windows(2) {
                if pair[0].mode == pair[1].mode {
                    return Err(format!(
                        "sample {}: consecutive segments both in {}",
                        s.label, pair[0].mode
                    ));
                }
            }
            for (k, seg) in s.segments.iter().enumerate() {
                match &seg.length {
                    SegmentLength::Constant(v) if !(0.0..=1.0).contains(v) => {
                        return Err(format!(
                            "sample {}: constant length {v} outside [0, 1]",
                            s.label
                        ))
                    }
                    SegmentLength::Constant(_) => {}
                    SegmentLength::Variable(name) => {
                        if let Some(&m) = var_modes.get(name.as_str()) {
                            if m != seg.mode {
                                return Err(format!(
                                    "variable `{name}` is used for both {m} and {}",
                                    seg.mode
                                ));
                            }
                        }
                        var_modes.insert(name, seg.mode);
                        if s.segments[..k].iter().any(|p| p.length == seg.length) {
                            return Err(format!(
                                "sample {}: variable `{name}` used twice in one path",
                                s.label
                            ));
                        }
                    }
                }
            }
        }
        // a shared variable must be the same physical prefix in every sample
        for (name, _) in var_modes {
            let prefixes: Vec<&[Segment]> = samples
                .iter()
                .filter_map(|s| {
                    s.segments
                        .iter()
                        .position(|g| matches!(&g.length, SegmentLength::Variable(v) if v == name))
                        .map(|k| &s.segments[..k])
                })
                .collect();
            if prefixes.windows(2).any(|w| w[0] != w[1]) {
                return Err(format!(
                    "shared variable `{name}` is preceded by different segments in different samples"
                ));
            }
        }
        Ok(ConversionGraph { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Length variables in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.samples {
            for seg in &s.segments {
                if let SegmentLength::Variable(v) = &seg.length {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    pub fn modes(&self) -> Vec<ModeId> {
        let mut out: Vec<ModeId> = Vec::new();
        for seg in self.samples.iter().flat_map(|s| &s.segments) {
            if !out.contains(&seg.mode) {
                out.push(seg.mode);
            }
        }
        out
    }

    /// Distinct mode conversions, in order of first appearance.
    pub fn junctions(&self) -> Vec<Junction> {
        let mut out: Vec<(Vec<Segment>, Junction)> = Vec::new();
        for s in &self.samples {
            for k in 1..s.segments.len() {
                let prefix = s.segments[..k].to_vec();
                let to = s.segments[k].mode;
                match out
                    .iter_mut()
                    .find(|(p, j)| *p == prefix && j.to_mode == to)
                {
                    Some((_, j)) => j.samples.push(s.label),
                    None => out.push((
                        prefix,
                        Junction {
                            from_mode: s.segments[k - 1].mode,
                            to_mode: to,
                            samples: vec![s.label],
                            segment: k,
                        },
                    )),
                }
            }
        }
        out.into_iter().map(|(_, j)| j).collect()
    }

    pub fn sample(&self, label: u32) -> Option<&Sample> {
        self.samples.iter().find(|s| s.label == label)
    }

    /// The fixed topology of the 4-sample ring-core design.
    pub fn ring_core_design() -> Self {
        let v = |name: &str| SegmentLength::Variable(name.to_string());
        let seg = |l, m, length| Segment {
            mode: ModeId::new(l, m),
            length,
        };
        ConversionGraph::new(vec![
            Sample {
                label: 1,
                segments: vec![seg(0, 2, v("l02")), seg(1, 2, v("l12_1"))],
            },
            Sample {
                label: 2,
                segments: vec![
                    seg(0, 2, v("l02")),
                    seg(1, 2, v("l12_2")),
                    seg(0, 1, v("l01_2")),
                    seg(4, 1, v("l41_2")),
                ],
            },
            Sample {
                label: 3,
                segments: vec![
                    seg(0, 2, v("l02")),
                    seg(1, 2, v("l12_3")),
                    seg(1, 1, v("l11_3")),
                    seg(3, 1, v("l31_3")),
                ],
            },
            Sample {
                label: 4,
                segments: vec![seg(2, 1, SegmentLength::Constant(1.0))],
            },
        ])
        .expect("built-in graph is valid")
    }

    /// Parses the `[sample N]` / `segment = LPlm, length` format.
    pub fn parse(text: &str) -> Result<Self, Diagnostics> {
        let sections = read_sections(text).map_err(Diagnostics)?;
        let mut errors = Vec::new();
        for entry in &sections[0].entries {
            errors.push(Diagnostic::at_line(
                entry.line,
                format!("`{}` outside a [sample N] section", entry.key),
            ));
        }
        let mut samples = Vec::new();
        let mut first_line: BTreeMap<u32, usize> = BTreeMap::new();
        for section in &sections[1..] {
            let header = section.header.as_deref().unwrap_or("");
            let label = header
                .strip_prefix("sample")
                .and_then(|n| n.trim().parse::<u32>().ok());
            let Some(label) = label else {
                errors.push(Diagnostic::at_line(
                    section.line,
                    format!("expected `[sample N]`, found `[{header}]`"),
                ));
                continue;
            };
            if let Some(prev) = first_line.insert(label, section.line) {
                errors.push(Diagnostic::at_line(
                    section.line,
                    format!("sample {label} already defined on line {prev}"),
                ));
                continue;
            }
            let mut segments = Vec::new();
            for entry in &section.entries {
                if entry.key != "segment" {
                    errors.push(Diagnostic::at_line(
                        entry.line,
                        format!("unknown key `{}` (expected `segment`)", entry.key),
                    ));
                    continue;
                }
                match parse_segment(&entry.value) {
                    Ok(seg) => segments.push(seg),
                    Err(msg) => errors.push(Diagnostic::at_line(entry.line, msg)),
                }
            }
            if section.entries.is_empty() {
                errors.push(Diagnostic::at_line(
                    section.line,
                    format!("sample {label} has no segments"),
                ));
            }
            samples.push(Sample { label, segments });
        }
        if samples.is_empty() && errors.is_empty() {
            errors.push(Diagnostic::new("graph defines no [sample N] sections"));
        }
        if !errors.is_empty() {
            errors.sort();
            return Err(Diagnostics(errors));
        }
        ConversionGraph::new(samples).map_err(|e| Diagnostics::from(Diagnostic::new(e)))
    }

    pub fn to_file_string(&self) -> String {
        self.to_string()
    }
}

fn parse_segment(value: &str) -> Result<Segment, String> {
    let (mode, length) = value
        .split_once(',')
        .ok_or_else(|| format!("expected `LPlm, <variable|fixed|number>`, found `{value}`"))?;
    let mode: ModeId = mode.trim().parse()?;
    let length = length.trim();
    let length = if length == "fixed" {
        SegmentLength::Constant(1.0)
    } else if let Ok(v) = length.parse::<f64>() {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("constant length {v} outside [0, 1]"));
        }
        SegmentLength::Constant(v)
    } else if !length.is_empty()
        && length.chars().all(|c| c.is_alphanumeric() || c == '_')
        && !length.starts_with(|c: char| c.is_ascii_digit())
    {
        SegmentLength::Variable(length.to_string())
    } else {
        return Err(format!("invalid segment length `{length}`"));
    };
    Ok(Segment { mode, length })
}

impl fmt::Display for ConversionGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.samples.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[sample {}]", s.label)?;
            for seg in &s.segments {
                match &seg.length {
                    SegmentLength::Variable(v) => writeln!(f, "segment = {}, {v}", seg.mode)?,
                    SegmentLength::Constant(c) if *c == 1.0 => {
                        writeln!(f, "segment = {}, fixed", seg.mode)?
                    }
                    SegmentLength::Constant(c) => {
                        writeln!(f, "segment = {}, {}", seg.mode, crate::fmt::num(*c))?
                    }
                }
            }
        }
        Ok(())
    }
}
