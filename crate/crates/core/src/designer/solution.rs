use std::io::{Read, Write};

use crate::diagnostics::{Diagnostic, Diagnostics};
use crate::fmt::num;
use crate::mode_solver::ModeId;

use super::{ConversionGraph, DesignError, LinearSystem, SampleTerms, SegmentLength};

/// Equivalent delay and dispersion of one sample at `λ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDelay {
    pub label: u32,
    /// Relative to the reference mode, ps/km.
    pub tau_eq_ps_per_km: f64,
    pub d_eq_ps_per_km_nm: f64,
}

/// Solved normalized lengths and the resulting sample characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSolution {
    pub lambda0_nm: f64,
    pub reference: ModeId,
    /// Absolute delay of the reference mode (0 for relative input tables).
    pub reference_tau_ps_per_km: f64,
    pub variables: Vec<(String, f64)>,
    pub samples: Vec<SampleDelay>,
    /// Mean increment between adjacent samples.
    pub delta_tau_ps_per_km: f64,
    pub delta_d_ps_per_km_nm: f64,
}

impl PlacementSolution {
    pub(crate) fn from_system(system: &LinearSystem, x: &[f64]) -> Self {
        let n = system.variables.len();
        let lengths = &x[..n];
        let samples: Vec<SampleDelay> = system
            .samples
            .iter()
            .map(|t| SampleDelay {
                label: t.label,
                tau_eq_ps_per_km: SampleTerms::eval(&t.tau, t.tau_constant, lengths),
                d_eq_ps_per_km_nm: SampleTerms::eval(&t.dispersion, t.dispersion_constant, lengths),
            })
            .collect();
        let steps = samples.len().saturating_sub(1).max(1) as f64;
        let (delta_tau, delta_d) = match (samples.first(), samples.last()) {
            (Some(a), Some(b)) if samples.len() > 1 => (
                (b.tau_eq_ps_per_km - a.tau_eq_ps_per_km) / steps,
                if system.has_delta_d {
                    x[n]
                } else {
                    (b.d_eq_ps_per_km_nm - a.d_eq_ps_per_km_nm) / steps
                },
            ),
            _ => (0.0, 0.0),
        };
        PlacementSolution {
            lambda0_nm: system.lambda0_nm,
            reference: system.targets.reference,
            reference_tau_ps_per_km: system.reference_tau_ps_per_km,
            variables: system
                .variables
                .iter()
                .cloned()
                .zip(lengths.iter().copied())
                .collect(),
            samples,
            delta_tau_ps_per_km: delta_tau,
            delta_d_ps_per_km_nm: delta_d,
        }
    }

    pub fn lambda0_um(&self) -> f64 {
        self.lambda0_nm * 1e-3
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.variables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    /// Sample delays relative to the reference mode, ps/km.
    pub fn tau_eq(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau_eq_ps_per_km).collect()
    }

    pub fn d_eq(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.d_eq_ps_per_km_nm).collect()
    }

    /// Normalized length of every segment of `sample`, in path order.
    pub fn segment_lengths(
        &self,
        graph: &ConversionGraph,
        label: u32,
    ) -> Result<Vec<(ModeId, f64)>, DesignError> {
        let sample = graph
            .sample(label)
            .ok_or_else(|| DesignError::Mismatch(format!("graph has no sample {label}")))?;
        sample
            .segments
            .iter()
            .map(|seg| match &seg.length {
                SegmentLength::Constant(c) => Ok((seg.mode, *c)),
                SegmentLength::Variable(v) => self
                    .value(v)
                    .map(|x| (seg.mode, x))
                    .ok_or_else(|| DesignError::Mismatch(format!("no value for variable `{v}`"))),
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["variable", "value"])?;
        for (name, v) in &self.variables {
            w.write_record([name.as_str(), &num(*v)])?;
        }
        w.write_record(["summary", "value"])?;
        w.write_record(["lambda0_nm", &num(self.lambda0_nm)])?;
        w.write_record(["reference_mode", &self.reference.to_string()])?;
        w.write_record([
            "reference_tau_ps_per_km",
            &num(self.reference_tau_ps_per_km),
        ])?;
        for s in &self.samples {
            w.write_record([format!("tau_eq_{}", s.label), num(s.tau_eq_ps_per_km)])?;
        }
        for s in &self.samples {
            w.write_record([format!("D_eq_{}", s.label), num(s.d_eq_ps_per_km_nm)])?;
        }
        w.write_record(["delta_tau", &num(self.delta_tau_ps_per_km)])?;
        w.write_record(["delta_D", &num(self.delta_d_ps_per_km_nm)])?;
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, Diagnostics> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut errors = Vec::new();
        let mut variables = Vec::new();
        let mut summary: Vec<(String, String, usize)> = Vec::new();
        let mut block = 0; // 0: before header, 1: variables, 2: summary
        for record in reader.records() {
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    errors.push(Diagnostic {
                        file: None,
                        line: e.position().map(|p| p.line() as usize),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            if record.len() != 2 {
                errors.push(Diagnostic::at_line(line, "expected two fields"));
                continue;
            }
            let (key, value) = (&record[0], &record[1]);
            match (block, key, value) {
                (0, "variable", "value") => block = 1,
                (0, _, _) => {
                    errors.push(Diagnostic::at_line(
                        line,
                        "expected header `variable,value`",
                    ));
                    break;
                }
                (1, "summary", "value") => block = 2,
                (1, _, _) => match value.parse::<f64>() {
                    Ok(v) => variables.push((key.to_string(), v)),
                    Err(_) => errors.push(Diagnostic::at_line(
                        line,
                        format!("`{key}`: bad number `{value}`"),
                    )),
                },
                _ => summary.push((key.to_string(), value.to_string(), line)),
            }
        }
        if block < 2 && errors.is_empty() {
            errors.push(Diagnostic::new("missing `summary,value` block"));
        }
        let mut lambda0 = None;
        let mut reference = None;
        let mut reference_tau = None;
        let mut delta_tau = None;
        let mut delta_d = None;
        let mut taus: Vec<(u32, f64)> = Vec::new();
        let mut ds: Vec<(u32, f64)> = Vec::new();
        for (key, value, line) in &summary {
            let number = || {
                value.parse::<f64>().map_err(|_| {
                    Diagnostic::at_line(*line, format!("`{key}`: bad number `{value}`"))
                })
            };
            let result = match key.as_str() {
                "lambda0_nm" => number().map(|v| lambda0 = Some(v)),
                "reference_mode" => value
                    .parse::<ModeId>()
                    .map(|m| reference = Some(m))
                    .map_err(|e| Diagnostic::at_line(*line, e)),
                "reference_tau_ps_per_km" => number().map(|v| reference_tau = Some(v)),
                "delta_tau" => number().map(|v| delta_tau = Some(v)),
                "delta_D" => number().map(|v| delta_d = Some(v)),
                k => {
                    let indexed =
                        |prefix: &str| k.strip_prefix(prefix).and_then(|n| n.parse::<u32>().ok());
                    if let Some(i) = indexed("tau_eq_") {
                        number().map(|v| taus.push((i, v)))
                    } else if let Some(i) = indexed("D_eq_") {
                        number().map(|v| ds.push((i, v)))
                    } else {
                        Err(Diagnostic::at_line(
                            *line,
                            format!("unknown summary key `{k}`"),
                        ))
                    }
                }
            };
            if let Err(d) = result {
                errors.push(d);
            }
        }
        let tau_labels: Vec<u32> = taus.iter().map(|t| t.0).collect();
        let d_labels: Vec<u32> = ds.iter().map(|t| t.0).collect();
        if tau_labels != d_labels {
            errors.push(Diagnostic::new(
                "tau_eq_N and D_eq_N entries do not cover the same samples",
            ));
        }
        let missing: Vec<&str> = [
            ("lambda0_nm", lambda0.is_none()),
            ("reference_mode", reference.is_none()),
            ("reference_tau_ps_per_km", reference_tau.is_none()),
            ("delta_tau", delta_tau.is_none()),
            ("delta_D", delta_d.is_none()),
        ]
        .iter()
        .filter(|(_, m)| *m)
        .map(|(k, _)| *k)
        .collect();
        if !missing.is_empty() && block == 2 {
            errors.push(Diagnostic::new(format!(
                "summary is missing {}",
                missing.join(", ")
            )));
        }
        if !errors.is_empty() {
            errors.sort();
            return Err(Diagnostics(errors));
        }
        Ok(PlacementSolution {
            lambda0_nm: lambda0.unwrap(),
            reference: reference.unwrap(),
            reference_tau_ps_per_km: reference_tau.unwrap(),
            variables,
            samples: taus
                .iter()
                .zip(&ds)
                .map(|(t, d)| SampleDelay {
                    label: t.0,
                    tau_eq_ps_per_km: t.1,
                    d_eq_ps_per_km_nm: d.1,
                })
                .collect(),
            delta_tau_ps_per_km: delta_tau.unwrap(),
            delta_d_ps_per_km_nm: delta_d.unwrap(),
        })
    }
}

/// Where one grating sits along a fiber of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpgPosition {
    pub junction: usize,
    pub from_mode: ModeId,
    pub to_mode: ModeId,
    pub z_km: f64,
}

pub const LPG_HEADER: [&str; 4] = ["junction", "from_mode", "to_mode", "z_km"];

/// Grating positions `z = L - (downstream normalized length)·L`, sorted by
/// `z` and numbered from 1 in that order.
pub fn lpg_positions(
    solution: &PlacementSolution,
    graph: &ConversionGraph,
    length_km: f64,
) -> Result<Vec<LpgPosition>, DesignError> {
    if !(length_km > 0.0 && length_km.is_finite()) {
        return Err(DesignError::Targets(format!(
            "fiber length must be positive, got {length_km}"
        )));
    }
    let mut out = Vec::new();
    for j in graph.junctions() {
        let lengths = solution.segment_lengths(graph, j.samples[0])?;
        let downstream: f64 = lengths[j.segment..].iter().map(|(_, l)| l).sum();
        let z = (length_km - downstream * length_km).clamp(0.0, length_km);
        out.push(LpgPosition {
            junction: 0,
            from_mode: j.from_mode,
            to_mode: j.to_mode,
            z_km: z,
        });
    }
    out.sort_by(|a, b| a.z_km.total_cmp(&b.z_km));
    for (i, p) in out.iter_mut().enumerate() {
        p.junction = i + 1;
    }
    Ok(out)
}

pub fn write_lpg_positions<W: Write>(positions: &[LpgPosition], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LPG_HEADER)?;
    for p in positions {
        w.write_record([
            p.junction.to_string(),
            p.from_mode.to_string(),
            p.to_mode.to_string(),
            num(p.z_km),
        ])?;
    }
    w.flush()
}

pub fn read_lpg_positions<R: Read>(input: R) -> Result<Vec<LpgPosition>, Diagnostics> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header_ok = reader
        .headers()
        .map(|h| h.iter().collect::<Vec<_>>() == LPG_HEADER)
        .unwrap_or(false);
    if !header_ok {
        return Err(
            Diagnostic::at_line(1, format!("expected header `{}`", LPG_HEADER.join(","))).into(),
        );
    }
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for record in reader.records() {
        let Ok(record) = record else {
            errors.push(Diagnostic::new("unreadable row"));
            continue;
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let parsed = (|| {
            Some(LpgPosition {
                junction: record.get(0)?.parse().ok()?,
                from_mode: record.get(1)?.parse().ok()?,
                to_mode: record.get(2)?.parse().ok()?,
                z_km: record.get(3)?.parse().ok()?,
            })
        })();
        match parsed {
            Some(p) => out.push(p),
            None => errors.push(Diagnostic::at_line(line, "malformed grating row")),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(Diagnostics(errors))
    }
}
