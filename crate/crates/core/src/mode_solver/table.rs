use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::diagnostics::{Diagnostic, Diagnostics};
use crate::fmt::num;

/// LP mode label `(l, m)`: azimuthal order `l ≥ 0`, radial order `m ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId {
    pub l: u32,
    pub m: u32,
}

impl ModeId {
    pub const LP01: ModeId = ModeId { l: 0, m: 1 };

    pub const fn new(l: u32, m: u32) -> Self {
        ModeId { l, m }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.l < 10 && self.m < 10 {
            write!(f, "LP{}{}", self.l, self.m)
        } else {
            write!(f, "LP{}_{}", self.l, self.m)
        }
    }
}

impl FromStr for ModeId {
    type Err = String;

    /// Accepts `LP01`, `LP12` (single-digit orders) and `LP10_3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not an LP mode label (expected e.g. LP01 or LP10_3)");
        let body = s
            .trim()
            .strip_prefix("LP")
            .or_else(|| s.trim().strip_prefix("lp"))
            .ok_or_else(bad)?;
        let (l, m) = match body.split_once('_') {
            Some((l, m)) => (l.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?),
            None if body.len() == 2 && body.bytes().all(|b| b.is_ascii_digit()) => (
                (body.as_bytes()[0] - b'0') as u32,
                (body.as_bytes()[1] - b'0') as u32,
            ),
            None => return Err(bad()),
        };
        if m == 0 {
            return Err(format!("`{s}`: radial order must be at least 1"));
        }
        Ok(ModeId { l, m })
    }
}

/// Propagation data for one guided mode at the table's center wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRecord {
    pub id: ModeId,
    pub n_eff: f64,
    /// Group delay per unit length, ps/km.
    pub tau_ps_per_km: f64,
    /// Chromatic dispersion, ps/(km·nm).
    pub dispersion_ps_per_km_nm: f64,
}

/// Guided modes at one wavelength, sorted by descending effective index.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    pub lambda0_nm: f64,
    modes: Vec<ModeRecord>,
}

pub const MODE_TABLE_HEADER: [&str; 6] = [
    "l",
    "m",
    "n_eff",
    "tau_ps_per_km",
    "D_ps_per_km_nm",
    "lambda0_nm",
];

impl ModeTable {
    /// Sorts the records and checks that labels are unique and effective
    /// indices strictly distinct.
    pub fn new(lambda0_nm: f64, mut modes: Vec<ModeRecord>) -> Result<Self, String> {
        modes.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
        for (i, a) in modes.iter().enumerate() {
            if !(a.n_eff.is_finite()
                && a.tau_ps_per_km.is_finite()
                && a.dispersion_ps_per_km_nm.is_finite())
            {
                return Err(format!("{}: non-finite mode data", a.id));
            }
            if modes[..i].iter().any(|b| b.id == a.id) {
                return Err(format!("{} listed twice", a.id));
            }
            if i > 0 && modes[i - 1].n_eff == a.n_eff {
                return Err(format!(
                    "{} and {} share n_eff {}",
                    modes[i - 1].id,
                    a.id,
                    a.n_eff
                ));
            }
        }
        Ok(ModeTable { lambda0_nm, modes })
    }

    pub fn lambda0_um(&self) -> f64 {
        self.lambda0_nm * 1e-3
    }

    pub fn modes(&self) -> &[ModeRecord] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, id: ModeId) -> Option<&ModeRecord> {
        self.modes.iter().find(|r| r.id == id)
    }

    pub fn ids(&self) -> Vec<ModeId> {
        self.modes.iter().map(|r| r.id).collect()
    }

    /// `n_eff[i] - n_eff[i+1]` for consecutive modes.
    pub fn adjacent_separations(&self) -> Vec<f64> {
        self.modes
            .windows(2)
            .map(|w| w[0].n_eff - w[1].n_eff)
            .collect()
    }

    pub fn min_separation(&self) -> Option<f64> {
        self.adjacent_separations().into_iter().reduce(f64::min)
    }

    /// Copy with every record transformed (order is re-established).
    pub fn map_records(&self, f: impl FnMut(&ModeRecord) -> ModeRecord) -> Result<Self, String> {
        ModeTable::new(self.lambda0_nm, self.modes.iter().map(f).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_mode_tables(std::slice::from_ref(self), out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Reads a single-wavelength table.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, Diagnostics> {
        let mut tables = read_mode_tables(input)?;
        match tables.len() {
            1 => Ok(tables.remove(0)),
            0 => Err(Diagnostic::new("mode table is empty").into()),
            n => Err(Diagnostic::new(format!(
                "expected one wavelength, found {n} distinct lambda0_nm values"
            ))
            .into()),
        }
    }
}

/// Writes one or more tables (a sweep) in the shared CSV layout.
pub fn write_mode_tables<W: Write>(tables: &[ModeTable], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MODE_TABLE_HEADER)?;
    for t in tables {
        for r in &t.modes {
            w.write_record([
                r.id.l.to_string(),
                r.id.m.to_string(),
                num(r.n_eff),
                num(r.tau_ps_per_km),
                num(r.dispersion_ps_per_km_nm),
                num(t.lambda0_nm),
            ])?;
        }
    }
    w.flush()
}

/// Reads a CSV with one or more wavelengths, grouped in order of appearance.
pub fn read_mode_tables<R: Read>(input: R) -> Result<Vec<ModeTable>, Diagnostics> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Diagnostics::from(Diagnostic::new(e.to_string())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != MODE_TABLE_HEADER {
        return Err(Diagnostic::at_line(
            1,
            format!("expected header `{}`", MODE_TABLE_HEADER.join(",")),
        )
        .into());
    }
    let mut errors = Vec::new();
    let mut groups: Vec<(f64, Vec<ModeRecord>, usize)> = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize);
                errors.push(Diagnostic {
                    file: None,
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let ints: Result<(u32, u32), _> = field(0)
            .parse()
            .and_then(|l| field(1).parse().map(|m| (l, m)));
        let floats: Result<Vec<f64>, _> = (2..6).map(|i| field(i).parse::<f64>()).collect();
        match (ints, floats) {
            (Ok((l, m)), Ok(v)) if m >= 1 => {
                let rec = ModeRecord {
                    id: ModeId { l, m },
                    n_eff: v[0],
                    tau_ps_per_km: v[1],
                    dispersion_ps_per_km_nm: v[2],
                };
                match groups.iter_mut().find(|g| g.0 == v[3]) {
                    Some(g) => g.1.push(rec),
                    None => groups.push((v[3], vec![rec], line)),
                }
            }
            _ => errors.push(Diagnostic::at_line(line, "malformed mode row")),
        }
    }
    let mut tables = Vec::new();
    for (lambda, modes, line) in groups {
        match ModeTable::new(lambda, modes) {
            Ok(t) => tables.push(t),
            Err(msg) => errors.push(Diagnostic::at_line(line, msg)),
        }
    }
    if errors.is_empty() {
        Ok(tables)
    } else {
        Err(Diagnostics(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!("LP02".parse::<ModeId>().unwrap(), ModeId::new(0, 2));
        assert_eq!("LP10_3".parse::<ModeId>().unwrap(), ModeId::new(10, 3));
        assert_eq!(ModeId::new(4, 1).to_string(), "LP41");
        assert_eq!(ModeId::new(12, 1).to_string(), "LP12_1");
        assert!("LP0".parse::<ModeId>().is_err());
        assert!("LP10".parse::<ModeId>().is_err());
        assert!("XX01".parse::<ModeId>().is_err());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let t = ModeTable::new(
            1550.0,
            vec![
                ModeRecord {
                    id: ModeId::new(1, 1),
                    n_eff: 1.451_956_123_456_789,
                    tau_ps_per_km: 3489.08,
                    dispersion_ps_per_km_nm: 23.77,
                },
                ModeRecord {
                    id: ModeId::LP01,
                    n_eff: 1.452726,
                    tau_ps_per_km: 0.0,
                    dispersion_ps_per_km_nm: 18.96,
                },
            ],
        )
        .unwrap();
        assert_eq!(t.modes()[0].id, ModeId::LP01);
        let text = t.to_csv_string();
        let back = ModeTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_csv_string(), text);
    }

    #[test]
    fn rejects_duplicates_and_bad_rows() {
        let text = "l,m,n_eff,tau_ps_per_km,D_ps_per_km_nm,lambda0_nm\n0,1,1.45,0,18,1550\n0,1,1.44,0,18,1550\n";
        assert!(ModeTable::read_csv(text.as_bytes()).is_err());
        let text = "l,m,n_eff,tau_ps_per_km,D_ps_per_km_nm,lambda0_nm\n0,1,1.45,0,18,1550\nx,1,1.44,0,18,1550\n";
        let err = ModeTable::read_csv(text.as_bytes()).unwrap_err();
        assert_eq!(err.0[0].line, Some(3));
        assert!(ModeTable::read_csv("a,b\n".as_bytes()).is_err());
    }

    #[test]
    fn sweep_files_group_by_wavelength() {
        let text = "l,m,n_eff,tau_ps_per_km,D_ps_per_km_nm,lambda0_nm\n0,1,1.45,0,18,1540\n1,1,1.44,0,18,1540\n0,1,1.449,0,18,1550\n";
        let tables = read_mode_tables(text.as_bytes()).unwrap();
        assert_eq!(tables.len(), 2);
        assert_eq!(tables[0].len(), 2);
        assert!(ModeTable::read_csv(text.as_bytes()).is_err());
    }
}
